use serde::{Deserialize, Serialize};

use super::CoefficientSet;
use crate::design::DesignTensor;
use crate::error::{Error, Result};
use crate::tensor::{tucker_apply, Tensor4};

/// Noise-free forward map with self-dyads forced to zero.
pub fn predict(design: &DesignTensor, c: &CoefficientSet) -> Result<Tensor4> {
    c.check_design(design)?;
    let mut out = tucker_apply(design.data(), &c.b1, &c.b2, &c.b3)?;
    out.zero_diagonal();
    Ok(out)
}

/// In-sample RMSE of every directed dyad's time series, per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub num_actors: usize,
    pub num_variables: usize,
    /// `(sender, receiver, variable, rmse)`, senders outermost, self-dyads absent.
    pub entries: Vec<(usize, usize, usize, f64)>,
}

impl RmseTable {
    pub fn for_variable(&self, w: usize) -> impl Iterator<Item = &(usize, usize, usize, f64)> {
        self.entries.iter().filter(move |e| e.2 == w)
    }

    pub fn get(&self, sender: usize, receiver: usize, variable: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.0 == sender && e.1 == receiver && e.2 == variable)
            .map(|e| e.3)
    }
}

pub fn rmse_per_dyad(observed: &Tensor4, predicted: &Tensor4) -> Result<RmseTable> {
    let dims = observed.dims();
    if dims != predicted.dims() || dims[0] != dims[1] {
        return Err(Error::dims(
            "rmse_per_dyad",
            format!("observed {:?} vs predicted {:?}", dims, predicted.dims()),
        ));
    }
    let [m, _, v, n] = dims;
    let mut entries = Vec::with_capacity(m * (m - 1) * v);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            for w in 0..v {
                let sse: f64 = (0..n)
                    .map(|t| (observed.get(i, j, w, t) - predicted.get(i, j, w, t)).powi(2))
                    .sum();
                entries.push((i, j, w, (sse / n as f64).sqrt()));
            }
        }
    }
    Ok(RmseTable {
        num_actors: m,
        num_variables: v,
        entries,
    })
}
