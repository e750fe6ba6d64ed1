use serde::Serialize;

use crate::estimation::{CoefficientSet, FitResult};
use crate::error::{Error, Result};

/// Probabilities of the reported quantiles.
pub const QUANTILE_LEVELS: [f64; 7] = [0.005, 0.025, 0.05, 0.5, 0.95, 0.975, 0.995];

/// Quantile of ascending `sorted` data by linear interpolation between order
/// statistics: with `h = (n - 1) p`, the result is
/// `x[⌊h⌋] + (h - ⌊h⌋) (x[⌊h⌋ + 1] - x[⌊h⌋])`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let (a, b) = (sorted[lo], sorted[hi]);
    (a + (h - lo as f64) * (b - a)).clamp(a, b)
}

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// At [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 7],
    pub flag_90: bool,
    pub flag_95: bool,
    pub flag_99: bool,
}

fn excludes_zero(lo: f64, hi: f64) -> bool {
    lo > 0.0 || hi < 0.0
}

impl ParameterSummary {
    /// Summarizes a sample. Statistics are computed from the sorted sample,
    /// so the result does not depend on draw order.
    pub fn from_values(name: impl Into<String>, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("cannot summarize an empty chain".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chain values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let sd = if sorted.len() > 1 {
            (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let quantiles = QUANTILE_LEVELS.map(|p| quantile_sorted(&sorted, p));
        Ok(ParameterSummary {
            name: name.into(),
            mean,
            sd,
            flag_90: excludes_zero(quantiles[2], quantiles[4]),
            flag_95: excludes_zero(quantiles[1], quantiles[5]),
            flag_99: excludes_zero(quantiles[0], quantiles[6]),
            quantiles,
        })
    }

    pub fn median(&self) -> f64 {
        self.quantiles[3]
    }
}

/// Summaries of every parameter, in [`CoefficientSet::flatten`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub num_actors: usize,
    pub num_variables: usize,
    pub draws: usize,
    pub parameters: Vec<ParameterSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Summary of `B3[row, col]`.
    pub fn b3(&self, row: usize, col: usize) -> &ParameterSummary {
        let (m, v) = (self.num_actors, self.num_variables);
        &self.parameters[2 * m * m + row * 3 * v + col]
    }
}

/// Value of flattened parameter `k` in `c` without building the flat vector.
pub(crate) fn parameter_value(c: &CoefficientSet, k: usize) -> f64 {
    let n1 = c.b1.values().len();
    let n3 = c.b3.values().len();
    if k < n1 {
        c.b1.values()[k]
    } else if k < 2 * n1 {
        c.b2.values()[k - n1]
    } else if k < 2 * n1 + n3 {
        c.b3.values()[k - 2 * n1]
    } else {
        c.sigma2
    }
}

/// Summarizes the stored draws of one chain.
pub fn summarize_chain(fit: &FitResult) -> Result<PosteriorSummary> {
    summarize_pooled(std::slice::from_ref(fit))
}

/// Summarizes the pooled draws of several chains of the same model.
pub fn summarize_pooled(fits: &[FitResult]) -> Result<PosteriorSummary> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidInput("no chains to summarize".into()))?;
    let (m, v) = (first.num_actors(), first.num_variables());
    if fits.iter().any(|f| f.num_actors() != m || f.num_variables() != v) {
        return Err(Error::dims("summarize_pooled", "chains have different dimensions"));
    }
    let total: usize = fits.iter().map(|f| f.draws.len()).sum();
    if total == 0 {
        return Err(Error::InvalidInput("cannot summarize an empty chain".into()));
    }
    let names = CoefficientSet::parameter_names(m, v);
    let mut values = Vec::with_capacity(total);
    let mut parameters = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        values.clear();
        values.extend(fits.iter().flat_map(|f| f.draws.iter().map(|c| parameter_value(c, k))));
        parameters.push(ParameterSummary::from_values(name, &values)?);
    }
    Ok(PosteriorSummary {
        num_actors: m,
        num_variables: v,
        draws: total,
        parameters,
    })
}
