use serde::Serialize;

use super::summary::quantile_sorted;
use crate::estimation::FitResult;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// The actor-level coefficient matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ActorMatrix {
    B1,
    B2,
}

impl ActorMatrix {
    pub fn as_str(self) -> &'static str {
        match self {
            ActorMatrix::B1 => "B1",
            ActorMatrix::B2 => "B2",
        }
    }

    fn of(self, fit_draw: &crate::estimation::CoefficientSet) -> &Matrix {
        match self {
            ActorMatrix::B1 => &fit_draw.b1,
            ActorMatrix::B2 => &fit_draw.b2,
        }
    }
}

/// Entry `(source, target)` of B1 or B2 with its posterior mean and
/// equal-tailed credible interval `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Credible-interval network of one actor matrix. Entry `(l, j)` maps to the
/// edge `l -> j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientNetwork {
    pub matrix: ActorMatrix,
    pub level: f64,
    /// Off-diagonal entries significant at `level` with positive mean.
    pub positive: Vec<Edge>,
    /// Off-diagonal entries significant at `level` with negative mean.
    pub negative: Vec<Edge>,
    /// Every diagonal entry, significant or not.
    pub diagonal: Vec<Edge>,
}

fn pooled_draws(fits: &[FitResult]) -> Result<(usize, usize)> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidInput("no chains given".into()))?;
    let m = first.num_actors();
    let mut total = 0;
    for f in fits {
        if f.num_actors() != m {
            return Err(Error::dims("coefficient network", "chains have different actor counts"));
        }
        if f.draws.iter().any(|d| !d.is_normalized()) {
            return Err(Error::InvalidInput("coefficient networks need normalized draws".into()));
        }
        total += f.draws.len();
    }
    if total == 0 {
        return Err(Error::InvalidInput("cannot summarize an empty chain".into()));
    }
    Ok((m, total))
}

/// Edge lists of B1 or B2 at credible level `level` (e.g. 0.99), pooling all chains.
pub fn coefficient_network(fits: &[FitResult], matrix: ActorMatrix, level: f64) -> Result<CoefficientNetwork> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("credible level {level} outside (0, 1)")));
    }
    let (m, total) = pooled_draws(fits)?;
    let (p_lo, p_hi) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut net = CoefficientNetwork {
        matrix,
        level,
        positive: Vec::new(),
        negative: Vec::new(),
        diagonal: Vec::with_capacity(m),
    };
    let mut xs = Vec::with_capacity(total);
    for source in 0..m {
        for target in 0..m {
            xs.clear();
            xs.extend(fits.iter().flat_map(|f| f.draws.iter().map(|d| matrix.of(d).get(source, target))));
            xs.sort_by(f64::total_cmp);
            let edge = Edge {
                source,
                target,
                mean: xs.iter().sum::<f64>() / total as f64,
                lo: quantile_sorted(&xs, p_lo),
                hi: quantile_sorted(&xs, p_hi),
            };
            if source == target {
                net.diagonal.push(edge);
            } else if edge.lo > 0.0 && edge.mean > 0.0 {
                net.positive.push(edge);
            } else if edge.hi < 0.0 && edge.mean < 0.0 {
                net.negative.push(edge);
            }
        }
    }
    Ok(net)
}

/// Mean |posterior mean| on the diagonal over the same on the off-diagonal.
/// Returns `f64::INFINITY` when every off-diagonal mean is zero.
pub fn diag_dominance(fits: &[FitResult], matrix: ActorMatrix) -> Result<f64> {
    let (m, total) = pooled_draws(fits)?;
    let mut sums = vec![0.0; m * m];
    for d in fits.iter().flat_map(|f| &f.draws) {
        for (s, x) in sums.iter_mut().zip(matrix.of(d).values()) {
            *s += x;
        }
    }
    let (mut diag, mut off) = (0.0, 0.0);
    for (k, s) in sums.iter().enumerate() {
        let a = (s / total as f64).abs();
        if k / m == k % m {
            diag += a;
        } else {
            off += a;
        }
    }
    diag /= m as f64;
    off /= (m * (m - 1)) as f64;
    if off == 0.0 {
        if diag == 0.0 {
            return Err(Error::InvalidInput(format!(
                "{} posterior mean is all zero",
                matrix.as_str()
            )));
        }
        return Ok(f64::INFINITY);
    }
    Ok(diag / off)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{normalize_identifiability, AlsReport, CoefficientSet, FitMethod, ModelSpec};

    pub(crate) fn fit_from(draws: Vec<CoefficientSet>) -> FitResult {
        FitResult {
            method: FitMethod::Gibbs,
            spec: ModelSpec::default(),
            seed: 0,
            start: draws[0].clone(),
            draws,
            warmup: Vec::new(),
            als: AlsReport::default(),
            jitter_retries: 0,
        }
    }

    fn draw(b1: Matrix) -> CoefficientSet {
        let m = b1.rows();
        let c = CoefficientSet::new(b1, Matrix::identity(m), Matrix::zeros(1, 3), 1.0).unwrap();
        normalize_identifiability(&c).unwrap()
    }

    #[test]
    fn tightly_positive_entries_give_complete_digraph() {
        let b = Matrix::from_fn(3, 3, |_, _| 1.0);
        let fit = fit_from((0..20).map(|k| draw(b.scale(1.0 + 1e-3 * k as f64))).collect());
        let net = coefficient_network(&[fit], ActorMatrix::B1, 0.99).unwrap();
        assert_eq!(net.positive.len(), 6);
        assert!(net.negative.is_empty());
        assert_eq!(net.diagonal.len(), 3);
    }

    #[test]
    fn symmetric_chains_give_no_edges() {
        let draws = (0..40)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                draw(Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { s * 0.3 }))
            })
            .collect();
        let net = coefficient_network(&[fit_from(draws)], ActorMatrix::B1, 0.99).unwrap();
        assert!(net.positive.is_empty() && net.negative.is_empty());
    }

    #[test]
    fn identity_mean_has_infinite_dominance() {
        let fit = fit_from(vec![draw(Matrix::identity(4)); 5]);
        assert_eq!(diag_dominance(&[fit], ActorMatrix::B1).unwrap(), f64::INFINITY);
    }

    #[test]
    fn dominance_of_constant_pattern() {
        let b = Matrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 1.0 });
        let fit = fit_from(vec![draw(b); 4]);
        let r = diag_dominance(&[fit], ActorMatrix::B1).unwrap();
        assert!((r - 2.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn unnormalized_draws_are_rejected() {
        let c = CoefficientSet::new(Matrix::identity(3), Matrix::identity(3), Matrix::zeros(1, 3), 1.0).unwrap();
        assert!(coefficient_network(&[fit_from(vec![c])], ActorMatrix::B2, 0.9).is_err());
    }
}
