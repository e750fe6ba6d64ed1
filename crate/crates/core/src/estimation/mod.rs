//! Estimation of `Y = X × {B1, B2, B3} + E` with iid `N(0, σ²)` errors on off-diagonal cells.

mod als;
mod conditional;
mod gibbs;
mod io;
mod predict;

pub use als::{als_fit, AlsFit};
pub use conditional::{observation_count, residual_sum_of_squares, row_systems, Factor, RowSystems};
pub use gibbs::{gibbs_fit, gibbs_fit_chains, gibbs_fit_from};
pub use io::{read_fit_file, write_fit_file, FitFile, FitMeta};
pub use predict::{predict, rmse_per_dyad, RmseTable};

use serde::{Deserialize, Serialize};

use crate::design::DesignTensor;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// One draw or point estimate of every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub b1: Matrix,
    pub b2: Matrix,
    pub b3: Matrix,
    pub sigma2: f64,
    normalized: bool,
}

impl CoefficientSet {
    pub fn new(b1: Matrix, b2: Matrix, b3: Matrix, sigma2: f64) -> Result<Self> {
        let m = b1.rows();
        if b1.shape() != (m, m) || b2.shape() != (m, m) {
            return Err(Error::dims(
                "CoefficientSet::new",
                format!("B1 {:?} and B2 {:?} must both be {m}x{m}", b1.shape(), b2.shape()),
            ));
        }
        if b3.cols() != 3 * b3.rows() {
            return Err(Error::dims(
                "CoefficientSet::new",
                format!("B3 must be v x 3v, got {:?}", b3.shape()),
            ));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(CoefficientSet {
            b1,
            b2,
            b3,
            sigma2,
            normalized: false,
        })
    }

    pub fn num_actors(&self) -> usize {
        self.b1.rows()
    }

    pub fn num_variables(&self) -> usize {
        self.b3.rows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub(crate) fn mark_normalized(mut self) -> Self {
        self.normalized = true;
        self
    }

    pub fn check_design(&self, design: &DesignTensor) -> Result<()> {
        if self.num_actors() != design.num_actors() || self.num_variables() != design.num_variables() {
            return Err(Error::dims(
                "CoefficientSet::check_design",
                format!(
                    "coefficients for m={}, v={} but design has m={}, v={}",
                    self.num_actors(),
                    self.num_variables(),
                    design.num_actors(),
                    design.num_variables()
                ),
            ));
        }
        Ok(())
    }

    /// Flat parameter vector: B1, B2, B3 row-major, then sigma2.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.b1.values().len() * 2 + self.b3.values().len() + 1);
        out.extend_from_slice(self.b1.values());
        out.extend_from_slice(self.b2.values());
        out.extend_from_slice(self.b3.values());
        out.push(self.sigma2);
        out
    }

    pub fn unflatten(m: usize, v: usize, values: &[f64], normalized: bool) -> Result<Self> {
        let (n1, n3) = (m * m, 3 * v * v);
        if values.len() != 2 * n1 + n3 + 1 {
            return Err(Error::dims(
                "CoefficientSet::unflatten",
                format!("expected {} values, got {}", 2 * n1 + n3 + 1, values.len()),
            ));
        }
        let mut c = CoefficientSet::new(
            Matrix::from_vec(m, m, values[..n1].to_vec())?,
            Matrix::from_vec(m, m, values[n1..2 * n1].to_vec())?,
            Matrix::from_vec(v, 3 * v, values[2 * n1..2 * n1 + n3].to_vec())?,
            values[2 * n1 + n3],
        )?;
        c.normalized = normalized;
        Ok(c)
    }

    /// Names matching [`CoefficientSet::flatten`] order, e.g. `B1[0,2]`.
    pub fn parameter_names(m: usize, v: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(2 * m * m + 3 * v * v + 1);
        for (tag, rows, cols) in [("B1", m, m), ("B2", m, m), ("B3", v, 3 * v)] {
            for r in 0..rows {
                for c in 0..cols {
                    names.push(format!("{tag}[{r},{c}]"));
                }
            }
        }
        names.push("sigma2".to_string());
        names
    }
}

/// Puts a coefficient set in canonical form: `‖B1‖_F = ‖B2‖_F = √m`,
/// `trace(B1) ≥ 0`, `trace(B2) ≥ 0`, with the removed scales and signs
/// absorbed into `B3`. The fitted values do not change.
pub fn normalize_identifiability(c: &CoefficientSet) -> Result<CoefficientSet> {
    if c.b1.is_zero() || c.b2.is_zero() {
        return Err(Error::InvalidInput(
            "cannot normalize coefficients with an all-zero B1 or B2".into(),
        ));
    }
    let target = (c.num_actors() as f64).sqrt();
    let (b1, s1) = rescale(&c.b1, target);
    let (b2, s2) = rescale(&c.b2, target);
    let mut factor = s1 * s2;
    let b1 = if b1.trace() < 0.0 {
        factor = -factor;
        b1.scale(-1.0)
    } else {
        b1
    };
    let b2 = if b2.trace() < 0.0 {
        factor = -factor;
        b2.scale(-1.0)
    } else {
        b2
    };
    let b3 = if factor == 1.0 { c.b3.clone() } else { c.b3.scale(factor) };
    Ok(CoefficientSet {
        b1,
        b2,
        b3,
        sigma2: c.sigma2,
        normalized: true,
    })
}

/// Returns `(m * target / ‖m‖, ‖m‖ / target)`; already-normalized input is left bit-identical.
fn rescale(m: &Matrix, target: f64) -> (Matrix, f64) {
    let norm = m.frobenius_norm();
    if (norm - target).abs() <= 8.0 * f64::EPSILON * target {
        return (m.clone(), 1.0);
    }
    (m.scale(target / norm), norm / target)
}

/// Gaussian log-likelihood over the off-diagonal cells.
pub fn log_likelihood(design: &DesignTensor, c: &CoefficientSet) -> Result<f64> {
    c.check_design(design)?;
    let rss = residual_sum_of_squares(design, c)?;
    let n = observation_count(design) as f64;
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI * c.sigma2).ln() - rss / (2.0 * c.sigma2))
}

/// Sampler and least-squares settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Variance of the entrywise normal prior on B1, B2, B3.
    pub prior_variance: f64,
    /// Inverse-gamma shape for sigma2.
    pub sigma2_shape: f64,
    /// Inverse-gamma scale for sigma2.
    pub sigma2_scale: f64,
    pub als_tolerance: f64,
    pub als_max_sweeps: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            iterations: 8000,
            burn_in: 1000,
            seed: 0,
            prior_variance: 10.0,
            sigma2_shape: 2.0,
            sigma2_scale: 1.0,
            als_tolerance: 1e-10,
            als_max_sweeps: 500,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.burn_in >= self.iterations {
            return bad(format!(
                "burn_in ({}) must be less than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        for (name, v) in [
            ("prior_variance", self.prior_variance),
            ("sigma2_shape", self.sigma2_shape),
            ("sigma2_scale", self.sigma2_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.als_tolerance >= 0.0) {
            return bad("als_tolerance must be non-negative".into());
        }
        if self.als_max_sweeps == 0 {
            return bad("als_max_sweeps must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Als,
    Gibbs,
}

/// A single chain of normalized draws.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: FitMethod,
    pub spec: ModelSpec,
    /// Seed this chain was run with (may differ from `spec.seed` for multi-chain runs).
    pub seed: u64,
    /// Post-burn-in draws, all normalized. For least squares, the single estimate.
    pub draws: Vec<CoefficientSet>,
    /// `(B3, sigma2)` for the burn-in iterations, kept for trace output.
    pub warmup: Vec<(Matrix, f64)>,
    pub start: CoefficientSet,
    pub als: AlsReport,
    /// Number of conditional factorizations that needed a ridge retry.
    pub jitter_retries: usize,
}

impl FitResult {
    pub fn num_actors(&self) -> usize {
        self.start.num_actors()
    }

    pub fn num_variables(&self) -> usize {
        self.start.num_variables()
    }

    /// Entrywise posterior mean of the stored draws.
    pub fn posterior_mean(&self) -> Result<CoefficientSet> {
        let (m, v) = (self.num_actors(), self.num_variables());
        let n = self.draws.len() as f64;
        let mut acc = vec![0.0; 2 * m * m + 3 * v * v + 1];
        for d in &self.draws {
            for (a, x) in acc.iter_mut().zip(d.flatten()) {
                *a += x;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n);
        CoefficientSet::unflatten(m, v, &acc, false)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlsReport {
    pub sweeps: usize,
    pub converged: bool,
    /// RSS at the start and after each accepted sweep.
    pub rss_history: Vec<f64>,
    /// Set when any row regression was solved by minimum norm.
    pub rank_deficient: bool,
}
