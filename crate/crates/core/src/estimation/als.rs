use nalgebra::{DMatrix, DVector};

use super::conditional::{observation_count, residual_sum_of_squares, row_systems, Factor, RowSystems};
use super::{normalize_identifiability, AlsReport, CoefficientSet, FitMethod, FitResult, ModelSpec};
use crate::design::DesignTensor;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Relative singular-value cutoff below which a row regression is treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AlsFit {
    /// Normalized estimate with the residual variance attached.
    pub coefficients: CoefficientSet,
    pub report: AlsReport,
}

impl AlsFit {
    /// Wraps the estimate as a one-draw fit so it flows through the same exports as a chain.
    pub fn into_fit_result(self, spec: &ModelSpec) -> FitResult {
        FitResult {
            method: FitMethod::Als,
            spec: spec.clone(),
            seed: spec.seed,
            draws: vec![self.coefficients.clone()],
            warmup: Vec::new(),
            start: self.coefficients,
            als: self.report,
            jitter_retries: 0,
        }
    }
}

/// Block-coordinate least squares, updating B1, B2, B3 in that order each sweep.
///
/// A sweep that fails to lower the residual sum of squares is discarded and
/// ends the iteration, so the recorded RSS history never increases.
pub fn als_fit(design: &DesignTensor, spec: &ModelSpec) -> Result<AlsFit> {
    spec.validate()?;
    if design.data().values().iter().chain(design.response().values()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("als_fit input"));
    }
    let m = design.num_actors();
    let v = design.num_variables();
    let mut b3 = Matrix::zeros(v, 3 * v);
    for u in 0..v {
        b3.set(u, u, 1.0);
    }
    let mut current = CoefficientSet::new(Matrix::identity(m), Matrix::identity(m), b3, 1.0)?;
    let mut rss = residual_sum_of_squares(design, &current)?;
    let tss = residual_sum_of_squares(
        design,
        &CoefficientSet::new(Matrix::identity(m), Matrix::identity(m), Matrix::zeros(v, 3 * v), 1.0)?,
    )?;

    let mut report = AlsReport {
        rss_history: vec![rss],
        ..AlsReport::default()
    };
    for _ in 0..spec.als_max_sweeps {
        let mut next = current.clone();
        let mut deficient = false;
        for factor in [Factor::Sender, Factor::Receiver, Factor::Mixing] {
            let sys = row_systems(design, &next, factor)?;
            let (solved, d) = solve_rows(&sys)?;
            deficient |= d;
            match factor {
                Factor::Sender => next.b1 = solved,
                Factor::Receiver => next.b2 = solved,
                Factor::Mixing => next.b3 = solved,
            }
        }
        let new_rss = residual_sum_of_squares(design, &next)?;
        if !(new_rss <= rss) {
            report.converged = true;
            break;
        }
        report.sweeps += 1;
        report.rank_deficient |= deficient;
        report.rss_history.push(new_rss);
        let decrease = rss - new_rss;
        current = next;
        rss = new_rss;
        if decrease <= spec.als_tolerance * rss || rss <= f64::EPSILON * f64::EPSILON * tss {
            report.converged = true;
            break;
        }
    }

    let n = observation_count(design) as f64;
    let sigma2 = (rss / n).max(f64::MIN_POSITIVE);
    let coefficients = if current.b1.is_zero() || current.b2.is_zero() || current.b3.is_zero() {
        // Zero fit: any B1, B2 pair reproduces it, so report the canonical one.
        CoefficientSet::new(Matrix::identity(m), Matrix::identity(m), Matrix::zeros(v, 3 * v), sigma2)?
            .mark_normalized()
    } else {
        let mut c = normalize_identifiability(&current)?;
        c.sigma2 = sigma2;
        c
    };
    if report.rank_deficient {
        log::warn!("least squares hit a rank-deficient row regression; used minimum-norm solutions");
    }
    Ok(AlsFit { coefficients, report })
}

/// Minimum-norm least-squares solution of every row system. The flag reports rank deficiency.
fn solve_rows(sys: &RowSystems) -> Result<(Matrix, bool)> {
    let k = sys.rhs[0].len();
    let mut out = Matrix::zeros(sys.len(), k);
    let mut deficient = false;
    let mut cache: Option<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> = None;
    for p in 0..sys.len() {
        let shared = sys.grams.len() == 1;
        if !shared || cache.is_none() {
            let dm = DMatrix::from_row_slice(k, k, sys.gram(p).values());
            cache = Some(dm.svd(true, true));
        }
        let svd = cache.as_ref().expect("factorized above");
        let smax = svd.singular_values.max();
        let cutoff = RANK_TOL * smax;
        if svd.singular_values.iter().any(|&s| s <= cutoff) {
            deficient = true;
        }
        let rhs = DVector::from_column_slice(&sys.rhs[p]);
        let sol = if smax <= 0.0 {
            DVector::zeros(k)
        } else {
            svd.solve(&rhs, cutoff)
                .map_err(|e| Error::Numerical(format!("row solve failed: {e}")))?
        };
        if sol.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite least-squares solution".into()));
        }
        out.row_mut(p).copy_from_slice(sol.as_slice());
    }
    Ok((out, deficient))
}
