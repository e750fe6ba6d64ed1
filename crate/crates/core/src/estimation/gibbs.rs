//! Gibbs sampler with semi-conjugate priors.
//!
//! Priors: every entry of B1, B2, B3 is `N(0, τ²)`; `σ² ~ InvGamma(a, b)`.
//! Full conditionals:
//!
//! ```text
//! row p of Bk | rest ~ N(Q⁻¹ r_p / σ², Q⁻¹),   Q = G_p / σ² + I / τ²
//! σ² | rest         ~ InvGamma(a + N/2, b + RSS/2)
//! ```
//!
//! where `G_p`, `r_p` are the row regression statistics from
//! [`row_systems`](super::row_systems) and `N` counts off-diagonal cells.
//! The sampler state is left unnormalized; only stored draws are normalized.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use super::conditional::{actor_systems, mixing_systems, observation_count, rss_from_mixing, RowSystems};
use super::{als_fit, normalize_identifiability, AlsReport, CoefficientSet, FitMethod, FitResult, ModelSpec};
use crate::design::DesignTensor;
use crate::error::{Error, Result};
use crate::tensor::{mode_product, Matrix, Mode};

const JITTER: f64 = 1e-10;
const MAX_JITTER_RETRIES: usize = 3;

/// Runs one chain started from the least-squares estimate.
pub fn gibbs_fit(design: &DesignTensor, spec: &ModelSpec) -> Result<FitResult> {
    spec.validate()?;
    let als = als_fit(design, spec)?;
    gibbs_fit_from(design, spec, spec.seed, &als.coefficients, &als.report)
}

/// Runs `chains` independent chains concurrently with seeds `spec.seed + k`,
/// all started from the same least-squares estimate.
pub fn gibbs_fit_chains(design: &DesignTensor, spec: &ModelSpec, chains: usize) -> Result<Vec<FitResult>> {
    spec.validate()?;
    if chains == 0 {
        return Err(Error::Config("chains must be at least 1".into()));
    }
    let als = als_fit(design, spec)?;
    (0..chains as u64)
        .into_par_iter()
        .map(|k| gibbs_fit_from(design, spec, spec.seed.wrapping_add(k), &als.coefficients, &als.report))
        .collect()
}

/// Runs one chain from an explicit starting point.
pub fn gibbs_fit_from(
    design: &DesignTensor,
    spec: &ModelSpec,
    seed: u64,
    start: &CoefficientSet,
    als: &AlsReport,
) -> Result<FitResult> {
    spec.validate()?;
    start.check_design(design)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_obs = observation_count(design) as f64;
    let mut state = start.clone();
    let mut jitter_retries = 0;
    let mut draws = Vec::with_capacity(spec.iterations - spec.burn_in);
    let mut warmup = Vec::with_capacity(spec.burn_in);

    let x = design.data();
    let y = design.response();
    for iter in 0..spec.iterations {
        // B3 is unchanged across the B1 and B2 updates, so X ×3 B3 is shared.
        let xb3 = mode_product(x, &state.b3, Mode::Three)?;
        let z = mode_product(&xb3, &state.b2, Mode::Two)?;
        state.b1 = sample_rows(&actor_systems(&z, y, Mode::One), &state, spec, &mut rng, &mut jitter_retries)?;
        let z = mode_product(&xb3, &state.b1, Mode::One)?;
        state.b2 = sample_rows(&actor_systems(&z, y, Mode::Two), &state, spec, &mut rng, &mut jitter_retries)?;
        let z = mode_product(&mode_product(x, &state.b1, Mode::One)?, &state.b2, Mode::Two)?;
        state.b3 = sample_rows(&mixing_systems(&z, y), &state, spec, &mut rng, &mut jitter_retries)?;
        if [&state.b1, &state.b2, &state.b3].iter().any(|b| b.values().iter().any(|v| !v.is_finite())) {
            return Err(Error::Numerical(format!("non-finite coefficient draw at iteration {iter}")));
        }

        let rss = rss_from_mixing(&z, &state.b3, y)?;
        let shape = spec.sigma2_shape + 0.5 * n_obs;
        let rate = spec.sigma2_scale + 0.5 * rss;
        let precision = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::Numerical(format!("sigma2 conditional: {e}")))?
            .sample(&mut rng);
        state.sigma2 = (1.0 / precision).max(f64::MIN_POSITIVE);

        let normalized = normalize_identifiability(&state)?;
        if iter < spec.burn_in {
            warmup.push((normalized.b3, normalized.sigma2));
        } else {
            draws.push(normalized);
        }
    }

    Ok(FitResult {
        method: FitMethod::Gibbs,
        spec: spec.clone(),
        seed,
        draws,
        warmup,
        start: start.clone(),
        als: als.clone(),
        jitter_retries,
    })
}

/// Draws every row of one coefficient matrix from its normal full conditional.
fn sample_rows(
    sys: &RowSystems,
    state: &CoefficientSet,
    spec: &ModelSpec,
    rng: &mut ChaCha8Rng,
    jitter_retries: &mut usize,
) -> Result<Matrix> {
    let k = sys.rhs[0].len();
    let mut sampled = Matrix::zeros(sys.len(), k);
    let mut shared: Option<Cholesky<f64, Dyn>> = None;
    for p in 0..sys.len() {
        if sys.grams.len() > 1 || shared.is_none() {
            let (c, retries) = precision_cholesky(sys.gram(p), state.sigma2, spec.prior_variance)?;
            *jitter_retries += retries;
            shared = Some(c);
        }
        let chol = shared.as_ref().expect("factorized above");
        let rhs = DVector::from_iterator(k, sys.rhs[p].iter().map(|r| r / state.sigma2));
        let mean = chol.solve(&rhs);
        let z = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut *rng)));
        // Q = L Lᵀ, so Lᵀ x = z gives x ~ N(0, Q⁻¹)
        let noise = chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        for (dst, (a, b)) in sampled.row_mut(p).iter_mut().zip(mean.iter().zip(noise.iter())) {
            *dst = a + b;
        }
    }
    Ok(sampled)
}

/// Cholesky factor of `G / σ² + I / τ²`, retrying with a small diagonal ridge.
fn precision_cholesky(gram: &Matrix, sigma2: f64, tau2: f64) -> Result<(Cholesky<f64, Dyn>, usize)> {
    let k = gram.rows();
    let mut q = DMatrix::from_row_slice(k, k, gram.values()) / sigma2;
    for d in 0..k {
        q[(d, d)] += 1.0 / tau2;
    }
    for attempt in 0..=MAX_JITTER_RETRIES {
        if let Some(c) = Cholesky::new(q.clone()) {
            return Ok((c, attempt));
        }
        for d in 0..k {
            q[(d, d)] += JITTER;
        }
    }
    Err(Error::Numerical(format!(
        "conditional precision ({k}x{k}, sigma2={sigma2:e}) not positive definite after {MAX_JITTER_RETRIES} ridge retries"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design, RelationalSeries};
    use crate::tensor::Tensor4;
    use rand::Rng;

    fn random_design(seed: u64, m: usize, v: usize, n: usize) -> DesignTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Tensor4::from_fn([m, m, v, n], |i, j, _, _| if i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
        build_design(&RelationalSeries::unlabeled(data).unwrap()).unwrap()
    }

    fn short_spec(seed: u64) -> ModelSpec {
        ModelSpec {
            iterations: 60,
            burn_in: 10,
            seed,
            ..ModelSpec::default()
        }
    }

    #[test]
    fn chain_length_and_normalization() {
        let d = random_design(51, 4, 2, 8);
        let fit = gibbs_fit(&d, &short_spec(1)).unwrap();
        assert_eq!(fit.draws.len(), 50);
        assert_eq!(fit.warmup.len(), 10);
        for c in &fit.draws {
            assert!(c.is_normalized());
            assert!((c.b1.frobenius_norm() - 2.0).abs() < 1e-12);
            assert!(c.b1.trace() >= 0.0 && c.b2.trace() >= 0.0);
            assert!(c.sigma2 > 0.0);
        }
    }

    #[test]
    fn same_seed_same_chain() {
        let d = random_design(52, 4, 1, 6);
        let a = gibbs_fit(&d, &short_spec(7)).unwrap();
        let b = gibbs_fit(&d, &short_spec(7)).unwrap();
        assert_eq!(a, b);
        let c = gibbs_fit(&d, &short_spec(8)).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn multi_chain_matches_single_runs() {
        let d = random_design(53, 3, 1, 6);
        let spec = short_spec(20);
        let chains = gibbs_fit_chains(&d, &spec, 2).unwrap();
        assert_eq!(chains[0], gibbs_fit(&d, &spec).unwrap());
        assert_eq!(chains[1].seed, 21);
    }

    #[test]
    fn precision_factorization_handles_zero_gram() {
        let (c, retries) = precision_cholesky(&Matrix::zeros(3, 3), 1.0, 10.0).unwrap();
        assert_eq!(retries, 0);
        assert!((c.l()[(0, 0)] - 0.1f64.sqrt()).abs() < 1e-15);
    }
}
