//! Synthetic panels generated forward from known coefficients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::design::{transitivity_slice, RelationalSeries};
use crate::error::{Error, Result};
use crate::estimation::CoefficientSet;
use crate::tensor::{tucker_apply, Tensor4};

const POWER_STEPS: usize = 400;

/// Simulates `Y_t = X_t × {B1, B2, B3} + E_t` from a zero initial state, where
/// `X_t` holds the direct, reciprocal and (raw) transitive slices of `Y_{t-1}`
/// and `E_t` is iid `N(0, sigma²)`. Self-dyads are zero throughout.
///
/// Coefficients whose linear (direct + reciprocal) part has spectral radius
/// of at least 1 are rejected.
pub fn simulate_synthetic(
    m: usize,
    v: usize,
    n: usize,
    coefficients: &CoefficientSet,
    sigma: f64,
    seed: u64,
) -> Result<RelationalSeries> {
    if coefficients.num_actors() != m || coefficients.num_variables() != v {
        return Err(Error::dims(
            "simulate_synthetic",
            format!(
                "coefficients are for m={}, v={} but m={m}, v={v} requested",
                coefficients.num_actors(),
                coefficients.num_variables()
            ),
        ));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be non-negative, got {sigma}")));
    }
    let radius = linear_spectral_radius(coefficients)?;
    if radius >= 1.0 {
        return Err(Error::Unstable(radius));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |out: &mut Tensor4, t: usize| {
        for w in 0..v {
            for j in 0..m {
                for i in 0..m {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    if i != j {
                        let k = out.offset(i, j, w, t);
                        out.values_mut()[k] += sigma * e;
                    }
                }
            }
        }
    };

    let mut y = Tensor4::zeros([m, m, v, n]);
    noise(&mut y, 0);
    for t in 1..n {
        let x = lag_design(&y, t - 1)?;
        let mean = tucker_apply(&x, &coefficients.b1, &coefficients.b2, &coefficients.b3)?;
        for w in 0..v {
            for j in 0..m {
                for i in 0..m {
                    if i != j {
                        let val = mean.get(i, j, w, 0);
                        if !val.is_finite() || val.abs() > 1e150 {
                            return Err(Error::Numerical(format!("simulation diverged at period {t}")));
                        }
                        y.set(i, j, w, t, val);
                    }
                }
            }
        }
        noise(&mut y, t);
    }
    if y.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("simulation produced non-finite values".into()));
    }
    RelationalSeries::unlabeled(y)
}

/// The `m x m x 3v x 1` predictor built from period `t` of `y`.
fn lag_design(y: &Tensor4, t: usize) -> Result<Tensor4> {
    let [m, _, v, _] = y.dims();
    let mut x = Tensor4::zeros([m, m, 3 * v, 1]);
    for w in 0..v {
        let s = y.slice(w, t);
        for j in 0..m {
            for i in 0..m {
                x.set(i, j, w, 0, s.get(i, j));
                x.set(i, j, v + w, 0, s.get(j, i));
            }
        }
        x.set_slice(2 * v + w, 0, &transitivity_slice(&s)?)?;
    }
    Ok(x)
}

/// Spectral radius of the linear one-step map (transitive block excluded,
/// self-dyads projected out), estimated by power iteration as the geometric
/// mean growth rate over the second half of the iterates.
pub fn linear_spectral_radius(c: &CoefficientSet) -> Result<f64> {
    let (m, v) = (c.num_actors(), c.num_variables());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut state = Tensor4::from_fn([m, m, v, 1], |i, j, _, _| {
        if i == j {
            0.0
        } else {
            StandardNormal.sample(&mut rng)
        }
    });
    normalize(&mut state);
    let mut log_growth = 0.0;
    for step in 0..POWER_STEPS {
        let mut x = Tensor4::zeros([m, m, 3 * v, 1]);
        for w in 0..v {
            for j in 0..m {
                for i in 0..m {
                    x.set(i, j, w, 0, state.get(i, j, w, 0));
                    x.set(i, j, v + w, 0, state.get(j, i, w, 0));
                }
            }
        }
        let mut next = tucker_apply(&x, &c.b1, &c.b2, &c.b3)?;
        next.zero_diagonal();
        let norm = normalize(&mut next);
        if norm == 0.0 {
            return Ok(0.0);
        }
        if step >= POWER_STEPS / 2 {
            log_growth += norm.ln();
        }
        state = next;
    }
    Ok((log_growth / (POWER_STEPS - POWER_STEPS / 2) as f64).exp())
}

fn normalize(t: &mut Tensor4) -> f64 {
    let norm = t.values().iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        t.values_mut().iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    fn coef(m: usize, b3: Vec<Vec<f64>>) -> CoefficientSet {
        CoefficientSet::new(Matrix::identity(m), Matrix::identity(m), Matrix::from_rows(&b3).unwrap(), 1.0).unwrap()
    }

    fn lag1_autocorr(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let cov: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        cov / var
    }

    #[test]
    fn null_model_is_noise() {
        let (m, n, sigma) = (4, 400, 0.5);
        let c = coef(m, vec![vec![0.0, 0.0, 0.0]]);
        let s = simulate_synthetic(m, 1, n, &c, sigma, 3).unwrap();
        for j in 0..m {
            for i in 0..m {
                let mean: f64 = (0..n).map(|t| s.data().get(i, j, 0, t)).sum::<f64>() / n as f64;
                assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn reproducible_by_seed() {
        let c = coef(3, vec![vec![0.3, 0.1, 0.0]]);
        assert_eq!(simulate_synthetic(3, 1, 20, &c, 1.0, 9).unwrap(), simulate_synthetic(3, 1, 20, &c, 1.0, 9).unwrap());
        assert_ne!(simulate_synthetic(3, 1, 20, &c, 1.0, 9).unwrap(), simulate_synthetic(3, 1, 20, &c, 1.0, 10).unwrap());
    }

    #[test]
    fn planted_direct_effect_raises_autocorrelation() {
        let (m, n) = (5, 300);
        let null = simulate_synthetic(m, 1, n, &coef(m, vec![vec![0.0, 0.0, 0.0]]), 1.0, 4).unwrap();
        let planted = simulate_synthetic(m, 1, n, &coef(m, vec![vec![0.5, 0.0, 0.0]]), 1.0, 4).unwrap();
        let avg = |s: &RelationalSeries| {
            let mut acc = 0.0;
            for j in 0..m {
                for i in 0..m {
                    if i != j {
                        let xs: Vec<f64> = (0..n).map(|t| s.data().get(i, j, 0, t)).collect();
                        acc += lag1_autocorr(&xs);
                    }
                }
            }
            acc / (m * (m - 1)) as f64
        };
        // AR(1) with coefficient 0.5 has lag-1 autocorrelation 0.5
        assert!(avg(&planted) > avg(&null) + 0.3, "{} vs {}", avg(&planted), avg(&null));
    }

    #[test]
    fn spectral_radius_of_known_maps() {
        // direct only: the map is 0.5 * identity on off-diagonal cells
        let r = linear_spectral_radius(&coef(4, vec![vec![0.5, 0.0, 0.0]])).unwrap();
        assert!((r - 0.5).abs() < 1e-9, "{r}");
        // direct a, reciprocal b: eigenvalues a ± b on symmetric/antisymmetric parts
        let r = linear_spectral_radius(&coef(4, vec![vec![0.3, 0.4, 0.0]])).unwrap();
        assert!((r - 0.7).abs() < 1e-6, "{r}");
    }

    #[test]
    fn unstable_rejected() {
        let c = coef(3, vec![vec![0.9, 0.3, 0.0]]);
        match simulate_synthetic(3, 1, 10, &c, 1.0, 1) {
            Err(Error::Unstable(r)) => assert!((r - 1.2).abs() < 1e-6),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn dims_must_match() {
        let c = coef(3, vec![vec![0.1, 0.0, 0.0]]);
        assert!(simulate_synthetic(4, 1, 10, &c, 1.0, 1).is_err());
    }
}
