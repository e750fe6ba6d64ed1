use serde::Serialize;

use super::summary::parameter_value;
use crate::estimation::{CoefficientSet, FitResult};
use crate::error::{Error, Result};

/// Shortest chain accepted by [`convergence_stats`].
pub const MIN_CHAIN_LENGTH: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStat {
    pub parameter: String,
    /// Split-chain potential scale reduction.
    pub rhat: f64,
    /// Autocorrelation-based effective sample size over all chains.
    pub ess: f64,
    pub note: Option<String>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Split R-hat and ESS for one parameter given its draws in each chain.
///
/// Each chain is cut into two halves (the middle draw of an odd-length chain
/// is dropped). With `M` halves of length `N`, within-chain variance `W`
/// and between-chain variance `B`,
/// `R-hat = sqrt(((N - 1) / N · W + B / N) / W)`.
/// ESS is `M N / τ` where `τ = -1 + 2 Σ_k P_k` sums Geyer's paired
/// autocorrelations `P_k = ρ_{2k} + ρ_{2k+1}` while positive, forced
/// non-increasing, with `ρ_t = 1 - (W - mean_c γ_{c,t}) / var⁺`.
pub fn split_rhat_ess(parameter: &str, chains: &[&[f64]]) -> Result<ConvergenceStat> {
    let len = chains
        .first()
        .map(|c| c.len())
        .ok_or_else(|| Error::InvalidInput("no chains given".into()))?;
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidInput("chains have different lengths".into()));
    }
    if len < MIN_CHAIN_LENGTH {
        return Err(Error::InvalidInput(format!(
            "chain length {len} is below the minimum of {MIN_CHAIN_LENGTH}"
        )));
    }
    if chains.iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("chain values"));
    }
    let n = len / 2;
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[len - n..]]).collect();
    let total = (halves.len() * n) as f64;
    let nf = n as f64;

    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = mean(&halves.iter().map(|h| variance(h)).collect::<Vec<_>>());
    let b = nf * variance(&means);
    let var_plus = (nf - 1.0) / nf * w + b / nf;

    let constant = chains.iter().all(|c| c.iter().all(|&x| x == chains[0][0]));
    if constant || w == 0.0 {
        if constant {
            return Ok(ConvergenceStat {
                parameter: parameter.to_string(),
                rhat: 1.0,
                ess: (chains.len() * len) as f64,
                note: Some("zero variance".into()),
            });
        }
        return Ok(ConvergenceStat {
            parameter: parameter.to_string(),
            rhat: f64::INFINITY,
            ess: halves.len() as f64,
            note: Some("zero within-chain variance".into()),
        });
    }

    // lag-t autocorrelation pooled over halves; biased autocovariance per half
    let rho = |t: usize| -> f64 {
        let gamma: f64 = halves
            .iter()
            .zip(&means)
            .map(|(h, mu)| (0..n - t).map(|s| (h[s] - mu) * (h[s + t] - mu)).sum::<f64>() / nf)
            .sum::<f64>()
            / halves.len() as f64;
        1.0 - (w - gamma) / var_plus
    };

    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    let tau = tau.max(1.0 / total.log10().max(1.0));
    Ok(ConvergenceStat {
        parameter: parameter.to_string(),
        rhat: (var_plus / w).sqrt(),
        ess: total / tau,
        note: None,
    })
}

/// Convergence statistics for every parameter across one or more chains of equal length.
pub fn convergence_stats(fits: &[FitResult]) -> Result<Vec<ConvergenceStat>> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidInput("no chains given".into()))?;
    let (m, v) = (first.num_actors(), first.num_variables());
    if fits.iter().any(|f| f.num_actors() != m || f.num_variables() != v) {
        return Err(Error::dims("convergence_stats", "chains have different dimensions"));
    }
    let names = CoefficientSet::parameter_names(m, v);
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); fits.len()];
    let mut out = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        for (s, f) in series.iter_mut().zip(fits) {
            s.clear();
            s.extend(f.draws.iter().map(|c| parameter_value(c, k)));
        }
        let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
        out.push(split_rhat_ess(name, &refs)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn iid_chain_has_rhat_near_one() {
        let xs = normals(1, 4000);
        let s = split_rhat_ess("x", &[&xs]).unwrap();
        assert!((0.99..=1.05).contains(&s.rhat), "{}", s.rhat);
        assert!(s.ess > 2500.0 && s.ess < 6000.0, "{}", s.ess);
    }

    #[test]
    fn constant_chain_reports_full_length() {
        let xs = vec![0.7; 100];
        let s = split_rhat_ess("x", &[&xs]).unwrap();
        assert_eq!(s.ess, 100.0);
        assert_eq!(s.rhat, 1.0);
        assert!(s.note.is_some());
    }

    #[test]
    fn disjoint_chains_have_large_rhat() {
        let a = normals(2, 500);
        let b: Vec<f64> = normals(3, 500).iter().map(|x| x + 10.0).collect();
        let s = split_rhat_ess("x", &[&a, &b]).unwrap();
        assert!(s.rhat > 1.5, "{}", s.rhat);
    }

    #[test]
    fn autocorrelated_chain_has_small_ess() {
        let e = normals(4, 4000);
        let mut xs = vec![0.0; e.len()];
        for t in 1..e.len() {
            xs[t] = 0.9 * xs[t - 1] + e[t];
        }
        let s = split_rhat_ess("x", &[&xs]).unwrap();
        // AR(1) with phi = 0.9: n (1 - phi) / (1 + phi) ≈ 210
        assert!(s.ess > 100.0 && s.ess < 450.0, "{}", s.ess);
    }

    #[test]
    fn short_chain_is_rejected() {
        let xs = normals(5, 19);
        assert!(split_rhat_ess("x", &[&xs]).is_err());
    }
}
