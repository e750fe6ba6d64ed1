//! Relational panels and the lag-augmented design tensor.
//!
//! A design built from a panel with `v` variables has `3v` predictor slices:
//! the lagged panel itself (direct), its dyadic transpose (reciprocal), and
//! the shared-partner statistic `S·S` with `S = Y + Yᵀ` (transitive). Every
//! block at time `t` uses only period `t - 1`, so the first period has no
//! predictors and is dropped from the aligned response.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Labels, Matrix, Tensor4};

#[derive(Debug, Clone, PartialEq)]
pub struct RelationalSeries {
    actors: Vec<String>,
    variables: Vec<String>,
    periods: Vec<String>,
    data: Tensor4,
}

impl RelationalSeries {
    pub fn new(
        actors: Vec<String>,
        variables: Vec<String>,
        periods: Vec<String>,
        data: Tensor4,
    ) -> Result<Self> {
        let [d1, d2, d3, d4] = data.dims();
        if d1 != d2 {
            return Err(Error::dims("RelationalSeries::new", format!("non-square dyads {d1}x{d2}")));
        }
        if actors.len() != d1 || variables.len() != d3 || periods.len() != d4 {
            return Err(Error::dims(
                "RelationalSeries::new",
                format!(
                    "labels ({}, {}, {}) vs dims {:?}",
                    actors.len(),
                    variables.len(),
                    periods.len(),
                    data.dims()
                ),
            ));
        }
        if d1 < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 actors, got {d1}")));
        }
        if d4 < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 periods, got {d4}")));
        }
        for t in 0..d4 {
            for w in 0..d3 {
                for i in 0..d1 {
                    if data.get(i, i, w, t) != 0.0 {
                        return Err(Error::InvalidInput(format!(
                            "self-dyad ({i},{i}) nonzero at variable {w}, period {t}"
                        )));
                    }
                }
            }
        }
        Ok(RelationalSeries {
            actors,
            variables,
            periods,
            data,
        })
    }

    /// Builds a series with generated labels (`a0..`, `v0..`, `t0..`).
    pub fn unlabeled(data: Tensor4) -> Result<Self> {
        let [m, _, v, n] = data.dims();
        RelationalSeries::new(
            (0..m).map(|i| format!("a{i}")).collect(),
            (0..v).map(|w| format!("v{w}")).collect(),
            (0..n).map(|t| format!("t{t}")).collect(),
            data,
        )
    }

    pub fn from_labeled(data: Tensor4, labels: Option<Labels>) -> Result<Self> {
        match labels {
            Some(l) => RelationalSeries::new(l.actors, l.variables, l.periods, data),
            None => RelationalSeries::unlabeled(data),
        }
    }

    pub fn labels(&self) -> Labels {
        Labels {
            actors: self.actors.clone(),
            variables: self.variables.clone(),
            periods: self.periods.clone(),
        }
    }

    pub fn actors(&self) -> &[String] {
        &self.actors
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn data(&self) -> &Tensor4 {
        &self.data
    }

    pub fn num_actors(&self) -> usize {
        self.actors.len()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_periods(&self) -> usize {
        self.periods.len()
    }

    /// Keeps only the named variables, in the order given.
    pub fn select_variables(&self, names: &[String]) -> Result<RelationalSeries> {
        let idx = names
            .iter()
            .map(|n| {
                self.variables
                    .iter()
                    .position(|v| v == n)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown variable {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        RelationalSeries::new(
            self.actors.clone(),
            names.to_vec(),
            self.periods.clone(),
            self.data.select_mode3(&idx)?,
        )
    }

    fn map_triplets(&self, mut f: impl FnMut(&mut [f64])) -> RelationalSeries {
        let [m, _, v, n] = self.data.dims();
        let mut out = self.data.clone();
        let mut buf = vec![0.0; n];
        for w in 0..v {
            for j in 0..m {
                for i in 0..m {
                    if i == j {
                        continue;
                    }
                    for (t, b) in buf.iter_mut().enumerate() {
                        *b = self.data.get(i, j, w, t);
                    }
                    f(&mut buf);
                    for (t, b) in buf.iter().enumerate() {
                        out.set(i, j, w, t, *b);
                    }
                }
            }
        }
        RelationalSeries {
            data: out,
            ..self.clone()
        }
    }
}

/// Removes the time mean of every dyad-variable series.
pub fn demean(series: &RelationalSeries) -> RelationalSeries {
    series.map_triplets(|xs| {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter_mut().for_each(|x| *x -= mean);
    })
}

/// Normal-scores transform of every dyad-variable series, then centered and
/// scaled to unit sample standard deviation. Constant series become zeros.
pub fn qq_normalize(series: &RelationalSeries) -> RelationalSeries {
    series.map_triplets(|xs| {
        let scores = normal_scores(xs);
        xs.copy_from_slice(&scores);
        standardize(xs);
    })
}

/// `Φ⁻¹((r - 0.5) / n)` of the average ranks `r`, before any centering.
pub fn normal_scores(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    average_ranks(xs)
        .into_iter()
        .map(|r| inverse_normal_cdf((r - 0.5) / n))
        .collect()
}

/// One-based ranks with ties sharing the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean rank
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

pub fn inverse_normal_cdf(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Centers to mean zero and scales to unit sample sd; zero-variance input becomes all zeros.
pub fn standardize(xs: &mut [f64]) {
    let n = xs.len();
    if n == 0 {
        return;
    }
    let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter_mut().for_each(|x| *x -= mean);
    let ss: f64 = xs.iter().map(|x| x * x).sum();
    // rounding residue of a constant series counts as zero variance
    if n < 2 || ss == 0.0 || (ss / n as f64).sqrt() <= 1e-12 * scale {
        xs.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let sd = (ss / (n - 1) as f64).sqrt();
    xs.iter_mut().for_each(|x| *x /= sd);
}

/// `S·S` with `S = M + Mᵀ`, diagonal zeroed. Entry `(i, i')` is the sum over
/// third parties of the products of undirected tie strengths.
pub fn transitivity_slice(m: &Matrix) -> Result<Matrix> {
    if m.rows() != m.cols() {
        return Err(Error::dims(
            "transitivity_slice",
            format!("expected a square matrix, got {}x{}", m.rows(), m.cols()),
        ));
    }
    let s = m.add(&m.transpose())?;
    let mut t = s.matmul(&s)?;
    for i in 0..t.rows() {
        t.set(i, i, 0.0);
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceBlock {
    Direct,
    Reciprocal,
    Transitive,
}

impl SliceBlock {
    pub const ALL: [SliceBlock; 3] = [SliceBlock::Direct, SliceBlock::Reciprocal, SliceBlock::Transitive];

    pub fn as_str(self) -> &'static str {
        match self {
            SliceBlock::Direct => "direct",
            SliceBlock::Reciprocal => "reciprocal",
            SliceBlock::Transitive => "transitive",
        }
    }
}

impl fmt::Display for SliceBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which block and source variable a design slice (column of B3) belongs to.
pub fn slice_block(slice: usize, num_variables: usize) -> (SliceBlock, usize) {
    (SliceBlock::ALL[slice / num_variables], slice % num_variables)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignTensor {
    data: Tensor4,
    response: Tensor4,
    num_variables: usize,
    transitive_standardized: bool,
}

impl DesignTensor {
    /// Assembles a design from precomputed parts; shapes must agree. Self-dyad
    /// cells of the response are not modeled and are set to zero.
    pub fn from_parts(data: Tensor4, mut response: Tensor4) -> Result<Self> {
        let [m, m2, s, n] = data.dims();
        let [rm, rm2, v, rn] = response.dims();
        if m != m2 || rm != m || rm2 != m || rn != n || s != 3 * v {
            return Err(Error::dims(
                "DesignTensor::from_parts",
                format!("design {:?} vs response {:?}", data.dims(), response.dims()),
            ));
        }
        response.zero_diagonal();
        Ok(DesignTensor {
            data,
            response,
            num_variables: v,
            transitive_standardized: false,
        })
    }

    pub fn data(&self) -> &Tensor4 {
        &self.data
    }

    pub fn response(&self) -> &Tensor4 {
        &self.response
    }

    pub fn num_actors(&self) -> usize {
        self.data.dims()[0]
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn num_times(&self) -> usize {
        self.data.dims()[3]
    }

    pub fn transitive_standardized(&self) -> bool {
        self.transitive_standardized
    }

    pub fn block_labels(&self) -> Vec<(SliceBlock, usize)> {
        (0..3 * self.num_variables)
            .map(|s| slice_block(s, self.num_variables))
            .collect()
    }

    /// Re-standardizes every dyad series of the transitive block to mean 0,
    /// unit sample sd (constant series become 0).
    pub fn standardize_transitive(&self) -> DesignTensor {
        let [m, _, _, n] = self.data.dims();
        let v = self.num_variables;
        let mut data = self.data.clone();
        let mut buf = vec![0.0; n];
        for w in 2 * v..3 * v {
            for j in 0..m {
                for i in 0..m {
                    if i == j {
                        continue;
                    }
                    for (t, b) in buf.iter_mut().enumerate() {
                        *b = data.get(i, j, w, t);
                    }
                    standardize(&mut buf);
                    for (t, b) in buf.iter().enumerate() {
                        data.set(i, j, w, t, *b);
                    }
                }
            }
        }
        DesignTensor {
            data,
            response: self.response.clone(),
            num_variables: v,
            transitive_standardized: true,
        }
    }
}

/// Builds the one-period-lagged design with direct, reciprocal and transitive blocks.
pub fn build_design(series: &RelationalSeries) -> Result<DesignTensor> {
    let [m, _, v, n] = series.data().dims();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 periods, got {n}")));
    }
    let y = series.data();
    let mut x = Tensor4::zeros([m, m, 3 * v, n - 1]);
    for t in 1..n {
        let lag = t - 1;
        for w in 0..v {
            let prev = y.slice(w, lag);
            for j in 0..m {
                for i in 0..m {
                    x.set(i, j, w, lag, prev.get(i, j));
                    x.set(i, j, v + w, lag, prev.get(j, i));
                }
            }
            x.set_slice(2 * v + w, lag, &transitivity_slice(&prev)?)?;
        }
    }
    let response = y.time_range(1, n - 1)?;
    DesignTensor::from_parts(x, response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series_from(values: &[f64]) -> RelationalSeries {
        // one off-diagonal dyad (0,1) carries the values; 3 actors, 1 variable
        let n = values.len();
        let data = Tensor4::from_fn([3, 3, 1, n], |i, j, _, t| if (i, j) == (0, 1) { values[t] } else { 0.0 });
        RelationalSeries::unlabeled(data).unwrap()
    }

    fn random_series(rng: &mut ChaCha8Rng, m: usize, v: usize, n: usize) -> RelationalSeries {
        let data = Tensor4::from_fn([m, m, v, n], |i, j, _, _| {
            if i == j {
                0.0
            } else {
                rng.random_range(-2.0..2.0)
            }
        });
        RelationalSeries::unlabeled(data).unwrap()
    }

    #[test]
    fn series_invariants_enforced() {
        assert!(RelationalSeries::unlabeled(Tensor4::zeros([2, 2, 1, 3])).is_err());
        assert!(RelationalSeries::unlabeled(Tensor4::zeros([3, 3, 1, 1])).is_err());
        let mut bad = Tensor4::zeros([3, 3, 1, 2]);
        bad.set(1, 1, 0, 0, 1.0);
        assert!(RelationalSeries::unlabeled(bad).is_err());
    }

    #[test]
    fn demean_examples() {
        let out = demean(&series_from(&[4.0, 4.0, 4.0]));
        assert!((0..3).all(|t| out.data().get(0, 1, 0, t) == 0.0));
        let out = demean(&series_from(&[1.0, 2.0, 3.0]));
        let got: Vec<f64> = (0..3).map(|t| out.data().get(0, 1, 0, t)).collect();
        assert_eq!(got, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn demean_random_panel_has_zero_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_series(&mut rng, 4, 2, 7);
        let out = demean(&s);
        for w in 0..2 {
            for j in 0..4 {
                for i in 0..4 {
                    let mean: f64 = (0..7).map(|t| out.data().get(i, j, w, t)).sum::<f64>() / 7.0;
                    assert!(mean.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn average_ranks_handle_ties() {
        assert_eq!(average_ranks(&[5.0, 1.0, 9.0]), vec![2.0, 1.0, 3.0]);
        assert_eq!(average_ranks(&[2.0, 2.0, 1.0, 2.0]), vec![3.0, 3.0, 1.0, 3.0]);
    }

    #[test]
    fn normal_scores_small_example() {
        // Φ⁻¹(1/6) = -0.967421566101701 (reference value from the normal quantile function)
        let s = normal_scores(&[5.0, 1.0, 9.0]);
        assert!(s[0].abs() < 1e-12);
        assert!((s[1] + 0.967_421_566_101_701).abs() < 1e-9);
        assert!((s[2] - 0.967_421_566_101_701).abs() < 1e-9);
    }

    #[test]
    fn inverse_cdf_accuracy() {
        // reference quantiles of the standard normal
        let cases = [
            (1e-7, -5.199_337_582_187_471),
            (0.001, -3.090_232_306_167_813),
            (0.025, -1.959_963_984_540_054),
            (0.5, 0.0),
            (0.841_344_746_068_543, 1.0),
            (0.975, 1.959_963_984_540_054),
            (1.0 - 1e-7, 5.199_337_582_187_471),
        ];
        for (p, z) in cases {
            assert!((inverse_normal_cdf(p) - z).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn qq_normalize_constant_and_moments() {
        let out = qq_normalize(&series_from(&[3.0, 3.0, 3.0, 3.0]));
        assert!(out.data().values().iter().all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = random_series(&mut rng, 3, 1, 25);
        let out = qq_normalize(&s);
        for j in 0..3 {
            for i in 0..3 {
                if i == j {
                    continue;
                }
                let xs: Vec<f64> = (0..25).map(|t| out.data().get(i, j, 0, t)).collect();
                let mean = xs.iter().sum::<f64>() / 25.0;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 24.0).sqrt();
                assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn qq_normalize_is_rank_based() {
        let a = qq_normalize(&series_from(&[0.3, -1.0, 2.0, 2.0, 7.5]));
        let b = qq_normalize(&series_from(&[0.3f64.exp(), (-1.0f64).exp(), 2.0f64.exp(), 2.0f64.exp(), 7.5f64.exp()]));
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn transitivity_examples() {
        let z = Matrix::zeros(3, 3);
        assert_eq!(transitivity_slice(&z).unwrap(), z);
        let m = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let expected = Matrix::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(transitivity_slice(&m).unwrap(), expected);
        assert!(transitivity_slice(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn transitivity_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = Matrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
        let t = transitivity_slice(&m).unwrap();
        for i in 0..5 {
            for k in 0..5 {
                let expected = if i == k {
                    0.0
                } else {
                    (0..5)
                        .map(|l| (m.get(i, l) + m.get(l, i)) * (m.get(k, l) + m.get(l, k)))
                        .sum()
                };
                assert!((t.get(i, k) - expected).abs() < 1e-12);
                assert!((t.get(i, k) - t.get(k, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn toy_design_matches_hand_loop() {
        // 3 actors, 1 variable, 2 periods
        let y0 = [[0.0, 1.0, 2.0], [3.0, 0.0, 4.0], [5.0, 6.0, 0.0]];
        let data = Tensor4::from_fn([3, 3, 1, 2], |i, j, _, t| if t == 0 { y0[i][j] } else { (i * 3 + j) as f64 * (i != j) as u8 as f64 });
        let d = build_design(&RelationalSeries::unlabeled(data.clone()).unwrap()).unwrap();
        assert_eq!(d.data().dims(), [3, 3, 3, 1]);
        assert_eq!(d.response().dims(), [3, 3, 1, 1]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.data().get(i, j, 0, 0), y0[i][j]);
                assert_eq!(d.data().get(i, j, 1, 0), y0[j][i]);
                let mut tr = 0.0;
                if i != j {
                    for k in 0..3 {
                        tr += (y0[i][k] + y0[k][i]) * (y0[j][k] + y0[k][j]);
                    }
                }
                assert_eq!(d.data().get(i, j, 2, 0), tr);
                assert_eq!(d.response().get(i, j, 0, 0), data.get(i, j, 0, 1));
            }
        }
    }

    #[test]
    fn design_blocks_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let s = random_series(&mut rng, 5, 2, 6);
        let d = build_design(&s).unwrap();
        assert_eq!(d, build_design(&s).unwrap());
        let x = d.data();
        for t in 0..5 {
            for w in 0..6 {
                for i in 0..5 {
                    assert_eq!(x.get(i, i, w, t), 0.0);
                }
            }
            for w in 0..2 {
                for j in 0..5 {
                    for i in 0..5 {
                        assert_eq!(x.get(i, j, w, t), s.data().get(i, j, w, t));
                        assert_eq!(x.get(i, j, 2 + w, t), x.get(j, i, w, t));
                    }
                }
            }
        }
        assert_eq!(
            d.block_labels(),
            vec![
                (SliceBlock::Direct, 0),
                (SliceBlock::Direct, 1),
                (SliceBlock::Reciprocal, 0),
                (SliceBlock::Reciprocal, 1),
                (SliceBlock::Transitive, 0),
                (SliceBlock::Transitive, 1)
            ]
        );
    }

    #[test]
    fn standardized_transitive_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let d = build_design(&random_series(&mut rng, 4, 1, 9)).unwrap();
        let sd = d.standardize_transitive();
        assert!(sd.transitive_standardized());
        for j in 0..4 {
            for i in 0..4 {
                // direct/reciprocal untouched
                assert_eq!(sd.data().get(i, j, 0, 3), d.data().get(i, j, 0, 3));
                let xs: Vec<f64> = (0..8).map(|t| sd.data().get(i, j, 2, t)).collect();
                if i == j {
                    assert!(xs.iter().all(|&x| x == 0.0));
                } else {
                    let mean = xs.iter().sum::<f64>() / 8.0;
                    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 7.0;
                    assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn variable_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let s = random_series(&mut rng, 3, 2, 3);
        let sel = s.select_variables(&["v1".to_string()]).unwrap();
        assert_eq!(sel.num_variables(), 1);
        assert_eq!(sel.data().get(0, 2, 0, 1), s.data().get(0, 2, 1, 1));
        assert!(s.select_variables(&["nope".to_string()]).is_err());
    }
}
