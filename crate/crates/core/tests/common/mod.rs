#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relmlr::design::{build_design, DesignTensor, RelationalSeries};
use relmlr::estimation::{normalize_identifiability, CoefficientSet};
use relmlr::tensor::{tucker_apply, Matrix, Tensor4};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 4]) -> Tensor4 {
    Tensor4::from_fn(dims, |_, _, _, _| rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_series(rng: &mut ChaCha8Rng, m: usize, v: usize, n: usize) -> RelationalSeries {
    let data = Tensor4::from_fn([m, m, v, n], |i, j, _, _| {
        if i == j {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    RelationalSeries::unlabeled(data).unwrap()
}

/// Identity plus small off-diagonal structure: stable, positive trace.
pub fn near_identity(rng: &mut ChaCha8Rng, m: usize, spread: f64) -> Matrix {
    Matrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { spread * rng.random_range(-1.0..1.0) })
}

/// A B3 with direct effects dominating, modest reciprocity, small transitivity.
pub fn planted_b3(v: usize) -> Matrix {
    let mut rows = Vec::new();
    for u in 0..v {
        let mut row = vec![0.0; 3 * v];
        for w in 0..v {
            row[w] = if u == w { 0.4 } else { 0.1 };
            row[v + w] = if u == w { 0.2 } else { -0.05 };
            row[2 * v + w] = if u == w { 0.02 } else { 0.0 };
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows).unwrap()
}

pub fn planted_truth(rng: &mut ChaCha8Rng, m: usize, v: usize) -> CoefficientSet {
    let c = CoefficientSet::new(
        near_identity(rng, m, 0.1),
        near_identity(rng, m, 0.1),
        planted_b3(v),
        1.0,
    )
    .unwrap();
    normalize_identifiability(&c).unwrap()
}

/// Design from a random panel with the response replaced by the noiseless model output.
pub fn noiseless_design(rng: &mut ChaCha8Rng, truth: &CoefficientSet, n: usize) -> DesignTensor {
    let (m, v) = (truth.num_actors(), truth.num_variables());
    let d = build_design(&random_series(rng, m, v, n)).unwrap();
    let mut y = tucker_apply(d.data(), &truth.b1, &truth.b2, &truth.b3).unwrap();
    y.zero_diagonal();
    DesignTensor::from_parts(d.data().clone(), y).unwrap()
}

/// `max |a - b| / max |b|`.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let scale = b.values().iter().fold(0.0f64, |s, x| s.max(x.abs()));
    a.max_abs_diff(b) / scale
}
