//! Row-wise regression statistics for one coefficient matrix with the other two held fixed.
//!
//! Holding two of `B1, B2, B3` fixed, the model is linear in the remaining
//! one and its rows touch disjoint sets of observations, so each row is an
//! independent linear regression. Self-dyad cells are left out: for `B1` and
//! `B2` that drops a different set of columns per row, for `B3` the same set
//! for every row.

use super::CoefficientSet;
use crate::design::DesignTensor;
use crate::error::Result;
use crate::tensor::{matricize, mode_product, Matrix, Mode, Tensor4};

/// Which coefficient matrix is being updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Sender,
    Receiver,
    Mixing,
}

/// Gram matrix and cross-product vector for every row of one coefficient matrix.
#[derive(Debug, Clone)]
pub struct RowSystems {
    pub grams: Vec<Matrix>,
    pub rhs: Vec<Vec<f64>>,
}

impl RowSystems {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn gram(&self, row: usize) -> &Matrix {
        if self.grams.len() == 1 {
            &self.grams[0]
        } else {
            &self.grams[row]
        }
    }
}

/// Statistics for updating `factor` given the other two matrices in `coef`.
pub fn row_systems(design: &DesignTensor, coef: &CoefficientSet, factor: Factor) -> Result<RowSystems> {
    let x = design.data();
    let y = design.response();
    match factor {
        Factor::Sender => {
            let z = mode_product(&mode_product(x, &coef.b3, Mode::Three)?, &coef.b2, Mode::Two)?;
            Ok(actor_systems(&z, y, Mode::One))
        }
        Factor::Receiver => {
            let z = mode_product(&mode_product(x, &coef.b3, Mode::Three)?, &coef.b1, Mode::One)?;
            Ok(actor_systems(&z, y, Mode::Two))
        }
        Factor::Mixing => {
            let z = mode_product(&mode_product(x, &coef.b1, Mode::One)?, &coef.b2, Mode::Two)?;
            Ok(mixing_systems(&z, y))
        }
    }
}

/// Mode 1 or 2 statistics from the partially transformed design `z`.
///
/// In both unfoldings the column index modulo `m` is the other actor of the
/// dyad, so row `p` drops the columns `c` with `c % m == p`. The response is
/// zero on those columns, so only the Gram matrices need the exclusion.
pub(crate) fn actor_systems(z: &Tensor4, y: &Tensor4, mode: Mode) -> RowSystems {
    let zk = matricize(z, mode);
    let yk = matricize(y, mode);
    let m = zk.rows();
    let n = zk.cols();

    // per_other[q] = sum of z_c z_cᵀ over columns whose other actor is q
    let mut per_other = vec![vec![0.0; m * m]; m];
    let mut col = vec![0.0; m];
    for c in 0..n {
        for (a, dst) in col.iter_mut().enumerate() {
            *dst = zk.values()[a * n + c];
        }
        let acc = &mut per_other[c % m];
        for a in 0..m {
            let za = col[a];
            if za == 0.0 {
                continue;
            }
            let row = &mut acc[a * m..a * m + a + 1];
            for (dst, zb) in row.iter_mut().zip(&col[..=a]) {
                *dst += za * zb;
            }
        }
    }

    let mut grams = Vec::with_capacity(m);
    for p in 0..m {
        let mut g = vec![0.0; m * m];
        for (q, acc) in per_other.iter().enumerate() {
            if q == p {
                continue;
            }
            for (d, s) in g.iter_mut().zip(acc) {
                *d += s;
            }
        }
        for a in 0..m {
            for b in 0..a {
                g[b * m + a] = g[a * m + b];
            }
        }
        grams.push(Matrix::from_vec(m, m, g).expect("finite gram"));
    }
    let rhs = (0..m)
        .map(|p| (0..m).map(|a| dot(zk.row(a), yk.row(p))).collect())
        .collect();
    RowSystems { grams, rhs }
}

/// Mode 3 statistics from `z = X ×1 B1 ×2 B2`. Self-dyad cells are zeroed in
/// a copy of `z` so that plain dot products run over the kept cells only.
pub(crate) fn mixing_systems(z: &Tensor4, y: &Tensor4) -> RowSystems {
    let mut z = z.clone();
    z.zero_diagonal();
    let zk = matricize(&z, Mode::Three);
    let yk = matricize(y, Mode::Three);
    let s = zk.rows();
    let mut g = Matrix::zeros(s, s);
    for a in 0..s {
        for b in 0..=a {
            let v = dot(zk.row(a), zk.row(b));
            g.set(a, b, v);
            g.set(b, a, v);
        }
    }
    let rhs = (0..yk.rows())
        .map(|u| (0..s).map(|a| dot(zk.row(a), yk.row(u))).collect())
        .collect();
    RowSystems { grams: vec![g], rhs }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// RSS of `y` against `z ×3 b3` over off-diagonal cells, with `z = X ×1 B1 ×2 B2`.
pub(crate) fn rss_from_mixing(z: &Tensor4, b3: &Matrix, y: &Tensor4) -> Result<f64> {
    let fitted = mode_product(z, b3, Mode::Three)?;
    Ok(off_diagonal_sse(y, &fitted))
}

fn off_diagonal_sse(y: &Tensor4, fitted: &Tensor4) -> f64 {
    let [m, _, v, n] = y.dims();
    let mut rss = 0.0;
    for t in 0..n {
        for w in 0..v {
            for j in 0..m {
                for i in 0..m {
                    if i != j {
                        let e = y.get(i, j, w, t) - fitted.get(i, j, w, t);
                        rss += e * e;
                    }
                }
            }
        }
    }
    rss
}

/// Residual sum of squares over off-diagonal cells.
pub fn residual_sum_of_squares(design: &DesignTensor, coef: &CoefficientSet) -> Result<f64> {
    let fitted = crate::tensor::tucker_apply(design.data(), &coef.b1, &coef.b2, &coef.b3)?;
    Ok(off_diagonal_sse(design.response(), &fitted))
}

/// Number of off-diagonal response cells entering the likelihood.
pub fn observation_count(design: &DesignTensor) -> usize {
    let [m, _, v, n] = design.response().dims();
    m * (m - 1) * v * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design, RelationalSeries};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (DesignTensor, CoefficientSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, v, n) = (4, 2, 6);
        let data = Tensor4::from_fn([m, m, v, n], |i, j, _, _| {
            if i == j {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        });
        let d = build_design(&RelationalSeries::unlabeled(data).unwrap()).unwrap();
        let mut r = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let coef = CoefficientSet::new(r(m, m), r(m, m), r(v, 3 * v), 1.0).unwrap();
        (d, coef)
    }

    /// The regression statistics must reproduce the RSS as a quadratic in the updated factor:
    /// for any row value b, sum over kept cells of (y - b·z)² = yᵀy - 2 bᵀr + bᵀGb.
    fn check_quadratic(factor: Factor) {
        let (d, coef) = setup(21);
        let sys = row_systems(&d, &coef, factor).unwrap();
        let rss = residual_sum_of_squares(&d, &coef).unwrap();
        let mat = match factor {
            Factor::Sender => &coef.b1,
            Factor::Receiver => &coef.b2,
            Factor::Mixing => &coef.b3,
        };
        // yᵀy over kept cells
        let y = d.response();
        let [m, _, v, n] = y.dims();
        let mut yy = 0.0;
        for t in 0..n {
            for w in 0..v {
                for j in 0..m {
                    for i in 0..m {
                        if i != j {
                            yy += y.get(i, j, w, t).powi(2);
                        }
                    }
                }
            }
        }
        let mut quad = yy;
        for p in 0..sys.len() {
            let b = mat.row(p);
            let g = sys.gram(p);
            let gb = g.matvec(b).unwrap();
            quad += -2.0 * b.iter().zip(&sys.rhs[p]).map(|(x, r)| x * r).sum::<f64>()
                + b.iter().zip(&gb).map(|(x, y)| x * y).sum::<f64>();
        }
        assert!((quad - rss).abs() < 1e-9 * rss.max(1.0), "{factor:?}: {quad} vs {rss}");
    }

    #[test]
    fn sender_statistics_reproduce_rss() {
        check_quadratic(Factor::Sender);
    }

    #[test]
    fn receiver_statistics_reproduce_rss() {
        check_quadratic(Factor::Receiver);
    }

    #[test]
    fn mixing_statistics_reproduce_rss() {
        check_quadratic(Factor::Mixing);
    }

    #[test]
    fn counts_off_diagonal_cells() {
        let (d, _) = setup(22);
        assert_eq!(observation_count(&d), 4 * 3 * 2 * 5);
    }
}
