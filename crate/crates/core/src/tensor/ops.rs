use super::{Matrix, Mode, Tensor4};
use crate::error::{Error, Result};

/// Splits `dims` around `mode` into (product of earlier dims, mode size, product of later dims).
fn split_dims(dims: [usize; 4], mode: Mode) -> (usize, usize, usize) {
    let k = mode.index();
    let inner = dims[..k].iter().product();
    let outer = dims[k + 1..].iter().product();
    (inner, dims[k], outer)
}

/// Mode-k product `X ×_k M`: contracts mode `k` of `x` against the columns of `m`.
///
/// The reduction order is fixed (outer block, output row, contracted index,
/// inner index), so results are bitwise reproducible.
pub fn mode_product(x: &Tensor4, m: &Matrix, mode: Mode) -> Result<Tensor4> {
    let dims = x.dims();
    let (inner, size, outer) = split_dims(dims, mode);
    if m.cols() != size {
        return Err(Error::dims(
            "mode_product",
            format!(
                "mode {} has size {size} but matrix is {}x{}",
                mode.number(),
                m.rows(),
                m.cols()
            ),
        ));
    }
    let rows = m.rows();
    let mut out_dims = dims;
    out_dims[mode.index()] = rows;
    let mut out = Tensor4::zeros(out_dims);
    let src = x.values();
    let dst = out.values_mut();
    if inner == 1 {
        // contiguous fibres: one dot product per output entry
        for b in 0..outer {
            let xs = &src[b * size..(b + 1) * size];
            for r in 0..rows {
                let mut acc = 0.0;
                for (c, v) in m.row(r).iter().zip(xs) {
                    acc += c * v;
                }
                dst[b * rows + r] = acc;
            }
        }
        return Ok(out);
    }
    for b in 0..outer {
        for r in 0..rows {
            let d = &mut dst[(b * rows + r) * inner..(b * rows + r + 1) * inner];
            for s in 0..size {
                let coef = m.get(r, s);
                if coef == 0.0 {
                    continue;
                }
                let xs = &src[(b * size + s) * inner..(b * size + s + 1) * inner];
                for (o, v) in d.iter_mut().zip(xs) {
                    *o += coef * v;
                }
            }
        }
    }
    Ok(out)
}

/// The Tucker product `X × {B1, B2, B3}` over the first three modes; time is untouched.
pub fn tucker_apply(x: &Tensor4, b1: &Matrix, b2: &Matrix, b3: &Matrix) -> Result<Tensor4> {
    let dims = x.dims();
    for (k, b) in [b1, b2, b3].into_iter().enumerate() {
        if b.cols() != dims[k] {
            return Err(Error::dims(
                "tucker_apply",
                format!(
                    "B{} has {} columns but mode {} has size {}",
                    k + 1,
                    b.cols(),
                    k + 1,
                    dims[k]
                ),
            ));
        }
    }
    // Contract the (usually small) third mode first; the result is identical
    // in exact arithmetic because mode products on distinct modes commute.
    let z = mode_product(x, b3, Mode::Three)?;
    let z = mode_product(&z, b1, Mode::One)?;
    mode_product(&z, b2, Mode::Two)
}

/// Mode-k unfolding. Row `r` holds every entry whose mode-k index is `r`.
pub fn matricize(x: &Tensor4, mode: Mode) -> Matrix {
    let (inner, size, outer) = split_dims(x.dims(), mode);
    let cols = inner * outer;
    let src = x.values();
    let mut out = Matrix::zeros(size, cols);
    let dst = out.values_mut();
    if inner == 1 {
        for (b, fibre) in src.chunks_exact(size).enumerate() {
            for (s, v) in fibre.iter().enumerate() {
                dst[s * cols + b] = *v;
            }
        }
        return out;
    }
    for b in 0..outer {
        for s in 0..size {
            let from = &src[(b * size + s) * inner..(b * size + s + 1) * inner];
            let start = s * cols + b * inner;
            dst[start..start + inner].copy_from_slice(from);
        }
    }
    out
}

/// Inverse of [`matricize`].
pub fn dematricize(m: &Matrix, dims: [usize; 4], mode: Mode) -> Result<Tensor4> {
    if dims.contains(&0) {
        return Err(Error::dims("dematricize", format!("zero-sized dims {dims:?}")));
    }
    let (inner, size, outer) = split_dims(dims, mode);
    if m.rows() != size || m.cols() != inner * outer {
        return Err(Error::dims(
            "dematricize",
            format!(
                "{}x{} matrix cannot fold into {dims:?} along mode {}",
                m.rows(),
                m.cols(),
                mode.number()
            ),
        ));
    }
    let cols = m.cols();
    let src = m.values();
    let mut out = Tensor4::zeros(dims);
    let dst = out.values_mut();
    for b in 0..outer {
        for s in 0..size {
            let start = s * cols + b * inner;
            dst[(b * size + s) * inner..(b * size + s + 1) * inner]
                .copy_from_slice(&src[start..start + inner]);
        }
    }
    Ok(out)
}

/// Kronecker product `B ⊗ A`: block `(p, q)` is `B[p, q] * A`.
pub fn kronecker(b: &Matrix, a: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    Matrix::from_fn(b.rows() * ar, b.cols() * ac, |i, j| {
        b.get(i / ar, j / ac) * a.get(i % ar, j % ac)
    })
}

/// One step of the bilinear autoregression, `A · Y · Bᵀ`.
pub fn bilinear_step(a: &Matrix, y: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != y.rows() || b.cols() != y.cols() {
        return Err(Error::dims(
            "bilinear_step",
            format!(
                "A {:?}, Y {:?}, B {:?} are not conformable",
                a.shape(),
                y.shape(),
                b.shape()
            ),
        ));
    }
    a.matmul(y)?.matmul(&b.transpose())
}
