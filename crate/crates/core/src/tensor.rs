//! Dense row-major tensor contractions used by the quadrature transform and the
//! design operator. Axis 0 is the most significant (slowest varying) axis.

/// Contracts `axis` of the tensor `x` (shape `dims`) with the row-major matrix
/// `mat` of shape `rows x dims[axis]`, returning a tensor whose `axis` has
/// length `rows`.
pub(crate) fn mode_product(x: &[f64], dims: &[usize], axis: usize, mat: &[f64], rows: usize) -> Vec<f64> {
    let cols = dims[axis];
    debug_assert_eq!(mat.len(), rows * cols);
    debug_assert_eq!(x.len(), dims.iter().product::<usize>());
    let pre: usize = dims[..axis].iter().product();
    let post: usize = dims[axis + 1..].iter().product();
    let mut out = vec![0.0; pre * rows * post];

    if post == 1 {
        for p in 0..pre {
            let src = &x[p * cols..(p + 1) * cols];
            let dst = &mut out[p * rows..(p + 1) * rows];
            for (o, slot) in dst.iter_mut().enumerate() {
                *slot = dot(&mat[o * cols..(o + 1) * cols], src);
            }
        }
    } else {
        for p in 0..pre {
            for o in 0..rows {
                let dst = &mut out[(p * rows + o) * post..(p * rows + o + 1) * post];
                for i in 0..cols {
                    let a = mat[o * cols + i];
                    if a == 0.0 {
                        continue;
                    }
                    let src = &x[(p * cols + i) * post..(p * cols + i + 1) * post];
                    axpy(a, src, dst);
                }
            }
        }
    }
    out
}

/// Same as [`mode_product`] but with the transpose of `mat` (`mat` is
/// `cols x dims[axis]`, the result has `cols` entries along `axis`).
pub(crate) fn mode_product_transposed(
    x: &[f64],
    dims: &[usize],
    axis: usize,
    mat: &[f64],
    cols: usize,
) -> Vec<f64> {
    let rows = dims[axis];
    debug_assert_eq!(mat.len(), rows * cols);
    let pre: usize = dims[..axis].iter().product();
    let post: usize = dims[axis + 1..].iter().product();
    let mut out = vec![0.0; pre * cols * post];
    for p in 0..pre {
        for i in 0..rows {
            let row = &mat[i * cols..(i + 1) * cols];
            if post == 1 {
                let a = x[p * rows + i];
                if a != 0.0 {
                    axpy(a, row, &mut out[p * cols..(p + 1) * cols]);
                }
            } else {
                let src = &x[(p * rows + i) * post..(p * rows + i + 1) * post];
                for (j, &coef) in row.iter().enumerate() {
                    if coef == 0.0 {
                        continue;
                    }
                    let dst = &mut out[(p * cols + j) * post..(p * cols + j + 1) * post];
                    axpy(coef, src, dst);
                }
            }
        }
    }
    out
}

/// Dot product with eight independent accumulators so the reduction vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += xa[l] * xb[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_mode(x: &[f64], dims: &[usize], axis: usize, mat: &[f64], rows: usize) -> Vec<f64> {
        let mut out_dims = dims.to_vec();
        out_dims[axis] = rows;
        let total: usize = out_dims.iter().product();
        let mut out = vec![0.0; total];
        for (lin, slot) in out.iter_mut().enumerate() {
            let mut idx = vec![0; dims.len()];
            let mut rem = lin;
            for a in (0..dims.len()).rev() {
                idx[a] = rem % out_dims[a];
                rem /= out_dims[a];
            }
            for i in 0..dims[axis] {
                let mut src = idx.clone();
                src[axis] = i;
                let mut off = 0;
                for a in 0..dims.len() {
                    off = off * dims[a] + src[a];
                }
                *slot += mat[idx[axis] * dims[axis] + i] * x[off];
            }
        }
        out
    }

    #[test]
    fn mode_product_matches_naive_contraction() {
        let dims = [3, 4, 2];
        let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        for axis in 0..3 {
            let rows = 5;
            let mat: Vec<f64> = (0..rows * dims[axis]).map(|i| (i as f64 * 1.3).cos()).collect();
            let fast = mode_product(&x, &dims, axis, &mat, rows);
            let slow = naive_mode(&x, &dims, axis, &mat, rows);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_product_is_adjoint() {
        let dims = [3, 4];
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sqrt()).collect();
        let rows = 6;
        let mat: Vec<f64> = (0..rows * 4).map(|i| (i as f64 * 0.7).sin()).collect();
        let ax = mode_product(&x, &dims, 1, &mat, rows);
        let y: Vec<f64> = (0..18).map(|i| (i as f64 * 0.11).cos()).collect();
        let aty = mode_product_transposed(&y, &[3, rows], 1, &mat, 4);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
