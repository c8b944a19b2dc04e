use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;

/// Nearest power of two, so that scaling never perturbs mantissas.
pub(super) fn pow2(v: f64) -> f64 {
    if !(v > 0.0) || !v.is_finite() {
        return 1.0;
    }
    libm::exp2(libm::round(libm::log2(v)))
}

/// Geometric-mean equilibration: alternately divides each row and column by
/// `sqrt(min |a| * max |a|)` over its entries. Returns `(row, col)` factors
/// such that the scaled entry is `row[i] * a_ij * col[j]`.
pub(super) fn geometric(csr: &CsrMatrix, passes: usize) -> (Vec<f64>, Vec<f64>) {
    let mut row = vec![1.0; csr.nrows];
    let mut col = vec![1.0; csr.ncols];
    for _ in 0..passes {
        for i in 0..csr.nrows {
            let (cols, vals) = csr.row(i);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for (&j, a) in cols.iter().zip(vals) {
                let v = (a * col[j]).abs();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > 0.0 {
                row[i] = pow2(1.0 / libm::sqrt(lo * hi));
            }
        }
        let mut lo = vec![f64::INFINITY; csr.ncols];
        let mut hi = vec![0.0f64; csr.ncols];
        for i in 0..csr.nrows {
            let (cols, vals) = csr.row(i);
            for (&j, a) in cols.iter().zip(vals) {
                let v = (a * row[i]).abs();
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        for j in 0..csr.ncols {
            if hi[j] > 0.0 {
                col[j] = pow2(1.0 / libm::sqrt(lo[j] * hi[j]));
            }
        }
    }
    (row, col)
}

/// Row factor for a row added after the column factors were fixed.
pub(super) fn row_factor(terms: &[(usize, f64)], col: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &(j, a) in terms {
        let v = (a * col[j]).abs();
        if v > 0.0 {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi > 0.0 {
        pow2(1.0 / libm::sqrt(lo * hi))
    } else {
        1.0
    }
}
