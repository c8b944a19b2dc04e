//! Dense Cholesky used by the interior-point path, the ADMM solver and the
//! least-squares baseline.

use alloc::vec::Vec;

/// Lower Cholesky factor of a symmetric positive definite row-major matrix.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Diagonal entries below `floor` are replaced by `floor` (a mild
    /// regularization that keeps nearly singular normal equations usable).
    pub(crate) fn factor(n: usize, mut a: Vec<f64>, floor: f64) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        for j in 0..n {
            let mut diag = a[j * n + j];
            for k in 0..j {
                diag -= a[j * n + k] * a[j * n + k];
            }
            if !diag.is_finite() {
                return None;
            }
            if diag < floor {
                diag = floor;
            }
            let ljj = libm::sqrt(diag);
            a[j * n + j] = ljj;
            for i in j + 1..n {
                let (rows_j, rows_i) = a.split_at_mut(i * n);
                let rj = &rows_j[j * n..j * n + j];
                let ri = &mut rows_i[..n];
                let mut s = ri[j];
                for (x, y) in ri[..j].iter().zip(rj) {
                    s -= x * y;
                }
                ri[j] = s / ljj;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                a[i * n + j] = 0.0;
            }
        }
        Some(Cholesky { n, l: a })
    }

    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = b[i];
            for (l, x) in row.iter().zip(&b[..i]) {
                s -= l * x;
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.l[j * n + i] * b[j];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}
