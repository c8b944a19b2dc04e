//! Sparse LU factorization of the working-set matrix with product-form
//! updates.
//!
//! The matrix `B` has one row per working-set slot. After slot `q` is
//! replaced by a row `a`, the new matrix is `E B` where `E` is the identity
//! with row `q` replaced by `w^T = (B^{-T} a)^T`; only `w` needs storing.

use alloc::vec;
use alloc::vec::Vec;

/// Relative pivot threshold of the Markowitz search.
const THRESHOLD: f64 = 0.1;
/// Columns examined per pivot search.
const SEARCH_COLS: usize = 4;
/// Pivots at or below this magnitude count as zero.
const TINY: f64 = 1e-13;

/// Rows and columns left without a pivot when elimination breaks down.
#[derive(Debug)]
pub(crate) struct Singular {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

struct Step {
    row: u32,
    col: u32,
    pivot: f64,
    /// Remaining entries of the pivot row, `(col, value)`.
    u: Vec<(u32, f64)>,
    /// Multipliers `(row, l)` applied to rows eliminated at this step.
    l: Vec<(u32, f64)>,
}

struct Eta {
    q: u32,
    wq: f64,
    /// Off-diagonal entries of `w`.
    w: Vec<(u32, f64)>,
}

pub(crate) struct Factor {
    n: usize,
    steps: Vec<Step>,
    etas: Vec<Eta>,
    eta_nnz: usize,
    lu_nnz: usize,
}

impl Factor {
    /// Factors the matrix whose row `t` is `rows[t]`.
    pub(crate) fn new(n: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(rows.len(), n);
        let mut active: Vec<Vec<(u32, f64)>> = rows
            .iter()
            .map(|r| {
                let mut v: Vec<(u32, f64)> =
                    r.iter().filter(|e| e.1 != 0.0).map(|&(j, a)| (j as u32, a)).collect();
                v.sort_by_key(|e| e.0);
                v.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                v
            })
            .collect();
        let mut col_rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut col_count = vec![0usize; n];
        for (i, r) in active.iter().enumerate() {
            for &(j, _) in r {
                col_rows[j as usize].push(i as u32);
                col_count[j as usize] += 1;
            }
        }
        let mut row_done = vec![false; n];
        let mut col_done = vec![false; n];
        let mut pos = vec![u32::MAX; n];
        let mut steps = Vec::with_capacity(n);
        let mut lu_nnz = 0;
        // Columns ordered by count are found by a scan; cheap at these sizes.
        for _ in 0..n {
            let mut cand: [(usize, usize); SEARCH_COLS] = [(usize::MAX, usize::MAX); SEARCH_COLS];
            for j in 0..n {
                if col_done[j] {
                    continue;
                }
                let c = col_count[j];
                if c < cand[SEARCH_COLS - 1].0 {
                    let mut k = SEARCH_COLS - 1;
                    while k > 0 && cand[k - 1].0 > c {
                        cand[k] = cand[k - 1];
                        k -= 1;
                    }
                    cand[k] = (c, j);
                }
            }
            let mut best: Option<(usize, usize, usize, f64)> = None; // (cost, row, col, value)
            for &(c, j) in cand.iter() {
                if c == usize::MAX || c == 0 {
                    continue;
                }
                let mut cmax = 0.0f64;
                let mut entries: Vec<(usize, f64)> = Vec::with_capacity(c);
                for &i in &col_rows[j] {
                    let i = i as usize;
                    if row_done[i] {
                        continue;
                    }
                    if let Some(&(_, a)) = active[i].iter().find(|e| e.0 as usize == j) {
                        cmax = cmax.max(a.abs());
                        entries.push((i, a));
                    }
                }
                for &(i, a) in &entries {
                    if a.abs() >= THRESHOLD * cmax && a != 0.0 {
                        let cost = (active[i].len() - 1) * (c - 1);
                        let better = match best {
                            None => true,
                            Some((bc, bi, bj, bv)) => {
                                cost < bc
                                    || (cost == bc && a.abs() > bv.abs())
                                    || (cost == bc && a.abs() == bv.abs() && (i, j) < (bi, bj))
                            }
                        };
                        if better {
                            best = Some((cost, i, j, a));
                        }
                    }
                }
                if let Some((0, ..)) = best {
                    break;
                }
            }
            let (r, j, pivot) = match best {
                Some((_, r, j, p)) if p.abs() > TINY => (r, j, p),
                _ => {
                    return Err(Singular {
                        rows: (0..n).filter(|&i| !row_done[i]).collect(),
                        cols: (0..n).filter(|&j| !col_done[j]).collect(),
                    })
                }
            };
            let u: Vec<(u32, f64)> = active[r].iter().copied().filter(|e| e.0 as usize != j).collect();
            let mut l = Vec::new();
            for idx in 0..col_rows[j].len() {
                let i = col_rows[j][idx] as usize;
                if i == r || row_done[i] {
                    continue;
                }
                let Some(p) = active[i].iter().position(|e| e.0 as usize == j) else {
                    continue;
                };
                let a = active[i].swap_remove(p).1;
                let f = a / pivot;
                l.push((i as u32, f));
                let row = &mut active[i];
                for (k, e) in row.iter().enumerate() {
                    pos[e.0 as usize] = k as u32;
                }
                for &(c, v) in &u {
                    let c = c as usize;
                    if pos[c] != u32::MAX {
                        row[pos[c] as usize].1 -= f * v;
                    } else {
                        pos[c] = row.len() as u32;
                        row.push((c as u32, -f * v));
                        col_rows[c].push(i as u32);
                        col_count[c] += 1;
                    }
                }
                for e in row.iter() {
                    pos[e.0 as usize] = u32::MAX;
                }
            }
            for &(c, _) in &u {
                col_count[c as usize] -= 1;
            }
            row_done[r] = true;
            col_done[j] = true;
            active[r] = Vec::new();
            lu_nnz += u.len() + l.len() + 1;
            steps.push(Step {
                row: r as u32,
                col: j as u32,
                pivot,
                u,
                l,
            });
        }
        Ok(Factor {
            n,
            steps,
            etas: Vec::new(),
            eta_nnz: 0,
            lu_nnz,
        })
    }

    /// Solves `B x = r` in place (`r` indexed by slot on entry, by variable
    /// on exit).
    pub(crate) fn ftran(&self, r: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let q = e.q as usize;
            let mut s = r[q];
            for &(t, v) in &e.w {
                s -= v * r[t as usize];
            }
            r[q] = s / e.wq;
        }
        for st in &self.steps {
            let v = r[st.row as usize];
            if v != 0.0 {
                for &(i, l) in &st.l {
                    r[i as usize] -= l * v;
                }
            }
        }
        // Back substitution writes x_{col} into a separate buffer because
        // rows and columns are indexed differently.
        let mut x = vec![0.0; self.n];
        for st in self.steps.iter().rev() {
            let mut s = r[st.row as usize];
            for &(c, u) in &st.u {
                s -= u * x[c as usize];
            }
            x[st.col as usize] = s / st.pivot;
        }
        r.copy_from_slice(&x);
    }

    /// Solves `B^T y = c` in place (`c` indexed by variable on entry, by slot
    /// on exit).
    pub(crate) fn btran(&self, c: &mut [f64]) {
        let mut z = vec![0.0; self.n];
        for (k, st) in self.steps.iter().enumerate() {
            let v = c[st.col as usize] / st.pivot;
            z[k] = v;
            if v != 0.0 {
                for &(j, u) in &st.u {
                    c[j as usize] -= u * v;
                }
            }
        }
        for (k, st) in self.steps.iter().enumerate().rev() {
            let mut s = z[k];
            for &(i, l) in &st.l {
                s -= l * c[i as usize];
            }
            c[st.row as usize] = s;
        }
        for e in &self.etas {
            let q = e.q as usize;
            let f = c[q] / e.wq;
            if f != 0.0 {
                for &(t, v) in &e.w {
                    c[t as usize] -= f * v;
                }
            }
            c[q] = f;
        }
    }

    /// Records the replacement of row `q`, where `w = B^{-T} a_new`.
    pub(crate) fn update(&mut self, q: usize, w: &[f64]) {
        let off: Vec<(u32, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(t, v)| t != q && *v != 0.0)
            .map(|(t, &v)| (t as u32, v))
            .collect();
        self.eta_nnz += off.len() + 1;
        self.etas.push(Eta {
            q: q as u32,
            wq: w[q],
            w: off,
        });
    }

    #[cfg(test)]
    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Whether the update file has grown enough that refactoring pays.
    pub(crate) fn is_stale(&self) -> bool {
        self.etas.len() >= 100 || self.eta_nnz > 4 * (self.lu_nnz + self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[Vec<(usize, f64)>], n: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for (i, r) in rows.iter().enumerate() {
            for &(j, a) in r {
                m[i][j] += a;
            }
        }
        m
    }

    fn sample() -> Vec<Vec<(usize, f64)>> {
        vec![
            vec![(0, 2.0), (3, 1.0)],
            vec![(1, 1.0)],
            vec![(0, 1.0), (1, -1.0), (2, 4.0)],
            vec![(2, 1.0), (3, -3.0), (4, 0.5)],
            vec![(0, 0.25), (4, 1.0)],
        ]
    }

    #[test]
    fn ftran_and_btran_solve() {
        let rows = sample();
        let m = dense(&rows, 5);
        let f = Factor::new(5, &rows).ok().unwrap();
        let b = [1.0, -2.0, 0.5, 3.0, 1.5];
        let mut x = b;
        f.ftran(&mut x);
        for i in 0..5 {
            let r: f64 = (0..5).map(|j| m[i][j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        let mut y = b;
        f.btran(&mut y);
        for j in 0..5 {
            let r: f64 = (0..5).map(|i| m[i][j] * y[i]).sum();
            assert!((r - b[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn updates_track_row_replacement() {
        let mut rows = sample();
        let mut f = Factor::new(5, &rows).ok().unwrap();
        let news = [
            (2usize, vec![(1usize, 2.0), (4usize, 1.0)]),
            (0, vec![(0, 1.0), (2, 1.0), (3, 1.0)]),
            (2, vec![(2, -1.0)]),
        ];
        for (q, a) in news {
            let mut w = vec![0.0; 5];
            for &(j, v) in &a {
                w[j] += v;
            }
            f.btran(&mut w);
            f.update(q, &w);
            rows[q] = a;
            let m = dense(&rows, 5);
            let b = [0.3, 1.0, -1.0, 2.0, 0.0];
            let mut x = b;
            f.ftran(&mut x);
            let mut y = b;
            f.btran(&mut y);
            for i in 0..5 {
                let r: f64 = (0..5).map(|j| m[i][j] * x[j]).sum();
                assert!((r - b[i]).abs() < 1e-12);
                let s: f64 = (0..5).map(|k| m[k][i] * y[k]).sum();
                assert!((s - b[i]).abs() < 1e-12);
            }
        }
        assert_eq!(f.num_updates(), 3);
    }

    #[test]
    fn singular_is_detected() {
        let rows = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]];
        let e = Factor::new(2, &rows).err().unwrap();
        assert_eq!((e.rows.len(), e.cols.len()), (1, 1));
        let rows = vec![vec![(0, 1.0)], vec![(0, 1.0)], vec![(2, 1.0)]];
        let e = Factor::new(3, &rows).err().unwrap();
        assert_eq!(e.rows, vec![1]);
        assert_eq!(e.cols, vec![1]);
    }
}
