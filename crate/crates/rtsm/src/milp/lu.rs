//! Sparse LU of a simplex basis with product-form updates.
//!
//! Left-looking elimination with threshold partial pivoting. Columns are
//! processed sparsest first, which keeps logical columns trivially pivoted.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Sparse column: parallel row-index and value arrays.
#[derive(Clone, Debug, Default)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn push(&mut self, i: usize, v: f64) {
        self.idx.push(i);
        self.val.push(v);
    }

    pub fn dot_dense(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }
}

struct Eta {
    pos: usize,
    pivot: f64,
    col: SparseVec,
}

/// Factorized basis `B` (columns by basis position).
pub struct Factor {
    m: usize,
    /// Step `k` pivots basis position `col_of[k]` on row `row_of[k]`.
    col_of: Vec<usize>,
    row_of: Vec<usize>,
    /// Below-pivot multipliers per step, indexed by original row.
    lower: Vec<SparseVec>,
    /// Above-diagonal entries per step, indexed by earlier step.
    upper: Vec<SparseVec>,
    diag: Vec<f64>,
    etas: Vec<Eta>,
}

/// Factorization failed; the listed basis positions could not be pivoted and
/// the listed rows were left without a pivot.
#[derive(Debug)]
pub struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

const PIVOT_ABS: f64 = 1e-11;
const PIVOT_REL: f64 = 0.01;

impl Factor {
    pub fn new(m: usize, cols: &[&SparseVec]) -> Result<Factor, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| (cols[j].idx.len(), j));

        // row counts for the tie-break between acceptable pivots
        let mut row_count = vec![0usize; m];
        for c in cols {
            for &i in &c.idx {
                row_count[i] += 1;
            }
        }

        let mut step_of_row = vec![usize::MAX; m];
        let mut f = Factor {
            m,
            col_of: Vec::with_capacity(m),
            row_of: Vec::with_capacity(m),
            lower: Vec::with_capacity(m),
            upper: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            etas: Vec::new(),
        };
        let mut work = vec![0.0f64; m];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; m];
        let mut failed = Vec::new();

        let mut queued = vec![false; m];
        let mut queued_list: Vec<usize> = Vec::new();
        let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();

        for &pos in &order {
            let c = cols[pos];
            for (&i, &v) in c.idx.iter().zip(&c.val) {
                if !mark[i] {
                    mark[i] = true;
                    touched.push(i);
                }
                work[i] += v;
                let s = step_of_row[i];
                if s != usize::MAX && !queued[s] {
                    queued[s] = true;
                    queued_list.push(s);
                    heap.push(Reverse(s));
                }
            }
            // apply earlier eliminations in step order; fill only reaches later steps
            let mut upper = SparseVec::default();
            while let Some(Reverse(k)) = heap.pop() {
                let xr = work[f.row_of[k]];
                if xr == 0.0 {
                    continue;
                }
                upper.push(k, xr);
                let low = &f.lower[k];
                for (&i, &l) in low.idx.iter().zip(&low.val) {
                    if !mark[i] {
                        mark[i] = true;
                        touched.push(i);
                    }
                    work[i] -= l * xr;
                    let s = step_of_row[i];
                    if s != usize::MAX && !queued[s] {
                        queued[s] = true;
                        queued_list.push(s);
                        heap.push(Reverse(s));
                    }
                }
            }
            for &s in &queued_list {
                queued[s] = false;
            }
            queued_list.clear();
            // choose pivot among unpivoted rows
            let mut best_abs = 0.0f64;
            for &i in &touched {
                if step_of_row[i] == usize::MAX {
                    best_abs = best_abs.max(work[i].abs());
                }
            }
            let mut piv_row = usize::MAX;
            if best_abs > PIVOT_ABS {
                let mut best_cnt = usize::MAX;
                for &i in &touched {
                    if step_of_row[i] == usize::MAX && work[i].abs() >= PIVOT_REL * best_abs {
                        let cnt = row_count[i];
                        if cnt < best_cnt || (cnt == best_cnt && i < piv_row) {
                            best_cnt = cnt;
                            piv_row = i;
                        }
                    }
                }
            }
            if piv_row == usize::MAX {
                failed.push(pos);
            } else {
                let k = f.col_of.len();
                let p = work[piv_row];
                let mut low = SparseVec::default();
                for &i in &touched {
                    if step_of_row[i] == usize::MAX && i != piv_row && work[i] != 0.0 {
                        low.push(i, work[i] / p);
                    }
                }
                step_of_row[piv_row] = k;
                f.col_of.push(pos);
                f.row_of.push(piv_row);
                f.lower.push(low);
                f.upper.push(upper);
                f.diag.push(p);
            }
            for &i in &touched {
                work[i] = 0.0;
                mark[i] = false;
            }
            touched.clear();
        }
        if !failed.is_empty() {
            let rows = (0..m).filter(|&i| step_of_row[i] == usize::MAX).collect();
            return Err(Singular { positions: failed, rows });
        }
        Ok(f)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B z = b` in place; `b` is indexed by row, the result by basis position.
    pub fn ftran(&self, b: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let xr = b[self.row_of[k]];
            if xr != 0.0 {
                let low = &self.lower[k];
                for (&i, &l) in low.idx.iter().zip(&low.val) {
                    b[i] -= l * xr;
                }
            }
        }
        let mut w: Vec<f64> = self.row_of.iter().map(|&r| b[r]).collect();
        for k in (0..m).rev() {
            let t = w[k] / self.diag[k];
            w[k] = t;
            if t != 0.0 {
                let up = &self.upper[k];
                for (&s, &u) in up.idx.iter().zip(&up.val) {
                    w[s] -= u * t;
                }
            }
        }
        for k in 0..m {
            b[self.col_of[k]] = w[k];
        }
        for e in &self.etas {
            let zp = b[e.pos] / e.pivot;
            b[e.pos] = zp;
            if zp != 0.0 {
                for (&i, &a) in e.col.idx.iter().zip(&e.col.val) {
                    b[i] -= a * zp;
                }
            }
        }
    }

    /// Solves `Bᵀ y = c` in place; `c` is indexed by basis position, the result by row.
    pub fn btran(&self, c: &mut [f64]) {
        let m = self.m;
        for e in self.etas.iter().rev() {
            let s = e.col.dot_dense(c);
            c[e.pos] = (c[e.pos] - s) / e.pivot;
        }
        let mut v: Vec<f64> = self.col_of.iter().map(|&p| c[p]).collect();
        for k in 0..m {
            let up = &self.upper[k];
            let s: f64 = up.idx.iter().zip(&up.val).map(|(&s, &u)| u * v[s]).sum();
            v[k] = (v[k] - s) / self.diag[k];
        }
        for x in c.iter_mut() {
            *x = 0.0;
        }
        for k in (0..m).rev() {
            let low = &self.lower[k];
            let s = low.dot_dense(c);
            c[self.row_of[k]] = v[k] - s;
        }
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// transformed form (result of [`Factor::ftran`]) is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let mut col = SparseVec::default();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > 1e-14 {
                col.push(i, a);
            }
        }
        self.etas.push(Eta { pos, pivot: alpha[pos], col });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<SparseVec> {
        let m = a.len();
        (0..m)
            .map(|j| {
                let mut c = SparseVec::default();
                for (i, row) in a.iter().enumerate() {
                    if row[j] != 0.0 {
                        c.push(i, row[j]);
                    }
                }
                c
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn matvec_t(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m).map(|j| (0..m).map(|i| a[i][j] * y[i]).sum()).collect()
    }

    #[test]
    fn solves_small_system() {
        let a = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 4.0, 1.0],
            vec![0.0, 0.0, 1.0, -1.0],
        ];
        let cols = dense_to_cols(&a);
        let refs: Vec<&SparseVec> = cols.iter().collect();
        let f = Factor::new(4, &refs).unwrap();
        let z = vec![1.0, -2.0, 0.5, 3.0];
        let mut b = matvec(&a, &z);
        f.ftran(&mut b);
        for (p, q) in b.iter().zip(&z) {
            assert!((p - q).abs() < 1e-12);
        }
        let mut c = matvec_t(&a, &z);
        f.btran(&mut c);
        for (p, q) in c.iter().zip(&z) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactor() {
        let a = vec![
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        let cols = dense_to_cols(&a);
        let refs: Vec<&SparseVec> = cols.iter().collect();
        let mut f = Factor::new(3, &refs).unwrap();
        // replace column 1 by (3, 1, 0)
        let newcol = vec![3.0, 1.0, 0.0];
        let mut alpha = newcol.clone();
        f.ftran(&mut alpha);
        f.update(1, &alpha);
        let mut a2 = a.clone();
        for i in 0..3 {
            a2[i][1] = newcol[i];
        }
        let z = vec![0.3, -1.0, 2.0];
        let mut b = matvec(&a2, &z);
        f.ftran(&mut b);
        for (p, q) in b.iter().zip(&z) {
            assert!((p - q).abs() < 1e-12, "{b:?}");
        }
        let mut c = matvec_t(&a2, &z);
        f.btran(&mut c);
        for (p, q) in c.iter().zip(&z) {
            assert!((p - q).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn reports_singular_columns() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let cols = dense_to_cols(&a);
        let refs: Vec<&SparseVec> = cols.iter().collect();
        let err = Factor::new(2, &refs).err().expect("singular");
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
