//! Sparse LDLᵀ for symmetric quasi-definite systems, with a fill-reducing
//! AMD ordering and inertia read off the pivots.

use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

const NONE: usize = usize::MAX;

/// Symbolic analysis and numeric factor of a symmetric matrix given as a
/// list of entries from either triangle; duplicate entries are summed.
#[derive(Clone, Debug)]
pub struct SparseLdl {
    n: usize,
    perm: Vec<usize>,
    /// Upper CSC pattern of the permuted matrix.
    ap: Vec<usize>,
    ai: Vec<usize>,
    /// Position in the permuted values of each input entry.
    slot: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl SparseLdl {
    /// Analyze the pattern. Diagonal entries are added if missing.
    pub fn analyze(n: usize, entries: &[(usize, usize)]) -> Self {
        // Full symmetric pattern for the ordering.
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in entries {
            cols[j].push(i);
            cols[i].push(j);
        }
        for (j, c) in cols.iter_mut().enumerate() {
            c.push(j);
            c.sort_unstable();
            c.dedup();
        }
        let mut a_p = vec![0usize; n + 1];
        let mut a_i = Vec::new();
        for (j, c) in cols.iter().enumerate() {
            a_i.extend_from_slice(c);
            a_p[j + 1] = a_i.len();
        }
        let perm = if n > 0 {
            match amd::order(n, &a_p, &a_i, &amd::Control::default()) {
                Ok((p, _, _)) => p,
                Err(_) => (0..n).collect(),
            }
        } else {
            Vec::new()
        };
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        // Upper pattern of P A P', including the diagonal.
        let mut upper: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for k in 0..n {
            upper.insert((k, k), 0);
        }
        let mut keys = Vec::with_capacity(entries.len());
        for &(i, j) in entries {
            let (a, b) = (pinv[i], pinv[j]);
            let key = (a.max(b), a.min(b));
            upper.insert(key, 0);
            keys.push(key);
        }
        let mut ap = vec![0usize; n + 1];
        let mut ai = Vec::with_capacity(upper.len());
        for (pos, ((col, row), slot)) in upper.iter_mut().enumerate() {
            *slot = pos;
            ai.push(*row);
            ap[*col + 1] += 1;
        }
        for j in 0..n {
            ap[j + 1] += ap[j];
        }
        let slot = keys.iter().map(|k| upper[k]).collect();
        let (etree, lnz) = etree(n, &ap, &ai);
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz = lp[n];
        Self { n, perm, ap, ai, slot, etree, lp, li: vec![0; nnz], lx: vec![0.0; nnz], d: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization with values aligned to the analyzed entries.
    /// Pivots with magnitude at most `zero_tol` times the larger of one and
    /// their original diagonal entry count as zero; the factorization then
    /// stops.
    pub fn factor(&mut self, values: &[f64], zero_tol: f64) -> Inertia {
        let n = self.n;
        let mut ax = vec![0.0; self.ai.len()];
        for (v, &s) in values.iter().zip(&self.slot) {
            ax[s] += v;
        }
        let mut inertia = Inertia::default();
        let mut y_vals = vec![0.0; n];
        let mut y_used = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        let mut dinv = vec![0.0; n];
        for k in 0..n {
            let mut nnz_y = 0;
            let mut tiny = zero_tol;
            self.d[k] = 0.0;
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    self.d[k] = ax[p];
                    tiny = zero_tol * ax[p].abs().max(1.0);
                    continue;
                }
                y_vals[b] = ax[p];
                if !y_used[b] {
                    y_used[b] = true;
                    elim[0] = b;
                    let mut ne = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if y_used[next] {
                            break;
                        }
                        y_used[next] = true;
                        elim[ne] = next;
                        ne += 1;
                        next = self.etree[next];
                    }
                    while ne > 0 {
                        ne -= 1;
                        y_idx[nnz_y] = elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let end = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..end {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[end] = k;
                self.lx[end] = yc * dinv[c];
                self.d[k] -= yc * self.lx[end];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_used[c] = false;
            }
            let dk = self.d[k];
            if !dk.is_finite() || dk.abs() <= tiny {
                inertia.zero += n - k;
                return inertia;
            }
            if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            dinv[k] = 1.0 / dk;
        }
        inertia
    }

    /// Solve `A x = b` in place with the last factorization.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

fn etree(n: usize, ap: &[usize], ai: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut work = vec![NONE; n];
    let mut lnz = vec![0; n];
    let mut tree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for &row in &ai[ap[j]..ap[j + 1]] {
            let mut i = row;
            while work[i] != j {
                if tree[i] == NONE {
                    tree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = tree[i];
            }
        }
    }
    (tree, lnz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn entries(a: &DMatrix<f64>) -> (Vec<(usize, usize)>, Vec<f64>) {
        let mut e = Vec::new();
        let mut v = Vec::new();
        for j in 0..a.ncols() {
            for i in j..a.nrows() {
                if a[(i, j)] != 0.0 {
                    e.push((i, j));
                    v.push(a[(i, j)]);
                }
            }
        }
        (e, v)
    }

    #[test]
    fn solves_quasi_definite_system() {
        // [[4 1 1], [1 3 0], [1 0 -2]]
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 1.0, 1.0, 3.0, 0.0, 1.0, 0.0, -2.0]);
        let (e, v) = entries(&a);
        let mut ldl = SparseLdl::analyze(3, &e);
        let inertia = ldl.factor(&v, 1e-14);
        assert_eq!(inertia, Inertia { positive: 2, negative: 1, zero: 0 });
        let mut b = vec![1.0, 2.0, 3.0];
        ldl.solve(&mut b);
        let r = &a * DMatrix::from_column_slice(3, 1, &b) - DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn reports_singular_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (e, v) = entries(&a);
        let mut ldl = SparseLdl::analyze(2, &e);
        assert_eq!(ldl.factor(&v, 1e-14).zero, 1);
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let mut ldl = SparseLdl::analyze(1, &[(0, 0), (0, 0)]);
        ldl.factor(&[1.5, 0.5], 1e-14);
        let mut b = vec![4.0];
        ldl.solve(&mut b);
        assert_eq!(b[0], 2.0);
    }
}
