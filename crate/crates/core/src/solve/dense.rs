//! Dense symmetric indefinite factorization with Bunch–Kaufman pivoting,
//! used for small KKT systems.

use nalgebra::DMatrix;

use super::ldl::Inertia;

/// `P A P' = L D L'` with `D` block diagonal (1x1 and 2x2 blocks).
#[derive(Clone, Debug)]
pub struct BunchKaufman {
    n: usize,
    /// `perm[k]` is the original index at position `k`.
    perm: Vec<usize>,
    l: DMatrix<f64>,
    /// Block sizes in order; 2x2 blocks are stored at `d[(k, k+1)]`.
    blocks: Vec<usize>,
    d: DMatrix<f64>,
    pub inertia: Inertia,
}

impl BunchKaufman {
    pub fn factor(a: &DMatrix<f64>, zero_tol: f64) -> Self {
        let n = a.nrows();
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let mut m = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut d = DMatrix::<f64>::zeros(n, n);
        let mut blocks = Vec::new();
        let mut inertia = Inertia::default();
        let swap = |m: &mut DMatrix<f64>, l: &mut DMatrix<f64>, perm: &mut Vec<usize>, p: usize, q: usize, k: usize| {
            if p == q {
                return;
            }
            m.swap_rows(p, q);
            m.swap_columns(p, q);
            perm.swap(p, q);
            for c in 0..k {
                let t = l[(p, c)];
                l[(p, c)] = l[(q, c)];
                l[(q, c)] = t;
            }
        };
        let mut k = 0;
        while k < n {
            let (mut r, mut colmax) = (k, 0.0);
            for i in k + 1..n {
                if m[(i, k)].abs() > colmax {
                    colmax = m[(i, k)].abs();
                    r = i;
                }
            }
            let akk = m[(k, k)].abs();
            let tiny = zero_tol * a[(perm[k], perm[k])].abs().max(1.0);
            let mut size = 1;
            if akk.max(colmax) <= tiny {
                d[(k, k)] = m[(k, k)];
                inertia.zero += 1;
                blocks.push(1);
                k += 1;
                continue;
            }
            if akk < alpha * colmax {
                let rowmax = (k..n).filter(|&j| j != r).map(|j| m[(r, j)].abs()).fold(0.0, f64::max);
                if akk * rowmax >= alpha * colmax * colmax {
                } else if m[(r, r)].abs() >= alpha * rowmax {
                    swap(&mut m, &mut l, &mut perm, k, r, k);
                } else {
                    size = 2;
                    swap(&mut m, &mut l, &mut perm, k + 1, r, k);
                }
            }
            if size == 1 {
                let tiny = zero_tol * a[(perm[k], perm[k])].abs().max(1.0);
                let dk = m[(k, k)];
                d[(k, k)] = dk;
                if dk.abs() <= tiny {
                    inertia.zero += 1;
                } else if dk > 0.0 {
                    inertia.positive += 1;
                } else {
                    inertia.negative += 1;
                }
                for i in k + 1..n {
                    l[(i, k)] = if dk.abs() > tiny { m[(i, k)] / dk } else { 0.0 };
                }
                for j in k + 1..n {
                    for i in k + 1..n {
                        m[(i, j)] -= l[(i, k)] * m[(j, k)];
                    }
                }
                blocks.push(1);
                k += 1;
            } else {
                let (e11, e21, e22) = (m[(k, k)], m[(k + 1, k)], m[(k + 1, k + 1)]);
                let det = e11 * e22 - e21 * e21;
                d[(k, k)] = e11;
                d[(k + 1, k)] = e21;
                d[(k, k + 1)] = e21;
                d[(k + 1, k + 1)] = e22;
                let tr = e11 + e22;
                if det < 0.0 {
                    inertia.positive += 1;
                    inertia.negative += 1;
                } else if tr > 0.0 {
                    inertia.positive += 2;
                } else {
                    inertia.negative += 2;
                }
                for i in k + 2..n {
                    let (a1, a2) = (m[(i, k)], m[(i, k + 1)]);
                    l[(i, k)] = (a1 * e22 - a2 * e21) / det;
                    l[(i, k + 1)] = (a2 * e11 - a1 * e21) / det;
                }
                for j in k + 2..n {
                    for i in k + 2..n {
                        m[(i, j)] -= l[(i, k)] * m[(j, k)] + l[(i, k + 1)] * m[(j, k + 1)];
                    }
                }
                blocks.push(2);
                k += 2;
            }
        }
        Self { n, perm, l, blocks, d, inertia }
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            for i in j + 1..n {
                x[i] -= self.l[(i, j)] * x[j];
            }
        }
        let mut k = 0;
        for &s in &self.blocks {
            if s == 1 {
                let dk = self.d[(k, k)];
                x[k] = if dk != 0.0 { x[k] / dk } else { 0.0 };
            } else {
                let (e11, e21, e22) = (self.d[(k, k)], self.d[(k + 1, k)], self.d[(k + 1, k + 1)]);
                let det = e11 * e22 - e21 * e21;
                let (b1, b2) = (x[k], x[k + 1]);
                x[k] = (e22 * b1 - e21 * b2) / det;
                x[k + 1] = (e11 * b2 - e21 * b1) / det;
            }
            k += s;
        }
        for j in (0..n).rev() {
            for i in j + 1..n {
                x[j] -= self.l[(i, j)] * x[i];
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_diagonal_needs_two_by_two_pivot() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 2.0, 0.0, 3.0, 1.0, 3.0, 1.0]);
        let f = BunchKaufman::factor(&a, 1e-14);
        let eig = a.clone().symmetric_eigen().eigenvalues;
        let pos = eig.iter().filter(|v| **v > 0.0).count();
        assert_eq!(f.inertia.positive, pos);
        assert_eq!(f.inertia.negative, 3 - pos);
        let mut b = vec![1.0, -1.0, 2.0];
        f.solve(&mut b);
        let r = &a * nalgebra::DVector::from_column_slice(&b) - nalgebra::DVector::from_column_slice(&[1.0, -1.0, 2.0]);
        assert!(r.amax() < 1e-12);
    }
}
