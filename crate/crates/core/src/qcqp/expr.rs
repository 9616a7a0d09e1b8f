//! Affine and quadratic expressions over variable indices, real and complex.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![], constant: c }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|(i, c)| (*i, c * s)).collect(), constant: self.constant * s }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }

    /// Product of two affine expressions.
    pub fn mul(&self, other: &LinExpr) -> QuadExpr {
        let mut q = QuadExpr::default();
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                q.quad.push((*i.min(j), *i.max(j), a * b));
            }
            q.lin.push((*i, a * other.constant));
        }
        for (j, b) in &other.terms {
            q.lin.push((*j, b * self.constant));
        }
        q.constant = self.constant * other.constant;
        q
    }

    pub fn square(&self) -> QuadExpr {
        self.mul(self)
    }
}

impl Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, o: &LinExpr) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&o.terms);
        LinExpr { terms, constant: self.constant + o.constant }
    }
}

impl Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, o: &LinExpr) -> LinExpr {
        self + &o.scale(-1.0)
    }
}

impl Neg for &LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scale(-1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadExpr {
    /// `(i, j, c)` with `i <= j`, meaning `c * x_i * x_j`.
    pub quad: Vec<(usize, usize, f64)>,
    pub lin: Vec<(usize, f64)>,
    pub constant: f64,
}

impl QuadExpr {
    pub fn scale(&self, s: f64) -> Self {
        Self {
            quad: self.quad.iter().map(|(i, j, c)| (*i, *j, c * s)).collect(),
            lin: self.lin.iter().map(|(i, c)| (*i, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    /// Sort and merge duplicate monomials, dropping exact zeros.
    pub fn normalize(mut self) -> Self {
        self.quad.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut quad: Vec<(usize, usize, f64)> = Vec::with_capacity(self.quad.len());
        for (i, j, c) in self.quad {
            match quad.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += c,
                _ => quad.push((i, j, c)),
            }
        }
        quad.retain(|t| t.2 != 0.0);
        self.lin.sort_by_key(|a| a.0);
        let mut lin: Vec<(usize, f64)> = Vec::with_capacity(self.lin.len());
        for (i, c) in self.lin {
            match lin.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => lin.push((i, c)),
            }
        }
        lin.retain(|t| t.1 != 0.0);
        Self { quad, lin, constant: self.constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self.lin.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
            + self.quad.iter().map(|(i, j, c)| c * x[*i] * x[*j]).sum::<f64>()
    }
}

impl From<LinExpr> for QuadExpr {
    fn from(l: LinExpr) -> Self {
        QuadExpr { quad: vec![], lin: l.terms, constant: l.constant }
    }
}

impl Add<&QuadExpr> for &QuadExpr {
    type Output = QuadExpr;
    fn add(self, o: &QuadExpr) -> QuadExpr {
        let mut r = self.clone();
        r.quad.extend_from_slice(&o.quad);
        r.lin.extend_from_slice(&o.lin);
        r.constant += o.constant;
        r
    }
}

impl Sub<&QuadExpr> for &QuadExpr {
    type Output = QuadExpr;
    fn sub(self, o: &QuadExpr) -> QuadExpr {
        self + &o.scale(-1.0)
    }
}

impl Add<&LinExpr> for &QuadExpr {
    type Output = QuadExpr;
    fn add(self, o: &LinExpr) -> QuadExpr {
        let mut r = self.clone();
        r.lin.extend_from_slice(&o.terms);
        r.constant += o.constant;
        r
    }
}

/// Complex affine expression: real and imaginary parts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CLin {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CLin {
    pub fn vars(re: usize, im: usize) -> Self {
        Self { re: LinExpr::var(re), im: LinExpr::var(im) }
    }

    pub fn constant(c: Complex64) -> Self {
        Self { re: LinExpr::constant(c.re), im: LinExpr::constant(c.im) }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Multiply by a complex constant.
    pub fn cscale(&self, c: Complex64) -> Self {
        Self {
            re: &self.re.scale(c.re) - &self.im.scale(c.im),
            im: &self.re.scale(c.im) + &self.im.scale(c.re),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { re: self.re.scale(s), im: self.im.scale(s) }
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.scale(-1.0) }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }

    /// Complex product `self * other`.
    pub fn mul(&self, other: &CLin) -> CQuad {
        CQuad {
            re: &self.re.mul(&other.re) - &self.im.mul(&other.im),
            im: &self.re.mul(&other.im) + &self.im.mul(&other.re),
        }
    }

    /// `self * conj(other)`.
    pub fn mul_conj(&self, other: &CLin) -> CQuad {
        self.mul(&other.conj())
    }

    /// `|self|^2`.
    pub fn abs_sqr(&self) -> QuadExpr {
        &self.re.square() + &self.im.square()
    }
}

impl Add<&CLin> for &CLin {
    type Output = CLin;
    fn add(self, o: &CLin) -> CLin {
        CLin { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub<&CLin> for &CLin {
    type Output = CLin;
    fn sub(self, o: &CLin) -> CLin {
        CLin { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Neg for &CLin {
    type Output = CLin;
    fn neg(self) -> CLin {
        self.scale(-1.0)
    }
}

impl Mul<Complex64> for &CLin {
    type Output = CLin;
    fn mul(self, c: Complex64) -> CLin {
        self.cscale(c)
    }
}

/// Complex quadratic expression.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CQuad {
    pub re: QuadExpr,
    pub im: QuadExpr,
}

impl CQuad {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { re: self.re.scale(s), im: self.im.scale(s) }
    }

    pub fn cscale(&self, c: Complex64) -> Self {
        Self {
            re: &self.re.scale(c.re) - &self.im.scale(c.im),
            im: &self.re.scale(c.im) + &self.im.scale(c.re),
        }
    }
}

impl From<CLin> for CQuad {
    fn from(l: CLin) -> Self {
        CQuad { re: l.re.into(), im: l.im.into() }
    }
}

impl Add<&CQuad> for &CQuad {
    type Output = CQuad;
    fn add(self, o: &CQuad) -> CQuad {
        CQuad { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub<&CQuad> for &CQuad {
    type Output = CQuad;
    fn sub(self, o: &CQuad) -> CQuad {
        CQuad { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl Add<&CLin> for &CQuad {
    type Output = CQuad;
    fn add(self, o: &CLin) -> CQuad {
        CQuad { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl Sub<&CLin> for &CQuad {
    type Output = CQuad;
    fn sub(self, o: &CLin) -> CQuad {
        CQuad { re: &self.re + &o.re.scale(-1.0), im: &self.im + &o.im.scale(-1.0) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_product_matches_arithmetic() {
        let x = [1.5, -0.5, 0.25, 2.0];
        let a = CLin::vars(0, 1);
        let b = &CLin::vars(2, 3) + &CLin::constant(Complex64::new(0.1, 0.2));
        let av = Complex64::new(1.5, -0.5);
        let bv = Complex64::new(0.35, 2.2);
        assert!((a.mul(&b).eval(&x) - av * bv).norm() < 1e-14);
        assert!((a.mul_conj(&b).eval(&x) - av * bv.conj()).norm() < 1e-14);
        assert!((a.abs_sqr().eval(&x) - av.norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn normalize_merges() {
        let q = QuadExpr { quad: vec![(1, 2, 1.0), (1, 2, -1.0), (0, 0, 2.0)], lin: vec![(3, 1.0), (3, 2.0)], constant: 0.0 }
            .normalize();
        assert_eq!(q.quad, vec![(0, 0, 2.0)]);
        assert_eq!(q.lin, vec![(3, 3.0)]);
    }
}
