use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;

use crate::netmodel::LineCode;

/// `1∠120°`.
pub fn alpha() -> Complex64 {
    Complex64::new(-0.5, 3f64.sqrt() / 2.0)
}

/// Fortescue matrix mapping `(zero, positive, negative)` to `(a, b, c)`.
pub fn fortescue() -> Matrix3<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let a = alpha();
    let a2 = a * a;
    Matrix3::new(one, one, one, one, a2, a, one, a, a2)
}

/// Inverse of [`fortescue`], `(a, b, c)` to `(zero, positive, negative)`.
pub fn fortescue_inverse() -> Matrix3<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let a = alpha();
    let a2 = a * a;
    Matrix3::new(one, one, one, one, a, a2, one, a2, a) / Complex64::new(3.0, 0.0)
}

/// Zero, positive and negative sequence phasors of three phase phasors,
/// with `b` lagging `a` and `c` lagging `b`.
pub fn sequence_components(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 3] {
    let al = alpha();
    let al2 = al * al;
    [(a + b + c) / 3.0, (a + al * b + al2 * c) / 3.0, (a + al2 * b + al * c) / 3.0]
}

/// Voltage unbalance factor `|U_n| / |U_p|`.
pub fn vuf(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let [_, p, n] = sequence_components(a, b, c);
    n.norm() / p.norm()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceImpedance {
    pub z_plus: Complex64,
    pub z_zero: Complex64,
    /// Largest off-diagonal magnitude of the sequence matrix; zero for
    /// transposed (symmetric) lines.
    pub coupling: f64,
}

/// Sequence impedance of a three-conductor matrix by similarity transform.
pub fn sequence_matrix(z: &DMatrix<Complex64>) -> Matrix3<Complex64> {
    let z3 = Matrix3::from_fn(|i, j| z[(i, j)]);
    fortescue_inverse() * z3 * fortescue()
}

pub fn sequence_impedance_of(z: &DMatrix<Complex64>) -> SequenceImpedance {
    let s = sequence_matrix(z);
    let mut coupling: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                coupling = coupling.max(s[(i, j)].norm());
            }
        }
    }
    SequenceImpedance { z_plus: s[(1, 1)], z_zero: s[(0, 0)], coupling }
}

/// Sequence impedance per km of a three-wire linecode.
pub fn sequence_impedance(code: &LineCode) -> SequenceImpedance {
    assert_eq!(code.n_conductors, 3, "sequence impedance needs a three-wire linecode");
    sequence_impedance_of(&code.z())
}

pub fn phasors(v: [Complex64; 3]) -> Vector3<Complex64> {
    Vector3::new(v[0], v[1], v[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inverse_is_inverse() {
        let p = fortescue() * fortescue_inverse();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - c(e, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn balanced_set_is_pure_positive() {
        let a = alpha();
        let u = c(230.0, 0.0);
        let [z, p, n] = sequence_components(u, u * a * a, u * a);
        assert!(z.norm() < 1e-12 && n.norm() < 1e-12);
        assert!((p - u).norm() < 1e-12);
    }

    #[test]
    fn uncoupled_diagonal() {
        let z = DMatrix::from_diagonal_element(3, 3, c(0.2, 0.1));
        let s = sequence_impedance_of(&z);
        assert!((s.z_plus - c(0.2, 0.1)).norm() < 1e-15);
        assert!((s.z_zero - c(0.2, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn symmetric_matrix_sequence_values() {
        let zs = c(0.3, 0.8);
        let zm = c(0.05, 0.3);
        let z = DMatrix::from_fn(3, 3, |i, j| if i == j { zs } else { zm });
        let s = sequence_impedance_of(&z);
        assert!((s.z_plus - (zs - zm)).norm() < 1e-14);
        assert!((s.z_zero - (zs + zm * 2.0)).norm() < 1e-14);
        assert!(s.coupling < 1e-14);
    }
}
