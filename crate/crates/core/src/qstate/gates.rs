//! Gate matrices and unitary helpers.
//!
//! Rotations follow `R(α) = exp(−i α σ / 2)`, so `ry(π)` maps `|0⟩` to `|1⟩`.
//! Two-qubit matrices act on `(first, second)` with `first` as the more
//! significant bit.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::{Matrix, RngStream, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn m2(a: C64, b: C64, cc: C64, d: C64) -> Matrix {
    DMatrix::from_row_slice(2, 2, &[a, b, cc, d])
}

pub fn identity(dim: usize) -> Matrix {
    Matrix::identity(dim, dim)
}

pub fn pauli_x() -> Matrix {
    m2(c(0.0), c(1.0), c(1.0), c(0.0))
}

pub fn pauli_y() -> Matrix {
    m2(c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0))
}

pub fn pauli_z() -> Matrix {
    m2(c(1.0), c(0.0), c(0.0), c(-1.0))
}

pub fn hadamard() -> Matrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    m2(c(s), c(s), c(s), c(-s))
}

pub fn ry(angle: f64) -> Matrix {
    let (s, co) = (angle / 2.0).sin_cos();
    m2(c(co), c(-s), c(s), c(co))
}

pub fn rz(angle: f64) -> Matrix {
    let half = angle / 2.0;
    m2(
        C64::from_polar(1.0, -half),
        c(0.0),
        c(0.0),
        C64::from_polar(1.0, half),
    )
}

/// `Rz(α)·Ry(β)·Rz(γ)`; covers SU(2) as the angles range over `[0, 2π)`.
pub fn euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Matrix {
    rz(alpha) * ry(beta) * rz(gamma)
}

pub fn cnot() -> Matrix {
    controlled(&pauli_x(), true)
}

/// Two-qubit gate applying `u` to the second qubit when the first qubit
/// equals `control_value`.
pub fn controlled(u: &Matrix, control_value: bool) -> Matrix {
    let mut out = identity(4);
    let off = if control_value { 2 } else { 0 };
    for r in 0..2 {
        for col in 0..2 {
            out[(off + r, off + col)] = u[(r, col)];
        }
    }
    out
}

/// Projector onto the eigenstate of `basis` labelled by `outcome`
/// (`false` = `|0⟩` / `|+⟩`).
pub fn projector(basis: super::Basis, outcome: bool) -> Matrix {
    match (basis, outcome) {
        (super::Basis::Z, false) => m2(c(1.0), c(0.0), c(0.0), c(0.0)),
        (super::Basis::Z, true) => m2(c(0.0), c(0.0), c(0.0), c(1.0)),
        (super::Basis::X, false) => m2(c(0.5), c(0.5), c(0.5), c(0.5)),
        (super::Basis::X, true) => m2(c(0.5), c(-0.5), c(-0.5), c(0.5)),
    }
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Largest entrywise deviation of `u†u` from the identity.
pub fn unitarity_defect(u: &Matrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    let id = identity(u.nrows());
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_unitary(u: &Matrix, tol: f64) -> bool {
    unitarity_defect(u) <= tol
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phases of `R`'s diagonal folded back into `Q`.
pub fn haar_unitary(dim: usize, rng: &mut RngStream) -> Matrix {
    let g = Matrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Rotation angle of a single-qubit unitary, ignoring global phase:
/// `2·acos(|tr U| / 2)`. Zero exactly for multiples of the identity.
pub fn rotation_angle(u: &Matrix) -> f64 {
    let t = (u.trace().norm() / 2.0).min(1.0);
    2.0 * t.acos()
}
