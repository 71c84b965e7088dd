//! Numerical passivity certificates.
//!
//! A state is strongly locally passive (SLP) for a party when no operation
//! on that party's qubit lowers the total energy:
//! `ΔE = Tr[H (𝓘⊗𝒢)(ρ)] − Tr[Hρ] ≥ 0`. Searches here cover single-qubit
//! unitaries (Z-Y-Z Euler angles) and, optionally, a two-element Kraus
//! family. They certify at grid resolution, not symbolically.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{QetError, Result};
use crate::model::{build_observables, derive_constants, ground_state_analytic, QetParams};
use crate::qstate::{check_targets, gates, Basis, DensityOperator, Matrix, PauliObservable, RngStream, C64};

/// `min ΔE` at or above this counts as passive.
pub const SLP_TOL: f64 = 1e-8;
const UNITARY_TOL: f64 = 1e-10;
const KRAUS_TOL: f64 = 1e-8;
const REFINE_STEP: f64 = 1e-4;
/// Seed of the Haar sample used by [`strong_passivity_check`].
pub const HAAR_SEED: u64 = 0x51_7A_55;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalOpKind {
    /// `R_z(α) R_y(β) R_z(γ)`.
    Unitary { alpha: f64, beta: f64, gamma: f64 },
    KrausPair {
        #[serde(serialize_with = "ser_matrix")]
        k0: Matrix,
        #[serde(serialize_with = "ser_matrix")]
        k1: Matrix,
    },
}

/// A single-qubit operation on qubit `target`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalOpSpec {
    #[serde(flatten)]
    pub kind: LocalOpKind,
    pub target: usize,
}

fn ser_matrix<S: Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    rows.serialize(s)
}

impl LocalOpSpec {
    pub fn identity(target: usize) -> Self {
        Self::unitary(0.0, 0.0, 0.0, target)
    }

    pub fn unitary(alpha: f64, beta: f64, gamma: f64, target: usize) -> Self {
        Self {
            kind: LocalOpKind::Unitary { alpha, beta, gamma },
            target,
        }
    }

    pub fn kraus_pair(k0: Matrix, k1: Matrix, target: usize) -> Self {
        Self {
            kind: LocalOpKind::KrausPair { k0, k1 },
            target,
        }
    }

    /// Kraus pair from seven angles, complete by construction:
    /// `K0 = diag(cos a, cos b)·V`, `K1 = W·diag(sin a, sin b)·V` with
    /// `V = R_z R_y R_z` (angles 2..5) and `W = R_z R_y` (angles 5..7).
    pub fn kraus_from_angles(x: &[f64; 7], target: usize) -> Self {
        let v = gates::euler_zyz(x[2], x[3], x[4]);
        let w = &gates::rz(x[5]) * &gates::ry(x[6]);
        let diag = |f: fn(f64) -> f64| {
            Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                C64::new(f(x[0]), 0.0),
                C64::new(f(x[1]), 0.0),
            ]))
        };
        let k0 = &diag(f64::cos) * &v;
        let k1 = &w * &diag(f64::sin) * &v;
        Self::kraus_pair(k0, k1, target)
    }

    /// Kraus operators, validated.
    pub fn kraus_ops(&self) -> Result<Vec<Matrix>> {
        match &self.kind {
            LocalOpKind::Unitary { alpha, beta, gamma } => {
                let u = gates::euler_zyz(*alpha, *beta, *gamma);
                let defect = gates::unitarity_defect(&u);
                if defect > UNITARY_TOL {
                    return Err(QetError::Validity(format!(
                        "operation is not unitary (defect {defect:.3e})"
                    )));
                }
                Ok(vec![u])
            }
            LocalOpKind::KrausPair { k0, k1 } => {
                for k in [k0, k1] {
                    if k.shape() != (2, 2) {
                        return Err(QetError::Validity(format!(
                            "Kraus operator has shape {:?}, expected (2, 2)",
                            k.shape()
                        )));
                    }
                }
                let completeness = k0.adjoint() * k0 + k1.adjoint() * k1;
                let defect = (completeness - gates::identity(2))
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                if defect > KRAUS_TOL {
                    return Err(QetError::Validity(format!(
                        "Kraus pair is not trace preserving (defect {defect:.3e})"
                    )));
                }
                Ok(vec![k0.clone(), k1.clone()])
            }
        }
    }

    /// Rotation angle of the unitary kind (global phase ignored).
    pub fn rotation_angle(&self) -> Option<f64> {
        match self.kind {
            LocalOpKind::Unitary { alpha, beta, gamma } => {
                Some(gates::rotation_angle(&gates::euler_zyz(alpha, beta, gamma)))
            }
            LocalOpKind::KrausPair { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Grid,
    GridRefine,
    RandomRefine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassivityReport {
    pub min_delta_e: f64,
    pub argmin: LocalOpSpec,
    pub evaluations: u64,
    pub method: SearchMethod,
}

impl PassivityReport {
    pub fn certifies_slp(&self) -> bool {
        self.min_delta_e >= -SLP_TOL
    }
}

fn energy_after(rho: &DensityOperator, kraus: &[Matrix], h: &PauliObservable, target: usize) -> Result<f64> {
    let mut out = rho.clone();
    out.apply_kraus_unchecked(kraus, &[target]);
    out.expectation(h)
}

/// Energy change of `h` when `op` acts on its target qubit.
pub fn delta_e_local(rho: &DensityOperator, op: &LocalOpSpec, h: &PauliObservable) -> Result<f64> {
    check_targets(rho.n_qubits(), &[op.target])?;
    let kraus = op.kraus_ops()?;
    Ok(energy_after(rho, &kraus, h, op.target)? - rho.expectation(h)?)
}

/// Energy change when Alice measures `alice` in the X basis and the
/// operation applied depends on her outcome (`plus` on `+`, `minus` on `−`).
pub fn delta_e_conditional(
    rho: &DensityOperator,
    alice: usize,
    plus: &LocalOpSpec,
    minus: &LocalOpSpec,
    h: &PauliObservable,
) -> Result<f64> {
    let mut after = 0.0;
    for (outcome, op) in [(false, plus), (true, minus)] {
        check_targets(rho.n_qubits(), &[op.target])?;
        let (p, post) = rho.project(alice, Basis::X, outcome)?;
        if let Some(post) = post {
            after += p * energy_after(&post, &op.kraus_ops()?, h, op.target)?;
        }
    }
    Ok(after - rho.expectation(h)?)
}

/// Coordinate descent from `x` with initial step `step`; halves the step
/// whenever no single-coordinate move improves, until it drops below
/// `REFINE_STEP` or `max_iters` sweeps have run.
fn coordinate_refine<const N: usize>(
    f: impl Fn(&[f64; N]) -> Result<f64>,
    mut x: [f64; N],
    mut fx: f64,
    mut step: f64,
    max_iters: usize,
) -> Result<([f64; N], f64, u64)> {
    let mut evals = 0;
    for _ in 0..max_iters {
        if step < REFINE_STEP {
            break;
        }
        let mut improved = false;
        for i in 0..N {
            for dir in [-1.0, 1.0] {
                let mut y = x;
                y[i] += dir * step;
                let fy = f(&y)?;
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok((x, fx, evals))
}

/// Minimum of `ΔE` over single-qubit unitaries on `target`: a uniform
/// `grid_n³` grid over `[0, 2π)³` followed by coordinate refinement.
pub fn slp_min_unitary(
    rho: &DensityOperator,
    h: &PauliObservable,
    target: usize,
    grid_n: usize,
    refine_iters: usize,
) -> Result<PassivityReport> {
    if grid_n < 8 {
        return Err(QetError::Argument(format!("grid_n = {grid_n} below 8")));
    }
    check_targets(rho.n_qubits(), &[target])?;
    let e0 = rho.expectation(h)?;
    let f = |x: &[f64; 3]| -> Result<f64> {
        let u = gates::euler_zyz(x[0], x[1], x[2]);
        Ok(energy_after(rho, &[u], h, target)? - e0)
    };
    let step = TAU / grid_n as f64;
    let point = |idx: usize| {
        let (i, j, k) = (idx / (grid_n * grid_n), (idx / grid_n) % grid_n, idx % grid_n);
        [i as f64 * step, j as f64 * step, k as f64 * step]
    };
    let n_points = grid_n.pow(3);
    let (best_val, best_idx) = (0..n_points)
        .into_par_iter()
        .map(|idx| f(&point(idx)).map(|v| (v, idx)))
        .try_reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    let mut evaluations = n_points as u64;
    let (x, fx, method) = if refine_iters > 0 {
        let (x, fx, evals) = coordinate_refine(f, point(best_idx), best_val, step / 2.0, refine_iters)?;
        evaluations += evals;
        (x, fx, SearchMethod::GridRefine)
    } else {
        (point(best_idx), best_val, SearchMethod::Grid)
    };
    Ok(PassivityReport {
        min_delta_e: fx,
        argmin: LocalOpSpec::unitary(x[0], x[1], x[2], target),
        evaluations,
        method,
    })
}

/// Minimum of `ΔE` over the seven-angle Kraus family, from `starts` seeded
/// random starting points each refined by coordinate descent.
pub fn slp_min_kraus(
    rho: &DensityOperator,
    h: &PauliObservable,
    target: usize,
    starts: usize,
    refine_iters: usize,
    seed: u64,
) -> Result<PassivityReport> {
    use rand::Rng;

    if starts == 0 {
        return Err(QetError::Argument("at least one start is required".into()));
    }
    check_targets(rho.n_qubits(), &[target])?;
    let e0 = rho.expectation(h)?;
    let f = |x: &[f64; 7]| -> Result<f64> {
        let op = LocalOpSpec::kraus_from_angles(x, target);
        Ok(energy_after(rho, &op.kraus_ops()?, h, target)? - e0)
    };
    let mut rng = RngStream::new(seed);
    let mut starts_x: Vec<[f64; 7]> = vec![[0.0; 7]];
    starts_x.extend((1..starts).map(|_| std::array::from_fn(|_| rng.random::<f64>() * TAU)));
    let results = starts_x
        .into_par_iter()
        .map(|x0| {
            let f0 = f(&x0)?;
            coordinate_refine(f, x0, f0, TAU / 16.0, refine_iters)
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluations = results.iter().map(|r| r.2 + 1).sum();
    let (x, fx, _) = results
        .into_iter()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .expect("at least one start");
    Ok(PassivityReport {
        min_delta_e: fx,
        argmin: LocalOpSpec::kraus_from_angles(&x, target),
        evaluations,
        method: SearchMethod::RandomRefine,
    })
}

/// Unitary that maps the eigenvectors of `rho` (by decreasing population)
/// onto those of `h` (by increasing energy): the most energy-lowering
/// unitary for `rho`.
pub fn passive_ordering_unitary(rho: &DensityOperator, h: &PauliObservable) -> Matrix {
    let sorted = |m: Matrix, descending: bool| {
        let eig = m.symmetric_eigen();
        let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| {
            let o = eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]);
            if descending {
                o.reverse()
            } else {
                o
            }
        });
        (idx, eig.eigenvectors)
    };
    let (ri, rv) = sorted(rho.matrix().clone(), true);
    let (hi, hv) = sorted(h.to_matrix(), false);
    let dim = rv.nrows();
    let mut u = Matrix::zeros(dim, dim);
    for (r, e) in ri.into_iter().zip(hi) {
        u += hv.column(e) * rv.column(r).adjoint();
    }
    u
}

/// True when no sampled global unitary lowers the energy of `rho` by more
/// than `1e-10`. The sample is `samples` Haar unitaries plus the
/// passive-ordering unitary.
pub fn strong_passivity_check_state(
    rho: &DensityOperator,
    h: &PauliObservable,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    let n = rho.n_qubits();
    if n > 3 {
        return Err(QetError::Size(format!("{n} qubits; at most 3 supported")));
    }
    let targets: Vec<usize> = (0..n).collect();
    let e0 = rho.expectation(h)?;
    let lowers = |u: &Matrix| -> Result<bool> {
        let mut out = rho.clone();
        out.apply_gate(u, &targets)?;
        Ok(out.expectation(h)? - e0 < -1e-10)
    };
    if lowers(&passive_ordering_unitary(rho, h))? {
        return Ok(false);
    }
    let mut rng = RngStream::new(seed);
    let dim = 1usize << n;
    for _ in 0..samples {
        if lowers(&gates::haar_unitary(dim, &mut rng))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Strong passivity of the model's ground state under 1000 Haar-random
/// global unitaries.
pub fn strong_passivity_check(params: &QetParams) -> Result<bool> {
    let consts = derive_constants(params)?;
    let h = build_observables(&consts).h_total;
    let rho = ground_state_analytic(&consts).to_density();
    strong_passivity_check_state(&rho, &h, 1000, HAAR_SEED)
}
