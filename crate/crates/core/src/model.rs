//! The three-qubit model: Hamiltonian blocks, derived constants, analytic
//! states and the ideal energy ledger.
//!
//! Qubits are ordered A (Alice), B (Bob's interacting qubit), C (Bob's
//! storage qubit). Energies are in the same units as `h_A`.
//!
//! ```text
//! H_A = −h_A Z_A + f_A        H_B = −h_B Z_B + f_B
//! H_V = 2κ X_A X_B + f_V      H_C = −h_C Z_C + h_C
//! ```
//!
//! The offsets `f_A, f_B, f_V` make all three two-qubit terms vanish on the
//! ground state; `h_C = √(h_B² + 4κ²)` matches the storage qubit's gap to the
//! gap of Bob's effective Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::error::{QetError, Result};
use crate::qstate::{DensityOperator, PauliObservable, PureState, C64};
use crate::report::{RunReport, StepReport};

/// Smallest coupling accepted before the model degenerates.
pub const MIN_KAPPA: f64 = 1e-12;
/// Smallest Bob field accepted.
pub const MIN_H_B: f64 = 1e-15;

const SELF_CHECK_TOL: f64 = 1e-10;

/// Hamiltonian inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QetParams {
    #[serde(rename = "h_A", default = "default_h_a")]
    pub h_a: f64,
    #[serde(rename = "h_B")]
    pub h_b: f64,
    pub kappa: f64,
}

fn default_h_a() -> f64 {
    1.0
}

impl QetParams {
    pub fn new(h_a: f64, h_b: f64, kappa: f64) -> Result<Self> {
        let p = Self { h_a, h_b, kappa };
        p.validate()?;
        Ok(p)
    }

    /// `h_A = 1, h_B = 0.01, κ = 0.393`, the values run on hardware.
    pub fn paper() -> Self {
        Self {
            h_a: 1.0,
            h_b: 0.01,
            kappa: 0.393,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h_A", self.h_a), ("h_B", self.h_b), ("kappa", self.kappa)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(QetError::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.kappa < MIN_KAPPA {
            return Err(QetError::Domain(format!(
                "kappa {} below degenerate threshold {MIN_KAPPA}",
                self.kappa
            )));
        }
        if self.h_b < MIN_H_B {
            return Err(QetError::Domain(format!(
                "h_B {} below degenerate threshold {MIN_H_B}",
                self.h_b
            )));
        }
        Ok(())
    }

    /// Multiplies every energy scale by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            h_a: self.h_a * c,
            h_b: self.h_b * c,
            kappa: self.kappa * c,
        }
    }
}

/// Every quantity the protocol needs, derived from [`QetParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub params: QetParams,
    #[serde(rename = "x_A")]
    pub x_a: f64,
    #[serde(rename = "x_B")]
    pub x_b: f64,
    /// `x_A + x_B`.
    pub s: f64,
    pub theta: f64,
    pub phi: f64,
    pub delta: f64,
    #[serde(rename = "f_A")]
    pub f_a: f64,
    #[serde(rename = "f_B")]
    pub f_b: f64,
    #[serde(rename = "f_V")]
    pub f_v: f64,
    #[serde(rename = "h_C")]
    pub h_c: f64,
}

/// `√(x² + 1) − x`, written to avoid cancellation for large `x`.
fn tan_half_angle(x: f64) -> f64 {
    1.0 / (x.hypot(1.0) + x)
}

pub fn derive_constants(params: &QetParams) -> Result<DerivedConstants> {
    params.validate()?;
    let QetParams { h_a, h_b, kappa } = *params;
    let x_a = h_a / (2.0 * kappa);
    let x_b = h_b / (2.0 * kappa);
    let s = x_a + x_b;
    let theta = tan_half_angle(s).atan();
    let phi = tan_half_angle(x_b).atan();
    let (sin2t, cos2t) = (2.0 * theta).sin_cos();
    let consts = DerivedConstants {
        params: *params,
        x_a,
        x_b,
        s,
        theta,
        phi,
        delta: phi - theta,
        f_a: h_a * cos2t,
        f_b: h_b * cos2t,
        f_v: 2.0 * kappa * sin2t,
        h_c: h_b.hypot(2.0 * kappa),
    };

    let obs = build_observables(&consts);
    let g = ground_state_analytic(&consts);
    for (name, h) in [("H_A", &obs.h_a), ("H_B", &obs.h_b), ("H_V", &obs.h_v)] {
        let e = g.expectation(h)?;
        if e.abs() > SELF_CHECK_TOL {
            return Err(QetError::Domain(format!(
                "<g|{name}|g> = {e:.3e} does not vanish for {params:?}"
            )));
        }
    }
    Ok(consts)
}

impl DerivedConstants {
    /// Energy moved from B to C by the conditional pulse, `2 sin²δ · h_C`.
    pub fn transfer_energy(&self) -> f64 {
        2.0 * self.delta.sin().powi(2) * self.h_c
    }
}

/// Hamiltonian blocks as Pauli observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelObservables {
    pub h_a: PauliObservable,
    pub h_b: PauliObservable,
    pub h_v: PauliObservable,
    pub h_c: PauliObservable,
    /// `H_V + H_B`, Bob's share of the two-qubit energy.
    pub h_vb: PauliObservable,
    pub h_total: PauliObservable,
    /// `H_A + H_B + H_V` on the two-qubit register (A, B).
    pub h_ab_pair: PauliObservable,
    /// `H_V + H_B` on the two-qubit register (A, B).
    pub h_vb_pair: PauliObservable,
    /// Bob's single-qubit Hamiltonian once Alice reports `+` (resp. `−`).
    pub h_eff_plus: PauliObservable,
    pub h_eff_minus: PauliObservable,
}

fn obs(n: usize, terms: &[(f64, &str)]) -> PauliObservable {
    let mut o = PauliObservable::new(n);
    for (c, label) in terms {
        o.push_term(*c, label).expect("static Pauli label");
    }
    o
}

pub fn build_observables(consts: &DerivedConstants) -> ModelObservables {
    let QetParams { h_a, h_b, kappa } = consts.params;
    let DerivedConstants { f_a, f_b, f_v, h_c, .. } = *consts;

    let ha = obs(3, &[(-h_a, "ZII"), (f_a, "III")]);
    let hb = obs(3, &[(-h_b, "IZI"), (f_b, "III")]);
    let hv = obs(3, &[(2.0 * kappa, "XXI"), (f_v, "III")]);
    let hc = obs(3, &[(-h_c, "IIZ"), (h_c, "III")]);
    let h_vb = hv.clone() + hb.clone();
    let h_total = ha.clone() + hb.clone() + hv.clone() + hc.clone();

    let pair_a = obs(2, &[(-h_a, "ZI"), (f_a, "II")]);
    let h_vb_pair = obs(
        2,
        &[(-h_b, "IZ"), (f_b, "II"), (2.0 * kappa, "XX"), (f_v, "II")],
    );
    let h_ab_pair = pair_a + h_vb_pair.clone();

    let eff = |sign: f64| obs(1, &[(sign * 2.0 * kappa, "X"), (-h_b, "Z"), (f_v + f_b, "I")]);

    ModelObservables {
        h_a: ha,
        h_b: hb,
        h_v: hv,
        h_c: hc,
        h_vb,
        h_total,
        h_ab_pair,
        h_vb_pair,
        h_eff_plus: eff(1.0),
        h_eff_minus: eff(-1.0),
    }
}

/// Single-qubit states attached to Alice's two outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedBasis {
    /// Excited dressed state of `H_eff^(+)`, `sin φ|0⟩ + cos φ|1⟩`.
    pub e_plus: PureState,
    /// Ground dressed state of `H_eff^(+)`, `cos φ|0⟩ − sin φ|1⟩`.
    pub g_plus: PureState,
    pub e_minus: PureState,
    pub g_minus: PureState,
    /// Bob's conditional state, `cos θ|0⟩ ∓ sin θ|1⟩`.
    pub b_plus: PureState,
    pub b_minus: PureState,
    /// Storage-qubit target, `∓ sin δ|0⟩ + cos δ|1⟩`.
    pub c_plus: PureState,
    pub c_minus: PureState,
}

fn qubit(a0: f64, a1: f64) -> PureState {
    PureState::from_amplitudes(vec![C64::new(a0, 0.0), C64::new(a1, 0.0)])
        .expect("unit vector from sin/cos")
}

pub fn dressed_basis(consts: &DerivedConstants) -> DressedBasis {
    let (sp, cp) = consts.phi.sin_cos();
    let (st, ct) = consts.theta.sin_cos();
    let (sd, cd) = consts.delta.sin_cos();
    DressedBasis {
        e_plus: qubit(sp, cp),
        g_plus: qubit(cp, -sp),
        e_minus: qubit(-sp, cp),
        g_minus: qubit(cp, sp),
        b_plus: qubit(ct, -st),
        b_minus: qubit(ct, st),
        c_plus: qubit(-sd, cd),
        c_minus: qubit(sd, cd),
    }
}

/// `cos θ|000⟩ − sin θ|110⟩`, the ground state of `H_total`.
pub fn ground_state_analytic(consts: &DerivedConstants) -> PureState {
    let (st, ct) = consts.theta.sin_cos();
    let mut amps = vec![C64::new(0.0, 0.0); 8];
    amps[0b000] = C64::new(ct, 0.0);
    amps[0b110] = C64::new(-st, 0.0);
    PureState::from_amplitudes(amps).expect("unit vector from sin/cos")
}

/// Alice's post-measurement state on (A, B):
/// `½(|+⟩⟨+| ⊗ |b⁺⟩⟨b⁺| + |−⟩⟨−| ⊗ |b⁻⟩⟨b⁻|)`.
pub fn quasi_vacuum(consts: &DerivedConstants) -> DensityOperator {
    let d = dressed_basis(consts);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = qubit(s, s);
    let minus = qubit(s, -s);
    DensityOperator::mixture(&[
        (0.5, plus.tensor(&d.b_plus).expect("2 qubits")),
        (0.5, minus.tensor(&d.b_minus).expect("2 qubits")),
    ])
    .expect("valid mixture")
}

/// Lowest eigenpair of an observable by dense Hermitian diagonalization.
pub fn lowest_eigenpair(h: &PauliObservable) -> Result<(f64, PureState)> {
    let eig = h.to_matrix().symmetric_eigen();
    let (idx, energy) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| QetError::Size("empty observable".into()))?;
    let v: Vec<C64> = eig.eigenvectors.column(idx).iter().copied().collect();
    Ok((energy, PureState::normalized(v)?))
}

/// Brute-force ground state of the full three-qubit Hamiltonian.
pub fn brute_force_ground(params: &QetParams) -> Result<(f64, PureState)> {
    let consts = derive_constants(params)?;
    lowest_eigenpair(&build_observables(&consts).h_total)
}

/// Ideal energies of `(H_A, H_V + H_B, H_C)` after each step.
pub fn theory_ledger(consts: &DerivedConstants) -> RunReport {
    let DerivedConstants { f_a, f_b, f_v, h_c, delta, .. } = *consts;
    RunReport::from_steps([
        StepReport::exact(0.0, 0.0, 0.0),
        StepReport::exact(f_a, 0.0, 2.0 * h_c * delta.cos().powi(2)),
        StepReport::exact(f_a, f_v + f_b - h_c, 2.0 * h_c),
    ])
}
