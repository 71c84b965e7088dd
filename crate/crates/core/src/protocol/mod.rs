//! The three-step protocol as circuits, and their execution.
//!
//! 1. Prepare the ground state: `R_y(−2θ)` on A, then `CNOT(A→B)`.
//! 2. Alice measures A in the X basis; Bob rotates C by `R_y(π ± 2δ)`
//!    depending on the outcome.
//! 3. Bob rotates both B and C by `R_y(∓2δ)`, moving `2 sin²δ·h_C` from B
//!    into C.
//!
//! The dynamic variant keeps the mid-circuit measurement and classically
//! conditioned gates. The deferred variant replaces them with gates
//! controlled on A and reads A out at the end.

mod exec;
mod qasm;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QetError, Result};
use crate::model::{build_observables, ground_state_analytic, DerivedConstants};
use crate::noise::NoiseSpec;
use crate::qstate::{gates, Basis, DensityOperator, Matrix, PureState};

pub use crate::report::{RunReport, StepReport};
pub use exec::{alice_outcome_counts, execute, noisy_expectations};
pub use qasm::export_qasm;

pub const QUBIT_A: usize = 0;
pub const QUBIT_B: usize = 1;
pub const QUBIT_C: usize = 2;
pub const N_QUBITS: usize = 3;
/// Classical bit holding Alice's outcome (`0 ⇔ +`).
pub const ALICE_BIT: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dynamic,
    Deferred,
}

impl FromStr for Variant {
    type Err = QetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(Variant::Dynamic),
            "deferred" => Ok(Variant::Deferred),
            other => Err(QetError::Argument(format!("unknown variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Dynamic => "dynamic",
            Variant::Deferred => "deferred",
        })
    }
}

/// Gates used by the protocol circuits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlanGate {
    H,
    Ry(f64),
    Cx,
    /// `R_y(angle)` on the second target when the first equals `control_value`.
    ControlledRy { angle: f64, control_value: bool },
}

impl PlanGate {
    pub fn matrix(&self) -> Matrix {
        match *self {
            PlanGate::H => gates::hadamard(),
            PlanGate::Ry(a) => gates::ry(a),
            PlanGate::Cx => gates::cnot(),
            PlanGate::ControlledRy {
                angle,
                control_value,
            } => gates::controlled(&gates::ry(angle), control_value),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            PlanGate::H | PlanGate::Ry(_) => 1,
            PlanGate::Cx | PlanGate::ControlledRy { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanItem {
    Gate {
        gate: PlanGate,
        targets: Vec<usize>,
    },
    /// Projective measurement; `X` means projection onto `|±⟩`, leaving the
    /// qubit in the observed eigenstate. Outcome `+`/`0` is recorded as 0.
    Measure {
        qubit: usize,
        basis: Basis,
        creg: usize,
    },
    Conditional {
        gate: PlanGate,
        targets: Vec<usize>,
        creg: usize,
        value: bool,
    },
}

impl PlanItem {
    fn gate(gate: PlanGate, targets: &[usize]) -> Self {
        PlanItem::Gate {
            gate,
            targets: targets.to_vec(),
        }
    }

    fn cond(gate: PlanGate, targets: &[usize], value: bool) -> Self {
        PlanItem::Conditional {
            gate,
            targets: targets.to_vec(),
            creg: ALICE_BIT,
            value,
        }
    }

    fn is_classical(&self) -> bool {
        !matches!(self, PlanItem::Gate { .. })
    }
}

/// Ordered circuit fragment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitPlan {
    pub items: Vec<PlanItem>,
}

impl CircuitPlan {
    pub fn new(items: Vec<PlanItem>) -> Self {
        Self { items }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a CircuitPlan>) -> CircuitPlan {
        CircuitPlan {
            items: parts.into_iter().flat_map(|p| p.items.iter().cloned()).collect(),
        }
    }

    /// Number of classical bits referenced.
    pub fn n_cregs(&self) -> usize {
        self.items
            .iter()
            .filter_map(|it| match it {
                PlanItem::Measure { creg, .. } | PlanItem::Conditional { creg, .. } => {
                    Some(creg + 1)
                }
                PlanItem::Gate { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn has_measurements(&self) -> bool {
        self.items.iter().any(|it| matches!(it, PlanItem::Measure { .. }))
    }

    pub fn has_classical_control(&self) -> bool {
        self.items.iter().any(|it| matches!(it, PlanItem::Conditional { .. }))
    }

    /// Checks qubit indices, gate arity, and that every classical bit is
    /// written before it is read.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let mut written = vec![false; self.n_cregs()];
        for (i, item) in self.items.iter().enumerate() {
            match item {
                PlanItem::Gate { gate, targets } => check_gate(gate, targets, n_qubits, i)?,
                PlanItem::Conditional {
                    gate,
                    targets,
                    creg,
                    ..
                } => {
                    check_gate(gate, targets, n_qubits, i)?;
                    if !written[*creg] {
                        return Err(QetError::Argument(format!(
                            "item {i} reads classical bit {creg} before it is written"
                        )));
                    }
                }
                PlanItem::Measure { qubit, creg, .. } => {
                    if *qubit >= n_qubits {
                        return Err(QetError::Index(format!("item {i}: qubit {qubit}")));
                    }
                    written[*creg] = true;
                }
            }
        }
        Ok(())
    }
}

fn check_gate(gate: &PlanGate, targets: &[usize], n_qubits: usize, i: usize) -> Result<()> {
    if gate.arity() != targets.len() {
        return Err(QetError::Argument(format!(
            "item {i}: {gate:?} takes {} targets, got {}",
            gate.arity(),
            targets.len()
        )));
    }
    crate::qstate::check_targets(n_qubits, targets)
}

/// How a run turns states into energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExecutionMode {
    Exact,
    Sampled { shots: u64, seed: u64 },
    Noisy { noise: NoiseSpec, shots: u64, seed: u64 },
}

impl ExecutionMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExecutionMode::Exact => Ok(()),
            ExecutionMode::Sampled { shots, .. } | ExecutionMode::Noisy { shots, .. }
                if *shots == 0 =>
            {
                Err(QetError::Argument("shots must be at least 1".into()))
            }
            ExecutionMode::Sampled { .. } => Ok(()),
            ExecutionMode::Noisy { noise, .. } => noise.validate(N_QUBITS),
        }
    }
}

pub fn build_step1(consts: &DerivedConstants) -> CircuitPlan {
    CircuitPlan::new(vec![
        PlanItem::gate(PlanGate::Ry(-2.0 * consts.theta), &[QUBIT_A]),
        PlanItem::gate(PlanGate::Cx, &[QUBIT_A, QUBIT_B]),
    ])
}

pub fn build_step2(consts: &DerivedConstants, variant: Variant) -> CircuitPlan {
    match variant {
        Variant::Dynamic => build_step2_dynamic_in_basis(consts, Basis::X),
        Variant::Deferred => {
            let two_delta = 2.0 * consts.delta;
            CircuitPlan::new(vec![
                PlanItem::gate(PlanGate::H, &[QUBIT_A]),
                PlanItem::gate(PlanGate::Ry(PI), &[QUBIT_C]),
                PlanItem::gate(
                    PlanGate::ControlledRy {
                        angle: two_delta,
                        control_value: false,
                    },
                    &[QUBIT_A, QUBIT_C],
                ),
                PlanItem::gate(
                    PlanGate::ControlledRy {
                        angle: -two_delta,
                        control_value: true,
                    },
                    &[QUBIT_A, QUBIT_C],
                ),
            ])
        }
    }
}

/// Dynamic step 2 with Alice measuring in `basis`. Only `Basis::X` is the
/// protocol; `Basis::Z` is kept for counterexamples.
pub fn build_step2_dynamic_in_basis(consts: &DerivedConstants, basis: Basis) -> CircuitPlan {
    let two_delta = 2.0 * consts.delta;
    CircuitPlan::new(vec![
        PlanItem::Measure {
            qubit: QUBIT_A,
            basis,
            creg: ALICE_BIT,
        },
        PlanItem::cond(PlanGate::Ry(PI + two_delta), &[QUBIT_C], false),
        PlanItem::cond(PlanGate::Ry(PI - two_delta), &[QUBIT_C], true),
    ])
}

pub fn build_step3(consts: &DerivedConstants, variant: Variant) -> CircuitPlan {
    let two_delta = 2.0 * consts.delta;
    let mut items = Vec::with_capacity(4);
    for (angle, on) in [(-two_delta, false), (two_delta, true)] {
        for target in [QUBIT_B, QUBIT_C] {
            items.push(match variant {
                Variant::Dynamic => PlanItem::cond(PlanGate::Ry(angle), &[target], on),
                Variant::Deferred => PlanItem::gate(
                    PlanGate::ControlledRy {
                        angle,
                        control_value: on,
                    },
                    &[QUBIT_A, target],
                ),
            });
        }
    }
    CircuitPlan::new(items)
}

/// Terminal segment run after `steps_done` steps. The deferred variant reads
/// A out (the deferred measurement) and undoes the Hadamard so energies are
/// evaluated in the physical `|±⟩` frame.
pub fn build_readout(variant: Variant, steps_done: usize) -> CircuitPlan {
    match variant {
        Variant::Deferred if steps_done >= 2 => CircuitPlan::new(vec![
            PlanItem::Measure {
                qubit: QUBIT_A,
                basis: Basis::Z,
                creg: ALICE_BIT,
            },
            PlanItem::gate(PlanGate::H, &[QUBIT_A]),
        ]),
        _ => CircuitPlan::default(),
    }
}

/// The three step circuits of one protocol instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolPlans {
    consts: DerivedConstants,
    variant: Variant,
    steps: [CircuitPlan; 3],
}

impl ProtocolPlans {
    pub fn new(consts: &DerivedConstants, variant: Variant) -> Self {
        Self {
            consts: *consts,
            variant,
            steps: [
                build_step1(consts),
                build_step2(consts, variant),
                build_step3(consts, variant),
            ],
        }
    }

    /// Assembles hand-built steps, checking classical-bit ordering and that
    /// deferred steps contain no measurement or classical control.
    pub fn from_parts(
        consts: &DerivedConstants,
        variant: Variant,
        steps: [CircuitPlan; 3],
    ) -> Result<Self> {
        let plans = Self {
            consts: *consts,
            variant,
            steps,
        };
        for k in 1..=3 {
            plans.cumulative(k).validate(N_QUBITS)?;
        }
        if variant == Variant::Deferred
            && plans.steps.iter().any(|s| s.items.iter().any(PlanItem::is_classical))
        {
            return Err(QetError::Argument(
                "deferred plans may not measure or branch before the final readout".into(),
            ));
        }
        Ok(plans)
    }

    pub fn consts(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn steps(&self) -> &[CircuitPlan; 3] {
        &self.steps
    }

    /// Steps `1..=k` followed by the variant's readout segment.
    pub fn cumulative(&self, k: usize) -> CircuitPlan {
        let readout = build_readout(self.variant, k);
        CircuitPlan::concat(self.steps[..k].iter().chain(std::iter::once(&readout)))
    }
}

/// Outcome of the quasi-vacuum check after step 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiVacuumCheck {
    /// Trace distance between B's reduced state after step 2 and in the
    /// ground state.
    pub trace_distance: f64,
    /// `⟨H_V + H_B⟩` after step 2.
    pub bob_energy: f64,
    pub passed: bool,
}

const QUASI_VACUUM_TOL: f64 = 1e-10;

/// Runs step 1 and a dynamic step 2 with Alice measuring in `basis`, then
/// compares Bob's reduced state and local energy with the ground state.
pub fn quasi_vacuum_check(consts: &DerivedConstants, basis: Basis) -> Result<QuasiVacuumCheck> {
    let plan = CircuitPlan::concat([
        &build_step1(consts),
        &build_step2_dynamic_in_basis(consts, basis),
    ]);
    let branches = exec::run_plan(PureState::new_zero(N_QUBITS)?, &plan, None)?;
    let parts: Vec<(f64, PureState)> =
        branches.into_iter().map(|b| (b.weight, b.reg)).collect();
    let rho = DensityOperator::mixture(&parts)?;
    let ground = ground_state_analytic(consts).to_density();
    let trace_distance = rho
        .partial_trace(&[QUBIT_B])?
        .trace_distance(&ground.partial_trace(&[QUBIT_B])?)?;
    let bob_energy = rho.expectation(&build_observables(consts).h_vb)?;
    Ok(QuasiVacuumCheck {
        trace_distance,
        bob_energy,
        passed: trace_distance <= QUASI_VACUUM_TOL && bob_energy.abs() <= QUASI_VACUUM_TOL,
    })
}

/// True when Alice's X measurement leaves Bob's reduced state and local
/// energy exactly as in the ground state.
pub fn reduced_b_unchanged_check(consts: &DerivedConstants) -> bool {
    quasi_vacuum_check(consts, Basis::X).is_ok_and(|c| c.passed)
}

#[cfg(test)]
mod tests;
