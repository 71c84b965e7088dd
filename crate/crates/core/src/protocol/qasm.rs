use std::fmt::Write;

use super::{CircuitPlan, PlanGate, PlanItem, ProtocolPlans, N_QUBITS};
use crate::error::{QetError, Result};
use crate::qstate::Basis;

/// OpenQASM 3 text for the cumulative circuit of step `k` (1, 2 or 3),
/// including the variant's terminal readout.
pub fn export_qasm(plans: &ProtocolPlans, k: usize) -> Result<String> {
    if !(1..=3).contains(&k) {
        return Err(QetError::Argument(format!("step {k} outside 1..=3")));
    }
    let mut out = String::new();
    out.push_str("OPENQASM 3.0;\ninclude \"stdgates.inc\";\n");
    let _ = writeln!(out, "qubit[{N_QUBITS}] q;");
    let n_bits = plans.cumulative(k).n_cregs();
    if n_bits > 0 {
        let _ = writeln!(out, "bit[{n_bits}] m;");
    }
    for (i, step) in plans.steps()[..k].iter().enumerate() {
        let _ = writeln!(out, "// step {}", i + 1);
        emit(&mut out, step);
    }
    let readout = super::build_readout(plans.variant(), k);
    if !readout.items.is_empty() {
        out.push_str("// readout of A, then back to the |+>/|-> frame\n");
        emit(&mut out, &readout);
    }
    Ok(out)
}

fn emit(out: &mut String, plan: &CircuitPlan) {
    for item in &plan.items {
        match item {
            PlanItem::Gate { gate, targets } => {
                let _ = writeln!(out, "{}", gate_line(gate, targets));
            }
            PlanItem::Measure { qubit, basis, creg } => match basis {
                Basis::Z => {
                    let _ = writeln!(out, "m[{creg}] = measure q[{qubit}];");
                }
                Basis::X => {
                    let _ = writeln!(out, "h q[{qubit}];");
                    let _ = writeln!(out, "m[{creg}] = measure q[{qubit}];");
                    let _ = writeln!(out, "h q[{qubit}];");
                }
            },
            PlanItem::Conditional {
                gate,
                targets,
                creg,
                value,
            } => {
                let cond = if *value {
                    format!("m[{creg}]")
                } else {
                    format!("!m[{creg}]")
                };
                let _ = writeln!(out, "if ({cond}) {{ {} }}", gate_line(gate, targets));
            }
        }
    }
}

fn gate_line(gate: &PlanGate, targets: &[usize]) -> String {
    let qs = targets
        .iter()
        .map(|q| format!("q[{q}]"))
        .collect::<Vec<_>>()
        .join(", ");
    match gate {
        PlanGate::H => format!("h {qs};"),
        PlanGate::Ry(a) => format!("ry({a}) {qs};"),
        PlanGate::Cx => format!("cx {qs};"),
        PlanGate::ControlledRy {
            angle,
            control_value,
        } => {
            let modifier = if *control_value { "ctrl" } else { "negctrl" };
            format!("{modifier} @ ry({angle}) {qs};")
        }
    }
}
