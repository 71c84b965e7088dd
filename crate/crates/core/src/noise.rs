//! Depolarizing gate noise and readout confusion.
//!
//! Gate noise follows `ρ ↦ (1−p)ρ + p·I/d` on the gate's qubits and is applied
//! after every gate. Readout noise is a per-qubit row-stochastic matrix whose
//! entry `[i][j]` is the probability of recording `j` when the qubit is in `i`.

use serde::{Deserialize, Serialize};

use crate::error::{QetError, Result};
use crate::qstate::{gates, Matrix, C64};

const ROW_SUM_TOL: f64 = 1e-12;

pub type Confusion = [[f64; 2]; 2];

pub const IDENTITY_CONFUSION: Confusion = [[1.0, 0.0], [0.0, 1.0]];

pub fn symmetric_confusion(flip: f64) -> Confusion {
    [[1.0 - flip, flip], [flip, 1.0 - flip]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Depolarizing probability after each single-qubit gate.
    pub p1: f64,
    /// Depolarizing probability after each two-qubit gate.
    pub p2: f64,
    /// One confusion matrix per qubit.
    pub readout: Vec<Confusion>,
}

impl NoiseSpec {
    /// No gate noise, perfect readout.
    pub fn none(n_qubits: usize) -> Self {
        Self {
            p1: 0.0,
            p2: 0.0,
            readout: vec![IDENTITY_CONFUSION; n_qubits],
        }
    }

    /// Illustrative hardware-like levels: p1 = 0.001, p2 = 0.01 and a 2 %
    /// symmetric readout flip. Not fitted to any device.
    pub fn illustrative() -> Self {
        Self {
            p1: 0.001,
            p2: 0.01,
            readout: vec![symmetric_confusion(0.02); 3],
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(QetError::Domain(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.readout.len() != n_qubits {
            return Err(QetError::Size(format!(
                "{} confusion matrices for {n_qubits} qubits",
                self.readout.len()
            )));
        }
        for (q, c) in self.readout.iter().enumerate() {
            validate_confusion(c).map_err(|e| match e {
                QetError::Domain(m) => QetError::Domain(format!("qubit {q}: {m}")),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn is_null(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.readout.iter().all(|c| *c == IDENTITY_CONFUSION)
    }

    /// Depolarizing probability for a gate touching `n_targets` qubits.
    pub fn gate_probability(&self, n_targets: usize) -> f64 {
        if n_targets >= 2 {
            self.p2
        } else {
            self.p1
        }
    }
}

fn validate_confusion(c: &Confusion) -> Result<()> {
    for row in c {
        if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(QetError::Domain(format!("confusion entries {row:?} outside [0, 1]")));
        }
        if (row[0] + row[1] - 1.0).abs() > ROW_SUM_TOL {
            return Err(QetError::Domain(format!("confusion row {row:?} does not sum to 1")));
        }
    }
    Ok(())
}

/// Kraus operators of the depolarizing channel on one or two qubits.
/// `p = 0` returns the single identity operator.
pub fn depolarizing_kraus(p: f64, n_targets: usize) -> Result<Vec<Matrix>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QetError::Domain(format!("depolarizing p = {p} outside [0, 1]")));
    }
    if !(1..=2).contains(&n_targets) {
        return Err(QetError::Argument(format!(
            "depolarizing channel on {n_targets} qubits is not supported"
        )));
    }
    let dim = 1usize << n_targets;
    if p == 0.0 {
        return Ok(vec![gates::identity(dim)]);
    }
    let singles = [
        gates::identity(2),
        gates::pauli_x(),
        gates::pauli_y(),
        gates::pauli_z(),
    ];
    let paulis: Vec<Matrix> = if n_targets == 1 {
        singles.to_vec()
    } else {
        singles
            .iter()
            .flat_map(|a| singles.iter().map(move |b| gates::kron(a, b)))
            .collect()
    };
    let n_paulis = paulis.len() as f64;
    let w_id = (1.0 - p * (n_paulis - 1.0) / n_paulis).sqrt();
    let w = (p / n_paulis).sqrt();
    Ok(paulis
        .into_iter()
        .enumerate()
        .map(|(i, m)| m * C64::new(if i == 0 { w_id } else { w }, 0.0))
        .collect())
}

/// Applies per-qubit confusion to a distribution over bitstrings (qubit 0 is
/// the most significant bit of the index).
pub fn apply_readout_error(probabilities: &[f64], confusion: &[Confusion]) -> Result<Vec<f64>> {
    let n = confusion.len();
    if probabilities.len() != 1usize << n {
        return Err(QetError::Size(format!(
            "distribution of length {} for {n} qubits",
            probabilities.len()
        )));
    }
    if probabilities.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(QetError::Validity("distribution has negative entries".into()));
    }
    for c in confusion {
        validate_confusion(c)?;
    }
    let mut dist = probabilities.to_vec();
    for (q, c) in confusion.iter().enumerate() {
        let bit = 1usize << (n - 1 - q);
        for i in 0..dist.len() {
            if i & bit != 0 {
                continue;
            }
            let (p0, p1) = (dist[i], dist[i | bit]);
            dist[i] = p0 * c[0][0] + p1 * c[1][0];
            dist[i | bit] = p0 * c[0][1] + p1 * c[1][1];
        }
    }
    Ok(dist)
}
