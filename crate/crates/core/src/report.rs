use serde::{Deserialize, Serialize};

/// Energies of the three Hamiltonian blocks after one protocol step, with
/// their standard errors (zero when computed exactly).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub e_a: f64,
    pub e_vb: f64,
    pub e_c: f64,
    pub se_a: f64,
    pub se_vb: f64,
    pub se_c: f64,
}

impl StepReport {
    pub fn exact(e_a: f64, e_vb: f64, e_c: f64) -> Self {
        Self {
            e_a,
            e_vb,
            e_c,
            ..Self::default()
        }
    }

    pub fn energies(&self) -> [f64; 3] {
        [self.e_a, self.e_vb, self.e_c]
    }

    pub fn standard_errors(&self) -> [f64; 3] {
        [self.se_a, self.se_vb, self.se_c]
    }
}

/// Per-step energy ledger plus the energy moved out of Bob's qubit and into
/// the storage qubit between steps 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub steps: [StepReport; 3],
    /// `steps[2].e_vb − steps[1].e_vb`.
    pub extracted: f64,
    /// `steps[2].e_c − steps[1].e_c`.
    pub stored: f64,
}

impl RunReport {
    pub fn from_steps(steps: [StepReport; 3]) -> Self {
        Self {
            extracted: steps[2].e_vb - steps[1].e_vb,
            stored: steps[2].e_c - steps[1].e_c,
            steps,
        }
    }
}
