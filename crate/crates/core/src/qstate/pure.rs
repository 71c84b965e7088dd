use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;

use super::{
    apply_local, bit_of, bitstring, check_matrix_shape, check_qubit_count, check_targets, gates,
    Basis, DensityOperator, Matrix, PauliObservable, PauliTerm, RngStream, C64,
};
use crate::error::{QetError, Result};

const NORM_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

/// Normalized amplitude vector over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: DVector<C64>,
}

/// Result of a sampled projective measurement.
#[derive(Debug, Clone)]
pub struct Measurement {
    /// `+1` for `|0⟩` / `|+⟩`, `−1` for `|1⟩` / `|−⟩`.
    pub outcome: i8,
    pub post_state: PureState,
    pub probability: f64,
}

impl Measurement {
    /// Classical bit recorded for the outcome (`+1 ↦ 0`, `−1 ↦ 1`).
    pub fn bit(&self) -> bool {
        self.outcome < 0
    }
}

impl PureState {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new_zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amplitudes = DVector::from_element(1 << n_qubits, C64::new(0.0, 0.0));
        amplitudes[0] = C64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QetError::Size(format!(
                "amplitude vector length {len} is not 2^n"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        let amplitudes = DVector::from_vec(amps);
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QetError::Validity(format!("state norm {norm} is not 1")));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amps);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QetError::Validity("cannot normalize a zero vector".into()));
        }
        Self::from_amplitudes((v / C64::new(norm, 0.0)).iter().copied().collect())
    }

    /// Tensor product `self ⊗ other`; `self` supplies the leading qubits.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        check_qubit_count(self.n_qubits + other.n_qubits)?;
        Ok(PureState {
            n_qubits: self.n_qubits + other.n_qubits,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.check_same_size(other.n_qubits)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|⟨self|other⟩|`, which ignores global phase.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Applies a unitary to `targets`; `targets[0]` is the most significant
    /// qubit of the matrix.
    pub fn apply_gate(&mut self, unitary: &Matrix, targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, targets)?;
        check_matrix_shape(unitary, targets.len())?;
        let defect = gates::unitarity_defect(unitary);
        if defect > UNITARY_TOL {
            return Err(QetError::Validity(format!(
                "matrix is not unitary (defect {defect:.3e})"
            )));
        }
        apply_local(self.amplitudes.as_mut_slice(), self.n_qubits, unitary, targets);
        Ok(())
    }

    pub fn expectation(&self, obs: &PauliObservable) -> Result<f64> {
        self.check_same_size(obs.n_qubits())?;
        let amps = self.amplitudes.as_slice();
        let mut total = 0.0;
        for term in obs.terms() {
            let (x_mask, zy_mask, n_y) = term.masks();
            let mut acc = C64::new(0.0, 0.0);
            for (i, a) in amps.iter().enumerate() {
                acc += amps[i ^ x_mask].conj() * PauliTerm::phase(i, zy_mask, n_y) * a;
            }
            total += term.coeff * acc.re;
        }
        Ok(total)
    }

    /// Probability of each computational basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Projects `qubit` onto the `outcome` eigenstate of `basis`. Returns the
    /// Born probability and the normalized post-state (`None` when the
    /// probability is zero).
    pub fn project(
        &self,
        qubit: usize,
        basis: Basis,
        outcome: bool,
    ) -> Result<(f64, Option<PureState>)> {
        check_targets(self.n_qubits, &[qubit])?;
        let mut post = self.clone();
        apply_local(
            post.amplitudes.as_mut_slice(),
            self.n_qubits,
            &gates::projector(basis, outcome),
            &[qubit],
        );
        let p = post.amplitudes.norm_squared();
        if p <= 0.0 {
            return Ok((0.0, None));
        }
        post.amplitudes /= C64::new(p.sqrt(), 0.0);
        Ok((p, Some(post)))
    }

    /// Samples a projective measurement of one qubit using exact Born
    /// probabilities.
    pub fn measure_projective(
        &self,
        qubit: usize,
        basis: Basis,
        rng: &mut RngStream,
    ) -> Result<Measurement> {
        let (p0, post0) = self.project(qubit, basis, false)?;
        let (p1, post1) = self.project(qubit, basis, true)?;
        let u: f64 = rng.random::<f64>() * (p0 + p1);
        // Rounding can leave one branch with zero weight; never select it.
        let take_zero = match (&post0, &post1) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            _ => u < p0,
        };
        let (probability, post) = if take_zero { (p0, post0) } else { (p1, post1) };
        Ok(Measurement {
            outcome: if take_zero { 1 } else { -1 },
            post_state: post.expect("selected branch has positive probability"),
            probability,
        })
    }

    /// Samples `shots` full-register readouts after rotating each qubit into
    /// its requested basis (`rotations` empty means all-Z). Keys are
    /// bitstrings with qubit 0 first.
    pub fn sample_counts(
        &self,
        shots: u64,
        rotations: &[Basis],
        rng: &mut RngStream,
    ) -> Result<BTreeMap<String, u64>> {
        if !rotations.is_empty() && rotations.len() != self.n_qubits {
            return Err(QetError::Size(format!(
                "{} basis settings for {} qubits",
                rotations.len(),
                self.n_qubits
            )));
        }
        let mut rotated = self.clone();
        for (q, b) in rotations.iter().enumerate() {
            if *b == Basis::X {
                apply_local(
                    rotated.amplitudes.as_mut_slice(),
                    self.n_qubits,
                    &gates::hadamard(),
                    &[q],
                );
            }
        }
        let hist = super::sample_histogram(&rotated.probabilities(), shots, rng)?;
        Ok(hist
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .map(|(i, c)| (bitstring(i, self.n_qubits), c))
            .collect())
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }

    /// Marginal probability that `qubit` reads 1 in the computational basis.
    pub fn prob_one(&self, qubit: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| bit_of(*i, qubit, self.n_qubits))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn check_same_size(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(QetError::Size(format!(
                "operand has {n} qubits, state has {}",
                self.n_qubits
            )));
        }
        Ok(())
    }
}
