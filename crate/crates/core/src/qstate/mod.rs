//! Dense few-qubit simulation: pure states, density operators, Pauli
//! observables and shot sampling.
//!
//! Qubit 0 is the most significant bit of a basis label, so `|q0 q1 q2⟩`
//! has index `q0·4 + q1·2 + q2`.

mod density;
pub mod gates;
mod pauli;
mod pure;
mod rng;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use density::DensityOperator;
pub use pauli::{Pauli, PauliObservable, PauliTerm};
pub use pure::{Measurement, PureState};
pub use rng::RngStream;

use crate::error::{QetError, Result};

pub type C64 = Complex64;
/// Dense complex matrix used for gates, Kraus operators and density matrices.
pub type Matrix = DMatrix<C64>;

/// Largest register the dense backends accept.
pub const MAX_QUBITS: usize = 12;

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
}

pub(crate) fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(QetError::Size(format!(
            "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

pub(crate) fn check_targets(n_qubits: usize, targets: &[usize]) -> Result<()> {
    if targets.is_empty() {
        return Err(QetError::Index("no target qubits given".into()));
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(QetError::Index(format!(
                "qubit {t} out of range for {n_qubits}-qubit register"
            )));
        }
        if targets[..i].contains(&t) {
            return Err(QetError::Index(format!("qubit {t} repeated in targets")));
        }
    }
    Ok(())
}

pub(crate) fn check_matrix_shape(m: &Matrix, n_targets: usize) -> Result<()> {
    let dim = 1usize << n_targets;
    if m.nrows() != dim || m.ncols() != dim {
        return Err(QetError::Size(format!(
            "{}x{} matrix cannot act on {n_targets} qubit(s)",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Applies `m` to the qubits `targets` of a register of `n_reg` qubits stored
/// as a flat amplitude slice. `targets[0]` is the most significant bit of the
/// local index. `m` need not be unitary.
pub(crate) fn apply_local(amps: &mut [C64], n_reg: usize, m: &Matrix, targets: &[usize]) {
    let k = targets.len();
    let local_dim = 1usize << k;
    let positions: Vec<usize> = targets.iter().map(|&t| n_reg - 1 - t).collect();
    let mask: usize = positions.iter().map(|&p| 1usize << p).sum();
    let offsets: Vec<usize> = (0..local_dim)
        .map(|l| {
            (0..k)
                .filter(|&j| (l >> (k - 1 - j)) & 1 == 1)
                .map(|j| 1usize << positions[j])
                .sum()
        })
        .collect();

    let mut gathered = vec![C64::new(0.0, 0.0); local_dim];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (g, &off) in gathered.iter_mut().zip(&offsets) {
            *g = amps[base | off];
        }
        for (r, &off) in offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (c, g) in gathered.iter().enumerate() {
                acc += m[(r, c)] * g;
            }
            amps[base | off] = acc;
        }
    }
}

/// Draws `shots` samples from a discrete distribution and returns the count
/// of each index.
pub(crate) fn sample_histogram(probs: &[f64], shots: u64, rng: &mut RngStream) -> Result<Vec<u64>> {
    use rand::distr::{weighted::WeightedIndex, Distribution};

    if shots == 0 {
        return Err(QetError::Argument("shots must be at least 1".into()));
    }
    let dist = WeightedIndex::new(probs)
        .map_err(|e| QetError::Validity(format!("invalid distribution: {e}")))?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        counts[dist.sample(rng)] += 1;
    }
    Ok(counts)
}

/// Bit value of `qubit` in basis index `index` of an `n`-qubit register.
#[inline]
pub(crate) fn bit_of(index: usize, qubit: usize, n: usize) -> bool {
    (index >> (n - 1 - qubit)) & 1 == 1
}

/// Renders a basis index as a bitstring, qubit 0 first.
pub fn bitstring(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| if bit_of(index, q, n) { '1' } else { '0' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitstring_orders_qubit_zero_first() {
        assert_eq!(bitstring(0b110, 3), "110");
        assert_eq!(bitstring(1, 3), "001");
        assert!(bit_of(0b100, 0, 3));
        assert!(!bit_of(0b100, 2, 3));
    }

    #[test]
    fn target_checks() {
        assert!(check_targets(3, &[0, 2]).is_ok());
        assert!(matches!(check_targets(3, &[3]), Err(QetError::Index(_))));
        assert!(matches!(check_targets(3, &[1, 1]), Err(QetError::Index(_))));
        assert!(matches!(check_qubit_count(13), Err(QetError::Size(_))));
        assert!(matches!(check_qubit_count(0), Err(QetError::Size(_))));
    }
}
