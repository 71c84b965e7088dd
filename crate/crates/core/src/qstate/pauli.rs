use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::{gates, Matrix, C64};
use crate::error::{QetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(ch: char) -> Option<Self> {
        match ch {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn matrix(self) -> Matrix {
        match self {
            Pauli::I => gates::identity(2),
            Pauli::X => gates::pauli_x(),
            Pauli::Y => gates::pauli_y(),
            Pauli::Z => gates::pauli_z(),
        }
    }
}

/// A real coefficient times a tensor product of Paulis, qubit 0 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub paulis: Vec<Pauli>,
}

impl PauliTerm {
    pub fn label(&self) -> String {
        self.paulis.iter().map(|p| p.as_char()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.paulis.iter().all(|&p| p == Pauli::I)
    }

    /// `(x_mask, zy_mask, n_y)`: the term maps `|i⟩` to
    /// `i^{n_y} (−1)^{popcount(i & zy_mask)} |i ⊕ x_mask⟩`.
    pub(crate) fn masks(&self) -> (usize, usize, u32) {
        let n = self.paulis.len();
        let mut x_mask = 0;
        let mut zy_mask = 0;
        let mut n_y = 0;
        for (q, p) in self.paulis.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x_mask |= bit,
                Pauli::Z => zy_mask |= bit,
                Pauli::Y => {
                    x_mask |= bit;
                    zy_mask |= bit;
                    n_y += 1;
                }
            }
        }
        (x_mask, zy_mask, n_y)
    }

    pub(crate) fn phase(index: usize, zy_mask: usize, n_y: u32) -> C64 {
        let i_pow = match n_y % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        if (index & zy_mask).count_ones() % 2 == 1 {
            -i_pow
        } else {
            i_pow
        }
    }
}

/// Hermitian observable written as a real combination of Pauli strings.
/// Constant energy offsets are carried as identity terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliObservable {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliObservable {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    /// Appends `coeff · label`, where `label` is a string over `IXYZ` with one
    /// character per qubit.
    pub fn with_term(mut self, coeff: f64, label: &str) -> Result<Self> {
        self.push_term(coeff, label)?;
        Ok(self)
    }

    pub fn push_term(&mut self, coeff: f64, label: &str) -> Result<()> {
        if !coeff.is_finite() {
            return Err(QetError::Validity(format!("non-finite coefficient {coeff}")));
        }
        let paulis = label
            .chars()
            .map(|ch| {
                Pauli::from_char(ch)
                    .ok_or_else(|| QetError::Validity(format!("bad Pauli label {label:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if paulis.len() != self.n_qubits {
            return Err(QetError::Size(format!(
                "label {label:?} does not cover {} qubits",
                self.n_qubits
            )));
        }
        self.terms.push(PauliTerm { coeff, paulis });
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// Sum of identity-term coefficients.
    pub fn constant(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.is_identity())
            .map(|t| t.coeff)
            .sum()
    }

    pub fn to_matrix(&self) -> Matrix {
        let dim = 1usize << self.n_qubits;
        let mut out = Matrix::zeros(dim, dim);
        for term in &self.terms {
            let m = term
                .paulis
                .iter()
                .skip(1)
                .fold(term.paulis[0].matrix(), |acc, p| gates::kron(&acc, &p.matrix()));
            out += m * C64::new(term.coeff, 0.0);
        }
        out
    }
}

impl Add for PauliObservable {
    type Output = PauliObservable;

    /// Term-wise concatenation. Panics if the qubit counts differ.
    fn add(mut self, rhs: PauliObservable) -> PauliObservable {
        assert_eq!(self.n_qubits, rhs.n_qubits, "qubit counts differ");
        self.terms.extend(rhs.terms);
        self
    }
}

impl fmt::Display for PauliObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({})·{}", t.coeff, t.label())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_labels() {
        assert!(PauliObservable::new(2).with_term(1.0, "XQ").is_err());
        assert!(matches!(
            PauliObservable::new(2).with_term(1.0, "XXX"),
            Err(QetError::Size(_))
        ));
    }

    #[test]
    fn matrix_of_xx_plus_offset() {
        let obs = PauliObservable::new(2)
            .with_term(2.0, "XX")
            .unwrap()
            .with_term(0.5, "II")
            .unwrap();
        let m = obs.to_matrix();
        assert_abs_diff_eq!(m[(0, 3)].re, 2.0);
        assert_abs_diff_eq!(m[(1, 1)].re, 0.5);
        assert_abs_diff_eq!(obs.constant(), 0.5);
    }

    #[test]
    fn y_phase_convention_matches_matrix() {
        let t = PauliTerm {
            coeff: 1.0,
            paulis: vec![Pauli::Y],
        };
        let (x, zy, ny) = t.masks();
        assert_eq!((x, zy, ny), (1, 1, 1));
        // Y|0⟩ = i|1⟩, Y|1⟩ = −i|0⟩
        assert_eq!(PauliTerm::phase(0, zy, ny), C64::new(0.0, 1.0));
        assert_eq!(PauliTerm::phase(1, zy, ny), C64::new(0.0, -1.0));
    }

    #[test]
    fn matrix_is_hermitian() {
        let obs = PauliObservable::new(3)
            .with_term(0.3, "XYZ")
            .unwrap()
            .with_term(-1.2, "YIY")
            .unwrap();
        let m = obs.to_matrix();
        assert_abs_diff_eq!((m.adjoint() - &m).norm(), 0.0, epsilon = 1e-14);
    }
}
