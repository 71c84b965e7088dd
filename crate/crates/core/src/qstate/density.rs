use super::{
    apply_local, bit_of, check_matrix_shape, check_qubit_count, check_targets, gates, Basis,
    Matrix, PauliObservable, PauliTerm, PureState, C64,
};
use crate::error::{QetError, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;
const COMPLETENESS_TOL: f64 = 1e-10;

/// Density operator on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    n_qubits: usize,
    matrix: Matrix,
}

impl DensityOperator {
    pub fn from_pure(state: &PureState) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            n_qubits: state.n_qubits(),
            matrix: &v * v.adjoint(),
        }
    }

    /// `Σ wᵢ |ψᵢ⟩⟨ψᵢ|`; weights must be non-negative and sum to 1.
    pub fn mixture(parts: &[(f64, PureState)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| QetError::Argument("empty mixture".into()))?;
        let n = first.1.n_qubits();
        let dim = 1usize << n;
        let mut matrix = Matrix::zeros(dim, dim);
        for (w, s) in parts {
            if s.n_qubits() != n {
                return Err(QetError::Size("mixture components differ in size".into()));
            }
            if *w < 0.0 {
                return Err(QetError::Validity(format!("negative weight {w}")));
            }
            matrix += Self::from_pure(s).matrix * C64::new(*w, 0.0);
        }
        Self::from_matrix(matrix)
    }

    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || dim < 2 || !dim.is_power_of_two() {
            return Err(QetError::Size(format!(
                "{}x{} is not a qubit density matrix shape",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        let herm = (&matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(QetError::Validity(format!("not Hermitian (defect {herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QetError::Validity(format!("trace {tr} is not 1")));
        }
        let rho = Self { n_qubits, matrix };
        let min = rho.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(QetError::Validity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    /// Maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        Ok(Self {
            n_qubits,
            matrix: Matrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .hermitian_part()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `½ Σ |λᵢ(ρ − σ)|`.
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        self.check_same_size(other.n_qubits)?;
        let diff = &self.matrix - &other.matrix;
        let diff = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
    }

    /// `ρ ↦ U ρ U†` on `targets`.
    pub fn apply_gate(&mut self, unitary: &Matrix, targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, targets)?;
        check_matrix_shape(unitary, targets.len())?;
        let defect = gates::unitarity_defect(unitary);
        if defect > 1e-10 {
            return Err(QetError::Validity(format!(
                "matrix is not unitary (defect {defect:.3e})"
            )));
        }
        self.conjugate_by(unitary, targets);
        Ok(())
    }

    /// `ρ ↦ Σ K ρ K†` on `targets`, requiring `Σ K†K = I`.
    pub fn apply_channel(&mut self, kraus: &[Matrix], targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, targets)?;
        if kraus.is_empty() {
            return Err(QetError::Validity("empty Kraus set".into()));
        }
        let dim = 1usize << targets.len();
        let mut completeness = Matrix::zeros(dim, dim);
        for k in kraus {
            check_matrix_shape(k, targets.len())?;
            completeness += k.adjoint() * k;
        }
        let defect = (completeness - Matrix::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > COMPLETENESS_TOL {
            return Err(QetError::Validity(format!(
                "Kraus set is not trace preserving (defect {defect:.3e})"
            )));
        }
        self.apply_kraus_unchecked(kraus, targets);
        Ok(())
    }

    /// `ρ ↦ Σ K ρ K†` with targets and completeness already checked.
    pub(crate) fn apply_kraus_unchecked(&mut self, kraus: &[Matrix], targets: &[usize]) {
        let mut out = Matrix::zeros(self.matrix.nrows(), self.matrix.ncols());
        for k in kraus {
            let mut branch = self.clone();
            branch.conjugate_by(k, targets);
            out += branch.matrix;
        }
        self.matrix = out;
    }

    pub fn expectation(&self, obs: &PauliObservable) -> Result<f64> {
        self.check_same_size(obs.n_qubits())?;
        let dim = self.matrix.nrows();
        let mut total = 0.0;
        for term in obs.terms() {
            let (x_mask, zy_mask, n_y) = term.masks();
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..dim {
                acc += PauliTerm::phase(j, zy_mask, n_y) * self.matrix[(j, j ^ x_mask)];
            }
            total += term.coeff * acc.re;
        }
        Ok(total)
    }

    /// Reduced state on `keep` (in ascending qubit order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(QetError::Argument("keep set is empty".into()));
        }
        check_targets(self.n_qubits, keep)?;
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        let n = self.n_qubits;
        let k = keep.len();
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let reduce = |i: usize, qs: &[usize]| {
            qs.iter()
                .fold(0usize, |acc, &q| (acc << 1) | usize::from(bit_of(i, q, n)))
        };
        let dim = 1usize << n;
        let mut out = Matrix::zeros(1 << k, 1 << k);
        for i in 0..dim {
            let ti = reduce(i, &traced);
            let ki = reduce(i, &keep);
            for j in 0..dim {
                if reduce(j, &traced) == ti {
                    out[(ki, reduce(j, &keep))] += self.matrix[(i, j)];
                }
            }
        }
        Ok(DensityOperator {
            n_qubits: k,
            matrix: out,
        })
    }

    /// Projects `qubit` onto the `outcome` eigenstate of `basis`, returning
    /// the probability and the normalized post-measurement state.
    pub fn project(
        &self,
        qubit: usize,
        basis: Basis,
        outcome: bool,
    ) -> Result<(f64, Option<DensityOperator>)> {
        check_targets(self.n_qubits, &[qubit])?;
        let mut post = self.clone();
        post.conjugate_by(&gates::projector(basis, outcome), &[qubit]);
        let p = post.trace().re;
        if p <= 0.0 {
            return Ok((0.0, None));
        }
        post.matrix /= C64::new(p, 0.0);
        Ok((p, Some(post)))
    }

    /// Diagonal of the matrix: computational-basis readout probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|i| self.matrix[(i, i)].re.max(0.0))
            .collect()
    }

    /// `ρ ↦ M ρ M†` without validity checks.
    fn conjugate_by(&mut self, m: &Matrix, targets: &[usize]) {
        // Column-major storage: entry (i, j) sits at j·dim + i, i.e. a
        // 2n-qubit register whose leading n qubits index the column.
        let n = self.n_qubits;
        let rows: Vec<usize> = targets.iter().map(|&t| n + t).collect();
        let m_conj = m.map(|z| z.conj());
        let data = self.matrix.as_mut_slice();
        apply_local(data, 2 * n, m, &rows);
        apply_local(data, 2 * n, &m_conj, targets);
    }

    fn hermitian_part(&self) -> Matrix {
        (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0)
    }

    fn check_same_size(&self, n: usize) -> Result<()> {
        if n != self.n_qubits {
            return Err(QetError::Size(format!(
                "operand has {n} qubits, density operator has {}",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::gates::{cnot, hadamard, pauli_x, pauli_y, pauli_z, ry};
    use crate::qstate::RngStream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn depolarizing_1q(p: f64) -> Vec<Matrix> {
        let s0 = C64::new((1.0 - 0.75 * p).sqrt(), 0.0);
        let s = C64::new((p / 4.0).sqrt(), 0.0);
        vec![
            gates::identity(2) * s0,
            pauli_x() * s,
            pauli_y() * s,
            pauli_z() * s,
        ]
    }

    fn bell() -> PureState {
        let mut s = PureState::new_zero(2).unwrap();
        s.apply_gate(&hadamard(), &[0]).unwrap();
        s.apply_gate(&cnot(), &[0, 1]).unwrap();
        s
    }

    #[test]
    fn gate_matches_dense_conjugation() {
        let mut s = PureState::new_zero(3).unwrap();
        s.apply_gate(&ry(0.8), &[0]).unwrap();
        s.apply_gate(&cnot(), &[0, 2]).unwrap();
        let mut rho = DensityOperator::from_pure(&PureState::new_zero(3).unwrap());
        rho.apply_gate(&ry(0.8), &[0]).unwrap();
        rho.apply_gate(&cnot(), &[0, 2]).unwrap();
        let expected = DensityOperator::from_pure(&s);
        assert_abs_diff_eq!((rho.matrix() - expected.matrix()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn product_state_partial_trace() {
        let mut a = PureState::new_zero(1).unwrap();
        a.apply_gate(&ry(0.6), &[0]).unwrap();
        let mut b = PureState::new_zero(1).unwrap();
        b.apply_gate(&ry(-1.3), &[0]).unwrap();
        let ab = DensityOperator::from_pure(&a.tensor(&b).unwrap());
        let ra = ab.partial_trace(&[0]).unwrap();
        let rb = ab.partial_trace(&[1]).unwrap();
        assert_abs_diff_eq!(ra.trace_distance(&a.to_density()).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rb.trace_distance(&b.to_density()).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn bell_reduces_to_maximally_mixed() {
        let rho = bell().to_density().partial_trace(&[1]).unwrap();
        let mm = DensityOperator::maximally_mixed(1).unwrap();
        assert_abs_diff_eq!(rho.trace_distance(&mm).unwrap(), 0.0, epsilon = 1e-14);
        assert!(matches!(
            bell().to_density().partial_trace(&[]),
            Err(QetError::Argument(_))
        ));
    }

    #[test]
    fn identity_channel_is_noop() {
        let mut rho = bell().to_density();
        let before = rho.clone();
        rho.apply_channel(&[gates::identity(2)], &[1]).unwrap();
        assert_eq!(rho, before);
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let mut rho = PureState::new_zero(1).unwrap().to_density();
        rho.apply_channel(&depolarizing_1q(1.0), &[0]).unwrap();
        let mm = DensityOperator::maximally_mixed(1).unwrap();
        assert_abs_diff_eq!(rho.trace_distance(&mm).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_trace_preserving_kraus() {
        let mut rho = PureState::new_zero(1).unwrap().to_density();
        let half = gates::identity(2) * C64::new(0.5, 0.0);
        assert!(matches!(
            rho.apply_channel(&[half], &[0]),
            Err(QetError::Validity(_))
        ));
    }

    #[test]
    fn from_matrix_validation() {
        let bad_trace = Matrix::identity(2, 2);
        assert!(DensityOperator::from_matrix(bad_trace).is_err());
        let mut neg = Matrix::zeros(2, 2);
        neg[(0, 0)] = C64::new(1.5, 0.0);
        neg[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityOperator::from_matrix(neg).is_err());
    }

    #[test]
    fn projection_on_density_matches_pure() {
        let s = bell();
        let (p, post) = s.to_density().project(0, Basis::X, true).unwrap();
        let (pp, pure_post) = s.project(0, Basis::X, true).unwrap();
        assert_abs_diff_eq!(p, pp, epsilon = 1e-14);
        let d = post
            .unwrap()
            .trace_distance(&pure_post.unwrap().to_density())
            .unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-14);
    }

    fn random_rho(seed: u64, n: usize) -> DensityOperator {
        let mut rng = RngStream::new(seed);
        let u = gates::haar_unitary(1 << n, &mut rng);
        let amps: Vec<C64> = u.column(0).iter().copied().collect();
        let amps2: Vec<C64> = u.column(1).iter().copied().collect();
        DensityOperator::mixture(&[
            (0.7, PureState::normalized(amps).unwrap()),
            (0.3, PureState::normalized(amps2).unwrap()),
        ])
        .unwrap()
    }

    proptest! {
        #[test]
        fn channels_preserve_trace_and_positivity(seed in any::<u64>(), p in 0.0f64..=1.0, q in 0usize..3) {
            let mut rho = random_rho(seed, 3);
            rho.apply_channel(&depolarizing_1q(p), &[q]).unwrap();
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(rho.min_eigenvalue() >= -1e-10);
        }

        #[test]
        fn partial_trace_preserves_local_expectations(
            seed in any::<u64>(),
            label in "[IXYZ]",
            keep in 0usize..2,
        ) {
            let rho = random_rho(seed, 2);
            let reduced = rho.partial_trace(&[keep]).unwrap();
            prop_assert!((reduced.trace().re - 1.0).abs() < 1e-12);
            let local = PauliObservable::new(1).with_term(1.0, &label).unwrap();
            let lifted_label = if keep == 0 { format!("{label}I") } else { format!("I{label}") };
            let lifted = PauliObservable::new(2).with_term(1.0, &lifted_label).unwrap();
            let a = reduced.expectation(&local).unwrap();
            let b = rho.expectation(&lifted).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
