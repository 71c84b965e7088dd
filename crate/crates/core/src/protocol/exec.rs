use rand::distr::{weighted::WeightedIndex, Distribution};

use super::{
    CircuitPlan, ExecutionMode, PlanItem, ProtocolPlans, Variant, ALICE_BIT, N_QUBITS, QUBIT_A,
    QUBIT_B, QUBIT_C,
};
use crate::error::{QetError, Result};
use crate::model::{build_observables, DerivedConstants};
use crate::noise::{apply_readout_error, depolarizing_kraus, Confusion, NoiseSpec};
use crate::qstate::{
    bit_of, gates, Basis, DensityOperator, Matrix, PauliObservable, PureState, RngStream,
};
use crate::report::{RunReport, StepReport};

/// Branches lighter than this are dropped.
const PRUNE: f64 = 1e-14;

pub(crate) trait Register: Clone {
    fn apply(&mut self, u: &Matrix, targets: &[usize]) -> Result<()>;
    fn channel(&mut self, kraus: &[Matrix], targets: &[usize]) -> Result<()>;
    fn project(&self, qubit: usize, basis: Basis, outcome: bool) -> Result<(f64, Option<Self>)>;
    fn probabilities(&self) -> Vec<f64>;
    fn expectation(&self, obs: &PauliObservable) -> Result<f64>;
}

impl Register for PureState {
    fn apply(&mut self, u: &Matrix, targets: &[usize]) -> Result<()> {
        self.apply_gate(u, targets)
    }

    fn channel(&mut self, kraus: &[Matrix], targets: &[usize]) -> Result<()> {
        if kraus.len() == 1 {
            return self.apply_gate(&kraus[0], targets);
        }
        Err(QetError::Argument(
            "a pure-state register cannot absorb a noisy channel".into(),
        ))
    }

    fn project(&self, qubit: usize, basis: Basis, outcome: bool) -> Result<(f64, Option<Self>)> {
        PureState::project(self, qubit, basis, outcome)
    }

    fn probabilities(&self) -> Vec<f64> {
        PureState::probabilities(self)
    }

    fn expectation(&self, obs: &PauliObservable) -> Result<f64> {
        PureState::expectation(self, obs)
    }
}

impl Register for DensityOperator {
    fn apply(&mut self, u: &Matrix, targets: &[usize]) -> Result<()> {
        self.apply_gate(u, targets)
    }

    fn channel(&mut self, kraus: &[Matrix], targets: &[usize]) -> Result<()> {
        self.apply_channel(kraus, targets)
    }

    fn project(&self, qubit: usize, basis: Basis, outcome: bool) -> Result<(f64, Option<Self>)> {
        DensityOperator::project(self, qubit, basis, outcome)
    }

    fn probabilities(&self) -> Vec<f64> {
        DensityOperator::probabilities(self)
    }

    fn expectation(&self, obs: &PauliObservable) -> Result<f64> {
        DensityOperator::expectation(self, obs)
    }
}

/// One classical history of a run.
#[derive(Debug, Clone)]
pub(crate) struct Branch<R> {
    pub weight: f64,
    pub reg: R,
    pub bits: Vec<bool>,
}

struct NoiseKernels<'a> {
    spec: &'a NoiseSpec,
    one: Vec<Matrix>,
    two: Vec<Matrix>,
}

impl<'a> NoiseKernels<'a> {
    fn new(spec: &'a NoiseSpec) -> Result<Self> {
        Ok(Self {
            spec,
            one: depolarizing_kraus(spec.p1, 1)?,
            two: depolarizing_kraus(spec.p2, 2)?,
        })
    }

    fn after_gate<R: Register>(&self, reg: &mut R, targets: &[usize]) -> Result<()> {
        let kraus = if targets.len() == 1 { &self.one } else { &self.two };
        if kraus.len() > 1 {
            reg.channel(kraus, targets)?;
        }
        Ok(())
    }

    fn confusion(&self, qubit: usize) -> &Confusion {
        &self.spec.readout[qubit]
    }
}

/// Runs `plan` from `init`, enumerating every measurement branch exactly.
/// With noise, depolarizing follows each applied gate and readout confusion
/// also corrupts mid-circuit records.
pub(crate) fn run_plan<R: Register>(
    init: R,
    plan: &CircuitPlan,
    noise: Option<&NoiseSpec>,
) -> Result<Vec<Branch<R>>> {
    plan.validate(N_QUBITS)?;
    let kernels = noise.map(NoiseKernels::new).transpose()?;
    let mut branches = vec![Branch {
        weight: 1.0,
        reg: init,
        bits: vec![false; plan.n_cregs()],
    }];
    for item in &plan.items {
        match item {
            PlanItem::Gate { gate, targets } => {
                let u = gate.matrix();
                for b in &mut branches {
                    b.reg.apply(&u, targets)?;
                    if let Some(k) = &kernels {
                        k.after_gate(&mut b.reg, targets)?;
                    }
                }
            }
            PlanItem::Conditional {
                gate,
                targets,
                creg,
                value,
            } => {
                let u = gate.matrix();
                for b in branches.iter_mut().filter(|b| b.bits[*creg] == *value) {
                    b.reg.apply(&u, targets)?;
                    if let Some(k) = &kernels {
                        k.after_gate(&mut b.reg, targets)?;
                    }
                }
            }
            PlanItem::Measure { qubit, basis, creg } => {
                let mut next = Vec::with_capacity(branches.len() * 2);
                for b in &branches {
                    for outcome in [false, true] {
                        let (p, post) = b.reg.project(*qubit, *basis, outcome)?;
                        let Some(post) = post.filter(|_| p > PRUNE) else {
                            continue;
                        };
                        let records: Vec<(bool, f64)> = match &kernels {
                            Some(k) => {
                                let row = k.confusion(*qubit)[outcome as usize];
                                vec![(false, row[0]), (true, row[1])]
                            }
                            None => vec![(outcome, 1.0)],
                        };
                        for (record, w) in records {
                            let weight = b.weight * p * w;
                            if weight <= PRUNE {
                                continue;
                            }
                            let mut bits = b.bits.clone();
                            bits[*creg] = record;
                            next.push(Branch {
                                weight,
                                reg: post.clone(),
                                bits,
                            });
                        }
                    }
                }
                let total: f64 = next.iter().map(|b| b.weight).sum();
                for b in &mut next {
                    b.weight /= total;
                }
                branches = next;
            }
        }
    }
    Ok(branches)
}

fn check_plans(consts: &DerivedConstants, plans: &ProtocolPlans) -> Result<()> {
    if consts != plans.consts() {
        return Err(QetError::Argument(
            "plans were built for different constants".into(),
        ));
    }
    Ok(())
}

fn exact_step<R: Register>(
    init: &R,
    plan: &CircuitPlan,
    noise: Option<&NoiseSpec>,
    obs: &[&PauliObservable; 3],
) -> Result<StepReport> {
    let branches = run_plan(init.clone(), plan, noise)?;
    let mut e = [0.0; 3];
    for b in &branches {
        for (acc, o) in e.iter_mut().zip(obs) {
            *acc += b.weight * b.reg.expectation(o)?;
        }
    }
    Ok(StepReport::exact(e[0], e[1], e[2]))
}

/// Runs the three steps. Each step is a fresh execution of the cumulative
/// circuit, so the step energies are independent samples.
pub fn execute(
    consts: &DerivedConstants,
    plans: &ProtocolPlans,
    mode: &ExecutionMode,
) -> Result<RunReport> {
    check_plans(consts, plans)?;
    mode.validate()?;
    let obs = build_observables(consts);
    let blocks = [&obs.h_a, &obs.h_vb, &obs.h_c];
    let mut steps = [StepReport::default(); 3];
    match mode {
        ExecutionMode::Exact => {
            let init = PureState::new_zero(N_QUBITS)?;
            for (k, s) in steps.iter_mut().enumerate() {
                *s = exact_step(&init, &plans.cumulative(k + 1), None, &blocks)?;
            }
        }
        ExecutionMode::Sampled { shots, seed } => {
            let init = PureState::new_zero(N_QUBITS)?;
            let mut rng = RngStream::new(*seed);
            for (k, s) in steps.iter_mut().enumerate() {
                let branches = run_plan(init.clone(), &plans.cumulative(k + 1), None)?;
                *s = sampled_step(consts, &branches, None, *shots, &mut rng)?;
            }
        }
        ExecutionMode::Noisy { noise, shots, seed } => {
            let init = DensityOperator::from_pure(&PureState::new_zero(N_QUBITS)?);
            let mut rng = RngStream::new(*seed);
            for (k, s) in steps.iter_mut().enumerate() {
                let branches = run_plan(init.clone(), &plans.cumulative(k + 1), Some(noise))?;
                *s = sampled_step(consts, &branches, Some(noise), *shots, &mut rng)?;
            }
        }
    }
    Ok(RunReport::from_steps(steps))
}

/// Exact energies of the noisy protocol (density backend, no shot noise).
pub fn noisy_expectations(
    consts: &DerivedConstants,
    plans: &ProtocolPlans,
    noise: &NoiseSpec,
) -> Result<RunReport> {
    check_plans(consts, plans)?;
    noise.validate(N_QUBITS)?;
    let obs = build_observables(consts);
    let blocks = [&obs.h_a, &obs.h_vb, &obs.h_c];
    let init = DensityOperator::from_pure(&PureState::new_zero(N_QUBITS)?);
    let mut steps = [StepReport::default(); 3];
    for (k, s) in steps.iter_mut().enumerate() {
        *s = exact_step(&init, &plans.cumulative(k + 1), Some(noise), &blocks)?;
    }
    Ok(RunReport::from_steps(steps))
}

/// Readout distribution of each branch after rotating the requested qubits
/// into the X basis (noise-free), with readout confusion if given.
fn branch_distributions<R: Register>(
    branches: &[Branch<R>],
    x_qubits: &[usize],
    noise: Option<&NoiseSpec>,
) -> Result<Vec<Vec<f64>>> {
    let h = gates::hadamard();
    branches
        .iter()
        .map(|b| {
            let mut reg = b.reg.clone();
            for &q in x_qubits {
                reg.apply(&h, &[q])?;
            }
            let probs = reg.probabilities();
            match noise {
                Some(n) => apply_readout_error(&probs, &n.readout),
                None => Ok(probs),
            }
        })
        .collect()
}

/// Per-shot sampling: draw a branch by weight, then a bitstring from that
/// branch's distribution. Returns the bitstring histogram and the count of
/// Alice records equal to 1.
fn sample_shots<R>(
    branches: &[Branch<R>],
    dists: &[Vec<f64>],
    shots: u64,
    rng: &mut RngStream,
) -> Result<(Vec<u64>, u64)> {
    let invalid = |e| QetError::Validity(format!("invalid distribution: {e}"));
    let pick_branch =
        WeightedIndex::new(branches.iter().map(|b| b.weight)).map_err(invalid)?;
    let per_branch = dists
        .iter()
        .map(|d| WeightedIndex::new(d).map_err(invalid))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; dists[0].len()];
    let mut alice_ones = 0;
    for _ in 0..shots {
        let b = pick_branch.sample(rng);
        counts[per_branch[b].sample(rng)] += 1;
        if branches[b].bits.get(ALICE_BIT).copied().unwrap_or(false) {
            alice_ones += 1;
        }
    }
    Ok((counts, alice_ones))
}

/// Mean of `∏_{q∈qubits} (−1)^{bit_q}` over a histogram.
fn parity_mean(counts: &[u64], qubits: &[usize]) -> f64 {
    let total: u64 = counts.iter().sum();
    let signed: i64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let odd = qubits.iter().filter(|&&q| bit_of(i, q, N_QUBITS)).count() % 2 == 1;
            if odd {
                -(c as i64)
            } else {
                c as i64
            }
        })
        .sum();
    signed as f64 / total as f64
}

fn standard_error(mean: f64, shots: u64) -> f64 {
    ((1.0 - mean * mean).max(0.0) / shots as f64).sqrt()
}

/// Three shot batches per step: all-Z for `Z_A, Z_B, Z_C`, A alone rotated
/// to X, then A and B rotated to X for `X_A X_B`. The `X_A` batch does not
/// enter the energies.
fn sampled_step<R: Register>(
    consts: &DerivedConstants,
    branches: &[Branch<R>],
    noise: Option<&NoiseSpec>,
    shots: u64,
    rng: &mut RngStream,
) -> Result<StepReport> {
    let z_dists = branch_distributions(branches, &[], noise)?;
    let (z_counts, _) = sample_shots(branches, &z_dists, shots, &mut rng.fork(0))?;
    let xa_dists = branch_distributions(branches, &[QUBIT_A], noise)?;
    sample_shots(branches, &xa_dists, shots, &mut rng.fork(1))?;
    let x_dists = branch_distributions(branches, &[QUBIT_A, QUBIT_B], noise)?;
    let (x_counts, _) = sample_shots(branches, &x_dists, shots, &mut rng.fork(2))?;

    let z_a = parity_mean(&z_counts, &[QUBIT_A]);
    let z_b = parity_mean(&z_counts, &[QUBIT_B]);
    let z_c = parity_mean(&z_counts, &[QUBIT_C]);
    let xx = parity_mean(&x_counts, &[QUBIT_A, QUBIT_B]);

    let p = &consts.params;
    let two_kappa = 2.0 * p.kappa;
    let se_xx = two_kappa * standard_error(xx, shots);
    let se_zb = p.h_b * standard_error(z_b, shots);
    Ok(StepReport {
        e_a: -p.h_a * z_a + consts.f_a,
        e_vb: two_kappa * xx - p.h_b * z_b + consts.f_v + consts.f_b,
        e_c: -consts.h_c * z_c + consts.h_c,
        se_a: p.h_a * standard_error(z_a, shots),
        se_vb: se_xx.hypot(se_zb),
        se_c: consts.h_c * standard_error(z_c, shots),
    })
}

/// Samples Alice's recorded outcome over `shots` runs of steps 1 and 2.
/// Returns `[count of 0 (+), count of 1 (−)]`.
pub fn alice_outcome_counts(
    consts: &DerivedConstants,
    variant: Variant,
    shots: u64,
    seed: u64,
) -> Result<[u64; 2]> {
    let plans = ProtocolPlans::new(consts, variant);
    let branches = run_plan(PureState::new_zero(N_QUBITS)?, &plans.cumulative(2), None)?;
    let dists = branch_distributions(&branches, &[], None)?;
    let (_, ones) = sample_shots(&branches, &dists, shots, &mut RngStream::new(seed))?;
    Ok([shots - ones, ones])
}
