//! Run configuration: an optional TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use qet_core::noise::{symmetric_confusion, Confusion, NoiseSpec};
use qet_core::optimize::{SweepSpec, DEFAULT_BRACKET};
use qet_core::protocol::{ExecutionMode, Variant, N_QUBITS};
use qet_core::QetParams;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Dynamic,
    Deferred,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Dynamic => Variant::Dynamic,
            VariantArg::Deferred => Variant::Deferred,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
pub enum Target {
    #[serde(alias = "a")]
    #[value(alias = "a")]
    A,
    #[serde(alias = "b")]
    #[value(alias = "b")]
    B,
}

impl Target {
    pub fn qubit(self) -> usize {
        match self {
            Target::A => 0,
            Target::B => 1,
        }
    }
}

fn default_h_a() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSection {
    #[serde(rename = "h_A", default = "default_h_a")]
    h_a: f64,
    #[serde(rename = "h_B")]
    h_b: f64,
    kappa: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    #[serde(default)]
    p1: f64,
    #[serde(default)]
    p2: f64,
    /// Symmetric flip probability applied to every qubit.
    readout_flip: Option<f64>,
    /// One row-stochastic matrix per qubit; overrides `readout_flip`.
    readout: Option<Vec<Confusion>>,
}

impl NoiseSection {
    fn into_spec(self) -> NoiseSpec {
        let readout = match (self.readout, self.readout_flip) {
            (Some(r), _) => r,
            (None, Some(f)) => vec![symmetric_confusion(f); N_QUBITS],
            (None, None) => NoiseSpec::none(N_QUBITS).readout,
        };
        NoiseSpec {
            p1: self.p1,
            p2: self.p2,
            readout,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlpConfig {
    pub target: Target,
    pub grid_n: usize,
    pub refine_iters: usize,
    /// Random starts for the Kraus-pair search; 0 disables it.
    pub kraus_starts: usize,
}

impl Default for SlpConfig {
    fn default() -> Self {
        Self {
            target: Target::B,
            grid_n: 32,
            refine_iters: 200,
            kraus_starts: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    kappa_min: Option<f64>,
    kappa_max: Option<f64>,
    kappa_steps: Option<usize>,
    #[serde(rename = "h_B_values")]
    h_b_values: Option<Vec<f64>>,
    #[serde(rename = "h_A")]
    h_a: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximizeSection {
    #[serde(rename = "h_A")]
    h_a: Option<f64>,
    #[serde(rename = "h_B")]
    h_b: Option<f64>,
    bracket: Option<(f64, f64)>,
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeConfig {
    pub h_a: f64,
    pub h_b: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    shots: Option<u64>,
    mode: Option<Mode>,
    variant: Option<VariantArg>,
    output: Option<OutputFormat>,
    params: Option<ParamsSection>,
    noise: Option<NoiseSection>,
    slp: Option<SlpConfig>,
    sweep: Option<SweepSection>,
    maximize: Option<MaximizeSection>,
}

/// Values given on the command line; `None` falls back to the file, then
/// to defaults.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub mode: Option<Mode>,
    pub variant: Option<VariantArg>,
    pub output: Option<OutputFormat>,
    pub h_a: Option<f64>,
    pub h_b: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: QetParams,
    pub mode: Mode,
    pub variant: Variant,
    /// Explicit noise section; noisy mode without one uses
    /// [`NoiseSpec::illustrative`].
    pub noise: Option<NoiseSpec>,
    pub seed: u64,
    pub shots: u64,
    /// `None` means the command's own default.
    pub output: Option<OutputFormat>,
    pub slp: SlpConfig,
    pub sweep: SweepSpec,
    pub sweep_out: Option<PathBuf>,
    pub maximize: MaximizeConfig,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SHOTS: u64 = 100_000;

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let Some(p) = path else {
            return Self::resolve(FileConfig::default(), ov);
        };
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
        Self::from_toml(&text, ov).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str, ov: &Overrides) -> Result<Self, CliError> {
        let file = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::resolve(file, ov)
    }

    fn resolve(file: FileConfig, ov: &Overrides) -> Result<Self, CliError> {
        let paper = QetParams::paper();
        let (fa, fb, fk) = match &file.params {
            Some(p) => (p.h_a, p.h_b, p.kappa),
            None => (paper.h_a, paper.h_b, paper.kappa),
        };
        let params = QetParams::new(
            ov.h_a.unwrap_or(fa),
            ov.h_b.unwrap_or(fb),
            ov.kappa.unwrap_or(fk),
        )?;

        let noise = file.noise.map(NoiseSection::into_spec);
        if let Some(n) = &noise {
            n.validate(N_QUBITS)?;
        }
        let shots = ov.shots.or(file.shots).unwrap_or(DEFAULT_SHOTS);
        if shots == 0 {
            return Err(CliError::Config("shots must be at least 1".into()));
        }

        let slp = file.slp.unwrap_or_default();
        if slp.grid_n < 8 {
            return Err(CliError::Config(format!("slp.grid_n = {} below 8", slp.grid_n)));
        }

        let defaults = SweepSpec::default();
        let (sweep, sweep_out) = match file.sweep {
            Some(s) => (
                SweepSpec {
                    kappa_min: s.kappa_min.unwrap_or(defaults.kappa_min),
                    kappa_max: s.kappa_max.unwrap_or(defaults.kappa_max),
                    kappa_steps: s.kappa_steps.unwrap_or(defaults.kappa_steps),
                    h_b_values: s.h_b_values.unwrap_or(defaults.h_b_values),
                    h_a: s.h_a.unwrap_or(params.h_a),
                },
                s.out,
            ),
            None => (
                SweepSpec {
                    h_a: params.h_a,
                    ..defaults
                },
                None,
            ),
        };
        sweep.validate()?;

        let m = file.maximize;
        let maximize = MaximizeConfig {
            h_a: m.as_ref().and_then(|m| m.h_a).unwrap_or(params.h_a),
            h_b: m.as_ref().and_then(|m| m.h_b).unwrap_or(params.h_b),
            bracket: m.as_ref().and_then(|m| m.bracket).unwrap_or(DEFAULT_BRACKET),
            tol: m.as_ref().and_then(|m| m.tol).unwrap_or(1e-6),
        };

        Ok(Self {
            params,
            mode: ov.mode.or(file.mode).unwrap_or(Mode::Exact),
            variant: ov.variant.or(file.variant).unwrap_or(VariantArg::Dynamic).into(),
            noise,
            seed: ov.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            shots,
            output: ov.output.or(file.output),
            slp,
            sweep,
            sweep_out,
            maximize,
        })
    }

    pub fn execution_mode(&self) -> ExecutionMode {
        match self.mode {
            Mode::Exact => ExecutionMode::Exact,
            Mode::Sampled => ExecutionMode::Sampled {
                shots: self.shots,
                seed: self.seed,
            },
            Mode::Noisy => ExecutionMode::Noisy {
                noise: self.noise.clone().unwrap_or_else(NoiseSpec::illustrative),
                shots: self.shots,
                seed: self.seed,
            },
        }
    }
}
