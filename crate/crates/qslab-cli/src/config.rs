//! Config schema: one JSON document per run, dispatched on its `command`
//! field. Field names and defaults are documented in the repository README.

use anyhow::{bail, Result};
use num_complex::Complex64 as C64;
use qslab::states::kron_vec;
use qslab::{CVector, PureState};
use serde::{Deserialize, Serialize};

/// Complex literal `[re, im]`.
pub type Cx = [f64; 2];

pub fn complex(c: Cx) -> C64 {
    C64::new(c[0], c[1])
}

/// A pure state in a config file: a basis/diagonal token or an explicit
/// amplitude list.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum StateLiteral {
    /// One of "0", "1", "+", "-".
    Token(String),
    /// Normalized amplitudes, `[[re, im], ...]`.
    Amplitudes(Vec<Cx>),
}

impl StateLiteral {
    /// Parses the literal; `at` names the config position for error messages.
    pub fn to_state(&self, at: &str) -> Result<PureState> {
        match self {
            StateLiteral::Token(tok) => PureState::from_token(tok)
                .map_err(|e| anyhow::anyhow!("{at}: bad state token {tok:?}: {e}")),
            StateLiteral::Amplitudes(amps) => {
                if amps.len() < 2 {
                    bail!("{at}: a state needs at least two amplitudes");
                }
                let v = CVector::from_vec(amps.iter().map(|&c| complex(c)).collect());
                let norm = v.norm();
                if !norm.is_finite() || (norm - 1.0).abs() > 1e-8 {
                    bail!("{at}: amplitudes must be normalized within 1e-8, got norm {norm}");
                }
                PureState::from_vector_exact(v).map_err(|e| anyhow::anyhow!("{at}: {e}"))
            }
        }
    }
}

/// A reference state: a token, explicit amplitudes, or a tensor product of
/// factor literals (`["0", "+", "0"]`).
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ReferenceLiteral {
    Token(String),
    Amplitudes(Vec<Cx>),
    Factors(Vec<StateLiteral>),
}

impl ReferenceLiteral {
    pub fn to_state(&self, at: &str) -> Result<PureState> {
        match self {
            ReferenceLiteral::Token(t) => StateLiteral::Token(t.clone()).to_state(at),
            ReferenceLiteral::Amplitudes(a) => StateLiteral::Amplitudes(a.clone()).to_state(at),
            ReferenceLiteral::Factors(factors) => {
                if factors.is_empty() {
                    bail!("{at}: a tensor product needs at least one factor");
                }
                let mut acc: Option<CVector> = None;
                for (idx, f) in factors.iter().enumerate() {
                    let s = f.to_state(&format!("{at}[{idx}]"))?;
                    let amps = s.amplitudes().clone_owned();
                    acc = Some(match acc {
                        None => amps,
                        Some(prev) => kron_vec(&prev, &amps),
                    });
                }
                PureState::from_vector_exact(acc.expect("nonempty product"))
                    .map_err(|e| anyhow::anyhow!("{at}: {e}"))
            }
        }
    }
}

/// Where and how results are written. Without it, results go to stdout.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: String,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn tol_probability() -> f64 {
    1e-9
}
fn tol_residual() -> f64 {
    1e-9
}
fn tol_spectral() -> f64 {
    1e-8
}
fn tol_slack() -> f64 {
    1e-9
}
fn tol_witness_zero() -> f64 {
    1e-12
}

/// Tolerance classes attached to reported numbers. Any subset may be
/// overridden in the config; `--tol` overrides all of them at once.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Probability agreement (designed vs simulated).
    #[serde(default = "tol_probability")]
    pub probability: f64,
    /// Structural residuals: Gram defects, unitarity, fidelity defects.
    #[serde(default = "tol_residual")]
    pub residual: f64,
    /// Spectral comparisons (closed-form vs eigendecomposition).
    #[serde(default = "tol_spectral")]
    pub spectral: f64,
    /// Bound-slack floor.
    #[serde(default = "tol_slack")]
    pub slack: f64,
    /// Threshold below which a witness counts as exactly zero.
    #[serde(default = "tol_witness_zero")]
    pub witness_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            probability: tol_probability(),
            residual: tol_residual(),
            spectral: tol_spectral(),
            slack: tol_slack(),
            witness_zero: tol_witness_zero(),
        }
    }
}

impl Tolerances {
    pub fn override_all(&mut self, t: f64) {
        self.probability = t;
        self.residual = t;
        self.spectral = t;
        self.slack = t;
        self.witness_zero = t;
    }
}

fn default_copies() -> usize {
    1
}

/// Efficiency policy literal for design commands.
#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyLiteral {
    /// Common scale maximized under the feasibility bound, unit weights.
    #[default]
    UniformScale,
    /// As `uniform_scale` with per-outcome, per-state weights.
    UniformWeights { weights: Vec<Vec<f64>> },
    /// Caller-supplied efficiency diagonals `[outcome][state]`.
    Explicit { diagonals: Vec<Vec<f64>> },
}

impl PolicyLiteral {
    pub fn to_policy(&self) -> qslab::set_transform::EfficiencyPolicy {
        use qslab::set_transform::EfficiencyPolicy as P;
        match self {
            PolicyLiteral::UniformScale => P::UniformScale { weights: None },
            PolicyLiteral::UniformWeights { weights } => P::UniformScale {
                weights: Some(weights.clone()),
            },
            PolicyLiteral::Explicit { diagonals } => P::Explicit {
                diagonals: diagonals.clone(),
            },
        }
    }
}

/// Random-batch settings for `design-clone`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DesignTrials {
    pub count: usize,
    #[serde(default = "three")]
    pub max_states: usize,
    #[serde(default = "four")]
    pub max_dim: usize,
    #[serde(default = "two")]
    pub max_copies: usize,
    #[serde(default = "three")]
    pub max_outcomes: usize,
    #[serde(default = "three")]
    pub max_target_copies: usize,
}

fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn four() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCloneConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Explicit input states; exclusive with `random_trials`.
    #[serde(default)]
    pub states: Option<Vec<StateLiteral>>,
    #[serde(default = "default_copies")]
    pub copies: usize,
    /// Copy counts of the success outcomes, strictly increasing.
    #[serde(default)]
    pub target_copies: Vec<usize>,
    #[serde(default)]
    pub policy: PolicyLiteral,
    /// Write the assembled unitary to this path in the binary dump format.
    #[serde(default)]
    pub dump_unitary: Option<String>,
    #[serde(default)]
    pub random_trials: Option<DesignTrials>,
}

/// Superposition coefficient tables, or the balanced default.
#[derive(Debug, Clone, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoeffLiteral {
    #[default]
    Uniform,
    Tables { alpha: Vec<Vec<Cx>>, beta: Vec<Vec<Cx>> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SuperposeFiniteConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    pub states: Vec<StateLiteral>,
    #[serde(default = "default_copies")]
    pub copies: usize,
    #[serde(default = "default_outcomes")]
    pub outcomes: Vec<usize>,
    #[serde(default)]
    pub coefficients: CoeffLiteral,
    /// Ordered pair to simulate.
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
    /// Optional quadruple `(i1, i2, j1, j2)` for the average-efficiency bound.
    #[serde(default)]
    pub quad: Option<[usize; 4]>,
}

fn default_outcomes() -> Vec<usize> {
    vec![1]
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapTrials {
    pub count: usize,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "two")]
    pub copies: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RescaledSpec {
    pub alpha: Cx,
    pub beta: Cx,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SuperposeOverlapConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Branch states; exclusive with `random_trials`.
    #[serde(default)]
    pub states: Option<Vec<StateLiteral>>,
    #[serde(default = "two")]
    pub copies: usize,
    #[serde(default)]
    pub reference: Option<ReferenceLiteral>,
    /// Branch coefficients; balanced when omitted.
    #[serde(default)]
    pub mu: Option<Vec<Cx>>,
    /// Optional output permutations, one image list per branch.
    #[serde(default)]
    pub taus: Option<Vec<Vec<usize>>>,
    /// Also run the rescaled two-branch map with these coefficients
    /// (requires two states and two copies).
    #[serde(default)]
    pub rescaled: Option<RescaledSpec>,
    #[serde(default)]
    pub random_trials: Option<OverlapTrials>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaSpec {
    pub sigma0: StateLiteral,
    pub sigma1: StateLiteral,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub p0: f64,
    pub p0_prime: f64,
    #[serde(default)]
    pub branch_phase: f64,
    pub alpha: Cx,
    pub beta: Cx,
    #[serde(default)]
    pub ancilla: Option<AncillaSpec>,
}

impl CandidateSpec {
    pub fn to_candidate(&self, at: &str) -> Result<qslab::nogo::EncodingCandidate> {
        use qslab::nogo::EncodingCandidate;
        let built = match &self.ancilla {
            None => EncodingCandidate::new(
                self.p0,
                self.p0_prime,
                self.branch_phase,
                complex(self.alpha),
                complex(self.beta),
            ),
            Some(anc) => EncodingCandidate::with_ancilla(
                self.p0,
                self.p0_prime,
                self.branch_phase,
                complex(self.alpha),
                complex(self.beta),
                anc.sigma0.to_state(&format!("{at}.ancilla.sigma0"))?,
                anc.sigma1.to_state(&format!("{at}.ancilla.sigma1"))?,
            ),
        };
        built.map_err(|e| anyhow::anyhow!("{at}: {e}"))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GapSpec {
    pub samples: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub n: usize,
    pub alpha: Cx,
    pub beta: Cx,
    pub psi: StateLiteral,
    pub big_phi: ReferenceLiteral,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
}

fn default_grid() -> usize {
    720
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_grid_samples")]
    pub samples: usize,
}

fn default_resolution() -> usize {
    20
}
fn default_grid_samples() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NogoConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Basis behaviour of the hypothetical machine; required by
    /// `consistency`, `gap` and `grid`.
    #[serde(default)]
    pub candidate: Option<CandidateSpec>,
    /// Enumerate the inputs consistent with the candidate.
    #[serde(default)]
    pub consistency: bool,
    /// Residual statistics over Haar-random inputs.
    #[serde(default)]
    pub gap: Option<GapSpec>,
    /// Phase-covariance scan for a superposition target.
    #[serde(default)]
    pub phase: Option<PhaseSpec>,
    /// Gap means over a (p0, p0_prime, branch_phase) parameter grid using the
    /// candidate's coefficients.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsTrials {
    pub count: usize,
    #[serde(default = "three")]
    pub max_states: usize,
    #[serde(default = "three")]
    pub max_dim: usize,
    #[serde(default = "two")]
    pub max_copies: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Evaluate the frozen constructed-infeasible probability tables.
    #[serde(default)]
    pub witnesses: bool,
    /// Evaluate the bounds on randomized feasible designs.
    #[serde(default)]
    pub random_trials: Option<BoundsTrials>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestConfig {
    pub command: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
    /// Reduced case counts for quick smoke runs.
    #[serde(default)]
    pub quick: bool,
}
