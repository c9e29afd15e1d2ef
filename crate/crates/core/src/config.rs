//! Scenario configuration: TOML schema, validation, derived quantities and
//! deterministic RNG stream splitting.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PlacementStrategy;
use crate::rl::{MembershipParams, TdHyper};
use crate::storage::{Hierarchy, TierSpec};
use crate::workload::{
    InjectionSchedule, PopulationSpec, RequestPattern, WorkloadParams,
};

/// The six selectable migration policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "rule1")]
    Rule1,
    #[serde(rename = "rule2")]
    Rule2,
    #[serde(rename = "rule3")]
    Rule3,
    #[serde(rename = "rl-ft")]
    RlFt,
    #[serde(rename = "rl-dt")]
    RlDt,
    #[serde(rename = "rl-st")]
    RlSt,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Rule1,
        PolicyKind::Rule2,
        PolicyKind::Rule3,
        PolicyKind::RlFt,
        PolicyKind::RlDt,
        PolicyKind::RlSt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Rule1 => "rule1",
            PolicyKind::Rule2 => "rule2",
            PolicyKind::Rule3 => "rule3",
            PolicyKind::RlFt => "rl-ft",
            PolicyKind::RlDt => "rl-dt",
            PolicyKind::RlSt => "rl-st",
        }
    }

    pub fn is_rl(self) -> bool {
        matches!(self, PolicyKind::RlFt | PolicyKind::RlDt | PolicyKind::RlSt)
    }

    /// Whether temperature dynamics scale the hot-flip chance by file size.
    pub fn size_sensitive(self) -> bool {
        matches!(self, PolicyKind::Rule3)
    }

    pub fn placement(self) -> PlacementStrategy {
        match self {
            PolicyKind::Rule1 | PolicyKind::Rule3 | PolicyKind::RlFt => {
                PlacementStrategy::FastestFirst80
            }
            PolicyKind::Rule2 | PolicyKind::RlSt => PlacementStrategy::SlowestFirst,
            PolicyKind::RlDt => PlacementStrategy::distributed_default(),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown policy '{s}' (expected one of rule1, rule2, rule3, rl-ft, rl-dt, rl-st)"
                ))
            })
    }
}

/// Promotion trigger used by the rule-based policies (and the cold-start
/// fallback of the learned ones).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerKind {
    /// Hotter than the destination tier's mean temperature.
    DestMean,
    /// At or above the workload's hot threshold.
    FixedThreshold,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSection {
    pub pattern: RequestPattern,
    pub hot_rate: f64,
    pub cold_rate: f64,
    pub hot_threshold: f64,
    pub p_become_hot: f64,
    pub cooldown_window: u64,
    pub decay_step: f64,
    pub uniform_k: usize,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        let p = WorkloadParams::default();
        Self {
            pattern: RequestPattern::Poisson,
            hot_rate: p.hot_rate,
            cold_rate: p.cold_rate,
            hot_threshold: p.hot_threshold,
            p_become_hot: p.p_become_hot,
            cooldown_window: p.cooldown_window,
            decay_step: p.decay_step,
            uniform_k: p.uniform_k,
        }
    }
}

impl WorkloadSection {
    pub fn params(&self) -> WorkloadParams {
        WorkloadParams {
            hot_rate: self.hot_rate,
            cold_rate: self.cold_rate,
            hot_threshold: self.hot_threshold,
            p_become_hot: self.p_become_hot,
            cooldown_window: self.cooldown_window,
            decay_step: self.decay_step,
            uniform_k: self.uniform_k,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub upgrade_trigger: TriggerKind,
    /// On the first timestep a learned policy falls back to the rule-based
    /// trigger, since all-zero cost estimates never fire the comparison.
    pub cold_start_fallback: bool,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Rule1,
            upgrade_trigger: TriggerKind::DestMean,
            cold_start_fallback: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Inter-update interval in time units; one timestep by default.
    pub tau: f64,
    pub a: [f64; 3],
    pub b: [f64; 3],
    /// Override for the s2 normalization divisor; derived from the scenario
    /// when absent.
    pub scale_2: Option<f64>,
    /// Override for the s3 normalization divisor; derived from the scenario
    /// when absent.
    pub scale_3: Option<f64>,
}

impl Default for RlSection {
    fn default() -> Self {
        let h = TdHyper::default();
        let m = MembershipParams::default();
        Self {
            lambda: h.lambda,
            beta: h.beta,
            alpha: h.alpha,
            tau: 1.0,
            a: m.a,
            b: m.b,
            scale_2: None,
            scale_3: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Base directory for run artifacts; overridable by CLI flag or env.
    pub dir: Option<PathBuf>,
    /// Heatmap snapshot period; first and last timesteps always snapshot.
    /// Zero disables periodic snapshots.
    pub heatmap_every: u64,
    /// Also export per-timestep agent parameters as CSV (learned policies).
    pub agent_params: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            heatmap_every: 100,
            agent_params: false,
        }
    }
}

/// A complete, self-contained description of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub timesteps: u64,
    #[serde(default)]
    pub seed: u64,
    /// Slowest tier first; capacities strictly decreasing, speeds strictly
    /// increasing.
    pub tiers: Vec<TierSpec>,
    pub population: PopulationSpec,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub rl: RlSection,
    #[serde(default)]
    pub injection: Option<InjectionSchedule>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiers.len() != 3 {
            return Err(Error::Config(format!(
                "tiers: exactly three tiers are supported, got {}",
                self.tiers.len()
            )));
        }
        Hierarchy::new(self.tiers.clone())?;
        self.population.validate()?;
        self.workload.params().validate()?;
        if self.workload.pattern == RequestPattern::Uniform
            && self.workload.uniform_k > self.population.count
        {
            return Err(Error::Config(format!(
                "uniform_k ({}) exceeds the initial population ({})",
                self.workload.uniform_k, self.population.count
            )));
        }
        let hyper = self.hyper();
        hyper.validate()?;
        if !(hyper.alpha > 0.0) {
            return Err(Error::Config(format!(
                "rl.alpha must be positive, got {}",
                hyper.alpha
            )));
        }
        if !(self.rl.tau > 0.0 && self.rl.tau.is_finite()) {
            return Err(Error::Config(format!(
                "rl.tau must be positive, got {}",
                self.rl.tau
            )));
        }
        self.membership_params().validate()?;
        if let Some(injection) = &self.injection {
            injection.validate()?;
        }
        self.policy.kind.placement().validate()?;
        Ok(())
    }

    pub fn hierarchy(&self) -> Result<Hierarchy> {
        Hierarchy::new(self.tiers.clone())
    }

    pub fn workload_params(&self) -> WorkloadParams {
        self.workload.params()
    }

    pub fn hyper(&self) -> TdHyper {
        TdHyper {
            lambda: self.rl.lambda,
            beta: self.rl.beta,
            alpha: self.rl.alpha,
        }
    }

    /// Mean of the population's size distribution.
    pub fn expected_mean_file_size(&self) -> f64 {
        self.population.sizes.mean()
    }

    /// Expected requests per timestep given the initial temperature mix.
    pub fn expected_requests_per_timestep(&self) -> f64 {
        match self.workload.pattern {
            RequestPattern::Uniform => self.workload.uniform_k as f64,
            RequestPattern::Poisson => {
                let lo = self.population.temp_lo;
                let hi = self.population.temp_hi;
                let thr = self.workload.hot_threshold;
                let hot_fraction = if hi <= lo {
                    if lo >= thr { 1.0 } else { 0.0 }
                } else {
                    ((hi - thr) / (hi - lo)).clamp(0.0, 1.0)
                };
                self.population.count as f64
                    * (hot_fraction * self.workload.hot_rate
                        + (1.0 - hot_fraction) * self.workload.cold_rate)
            }
        }
    }

    /// Membership shapes with normalization divisors resolved: s1 is
    /// already a mean temperature in [0,1]; s2 is scaled by the weighted
    /// temperature a typical hot file contributes; s3 by the expected
    /// total service time enqueued per timestep at an average-speed tier.
    pub fn membership_params(&self) -> MembershipParams {
        let mean_size = self.expected_mean_file_size();
        let scale_2 = self
            .rl
            .scale_2
            .unwrap_or(self.workload.hot_threshold * mean_size)
            .max(f64::MIN_POSITIVE);
        let mean_speed =
            self.tiers.iter().map(|t| t.speed).sum::<f64>() / self.tiers.len().max(1) as f64;
        let scale_3 = self
            .rl
            .scale_3
            .unwrap_or(self.expected_requests_per_timestep() * mean_size / mean_speed)
            .max(f64::MIN_POSITIVE);
        MembershipParams {
            a: self.rl.a,
            b: self.rl.b,
            scale: [1.0, scale_2, scale_3],
        }
    }

    pub fn with_policy(mut self, kind: PolicyKind) -> Self {
        self.policy.kind = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Independent RNG streams split from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Population = 0,
    Workload = 1,
    Dynamics = 2,
    Injection = 3,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(run_seed: u64, stream: RngStream) -> u64 {
    splitmix64(run_seed.wrapping_add(GOLDEN.wrapping_mul(stream as u64 + 1)))
}

pub fn stream_rng(run_seed: u64, stream: RngStream) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(stream_seed(run_seed, stream))
}

/// Seed of repetition `rep` of an experiment based at `base_seed`.
pub fn rep_seed(base_seed: u64, rep: u64) -> u64 {
    base_seed.wrapping_add(rep)
}
