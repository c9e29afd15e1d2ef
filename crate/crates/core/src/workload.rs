//! Request-trace generation, temperature dynamics and dataset growth.
//!
//! All randomness flows through caller-supplied RNG streams so that a run is
//! reproducible from its seed alone. Trace entries are ordered by file id
//! and arrival offsets are sorted, which fixes every downstream iteration
//! order.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::{FileId, FileRecord, Hierarchy};

/// Arrival-process and temperature-dynamics parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    /// Poisson rate for files at or above the hot threshold.
    pub hot_rate: f64,
    /// Poisson rate for files below the hot threshold.
    pub cold_rate: f64,
    /// Temperature boundary separating hot from cold.
    pub hot_threshold: f64,
    /// Chance a requested cold file turns hot.
    pub p_become_hot: f64,
    /// Idle timesteps before temperature decay kicks in.
    pub cooldown_window: u64,
    /// Temperature lost per decaying timestep.
    pub decay_step: f64,
    /// Files drawn per timestep in uniform mode.
    pub uniform_k: usize,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            hot_rate: 0.5,
            cold_rate: 0.01,
            hot_threshold: 0.5,
            p_become_hot: 0.3,
            cooldown_window: 10,
            decay_step: 0.1,
            uniform_k: 0,
        }
    }
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hot_rate", self.hot_rate), ("cold_rate", self.cold_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.hot_threshold) {
            return Err(Error::Config(format!(
                "hot_threshold must lie in [0, 1], got {}",
                self.hot_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.p_become_hot) {
            return Err(Error::Config(format!(
                "p_become_hot must lie in [0, 1], got {}",
                self.p_become_hot
            )));
        }
        if self.cooldown_window == 0 {
            return Err(Error::Config("cooldown_window must be >= 1".into()));
        }
        if !(self.decay_step > 0.0 && self.decay_step <= 1.0) {
            return Err(Error::Config(format!(
                "decay_step must lie in (0, 1], got {}",
                self.decay_step
            )));
        }
        Ok(())
    }
}

/// Which arrival process drives the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestPattern {
    Poisson,
    Uniform,
}

/// Requests against one file within a timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestEntry {
    pub file_id: FileId,
    /// Arrival offsets within the timestep, each in `[0, 1)`, sorted.
    pub offsets: Vec<f64>,
}

/// All requests of one timestep, ordered by file id.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestTrace {
    pub timestep: u64,
    pub entries: Vec<RequestEntry>,
}

impl RequestTrace {
    pub fn total_requests(&self) -> usize {
        self.entries.iter().map(|e| e.offsets.len()).sum()
    }
}

fn sorted_offsets(count: u64, rng: &mut impl Rng) -> Vec<f64> {
    let mut offsets: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..1.0)).collect();
    offsets.sort_by(f64::total_cmp);
    offsets
}

/// Per-file Poisson arrivals: the rate depends on whether the file is
/// currently hot. Files with a zero draw are omitted.
pub fn gen_poisson_requests(
    hier: &Hierarchy,
    params: &WorkloadParams,
    timestep: u64,
    rng: &mut impl Rng,
) -> RequestTrace {
    let hot = (params.hot_rate > 0.0).then(|| Poisson::new(params.hot_rate).unwrap());
    let cold = (params.cold_rate > 0.0).then(|| Poisson::new(params.cold_rate).unwrap());
    let mut entries = Vec::new();
    for rec in hier.records() {
        let dist = if rec.temperature >= params.hot_threshold {
            hot.as_ref()
        } else {
            cold.as_ref()
        };
        let count = match dist {
            Some(d) => d.sample(rng) as u64,
            None => 0,
        };
        if count > 0 {
            entries.push(RequestEntry {
                file_id: rec.file_id,
                offsets: sorted_offsets(count, rng),
            });
        }
    }
    RequestTrace { timestep, entries }
}

/// Uniform sampling without replacement: `uniform_k` distinct files, one
/// request each.
pub fn gen_uniform_requests(
    hier: &Hierarchy,
    params: &WorkloadParams,
    timestep: u64,
    rng: &mut impl Rng,
) -> Result<RequestTrace> {
    let population = hier.total_file_count();
    if params.uniform_k > population {
        return Err(Error::SampleExceedsPopulation {
            requested: params.uniform_k,
            population,
        });
    }
    let ids: Vec<FileId> = hier.file_ids().collect();
    let mut chosen: Vec<usize> = rand::seq::index::sample(rng, population, params.uniform_k).into_vec();
    chosen.sort_unstable();
    let entries = chosen
        .into_iter()
        .map(|idx| RequestEntry {
            file_id: ids[idx],
            offsets: sorted_offsets(1, rng),
        })
        .collect();
    Ok(RequestTrace { timestep, entries })
}

/// Flip probability for a requested cold file. With size sensitivity the
/// chance shrinks inversely with file size relative to the population mean,
/// capped so it never exceeds the base probability.
pub fn effective_flip_probability(
    p_become_hot: f64,
    mean_file_size: f64,
    size: u64,
    size_sensitivity: bool,
) -> f64 {
    if size_sensitivity {
        p_become_hot * (mean_file_size / size as f64).min(1.0)
    } else {
        p_become_hot
    }
}

/// Applies one timestep of temperature evolution: requested cold files may
/// jump hot, requested files are marked fresh, and every file idle past the
/// cooldown window cools by one decay step (floored at zero). Request
/// bookkeeping runs first, so a file requested this step never decays.
pub fn apply_temperature_dynamics(
    hier: &mut Hierarchy,
    trace: &RequestTrace,
    timestep: u64,
    params: &WorkloadParams,
    rng: &mut impl Rng,
    size_sensitivity: bool,
) -> Result<()> {
    let mean_size = hier.mean_file_size();
    for entry in &trace.entries {
        let rec = hier.file(entry.file_id)?;
        let was_cold = rec.temperature < params.hot_threshold;
        let size = rec.size;
        hier.touch(entry.file_id, timestep)?;
        if was_cold {
            let p = effective_flip_probability(
                params.p_become_hot,
                mean_size,
                size,
                size_sensitivity,
            );
            if rng.gen::<f64>() < p {
                let hot_temp = rng.gen_range(params.hot_threshold..=1.0);
                hier.set_temperature(entry.file_id, hot_temp)?;
            }
        }
    }
    let decaying: Vec<(FileId, f64)> = hier
        .records()
        .filter(|rec| {
            rec.temperature > 0.0
                && timestep.saturating_sub(rec.last_request_step.unwrap_or(0))
                    >= params.cooldown_window
        })
        .map(|rec| (rec.file_id, rec.temperature))
        .collect();
    for (id, temp) in decaying {
        hier.set_temperature(id, (temp - params.decay_step).max(0.0))?;
    }
    Ok(())
}

/// File-size model shared by the initial population and injected batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDistribution {
    Uniform { lo: u64, hi: u64 },
    /// Bounded Pareto via inverse CDF; heavier mass near `lo`.
    ParetoTruncated { lo: u64, hi: u64, alpha: f64 },
}

impl SizeDistribution {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if lo == 0 || hi < lo {
            return Err(Error::Config(format!(
                "size bounds must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if let SizeDistribution::ParetoTruncated { alpha, .. } = self {
            if !(*alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::Config(format!(
                    "pareto alpha must be positive, got {alpha}"
                )));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> (u64, u64) {
        match *self {
            SizeDistribution::Uniform { lo, hi } => (lo, hi),
            SizeDistribution::ParetoTruncated { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        match *self {
            SizeDistribution::Uniform { lo, hi } => rng.gen_range(lo..=hi),
            SizeDistribution::ParetoTruncated { lo, hi, alpha } => {
                let u: f64 = rng.gen();
                let ratio = (lo as f64 / hi as f64).powf(alpha);
                let x = lo as f64 / (1.0 - u * (1.0 - ratio)).powf(1.0 / alpha);
                (x.round() as u64).clamp(lo, hi)
            }
        }
    }

    /// Analytic mean of the distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            SizeDistribution::Uniform { lo, hi } => (lo as f64 + hi as f64) / 2.0,
            SizeDistribution::ParetoTruncated { lo, hi, alpha } => {
                let l = lo as f64;
                let h = hi as f64;
                if lo == hi {
                    return l;
                }
                let trunc = 1.0 - (l / h).powf(alpha);
                if (alpha - 1.0).abs() < 1e-12 {
                    l / trunc * (h / l).ln() * alpha
                } else {
                    alpha * l.powf(alpha) * (h.powf(1.0 - alpha) - l.powf(1.0 - alpha))
                        / ((1.0 - alpha) * trunc)
                }
            }
        }
    }
}

/// Parameters for generating the initial file population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub count: usize,
    pub sizes: SizeDistribution,
    pub temp_lo: f64,
    pub temp_hi: f64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        self.sizes.validate()?;
        if self.count == 0 {
            return Err(Error::Config("population count must be positive".into()));
        }
        if !(0.0 <= self.temp_lo && self.temp_lo <= self.temp_hi && self.temp_hi <= 1.0) {
            return Err(Error::Config(format!(
                "temperature range [{}, {}] must be ordered within [0, 1]",
                self.temp_lo, self.temp_hi
            )));
        }
        Ok(())
    }

    /// Draws `(size, temperature)` pairs, one RNG sequence per file.
    pub fn generate(&self, rng: &mut impl Rng) -> Vec<(u64, f64)> {
        (0..self.count)
            .map(|_| {
                let size = self.sizes.sample(rng);
                let temp = if self.temp_lo == self.temp_hi {
                    self.temp_lo
                } else {
                    rng.gen_range(self.temp_lo..=self.temp_hi)
                };
                (size, temp)
            })
            .collect()
    }
}

/// Periodic arrival of new files into the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionSchedule {
    pub batch_size: usize,
    /// A batch arrives whenever `timestep % period == 0`.
    pub period: u64,
    pub sizes: SizeDistribution,
    pub temp_lo: f64,
    pub temp_hi: f64,
    /// Stop once this many files have been injected in total.
    pub max_total: Option<usize>,
}

impl InjectionSchedule {
    pub fn validate(&self) -> Result<()> {
        self.sizes.validate()?;
        if self.period == 0 {
            return Err(Error::Config("injection period must be >= 1".into()));
        }
        if !(0.0 <= self.temp_lo && self.temp_lo <= self.temp_hi && self.temp_hi <= 1.0) {
            return Err(Error::Config(format!(
                "injection temperature range [{}, {}] must be ordered within [0, 1]",
                self.temp_lo, self.temp_hi
            )));
        }
        Ok(())
    }
}

/// Stateful injector tracking how many files have arrived so far.
#[derive(Debug, Clone)]
pub struct Injector {
    pub schedule: InjectionSchedule,
    injected: usize,
}

impl Injector {
    pub fn new(schedule: InjectionSchedule) -> Self {
        Self {
            schedule,
            injected: 0,
        }
    }

    pub fn injected(&self) -> usize {
        self.injected
    }

    /// Injects a batch when the timestep is on the period boundary. Each
    /// file lands in the slowest tier with room for it, cascading toward
    /// faster tiers; a file fitting nowhere aborts the run. New files count
    /// as just touched so they do not decay immediately.
    pub fn inject(
        &mut self,
        hier: &mut Hierarchy,
        timestep: u64,
        rng: &mut impl Rng,
    ) -> Result<Vec<FileId>> {
        if timestep % self.schedule.period != 0 {
            return Ok(Vec::new());
        }
        let remaining = self
            .schedule
            .max_total
            .map_or(usize::MAX, |cap| cap.saturating_sub(self.injected));
        let batch = self.schedule.batch_size.min(remaining);
        let mut created = Vec::with_capacity(batch);
        for _ in 0..batch {
            let size = self.schedule.sizes.sample(rng);
            let temp = if self.schedule.temp_lo == self.schedule.temp_hi {
                self.schedule.temp_lo
            } else {
                rng.gen_range(self.schedule.temp_lo..=self.schedule.temp_hi)
            };
            let tier = (0..hier.tier_count())
                .find(|&t| hier.free(t) >= size)
                .ok_or(Error::InjectionOverflow { batch: batch as u64 })?;
            let id = hier.allocate_file_id();
            let mut rec = FileRecord::new(id, size, temp, tier);
            rec.last_request_step = Some(timestep);
            hier.insert_file(rec)?;
            created.push(id);
        }
        self.injected += created.len();
        Ok(created)
    }
}
