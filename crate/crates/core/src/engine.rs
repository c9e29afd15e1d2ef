//! The timestep loop: dataset growth, request generation, queued servicing,
//! per-request policy decisions with an eviction cascade, temperature
//! dynamics, agent updates and metrics capture.
//!
//! Within a timestep the phases run strictly in order; every decision sees
//! the hierarchy as mutated by earlier decisions of the same timestep, and
//! agent updates only begin once all decisions have executed.

use std::collections::BTreeSet;

use crate::config::{RngStream, ScenarioConfig, TriggerKind};
use crate::error::{Error, Result};
use crate::metrics::{
    AgentParamRow, HeatmapEntry, MetricsFrame, RunSummary, TransferMeans,
};
use crate::policy::{
    initial_placement, rule_based_decide, Action, PolicyDecision, UpgradeTrigger,
};
use crate::rl::{
    compute_cost_signal, decide_upgrade, CostSignalInputs, FrbAgent, RequestObservation,
};
use crate::storage::{FileId, Hierarchy, TierId};
use crate::workload::{
    apply_temperature_dynamics, gen_poisson_requests, gen_uniform_requests, Injector,
    RequestPattern, RequestTrace,
};

/// One request after passing through the queuing model.
#[derive(Debug, Clone, PartialEq)]
pub struct ServicedRequest {
    pub file_id: FileId,
    /// Arrival offset within the timestep.
    pub offset: f64,
    /// Tier that served the request (placement at service time).
    pub tier: TierId,
    /// Queue wait plus own service time.
    pub response: f64,
}

/// Outcome of servicing one timestep's trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceOutcome {
    /// Requests in arrival order (offset, ties by file id).
    pub requests: Vec<ServicedRequest>,
    /// Total service time enqueued per tier this timestep.
    pub pending: Vec<f64>,
}

/// Serves a trace against the current placement: one FIFO server per tier,
/// service time = size/speed, response = wait behind earlier same-tier
/// arrivals plus own service.
pub fn service_requests(hier: &Hierarchy, trace: &RequestTrace) -> Result<ServiceOutcome> {
    let mut arrivals: Vec<(f64, FileId)> = Vec::with_capacity(trace.total_requests());
    for entry in &trace.entries {
        for &offset in &entry.offsets {
            arrivals.push((offset, entry.file_id));
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut pending = vec![0.0f64; hier.tier_count()];
    let mut requests = Vec::with_capacity(arrivals.len());
    for (offset, file_id) in arrivals {
        let rec = hier.file(file_id)?;
        let tier = rec.tier_id;
        let service = rec.size as f64 / hier.spec(tier).speed;
        let response = pending[tier] + service;
        pending[tier] += service;
        requests.push(ServicedRequest { file_id, offset, tier, response });
    }
    Ok(ServiceOutcome { requests, pending })
}

/// Expected future response of the whole hierarchy: the sum over files of
/// temperature times size over the speed of the file's tier.
pub fn estimated_system_response(hier: &Hierarchy) -> f64 {
    (0..hier.tier_count())
        .map(|t| hier.weighted_temperature_sum(t) / hier.spec(t).speed)
        .sum()
}

/// A move that actually happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutedMove {
    pub file_id: FileId,
    pub from: TierId,
    pub to: TierId,
}

/// Transfer counters indexed by source tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferCounts {
    up: Vec<u64>,
    down: Vec<u64>,
}

impl TransferCounts {
    pub fn new(tier_count: usize) -> Self {
        Self {
            up: vec![0; tier_count],
            down: vec![0; tier_count],
        }
    }

    pub fn record(&mut self, moves: &[ExecutedMove]) {
        for mv in moves {
            if mv.to == mv.from + 1 {
                self.up[mv.from] += 1;
            } else if mv.from == mv.to + 1 {
                self.down[mv.from] += 1;
            }
        }
    }

    /// Moves from `tier` one tier up.
    pub fn up_from(&self, tier: TierId) -> u64 {
        self.up[tier]
    }

    /// Moves from `tier` one tier down.
    pub fn down_from(&self, tier: TierId) -> u64 {
        self.down[tier]
    }
}

fn plan_move(
    hier: &Hierarchy,
    file_id: FileId,
    to: TierId,
    vfree: &mut [i64],
    plan: &mut Vec<ExecutedMove>,
    removed: &mut BTreeSet<FileId>,
) -> Result<bool> {
    let rec = hier.file(file_id)?;
    let from = rec.tier_id;
    let size = rec.size as i64;
    let gate = rec.temperature;
    loop {
        if vfree[to] >= size {
            vfree[to] -= size;
            vfree[from] += size;
            plan.push(ExecutedMove { file_id, from, to });
            return Ok(true);
        }
        if to == 0 {
            // the slowest tier absorbs but never evicts
            return Ok(false);
        }
        let victim = hier
            .coldest_iter(to)
            .find(|r| r.temperature < gate && !removed.contains(&r.file_id))
            .map(|r| r.file_id);
        let Some(victim) = victim else {
            return Ok(false);
        };
        removed.insert(victim);
        if !plan_move(hier, victim, to - 1, vfree, plan, removed)? {
            return Ok(false);
        }
    }
}

/// Executes one decision, displacing the destination's coldest
/// strictly-colder residents downward (recursively) when room is needed.
/// Planning is all-or-nothing: if room cannot be created the hierarchy is
/// untouched and the move list is empty.
pub fn execute_decision_with_eviction(
    hier: &mut Hierarchy,
    decision: &PolicyDecision,
) -> Result<Vec<ExecutedMove>> {
    decision.validate()?;
    if decision.action == Action::Stay {
        return Ok(Vec::new());
    }
    let rec = hier.file(decision.file_id)?;
    if rec.tier_id != decision.from_tier {
        return Err(Error::Inconsistent(format!(
            "decision expects file {} in tier {} but it is in tier {}",
            decision.file_id, decision.from_tier, rec.tier_id
        )));
    }
    let mut vfree: Vec<i64> = (0..hier.tier_count())
        .map(|t| hier.free(t) as i64)
        .collect();
    let mut plan = Vec::new();
    let mut removed = BTreeSet::new();
    removed.insert(decision.file_id);
    if !plan_move(hier, decision.file_id, decision.to_tier, &mut vfree, &mut plan, &mut removed)? {
        return Ok(Vec::new());
    }
    for mv in &plan {
        hier.move_file(mv.file_id, mv.to)?;
    }
    Ok(plan)
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub frames: Vec<MetricsFrame>,
    /// Per-timestep agent parameters, when enabled for a learned policy.
    pub agent_trajectory: Option<Vec<AgentParamRow>>,
}

fn snapshot_heatmap(hier: &Hierarchy) -> Vec<HeatmapEntry> {
    let mut entries = Vec::new();
    for tier in 0..hier.tier_count() {
        for (slot, rec) in hier.files_in(tier).enumerate() {
            entries.push(HeatmapEntry {
                tier_id: tier,
                slot_index: slot,
                file_id: rec.file_id,
                temperature: rec.temperature,
                size: rec.size,
            });
        }
    }
    entries
}

fn occupancy(hier: &Hierarchy) -> [f64; 3] {
    let mut occ = [0.0; 3];
    for (tier, slot) in occ.iter_mut().enumerate() {
        *slot = hier.used(tier) as f64 / hier.spec(tier).capacity as f64;
    }
    occ
}

/// Runs one scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let policy = config.policy.kind;
    let params = config.workload_params();
    let trigger = match config.policy.upgrade_trigger {
        TriggerKind::DestMean => UpgradeTrigger::DestMean,
        TriggerKind::FixedThreshold => UpgradeTrigger::FixedThreshold(params.hot_threshold),
    };
    let size_sensitive = policy.size_sensitive();

    let mut hier = config.hierarchy()?;
    let mut pop_rng = crate::config::stream_rng(config.seed, RngStream::Population);
    let files = config.population.generate(&mut pop_rng);
    initial_placement(&files, &mut hier, policy.placement())?;

    let mut work_rng = crate::config::stream_rng(config.seed, RngStream::Workload);
    let mut dyn_rng = crate::config::stream_rng(config.seed, RngStream::Dynamics);
    let mut inj_rng = crate::config::stream_rng(config.seed, RngStream::Injection);
    let mut injector = config.injection.clone().map(Injector::new);

    let tier_count = hier.tier_count();
    let fastest = hier.fastest_tier();
    let mut agents: Option<Vec<FrbAgent>> = if policy.is_rl() {
        let membership = config.membership_params();
        let hyper = config.hyper();
        Some(
            (0..tier_count)
                .map(|_| FrbAgent::new(membership.clone(), hyper))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let tau = config.rl.tau;
    let beta = config.rl.beta;
    let mut prev_states: Vec<[f64; 3]> = (0..tier_count)
        .map(|t| hier.tier_state(t, 0.0).as_vector())
        .collect();

    let mut frames = Vec::with_capacity(config.timesteps as usize);
    let mut trajectory: Option<Vec<AgentParamRow>> =
        (policy.is_rl() && config.output.agent_params).then(Vec::new);
    let mut total_requests = 0u64;

    for t in 1..=config.timesteps {
        if let Some(injector) = &mut injector {
            injector.inject(&mut hier, t, &mut inj_rng)?;
        }

        let trace = match config.workload.pattern {
            RequestPattern::Poisson => gen_poisson_requests(&hier, &params, t, &mut work_rng),
            RequestPattern::Uniform => gen_uniform_requests(&hier, &params, t, &mut work_rng)?,
        };

        let outcome = service_requests(&hier, &trace)?;
        total_requests += outcome.requests.len() as u64;

        let mut counts = TransferCounts::new(tier_count);
        for req in &outcome.requests {
            let tier = hier.file(req.file_id)?.tier_id;
            if tier == fastest {
                continue;
            }
            let decisions = match &agents {
                None => rule_based_decide(&hier, req.file_id, trigger)?,
                Some(agents) => {
                    if t == 1 && config.policy.cold_start_fallback {
                        rule_based_decide(&hier, req.file_id, trigger)?
                    } else if decide_upgrade(
                        &hier,
                        req.file_id,
                        tier,
                        &agents[tier],
                        &agents[tier + 1],
                        outcome.pending[tier],
                        outcome.pending[tier + 1],
                    )? {
                        vec![PolicyDecision::upgrade(req.file_id, tier)]
                    } else {
                        Vec::new()
                    }
                }
            };
            for decision in &decisions {
                let moves = execute_decision_with_eviction(&mut hier, decision)?;
                counts.record(&moves);
            }
        }

        apply_temperature_dynamics(&mut hier, &trace, t, &params, &mut dyn_rng, size_sensitive)?;

        if let Some(agents) = &mut agents {
            for (tier, agent) in agents.iter_mut().enumerate() {
                let s_next = hier.tier_state(tier, outcome.pending[tier]).as_vector();
                let observations: Vec<RequestObservation> = outcome
                    .requests
                    .iter()
                    .filter(|r| r.tier == tier)
                    .map(|r| RequestObservation { arrival: r.offset, response: r.response })
                    .collect();
                let inputs = CostSignalInputs { t_n: 0.0, tau_n: tau, observations };
                let cost = compute_cost_signal(&inputs, beta);
                agent.td_update(cost, prev_states[tier], s_next, tau)?;
                prev_states[tier] = s_next;
            }
            if let Some(rows) = &mut trajectory {
                for (tier, agent) in agents.iter().enumerate() {
                    rows.push(AgentParamRow { timestep: t, tier, p: *agent.params() });
                }
            }
        }

        let snapshot_due = t == 1
            || t == config.timesteps
            || (config.output.heatmap_every > 0 && t % config.output.heatmap_every == 0);
        frames.push(MetricsFrame {
            timestep: t,
            transfers_up_1_2: counts.up_from(0),
            transfers_up_2_3: counts.up_from(1),
            transfers_down_3_2: counts.down_from(2),
            transfers_down_2_1: counts.down_from(1),
            estimated_system_response: estimated_system_response(&hier),
            occupancy: occupancy(&hier),
            heatmap: snapshot_due.then(|| snapshot_heatmap(&hier)),
        });

        #[cfg(debug_assertions)]
        hier.check_invariants()?;
    }

    let summary = RunSummary {
        policy: policy.to_string(),
        seed: config.seed,
        timesteps: config.timesteps,
        total_requests,
        final_esr: estimated_system_response(&hier),
        final_occupancy: occupancy(&hier),
        mean_transfers: TransferMeans::from_frames(&frames),
    };
    Ok(RunOutput { summary, frames, agent_trajectory: trajectory })
}
