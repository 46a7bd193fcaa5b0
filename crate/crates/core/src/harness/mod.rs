//! Replicated federation campaigns, per-phase statistics and result files.

pub mod export;
mod scenario;
mod stats;
mod timeline;

use rayon::prelude::*;

pub use export::{export, ExportError, ExportedFiles};
pub use scenario::{consumer_id, provider_id, run_federation, RunOutcome, RunSpec, TraceLine, WorldEvent};
pub use stats::{aggregate, mean, percentile, stddev, PhaseStats};
pub use timeline::{phase_durations, Phase, PhaseDurations, PhaseTimeline};

use crate::config::{CampaignConfig, ConfigError};
use crate::ledger::{NetworkProfile, ProfileKind};
use crate::rng::derive_seed;

/// Seed of replication `run_id` within a (profile, BP) group.
pub fn replication_seed(base: u64, profile: &str, block_period_s: f64, run_id: u64) -> u64 {
    derive_seed(
        base,
        &[profile.as_bytes(), &block_period_s.to_bits().to_le_bytes(), &run_id.to_le_bytes()],
    )
}

/// The (profile, BP) groups of a campaign in run order.
pub fn campaign_groups(config: &CampaignConfig) -> Vec<NetworkProfile> {
    let mut out = Vec::new();
    for p in &config.profiles {
        match p.kind {
            ProfileKind::Private => {
                out.extend(config.block_periods_s.iter().map(|bp| p.clone().with_block_period(*bp)));
            }
            ProfileKind::Public => out.push(p.clone()),
        }
    }
    out
}

/// The fully specified run for one replication.
pub fn run_spec(config: &CampaignConfig, profile: &NetworkProfile, run_id: u64) -> RunSpec {
    RunSpec {
        run_id,
        seed: replication_seed(config.base_seed, &profile.name, profile.block_period_s, run_id),
        profile: profile.clone(),
        n_providers: config.n_providers as usize,
        consumer: config.consumer.clone(),
        provider: config.provider.clone(),
        provider_overrides: Vec::new(),
        deployment: config.deployment.clone(),
        client_overhead_s: config.client_overhead_s,
        completion: config.complete_tx_mode,
    }
}

/// Runs every replication of every group; output is sorted by
/// (group, run_id) regardless of `jobs`.
pub fn run_campaign(config: &CampaignConfig) -> Result<Vec<PhaseTimeline>, ConfigError> {
    config.validate()?;
    let specs: Vec<RunSpec> = campaign_groups(config)
        .iter()
        .flat_map(|p| (0..config.replications as u64).map(move |r| (p, r)))
        .map(|(p, r)| run_spec(config, p, r))
        .collect();
    let run = |s: &RunSpec| run_federation(s, false).timeline;
    if config.jobs <= 1 {
        return Ok(specs.iter().map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| ConfigError::single(format!("cannot start {} workers: {e}", config.jobs)))?;
    Ok(pool.install(|| specs.par_iter().map(run).collect()))
}

/// Plain-text table of mean phase durations, one row per group.
pub fn render_summary(stats: &[PhaseStats]) -> String {
    let mut out = format!("{:<8} {:>7}", "profile", "BP[s]");
    for p in Phase::ALL {
        out += &format!(" {:>19}", p.name());
    }
    out += &format!(" {:>5}\n", "runs");
    for row in stats.chunks(Phase::ALL.len()) {
        let first = &row[0];
        out += &format!("{:<8} {:>7.1}", first.profile_name, first.block_period_s);
        for s in row {
            match s.mean_s {
                Some(m) => out += &format!(" {:>19.3}", m),
                None => out += &format!(" {:>19}", "-"),
            }
        }
        out += &format!(" {:>5}\n", first.n_runs);
    }
    out
}
