use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::timeline::{phase_durations, Phase, PhaseTimeline};

/// Summary of one phase over the successful runs of a (profile, BP) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub profile_name: String,
    pub block_period_s: f64,
    pub phase: Phase,
    pub mean_s: Option<f64>,
    pub stddev_s: Option<f64>,
    pub p50_s: Option<f64>,
    pub p95_s: Option<f64>,
    pub n_runs: usize,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation.
pub fn stddev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    Some(var.sqrt())
}

/// Midpoint-rule percentile: the k-th of n sorted samples sits at
/// probability `(k + 0.5) / n`, with linear interpolation in between and
/// clamping outside.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let pos = (p * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

fn summarize(profile_name: &str, block_period_s: f64, phase: Phase, mut xs: Vec<f64>) -> PhaseStats {
    xs.sort_by(f64::total_cmp);
    PhaseStats {
        profile_name: profile_name.to_string(),
        block_period_s,
        phase,
        mean_s: mean(&xs),
        stddev_s: stddev(&xs),
        p50_s: percentile(&xs, 0.50),
        p95_s: percentile(&xs, 0.95),
        n_runs: xs.len(),
    }
}

/// One row per (profile, BP, phase), groups in first-seen order and
/// phases in protocol order. Failed runs are excluded.
pub fn aggregate(timelines: &[PhaseTimeline]) -> Vec<PhaseStats> {
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), BTreeMap<Phase, Vec<f64>>> = BTreeMap::new();
    for t in timelines {
        let key = (t.profile_name.clone(), t.block_period_s.to_bits());
        let group = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Phase::ALL.iter().map(|p| (*p, Vec::new())).collect()
        });
        let d = phase_durations(t);
        if d.failed {
            continue;
        }
        for (p, dur) in d.durations {
            group.get_mut(&p).expect("all phases present").push(dur.as_secs_f64());
        }
    }
    let mut out = Vec::new();
    for key in order {
        let mut group = groups.remove(&key).expect("recorded");
        for p in Phase::ALL {
            let xs = group.remove(&p).unwrap_or_default();
            out.push(summarize(&key.0, f64::from_bits(key.1), p, xs));
        }
    }
    out
}
