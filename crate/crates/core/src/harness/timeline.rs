use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::sim::VirtualTime;

/// The six measured milestones of a federation, in protocol order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    ServiceAnnounced,
    BidOffered,
    WinnerChosen,
    ServiceDeployed,
    ConfirmDeployment,
    FederationCompleted,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::ServiceAnnounced,
        Phase::BidOffered,
        Phase::WinnerChosen,
        Phase::ServiceDeployed,
        Phase::ConfirmDeployment,
        Phase::FederationCompleted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::ServiceAnnounced => "ServiceAnnounced",
            Phase::BidOffered => "BidOffered",
            Phase::WinnerChosen => "WinnerChosen",
            Phase::ServiceDeployed => "ServiceDeployed",
            Phase::ConfirmDeployment => "ConfirmDeployment",
            Phase::FederationCompleted => "FederationCompleted",
        }
    }

    fn previous(self) -> Option<Phase> {
        let i = Phase::ALL.iter().position(|p| *p == self).expect("listed");
        i.checked_sub(1).map(|j| Phase::ALL[j])
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Milestone stamps of one federation run, measured from run start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimeline {
    pub run_id: u64,
    pub profile_name: String,
    pub block_period_s: f64,
    pub seed: u64,
    pub milestones: BTreeMap<Phase, VirtualTime>,
    pub failed: bool,
    pub failure: Option<String>,
}

impl PhaseTimeline {
    pub fn new(run_id: u64, profile_name: impl Into<String>, block_period_s: f64, seed: u64) -> Self {
        PhaseTimeline {
            run_id,
            profile_name: profile_name.into(),
            block_period_s,
            seed,
            milestones: BTreeMap::new(),
            failed: false,
            failure: None,
        }
    }

    /// Keeps the first stamp of each phase.
    pub fn stamp(&mut self, phase: Phase, at: VirtualTime) {
        self.milestones.entry(phase).or_insert(at);
    }

    pub fn mark_failed(&mut self, reason: impl Into<String>) {
        if !self.failed {
            self.failed = true;
            self.failure = Some(reason.into());
        }
    }

    pub fn total(&self) -> Option<Duration> {
        if self.failed {
            return None;
        }
        self.milestones.get(&Phase::FederationCompleted).map(|t| t.since(VirtualTime::ZERO))
    }

    /// Checks milestone ordering of a successful run: the first five are
    /// strictly increasing and completion is not earlier than confirmation.
    pub fn check_order(&self) -> Result<(), String> {
        if self.failed {
            return Ok(());
        }
        let mut prev: Option<(Phase, VirtualTime)> = None;
        for p in Phase::ALL {
            let t = *self.milestones.get(&p).ok_or_else(|| format!("run {}: missing {p}", self.run_id))?;
            if let Some((pp, pt)) = prev {
                let ok = if p == Phase::FederationCompleted { t >= pt } else { t > pt };
                if !ok {
                    return Err(format!("run {}: {p} at {t} is not after {pp} at {pt}", self.run_id));
                }
            }
            prev = Some((p, t));
        }
        Ok(())
    }
}

/// Per-phase durations of one run; empty when the run failed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseDurations {
    pub failed: bool,
    pub durations: BTreeMap<Phase, Duration>,
}

impl PhaseDurations {
    pub fn get(&self, phase: Phase) -> Option<Duration> {
        self.durations.get(&phase).copied()
    }
}

/// Each of the first five phases is the gap from the previous milestone
/// (the first from run start); `FederationCompleted` is the accumulated total.
pub fn phase_durations(t: &PhaseTimeline) -> PhaseDurations {
    if t.failed || Phase::ALL.iter().any(|p| !t.milestones.contains_key(p)) {
        return PhaseDurations { failed: true, durations: BTreeMap::new() };
    }
    let at = |p: Phase| t.milestones[&p];
    let durations = Phase::ALL
        .iter()
        .map(|&p| {
            let d = match (p, p.previous()) {
                (Phase::FederationCompleted, _) | (_, None) => at(p).since(VirtualTime::ZERO),
                (_, Some(prev)) => at(p).since(at(prev)),
            };
            (p, d)
        })
        .collect();
    PhaseDurations { failed: false, durations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timeline(stamps: [f64; 6]) -> PhaseTimeline {
        let mut t = PhaseTimeline::new(0, "private", 1.0, 0);
        for (p, s) in Phase::ALL.into_iter().zip(stamps) {
            t.stamp(p, VirtualTime::from_secs(s));
        }
        t
    }

    #[test]
    fn deltas_then_cumulative_total() {
        let d = phase_durations(&timeline([2.0, 4.0, 6.0, 42.0, 44.0, 45.0]));
        let got: Vec<f64> = Phase::ALL.iter().map(|p| d.get(*p).unwrap().as_secs_f64()).collect();
        assert_eq!(got, vec![2.0, 2.0, 2.0, 36.0, 2.0, 45.0]);
    }

    #[test]
    fn failed_run_has_no_durations() {
        let mut t = timeline([2.0, 4.0, 6.0, 42.0, 44.0, 45.0]);
        t.mark_failed("timeout");
        let d = phase_durations(&t);
        assert!(d.failed);
        assert!(d.durations.is_empty());
        assert_eq!(t.total(), None);
    }

    #[test]
    fn telescoping_identity_is_exact() {
        let t = timeline([2.05, 4.1, 7.15, 43.15, 47.25, 47.3]);
        let d = phase_durations(&t);
        let five: Duration = Phase::ALL[..5].iter().map(|p| d.get(*p).unwrap()).sum();
        let gap = t.milestones[&Phase::FederationCompleted].since(t.milestones[&Phase::ConfirmDeployment]);
        assert_eq!(five + gap, d.get(Phase::FederationCompleted).unwrap());
    }

    #[test]
    fn order_check() {
        assert!(timeline([2.0, 4.0, 6.0, 42.0, 44.0, 44.0]).check_order().is_ok());
        assert!(timeline([2.0, 2.0, 6.0, 42.0, 44.0, 45.0]).check_order().is_err());
        let mut t = timeline([2.0, 4.0, 6.0, 42.0, 44.0, 45.0]);
        t.milestones.remove(&Phase::WinnerChosen);
        assert!(t.check_order().is_err());
    }

    #[test]
    fn first_stamp_wins() {
        let mut t = PhaseTimeline::new(0, "p", 1.0, 0);
        t.stamp(Phase::BidOffered, VirtualTime::from_secs(3.0));
        t.stamp(Phase::BidOffered, VirtualTime::from_secs(9.0));
        assert_eq!(t.milestones[&Phase::BidOffered], VirtualTime::from_secs(3.0));
    }
}
