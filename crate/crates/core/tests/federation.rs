use fedsim_core::contract::{ContractCall, ContractError, FederationState};
use fedsim_core::domains::{CompletionMode, ProviderPolicy};
use fedsim_core::harness::{provider_id, run_federation};
use fedsim_core::{Dist, NetworkProfile, Phase, RunSpec, ServiceId};

fn spec(profile: NetworkProfile, seed: u64) -> RunSpec {
    RunSpec::new(profile, seed)
}

#[test]
fn cheapest_of_three_providers_wins() {
    let mut s = spec(NetworkProfile::private(2.0), 1);
    s.n_providers = 3;
    s.provider_overrides = [7.0, 5.0, 9.0]
        .into_iter()
        .map(|p| ProviderPolicy { pricing: Dist::Const(p), ..ProviderPolicy::default() })
        .collect();
    let out = run_federation(&s, false);
    assert!(!out.timeline.failed, "{:?}", out.timeline.failure);
    let rec = out.ledger.contract().read_record(ServiceId(0)).unwrap();
    assert_eq!(rec.bids.len(), 3);
    assert_eq!(rec.winner.as_ref(), Some(&provider_id(1)));
    assert_eq!(rec.agreed_price, Some(5));
    assert_eq!(rec.state, FederationState::Completed);
}

#[test]
fn no_providers_times_out() {
    let mut s = spec(NetworkProfile::private(1.0), 2);
    s.n_providers = 0;
    s.consumer.timeout_s = 300.0;
    let out = run_federation(&s, true);
    assert!(out.timeline.failed);
    assert_eq!(out.timeline.failure.as_deref(), Some("timeout"));
    assert!(out.timeline.milestones.contains_key(&Phase::ServiceAnnounced));
    assert!(!out.timeline.milestones.contains_key(&Phase::BidOffered));
    let last = out.trace.last().unwrap();
    assert_eq!(last.at.as_secs(), 300.0);
    assert!(last.text.starts_with("TIMEOUT"));
}

#[test]
fn failed_deployment_ends_in_failure() {
    let mut s = spec(NetworkProfile::private(1.0), 3);
    s.deployment.failure_prob = 1.0;
    s.consumer.timeout_s = 200.0;
    let out = run_federation(&s, false);
    assert!(out.timeline.failed);
    assert!(!out.timeline.milestones.contains_key(&Phase::ConfirmDeployment));
}

/// Only a bid delayed past the auction close may revert; everything else
/// honest agents send must succeed.
#[test]
fn honest_agents_only_revert_late_bids() {
    for mode in [CompletionMode::OnChain, CompletionMode::MeasurementOnly] {
        for profile in [NetworkProfile::private(5.0), NetworkProfile::public()] {
            for seed in 0..20 {
                let mut s = spec(profile.clone(), seed);
                s.n_providers = 3;
                s.provider.pricing = "uniform:1,20".parse().unwrap();
                s.completion = mode;
                let out = run_federation(&s, false);
                let mut late_bids = 0;
                for tx in out.ledger.chain().iter().flat_map(|b| &b.txs) {
                    let outcome = &out.ledger.receipt(tx.tx_id).unwrap().outcome;
                    match (outcome, &tx.payload) {
                        (Ok(_), _) => {}
                        (Err(ContractError::WrongState { .. }), ContractCall::PlaceBid { .. }) => late_bids += 1,
                        (Err(e), call) => panic!("{} reverted: {e}", call.name()),
                    }
                }
                assert_eq!(out.reverts, late_bids);
                if profile.name == "private" {
                    assert_eq!(late_bids, 0);
                }
                assert!(!out.timeline.failed, "{:?}", out.timeline.failure);
                out.timeline.check_order().unwrap();
                out.ledger.verify_chain().unwrap();
            }
        }
    }
}

#[test]
fn measurement_only_stops_at_confirmation() {
    let mut s = spec(NetworkProfile::private(1.0), 4);
    s.completion = CompletionMode::MeasurementOnly;
    let out = run_federation(&s, false);
    let m = &out.timeline.milestones;
    assert_eq!(m[&Phase::FederationCompleted], m[&Phase::ConfirmDeployment]);
    let rec = out.ledger.contract().read_record(ServiceId(0)).unwrap();
    assert_eq!(rec.state, FederationState::Deployed);

    s.completion = CompletionMode::OnChain;
    let out = run_federation(&s, false);
    let m = &out.timeline.milestones;
    assert!(m[&Phase::FederationCompleted] > m[&Phase::ConfirmDeployment]);
}

#[test]
fn deployment_dominates_on_fast_chain() {
    let out = run_federation(&spec(NetworkProfile::private(1.0), 5), false);
    let d = fedsim_core::phase_durations(&out.timeline);
    let sd = d.get(Phase::ServiceDeployed).unwrap();
    assert_eq!(sd.as_secs_f64(), 36.0);
    for p in &Phase::ALL[..5] {
        assert!(d.get(*p).unwrap() <= sd);
    }
}

#[test]
fn traced_run_is_reproducible() {
    let s = spec(NetworkProfile::public(), 6);
    let a: Vec<String> = run_federation(&s, true).trace.iter().map(ToString::to_string).collect();
    let b: Vec<String> = run_federation(&s, true).trace.iter().map(ToString::to_string).collect();
    assert!(a.iter().any(|l| l.contains("SEAL")));
    assert_eq!(a, b);
}
