use fedsim_core::contract::{ContractCall, ContractEvent, EndpointInfo, EventKind, FederationState, Requirements};
use fedsim_core::{DomainId, FederationContract, Role, ServiceId};
use proptest::prelude::*;

fn endpoint() -> EndpointInfo {
    EndpointInfo { external_ip: "10.0.0.1".into(), port: 80, descriptor: "lb".into() }
}

fn arb_call() -> impl Strategy<Value = (usize, ContractCall)> {
    let sid = (0u64..3).prop_map(ServiceId);
    let call = prop_oneof![
        prop_oneof![Just(Role::Consumer), Just(Role::Provider), Just(Role::Both)]
            .prop_map(|role| ContractCall::Register { role }),
        Just(ContractCall::AnnounceService { requirements: Requirements::new() }),
        (sid.clone(), 1u64..10).prop_map(|(service_id, price)| ContractCall::PlaceBid { service_id, price }),
        sid.clone().prop_map(|service_id| ContractCall::ChooseWinner { service_id }),
        sid.clone().prop_map(|service_id| ContractCall::ConfirmDeployment { service_id, endpoint: endpoint() }),
        sid.prop_map(|service_id| ContractCall::CompleteFederation { service_id }),
    ];
    (0usize..4, call)
}

proptest! {
    #[test]
    fn random_sequences_keep_invariants(calls in prop::collection::vec(arb_call(), 1..40)) {
        let actors: Vec<DomainId> = ["a", "b", "c", "d"].iter().map(|s| DomainId::new(*s)).collect();
        let mut c = FederationContract::new();
        for (h, (who, call)) in calls.iter().enumerate() {
            let before = c.clone();
            match c.execute(&actors[*who], call, h as u64) {
                Ok(ev) => {
                    // Every successful call emits the event of its own kind.
                    let want = match call {
                        ContractCall::Register { .. } => EventKind::OperatorRegistered,
                        ContractCall::AnnounceService { .. } => EventKind::ServiceAnnounced,
                        ContractCall::PlaceBid { .. } => EventKind::BidOffered,
                        ContractCall::ChooseWinner { .. } => EventKind::WinnerChosen,
                        ContractCall::ConfirmDeployment { .. } => EventKind::DeploymentConfirmed,
                        ContractCall::CompleteFederation { .. } => EventKind::FederationCompleted,
                    };
                    prop_assert_eq!(ev.kind(), want);
                }
                Err(_) => prop_assert_eq!(&c, &before),
            }
            for r in c.records() {
                prop_assert!(r.check_invariants().is_ok(), "{:?}", r.check_invariants());
            }
        }
    }
}

#[test]
fn full_lifecycle_emits_each_event_once() {
    let (cons, prov) = (DomainId::new("c"), DomainId::new("p"));
    let mut c = FederationContract::new();
    let mut kinds = vec![
        c.register(&cons, Role::Consumer).unwrap().kind(),
        c.register(&prov, Role::Provider).unwrap().kind(),
    ];
    let sid = ServiceId(0);
    let calls = [
        (&cons, ContractCall::AnnounceService { requirements: Requirements::new() }),
        (&prov, ContractCall::PlaceBid { service_id: sid, price: 4 }),
        (&cons, ContractCall::ChooseWinner { service_id: sid }),
        (&prov, ContractCall::ConfirmDeployment { service_id: sid, endpoint: endpoint() }),
        (&cons, ContractCall::CompleteFederation { service_id: sid }),
    ];
    for (h, (who, call)) in calls.iter().enumerate() {
        let ev = c.execute(who, call, h as u64).unwrap();
        if let ContractEvent::FederationCompleted { agreed_price, .. } = ev {
            assert_eq!(agreed_price, 4);
        }
        kinds.push(ev.kind());
    }
    let mut expected: Vec<EventKind> = EventKind::ALL.iter().copied().filter(|k| *k != EventKind::CallReverted).collect();
    expected.insert(0, EventKind::OperatorRegistered);
    assert_eq!(kinds, expected);
    assert_eq!(c.read_record(sid).unwrap().state, FederationState::Completed);
}

#[test]
fn no_transition_skips_a_state() {
    let (cons, prov) = (DomainId::new("c"), DomainId::new("p"));
    let mut c = FederationContract::new();
    c.register(&cons, Role::Consumer).unwrap();
    c.register(&prov, Role::Provider).unwrap();
    c.announce_service(&cons, Requirements::new(), 1).unwrap();
    let sid = ServiceId(0);
    assert!(c.confirm_deployment(&prov, sid, endpoint()).is_err());
    assert!(c.complete_federation(&cons, sid).is_err());
    assert!(c.choose_winner(&cons, sid).is_err(), "no bids yet");
    c.place_bid(&prov, sid, 3, 2).unwrap();
    c.choose_winner(&cons, sid).unwrap();
    assert!(c.place_bid(&prov, sid, 1, 3).is_err(), "bidding is closed");
    assert!(c.complete_federation(&cons, sid).is_err());
}
