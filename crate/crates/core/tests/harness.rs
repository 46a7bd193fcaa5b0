use fedsim_core::config::{ConfigOverrides, DEFAULT_SEED};
use fedsim_core::domains::CompletionMode;
use fedsim_core::harness::{self, export, Phase};
use fedsim_core::{aggregate, resolve, run_campaign, CampaignConfig, NetworkProfile};

fn small(bps: &[f64], reps: u32) -> CampaignConfig {
    CampaignConfig {
        profiles: vec![NetworkProfile::private(1.0)],
        block_periods_s: bps.to_vec(),
        replications: reps,
        complete_tx_mode: CompletionMode::MeasurementOnly,
        ..CampaignConfig::default()
    }
}

#[test]
fn zero_replications_rejected() {
    let err = resolve(None, &ConfigOverrides { reps: Some(0), ..Default::default() }, None).unwrap_err();
    assert!(err.to_string().contains("replications"), "{err}");
    assert!(run_campaign(&small(&[1.0], 0)).is_err());
}

#[test]
fn slower_blocks_never_finish_sooner() {
    let t = run_campaign(&small(&[1.0, 20.0], 20)).unwrap();
    let (fast, slow) = t.split_at(20);
    for (a, b) in fast.iter().zip(slow) {
        assert_eq!(a.run_id, b.run_id);
        assert!(a.total().unwrap() < b.total().unwrap());
    }
}

#[test]
fn private_chain_has_no_spread() {
    let stats = aggregate(&run_campaign(&small(&[2.0], 10)).unwrap());
    for s in &stats {
        assert_eq!(s.n_runs, 10);
        assert!(s.stddev_s.unwrap() < 1e-9, "{:?}", s);
    }
}

#[test]
fn parallel_matches_serial() {
    let mut c = small(&[1.0, 5.0], 8);
    c.profiles.push(NetworkProfile::public());
    let serial = run_campaign(&c).unwrap();
    c.jobs = 4;
    assert_eq!(serial, run_campaign(&c).unwrap());
}

#[test]
fn export_writes_all_rows() {
    let c = small(&[1.0], 2);
    let t = run_campaign(&c).unwrap();
    let s = aggregate(&t);
    let dir = tempfile::tempdir().unwrap();
    let files = export::export(dir.path(), &c, &s, &t).unwrap();
    let timelines = std::fs::read_to_string(&files.timelines_csv).unwrap();
    assert_eq!(timelines.lines().count(), 1 + 2 * Phase::ALL.len());
    assert!(timelines.starts_with("run_id,profile,block_period_s,phase,duration_s,failed\n"));
    let summary = std::fs::read_to_string(&files.summary_csv).unwrap();
    assert_eq!(summary.lines().count(), 1 + Phase::ALL.len());
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&files.summary_json).unwrap()).unwrap();
    assert_eq!(json["base_seed"], DEFAULT_SEED);
    assert_eq!(json["stats"].as_array().unwrap().len(), Phase::ALL.len());
}

#[test]
fn on_chain_completion_adds_a_block() {
    let mut c = small(&[5.0], 3);
    let measured = aggregate(&run_campaign(&c).unwrap());
    c.complete_tx_mode = CompletionMode::OnChain;
    let chained = aggregate(&run_campaign(&c).unwrap());
    let fc = |s: &[fedsim_core::PhaseStats]| s.iter().find(|x| x.phase == Phase::FederationCompleted).unwrap().mean_s.unwrap();
    assert!(fc(&chained) > fc(&measured));
}

#[test]
fn summary_table_has_one_row_per_group() {
    let stats = aggregate(&run_campaign(&small(&[1.0, 2.0], 2)).unwrap());
    let table = harness::render_summary(&stats);
    assert_eq!(table.lines().count(), 3);
}
