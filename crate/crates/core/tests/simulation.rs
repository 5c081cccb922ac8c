use std::collections::BTreeSet;
use std::path::PathBuf;

use freezer_core::device::Platform;
use freezer_core::gateway::{EntryBody, Gateway};
use freezer_core::gsmlink::{decode_status, Msisdn};
use freezer_core::scenario::Scenario;
use freezer_core::sensing::raw_to_weight;
use freezer_core::sim::{SimConfig, Simulation, DEFAULT_GATEWAY_MSISDN};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn gateway_msisdn() -> Msisdn {
    DEFAULT_GATEWAY_MSISDN.parse().unwrap()
}

fn build(text: &str, seed: u64) -> Simulation {
    let cfg = SimConfig::new(seed);
    let gw = Gateway::new(cfg.gateway_msisdn.clone(), Some(cfg.device_msisdn.clone()));
    Simulation::new(cfg, Scenario::parse(text).unwrap(), gw).unwrap()
}

fn quiet_link() -> &'static str {
    "t=0 set sigma 0\nt=0 set loss 0\nt=0 set dup 0\n"
}

#[test]
fn bundled_e2e_scenario() {
    let text = std::fs::read_to_string(scenario_path("e2e.scenario")).unwrap();
    let mut sim = build(&text, 42);
    let report = sim.run_scenario(60_000).unwrap();
    assert_eq!(report.checks_served, 1);
    let snap = report.final_snapshot.unwrap();
    assert_eq!(snap.main_kg, 30.0);
    assert_eq!(snap.elev_kg, 4.91);
    assert_eq!((snap.c_main, snap.c_elev), (60, 10));
    assert_eq!(snap.temp_c, -18.0);
    assert_eq!(snap.seq, 0);
}

#[test]
fn demo_is_deterministic() {
    let text = std::fs::read_to_string(scenario_path("demo.scenario")).unwrap();
    let run = |seed| {
        let mut sim = build(&text, seed);
        let report = sim.run_scenario(60_000).unwrap();
        let log = sim.gateway().query_events(0, usize::MAX);
        let trace: Vec<String> = sim.network().trace_lines().collect();
        (report, log, trace)
    };
    let a = run(42);
    assert_eq!(a, run(42));
    assert!(a.0.alerts_emitted >= 2, "{:?}", a.0);
    assert_eq!(a.0.checks_served, 2);
    assert_ne!(a.2, run(7).2);
}

#[test]
fn unauthorized_call_gets_no_status() {
    let text = format!("{}t=1000 call +15550100200\n", quiet_link());
    let mut sim = build(&text, 1);
    let report = sim.run_scenario(30_000).unwrap();
    assert_eq!(report.checks_served, 0);
    assert_eq!(report.sms_submitted, 0);
    assert!(report.final_snapshot.is_none());
    assert_eq!(sim.network().stats().rings_delivered, 1);
}

#[test]
fn rapid_checks_yield_increasing_seq() {
    let text = format!(
        "{}t=1000 add main 10\nt=5000 call {gw}\nt=5000 call {gw}\n",
        quiet_link(),
        gw = DEFAULT_GATEWAY_MSISDN
    );
    let mut sim = build(&text, 3);
    let report = sim.run_scenario(30_000).unwrap();
    assert_eq!(report.checks_served, 2);
    let seqs: Vec<u64> = sim
        .gateway()
        .query_events(0, 100)
        .iter()
        .filter_map(|e| match &e.body {
            EntryBody::Stat(r) => Some(r.seq),
            _ => None,
        })
        .collect();
    assert_eq!(seqs.len(), 2);
    assert!(seqs[0] < seqs[1]);
    let checks = sim
        .gateway()
        .query_events(0, 100)
        .iter()
        .filter(|e| e.kind() == "check_requested")
        .count();
    assert_eq!(checks, 2);
}

#[test]
fn trigger_check_from_outside_the_scenario() {
    let mut sim = build(&format!("{}t=1000 add elev 2.0\n", quiet_link()), 5);
    sim.run_until(3000).unwrap();
    let id = sim.trigger_check().unwrap();
    assert_eq!(id, 1);
    sim.run_until(20_000).unwrap();
    let snap = sim.gateway().query_latest().unwrap();
    assert_eq!(snap.c_elev, 4);
}

#[test]
fn reordered_status_keeps_highest_seq() {
    // wide latency spread: later messages regularly overtake earlier ones
    let mut text = format!(
        "{}t=0 set latency_min 0\nt=0 set latency_max 60000\nt=0 add main 5\n",
        quiet_link()
    );
    for i in 0..40 {
        text.push_str(&format!("t={} call {}\n", 3000 + i * 1000, DEFAULT_GATEWAY_MSISDN));
    }
    let mut sim = build(&text, 11);
    sim.run_scenario(120_000).unwrap();
    let stats: Vec<u64> = sim
        .gateway()
        .query_events(0, usize::MAX)
        .iter()
        .filter_map(|e| match &e.body {
            EntryBody::Stat(r) => Some(r.seq),
            _ => None,
        })
        .collect();
    assert_eq!(stats.len(), 40);
    assert!(
        stats.windows(2).any(|w| w[1] < w[0]),
        "expected at least one overtaking delivery: {stats:?}"
    );
    let snap = sim.gateway().query_latest().unwrap();
    assert_eq!(snap.seq, *stats.iter().max().unwrap());
}

#[test]
fn every_delivered_sms_becomes_one_entry() {
    let mut text = String::from("t=0 set loss 0.2\nt=0 set dup 0.4\nt=0 add main 79\n");
    for i in 0..30 {
        text.push_str(&format!("t={} call {}\n", 2000 + i * 4000, DEFAULT_GATEWAY_MSISDN));
        let verb = if i % 2 == 0 { "add" } else { "remove" };
        text.push_str(&format!("t={} {verb} main 2\n", 2500 + i * 4000));
    }
    let mut sim = build(&text, 99);
    sim.run_scenario(60_000).unwrap();
    let delivered_to_gateway = sim
        .network()
        .delivered()
        .iter()
        .filter(|(_, m)| m.to() == &gateway_msisdn())
        .count();
    let entries = sim.gateway().query_events(0, usize::MAX);
    let sms_entries = entries
        .iter()
        .filter(|e| e.kind() != "check_requested")
        .count();
    assert_eq!(sms_entries, delivered_to_gateway);
    assert!(entries.iter().any(|e| e.kind() == "duplicate"));
    assert!(entries.iter().any(|e| e.kind() == "alert"));
}

#[test]
fn duplicates_only_link_accepts_every_message() {
    let mut text = String::from("t=0 set loss 0\nt=0 set dup 0.5\n");
    for i in 0..50 {
        text.push_str(&format!("t={} call {}\n", 2000 + i * 3000, DEFAULT_GATEWAY_MSISDN));
    }
    let mut sim = build(&text, 5);
    let report = sim.run_scenario(60_000).unwrap();
    assert!(report.sms_duplicated > 0);
    let accepted = sim
        .gateway()
        .query_events(0, usize::MAX)
        .iter()
        .filter(|e| matches!(e.body, EntryBody::Stat(_) | EntryBody::Alert(_)))
        .count() as u64;
    assert_eq!(accepted, report.sms_submitted);
    assert_eq!(report.sms_delivered, report.sms_submitted + report.sms_duplicated);
}

#[test]
fn noiseless_device_reads_true_weight() {
    let mut text = String::from(quiet_link());
    let mut elev = 0.0;
    let mut main = 0.0;
    let loads = [(3.7, 12.25), (0.33, 41.9), (7.01, 0.07), (1.5, 17.5)];
    for (i, (e, m)) in loads.iter().enumerate() {
        text.push_str(&format!("t={} add elev {e}\nt={} add main {m}\n", i * 5000, i * 5000));
    }
    let mut sim = build(&text, 8);
    for (i, (e, m)) in loads.iter().enumerate() {
        elev += e;
        main += m;
        sim.run_until(i as u64 * 5000 + 1000).unwrap();
        let frame = sim.device().state().last_frame.unwrap();
        let cfg = sim.device().config();
        let read_elev = raw_to_weight(frame.elev_raw, &cfg.elev_cal);
        let read_main = raw_to_weight(frame.main_raw, &cfg.main_cal);
        assert!((read_elev - elev).abs() <= 1.0 / cfg.elev_cal.factor().abs());
        assert!((read_main - main).abs() <= 1.0 / cfg.main_cal.factor().abs());
    }
}

#[test]
fn skewed_bridge_reads_heavy() {
    let text = format!(
        "{}t=0 set gains 1.02,1,1,1\nt=0 set distribution 1,0,0,0\nt=0 add main 50\nt=3000 call {}\n",
        quiet_link(),
        DEFAULT_GATEWAY_MSISDN
    );
    let mut sim = build(&text, 1);
    let report = sim.run_scenario(30_000).unwrap();
    assert_eq!(report.final_snapshot.unwrap().main_kg, 51.0);
}

#[test]
fn door_warms_the_freezer() {
    let text = format!(
        "{}t=0 door open\nt=60000 door close\nt=60000 call {}\n",
        quiet_link(),
        DEFAULT_GATEWAY_MSISDN
    );
    let mut sim = build(&text, 1);
    let report = sim.run_scenario(20_000).unwrap();
    let t = report.final_snapshot.unwrap().temp_c;
    assert!(t > 0.0 && t < 25.0, "{t}");
}

#[test]
fn tare_directive_resets_counts() {
    let text = format!(
        "{}t=0 add main 12\nt=2000 tare\nt=3000 add main 5\nt=6000 call {}\n",
        quiet_link(),
        DEFAULT_GATEWAY_MSISDN
    );
    let mut sim = build(&text, 1);
    let snap = sim.run_scenario(30_000).unwrap().final_snapshot.unwrap();
    assert_eq!(snap.c_main, 10);
    assert_eq!(snap.main_kg, 17.0);
}

#[test]
fn remove_past_zero_is_recorded() {
    let text = "t=0 add elev 1\nt=1000 remove elev 3\n";
    let mut sim = build(text, 1);
    sim.run_scenario(1000).unwrap();
    assert_eq!(sim.plant().elev_kg, 0.0);
    let w = sim.warnings();
    assert_eq!(w.len(), 1);
    assert_eq!(w[0].platform, Platform::Elev);
    assert_eq!(w[0].shortfall_kg, 2.0);
}

#[test]
fn stat_payloads_on_the_wire_decode() {
    let text = std::fs::read_to_string(scenario_path("demo.scenario")).unwrap();
    let mut sim = build(&text, 42);
    sim.run_scenario(60_000).unwrap();
    let mut seen = BTreeSet::new();
    for (_, msg) in sim.network().delivered() {
        assert!(msg.payload().len() <= 160 && msg.payload().is_ascii());
        if msg.payload().starts_with("STAT") {
            seen.insert(decode_status(msg.payload()).unwrap().seq);
        }
    }
    assert!(!seen.is_empty());
}
