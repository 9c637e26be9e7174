//! End-to-end acceptance checks for the whole pipeline. Each test covers one
//! numbered criterion and prints a single PASS/FAIL line (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use sliceguard::commands::{self, ReplayOpts};
use sliceguard::outputs::{bus_trace_jsonl, kpm_reports_csv, timeline_csv, write_run_artifacts};
use sliceguard_core::detection::{rule_oracle_classify, DetectorConfig, PromptTemplate};
use sliceguard_core::eval::{
    evaluate_detector, extract_timeline, generate_dataset, instruction_rows, DatasetSpec,
    EvalOptions,
};
use sliceguard_core::kpm::Label;
use sliceguard_core::pipeline::{run_scenario, RunArtifacts};
use sliceguard_core::scenario::Scenario;

fn verdict(n: u32, name: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("acceptance {n} ({name}): {status}");
    assert!(ok, "acceptance {n} ({name}): {detail}");
}

fn default_run() -> RunArtifacts {
    run_scenario(&Scenario::default_attack(), None).expect("default scenario runs")
}

/// Independent restatement of the detection bound, kept deliberately apart
/// from the library code it checks.
fn expected_label(num_ues: u32, tx_pkts: u64) -> Label {
    if tx_pkts > 312 * num_ues as u64 {
        Label::Malicious
    } else {
        Label::Legitimate
    }
}

#[test]
fn criterion_1_prompt_template_is_byte_exact() {
    let template = PromptTemplate::new(312);
    let golden_1 = include_str!("../../sliceguard-core/tests/golden/prompt_1ue_300.txt");
    let golden_3 = include_str!("../../sliceguard-core/tests/golden/prompt_3ue_936.txt");
    let got_1 = template.build_prompt(1, 300);
    let got_3 = template.build_prompt(3, 936);
    let ok = got_1 == golden_1 && got_3 == golden_3;
    verdict(
        1,
        "prompt golden",
        ok,
        &format!("rendered prompts diverge from goldens:\n{got_1}\n{got_3}"),
    );
}

#[test]
fn criterion_2_oracle_matches_the_bound_over_the_sweep() {
    let mut mismatches = Vec::new();
    for num_ues in 1..=10u32 {
        for tx_pkts in 0..=4000u64 {
            let got = rule_oracle_classify(num_ues, tx_pkts);
            let want = expected_label(num_ues, tx_pkts);
            if got != want {
                mismatches.push((num_ues, tx_pkts, got, want));
            }
        }
    }
    verdict(
        2,
        "oracle sweep",
        mismatches.is_empty(),
        &format!(
            "first mismatches: {:?}",
            &mismatches[..mismatches.len().min(5)]
        ),
    );
}

#[test]
fn criterion_3_equal_share_before_onset_and_wall_time_bound() {
    let started = Instant::now();
    let run = default_run();
    let wall = started.elapsed();

    let onset = 170_000;
    let fair_share_kbps = 10_000i64;
    let worst = run
        .ticks
        .iter()
        .filter(|s| s.time_ms > 0 && s.time_ms < onset)
        .map(|s| (s.achieved_kbps as i64 - fair_share_kbps).abs())
        .max()
        .unwrap_or(i64::MAX);
    let ok = worst <= 300 && wall.as_secs_f64() < 5.0;
    verdict(
        3,
        "equal share and wall time",
        ok,
        &format!("worst pre-onset deviation {worst} kbps, wall {wall:?}"),
    );
}

#[test]
fn criterion_4_detection_and_recovery_latencies() {
    let scenario = Scenario::default_attack();
    let run = default_run();
    let timeline = extract_timeline(&run);

    let onset = timeline.attack_onset_ms.unwrap_or(u64::MAX);
    let alert = timeline.detection_ms.unwrap_or(u64::MAX);
    let ack = timeline.mitigation_ms.unwrap_or(u64::MAX);
    let recovery = timeline.recovery_ms.unwrap_or(u64::MAX);
    let latency = timeline.pipeline_latency_ms.unwrap_or(u64::MAX);
    let hop = scenario.bus_hop_latency_ms;

    let alert_in_time = alert <= onset + scenario.report_interval_ms + hop;
    let recovery_in_time = recovery >= ack && recovery - ack <= scenario.tick_ms;
    let attacker_silenced = run
        .ticks
        .iter()
        .filter(|s| s.ue == scenario.ues[0].id && s.time_ms >= recovery)
        .all(|s| s.achieved_kbps == 0 && s.prbs == 0);
    let latency_ok = latency == 3 * hop && latency <= 5 * hop;
    let ok = alert_in_time && recovery_in_time && attacker_silenced && latency_ok;
    verdict(
        4,
        "detection and recovery",
        ok,
        &format!("onset {onset}, alert {alert}, ack {ack}, recovery {recovery}, latency {latency}"),
    );
}

#[test]
fn criterion_5_static_threshold_lags_by_its_confirmation_window() {
    let oracle_run = default_run();
    let mut static_scenario = Scenario::default_attack();
    static_scenario.detector = DetectorConfig::StaticThreshold {
        threshold_pkts: 312,
        confirmations: 5,
    };
    let static_run = run_scenario(&static_scenario, None).expect("static run");

    let oracle_alert = extract_timeline(&oracle_run).detection_ms;
    let static_alert = extract_timeline(&static_run).detection_ms;
    let want_gap = 4 * static_scenario.report_interval_ms;
    let gap = match (oracle_alert, static_alert) {
        (Some(a), Some(b)) if b >= a => Some(b - a),
        _ => None,
    };
    verdict(
        5,
        "static threshold lag",
        gap == Some(want_gap),
        &format!("oracle {oracle_alert:?}, static {static_alert:?}, want gap {want_gap}"),
    );
}

#[test]
fn criterion_6_mock_accuracy_tracks_its_dial() {
    let samples = generate_dataset(&DatasetSpec {
        n: 10_000,
        ..DatasetSpec::default()
    })
    .unwrap();
    let mut worst: Option<(f64, f64)> = None;
    for target in [0.70, 0.87, 0.95, 0.99, 1.00] {
        let config = DetectorConfig::MockLlm {
            accuracy: target,
            base_limit_per_ue: 312,
        };
        let mut detector = config.build(7, None).unwrap();
        let result = evaluate_detector(&mut detector, &samples, &EvalOptions::default()).unwrap();
        let error = (result.accuracy - target).abs();
        if worst.is_none_or(|(_, e)| error > e) {
            worst = Some((target, error));
        }
    }
    let (at, error) = worst.unwrap();
    verdict(
        6,
        "mock accuracy calibration",
        error <= 0.01,
        &format!("worst deviation {error:.4} at target {at}"),
    );
}

#[test]
fn criterion_7_dataset_is_oracle_consistent_and_reproducible() {
    let spec = DatasetSpec::default();
    let first = generate_dataset(&spec).unwrap();
    let second = generate_dataset(&spec).unwrap();

    let consistent = first
        .iter()
        .all(|s| s.label == expected_label(s.num_ues, s.tx_pkts));
    let template = PromptTemplate::new(spec.base_limit_per_ue);
    let bytes_first = serde_json::to_string(&instruction_rows(&first, &template)).unwrap();
    let bytes_second = serde_json::to_string(&instruction_rows(&second, &template)).unwrap();
    let ok = first.len() == 1000 && consistent && bytes_first == bytes_second;
    verdict(
        7,
        "dataset generation",
        ok,
        &format!(
            "n {}, oracle-consistent {consistent}, reproducible {}",
            first.len(),
            bytes_first == bytes_second
        ),
    );
}

#[test]
fn criterion_8_artifacts_are_byte_identical_and_replay_verifies() {
    let first = default_run();
    let second = default_run();
    let tick = first.scenario.tick_ms;

    let same_timeline = timeline_csv(&first.ticks, &first.events, tick)
        == timeline_csv(&second.ticks, &second.events, tick);
    let same_trace =
        bus_trace_jsonl(&first.trace).unwrap() == bus_trace_jsonl(&second.trace).unwrap();
    let same_reports = kpm_reports_csv(&first.reports) == kpm_reports_csv(&second.reports);

    let dir = tempfile::tempdir().unwrap();
    let timeline = extract_timeline(&first);
    write_run_artifacts(dir.path(), &first, &timeline).unwrap();
    let replayed = commands::replay(&ReplayOpts {
        run_dir: dir.path().to_path_buf(),
    });
    let ok = same_timeline && same_trace && same_reports && replayed.is_ok();
    verdict(
        8,
        "determinism and replay",
        ok,
        &format!(
            "timeline {same_timeline}, trace {same_trace}, reports {same_reports}, replay {replayed:?}"
        ),
    );
}

#[test]
fn criterion_9_only_the_attacker_is_quarantined_across_seeds() {
    let mut failures = Vec::new();
    for seed in 1..=10u64 {
        let mut scenario = Scenario::default_attack();
        scenario.seed = seed;
        let run = run_scenario(&scenario, None).expect("seeded run");
        let attacker = scenario.ues[0].id;
        let successful: Vec<_> = run
            .mitigations
            .iter()
            .filter(|m| m.success == Some(true))
            .collect();
        let attacker_hits = successful.iter().filter(|m| m.ue == attacker).count();
        let legit_records = run.mitigations.iter().filter(|m| m.ue != attacker).count();
        if attacker_hits != 1 || legit_records != 0 {
            failures.push((seed, attacker_hits, legit_records));
        }
    }
    verdict(
        9,
        "seed batch quarantine",
        failures.is_empty(),
        &format!("(seed, attacker mitigations, legit records): {failures:?}"),
    );
}
