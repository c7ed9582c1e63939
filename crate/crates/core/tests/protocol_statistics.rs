//! Monte Carlo sessions checked against the exact intercept-resend model and the noise bounds.

use pattern_qkd::analysis::{predict_intercept_resend, wrong_decode_flip_probability};
use pattern_qkd::channel::{EveKnowledge, EveStrategy, NoiseModel};
use pattern_qkd::code5::LogicalBasis;
use pattern_qkd::patterns::{compose, invert, valid_pattern_sets, PatternSet};
use pattern_qkd::protocol::{run_session, run_session_with_threads, SessionConfig, SessionReport};

fn config(num_blocks: usize, seed: u64, eve: EveStrategy) -> SessionConfig {
    SessionConfig { num_blocks, master_seed: seed, eve, noise: NoiseModel::noiseless(), ..Default::default() }
}

/// First set whose members differ by a permutation with wrong-decode flip probability `w`.
fn set_with_flip(w: f64) -> PatternSet {
    *valid_pattern_sets()
        .iter()
        .find(|s| {
            let rel = compose(&invert(&s.first()), &s.second());
            (wrong_decode_flip_probability(&rel, LogicalBasis::Z, 0) - w).abs() < 1e-9
        })
        .expect("class is populated")
}

fn sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt().max(1e-3)
}

fn assert_matches_prediction(cfg: &SessionConfig, knowledge: EveKnowledge) -> SessionReport {
    let (report, records) = run_session(cfg).unwrap();
    let exact = predict_intercept_resend(&cfg.secret_set, &knowledge, cfg.logical_basis);
    let acted = records.iter().filter(|r| r.eve.is_some()).count();
    let success = report.eve_success_rate.unwrap();
    assert!(
        (success - exact.eve_success).abs() < 4.0 * sigma(exact.eve_success, acted),
        "eve success {success} vs exact {} for {}",
        exact.eve_success,
        cfg.secret_set
    );
    assert!(
        (report.mqer_estimate - exact.mqer).abs() < 4.0 * sigma(exact.mqer, report.blocks_tested),
        "mqer {} vs exact {} for {}",
        report.mqer_estimate,
        exact.mqer,
        cfg.secret_set
    );
    report
}

#[test]
fn eve_knowing_the_set_matches_exact_model_in_each_flip_class() {
    for (w, expected_success) in [(0.0, 1.0), (0.5, 0.75), (0.625, 0.6875)] {
        let set = set_with_flip(w);
        let knowledge = EveKnowledge::Guessed(set);
        let cfg = SessionConfig { secret_set: set, ..config(6000, 11, EveStrategy::InterceptResend(knowledge)) };
        let exact = predict_intercept_resend(&set, &knowledge, LogicalBasis::Z);
        assert!((exact.eve_success - expected_success).abs() < 1e-12);
        assert_matches_prediction(&cfg, knowledge);
    }
}

#[test]
fn uniform_eve_matches_exact_model_in_both_bases() {
    for basis in [LogicalBasis::Z, LogicalBasis::X] {
        let cfg = SessionConfig {
            logical_basis: basis,
            ..config(8000, 5, EveStrategy::InterceptResend(EveKnowledge::Uniform))
        };
        let report = assert_matches_prediction(&cfg, EveKnowledge::Uniform);
        assert!(report.mqer_estimate > cfg.mqer_threshold);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = SessionConfig {
        noise: NoiseModel {
            per_qubit_flip_prob: 0.03,
            distance_km: 3.0,
            mean_photon_number: 0.2,
            ..Default::default()
        },
        ..config(3000, 99, EveStrategy::InterceptResend(EveKnowledge::Uniform))
    };
    let one = run_session_with_threads(&cfg, 1).unwrap();
    let four = run_session_with_threads(&cfg, 4).unwrap();
    assert_eq!(one, four);
}

#[test]
fn honest_noise_stays_under_the_two_error_tail() {
    let p: f64 = 0.05;
    let cfg = SessionConfig {
        noise: NoiseModel { per_qubit_flip_prob: p, ..NoiseModel::noiseless() },
        ..config(10_000, 3, EveStrategy::None)
    };
    let (report, records) = run_session(&cfg).unwrap();
    // a single error is always corrected, so flips need weight >= 2
    let tail = 1.0 - (1.0 - p).powi(5) - 5.0 * p * (1.0 - p).powi(4);
    assert!(report.mqer_estimate <= tail + 3.0 * sigma(tail, report.blocks_tested), "{}", report.mqer_estimate);
    assert!(records.iter().filter(|r| r.sifted && r.channel_error_weight <= 1).all(|r| r.bob_bit == r.alice_bit));
}

#[test]
fn eve_success_orders_with_her_knowledge() {
    let secret = set_with_flip(0.5);
    let rate = |eve: EveStrategy| {
        let cfg = SessionConfig { secret_set: secret, ..config(6000, 21, eve) };
        run_session(&cfg).unwrap().0.eve_success_rate.unwrap()
    };
    let knows = rate(EveStrategy::InterceptResend(EveKnowledge::Guessed(secret)));
    let uniform = rate(EveStrategy::InterceptResend(EveKnowledge::Uniform));
    assert!(knows > uniform + 0.1, "{knows} vs {uniform}");
}

#[test]
fn record_invariants_hold_with_loss_and_eve() {
    let cfg = SessionConfig {
        noise: NoiseModel { per_qubit_flip_prob: 0.02, distance_km: 2.2879, ..Default::default() },
        ..config(20_000, 8, EveStrategy::InterceptResend(EveKnowledge::Uniform))
    };
    let (report, records) = run_session(&cfg).unwrap();
    for r in &records {
        assert_eq!(r.sifted, !r.lost && r.alice_pattern_index == r.bob_pattern_index);
        assert!(!r.disclosed_for_test || r.sifted);
        assert_eq!(r.eve.is_some(), !r.lost);
    }
    assert_eq!(report.raw_key.len(), report.blocks_sifted - report.blocks_tested);
    // 2.2879 km at 0.2 dB/km is a per-photon survival of 0.9
    let survival = 1.0 - report.blocks_lost as f64 / report.blocks_sent as f64;
    assert!((survival - 0.9f64.powi(5)).abs() < 0.015, "{survival}");
}
