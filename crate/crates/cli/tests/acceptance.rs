//! Acceptance suite. Prints one PASS / FAIL / FLAG line per criterion and exits nonzero
//! if any criterion fails. FLAG marks a check whose contract allows a documented
//! deviation in place of a match; it does not fail the run.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pattern_qkd::analysis::{
    binary_entropy, guess_outcome_distribution, guess_outcome_distribution_for, holevo_paper_terms,
    holevo_physical_model, intercept_resend_mutual_info, pns_block_leak_prob, poisson_pmf, predict_intercept_resend,
};
use pattern_qkd::channel::{EveKnowledge, EveStrategy, NoiseModel};
use pattern_qkd::code5::{
    correct, correction_table, decode_block_in, encode_logical, extract_syndrome, LogicalBasis, Pauli, PauliString,
    Syndrome,
};
use pattern_qkd::patterns::{all_patterns, sample_pattern_set, valid_pattern_sets, PatternSet};
use pattern_qkd::protocol::{
    guessed_set_sharing, run_session_with_threads, session_stream, BlockRecord, Decision, SessionConfig, SessionReport,
};
use pattern_qkd::quantum::apply_permutation;

const SEED: u64 = 1;
const BLOCKS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Flag,
}

struct Verdict {
    status: Status,
    summary: String,
    notes: Vec<String>,
}

impl Verdict {
    fn new(ok: bool, summary: impl Into<String>) -> Self {
        Verdict { status: if ok { Status::Pass } else { Status::Fail }, summary: summary.into(), notes: Vec::new() }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn secret() -> PatternSet {
    SessionConfig::default().secret_set
}

fn session(eve: EveStrategy) -> (SessionReport, Vec<BlockRecord>) {
    let config = SessionConfig {
        num_blocks: BLOCKS,
        noise: NoiseModel::noiseless(),
        eve,
        master_seed: SEED,
        ..Default::default()
    };
    run_session_with_threads(&config, 1).expect("session runs")
}

fn c01_counts() -> Verdict {
    let patterns = all_patterns().len();
    let sets = valid_pattern_sets();
    let partners: Vec<usize> = all_patterns().iter().map(|p| sets.iter().filter(|s| s.contains(p)).count()).collect();
    let all_109 = partners.iter().all(|&n| n == 109);
    Verdict::new(
        patterns == 120 && sets.len() == 6540 && all_109,
        format!("patterns={patterns} sets={} partners_all_109={all_109}", sets.len()),
    )
}

fn c02_guess_distribution() -> Verdict {
    let g = guess_outcome_distribution();
    let exact = (g.p_both * 6540, g.p_one * 6540, g.p_none * 6540);
    let exact_ok = exact == (1.into(), 216.into(), 6323.into());
    let [both, one, none] = g.as_f64().map(|p| 100.0 * p);
    // printed figures 0.01529 %, about 3.3 %, 96.681 %; one unit in the last printed digit
    // covers both rounded and truncated figures
    let printed_ok = within(both, 0.01529, 0.00001) && within(one, 3.3, 0.1) && within(none, 96.681, 0.001);
    let uniform_over_s = valid_pattern_sets().iter().all(|s| guess_outcome_distribution_for(s) == g);
    Verdict::new(
        exact_ok && printed_ok && uniform_over_s,
        format!(
            "counts={}/{}/{} of 6540, percent={both:.5}/{one:.3}/{none:.3}, identical_for_all_S={uniform_over_s}",
            exact.0, exact.1, exact.2
        ),
    )
}

fn c03_closed_forms() -> Verdict {
    let h75 = binary_entropy(0.75).unwrap();
    let i75 = intercept_resend_mutual_info(0.75).unwrap();
    let h625 = binary_entropy(0.625).unwrap();
    let i625 = intercept_resend_mutual_info(0.625).unwrap();
    let h5 = binary_entropy(0.5).unwrap();
    let i5 = intercept_resend_mutual_info(0.5).unwrap();
    let ok = within(h75, 0.8113, 0.0005)
        && within(i75, 0.1887, 0.0005)
        && within(h625, 0.9544, 0.0005)
        && within(i625, 0.0456, 0.0005)
        && h5 == 1.0
        && i5 == 0.0;
    Verdict::new(ok, format!("h(0.75)={h75:.4} I={i75:.4} h(0.625)={h625:.4} I={i625:.4} h(0.5)={h5} I={i5}"))
}

fn c04_holevo() -> Verdict {
    let mut rng = session_stream(SEED);
    let sets: Vec<PatternSet> = (0..100).map(|_| sample_pattern_set(&mut rng)).collect();
    let mut max_chi = 0.0f64;
    let mut orthogonal = 0;
    let mut rho0_ok = true;
    let (mut chi_min, mut chi_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &sets {
        let t = holevo_paper_terms(s).unwrap();
        max_chi = max_chi.max(t.chi.abs());
        if t.pattern_overlap < 1e-9 {
            orthogonal += 1;
            rho0_ok &= within(t.entropy_rho0, 1.0, 1e-9);
        }
        let phys = holevo_physical_model(s).unwrap().chi_physical_model;
        chi_min = chi_min.min(phys);
        chi_max = chi_max.max(phys);
    }
    let phys_in_range = chi_min >= -1e-9 && chi_max <= 1.0 + 1e-9;
    Verdict::new(
        max_chi < 1e-9 && rho0_ok && phys_in_range,
        format!("max|chi_paper|={max_chi:.2e} over 100 sets; chi_physical in [{chi_min:.6}, {chi_max:.6}]"),
    )
    .note(format!(
        "sets with pattern-state overlap < 1e-9: {orthogonal} of 100, so the S(rho0) = 1 condition {}",
        if orthogonal == 0 { "was never triggered" } else { "was checked on those sets" }
    ))
}

fn single_paulis() -> Vec<PauliString> {
    (1..=5).flat_map(|q| [Pauli::X, Pauli::Y, Pauli::Z].map(move |p| PauliString::single(q, p).unwrap())).collect()
}

fn c05_syndromes() -> Verdict {
    let syndromes: Vec<Syndrome> = single_paulis().iter().map(Syndrome::of_error).collect();
    let mut values: Vec<u8> = syndromes.iter().map(|s| s.value()).collect();
    values.sort_unstable();
    values.dedup();
    let distinct_nonzero = values.len() == 15 && !values.contains(&0);
    let mut rng = session_stream(SEED);
    let trivial_on_codewords = (0..2u8).all(|b| extract_syndrome(&encode_logical(b), &mut rng).unwrap().0.is_trivial());
    let table_matches = single_paulis().iter().all(|e| correction_table().get(Syndrome::of_error(e)) == *e);
    Verdict::new(
        distinct_nonzero && trivial_on_codewords && table_matches,
        format!("distinct_nonzero={} trivial_on_codewords={trivial_on_codewords}", values.len()),
    )
}

fn c06_recovery() -> Verdict {
    let mut rng = session_stream(SEED);
    let mut worst = 1.0f64;
    let mut cases = 0;
    for e in single_paulis() {
        for b in 0..2u8 {
            let codeword = encode_logical(b);
            let (s, post) = extract_syndrome(&e.apply(&codeword), &mut rng).unwrap();
            worst = worst.min(correct(&post, s).fidelity_amplitude(&codeword));
            cases += 1;
        }
    }
    Verdict::new(cases == 30 && worst > 1.0 - 1e-10, format!("cases={cases} min_overlap={worst:.12}"))
}

fn c07_round_trip() -> Verdict {
    let mut rng = session_stream(SEED);
    let mut good = 0;
    let mut cases = 0;
    for p in all_patterns() {
        for b in 0..2u8 {
            let sent = apply_permutation(&encode_logical(b), p);
            let out = decode_block_in(&sent, p, LogicalBasis::Z, &mut rng).unwrap();
            cases += 1;
            good += usize::from(out.bit == b && out.syndrome.is_trivial() && out.is_deterministic(1e-10));
        }
    }
    Verdict::new(cases == 240 && good == 240, format!("deterministic_round_trips={good}/{cases}"))
}

fn c08_honest() -> Verdict {
    let (r, _) = session(EveStrategy::None);
    Verdict::new(
        r.mqer_estimate == 0.0 && within(r.sift_rate, 0.5, 0.015),
        format!("mqer={} sift_rate={:.4} decision={}", r.mqer_estimate, r.sift_rate, r.decision),
    )
}

fn c09_eve_uniform() -> Verdict {
    let (r, _) = session(EveStrategy::InterceptResend(EveKnowledge::Uniform));
    let exact = predict_intercept_resend(&secret(), &EveKnowledge::Uniform, LogicalBasis::Z);
    let sigma = (exact.mqer * (1.0 - exact.mqer) / r.blocks_tested as f64).sqrt();
    Verdict::new(
        within(r.mqer_estimate, 0.50, 0.05) && r.decision == Decision::Abort,
        format!("mqer={:.4} (tested={}) decision={}; target 0.50 +/- 0.05", r.mqer_estimate, r.blocks_tested, r.decision),
    )
    .note(format!(
        "exact expectation for this code and decoder: mqer={:.6} (85/192), eve_success={:.6} (23/48), sampling sigma={sigma:.4}",
        exact.mqer, exact.eve_success
    ))
}

/// `(eve_success, sigma, wrong-decode error rate)` measured for a guessed set.
fn measure_eve(guess: PatternSet) -> (f64, f64, f64) {
    let s = secret();
    let (r, records) = session(EveStrategy::InterceptResend(EveKnowledge::Guessed(guess)));
    let success = r.eve_success_rate.expect("eve acted");
    let n = records.iter().filter(|b| b.eve.is_some()).count() as f64;
    let wrong: Vec<&BlockRecord> =
        records.iter().filter(|b| b.eve.is_some_and(|e| e.guessed_pattern != s.get(b.alice_pattern_index))).collect();
    let wrong_err = wrong.iter().filter(|b| b.eve.unwrap().eve_bit != b.alice_bit).count() as f64 / wrong.len() as f64;
    (success, (success * (1.0 - success) / n).sqrt(), wrong_err)
}

fn c10_eve_knowledge() -> Verdict {
    let s = secret();
    let mut status = Status::Pass;
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    for (k, target) in [(2, 0.75), (1, 0.625), (0, 0.5)] {
        let guess = guessed_set_sharing(&s, k).unwrap();
        let (success, sigma, wrong_err) = measure_eve(guess);
        let exact = predict_intercept_resend(&s, &EveKnowledge::Guessed(guess), LogicalBasis::Z);
        let ok = (success - target).abs() <= 3.0 * sigma;
        let tag = match (ok, k) {
            (true, _) => "ok",
            (false, 2) => {
                status = Status::Fail;
                "outside 3 sigma"
            }
            (false, _) => {
                if status == Status::Pass {
                    status = Status::Flag;
                }
                "flagged"
            }
        };
        parts.push(format!("k={k}: {success:.4} vs {target} ({tag})"));
        notes.push(format!(
            "k={k}: guess={guess} 3sigma={:.4} measured_wrong_decode_error={wrong_err:.4} (unbiased would be 0.5); exact eve_success={:.6}",
            3.0 * sigma,
            exact.eve_success
        ));
    }
    let mut v = Verdict::new(true, parts.join("; "));
    v.status = status;
    v.notes = notes;
    v
}

fn c11_eve_knows_s() -> Verdict {
    let (known, _) = session(EveStrategy::InterceptResend(EveKnowledge::Guessed(secret())));
    let (uniform, _) = session(EveStrategy::InterceptResend(EveKnowledge::Uniform));
    let exact = predict_intercept_resend(&secret(), &EveKnowledge::Guessed(secret()), LogicalBasis::Z);
    Verdict::new(
        known.mqer_estimate > 0.0 && known.mqer_estimate < uniform.mqer_estimate,
        format!(
            "mqer_knows_S={:.4} mqer_uniform={:.4} (seed {SEED} for both)",
            known.mqer_estimate, uniform.mqer_estimate
        ),
    )
    .note(format!("exact mqer when Eve knows S: {:.6}", exact.mqer))
}

fn c12_pns() -> Verdict {
    let oracle = |mu: f64| {
        let q = 1.0 - poisson_pmf(0, mu).unwrap() - poisson_pmf(1, mu).unwrap();
        let choose = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
        (3..=5).map(|j| choose[j] * q.powi(j as i32) * (1.0 - q).powi(5 - j as i32)).sum::<f64>()
    };
    let zero = pns_block_leak_prob(0.0).unwrap();
    let at_01 = pns_block_leak_prob(0.1).unwrap();
    let rel_oracle = (at_01 - oracle(0.1)).abs() / oracle(0.1);
    let rel_printed = (at_01 - 1.02e-6).abs() / 1.02e-6;
    let grid = [0.0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
    let leaks: Vec<f64> = grid.iter().map(|&m| pns_block_leak_prob(m).unwrap()).collect();
    let monotone = leaks.windows(2).all(|w| w[1] > w[0]);
    Verdict::new(
        zero == 0.0 && rel_oracle < 0.02 && rel_printed < 0.02 && monotone,
        format!("leak(0)={zero} leak(0.1)={at_01:.4e} rel_err_vs_oracle={rel_oracle:.1e} monotone={monotone}"),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pqkd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn c13_reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("eve.cfg"), "eve.kind = intercept_resend\nmaster_seed = 7\n").unwrap();
    std::fs::write(dir.join("bad.cfg"), "num_blocks = 10\nnot_a_key = 1\n").unwrap();
    let first = run_cli(&["--config", "eve.cfg", "--out", "a", "simulate"], dir);
    let second = run_cli(&["--config", "eve.cfg", "--out", "b", "simulate"], dir);
    let a = std::fs::read(dir.join("a/records.txt")).unwrap();
    let b = std::fs::read(dir.join("b/records.txt")).unwrap();
    let honest = run_cli(&["--out", "h", "--seed", "7", "simulate"], dir);
    let bad = run_cli(&["--config", "bad.cfg", "--out", "x", "simulate"], dir);
    let empty = run_cli(&["--out", "s", "sweep", "--axis", "k", "--values"], dir);
    let codes = (honest, first, second, bad, empty);
    Verdict::new(
        a == b && !a.is_empty() && codes == (0, 3, 3, 2, 2),
        format!(
            "records_identical={} ({} bytes); exit codes honest={honest} eve={first}/{second} bad_config={bad} empty_sweep={empty}",
            a == b,
            a.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 13] = [
        ("combinatorics counts", c01_counts),
        ("guess outcome distribution", c02_guess_distribution),
        ("binary entropy and mutual information", c03_closed_forms),
        ("Holevo quantities", c04_holevo),
        ("syndrome injectivity", c05_syndromes),
        ("single-error recovery", c06_recovery),
        ("encode/decode round trip", c07_round_trip),
        ("honest noiseless session", c08_honest),
        ("Eve uniform over 120 patterns", c09_eve_uniform),
        ("Eve knowledge sweep", c10_eve_knowledge),
        ("Eve knows the secret set", c11_eve_knows_s),
        ("PNS leak analytics", c12_pns),
        ("reproducibility and exit codes", c13_reproducibility),
    ];
    let mut failed = 0;
    let mut flagged = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        let label = match verdict.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Flag => {
                flagged += 1;
                "FLAG"
            }
        };
        println!("{label} {:>2} {name}: {} [{:.2}s]", i + 1, verdict.summary, start.elapsed().as_secs_f64());
        for note in verdict.notes {
            println!("        {note}");
        }
    }
    println!("acceptance: {} passed, {flagged} flagged, {failed} failed", criteria.len() - failed - flagged);
    if failed > 0 {
        std::process::exit(1);
    }
}
