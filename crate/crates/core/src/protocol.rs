//! Block transmission, sifting, MQER estimation and the continue/abort decision.
//!
//! Every block draws from four independent ChaCha streams keyed by
//! `(master_seed, block_id)`, so a session is reproducible regardless of how blocks are
//! scheduled. Within a block the draw order is fixed:
//!
//! * Alice: logical bit, then pattern index.
//! * Eve: guessed pattern, then her decode measurements.
//! * Channel: depolarizing draws, five photon-survival draws, then (if `μ > 0`) five
//!   photon counts.
//! * Bob: pattern index, then his decode measurements (skipped for lost blocks).
//!
//! The test subset is drawn from a separate session-level stream.

use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::channel::{
    apply_depolarizing, eve_apply, is_pns_leak, sample_block_loss, sample_photon_numbers, EveKnowledge, EveRecord,
    EveStrategy, NoiseModel,
};
use crate::code5::{decode_block_in, encode, LogicalBasis, PauliString, Syndrome};
use crate::error::{QkdError, Result};
use crate::patterns::{sample_pattern, PatternSet};
use crate::quantum::apply_permutation;

pub const DEFAULT_MQER_THRESHOLD: f64 = 0.10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.5;
pub const DEFAULT_NUM_BLOCKS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub num_blocks: usize,
    pub secret_set: PatternSet,
    pub test_fraction: f64,
    pub mqer_threshold: f64,
    pub noise: NoiseModel,
    pub eve: EveStrategy,
    pub master_seed: u64,
    pub logical_basis: LogicalBasis,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            num_blocks: DEFAULT_NUM_BLOCKS,
            secret_set: PatternSet::from_id(0).expect("set table is non-empty"),
            test_fraction: DEFAULT_TEST_FRACTION,
            mqer_threshold: DEFAULT_MQER_THRESHOLD,
            noise: NoiseModel::default(),
            eve: EveStrategy::None,
            master_seed: 0,
            logical_basis: LogicalBasis::Z,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 {
            return Err(QkdError::InvalidConfig("num_blocks must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(QkdError::InvalidConfig(format!(
                "test_fraction must lie strictly inside (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.mqer_threshold) {
            return Err(QkdError::InvalidConfig(format!(
                "mqer_threshold must lie in [0, 1], got {}",
                self.mqer_threshold
            )));
        }
        self.noise.validate()
    }
}

/// Which party's stream a draw comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Subchannel {
    Alice = 0,
    Eve = 1,
    Channel = 2,
    Bob = 3,
}

/// Independent stream for one party in one block.
pub fn block_stream(master_seed: u64, block_id: u64, sub: Subchannel) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(block_id * 4 + sub as u64);
    rng
}

/// Stream used to choose the disclosed test subset.
pub fn session_stream(master_seed: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(u64::MAX);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub block_id: usize,
    pub alice_bit: u8,
    pub alice_pattern_index: u8,
    pub bob_pattern_index: u8,
    pub lost: bool,
    /// Bob's syndrome; trivial for lost blocks.
    pub syndrome: Syndrome,
    /// Bob's corrected bit; 0 for lost blocks.
    pub bob_bit: u8,
    pub eve: Option<EveRecord>,
    pub sifted: bool,
    pub disclosed_for_test: bool,
    /// Number of qubits the depolarizing channel hit. Not visible to either party.
    pub channel_error_weight: usize,
    /// Whether the block met the photon-number-splitting leak rule.
    pub pns_leak: bool,
}

/// Column order of the line-delimited records file.
pub const RECORD_COLUMNS: [&str; 11] = [
    "block_id",
    "alice_bit",
    "a_idx",
    "b_idx",
    "lost",
    "syndrome",
    "bob_bit",
    "eve_guess",
    "eve_bit",
    "sifted",
    "tested",
];

impl BlockRecord {
    /// True when the disclosed bits disagree after correction.
    pub fn is_multi_qubit_error(&self) -> bool {
        self.bob_bit != self.alice_bit
    }

    /// One comma-separated row in [`RECORD_COLUMNS`] order.
    pub fn to_row(&self) -> String {
        let (guess, eve_bit) = match &self.eve {
            Some(e) => (e.guessed_pattern.to_string(), e.eve_bit.to_string()),
            None => ("-".to_string(), "-".to_string()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.block_id,
            self.alice_bit,
            self.alice_pattern_index,
            self.bob_pattern_index,
            u8::from(self.lost),
            self.syndrome,
            self.bob_bit,
            guess,
            eve_bit,
            u8::from(self.sifted),
            u8::from(self.disclosed_for_test),
        )
    }
}

pub fn run_block(config: &SessionConfig, block_id: usize) -> Result<BlockRecord> {
    run_block_with_error(config, block_id, None)
}

/// [`run_block`] with an extra Pauli error applied right after the channel noise.
pub fn run_block_with_error(
    config: &SessionConfig,
    block_id: usize,
    injected: Option<PauliString>,
) -> Result<BlockRecord> {
    let id = block_id as u64;
    let seed = config.master_seed;
    let basis = config.logical_basis;

    let mut alice = block_stream(seed, id, Subchannel::Alice);
    let alice_bit = u8::from(rand::Rng::random::<bool>(&mut alice));
    let (alice_pattern_index, alice_pattern) = sample_pattern(&config.secret_set, &mut alice);
    let sent = apply_permutation(&encode(alice_bit, basis), &alice_pattern);

    let mut eve_rng = block_stream(seed, id, Subchannel::Eve);
    let (intercepted, eve) = eve_apply(&config.eve, &sent, basis, &mut eve_rng)?;

    let mut channel = block_stream(seed, id, Subchannel::Channel);
    let (mut arriving, channel_error_weight) =
        apply_depolarizing(&intercepted, config.noise.per_qubit_flip_prob, &mut channel)?;
    if let Some(e) = injected {
        arriving = e.apply(&arriving);
    }
    let lost = sample_block_loss(&config.noise, &mut channel);
    let photons = sample_photon_numbers(config.noise.mean_photon_number, &mut channel)?;

    let mut bob = block_stream(seed, id, Subchannel::Bob);
    let (bob_pattern_index, bob_pattern) = sample_pattern(&config.secret_set, &mut bob);
    let (bob_bit, syndrome) = if lost {
        (0, Syndrome::TRIVIAL)
    } else {
        let out = decode_block_in(&arriving, &bob_pattern, basis, &mut bob)?;
        (out.bit, out.syndrome)
    };

    Ok(BlockRecord {
        block_id,
        alice_bit,
        alice_pattern_index,
        bob_pattern_index,
        lost,
        syndrome,
        bob_bit,
        eve: if lost { None } else { eve },
        sifted: !lost && alice_pattern_index == bob_pattern_index,
        disclosed_for_test: false,
        channel_error_weight,
        pns_leak: is_pns_leak(&photons),
    })
}

/// Records where Bob's pattern matched Alice's, in order.
pub fn sift(records: &[BlockRecord]) -> Vec<BlockRecord> {
    records.iter().filter(|r| r.sifted).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MqerEstimate {
    pub mqer: f64,
    pub tested: usize,
    pub events: usize,
    /// Block ids of the disclosed records, ascending.
    pub tested_block_ids: Vec<usize>,
    /// Set when there was nothing to test; `mqer` is then reported as 0.
    pub empty_warning: bool,
}

/// Discloses `⌈test_fraction·n⌉` sifted records chosen uniformly without replacement.
pub fn estimate_mqer<R: rand::Rng + ?Sized>(
    sifted: &[BlockRecord],
    test_fraction: f64,
    rng: &mut R,
) -> Result<MqerEstimate> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(QkdError::InvalidConfig(format!(
            "test_fraction must lie strictly inside (0, 1), got {test_fraction}"
        )));
    }
    if sifted.is_empty() {
        return Ok(MqerEstimate { mqer: 0.0, tested: 0, events: 0, tested_block_ids: Vec::new(), empty_warning: true });
    }
    let amount = ((test_fraction * sifted.len() as f64).ceil() as usize).min(sifted.len());
    let mut chosen = index::sample(rng, sifted.len(), amount).into_vec();
    chosen.sort_unstable();
    let events = chosen.iter().filter(|&&i| sifted[i].is_multi_qubit_error()).count();
    Ok(MqerEstimate {
        mqer: events as f64 / amount as f64,
        tested: amount,
        events,
        tested_block_ids: chosen.iter().map(|&i| sifted[i].block_id).collect(),
        empty_warning: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Abort,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Continue => "continue",
            Decision::Abort => "abort",
        })
    }
}

/// Continue only when the MQER is strictly below the threshold.
pub fn decide(mqer: f64, threshold: f64) -> Decision {
    if mqer < threshold {
        Decision::Continue
    } else {
        Decision::Abort
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub blocks_sent: usize,
    pub blocks_lost: usize,
    pub blocks_sifted: usize,
    pub blocks_tested: usize,
    pub mqer_events: usize,
    pub mqer_estimate: f64,
    pub mqer_empty_warning: bool,
    pub decision: Decision,
    /// Alice's sifted bits that were not disclosed, in block order.
    pub raw_key: Vec<u8>,
    /// Positions where Bob's copy of the raw key differs (not observable by the parties).
    pub raw_key_errors: usize,
    pub eve_success_rate: Option<f64>,
    /// Sifted blocks over received (non-lost) blocks.
    pub sift_rate: f64,
    pub pns_leak_blocks: usize,
}

impl SessionReport {
    /// Flat `key = value` pairs in a fixed order.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let key: String = self.raw_key.iter().map(|b| char::from(b'0' + b)).collect();
        vec![
            ("blocks_sent", self.blocks_sent.to_string()),
            ("blocks_lost", self.blocks_lost.to_string()),
            ("blocks_sifted", self.blocks_sifted.to_string()),
            ("blocks_tested", self.blocks_tested.to_string()),
            ("mqer_events", self.mqer_events.to_string()),
            ("mqer_estimate", format!("{:.6}", self.mqer_estimate)),
            ("mqer_empty_warning", self.mqer_empty_warning.to_string()),
            ("decision", self.decision.to_string()),
            ("sift_rate", format!("{:.6}", self.sift_rate)),
            ("eve_success_rate", self.eve_success_rate.map_or_else(|| "-".to_string(), |r| format!("{r:.6}"))),
            ("pns_leak_blocks", self.pns_leak_blocks.to_string()),
            ("raw_key_length", self.raw_key.len().to_string()),
            ("raw_key_errors", self.raw_key_errors.to_string()),
            ("raw_key", key),
        ]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Runs every block on the global rayon pool, then sifts, tests and decides.
pub fn run_session(config: &SessionConfig) -> Result<(SessionReport, Vec<BlockRecord>)> {
    config.validate()?;
    let records = (0..config.num_blocks).into_par_iter().map(|id| run_block(config, id)).collect::<Result<Vec<_>>>()?;
    finish_session(config, records)
}

/// Same as [`run_session`] on a dedicated pool of `threads` workers.
pub fn run_session_with_threads(config: &SessionConfig, threads: usize) -> Result<(SessionReport, Vec<BlockRecord>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| QkdError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_session(config))
}

fn finish_session(config: &SessionConfig, mut records: Vec<BlockRecord>) -> Result<(SessionReport, Vec<BlockRecord>)> {
    let sifted = sift(&records);
    let estimate = estimate_mqer(&sifted, config.test_fraction, &mut session_stream(config.master_seed))?;
    for &id in &estimate.tested_block_ids {
        records[id].disclosed_for_test = true;
    }

    let mut raw_key = Vec::with_capacity(sifted.len() - estimate.tested);
    let mut raw_key_errors = 0;
    for r in records.iter().filter(|r| r.sifted && !r.disclosed_for_test) {
        raw_key.push(r.alice_bit);
        raw_key_errors += usize::from(r.is_multi_qubit_error());
    }

    let blocks_lost = records.iter().filter(|r| r.lost).count();
    let eve_records: Vec<_> = records.iter().filter_map(|r| r.eve.map(|e| (r.alice_bit, e))).collect();
    let eve_success_rate = match (config.eve, eve_records.is_empty()) {
        (EveStrategy::None, _) | (_, true) => None,
        _ => Some(ratio(eve_records.iter().filter(|(a, e)| *a == e.eve_bit).count(), eve_records.len())),
    };

    let report = SessionReport {
        blocks_sent: records.len(),
        blocks_lost,
        blocks_sifted: sifted.len(),
        blocks_tested: estimate.tested,
        mqer_events: estimate.events,
        mqer_estimate: estimate.mqer,
        mqer_empty_warning: estimate.empty_warning,
        decision: decide(estimate.mqer, config.mqer_threshold),
        raw_key,
        raw_key_errors,
        eve_success_rate,
        sift_rate: ratio(sifted.len(), records.len() - blocks_lost),
        pns_leak_blocks: records.iter().filter(|r| r.pns_leak).count(),
    };
    Ok((report, records))
}

/// A guessed set sharing exactly `shared` patterns with `secret`: the secret itself for 2,
/// otherwise the first set in enumeration order with the required overlap (keeping
/// `secret.first()` when `shared == 1`).
pub fn guessed_set_sharing(secret: &PatternSet, shared: usize) -> Option<PatternSet> {
    match shared {
        2 => Some(*secret),
        1 => crate::patterns::valid_pattern_sets()
            .iter()
            .find(|s| s.contains(&secret.first()) && !s.contains(&secret.second()))
            .copied(),
        0 => crate::patterns::valid_pattern_sets().iter().find(|s| s.shared_with(secret) == 0).copied(),
        _ => None,
    }
}

/// Intercept-resend strategy whose guessed set shares `shared` patterns with `secret`.
pub fn eve_with_shared_knowledge(secret: &PatternSet, shared: usize) -> Option<EveStrategy> {
    guessed_set_sharing(secret, shared).map(|s| EveStrategy::InterceptResend(EveKnowledge::Guessed(s)))
}
