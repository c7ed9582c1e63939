//! Flat `key = value` session config files.
//!
//! ```text
//! # comments and blank lines are ignored
//! num_blocks = 10000
//! secret_set = 12345,12453        # or id:<n>
//! test_fraction = 0.5
//! mqer_threshold = 0.10
//! noise.per_qubit_flip_prob = 0
//! noise.distance_km = 0
//! noise.loss_db_per_km = 0.2
//! noise.mean_photon_number = 0
//! eve.kind = intercept_resend     # or none
//! eve.knowledge = uniform         # or a set (12345,12453 / id:<n>) or shared:<0|1|2>
//! master_seed = 42
//! logical_basis = Z
//! ```
//!
//! Every key is optional; unknown and repeated keys are rejected.

use std::collections::HashSet;
use std::str::FromStr;

use pattern_qkd::channel::{EveKnowledge, EveStrategy};
use pattern_qkd::code5::LogicalBasis;
use pattern_qkd::patterns::PatternSet;
use pattern_qkd::protocol::{eve_with_shared_knowledge, SessionConfig};
use thiserror::Error;

pub const KEYS: [&str; 12] = [
    "num_blocks",
    "secret_set",
    "test_fraction",
    "mqer_threshold",
    "noise.per_qubit_flip_prob",
    "noise.distance_km",
    "noise.loss_db_per_km",
    "noise.mean_photon_number",
    "eve.kind",
    "eve.knowledge",
    "master_seed",
    "logical_basis",
];

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {field}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to one line.
    pub line: usize,
    pub field: String,
    pub message: String,
}

fn err(line: usize, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, field: field.to_string(), message: message.into() }
}

/// Eve knowledge as written in the file; `shared:k` is resolved against the secret set.
#[derive(Debug, Clone, Copy, PartialEq)]
enum KnowledgeSpec {
    Explicit(EveKnowledge),
    Shared(usize),
}

pub fn parse_pattern_set(value: &str) -> Result<PatternSet, String> {
    if let Some(id) = value.strip_prefix("id:") {
        let id: usize = id.trim().parse().map_err(|e| format!("bad set id {id:?}: {e}"))?;
        return PatternSet::from_id(id).ok_or_else(|| format!("unknown set id {id}"));
    }
    value.parse().map_err(|e| format!("{e}"))
}

fn parse_number<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| err(line, key, format!("cannot parse {value:?}: {e}")))
}

fn parse_real(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_number(line, key, value)?;
    if !v.is_finite() {
        return Err(err(line, key, format!("{value:?} is not finite")));
    }
    Ok(v)
}

pub fn parse_config(text: &str) -> Result<SessionConfig, ConfigError> {
    let mut config = SessionConfig::default();
    let mut seen = HashSet::new();
    let mut eve_kind: Option<(usize, bool)> = None;
    let mut knowledge: Option<(usize, KnowledgeSpec)> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line, content, "expected `key = value`"))?;
        if !KEYS.contains(&key) {
            return Err(err(line, key, "unknown key"));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(line, key, "key given more than once"));
        }
        match key {
            "num_blocks" => config.num_blocks = parse_number(line, key, value)?,
            "secret_set" => config.secret_set = parse_pattern_set(value).map_err(|m| err(line, key, m))?,
            "test_fraction" => config.test_fraction = parse_real(line, key, value)?,
            "mqer_threshold" => config.mqer_threshold = parse_real(line, key, value)?,
            "noise.per_qubit_flip_prob" => config.noise.per_qubit_flip_prob = parse_real(line, key, value)?,
            "noise.distance_km" => config.noise.distance_km = parse_real(line, key, value)?,
            "noise.loss_db_per_km" => config.noise.loss_db_per_km = parse_real(line, key, value)?,
            "noise.mean_photon_number" => config.noise.mean_photon_number = parse_real(line, key, value)?,
            "eve.kind" => {
                let active = match value {
                    "none" => false,
                    "intercept_resend" => true,
                    other => return Err(err(line, key, format!("expected none or intercept_resend, got {other:?}"))),
                };
                eve_kind = Some((line, active));
            }
            "eve.knowledge" => {
                let spec = if let Some(k) = value.strip_prefix("shared:") {
                    let k: usize = parse_number(line, key, k.trim())?;
                    if k > 2 {
                        return Err(err(line, key, "shared count must be 0, 1 or 2"));
                    }
                    KnowledgeSpec::Shared(k)
                } else if value == "uniform" {
                    KnowledgeSpec::Explicit(EveKnowledge::Uniform)
                } else {
                    let set = parse_pattern_set(value).map_err(|m| err(line, key, m))?;
                    KnowledgeSpec::Explicit(EveKnowledge::Guessed(set))
                };
                knowledge = Some((line, spec));
            }
            "master_seed" => config.master_seed = parse_number(line, key, value)?,
            "logical_basis" => {
                config.logical_basis = LogicalBasis::from_str(value).map_err(|e| err(line, key, e.to_string()))?
            }
            _ => unreachable!("key list checked above"),
        }
    }

    config.eve = match (eve_kind, knowledge) {
        (None | Some((_, false)), None) => EveStrategy::None,
        (None | Some((_, false)), Some((line, _))) => {
            return Err(err(line, "eve.knowledge", "requires eve.kind = intercept_resend"))
        }
        (Some((_, true)), None) => EveStrategy::InterceptResend(EveKnowledge::Uniform),
        (Some((_, true)), Some((_, KnowledgeSpec::Explicit(k)))) => EveStrategy::InterceptResend(k),
        (Some((_, true)), Some((line, KnowledgeSpec::Shared(k)))) => {
            eve_with_shared_knowledge(&config.secret_set, k)
                .ok_or_else(|| err(line, "eve.knowledge", "no set with that overlap"))?
        }
    };
    Ok(config)
}

/// Canonical text form; [`parse_config`] reads it back to the same config.
pub fn render_config(config: &SessionConfig) -> String {
    let (kind, knowledge) = match config.eve {
        EveStrategy::None => ("none", None),
        EveStrategy::InterceptResend(EveKnowledge::Uniform) => ("intercept_resend", Some("uniform".to_string())),
        EveStrategy::InterceptResend(EveKnowledge::Guessed(s)) => ("intercept_resend", Some(s.to_string())),
    };
    let mut out = String::new();
    let mut push = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    push("num_blocks", config.num_blocks.to_string());
    push("secret_set", config.secret_set.to_string());
    push("test_fraction", format!("{:?}", config.test_fraction));
    push("mqer_threshold", format!("{:?}", config.mqer_threshold));
    push("noise.per_qubit_flip_prob", format!("{:?}", config.noise.per_qubit_flip_prob));
    push("noise.distance_km", format!("{:?}", config.noise.distance_km));
    push("noise.loss_db_per_km", format!("{:?}", config.noise.loss_db_per_km));
    push("noise.mean_photon_number", format!("{:?}", config.noise.mean_photon_number));
    push("eve.kind", kind.to_string());
    if let Some(k) = knowledge {
        push("eve.knowledge", k);
    }
    push("master_seed", config.master_seed.to_string());
    push("logical_basis", config.logical_basis.to_string());
    out
}
