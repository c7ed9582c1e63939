//! The four subcommands. Each returns the text for stdout and the process exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pattern_qkd::analysis::{
    binary_entropy, chi_table, eve_success_probability, guess_outcome_distribution, holevo_paper_terms,
    holevo_physical_model, intercept_resend_mutual_info, multiphoton_prob, pns_block_leak_prob, poisson_pmf,
    predict_intercept_resend,
};
use pattern_qkd::channel::EveKnowledge;
use pattern_qkd::patterns::{all_patterns, valid_pattern_sets, PatternSet};
use pattern_qkd::protocol::{
    eve_with_shared_knowledge, guessed_set_sharing, run_session, Decision, SessionConfig, RECORD_COLUMNS,
};
use pattern_qkd::QkdError;
use thiserror::Error;

use crate::config::{parse_config, render_config, ConfigError};
use crate::output::{prepare_dir, sha256_hex, unix_now, write_all, OutputFile, RunManifest};

pub const EXIT_CONTINUE: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    /// Output location that cannot be created or written.
    #[error("output: {0}")]
    Output(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Output(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// Config validation failures are the caller's fault; anything else from a run is ours.
fn session_error(e: QkdError) -> CliError {
    match e {
        QkdError::InvalidConfig(_)
        | QkdError::ProbabilityOutOfRange(_)
        | QkdError::NegativeMean(_)
        | QkdError::PatternsTooClose(..)
        | QkdError::InvalidPattern(_) => CliError::Usage(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

fn output_error(e: std::io::Error) -> CliError {
    CliError::Output(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub stdout: String,
    pub exit_code: i32,
}

/// Flags shared by every subcommand that runs sessions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub blocks: Option<usize>,
    pub threshold: Option<f64>,
    pub test_fraction: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut SessionConfig) {
        if let Some(s) = self.seed {
            config.master_seed = s;
        }
        if let Some(n) = self.blocks {
            config.num_blocks = n;
        }
        if let Some(t) = self.threshold {
            config.mqer_threshold = t;
        }
        if let Some(f) = self.test_fraction {
            config.test_fraction = f;
        }
    }
}

/// Reads the config file (or defaults when none is given) and applies the overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<SessionConfig, CliError> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => SessionConfig::default(),
    };
    overrides.apply(&mut config);
    Ok(config)
}

fn finite(label: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Internal(format!("{label} is not finite")))
    }
}

// ---------------------------------------------------------------- enumerate

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    pub out: PathBuf,
    pub sets_csv: bool,
}

pub fn cmd_enumerate(opts: &EnumerateOptions) -> Result<CommandOutput, CliError> {
    let patterns = all_patterns();
    let sets = valid_pattern_sets();

    let mut pattern_csv = String::from("index,pattern\n");
    for p in patterns {
        writeln!(pattern_csv, "{},{}", p.index(), p).unwrap();
    }
    let mut files = vec![OutputFile::new("patterns", opts.out.join("patterns.csv"), pattern_csv)];
    if opts.sets_csv {
        let mut set_csv = String::from("set_id,perm_a,perm_b,distance\n");
        for (id, s) in sets.iter().enumerate() {
            writeln!(set_csv, "{id},{},{},{}", s.first(), s.second(), s.distance()).unwrap();
        }
        files.push(OutputFile::new("sets", opts.out.join("sets.csv"), set_csv));
    }
    let summary = format!("patterns={} sets={}\n", patterns.len(), sets.len());
    files.push(OutputFile::new("summary", opts.out.join("summary.txt"), summary.clone()));

    prepare_dir(&opts.out).map_err(output_error)?;
    write_all(&files).map_err(output_error)?;
    Ok(CommandOutput { stdout: summary, exit_code: EXIT_CONTINUE })
}

// ---------------------------------------------------------------- analyze

pub const DEFAULT_MU_GRID: [f64; 7] = [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0];

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub mu: Vec<f64>,
    pub set_id: usize,
    pub chi_csv: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { mu: DEFAULT_MU_GRID.to_vec(), set_id: 0, chi_csv: None, out: None }
    }
}

struct Report(Vec<(String, String)>);

impl Report {
    fn real(&mut self, key: impl Into<String>, v: f64) -> Result<(), CliError> {
        let key = key.into();
        let v = finite(&key, v)?;
        self.0.push((key, format!("{v:.6}")));
        Ok(())
    }

    fn sci(&mut self, key: impl Into<String>, v: f64) -> Result<(), CliError> {
        let key = key.into();
        let v = finite(&key, v)?;
        self.0.push((key, format!("{v:.6e}")));
        Ok(())
    }

    fn text(&mut self, key: impl Into<String>, v: impl ToString) {
        self.0.push((key.into(), v.to_string()));
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn internal(e: QkdError) -> CliError {
    CliError::Internal(e.to_string())
}

pub fn cmd_analyze(opts: &AnalyzeOptions) -> Result<CommandOutput, CliError> {
    if opts.mu.is_empty() {
        return Err(CliError::Usage("empty mu list".into()));
    }
    if let Some(bad) = opts.mu.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(CliError::Usage(format!("mean photon number must be finite and >= 0, got {bad}")));
    }
    let set = PatternSet::from_id(opts.set_id).ok_or_else(|| {
        CliError::Usage(format!("unknown set id {} (valid: 0..{})", opts.set_id, valid_pattern_sets().len()))
    })?;

    let mut r = Report(Vec::new());
    for (label, k) in [("k2", 2), ("k1", 1), ("k0", 0)] {
        let p = eve_success_probability(k).map_err(internal)?;
        r.real(format!("eve_success.{label}"), p)?;
        r.real(format!("binary_entropy.{label}"), binary_entropy(p).map_err(internal)?)?;
        r.real(format!("mutual_info.{label}"), intercept_resend_mutual_info(p).map_err(internal)?)?;
    }

    let g = guess_outcome_distribution();
    let [both, one, none] = g.as_f64();
    r.text("guess.p_both_exact", g.p_both);
    r.text("guess.p_one_exact", g.p_one);
    r.text("guess.p_none_exact", g.p_none);
    let total = valid_pattern_sets().len() as u64;
    for (label, ratio) in [("both", g.p_both), ("one", g.p_one), ("none", g.p_none)] {
        let count = (ratio * total).to_integer();
        r.text(format!("guess.count_{label}"), format!("{count}/{total}"));
    }
    r.real("guess.p_both_percent", 100.0 * both)?;
    r.real("guess.p_one_percent", 100.0 * one)?;
    r.real("guess.p_none_percent", 100.0 * none)?;

    r.text("set_id", opts.set_id);
    r.text("set", set);
    let paper = holevo_paper_terms(&set).map_err(internal)?;
    r.real("chi_paper_model", paper.chi)?;
    r.real("paper.entropy_mean", paper.entropy_mean)?;
    r.real("paper.entropy_rho0", paper.entropy_rho0)?;
    r.real("paper.entropy_rho1", paper.entropy_rho1)?;
    r.real("paper.pattern_overlap", paper.pattern_overlap)?;
    let phys = holevo_physical_model(&set).map_err(internal)?;
    r.real("chi_physical_model", phys.chi_physical_model)?;
    r.real("physical.entropy_mean", phys.entropy_mean)?;
    r.real("physical.entropy_rho0", phys.entropy_rho0)?;
    r.real("physical.entropy_rho1", phys.entropy_rho1)?;

    let basis = Default::default();
    let uniform = predict_intercept_resend(&set, &EveKnowledge::Uniform, basis);
    r.real("intercept.uniform.eve_success", uniform.eve_success)?;
    r.real("intercept.uniform.mqer", uniform.mqer)?;
    for k in [2, 1, 0] {
        let Some(guess) = guessed_set_sharing(&set, k) else { continue };
        let p = predict_intercept_resend(&set, &EveKnowledge::Guessed(guess), basis);
        r.text(format!("intercept.shared{k}.guess"), guess);
        r.real(format!("intercept.shared{k}.eve_success"), p.eve_success)?;
        r.real(format!("intercept.shared{k}.mqer"), p.mqer)?;
        if let Some(w) = p.wrong_decode_error {
            r.real(format!("intercept.shared{k}.wrong_decode_error"), w)?;
        }
    }

    for &mu in &opts.mu {
        let key = format!("pns.mu_{mu}");
        r.sci(format!("{key}.p0"), poisson_pmf(0, mu).map_err(internal)?)?;
        r.sci(format!("{key}.p1"), poisson_pmf(1, mu).map_err(internal)?)?;
        r.sci(format!("{key}.multiphoton"), multiphoton_prob(mu).map_err(internal)?)?;
        r.sci(format!("{key}.block_leak"), pns_block_leak_prob(mu).map_err(internal)?)?;
    }

    let report = r.render();
    let mut files = Vec::new();
    if let Some(path) = &opts.chi_csv {
        let rows = chi_table().map_err(internal)?;
        let mut csv = String::from("set_id,chi_physical_bits,overlap_00,overlap_01\n");
        for row in rows {
            writeln!(
                csv,
                "{},{:.9},{:.9},{:.9}",
                row.set_id,
                finite("chi", row.chi_physical_bits)?,
                finite("overlap_00", row.overlap_00)?,
                finite("overlap_01", row.overlap_01)?
            )
            .unwrap();
        }
        files.push(OutputFile::new("chi", path.clone(), csv));
    }
    if let Some(dir) = &opts.out {
        files.push(OutputFile::new("analysis", dir.join("analysis.txt"), report.clone()));
        prepare_dir(dir).map_err(output_error)?;
    }
    write_all(&files).map_err(output_error)?;
    Ok(CommandOutput { stdout: report, exit_code: EXIT_CONTINUE })
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Overrides,
}

pub fn records_text(records: &[pattern_qkd::protocol::BlockRecord]) -> String {
    let mut text = RECORD_COLUMNS.join(",");
    text.push('\n');
    for r in records {
        text.push_str(&r.to_row());
        text.push('\n');
    }
    text
}

pub fn cmd_simulate(opts: &SimulateOptions) -> Result<CommandOutput, CliError> {
    let config = load_config(opts.config.as_deref(), &opts.overrides)?;
    config.validate().map_err(session_error)?;
    let mut manifest = RunManifest::new("simulate", Some(config.master_seed), render_config(&config));
    prepare_dir(&opts.out).map_err(output_error)?;

    let (report, records) = run_session(&config).map_err(session_error)?;
    let mut report_text = String::new();
    for (k, v) in report.to_key_values() {
        writeln!(report_text, "{k} = {v}").unwrap();
    }
    let files = vec![
        OutputFile::new("report", opts.out.join("report.txt"), report_text),
        OutputFile::new("records", opts.out.join("records.txt"), records_text(&records)),
    ];
    for f in &files {
        manifest.add_output(f);
    }
    write_all(&files).map_err(output_error)?;
    manifest.finished_unix = unix_now();
    let manifest_file = OutputFile::new("manifest", opts.out.join("manifest.txt"), manifest.render());
    write_all(std::slice::from_ref(&manifest_file)).map_err(output_error)?;

    let eve = report.eve_success_rate.map_or_else(|| "-".to_string(), |e| format!("{e:.6}"));
    let stdout = format!(
        "decision={} mqer={:.6} sift_rate={:.6} eve_success={} blocks_tested={} raw_key_length={}\n",
        report.decision,
        report.mqer_estimate,
        report.sift_rate,
        eve,
        report.blocks_tested,
        report.raw_key.len()
    );
    let exit_code = match report.decision {
        Decision::Continue => EXIT_CONTINUE,
        Decision::Abort => EXIT_ABORT,
    };
    Ok(CommandOutput { stdout, exit_code })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    DistanceKm,
    PerQubitFlipProb,
    MeanPhotonNumber,
    /// Number of patterns Eve's guessed set shares with the secret set.
    EveKnowledge,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::DistanceKm => "distance_km",
            SweepAxis::PerQubitFlipProb => "per_qubit_flip_prob",
            SweepAxis::MeanPhotonNumber => "mean_photon_number",
            SweepAxis::EveKnowledge => "eve_knowledge",
        }
    }

    fn apply(self, config: &mut SessionConfig, value: f64) -> Result<(), CliError> {
        match self {
            SweepAxis::DistanceKm => config.noise.distance_km = value,
            SweepAxis::PerQubitFlipProb => config.noise.per_qubit_flip_prob = value,
            SweepAxis::MeanPhotonNumber => config.noise.mean_photon_number = value,
            SweepAxis::EveKnowledge => {
                if !(value == 0.0 || value == 1.0 || value == 2.0) {
                    return Err(CliError::Usage(format!("eve_knowledge values must be 0, 1 or 2, got {value}")));
                }
                config.eve = eve_with_shared_knowledge(&config.secret_set, value as usize)
                    .ok_or_else(|| CliError::Internal(format!("no guessed set sharing {value} patterns")))?;
            }
        }
        Ok(())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distance_km" | "distance" => Ok(SweepAxis::DistanceKm),
            "per_qubit_flip_prob" | "p" => Ok(SweepAxis::PerQubitFlipProb),
            "mean_photon_number" | "mu" => Ok(SweepAxis::MeanPhotonNumber),
            "eve_knowledge" | "k" => Ok(SweepAxis::EveKnowledge),
            other => Err(format!(
                "unknown sweep axis {other:?} (distance_km, per_qubit_flip_prob, mean_photon_number, eve_knowledge)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Overrides,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Seed for the `index`-th point of a sweep, independent of the axis values themselves.
pub fn sweep_sub_seed(master_seed: u64, index: usize) -> u64 {
    let digest = sha256_hex(format!("sweep:{master_seed}:{index}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

pub const SWEEP_COLUMNS: &str =
    "axis_value,sift_rate,mqer,decision,eve_success,blocks_sent,blocks_lost,blocks_tested,seed";

pub fn cmd_sweep(opts: &SweepOptions) -> Result<CommandOutput, CliError> {
    if opts.values.is_empty() {
        return Err(CliError::Usage("empty sweep axis".into()));
    }
    if let Some(bad) = opts.values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("sweep values must be finite, got {bad}")));
    }
    let base = load_config(opts.config.as_deref(), &opts.overrides)?;
    let mut manifest = RunManifest::new("sweep", Some(base.master_seed), render_config(&base));
    manifest.extra.push(("sweep.axis".into(), opts.axis.name().into()));
    let values: Vec<String> = opts.values.iter().map(|v| v.to_string()).collect();
    manifest.extra.push(("sweep.values".into(), values.join(",")));
    prepare_dir(&opts.out).map_err(output_error)?;

    let mut csv = format!("{SWEEP_COLUMNS}\n");
    let mut failure = None;
    for (i, &value) in opts.values.iter().enumerate() {
        let mut config = base.clone();
        config.master_seed = sweep_sub_seed(base.master_seed, i);
        let run = opts.axis.apply(&mut config, value).and_then(|_| {
            config.validate().map_err(session_error)?;
            run_session(&config).map_err(session_error)
        });
        match run {
            Ok((report, _)) => {
                let eve = report.eve_success_rate.map(|e| format!("{e:.6}")).unwrap_or_default();
                writeln!(
                    csv,
                    "{value},{:.6},{:.6},{},{eve},{},{},{},{}",
                    report.sift_rate,
                    report.mqer_estimate,
                    report.decision,
                    report.blocks_sent,
                    report.blocks_lost,
                    report.blocks_tested,
                    config.master_seed
                )
                .unwrap();
            }
            Err(e) => {
                failure = Some((i, value, e));
                break;
            }
        }
    }

    let csv_file = OutputFile::new("sweep", opts.out.join("sweep.csv"), csv.clone());
    manifest.add_output(&csv_file);
    if let Some((i, value, e)) = &failure {
        manifest.status = "partial".into();
        manifest.extra.push(("failed_index".into(), i.to_string()));
        manifest.extra.push(("failed_value".into(), value.to_string()));
        manifest.extra.push(("error".into(), e.to_string()));
    }
    manifest.finished_unix = unix_now();
    let manifest_file = OutputFile::new("manifest", opts.out.join("manifest.txt"), manifest.render());
    write_all(&[csv_file, manifest_file]).map_err(output_error)?;

    match failure {
        Some((_, _, e)) => Err(e),
        None => Ok(CommandOutput { stdout: csv, exit_code: EXIT_CONTINUE }),
    }
}
