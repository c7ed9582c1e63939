//! Output files, digests and run manifests.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Creates the output directory, failing if it cannot be created or is not a directory.
pub fn prepare_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if !fs::metadata(dir)?.is_dir() {
        return Err(io::Error::other(format!("{} is not a directory", dir.display())));
    }
    Ok(())
}

/// A file staged in memory until [`write_all`] commits it.
#[derive(Debug, Clone)]
pub struct OutputFile {
    pub label: &'static str,
    pub path: PathBuf,
    pub contents: Vec<u8>,
}

impl OutputFile {
    pub fn new(label: &'static str, path: PathBuf, contents: impl Into<Vec<u8>>) -> Self {
        OutputFile { label, path, contents: contents.into() }
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.contents)
    }
}

/// Writes every file, removing the ones already written if any write fails.
pub fn write_all(files: &[OutputFile]) -> io::Result<()> {
    for (i, f) in files.iter().enumerate() {
        if let Err(e) = fs::write(&f.path, &f.contents) {
            for done in &files[..i] {
                let _ = fs::remove_file(&done.path);
            }
            return Err(io::Error::new(e.kind(), format!("{}: {e}", f.path.display())));
        }
    }
    Ok(())
}

/// Record of one CLI invocation.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub master_seed: Option<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config_echo: String,
    pub status: String,
    pub outputs: Vec<(String, PathBuf, String)>,
    pub extra: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: Option<u64>, config_echo: String) -> Self {
        RunManifest {
            command: command.to_string(),
            master_seed,
            started_unix: unix_now(),
            finished_unix: 0,
            config_echo,
            status: "complete".to_string(),
            outputs: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn add_output(&mut self, file: &OutputFile) {
        self.outputs.push((file.label.to_string(), file.path.clone(), file.digest()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("tool = {}\n", env!("CARGO_PKG_NAME")));
        out.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("command = {}\n", self.command));
        if let Some(seed) = self.master_seed {
            out.push_str(&format!("master_seed = {seed}\n"));
        }
        out.push_str(&format!("started_unix = {}\n", self.started_unix));
        out.push_str(&format!("finished_unix = {}\n", self.finished_unix));
        out.push_str(&format!("status = {}\n", self.status));
        for (k, v) in &self.extra {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for line in self.config_echo.lines() {
            out.push_str(&format!("config.{line}\n"));
        }
        for (label, path, digest) in &self.outputs {
            out.push_str(&format!("output.{label} = {}\n", path.display()));
            out.push_str(&format!("sha256.{label} = {digest}\n"));
        }
        out
    }
}

/// Parses `key = value` lines into pairs, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                return None;
            }
            l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}
