//! Run-directory layout, manifests and tabular outputs.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hqtn::train::{Confusion, EpochRecord};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Complete,
    /// Some outputs exist but the command did not finish cleanly.
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub state: RunState,
    pub error: Option<String>,
    /// Resolved configuration as used by the command.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub dataset: Option<DatasetRef>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p
            .strip_prefix(root)
            .map(|r| r != Path::new(MANIFEST))
            .unwrap_or(false)
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Checksums every file below `dir` except the manifest itself.
pub fn artifacts(dir: &Path) -> CliResult<Vec<Artifact>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files
        .iter()
        .map(|p| {
            Ok(Artifact {
                path: p
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/"),
                sha256: sha256_file(p)?,
                bytes: fs::metadata(p)?.len(),
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub struct ManifestDraft {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub dataset: Option<DatasetRef>,
}

impl ManifestDraft {
    /// Writes the manifest for `dir`, recording `result`.
    pub fn finish(self, dir: &Path, result: &CliResult<()>) -> CliResult<()> {
        let m = Manifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            state: if result.is_ok() {
                RunState::Complete
            } else {
                RunState::Partial
            },
            error: result.as_ref().err().map(|e| e.to_string()),
            config: self.config,
            seeds: self.seeds,
            dataset: self.dataset,
            artifacts: artifacts(dir)?,
        };
        write_json(&dir.join(MANIFEST), &m)
    }
}

pub fn seed_dir(run: &Path, seed: u64) -> PathBuf {
    run.join(format!("seed_{seed}"))
}

pub fn write_metrics_csv(path: &Path, epochs: &[EpochRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in epochs {
        w.serialize(e)?;
    }
    if epochs.is_empty() {
        w.write_record([
            "epoch",
            "train_loss",
            "eval_metric",
            "grad_var_mpo",
            "grad_var_vqc",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows are true labels, columns predictions, in the order stable, unstable.
pub fn write_confusion_csv(path: &Path, c: &Confusion) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "pred_stable", "pred_unstable"])?;
    w.write_record(["stable", &c.tn.to_string(), &c.fp.to_string()])?;
    w.write_record(["unstable", &c.fn_.to_string(), &c.tp.to_string()])?;
    w.flush()?;
    Ok(())
}
