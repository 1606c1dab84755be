//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use hqtn::aero::{generate_dataset, read_dataset, write_dataset, Dataset};
use hqtn::exec::ExecMode;
use hqtn::train::run::supervision;
use hqtn::train::{
    evaluate, holdout, hpo_search, retrain_and_test, FinalReport, Forward, ModelParams,
    PreparedData, RunRecord, RunStatus, Spread, Target,
};
use serde::{Deserialize, Serialize};

use crate::config::{load, DatagenConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::rundir::{
    read_json, seed_dir, sha256_file, write_confusion_csv, write_json, write_metrics_csv,
    DatasetRef, Manifest, ManifestDraft, MANIFEST,
};

pub const DATASET_FILE: &str = "dataset.bin";
pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.json";
pub const LEDGER_FILE: &str = "hpo_ledger.jsonl";
pub const REPLAY_TOL: f64 = 1e-10;

fn fresh_dir(out: &Path) -> CliResult<()> {
    if out.join(MANIFEST).exists() {
        return Err(CliError::Validation(format!(
            "{} already holds a run; pick a new output directory",
            out.display()
        )));
    }
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<(Dataset, DatasetRef)> {
    if !path.is_file() {
        return Err(CliError::Validation(format!(
            "dataset {} does not exist",
            path.display()
        )));
    }
    let ds = read_dataset(path)?;
    let r = DatasetRef {
        path: fs::canonicalize(path)?,
        sha256: sha256_file(path)?,
    };
    Ok((ds, r))
}

/// Creates `out`, runs `body` in it and always leaves a manifest behind.
fn in_run_dir(
    out: &Path,
    draft: ManifestDraft,
    body: impl FnOnce() -> CliResult<()>,
) -> CliResult<()> {
    fs::create_dir_all(out)?;
    let res = body();
    draft.finish(out, &res)?;
    res
}

pub fn datagen(config: Option<&Path>, out: &Path, mode: ExecMode) -> CliResult<()> {
    let cfg: DatagenConfig = match config {
        Some(p) => load(p)?,
        None => DatagenConfig::default(),
    };
    cfg.validate()?;
    fresh_dir(out)?;
    let draft = ManifestDraft {
        command: "datagen",
        config: serde_json::to_value(&cfg)?,
        seeds: vec![cfg.seed],
        dataset: None,
    };
    in_run_dir(out, draft, || {
        let ds = generate_dataset(
            &cfg.grid,
            &cfg.consts,
            cfg.t_final,
            cfg.n_samples,
            cfg.seed,
            mode,
        )?;
        write_dataset(&out.join(DATASET_FILE), &ds)?;
        let unstable = ds.samples.iter().filter(|s| s.label.is_unstable()).count();
        println!(
            "wrote {} samples ({} unstable) to {}",
            ds.samples.len(),
            unstable,
            out.join(DATASET_FILE).display()
        );
        Ok(())
    })
}

fn write_run(dir: &Path, record: &RunRecord, params: &ModelParams) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    write_metrics_csv(&dir.join("metrics.csv"), &record.epochs)?;
    write_json(&dir.join("record.json"), record)?;
    write_json(&dir.join("params.json"), params)?;
    if let Some(c) = record.test.as_ref().and_then(|t| t.confusion.as_ref()) {
        write_confusion_csv(&dir.join("confusion.csv"), c)?;
    }
    Ok(())
}

pub fn train(
    config: &Path,
    dataset: &Path,
    out: &Path,
    seed: Option<u64>,
    mode: ExecMode,
) -> CliResult<()> {
    let mut cfg: RunConfig = load(config)?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    cfg.validate()?;
    let (ds, ds_ref) = load_dataset(dataset)?;
    fresh_dir(out)?;
    let exp = &cfg.experiment;
    let draft = ManifestDraft {
        command: "train",
        config: serde_json::to_value(&cfg)?,
        seeds: (0..cfg.n_seeds as u64)
            .map(|i| exp.seed.wrapping_add(i))
            .collect(),
        dataset: Some(ds_ref),
    };
    in_run_dir(out, draft, || {
        write_json(&out.join(CONFIG_FILE), &cfg)?;
        let data = PreparedData::from_dataset(&ds, &exp.encoding, mode)?;
        let split = holdout(exp, &data)?;
        let report = retrain_and_test(exp, &data, &split.train, &split.eval, cfg.n_seeds, mode)?;
        for (r, p) in report.runs.iter().zip(&report.params) {
            write_run(&seed_dir(out, r.seed), r, p)?;
        }
        write_json(&out.join(REPORT_FILE), &report)?;
        if let Some(s) = &report.test_metric {
            println!(
                "test metric over {} seeds: mean {:.6} (min {:.6}, max {:.6})",
                s.n, s.mean, s.min, s.max
            );
        }
        match report.runs.iter().find(|r| r.failed()) {
            Some(RunRecord {
                seed,
                status: RunStatus::Failed { epoch, reason },
                ..
            }) => Err(CliError::Numerical(format!(
                "seed {seed} failed in epoch {epoch}: {reason}"
            ))),
            _ => Ok(()),
        }
    })
}

pub fn hpo(
    config: &Path,
    dataset: &Path,
    budget: usize,
    out: &Path,
    mode: ExecMode,
) -> CliResult<()> {
    let cfg: RunConfig = load(config)?;
    cfg.validate()?;
    if budget == 0 {
        return Err(CliError::Validation("budget must be at least 1".into()));
    }
    let (ds, ds_ref) = load_dataset(dataset)?;
    if out.join(MANIFEST).exists() {
        let prev: Manifest = read_json(&out.join(MANIFEST))?;
        if prev.command != "hpo" {
            return Err(CliError::Validation(format!(
                "{} holds a {} run",
                out.display(),
                prev.command
            )));
        }
    }
    let draft = ManifestDraft {
        command: "hpo",
        config: serde_json::to_value(&cfg)?,
        seeds: vec![cfg.search_seed, cfg.experiment.seed],
        dataset: Some(ds_ref),
    };
    in_run_dir(out, draft, || {
        write_json(&out.join(CONFIG_FILE), &cfg)?;
        let data = PreparedData::from_dataset(&ds, &cfg.experiment.encoding, mode)?;
        let ranked = hpo_search(
            &cfg.search,
            &cfg.experiment,
            budget,
            cfg.search_seed,
            &data,
            &out.join(LEDGER_FILE),
            mode,
        )?;
        write_json(&out.join("ranking.json"), &ranked)?;
        let best = ranked
            .first()
            .filter(|e| e.objective.is_some())
            .ok_or_else(|| CliError::Numerical("every candidate failed".into()))?;
        let mut best_cfg = cfg.clone();
        best_cfg.experiment = best.config.clone();
        write_json(&out.join("best_config.json"), &best_cfg)?;
        println!(
            "best candidate #{} objective {:.6}",
            best.index,
            best.objective.unwrap_or(f64::NAN)
        );
        Ok(())
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReplayRow {
    pub seed: u64,
    pub stored: f64,
    pub replayed: f64,
    pub abs_diff: f64,
}

/// Rewrites the manifest of an existing run with fresh checksums.
fn refresh_manifest(run: &Path) -> CliResult<()> {
    let mut m: Manifest = read_json(&run.join(MANIFEST))?;
    m.artifacts = crate::rundir::artifacts(run)?;
    write_json(&run.join(MANIFEST), &m)
}

fn training_run(run: &Path) -> CliResult<(Manifest, RunConfig)> {
    let mpath = run.join(MANIFEST);
    if !mpath.is_file() {
        return Err(CliError::Validation(format!(
            "{} is not a run directory",
            run.display()
        )));
    }
    let m: Manifest = read_json(&mpath)?;
    if m.command != "train" {
        return Err(CliError::Validation(format!(
            "{} holds a {} run, not a training run",
            run.display(),
            m.command
        )));
    }
    let cfg: RunConfig = read_json(&run.join(CONFIG_FILE))?;
    Ok((m, cfg))
}

pub fn eval(run: &Path, mode: ExecMode) -> CliResult<()> {
    let (m, cfg) = training_run(run)?;
    let ds_ref = m
        .dataset
        .clone()
        .ok_or_else(|| CliError::Validation("manifest does not name a dataset".into()))?;
    let (ds, now) = load_dataset(&ds_ref.path)?;
    if now.sha256 != ds_ref.sha256 {
        return Err(CliError::Validation(
            "dataset changed since the run was made".into(),
        ));
    }
    let data = PreparedData::from_dataset(&ds, &cfg.experiment.encoding, mode)?;
    let split = holdout(&cfg.experiment, &data)?;
    let mut rows = Vec::new();
    for &seed in &m.seeds {
        let dir = seed_dir(run, seed);
        let record: RunRecord = read_json(&dir.join("record.json"))?;
        let Some(stored) = record.test.as_ref().map(|t| t.metric) else {
            continue;
        };
        let params: ModelParams = read_json(&dir.join("params.json"))?;
        let mut exp = cfg.experiment.clone();
        exp.seed = seed;
        let fwd = Forward::new(&exp)?;
        let sup = supervision(&exp, &data, record.scaler.as_ref());
        let replayed = evaluate(&fwd, &params, &data, &sup, &split.eval, mode)?.metric;
        rows.push(ReplayRow {
            seed,
            stored,
            replayed,
            abs_diff: (stored - replayed).abs(),
        });
    }
    if rows.is_empty() {
        return Err(CliError::Validation(
            "run has no completed seeds to replay".into(),
        ));
    }
    write_json(&run.join("eval.json"), &rows)?;
    refresh_manifest(run)?;
    for r in &rows {
        println!(
            "seed {}: stored {:.12} replayed {:.12} |diff| {:.3e}",
            r.seed, r.stored, r.replayed, r.abs_diff
        );
    }
    match rows.iter().find(|r| !(r.abs_diff <= REPLAY_TOL)) {
        Some(r) => Err(CliError::Numerical(format!(
            "seed {} replay differs by {:.3e}",
            r.seed, r.abs_diff
        ))),
        None => Ok(()),
    }
}

fn spread_line(name: &str, s: &Option<Spread>) -> String {
    match s {
        Some(s) => format!(
            "{name}: mean {:.6} min {:.6} max {:.6} (n = {})\n",
            s.mean, s.min, s.max, s.n
        ),
        None => format!("{name}: no completed seeds\n"),
    }
}

pub fn report(run: &Path) -> CliResult<()> {
    let (_, cfg) = training_run(run)?;
    let path = run.join(REPORT_FILE);
    if !path.is_file() {
        return Err(CliError::Validation(format!(
            "{} has no training report",
            run.display()
        )));
    }
    let rep: FinalReport = read_json(&path)?;
    if rep.runs.is_empty() {
        return Err(CliError::Validation("training report holds no runs".into()));
    }
    let dir: PathBuf = run.join("report");
    fs::create_dir_all(&dir)?;
    let task = cfg.experiment.task;
    let metric_name = if task.is_classification() {
        "test f1"
    } else {
        "test r2"
    };
    let mut summary = format!(
        "task: {}\n",
        serde_json::to_string(&task)?.trim_matches('"')
    );
    summary.push_str(&format!(
        "seeds: {} ({} completed)\n",
        rep.runs.len(),
        rep.runs.iter().filter(|r| !r.failed()).count()
    ));
    for r in &rep.runs {
        write_metrics_csv(&dir.join(format!("curve_seed{}.csv", r.seed)), &r.epochs)?;
        if let Some(c) = r.test.as_ref().and_then(|t| t.confusion.as_ref()) {
            write_confusion_csv(&dir.join(format!("confusion_seed{}.csv", r.seed)), c)?;
        }
    }
    summary.push_str(&spread_line(
        metric_name,
        &FinalReport::summarize(&rep.runs),
    ));
    if !task.is_classification() {
        let mut w = csv::Writer::from_path(dir.join("r2_per_target.csv"))?;
        w.write_record(["seed", "a", "mu", "u_inf"])?;
        for r in &rep.runs {
            let per = r.test.as_ref().and_then(|t| t.r2_per_target.as_ref());
            let cell = |t: Target| {
                per.and_then(|m| m.get(t.name()))
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            };
            w.write_record([
                r.seed.to_string(),
                cell(Target::A),
                cell(Target::Mu),
                cell(Target::UInf),
            ])?;
        }
        w.flush()?;
        for t in task.targets() {
            let vals: Vec<f64> = rep
                .runs
                .iter()
                .filter_map(|r| {
                    r.test
                        .as_ref()?
                        .r2_per_target
                        .as_ref()?
                        .get(t.name())
                        .copied()
                })
                .collect();
            summary.push_str(&spread_line(
                &format!("test r2[{}]", t.name()),
                &Spread::of(&vals),
            ));
        }
    }
    fs::write(dir.join("summary.txt"), &summary)?;
    refresh_manifest(run)?;
    print!("{summary}");
    Ok(())
}
