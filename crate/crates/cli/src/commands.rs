use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use interview_core::dataio::{gen_synthetic, load_dataset, Dataset, Split, SubjectRecord, SynthSpec, MANIFEST_FILE};
use interview_core::evaluator::{emit_report, evaluate, render_pooling_table, render_table, ReportFormat};
use interview_core::model::pool_subjects;
use interview_core::pooling::ModalityDims;
use interview_core::trainer::{head_sweep, pooling_ablation, train_kfold, train_observed, Checkpoint, FoldEnsemble, TrainConfig, TrainOutcome};
use interview_core::{Error, Result, RunReport, ScoreVector};
use serde::Serialize;

use crate::predictions;
use crate::settings::{ConfigFlags, Resolved};
use crate::{EvalArgs, GenSynthArgs, PredictArgs, SweepHeadsArgs};

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load(resolved: &Resolved) -> Result<Dataset> {
    let ds = load_dataset(resolved.manifest()?)?;
    for w in &ds.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ds)
}

fn finish(mut report: RunReport, resolved: &Resolved, started: Instant) -> RunReport {
    report.config = Some(resolved.to_json());
    report.seed = Some(resolved.train.seed);
    report.elapsed_seconds = Some(started.elapsed().as_secs_f64());
    report
}

fn has_labels(records: &[SubjectRecord]) -> bool {
    !records.is_empty() && records.iter().all(|r| r.label.is_some())
}

pub fn gen_synth(a: &GenSynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_subjects: a.subjects,
        seed: a.seed,
        noise_sigma: a.noise,
        dims: ModalityDims {
            video: a.video_dim,
            audio: a.audio_dim,
            text: a.text_dim,
        },
        min_len: a.min_len,
        max_len: a.max_len,
        ..Default::default()
    };
    let meta = gen_synthetic(&spec, &a.out)?;
    let [tr, va, te] = spec.split_counts();
    println!("wrote {} ({tr} train / {va} val / {te} test)", a.out.join(MANIFEST_FILE).display());
    println!("oracle floor {:.6}", meta.oracle_floor);
    Ok(())
}

fn write_history(path: &Path, outcome: &TrainOutcome) -> Result<()> {
    let mut text = String::from("epoch,train_loss,train_mse,val_mse\n");
    for h in &outcome.history {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        text.push_str(&format!("{},{},{},{}\n", h.epoch, opt(h.train_loss), h.train_mse, opt(h.val_mse)));
    }
    write_text(path, &text)
}

pub fn train(flags: &ConfigFlags) -> Result<()> {
    let started = Instant::now();
    let resolved = flags.resolve()?;
    let ds = load(&resolved)?;
    let cfg = &resolved.train;
    let pooling = cfg.pooling();
    let train = pool_subjects(&ds.train, &pooling, &ds.dims)?;
    let val = pool_subjects(&ds.val, &pooling, &ds.dims)?;
    let outcome = train_observed(&train, &val, &ds.dims, cfg, &mut |rec| {
        let val = rec.val_mse.map_or_else(|| "-".to_string(), |v| format!("{v:.5}"));
        eprintln!("epoch {:>4}  train {:.5}  val {val}", rec.epoch, rec.train_mse);
        true
    })?;

    let out = &resolved.output_dir;
    outcome.checkpoint.save(&out.join("model.ckpt"))?;
    write_history(&out.join("history.csv"), &outcome)?;
    write_text(&out.join("config.toml"), &resolved.to_toml())?;
    let report = finish(outcome.report.clone(), &resolved, started);
    emit_report(&report, ReportFormat::Json, &out.join("report.json"))?;
    emit_report(&report, ReportFormat::Csv, &out.join("report.csv"))?;
    print!("{}", report.to_table());
    println!(
        "best epoch {} of {} ({:?}); checkpoint {}",
        outcome.best_epoch,
        outcome.history.len() - 1,
        outcome.stop,
        out.join("model.ckpt").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct KFoldReport<'a> {
    out_of_fold: &'a RunReport,
    folds: Vec<&'a RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<RunReport>,
}

pub fn kfold(flags: &ConfigFlags) -> Result<()> {
    let started = Instant::now();
    let resolved = flags.resolve()?;
    resolved.train.validate_kfold()?;
    let ds = load(&resolved)?;
    let cfg = &resolved.train;
    let pooling = cfg.pooling();
    let pool_records: Vec<SubjectRecord> = ds.train.iter().chain(&ds.val).cloned().collect();
    let pool = pool_subjects(&pool_records, &pooling, &ds.dims)?;
    let outcome = train_kfold(&pool, &ds.dims, cfg)?;

    let out = &resolved.output_dir;
    for (i, f) in outcome.folds.iter().enumerate() {
        f.checkpoint.save(&out.join(format!("fold_{}.ckpt", i + 1)))?;
    }
    let test = if has_labels(&ds.test) {
        let test = pool_subjects(&ds.test, &pooling, &ds.dims)?;
        let preds = outcome.ensemble.predict(&test)?;
        let labels: Vec<ScoreVector> = test.iter().map(|s| s.label.expect("checked")).collect();
        Some(evaluate(&preds, &labels, "test")?)
    } else {
        None
    };
    let oof = finish(outcome.out_of_fold.clone(), &resolved, started);
    let report = KFoldReport {
        out_of_fold: &oof,
        folds: outcome.folds.iter().map(|f| &f.report).collect(),
        test: test.clone(),
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serialises");
    json.push('\n');
    write_text(&out.join("kfold_report.json"), &json)?;
    write_text(&out.join("config.toml"), &resolved.to_toml())?;

    let labels: Vec<String> = (1..=outcome.folds.len()).map(|i| format!("fold {i} (val)")).collect();
    let mut rows: Vec<(&str, &RunReport)> = labels.iter().map(String::as_str).zip(report.folds.iter().copied()).collect();
    rows.push(("out-of-fold", &oof));
    if let Some(t) = &test {
        rows.push(("ensemble (test)", t));
    }
    print!("{}", render_table(&rows));
    Ok(())
}

fn split_records(ds: &Dataset, split: Split) -> &[SubjectRecord] {
    ds.split(split)
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let checkpoints = a
        .checkpoint
        .iter()
        .map(|p| Checkpoint::load(p))
        .collect::<Result<Vec<_>>>()?;
    let first = &checkpoints[0];
    for c in &checkpoints[1..] {
        c.ensure_compatible(&first.config, &first.dims)?;
        if c.config.pooling() != first.config.pooling() {
            return Err(Error::Config("checkpoints disagree on pooling".into()));
        }
    }
    let ds = load_dataset(&a.manifest)?;
    first.ensure_compatible(&first.config, &ds.dims)?;
    let records = split_records(&ds, a.split.0);
    if records.is_empty() {
        return Err(Error::Data(format!("split {} is empty", a.split.0)));
    }
    let pooled = pool_subjects(records, &first.config.pooling(), &ds.dims)?;
    let ensemble = FoldEnsemble::from_checkpoints(&checkpoints, &first.config)?;
    let preds = ensemble.predict(&pooled)?;
    let rows: Vec<(String, ScoreVector)> = pooled.iter().map(|s| s.subject_id.clone()).zip(preds).collect();
    predictions::write(&a.out, &rows)?;
    println!("wrote {} predictions to {}", rows.len(), a.out.display());
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let rows = predictions::read(&a.predictions)?;
    let ds = load_dataset(&a.manifest)?;
    let records = split_records(&ds, a.split.0);
    let by_id: HashMap<&str, ScoreVector> = rows.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    if by_id.len() != rows.len() {
        return Err(Error::Data("predictions contain duplicate subject ids".into()));
    }
    let mut preds = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        let p = by_id
            .get(r.subject_id.as_str())
            .ok_or_else(|| Error::Data(format!("no prediction for subject {}", r.subject_id)))?;
        let y = r
            .label
            .ok_or_else(|| Error::Data(format!("subject {} has no label", r.subject_id)))?;
        preds.push(*p);
        labels.push(y);
    }
    if rows.len() != records.len() {
        return Err(Error::Data(format!(
            "{} predictions but split {} has {} subjects",
            rows.len(),
            a.split.0,
            records.len()
        )));
    }
    let report = evaluate(&preds, &labels, &a.split.0.to_string())?;
    if let Some(out) = &a.out {
        emit_report(&report, a.format.0, out)?;
    }
    print!("{}", report.to_table());
    Ok(())
}

pub fn sweep_heads(a: &SweepHeadsArgs) -> Result<()> {
    let resolved = a.flags.resolve()?;
    let ds = load(&resolved)?;
    let mut csv = String::from("heads,val_mse,default\n");
    for (h, mse) in head_sweep(&ds, &resolved.train, &a.values)? {
        let line = format!("{h},{mse},{}\n", u8::from(h == TrainConfig::default().head_count));
        print!("{line}");
        csv.push_str(&line);
    }
    write_text(&resolved.output_dir.join("sweep_heads.csv"), &csv)?;
    write_text(&resolved.output_dir.join("config.toml"), &resolved.to_toml())?;
    Ok(())
}

pub fn sweep_pooling(flags: &ConfigFlags) -> Result<()> {
    let resolved = flags.resolve()?;
    let ds = load(&resolved)?;
    let rows = pooling_ablation(&ds, &resolved.train)?;
    let table = render_pooling_table(&rows);
    print!("{table}");
    write_text(&resolved.output_dir.join("pooling_ablation.txt"), &table)?;
    let mut json = serde_json::to_string_pretty(&rows).expect("rows serialise");
    json.push('\n');
    write_text(&resolved.output_dir.join("pooling_ablation.json"), &json)?;
    write_text(&resolved.output_dir.join("config.toml"), &resolved.to_toml())?;
    Ok(())
}
