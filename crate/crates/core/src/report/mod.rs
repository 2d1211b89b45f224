//! Subcommand drivers: each reads the input CSV, runs its slice of the
//! pipeline and writes JSON, CSV and SVG artifacts to the output directory.

pub mod config;
pub mod document;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eda::{correlation_matrix, run_eda, EdaReport, SelectionReport};
use crate::error::{CrlError, Result};
use crate::eval::{evaluate, EvalReport, RocCurve};
use crate::ingest::{load_csv, DatasetSchema, RawTable, TARGET_COLUMN};
use crate::models::{train, Model, ModelKind};
use crate::preprocess::{
    apply_encoding, fit_encoding, prepare, split_indices, PreparedData, SplitConfig,
};

pub use config::{RunConfig, Settings};
pub use document::{ModelDocument, TrainingMetadata, FORMAT_VERSION, MODEL_EXTENSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eda,
    Train,
    Evaluate,
    Compare,
}

impl FromStr for Command {
    type Err = CrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eda" => Ok(Command::Eda),
            "train" => Ok(Command::Train),
            "evaluate" => Ok(Command::Evaluate),
            "compare" => Ok(Command::Compare),
            other => Err(CrlError::Config(format!("unknown command `{other}`"))),
        }
    }
}

/// What a command hands back to the binary: a machine-readable summary for
/// `--json`, a human summary otherwise, and warnings for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub json: serde_json::Value,
    pub text: String,
    pub warnings: Vec<String>,
}

/// Runs `command` on a rayon pool sized by `config.threads` when given.
pub fn run(command: Command, config: &RunConfig) -> Result<Outcome> {
    let go = || match command {
        Command::Eda => cmd_eda(config),
        Command::Train => cmd_train(config),
        Command::Evaluate => cmd_evaluate(config),
        Command::Compare => cmd_compare(config),
    };
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CrlError::Config(format!("thread pool: {e}")))?
            .install(go),
        None => go(),
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CrlError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CrlError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_input(config: &RunConfig) -> Result<RawTable> {
    let table = load_csv(config.input_path()?, &DatasetSchema::credit_risk())?;
    if table.row_count() == 0 {
        return Err(CrlError::EmptyDataset);
    }
    Ok(table)
}

fn eda_for(table: &RawTable, config: &RunConfig) -> Result<EdaReport> {
    let encoding = fit_encoding(table)?;
    let encoded = apply_encoding(table, &encoding)?;
    run_eda(&encoded, config.threshold, &config.drops)
}

fn fmt_r(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |r| format!("{r:+.6}"))
}

pub fn cmd_eda(config: &RunConfig) -> Result<Outcome> {
    let table = load_input(config)?;
    let encoding = fit_encoding(&table)?;
    let encoded = apply_encoding(&table, &encoding)?;
    let report = run_eda(&encoded, config.threshold, &config.drops)?;
    let matrix = correlation_matrix(&encoded, TARGET_COLUMN);

    let out = &config.out;
    write_file(&out.join("correlation.csv"), &matrix.to_csv())?;
    write_file(
        &out.join("correlation-heatmap.svg"),
        &svg::heatmap_svg(&matrix),
    )?;
    write_json(&out.join("profiles.json"), &report.profiles)?;
    write_json(&out.join("selection.json"), &report.selection)?;

    let mut warnings = Vec::new();
    if report.selection.final_features.is_empty() {
        warnings.push(format!(
            "no feature reaches |r| >= {}; the final feature list is empty",
            config.threshold
        ));
    }
    for name in &report.selection.degenerate {
        warnings.push(format!("selected feature `{name}` looks degenerate"));
    }
    let mut text = format!("{:<28} {:>10}  stage\n", "feature", "r");
    for c in &report.correlations {
        let stage = if report.selection.final_features.contains(&c.name) {
            "selected"
        } else if report
            .selection
            .stage2_dropped
            .iter()
            .any(|d| d.name == c.name)
        {
            "manual drop"
        } else {
            "below threshold"
        };
        let _ = writeln!(text, "{:<28} {:>10}  {stage}", c.name, fmt_r(c.correlation));
    }
    let _ = writeln!(
        text,
        "final features: {}",
        report.selection.final_features.join(", ")
    );
    Ok(Outcome {
        json: serde_json::to_value(&report.selection)?,
        text,
        warnings,
    })
}

/// How the rows were divided for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDescription {
    pub seed: u64,
    pub train_fraction: f64,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub features: Vec<String>,
}

struct PreparedRun {
    eda: EdaReport,
    data: PreparedData,
    split: SplitDescription,
}

fn prepare_run(table: &RawTable, config: &RunConfig) -> Result<PreparedRun> {
    let eda = eda_for(table, config)?;
    let features = eda.selection.final_features.clone();
    if features.is_empty() {
        return Err(CrlError::Config(format!(
            "no feature passed selection at threshold {}",
            config.threshold
        )));
    }
    let split_cfg = SplitConfig::new(config.train_fraction, config.seed)?;
    let data = prepare(table, &features, &split_cfg)?;
    let split = SplitDescription {
        seed: config.seed,
        train_fraction: config.train_fraction,
        n_rows: table.row_count(),
        n_train: data.train.n_rows(),
        n_test: data.test.n_rows(),
        features,
    };
    Ok(PreparedRun { eda, data, split })
}

fn build_document(run: &PreparedRun, model: Model, config: &RunConfig) -> ModelDocument {
    ModelDocument {
        format_version: FORMAT_VERSION,
        schema_digest: DatasetSchema::credit_risk().digest(),
        preprocessing: run.data.train.params.clone(),
        selected_features: run.split.features.clone(),
        model,
        metadata: TrainingMetadata {
            seed: config.seed,
            train_fraction: config.train_fraction,
            source_rows: run.split.n_rows,
            train_rows: run.split.n_train,
            threshold: config.threshold,
            timestamp: timestamp(),
        },
    }
}

pub fn cmd_train(config: &RunConfig) -> Result<Outcome> {
    let table = load_input(config)?;
    let run = prepare_run(&table, config)?;
    let started = Instant::now();
    let model = train(config.model, &run.data.train, &config.hyperparams)?;
    let seconds = started.elapsed().as_secs_f64();
    let warnings = model.warnings();
    let doc = build_document(&run, model, config);
    let path = config.model_path();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CrlError::io(parent, e))?;
    }
    doc.save(&path)?;
    let text = format!(
        "trained {} on {} rows x {} features in {seconds:.2}s\nfeatures: {}\nmodel file: {}\n",
        config.model.display_name(),
        run.split.n_train,
        run.split.features.len(),
        run.split.features.join(", "),
        path.display()
    );
    Ok(Outcome {
        json: serde_json::json!({
            "model": config.model,
            "model_file": path.display().to_string(),
            "features": run.split.features,
            "split": run.split,
            "warnings": warnings,
        }),
        text,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    /// The rows the model's own seeded split held out.
    HeldOut,
    /// Every row of a table the model was not split from.
    AllRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub model: ModelKind,
    pub partition: Partition,
    pub n_rows: usize,
    pub features: Vec<String>,
    pub report: EvalReport,
}

fn score(doc: &ModelDocument, rows: &RawTable) -> Result<(Vec<u8>, Vec<u8>, Vec<f64>)> {
    let preds = doc.predict_table(rows)?;
    Ok((
        rows.labels(),
        preds.iter().map(|p| p.label).collect(),
        preds.iter().map(|p| p.score).collect(),
    ))
}

fn roc_csv(curves: &[(String, &RocCurve)]) -> String {
    let mut s = String::from("model,fpr,tpr,threshold\n");
    for (name, curve) in curves {
        for line in curve.to_csv().lines().skip(1) {
            let _ = writeln!(s, "{name},{line}");
        }
    }
    s
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<Outcome> {
    let doc = ModelDocument::load(&config.model_path())?;
    let table = load_input(config)?;
    doc.check_schema(table.schema())?;
    let (partition, rows) = if table.row_count() == doc.metadata.source_rows {
        let split = SplitConfig::new(doc.metadata.train_fraction, doc.metadata.seed)?;
        let (_, test) = split_indices(table.row_count(), &split);
        (Partition::HeldOut, table.select_rows(&test))
    } else {
        (Partition::AllRows, table)
    };
    let (y, pred, scores) = score(&doc, &rows)?;
    let report = evaluate(&y, &pred, &scores, config.roc)?;
    let kind = doc.model.kind();

    let encoded = apply_encoding(&rows, &doc.preprocessing.encoding)?
        .select_columns(&doc.selected_features)?;
    let matrix = correlation_matrix(&encoded, TARGET_COLUMN);
    let curves = [(kind.to_string(), &report.roc)];
    let out = &config.out;
    write_file(&out.join("roc.csv"), &roc_csv(&curves))?;
    write_file(&out.join("roc.svg"), &svg::roc_svg(&curves))?;
    write_file(
        &out.join("correlation-heatmap.svg"),
        &svg::heatmap_svg(&matrix),
    )?;
    let document = EvaluationDocument {
        model: kind,
        partition,
        n_rows: rows.row_count(),
        features: doc.selected_features.clone(),
        report,
    };
    write_json(&out.join("report.json"), &document)?;

    let r = &document.report;
    let cm = r.confusion_matrix;
    let text = format!(
        "{} on {} rows ({:?})\naccuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  auc {:.4}\nconfusion [[{}, {}], [{}, {}]]\n",
        kind.display_name(),
        document.n_rows,
        partition,
        r.metrics.accuracy,
        r.metrics.weighted.precision,
        r.metrics.weighted.recall,
        r.metrics.weighted.f1,
        r.roc.auc,
        cm.tn,
        cm.fp,
        cm.fn_,
        cm.tp
    );
    Ok(Outcome {
        json: serde_json::to_value(&document)?,
        text,
        warnings: doc.model.warnings(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEntry {
    pub display_name: String,
    pub report: Option<EvalReport>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub split: SplitDescription,
    pub selection: SelectionReport,
    pub classifiers: BTreeMap<ModelKind, ClassifierEntry>,
    /// RFC 3339; the only non-deterministic field.
    pub timestamp: String,
}

fn evaluate_kind(
    kind: ModelKind,
    run: &PreparedRun,
    config: &RunConfig,
) -> Result<(EvalReport, Vec<String>)> {
    let model = train(kind, &run.data.train, &config.hyperparams)?;
    let preds = model.predict_matrix(&run.data.test.features)?;
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let report = evaluate(&run.data.test.labels, &labels, &scores, config.roc)?;
    Ok((report, model.warnings()))
}

fn comparison_table(report: &CompareReport, seconds: &BTreeMap<ModelKind, f64>) -> String {
    let mut s = format!(
        "{:<20} {:>8} {:>9} {:>8} {:>11} {:>8} {:>7} {:>6} {:>6} {:>6} {:>6} {:>8}\n",
        "classifier",
        "accuracy",
        "precision",
        "recall",
        "specificity",
        "f1",
        "auc",
        "tn",
        "fp",
        "fn",
        "tp",
        "train s"
    );
    for (kind, entry) in &report.classifiers {
        let secs = seconds.get(kind).copied().unwrap_or(0.0);
        match &entry.report {
            Some(r) => {
                let m = &r.metrics;
                let cm = r.confusion_matrix;
                let _ = writeln!(
                    s,
                    "{:<20} {:>8.4} {:>9.4} {:>8.4} {:>11.4} {:>8.4} {:>7.4} {:>6} {:>6} {:>6} {:>6} {:>8.2}",
                    entry.display_name,
                    m.accuracy,
                    m.weighted.precision,
                    m.weighted.recall,
                    m.weighted.specificity,
                    m.weighted.f1,
                    r.roc.auc,
                    cm.tn,
                    cm.fp,
                    cm.fn_,
                    cm.tp,
                    secs
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "{:<20} failed: {}",
                    entry.display_name,
                    entry.error.as_deref().unwrap_or("unknown error")
                );
            }
        }
    }
    let _ = writeln!(
        s,
        "split: seed {}, {} train / {} test rows; features: {}",
        report.split.seed,
        report.split.n_train,
        report.split.n_test,
        report.split.features.join(", ")
    );
    s
}

/// Trains every requested classifier on one shared split. Fails only if
/// all of them fail, with the first error.
pub fn cmd_compare(config: &RunConfig) -> Result<Outcome> {
    let table = load_input(config)?;
    let run = prepare_run(&table, config)?;
    let mut classifiers = BTreeMap::new();
    let mut seconds = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut first_error = None;
    for &kind in &config.models {
        let started = Instant::now();
        let outcome = evaluate_kind(kind, &run, config);
        seconds.insert(kind, started.elapsed().as_secs_f64());
        let entry = match outcome {
            Ok((report, w)) => {
                warnings.extend(w.iter().map(|w| format!("{kind}: {w}")));
                ClassifierEntry {
                    display_name: kind.display_name().to_string(),
                    report: Some(report),
                    warnings: w,
                    error: None,
                }
            }
            Err(e) => {
                warnings.push(format!("{kind} failed: {e}"));
                let entry = ClassifierEntry {
                    display_name: kind.display_name().to_string(),
                    report: None,
                    warnings: Vec::new(),
                    error: Some(e.to_string()),
                };
                first_error.get_or_insert(e);
                entry
            }
        };
        classifiers.insert(kind, entry);
    }
    if classifiers.values().all(|e| e.report.is_none()) {
        return Err(first_error.unwrap_or(CrlError::EmptyDataset));
    }
    let report = CompareReport {
        split: run.split.clone(),
        selection: run.eda.selection.clone(),
        classifiers,
        timestamp: timestamp(),
    };

    let curves: Vec<(String, &RocCurve)> = report
        .classifiers
        .iter()
        .filter_map(|(k, e)| e.report.as_ref().map(|r| (k.to_string(), &r.roc)))
        .collect();
    let out = &config.out;
    write_file(&out.join("roc.csv"), &roc_csv(&curves))?;
    write_file(&out.join("roc.svg"), &svg::roc_svg(&curves))?;
    write_json(&out.join("selection.json"), &report.selection)?;
    write_json(&out.join("report.json"), &report)?;

    Ok(Outcome {
        json: serde_json::to_value(&report)?,
        text: comparison_table(&report, &seconds),
        warnings,
    })
}
