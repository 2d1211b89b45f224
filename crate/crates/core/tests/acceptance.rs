//! Acceptance criteria, one PASS/FAIL/BLOCKED line each.
//!
//! Checks that need the public credit-risk CSV read it from `CRL_DATASET`
//! (or `data/credit_risk_dataset.csv` at the workspace root). Without it
//! they print BLOCKED and do not fail the run, unless
//! `CRL_REQUIRE_DATASET=1`, in which case BLOCKED counts as a failure.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crl::eda::{pearson_correlation, run_eda};
use crl::eval::{classification_metrics, hard_label_auc, roc_curve, ConfusionMatrix};
use crl::ingest::{load_csv, DatasetSchema};
use crl::matrix::Matrix;
use crl::models::logistic::loss_and_gradient;
use crl::models::{train_forest, train_tree, FeaturesPerSplit, ForestParams, TreeParams};
use crl::preprocess::{
    apply_encoding, apply_normalizer, fit_encoding, fit_normalizer, prepare, split_indices,
    DesignMatrix, SplitConfig,
};
use crl::report::{cmd_compare, CompareReport, RunConfig, Settings};

enum Status {
    Pass(String),
    Fail(String),
    Blocked(String),
    Excluded(String),
}

struct Runner {
    failures: usize,
    blocked: usize,
    strict: bool,
}

impl Runner {
    fn record(&mut self, id: &str, name: &str, status: Status) {
        let (tag, detail) = match status {
            Status::Pass(d) => ("PASS", d),
            Status::Fail(d) => {
                self.failures += 1;
                ("FAIL", d)
            }
            Status::Blocked(d) => {
                self.blocked += 1;
                if self.strict {
                    self.failures += 1;
                }
                ("BLOCKED", d)
            }
            Status::Excluded(d) => ("EXCLUDED", d),
        };
        println!("{tag:<8} {id:<4} {name}: {detail}");
    }
}

fn check(ok: bool, detail: String) -> Status {
    if ok {
        Status::Pass(detail)
    } else {
        Status::Fail(detail)
    }
}

// Published confusion matrices as (tn, fp, fn, tp) and metric rows as
// accuracy, precision, recall, specificity, F1.
const MATRICES: [(&str, [u64; 4], [f64; 5]); 4] = [
    (
        "svm",
        [6252, 230, 704, 960],
        [0.8853, 0.8799, 0.8853, 0.8853, 0.8778],
    ),
    (
        "rf",
        [6144, 338, 537, 1127],
        [0.8925, 0.8889, 0.8925, 0.8925, 0.8899],
    ),
    (
        "dt",
        [6132, 237, 751, 1026],
        [0.8787, 0.8737, 0.8787, 0.8787, 0.8708],
    ),
    (
        "lr",
        [6040, 329, 976, 801],
        [0.8397, 0.8277, 0.8397, 0.8397, 0.8258],
    ),
];

/// Support-weighted precision, recall and F1 written out cell by cell.
fn weighted_oracle(tn: f64, fp: f64, fn_: f64, tp: f64) -> [f64; 4] {
    let n = tn + fp + fn_ + tp;
    let (s0, s1) = (tn + fp, fn_ + tp);
    let p0 = tn / (tn + fn_);
    let p1 = tp / (tp + fp);
    let r0 = tn / s0;
    let r1 = tp / s1;
    let f0 = 2.0 * p0 * r0 / (p0 + r0);
    let f1 = 2.0 * p1 * r1 / (p1 + r1);
    [
        (tn + tp) / n,
        (s0 * p0 + s1 * p1) / n,
        (s0 * r0 + s1 * r1) / n,
        (s0 * f0 + s1 * f1) / n,
    ]
}

fn criterion_1() -> Status {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for (name, [tn, fp, fn_, tp], published) in MATRICES {
        let cm = ConfusionMatrix::new(tn, fp, fn_, tp);
        let m = match classification_metrics(&cm) {
            Ok(m) => m,
            Err(e) => return Status::Fail(format!("{name}: {e}")),
        };
        let got = [
            m.accuracy,
            m.weighted.precision,
            m.weighted.recall,
            m.weighted.recall,
            m.weighted.f1,
        ];
        let oracle = weighted_oracle(tn as f64, fp as f64, fn_ as f64, tp as f64);
        let lib = [got[0], got[1], got[2], got[4]];
        for (a, b) in lib.iter().zip(&oracle) {
            if (a - b).abs() > 1e-12 {
                return Status::Fail(format!("{name}: library {a} vs oracle {b}"));
            }
        }
        for (g, p) in got.iter().zip(&published) {
            worst = worst.max((g - p).abs());
            if (g - p).abs() > 5e-4 {
                return Status::Fail(format!("{name}: {g:.6} vs published {p}"));
            }
        }
    }
    let rf = classification_metrics(&ConfusionMatrix::new(6144, 338, 537, 1127)).unwrap();
    Status::Pass(format!(
        "all 20 entries within 5e-4 (max |diff| {worst:.6}); rf {:.4}/{:.4}/{:.4}/{:.4}; {:.1} ms",
        rf.accuracy,
        rf.weighted.precision,
        rf.weighted.recall,
        rf.weighted.f1,
        started.elapsed().as_secs_f64() * 1e3
    ))
}

fn criterion_2() -> Status {
    let auc = hard_label_auc(&ConfusionMatrix::new(6252, 230, 704, 960)).unwrap();
    let oracle = (960.0 / 1664.0 + 6252.0 / 6482.0) / 2.0;
    check(
        (auc - 0.7707).abs() <= 1e-4
            && (auc - oracle).abs() <= 1e-15
            && format!("{auc:.2}") == "0.77",
        format!("svm hard-label AUC {auc:.6} (target 0.7707 +/- 1e-4)"),
    )
}

// Published feature/target correlations.
const CORRELATIONS: [(&str, f64); 11] = [
    ("person_age", -0.021625),
    ("person_income", -0.144551),
    ("person_home_ownership", 0.211577),
    ("person_emp_length", -0.087049),
    ("loan_intent", -0.058935),
    ("loan_grade", 0.373145),
    ("loan_amnt", 0.105407),
    ("loan_int_rate", 0.226825),
    ("loan_percent_income", 0.379371),
    ("cb_person_default_on_file", 0.179141),
    ("cb_person_cred_hist_length", -0.015529),
];

const FINAL_SIX: [&str; 6] = [
    "person_home_ownership",
    "loan_grade",
    "loan_amnt",
    "loan_int_rate",
    "loan_percent_income",
    "cb_person_default_on_file",
];

fn eda_on(path: &Path) -> Result<(crl::eda::EdaReport, f64), String> {
    let started = Instant::now();
    let table = load_csv(path, &DatasetSchema::credit_risk()).map_err(|e| e.to_string())?;
    let enc = fit_encoding(&table).map_err(|e| e.to_string())?;
    let encoded = apply_encoding(&table, &enc).map_err(|e| e.to_string())?;
    let report =
        run_eda(&encoded, 0.1, &["person_income".to_string()]).map_err(|e| e.to_string())?;
    Ok((report, started.elapsed().as_secs_f64()))
}

fn criterion_3(dataset: Option<&Path>) -> Status {
    let Some(path) = dataset else {
        return Status::Blocked("public CSV not present (set CRL_DATASET)".into());
    };
    let (report, secs) = match eda_on(path) {
        Ok(r) => r,
        Err(e) => return Status::Fail(e),
    };
    let mut problems = Vec::new();
    for (name, published) in CORRELATIONS {
        let got = report
            .correlations
            .iter()
            .find(|c| c.name == name)
            .and_then(|c| c.correlation);
        match got {
            Some(r) if r.signum() == published.signum() && (r - published).abs() <= 0.05 => {}
            other => problems.push(format!("{name}: {other:?} vs {published}")),
        }
        let included = report
            .selection
            .stage1_included
            .iter()
            .any(|s| s.name == name);
        if included != (published.abs() >= 0.1) {
            problems.push(format!("{name}: stage-1 membership differs"));
        }
    }
    if report.selection.final_features != FINAL_SIX {
        problems.push(format!(
            "final features {:?}",
            report.selection.final_features
        ));
    }
    if secs >= 10.0 {
        problems.push(format!("took {secs:.1} s"));
    }
    if problems.is_empty() {
        Status::Pass(format!(
            "partition, signs and magnitudes match; {secs:.2} s"
        ))
    } else {
        Status::Fail(problems.join("; "))
    }
}

fn criterion_3_runtime(surrogate: &Path) -> Status {
    match eda_on(surrogate) {
        Ok((report, secs)) => check(
            secs < 10.0 && report.selection.final_features == FINAL_SIX,
            format!("selection on 32581 synthetic rows in {secs:.2} s (< 10 s)"),
        ),
        Err(e) => Status::Fail(e),
    }
}

fn config_for(input: &Path, out: &Path, seed: u64, extra: &[(&str, &str)]) -> RunConfig {
    let mut s = Settings::default();
    s.set("input", input.display().to_string()).unwrap();
    s.set("out", out.display().to_string()).unwrap();
    s.set("seed", seed.to_string()).unwrap();
    for (k, v) in extra {
        s.set(k, *v).unwrap();
    }
    RunConfig::from_settings(&s, None).unwrap()
}

fn compare(
    input: &Path,
    out: &Path,
    seed: u64,
    extra: &[(&str, &str)],
) -> Result<(CompareReport, f64), String> {
    let started = Instant::now();
    let outcome = cmd_compare(&config_for(input, out, seed, extra)).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let report: CompareReport = serde_json::from_value(outcome.json).map_err(|e| e.to_string())?;
    Ok((report, secs))
}

fn criterion_4(dataset: Option<&Path>, scratch: &Path) -> Status {
    let Some(path) = dataset else {
        return Status::Blocked("public CSV not present (set CRL_DATASET)".into());
    };
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for seed in 42..47u64 {
        let (report, secs) = match compare(path, &scratch.join(format!("c4-{seed}")), seed, &[]) {
            Ok(r) => r,
            Err(e) => return Status::Fail(format!("seed {seed}: {e}")),
        };
        let acc = |k: &str| {
            report
                .classifiers
                .iter()
                .find(|(kind, _)| kind.as_str() == k)
                .and_then(|(_, e)| e.report.as_ref())
                .map(|r| {
                    (
                        r.metrics.accuracy,
                        r.metrics.weighted.f1,
                        r.confusion_matrix.total(),
                    )
                })
        };
        let (Some(rf), Some(dt), Some(svm), Some(lr)) =
            (acc("rf"), acc("dt"), acc("svm"), acc("lr"))
        else {
            return Status::Fail(format!("seed {seed}: a classifier failed"));
        };
        if !(0.87..=0.94).contains(&rf.0) || (rf.1 - 0.8899).abs() > 0.03 {
            problems.push(format!("seed {seed}: rf acc {:.4} f1 {:.4}", rf.0, rf.1));
        }
        if dt.0 < 0.85 || svm.0 < 0.85 || lr.0 < 0.80 {
            problems.push(format!(
                "seed {seed}: dt {:.4} svm {:.4} lr {:.4}",
                dt.0, svm.0, lr.0
            ));
        }
        if [rf.2, dt.2, svm.2, lr.2].iter().any(|&t| t != 8146) {
            problems.push(format!("seed {seed}: matrix totals differ from 8146"));
        }
        if secs >= 180.0 {
            problems.push(format!("seed {seed}: {secs:.0} s"));
        }
        summary.push(format!(
            "s{seed} rf {:.4} dt {:.4} svm {:.4} lr {:.4} ({secs:.0}s)",
            rf.0, dt.0, svm.0, lr.0
        ));
    }
    if problems.is_empty() {
        Status::Pass(summary.join("; "))
    } else {
        Status::Fail(problems.join("; "))
    }
}

fn criterion_4_runtime(surrogate: &Path, scratch: &Path) -> Status {
    match compare(surrogate, &scratch.join("c4-runtime"), 42, &[]) {
        Ok((report, secs)) => {
            let all_ok = report.classifiers.len() == 4
                && report.classifiers.values().all(|e| {
                    e.report
                        .as_ref()
                        .is_some_and(|r| r.confusion_matrix.total() == 8146)
                });
            check(
                all_ok && secs < 180.0,
                format!("four-classifier compare on 32581 synthetic rows in {secs:.1} s (< 180 s)"),
            )
        }
        Err(e) => Status::Fail(e),
    }
}

fn criterion_5(surrogate: &Path) -> Status {
    let cfg = SplitConfig::new(0.75, 42).unwrap();
    let (train, test) = split_indices(32_581, &cfg);
    let mut seen = vec![false; 32_581];
    for &i in train.iter().chain(&test) {
        seen[i] = true;
    }
    let table = load_csv(surrogate, &DatasetSchema::credit_risk()).unwrap();
    let prepared = prepare(&table, &["loan_grade".to_string()], &cfg).unwrap();
    check(
        train.len() == 24_435
            && test.len() == 8_146
            && seen.iter().all(|&s| s)
            && prepared.train.n_rows() == 24_435
            && prepared.test.n_rows() == 8_146,
        format!(
            "|train| {} |test| {} (expected 24435 / 8146)",
            train.len(),
            test.len()
        ),
    )
}

fn criterion_6a() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(3..25);
        let d = rng.gen_range(1..6);
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = Matrix::from_vec(n, d, data).unwrap();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let lambda = rng.gen_range(0.0..0.1);
        let (_, gw, gb) = loss_and_gradient(&x, &y, &w, b, lambda);
        let h = 1e-5;
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for j in 0..d {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            let fd = (loss_and_gradient(&x, &y, &up, b, lambda).0
                - loss_and_gradient(&x, &y, &down, b, lambda).0)
                / (2.0 * h);
            pairs.push((gw[j], fd));
        }
        let fd_b = (loss_and_gradient(&x, &y, &w, b + h, lambda).0
            - loss_and_gradient(&x, &y, &w, b - h, lambda).0)
            / (2.0 * h);
        pairs.push((gb, fd_b));
        for (g, fd) in pairs {
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    check(
        worst <= 1e-4,
        format!("100 problems, max relative error {worst:.2e}"),
    )
}

/// Random design on a small integer grid, so duplicate rows and tied
/// thresholds occur. With `conflict_free`, equal rows share a label.
fn grid_dataset(rng: &mut ChaCha8Rng, conflict_free: bool) -> DesignMatrix {
    let n = rng.gen_range(5..80);
    let d = rng.gen_range(1..5);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| f64::from(rng.gen_range(0..5u8))).collect())
        .collect();
    let mut by_row: HashMap<Vec<u64>, u8> = HashMap::new();
    let labels = rows
        .iter()
        .map(|r| {
            let fresh = rng.gen_range(0..2u8);
            if conflict_free {
                *by_row
                    .entry(r.iter().map(|v| v.to_bits()).collect())
                    .or_insert(fresh)
            } else {
                fresh
            }
        })
        .collect();
    let names = (0..d).map(|j| format!("x{j}")).collect();
    DesignMatrix::new(Matrix::from_rows(&rows).unwrap(), labels, names).unwrap()
}

fn criterion_6b() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(602);
    let hp = ForestParams {
        n_trees: 1,
        features_per_split: FeaturesPerSplit::All,
        bootstrap: false,
        ..ForestParams::default()
    };
    for trial in 0..50 {
        let data = grid_dataset(&mut rng, false);
        let forest = train_forest(&data, &hp).unwrap();
        let tree = train_tree(&data, &TreeParams::default()).unwrap();
        if forest.trees[0] != tree {
            return Status::Fail(format!("dataset {trial}: trees differ"));
        }
    }
    Status::Pass("50 datasets, identical trees".into())
}

fn pair_ordering_auc(y: &[u8], s: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn criterion_6c() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(603);
    let mut trials = 0;
    let mut worst: f64 = 0.0;
    while trials < 1000 {
        let n = rng.gen_range(2..=50);
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        if !(y.contains(&0) && y.contains(&1)) {
            continue;
        }
        let levels = rng.gen_range(1..12);
        let s: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.gen_range(0..levels)) / 3.0)
            .collect();
        let auc = roc_curve(&y, &s).unwrap().auc;
        worst = worst.max((auc - pair_ordering_auc(&y, &s)).abs());
        trials += 1;
    }
    check(
        worst <= 1e-12,
        format!("1000 instances, max |diff| {worst:.1e}"),
    )
}

fn criterion_6d() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(604);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut c = [0u64; 4];
        for v in &mut c {
            *v = rng.gen_range(0..10_000);
        }
        if c.iter().sum::<u64>() == 0 {
            c[0] = 1;
        }
        let m = classification_metrics(&ConfusionMatrix::new(c[0], c[1], c[2], c[3])).unwrap();
        worst = worst.max((m.weighted.recall - m.accuracy).abs());
    }
    check(
        worst <= 1e-12,
        format!("1000 matrices, max |diff| {worst:.1e}"),
    )
}

fn criterion_6e() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(605);
    for trial in 0..100 {
        let data = grid_dataset(&mut rng, true);
        let tree = train_tree(&data, &TreeParams::default()).unwrap();
        let correct = data
            .features
            .rows()
            .zip(&data.labels)
            .filter(|(r, &l)| tree.predict(r).0 == l)
            .count();
        if correct != data.n_rows() {
            return Status::Fail(format!("dataset {trial}: {correct}/{}", data.n_rows()));
        }
    }
    Status::Pass("100 datasets, training accuracy 1.0".into())
}

fn wide_value(rng: &mut ChaCha8Rng) -> f64 {
    let mantissa: f64 = rng.gen_range(-1.0..1.0);
    mantissa * 10f64.powi(rng.gen_range(-300..300))
}

fn criterion_6f() -> Status {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for trial in 0..500 {
        let n = rng.gen_range(2..40);
        let d = rng.gen_range(1..4);
        let train =
            Matrix::from_vec(n, d, (0..n * d).map(|_| wide_value(&mut rng)).collect()).unwrap();
        let test =
            Matrix::from_vec(n, d, (0..n * d).map(|_| wide_value(&mut rng)).collect()).unwrap();
        let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        let params = fit_normalizer(&train, &names).unwrap();
        for m in [&train, &test] {
            let scaled = apply_normalizer(m, &params).unwrap();
            if scaled.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Status::Fail(format!("normalization trial {trial} left [0, 1]"));
            }
        }
        let x: Vec<f64> = (0..n).map(|_| wide_value(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| wide_value(&mut rng)).collect();
        if let Ok(r) = pearson_correlation(&x, &y) {
            if !(-1.0..=1.0).contains(&r) {
                return Status::Fail(format!("pearson trial {trial}: r = {r}"));
            }
        }
    }
    Status::Pass("500 fuzz trials each for scaling and Pearson r".into())
}

fn masked_report(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    text.lines()
        .map(|l| {
            if l.trim_start().starts_with("\"timestamp\"") {
                "<timestamp>"
            } else {
                l
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn criterion_6g(scratch: &Path) -> Status {
    let input = common::write_synthetic(scratch, 3000, 11);
    let mut reports = Vec::new();
    for threads in ["1", "2", "8"] {
        let out = scratch.join(format!("threads-{threads}"));
        if let Err(e) = compare(&input, &out, 42, &[("threads", threads), ("n-trees", "40")]) {
            return Status::Fail(e);
        }
        reports.push(masked_report(&out));
    }
    check(
        reports[0] == reports[1] && reports[0] == reports[2],
        format!(
            "report.json identical across 1, 2, 8 threads ({} bytes)",
            reports[0].len()
        ),
    )
}

fn main() -> ExitCode {
    let mut runner = Runner {
        failures: 0,
        blocked: 0,
        strict: common::dataset_required(),
    };
    let scratch = tempfile::tempdir().expect("temp dir");
    let surrogate = common::write_synthetic(scratch.path(), common::FULL_ROWS, 7);
    let dataset = common::real_dataset();
    println!("\nacceptance criteria");

    runner.record(
        "1",
        "metric engine reproduces published table",
        criterion_1(),
    );
    runner.record("2", "hard-label AUC identity", criterion_2());
    runner.record(
        "3",
        "feature selection on public data",
        criterion_3(dataset.as_deref()),
    );
    runner.record(
        "3r",
        "selection runtime (surrogate)",
        criterion_3_runtime(&surrogate),
    );
    runner.record(
        "4",
        "end-to-end tolerance bands, 5 seeds",
        criterion_4(dataset.as_deref(), scratch.path()),
    );
    runner.record(
        "4r",
        "compare runtime (surrogate)",
        criterion_4_runtime(&surrogate, scratch.path()),
    );
    runner.record("5", "split arithmetic", criterion_5(&surrogate));
    runner.record(
        "6a",
        "logistic gradient vs finite differences",
        criterion_6a(),
    );
    runner.record("6b", "one-tree forest equals CART", criterion_6b());
    runner.record("6c", "trapezoidal AUC equals pair ordering", criterion_6c());
    runner.record("6d", "weighted recall equals accuracy", criterion_6d());
    runner.record(
        "6e",
        "unlimited tree fits conflict-free data",
        criterion_6e(),
    );
    runner.record(
        "6f",
        "scaling and Pearson bounds under fuzzing",
        criterion_6f(),
    );
    runner.record(
        "6g",
        "compare report independent of threads",
        criterion_6g(scratch.path()),
    );
    for (id, what) in [
        ("7a", "R-squared values quoted alongside the AUC"),
        ("7b", "per-classifier ROC AUC values"),
        ("7c", "density-peak table"),
    ] {
        runner.record(
            id,
            what,
            Status::Excluded("not a target; recorded as an open question".into()),
        );
    }

    println!(
        "\n{} failed, {} blocked{}",
        runner.failures,
        runner.blocked,
        if runner.strict {
            " (dataset required)"
        } else {
            ""
        }
    );
    if runner.failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
