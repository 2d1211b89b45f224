//! Synthetic stand-in for the public credit-risk CSV: same header, column
//! types, category labels, class balance and missing-value pattern, with
//! feature/target associations of the same signs.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

pub const FULL_ROWS: usize = 32_581;
pub const HEADER: &str = "person_age,person_income,person_home_ownership,person_emp_length,loan_intent,loan_grade,loan_amnt,loan_int_rate,loan_status,loan_percent_income,cb_person_default_on_file,cb_person_cred_hist_length";

const INTENTS: [&str; 6] = [
    "DEBTCONSOLIDATION",
    "EDUCATION",
    "HOMEIMPROVEMENT",
    "MEDICAL",
    "PERSONAL",
    "VENTURE",
];
const GRADES: [&str; 7] = ["A", "B", "C", "D", "E", "F", "G"];

fn pick<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// CSV text with `n` rows drawn from a fixed seed.
pub fn synthetic_csv(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let income_dist = LogNormal::new(10.95, 0.5).unwrap();
    let mut s = String::with_capacity(n * 80);
    s.push_str(HEADER);
    s.push('\n');
    for _ in 0..n {
        let risk = u8::from(rng.gen::<f64>() < 0.218);
        let r = f64::from(risk);

        let age = (20.0 + (rng.gen::<f64>().powi(2) * 40.0) + noise.sample(&mut rng))
            .round()
            .max(20.0);
        let income = (income_dist.sample(&mut rng) * (1.0 - 0.25 * r))
            .round()
            .max(4000.0);
        let home = if risk == 1 {
            pick(&mut rng, &[0.17, 0.01, 0.03, 0.79])
        } else {
            pick(&mut rng, &[0.46, 0.004, 0.09, 0.446])
        };
        let emp = (noise.sample(&mut rng).abs() * (5.0 - 0.6 * r)).round();
        let intent = pick(
            &mut rng,
            &[
                0.16 + 0.04 * r,
                0.2 - 0.04 * r,
                0.11 + 0.02 * r,
                0.18 + 0.03 * r,
                0.17,
                0.18 - 0.05 * r,
            ],
        );
        let grade = if risk == 1 {
            pick(&mut rng, &[0.14, 0.22, 0.14, 0.33, 0.11, 0.04, 0.02])
        } else {
            pick(&mut rng, &[0.38, 0.34, 0.2, 0.05, 0.02, 0.008, 0.002])
        };
        let amount = ((rng.gen::<f64>() * 12000.0 + 2000.0) * (1.0 + 0.25 * r)
            + 500.0 * noise.sample(&mut rng))
        .clamp(500.0, 35000.0)
        .round();
        let rate = 7.5 + 1.7 * grade as f64 + 1.2 * noise.sample(&mut rng);
        let pct = (amount / income).min(0.83);
        let default_flag = if rng.gen::<f64>() < 0.13 + 0.25 * r + 0.05 * grade as f64 {
            "Y"
        } else {
            "N"
        };
        let hist = ((age - 18.0) * 0.4 + 2.0 * noise.sample(&mut rng).abs())
            .round()
            .max(2.0);

        let emp_field = if rng.gen::<f64>() < 0.027 {
            String::new()
        } else {
            format!("{emp}")
        };
        let rate_field = if rng.gen::<f64>() < 0.095 {
            String::new()
        } else {
            format!("{rate:.2}")
        };
        let _ = writeln!(
            s,
            "{age},{income},{},{emp_field},{},{},{amount},{rate_field},{risk},{pct:.2},{default_flag},{hist}",
            ["MORTGAGE", "OTHER", "OWN", "RENT"][home],
            INTENTS[intent],
            GRADES[grade],
        );
    }
    s
}

pub fn write_synthetic(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("synthetic-{n}-{seed}.csv"));
    std::fs::write(&path, synthetic_csv(n, seed)).unwrap();
    path
}

/// The public CSV if available: `CRL_DATASET`, else `data/credit_risk_dataset.csv`
/// relative to the workspace root.
pub fn real_dataset() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("CRL_DATASET") {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/credit_risk_dataset.csv");
    p.is_file().then_some(p)
}

/// When set, dataset-gated checks fail instead of reporting BLOCKED.
pub fn dataset_required() -> bool {
    std::env::var("CRL_REQUIRE_DATASET").is_ok_and(|v| v == "1")
}
