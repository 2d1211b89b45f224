//! Soft-margin kernel SVM trained with sequential minimal optimization.
//!
//! The solver follows the classic pair-wise scheme: an outer loop examines
//! KKT violators (all points, then only non-bound points until those are
//! clean), the second index is picked by the largest `|E1 - E2|` among
//! non-bound points with seeded fallbacks, and an error cache keeps every
//! `E_i` current so a violation check costs O(1). Kernel rows are kept in a
//! small LRU cache.
//!
//! Decision function: `f(x) = Σ αᵢ yᵢ k(xᵢ, x) + b`, labels in {-1, +1}.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};
use crate::matrix::Matrix;
use crate::preprocess::DesignMatrix;

/// Smallest α change that counts as progress.
const MIN_ALPHA_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelChoice,
    /// RBF width; `None` means `1 / (d · mean per-feature variance)`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    /// Consecutive full passes without α updates required to stop.
    pub max_passes: usize,
    /// Cap on successful pair updates; hitting it flags the model.
    pub max_iterations: usize,
    /// Kernel row cache budget in MiB.
    pub cache_mb: usize,
    /// Seed for the fallback scan start positions.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: KernelChoice::Rbf,
            gamma: None,
            tolerance: 1e-3,
            max_passes: 5,
            max_iterations: 2_000_000,
            cache_mb: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// αᵢ·yᵢ for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    /// Primal weights, present for the linear kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_weights: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        if let Some(w) = &self.linear_weights {
            return w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias;
        }
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

/// `1 / (d · mean population variance of the columns)`, or 1 when the
/// data has no spread.
pub fn auto_gamma(x: &Matrix) -> f64 {
    let (n, d) = (x.n_rows(), x.n_cols());
    if n == 0 || d == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for j in 0..d {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        total += (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
    }
    let mean_var = total / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0
    }
}

struct KernelCache {
    rows: Vec<Option<Vec<f64>>>,
    last_used: Vec<u64>,
    resident: Vec<usize>,
    capacity: usize,
    clock: u64,
}

impl KernelCache {
    fn new(n: usize, cache_mb: usize) -> Self {
        let per_row = (n * std::mem::size_of::<f64>()).max(1);
        let capacity = ((cache_mb << 20) / per_row).clamp(2, n.max(2));
        Self {
            rows: vec![None; n],
            last_used: vec![0; n],
            resident: Vec::new(),
            capacity,
            clock: 0,
        }
    }

    fn ensure(&mut self, i: usize, x: &Matrix, kernel: &Kernel) {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if self.rows[i].is_some() {
            return;
        }
        if self.resident.len() >= self.capacity {
            let (pos, _) = self
                .resident
                .iter()
                .enumerate()
                .min_by_key(|(_, &r)| self.last_used[r])
                .expect("cache not empty");
            let victim = self.resident.swap_remove(pos);
            self.rows[victim] = None;
        }
        let xi = x.row(i);
        let row = (0..x.n_rows()).map(|k| kernel.eval(xi, x.row(k))).collect();
        self.rows[i] = Some(row);
        self.resident.push(i);
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row cached")
    }
}

struct Solver<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    kernel: Kernel,
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    /// `Σ αⱼ yⱼ K(i,j) - yᵢ`; the error is this plus `b`.
    grad: Vec<f64>,
    b: f64,
    diag: Vec<f64>,
    cache: KernelCache,
    non_bound: Vec<usize>,
    in_non_bound: Vec<Option<usize>>,
    rng: ChaCha8Rng,
    iterations: usize,
    max_iterations: usize,
}

impl<'a> Solver<'a> {
    fn error(&self, i: usize) -> f64 {
        self.grad[i] + self.b
    }

    fn is_non_bound(&self, a: f64) -> bool {
        a > 0.0 && a < self.c
    }

    fn refresh_membership(&mut self, i: usize) {
        let nb = self.is_non_bound(self.alpha[i]);
        match (nb, self.in_non_bound[i]) {
            (true, None) => {
                self.in_non_bound[i] = Some(self.non_bound.len());
                self.non_bound.push(i);
            }
            (false, Some(pos)) => {
                self.non_bound.swap_remove(pos);
                if let Some(&moved) = self.non_bound.get(pos) {
                    self.in_non_bound[moved] = Some(pos);
                }
                self.in_non_bound[i] = None;
            }
            _ => {}
        }
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if y1 != y2 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if hi - lo < 1e-12 {
            return false;
        }
        let k11 = self.diag[i1];
        let k22 = self.diag[i2];
        let k12 = self.kernel.eval(self.x.row(i1), self.x.row(i2));
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2_new = if eta > 1e-12 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // objective restricted to the segment is linear: compare ends
            let g1 = self.grad[i1];
            let g2 = self.grad[i2];
            let f1 = y1 * g1 - a1 * k11 - s * a2 * k12;
            let f2 = y2 * g2 - s * a1 * k12 - a2 * k22;
            let obj = |a2v: f64| {
                let a1v = a1 + s * (a2 - a2v);
                a1v * f1
                    + a2v * f2
                    + 0.5 * a1v * a1v * k11
                    + 0.5 * a2v * a2v * k22
                    + s * a2v * a1v * k12
            };
            let (l_obj, h_obj) = (obj(lo), obj(hi));
            if l_obj < h_obj - 1e-12 {
                lo
            } else if l_obj > h_obj + 1e-12 {
                hi
            } else {
                a2
            }
        };
        if (a2_new - a2).abs() < MIN_ALPHA_STEP {
            return false;
        }
        let mut a1_new = a1 + s * (a2 - a2_new);
        if a1_new < 1e-12 {
            a2_new += s * a1_new;
            a1_new = 0.0;
        } else if a1_new > c - 1e-12 {
            a2_new += s * (a1_new - c);
            a1_new = c;
        }
        a2_new = a2_new.clamp(0.0, c);

        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        self.b = if self.is_non_bound(a1_new) {
            b1
        } else if self.is_non_bound(a2_new) {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        self.cache.ensure(i1, self.x, &self.kernel);
        self.cache.ensure(i2, self.x, &self.kernel);
        let (r1, r2) = (self.cache.row(i1), self.cache.row(i2));
        for ((g, k1), k2) in self.grad.iter_mut().zip(r1).zip(r2) {
            *g += d1 * k1 + d2 * k2;
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        self.refresh_membership(i1);
        self.refresh_membership(i2);
        self.iterations += 1;
        true
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.error(i) * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates_kkt(i2) {
            return false;
        }
        let e2 = self.error(i2);
        if self.non_bound.len() > 1 {
            let mut best = None;
            let mut best_gap = -1.0;
            for &k in &self.non_bound {
                let gap = (self.error(k) - e2).abs();
                if gap > best_gap {
                    best_gap = gap;
                    best = Some(k);
                }
            }
            if let Some(i1) = best {
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        let m = self.non_bound.len();
        if m > 0 {
            let start = self.rng.gen_range(0..m);
            for off in 0..m {
                let i1 = self.non_bound[(start + off) % m];
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        let n = self.alpha.len();
        let start = self.rng.gen_range(0..n);
        for off in 0..n {
            if self.take_step((start + off) % n, i2) {
                return true;
            }
        }
        false
    }

    fn run(&mut self, max_passes: usize) -> bool {
        let n = self.alpha.len();
        let mut examine_all = true;
        let mut quiet_full_passes = 0;
        loop {
            if self.iterations >= self.max_iterations {
                return false;
            }
            let mut changed = 0usize;
            if examine_all {
                for i in 0..n {
                    if self.iterations >= self.max_iterations {
                        return false;
                    }
                    changed += usize::from(self.examine(i));
                }
                if changed == 0 {
                    quiet_full_passes += 1;
                    if quiet_full_passes >= max_passes.max(1) {
                        return true;
                    }
                } else {
                    quiet_full_passes = 0;
                    examine_all = false;
                }
            } else {
                let snapshot = self.non_bound.clone();
                for i in snapshot {
                    if self.iterations >= self.max_iterations {
                        return false;
                    }
                    changed += usize::from(self.examine(i));
                }
                if changed == 0 {
                    examine_all = true;
                }
            }
        }
    }
}

pub fn train_svm(data: &DesignMatrix, hp: &SvmParams) -> Result<SvmModel> {
    if data.labels.iter().any(|&l| l > 1) {
        return Err(CrlError::NonBinaryLabels);
    }
    let n = data.n_rows();
    if n == 0 {
        return Err(CrlError::EmptyDataset);
    }
    if hp.c.is_nan() || hp.c <= 0.0 || hp.tolerance.is_nan() || hp.tolerance <= 0.0 {
        return Err(CrlError::Config("SVM needs C > 0 and tolerance > 0".into()));
    }
    let x = &data.features;
    let kernel = match hp.kernel {
        KernelChoice::Linear => Kernel::Linear,
        KernelChoice::Rbf => Kernel::Rbf {
            gamma: hp.gamma.unwrap_or_else(|| auto_gamma(x)),
        },
    };
    let y: Vec<f64> = data
        .labels
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let diag = (0..n).map(|i| kernel.eval(x.row(i), x.row(i))).collect();
    let mut solver = Solver {
        x,
        grad: y.iter().map(|v| -v).collect(),
        y,
        kernel,
        c: hp.c,
        tol: hp.tolerance,
        alpha: vec![0.0; n],
        b: 0.0,
        diag,
        cache: KernelCache::new(n, hp.cache_mb),
        non_bound: Vec::new(),
        in_non_bound: vec![None; n],
        rng: ChaCha8Rng::seed_from_u64(hp.seed),
        iterations: 0,
        max_iterations: hp.max_iterations,
    };
    let converged = solver.run(hp.max_passes);
    if !converged {
        log::warn!(
            "SMO stopped at the iteration cap ({}) before convergence",
            hp.max_iterations
        );
    }

    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for i in 0..n {
        if solver.alpha[i] > 0.0 {
            support_vectors.push(x.row(i).to_vec());
            dual_coef.push(solver.alpha[i] * solver.y[i]);
        }
    }
    let linear_weights = match kernel {
        Kernel::Linear => {
            let mut w = vec![0.0; x.n_cols()];
            for (sv, c) in support_vectors.iter().zip(&dual_coef) {
                for (wj, v) in w.iter_mut().zip(sv) {
                    *wj += c * v;
                }
            }
            Some(w)
        }
        Kernel::Rbf { .. } => None,
    };
    Ok(SvmModel {
        kernel,
        c: hp.c,
        support_vectors,
        dual_coef,
        bias: solver.b,
        linear_weights,
        converged,
        iterations: solver.iterations,
    })
}
