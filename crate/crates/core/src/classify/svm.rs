use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use crate::util::rng;
use crate::{Error, Result};

/// SMO solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Box constraint.
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Consecutive sweeps without any update before the random-partner
    /// phase ends.
    pub max_passes: usize,
    /// Cap on random-partner sweeps.
    pub max_sweeps: usize,
    /// Cap on working-set steps.
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_passes: 10,
            max_sweeps: 1000,
            max_steps: 10_000_000,
            seed: 0,
        }
    }
}

/// Kernel machine `f(x) = sum_i coef_i K(sv_i, x) + bias` with
/// `coef_i = alpha_i y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    #[serde(rename = "C")]
    pub c: f64,
    /// Training-row index of each support vector.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support_indices: Vec<usize>,
}

impl BinarySvmModel {
    pub fn width(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    #[inline]
    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

pub fn svm_decision(model: &BinarySvmModel, x: &[f64]) -> Result<f64> {
    if let Some(w) = model.width() {
        if w != x.len() {
            return Err(Error::Mismatch {
                expected: w,
                actual: x.len(),
            });
        }
    }
    Ok(model.decision_unchecked(x))
}

struct Solver<'a> {
    y: &'a [f64],
    k: Vec<f64>,
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    /// `sum_j alpha_j y_j K(j, i)`, without the bias.
    g: Vec<f64>,
    b: f64,
}

impl Solver<'_> {
    #[inline]
    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    #[inline]
    fn err(&self, i: usize) -> f64 {
        self.g[i] + self.b - self.y[i]
    }

    fn snap(&self, a: f64) -> f64 {
        if a <= 1e-12 * self.c {
            0.0
        } else if a >= self.c * (1.0 - 1e-12) {
            self.c
        } else {
            a
        }
    }

    /// Working pair by second-order selection: `i` maximizes `y - g` over
    /// the multipliers that may move up, `j` maximizes the guaranteed
    /// objective decrease with `i` among those that may move down. Also
    /// returns the violation gap `max_up (y - g) - min_low (y - g)`.
    fn select_pair(&self) -> (usize, usize, f64) {
        let up = |t: usize| if self.y[t] > 0.0 { self.alpha[t] < self.c } else { self.alpha[t] > 0.0 };
        let low = |t: usize| if self.y[t] > 0.0 { self.alpha[t] > 0.0 } else { self.alpha[t] < self.c };
        let v = |t: usize| self.y[t] - self.g[t];
        let (mut i, mut m) = (usize::MAX, f64::NEG_INFINITY);
        for t in (0..self.n).filter(|&t| up(t)) {
            if v(t) > m {
                (i, m) = (t, v(t));
            }
        }
        let mut big_m = f64::INFINITY;
        let (mut j, mut best) = (usize::MAX, f64::INFINITY);
        for t in (0..self.n).filter(|&t| low(t)) {
            let vt = v(t);
            big_m = big_m.min(vt);
            let b = m - vt;
            if b > 0.0 {
                let a = (self.kij(i, i) + self.kij(t, t) - 2.0 * self.kij(i, t)).max(1e-12);
                let score = -b * b / a;
                if score < best {
                    (j, best) = (t, score);
                }
            }
        }
        (i, j, m - big_m)
    }

    fn at_lower(&self, i: usize) -> bool {
        self.alpha[i] <= 1e-12 * self.c
    }

    fn at_upper(&self, i: usize) -> bool {
        self.alpha[i] >= self.c * (1.0 - 1e-12)
    }

    fn violates(&self, i: usize, tol: f64) -> bool {
        let r = self.y[i] * self.err(i);
        (r < -tol && !self.at_upper(i)) || (r > tol && !self.at_lower(i))
    }

    /// Jointly optimizes `alpha_i, alpha_j`; returns whether anything moved
    /// by more than `min_step` (relative).
    fn take_step(&mut self, i: usize, j: usize, min_step: f64) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(0.0), (ai + aj).min(self.c))
        };
        if hi - lo < 1e-12 * self.c {
            return false;
        }
        // duplicate points give eta = 0; a tiny curvature pushes to a bound
        let eta = (2.0 * self.kij(i, j) - self.kij(i, i) - self.kij(j, j)).min(-1e-12);
        let (ei, ej) = (self.err(i), self.err(j));
        let aj_new = self.snap((aj - yj * (ei - ej) / eta).clamp(lo, hi));
        if (aj_new - aj).abs() <= min_step * (aj_new + aj + 1e-10) {
            return false;
        }
        let ai_new = self.snap((ai + yi * yj * (aj - aj_new)).clamp(0.0, self.c));
        let (dai, daj) = (ai_new - ai, aj_new - aj);
        let b1 = self.b - ei - yi * dai * self.kij(i, i) - yj * daj * self.kij(i, j);
        let b2 = self.b - ej - yi * dai * self.kij(i, j) - yj * daj * self.kij(j, j);
        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        self.b = if !self.at_lower(i) && !self.at_upper(i) {
            b1
        } else if !self.at_lower(j) && !self.at_upper(j) {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        for t in 0..self.n {
            self.g[t] += yi * dai * self.k[i * self.n + t] + yj * daj * self.k[j * self.n + t];
        }
        true
    }

    /// Bias from the free support vectors (mean), or the midpoint of the
    /// feasible interval when every multiplier sits at a bound.
    fn refit_bias(&mut self) {
        let mut free_sum = 0.0;
        let mut free_n = 0usize;
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.n {
            let target = self.y[i] - self.g[i];
            if !self.at_lower(i) && !self.at_upper(i) {
                free_sum += target;
                free_n += 1;
            } else {
                // alpha = 0 wants y f >= 1; alpha = C wants y f <= 1
                let wants_above = self.at_lower(i) == (self.y[i] > 0.0);
                if wants_above {
                    lo = lo.max(target);
                } else {
                    hi = hi.min(target);
                }
            }
        }
        self.b = if free_n > 0 {
            free_sum / free_n as f64
        } else if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo
        } else if hi.is_finite() {
            hi
        } else {
            0.0
        };
    }

    fn worst_violation(&self) -> f64 {
        (0..self.n)
            .map(|i| kkt_violation(self.alpha[i], self.c, self.y[i] * (self.g[i] + self.b)))
            .fold(0.0, f64::max)
    }
}

fn kkt_violation(alpha: f64, c: f64, margin: f64) -> f64 {
    let r = margin - 1.0;
    if alpha <= 1e-12 * c {
        (-r).max(0.0)
    } else if alpha >= c * (1.0 - 1e-12) {
        r.max(0.0)
    } else {
        r.abs()
    }
}

/// Simplified Platt SMO followed by a working-set-selection phase.
///
/// Each random-partner sweep visits every multiplier violating KKT by more
/// than `tol`, pairs it with a seeded-random partner and, if that pair
/// cannot move, with the remaining partners in cyclic order from a random
/// start. That phase ends after `max_passes` consecutive sweeps without
/// updates. The second phase repeatedly optimizes the pair chosen by
/// second-order working-set selection on the bias-free optimality
/// condition until the violation gap is
/// at most `tol`, which bounds every KKT residual by `tol` once the bias is
/// refit. Labels must be `+1` / `-1`.
pub fn smo_train(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: &KernelSpec,
    params: &SmoParams,
) -> Result<BinarySvmModel> {
    kernel.validate()?;
    if !(params.c > 0.0) {
        return Err(Error::param("C", "must be > 0"));
    }
    if !(params.tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    if x.len() != y.len() {
        return Err(Error::Mismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::param("labels", "must be +1 or -1"));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::param("labels", "both classes must be present"));
    }
    let width = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != width) {
        return Err(Error::Mismatch {
            expected: width,
            actual: r.len(),
        });
    }

    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let mut s = Solver {
        y,
        k,
        n,
        c: params.c,
        alpha: vec![0.0; n],
        g: vec![0.0; n],
        b: 0.0,
    };
    let mut rng = rng(params.seed);
    let mut passes = 0;
    let mut sweeps = 0usize;
    while passes < params.max_passes && sweeps < params.max_sweeps {
        let mut changed = 0;
        for i in 0..n {
            if !s.violates(i, params.tol) {
                continue;
            }
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            if s.take_step(i, j, 1e-10) {
                changed += 1;
                continue;
            }
            let start = rng.gen_range(0..n);
            for off in 0..n {
                if s.take_step(i, (start + off) % n, 1e-10) {
                    changed += 1;
                    break;
                }
            }
        }
        sweeps += 1;
        passes = if changed == 0 { passes + 1 } else { 0 };
    }
    let mut steps = 0usize;
    loop {
        let (i, j, gap) = s.select_pair();
        if gap <= params.tol {
            break;
        }
        if steps >= params.max_steps || !s.take_step(i, j, 0.0) {
            s.refit_bias();
            return Err(Error::NonConvergence {
                iterations: sweeps + steps,
                worst_violation: s.worst_violation().max(gap),
            });
        }
        steps += 1;
    }
    s.refit_bias();

    let mut model = BinarySvmModel {
        support_vectors: Vec::new(),
        dual_coefs: Vec::new(),
        bias: s.b,
        kernel: *kernel,
        c: params.c,
        support_indices: Vec::new(),
    };
    for i in 0..n {
        if s.alpha[i] > 0.0 {
            model.support_vectors.push(x[i].clone());
            model.dual_coefs.push(s.alpha[i] * y[i]);
            model.support_indices.push(i);
        }
    }
    Ok(model)
}

/// KKT residual of every training row for a model produced by
/// [`smo_train`] on `(x, y)`.
pub fn kkt_residuals(model: &BinarySvmModel, x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut alpha = vec![0.0; x.len()];
    for (&i, c) in model.support_indices.iter().zip(&model.dual_coefs) {
        alpha[i] = c.abs();
    }
    x.iter()
        .zip(y)
        .zip(&alpha)
        .map(|((xi, yi), &a)| kkt_violation(a, model.c, yi * model.decision_unchecked(xi)))
        .collect()
}
