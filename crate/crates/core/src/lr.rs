//! Logistic regression: likelihood, gradient and an L1-regularized
//! proximal-gradient fit.
//!
//! Column 0 of every matrix is the intercept. The fit minimizes
//!
//! ```text
//! -sum_i [ y_i ln p_i + (1 - y_i) ln(1 - p_i) ] + lambda1 * sum_{j penalized} |w_j|
//! ```
//!
//! with ISTA steps and a backtracking line search on the smooth part, which
//! keeps the objective non-increasing from one iteration to the next.

use log::warn;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            n_rows * n_cols,
            "matrix data has the wrong length"
        );
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::new(n_rows, n_cols, vec![0.0; n_rows * n_cols])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.get(i, j))
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix::new(rows.len(), self.n_cols, data)
    }

    /// Columns selected by index, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        DenseMatrix::new(self.n_rows, cols.len(), data)
    }

    fn mul_vec(&self, w: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), w);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (1 + e^-x)` evaluated through `e^-|x|` so it never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Probability clamp used inside log terms only.
pub const LOG_CLAMP: f64 = 1e-12;

/// Weights below this magnitude count as exactly zero.
pub const ZERO_SNAP: f64 = 1e-8;

pub fn predict_prob(w: &[f64], row: &[f64]) -> f64 {
    assert_eq!(w.len(), row.len(), "weight/feature dimension mismatch");
    sigmoid(dot(w, row))
}

/// Negative log-likelihood and its gradient `X^T (p - y)`.
pub fn neg_log_likelihood(w: &[f64], x: &DenseMatrix, y: &[bool]) -> (f64, Vec<f64>) {
    assert_eq!(w.len(), x.n_cols(), "weight/feature dimension mismatch");
    assert_eq!(y.len(), x.n_rows(), "label count mismatch");
    let mut grad = vec![0.0; w.len()];
    let mut value = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let row = x.row(i);
        let s = dot(row, w);
        let p = sigmoid(s);
        let nll = if label { softplus(-s) } else { softplus(s) };
        value += nll.min(-LOG_CLAMP.ln());
        let r = p - if label { 1.0 } else { 0.0 };
        for (g, xv) in grad.iter_mut().zip(row) {
            *g += r * xv;
        }
    }
    (value, grad)
}

/// Smooth loss computed from linear scores; no clamping needed here since
/// softplus is exact, and it agrees with the clamped form away from 1e-12.
fn loss_from_scores(scores: &[f64], y: &[bool]) -> f64 {
    scores
        .iter()
        .zip(y)
        .map(|(&s, &label)| {
            let nll = if label { softplus(-s) } else { softplus(s) };
            nll.min(-LOG_CLAMP.ln())
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// L1 strength on penalized columns.
    pub lambda1: f64,
    pub max_iterations: usize,
    /// Relative change in objective that ends the iteration.
    pub tolerance: f64,
    pub penalize_intercept: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda1: 0.0,
            max_iterations: 5000,
            tolerance: 1e-6,
            penalize_intercept: false,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(&self, lambda1: f64) -> Self {
        SolverConfig {
            lambda1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub weights: Vec<f64>,
    /// Penalized objective at `weights`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

/// L1-regularized fit from the zero vector.
pub fn fit_l1(x: &DenseMatrix, y: &[bool], cfg: &SolverConfig) -> FitResult {
    fit_l1_from(x, y, cfg, &vec![0.0; x.n_cols()])
}

/// L1-regularized fit from a warm start.
pub fn fit_l1_from(x: &DenseMatrix, y: &[bool], cfg: &SolverConfig, start: &[f64]) -> FitResult {
    assert_eq!(start.len(), x.n_cols());
    assert_eq!(y.len(), x.n_rows());
    assert!(cfg.tolerance > 0.0 && cfg.max_iterations >= 1 && cfg.lambda1 >= 0.0);
    let n = x.n_rows();
    let p = x.n_cols();
    let penalized = |j: usize| cfg.penalize_intercept || j != 0;
    let penalty = |w: &[f64]| -> f64 {
        cfg.lambda1
            * w.iter()
                .enumerate()
                .filter(|(j, _)| penalized(*j))
                .map(|(_, v)| v.abs())
                .sum::<f64>()
    };

    let mut w = start.to_vec();
    let mut scores = vec![0.0; n];
    x.mul_vec(&w, &mut scores);
    let mut smooth = loss_from_scores(&scores, y);
    let mut objective = smooth + penalty(&w);
    let mut history = vec![objective];

    // initial step from a bound on the curvature: ||X||_F^2 / 4
    let frob: f64 = x.data.iter().map(|v| v * v).sum();
    let mut step = if frob > 0.0 { 4.0 / frob } else { 1.0 };
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = vec![0.0; p];
    let mut candidate = vec![0.0; p];
    let mut cand_scores = vec![0.0; n];

    while iterations < cfg.max_iterations {
        iterations += 1;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let r = sigmoid(scores[i]) - if y[i] { 1.0 } else { 0.0 };
            if r != 0.0 {
                for (g, xv) in grad.iter_mut().zip(x.row(i)) {
                    *g += r * xv;
                }
            }
        }

        step *= 1.5;
        let (cand_smooth, cand_obj) = loop {
            for j in 0..p {
                let v = w[j] - step * grad[j];
                candidate[j] = if penalized(j) {
                    soft_threshold(v, step * cfg.lambda1)
                } else {
                    v
                };
            }
            x.mul_vec(&candidate, &mut cand_scores);
            let cs = loss_from_scores(&cand_scores, y);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for j in 0..p {
                let d = candidate[j] - w[j];
                lin += grad[j] * d;
                quad += d * d;
            }
            let bound = smooth + lin + quad / (2.0 * step);
            if cs <= bound + 1e-12 * smooth.abs().max(1.0) || step < 1e-300 {
                break (cs, cs + penalty(&candidate));
            }
            step *= 0.5;
        };

        if cand_obj > objective {
            // numerical floor reached
            converged = true;
            break;
        }
        let change = (objective - cand_obj).abs() / objective.abs().max(f64::MIN_POSITIVE);
        std::mem::swap(&mut w, &mut candidate);
        std::mem::swap(&mut scores, &mut cand_scores);
        smooth = cand_smooth;
        objective = cand_obj;
        history.push(objective);
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "L1 logistic regression did not converge in {} iterations (objective {objective})",
            cfg.max_iterations
        );
    }
    for v in w.iter_mut() {
        if v.abs() < ZERO_SNAP {
            *v = 0.0;
        }
    }
    FitResult {
        objective: loss_from_scores(
            &{
                let mut s = vec![0.0; n];
                x.mul_vec(&w, &mut s);
                s
            },
            y,
        ) + penalty(&w),
        weights: w,
        iterations,
        converged,
        history,
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Smallest `lambda1` at which every penalized weight is zero when the
/// intercept is free: `max_j |X_j^T (y - mean(y))|`.
pub fn lambda_max(x: &DenseMatrix, y: &[bool]) -> f64 {
    let n = y.len().max(1) as f64;
    let mean = y.iter().filter(|v| **v).count() as f64 / n;
    (1..x.n_cols())
        .map(|j| {
            x.column(j)
                .zip(y)
                .map(|(v, &label)| v * (if label { 1.0 } else { 0.0 } - mean))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Per-column centering and scaling of every column except the intercept.
/// Weights fitted on the scaled matrix map back to the raw scale exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DenseMatrix) -> Self {
        let n = x.n_rows().max(1) as f64;
        let mut mean = vec![0.0; x.n_cols()];
        let mut scale = vec![1.0; x.n_cols()];
        for j in 1..x.n_cols() {
            let m = x.column(j).sum::<f64>() / n;
            let var = x.column(j).map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean[j] = m;
            scale[j] = if var.sqrt() > 1e-12 * m.abs().max(1.0) {
                var.sqrt()
            } else {
                1.0
            };
        }
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = x.clone();
        for i in 0..out.n_rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate().skip(1) {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    /// Maps weights fitted on transformed data back to raw features.
    pub fn to_raw(&self, w: &[f64]) -> Vec<f64> {
        let mut raw = w.to_vec();
        for j in 1..w.len() {
            raw[j] = w[j] / self.scale[j];
            raw[0] -= raw[j] * self.mean[j];
        }
        raw
    }
}

/// Fit on standardized columns, returning raw-scale weights. `lambda1`
/// applies on the standardized scale. Zeros survive the mapping.
pub fn fit_l1_standardized(x: &DenseMatrix, y: &[bool], cfg: &SolverConfig) -> FitResult {
    let s = Standardizer::fit(x);
    let mut fit = fit_l1(&s.transform(x), y, cfg);
    fit.weights = s.to_raw(&fit.weights);
    fit
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(0.5) - 0.622_459_331_201_854_6).abs() < 1e-12);
        for x in [-800.0, -700.0, -3.2, 0.1, 700.0, 800.0] {
            let s = sigmoid(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s));
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn predict_prob_example_weights() {
        assert!((predict_prob(&[-4.5, 1.0], &[1.0, 5.0]) - 0.622_459_331_201_854_6).abs() < 1e-12);
        assert!((predict_prob(&[-4.5, 1.0], &[1.0, 4.0]) - 0.377_540_668_798_145_4).abs() < 1e-12);
        assert_eq!(predict_prob(&[0.0, 0.0], &[1.0, 17.0]), 0.5);
    }

    #[test]
    #[should_panic]
    fn predict_prob_dimension_mismatch() {
        predict_prob(&[1.0], &[1.0, 2.0]);
    }

    #[test]
    fn nll_single_example_at_zero() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 3.0]]);
        let (v, _) = neg_log_likelihood(&[0.0, 0.0], &x, &[true]);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn nll_vanishes_on_confident_correct_predictions() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]);
        let (v, _) = neg_log_likelihood(&[0.0, 40.0], &x, &[true, false]);
        assert!(v < 1e-11);
    }

    #[test]
    fn large_lambda_zeroes_everything_but_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![1.0, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..3.0)])
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let y: Vec<bool> = rows.iter().map(|r| r[1] + 0.3 * r[2] > 0.4).collect();
        let lmax = lambda_max(&x, &y);
        let fit = fit_l1(&x, &y, &SolverConfig::default().with_lambda(lmax * 1.0001));
        assert_eq!(&fit.weights[1..], &[0.0, 0.0]);
        let mean = y.iter().filter(|v| **v).count() as f64 / y.len() as f64;
        assert!((sigmoid(fit.weights[0]) - mean).abs() < 1e-3);
        // just below the threshold some weight becomes active
        let fit = fit_l1(&x, &y, &SolverConfig::default().with_lambda(lmax * 0.9));
        assert!(fit.weights[1..].iter().any(|w| *w != 0.0));
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| vec![1.0, rng.gen_range(0.0..10.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let y: Vec<bool> = (0..80).map(|_| rng.gen_bool(0.4)).collect();
        let fit = fit_l1(
            &DenseMatrix::from_rows(&rows),
            &y,
            &SolverConfig::default().with_lambda(2.0),
        );
        for pair in fit.history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs());
        }
    }

    #[test]
    fn orthonormal_column_meets_subgradient_condition() {
        // single centered column with unit norm, intercept penalized off
        let col = [0.5, -0.5, 0.5, -0.5];
        let x = DenseMatrix::from_rows(&col.iter().map(|v| vec![*v]).collect::<Vec<_>>());
        let y = [true, false, true, true];
        let cfg = SolverConfig {
            lambda1: 0.3,
            penalize_intercept: true,
            tolerance: 1e-12,
            ..SolverConfig::default()
        };
        let fit = fit_l1(&x, &y, &cfg);
        let (_, g) = neg_log_likelihood(&fit.weights, &x, &y);
        let w = fit.weights[0];
        if w == 0.0 {
            assert!(g[0].abs() <= 0.3 + 1e-6);
        } else {
            assert!((g[0] + 0.3 * w.signum()).abs() < 1e-5);
        }
        assert!(w > 0.0);
    }

    #[test]
    fn standardizer_maps_back_exactly() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 3.0, 7.0],
            vec![1.0, 5.0, 7.0],
            vec![1.0, 10.0, 7.0],
        ]);
        let s = Standardizer::fit(&x);
        let t = s.transform(&x);
        let w = [0.3, -1.2, 0.0];
        let raw = s.to_raw(&w);
        for i in 0..3 {
            assert!((dot(t.row(i), &w) - dot(x.row(i), &raw)).abs() < 1e-12);
        }
        assert_eq!(raw[2], 0.0);
    }
}
