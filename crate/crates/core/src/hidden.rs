//! Learned hidden attributes: continuous per-individual values that enter
//! the model through formulae of the form `(binary chain) * H(x)` and are
//! fit jointly with the weights by stochastic gradient descent.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::grounding::{count_by_variable, count_column};
use crate::lr::{sigmoid, soft_threshold, DenseMatrix, LOG_CLAMP};
use crate::model::HiddenValues;
use crate::schema::{AttributeDecl, AttributeRange, Formula, Literal, TargetSpec};
use crate::structure::{generate_candidates, CandidateOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenConfig {
    /// Population that receives the hidden attributes.
    pub population: String,
    pub num_hidden: usize,
    /// Initial values are uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L1 strength on the weights, applied as a proximal step per epoch.
    pub lambda1: f64,
    /// Binary-literal bound of the formulae used while learning.
    pub k: usize,
    pub seed: u64,
    /// Learning-rate halvings allowed after a non-finite loss.
    pub max_restarts: usize,
}

impl Default for HiddenConfig {
    fn default() -> Self {
        HiddenConfig {
            population: String::new(),
            num_hidden: 1,
            init_scale: 0.1,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            lambda1: 1e-4,
            k: 1,
            seed: 0,
            max_restarts: 5,
        }
    }
}

impl HiddenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RlrError::Config(
                "hidden learning rate must be positive".into(),
            ));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(RlrError::Config(
                "hidden init scale must be non-negative".into(),
            ));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(RlrError::Config(
                "hidden lambda must be non-negative".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(RlrError::Config(
                "hidden batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Name of the `i`-th hidden attribute, counting from 1.
pub fn hidden_name(i: usize) -> String {
    format!("H_{i}")
}

/// A copy of `db` with `H_1 .. H_n` on the configured population, drawn
/// uniformly from `[-init_scale, init_scale]`.
pub fn augment_with_hidden(
    db: &RelationalDatabase,
    cfg: &HiddenConfig,
) -> Result<RelationalDatabase> {
    cfg.validate()?;
    if !db.schema().has_population(&cfg.population) {
        return Err(RlrError::validation(format!(
            "unknown population `{}`",
            cfg.population
        )));
    }
    let n = db.population_size(&cfg.population);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = db.clone();
    for i in 1..=cfg.num_hidden {
        let values: Vec<f64> = (0..n)
            .map(|_| {
                if cfg.init_scale > 0.0 {
                    rng.gen_range(-cfg.init_scale..=cfg.init_scale)
                } else {
                    0.0
                }
            })
            .collect();
        let decl = AttributeDecl {
            name: hidden_name(i),
            population: cfg.population.clone(),
            range: AttributeRange::Continuous,
        };
        out = out.with_continuous_attribute(decl, values)?;
    }
    Ok(out)
}

/// One hidden-bearing column: `x_i = sum_m counts[i][m] * H(m) / scale`.
#[derive(Debug, Clone)]
struct HiddenTerm {
    column: usize,
    attr: usize,
    counts: Vec<Vec<(usize, f64)>>,
    scale: f64,
}

/// The learning problem over a fixed set of training rows: formula
/// columns, the linear dependence of hidden-bearing columns on the hidden
/// values, and the labels. Ordinary columns are standardized; a
/// hidden-bearing column is divided by the spread of its formula's count
/// without the hidden literal.
#[derive(Debug, Clone)]
pub struct HiddenProblem {
    columns: Vec<Formula>,
    fixed: DenseMatrix,
    mean: Vec<f64>,
    scale: Vec<f64>,
    terms: Vec<HiddenTerm>,
    labels: Vec<bool>,
    attrs: Vec<String>,
    population: String,
}

fn hidden_literal<'a>(f: &'a Formula, attrs: &[String]) -> Option<(usize, &'a str)> {
    f.unary_literals().find_map(|l| match l {
        Literal::Continuous { attribute, var } => attrs
            .iter()
            .position(|a| a == attribute)
            .map(|i| (i, var.as_str())),
        _ => None,
    })
}

impl HiddenProblem {
    /// Builds the problem for every allowed formula with at most `cfg.k`
    /// binary literals and one unary literal over the augmented `db`,
    /// dropping hidden literals on the target variable.
    pub fn new(
        db: &RelationalDatabase,
        target: &TargetSpec,
        rows: &[usize],
        cfg: &HiddenConfig,
    ) -> Result<Self> {
        let attrs: Vec<String> = (1..=cfg.num_hidden).map(hidden_name).collect();
        for a in &attrs {
            if db.continuous_values(a).is_none() {
                return Err(RlrError::validation(format!(
                    "database has no hidden attribute `{a}`"
                )));
            }
        }
        let candidates =
            generate_candidates(db.schema(), target, cfg.k, 1, &CandidateOptions::default())?;
        let columns: Vec<Formula> = candidates
            .into_iter()
            .filter(|f| !matches!(hidden_literal(f, &attrs), Some((_, v)) if v == target.var))
            .collect();
        HiddenProblem::with_columns(db, target, rows, columns, &attrs, &cfg.population)
    }

    fn with_columns(
        db: &RelationalDatabase,
        target: &TargetSpec,
        rows: &[usize],
        mut columns: Vec<Formula>,
        attrs: &[String],
        population: &str,
    ) -> Result<Self> {
        columns.retain(|f| !f.is_true());
        columns.insert(0, Formula::truth());
        let all_labels = db.labels(target);
        let rows: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&r| all_labels[r].is_some())
            .collect();
        let labels: Vec<bool> = rows
            .iter()
            .map(|&r| all_labels[r].expect("labelled"))
            .collect();
        let n = rows.len().max(1) as f64;
        let spread = |v: &[f64]| -> (f64, f64) {
            let m = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
            (m, if sd > 1e-12 { sd } else { 1.0 })
        };
        let mut fixed = DenseMatrix::zeros(rows.len(), columns.len());
        let mut mean = vec![0.0; columns.len()];
        let mut scale = vec![1.0; columns.len()];
        let mut terms = Vec::new();
        for (j, f) in columns.iter().enumerate() {
            if let Some((attr, var)) = hidden_literal(f, attrs) {
                let base = f.retain(|l| !matches!(l, Literal::Continuous { attribute, .. } if *attribute == attrs[attr]));
                let split = count_by_variable(&base, target, var, db)?;
                let counts: Vec<Vec<(usize, f64)>> =
                    rows.iter().map(|&r| split[r].clone()).collect();
                let totals: Vec<f64> = counts
                    .iter()
                    .map(|c| c.iter().map(|(_, v)| v).sum())
                    .collect();
                let (_, sd) = spread(&totals);
                scale[j] = sd;
                terms.push(HiddenTerm {
                    column: j,
                    attr,
                    counts,
                    scale: sd,
                });
            } else {
                let col = count_column(f, target, db);
                let v: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
                if j > 0 {
                    (mean[j], scale[j]) = spread(&v);
                }
                for (i, x) in v.iter().enumerate() {
                    fixed.set(
                        i,
                        j,
                        if j == 0 {
                            1.0
                        } else {
                            (x - mean[j]) / scale[j]
                        },
                    );
                }
            }
        }
        Ok(HiddenProblem {
            columns,
            fixed,
            mean,
            scale,
            terms,
            labels,
            attrs: attrs.to_vec(),
            population: population.to_string(),
        })
    }

    pub fn columns(&self) -> &[Formula] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn population(&self) -> &str {
        &self.population
    }

    /// Column indices whose value depends on hidden values.
    pub fn hidden_columns(&self) -> Vec<usize> {
        self.terms.iter().map(|t| t.column).collect()
    }

    /// `(mean, scale)` applied to each column; hidden-bearing columns are
    /// scaled but not centered.
    pub fn column_scaling(&self) -> Vec<(f64, f64)> {
        self.mean
            .iter()
            .copied()
            .zip(self.scale.iter().copied())
            .collect()
    }

    /// Scaled feature matrix for the given hidden values.
    pub fn features(&self, hidden: &[Vec<f64>]) -> DenseMatrix {
        let mut x = self.fixed.clone();
        for i in 0..x.n_rows() {
            for t in &self.terms {
                x.set(i, t.column, self.term_value(t, i, hidden));
            }
        }
        x
    }

    fn term_value(&self, t: &HiddenTerm, i: usize, hidden: &[Vec<f64>]) -> f64 {
        let h = &hidden[t.attr];
        t.counts[i].iter().map(|&(m, c)| c * h[m]).sum::<f64>() / t.scale
    }

    fn score(&self, w: &[f64], i: usize, hidden: &[Vec<f64>]) -> f64 {
        let mut s: f64 = self.fixed.row(i).iter().zip(w).map(|(x, w)| x * w).sum();
        for t in &self.terms {
            s += w[t.column] * self.term_value(t, i, hidden);
        }
        s
    }

    /// Mean negative log-likelihood over `batch` (row positions) with its
    /// gradient in the weights and in every hidden value.
    pub fn loss_and_gradient(
        &self,
        w: &[f64],
        hidden: &[Vec<f64>],
        batch: &[usize],
    ) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let mut gw = vec![0.0; w.len()];
        let mut gh: Vec<Vec<f64>> = hidden.iter().map(|h| vec![0.0; h.len()]).collect();
        let mut loss = 0.0;
        let nb = batch.len().max(1) as f64;
        for &i in batch {
            let p = sigmoid(self.score(w, i, hidden));
            let y = self.labels[i];
            let pc = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            loss -= if y { pc.ln() } else { (1.0 - pc).ln() };
            let e = (p - if y { 1.0 } else { 0.0 }) / nb;
            for (g, x) in gw.iter_mut().zip(self.fixed.row(i)) {
                *g += e * x;
            }
            for t in &self.terms {
                gw[t.column] += e * self.term_value(t, i, hidden);
                let coef = e * w[t.column] / t.scale;
                if coef != 0.0 {
                    for &(m, c) in &t.counts[i] {
                        gh[t.attr][m] += coef * c;
                    }
                }
            }
        }
        (loss / nb, gw, gh)
    }

    /// Scaled-space weights mapped to raw count features.
    pub fn raw_weights(&self, w: &[f64]) -> Vec<f64> {
        let mut raw = w.to_vec();
        for j in 1..w.len() {
            raw[j] = w[j] / self.scale[j];
            raw[0] -= raw[j] * self.mean[j];
        }
        raw
    }
}

#[derive(Debug, Clone)]
pub struct HiddenOutcome {
    /// Input database with the learned hidden values.
    pub db: RelationalDatabase,
    pub columns: Vec<Formula>,
    /// Weights on raw counts, aligned with `columns`.
    pub weights: Vec<f64>,
    /// Mean training loss after each epoch of the final run.
    pub epoch_losses: Vec<f64>,
    pub restarts: usize,
}

impl HiddenOutcome {
    pub fn hidden_values(&self) -> Result<Vec<HiddenValues>> {
        self.db
            .schema()
            .attributes()
            .iter()
            .filter(|a| a.name.starts_with("H_") && a.range == AttributeRange::Continuous)
            .map(|a| HiddenValues::from_database(&self.db, &a.name))
            .collect()
    }
}

/// Learns the hidden values of an augmented database together with the
/// weights of the hidden-aware formula set, on the labelled `rows`.
///
/// Each epoch visits the rows in a seeded random order in mini-batches,
/// then shrinks the non-intercept weights by the L1 proximal step. A
/// non-finite loss restarts from the initial state at half the learning
/// rate.
pub fn learn_hidden(
    db: &RelationalDatabase,
    target: &TargetSpec,
    rows: &[usize],
    cfg: &HiddenConfig,
) -> Result<HiddenOutcome> {
    cfg.validate()?;
    let problem = HiddenProblem::new(db, target, rows, cfg)?;
    let initial: Vec<Vec<f64>> = problem
        .attrs
        .iter()
        .map(|a| db.continuous_values(a).expect("hidden attribute").to_vec())
        .collect();
    let mut lr = cfg.learning_rate;
    let mut restarts = 0;
    let (weights, hidden, losses) = loop {
        match sgd(&problem, &initial, lr, cfg) {
            Some(run) => break run,
            None if restarts < cfg.max_restarts => {
                restarts += 1;
                lr /= 2.0;
                warn!("hidden-feature training diverged; restarting with learning rate {lr}");
            }
            None => return Err(RlrError::Diverged { restarts }),
        }
    };
    let mut out = db.clone();
    for (a, values) in problem.attrs.iter().zip(hidden) {
        out.replace_continuous(a, values)?;
    }
    Ok(HiddenOutcome {
        db: out,
        columns: problem.columns.clone(),
        weights: problem.raw_weights(&weights),
        epoch_losses: losses,
        restarts,
    })
}

type SgdRun = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

fn sgd(
    problem: &HiddenProblem,
    initial: &[Vec<f64>],
    lr: f64,
    cfg: &HiddenConfig,
) -> Option<SgdRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut w = vec![0.0; problem.columns.len()];
    let mut hidden = initial.to_vec();
    let mut order: Vec<usize> = (0..problem.n_rows()).collect();
    let all = order.clone();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, gw, gh) = problem.loss_and_gradient(&w, &hidden, batch);
            for (wj, g) in w.iter_mut().zip(&gw) {
                *wj -= lr * g;
            }
            for (h, g) in hidden.iter_mut().zip(&gh) {
                for (hv, gv) in h.iter_mut().zip(g) {
                    *hv -= lr * gv;
                }
            }
        }
        for wj in w.iter_mut().skip(1) {
            *wj = soft_threshold(*wj, lr * cfg.lambda1);
        }
        let (loss, _, _) = problem.loss_and_gradient(&w, &hidden, &all);
        let finite = loss.is_finite()
            && w.iter().all(|v| v.is_finite())
            && hidden.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return None;
        }
        if epoch % 50 == 0 {
            debug!("hidden epoch {epoch}: loss {loss}");
        }
        losses.push(loss);
    }
    Some((w, hidden, losses))
}

/// Columns of the hidden attributes of `db` as CSV: `id,H_1,...`.
pub fn write_hidden_csv<W: Write>(hidden: &[HiddenValues], out: W) -> Result<()> {
    let to_err = |e: csv::Error| RlrError::validation(format!("writing hidden values: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = hidden.first() else {
        return Ok(());
    };
    let mut header = vec!["id".to_string()];
    header.extend(hidden.iter().map(|h| h.name.clone()));
    w.write_record(&header).map_err(to_err)?;
    let lookup: Vec<HashMap<&str, f64>> = hidden
        .iter()
        .map(|h| {
            h.ids
                .iter()
                .map(String::as_str)
                .zip(h.values.iter().copied())
                .collect()
        })
        .collect();
    for id in &first.ids {
        let mut rec = vec![id.clone()];
        for l in &lookup {
            rec.push(
                l.get(id.as_str())
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| RlrError::validation(format!("writing hidden values: {e}")))?;
    Ok(())
}

/// Individuals of `population` that appear in no tuple reachable from a
/// target row through some hidden-bearing formula of `problem`.
pub fn unreached_individuals(problem: &HiddenProblem, size: usize) -> Vec<usize> {
    let reached: BTreeSet<usize> = problem
        .terms
        .iter()
        .flat_map(|t| t.counts.iter().flatten().map(|&(m, _)| m))
        .collect();
    (0..size).filter(|m| !reached.contains(m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{RelationDecl, Schema};

    fn tiny(seed: u64) -> (RelationalDatabase, TargetSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Schema::new();
        s.add_population("user").unwrap();
        s.add_population("movie").unwrap();
        s.add_attribute(AttributeDecl {
            name: "gender".into(),
            population: "user".into(),
            range: AttributeRange::Categorical(vec!["F".into(), "M".into()]),
        })
        .unwrap();
        s.add_attribute(AttributeDecl {
            name: "drama".into(),
            population: "movie".into(),
            range: AttributeRange::Boolean,
        })
        .unwrap();
        s.add_relation(RelationDecl {
            name: "rated".into(),
            populations: ["user".into(), "movie".into()],
        })
        .unwrap();
        let mut pairs = Vec::new();
        for u in 0..5 {
            for m in 0..4 {
                if rng.gen_bool(0.6) {
                    pairs.push((u, m));
                }
            }
        }
        let g: Vec<Option<&str>> = (0..5)
            .map(|u| Some(if u % 2 == 0 { "F" } else { "M" }))
            .collect();
        let db = RelationalDatabase::builder(s)
            .anonymous_population("user", 5)
            .unwrap()
            .anonymous_population("movie", 5)
            .unwrap()
            .discrete("gender", &g)
            .unwrap()
            .boolean("drama", &[true, false, true, false, false])
            .unwrap()
            .relation("rated", pairs)
            .unwrap()
            .build()
            .unwrap();
        let t = TargetSpec::new(db.schema(), "gender", "u", "F").unwrap();
        (db, t)
    }

    fn cfg() -> HiddenConfig {
        HiddenConfig {
            population: "movie".into(),
            init_scale: 0.5,
            ..HiddenConfig::default()
        }
    }

    #[test]
    fn augmentation() {
        let (db, _) = tiny(1);
        let a = augment_with_hidden(&db, &cfg()).unwrap();
        let h = a.continuous_values("H_1").unwrap();
        assert_eq!(h.len(), 5);
        assert!(h.iter().all(|v| v.abs() <= 0.5));
        assert_eq!(
            a.continuous_values("H_1"),
            augment_with_hidden(&db, &cfg())
                .unwrap()
                .continuous_values("H_1")
        );
        let zero = augment_with_hidden(
            &db,
            &HiddenConfig {
                init_scale: 0.0,
                ..cfg()
            },
        )
        .unwrap();
        assert!(zero
            .continuous_values("H_1")
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
        assert!(augment_with_hidden(&a, &cfg()).is_err());
        assert!(db.continuous_values("H_1").is_none());
    }

    #[test]
    fn gradient_matches_differences() {
        let (db, t) = tiny(2);
        let a = augment_with_hidden(&db, &cfg()).unwrap();
        let p = HiddenProblem::new(&a, &t, &[0, 1, 2, 3, 4], &cfg()).unwrap();
        assert!(!p.hidden_columns().is_empty());
        let w: Vec<f64> = (0..p.columns().len())
            .map(|j| 0.3 - 0.2 * j as f64)
            .collect();
        let h = vec![a.continuous_values("H_1").unwrap().to_vec()];
        let all: Vec<usize> = (0..5).collect();
        let (_, gw, gh) = p.loss_and_gradient(&w, &h, &all);
        let eps = 1e-6;
        for m in 0..5 {
            let mut hp = h.clone();
            hp[0][m] += eps;
            let mut hm = h.clone();
            hm[0][m] -= eps;
            let fd = (p.loss_and_gradient(&w, &hp, &all).0 - p.loss_and_gradient(&w, &hm, &all).0)
                / (2.0 * eps);
            assert!(
                (fd - gh[0][m]).abs() <= 1e-6 * fd.abs().max(1e-3),
                "{fd} vs {}",
                gh[0][m]
            );
        }
        for j in 0..w.len() {
            let mut wp = w.clone();
            wp[j] += eps;
            let mut wm = w.clone();
            wm[j] -= eps;
            let fd = (p.loss_and_gradient(&wp, &h, &all).0 - p.loss_and_gradient(&wm, &h, &all).0)
                / (2.0 * eps);
            assert!((fd - gw[j]).abs() <= 1e-6 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_epochs_keep_initial_values() {
        let (db, t) = tiny(3);
        let a = augment_with_hidden(&db, &cfg()).unwrap();
        let out = learn_hidden(
            &a,
            &t,
            &[0, 1, 2, 3, 4],
            &HiddenConfig { epochs: 0, ..cfg() },
        )
        .unwrap();
        assert_eq!(out.db.continuous_values("H_1"), a.continuous_values("H_1"));
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn raw_weights_reproduce_scores() {
        let (db, t) = tiny(4);
        let a = augment_with_hidden(&db, &cfg()).unwrap();
        let rows: Vec<usize> = (0..5).collect();
        let p = HiddenProblem::new(&a, &t, &rows, &cfg()).unwrap();
        let w: Vec<f64> = (0..p.columns().len())
            .map(|j| 0.7 - 0.3 * j as f64)
            .collect();
        let raw = p.raw_weights(&w);
        let xs = p.features(&[a.continuous_values("H_1").unwrap().to_vec()]);
        let x = crate::grounding::build_design_matrix(p.columns(), &t, &a, None).unwrap();
        assert_eq!(x.columns(), p.columns());
        for i in 0..5 {
            let s1: f64 = xs.row(i).iter().zip(&w).map(|(a, b)| a * b).sum();
            let s2: f64 = x.x().row(i).iter().zip(&raw).map(|(a, b)| a * b).sum();
            assert!((s1 - s2).abs() < 1e-9, "{s1} vs {s2}");
        }
    }

    #[test]
    fn unconnected_individuals_keep_values() {
        let (db, t) = tiny(5);
        let a = augment_with_hidden(&db, &cfg()).unwrap();
        let p = HiddenProblem::new(&a, &t, &[0, 1, 2, 3, 4], &cfg()).unwrap();
        let lonely = unreached_individuals(&p, 5);
        assert!(lonely.contains(&4));
        let out = learn_hidden(
            &a,
            &t,
            &[0, 1, 2, 3, 4],
            &HiddenConfig {
                epochs: 30,
                ..cfg()
            },
        )
        .unwrap();
        for m in lonely {
            assert_eq!(
                out.db.continuous_value("H_1", m),
                a.continuous_value("H_1", m)
            );
        }
    }

    #[test]
    fn csv_export() {
        let (db, _) = tiny(6);
        let a = augment_with_hidden(
            &db,
            &HiddenConfig {
                num_hidden: 2,
                ..cfg()
            },
        )
        .unwrap();
        let hv = vec![
            HiddenValues::from_database(&a, "H_1").unwrap(),
            HiddenValues::from_database(&a, "H_2").unwrap(),
        ];
        let mut buf = Vec::new();
        write_hidden_csv(&hv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "id,H_1,H_2");
        assert_eq!(text.lines().count(), 6);
    }
}
