//! Candidate generation, the level-wise hierarchical search with L1
//! pruning, and selection of the number of binary literals.

mod candidates;

use std::collections::BTreeSet;
use std::io::Write;

use log::{debug, info};

pub use candidates::{
    expand_ha, generate_candidates, has_hanging_variable, is_allowed, is_contradictory,
    obeys_hierarchy, unary_subformulae, CandidateOptions,
};

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::eval::{clamped_acll, split_folds};
use crate::grounding::FeatureCache;
use crate::lr::{fit_l1_from, lambda_max, predict_prob, DenseMatrix, SolverConfig, Standardizer};
use crate::model::RlrModel;
use crate::schema::{Formula, TargetSpec, WeightedFormula};

/// How the L1 strength of the in-loop fits is set.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice {
    /// Absolute strength on the (standardized) training matrix.
    Fixed(f64),
    /// Fractions of the smallest strength that zeroes every feature,
    /// chosen by inner cross-validation on the first level.
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureConfig {
    /// Maximum number of binary literals.
    pub k: usize,
    /// Values of `k` compared by [`select_k`].
    pub k_candidates: Vec<usize>,
    pub lambda: LambdaChoice,
    /// Inner folds for the lambda grid and for `k` selection.
    pub folds: usize,
    /// Highest number of unary literals the search reaches.
    pub max_unary: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Fit on centered, unit-variance columns.
    pub standardize: bool,
    pub candidates: CandidateOptions,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            k: 1,
            k_candidates: vec![1, 2],
            lambda: LambdaChoice::Grid(vec![0.5, 0.25, 0.1, 0.05, 0.025, 0.01]),
            folds: 3,
            max_unary: 3,
            seed: 0,
            solver: SolverConfig::default(),
            standardize: true,
            candidates: CandidateOptions::default(),
        }
    }
}

impl StructureConfig {
    pub fn with_k(&self, k: usize) -> Self {
        StructureConfig { k, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(RlrError::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.k_candidates.is_empty() {
            return Err(RlrError::Config("k candidate list is empty".into()));
        }
        if self.max_unary == 0 {
            return Err(RlrError::Config("max unary must be at least 1".into()));
        }
        match &self.lambda {
            LambdaChoice::Fixed(l) if !(l.is_finite() && *l >= 0.0) => Err(RlrError::Config(
                format!("lambda must be a non-negative number, got {l}"),
            )),
            LambdaChoice::Grid(g)
                if g.is_empty() || g.iter().any(|r| !(r.is_finite() && *r >= 0.0)) =>
            {
                Err(RlrError::Config(
                    "lambda grid must be non-empty and non-negative".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// One line of the machine-readable search trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// `lambda`, `level`, `refit` or `select_k`.
    pub stage: &'static str,
    pub k: usize,
    pub level: usize,
    pub candidates: usize,
    pub removed: usize,
    pub nonzero: usize,
    pub lambda: f64,
    /// Validation ACLL for selection stages, objective for fits.
    pub score: f64,
    /// The row's value was picked by a selection stage.
    pub selected: bool,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "stage",
        "k",
        "level",
        "candidates",
        "removed",
        "nonzero",
        "lambda",
        "score",
        "selected",
    ])?;
    for r in rows {
        w.write_record([
            r.stage.to_string(),
            r.k.to_string(),
            r.level.to_string(),
            r.candidates.to_string(),
            r.removed.to_string(),
            r.nonzero.to_string(),
            r.lambda.to_string(),
            r.score.to_string(),
            r.selected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct StructureOutcome {
    pub model: RlrModel,
    /// L1 strength used by every fit of the search.
    pub lambda1: f64,
    pub trace: Vec<TraceRow>,
    pub removed: BTreeSet<Formula>,
    /// Number of formulae checked against the hierarchy before fitting.
    pub hierarchy_checks: usize,
    /// Training labels had one class; the model is intercept-only.
    pub single_class: bool,
}

/// A design matrix prepared for repeated L1 fits.
struct Problem<'a> {
    scaler: Option<Standardizer>,
    x: DenseMatrix,
    y: &'a [bool],
}

impl<'a> Problem<'a> {
    fn new(x: &DenseMatrix, y: &'a [bool], standardize: bool) -> Self {
        if standardize {
            let s = Standardizer::fit(x);
            let x = s.transform(x);
            Problem {
                scaler: Some(s),
                x,
                y,
            }
        } else {
            Problem {
                scaler: None,
                x: x.clone(),
                y,
            }
        }
    }

    fn lambda_max(&self) -> f64 {
        lambda_max(&self.x, self.y)
    }

    /// Returns `(raw weights, fitted weights, objective)`.
    fn fit(
        &self,
        solver: &SolverConfig,
        lambda: f64,
        start: Option<&[f64]>,
    ) -> (Vec<f64>, Vec<f64>, f64) {
        let zero = vec![0.0; self.x.n_cols()];
        let fit = fit_l1_from(
            &self.x,
            self.y,
            &solver.with_lambda(lambda),
            start.unwrap_or(&zero),
        );
        let raw = match &self.scaler {
            Some(s) => s.to_raw(&fit.weights),
            None => fit.weights.clone(),
        };
        (raw, fit.weights, fit.objective)
    }
}

fn has_both_classes(y: &[bool]) -> bool {
    y.iter().any(|&v| v) && y.iter().any(|&v| !v)
}

/// Picks the L1 strength for `x`: a fixed value, or the grid ratio with
/// the best inner cross-validated ACLL times this matrix's `lambda_max`.
fn choose_lambda(
    x: &DenseMatrix,
    y: &[bool],
    cfg: &StructureConfig,
    trace: &mut Vec<TraceRow>,
) -> f64 {
    let ratios = match &cfg.lambda {
        LambdaChoice::Fixed(l) => return *l,
        LambdaChoice::Grid(g) => {
            let mut g = g.clone();
            g.sort_by(|a, b| b.total_cmp(a));
            g
        }
    };
    let full = Problem::new(x, y, cfg.standardize).lambda_max();
    let mut score = vec![0.0; ratios.len()];
    let mut used = 0usize;
    for test in split_folds(y.len(), cfg.folds, cfg.seed) {
        let in_test: BTreeSet<usize> = test.iter().copied().collect();
        let train: Vec<usize> = (0..y.len()).filter(|i| !in_test.contains(i)).collect();
        let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        if test.is_empty() || !has_both_classes(&yt) {
            continue;
        }
        used += 1;
        let xt = x.select_rows(&train);
        let p = Problem::new(&xt, &yt, cfg.standardize);
        let lm = p.lambda_max();
        let mut warm: Option<Vec<f64>> = None;
        let yv: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        for (s, ratio) in score.iter_mut().zip(&ratios) {
            let (raw, fitted, _) = p.fit(&cfg.solver, ratio * lm, warm.as_deref());
            warm = Some(fitted);
            let pred: Vec<f64> = test.iter().map(|&i| predict_prob(&raw, x.row(i))).collect();
            *s += clamped_acll(&pred, &yv);
        }
    }
    let mut best = 0;
    if used > 0 {
        for (i, s) in score.iter().enumerate() {
            if *s > score[best] + 1e-12 {
                best = i;
            }
        }
    }
    for (i, ratio) in ratios.iter().enumerate() {
        trace.push(TraceRow {
            stage: "lambda",
            k: cfg.k,
            level: 1,
            candidates: x.n_cols(),
            removed: 0,
            nonzero: 0,
            lambda: ratio * full,
            score: if used > 0 {
                score[i] / used as f64
            } else {
                f64::NAN
            },
            selected: i == best,
        });
    }
    debug!(
        "lambda ratio {} of {full} chosen over {used} folds",
        ratios[best]
    );
    ratios[best] * full
}

/// Runs the search on every labelled individual of the target population.
pub fn learn_structure(
    db: &RelationalDatabase,
    target: &TargetSpec,
    cfg: &StructureConfig,
) -> Result<StructureOutcome> {
    let mut cache = FeatureCache::new(db, target);
    let rows: Vec<usize> = (0..db.population_size(&target.population)).collect();
    learn_structure_on(&mut cache, &rows, cfg)
}

/// Runs the search on the labelled members of `rows`.
///
/// Level 1 fits every candidate with at most `k` binary literals and one
/// unary literal. Zero-weight formulae are removed; each following level
/// adds the formulae with one more unary literal none of whose unary
/// sub-formulae were removed. The search stops when a level adds nothing
/// or `max_unary` is passed, then refits the surviving formulae.
///
/// # Panics
/// If a formula about to be fitted has a removed unary sub-formula.
pub fn learn_structure_on(
    cache: &mut FeatureCache,
    rows: &[usize],
    cfg: &StructureConfig,
) -> Result<StructureOutcome> {
    cfg.validate()?;
    let target = cache.target().clone();
    let schema = cache.db().schema().clone();
    let base = cache.design_matrix(&[], Some(rows))?;
    let y_all = base.labels().expect("training labels").to_vec();
    if y_all.is_empty() {
        return Err(RlrError::validation("no labelled training rows"));
    }
    let train_mean = y_all.iter().filter(|&&v| v).count() as f64 / y_all.len() as f64;
    if !has_both_classes(&y_all) {
        info!("training labels have a single class; using the intercept-only model");
        return Ok(StructureOutcome {
            model: RlrModel::intercept_only(target, train_mean)?,
            lambda1: 0.0,
            trace: Vec::new(),
            removed: BTreeSet::new(),
            hierarchy_checks: 0,
            single_class: true,
        });
    }

    let mut trace = Vec::new();
    let mut current = generate_candidates(&schema, &target, cfg.k, 1, &cfg.candidates)?;
    let mut removed: BTreeSet<Formula> = BTreeSet::new();
    let mut checks = 0usize;
    let mut lambda: Option<f64> = None;
    let mut level = 1;
    let survivors = loop {
        for f in &current {
            assert!(
                obeys_hierarchy(f, &removed, &target),
                "hierarchy violated: `{f}` has a removed sub-formula"
            );
            checks += 1;
        }
        let formulas: Vec<Formula> = current.iter().filter(|f| !f.is_true()).cloned().collect();
        let dm = cache.design_matrix(&formulas, Some(rows))?;
        let y = dm.labels().expect("training labels");
        let lam = *lambda.get_or_insert_with(|| choose_lambda(dm.x(), y, cfg, &mut trace));
        let (w, _, objective) =
            Problem::new(dm.x(), y, cfg.standardize).fit(&cfg.solver, lam, None);
        let mut zero = 0;
        let mut alive = BTreeSet::new();
        for (f, &wj) in dm.columns().iter().zip(&w).skip(1) {
            if wj == 0.0 {
                removed.insert(f.clone());
                zero += 1;
            } else {
                alive.insert(f.clone());
            }
        }
        trace.push(TraceRow {
            stage: "level",
            k: cfg.k,
            level,
            candidates: current.len(),
            removed: zero,
            nonzero: alive.len(),
            lambda: lam,
            score: objective,
            selected: false,
        });
        debug!(
            "level {level}: {} candidates, {zero} removed",
            current.len()
        );
        level += 1;
        // a formula whose unary sub-formula was just zeroed is dropped too
        let kept: BTreeSet<Formula> = alive
            .into_iter()
            .filter(|f| obeys_hierarchy(f, &removed, &target))
            .collect();
        if level > cfg.max_unary {
            break kept;
        }
        let mut next = expand_ha(
            &kept,
            &removed,
            level,
            &schema,
            &target,
            cfg.k,
            &cfg.candidates,
        )?;
        if next.len() == kept.len() {
            break kept;
        }
        next.insert(Formula::truth());
        current = next;
    };

    let lam = lambda.unwrap_or(0.0);
    let formulas: Vec<Formula> = survivors.into_iter().collect();
    let dm = cache.design_matrix(&formulas, Some(rows))?;
    let y = dm.labels().expect("training labels");
    let (w, _, objective) = Problem::new(dm.x(), y, cfg.standardize).fit(&cfg.solver, lam, None);
    let mut wfs = Vec::new();
    for (f, &wj) in dm.columns().iter().zip(&w) {
        if f.is_true() || wj != 0.0 {
            wfs.push(WeightedFormula::new(f.clone(), wj)?);
        }
    }
    trace.push(TraceRow {
        stage: "refit",
        k: cfg.k,
        level: level - 1,
        candidates: dm.columns().len(),
        removed: removed.len(),
        nonzero: wfs.len() - 1,
        lambda: lam,
        score: objective,
        selected: false,
    });
    Ok(StructureOutcome {
        model: RlrModel::new(wfs, target, train_mean, 0.0)?,
        lambda1: lam,
        trace,
        removed,
        hierarchy_checks: checks,
        single_class: false,
    })
}

/// Chooses `k` among `cfg.k_candidates` by inner cross-validated ACLL on
/// the labelled members of `rows`; ties go to the smaller `k`.
pub fn select_k(
    cache: &mut FeatureCache,
    rows: &[usize],
    cfg: &StructureConfig,
) -> Result<(usize, Vec<TraceRow>)> {
    cfg.validate()?;
    let mut ks = cfg.k_candidates.clone();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() == 1 {
        return Ok((ks[0], Vec::new()));
    }
    let labels = cache.db().labels(cache.target());
    let labelled: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| labels[r].is_some())
        .collect();
    let folds = split_folds(labelled.len(), cfg.folds, cfg.seed.wrapping_add(1));
    let mut trace = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for &k in &ks {
        let sub = cfg.with_k(k);
        let mut total = 0.0;
        for test in &folds {
            let in_test: BTreeSet<usize> = test.iter().copied().collect();
            let train: Vec<usize> = (0..labelled.len())
                .filter(|i| !in_test.contains(i))
                .map(|i| labelled[i])
                .collect();
            let val: Vec<usize> = test.iter().map(|&i| labelled[i]).collect();
            let outcome = learn_structure_on(cache, &train, &sub)?;
            let pred = outcome.model.rlr_predict_rows(cache, &val)?;
            let y: Vec<bool> = val.iter().map(|&r| labels[r].expect("labelled")).collect();
            total += clamped_acll(&pred, &y);
        }
        let score = total / folds.len() as f64;
        trace.push(TraceRow {
            stage: "select_k",
            k,
            level: 0,
            candidates: 0,
            removed: 0,
            nonzero: 0,
            lambda: f64::NAN,
            score,
            selected: false,
        });
        if best.is_none_or(|(_, s)| score > s + 1e-12) {
            best = Some((k, score));
        }
    }
    let k = best.expect("at least one k").0;
    for row in &mut trace {
        row.selected = row.k == k;
    }
    info!("selected k = {k}");
    Ok((k, trace))
}
