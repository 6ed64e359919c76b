//! End-to-end training of the compared learners on a set of rows.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use log::info;

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::eval::{clamped_acll, split_folds};
use crate::grounding::FeatureCache;
use crate::hidden::{augment_with_hidden, learn_hidden, HiddenConfig};
use crate::model::RlrModel;
use crate::schema::TargetSpec;
use crate::structure::{learn_structure_on, select_k, StructureConfig, TraceRow};

/// The predictors compared by `eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Learner {
    /// Always predicts the training positive rate.
    Baseline,
    /// Logistic regression on the target individual's own attributes.
    FlatLr,
    /// RLR with structure search.
    RlrBase,
    /// RLR with structure search after learning hidden attributes.
    RlrHidden,
}

impl Learner {
    pub const ALL: [Learner; 4] = [
        Learner::Baseline,
        Learner::FlatLr,
        Learner::RlrBase,
        Learner::RlrHidden,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Learner::Baseline => "baseline",
            Learner::FlatLr => "flat_lr",
            Learner::RlrBase => "rlr_base",
            Learner::RlrHidden => "rlr_h",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Learner {
    type Err = RlrError;

    fn from_str(s: &str) -> Result<Self> {
        Learner::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| RlrError::Config(format!("unknown learner `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub structure: StructureConfig,
    /// Hidden-attribute settings for [`Learner::RlrHidden`]; `None` or
    /// zero hidden attributes makes it identical to [`Learner::RlrBase`].
    pub hidden: Option<HiddenConfig>,
    /// Outer cross-validation folds.
    pub folds: usize,
    pub seed: u64,
    /// Candidate mean-regularization strengths.
    pub lambda_mean_grid: Vec<f64>,
    /// Inner folds used to choose the mean-regularization strength.
    pub lambda_mean_folds: usize,
    /// Skip the search and use this strength.
    pub lambda_mean: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            structure: StructureConfig::default(),
            hidden: None,
            folds: 5,
            seed: 0,
            lambda_mean_grid: (0..=10).map(|i| i as f64 * 0.05).collect(),
            lambda_mean_folds: 3,
            lambda_mean: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.structure.validate()?;
        if let Some(h) = &self.hidden {
            h.validate()?;
        }
        if self.folds < 2 {
            return Err(RlrError::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.lambda_mean_folds < 2 {
            return Err(RlrError::Config(
                "lambda mean folds must be at least 2".into(),
            ));
        }
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if self.lambda_mean_grid.is_empty() || !self.lambda_mean_grid.iter().all(|&v| ok(v)) {
            return Err(RlrError::Config(
                "lambda mean grid must be non-empty and within [0, 1]".into(),
            ));
        }
        if let Some(l) = self.lambda_mean {
            if !ok(l) {
                return Err(RlrError::Config(format!("lambda mean {l} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Number of hidden attributes `RlrHidden` will add.
    pub fn num_hidden(&self) -> usize {
        self.hidden.as_ref().map_or(0, |h| h.num_hidden)
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: RlrModel,
    pub trace: Vec<TraceRow>,
    pub single_class: bool,
}

/// Regularized probabilities of `model` for `rows` of `db`.
pub fn predict_rows(model: &RlrModel, db: &RelationalDatabase, rows: &[usize]) -> Result<Vec<f64>> {
    let prepared = model.prepare_database(db)?;
    let mut cache = FeatureCache::new(&prepared, model.target());
    Ok(model
        .rlr_predict_rows(&mut cache, rows)?
        .into_iter()
        .map(|p| model.blend(p))
        .collect())
}

fn train_mean(
    db: &RelationalDatabase,
    target: &TargetSpec,
    rows: &[usize],
) -> Result<(f64, usize)> {
    let labels = db.labels(target);
    let observed: Vec<bool> = rows.iter().filter_map(|&r| labels[r]).collect();
    if observed.is_empty() {
        return Err(RlrError::validation("no labelled training rows"));
    }
    let pos = observed.iter().filter(|&&v| v).count();
    Ok((pos as f64 / observed.len() as f64, observed.len()))
}

/// The first population other than the target's, or the target's own
/// population when it is the only one.
pub fn default_hidden_population(db: &RelationalDatabase, target: &TargetSpec) -> String {
    db.schema()
        .populations()
        .iter()
        .find(|p| **p != target.population)
        .unwrap_or(&target.population)
        .clone()
}

/// Model of `learner` on `rows` without mean regularization.
fn fit_core(
    db: &RelationalDatabase,
    target: &TargetSpec,
    rows: &[usize],
    learner: Learner,
    cfg: &PipelineConfig,
) -> Result<Fitted> {
    let (mean, _) = train_mean(db, target, rows)?;
    let structure =
        |db: &RelationalDatabase, scfg: &StructureConfig, pick_k: bool| -> Result<Fitted> {
            let mut cache = FeatureCache::new(db, target);
            let mut trace = Vec::new();
            let mut scfg = scfg.clone();
            if pick_k {
                let (k, t) = select_k(&mut cache, rows, &scfg)?;
                trace.extend(t);
                scfg.k = k;
            }
            let out = learn_structure_on(&mut cache, rows, &scfg)?;
            trace.extend(out.trace);
            Ok(Fitted {
                model: out.model,
                trace,
                single_class: out.single_class,
            })
        };
    match learner {
        Learner::Baseline => Ok(Fitted {
            model: RlrModel::intercept_only(target.clone(), mean)?.with_lambda_mean(1.0)?,
            trace: Vec::new(),
            single_class: false,
        }),
        Learner::FlatLr => {
            let scfg = StructureConfig {
                k: 0,
                max_unary: 1,
                ..cfg.structure.clone()
            };
            structure(db, &scfg, false)
        }
        Learner::RlrBase => structure(db, &cfg.structure, true),
        Learner::RlrHidden => match &cfg.hidden {
            Some(h) if h.num_hidden > 0 => {
                let (_, n) = train_mean(db, target, rows)?;
                let labels = db.labels(target);
                let classes: BTreeSet<bool> = rows.iter().filter_map(|&r| labels[r]).collect();
                if classes.len() < 2 || n == 0 {
                    return structure(db, &cfg.structure, true);
                }
                let mut hcfg = HiddenConfig {
                    seed: h.seed ^ cfg.seed,
                    ..h.clone()
                };
                if hcfg.population.is_empty() {
                    hcfg.population = default_hidden_population(db, target);
                }
                let augmented = augment_with_hidden(db, &hcfg)?;
                let learned = learn_hidden(&augmented, target, rows, &hcfg)?;
                let hidden = learned.hidden_values()?;
                let mut fitted = structure(&learned.db, &cfg.structure, true)?;
                fitted.model = fitted.model.with_hidden(hidden);
                Ok(fitted)
            }
            _ => structure(db, &cfg.structure, true),
        },
    }
}

/// Trains `learner` on `rows` and chooses its mean-regularization strength
/// from out-of-fold predictions on those rows.
pub fn fit_learner(
    db: &RelationalDatabase,
    target: &TargetSpec,
    rows: &[usize],
    learner: Learner,
    cfg: &PipelineConfig,
) -> Result<Fitted> {
    cfg.validate()?;
    let fitted = fit_core(db, target, rows, learner, cfg)?;
    if learner == Learner::Baseline || fitted.single_class {
        return Ok(fitted);
    }
    let lambda_mean = match cfg.lambda_mean {
        Some(l) => l,
        None => choose_lambda_mean(db, target, rows, learner, cfg)?,
    };
    info!("{learner}: lambda mean {lambda_mean}");
    Ok(Fitted {
        model: fitted.model.with_lambda_mean(lambda_mean)?,
        ..fitted
    })
}

fn choose_lambda_mean(
    db: &RelationalDatabase,
    target: &TargetSpec,
    rows: &[usize],
    learner: Learner,
    cfg: &PipelineConfig,
) -> Result<f64> {
    let labels = db.labels(target);
    let labelled: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&r| labels[r].is_some())
        .collect();
    let mut oof: Vec<(f64, f64, bool)> = Vec::new();
    for test in split_folds(
        labelled.len(),
        cfg.lambda_mean_folds,
        cfg.seed.wrapping_add(2),
    ) {
        let in_test: BTreeSet<usize> = test.iter().copied().collect();
        let train: Vec<usize> = (0..labelled.len())
            .filter(|i| !in_test.contains(i))
            .map(|i| labelled[i])
            .collect();
        let val: Vec<usize> = test.iter().map(|&i| labelled[i]).collect();
        if val.is_empty() {
            continue;
        }
        let inner = fit_core(db, target, &train, learner, cfg)?;
        let raw = predict_rows(&inner.model, db, &val)?;
        for (p, r) in raw.into_iter().zip(&val) {
            oof.push((p, inner.model.train_mean(), labels[*r].expect("labelled")));
        }
    }
    let y: Vec<bool> = oof.iter().map(|t| t.2).collect();
    let mut grid = cfg.lambda_mean_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut best = (grid[0], f64::NEG_INFINITY);
    for &l in &grid {
        let pred: Vec<f64> = oof.iter().map(|&(p, m, _)| l * m + (1.0 - l) * p).collect();
        let score = clamped_acll(&pred, &y);
        if score > best.1 + 1e-12 {
            best = (l, score);
        }
    }
    Ok(best.0)
}
