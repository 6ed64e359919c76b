//! Metrics, fold splitting and the cross-validation protocol.

use std::collections::BTreeSet;
use std::io::Write;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::lr::LOG_CLAMP;
use crate::pipeline::{fit_learner, predict_rows, Learner, PipelineConfig};
use crate::schema::TargetSpec;

/// Average log-probability of the observed labels. A prediction of exactly
/// 0 or 1 on the wrong label yields negative infinity, reported as is.
pub fn acll(predictions: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(
        predictions.len(),
        labels.len(),
        "prediction/label count mismatch"
    );
    if labels.is_empty() {
        return f64::NAN;
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| if y { p.ln() } else { (1.0 - p).ln() })
        .sum();
    if total == f64::NEG_INFINITY {
        warn!("a prediction of exactly 0 or 1 missed its label; ACLL is -inf");
    }
    total / labels.len() as f64
}

/// ACLL with probabilities clamped away from 0 and 1; used for model
/// selection where one overconfident miss must not dominate.
pub fn clamped_acll(predictions: &[f64], labels: &[bool]) -> f64 {
    let clamped: Vec<f64> = predictions
        .iter()
        .map(|p| p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP))
        .collect();
    acll(&clamped, labels)
}

/// Fraction of labels matched by thresholding at 0.5; ties predict positive.
pub fn accuracy(predictions: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(
        predictions.len(),
        labels.len(),
        "prediction/label count mismatch"
    );
    if labels.is_empty() {
        return f64::NAN;
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Seeded shuffle of `0..n` cut into `folds` test sets whose sizes differ
/// by at most one. Each set is sorted.
pub fn split_folds(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(folds >= 1, "need at least one fold");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..folds)
        .map(|f| {
            let mut part = order[f * n / folds..(f + 1) * n / folds].to_vec();
            part.sort_unstable();
            part
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub acll: f64,
    pub accuracy: f64,
    pub n_test: usize,
    /// The training split had a single class.
    pub single_class: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acll: f64,
    pub accuracy: f64,
    pub per_fold: Vec<FoldResult>,
    pub fold_count: usize,
}

impl EvalReport {
    pub fn from_folds(per_fold: Vec<FoldResult>) -> Self {
        let n = per_fold.len().max(1) as f64;
        EvalReport {
            acll: per_fold.iter().map(|f| f.acll).sum::<f64>() / n,
            accuracy: per_fold.iter().map(|f| f.accuracy).sum::<f64>() / n,
            fold_count: per_fold.len(),
            per_fold,
        }
    }
}

/// Writes one row per learner and fold plus a `mean` row per learner.
pub fn write_report_csv<W: Write>(reports: &[(Learner, EvalReport)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "learner",
        "fold",
        "acll",
        "accuracy",
        "n_test",
        "single_class",
    ])?;
    for (learner, r) in reports {
        for (i, f) in r.per_fold.iter().enumerate() {
            w.write_record([
                learner.name().to_string(),
                (i + 1).to_string(),
                f.acll.to_string(),
                f.accuracy.to_string(),
                f.n_test.to_string(),
                f.single_class.to_string(),
            ])?;
        }
        w.write_record([
            learner.name().to_string(),
            "mean".to_string(),
            r.acll.to_string(),
            r.accuracy.to_string(),
            r.per_fold
                .iter()
                .map(|f| f.n_test)
                .sum::<usize>()
                .to_string(),
            r.per_fold.iter().any(|f| f.single_class).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Labelled individuals of the target population, in order.
pub fn labelled_rows(db: &RelationalDatabase, target: &TargetSpec) -> Vec<usize> {
    db.labels(target)
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|_| i))
        .collect()
}

/// Cross-validates each learner on the same seeded folds. Every learner
/// trains on the training part of a fold only, including its own tuning;
/// metrics come from the held-out part.
pub fn cross_validate(
    db: &RelationalDatabase,
    target: &TargetSpec,
    learners: &[Learner],
    cfg: &PipelineConfig,
) -> Result<Vec<(Learner, EvalReport)>> {
    cfg.validate()?;
    let rows = labelled_rows(db, target);
    if rows.len() < cfg.folds {
        return Err(RlrError::validation(format!(
            "{} labelled individuals cannot fill {} folds",
            rows.len(),
            cfg.folds
        )));
    }
    let labels = db.labels(target);
    let folds = split_folds(rows.len(), cfg.folds, cfg.seed);
    let mut per: Vec<Vec<FoldResult>> = vec![Vec::new(); learners.len()];
    for (fi, test_pos) in folds.iter().enumerate() {
        let in_test: BTreeSet<usize> = test_pos.iter().copied().collect();
        let train: Vec<usize> = (0..rows.len())
            .filter(|i| !in_test.contains(i))
            .map(|i| rows[i])
            .collect();
        let test: Vec<usize> = test_pos.iter().map(|&i| rows[i]).collect();
        let y: Vec<bool> = test.iter().map(|&r| labels[r].expect("labelled")).collect();
        for (li, learner) in learners.iter().enumerate() {
            let fitted = fit_learner(db, target, &train, *learner, cfg)?;
            let pred = predict_rows(&fitted.model, db, &test)?;
            let result = FoldResult {
                acll: acll(&pred, &y),
                accuracy: accuracy(&pred, &y),
                n_test: test.len(),
                single_class: fitted.single_class,
            };
            info!(
                "fold {}/{} {}: acll {:.4} accuracy {:.4}",
                fi + 1,
                folds.len(),
                learner.name(),
                result.acll,
                result.accuracy
            );
            per[li].push(result);
        }
    }
    Ok(learners
        .iter()
        .copied()
        .zip(per.into_iter().map(EvalReport::from_folds))
        .collect())
}
