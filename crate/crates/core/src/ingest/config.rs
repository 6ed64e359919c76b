use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, RlrError};
use crate::hidden::HiddenConfig;
use crate::pipeline::PipelineConfig;
use crate::structure::LambdaChoice;

/// Every key understood by [`parse_config`], with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    (
        "seed",
        "seed for folds, inner splits and hidden initialization",
    ),
    ("folds", "outer cross-validation folds"),
    ("k", "comma-separated candidate numbers of binary literals"),
    ("lambda", "`grid` or a fixed L1 strength"),
    ("lambda_grid", "comma-separated fractions of lambda_max"),
    ("inner_folds", "folds for the lambda grid and k selection"),
    ("max_unary", "highest number of unary literals searched"),
    ("standardize", "fit on standardized columns"),
    ("negated_booleans", "also generate b(x)=false literals"),
    ("candidate_cap", "maximum number of generated formulae"),
    ("max_iterations", "solver iteration limit"),
    ("tolerance", "solver relative objective tolerance"),
    ("penalize_intercept", "apply L1 to the intercept"),
    (
        "lambda_mean",
        "`auto` or a fixed mean-regularization strength",
    ),
    (
        "lambda_mean_grid",
        "comma-separated mean-regularization candidates",
    ),
    ("lambda_mean_folds", "inner folds for choosing lambda_mean"),
    ("hidden", "number of hidden attributes (0 disables)"),
    (
        "hidden_population",
        "population receiving hidden attributes",
    ),
    (
        "hidden_init_scale",
        "initial hidden values are uniform in +-scale",
    ),
    ("hidden_learning_rate", "SGD learning rate"),
    ("hidden_epochs", "SGD epochs"),
    ("hidden_batch_size", "SGD mini-batch size"),
    ("hidden_lambda", "L1 strength on weights during SGD"),
    (
        "hidden_k",
        "binary-literal bound while learning hidden values",
    ),
];

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| RlrError::Config(format!("bad value `{v}` for `{key}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|p| value(key, p.trim())).collect()
}

fn hidden(cfg: &mut PipelineConfig) -> &mut HiddenConfig {
    cfg.hidden.get_or_insert_with(|| HiddenConfig {
        num_hidden: 0,
        ..HiddenConfig::default()
    })
}

/// Sets one key on `cfg`.
pub fn apply_setting(cfg: &mut PipelineConfig, key: &str, v: &str) -> Result<()> {
    let s = &mut cfg.structure;
    match key {
        "seed" => {
            let seed: u64 = value(key, v)?;
            cfg.seed = seed;
            cfg.structure.seed = seed;
            if let Some(h) = &mut cfg.hidden {
                h.seed = seed;
            }
        }
        "folds" => cfg.folds = value(key, v)?,
        "k" => {
            s.k_candidates = list(key, v)?;
            s.k = s.k_candidates.iter().copied().min().unwrap_or(1);
        }
        "lambda" => {
            s.lambda = if v == "grid" {
                match &s.lambda {
                    LambdaChoice::Grid(g) => LambdaChoice::Grid(g.clone()),
                    LambdaChoice::Fixed(_) => crate::structure::StructureConfig::default().lambda,
                }
            } else {
                LambdaChoice::Fixed(value(key, v)?)
            }
        }
        "lambda_grid" => s.lambda = LambdaChoice::Grid(list(key, v)?),
        "inner_folds" => s.folds = value(key, v)?,
        "max_unary" => s.max_unary = value(key, v)?,
        "standardize" => s.standardize = value(key, v)?,
        "negated_booleans" => s.candidates.include_negated_booleans = value(key, v)?,
        "candidate_cap" => s.candidates.cap = value(key, v)?,
        "max_iterations" => s.solver.max_iterations = value(key, v)?,
        "tolerance" => s.solver.tolerance = value(key, v)?,
        "penalize_intercept" => s.solver.penalize_intercept = value(key, v)?,
        "lambda_mean" => {
            cfg.lambda_mean = if v == "auto" {
                None
            } else {
                Some(value(key, v)?)
            }
        }
        "lambda_mean_grid" => cfg.lambda_mean_grid = list(key, v)?,
        "lambda_mean_folds" => cfg.lambda_mean_folds = value(key, v)?,
        "hidden" => {
            let n = value(key, v)?;
            let seed = cfg.seed;
            let h = hidden(cfg);
            h.num_hidden = n;
            h.seed = seed;
        }
        "hidden_population" => hidden(cfg).population = v.to_string(),
        "hidden_init_scale" => hidden(cfg).init_scale = value(key, v)?,
        "hidden_learning_rate" => hidden(cfg).learning_rate = value(key, v)?,
        "hidden_epochs" => hidden(cfg).epochs = value(key, v)?,
        "hidden_batch_size" => hidden(cfg).batch_size = value(key, v)?,
        "hidden_lambda" => hidden(cfg).lambda1 = value(key, v)?,
        "hidden_k" => hidden(cfg).k = value(key, v)?,
        _ => return Err(RlrError::Config(format!("unknown config key `{key}`"))),
    }
    Ok(())
}

/// Parses flat `key = value` lines over the defaults. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| RlrError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        apply_setting(&mut cfg, k.trim(), v.trim())
            .map_err(|e| RlrError::Config(format!("line {}: {}", i + 1, strip(e))))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn strip(e: RlrError) -> String {
    match e {
        RlrError::Config(m) => m,
        other => other.to_string(),
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| RlrError::io(path, e))?;
    parse_config(&text).map_err(|e| RlrError::Config(format!("{}: {}", path.display(), strip(e))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        assert_eq!(parse_config("").unwrap(), PipelineConfig::default());
        let cfg = parse_config(
            "# comment\nseed = 7\nk = 1, 2, 3\nlambda = 0.5\nhidden = 2 # two\nhidden_population = movie\nlambda_mean = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.structure.seed, 7);
        assert_eq!(cfg.structure.k_candidates, vec![1, 2, 3]);
        assert_eq!(cfg.structure.lambda, LambdaChoice::Fixed(0.5));
        let h = cfg.hidden.unwrap();
        assert_eq!(
            (h.num_hidden, h.population.as_str(), h.seed),
            (2, "movie", 7)
        );
        assert_eq!(cfg.lambda_mean, Some(0.1));
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_config("folds = 5\nbogus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2") && e.contains("bogus"), "{e}");
        assert!(parse_config("folds five").is_err());
        assert!(parse_config("folds = 1").is_err());
        assert!(parse_config("k = 1,x").is_err());
    }

    #[test]
    fn every_key_is_accepted() {
        let sample = |k: &str| match k {
            "k" | "lambda_grid" | "lambda_mean_grid" => "0.1",
            "lambda" => "grid",
            "lambda_mean" => "auto",
            "standardize" | "negated_booleans" | "penalize_intercept" => "true",
            "hidden_population" => "p",
            "tolerance" | "hidden_init_scale" | "hidden_learning_rate" | "hidden_lambda" => "0.5",
            _ => "3",
        };
        for (key, _) in CONFIG_KEYS {
            let mut cfg = PipelineConfig::default();
            let v = if *key == "k" { "1" } else { sample(key) };
            apply_setting(&mut cfg, key, v).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
