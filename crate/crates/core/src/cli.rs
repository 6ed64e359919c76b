//! The `rlr` command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::eval::{cross_validate, labelled_rows, write_report_csv};
use crate::ingest::{
    generate_synthetic, load_config, load_database, write_dataset, DatasetManifest, SyntheticSpec,
    TargetDecl,
};
use crate::model::RlrModel;
use crate::pipeline::{fit_learner, predict_rows, Learner, PipelineConfig};
use crate::schema::TargetSpec;
use crate::structure::write_trace_csv;

#[derive(Debug, Parser)]
#[command(name = "rlr", version, about = "Relational logistic regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a model; writes model.txt and trace.csv.
    Learn {
        #[command(flatten)]
        common: Common,
        /// Learner to train; defaults to rlr_h with --hidden > 0, else rlr_base.
        #[arg(long)]
        learner: Option<Learner>,
    },
    /// Cross-validate baseline, flat_lr, rlr_base and rlr_h; writes report.csv.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Score every target individual with a saved model; writes predictions.csv.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to model.txt in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write a synthetic dataset (CSV tables and manifest.toml).
    Synth {
        #[arg(long, value_enum, default_value_t = Preset::Friends)]
        preset: Preset,
        /// Size of the target population.
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Size of the second population (latent preset).
        #[arg(long, default_value_t = 200)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Friends and kindness driving happiness.
    Friends,
    /// Gender driven by an unobserved movie attribute.
    Latent,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of hidden attributes for rlr_h.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Candidate numbers of binary literals, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long)]
    pub folds: Option<usize>,
}

impl Common {
    /// Configuration file (or defaults) with command-line overrides applied.
    pub fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => PipelineConfig::default(),
        };
        let set = |cfg: &mut PipelineConfig, key: &str, v: String| {
            crate::ingest::config::apply_setting(cfg, key, &v)
        };
        if let Some(s) = self.seed {
            set(&mut cfg, "seed", s.to_string())?;
        }
        if let Some(h) = self.hidden {
            set(&mut cfg, "hidden", h.to_string())?;
        }
        if let Some(k) = &self.k {
            let list: Vec<String> = k.iter().map(usize::to_string).collect();
            set(&mut cfg, "k", list.join(","))?;
        }
        if let Some(f) = self.folds {
            set(&mut cfg, "folds", f.to_string())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dataset(&self) -> Result<(RelationalDatabase, TargetSpec)> {
        let manifest = DatasetManifest::load(&self.manifest)?;
        let db = load_database(&manifest)?;
        let target = manifest.target_spec(db.schema())?;
        Ok((db, target))
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir).map_err(|e| RlrError::io(dir, e))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| RlrError::io(&path, e))?;
    Ok((path, BufWriter::new(f)))
}

fn finish(path: &Path, r: csv::Result<()>) -> Result<()> {
    r.map_err(|e| RlrError::csv(path, e))
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Learn { common, learner } => {
            let cfg = common.config()?;
            let (db, target) = common.dataset()?;
            let learner = learner.unwrap_or(if cfg.num_hidden() > 0 {
                Learner::RlrHidden
            } else {
                Learner::RlrBase
            });
            let rows = labelled_rows(&db, &target);
            info!("learning {learner} on {} labelled individuals", rows.len());
            let fitted = fit_learner(&db, &target, &rows, learner, &cfg)?;
            std::fs::create_dir_all(&common.out).map_err(|e| RlrError::io(&common.out, e))?;
            fitted.model.save(&common.out.join("model.txt"))?;
            let (path, w) = create(&common.out, "trace.csv")?;
            finish(&path, write_trace_csv(&fitted.trace, w))?;
            for wf in fitted.model.active_formulas() {
                println!("{:>12.6}\t{}", wf.weight, wf.formula);
            }
            Ok(())
        }
        Command::Eval { common } => {
            let cfg = common.config()?;
            let (db, target) = common.dataset()?;
            let reports = cross_validate(&db, &target, &Learner::ALL, &cfg)?;
            let (path, w) = create(&common.out, "report.csv")?;
            finish(&path, write_report_csv(&reports, w))?;
            println!("{:<10} {:>9} {:>9}", "learner", "acll", "accuracy");
            for (l, r) in &reports {
                println!(
                    "{:<10} {:>9.4} {:>8.2}%",
                    l.name(),
                    r.acll,
                    100.0 * r.accuracy
                );
            }
            Ok(())
        }
        Command::Predict { common, model } => {
            let (db, target) = common.dataset()?;
            let path = model.unwrap_or_else(|| common.out.join("model.txt"));
            let model = RlrModel::load(&path, db.schema())?;
            if model.target().attribute != target.attribute {
                return Err(RlrError::validation(format!(
                    "model predicts `{}` but the manifest targets `{}`",
                    model.target().attribute,
                    target.attribute
                )));
            }
            let rows: Vec<usize> = (0..db.population_size(&target.population)).collect();
            let probs = predict_rows(&model, &db, &rows)?;
            let prepared = model.prepare_database(&db)?;
            let raw = model.rlr_predict_all(&prepared);
            let labels = db.labels(&target);
            let ids = db
                .population(&target.population)
                .expect("target population")
                .individuals();
            let (out, w) = create(&common.out, "predictions.csv")?;
            let write = || -> csv::Result<()> {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(["id", "label", "probability", "rlr_probability"])?;
                for r in rows.iter().copied() {
                    let label = labels[r].map_or(String::new(), |l| u8::from(l).to_string());
                    w.write_record([
                        ids[r].clone(),
                        label,
                        format!("{:?}", probs[r]),
                        format!("{:?}", raw[r]),
                    ])?;
                }
                w.flush()?;
                Ok(())
            };
            finish(&out, write())
        }
        Command::Synth {
            preset,
            n,
            m,
            out,
            seed,
        } => {
            let spec = match preset {
                Preset::Friends => SyntheticSpec::friends(n, seed),
                Preset::Latent => SyntheticSpec::planted_latent(n, m, seed),
            };
            let data = generate_synthetic(&spec)?;
            let target = TargetDecl {
                attribute: data.target.attribute.clone(),
                positive: data.target.positive.clone(),
                var: data.target.var.clone(),
                merge: Default::default(),
            };
            let path = write_dataset(&data.db, &out, target)?;
            let mut stdout = std::io::stdout();
            writeln!(stdout, "{}", path.display()).map_err(|e| RlrError::io("stdout", e))
        }
    }
}

/// One-line report of an error: `error\t<kind>\t<message>`.
pub fn error_line(e: &RlrError) -> String {
    let msg = e.to_string().replace(['\n', '\t'], " ");
    format!("error\t{}\t{}", e.kind(), msg)
}
