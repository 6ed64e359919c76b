//! Converts MovieLens-100k to CSV tables with gender and age manifests, then
//! optionally cross-validates gender prediction.
//!
//! cargo run --release --example prepare_movielens -- <ml-100k dir> <out dir> [--eval]

use std::path::PathBuf;
use std::time::Instant;

use rlr::eval::cross_validate;
use rlr::ingest::{convert_movielens, load_database, DatasetManifest};
use rlr::pipeline::{Learner, PipelineConfig};

fn main() -> rlr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 2 {
        eprintln!("usage: prepare_movielens <ml-100k dir> <out dir> [--eval]");
        std::process::exit(2);
    }
    let summary = convert_movielens(&PathBuf::from(&args[0]), &PathBuf::from(&args[1]))?;
    println!(
        "{} users, {} movies, {} rated pairs\n{}\n{}",
        summary.users,
        summary.movies,
        summary.ratings,
        summary.gender_manifest.display(),
        summary.age_manifest.display()
    );
    if args.iter().any(|a| a == "--eval") {
        let manifest = DatasetManifest::load(&summary.gender_manifest)?;
        let db = load_database(&manifest)?;
        let target = manifest.target_spec(db.schema())?;
        let cfg = PipelineConfig::default();
        let start = Instant::now();
        let reports = cross_validate(
            &db,
            &target,
            &[Learner::Baseline, Learner::FlatLr, Learner::RlrBase],
            &cfg,
        )?;
        for (l, r) in reports {
            println!(
                "{:<10} acll {:.4} accuracy {:.2}%",
                l.name(),
                r.acll,
                100.0 * r.accuracy
            );
        }
        println!("{:.1}s", start.elapsed().as_secs_f64());
    }
    Ok(())
}
