//! Learning a hidden movie attribute when gender depends on an unobserved
//! property of the rated movies, then searching structure with it.

use rlr::eval::{accuracy, acll, labelled_rows};
use rlr::hidden::{augment_with_hidden, learn_hidden, HiddenConfig};
use rlr::ingest::{generate_synthetic, SyntheticSpec};
use rlr::structure::{learn_structure, StructureConfig};

fn main() -> rlr::Result<()> {
    let data = generate_synthetic(&SyntheticSpec::planted_latent(300, 120, 4))?;
    let (db, target) = (&data.db, &data.target);
    let rows = labelled_rows(db, target);
    let y: Vec<bool> = db.labels(target).into_iter().flatten().collect();

    let base = learn_structure(db, target, &StructureConfig::default())?;
    let p = base.model.rlr_predict_all(db);
    println!(
        "without hidden: acll {:.4} accuracy {:.3}",
        acll(&p, &y),
        accuracy(&p, &y)
    );

    let cfg = HiddenConfig {
        population: "movie".into(),
        ..HiddenConfig::default()
    };
    let learned = learn_hidden(&augment_with_hidden(db, &cfg)?, target, &rows, &cfg)?;
    println!(
        "sgd loss {:.4} -> {:.4} ({} restarts)",
        learned.epoch_losses.first().copied().unwrap_or(f64::NAN),
        learned.epoch_losses.last().copied().unwrap_or(f64::NAN),
        learned.restarts
    );
    let with = learn_structure(&learned.db, target, &StructureConfig::default())?;
    let p = with.model.rlr_predict_all(&learned.db);
    println!(
        "with hidden:    acll {:.4} accuracy {:.3}",
        acll(&p, &y),
        accuracy(&p, &y)
    );
    for wf in with.model.active_formulas() {
        println!("{:>10.4}  {}", wf.weight, wf.formula);
    }
    Ok(())
}
