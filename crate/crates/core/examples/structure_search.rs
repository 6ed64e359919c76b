//! Hierarchical structure search on synthetic friends data: the generating
//! formula should be found among the candidate formulae.

use rlr::ingest::{generate_synthetic, SyntheticSpec};
use rlr::structure::{learn_structure, write_trace_csv, StructureConfig};

fn main() -> rlr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let data = generate_synthetic(&SyntheticSpec::friends(500, seed))?;
    let cfg = StructureConfig {
        seed,
        ..StructureConfig::default()
    };
    let out = learn_structure(&data.db, &data.target, &cfg)?;
    println!(
        "lambda {:.5}, {} removed formulae",
        out.lambda1,
        out.removed.len()
    );
    for wf in out.model.active_formulas() {
        println!("{:>10.4}  {}", wf.weight, wf.formula);
    }
    write_trace_csv(&out.trace, std::io::stdout()).expect("stdout");
    Ok(())
}
