//! Five-fold comparison of the mean baseline, flat logistic regression,
//! RLR and RLR with a hidden attribute on synthetic friends data.

use rlr::eval::{cross_validate, write_report_csv};
use rlr::hidden::HiddenConfig;
use rlr::ingest::{generate_synthetic, SyntheticSpec};
use rlr::pipeline::{Learner, PipelineConfig};

fn main() -> rlr::Result<()> {
    let data = generate_synthetic(&SyntheticSpec::friends(400, 2))?;
    let cfg = PipelineConfig {
        hidden: Some(HiddenConfig {
            epochs: 50,
            ..HiddenConfig::default()
        }),
        ..PipelineConfig::default()
    };
    let reports = cross_validate(&data.db, &data.target, &Learner::ALL, &cfg)?;
    for (l, r) in &reports {
        println!(
            "{:<9} acll {:>8.4}  accuracy {:>6.2}%",
            l.name(),
            r.acll,
            100.0 * r.accuracy
        );
    }
    write_report_csv(&reports, std::io::stdout()).expect("stdout");
    Ok(())
}
