//! The L1-regularized logistic regression solver on its own: data drawn
//! from known weights, an unregularized refit and a regularization path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlr::lr::{
    fit_l1, fit_l1_standardized, lambda_max, predict_prob, DenseMatrix, SolverConfig, Standardizer,
};

fn main() {
    let truth = [-0.5, 1.5, -2.0, 0.0, 0.0, 0.75];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let mut r = vec![1.0];
            r.extend((1..truth.len()).map(|_| rng.gen_range(-1.0..1.0)));
            r
        })
        .collect();
    let y: Vec<bool> = rows
        .iter()
        .map(|r| rng.gen_bool(predict_prob(&truth, r)))
        .collect();
    let x = DenseMatrix::from_rows(&rows);

    let fit = fit_l1(&x, &y, &SolverConfig::default());
    println!("truth  {truth:?}");
    println!("refit  {:.3?} ({} iterations)", fit.weights, fit.iterations);

    let top = lambda_max(&Standardizer::fit(&x).transform(&x), &y);
    for frac in [1.0, 0.5, 0.1, 0.02] {
        let cfg = SolverConfig::default().with_lambda(frac * top);
        let f = fit_l1_standardized(&x, &y, &cfg);
        let nonzero = f.weights.iter().skip(1).filter(|w| **w != 0.0).count();
        println!(
            "lambda {:.4}: {nonzero} non-zero  {:.3?}",
            frac * top,
            f.weights
        );
    }
}
