//! Global vs divide-and-conquer ridge regression on synthetic data.

use mdd_learn::baselines::{train_drr, train_rr};
use mdd_learn::data::{partition, split_train_test, synthetic_regression, SynthConfig};
use mdd_learn::eval::rmse;

fn main() {
    let ds = synthetic_regression(&SynthConfig::new(2000, 12, 0.5, 7));
    let (train, test) = split_train_test(&ds, 0.7, 7).unwrap();
    let lambda = 1e-3;

    let rr = train_rr(&train, lambda).unwrap();
    let rr_rmse = rmse(
        rr.predict(test.features()).unwrap().view(),
        test.targets(),
    )
    .unwrap();
    println!("rr: test rmse {rr_rmse:.4}");

    for m in [2, 5, 10] {
        let part = partition(&train, m, 7).unwrap();
        let (avg, locals) = train_drr(&train, &part, lambda).unwrap();
        let score = rmse(
            avg.predict(test.features()).unwrap().view(),
            test.targets(),
        )
        .unwrap();
        let spread: f64 = locals
            .iter()
            .map(|l| {
                let diff = &l.w - &avg.w;
                diff.dot(&diff).sqrt()
            })
            .sum::<f64>()
            / m as f64;
        println!("drr-{m}: test rmse {score:.4}, mean shard distance to average {spread:.4}");
    }
}
