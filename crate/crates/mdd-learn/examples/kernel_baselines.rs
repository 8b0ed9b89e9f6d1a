//! Global vs divide-and-conquer kernel ridge regression with the Gaussian
//! kernel.

use mdd_learn::baselines::{train_kdrr, train_krr};
use mdd_learn::data::{partition, split_train_test, synthetic_regression, SynthConfig};
use mdd_learn::eval::rmse;
use mdd_learn::linalg::KernelConfig;

fn main() {
    let mut cfg = SynthConfig::new(600, 4, 0.2, 11);
    cfg.nonlinearity = 0.8; // give the kernel something the linear fit misses
    let ds = synthetic_regression(&cfg);
    let (train, test) = split_train_test(&ds, 0.7, 11).unwrap();

    let lambda = 1e-4;
    let kernel = KernelConfig::gaussian(2.0).unwrap();

    let krr = train_krr(&train, lambda, &kernel).unwrap();
    let krr_rmse = rmse(
        krr.predict(test.features()).unwrap().view(),
        test.targets(),
    )
    .unwrap();
    println!("krr: test rmse {krr_rmse:.4} ({} anchors)", train.n_samples());

    for m in [2, 5] {
        let part = partition(&train, m, 11).unwrap();
        let kdrr = train_kdrr(&train, &part, lambda, &kernel).unwrap();
        let score = rmse(
            kdrr.predict(test.features()).unwrap().view(),
            test.targets(),
        )
        .unwrap();
        let sizes: Vec<usize> = kdrr.shards.iter().map(|s| s.anchors.nrows()).collect();
        println!("kdrr-{m}: test rmse {score:.4}, shard sizes {sizes:?}");
    }
}
