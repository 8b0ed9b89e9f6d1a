//! Max-diversity training in RKHS: the kernel analogue of the linear demo,
//! including the fast solver mode and its fallback events.

use mdd_learn::baselines::train_kdrr;
use mdd_learn::data::{gather_shards, partition, split_train_test, synthetic_regression, SynthConfig};
use mdd_learn::eval::rmse;
use mdd_learn::linalg::KernelConfig;
use mdd_learn::mdd::{diversity_rkhs, mdd_rkhs_train, SolverMode, TrainConfig};

fn main() {
    let mut synth = SynthConfig::new(400, 3, 0.2, 9);
    synth.nonlinearity = 0.7;
    let ds = synthetic_regression(&synth);
    let (train, test) = split_train_test(&ds, 0.7, 9).unwrap();
    let m = 4;
    let part = partition(&train, m, 9).unwrap();
    let shards = gather_shards(&train, &part);

    let sigma = 1.5;
    let kernel = KernelConfig::gaussian(sigma).unwrap();
    // the kernel iteration's loop gain grows with shard size, so gamma has
    // to stay well below 1/n_shard to contract
    let lambda = 0.1;

    let kdrr = train_kdrr(&train, &part, lambda, &kernel).unwrap();
    let kdrr_rmse = rmse(
        kdrr.predict(test.features()).unwrap().view(),
        test.targets(),
    )
    .unwrap();
    println!("kdrr-{m}: rmse {:.4}, diversity {:.6}", kdrr_rmse, diversity_rkhs(&kdrr).unwrap());

    for mode in [SolverMode::Exact, SolverMode::FastLemma4] {
        let mut cfg = TrainConfig::new(lambda, 0.003, m);
        cfg.sigma = Some(sigma);
        cfg.solver_mode = mode;
        match mdd_rkhs_train(&shards, &cfg, &kernel) {
            Ok(run) => {
                let score = rmse(
                    run.model.predict(test.features()).unwrap().view(),
                    test.targets(),
                )
                .unwrap();
                println!(
                    "mdd-rkhs-{m} ({mode:?}): rmse {:.4}, diversity {:.6}, rounds {}, fallbacks {}",
                    score,
                    diversity_rkhs(&run.model).unwrap(),
                    run.trace.len(),
                    run.fallbacks.len()
                );
            }
            // the elementwise shortcut is not a true inverse apply, so its
            // iterates can wander until the divergence detector trips; this
            // is why the exact mode is the default
            Err(e) => println!("mdd-rkhs-{m} ({mode:?}): aborted: {e}"),
        }
    }
}
