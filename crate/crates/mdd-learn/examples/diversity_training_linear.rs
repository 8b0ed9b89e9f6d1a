//! Max-diversity training in linear space: run the iterative trainer, watch
//! the per-round trace, and compare ensemble diversity against plain
//! divide-and-conquer averaging.

use mdd_learn::baselines::train_drr;
use mdd_learn::data::{gather_shards, partition, split_train_test, synthetic_regression, SynthConfig};
use mdd_learn::eval::rmse;
use mdd_learn::mdd::{diversity_linear, mdd_ls_train, write_trace_csv, TrainConfig};

fn main() {
    let ds = synthetic_regression(&SynthConfig::new(1000, 10, 0.5, 3));
    let (train, test) = split_train_test(&ds, 0.7, 3).unwrap();
    let m = 5;
    let part = partition(&train, m, 3).unwrap();
    let shards = gather_shards(&train, &part);

    let lambda = 0.1;
    let (drr_avg, drr_locals) = train_drr(&train, &part, lambda).unwrap();

    let cfg = TrainConfig::new(lambda, 0.1, m);
    let run = mdd_ls_train(&shards, &cfg).unwrap();

    println!("terminated: {:?} after {} rounds", run.termination, run.trace.len());
    let mut csv = Vec::new();
    write_trace_csv(&mut csv, &run.trace).unwrap();
    print!("{}", String::from_utf8(csv).unwrap());

    let drr_rmse = rmse(
        drr_avg.predict(test.features()).unwrap().view(),
        test.targets(),
    )
    .unwrap();
    let mdd_rmse = rmse(
        run.model.predict(test.features()).unwrap().view(),
        test.targets(),
    )
    .unwrap();
    println!("drr-{m}: rmse {:.4}, diversity {:.6}", drr_rmse, diversity_linear(&drr_locals).unwrap());
    println!("mdd-ls-{m}: rmse {:.4}, diversity {:.6}", mdd_rmse, diversity_linear(&run.shard_models).unwrap());

    let last = run.trace.last().unwrap();
    println!(
        "communication: {} floats pushed, {} pulled across {} rounds (m*d = {})",
        last.floats_pushed,
        last.floats_pulled,
        run.trace.len(),
        m * train.dim()
    );
}
