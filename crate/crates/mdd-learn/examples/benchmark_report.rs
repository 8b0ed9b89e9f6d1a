//! The repeated-split benchmark harness end to end: plan, run, export, and
//! test significance between two methods.

use mdd_learn::data::{synthetic_regression, SynthConfig};
use mdd_learn::eval::{
    plan_benchmark, run_benchmark, welch_t_test, write_report_csv, write_report_json,
    BenchmarkConfig, Grids, Method,
};

fn main() {
    let mut synth = SynthConfig::new(500, 8, 0.6, 17);
    synth.correlation = 0.4;
    let ds = synthetic_regression(&synth);

    let mut cfg = BenchmarkConfig::new(
        vec![Method::Rr, Method::Drr { m: 4 }, Method::MddLs { m: 4 }],
        99,
    );
    // trimmed protocol so the demo finishes in seconds; defaults are
    // 30 trials with the full grids
    cfg.trials = 8;
    cfg.grids = Grids {
        lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1],
        gammas: vec![1e-4, 1e-3, 1e-2, 1e-1],
        sigmas: vec![],
    };

    let plan = plan_benchmark(&cfg);
    println!("plan: {} trials, {} folds", plan.trials, plan.folds);
    for mp in &plan.methods {
        println!(
            "  {}: {} grid cells, {} fits per trial",
            mp.method, mp.grid_cells, mp.fits_per_trial
        );
    }

    let reports = run_benchmark(&ds, &cfg).unwrap();
    for report in &reports {
        println!(
            "{}: mean rmse {:.4} +/- {:.4}",
            report.method, report.mean_rmse, report.std_rmse
        );
    }

    let mut csv = Vec::new();
    write_report_csv(&mut csv, &reports).unwrap();
    println!("--- report.csv ---");
    for line in String::from_utf8(csv).unwrap().lines().take(5) {
        println!("{line}");
    }
    println!("...");

    let mut json = Vec::new();
    write_report_json(&mut json, &reports).unwrap();
    println!("report.json: {} bytes", json.len());

    let t = welch_t_test(&reports[2].rmse, &reports[1].rmse).unwrap();
    println!(
        "welch t-test mdd-ls-4 vs drr-4: t = {:.3}, p = {:.4}, significant at 95%: {}",
        t.t, t.p, t.significant_95
    );
}
