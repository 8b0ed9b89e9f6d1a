//! Cross-validated hyperparameter selection over the default grids.

use mdd_learn::data::{synthetic_regression, SynthConfig};
use mdd_learn::eval::{kfold_cv, FitSettings, Grids, Method, MethodSpec};

fn main() {
    let ds = synthetic_regression(&SynthConfig::new(400, 5, 0.5, 13));

    let grids = Grids::default();
    println!(
        "default grids: {} lambda points, {} gamma points, {} sigma points",
        grids.lambdas.len(),
        grids.gammas.len(),
        grids.sigmas.len()
    );

    for method in [Method::Rr, Method::Drr { m: 4 }, Method::MddLs { m: 4 }] {
        let spec = MethodSpec {
            method,
            settings: FitSettings::default(),
        };
        let hp = kfold_cv(&ds, &spec, &grids, 5, 1).unwrap();
        println!(
            "{}: lambda={:e}{}{}",
            method.name(),
            hp.lambda,
            hp.gamma.map(|g| format!(" gamma={g:e}")).unwrap_or_default(),
            hp.sigma.map(|s| format!(" sigma={s}")).unwrap_or_default(),
        );
    }

    // kernel methods search sigma as well; a smaller grid keeps the demo quick
    let kernel_grids = Grids {
        lambdas: vec![1e-4, 1e-2, 1.0],
        gammas: vec![1e-4, 1e-2],
        sigmas: vec![0.5, 1.0, 2.0, 4.0],
    };
    for method in [Method::Krr, Method::MddRkhs { m: 3 }] {
        let spec = MethodSpec {
            method,
            settings: FitSettings::default(),
        };
        let hp = kfold_cv(&ds, &spec, &kernel_grids, 5, 1).unwrap();
        println!(
            "{}: lambda={:e}{}{}",
            method.name(),
            hp.lambda,
            hp.gamma.map(|g| format!(" gamma={g:e}")).unwrap_or_default(),
            hp.sigma.map(|s| format!(" sigma={s}")).unwrap_or_default(),
        );
    }
}
