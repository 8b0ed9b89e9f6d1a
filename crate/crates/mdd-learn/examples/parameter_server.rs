//! Driving the synchronous round engine directly with a custom protocol.
//!
//! Workers compute a local gradient-like step on their slice of a shared
//! quadratic; the server averages and redistributes. The engine counts every
//! float moved, so the communication bill is exact.

use mdd_learn::paramserver::{RoundEngine, ServerDecision};

fn main() {
    let m = 4;
    let d = 3;
    let targets: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..d).map(|c| (i + c) as f64 * 0.5).collect())
        .collect();

    // each worker nudges the pulled state toward its own target
    let worker = |_t: usize, i: usize, pulled: &[f64]| {
        Ok(pulled
            .iter()
            .zip(&targets[i])
            .map(|(x, goal)| x + 0.5 * (goal - x))
            .collect())
    };

    let mut history = Vec::new();
    let server = |t: usize, pushes: &[Vec<f64>]| {
        let mut mean = vec![0.0; d];
        for push in pushes {
            for (acc, v) in mean.iter_mut().zip(push) {
                *acc += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= pushes.len() as f64;
        }
        history.push((t, mean.clone()));
        if t >= 8 {
            Ok(ServerDecision::Stop)
        } else {
            Ok(ServerDecision::Continue(vec![mean; pushes.len()]))
        }
    };

    let (report, pushed, pulled) = {
        let mut engine = RoundEngine::new(vec![vec![0.0; d]; m], worker, server)
            .unwrap()
            .with_threads(RoundEngine::threads_from_env());
        let report = engine.run(100).unwrap();
        (report, engine.floats_pushed(), engine.floats_pulled())
    };

    for (t, mean) in &history {
        println!("round {t}: consensus {mean:?}");
    }
    println!(
        "{} rounds, {pushed} floats pushed, {pulled} floats pulled (expected {} each)",
        report.rounds.len(),
        report.rounds.len() * m * d
    );
}
