//! The elementwise fast inverse-apply: what it guarantees, and what it does
//! not.
//!
//! Given `c = A^{-1} b`, the shortcut `r = (d^T c) ./ b` costs O(l) instead
//! of a solve. Its constructive identity `r^T b = l * (d^T c)` always holds,
//! but `r` is generally NOT `A^{-1} d` -- this demo measures how far off it
//! is on random SPD systems, which is why the exact solver mode is the
//! default for training.

use mdd_learn::linalg::{fast_inverse_apply, spd_factorize};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = 6;
    let m = Array2::from_shape_fn((l, l), |_| rng.random::<f64>() * 2.0 - 1.0);
    let mut a = m.t().dot(&m);
    for i in 0..l {
        a[[i, i]] += 1.0;
    }
    let b = Array1::from_shape_fn(l, |_| rng.random::<f64>() + 0.5);
    let d = Array1::from_shape_fn(l, |_| rng.random::<f64>() * 2.0 - 1.0);

    let factor = spd_factorize(a.view()).unwrap();
    let c = factor.solve(b.view()).unwrap();

    let fast = fast_inverse_apply(c.view(), b.view(), d.view()).unwrap();
    let exact = factor.solve(d.view()).unwrap();

    println!("fast  r = {:?}", fast.to_vec());
    println!("exact x = {:?}", exact.to_vec());

    let identity_lhs = fast.dot(&b);
    let identity_rhs = l as f64 * d.dot(&c);
    println!("identity r^T b = {identity_lhs:.12} vs l*(d^T c) = {identity_rhs:.12}");

    let rel = {
        let num = (&fast - &exact).mapv(|v| v * v).sum().sqrt();
        let den = exact.mapv(|v| v * v).sum().sqrt();
        num / den
    };
    println!("relative distance from the true solve: {rel:.3}");

    // the zero guard: a near-zero entry of b makes the division meaningless
    let mut guarded = b.clone();
    guarded[2] = 1e-15;
    match fast_inverse_apply(c.view(), guarded.view(), d.view()) {
        Err(e) => println!("zero guard: {e}"),
        Ok(_) => unreachable!(),
    }
}
