//! Size of the Fisher z test when both samples share one correlation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use scengen_core::validate::correlation_matrix;
use scengen_core::fisher_z_pair;

fn sample_r(rng: &mut ChaCha8Rng, rho: f64, n: usize) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (a, rho * a + (1.0 - rho * rho).sqrt() * b)
        })
        .unzip();
    correlation_matrix(&[x, y]).get(0, 1)
}

#[test]
fn rejection_rate_matches_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let trials = 4000;
    let alpha = 0.10;
    let mut rejected = 0;
    for k in 0..trials {
        let rho = [-0.6, 0.0, 0.3, 0.8][k % 4];
        let r1 = sample_r(&mut rng, rho, 360);
        let r2 = sample_r(&mut rng, rho, 1200);
        if fisher_z_pair(r1, 360, r2, 1200).unwrap().p_value <= alpha {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / trials as f64;
    // binomial sd at 4000 trials is 0.0047
    assert!((rate - alpha).abs() < 0.02, "rejection rate {rate}");
}
