//! How the smoothing parameter shifts sparseness between the factors.
//!
//! ```text
//! cargo run -p topic-diffusion --release --example nsnmf_sparseness
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topic_diffusion::factorization::{fit_array, normalize, reconstruction_error_array, FitOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = Array2::from_shape_fn((100, 200), |_| rng.random::<f64>());
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();

    println!("{:>6} {:>8} {:>12} {:>14} {:>14}", "theta", "sweeps", "rel error", "H_hat < 1e-4", "W < 1e-4");
    for theta in [0.0, 0.2, 0.4, 0.5, 0.6, 0.8] {
        let opts = FitOptions {
            k: 10,
            theta,
            seed: 8,
            ..FitOptions::default()
        };
        let model = fit_array(&x, &opts)?;
        let err = reconstruction_error_array(&model, &x)? / norm;
        let normalized = normalize(&model, "bench");
        let frac = |m: &Array2<f64>| m.iter().filter(|&&v| v < 1e-4).count() as f64 / m.len() as f64;
        println!(
            "{theta:>6.1} {:>8} {err:>12.4} {:>14.4} {:>14.4}",
            model.iterations_run,
            frac(&normalized.h_hat),
            frac(&normalized.w)
        );
    }
    Ok(())
}
