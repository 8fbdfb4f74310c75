//! Significance thresholds of the generalized JSD for a grid of topic
//! counts and window counts.
//!
//! ```text
//! cargo run -p topic-diffusion --example threshold_table [alpha]
//! ```

use topic_diffusion::divergence::{chi2_quantile, gjs_threshold, ThresholdParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alpha: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.01);
    let windows = [2usize, 3, 4, 6, 8, 12];

    println!("alpha = {alpha}");
    print!("{:>4}", "k\\t");
    for t in windows {
        print!("{t:>10}");
    }
    println!();
    for k in [2usize, 3, 5, 10, 20, 50] {
        print!("{k:>4}");
        for t in windows {
            print!("{:>10.5}", gjs_threshold(ThresholdParams::new(k, t, alpha)?)?);
        }
        println!();
    }

    let params = ThresholdParams::new(10, 6, alpha)?;
    println!(
        "\nk=10, t=6: chi2({}, {}) = {:.4} over {} cells",
        params.df(),
        1.0 - alpha,
        chi2_quantile(params.df(), 1.0 - alpha)?,
        params.cells()
    );
    Ok(())
}
