//! Match topics between two windows by minimum total Jensen-Shannon cost,
//! then relabel a fitted model so its topics line up with an earlier one.

use ndarray::Array2;
use topic_diffusion::alignment::{align_chain_with_audit, hungarian, CostMatrix};
use topic_diffusion::divergence::{jsd_pair, ProbDist};
use topic_diffusion::factorization::{fit_array, normalize, FitOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dist = |a: f64| ProbDist::new(vec![a, 1.0 - a]);
    let earlier = [dist(0.5)?, dist(0.1)?, dist(0.9)?];
    let later = [dist(0.8)?, dist(0.4)?, dist(0.1)?];
    let mut values = Array2::zeros((3, 3));
    for (a, p) in earlier.iter().enumerate() {
        for (b, q) in later.iter().enumerate() {
            values[[a, b]] = jsd_pair(p, q)?;
        }
    }
    println!("cost matrix:\n{values:.4}");
    let assignment = hungarian(&CostMatrix::new(values))?;
    for (a, b) in assignment.perm.iter().enumerate() {
        println!("  topic {} -> topic {}", a + 1, b + 1);
    }
    println!("total cost {:.4}", assignment.total_cost);

    // Same block data with the topic blocks listed in a different order
    let block = |order: [usize; 3]| {
        Array2::from_shape_fn((30, 12), |(i, j)| {
            let topic = order[i % 3];
            if j / 4 == topic { 1.0 + (i * 7 + j) as f64 % 3.0 } else { 0.05 }
        })
    };
    let opts = FitOptions {
        k: 3,
        theta: 0.0,
        seed: 5,
        ..FitOptions::default()
    };
    let first = normalize(&fit_array(&block([0, 1, 2]), &opts)?, "first");
    let second = normalize(&fit_array(&block([2, 0, 1]), &FitOptions { seed: 9, ..opts })?, "second");
    let (_, audit) = align_chain_with_audit(&[first, second])?;
    for record in audit {
        println!(
            "\n{} -> {}: permutation {:?}, cost {:.2e}",
            record.earlier_window, record.later_window, record.permutation, record.total_cost
        );
    }
    Ok(())
}
