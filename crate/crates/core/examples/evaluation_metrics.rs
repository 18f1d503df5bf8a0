//! Rank and linear correlation, tie handling, and dataset-size weighting.
//!
//!     cargo run --example evaluation_metrics

use vqa_grpo::evaluate::evaluate_predictions;
use vqa_grpo::metrics::{fractional_ranks, plcc, srcc, weighted_overall};

fn main() -> vqa_grpo::Result<()> {
    let pred = [1.0, 2.0, 3.0, 4.0];
    let mos = [1.0, 3.0, 2.0, 4.0];
    println!("srcc {}  plcc {}", srcc(&pred, &mos)?, plcc(&pred, &mos)?);

    let tied = [2.0, 1.0, 2.0, 5.0];
    println!("ranks of {tied:?}: {:?}", fractional_ranks(&tied));

    // A monotone but non-linear predictor keeps srcc at 1 while plcc drops.
    let curved: Vec<f64> = mos.iter().map(|m| m.powi(4)).collect();
    let r = evaluate_predictions(&curved, &mos)?;
    println!("quartic predictor: srcc {:.4}, plcc {:.4}", r.srcc, r.plcc);

    let overall = weighted_overall(&[(0.85, 1200), (0.70, 300), (0.92, 500)])?;
    println!("size-weighted overall {overall:.4}");

    match srcc(&[3.0; 4], &mos) {
        Ok(v) => println!("unexpected {v}"),
        Err(e) => println!("constant predictions: {e}"),
    }
    Ok(())
}
