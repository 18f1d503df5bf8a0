//! Score a group of tagged responses against a partner group and a
//! perturbed twin, printing every reward component.
//!
//!     cargo run --example reward_breakdown

use vqa_grpo::rewards::{
    parse_score, score_group, temporal_bonus, with_temporal_bonus, GroupStats, Partner,
};
use vqa_grpo::{HyperParams, QualityResponse};

fn response(text: &str) -> QualityResponse {
    let parsed_score = parse_score(text);
    QualityResponse {
        text: text.to_string(),
        parsed_score,
        raw_draw: parsed_score.unwrap_or(0.0),
        log_prob_current: 0.0,
        log_prob_old: 0.0,
    }
}

fn main() -> vqa_grpo::Result<()> {
    let hyper = HyperParams::default();
    let raw: Vec<_> = [
        "<think>crisp edges, steady motion</think><answer>4.10</answer>",
        "<think>mild blur</think><answer>3.60</answer>",
        "<think>sharp</think> <answer>4.40</answer>",
        "answer: 4.0",
    ]
    .iter()
    .map(|t| response(t))
    .collect();
    let twin: Vec<_> = ["2.9", "3.1", "3.4", "2.5"]
        .iter()
        .map(|s| response(&format!("<think>stutter</think><answer>{s}</answer>")))
        .collect();
    let partner_stats = GroupStats::from_scores([2.0, 2.4, 1.8, 2.2].map(Some))?;
    let partner = Partner {
        stats: &partner_stats,
        mos: 2.1,
    };

    let mos = 4.2;
    let mut rewards = score_group(&raw, mos, Some(partner), &hyper)?;
    let twin_rewards = score_group(&twin, mos, None, &hyper)?;
    let bonus = temporal_bonus(&rewards, &twin_rewards, &hyper);
    with_temporal_bonus(&mut rewards, bonus);

    println!("mos {mos}, partner mos {}", partner.mos);
    println!(
        "{:>6} {:>6} {:>6} {:>6} {:>6}  response",
        "fmt", "reg", "rank", "temp", "total"
    );
    for (r, resp) in rewards.iter().zip(&raw) {
        println!(
            "{:6.3} {:6.3} {:6.3} {:6.3} {:6.3}  {}",
            r.fmt, r.reg, r.rank, r.temp, r.total, resp.text
        );
    }
    Ok(())
}
