use proptest::prelude::*;

use vqa_grpo::rewards::{
    format_reward, normal_cdf, parse_score, ranking_reward, regression_reward, score_group,
    temporal_bonus, GroupStats, Partner,
};
use vqa_grpo::{HyperParams, QualityResponse};

fn response(text: String) -> QualityResponse {
    QualityResponse {
        parsed_score: parse_score(&text),
        text,
        raw_draw: 0.0,
        log_prob_current: 0.0,
        log_prob_old: 0.0,
    }
}

fn well_formed(score: f64) -> String {
    format!("<think>sharp, little noise</think><answer>{score:.2}</answer>")
}

proptest! {
    #[test]
    fn regression_is_bounded_symmetric_and_peaked(
        g in 1.0f64..5.0, e in 0.0f64..4.0, alpha in 0.01f64..1.0, sigma in 0.05f64..2.0,
    ) {
        let up = regression_reward(g + e, g, alpha, sigma).unwrap();
        let down = regression_reward(g - e, g, alpha, sigma).unwrap();
        prop_assert!((up - down).abs() < 1e-12);
        prop_assert!(up >= 0.0 && up <= alpha);
        prop_assert!(regression_reward(g, g, alpha, sigma).unwrap() >= up);
    }

    #[test]
    fn regression_decreases_with_error(g in 1.0f64..5.0, a in 0.0f64..4.0, b in 0.0f64..4.0) {
        prop_assume!((a - b).abs() > 1e-6);
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        let r_near = regression_reward(g + near, g, 0.8, 0.5).unwrap();
        let r_far = regression_reward(g + far, g, 0.8, 0.5).unwrap();
        prop_assert!(r_near >= r_far);
    }

    #[test]
    fn ranking_reward_stays_in_range(p in 0.0f64..=1.0, a in 1.0f64..5.0, b in 1.0f64..5.0) {
        let eps = 1e-8;
        let r = ranking_reward(p, a, b, eps);
        prop_assert!(r >= eps.sqrt() - 1e-15);
        prop_assert!(r <= (1.0 + eps).sqrt() + eps.sqrt() + 1e-12);
    }

    #[test]
    fn ranking_rewards_correct_preference(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        // When self is better, a more confident p earns more.
        prop_assume!((p - q).abs() > 1e-9);
        let (lo, hi) = if p < q { (p, q) } else { (q, p) };
        prop_assert!(ranking_reward(hi, 4.0, 2.0, 1e-8) > ranking_reward(lo, 4.0, 2.0, 1e-8));
        prop_assert!(ranking_reward(lo, 2.0, 4.0, 1e-8) > ranking_reward(hi, 2.0, 4.0, 1e-8));
    }

    #[test]
    fn ranking_reward_is_symmetric_under_swap(p in 0.0f64..=1.0, a in 1.0f64..5.0, b in 1.0f64..5.0) {
        prop_assume!(a != b);
        let r = ranking_reward(p, a, b, 1e-8);
        prop_assert!((r - ranking_reward(1.0 - p, b, a, 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_is_monotone_and_symmetric(x in -8.0f64..8.0, dx in 1e-3f64..1.0) {
        prop_assert!(normal_cdf(x + dx) > normal_cdf(x));
        prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rendered_answers_round_trip(score in -10.0f64..10.0) {
        let text = well_formed(score);
        prop_assert_eq!(format_reward(&text), 1.0);
        let parsed = parse_score(&text).unwrap();
        prop_assert!((parsed - score).abs() <= 0.005 + 1e-12);
    }

    #[test]
    fn breaking_a_tag_voids_the_format(score in 1.0f64..5.0, cut in 0usize..4) {
        let text = well_formed(score);
        let tag = ["<think>", "</think>", "<answer>", "</answer>"][cut];
        prop_assert_eq!(format_reward(&text.replacen(tag, "", 1)), 0.0);
    }

    #[test]
    fn group_rewards_sum_their_parts(
        scores in prop::collection::vec(1.0f64..5.0, 4),
        other in prop::collection::vec(1.0f64..5.0, 4),
        mos in 1.0f64..5.0,
        other_mos in 1.0f64..5.0,
    ) {
        let hyper = HyperParams::default();
        let group: Vec<_> = scores.iter().map(|&s| response(well_formed(s))).collect();
        let stats = GroupStats::from_scores(other.iter().map(|&s| Some(s))).unwrap();
        let partner = Partner { stats: &stats, mos: other_mos };
        let rewards = score_group(&group, mos, Some(partner), &hyper).unwrap();
        for r in &rewards {
            prop_assert_eq!(r.fmt, 1.0);
            prop_assert_eq!(r.temp, 0.0);
            prop_assert_eq!(r.total, r.fmt + r.reg + r.rank + r.temp);
        }
    }

    #[test]
    fn temporal_bonus_is_zero_or_a_multiple_of_delta(
        scores in prop::collection::vec(1.0f64..5.0, 4),
        twin in prop::collection::vec(1.0f64..5.0, 4),
        mos in 1.0f64..5.0,
    ) {
        let hyper = HyperParams::default();
        let raw = score_group(
            &scores.iter().map(|&s| response(well_formed(s))).collect::<Vec<_>>(),
            mos, None, &hyper,
        ).unwrap();
        let pert = score_group(
            &twin.iter().map(|&s| response(well_formed(s))).collect::<Vec<_>>(),
            mos, None, &hyper,
        ).unwrap();
        let bonus = temporal_bonus(&raw, &pert, &hyper);
        let steps = bonus / hyper.delta_temp;
        prop_assert!([0.0, 1.0, 2.0].iter().any(|k| (steps - k).abs() < 1e-12), "{bonus}");
    }
}

#[test]
fn unparseable_responses_earn_nothing_but_do_not_fail() {
    let hyper = HyperParams::default();
    let group: Vec<_> = [
        "no tags at all",
        "<answer>abc</answer>",
        "",
        "<think>x</think>",
    ]
    .iter()
    .map(|t| response(t.to_string()))
    .collect();
    let rewards = score_group(&group, 3.0, None, &hyper).unwrap();
    assert!(rewards.iter().all(|r| r.total == 0.0));
}
