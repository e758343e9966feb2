use crowdgate_core::aggregation::{
    aggregate_label, difficulty_rank, label_entropy, tally_votes, worker_weight, DifficultyThresholds,
    DifficultyTier, Kernel, Tally, WeightScheme, WeightSchemeConfig,
};
use crowdgate_core::{EmotionLabel, LabelSet, ScoreSeriesStats};
use proptest::prelude::*;
use std::collections::BTreeMap;

/// Direct transcription of the weight formula, kept apart from the library.
fn reference_weight(scheme: WeightScheme, m: f64, sigma: f64, k: f64) -> f64 {
    let (a, b, c) = (0.3, 2.0, 2.0);
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let zeta = match scheme {
        WeightScheme::Equal => return 1.0,
        WeightScheme::W1 => 1.0,
        _ if k > 0.0 => 1.0,
        _ => 0.0,
    };
    let base = (m * m + a) / (1.0 + a) * (1.0 + zeta * k / b);
    let boost = -2.0 * (sigma - 1.0) * density(5.0 * (m - 0.8));
    let w = match scheme {
        WeightScheme::W3 => base * (1.0 - sigma / c) + boost,
        _ => base - 0.2 * sigma + boost,
    };
    w.max(0.0)
}

fn weight(scheme: WeightScheme, m: f64, sigma: f64, k: f64) -> f64 {
    worker_weight(&WeightSchemeConfig::new(scheme), &ScoreSeriesStats { m, sigma, k })
}

/// (scheme, m, sigma, k, full-precision value, value printed to 6 decimals)
const HAND_CASES: [(WeightScheme, f64, f64, f64, f64, f64); 4] = [
    (WeightScheme::W2, 0.8, 0.2, -0.1, 1.321_384_571_719_215_6, 1.321385),
    (WeightScheme::W1, 0.8, 0.2, -0.1, 1.285_230_725_565_369_4, 1.285231),
    (WeightScheme::W3, 0.8, 0.2, 0.0, 1.289_076_879_411_523_3, 1.289077),
    (WeightScheme::W2, 0.5, 0.3, 0.0, 0.544_401_557_009_171_4, 0.544402),
];

#[test]
fn hand_evaluated_weights() {
    for (scheme, m, sigma, k, exact, printed) in HAND_CASES {
        let got = weight(scheme, m, sigma, k);
        assert!((got - exact).abs() <= 1e-9, "{scheme:?}: {got} vs {exact}");
        assert!((got - reference_weight(scheme, m, sigma, k)).abs() <= 1e-12);
        assert_eq!(format!("{got:.6}"), format!("{printed:.6}"));
    }
}

#[test]
fn hand_evaluation_intermediates() {
    let f = Kernel::StandardNormalDensity;
    assert!((f.eval(0.0) - 0.398942).abs() < 5e-7);
    assert!((f.eval(-1.5) - 0.129518).abs() < 5e-7);
    assert!(((0.64 + 0.3) / 1.3 - 0.723077_f64).abs() < 5e-7);
    assert!(((0.25 + 0.3) / 1.3 - 0.423077_f64).abs() < 5e-7);
}

#[test]
fn equal_scheme_is_constant() {
    for (m, s, k) in [(0.0, 0.0, 0.0), (1.0, 1.0, -1.0), (0.3, 0.7, 0.5)] {
        assert_eq!(weight(WeightScheme::Equal, m, s, k), 1.0);
    }
}

#[test]
fn unnormalized_kernel_switch() {
    let config = WeightSchemeConfig { kernel: Kernel::UnnormalizedGaussian, ..WeightSchemeConfig::new(WeightScheme::W2) };
    let got = worker_weight(&config, &ScoreSeriesStats { m: 0.8, sigma: 0.2, k: 0.0 });
    assert!((got - (0.94 / 1.3 - 0.04 + 1.6)).abs() < 1e-12);
}

fn w2_grid(sigma: f64) -> Vec<f64> {
    (0..1000).map(|i| weight(WeightScheme::W2, i as f64 / 999.0, sigma, 0.0)).collect()
}

/// Strictly increasing once the clamp at zero releases.
fn increasing_where_positive(grid: &[f64]) -> bool {
    let first_positive = grid.iter().position(|w| *w > 0.0).unwrap_or(grid.len());
    grid[..first_positive].iter().all(|w| *w == 0.0) && grid[first_positive..].windows(2).all(|p| p[1] > p[0])
}

#[test]
fn w2_increasing_in_m_near_unit_sigma() {
    for sigma in [1.0, 1.02, 1.05, 1.08, 1.1] {
        assert!(increasing_where_positive(&w2_grid(sigma)), "sigma {sigma}");
    }
}

#[test]
fn w2_dips_for_sigma_one_and_a_half() {
    // boost slope 10(σ-1)·x·f(x) outruns 2m/1.3 around m ≈ 0.44
    let grid = w2_grid(1.5);
    assert!(!increasing_where_positive(&grid));
    let at = |m: f64| weight(WeightScheme::W2, m, 1.5, 0.0);
    assert!(at(0.45) < at(0.44) && at(0.44) > 0.0);
}

proptest! {
    #[test]
    fn matches_reference(m in 0.0..=1.0f64, sigma in 0.0..=1.0f64, k in -1.0..=1.0f64) {
        for scheme in WeightScheme::ALL {
            let got = weight(scheme, m, sigma, k);
            prop_assert!((got - reference_weight(scheme, m, sigma, k)).abs() <= 1e-12);
            prop_assert!(got >= 0.0);
        }
    }

    #[test]
    fn w2_dominates_w1(m in 0.0..=1.0f64, sigma in 0.0..=1.0f64, k in -1.0..=1.0f64) {
        let w1 = weight(WeightScheme::W1, m, sigma, k);
        let w2 = weight(WeightScheme::W2, m, sigma, k);
        if k > 0.0 {
            prop_assert_eq!(w1, w2);
        } else {
            prop_assert!(w2 >= w1);
        }
    }

    #[test]
    fn decision_is_scale_invariant(
        votes in prop::collection::vec((1u16..4095, 0.01..5.0f64), 1..12),
        lambda in 0.001..1000.0f64,
    ) {
        let votes: Vec<(LabelSet, f64)> = votes
            .into_iter()
            .map(|(mask, w)| {
                let labels = EmotionLabel::ALL[..11].iter().copied().filter(|e| mask & (1 << e.index()) != 0);
                let set = LabelSet::new(labels).unwrap_or(LabelSet::single(EmotionLabel::Na));
                (set, w)
            })
            .collect();
        let base = aggregate_label("x", &tally_votes(votes.clone()).unwrap()).unwrap();
        let scaled = aggregate_label("x", &tally_votes(votes.iter().map(|(l, w)| (*l, w * lambda))).unwrap()).unwrap();
        prop_assert_eq!(base.primary, scaled.primary);
        prop_assert_eq!(base.winners, scaled.winners);
        prop_assert!((base.entropy_bits - scaled.entropy_bits).abs() < 1e-9);
    }

    #[test]
    fn entropy_bounds(weights in prop::collection::vec(0.0..10.0f64, 12)) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let counts: Vec<(EmotionLabel, f64)> = EmotionLabel::ALL.iter().copied().zip(weights.iter().copied()).collect();
        let support = weights.iter().filter(|w| **w > 0.0).count() as f64;
        let h = label_entropy(&Tally::from_counts(&counts, 1.0)).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= support.log2() + 1e-12);
        prop_assert!(h <= 12f64.log2() + 1e-12);
    }
}

#[test]
fn equal_weights_reduce_to_plurality() {
    let labels = [EmotionLabel::Anger, EmotionLabel::Disappoint, EmotionLabel::Sorrow];
    // every multiset of size 1..=5 over three labels, as counts (a, d, s)
    for n in 1..=5usize {
        for a in 0..=n {
            for d in 0..=(n - a) {
                let s = n - a - d;
                let counts = [a, d, s];
                let votes: Vec<(LabelSet, f64)> = labels
                    .iter()
                    .zip(counts)
                    .flat_map(|(l, c)| std::iter::repeat_n((LabelSet::single(*l), 1.0), c))
                    .collect();
                let agg = aggregate_label("x", &tally_votes(votes).unwrap()).unwrap();
                let best = *counts.iter().max().unwrap();
                // plurality with ties to the alphabetically first code
                let mut leaders: Vec<EmotionLabel> =
                    labels.iter().zip(counts).filter(|(_, c)| *c == best).map(|(l, _)| *l).collect();
                leaders.sort_by_key(|l| l.code());
                assert_eq!(agg.primary, leaders[0], "counts {counts:?}");
                for (l, c) in labels.iter().zip(counts) {
                    let expected = c > 0 && (2 * c >= n || *l == leaders[0]);
                    assert_eq!(agg.winners.contains(*l), expected, "counts {counts:?} label {l}");
                }
            }
        }
    }
}

#[test]
fn tally_examples() {
    use EmotionLabel::*;
    let t = tally_votes([
        (LabelSet::single(Anger), 2.0),
        (LabelSet::single(Disappoint), 1.0),
        (LabelSet::single(Disappoint), 0.9),
    ])
    .unwrap();
    assert_eq!(t.get(Anger), 2.0);
    assert!((t.get(Disappoint) - 1.9).abs() < 1e-12);
    let t = tally_votes([(LabelSet::new([Anger, Disappoint]).unwrap(), 1.0)]).unwrap();
    assert_eq!((t.get(Anger), t.get(Disappoint)), (1.0, 1.0));
    assert!(tally_votes([(LabelSet::single(Anger), 0.0)]).is_err());

    let tie = aggregate_label("x", &Tally::from_counts(&[(Anger, 2.0), (Disappoint, 2.0)], 4.0)).unwrap();
    assert_eq!(tie.primary, Anger);
    assert_eq!(tie.winners, LabelSet::new([Anger, Disappoint]).unwrap());
    let split = aggregate_label("x", &Tally::from_counts(&[(Anger, 3.0), (Disappoint, 2.0)], 5.0)).unwrap();
    assert_eq!(split.winners, LabelSet::single(Anger));
}

#[test]
fn entropy_examples_and_ranking() {
    use EmotionLabel::*;
    let h = |counts: &[(EmotionLabel, f64)]| label_entropy(&Tally::from_counts(counts, 1.0)).unwrap();
    let spread = [(Anger, 3.0), (Disappoint, 1.0), (Sorrow, 1.0)];
    let expected = -(0.6 * 0.6f64.log2() + 2.0 * 0.2 * 0.2f64.log2());
    assert!((h(&spread) - expected).abs() < 1e-12);
    assert!((h(&spread) - 1.370951).abs() < 1e-6);
    assert_eq!(h(&[(Anger, 1.0), (Fear, 1.0), (Hope, 1.0), (Sarcasm, 1.0)]), 2.0);
    assert_eq!(h(&[(Hope, 5.0)]), 0.0);
    assert!((h(&[(Anger, 4.0), (Fear, 1.0)]) - 0.721928).abs() < 1e-6);

    let items: BTreeMap<&str, Vec<(EmotionLabel, f64)>> = BTreeMap::from([
        ("b_unanimous", vec![(Hope, 5.0)]),
        ("a_unanimous", vec![(Fear, 5.0)]),
        ("four_to_one", vec![(Anger, 4.0), (Fear, 1.0)]),
        ("uniform", vec![(Anger, 1.0), (Fear, 1.0), (Hope, 1.0), (Sarcasm, 1.0)]),
    ]);
    let labels: Vec<_> = items
        .iter()
        .map(|(id, c)| aggregate_label(id, &Tally::from_counts(c, c.iter().map(|x| x.1).sum())).unwrap())
        .collect();
    let ranked = difficulty_rank(&labels, &DifficultyThresholds::default());
    let order: Vec<&str> = ranked.iter().map(|r| r.item_id.as_str()).collect();
    assert_eq!(order, ["uniform", "four_to_one", "a_unanimous", "b_unanimous"]);
    let tiers: Vec<DifficultyTier> = ranked.iter().map(|r| r.tier).collect();
    assert_eq!(tiers, [DifficultyTier::Hard, DifficultyTier::Medium, DifficultyTier::Easy, DifficultyTier::Easy]);
}
