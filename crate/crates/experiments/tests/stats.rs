use hesitator_experiments::stats::{average_ranks, StatsError, WilcoxonMethod};
use hesitator_experiments::{success_rate, wilcoxon_signed_rank};
use proptest::prelude::*;

fn diffs(d: &[f64]) -> Vec<(f64, f64)> {
    d.iter().map(|&x| (x, 0.0)).collect()
}

#[test]
fn success_rate_examples() {
    let mut v = vec![false; 10];
    v[..4].fill(true);
    assert_eq!(success_rate(&v).unwrap(), 0.4);
    assert_eq!(success_rate(&[false; 7]).unwrap(), 0.0);
    let mut w = vec![false; 40];
    w[..27].fill(true);
    assert_eq!(success_rate(&w).unwrap(), 0.675);
    assert_eq!(success_rate(&[]), Err(StatsError::Empty));
}

proptest! {
    #[test]
    fn success_rate_ignores_order(mut v in prop::collection::vec(any::<bool>(), 1..100), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let a = success_rate(&v).unwrap();
        v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, success_rate(&v).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
    }
}

#[test]
fn wilcoxon_examples() {
    let w = wilcoxon_signed_rank(&diffs(&[1.0, 2.0, 3.0])).unwrap();
    assert_eq!(w.statistic, 6.0);
    assert_eq!(w.method, WilcoxonMethod::Exact);
    assert!((w.p_value - 0.25).abs() < 1e-15);
    assert_eq!(wilcoxon_signed_rank(&diffs(&[1.0, -1.0])).unwrap().p_value, 1.0);
    assert_eq!(wilcoxon_signed_rank(&diffs(&[2.0, -2.0, 2.0, -2.0])).unwrap().p_value, 1.0);
    assert_eq!(wilcoxon_signed_rank(&[(1.0, 1.0), (0.0, 0.0)]), Err(StatsError::Degenerate));
    assert_eq!(wilcoxon_signed_rank(&[]), Err(StatsError::Empty));
    let one = wilcoxon_signed_rank(&[(1.0, 0.0)]).unwrap();
    assert_eq!((one.n, one.p_value), (1, 1.0));
}

#[test]
fn zero_differences_are_dropped() {
    let a = wilcoxon_signed_rank(&[(1.0, 0.0), (2.0, 0.0), (5.0, 5.0), (3.0, 0.0)]).unwrap();
    assert_eq!(a.n, 3);
    assert!((a.p_value - 0.25).abs() < 1e-15);
}

#[test]
fn average_ranks_share_ties() {
    assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
}

#[test]
fn normal_approximation_on_binary_pairs() {
    // 40 sessions: 30 (1,0) pairs and 10 (0,1) pairs; all |d| = 1 share rank 20.5.
    let mut pairs = vec![(1.0, 0.0); 30];
    pairs.extend(vec![(0.0, 1.0); 10]);
    let w = wilcoxon_signed_rank(&pairs).unwrap();
    assert_eq!(w.method, WilcoxonMethod::Normal);
    assert_eq!(w.statistic, 30.0 * 20.5);
    let n = 40.0f64;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - (n * n * n - n) / 48.0;
    let z = ((w.statistic - n * (n + 1.0) / 4.0).abs() - 0.5) / var.sqrt();
    // Equal magnitudes reduce the test to a sign test: z = (|30 - 20| * 20.5 - 0.5) / (20.5 * sqrt(10)).
    assert!((z - (10.0 * 20.5 - 0.5) / (20.5 * 10f64.sqrt())).abs() < 1e-12);
    let p = 2.0 * 0.5 * statrs_free_erfc(z / std::f64::consts::SQRT_2);
    assert!((w.p_value - p).abs() < 1e-6, "{} vs {p}", w.p_value);
}

/// Complementary error function by numerical integration of exp(-t^2).
fn statrs_free_erfc(x: f64) -> f64 {
    let steps = 200_000;
    let upper = x + 10.0;
    let h = (upper - x) / steps as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(x) + f(upper);
    for i in 1..steps {
        let t = x + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

#[test]
fn exact_and_normal_agree_near_the_switch() {
    let d: Vec<f64> = (1..=25).map(|i| if i % 5 == 0 { -(i as f64) } else { i as f64 }).collect();
    let exact = wilcoxon_signed_rank(&diffs(&d)).unwrap();
    let mut d26 = d.clone();
    d26.push(26.0);
    let normal = wilcoxon_signed_rank(&diffs(&d26)).unwrap();
    assert_eq!(exact.method, WilcoxonMethod::Exact);
    assert_eq!(normal.method, WilcoxonMethod::Normal);
    assert!(exact.p_value > 0.0 && exact.p_value < 0.05);
    assert!(normal.p_value > 0.0 && normal.p_value < 0.05);
}
