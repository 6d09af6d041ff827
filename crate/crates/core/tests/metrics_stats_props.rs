use proptest::prelude::*;
use slgb::metrics::{kappa, simplicity, utility, ConfusionMatrix, SimplicityParams};
use slgb::stats::{
    friedman_test, holm_correction, midranks, wilcoxon_signed_rank, wilcoxon_signed_rank_with, ScoreMatrix,
};

/// Exact and normal p-values agree within 0.01 from n = 17; at n = 15 and 16
/// the worst case over all rank sums is 0.01105 and 0.01036.
fn agreement_tolerance(n: usize) -> f64 {
    if n >= 17 {
        0.01
    } else {
        0.0111
    }
}

/// Kappa straight from the two label vectors.
fn direct_kappa(a: &[usize], p: &[usize], k: usize) -> f64 {
    let n = a.len() as f64;
    let po = a.iter().zip(p).filter(|(x, y)| x == y).count() as f64 / n;
    let pe: f64 = (0..k)
        .map(|c| {
            let ra = a.iter().filter(|&&x| x == c).count() as f64 / n;
            let rp = p.iter().filter(|&&x| x == c).count() as f64 / n;
            ra * rp
        })
        .sum();
    (po - pe) / (1.0 - pe)
}

fn labels(k: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec((0..k, 0..k), 2..80).prop_map(|v| v.into_iter().unzip())
}

fn k_of(cm: &[usize], p: &[usize], k: usize) -> f64 {
    kappa(&ConfusionMatrix::from_predictions(cm, p, k).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn kappa_matches_direct_formula((a, p) in labels(4)) {
        let distinct_a = a.iter().collect::<std::collections::BTreeSet<_>>().len();
        let distinct_p = p.iter().collect::<std::collections::BTreeSet<_>>().len();
        prop_assume!(distinct_a > 1 || distinct_p > 1);
        let got = k_of(&a, &p, 4);
        prop_assert!((got - direct_kappa(&a, &p, 4)).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&got));
    }

    #[test]
    fn kappa_of_self_is_one(a in prop::collection::vec(0usize..3, 2..60)) {
        prop_assume!(a.iter().any(|&x| x != a[0]));
        prop_assert!((k_of(&a, &a, 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_invariant_under_relabeling((a, p) in labels(3), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let ra: Vec<usize> = a.iter().map(|&c| perm[c]).collect();
        let rp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
        prop_assert!((k_of(&a, &p, 3) - k_of(&ra, &rp, 3)).abs() < 1e-12);
    }

    #[test]
    fn utility_monotone(
        k1 in -1.0..=1.0f64, dk in 0.0..=2.0f64,
        s1 in 0.0..=1.0f64, ds in 0.0..=1.0f64,
        alpha in 0.001..0.999f64,
    ) {
        let k2 = (k1 + dk).min(1.0);
        let s2 = (s1 + ds).min(1.0);
        let base = utility(k1, s1, alpha).unwrap();
        prop_assert!(utility(k2, s1, alpha).unwrap() >= base);
        prop_assert!(utility(k1, s2, alpha).unwrap() >= base);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    // Beyond lambda * eta of about 8 with small nu, values within 2^-53 of 1
    // round to exactly 1.0 in f64.
    #[test]
    fn simplicity_shape(lambda in 0.01..0.2f64, eta in 0.0..40.0f64, nu in 0.3..2.0f64) {
        let p = SimplicityParams { lambda, eta, nu };
        let mut prev = simplicity(0, &p);
        prop_assert!(prev > 0.0 && prev < 1.0);
        for r in 1..=300 {
            let s = simplicity(r, &p);
            prop_assert!(s > 0.0 && s < 1.0, "rules {}: {}", r, s);
            prop_assert!(s < prev, "rules {}: {} !< {}", r, s, prev);
            prev = s;
        }
    }

    #[test]
    fn friedman_rank_based(
        rows in prop::collection::vec(prop::collection::vec(0u8..6, 4), 3..12),
        transforms in prop::collection::vec((0.1..5.0f64, -3.0..3.0f64, any::<bool>()), 12),
    ) {
        let scores: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64 / 5.0).collect()).collect();
        let changed: Vec<Vec<f64>> = scores
            .iter()
            .zip(&transforms)
            .map(|(r, &(a, b, e))| r.iter().map(|&v| if e { v.exp() * a } else { a * v * v * v + b }).collect())
            .collect();
        let names = |n: usize, p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let m1 = ScoreMatrix::new(names(scores.len(), "d"), names(4, "c"), scores.clone()).unwrap();
        let m2 = ScoreMatrix::new(names(scores.len(), "d"), names(4, "c"), changed).unwrap();
        let (f1, f2) = (friedman_test(&m1), friedman_test(&m2));
        prop_assert!((f1.statistic - f2.statistic).abs() < 1e-9);
        prop_assert!((f1.p_value - f2.p_value).abs() < 1e-9);
        prop_assert_eq!(f1.average_ranks, f2.average_ranks);
    }

    #[test]
    fn friedman_matches_textbook_without_ties(rows in prop::collection::vec(Just(vec![0.0, 1.0, 2.0, 3.0, 4.0]).prop_shuffle(), 2..15)) {
        let n = rows.len() as f64;
        let k = 5.0;
        let mut mean_rank = [0.0; 5];
        for r in &rows {
            for (j, v) in r.iter().enumerate() {
                // Highest score gets rank 1.
                mean_rank[j] += (5.0 - v) / n;
            }
        }
        let expected = 12.0 * n / (k * (k + 1.0)) * mean_rank.iter().map(|r| (r - (k + 1.0) / 2.0).powi(2)).sum::<f64>();
        let names = |c: usize, p: &str| (0..c).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let m = ScoreMatrix::new(names(rows.len(), "d"), names(5, "c"), rows.clone()).unwrap();
        let f = friedman_test(&m);
        prop_assert!((f.statistic - expected).abs() < 1e-9, "{} vs {}", f.statistic, expected);
        for (a, b) in f.average_ranks.iter().zip(mean_rank) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wilcoxon_rank_sums(pairs in prop::collection::vec((0u8..8, 0u8..8), 5..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().map(|&(x, y)| (x as f64, y as f64)).unzip();
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        let n = w.n as f64;
        prop_assert!((w.r_plus + w.r_minus - n * (n + 1.0) / 2.0).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&w.p_value));
        let swapped = wilcoxon_signed_rank(&b, &a).unwrap();
        prop_assert_eq!(swapped.r_plus, w.r_minus);
        prop_assert!((swapped.p_value - w.p_value).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration(d in prop::collection::vec(prop_oneof![-6i32..=-1, 1i32..=6], 5..=12)) {
        let a: Vec<f64> = d.iter().map(|&x| x as f64).collect();
        let b = vec![0.0; d.len()];
        let w = wilcoxon_signed_rank(&a, &b).unwrap();
        prop_assert!(w.exact);
        let ranks = midranks(&a.iter().map(|x| x.abs()).collect::<Vec<_>>());
        let observed: f64 = ranks.iter().zip(&a).filter(|(_, &x)| x > 0.0).map(|(r, _)| r).sum();
        let total = 1u32 << d.len();
        let (mut le, mut ge) = (0u32, 0u32);
        for mask in 0..total {
            let s: f64 = (0..d.len()).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= observed + 1e-9 { le += 1; }
            if s >= observed - 1e-9 { ge += 1; }
        }
        let expected = (2.0 * le.min(ge) as f64 / total as f64).min(1.0);
        prop_assert!((w.p_value - expected).abs() < 1e-12, "{} vs {}", w.p_value, expected);
    }

    #[test]
    fn wilcoxon_exact_and_normal_agree(
        pairs in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 15..=20)
    ) {
        prop_assume!(pairs.iter().all(|(x, y)| x != y));
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let exact = wilcoxon_signed_rank_with(&a, &b, 20).unwrap();
        let normal = wilcoxon_signed_rank_with(&a, &b, 0).unwrap();
        prop_assert!(exact.exact && !normal.exact);
        let tol = agreement_tolerance(a.len());
        prop_assert!((exact.p_value - normal.p_value).abs() <= tol, "{} vs {}", exact.p_value, normal.p_value);
    }

    #[test]
    fn holm_bounds_and_step_down(p in prop::collection::vec(0.0..=1.0f64, 1..12)) {
        let h = holm_correction(&p).unwrap();
        let m = p.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| p[x].partial_cmp(&p[y]).unwrap());
        for (i, &raw) in p.iter().enumerate() {
            prop_assert!(h.adjusted[i] >= raw && h.adjusted[i] <= 1.0);
            let pos = order.iter().position(|&o| o == i).unwrap();
            let expected = order[..=pos]
                .iter()
                .enumerate()
                .map(|(j, &o)| ((m - j) as f64 * p[o]).min(1.0))
                .fold(0.0f64, f64::max);
            // Equal raw values may sit in either order; their adjusted values still agree.
            let tied_max = order
                .iter()
                .enumerate()
                .filter(|(_, &o)| p[o] == raw)
                .map(|(j, _)| {
                    order[..=j].iter().enumerate().map(|(jj, &o)| ((m - jj) as f64 * p[o]).min(1.0)).fold(0.0f64, f64::max)
                })
                .fold(expected, f64::max);
            prop_assert!(h.adjusted[i] >= expected - 1e-15 && h.adjusted[i] <= tied_max + 1e-15);
            prop_assert_eq!(h.rejected[i], h.adjusted[i] <= 0.05);
        }
    }
}

#[test]
fn simplicity_stays_positive_for_large_models() {
    let p = SimplicityParams::default();
    let mut prev = simplicity(300, &p);
    for r in (400..=3000).step_by(100) {
        let s = simplicity(r, &p);
        assert!(s > 0.0 && s < prev, "rules {r}: {s}");
        prev = s;
    }
}

#[test]
fn wilcoxon_exact_and_normal_agree_on_every_rank_sum() {
    for n in 15..=20usize {
        let total = n * (n + 1) / 2;
        let mut worst = 0.0f64;
        // Ranks 1..=n with a greedy subset summing to `target` made positive.
        for target in 0..=total {
            let mut signs = vec![-1.0; n];
            let mut rest = target;
            for r in (1..=n).rev() {
                if r <= rest {
                    signs[r - 1] = 1.0;
                    rest -= r;
                }
            }
            assert_eq!(rest, 0);
            let a: Vec<f64> = (1..=n).map(|r| signs[r - 1] * r as f64).collect();
            let b = vec![0.0; n];
            let exact = wilcoxon_signed_rank_with(&a, &b, 20).unwrap();
            let normal = wilcoxon_signed_rank_with(&a, &b, 0).unwrap();
            assert_eq!(exact.r_plus, target as f64);
            worst = worst.max((exact.p_value - normal.p_value).abs());
        }
        assert!(worst <= agreement_tolerance(n), "n = {n}: worst gap {worst}");
    }
}
