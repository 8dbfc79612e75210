use lrp_core::estimators::medians::discrete_query_box;
use lrp_core::estimators::{
    count_hop_classes, count_hop_classes_naive, count_self_avoiding, count_self_avoiding_naive,
    coupled_discrete, diameter_tail, estimate_medians, fit_theta, hop_count_mc, path_count_mc,
    scaling_ks_test, theta_monotonicity, MedianTable, ModelKind,
};
use lrp_core::metric::{bfs_distance, oracle_instance, LatticeAdjacency};
use lrp_core::sampler::sample_discrete;
use lrp_core::{derive_stream, LatticeBox, LatticeGraph, ModelParams, Point};

#[test]
fn path_counts_match_naive_enumerator() {
    let mut checked = 0;
    for seed in 0..200u64 {
        let d = 1 + (seed % 2) as usize;
        let b = if d == 1 { LatticeBox::cube(1, -6, 6) } else { LatticeBox::cube(2, -2, 2) }.unwrap();
        let params = ModelParams::discrete(d, 0.3 + (seed % 5) as f64 * 0.2, seed).unwrap();
        let g = sample_discrete(&params, &b, &derive_stream(seed, "naive-paths")).unwrap();
        if g.long_edges.len() > 10 {
            continue;
        }
        let start = vec![0i64; d];
        let m_max = if d == 1 { 6 } else { 5 };
        let adj = LatticeAdjacency::new(&g);
        let fast = count_self_avoiding(&adj, b.index(&start).unwrap(), m_max).unwrap();
        assert_eq!(fast, count_self_avoiding_naive(&g, &start, m_max), "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 100, "only {checked} instances");
}

#[test]
fn hop_classes_match_naive_enumerator() {
    for seed in 0..100u64 {
        let d = 1 + (seed % 2) as usize;
        let (mut cfg, x, _) = oracle_instance(d, seed).unwrap();
        cfg.edges.truncate(10);
        for budget in [0.5, 1.5, 3.0] {
            let fast = count_hop_classes(&cfg, &x, budget).unwrap();
            let naive = count_hop_classes_naive(&cfg, &x, budget);
            assert_eq!(fast, naive, "seed {seed}, budget {budget}");
        }
    }
}

#[test]
fn stripped_edges_give_taxicab_medians() {
    for d in 1..=3usize {
        for n in [1u64, 4, 16, 33] {
            let b = discrete_query_box(d, n).unwrap();
            let g = LatticeGraph::without_long_edges(b, ModelParams::discrete(d, 1.0, 0).unwrap());
            let f = bfs_distance(&g, &vec![0; d]).unwrap();
            let idx = g.lattice_box.index(&vec![n as i64; d]).unwrap();
            assert_eq!(f.values[idx], (n as usize * d) as f64);
        }
    }
}

#[test]
fn discrete_medians_reproducible_and_nondecreasing() {
    let params = ModelParams::discrete(1, 1.0, 11).unwrap();
    let ns = [4u64, 8, 16, 32, 64, 128];
    let a = estimate_medians(&params, &ns, 100, ModelKind::Discrete).unwrap();
    let b = estimate_medians(&params, &ns, 100, ModelKind::Discrete).unwrap();
    assert_eq!(a, b);
    assert!(a.is_nondecreasing(), "{:?}", a.medians);
    assert!(a.medians.iter().zip(&ns).all(|(m, n)| *m >= 1.0 && *m <= *n as f64));
    let other = estimate_medians(&ModelParams::discrete(1, 1.0, 12).unwrap(), &ns, 100, ModelKind::Discrete).unwrap();
    assert_ne!(a.samples, other.samples);
}

#[test]
fn continuous_medians_reproducible_and_nondecreasing() {
    let params = ModelParams::new(1, 1.0, 1.0, f64::INFINITY, 3).unwrap();
    let ns = [2u64, 4, 8, 16, 32];
    let a = estimate_medians(&params, &ns, 100, ModelKind::Continuous).unwrap();
    assert_eq!(a, estimate_medians(&params, &ns, 100, ModelKind::Continuous).unwrap());
    // stored medians are d_(1/n, ∞)(0, 1); rescaled they are n-scale distances
    let scaled: Vec<f64> = a.medians.iter().zip(&ns).map(|(m, n)| m * *n as f64).collect();
    assert!(scaled.windows(2).all(|w| w[0] <= w[1]), "{scaled:?}");
    assert!(a.medians.iter().all(|m| *m > 0.0 && *m <= 1.0));
}

#[test]
fn exact_power_laws_fit_exactly() {
    let ns: Vec<u64> = (3..=10).map(|k| 1u64 << k).collect();
    for c in [1.0, 3.7] {
        let meds = ns.iter().map(|&n| c * (n as f64).powf(0.7)).collect();
        let t = MedianTable::from_medians(ModelKind::Discrete, 1, 1.0, ns.clone(), meds);
        let fit = fit_theta(&t, 0, 0).unwrap();
        assert!((fit.theta_hat - 0.7).abs() < 1e-12);
        assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }
}

#[test]
fn coupled_tables_respect_superposition() {
    let betas = [0.2, 1.0, 4.0];
    let ns = [8u64, 16, 32, 64];
    let (tables, violations) = coupled_discrete(1, &betas, &ns, 50, 5).unwrap();
    assert_eq!(violations, 0);
    for w in tables.windows(2) {
        for (lo, hi) in w[0].samples.iter().zip(&w[1].samples) {
            assert!(lo.iter().zip(hi).all(|(a, b)| b <= a));
        }
    }
}

#[test]
fn equal_betas_give_identical_estimates() {
    let ns = [8u64, 16, 32, 64];
    let a = theta_monotonicity(1, &[0.5, 2.0], &ns, 100, 200, 9).unwrap();
    let b = theta_monotonicity(1, &[0.5, 2.0], &ns, 100, 200, 9).unwrap();
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.verdicts, b.verdicts);
    assert_eq!(a.coupled_violations, 0);
    assert!(theta_monotonicity(1, &[1.0, 1.0], &ns, 100, 200, 9).is_err());
}

#[test]
fn path_count_recursion_bound() {
    let params = ModelParams::discrete(1, 1.0, 2).unwrap();
    let r = path_count_mc(&params, 6, 200, 40).unwrap();
    assert_eq!(r.mean_counts[0], 1.0);
    assert!(r.recursion_holds, "{:?}", r.recursion_excess);
    assert!(r.branching_constant > 2.0);
    assert!(path_count_mc(&params, 6, 10, 4).is_err());
}

#[test]
fn bare_lattice_has_one_plus_two_d_short_paths() {
    let g = LatticeGraph::without_long_edges(
        LatticeBox::cube(2, -3, 3).unwrap(),
        ModelParams::discrete(2, 1.0, 0).unwrap(),
    );
    let adj = LatticeAdjacency::new(&g);
    let c = count_self_avoiding(&adj, g.lattice_box.index(&[0, 0]).unwrap(), 1).unwrap();
    assert_eq!(c.iter().sum::<u64>(), 5);
}

#[test]
fn hop_class_bound_holds() {
    for d in 1..=2usize {
        let params = ModelParams::new(d, 0.5, 1.0, f64::INFINITY, 4).unwrap();
        let r = hop_count_mc(&params, 2.0, 300, 12.0, &[]).unwrap();
        assert!(r.bound_holds, "{r:?}");
        assert!(r.mean_classes >= 1.0);
    }
}

#[test]
fn unreachable_edges_leave_one_class() {
    let (cfg, _, _) = oracle_instance(2, 1).unwrap();
    let far = Point::new(vec![-1e3, -1e3]).unwrap();
    assert_eq!(count_hop_classes(&cfg, &far, 1.0).unwrap(), vec![1]);
}

#[test]
fn scaling_law_holds_and_test_has_power() {
    let params = ModelParams::new(1, 1.0, 1.0, f64::INFINITY, 21).unwrap();
    let good = scaling_ks_test(&params, 8.0, 500, 1.0).unwrap();
    assert!(good.ks.p_value > 0.01, "{:?}", good.ks);
    let bad = scaling_ks_test(&params, 8.0, 500, 0.5).unwrap();
    assert!(bad.ks.p_value < 0.001, "{:?}", bad.ks);
}

#[test]
fn over_normalized_tails_decrease() {
    let params = ModelParams::discrete(1, 1.0, 6).unwrap();
    let ns = [16u64, 32, 64, 128];
    let r = diameter_tail(&params, &ns, 100, 1.0, 0.95).unwrap();
    assert_eq!(r.lower_bound_violations, 0);
    assert!(r.mgf.iter().all(|v| v.is_finite()));
    assert!(r.mgf.windows(2).all(|w| w[1] < w[0]), "{:?}", r.mgf);
}
