mod common;

use proptest::prelude::*;

use pcosync::bounds::*;
use pcosync::graph::*;
use pcosync::prc::*;
use pcosync::sim::*;

fn edges_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs = prop::collection::vec((0..n, 0..n), 0..=n * n);
        (Just(n), pairs)
    })
}

fn build(n: usize, pairs: &[(usize, usize)]) -> Graph {
    let mut seen = std::collections::BTreeSet::new();
    let edges = pairs
        .iter()
        .filter(|(a, b)| a != b && seen.insert((*a, *b)))
        .map(|&(a, b)| Edge::new(a, b))
        .collect();
    Graph::from_edges(n, edges).unwrap()
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, dim)
}

fn sf(b: f64, tau: f64) -> ModelParams {
    let p = PrcParams { b, tau, ..PrcParams::default() };
    ModelParams::new(tau, Prc::strong_firing(p)).unwrap()
}

/// Valid `(B, tau)` with a nonempty collapse window.
fn b_tau() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.2f64, 0.0..1.0f64).prop_map(|(tau, u)| {
        // B in (tau, 1) with s = max(B, 1 - B + 2 tau) < 1
        let lo = 2.0 * tau + 1e-3;
        let hi = 1.0 - 1e-3;
        (lo + (hi - lo) * u, tau)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn torus_metric_axioms(a in point(3), b in point(3), c in point(3)) {
        let ab = torus_distance(&a, &b);
        prop_assert!(ab >= 0.0 && ab <= 3f64.sqrt() / 2.0 + 1e-12);
        prop_assert!((ab - torus_distance(&b, &a)).abs() < 1e-15);
        prop_assert!(torus_distance(&a, &a) == 0.0);
        prop_assert!(ab <= torus_distance(&a, &c) + torus_distance(&c, &b) + 1e-12);
    }

    #[test]
    fn torus_translation_invariance(a in point(2), b in point(2), shift in point(2)) {
        let wrap = |p: &[f64]| p.iter().zip(&shift).map(|(x, s)| (x + s).rem_euclid(1.0)).collect::<Vec<_>>();
        let d0 = torus_distance(&a, &b);
        let d1 = torus_distance(&wrap(&a), &wrap(&b));
        prop_assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn structure_matches_matrix_powers((n, pairs) in edges_strategy(6)) {
        let g = build(n, &pairs);
        let r = validate_structure(&g);
        let (strong, period) = common::brute_structure(&g);
        prop_assert_eq!(r.strongly_connected, strong);
        prop_assert_eq!(r.period, period);
        prop_assert_eq!(r.aperiodic, period == Some(1));
    }

    #[test]
    fn edge_list_roundtrip((n, pairs) in edges_strategy(8)) {
        let g = build(n, &pairs);
        let text = g.to_edge_list();
        let back = parse_edge_list(&text).unwrap();
        prop_assert_eq!(back.node_count(), g.node_count());
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(back.to_edge_list(), text);
    }

    #[test]
    fn rgg_is_deterministic_and_symmetric(n in 1..40usize, r in 0.05..0.8f64, seed in any::<u64>()) {
        let spec = RggSpec::new(n, 2, r);
        let a = generate_rgg(&spec, seed).unwrap();
        let b = generate_rgg(&spec, seed).unwrap();
        prop_assert_eq!(a.edges(), b.edges());
        let pos = a.positions().unwrap();
        for i in 0..n {
            for j in 0..n {
                let close = i != j && torus_distance(&pos[i], &pos[j]) <= r;
                prop_assert_eq!(a.edge_id(i, j).is_some(), close);
            }
        }
    }

    #[test]
    fn responses_keep_phase_in_unit_interval(x in 0.0..=1.0f64, h in 1..6u32, m in 1..6u32, (b, tau) in b_tau()) {
        let p = PrcParams { b, tau, ..PrcParams::default() };
        let curves = [
            Prc::strong_firing(p),
            Prc::synthetic_stii(h, m, 0.01, p).unwrap(),
            Prc::charging(ChargingCurve::default(), p).unwrap(),
        ];
        for c in &curves {
            let next = (x + c.response(x)).max(0.0);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&next), "{} at {x}: {next}", c.name());
        }
    }

    #[test]
    fn wide_weight_wrap_is_identity(x in 0.0..=1.0f64, h in 1..5u32, m in 1..5u32) {
        let p = PrcParams::default();
        let base = Prc::synthetic_stii(h, m, 0.01, p).unwrap();
        let w = weighted_wrap(&base, 2.0, p).unwrap();
        prop_assert_eq!(w.response(x), base.response(x));
    }

    #[test]
    fn synthetic_classification_is_exact(h in 1..6u32, m in 1..6u32) {
        let p = PrcParams::default();
        let c = classify_stii_with_grid(&Prc::synthetic_stii(h, m, 0.01, p).unwrap(), &p, 8, 8, 2000).unwrap();
        prop_assert_eq!((c.class.h, c.class.m, c.class.k), (h, m, h + m - 1));
    }

    #[test]
    fn spread_is_rotation_invariant(ph in prop::collection::vec(0.0..1.0f64, 1..20), c in 0.0..1.0f64) {
        let rotated: Vec<f64> = ph.iter().map(|x| (x + c).rem_euclid(1.0)).collect();
        let a = circular_spread(&ph).unwrap();
        let b = circular_spread(&rotated).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        prop_assert!((0.0..1.0).contains(&a));
    }

    #[test]
    fn weierstrass_product_dominates_union(degrees in prop::collection::vec(0..60usize, 1..80), s in 0.5..0.99f64) {
        let r = sf_degree_bounds(&degrees, s).unwrap();
        prop_assert!(r.product >= r.union - 1e-12);
        prop_assert!(r.product >= r.union_clamped - 1e-12);
    }

    #[test]
    fn delta_n_degree_reaches_target(p in 0.5..0.999f64, s in 0.5..0.95f64, n in 1..2000usize) {
        let d = delta_n(p, s, n).unwrap().ceil().max(0.0) as usize;
        let r = sf_degree_bounds(&vec![d; n], s).unwrap();
        prop_assert!(r.union >= p - 1e-9, "d = {d}, union = {}", r.union);
        let (a, b) = delta_n_coefficients(p, s).unwrap();
        prop_assert!((a + b * (n as f64).ln() - delta_n(p, s, n).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn hoeffding_dominates_exact_tail(d in 1..200u32, k in 1..=10u32, tenths in 1..=9u32) {
        let q = tenths as f64 / 10.0;
        prop_assume!(q * d as f64 >= (k + 1) as f64);
        let tail = common::binomial_lower_tail(d, k, tenths, 10);
        let bound = stii_node_failure_bound(d as usize, q, k);
        prop_assert!(tail <= bound * (1.0 + 1e-12), "d={d} k={k} q={q}: {tail} > {bound}");
    }

    #[test]
    fn degree_requirement_meets_target(k in 1..=8u32, n in 2..2000usize, tenths in 2..=8u32) {
        let p = 0.95;
        let q = tenths as f64 / 10.0;
        let need = stii_degree_requirement(k, n, p).unwrap();
        let d = (need / q).ceil() as u32;
        let tail = common::binomial_lower_tail(d, k, tenths, 10);
        prop_assert!(n as f64 * tail <= (1.0 - p) * (1.0 + 1e-9), "k={k} n={n} q={q} d={d}");
    }

    #[test]
    fn stii_bound_monotone_in_k(d in 1..300usize, q in 0.05..0.5f64, k in 1..10u32) {
        prop_assert!(stii_node_bound(d, q, k) >= stii_node_bound(d, q, k + 1));
        prop_assert!(stii_node_bound(d + 1, q, k) >= stii_node_bound(d, q, k) - 1e-15);
    }

    #[test]
    fn rgg_threshold_matches_oracle(s in 0.505..0.99f64) {
        let c = rgg_c_threshold(s).unwrap();
        prop_assert!(rgg_threshold_residual(c, s).abs() < 1e-10);
        let oracle = common::rgg_threshold_bisect(s);
        prop_assert!((c - oracle).abs() < 1e-8, "{c} vs {oracle}");
        prop_assert!((c - common::rgg_threshold_lambert(s)).abs() < 1e-8);
    }
}

fn random_graph(n: usize, seed: u64, kind: u8) -> Graph {
    match kind {
        0 => generate_er(n, 0.3, seed).unwrap(),
        _ => generate_rgg(&RggSpec::new(n, 2, 0.4), seed).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simulation_is_deterministic_and_causal(
        n in 2..12usize, seed in any::<u64>(), kind in 0..2u8, (b, tau) in b_tau(),
        ph in prop::collection::vec(0.0..1.0f64, 12),
    ) {
        let g = random_graph(n, seed, kind);
        let params = sf(b, tau);
        let run = || {
            let mut sim = Simulation::new(&g, &params, &ph[..n]).unwrap();
            sim.enable_log();
            sim.advance_to(3.0).unwrap();
            (sim.take_log().unwrap(), sim.phases())
        };
        let (log, phases) = run();
        let (log2, phases2) = run();
        prop_assert_eq!(&log, &log2);
        prop_assert_eq!(&phases, &phases2);
        prop_assert!(phases.iter().all(|p| (0.0..=1.0).contains(p)));
        for e in log.iter().filter(|e| e.kind != LogKind::Fire) {
            let src = e.src.unwrap();
            let fired = log.iter().any(|f| f.kind == LogKind::Fire && f.node == src && (f.t + tau - e.t).abs() < 1e-12);
            prop_assert!(fired, "arrival at {} from {src} has no firing", e.t);
            prop_assert!(g.edge_id(src, e.node).is_some());
        }
        // every firing early enough delivers on every out-edge
        for f in log.iter().filter(|f| f.kind == LogKind::Fire && f.t + tau < 3.0 - 1e-9) {
            let delivered = log.iter().filter(|e| e.kind != LogKind::Fire && e.src == Some(f.node) && (f.t + tau - e.t).abs() < 1e-12).count();
            prop_assert_eq!(delivered, g.out_edge_ids(f.node).len());
        }
    }

    #[test]
    fn collapse_window_theorem(
        n in 1..15usize, seed in any::<u64>(), kind in 0..2u8, (b, tau) in b_tau(),
        ph in prop::collection::vec(0.0..1.0f64, 15),
    ) {
        let g = random_graph(n, seed, kind);
        let params = sf(b, tau);
        let r = one_shot_window_check(&ph[..n], &g, &params).unwrap();
        for i in 0..n {
            prop_assert!(!r.predicted[i] || r.simulated[i], "node {i} predicted but silent");
        }
        if r.all_simulated() {
            prop_assert_eq!(r.end_in_flight, 0);
            prop_assert!(r.end_spread <= params.rho0 + 1e-9, "spread {} > {}", r.end_spread, params.rho0);
        }
    }

    #[test]
    fn certificates_lead_to_synchrony(
        n in 2..10usize, seed in any::<u64>(), kind in 0..2u8, h in 1..4u32, m in 1..4u32,
        use_sf in any::<bool>(), ph in prop::collection::vec(0.0..1.0f64, 10),
    ) {
        let g = random_graph(n, seed, kind);
        let st = validate_structure(&g);
        prop_assume!(st.strongly_connected && st.aperiodic);
        let p = PrcParams::default();
        let prc = if use_sf { Prc::strong_firing(p) } else { Prc::synthetic_stii(h, m, 0.01, p).unwrap() };
        let params = ModelParams::new(p.tau, prc).unwrap();
        let cert = run_one_period(&ph[..n], &g, &params).unwrap();
        if cert.granted {
            let out = run_to_synchrony(&ph[..n], &g, &params, 50).unwrap();
            prop_assert!(out.synced, "certificate at {} but spread {}", cert.time, out.final_spread);
        }
    }
}
