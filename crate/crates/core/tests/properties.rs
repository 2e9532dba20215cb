use grst_core::baselines::{crr_params, price_multiplicative, tian_params};
use grst_core::marginal::{feature_matrix, scale_series, BarSeries, DayBars};
use grst_core::*;
use proptest::prelude::*;

/// Binomial(n, 1/2) probabilities by the multiplicative recurrence.
fn binomial_half(n: usize) -> Vec<f64> {
    let mut w = vec![0.5f64.powi(n as i32)];
    for j in 1..=n {
        let prev = w[j - 1];
        w.push(prev * (n - j + 1) as f64 / j as f64);
    }
    w
}

fn leaf_moments(values: &[f64]) -> (f64, f64) {
    let w = binomial_half(values.len() - 1);
    let mean: f64 = w.iter().zip(values).map(|(p, v)| p * v).sum();
    let var = w
        .iter()
        .zip(values)
        .map(|(p, v)| p * (v - mean).powi(2))
        .sum();
    (mean, var)
}

fn increasing_schedule(sigmas: &[f64], drifts: &[f64], dt: f64) -> MarginalSchedule {
    let mut sigma = 0.0f64;
    let mut mu = 0.0;
    let entries = sigmas
        .iter()
        .zip(drifts)
        .enumerate()
        .map(|(i, (s, d))| {
            sigma = (sigma * sigma + s * s).sqrt();
            mu += d;
            GaussianSpec::new(dt * (i + 1) as f64, mu, sigma).unwrap()
        })
        .collect();
    MarginalSchedule::new(entries).unwrap()
}

fn assert_coherent(
    tree: &RecombiningTree,
    strike: f64,
    r: f64,
) -> std::result::Result<(), TestCaseError> {
    let expiry = tree.final_time();
    let call = OptionContract::european(OptionKind::Call, strike, expiry).unwrap();
    let put = OptionContract::european(OptionKind::Put, strike, expiry).unwrap();
    let c = price_tree(tree, &call, r).unwrap().price;
    let p = price_tree(tree, &put, r).unwrap().price;
    prop_assert!((c - p - (100.0 - strike * (-r * expiry).exp())).abs() < 1e-10);
    let (spot, _) = price_claim(tree, expiry, r, false, |s| s).unwrap();
    prop_assert!((spot - 100.0).abs() < 1e-10);
    let am = OptionContract::american(OptionKind::Put, strike, expiry).unwrap();
    prop_assert!(price_tree(tree, &am, r).unwrap().price >= p - 1e-12);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grst0_leaf_moments_exact(
        root in -50.0f64..50.0,
        mu in -3.0f64..3.0,
        sigma in 0.05f64..5.0,
        t in 0.1f64..4.0,
        steps in 1usize..120,
    ) {
        let tree = build_grst0(root, mu, sigma, 0.0, t, steps).unwrap();
        let (mean, var) = leaf_moments(&tree.layers()[steps]);
        prop_assert!((mean - (root + mu * t)).abs() <= 1e-12 * (1.0 + root.abs()) * 10.0);
        prop_assert!((var - sigma * sigma * t).abs() <= 1e-12 * (1.0 + sigma * sigma * t) * 10.0);
    }

    #[test]
    fn split_layers_match_schedule(
        sigmas in prop::collection::vec(0.1f64..2.0, 2..5),
        drifts in prop::collection::vec(-1.0f64..1.0, 5),
        k in prop::sample::select(vec![3usize, 5, 7]),
    ) {
        let schedule = increasing_schedule(&sigmas, &drifts[..sigmas.len()], 0.25);
        let tree = build_grst_n(&schedule, 0.0, k).unwrap();
        for g in schedule.entries() {
            let n = tree.layer_at_time(g.t).unwrap();
            let (mean, var) = leaf_moments(&tree.layers()[n]);
            prop_assert!((mean - g.mu).abs() < 1e-9);
            prop_assert!((var - g.variance()).abs() < 1e-9);
        }
    }

    #[test]
    fn any_schedule_matches_moments(
        sigmas in prop::collection::vec(0.05f64..3.0, 2..5),
        mus in prop::collection::vec(-5.0f64..5.0, 5),
    ) {
        let entries = sigmas
            .iter()
            .enumerate()
            .map(|(i, &s)| GaussianSpec::new(0.2 * (i + 1) as f64, mus[i], s).unwrap())
            .collect();
        let schedule = MarginalSchedule::new(entries).unwrap();
        let tree = build_grst_n(&schedule, 0.0, 3).unwrap();
        for (_, dm, dv) in schedule_residuals(&tree, &schedule).unwrap() {
            prop_assert!(dm < 1e-9 && dv < 1e-9);
        }
    }

    #[test]
    fn pricing_coherence_on_admissible_trees(
        rate_sigma in 5.0f64..20.0,
        segments in 1usize..4,
        strike in 70.0f64..130.0,
        r in 0.0f64..0.05,
    ) {
        // Brownian variance with means on the forward curve
        let entries = (1..=segments)
            .map(|i| {
                let t = 0.25 * i as f64;
                GaussianSpec::new(t, 100.0 * (r * t).exp(), rate_sigma * t.sqrt()).unwrap()
            })
            .collect();
        let schedule = MarginalSchedule::new(entries).unwrap();
        let tree = build_grst_n(&schedule, 100.0, 9).unwrap();
        assert_coherent(&tree, strike, r)?;
    }

    #[test]
    fn arbitrary_trees_price_coherently_or_reject(
        sigmas in prop::collection::vec(5.0f64..20.0, 1..4),
        strike in 70.0f64..130.0,
        r in 0.0f64..0.05,
    ) {
        let zeros = vec![0.0; sigmas.len()];
        let schedule = increasing_schedule(&sigmas, &zeros, 0.25).shifted(100.0);
        let tree = build_grst_n(&schedule, 100.0, 9).unwrap();
        let call = OptionContract::european(OptionKind::Call, strike, tree.final_time()).unwrap();
        match price_tree(&tree, &call, r) {
            Ok(_) => assert_coherent(&tree, strike, r)?,
            Err(e) => prop_assert!(matches!(e, GrstError::Arbitrage { .. }), "{e}"),
        }
    }

    #[test]
    fn scaling_multiplies_features(c in 0.1f64..10.0, seed in 0u64..1000) {
        let prices: Vec<f64> = (0..40).map(|i| 100.0 + ((i as u64 * 7919 + seed) % 13) as f64 * 0.1).collect();
        let bars = BarSeries {
            session_start: chrono::NaiveTime::from_hms_opt(11, 0, 0).unwrap(),
            interval_minutes: 5,
            time_scale: 1.0,
            days: vec![DayBars { date: chrono::NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(), prices }],
        };
        let y = feature_matrix(&bars, 5).unwrap();
        let ys = feature_matrix(&scale_series(&bars, c).unwrap(), 5).unwrap();
        for (a, b) in y.as_slice().iter().zip(ys.as_slice()) {
            prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn grst1_end_layer_is_affine_image() {
    let k = 5;
    let g1 = GaussianSpec::new(0.5, 1.0, 0.4).unwrap();
    let g2 = GaussianSpec::new(1.2, -0.3, 0.9).unwrap();
    let tree = build_grst1(&g1, &g2, 0.0, k).unwrap();
    let steps = k - 1;
    let leaf = &tree.layers()[steps];

    // extend the first-segment geometry by k-1 more equal-probability steps
    let dt = g1.t / steps as f64;
    let spacing = 2.0 * (g1.sigma / g1.t.sqrt()) * dt.sqrt();
    let drift = (g1.mu - 0.0) / steps as f64;
    let mut s_star = leaf.to_vec();
    for _ in 0..steps {
        let mut next = vec![s_star[0] + drift - 0.5 * spacing];
        next.extend(s_star.iter().map(|v| v + drift + 0.5 * spacing));
        s_star = next;
    }
    let (m_star, v_star) = leaf_moments(&s_star);
    let a = g2.sigma / v_star.sqrt();
    let b = g2.mu - a * m_star;
    let end = &tree.layers()[2 * steps];
    assert_eq!(end.len(), s_star.len());
    for (x, y) in s_star.iter().zip(end) {
        assert!((a * x + b - y).abs() < 1e-12, "{} vs {y}", a * x + b);
    }
}

#[test]
fn tian_residual_grid() {
    for sigma in [0.1, 0.2, 0.4] {
        for r in [0.0, 0.05] {
            for dt in [0.001, 0.01, 0.1] {
                let p = tian_params(sigma, r, dt).unwrap();
                let q = p.p_rn;
                for (power, rate) in [
                    (1, r),
                    (2, 2.0 * r + sigma * sigma),
                    (3, 3.0 * r + 3.0 * sigma * sigma),
                ] {
                    let lhs = q * p.up.powi(power) + (1.0 - q) * p.down.powi(power);
                    assert!(
                        (lhs - (rate * dt).exp()).abs() < 1e-10,
                        "{sigma} {r} {dt} {power}"
                    );
                }
            }
        }
    }
}

#[test]
fn crr_and_grst_share_backward_engine_semantics() {
    // one multiplicative step equals the same two-node additive tree
    let p = crr_params(0.2, 0.0, 1.0).unwrap();
    let tree = RecombiningTree::from_layers(
        vec![0.0, 1.0],
        vec![vec![100.0], vec![100.0 * p.down, 100.0 * p.up]],
    )
    .unwrap();
    let call = OptionContract::european(OptionKind::Call, 95.0, 1.0).unwrap();
    let a = price_multiplicative(&p, 1, 100.0, &call, 0.0)
        .unwrap()
        .price;
    let b = price_tree(&tree, &call, 0.0).unwrap().price;
    assert!((a - b).abs() < 1e-12);
}
