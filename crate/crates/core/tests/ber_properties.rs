use proptest::prelude::*;
use uwoc_core::ber::{
    analytic_ber, ber_tensor, cer_first_hop_uplink, cer_hop, chip_power_from_average, dbm_to_watts, e2e_cer,
    gaussian_threshold, thermal_variance, ChipCounts, DetectorParams, Direction, HopSpec, LinkConfig,
    QuadratureSpec,
};
use uwoc_core::ooc::OocParams;

fn config(direction: Direction, users: usize, hops: &[(f64, f64)], s2: f64, dbm: f64) -> LinkConfig {
    let ooc = match direction {
        Direction::P2p => OocParams::new(1, 1).unwrap(),
        _ => OocParams::new(50, 3).unwrap(),
    };
    LinkConfig {
        direction,
        users,
        ooc,
        hops: hops.iter().map(|&(l, s)| HopSpec::new(l, s).unwrap()).collect(),
        detector: DetectorParams::default(),
        chip_duration: 1e-8,
        thermal_variance: s2,
        chip_power: chip_power_from_average(dbm_to_watts(dbm), ooc, hops.len() - 1),
    }
}

/// Forwards one chip through every combination of per-hop flips and sums
/// the probability of the combinations that leave it wrong.
fn exact_pipeline_error(per_hop: &[f64]) -> f64 {
    let n = per_hop.len();
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() % 2 == 1)
        .map(|mask| {
            per_hop
                .iter()
                .enumerate()
                .map(|(i, &p)| if mask >> i & 1 == 1 { p } else { 1.0 - p })
                .product::<f64>()
        })
        .sum()
}

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::Uplink), Just(Direction::Downlink), Just(Direction::P2p)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chip_error_rates_are_probabilities(m0 in 0.0f64..1e6, gap in 0.0f64..1e6, s2 in 0.0f64..1e8, beta in 0.0f64..1e6) {
        let m1 = m0 + gap;
        let c = cer_hop(m0, m1, s2);
        prop_assert!((0.0..=0.5).contains(&c));
        let th = gaussian_threshold(m0, m1, s2);
        let (p10, p01) = cer_first_hop_uplink(ChipCounts { m0: m0 + beta, m1: m1 + beta }, th, s2);
        prop_assert!((0.0..=1.0).contains(&p10) && (0.0..=1.0).contains(&p01));
    }

    #[test]
    fn relay_chain_bound_holds(per_hop in prop::collection::vec(0.0f64..0.5, 1..=5)) {
        let exact = exact_pipeline_error(&per_hop);
        let bound = e2e_cer(&per_hop);
        prop_assert!(bound + 1e-15 >= exact, "bound {} < exact {}", bound, exact);
        prop_assert!((0.0..=1.0).contains(&bound));
    }

    #[test]
    fn ber_is_probability(
        dir in direction(),
        users in 1usize..=5,
        relays in 0usize..=2,
        loss in 1e-6f64..1e-2,
        s2x in 0.0f64..0.15,
        dbm in -20.0f64..60.0,
    ) {
        let users = if dir == Direction::P2p { 1 } else { users };
        let cfg = config(dir, users, &vec![(loss, s2x); relays + 1], 3.12e7, dbm);
        let b = analytic_ber(&cfg, &QuadratureSpec::with_nodes(24)).unwrap();
        prop_assert!((0.0..=1.0).contains(&b.p10) && (0.0..=1.0).contains(&b.p01));
        prop_assert!((0.0..=1.0).contains(&b.ber));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The factorised evaluation and the brute-force tensor rule share the
    /// same node set, so they agree to rounding.
    #[test]
    fn factorised_matches_tensor_rule(
        dir in direction(),
        users in 1usize..=4,
        relays in 0usize..=1,
        loss in 1e-5f64..1e-2,
        s2x in 0.0f64..0.12,
        dbm in -10.0f64..50.0,
    ) {
        let users = if dir == Direction::P2p { 1 } else { users };
        let hops: Vec<(f64, f64)> = (0..=relays).map(|i| (loss * (1.0 + i as f64), s2x)).collect();
        let cfg = config(dir, users, &hops, 1e6, dbm);
        let quad = QuadratureSpec::with_nodes(8);
        let fast = analytic_ber(&cfg, &quad).unwrap();
        let slow = ber_tensor(&cfg, &quad).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-300;
        prop_assert!(close(fast.p10, slow.p10), "p10 {} vs {}", fast.p10, slow.p10);
        prop_assert!(close(fast.p01, slow.p01), "p01 {} vs {}", fast.p01, slow.p01);
    }
}

/// Holds while every interferer count stays within the code weight. With
/// more users the Gaussian threshold grows only as the square root of the
/// power, so MAI eventually swamps it and BER climbs back to its floor.
#[test]
fn ber_falls_with_power() {
    let cases = [
        config(Direction::Uplink, 3, &[(7.812e-6, 0.12)], 1e7, 0.0),
        config(Direction::Uplink, 2, &[(3.135e-4, 0.06), (3.135e-4, 0.06)], 3.12e7, 0.0),
        config(Direction::Downlink, 5, &[(3.1e-3, 0.029); 3], 3.12e7, 0.0),
        config(Direction::P2p, 1, &[(9.4e-3, 0.017); 4], 3.12e7, 0.0),
    ];
    let quad = QuadratureSpec::with_nodes(32);
    for base in cases {
        let mut last = f64::INFINITY;
        for step in 0..40 {
            let cfg = LinkConfig {
                chip_power: base.chip_power * 10f64.powf(step as f64 / 4.0 - 3.0),
                ..base.clone()
            };
            let b = analytic_ber(&cfg, &quad).unwrap().ber;
            assert!(b <= last * (1.0 + 1e-9), "{:?} step {step}: {b} after {last}", base.direction);
            last = b;
        }
    }
}

#[test]
fn quadrature_has_converged_at_acceptance_points() {
    let table_s2 = thermal_variance(&DetectorParams::default(), 1e-8);
    let points = [
        config(Direction::Uplink, 4, &[(7.812e-6, 0.12)], 1e5, 40.0),
        config(Direction::P2p, 1, &[(3.135e-4, 0.06)], table_s2, 12.0),
        config(Direction::P2p, 1, &[(3.99e-7, 0.17)], table_s2, 48.0),
        config(Direction::P2p, 1, &[(3.135e-4, 0.06); 2], table_s2, 16.0),
        config(Direction::P2p, 1, &[(3.1e-3, 0.029); 3], table_s2, 5.0),
        config(Direction::Uplink, 4, &[(7.812e-6, 0.12)], 1e5, 60.0),
        config(Direction::Downlink, 5, &[(3.99e-7, 0.17)], table_s2, 36.0),
    ];
    for cfg in points {
        let a = analytic_ber(&cfg, &QuadratureSpec::with_nodes(64)).unwrap().ber;
        let b = analytic_ber(&cfg, &QuadratureSpec::with_nodes(128)).unwrap().ber;
        assert!((a - b).abs() <= 1e-4 * b, "{:?}: {a} vs {b}", cfg.direction);
    }
}
