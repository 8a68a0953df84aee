use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use uwoc_core::transport::{simulate_impulse_response, LinkGeometry, McTransportConfig, WaterOptics};
use uwoc_core::turbulence::{
    approx_lognormal_sum, fading_from_scintillation, sample_fading, scintillation_index, FadingModel,
    TurbulenceParams,
};

const WAVELENGTH: f64 = 532e-9;

fn water(absorption: f64, scattering: f64) -> WaterOptics {
    WaterOptics::new(absorption, scattering, absorption + scattering, 0.924).unwrap()
}

fn received(water: &WaterOptics, range: f64, divergence: f64, photons: u64, seed: u64) -> f64 {
    let geom = LinkGeometry::new(range, divergence);
    let cfg = McTransportConfig::new(photons, seed);
    simulate_impulse_response(water, &geom, &cfg).unwrap().total_received_fraction
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn energy_is_conserved(a in 0.02f64..0.5, b in 0.0f64..0.5, range in 1.0f64..20.0, div in 0.01f64..20.0, seed in any::<u64>()) {
        let w = water(a, b);
        let geom = LinkGeometry::new(range, div);
        let cfg = McTransportConfig::new(30_000, seed);
        let ir = simulate_impulse_response(&w, &geom, &cfg).unwrap();
        let ledger = ir.ledger.unwrap();
        prop_assert!(ledger.relative_imbalance() < 1e-6, "imbalance {}", ledger.relative_imbalance());
        prop_assert!((0.0..=1.0).contains(&ir.total_received_fraction));
        prop_assert!((ir.total_received_fraction - ledger.deposited / ledger.launched).abs() < 1e-9);
    }

    #[test]
    fn fading_conversion_round_trips(sigma2_i in 0.0f64..3.0) {
        let m = fading_from_scintillation(sigma2_i).unwrap();
        let back = FadingModel::from_log_amplitude_variance(m.sigma2_x).unwrap().scintillation_index;
        prop_assert!((back - sigma2_i).abs() <= 1e-12 * sigma2_i.max(1.0));
        prop_assert!((m.mu_x + m.sigma2_x).abs() < 1e-15);
    }

    #[test]
    fn sum_approximation_keeps_the_mean(
        terms in prop::collection::vec((1e-8f64..1.0, 0.0f64..0.3), 1..6)
    ) {
        let (losses, variances): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
        let approx = approx_lognormal_sum(&losses, &variances).unwrap();
        let total: f64 = losses.iter().sum();
        let mean = (2.0 * approx.mu_z + 2.0 * approx.sigma2_z).exp();
        prop_assert!((mean / total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn identical_seeds_give_identical_responses() {
    let w = WaterOptics::clear_ocean();
    let geom = LinkGeometry::new(10.0, 5.0);
    let cfg = McTransportConfig::new(50_000, 99);
    let a = simulate_impulse_response(&w, &geom, &cfg).unwrap();
    let b = simulate_impulse_response(&w, &geom, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_impulse_response(&w, &geom, &McTransportConfig::new(50_000, 100)).unwrap();
    assert_ne!(a.bins, c.bins);
}

#[test]
fn received_fraction_falls_with_absorption_and_range() {
    for seed in 0..4 {
        let low = received(&water(0.05, 0.1), 10.0, 10.0, 40_000, seed);
        let high = received(&water(0.2, 0.1), 10.0, 10.0, 40_000, seed);
        assert!(high < low, "seed {seed}: {high} vs {low}");
        let near = received(&water(0.1, 0.1), 5.0, 10.0, 40_000, seed);
        let far = received(&water(0.1, 0.1), 10.0, 10.0, 40_000, seed);
        assert!(far < near, "seed {seed}: {far} vs {near}");
    }
}

#[test]
fn absorption_only_beam_follows_exponential_decay() {
    let photons = 200_000u64;
    for (a, range) in [(0.1, 5.0), (0.15, 10.0), (0.3, 4.0)] {
        let got = received(&water(a, 0.0), range, 0.02, photons, 5);
        let expected = (-a * range).exp();
        let se = (expected * (1.0 - expected) / photons as f64).sqrt();
        assert!((got - expected).abs() <= 3.0 * se, "a={a} d={range}: {got} vs {expected}");
    }
}

#[test]
fn scintillation_trends() {
    let base = TurbulenceParams::reference();
    let s = |p: &TurbulenceParams, d: f64| scintillation_index(p, d, WAVELENGTH).unwrap();
    let by_range: Vec<f64> = [20.0, 40.0, 80.0].iter().map(|&d| s(&base, d)).collect();
    assert!(by_range.windows(2).all(|w| w[0] < w[1]), "{by_range:?}");
    let by_chi: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&k| s(&TurbulenceParams { chi_t: base.chi_t * k, ..base }, 40.0))
        .collect();
    assert!(by_chi.windows(2).all(|w| w[0] < w[1]), "{by_chi:?}");
    let by_eps: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&k| s(&TurbulenceParams { epsilon: base.epsilon * k, ..base }, 40.0))
        .collect();
    assert!(by_eps.windows(2).all(|w| w[0] > w[1]), "{by_eps:?}");
}

#[test]
fn sampled_log_amplitude_is_gaussian() {
    let model = FadingModel::from_log_amplitude_variance(0.06).unwrap();
    let n = 200_000;
    let x: Vec<f64> = sample_fading(model, n, 17).into_iter().map(|h| 0.5 * h.ln()).collect();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let skew = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / nf / var.powf(1.5);
    let kurt = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf / (var * var) - 3.0;
    assert!((mean - model.mu_x).abs() < 3.0 * (model.sigma2_x / nf).sqrt());
    assert!((var - model.sigma2_x).abs() < 3.0 * model.sigma2_x * (2.0 / nf).sqrt());
    assert!(skew.abs() < 3.0 * (6.0 / nf).sqrt());
    assert!(kurt.abs() < 3.0 * (24.0 / nf).sqrt());
    let h = sample_fading(model, n, 18);
    let mean_h = h.iter().sum::<f64>() / nf;
    assert!((mean_h - 1.0).abs() < 0.01);
}

/// KS distance between sampled sums of lognormals and the matched single
/// lognormal.
#[test]
fn sum_approximation_tracks_direct_sums() {
    for terms in 1..=3 {
        let losses = vec![1e-4; terms];
        let variances = vec![0.06; terms];
        let approx = approx_lognormal_sum(&losses, &variances).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(terms as u64);
        let mu = -0.06;
        let normal = Normal::new(mu, 0.06f64.sqrt()).unwrap();
        let n = 50_000;
        let mut z: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = losses.iter().map(|l| l * (2.0 * normal.sample(&mut rng)).exp()).sum();
                0.5 * s.ln()
            })
            .collect();
        z.sort_by(f64::total_cmp);
        let cdf = |v: f64| 0.5 * libm::erfc(-(v - approx.mu_z) / (2.0 * approx.sigma2_z).sqrt());
        let ks = z
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = cdf(v);
                (c - i as f64 / n as f64).abs().max((c - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.05, "{terms} terms: KS {ks}");
    }
}
