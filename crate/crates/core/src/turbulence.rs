//! Oceanic turbulence: refractive-index spectrum, weak-turbulence
//! scintillation index, lognormal fading statistics and the single-lognormal
//! approximation of weighted lognormal sums.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::integrate;

const A_T: f64 = 1.863e-2;
const A_S: f64 = 1.9e-4;
const A_TS: f64 = 9.41e-3;
const SPECTRUM_SCALE: f64 = 0.388e-8;

/// Relative tolerance required of the scintillation integral.
pub const SCINTILLATION_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    #[default]
    Plane,
    Spherical,
}

impl WaveKind {
    fn theta(self) -> f64 {
        match self {
            WaveKind::Plane => 1.0,
            WaveKind::Spherical => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceParams {
    /// Dissipation rate of mean-square temperature, K²/s.
    pub chi_t: f64,
    /// Dissipation rate of turbulent kinetic energy per unit mass, m²/s³.
    pub epsilon: f64,
    /// Temperature/salinity balance, in `[-5, 0)`.
    pub w_ratio: f64,
    /// Kolmogorov micro-scale, m.
    #[serde(default = "default_eta")]
    pub eta_kolmogorov: f64,
    #[serde(default)]
    pub wave_kind: WaveKind,
}

fn default_eta() -> f64 {
    1e-3
}

impl TurbulenceParams {
    /// Clear-ocean reference values (χ_T = 1e-7, ε = 5e-5, w = -3.5).
    pub fn reference() -> Self {
        Self {
            chi_t: 1e-7,
            epsilon: 5e-5,
            w_ratio: -3.5,
            eta_kolmogorov: 1e-3,
            wave_kind: WaveKind::Plane,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi_t > 0.0) {
            return Err(Error::invalid("chi_t", "must be positive"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if !(-5.0..0.0).contains(&self.w_ratio) {
            return Err(Error::invalid("w_ratio", "must lie in [-5, 0)"));
        }
        if !(self.eta_kolmogorov > 0.0) {
            return Err(Error::invalid("eta_kolmogorov", "must be positive"));
        }
        Ok(())
    }
}

/// Power spectrum of refractive-index fluctuations, `Φ_n(κ)` in m³.
pub fn nikishov_spectrum(kappa: f64, params: &TurbulenceParams) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("spatial frequency must be positive, got {kappa}")));
    }
    Ok(spectrum_unchecked(kappa, params))
}

fn spectrum_unchecked(kappa: f64, p: &TurbulenceParams) -> f64 {
    let ke = kappa * p.eta_kolmogorov;
    let delta = 8.284 * ke.powf(4.0 / 3.0) + 12.978 * ke * ke;
    let w = p.w_ratio;
    SPECTRUM_SCALE
        * p.epsilon.powf(-1.0 / 3.0)
        * kappa.powf(-11.0 / 3.0)
        * (1.0 + 2.35 * ke.powf(2.0 / 3.0))
        * p.chi_t
        / (w * w)
        * (w * w * (-A_T * delta).exp() + (-A_S * delta).exp() - 2.0 * w * (-A_TS * delta).exp())
}

/// `∫_0^1 [1 - cos(a ξ (1 - (1-Θ) ξ))] dξ`.
///
/// Plane waves have the closed form `1 - sin(a)/a`; spherical waves are
/// integrated numerically.
pub fn path_kernel(a: f64, wave: WaveKind) -> Result<f64> {
    match wave {
        WaveKind::Plane => Ok(plane_kernel(a)),
        WaveKind::Spherical => path_kernel_numeric(a, wave),
    }
}

fn plane_kernel(a: f64) -> f64 {
    if a.abs() < 1e-3 {
        let a2 = a * a;
        a2 / 6.0 - a2 * a2 / 120.0
    } else {
        1.0 - a.sin() / a
    }
}

/// Numerical ξ-integral for any wave kind.
pub fn path_kernel_numeric(a: f64, wave: WaveKind) -> Result<f64> {
    let theta = wave.theta();
    let f = |xi: f64| {
        let phase = a * xi * (1.0 - (1.0 - theta) * xi);
        // 1 - cos(x) = 2 sin²(x/2) keeps small phases accurate
        2.0 * (0.5 * phase).sin().powi(2)
    };
    // resolve each half-period of the cosine
    let pieces = ((a.abs() / PI).ceil() as usize).clamp(1, 20_000);
    let mut total = 0.0;
    for k in 0..pieces {
        let lo = k as f64 / pieces as f64;
        let hi = (k + 1) as f64 / pieces as f64;
        total += integrate(f, lo, hi, 1e-10, 1e-300, 200)?.value;
    }
    Ok(total)
}

/// Weak-turbulence scintillation index of a plane or spherical wave after
/// propagating `d0` metres at `wavelength`.
///
/// The κ-integral runs in `ln κ`, split at `κη = 1`. Its lower end sits where
/// the path kernel is below 1e-16 and its upper end where the slowest spectral
/// exponential has decayed by 1e-12.
pub fn scintillation_index(params: &TurbulenceParams, d0: f64, wavelength: f64) -> Result<f64> {
    params.validate()?;
    if !(d0 > 0.0) {
        return Err(Error::Domain(format!("range must be positive, got {d0}")));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength must be positive, got {wavelength}")));
    }
    let k0 = 2.0 * PI / wavelength;
    let wave = params.wave_kind;
    // phase scale a(κ) = d0 κ² / k0
    let kappa_lo = 1e-8 * (k0 / d0).sqrt();
    let delta_cut = (1e12f64).ln() / A_S;
    // solve 12.978 x² + 8.284 x^{4/3} = delta_cut for x = κη by bisection
    let (mut lo, mut hi) = (1.0f64, 1e4f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 8.284 * mid.powf(4.0 / 3.0) + 12.978 * mid * mid > delta_cut {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let kappa_hi = hi / params.eta_kolmogorov;
    let kappa_split = (1.0 / params.eta_kolmogorov).clamp(kappa_lo * 10.0, kappa_hi / 10.0);

    let mut failure: Option<Error> = None;
    let integrand = |u: f64| {
        let kappa = u.exp();
        let a = d0 * kappa * kappa / k0;
        let kernel = match path_kernel(a, wave) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        // dκ = κ du
        kappa * kappa * spectrum_unchecked(kappa, params) * kernel
    };
    let mut total = 0.0;
    for (a, b) in [(kappa_lo.ln(), kappa_split.ln()), (kappa_split.ln(), kappa_hi.ln())] {
        match integrate(integrand, a, b, SCINTILLATION_REL_TOL * 1e-2, 0.0, 4_000) {
            Ok(r) if r.value.is_finite() => total += r.value,
            Ok(_) => failure = Some(Error::IntegrationFailure {
                estimate: f64::NAN,
                tolerance: SCINTILLATION_REL_TOL,
            }),
            Err(e) => failure = Some(e),
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let sigma2_i = 8.0 * PI * PI * k0 * k0 * d0 * total;
    if sigma2_i >= 1.0 {
        log::warn!(
            "scintillation index {sigma2_i:.3} at {d0} m is outside weak turbulence; lognormal model is questionable"
        );
    }
    Ok(sigma2_i)
}

/// Lognormal fading statistics of `h = exp(2X)`, `X ~ N(μ_X, σ²_X)`, with
/// `μ_X = -σ²_X` so that `E[h] = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    pub sigma2_x: f64,
    pub mu_x: f64,
    pub scintillation_index: f64,
}

impl FadingModel {
    pub fn none() -> Self {
        Self {
            sigma2_x: 0.0,
            mu_x: 0.0,
            scintillation_index: 0.0,
        }
    }

    pub fn from_log_amplitude_variance(sigma2_x: f64) -> Result<Self> {
        if !(sigma2_x >= 0.0) || !sigma2_x.is_finite() {
            return Err(Error::Domain(format!("log-amplitude variance must be nonnegative, got {sigma2_x}")));
        }
        Ok(Self {
            sigma2_x,
            mu_x: -sigma2_x,
            scintillation_index: (4.0 * sigma2_x).exp_m1(),
        })
    }

    pub fn is_weak(&self) -> bool {
        self.scintillation_index < 1.0
    }
}

/// `σ²_X = ln(1 + σ²_I) / 4`.
pub fn fading_from_scintillation(sigma2_i: f64) -> Result<FadingModel> {
    if !(sigma2_i >= 0.0) || !sigma2_i.is_finite() {
        return Err(Error::Domain(format!("scintillation index must be nonnegative, got {sigma2_i}")));
    }
    let sigma2_x = 0.25 * sigma2_i.ln_1p();
    let model = FadingModel {
        sigma2_x,
        mu_x: -sigma2_x,
        scintillation_index: sigma2_i,
    };
    if !model.is_weak() {
        log::warn!("scintillation index {sigma2_i} ≥ 1: channel is not in weak turbulence");
    }
    Ok(model)
}

/// Owns its generator; clone one per worker.
#[derive(Debug, Clone)]
pub struct FadingSampler {
    model: FadingModel,
    rng: ChaCha8Rng,
}

impl FadingSampler {
    pub fn new(model: FadingModel, seed: u64) -> Self {
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self) -> f64 {
        if self.model.sigma2_x == 0.0 {
            return 1.0;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        (2.0 * (self.model.mu_x + self.model.sigma2_x.sqrt() * z)).exp()
    }
}

/// `count` fading coefficients, deterministic per seed.
pub fn sample_fading(model: FadingModel, count: usize, seed: u64) -> Vec<f64> {
    let mut s = FadingSampler::new(model, seed);
    (0..count).map(|_| s.sample()).collect()
}

/// Single-lognormal `exp(2z)` matched to the first two moments of
/// `Σ L_n h_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LognormalSumApprox {
    pub mu_z: f64,
    pub sigma2_z: f64,
    pub term_losses: Vec<f64>,
    pub term_sigma2_x: Vec<f64>,
}

pub fn approx_lognormal_sum(losses: &[f64], variances: &[f64]) -> Result<LognormalSumApprox> {
    if losses.is_empty() {
        return Err(Error::EmptyInterferenceSet);
    }
    if losses.len() != variances.len() {
        return Err(Error::invalid("variances", "length differs from losses"));
    }
    if losses.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("losses", "must be positive"));
    }
    if variances.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("variances", "must be nonnegative"));
    }
    let sum: f64 = losses.iter().sum();
    let spread: f64 = losses
        .iter()
        .zip(variances)
        .map(|(l, v)| l * l * (4.0 * v).exp_m1())
        .sum();
    let sigma2_z = 0.25 * (spread / (sum * sum)).ln_1p();
    Ok(LognormalSumApprox {
        mu_z: 0.5 * sum.ln() - sigma2_z,
        sigma2_z,
        term_losses: losses.to_vec(),
        term_sigma2_x: variances.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Spectrum written out term by term as an independent check.
    fn spectrum_reference(k: f64, chi: f64, eps: f64, w: f64, eta: f64) -> f64 {
        let x = k * eta;
        let d = 8.284 * x.powf(1.333_333_333_333_333_3) + 12.978 * x.powi(2);
        let bracket = w.powi(2) * (-0.01863 * d).exp() + (-0.00019 * d).exp() - 2.0 * w * (-0.00941 * d).exp();
        0.388e-8 * eps.cbrt().recip() / k.powf(11.0 / 3.0) * (1.0 + 2.35 * x.cbrt().powi(2)) * chi / w.powi(2) * bracket
    }

    #[test]
    fn spectrum_cross_check() {
        let p = TurbulenceParams::reference();
        for k in [1.0, 100.0, 1e3, 5e3] {
            let a = nikishov_spectrum(k, &p).unwrap();
            let b = spectrum_reference(k, 1e-7, 5e-5, -3.5, 1e-3);
            assert!(a > 0.0 && a.is_finite());
            assert!((a / b - 1.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn spectrum_limits_and_linearity() {
        let p = TurbulenceParams::reference();
        let far = nikishov_spectrum(1e6, &p).unwrap();
        assert!(far < 1e-100);
        let mut p2 = p;
        p2.chi_t *= 2.0;
        for k in [10.0, 300.0] {
            let r = nikishov_spectrum(k, &p2).unwrap() / nikishov_spectrum(k, &p).unwrap();
            assert!((r - 2.0).abs() < 1e-12);
        }
        assert!(nikishov_spectrum(0.0, &p).is_err());
        assert!(nikishov_spectrum(-1.0, &p).is_err());
    }

    #[test]
    fn plane_kernel_matches_numeric() {
        for a in [1e-4, 0.1, 2.0, 37.0, 800.0] {
            let closed = path_kernel(a, WaveKind::Plane).unwrap();
            let numeric = path_kernel_numeric(a, WaveKind::Plane).unwrap();
            assert!((closed - numeric).abs() <= 1e-9 * closed.max(1e-12), "a={a}");
        }
    }

    #[test]
    fn scintillation_vanishes_with_range() {
        let p = TurbulenceParams::reference();
        let s = scintillation_index(&p, 1e-3, 532e-9).unwrap();
        assert!(s > 0.0 && s < 1e-5, "{s}");
    }

    #[test]
    fn fading_conversion_examples() {
        let f = fading_from_scintillation(0.9738).unwrap();
        assert!((f.sigma2_x - 0.17).abs() < 5e-3);
        assert_eq!(fading_from_scintillation(0.0).unwrap().sigma2_x, 0.0);
        let f = fading_from_scintillation(0.1248).unwrap();
        assert!((f.sigma2_x - 0.029).abs() < 5e-4);
        assert!(fading_from_scintillation(-0.1).is_err());
    }

    #[test]
    fn zero_variance_samples_are_one() {
        let s = sample_fading(FadingModel::none(), 100, 3);
        assert!(s.iter().all(|&h| h == 1.0));
    }

    #[test]
    fn lognormal_sum_examples() {
        let one = approx_lognormal_sum(&[0.3], &[0.06]).unwrap();
        assert!((one.sigma2_z - 0.06).abs() < 1e-14);
        assert!((one.mu_z - (0.5 * 0.3f64.ln() - 0.06)).abs() < 1e-14);
        let two = approx_lognormal_sum(&[1.0, 1.0], &[0.06, 0.06]).unwrap();
        let expect = 0.25 * (1.0 + (0.24f64.exp() - 1.0) / 2.0).ln();
        assert!((two.sigma2_z - expect).abs() < 1e-15);
        assert!(matches!(approx_lognormal_sum(&[], &[]), Err(Error::EmptyInterferenceSet)));
        assert!(approx_lognormal_sum(&[1.0], &[0.1, 0.2]).is_err());
    }
}
