//! Analytic bit error rates under the Gaussian photon-counting approximation.
//!
//! Conditional chip error rates are composed across hops and bits, then
//! averaged over the lognormal fading vector. The production path evaluates
//! that average exactly in factorized form: the fading of hops two onward
//! enters only through moments of the surviving-chip product, and each
//! interfered chip's fading enters only through its own one-dimensional
//! average. [`average_over_fading`] keeps the plain tensor-product rule for
//! cross-checking small configurations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mai::{canonical_patterns, enumerate_patterns, pattern_conditional_prob, prob_num_interferers};
use crate::numerics::{binomial, q_function, GaussHermite};
use crate::ooc::{downlink_mai_free_bound, OocParams};
use crate::turbulence::{approx_lognormal_sum, FadingModel};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    #[serde(default = "d_eta")]
    pub quantum_efficiency: f64,
    #[serde(default = "d_lambda")]
    pub wavelength: f64,
    #[serde(default = "d_r")]
    pub load_resistance: f64,
    #[serde(default = "d_t")]
    pub temperature: f64,
    #[serde(default = "d_idc")]
    pub dark_current: f64,
    #[serde(default = "d_gb")]
    pub background_rate: f64,
}

fn d_eta() -> f64 {
    0.8
}
fn d_lambda() -> f64 {
    532e-9
}
fn d_r() -> f64 {
    100.0
}
fn d_t() -> f64 {
    290.0
}
fn d_idc() -> f64 {
    1.226e-9
}
fn d_gb() -> f64 {
    1.206e10
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            quantum_efficiency: d_eta(),
            wavelength: d_lambda(),
            load_resistance: d_r(),
            temperature: d_t(),
            dark_current: d_idc(),
            background_rate: d_gb(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("quantum_efficiency", self.quantum_efficiency),
            ("wavelength", self.wavelength),
            ("load_resistance", self.load_resistance),
            ("temperature", self.temperature),
            ("dark_current", self.dark_current),
            ("background_rate", self.background_rate),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Detected photoelectrons per joule of received optical energy, `η/(hf)`.
    pub fn counts_per_joule(&self) -> f64 {
        self.quantum_efficiency * self.wavelength / (PLANCK * SPEED_OF_LIGHT)
    }

    pub fn dark_rate(&self) -> f64 {
        self.dark_current / ELEMENTARY_CHARGE
    }

    /// Dark plus background counts in one chip.
    pub fn background_counts(&self, chip_duration: f64) -> f64 {
        (self.dark_rate() + self.background_rate) * chip_duration
    }
}

/// Integrated thermal-noise variance in counts², `2 K_b T Tc / (R e²)`.
pub fn thermal_variance(det: &DetectorParams, chip_duration: f64) -> f64 {
    2.0 * BOLTZMANN * det.temperature * chip_duration / (det.load_resistance * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipCounts {
    /// Mean count of an OFF chip.
    pub m0: f64,
    /// Mean count of an ON chip.
    pub m1: f64,
}

/// Mean counts of a first-hop uplink mark chip carrying `beta` units of
/// interfering loss-weighted fading.
pub fn chip_counts_uplink_first_hop(
    det: &DetectorParams,
    chip_power: f64,
    chip_duration: f64,
    loss: f64,
    fading: f64,
    beta: f64,
) -> ChipCounts {
    let k = det.counts_per_joule() * chip_power * chip_duration;
    let m0 = k * beta + det.background_counts(chip_duration);
    ChipCounts {
        m0,
        m1: m0 + k * loss * fading,
    }
}

/// Threshold equating the normalised distances of both Gaussian hypotheses.
pub fn gaussian_threshold(e0: f64, e1: f64, sigma2_th: f64) -> f64 {
    ((e1 + sigma2_th) * (e0 + sigma2_th)).sqrt() - sigma2_th
}

/// `(P(1|0), P(0|1))` of one chip against a fixed threshold.
pub fn cer_first_hop_uplink(counts: ChipCounts, threshold: f64, sigma2_th: f64) -> (f64, f64) {
    (
        q_function((threshold - counts.m0) / (counts.m0 + sigma2_th).sqrt()),
        q_function((counts.m1 - threshold) / (counts.m1 + sigma2_th).sqrt()),
    )
}

/// Symmetric chip error rate of a hop whose threshold sits at the Gaussian
/// optimum.
pub fn cer_hop(m0: f64, m1: f64, sigma2_th: f64) -> f64 {
    q_function((m1 - m0) / ((m1 + sigma2_th).sqrt() + (m0 + sigma2_th).sqrt()))
}

/// `1 - Π(1 - p_i)`: a chip is wrong at the destination if any hop flips it.
pub fn e2e_cer(per_hop: &[f64]) -> f64 {
    -per_hop.iter().map(|&p| (-p).ln_1p()).sum::<f64>().exp_m1()
}

/// Bit errors from mark-chip errors: a zero is misread only if every mark
/// chip turns ON; a one is misread if any mark chip turns OFF.
pub fn conditional_ber_from_cers(cer_10: &[f64], cer_01: &[f64]) -> (f64, f64) {
    (cer_10.iter().product(), e2e_cer(cer_01))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_dimension: usize,
    /// Largest fading dimension the tensor rule accepts.
    pub max_dimension: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_dimension: 64,
            max_dimension: 8,
        }
    }
}

impl QuadratureSpec {
    pub fn with_nodes(nodes_per_dimension: usize) -> Self {
        Self {
            nodes_per_dimension,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_dimension < 4 {
            return Err(Error::invalid("nodes_per_dimension", "need at least 4 nodes"));
        }
        Ok(())
    }
}

/// One hop's fading-free loss and fading statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopSpec {
    pub loss: f64,
    pub fading: FadingModel,
}

impl HopSpec {
    pub fn new(loss: f64, sigma2_x: f64) -> Result<Self> {
        let h = Self {
            loss,
            fading: FadingModel::from_log_amplitude_variance(sigma2_x)?,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss > 0.0 && self.loss <= 1.0) {
            return Err(Error::invalid("loss", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Downlink,
    P2p,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Uplink => "uplink",
            Direction::Downlink => "downlink",
            Direction::P2p => "p2p",
        })
    }
}

/// How transmit power is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerPlan {
    ChipPower(f64),
    /// Average transmitted power per bit summed over all `N + 1` transmitters.
    AverageBitPower(f64),
}

impl PowerPlan {
    pub fn chip_power(&self, ooc: OocParams, relays: usize) -> Result<f64> {
        let p = match *self {
            PowerPlan::ChipPower(p) => p,
            PowerPlan::AverageBitPower(p) => chip_power_from_average(p, ooc, relays),
        };
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid("power", "must be positive and finite"));
        }
        Ok(p)
    }
}

/// Chip power of every transmitter when the average bit power is spread
/// evenly over `relays + 1` transmitters: `2F / ((N+1) W) · P`.
pub fn chip_power_from_average(p_b_avg: f64, ooc: OocParams, relays: usize) -> f64 {
    2.0 * ooc.length() as f64 / ((relays + 1) as f64 * ooc.weight() as f64) * p_b_avg
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Everything the analytic and simulated receivers need for one operating
/// point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkConfig {
    pub direction: Direction,
    pub users: usize,
    pub ooc: OocParams,
    /// First hop first; `hops.len() = N + 1`.
    pub hops: Vec<HopSpec>,
    pub detector: DetectorParams,
    pub chip_duration: f64,
    pub thermal_variance: f64,
    pub chip_power: f64,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::invalid("users", "need at least one user"));
        }
        if self.hops.is_empty() {
            return Err(Error::invalid("hops", "need at least one hop"));
        }
        for h in &self.hops {
            h.validate()?;
        }
        self.detector.validate()?;
        if !(self.chip_duration > 0.0) {
            return Err(Error::invalid("chip_duration", "must be positive"));
        }
        if !(self.thermal_variance >= 0.0) || !self.thermal_variance.is_finite() {
            return Err(Error::invalid("thermal_variance", "must be nonnegative and finite"));
        }
        if !(self.chip_power > 0.0) || !self.chip_power.is_finite() {
            return Err(Error::invalid("chip_power", "must be positive and finite"));
        }
        if self.direction == Direction::P2p && (self.users != 1 || self.ooc.length() != 1) {
            return Err(Error::invalid("direction", "point-to-point needs one user and F = W = 1"));
        }
        Ok(())
    }

    pub fn relays(&self) -> usize {
        self.hops.len() - 1
    }

    /// Counts per unit of loss-weighted fading at the configured chip power.
    pub fn count_scale(&self) -> f64 {
        self.detector.counts_per_joule() * self.chip_power * self.chip_duration
    }

    pub fn background_counts(&self) -> f64 {
        self.detector.background_counts(self.chip_duration)
    }

    /// Symmetric CER of hop `index` (0-based) at fading `h`.
    pub fn hop_cer(&self, index: usize, h: f64) -> f64 {
        let e0 = self.background_counts();
        let e1 = e0 + self.count_scale() * self.hops[index].loss * h;
        cer_hop(e0, e1, self.thermal_variance)
    }

    /// `(P(1|0), P(0|1))` of a first-hop mark chip carrying interference
    /// `beta` when the desired fading is `h11`.
    pub fn first_hop_cers(&self, h11: f64, beta: f64) -> (f64, f64) {
        let k = self.count_scale();
        let e0 = self.background_counts();
        let e1 = e0 + k * self.hops[0].loss * h11;
        let threshold = gaussian_threshold(e0, e1, self.thermal_variance);
        let counts = ChipCounts {
            m0: e0 + k * beta,
            m1: e1 + k * beta,
        };
        cer_first_hop_uplink(counts, threshold, self.thermal_variance)
    }
}

/// Fading axis `h = exp(2x)`, `x ~ N(mu, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalAxis {
    pub mu: f64,
    pub sigma2: f64,
}

impl From<FadingModel> for LognormalAxis {
    fn from(f: FadingModel) -> Self {
        Self {
            mu: f.mu_x,
            sigma2: f.sigma2_x,
        }
    }
}

/// Tensor-product Gauss–Hermite average of `f` over independent lognormal
/// axes.
pub fn average_over_fading(
    f: impl Fn(&[f64]) -> f64,
    axes: &[LognormalAxis],
    quad: &QuadratureSpec,
) -> Result<f64> {
    quad.validate()?;
    if axes.len() > quad.max_dimension {
        return Err(Error::DimensionTooLarge {
            dimension: axes.len(),
            cap: quad.max_dimension,
        });
    }
    let gh = GaussHermite::new(quad.nodes_per_dimension)?;
    let atoms: Vec<Vec<(f64, f64)>> = axes.iter().map(|a| gh.lognormal_atoms(a.mu, a.sigma2)).collect();
    let mut index = vec![0usize; axes.len()];
    let mut point = vec![0.0; axes.len()];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for (d, &i) in index.iter().enumerate() {
            let (h, w) = atoms[d][i];
            point[d] = h;
            weight *= w;
        }
        total += weight * f(&point);
        // odometer increment
        let mut d = 0;
        loop {
            if d == index.len() {
                return Ok(total);
            }
            index[d] += 1;
            if index[d] < atoms[d].len() {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
}

/// Bit error probabilities of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerBreakdown {
    pub p10: f64,
    pub p01: f64,
    pub ber: f64,
}

impl BerBreakdown {
    fn new(p10: f64, p01: f64) -> Self {
        Self {
            p10,
            p01,
            ber: 0.5 * p10 + 0.5 * p01,
        }
    }
}

/// Conditional `(P(1|0), P(0|1))` for a given interference pattern and a
/// full fading vector `[h11, h_2, .., h_{N+1}, beta fadings of hit chips]`.
/// Hit-chip fadings are the lognormal stand-ins for the summed
/// interference, in mark order.
pub fn conditional_ber(cfg: &LinkConfig, alpha: &[usize], hbar: &[f64]) -> (f64, f64) {
    let n_hops = cfg.hops.len();
    let later: Vec<f64> = (1..n_hops).map(|i| cfg.hop_cer(i, hbar[i])).collect();
    let mut betas = hbar[n_hops..].iter();
    let mut off = Vec::with_capacity(alpha.len());
    let mut on = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let beta = if a > 0 { *betas.next().expect("one fading per hit chip") } else { 0.0 };
        let (c10, c01) = match cfg.direction {
            Direction::Uplink => cfg.first_hop_cers(hbar[0], beta),
            _ => {
                let c = cfg.hop_cer(0, hbar[0]);
                (c, c)
            }
        };
        let mut chain = later.clone();
        chain.push(c10);
        off.push(e2e_cer(&chain));
        chain.pop();
        chain.push(c01);
        on.push(e2e_cer(&chain));
    }
    conditional_ber_from_cers(&off, &on)
}

/// Lognormal stand-in for the summed fading of `hits` interferers that all
/// share the first hop's loss and fading.
fn interference_axis(cfg: &LinkConfig, hits: usize) -> Result<LognormalAxis> {
    let first = cfg.hops[0];
    let approx = approx_lognormal_sum(&vec![first.loss; hits], &vec![first.fading.sigma2_x; hits])?;
    Ok(LognormalAxis {
        mu: approx.mu_z,
        sigma2: approx.sigma2_z,
    })
}

/// Reference evaluation: every pattern, full tensor quadrature over its
/// fading vector. Exponential in the dimension; for cross-checks only.
pub fn ber_tensor(cfg: &LinkConfig, quad: &QuadratureSpec) -> Result<BerBreakdown> {
    cfg.validate()?;
    let w = cfg.ooc.weight();
    let mut terms: Vec<(Vec<usize>, f64)> = Vec::new();
    if cfg.direction == Direction::Uplink {
        for l in 0..cfg.users {
            let pl = prob_num_interferers(l, cfg.users, cfg.ooc)?;
            for p in enumerate_patterns(l, w) {
                let pa = pattern_conditional_prob(&p);
                terms.push((p.alpha, pl * pa));
            }
        }
    } else {
        terms.push((vec![0; w], 1.0));
    }
    let (mut p10, mut p01) = (0.0, 0.0);
    for (alpha, weight) in terms {
        let mut axes: Vec<LognormalAxis> = cfg.hops.iter().map(|h| h.fading.into()).collect();
        for &a in &alpha {
            if a > 0 {
                axes.push(interference_axis(cfg, a)?);
            }
        }
        let a10 = average_over_fading(|h| conditional_ber(cfg, &alpha, h).0, &axes, quad)?;
        let a01 = average_over_fading(|h| conditional_ber(cfg, &alpha, h).1, &axes, quad)?;
        p10 += weight * a10;
        p01 += weight * a01;
    }
    Ok(BerBreakdown::new(p10, p01))
}

/// Moments of the later-hop survival product `R = Π_{i≥2}(1 - p_i)`.
struct LaterHopMoments {
    /// `g[k] = E[R^k (1 - R)^(W - k)]`.
    g: Vec<f64>,
    /// `1 - E[R^W]`.
    loss_any: f64,
}

fn later_hop_moments(cfg: &LinkConfig, gh: &GaussHermite) -> LaterHopMoments {
    let w = cfg.ooc.weight();
    let mut g = vec![0.0; w + 1];
    g[w] = 1.0;
    let mut log_keep = 0.0;
    for i in 1..cfg.hops.len() {
        let atoms = gh.lognormal_atoms(cfg.hops[i].fading.mu_x, cfg.hops[i].fading.sigma2_x);
        let cers: Vec<(f64, f64)> = atoms.iter().map(|&(h, wt)| (cfg.hop_cer(i, h), wt)).collect();
        // mixed[k][t] = E[r^k p^t]
        let mixed = |k: usize, t: usize| -> f64 {
            cers.iter()
                .map(|&(p, wt)| wt * (1.0 - p).powi(k as i32) * p.powi(t as i32))
                .sum()
        };
        let mut next = vec![0.0; w + 1];
        for (k, slot) in next.iter_mut().enumerate() {
            let m = w - k;
            *slot = (0..=m).map(|t| binomial(m, t) * mixed(k, t) * g[k + t]).sum();
        }
        g = next;
        let lose: f64 = cers
            .iter()
            .map(|&(p, wt)| wt * -(w as f64 * (-p).ln_1p()).exp_m1())
            .sum();
        log_keep += (-lose).ln_1p();
    }
    LaterHopMoments {
        g,
        loss_any: -log_keep.exp_m1(),
    }
}

/// Elementary symmetric polynomials `e_0..e_n` of `xs`.
fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; xs.len() + 1];
    e[0] = 1.0;
    for (j, &x) in xs.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e
}

/// Factorized exact evaluation of the fading average for uplink and
/// downlink.
fn ber_factorized(cfg: &LinkConfig, quad: &QuadratureSpec) -> Result<BerBreakdown> {
    cfg.validate()?;
    quad.validate()?;
    let gh = GaussHermite::new(quad.nodes_per_dimension)?;
    let w = cfg.ooc.weight();
    let later = later_hop_moments(cfg, &gh);
    let first = cfg.hops[0].fading;
    let h11_atoms = gh.lognormal_atoms(first.mu_x, first.sigma2_x);

    let mut terms: Vec<(Vec<usize>, f64)> = Vec::new();
    if cfg.direction == Direction::Uplink {
        for l in 0..cfg.users {
            let pl = prob_num_interferers(l, cfg.users, cfg.ooc)?;
            for (p, mult) in canonical_patterns(l, w) {
                let weight = pl * pattern_conditional_prob(&p) * mult as f64;
                terms.push((p.alpha, weight));
            }
        }
    } else {
        terms.push((vec![0; w], 1.0));
    }
    let max_hits = terms.iter().flat_map(|(a, _)| a.iter().copied()).max().unwrap_or(0);
    let mut beta_atoms: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 1.0)]];
    for hits in 1..=max_hits {
        let axis = interference_axis(cfg, hits)?;
        beta_atoms.push(gh.lognormal_atoms(axis.mu, axis.sigma2));
    }

    let (mut p10, mut first01) = (0.0, 0.0);
    for (alpha, weight) in &terms {
        let (mut t10, mut t01) = (0.0, 0.0);
        for &(h11, wh) in &h11_atoms {
            let mut c10 = Vec::with_capacity(w);
            let mut log_on = 0.0;
            for &a in alpha {
                let (mut s10, mut s01) = (0.0, 0.0);
                for &(beta, wb) in &beta_atoms[a] {
                    let (x10, x01) = cfg.first_hop_cers(h11, beta);
                    s10 += wb * x10;
                    s01 += wb * x01;
                }
                c10.push(s10);
                log_on += (-s01).ln_1p();
            }
            let e = elementary_symmetric(&c10);
            t10 += wh * e.iter().zip(&later.g).map(|(a, b)| a * b).sum::<f64>();
            t01 += wh * -log_on.exp_m1();
        }
        p10 += weight * t10;
        first01 += weight * t01;
    }
    let p01 = first01 + later.loss_any - first01 * later.loss_any;
    Ok(BerBreakdown::new(p10, p01))
}

pub fn uplink_ber(cfg: &LinkConfig, quad: &QuadratureSpec) -> Result<BerBreakdown> {
    if cfg.direction != Direction::Uplink {
        return Err(Error::invalid("direction", "expected uplink"));
    }
    ber_factorized(cfg, quad)
}

pub fn downlink_ber(cfg: &LinkConfig, quad: &QuadratureSpec) -> Result<BerBreakdown> {
    if cfg.direction != Direction::Downlink {
        return Err(Error::invalid("direction", "expected downlink"));
    }
    let bound = downlink_mai_free_bound(cfg.ooc);
    if cfg.users > bound {
        log::warn!(
            "{} downlink users exceed the overlap-free bound {bound}; the MAI-free model does not hold",
            cfg.users
        );
    }
    ber_factorized(cfg, quad)
}

/// Single-user relay chain from per-hop one-dimensional averages:
/// `1 - Π(1 - E[p_i])`.
pub fn p2p_ber(cfg: &LinkConfig, quad: &QuadratureSpec) -> Result<BerBreakdown> {
    cfg.validate()?;
    quad.validate()?;
    if cfg.direction != Direction::P2p {
        return Err(Error::invalid("direction", "expected p2p"));
    }
    let gh = GaussHermite::new(quad.nodes_per_dimension)?;
    let per_hop: Vec<f64> = (0..cfg.hops.len())
        .map(|i| {
            let f = cfg.hops[i].fading;
            gh.expect_lognormal(f.mu_x, f.sigma2_x, |h| cfg.hop_cer(i, h))
        })
        .collect();
    let p = e2e_cer(&per_hop);
    Ok(BerBreakdown::new(p, p))
}

/// Dispatches on the configured direction.
pub fn analytic_ber(cfg: &LinkConfig, quad: &QuadratureSpec) -> Result<BerBreakdown> {
    match cfg.direction {
        Direction::Uplink => uplink_ber(cfg, quad),
        Direction::Downlink => downlink_ber(cfg, quad),
        Direction::P2p => p2p_ber(cfg, quad),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det() -> DetectorParams {
        DetectorParams::default()
    }

    #[test]
    fn thermal_variance_scales() {
        let d = det();
        let base = thermal_variance(&d, 1e-8);
        assert!((base / 3.12e7 - 1.0).abs() < 0.01, "{base}");
        assert!((thermal_variance(&d, 2e-8) / base - 2.0).abs() < 1e-12);
        let mut r2 = d;
        r2.load_resistance *= 2.0;
        assert!((thermal_variance(&r2, 1e-8) / base - 0.5).abs() < 1e-12);
    }

    #[test]
    fn counts_examples() {
        let d = det();
        let c = chip_counts_uplink_first_hop(&d, 0.0, 1e-8, 3.1e-3, 1.0, 0.0);
        assert_eq!(c.m0, c.m1);
        assert!((c.m0 - 197.1).abs() < 0.1, "{}", c.m0);
        let c = chip_counts_uplink_first_hop(&d, 1e-3, 1e-8, 3.1e-3, 1.0, 0.0);
        assert!(((c.m1 - c.m0) / 6.64e4 - 1.0).abs() < 2e-3, "{}", c.m1 - c.m0);
    }

    #[test]
    fn threshold_examples() {
        assert!((gaussian_threshold(197.1, 197.1, 3.12e7) - 197.1).abs() < 1e-6);
        assert!((gaussian_threshold(4.0, 9.0, 0.0) - 6.0).abs() < 1e-12);
        let th = gaussian_threshold(197.1, 197.1 + 6.64e4, 3.12e7);
        let direct = ((197.1f64 + 6.64e4 + 3.12e7) * (197.1 + 3.12e7)).sqrt() - 3.12e7;
        assert!(th > 197.1 && th < 197.1 + 6.64e4);
        assert!((th - direct).abs() < 1e-6);
    }

    #[test]
    fn cer_examples() {
        let (p10, _) = cer_first_hop_uplink(ChipCounts { m0: 100.0, m1: 500.0 }, 100.0, 10.0);
        assert_eq!(p10, 0.5);
        assert_eq!(cer_hop(50.0, 50.0, 1.0), 0.5);
        assert!((cer_hop(197.1, 1e3, 1e300) - 0.5).abs() < 1e-9);
        let p = cer_hop(197.1, 197.1 + 6.64e4, 3.12e7);
        assert!(p > 1e-10 && p < 1e-1);
        assert!((e2e_cer(&[1e-3, 1e-3]) - 1.999e-3).abs() < 1e-15);
        assert!((e2e_cer(&[0.5; 3]) - 0.875).abs() < 1e-15);
        let (a, b) = conditional_ber_from_cers(&[0.5; 3], &[1e-3; 3]);
        assert_eq!(a, 0.125);
        assert!((b - 2.997001e-3).abs() < 1e-12);
    }

    #[test]
    fn interference_pushes_false_alarm_to_one() {
        let cfg = LinkConfig {
            direction: Direction::Uplink,
            users: 2,
            ooc: OocParams::new(50, 3).unwrap(),
            hops: vec![HopSpec::new(7.812e-6, 0.12).unwrap()],
            detector: det(),
            chip_duration: 1e-8,
            thermal_variance: 1e5,
            chip_power: 1.0,
        };
        let (p10, _) = cfg.first_hop_cers(1.0, 1e3);
        assert!(p10 > 1.0 - 1e-12);
    }

    #[test]
    fn elementary_symmetric_small() {
        let e = elementary_symmetric(&[1.0, 2.0, 3.0]);
        assert_eq!(e, vec![1.0, 6.0, 11.0, 6.0]);
    }

    #[test]
    fn tensor_rule_edge_cases() {
        let q = QuadratureSpec::with_nodes(10);
        let flat = [LognormalAxis { mu: 0.0, sigma2: 0.0 }; 3];
        let v = average_over_fading(|h| h.iter().sum(), &flat, &q).unwrap();
        assert_eq!(v, 3.0);
        let axes = [LognormalAxis { mu: -0.1, sigma2: 0.1 }; 2];
        let c = average_over_fading(|_| 0.37, &axes, &q).unwrap();
        assert!((c - 0.37).abs() < 1e-12);
        let too_many = [LognormalAxis { mu: 0.0, sigma2: 0.1 }; 9];
        assert!(matches!(
            average_over_fading(|_| 1.0, &too_many, &q),
            Err(Error::DimensionTooLarge { dimension: 9, cap: 8 })
        ));
        assert!(QuadratureSpec::with_nodes(3).validate().is_err());
    }
}
