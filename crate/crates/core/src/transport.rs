//! Monte Carlo photon transport through absorbing and scattering water.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Photons per independently seeded work unit.
pub const PHOTONS_PER_CHUNK: u64 = 20_000;

const ROULETTE_SURVIVAL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterOptics {
    /// Absorption coefficient, 1/m.
    pub absorption: f64,
    /// Scattering coefficient, 1/m.
    pub scattering: f64,
    /// Extinction coefficient, 1/m.
    pub extinction: f64,
    /// Henyey–Greenstein asymmetry.
    #[serde(default = "default_phase_g")]
    pub phase_g: f64,
}

fn default_phase_g() -> f64 {
    0.924
}

impl WaterOptics {
    pub fn new(absorption: f64, scattering: f64, extinction: f64, phase_g: f64) -> Result<Self> {
        let w = Self {
            absorption,
            scattering,
            extinction,
            phase_g,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn clear_ocean() -> Self {
        Self {
            absorption: 0.114,
            scattering: 0.037,
            extinction: 0.151,
            phase_g: 0.924,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.absorption >= 0.0) || !(self.scattering >= 0.0) {
            return Err(Error::invalid("water", "absorption and scattering must be nonnegative"));
        }
        if (self.extinction - (self.absorption + self.scattering)).abs() > 1e-9 {
            return Err(Error::invalid("water", "extinction must equal absorption plus scattering"));
        }
        if !(self.extinction > 0.0) {
            return Err(Error::invalid("water", "extinction must be positive"));
        }
        if !(self.phase_g > -1.0 && self.phase_g < 1.0) {
            return Err(Error::invalid("phase_g", "must lie in (-1, 1)"));
        }
        Ok(())
    }

    pub fn albedo(&self) -> f64 {
        self.scattering / self.extinction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGeometry {
    /// Link range, m.
    pub range: f64,
    /// Full beam divergence, degrees.
    pub tx_full_divergence_deg: f64,
    /// Receiver aperture diameter, m.
    #[serde(default = "default_aperture")]
    pub rx_aperture_diameter: f64,
    /// Receiver half-angle field of view, degrees.
    #[serde(default = "default_fov")]
    pub rx_half_fov_deg: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "default_refractive_index")]
    pub refractive_index: f64,
}

fn default_aperture() -> f64 {
    0.2
}
fn default_fov() -> f64 {
    40.0
}
fn default_wavelength() -> f64 {
    532e-9
}
fn default_refractive_index() -> f64 {
    1.331
}

impl LinkGeometry {
    pub fn new(range: f64, tx_full_divergence_deg: f64) -> Self {
        Self {
            range,
            tx_full_divergence_deg,
            rx_aperture_diameter: default_aperture(),
            rx_half_fov_deg: default_fov(),
            wavelength: default_wavelength(),
            refractive_index: default_refractive_index(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0) {
            return Err(Error::invalid("range", "must be positive"));
        }
        if !(self.tx_full_divergence_deg > 0.0 && self.tx_full_divergence_deg < 180.0) {
            return Err(Error::invalid("tx_full_divergence_deg", "must lie in (0, 180)"));
        }
        if !(self.rx_aperture_diameter > 0.0) {
            return Err(Error::invalid("rx_aperture_diameter", "must be positive"));
        }
        if !(self.rx_half_fov_deg > 0.0 && self.rx_half_fov_deg <= 90.0) {
            return Err(Error::invalid("rx_half_fov_deg", "must lie in (0, 90]"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be positive"));
        }
        if !(self.refractive_index >= 1.0) {
            return Err(Error::invalid("refractive_index", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McTransportConfig {
    pub photon_count: u64,
    #[serde(default = "default_w_th")]
    pub weight_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default = "default_max_bins")]
    pub max_bins: usize,
}

fn default_w_th() -> f64 {
    1e-6
}
fn default_bin_width() -> f64 {
    1e-10
}
fn default_max_bins() -> usize {
    10_000
}

impl McTransportConfig {
    pub fn new(photon_count: u64, seed: u64) -> Self {
        Self {
            photon_count,
            weight_threshold: default_w_th(),
            seed,
            bin_width: default_bin_width(),
            max_bins: default_max_bins(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.photon_count < 1 {
            return Err(Error::invalid("photon_count", "need at least one photon"));
        }
        if !(self.weight_threshold > 0.0 && self.weight_threshold < 1.0) {
            return Err(Error::invalid("weight_threshold", "must lie in (0, 1)"));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::invalid("bin_width", "must be positive"));
        }
        if self.max_bins == 0 {
            return Err(Error::invalid("max_bins", "must be positive"));
        }
        Ok(())
    }
}

/// Where the launched weight went, per launched photon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub launched: f64,
    pub deposited: f64,
    pub absorbed: f64,
    /// Net weight removed by Russian roulette (negative when survivors gained
    /// more than the killed photons carried).
    pub terminated: f64,
    pub escaped: f64,
}

impl EnergyLedger {
    fn add(&mut self, o: &EnergyLedger) {
        self.launched += o.launched;
        self.deposited += o.deposited;
        self.absorbed += o.absorbed;
        self.terminated += o.terminated;
        self.escaped += o.escaped;
    }

    pub fn relative_imbalance(&self) -> f64 {
        let out = self.deposited + self.absorbed + self.terminated + self.escaped;
        (out - self.launched).abs() / self.launched
    }
}

/// Fading-free channel response with time origin at the ballistic arrival.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpulseResponse {
    pub bin_width: f64,
    /// Received fraction of unit transmitted energy per bin.
    pub bins: Vec<f64>,
    pub total_received_fraction: f64,
    pub ledger: Option<EnergyLedger>,
}

impl ImpulseResponse {
    pub fn from_bins(bin_width: f64, bins: Vec<f64>) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::invalid("bin_width", "must be positive"));
        }
        if bins.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::invalid("bins", "weights must be nonnegative"));
        }
        let total = bins.iter().sum();
        Ok(Self {
            bin_width,
            bins,
            total_received_fraction: total,
            ledger: None,
        })
    }
}

struct ChunkTally {
    bins: Vec<f64>,
    ledger: EnergyLedger,
}

pub fn simulate_impulse_response(
    water: &WaterOptics,
    geom: &LinkGeometry,
    cfg: &McTransportConfig,
) -> Result<ImpulseResponse> {
    water.validate()?;
    geom.validate()?;
    cfg.validate()?;
    let chunks = cfg.photon_count.div_ceil(PHOTONS_PER_CHUNK);
    let tallies: Vec<Result<ChunkTally>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * PHOTONS_PER_CHUNK;
            let count = PHOTONS_PER_CHUNK.min(cfg.photon_count - start);
            run_chunk(water, geom, cfg, k, count)
        })
        .collect();
    let mut bins: Vec<f64> = Vec::new();
    let mut ledger = EnergyLedger::default();
    for t in tallies {
        let t = t?;
        if t.bins.len() > bins.len() {
            bins.resize(t.bins.len(), 0.0);
        }
        for (acc, v) in bins.iter_mut().zip(&t.bins) {
            *acc += v;
        }
        ledger.add(&t.ledger);
    }
    let n = cfg.photon_count as f64;
    for b in bins.iter_mut() {
        *b /= n;
    }
    let total = bins.iter().sum();
    Ok(ImpulseResponse {
        bin_width: cfg.bin_width,
        bins,
        total_received_fraction: total,
        ledger: Some(ledger),
    })
}

fn run_chunk(
    water: &WaterOptics,
    geom: &LinkGeometry,
    cfg: &McTransportConfig,
    chunk: u64,
    count: u64,
) -> Result<ChunkTally> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chunk);
    let mut bins = Vec::new();
    let mut ledger = EnergyLedger::default();
    let cos_div = (0.5 * geom.tx_full_divergence_deg).to_radians().cos();
    let cos_fov = geom.rx_half_fov_deg.to_radians().cos();
    let radius2 = 0.25 * geom.rx_aperture_diameter * geom.rx_aperture_diameter;
    let albedo = water.albedo();
    let g = water.phase_g;
    let d0 = geom.range;
    let seconds_per_metre = geom.refractive_index / SPEED_OF_LIGHT;

    for _ in 0..count {
        ledger.launched += 1.0;
        let mut w = 1.0f64;
        let mut pos = [0.0f64; 3];
        let mu = 1.0 - rng.random::<f64>() * (1.0 - cos_div);
        let phi = 2.0 * PI * rng.random::<f64>();
        let s = (1.0 - mu * mu).max(0.0).sqrt();
        let mut dir = [s * phi.cos(), s * phi.sin(), mu];
        let mut path = 0.0f64;
        loop {
            let step = -(1.0 - rng.random::<f64>()).ln() / water.extinction;
            let z_next = pos[2] + step * dir[2];
            if dir[2] > 0.0 && z_next >= d0 {
                let t = (d0 - pos[2]) / dir[2];
                let x = pos[0] + t * dir[0];
                let y = pos[1] + t * dir[1];
                path += t;
                if x * x + y * y <= radius2 && dir[2] >= cos_fov {
                    let delay = ((path - d0) * seconds_per_metre).max(0.0);
                    let bin = (delay / cfg.bin_width) as usize;
                    if bin >= cfg.max_bins {
                        return Err(Error::BinOverflow {
                            bin,
                            max_bins: cfg.max_bins,
                        });
                    }
                    if bin >= bins.len() {
                        bins.resize(bin + 1, 0.0);
                    }
                    bins[bin] += w;
                    ledger.deposited += w;
                } else {
                    ledger.escaped += w;
                }
                break;
            }
            for (p, d) in pos.iter_mut().zip(&dir) {
                *p += step * d;
            }
            path += step;
            ledger.absorbed += w * (1.0 - albedo);
            w *= albedo;
            if w < cfg.weight_threshold {
                if rng.random::<f64>() < ROULETTE_SURVIVAL {
                    let boosted = w / ROULETTE_SURVIVAL;
                    ledger.terminated -= boosted - w;
                    w = boosted;
                } else {
                    ledger.terminated += w;
                    break;
                }
            }
            let cos_t = sample_henyey_greenstein(g, rng.random::<f64>());
            let psi = 2.0 * PI * rng.random::<f64>();
            dir = rotate(dir, cos_t, psi);
        }
    }
    Ok(ChunkTally { bins, ledger })
}

/// Inverse-CDF draw of the scattering-angle cosine.
pub fn sample_henyey_greenstein(g: f64, u: f64) -> f64 {
    if g.abs() < 1e-6 {
        return 2.0 * u - 1.0;
    }
    let frac = (1.0 - g * g) / (1.0 - g + 2.0 * g * u);
    ((1.0 + g * g - frac * frac) / (2.0 * g)).clamp(-1.0, 1.0)
}

fn rotate(dir: [f64; 3], cos_t: f64, psi: f64) -> [f64; 3] {
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let (sp, cp) = psi.sin_cos();
    let [ux, uy, uz] = dir;
    if uz.abs() > 0.99999 {
        let sign = uz.signum();
        return [sin_t * cp, sin_t * sp, sign * cos_t];
    }
    let den = (1.0 - uz * uz).sqrt();
    let nx = sin_t * (ux * uz * cp - uy * sp) / den + ux * cos_t;
    let ny = sin_t * (uy * uz * cp + ux * sp) / den + uy * cos_t;
    let nz = -sin_t * cp * den + uz * cos_t;
    let norm = (nx * nx + ny * ny + nz * nz).sqrt();
    [nx / norm, ny / norm, nz / norm]
}

/// Received energy fraction within `[0, chip_duration]`, pro-rating the bin
/// that straddles the window edge.
pub fn channel_loss(ir: &ImpulseResponse, chip_duration: f64) -> f64 {
    window_energy(ir, chip_duration)
}

fn window_energy(ir: &ImpulseResponse, window: f64) -> f64 {
    let edge = window / ir.bin_width;
    let mut sum = 0.0;
    for (i, &b) in ir.bins.iter().enumerate() {
        let lo = i as f64;
        if lo >= edge {
            break;
        }
        sum += b * (edge - lo).min(1.0);
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsiCheck {
    /// In-window over out-of-window energy; infinite when nothing leaks.
    pub ratio: f64,
    pub satisfied: bool,
}

pub const DEFAULT_ISI_RATIO: f64 = 100.0;

pub fn check_isi_condition(ir: &ImpulseResponse, chip_duration: f64, ratio_threshold: f64) -> IsiCheck {
    let inside = window_energy(ir, chip_duration);
    let outside = (ir.bins.iter().sum::<f64>() - inside).max(0.0);
    let ratio = if outside <= 0.0 { f64::INFINITY } else { inside / outside };
    IsiCheck {
        ratio,
        satisfied: ratio > ratio_threshold,
    }
}

/// CSV with a `# key=value` header describing the run.
pub fn impulse_response_to_csv(
    ir: &ImpulseResponse,
    water: &WaterOptics,
    geom: &LinkGeometry,
    cfg: &McTransportConfig,
) -> String {
    let mut out = String::new();
    let header = [
        ("absorption", water.absorption),
        ("scattering", water.scattering),
        ("extinction", water.extinction),
        ("phase_g", water.phase_g),
        ("range", geom.range),
        ("tx_full_divergence_deg", geom.tx_full_divergence_deg),
        ("rx_aperture_diameter", geom.rx_aperture_diameter),
        ("rx_half_fov_deg", geom.rx_half_fov_deg),
        ("wavelength", geom.wavelength),
        ("refractive_index", geom.refractive_index),
        ("weight_threshold", cfg.weight_threshold),
        ("bin_width", ir.bin_width),
        ("total_received_fraction", ir.total_received_fraction),
    ];
    for (k, v) in header {
        let _ = writeln!(out, "# {k}={v:e}");
    }
    let _ = writeln!(out, "# photon_count={}", cfg.photon_count);
    let _ = writeln!(out, "# max_bins={}", cfg.max_bins);
    let _ = writeln!(out, "# seed={}", cfg.seed);
    out.push_str("time_s,weight\n");
    for (i, &b) in ir.bins.iter().enumerate() {
        let _ = writeln!(out, "{:e},{:e}", i as f64 * ir.bin_width, b);
    }
    out
}

/// Reads the CSV written by [`impulse_response_to_csv`]. Only `bin_width`
/// is required from the header.
pub fn parse_impulse_csv(text: &str) -> Result<ImpulseResponse> {
    let mut bin_width: Option<f64> = None;
    let mut bins: Vec<f64> = Vec::new();
    let mut seen_columns = false;
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                if k.trim() == "bin_width" {
                    let bw: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad bin_width `{}`", v.trim())))?;
                    if !(bw > 0.0) || !bw.is_finite() {
                        return Err(parse_err(line_no, "bin_width must be positive".into()));
                    }
                    bin_width = Some(bw);
                }
            }
            continue;
        }
        if !seen_columns {
            if line != "time_s,weight" {
                return Err(parse_err(line_no, "expected `time_s,weight` column header".into()));
            }
            seen_columns = true;
            continue;
        }
        let bw = bin_width.ok_or_else(|| parse_err(line_no, "bin_width missing from header".into()))?;
        let (t, w) = line
            .split_once(',')
            .ok_or_else(|| parse_err(line_no, "expected two columns".into()))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad time `{}`", t.trim())))?;
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad weight `{}`", w.trim())))?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(parse_err(line_no, "time must be finite and nonnegative".into()));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(parse_err(line_no, "weight must be finite and nonnegative".into()));
        }
        let pos = t / bw;
        if pos > 1e7 {
            return Err(parse_err(line_no, "time too far beyond bin range".into()));
        }
        let bin = pos.round() as usize;
        if (pos - bin as f64).abs() > 1e-6 {
            return Err(parse_err(line_no, "time is not on a bin edge".into()));
        }
        if bin < bins.len() {
            return Err(parse_err(line_no, "times must be strictly increasing".into()));
        }
        bins.resize(bin + 1, 0.0);
        bins[bin] = w;
    }
    if !seen_columns {
        return Err(parse_err(text.lines().count().max(1), "missing column header".into()));
    }
    let bw = bin_width.ok_or_else(|| parse_err(1, "bin_width missing from header".into()))?;
    ImpulseResponse::from_bins(bw, bins)
}
