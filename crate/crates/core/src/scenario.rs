//! Scenario files, channel resolution and experiment campaigns.
//!
//! A scenario is a TOML document. Top-level keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `name` | label used for output files (default `scenario`) |
//! | `direction` | `uplink`, `downlink` or `p2p` |
//! | `users` | simultaneous users `M` (forced to 1 for `p2p`) |
//! | `relays` | relay count `N`, or a list of counts for a sweep |
//! | `chip_duration` | seconds |
//! | `thermal_variance` | counts², overrides the detector-derived value |
//! | `power_dbm` | average transmitted bit power sweep, dBm re 1 mW |
//! | `evaluation` | `analytic`, `montecarlo` or `both` |
//! | `bit_count`, `seed`, `quadrature_nodes`, `target_ber` | evaluation controls |
//!
//! Tables: `[ooc]` (`length`, `weight`, `codebook = "generate"` or a file
//! path relative to the scenario, `seed`), `[water]`, `[turbulence]`,
//! `[detector]`, `[channel]` and an optional `[[layouts]]` array.
//!
//! `[channel]` carries `mode` (`table` or `mc`), `total_range`,
//! `divergence_deg` for evenly split hops, `[[channel.table]]` rows
//! (`range`, `divergence_deg`, `loss` and `sigma2_x` or
//! `scintillation_index`) and, for `mc`, the photon transport settings.
//! Each `[[layouts]]` entry names an explicit list of hops whose ranges must
//! add up to `total_range`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ber::{
    analytic_ber, chip_power_from_average, dbm_to_watts, thermal_variance, DetectorParams, Direction, HopSpec,
    LinkConfig, QuadratureSpec,
};
use crate::error::{Error, Result};
use crate::ooc::{
    downlink_mai_free_bound, generate_codebook, max_users, validate_codebook, Codeword, OocCodebook, OocParams,
};
use crate::sim::{run_simulation, SimRun};
use crate::transport::{
    channel_loss, impulse_response_to_csv, parse_impulse_csv, simulate_impulse_response, ImpulseResponse,
    LinkGeometry, McTransportConfig, WaterOptics,
};
use crate::turbulence::{
    fading_from_scintillation, scintillation_index, FadingModel, TurbulenceParams,
};

pub const DEFAULT_BITS: u64 = 1_000_000;
pub const DEFAULT_PHOTONS: u64 = 10_000_000;
pub const DEFAULT_CHIP_DURATION: f64 = 1e-8;
pub const DEFAULT_DIVERGENCE_DEG: f64 = 0.02;
pub const MAX_CODE_LENGTH: usize = 1 << 16;
pub const MAX_RELAYS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    #[default]
    Analytic,
    Montecarlo,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    #[default]
    Table,
    Mc,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RelaySpec {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    direction: Direction,
    users: Option<usize>,
    relays: Option<RelaySpec>,
    chip_duration: Option<f64>,
    thermal_variance: Option<f64>,
    #[serde(default)]
    power_dbm: Vec<f64>,
    #[serde(default)]
    evaluation: Evaluation,
    bit_count: Option<u64>,
    seed: Option<u64>,
    quadrature_nodes: Option<usize>,
    target_ber: Option<f64>,
    ooc: Option<RawOoc>,
    water: Option<WaterOptics>,
    turbulence: Option<TurbulenceParams>,
    detector: Option<DetectorParams>,
    channel: RawChannel,
    layouts: Option<Vec<RawLayout>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOoc {
    length: usize,
    weight: usize,
    codebook: Option<String>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    #[serde(default)]
    mode: ChannelMode,
    total_range: f64,
    divergence_deg: Option<f64>,
    #[serde(default)]
    table: Vec<RawRow>,
    photon_count: Option<u64>,
    weight_threshold: Option<f64>,
    bin_width: Option<f64>,
    max_bins: Option<usize>,
    seed: Option<u64>,
    rx_aperture_diameter: Option<f64>,
    rx_half_fov_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    range: f64,
    divergence_deg: f64,
    loss: f64,
    sigma2_x: Option<f64>,
    scintillation_index: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    name: String,
    hops: Vec<RawHop>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHop {
    range: f64,
    divergence_deg: Option<f64>,
}

/// Where a hop's loss and fading came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopSource {
    Table,
    Mc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedHop {
    pub range: f64,
    pub divergence_deg: f64,
    pub spec: HopSpec,
    pub source: HopSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubScenario {
    pub label: String,
    pub hops: Vec<ResolvedHop>,
}

impl SubScenario {
    pub fn relays(&self) -> usize {
        self.hops.len() - 1
    }
}

/// Fully resolved scenario.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    pub name: String,
    /// SHA-256 of the scenario text, hex encoded.
    pub content_hash: String,
    pub direction: Direction,
    pub users: usize,
    pub ooc: OocParams,
    pub codebook: OocCodebook,
    pub detector: DetectorParams,
    pub water: WaterOptics,
    pub turbulence: TurbulenceParams,
    pub chip_duration: f64,
    pub thermal_variance: f64,
    pub powers_dbm: Vec<f64>,
    pub evaluation: Evaluation,
    pub bit_count: u64,
    pub seed: u64,
    pub target_ber: Option<f64>,
    pub quadrature: QuadratureSpec,
    pub sub_scenarios: Vec<SubScenario>,
}

impl NetworkScenario {
    /// Link configuration of `sub` at average bit power `power_dbm`.
    pub fn link_config(&self, sub: &SubScenario, power_dbm: f64) -> LinkConfig {
        LinkConfig {
            direction: self.direction,
            users: self.users,
            ooc: self.ooc,
            hops: sub.hops.iter().map(|h| h.spec).collect(),
            detector: self.detector,
            chip_duration: self.chip_duration,
            thermal_variance: self.thermal_variance,
            chip_power: chip_power_from_average(dbm_to_watts(power_dbm), self.ooc, sub.relays()),
        }
    }
}

/// Impulse responses keyed by a hash of everything that determines them,
/// held in memory and optionally mirrored to a directory of CSV files.
#[derive(Debug, Default)]
pub struct ChannelCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, ImpulseResponse>>,
    hits: Mutex<u64>,
    misses: Mutex<u64>,
}

impl ChannelCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn key(water: &WaterOptics, geom: &LinkGeometry, cfg: &McTransportConfig) -> String {
        let record = serde_json::json!({ "water": water, "geometry": geom, "transport": cfg });
        hex::encode(Sha256::digest(record.to_string().as_bytes()))
    }

    pub fn hits(&self) -> u64 {
        *self.hits.lock().expect("cache counter")
    }

    pub fn misses(&self) -> u64 {
        *self.misses.lock().expect("cache counter")
    }

    pub fn impulse_response(
        &self,
        water: &WaterOptics,
        geom: &LinkGeometry,
        cfg: &McTransportConfig,
    ) -> Result<ImpulseResponse> {
        let key = Self::key(water, geom, cfg);
        if let Some(ir) = self.memory.lock().expect("cache map").get(&key) {
            *self.hits.lock().expect("cache counter") += 1;
            return Ok(ir.clone());
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{key}.csv"));
            if let Ok(text) = std::fs::read_to_string(&path) {
                if let Ok(ir) = parse_impulse_csv(&text) {
                    *self.hits.lock().expect("cache counter") += 1;
                    self.memory.lock().expect("cache map").insert(key, ir.clone());
                    return Ok(ir);
                }
                log::warn!("ignoring unreadable cache entry {}", path.display());
            }
        }
        *self.misses.lock().expect("cache counter") += 1;
        let ir = simulate_impulse_response(water, geom, cfg)?;
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir)?;
            write_atomic(&dir.join(format!("{key}.csv")), &impulse_response_to_csv(&ir, water, geom, cfg))?;
        }
        self.memory.lock().expect("cache map").insert(key, ir.clone());
        Ok(ir)
    }
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<NetworkScenario> {
    load_scenario_with_cache(path, &ChannelCache::in_memory())
}

pub fn load_scenario_with_cache(path: &Path, cache: &ChannelCache) -> Result<NetworkScenario> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base, cache)
}

/// Parses and resolves a scenario; relative codebook paths resolve against
/// `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path, cache: &ChannelCache) -> Result<NetworkScenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let field = e.span().map_or_else(|| "document".to_string(), |s| format!("bytes {}..{}", s.start, s.end));
        Error::schema(field, e.message().to_string())
    })?;
    let content_hash = hex::encode(Sha256::digest(text.as_bytes()));

    let (users, ooc) = match raw.direction {
        Direction::P2p => {
            if raw.users.is_some_and(|u| u != 1) || raw.ooc.as_ref().is_some_and(|o| o.length != 1 || o.weight != 1) {
                log::warn!("point-to-point scenarios always use one user and F = W = 1");
            }
            (1, OocParams::new(1, 1)?)
        }
        _ => {
            let o = raw.ooc.as_ref().ok_or_else(|| Error::schema("ooc", "required for uplink and downlink"))?;
            if o.length > MAX_CODE_LENGTH {
                return Err(Error::schema("ooc.length", format!("above the supported maximum {MAX_CODE_LENGTH}")));
            }
            let params = OocParams::new(o.length, o.weight).map_err(|e| Error::schema("ooc", e.to_string()))?;
            let users = raw.users.ok_or_else(|| Error::schema("users", "required for uplink and downlink"))?;
            if users == 0 {
                return Err(Error::schema("users", "need at least one user"));
            }
            (users, params)
        }
    };
    if ooc.weight() > 1 {
        let bound = max_users(ooc)?;
        if users > bound {
            return Err(Error::CapacityExceeded { requested: users, bound });
        }
    }
    if raw.direction == Direction::Downlink && users > downlink_mai_free_bound(ooc) {
        log::warn!(
            "{users} downlink users exceed the overlap-free bound {}; downlink results assume no MAI",
            downlink_mai_free_bound(ooc)
        );
    }

    let codebook = resolve_codebook(&raw, ooc, users, base_dir)?;

    let chip_duration = raw.chip_duration.unwrap_or(DEFAULT_CHIP_DURATION);
    if !(chip_duration > 0.0) {
        return Err(Error::schema("chip_duration", "must be positive"));
    }
    let detector = raw.detector.unwrap_or_default();
    detector.validate().map_err(|e| Error::schema("detector", e.to_string()))?;
    let water = raw.water.unwrap_or_else(WaterOptics::clear_ocean);
    water.validate().map_err(|e| Error::schema("water", e.to_string()))?;
    let turbulence = raw.turbulence.unwrap_or_else(TurbulenceParams::reference);
    turbulence.validate().map_err(|e| Error::schema("turbulence", e.to_string()))?;
    let thermal = raw.thermal_variance.unwrap_or_else(|| thermal_variance(&detector, chip_duration));
    if !(thermal >= 0.0) || !thermal.is_finite() {
        return Err(Error::schema("thermal_variance", "must be nonnegative and finite"));
    }
    if raw.power_dbm.iter().any(|p| !p.is_finite()) {
        return Err(Error::schema("power_dbm", "powers must be finite"));
    }
    let quadrature = QuadratureSpec::with_nodes(raw.quadrature_nodes.unwrap_or(QuadratureSpec::default().nodes_per_dimension));
    quadrature.validate().map_err(|e| Error::schema("quadrature_nodes", e.to_string()))?;
    if let Some(t) = raw.target_ber {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::schema("target_ber", "must lie in (0, 1)"));
        }
    }

    let layouts = hop_layouts(&raw)?;
    let resolver = HopResolver {
        channel: &raw.channel,
        water,
        turbulence,
        chip_duration,
        wavelength: detector.wavelength,
        cache,
    };
    let mut sub_scenarios = Vec::with_capacity(layouts.len());
    for (label, hops) in layouts {
        let resolved = hops
            .iter()
            .map(|&(range, div)| resolver.resolve(range, div))
            .collect::<Result<Vec<_>>>()?;
        sub_scenarios.push(SubScenario { label, hops: resolved });
    }

    Ok(NetworkScenario {
        name: raw.name.clone().unwrap_or_else(|| "scenario".into()),
        content_hash,
        direction: raw.direction,
        users,
        ooc,
        codebook,
        detector,
        water,
        turbulence,
        chip_duration,
        thermal_variance: thermal,
        powers_dbm: raw.power_dbm.clone(),
        evaluation: raw.evaluation,
        bit_count: raw.bit_count.unwrap_or(DEFAULT_BITS),
        seed: raw.seed.unwrap_or(0),
        target_ber: raw.target_ber,
        quadrature,
        sub_scenarios,
    })
}

fn resolve_codebook(raw: &RawScenario, ooc: OocParams, users: usize, base_dir: &Path) -> Result<OocCodebook> {
    if ooc.weight() == 1 && ooc.length() == 1 {
        return Ok(OocCodebook::new(ooc, vec![Codeword::new(vec![0])]));
    }
    let spec = raw.ooc.as_ref().and_then(|o| o.codebook.clone()).unwrap_or_else(|| "generate".into());
    let seed = raw.ooc.as_ref().and_then(|o| o.seed).unwrap_or(0);
    if spec == "generate" {
        return generate_codebook(ooc, users, seed);
    }
    let path = base_dir.join(&spec);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::schema("ooc.codebook", format!("cannot read {}: {e}", path.display())))?;
    let book = OocCodebook::parse(&text)?;
    if book.params != ooc {
        return Err(Error::schema("ooc.codebook", "file code parameters differ from [ooc]"));
    }
    let report = validate_codebook(&book);
    if !report.is_valid() {
        return Err(Error::schema("ooc.codebook", format!("correlation violations: {:?}", report.violations)));
    }
    if book.len() < users {
        return Err(Error::schema("ooc.codebook", format!("{} codewords for {users} users", book.len())));
    }
    Ok(book)
}

type Layout = (String, Vec<(f64, f64)>);

fn hop_layouts(raw: &RawScenario) -> Result<Vec<Layout>> {
    let total = raw.channel.total_range;
    if !(total > 0.0) {
        return Err(Error::schema("channel.total_range", "must be positive"));
    }
    let default_div = raw.channel.divergence_deg.unwrap_or(DEFAULT_DIVERGENCE_DEG);
    if let Some(layouts) = &raw.layouts {
        if raw.relays.is_some() {
            return Err(Error::schema("relays", "give either relays or layouts, not both"));
        }
        if layouts.is_empty() {
            return Err(Error::schema("layouts", "need at least one layout"));
        }
        return layouts
            .iter()
            .map(|l| {
                if l.hops.is_empty() || l.hops.len() > MAX_RELAYS + 1 {
                    return Err(Error::schema(
                        format!("layouts.{}", l.name),
                        format!("need between 1 and {} hops", MAX_RELAYS + 1),
                    ));
                }
                let sum: f64 = l.hops.iter().map(|h| h.range).sum();
                if (sum - total).abs() > 1e-6 * total {
                    return Err(Error::schema(
                        format!("layouts.{}", l.name),
                        format!("hop ranges add to {sum} m, expected {total} m"),
                    ));
                }
                let hops = l.hops.iter().map(|h| (h.range, h.divergence_deg.unwrap_or(default_div))).collect();
                Ok((l.name.clone(), hops))
            })
            .collect();
    }
    let counts = match &raw.relays {
        None => vec![0],
        Some(RelaySpec::One(n)) => vec![*n],
        Some(RelaySpec::Many(v)) if v.is_empty() => return Err(Error::schema("relays", "empty relay list")),
        Some(RelaySpec::Many(v)) => v.clone(),
    };
    if let Some(n) = counts.iter().find(|&&n| n > MAX_RELAYS) {
        return Err(Error::schema("relays", format!("{n} relays above the supported maximum {MAX_RELAYS}")));
    }
    Ok(counts
        .into_iter()
        .map(|n| {
            let range = total / (n + 1) as f64;
            (format!("N={n}"), vec![(range, default_div); n + 1])
        })
        .collect())
}

struct HopResolver<'a> {
    channel: &'a RawChannel,
    water: WaterOptics,
    turbulence: TurbulenceParams,
    chip_duration: f64,
    wavelength: f64,
    cache: &'a ChannelCache,
}

impl HopResolver<'_> {
    fn resolve(&self, range: f64, divergence_deg: f64) -> Result<ResolvedHop> {
        match self.channel.mode {
            ChannelMode::Table => {
                let row = self
                    .channel
                    .table
                    .iter()
                    .find(|r| (r.range - range).abs() < 1e-6 && (r.divergence_deg - divergence_deg).abs() < 1e-9)
                    .ok_or_else(|| {
                        Error::schema(
                            "channel.table",
                            format!("no row for a {range} m hop at {divergence_deg} deg"),
                        )
                    })?;
                let fading = match (row.sigma2_x, row.scintillation_index) {
                    (Some(s), _) => FadingModel::from_log_amplitude_variance(s),
                    (None, Some(si)) => fading_from_scintillation(si),
                    (None, None) => {
                        return Err(Error::schema("channel.table", "row needs sigma2_x or scintillation_index"))
                    }
                }
                .map_err(|e| Error::schema("channel.table", e.to_string()))?;
                let spec = HopSpec { loss: row.loss, fading };
                spec.validate().map_err(|e| Error::schema("channel.table", e.to_string()))?;
                Ok(ResolvedHop {
                    range,
                    divergence_deg,
                    spec,
                    source: HopSource::Table,
                })
            }
            ChannelMode::Mc => {
                let c = self.channel;
                let mut geom = LinkGeometry::new(range, divergence_deg);
                geom.wavelength = self.wavelength;
                if let Some(d) = c.rx_aperture_diameter {
                    geom.rx_aperture_diameter = d;
                }
                if let Some(f) = c.rx_half_fov_deg {
                    geom.rx_half_fov_deg = f;
                }
                geom.validate().map_err(|e| Error::schema("channel", e.to_string()))?;
                let mut cfg = McTransportConfig::new(c.photon_count.unwrap_or(DEFAULT_PHOTONS), c.seed.unwrap_or(0));
                if let Some(w) = c.weight_threshold {
                    cfg.weight_threshold = w;
                }
                if let Some(b) = c.bin_width {
                    cfg.bin_width = b;
                }
                if let Some(m) = c.max_bins {
                    cfg.max_bins = m;
                }
                cfg.validate().map_err(|e| Error::schema("channel", e.to_string()))?;
                let ir = self.cache.impulse_response(&self.water, &geom, &cfg)?;
                let loss = channel_loss(&ir, self.chip_duration);
                if !(loss > 0.0) {
                    return Err(Error::Domain(format!(
                        "no photons reached the receiver over {range} m; raise photon_count"
                    )));
                }
                let si = scintillation_index(&self.turbulence, range, self.wavelength)?;
                Ok(ResolvedHop {
                    range,
                    divergence_deg,
                    spec: HopSpec {
                        loss,
                        fading: fading_from_scintillation(si)?,
                    },
                    source: HopSource::Mc,
                })
            }
        }
    }
}

/// Campaign-wide overrides, typically from the command line.
#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    pub jobs: Option<usize>,
    pub bit_count: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Analytic,
    Montecarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_hash: String,
    pub scenario: String,
    pub sub_scenario: String,
    pub relays: usize,
    pub direction: Direction,
    pub users: usize,
    pub power_dbm: f64,
    pub chip_power_w: f64,
    pub evaluation: RowKind,
    pub ber_analytic: Option<f64>,
    pub ber_mc: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub bits: Option<u64>,
    pub errors: Option<u64>,
    /// `None` on success, otherwise the error message.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failure.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scenario_hash",
            "scenario",
            "sub_scenario",
            "relays",
            "direction",
            "users",
            "power_dbm",
            "chip_power_w",
            "evaluation",
            "ber_analytic",
            "ber_mc",
            "ci_low",
            "ci_high",
            "bits",
            "errors",
            "status",
        ])
        .expect("writing to memory");
        let sci = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.scenario_hash.clone(),
                r.scenario.clone(),
                r.sub_scenario.clone(),
                r.relays.to_string(),
                r.direction.to_string(),
                r.users.to_string(),
                r.power_dbm.to_string(),
                format!("{:.6e}", r.chip_power_w),
                match r.evaluation {
                    RowKind::Analytic => "analytic".into(),
                    RowKind::Montecarlo => "montecarlo".into(),
                },
                sci(r.ber_analytic),
                sci(r.ber_mc),
                sci(r.ci_low),
                sci(r.ci_high),
                r.bits.map(|b| b.to_string()).unwrap_or_default(),
                r.errors.map(|b| b.to_string()).unwrap_or_default(),
                r.failure.as_ref().map_or_else(|| "ok".to_string(), |m| format!("failed: {m}")),
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
    }
}

struct Job {
    sub: usize,
    power: usize,
    kind: RowKind,
}

/// Seed of one Monte Carlo row, derived from the campaign seed and the row
/// position so that rows are independent and reproducible.
fn row_seed(seed: u64, sub: usize, power: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((sub as u64) << 32) | power as u64);
    rng.next_u64()
}

pub fn run_campaign(scenario: &NetworkScenario, opts: &CampaignOptions) -> Result<ResultTable> {
    let kinds: &[RowKind] = match scenario.evaluation {
        Evaluation::Analytic => &[RowKind::Analytic],
        Evaluation::Montecarlo => &[RowKind::Montecarlo],
        Evaluation::Both => &[RowKind::Analytic, RowKind::Montecarlo],
    };
    let mut jobs = Vec::new();
    for sub in 0..scenario.sub_scenarios.len() {
        for power in 0..scenario.powers_dbm.len() {
            for &kind in kinds {
                jobs.push(Job { sub, power, kind });
            }
        }
    }
    let bit_count = opts.bit_count.unwrap_or(scenario.bit_count);
    let seed = opts.seed.unwrap_or(scenario.seed);
    let run_job = |job: &Job| -> ResultRow {
        let sub = &scenario.sub_scenarios[job.sub];
        let power_dbm = scenario.powers_dbm[job.power];
        let cfg = scenario.link_config(sub, power_dbm);
        let mut row = ResultRow {
            scenario_hash: scenario.content_hash.clone(),
            scenario: scenario.name.clone(),
            sub_scenario: sub.label.clone(),
            relays: sub.relays(),
            direction: scenario.direction,
            users: scenario.users,
            power_dbm,
            chip_power_w: cfg.chip_power,
            evaluation: job.kind,
            ber_analytic: None,
            ber_mc: None,
            ci_low: None,
            ci_high: None,
            bits: None,
            errors: None,
            failure: None,
        };
        match job.kind {
            RowKind::Analytic => match analytic_ber(&cfg, &scenario.quadrature) {
                Ok(b) => row.ber_analytic = Some(b.ber),
                Err(e) => row.failure = Some(e.to_string()),
            },
            RowKind::Montecarlo => {
                let run = SimRun {
                    config: cfg,
                    codebook: scenario.codebook.clone(),
                    bit_count,
                    seed: row_seed(seed, job.sub, job.power),
                    delays: None,
                    target_ber: scenario.target_ber,
                };
                match run_simulation(&run) {
                    Ok(r) => {
                        row.ber_mc = Some(r.ber);
                        row.ci_low = Some(r.ci_low);
                        row.ci_high = Some(r.ci_high);
                        row.bits = Some(r.bits);
                        row.errors = Some(r.errors);
                    }
                    Err(e) => row.failure = Some(e.to_string()),
                }
            }
        }
        row
    };
    let rows = match opts.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::invalid("jobs", e.to_string()))?;
            pool.install(|| jobs.par_iter().map(run_job).collect())
        }
        None => jobs.par_iter().map(run_job).collect(),
    };
    Ok(ResultTable { rows })
}

/// A single-hop channel request given as comma-separated `key=value` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct HopRequest {
    pub water: WaterOptics,
    pub geometry: LinkGeometry,
    pub transport: McTransportConfig,
    pub chip_duration: f64,
}

/// Parses e.g. `range=30,divergence=0.02,photons=100000,seed=7`.
///
/// Recognised keys: `range` (required), `divergence`, `fov`, `aperture`,
/// `wavelength`, `photons`, `seed`, `threshold`, `bin_width`, `max_bins`,
/// `chip_duration`, `absorption`, `scattering`, `g`.
pub fn parse_hop_spec(text: &str) -> Result<HopRequest> {
    let mut range = None;
    let mut geometry = LinkGeometry::new(1.0, DEFAULT_DIVERGENCE_DEG);
    let mut transport = McTransportConfig::new(DEFAULT_PHOTONS, 0);
    let mut chip_duration = DEFAULT_CHIP_DURATION;
    let clear = WaterOptics::clear_ocean();
    let (mut absorption, mut scattering, mut g) = (clear.absorption, clear.scattering, clear.phase_g);
    for (i, item) in text.split(',').map(str::trim).enumerate() {
        if item.is_empty() {
            continue;
        }
        let field = i + 1;
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::schema(format!("hop-spec item {field}"), format!("expected key=value, got `{item}`")))?;
        let key = key.trim();
        let value = value.trim();
        let float = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::schema(key.to_string(), format!("not a finite number: `{value}`")))
        };
        let integer = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::schema(key.to_string(), format!("not a nonnegative integer: `{value}`")))
        };
        match key {
            "range" => range = Some(float()?),
            "divergence" => geometry.tx_full_divergence_deg = float()?,
            "fov" => geometry.rx_half_fov_deg = float()?,
            "aperture" => geometry.rx_aperture_diameter = float()?,
            "wavelength" => geometry.wavelength = float()?,
            "photons" => transport.photon_count = integer()?,
            "seed" => transport.seed = integer()?,
            "threshold" => transport.weight_threshold = float()?,
            "bin_width" => transport.bin_width = float()?,
            "max_bins" => {
                transport.max_bins = usize::try_from(integer()?).map_err(|_| Error::schema("max_bins", "too large"))?
            }
            "chip_duration" => chip_duration = float()?,
            "absorption" => absorption = float()?,
            "scattering" => scattering = float()?,
            "g" => g = float()?,
            other => return Err(Error::schema(other.to_string(), "unknown hop-spec key")),
        }
    }
    geometry.range = range.ok_or_else(|| Error::schema("range", "required"))?;
    geometry.validate().map_err(|e| Error::schema("hop-spec", e.to_string()))?;
    transport.validate().map_err(|e| Error::schema("hop-spec", e.to_string()))?;
    if !(chip_duration > 0.0) {
        return Err(Error::schema("chip_duration", "must be positive"));
    }
    let water = WaterOptics::new(absorption, scattering, absorption + scattering, g)
        .map_err(|e| Error::schema("hop-spec", e.to_string()))?;
    Ok(HopRequest {
        water,
        geometry,
        transport,
        chip_duration,
    })
}
