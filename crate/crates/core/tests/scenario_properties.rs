use std::path::{Path, PathBuf};

use uwoc_core::scenario::{load_scenario, parse_scenario, run_campaign, CampaignOptions, ChannelCache, ResultTable};

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

const MC_SCENARIO: &str = r#"
name = "mc_hops"
direction = "p2p"
relays = [0, 1]
power_dbm = [-42.0, -38.0]
evaluation = "both"
bit_count = 20000
seed = 3

[channel]
mode = "mc"
total_range = 8.0
divergence_deg = 10.0
photon_count = 20000
seed = 5
"#;

#[test]
fn campaigns_are_byte_identical_across_thread_counts() {
    let cache = ChannelCache::in_memory();
    let scenario = parse_scenario(MC_SCENARIO, Path::new("."), &cache).unwrap();
    let one = run_campaign(&scenario, &CampaignOptions { jobs: Some(1), ..Default::default() }).unwrap();
    let four = run_campaign(&scenario, &CampaignOptions { jobs: Some(4), ..Default::default() }).unwrap();
    assert_eq!(one.to_csv(), four.to_csv());
    assert_eq!(one.rows.len(), 2 * 2 * 2);
    let reseeded = run_campaign(&scenario, &CampaignOptions { seed: Some(4), ..Default::default() }).unwrap();
    assert_ne!(one.to_csv(), reseeded.to_csv());
}

#[test]
fn rows_carry_the_content_hash() {
    let scenario = parse_scenario(MC_SCENARIO, Path::new("."), &ChannelCache::in_memory()).unwrap();
    let table = run_campaign(&scenario, &CampaignOptions::default()).unwrap();
    assert_eq!(scenario.content_hash.len(), 64);
    assert!(table.rows.iter().all(|r| r.scenario_hash == scenario.content_hash));
    let other = parse_scenario(&MC_SCENARIO.replace("seed = 3", "seed = 4"), Path::new("."), &ChannelCache::in_memory())
        .unwrap();
    assert_ne!(other.content_hash, scenario.content_hash);
}

#[test]
fn transport_cache_hits_only_on_identical_inputs() {
    let cache = ChannelCache::in_memory();
    // N=0 needs one 8 m hop, N=1 two identical 4 m hops
    parse_scenario(MC_SCENARIO, Path::new("."), &cache).unwrap();
    assert_eq!((cache.misses(), cache.hits()), (2, 1));
    parse_scenario(MC_SCENARIO, Path::new("."), &cache).unwrap();
    assert_eq!((cache.misses(), cache.hits()), (2, 4));
    let murkier = MC_SCENARIO.replace(
        "[channel]",
        "[water]\nabsorption = 0.12\nscattering = 0.037\nextinction = 0.157\nphase_g = 0.924\n\n[channel]",
    );
    for changed in [
        MC_SCENARIO.replace("seed = 5", "seed = 6"),
        MC_SCENARIO.replace("photon_count = 20000", "photon_count = 20001"),
        MC_SCENARIO.replace("divergence_deg = 10.0", "divergence_deg = 9.0"),
        murkier,
    ] {
        let before = cache.misses();
        parse_scenario(&changed, Path::new("."), &cache).unwrap();
        assert_eq!(cache.misses(), before + 2, "{changed}");
    }
}

#[test]
fn disk_cache_survives_a_new_process_view() {
    let dir = tempfile::tempdir().unwrap();
    let first = ChannelCache::on_disk(dir.path());
    let a = parse_scenario(MC_SCENARIO, Path::new("."), &first).unwrap();
    let second = ChannelCache::on_disk(dir.path());
    let b = parse_scenario(MC_SCENARIO, Path::new("."), &second).unwrap();
    assert_eq!(second.misses(), 0);
    assert_eq!(a.sub_scenarios, b.sub_scenarios);
}

#[test]
fn every_shipped_scenario_loads() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 9);
    let relays = load_scenario(&shipped("uplink_relay_sweep.toml")).unwrap();
    assert_eq!(relays.sub_scenarios.len(), 5);
    assert_eq!(relays.users, 5);
    assert!((relays.thermal_variance - 3.12e7).abs() < 1.0);
}

/// Power in dBm at which a sub-scenario's analytic BER first drops to
/// `target`, interpolated in log BER.
fn power_at(table: &ResultTable, sub: &str, target: f64) -> f64 {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.sub_scenario == sub)
        .map(|r| (r.power_dbm, r.ber_analytic.unwrap()))
        .collect();
    for w in pts.windows(2) {
        let ((p0, b0), (p1, b1)) = (w[0], w[1]);
        if b0 >= target && b1 < target {
            let t = (b0.ln() - target.ln()) / (b0.ln() - b1.ln().max(-700.0));
            return p0 + t * (p1 - p0);
        }
    }
    panic!("{sub} never crosses {target}");
}

#[test]
fn relay_placement_modes_order_as_published() {
    let scenario = load_scenario(&shipped("relay_placement.toml")).unwrap();
    let table = run_campaign(&scenario, &CampaignOptions::default()).unwrap();
    let gap = power_at(&table, "mode_VI", 1e-6) - power_at(&table, "mode_IV", 1e-6);
    assert!((gap - 7.5).abs() < 1.5, "mode IV leads mode VI by {gap:.2} dB");
    let curves = ["mode_I", "mode_II", "mode_III", "mode_IV", "mode_V", "mode_VI"];
    for sub in curves {
        let ber: Vec<f64> = table.rows.iter().filter(|r| r.sub_scenario == sub).map(|r| r.ber_analytic.unwrap()).collect();
        assert!(ber.windows(2).all(|w| w[1] <= w[0]), "{sub} not monotone");
    }
}

#[test]
fn relay_sweep_curves_are_ordered() {
    let scenario = load_scenario(&shipped("p2p_relay_sweep.toml")).unwrap();
    let table = run_campaign(&scenario, &CampaignOptions::default()).unwrap();
    let needed: Vec<f64> = (0..5).map(|n| power_at(&table, &format!("N={n}"), 1e-6)).collect();
    assert!(needed.windows(2).all(|w| w[1] < w[0]), "{needed:?}");
    let gain = needed[0] - needed[1];
    assert!((gain - 32.0).abs() < 3.0, "dual-hop gain {gain:.2} dB");
}
