//! Bit-level Monte Carlo of the chip detect-and-forward chain.
//!
//! Only the desired user's mark chips are simulated, since the destination
//! decision reads nothing else. Interference reaches those chips through a
//! precomputed table of which mark each interferer shift lands on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ber::{gaussian_threshold, Direction, LinkConfig};
use crate::error::{Error, Result};
use crate::ooc::{align_for_downlink, OocCodebook};

/// Means at or above this are drawn from the matching Gaussian.
pub const POISSON_EXACT_LIMIT: f64 = 1e3;

/// Bits per independently seeded block.
pub const BITS_PER_BLOCK: u64 = 50_000;

pub const MIN_BITS: u64 = 1_000;

#[derive(Debug, Clone)]
pub struct SimRun {
    pub config: LinkConfig,
    pub codebook: OocCodebook,
    pub bit_count: u64,
    pub seed: u64,
    /// Fixed interferer delays in chips, one per user with the desired user
    /// first at 0. `None` redraws every interferer delay each bit.
    pub delays: Option<Vec<usize>>,
    /// BER the caller wants resolved; rejected when below `10 / bit_count`.
    pub target_ber: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Chip decisions that differ from that hop's input, per hop.
    pub hop_chip_errors: Vec<u64>,
    pub hop_chip_trials: u64,
    /// Mark chips whose destination state differs from the transmitted one.
    pub e2e_chip_errors: u64,
    /// Interferer marks that landed on a desired mark.
    pub mark_collisions: u64,
    pub poisson_exact_limit: f64,
}

impl SimResult {
    pub fn e2e_cer(&self) -> f64 {
        self.e2e_chip_errors as f64 / self.hop_chip_trials as f64
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    bits: u64,
    errors: u64,
    hop_chip_errors: Vec<u64>,
    hop_chip_trials: u64,
    e2e_chip_errors: u64,
    mark_collisions: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.bits += o.bits;
        self.errors += o.errors;
        if self.hop_chip_errors.len() < o.hop_chip_errors.len() {
            self.hop_chip_errors.resize(o.hop_chip_errors.len(), 0);
        }
        for (a, b) in self.hop_chip_errors.iter_mut().zip(&o.hop_chip_errors) {
            *a += b;
        }
        self.hop_chip_trials += o.hop_chip_trials;
        self.e2e_chip_errors += o.e2e_chip_errors;
        self.mark_collisions += o.mark_collisions;
        self
    }
}

/// 95% Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    let low = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Chip-wise optical sum at the first receiver: user `n`'s frame is
/// cyclically delayed by `delays[n]` chips and scaled by `gains[n]`.
pub fn superpose_mai(frames: &[Vec<bool>], delays: &[usize], gains: &[f64]) -> Vec<f64> {
    let len = frames.first().map_or(0, |f| f.len());
    let mut out = vec![0.0; len];
    for ((frame, &tau), &g) in frames.iter().zip(delays).zip(gains) {
        for (j, &on) in frame.iter().enumerate() {
            if on {
                out[(j + tau) % len] += g;
            }
        }
    }
    out
}

/// Photon count plus thermal noise for a chip with mean count `mean`.
pub fn sample_chip_statistic(mean: f64, sigma2_th: f64, rng: &mut impl Rng) -> f64 {
    let photons = if mean <= 0.0 {
        0.0
    } else if mean < POISSON_EXACT_LIMIT {
        Poisson::new(mean).expect("positive finite mean").sample(rng)
    } else {
        let z: f64 = rng.sample(StandardNormal);
        mean + mean.sqrt() * z
    };
    let noise: f64 = rng.sample(StandardNormal);
    photons + sigma2_th.sqrt() * noise
}

/// A chip reads ON iff its statistic strictly exceeds the threshold.
pub fn detect_chip(statistic: f64, threshold: f64) -> bool {
    statistic > threshold
}

/// For each interferer and delay, the desired mark (by index) its codeword
/// lands on, if any.
fn hit_table(codebook: &OocCodebook, users: usize) -> (Vec<Vec<Vec<usize>>>, bool) {
    let f = codebook.params.length();
    let desired = codebook.codewords[0].chips(f);
    let desired_index: Vec<Option<usize>> = {
        let mut idx = vec![None; f];
        for (q, &p) in codebook.codewords[0].marks().iter().enumerate() {
            idx[p] = Some(q);
        }
        idx
    };
    let mut multi = false;
    let table = (1..users)
        .map(|n| {
            (0..f)
                .map(|tau| {
                    let hits: Vec<usize> = codebook.codewords[n]
                        .marks()
                        .iter()
                        .filter_map(|&p| {
                            let j = (p + tau) % f;
                            if desired[j] {
                                desired_index[j]
                            } else {
                                None
                            }
                        })
                        .collect();
                    multi |= hits.len() > 1;
                    hits
                })
                .collect()
        })
        .collect();
    (table, multi)
}

pub fn run_simulation(run: &SimRun) -> Result<SimResult> {
    let cfg = &run.config;
    cfg.validate()?;
    if run.bit_count < MIN_BITS {
        return Err(Error::invalid("bit_count", format!("need at least {MIN_BITS} bits")));
    }
    if let Some(target) = run.target_ber {
        let needed = (10.0 / target).ceil() as u64;
        if !(target > 0.0) || target < 10.0 / run.bit_count as f64 {
            return Err(Error::InsufficientBits {
                target,
                needed,
                bits: run.bit_count,
            });
        }
    }
    if run.codebook.params != cfg.ooc {
        return Err(Error::invalid("codebook", "parameters differ from the link configuration"));
    }
    if run.codebook.len() < cfg.users {
        return Err(Error::invalid("codebook", "fewer codewords than users"));
    }
    let f = cfg.ooc.length();
    if let Some(d) = &run.delays {
        if d.len() != cfg.users || d.first() != Some(&0) || d.iter().any(|&t| t >= f) {
            return Err(Error::invalid("delays", "need one delay per user in [0, F), the first being 0"));
        }
    }

    let codebook = match cfg.direction {
        Direction::Downlink => match align_for_downlink(&run.codebook) {
            Ok(aligned) => OocCodebook::new(cfg.ooc, aligned),
            Err(_) => {
                log::warn!("downlink codewords cannot be made disjoint; collisions will be simulated");
                run.codebook.clone()
            }
        },
        _ => run.codebook.clone(),
    };
    let (table, multi) = hit_table(&codebook, cfg.users);
    if multi && cfg.direction == Direction::Uplink {
        log::warn!("codebook cross-correlation exceeds one; an interferer can hit several marks");
    }

    let blocks = run.bit_count.div_ceil(BITS_PER_BLOCK);
    let tally = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BITS_PER_BLOCK;
            let count = BITS_PER_BLOCK.min(run.bit_count - start);
            simulate_block(run, &table, b, count)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge);

    let (ci_low, ci_high) = wilson_interval(tally.errors, tally.bits);
    Ok(SimResult {
        bits: tally.bits,
        errors: tally.errors,
        ber: tally.errors as f64 / tally.bits as f64,
        ci_low,
        ci_high,
        hop_chip_errors: tally.hop_chip_errors,
        hop_chip_trials: tally.hop_chip_trials,
        e2e_chip_errors: tally.e2e_chip_errors,
        mark_collisions: tally.mark_collisions,
        poisson_exact_limit: POISSON_EXACT_LIMIT,
    })
}

fn lognormal(rng: &mut ChaCha8Rng, mu: f64, sigma2: f64) -> f64 {
    if sigma2 == 0.0 {
        return (2.0 * mu).exp();
    }
    let z: f64 = rng.sample(StandardNormal);
    (2.0 * (mu + sigma2.sqrt() * z)).exp()
}

fn simulate_block(run: &SimRun, table: &[Vec<Vec<usize>>], block: u64, count: u64) -> Tally {
    let cfg = &run.config;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    rng.set_stream(block);
    let w = cfg.ooc.weight();
    let f = cfg.ooc.length();
    let hops = cfg.hops.len();
    let k = cfg.count_scale();
    let e0 = cfg.background_counts();
    let s2 = cfg.thermal_variance;
    let first = cfg.hops[0];

    let mut tally = Tally {
        hop_chip_errors: vec![0; hops],
        ..Tally::default()
    };
    let mut interference = vec![0.0; w];
    let mut state = vec![false; w];

    for _ in 0..count {
        let bit = rng.random::<bool>();
        interference.iter_mut().for_each(|x| *x = 0.0);
        let h11 = lognormal(&mut rng, first.fading.mu_x, first.fading.sigma2_x);

        for (n, shifts) in table.iter().enumerate() {
            let on = rng.random::<bool>();
            let tau = match &run.delays {
                Some(d) => d[n + 1],
                None => rng.random_range(0..f),
            };
            match cfg.direction {
                Direction::Uplink => {
                    let h = lognormal(&mut rng, first.fading.mu_x, first.fading.sigma2_x);
                    if on {
                        for &q in &shifts[tau] {
                            interference[q] += first.loss * h;
                            tally.mark_collisions += 1;
                        }
                    }
                }
                _ => {
                    // synchronous frames through the desired user's own channel
                    if on {
                        for &q in &shifts[0] {
                            interference[q] += first.loss * h11;
                            tally.mark_collisions += 1;
                        }
                    }
                }
            }
        }

        let signal = k * first.loss * h11;
        let threshold = gaussian_threshold(e0, e0 + signal, s2);
        for q in 0..w {
            let mean = e0 + k * interference[q] + if bit { signal } else { 0.0 };
            let on = detect_chip(sample_chip_statistic(mean, s2, &mut rng), threshold);
            if on != bit {
                tally.hop_chip_errors[0] += 1;
            }
            state[q] = on;
        }

        for i in 1..hops {
            let hop = cfg.hops[i];
            let h = lognormal(&mut rng, hop.fading.mu_x, hop.fading.sigma2_x);
            let signal = k * hop.loss * h;
            let threshold = gaussian_threshold(e0, e0 + signal, s2);
            for s in state.iter_mut() {
                let mean = e0 + if *s { signal } else { 0.0 };
                let on = detect_chip(sample_chip_statistic(mean, s2, &mut rng), threshold);
                if on != *s {
                    tally.hop_chip_errors[i] += 1;
                }
                *s = on;
            }
        }

        tally.hop_chip_trials += w as u64;
        tally.e2e_chip_errors += state.iter().filter(|&&s| s != bit).count() as u64;
        let decided = state.iter().all(|&s| s);
        if decided != bit {
            tally.errors += 1;
        }
        tally.bits += 1;
    }
    tally
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(50, 1000);
        assert!(lo < 0.05 && hi > 0.05);
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn superpose_single_user() {
        let frame = vec![true, false, true, false, false];
        assert_eq!(superpose_mai(&[frame], &[0], &[2.0]), vec![2.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn superpose_wraps_cyclically() {
        let a = vec![true, false, false, false];
        let b = vec![false, false, false, true];
        let out = superpose_mai(&[a, b], &[0, 2], &[1.0, 0.5]);
        assert_eq!(out, vec![1.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn hit_table_matches_superposition() {
        let params = crate::ooc::OocParams::new(61, 4).unwrap();
        let book = crate::ooc::generate_codebook(params, 5, 3).unwrap();
        let f = params.length();
        let (table, multi) = hit_table(&book, 5);
        assert!(!multi);
        let marks = book.codewords[0].marks();
        for (n, shifts) in table.iter().enumerate() {
            let frame = book.codewords[n + 1].chips(f);
            for (tau, hits) in shifts.iter().enumerate() {
                let field = superpose_mai(std::slice::from_ref(&frame), &[tau], &[1.0]);
                for (q, &p) in marks.iter().enumerate() {
                    let expected = hits.iter().filter(|&&h| h == q).count() as f64;
                    assert_eq!(field[p], expected, "interferer {n} shift {tau} mark {q}");
                }
            }
        }
    }

    #[test]
    fn detect_is_strict() {
        assert!(!detect_chip(5.0, 5.0));
        assert!(detect_chip(5.000001, 5.0));
    }
}
