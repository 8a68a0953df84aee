//! Optical orthogonal codes with unit auto- and cross-correlation.
//!
//! A codeword is stored as its sorted set of mark positions in `0..F`.
//! Two codes satisfy the unit correlation constraints exactly when no cyclic
//! difference `p_i - p_j (mod F)` appears twice across the whole family, which
//! is what both the generator and the validator work from.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(F, W, 1, 1)` code parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OocParams {
    length: usize,
    weight: usize,
}

impl OocParams {
    pub fn new(length: usize, weight: usize) -> Result<Self> {
        if weight == 0 {
            return Err(Error::invalid("weight", "must be positive"));
        }
        if weight > length {
            return Err(Error::invalid("weight", format!("{weight} exceeds length {length}")));
        }
        let minimum = weight.saturating_mul(weight - 1).saturating_add(1);
        if length < minimum {
            return Err(Error::invalid(
                "length",
                format!("F={length} below W(W-1)+1={minimum}; no (F,W,1,1) code exists"),
            ));
        }
        Ok(Self { length, weight })
    }

    /// Code length `F` in chips.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Code weight `W`.
    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn lambda_a(&self) -> usize {
        1
    }

    pub fn lambda_c(&self) -> usize {
        1
    }

    /// Probability that one interferer with an equiprobable bit lands on a
    /// mark chip of the desired code, `W^2 / 2F`.
    pub fn hit_probability(&self) -> f64 {
        (self.weight * self.weight) as f64 / (2.0 * self.length as f64)
    }
}

/// Capacity bound `floor((F-1) / (W(W-1)))`.
pub fn max_users(params: OocParams) -> Result<usize> {
    let w = params.weight();
    if w <= 1 {
        return Err(Error::DegenerateWeight);
    }
    Ok((params.length() - 1) / (w * (w - 1)))
}

/// Largest `M` with `M < F/W^2 + 1`, the synchronous-downlink MAI-free limit.
pub fn downlink_mai_free_bound(params: OocParams) -> usize {
    let w2 = params.weight().saturating_mul(params.weight());
    params.length().div_ceil(w2)
}

/// Sorted mark positions of one codeword.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Codeword(Vec<usize>);

impl Codeword {
    /// Builds a codeword from arbitrary-order marks (sorted on entry).
    pub fn new(mut marks: Vec<usize>) -> Self {
        marks.sort_unstable();
        Codeword(marks)
    }

    pub fn marks(&self) -> &[usize] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.len()
    }

    /// Cyclic shift by `shift` chips within a frame of `length`.
    pub fn rotated(&self, shift: usize, length: usize) -> Codeword {
        Codeword::new(self.0.iter().map(|&p| (p + shift) % length).collect())
    }

    /// Rotation containing position 0 with the lexicographically smallest
    /// sorted marks.
    pub fn canonical(&self, length: usize) -> Codeword {
        self.0
            .iter()
            .map(|&p| self.rotated(length - p, length))
            .min_by(|a, b| a.0.cmp(&b.0))
            .unwrap_or_else(|| self.clone())
    }

    pub fn chips(&self, length: usize) -> Vec<bool> {
        let mut chips = vec![false; length];
        for &p in &self.0 {
            chips[p % length] = true;
        }
        chips
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let marks: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", marks.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OocCodebook {
    pub params: OocParams,
    pub codewords: Vec<Codeword>,
    pub capacity_bound: usize,
}

impl OocCodebook {
    /// Wraps codewords without checking correlations; see [`validate_codebook`].
    pub fn new(params: OocParams, codewords: Vec<Codeword>) -> Self {
        let capacity_bound = max_users(params).unwrap_or(usize::MAX);
        Self {
            params,
            codewords,
            capacity_bound,
        }
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Serialises to `F W: p1,p2,...,pW` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.codewords {
            out.push_str(&format!(
                "{} {}: {}\n",
                self.params.length(),
                self.params.weight(),
                c
            ));
        }
        out
    }

    /// Parses the line format written by [`OocCodebook::to_text`]. Blank lines
    /// and `#` comments are skipped; every line must agree on `F` and `W`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut params: Option<OocParams> = None;
        let mut codewords = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let (head, tail) = line
                .split_once(':')
                .ok_or_else(|| parse_err("expected `F W: p1,...,pW`".into()))?;
            let mut head_fields = head.split_whitespace();
            let mut next_num = |what: &str| -> Result<usize> {
                head_fields
                    .next()
                    .ok_or_else(|| parse_err(format!("missing {what}")))?
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad {what}: {e}")))
            };
            let f = next_num("length F")?;
            let w = next_num("weight W")?;
            if head_fields.next().is_some() {
                return Err(parse_err("trailing fields before ':'".into()));
            }
            let line_params = OocParams::new(f, w).map_err(|e| parse_err(e.to_string()))?;
            match params {
                None => params = Some(line_params),
                Some(p) if p != line_params => {
                    return Err(parse_err(format!(
                        "F W = {f} {w} disagrees with earlier lines ({} {})",
                        p.length(),
                        p.weight()
                    )))
                }
                Some(_) => {}
            }
            let marks = tail
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| parse_err(format!("bad mark `{}`: {e}", s.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            if marks.len() != w {
                return Err(parse_err(format!("expected {w} marks, found {}", marks.len())));
            }
            if let Some(&p) = marks.iter().find(|&&p| p >= f) {
                return Err(parse_err(format!("mark {p} outside 0..{f}")));
            }
            let cw = Codeword::new(marks);
            if cw.marks().windows(2).any(|p| p[0] == p[1]) {
                return Err(parse_err("repeated mark".into()));
            }
            codewords.push(cw);
        }
        let params = params.ok_or(Error::Parse {
            line: 0,
            message: "codebook is empty".into(),
        })?;
        Ok(Self::new(params, codewords))
    }
}

/// One correlation or shape defect found by [`validate_codebook`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WrongWeight { codeword: usize, weight: usize },
    MarkOutOfRange { codeword: usize, mark: usize },
    RepeatedMark { codeword: usize, mark: usize },
    AutoCorrelation { codeword: usize, shift: usize, value: usize },
    CrossCorrelation { first: usize, second: usize, shift: usize, value: usize },
    OverCapacity { count: usize, bound: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Difference table: `counts[s]` = number of ordered mark pairs `(a, b)` with
/// `a - b ≡ s (mod F)`.
fn difference_counts(a: &[usize], b: &[usize], length: usize) -> Vec<usize> {
    let mut counts = vec![0; length];
    for &x in a {
        for &y in b {
            counts[(x + length - y) % length] += 1;
        }
    }
    counts
}

/// Reports every shape defect, every `(codeword, shift)` with an
/// autocorrelation sidelobe above 1 and every `(pair, shift)` with a cyclic
/// cross-correlation above 1.
pub fn validate_codebook(codebook: &OocCodebook) -> ValidationReport {
    let f = codebook.params.length();
    let w = codebook.params.weight();
    let mut violations = Vec::new();
    let mut well_formed = vec![true; codebook.len()];
    for (i, c) in codebook.codewords.iter().enumerate() {
        if c.weight() != w {
            violations.push(Violation::WrongWeight {
                codeword: i,
                weight: c.weight(),
            });
            well_formed[i] = false;
        }
        for &m in c.marks() {
            if m >= f {
                violations.push(Violation::MarkOutOfRange { codeword: i, mark: m });
                well_formed[i] = false;
            }
        }
        for pair in c.marks().windows(2) {
            if pair[0] == pair[1] {
                violations.push(Violation::RepeatedMark {
                    codeword: i,
                    mark: pair[0],
                });
                well_formed[i] = false;
            }
        }
    }
    if codebook.len() > codebook.capacity_bound {
        violations.push(Violation::OverCapacity {
            count: codebook.len(),
            bound: codebook.capacity_bound,
        });
    }
    let words: Vec<(usize, Vec<usize>)> = codebook
        .codewords
        .iter()
        .enumerate()
        .filter(|(i, _)| well_formed[*i])
        .map(|(i, c)| (i, c.marks().to_vec()))
        .collect();
    for (i, marks) in &words {
        let counts = difference_counts(marks, marks, f);
        for (shift, &value) in counts.iter().enumerate().skip(1) {
            if value > 1 {
                violations.push(Violation::AutoCorrelation {
                    codeword: *i,
                    shift,
                    value,
                });
            }
        }
    }
    for (x, (i, a)) in words.iter().enumerate() {
        for (j, b) in &words[x + 1..] {
            let counts = difference_counts(a, b, f);
            for (shift, &value) in counts.iter().enumerate() {
                if value > 1 {
                    violations.push(Violation::CrossCorrelation {
                        first: *i,
                        second: *j,
                        shift,
                        value,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

const RESTART_BUDGET: usize = 2_000;
const WORD_ATTEMPTS: usize = 64;

/// Randomised greedy search for `target_count` codewords whose cyclic
/// difference sets are pairwise disjoint. Deterministic for a fixed seed.
pub fn generate_codebook(params: OocParams, target_count: usize, seed: u64) -> Result<OocCodebook> {
    let f = params.length();
    let w = params.weight();
    if w == 1 {
        // W = 1 has no differences; only the single code {0} exists cyclically.
        if target_count > 1 {
            return Err(Error::CapacityExceeded {
                requested: target_count,
                bound: 1,
            });
        }
        let codewords = (0..target_count).map(|_| Codeword::new(vec![0])).collect();
        return Ok(OocCodebook {
            params,
            codewords,
            capacity_bound: 1,
        });
    }
    let bound = max_users(params)?;
    if target_count > bound {
        return Err(Error::CapacityExceeded {
            requested: target_count,
            bound,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (1..f).collect();
    'restart: for _ in 0..RESTART_BUDGET {
        let mut used = vec![false; f];
        let mut codewords = Vec::with_capacity(target_count);
        for _ in 0..target_count {
            let mut found = None;
            for _ in 0..WORD_ATTEMPTS {
                positions.shuffle(&mut rng);
                if let Some(marks) = grow_codeword(&positions, w, f, &used) {
                    found = Some(marks);
                    break;
                }
            }
            let Some(marks) = found else {
                continue 'restart;
            };
            for &a in &marks {
                for &b in &marks {
                    if a != b {
                        used[(a + f - b) % f] = true;
                    }
                }
            }
            codewords.push(Codeword::new(marks).canonical(f));
        }
        return Ok(OocCodebook {
            params,
            codewords,
            capacity_bound: bound,
        });
    }
    Err(Error::SearchExhausted {
        attempts: RESTART_BUDGET,
    })
}

/// Extends `{0}` with candidates in the given order, keeping every new
/// difference unused and distinct.
fn grow_codeword(candidates: &[usize], w: usize, f: usize, used: &[bool]) -> Option<Vec<usize>> {
    let mut marks = vec![0usize];
    let mut taken = used.to_vec();
    for &p in candidates {
        if marks.len() == w {
            break;
        }
        let mut fresh = Vec::with_capacity(2 * marks.len());
        let ok = marks.iter().all(|&m| {
            let d1 = (p + f - m) % f;
            let d2 = (m + f - p) % f;
            let clash = taken[d1] || taken[d2] || d1 == d2 || fresh.contains(&d1) || fresh.contains(&d2);
            fresh.push(d1);
            fresh.push(d2);
            !clash
        });
        if ok {
            for d in fresh {
                taken[d] = true;
            }
            marks.push(p);
        }
    }
    (marks.len() == w).then_some(marks)
}

/// Picks a cyclic rotation of each codeword so that all mark sets are
/// pairwise disjoint, as needed for MAI-free synchronous downlink frames.
/// Greedy placement always succeeds when `(M-1) W^2 < F`.
pub fn align_for_downlink(codebook: &OocCodebook) -> Result<Vec<Codeword>> {
    let f = codebook.params.length();
    let mut occupied = vec![false; f];
    let mut aligned = Vec::with_capacity(codebook.len());
    for (i, c) in codebook.codewords.iter().enumerate() {
        let rotation = (0..f)
            .map(|s| c.rotated(s, f))
            .find(|r| r.marks().iter().all(|&p| !occupied[p]))
            .ok_or_else(|| {
                Error::invalid(
                    "users",
                    format!("no disjoint rotation for codeword {i}; downlink bound exceeded"),
                )
            })?;
        for &p in rotation.marks() {
            occupied[p] = true;
        }
        aligned.push(rotation);
    }
    Ok(aligned)
}

/// One bit slot of on-off keyed chips.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipFrame {
    pub chips: Vec<bool>,
    pub chip_duration: f64,
}

impl ChipFrame {
    pub fn bit_duration(&self) -> f64 {
        self.chips.len() as f64 * self.chip_duration
    }

    pub fn ones(&self) -> usize {
        self.chips.iter().filter(|&&c| c).count()
    }
}

/// OOK spreading: a `1` bit emits the codeword's marks, a `0` bit emits an
/// empty frame.
pub fn encode_bits(bits: &[bool], codeword: &Codeword, params: OocParams, chip_duration: f64) -> Vec<ChipFrame> {
    let marks = codeword.chips(params.length());
    let empty = vec![false; params.length()];
    bits.iter()
        .map(|&b| ChipFrame {
            chips: if b { marks.clone() } else { empty.clone() },
            chip_duration,
        })
        .collect()
}

/// Concatenated chip stream of a frame sequence.
pub fn flatten(frames: &[ChipFrame]) -> Vec<bool> {
    frames.iter().flat_map(|f| f.chips.iter().copied()).collect()
}

/// Noiseless decision: a bit is `1` iff every mark of `codeword` is on.
pub fn decode_frames(frames: &[ChipFrame], codeword: &Codeword) -> Vec<bool> {
    frames
        .iter()
        .map(|fr| codeword.marks().iter().all(|&p| fr.chips[p]))
        .collect()
}
