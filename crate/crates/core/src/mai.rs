//! Uplink multiple-access interference combinatorics.
//!
//! With `M - 1` asynchronous interferers each hitting the desired code with
//! probability `W^2/2F` (and then on exactly one uniformly chosen mark chip),
//! the joint law of the hit count `l` and the per-mark pattern `alpha` is
//! binomial times multinomial.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{binomial, ln_factorial};
use crate::ooc::OocParams;

/// Interference counts on each mark chip of the desired code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InterferencePattern {
    pub alpha: Vec<usize>,
}

impl InterferencePattern {
    pub fn new(alpha: Vec<usize>) -> Self {
        Self { alpha }
    }

    /// Total interferers `l`.
    pub fn total(&self) -> usize {
        self.alpha.iter().sum()
    }

    pub fn weight(&self) -> usize {
        self.alpha.len()
    }

    pub fn hit_chips(&self) -> usize {
        self.alpha.iter().filter(|&&a| a > 0).count()
    }

    /// Number of distinct permutations of this pattern.
    pub fn permutations(&self) -> usize {
        let mut sorted = self.alpha.clone();
        sorted.sort_unstable();
        let mut ln = ln_factorial(sorted.len());
        for run in sorted.chunk_by(|a, b| a == b) {
            ln -= ln_factorial(run.len());
        }
        ln.exp().round() as usize
    }
}

impl std::fmt::Display for InterferencePattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.alpha.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `P_l(l) = C(M-1, l) p^l (1-p)^(M-1-l)` with `p = W^2/2F`.
pub fn prob_num_interferers(l: usize, users: usize, params: OocParams) -> Result<f64> {
    if users == 0 {
        return Err(Error::invalid("users", "need at least one user"));
    }
    if l > users - 1 {
        return Err(Error::invalid("l", format!("{l} outside 0..={}", users - 1)));
    }
    let p = params.hit_probability();
    if p > 1.0 {
        return Err(Error::invalid("ooc", "W^2/2F exceeds one"));
    }
    let n = users - 1;
    Ok(binomial(n, l) * p.powi(l as i32) * (1.0 - p).powi((n - l) as i32))
}

/// All weak compositions of `l` into `w` parts, lexicographic.
pub fn enumerate_patterns(l: usize, w: usize) -> Vec<InterferencePattern> {
    fn rec(remaining: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<InterferencePattern>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(InterferencePattern::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=remaining {
            prefix.push(first);
            rec(remaining - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if w == 0 {
        return out;
    }
    rec(l, w, &mut Vec::with_capacity(w), &mut out);
    out
}

/// Sorted (nondecreasing) representatives with their permutation counts.
pub fn canonical_patterns(l: usize, w: usize) -> Vec<(InterferencePattern, usize)> {
    enumerate_patterns(l, w)
        .into_iter()
        .filter(|p| p.alpha.windows(2).all(|x| x[0] <= x[1]))
        .map(|p| {
            let m = p.permutations();
            (p, m)
        })
        .collect()
}

/// Multinomial `l! / (W^l prod alpha_q!)`.
pub fn pattern_conditional_prob(pattern: &InterferencePattern) -> f64 {
    let l = pattern.total();
    let w = pattern.weight() as f64;
    let ln = ln_factorial(l) - l as f64 * w.ln() - pattern.alpha.iter().map(|&a| ln_factorial(a)).sum::<f64>();
    ln.exp()
}

/// Size of the fading vector to average over: `N + 1` plus one lognormal per
/// hit mark chip.
pub fn fading_dimension(pattern: &InterferencePattern, relays: usize) -> usize {
    relays + 1 + pattern.hit_chips()
}

/// Full joint distribution of `(l, alpha)` over `l in 0..M`.
#[derive(Debug, Clone)]
pub struct PatternDistribution {
    pub users: usize,
    pub ooc: OocParams,
    pub entries: Vec<(InterferencePattern, f64)>,
}

impl PatternDistribution {
    pub fn new(users: usize, ooc: OocParams) -> Result<Self> {
        let mut entries = Vec::new();
        for l in 0..users {
            let pl = prob_num_interferers(l, users, ooc)?;
            for pat in enumerate_patterns(l, ooc.weight()) {
                let p = pl * pattern_conditional_prob(&pat);
                entries.push((pat, p));
            }
        }
        Ok(Self { users, ooc, entries })
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// One row of the interference characterisation table.
#[derive(Debug, Clone, Serialize)]
pub struct InterferenceRow {
    pub l: usize,
    pub prob_l: f64,
    pub total_patterns: usize,
    pub pattern: InterferencePattern,
    pub conditional_prob: f64,
    pub similar: usize,
    /// Dimension of the fading vector is `N + dimension_offset`.
    pub dimension_offset: usize,
}

/// Rows grouped by `l`, one per sorted pattern, as in the published table.
pub fn interference_table(users: usize, ooc: OocParams) -> Result<Vec<InterferenceRow>> {
    let w = ooc.weight();
    let mut rows = Vec::new();
    for l in 0..users {
        let prob_l = prob_num_interferers(l, users, ooc)?;
        let total = binomial(l + w - 1, w - 1).round() as usize;
        for (pattern, perms) in canonical_patterns(l, w) {
            rows.push(InterferenceRow {
                l,
                prob_l,
                total_patterns: total,
                conditional_prob: pattern_conditional_prob(&pattern),
                similar: perms - 1,
                dimension_offset: fading_dimension(&pattern, 0),
                pattern,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ooc() -> OocParams {
        OocParams::new(50, 3).unwrap()
    }

    fn pat(a: &[usize]) -> InterferencePattern {
        InterferencePattern::new(a.to_vec())
    }

    #[test]
    fn interferer_count_examples() {
        let close = |a: f64, b: f64, rel: f64| (a / b - 1.0).abs() < rel;
        assert!(close(prob_num_interferers(0, 5, ooc()).unwrap(), 0.6857, 1e-4));
        assert!(close(prob_num_interferers(2, 5, ooc()).unwrap(), 0.0402, 2e-3));
        assert!(close(prob_num_interferers(4, 5, ooc()).unwrap(), 6.561e-5, 1e-10));
        assert!(prob_num_interferers(5, 5, ooc()).is_err());
    }

    #[test]
    fn pattern_enumeration_examples() {
        assert_eq!(enumerate_patterns(2, 3).len(), 6);
        assert_eq!(enumerate_patterns(0, 3), vec![pat(&[0, 0, 0])]);
        assert_eq!(enumerate_patterns(3, 3).len(), 10);
        let pats = enumerate_patterns(2, 3);
        assert!(pats.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn conditional_examples() {
        assert!((pattern_conditional_prob(&pat(&[1, 1, 1])) - 2.0 / 9.0).abs() < 1e-14);
        assert!((pattern_conditional_prob(&pat(&[0, 0, 3])) - 1.0 / 27.0).abs() < 1e-14);
        assert!((pattern_conditional_prob(&pat(&[0, 0, 0])) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(fading_dimension(&pat(&[0, 0, 0]), 3), 4);
        assert_eq!(fading_dimension(&pat(&[1, 1, 1]), 2), 6);
        assert_eq!(fading_dimension(&pat(&[0, 1, 2]), 0), 3);
    }

    #[test]
    fn distribution_is_complete() {
        for m in 1..=8 {
            let d = PatternDistribution::new(m, ooc()).unwrap();
            assert!((d.total_probability() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn permutations_count() {
        assert_eq!(pat(&[0, 1, 3]).permutations(), 6);
        assert_eq!(pat(&[1, 1, 1]).permutations(), 1);
        assert_eq!(pat(&[0, 0, 4]).permutations(), 3);
    }
}
