//! Indel-based string similarity on Unicode scalar values.
//!
//! `ratio` is the normalized indel similarity `200 * LCS(a, b) / (|a| + |b|)`,
//! `partial_ratio` the best `ratio` of the shorter string against every
//! same-length window of the longer one. The LCS length is computed with the
//! bit-parallel recurrence of Hyyrö over 64-bit words.

use std::collections::HashMap;

/// Match-position bitmasks of a pattern string, one bit per character.
struct PatternMasks {
    len: usize,
    words: usize,
    masks: HashMap<char, Vec<u64>>,
}

impl PatternMasks {
    fn new(pattern: &[char]) -> Self {
        let words = pattern.len().div_ceil(64).max(1);
        let mut masks: HashMap<char, Vec<u64>> = HashMap::new();
        for (i, &c) in pattern.iter().enumerate() {
            masks.entry(c).or_insert_with(|| vec![0; words])[i / 64] |= 1u64 << (i % 64);
        }
        Self {
            len: pattern.len(),
            words,
            masks,
        }
    }

    fn lcs(&self, text: &[char], scratch: &mut Vec<u64>) -> usize {
        if self.len == 0 || text.is_empty() {
            return 0;
        }
        scratch.clear();
        scratch.resize(self.words, !0u64);
        for c in text {
            let Some(pm) = self.masks.get(c) else {
                continue;
            };
            let mut carry = 0u64;
            for (v, &m) in scratch.iter_mut().zip(pm) {
                let u = *v & m;
                let (s1, c1) = v.overflowing_add(u);
                let (s2, c2) = s1.overflowing_add(carry);
                carry = (c1 || c2) as u64;
                *v = s2 | (*v & !m);
            }
        }
        let mut zeros = 0usize;
        for (w, v) in scratch.iter().enumerate() {
            let bits = if w + 1 == self.words && !self.len.is_multiple_of(64) {
                self.len % 64
            } else {
                64
            };
            let mask = if bits == 64 { !0u64 } else { (1u64 << bits) - 1 };
            zeros += (!v & mask).count_ones() as usize;
        }
        zeros
    }
}

/// Length of the longest common subsequence of two character slices.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    let (p, t) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    PatternMasks::new(p).lcs(t, &mut Vec::new())
}

fn score(lcs: usize, lensum: usize) -> f64 {
    if lensum == 0 {
        100.0
    } else {
        200.0 * lcs as f64 / lensum as f64
    }
}

/// Normalized indel similarity in `[0, 100]`; `ratio("", "") == 100`.
pub fn ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratio_chars(&a, &b)
}

pub fn ratio_chars(a: &[char], b: &[char]) -> f64 {
    score(lcs_len(a, b), a.len() + b.len())
}

/// Best [`ratio`] of the shorter string against each equal-length window of the
/// longer string. Symmetric; an empty shorter string scores 100.
pub fn partial_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    partial_ratio_chars(&a, &b)
}

pub fn partial_ratio_chars(a: &[char], b: &[char]) -> f64 {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 100.0;
    }
    let masks = PatternMasks::new(short);
    let mut scratch = Vec::with_capacity(masks.words);
    let mut best = 0usize;
    for window in long.windows(short.len()) {
        best = best.max(masks.lcs(window, &mut scratch));
        if best == short.len() {
            break;
        }
    }
    score(best, 2 * short.len())
}
