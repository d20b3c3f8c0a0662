//! Correctness determination by loop detection.
//!
//! A path is flagged as looping when, for some stride `j`, the subsequence
//! `(s_k, s_{k-j}, s_{k-2j}, ...)` (at most `rho` elements) holds at least
//! `delta` similar pairs. Two rules are similar when their Levenshtein
//! distance is below `beta` times the length of the first one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopDetectorConfig {
    /// Minimum path length before detection runs.
    pub alpha: usize,
    /// Normalized distance below which two rules are similar.
    pub beta: f64,
    /// Maximum length of a stride subsequence.
    pub rho: usize,
    /// Similar-pair count that signals a loop.
    pub delta: usize,
    /// Count `(x, y)` and `(y, x)` separately.
    pub ordered_pairs: bool,
}

impl Default for LoopDetectorConfig {
    fn default() -> Self {
        LoopDetectorConfig { alpha: 20, beta: 0.1, rho: 20, delta: 3, ordered_pairs: true }
    }
}

impl LoopDetectorConfig {
    /// A configuration that never reports a loop.
    pub fn disabled() -> Self {
        LoopDetectorConfig { delta: usize::MAX, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 1 {
            return Err(Error::InvalidArgument("loop.alpha must be >= 1".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidArgument("loop.beta must lie in (0, 1]".into()));
        }
        if self.rho < 2 {
            return Err(Error::InvalidArgument("loop.rho must be >= 2".into()));
        }
        if self.delta < 1 {
            return Err(Error::InvalidArgument("loop.delta must be >= 1".into()));
        }
        Ok(())
    }
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(x: &str, y: &str) -> usize {
    let x: Vec<char> = x.chars().collect();
    let y: Vec<char> = y.chars().collect();
    levenshtein(&x, &y)
}

pub fn levenshtein(x: &[char], y: &[char]) -> usize {
    if x.is_empty() {
        return y.len();
    }
    let mut prev: Vec<usize> = (0..=y.len()).collect();
    let mut cur = vec![0; y.len() + 1];
    for (i, &xc) in x.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &yc) in y.iter().enumerate() {
            let cost = usize::from(xc != yc);
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[y.len()]
}

/// Levenshtein distance if it is at most `max`, computed on a diagonal band.
pub fn levenshtein_within(x: &[char], y: &[char], max: usize) -> Option<usize> {
    let (n, m) = (x.len(), y.len());
    if n.abs_diff(m) > max {
        return None;
    }
    if n == 0 || m == 0 {
        return Some(n.max(m));
    }
    let inf = max + 1;
    let mut prev: Vec<usize> = (0..=m).map(|j| if j <= max { j } else { inf }).collect();
    let mut cur = vec![inf; m + 1];
    for i in 1..=n {
        let lo = i.saturating_sub(max).max(1);
        let hi = (i + max).min(m);
        cur[0] = if i <= max { i } else { inf };
        if lo > 1 {
            cur[lo - 1] = inf;
        }
        let mut row_min = cur[0];
        for j in lo..=hi {
            let cost = usize::from(x[i - 1] != y[j - 1]);
            let v = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost).min(inf);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if hi < m {
            cur[hi + 1] = inf;
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (prev[m] <= max).then_some(prev[m])
}

fn similar_chars(x: &[char], y: &[char], beta: f64) -> bool {
    let n = x.len() as f64;
    // Any distance below beta * |x| is at most ceil(beta * |x|).
    let cap = (beta * n).ceil() as usize;
    match levenshtein_within(x, y, cap) {
        Some(d) => (d as f64) / n < beta,
        None => false,
    }
}

/// `edit_distance(x, y) / len(x) < beta`. Not symmetric in `x` and `y`.
pub fn is_similar(x: &str, y: &str, beta: f64) -> Result<bool> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("similarity needs a non-empty first rule".into()));
    }
    let x: Vec<char> = x.chars().collect();
    let y: Vec<char> = y.chars().collect();
    Ok(similar_chars(&x, &y, beta))
}

/// Runs loop detection on the rule sequence of a path.
pub fn detect_loop<S: AsRef<str>>(path_rules: &[S], cfg: &LoopDetectorConfig) -> bool {
    if path_rules.len() < cfg.alpha {
        return false;
    }
    let mut detector = PathLoopDetector::new(*cfg);
    for rule in path_rules {
        detector.push(rule.as_ref());
    }
    detector.detect()
}

/// Loop detection over a growing path, caching pairwise similarity so that
/// extending or shortening the path by one rule costs `O(k)` comparisons.
#[derive(Clone, Debug)]
pub struct PathLoopDetector {
    cfg: LoopDetectorConfig,
    rules: Vec<Vec<char>>,
    // similar[b][a] for a < b: (is_similar(a, b), is_similar(b, a)).
    similar: Vec<Vec<(bool, bool)>>,
}

impl PathLoopDetector {
    pub fn new(cfg: LoopDetectorConfig) -> Self {
        PathLoopDetector { cfg, rules: Vec::new(), similar: Vec::new() }
    }

    pub fn config(&self) -> &LoopDetectorConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn push(&mut self, rule: &str) {
        let new: Vec<char> = rule.chars().collect();
        let beta = self.cfg.beta;
        if self.cfg.delta == usize::MAX {
            // Disabled: similarity is never consulted.
            self.rules.push(new);
            self.similar.push(Vec::new());
            return;
        }
        let row = self
            .rules
            .iter()
            .map(|old| {
                let fwd = !old.is_empty() && similar_chars(old, &new, beta);
                let back = !new.is_empty() && similar_chars(&new, old, beta);
                (fwd, back)
            })
            .collect();
        self.rules.push(new);
        self.similar.push(row);
    }

    pub fn pop(&mut self) {
        self.rules.pop();
        self.similar.pop();
    }

    pub fn clear(&mut self) {
        self.rules.clear();
        self.similar.clear();
    }

    fn sim(&self, a: usize, b: usize) -> bool {
        if a < b {
            self.similar[b][a].0
        } else {
            self.similar[a][b].1
        }
    }

    pub fn detect(&self) -> bool {
        let k = self.rules.len();
        if k < self.cfg.alpha || self.cfg.delta == usize::MAX {
            return false;
        }
        let mut window = Vec::with_capacity(self.cfg.rho);
        for stride in 1..k {
            window.clear();
            window.extend((0..k).rev().step_by(stride).take(self.cfg.rho));
            if window.len() < 2 {
                continue;
            }
            let mut count = 0usize;
            for (i, &x) in window.iter().enumerate() {
                for (j, &y) in window.iter().enumerate() {
                    if i == j || (!self.cfg.ordered_pairs && j < i) {
                        continue;
                    }
                    if self.sim(x, y) {
                        count += 1;
                        if count >= self.cfg.delta {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}
