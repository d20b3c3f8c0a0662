use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{fnv1a64, RuleNode};

/// Network input for one node: hashed character trigrams of the rule text
/// followed by the node's position (step and sibling index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFeatures(Vec<f64>);

impl StateFeatures {
    pub fn from_vec(values: Vec<f64>) -> Self {
        StateFeatures(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Featurizer {
    pub feature_dim: usize,
    pub bmax: usize,
}

impl Featurizer {
    pub fn new(feature_dim: usize, bmax: usize) -> Self {
        Featurizer { feature_dim, bmax }
    }

    /// Total input width: trigram buckets plus the two position features.
    pub fn input_dim(&self) -> usize {
        self.feature_dim + 2
    }

    /// Unnormalized trigram bucket counts.
    pub fn trigram_counts(&self, rule: &str) -> Vec<u32> {
        let mut counts = vec![0u32; self.feature_dim];
        let chars: Vec<char> = rule.chars().collect();
        let mut buf = [0u8; 12];
        for window in chars.windows(3) {
            let mut len = 0;
            for c in window {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let bucket = (fnv1a64(&buf[..len]) % self.feature_dim as u64) as usize;
            counts[bucket] += 1;
        }
        counts
    }

    pub fn featurize(&self, node: &RuleNode, sibling_index: usize, depth_bound: usize) -> Result<StateFeatures> {
        if sibling_index >= self.bmax {
            return Err(Error::BranchingExceeded { got: sibling_index + 1, max: self.bmax });
        }
        let counts = self.trigram_counts(&node.rule);
        let norm = counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>().sqrt();
        let mut values: Vec<f64> = if norm > 0.0 {
            counts.iter().map(|&c| f64::from(c) / norm).collect()
        } else {
            vec![0.0; self.feature_dim]
        };
        let step = if depth_bound == 0 { 1.0 } else { (node.step as f64 / depth_bound as f64).min(1.0) };
        values.push(step);
        values.push(sibling_index as f64 / self.bmax as f64);
        Ok(StateFeatures(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(rule: &str, step: usize) -> RuleNode {
        RuleNode::new(rule, step).unwrap()
    }

    #[test]
    fn deterministic_and_well_formed() {
        let f = Featurizer::new(64, 16);
        let n = node("!KU( h(k) ) @ #vk", 3);
        let a = f.featurize(&n, 2, 10).unwrap();
        let b = f.featurize(&n, 2, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 66);
        assert!(a.is_finite());
        let norm: f64 = a.as_slice()[..64].iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(a.as_slice()[64], 0.3);
        assert_eq!(a.as_slice()[65], 2.0 / 16.0);
    }

    #[test]
    fn short_rule_has_zero_trigram_block() {
        let f = Featurizer::new(64, 16);
        let v = f.featurize(&node("ab", 0), 0, 5).unwrap();
        assert!(v.as_slice()[..64].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sibling_index_bounded() {
        let f = Featurizer::new(64, 4);
        let err = f.featurize(&node("simplify", 1), 4, 5).unwrap_err();
        assert_eq!(err, Error::BranchingExceeded { got: 5, max: 4 });
    }

    #[test]
    fn one_character_change_touches_three_trigrams() {
        let f = Featurizer::new(64, 16);
        let x = "!KU( aenc(<'2', ~ni.1, nr.1>) )";
        let y = "!KU( aenc(<'2', ~ni.2, nr.1>) )";
        // Trigrams covering the changed position, counted directly.
        let pos = x.chars().zip(y.chars()).position(|(a, b)| a != b).unwrap();
        let xs: Vec<char> = x.chars().collect();
        let affected = (0..xs.len() - 2).filter(|&s| s <= pos && pos < s + 3).count();
        assert_eq!(affected, 3);
        let cx = f.trigram_counts(x);
        let cy = f.trigram_counts(y);
        let l1: u32 = cx.iter().zip(&cy).map(|(a, b)| a.abs_diff(*b)).sum();
        let buckets = cx.iter().zip(&cy).filter(|(a, b)| a != b).count();
        // Three trigrams leave their buckets and three new ones arrive.
        assert!(l1 <= 2 * affected as u32);
        assert!(buckets <= 2 * affected);
    }
}
