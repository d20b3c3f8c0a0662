//! Exact and Monte Carlo checks of the supporting-child bound: under a uniform
//! random strategy, the share of incorrect walks from a node that pass through
//! a supporting child is strictly below `y / x`.

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamRng};
use crate::tree::{NodeIdx, VerificationTree};

/// A fully known finite tree. Correct paths are the root paths of marked leaves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FiniteTree {
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    correct: Vec<bool>,
}

impl FiniteTree {
    pub const ROOT: usize = 0;

    pub fn new() -> Self {
        FiniteTree { children: vec![Vec::new()], parent: vec![None], depth: vec![0], correct: vec![false] }
    }

    pub fn add_child(&mut self, parent: usize) -> Result<usize> {
        if parent >= self.len() {
            return Err(Error::NotFound(format!("node {parent}")));
        }
        if self.correct[parent] {
            return Err(Error::InvalidState(format!("node {parent} is a correct leaf")));
        }
        let id = self.len();
        self.children[parent].push(id);
        self.children.push(Vec::new());
        self.parent.push(Some(parent));
        self.depth.push(self.depth[parent] + 1);
        self.correct.push(false);
        Ok(id)
    }

    pub fn mark_correct(&mut self, leaf: usize) -> Result<()> {
        if leaf >= self.len() {
            return Err(Error::NotFound(format!("node {leaf}")));
        }
        if !self.children[leaf].is_empty() {
            return Err(Error::InvalidArgument(format!("node {leaf} is not a leaf")));
        }
        self.correct[leaf] = true;
        Ok(())
    }

    /// Converts a verification tree; `correct` lists its complete leaves.
    pub fn from_verification(tree: &VerificationTree, correct: &[NodeIdx]) -> Result<Self> {
        let mut out = FiniteTree::new();
        for i in 1..tree.len() {
            let parent = tree.parent(NodeIdx(i))?.expect("non-root has a parent");
            let id = out.add_child(parent.index())?;
            debug_assert_eq!(id, i);
        }
        for leaf in correct {
            out.mark_correct(leaf.index())?;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn is_correct_leaf(&self, node: usize) -> bool {
        self.correct[node]
    }

    pub fn correct_leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&n| self.correct[n])
    }

    /// Whether some correct leaf lies in the subtree of `node`.
    pub fn on_correct_path(&self, node: usize) -> bool {
        self.correct_leaves().any(|leaf| self.is_ancestor(node, leaf))
    }

    fn is_ancestor(&self, node: usize, mut of: usize) -> bool {
        loop {
            if of == node {
                return true;
            }
            match self.parent[of] {
                Some(p) => of = p,
                None => return false,
            }
        }
    }

    /// Product of the child counts strictly above `leaf` and at or below `from`.
    fn walk_weight(&self, from: usize, leaf: usize) -> u128 {
        let mut weight = 1u128;
        let mut at = leaf;
        while at != from {
            let p = self.parent[at].expect("leaf lies below from");
            weight *= self.children[p].len() as u128;
            at = p;
        }
        weight
    }

    /// Common denominator of every walk probability, if it fits comfortably.
    fn common_denominator(&self) -> Option<u128> {
        let levels = self.depth.iter().copied().max().unwrap_or(0);
        let mut lcm_per_level = vec![1u128; levels + 1];
        for n in 0..self.len() {
            let x = self.children[n].len() as u128;
            if x > 0 {
                let l = &mut lcm_per_level[self.depth[n]];
                *l = *l / gcd(*l, x) * x;
            }
        }
        lcm_per_level.into_iter().try_fold(1u128, |acc, l| acc.checked_mul(l)).filter(|d| *d < 1u128 << 60)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A probability kept exactly as `numerator / denominator` where possible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prob {
    Exact(Ratio<u128>),
    Approx(f64),
}

impl Prob {
    pub fn value(&self) -> f64 {
        match self {
            Prob::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Prob::Approx(v) => *v,
        }
    }
}

impl std::fmt::Display for Prob {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Prob::Exact(r) => write!(f, "{r}"),
            Prob::Approx(v) => write!(f, "{v:.6}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoremReport {
    pub node: usize,
    /// Children of the conditioning node.
    pub x: usize,
    /// Children of the conditioning node that lie on a correct path.
    pub y: usize,
    /// Correct paths through the conditioning node.
    pub r: usize,
    /// Walk probability of each correct path, in leaf order.
    pub alpha: Vec<f64>,
    /// `beta[r][s]`: probability of following path `r` from supporting child `s`.
    pub beta: Vec<Vec<f64>>,
    pub p1: Prob,
    pub p2: Prob,
    pub p: Prob,
    pub bound: Ratio<u128>,
    pub holds: bool,
    /// Largest violation of `alpha_r = sum_s beta_rs / x`.
    pub identity_error: f64,
}

/// Enumerates all uniform walks below `node` and evaluates the bound.
pub fn enumerate_report(tree: &FiniteTree, node: usize) -> Result<TheoremReport> {
    if node >= tree.len() {
        return Err(Error::NotFound(format!("node {node}")));
    }
    if !tree.on_correct_path(node) {
        return Err(Error::HypothesisViolated(format!("node {node} is on no correct path")));
    }
    let kids = tree.children(node);
    let x = kids.len();
    let supporting: Vec<usize> = kids.iter().copied().filter(|&c| tree.on_correct_path(c)).collect();
    let y = supporting.len();
    if x <= y {
        return Err(Error::HypothesisViolated(format!("x = {x} does not exceed y = {y}")));
    }
    let paths: Vec<usize> = tree.correct_leaves().filter(|&l| tree.is_ancestor(node, l)).collect();
    let denom = tree.common_denominator();

    let mut alpha = Vec::with_capacity(paths.len());
    let mut beta = Vec::with_capacity(paths.len());
    let mut alpha_num = 0u128;
    let mut beta_num = vec![0u128; y];
    let mut alpha_sum = 0.0;
    let mut beta_sum = vec![0.0; y];
    let mut identity_error = 0.0f64;
    for &leaf in &paths {
        let w = tree.walk_weight(node, leaf);
        let a = 1.0 / w as f64;
        let row: Vec<f64> = supporting
            .iter()
            .map(|&s| if tree.is_ancestor(s, leaf) { 1.0 / tree.walk_weight(s, leaf) as f64 } else { 0.0 })
            .collect();
        let via = row.iter().sum::<f64>() / x as f64;
        identity_error = identity_error.max((a - via).abs());
        if let Some(d) = denom {
            alpha_num += d / w;
            for (j, &s) in supporting.iter().enumerate() {
                if tree.is_ancestor(s, leaf) {
                    beta_num[j] += d / tree.walk_weight(s, leaf);
                }
            }
        }
        alpha_sum += a;
        for (acc, b) in beta_sum.iter_mut().zip(&row) {
            *acc += b;
        }
        alpha.push(a);
        beta.push(row);
    }

    let bound = Ratio::new(y as u128, x as u128);
    let (p1, p2, p, holds) = match denom {
        Some(d) => {
            let p1n = d - alpha_num;
            // p2 = sum_s (1/x)(1 - sum_r beta_rs), over the denominator x·d.
            let p2n: u128 = beta_num.iter().map(|b| d - b).sum();
            if p1n == 0 {
                return Err(Error::DegenerateInstance("every walk below the node is correct".into()));
            }
            let p1 = Ratio::new(p1n, d);
            let p2 = Ratio::new(p2n, x as u128 * d);
            let p = p2 / p1;
            (Prob::Exact(p1), Prob::Exact(p2), Prob::Exact(p), p < bound)
        }
        None => {
            let p1 = 1.0 - alpha_sum;
            let p2: f64 = beta_sum.iter().map(|b| (1.0 - b) / x as f64).sum();
            if p1 <= 0.0 {
                return Err(Error::DegenerateInstance("every walk below the node is correct".into()));
            }
            let p = p2 / p1;
            (Prob::Approx(p1), Prob::Approx(p2), Prob::Approx(p), p < y as f64 / x as f64)
        }
    };
    Ok(TheoremReport { node, x, y, r: paths.len(), alpha, beta, p1, p2, p, bound, holds, identity_error })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    /// Binomial standard error of the estimate.
    pub stderr: f64,
    /// Incorrect walks the estimate is based on.
    pub samples: usize,
}

impl MonteCarloEstimate {
    /// Whether `p` lies within `k` standard errors, using the standard error
    /// implied by `p` itself so that exact zeros and ones compare exactly.
    pub fn agrees_with(&self, p: f64, k: f64) -> bool {
        let se = (p * (1.0 - p) / self.samples as f64).sqrt();
        (self.estimate - p).abs() <= k * se + 1e-12
    }
}

/// Uniform random walks from `node` to a leaf.
pub fn monte_carlo_p(tree: &FiniteTree, node: usize, trials: usize, seed: u64) -> Result<MonteCarloEstimate> {
    if node >= tree.len() {
        return Err(Error::NotFound(format!("node {node}")));
    }
    if trials == 0 {
        return Err(Error::InsufficientSamples("no trials requested".into()));
    }
    let mut rng: StreamRng = stream(seed, "monte-carlo", &[node as u64]);
    let mut incorrect = 0usize;
    let mut via_supporting = 0usize;
    let supporting: Vec<bool> = tree.children(node).iter().map(|&c| tree.on_correct_path(c)).collect();
    for _ in 0..trials {
        let mut at = node;
        let mut first = None;
        while !tree.children(at).is_empty() {
            let kids = tree.children(at);
            let pick = rng.gen_range(0..kids.len());
            first.get_or_insert(pick);
            at = kids[pick];
        }
        if !tree.is_correct_leaf(at) {
            incorrect += 1;
            if first.is_some_and(|i| supporting[i]) {
                via_supporting += 1;
            }
        }
    }
    if incorrect == 0 {
        return Err(Error::InsufficientSamples("no incorrect walk was sampled".into()));
    }
    let estimate = via_supporting as f64 / incorrect as f64;
    let stderr = (estimate * (1.0 - estimate) / incorrect as f64).sqrt();
    Ok(MonteCarloEstimate { estimate, stderr, samples: incorrect })
}

#[derive(Clone, Debug)]
pub struct SweepInstance {
    pub index: usize,
    pub tree: FiniteTree,
    pub report: TheoremReport,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub instances: Vec<SweepInstance>,
    pub degenerate: usize,
}

impl SweepResult {
    pub fn violations(&self) -> impl Iterator<Item = &SweepInstance> {
        self.instances.iter().filter(|i| !i.report.holds)
    }
}

pub const SWEEP_MAX_DEPTH: usize = 5;
pub const SWEEP_MAX_BRANCHING: usize = 4;

/// Random tree with depth at most 5, branching at most 4 and one to three
/// correct leaves. The root has at least two children.
pub fn random_tree(rng: &mut StreamRng) -> FiniteTree {
    let mut tree = FiniteTree::new();
    let mut frontier = vec![FiniteTree::ROOT];
    while let Some(node) = frontier.pop() {
        let depth = tree.depth(node);
        let kids = if depth == 0 {
            rng.gen_range(2..=SWEEP_MAX_BRANCHING)
        } else if depth >= SWEEP_MAX_DEPTH || rng.gen_bool(0.15 * depth as f64) {
            0
        } else {
            rng.gen_range(1..=SWEEP_MAX_BRANCHING)
        };
        for _ in 0..kids {
            frontier.push(tree.add_child(node).expect("node exists"));
        }
    }
    let leaves: Vec<usize> = (0..tree.len()).filter(|&n| tree.children(n).is_empty()).collect();
    let r = rng.gen_range(1..=3).min(leaves.len());
    for i in rand::seq::index::sample(rng, leaves.len(), r) {
        tree.mark_correct(leaves[i]).expect("leaf");
    }
    tree
}

/// Generates `count` instances with a random conditioning node satisfying
/// `x > y >= 1`. Trees without such a node are redrawn.
pub fn sweep(seed: u64, count: usize) -> Result<SweepResult> {
    if count == 0 {
        return Err(Error::InvalidArgument("sweep count must be >= 1".into()));
    }
    let mut out = SweepResult::default();
    for index in 0..count {
        let mut rng = stream(seed, "theorem-sweep", &[index as u64]);
        loop {
            let tree = random_tree(&mut rng);
            let eligible: Vec<usize> = (0..tree.len())
                .filter(|&n| {
                    let kids = tree.children(n);
                    let y = kids.iter().filter(|&&c| tree.on_correct_path(c)).count();
                    y >= 1 && kids.len() > y
                })
                .collect();
            if eligible.is_empty() {
                continue;
            }
            let node = eligible[rng.gen_range(0..eligible.len())];
            match enumerate_report(&tree, node) {
                Ok(report) => out.instances.push(SweepInstance { index, tree, report }),
                Err(Error::DegenerateInstance(_)) => out.degenerate += 1,
                Err(e) => return Err(e),
            }
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Root with a supporting child `s` and a decoy `d`; `s_kids` children
    /// below `s`, the first of them correct (or `s` itself when zero).
    fn two_way(s_kids: usize) -> FiniteTree {
        let mut t = FiniteTree::new();
        let s = t.add_child(0).unwrap();
        t.add_child(0).unwrap();
        if s_kids == 0 {
            t.mark_correct(s).unwrap();
        } else {
            let first = t.add_child(s).unwrap();
            for _ in 1..s_kids {
                t.add_child(s).unwrap();
            }
            t.mark_correct(first).unwrap();
        }
        t
    }

    fn exact(p: Prob) -> Ratio<u128> {
        match p {
            Prob::Exact(r) => r,
            Prob::Approx(v) => panic!("expected an exact value, got {v}"),
        }
    }

    #[test]
    fn supporting_child_closes_immediately() {
        let r = enumerate_report(&two_way(0), 0).unwrap();
        assert_eq!((r.x, r.y, r.r), (2, 1, 1));
        assert_eq!(r.alpha, vec![0.5]);
        assert_eq!(r.beta, vec![vec![1.0]]);
        assert_eq!(exact(r.p1), Ratio::new(1, 2));
        assert_eq!(exact(r.p2), Ratio::from_integer(0));
        assert_eq!(exact(r.p), Ratio::from_integer(0));
        assert!(r.holds);
    }

    #[test]
    fn one_correct_continuation_of_two() {
        let r = enumerate_report(&two_way(2), 0).unwrap();
        assert_eq!(exact(r.p1), Ratio::new(3, 4));
        assert_eq!(exact(r.p2), Ratio::new(1, 4));
        assert_eq!(exact(r.p), Ratio::new(1, 3));
        assert_eq!(r.bound, Ratio::new(1, 2));
        assert!(r.holds);
        assert!(r.identity_error < 1e-12);
    }

    #[test]
    fn all_supporting_violates_hypothesis() {
        let mut t = FiniteTree::new();
        let a = t.add_child(0).unwrap();
        let b = t.add_child(0).unwrap();
        t.mark_correct(a).unwrap();
        t.mark_correct(b).unwrap();
        assert!(matches!(enumerate_report(&t, 0), Err(Error::HypothesisViolated(_))));
        let mut lone = FiniteTree::new();
        lone.add_child(0).unwrap();
        assert!(matches!(enumerate_report(&lone, 0), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn monte_carlo_matches_enumeration() {
        let tree = two_way(2);
        let mc = monte_carlo_p(&tree, 0, 100_000, 1).unwrap();
        assert!((mc.estimate - 1.0 / 3.0).abs() <= 3.0 * mc.stderr, "{mc:?}");
        assert!(mc.agrees_with(1.0 / 3.0, 3.0));
        let zero = monte_carlo_p(&two_way(0), 0, 10_000, 1).unwrap();
        assert_eq!(zero.estimate, 0.0);
        assert!(matches!(monte_carlo_p(&tree, 0, 0, 1), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn conditioning_below_the_root() {
        // Correct path root -> a -> a1; a has a second decoy child.
        let mut t = FiniteTree::new();
        let a = t.add_child(0).unwrap();
        t.add_child(0).unwrap();
        let a1 = t.add_child(a).unwrap();
        let a2 = t.add_child(a).unwrap();
        t.add_child(a2).unwrap();
        t.add_child(a2).unwrap();
        t.mark_correct(a1).unwrap();
        let r = enumerate_report(&t, a).unwrap();
        assert_eq!((r.x, r.y), (2, 1));
        assert_eq!(exact(r.p), Ratio::from_integer(0));
    }

    #[test]
    fn verification_tree_conversion() {
        let mut vt = VerificationTree::new("L", 5).unwrap();
        let kids = vt.expand_endpoint(VerificationTree::ROOT, &["simplify", "induction"]).unwrap();
        let tree = FiniteTree::from_verification(&vt, &[kids[0]]).unwrap();
        assert_eq!(tree.len(), 3);
        assert_eq!(exact(enumerate_report(&tree, 0).unwrap().p), Ratio::from_integer(0));
    }

    #[test]
    fn sweep_is_reproducible_and_holds() {
        let a = sweep(3, 40).unwrap();
        let b = sweep(3, 40).unwrap();
        assert_eq!(a.instances.len() + a.degenerate, 40);
        assert_eq!(a.instances.iter().map(|i| i.tree.clone()).collect::<Vec<_>>(),
                   b.instances.iter().map(|i| i.tree.clone()).collect::<Vec<_>>());
        assert_eq!(a.violations().count(), 0);
        for inst in &a.instances {
            assert!(inst.tree.depth.iter().all(|&d| d <= SWEEP_MAX_DEPTH));
            assert!(inst.tree.children.iter().all(|c| c.len() <= SWEEP_MAX_BRANCHING));
            assert!(matches!(inst.report.p, Prob::Exact(_)));
            assert!(inst.report.identity_error < 1e-12);
        }
    }
}
