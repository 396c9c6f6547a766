//! Regression trees and exact greedy split search.

use rayon::prelude::*;

use super::objective::split_gain;
use crate::{Error, Result};

/// Gains at or below this are treated as no improvement.
pub const MIN_SPLIT_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Nodes in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RegTree {
    nodes: Vec<Node>,
}

impl RegTree {
    pub fn leaf(weight: f64) -> Self {
        RegTree { nodes: vec![Node::Leaf { weight }] }
    }

    /// Checks the node list forms a binary tree reachable from the root.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidInput("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if i >= nodes.len() || seen[i] {
                return Err(Error::InvalidInput(format!("node {i} missing or shared")));
            }
            seen[i] = true;
            match nodes[i] {
                Node::Split { left, right, threshold, .. } => {
                    if threshold.is_nan() {
                        return Err(Error::InvalidInput("NaN threshold".into()));
                    }
                    stack.push(right);
                    stack.push(left);
                }
                Node::Leaf { weight } if !weight.is_finite() => {
                    return Err(Error::InvalidInput("non-finite leaf weight".into()))
                }
                Node::Leaf { .. } => {}
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInput("unreachable nodes".into()));
        }
        Ok(RegTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_g: f64,
    pub left_h: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    /// Multiplies every leaf weight.
    pub scale: f64,
}

fn threshold_between(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid >= a && mid < b {
        mid
    } else {
        a
    }
}

/// Best split of the rows in `sorted` (ordered by `values`), scanning every
/// boundary between distinct values. Ties keep the lowest threshold.
pub(crate) fn scan_feature(
    feature: usize,
    values: &[f64],
    sorted: &[u32],
    g: &[f64],
    h: &[f64],
    parent: (f64, f64),
    params: &TreeParams,
) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    let (mut gl, mut hl) = (0.0, 0.0);
    for w in 0..sorted.len().saturating_sub(1) {
        let r = sorted[w] as usize;
        gl += g[r];
        hl += h[r];
        let (a, b) = (values[r], values[sorted[w + 1] as usize]);
        if a == b {
            continue;
        }
        if hl < params.min_child_hessian || parent.1 - hl < params.min_child_hessian {
            continue;
        }
        let gain = split_gain(parent, (gl, hl), params.lambda, params.gamma);
        if gain > MIN_SPLIT_GAIN && best.is_none_or(|c| gain > c.gain) {
            best = Some(SplitCandidate { feature, threshold: threshold_between(a, b), gain, left_g: gl, left_h: hl });
        }
    }
    best
}

/// Best split of all `values` (one feature) under `lambda`, `gamma` and
/// `min_child_hessian`.
pub fn find_best_split(
    values: &[f64],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    gamma: f64,
    min_child_hessian: f64,
) -> Option<SplitCandidate> {
    let mut sorted: Vec<u32> = (0..values.len() as u32).collect();
    sorted.sort_by(|&a, &b| values[a as usize].total_cmp(&values[b as usize]));
    let parent = (g.iter().sum(), h.iter().sum());
    let params = TreeParams { max_depth: None, lambda, gamma, min_child_hessian, scale: 1.0 };
    scan_feature(0, values, &sorted, g, h, parent, &params)
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    features: &'a [usize],
    g: &'a [f64],
    h: &'a [f64],
    params: TreeParams,
    parallel: bool,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

impl Builder<'_> {
    fn leaf(&self, sorted: &[u32]) -> Node {
        let (gs, hs) = sorted.iter().fold((0.0, 0.0), |(a, b), &r| (a + self.g[r as usize], b + self.h[r as usize]));
        let denom = hs + self.params.lambda;
        let weight = if denom > 0.0 { -gs / denom * self.params.scale } else { 0.0 };
        Node::Leaf { weight }
    }

    /// `sorted[k]` lists the node's rows ordered by `features[k]`.
    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let id = self.nodes.len();
        let rows = &sorted[0];
        self.nodes.push(self.leaf(rows));
        if self.params.max_depth.is_some_and(|d| depth >= d) || rows.len() < 2 {
            return id;
        }
        let parent = rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + self.g[r as usize], b + self.h[r as usize]));
        let scan = |k: usize| {
            let f = self.features[k];
            scan_feature(f, &self.columns[f], &sorted[k], self.g, self.h, parent, &self.params)
        };
        let candidates: Vec<Option<SplitCandidate>> = if self.parallel {
            (0..self.features.len()).into_par_iter().map(scan).collect()
        } else {
            (0..self.features.len()).map(scan).collect()
        };
        // features are ascending, so strict comparison keeps the lowest index on ties
        let mut best: Option<SplitCandidate> = None;
        for c in candidates.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        let Some(split) = best else { return id };

        let column = &self.columns[split.feature];
        for &r in rows {
            self.goes_left[r as usize] = column[r as usize] <= split.threshold;
        }
        let (mut left, mut right) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for list in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&r| self.goes_left[r as usize]);
            left.push(l);
            right.push(r);
        }
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left: l, right: r };
        id
    }
}

/// Grows one tree on column-major `columns` restricted to `features` (ascending).
pub(crate) fn build_tree(
    columns: &[Vec<f64>],
    presorted: &[Vec<u32>],
    features: &[usize],
    g: &[f64],
    h: &[f64],
    params: TreeParams,
    parallel: bool,
) -> RegTree {
    let n = g.len();
    let mut builder =
        Builder { columns, features, g, h, params, parallel, nodes: Vec::new(), goes_left: vec![false; n] };
    let sorted = if features.is_empty() {
        vec![(0..n as u32).collect()]
    } else {
        features.iter().map(|&f| presorted[f].clone()).collect()
    };
    builder.grow(sorted, 0);
    RegTree { nodes: builder.nodes }
}

/// Row indices of each column in ascending value order.
pub(crate) fn presort(columns: &[Vec<f64>]) -> Vec<Vec<u32>> {
    columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..col.len() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            idx
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Every distinct value as a candidate threshold, scored from scratch.
    fn brute_force(values: &[f64], g: &[f64], h: &[f64], lambda: f64, mch: f64) -> Option<(f64, Vec<bool>)> {
        let mut distinct: Vec<f64> = values.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let gp: f64 = g.iter().sum();
        let hp: f64 = h.iter().sum();
        let mut best: Option<(f64, Vec<bool>)> = None;
        for &t in &distinct[..distinct.len().saturating_sub(1)] {
            let side: Vec<bool> = values.iter().map(|&v| v <= t).collect();
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 0..values.len() {
                if side[i] {
                    gl += g[i];
                    hl += h[i];
                }
            }
            if hl < mch || hp - hl < mch {
                continue;
            }
            let (gr, hr) = (gp - gl, hp - hl);
            let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - gp * gp / (hp + lambda));
            if gain > MIN_SPLIT_GAIN && best.as_ref().is_none_or(|b| gain > b.0 + 1e-12) {
                best = Some((gain, side));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_brute_force_on_small_datasets(
            rows in prop::collection::vec((0u8..5, -3.0f64..3.0, 0.05f64..2.0), 1..=8),
            lambda in 0.0f64..2.0,
        ) {
            let values: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
            let g: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let h: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let fast = find_best_split(&values, &g, &h, lambda, 0.0, 1e-3);
            let slow = brute_force(&values, &g, &h, lambda, 1e-3);
            match (fast, slow) {
                (None, None) => {}
                (Some(f), Some((gain, side))) => {
                    prop_assert!((f.gain - gain).abs() <= 1e-9 * gain.abs().max(1.0));
                    let fast_side: Vec<bool> = values.iter().map(|&v| v <= f.threshold).collect();
                    prop_assert_eq!(fast_side, side);
                }
                (f, s) => prop_assert!(false, "fast {:?} slow {:?}", f, s.map(|s| s.0)),
            }
        }
    }

    #[test]
    fn threshold_lies_between_neighbours() {
        assert_eq!(threshold_between(1.0, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(threshold_between(a, b), a);
    }

    #[test]
    fn min_child_hessian_blocks_small_children() {
        let values = [0.0, 1.0, 2.0];
        let g = [-1.0, 0.5, 0.5];
        let h = [0.1, 1.0, 1.0];
        assert!(find_best_split(&values, &g, &h, 0.0, 0.0, 0.5).unwrap().threshold > 1.0);
    }

    #[test]
    fn tree_validation() {
        let bad = vec![Node::Split { feature: 0, threshold: 0.0, left: 1, right: 1 }, Node::Leaf { weight: 0.0 }];
        assert!(RegTree::from_nodes(bad).is_err());
        assert!(RegTree::from_nodes(vec![Node::Leaf { weight: 0.0 }, Node::Leaf { weight: 1.0 }]).is_err());
        let ok = vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
            Node::Leaf { weight: -1.0 },
            Node::Leaf { weight: 1.0 },
        ];
        let t = RegTree::from_nodes(ok).unwrap();
        assert_eq!((t.predict(&[0.5]), t.predict(&[0.6])), (-1.0, 1.0));
        assert_eq!((t.depth(), t.num_leaves()), (1, 2));
    }
}
