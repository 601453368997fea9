//! Probability random forest: small fully-grown trees whose leaves store
//! class-1 relative frequencies.
//!
//! Trees are grown on bootstrap samples with every feature a split candidate
//! at every node (mtry = full projection width). Numeric splits use midpoints
//! of consecutive distinct sorted values; categorical splits are one-vs-rest
//! on a level. Ties in Gini decrease resolve to the lowest feature index,
//! then the lowest threshold or level code, so fits are reproducible.
//!
//! Feature columns are sorted once per tree and partitioned stably down the
//! recursion; bootstrap multiplicities enter as integer row weights.

use crate::data::{FeatureKind, Table};
use crate::seed::{self, stream};
use rand::Rng;
use thiserror::Error;

pub const DEFAULT_NUM_TREES: usize = 5;
pub const DEFAULT_MIN_NODE_SIZE: usize = 10;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training set needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("labels must contain both classes")]
    SingleClass,
    #[error("labels length {labels} does not match {rows} training rows")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("feature kinds length {kinds} does not match {cols} feature columns")]
    KindMismatch { kinds: usize, cols: usize },
    #[error("no row is out-of-bag for any tree")]
    NoOobRows,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SplitRule {
    /// value <= threshold goes left
    Threshold(f64),
    /// value == level goes left
    Level(f64),
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: u32,
        rule: SplitRule,
        left: u32,
        right: u32,
    },
    Leaf {
        p1: f64,
        n_samples: u32,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                } => {
                    let v = row[*feature as usize];
                    let goes_left = match rule {
                        SplitRule::Threshold(t) => v <= *t,
                        SplitRule::Level(l) => v == *l,
                    };
                    at = if goes_left { *left } else { *right } as usize;
                }
            }
        }
    }

    fn leaf(&self, row: &[f64]) -> (f64, u32) {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { p1, n_samples } => (*p1, *n_samples),
            Node::Split { .. } => unreachable!(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestParams {
    pub num_trees: usize,
    pub min_node_size: usize,
    /// Bootstrap resampling per tree (n draws with replacement). Disabling
    /// it trains every tree on the raw sample; without bootstrap there are
    /// no out-of-bag rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: DEFAULT_NUM_TREES,
            min_node_size: DEFAULT_MIN_NODE_SIZE,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct ForestModel {
    trees: Vec<Tree>,
    kinds: Vec<FeatureKind>,
    n_train: usize,
    oob_indices: Vec<Vec<u32>>,
}

impl ForestModel {
    /// Mean of leaf class-1 frequencies across trees; always in [0, 1].
    pub fn predict_prob(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.kinds.len());
        let sum: f64 = self.trees.iter().map(|t| t.leaf(row).0).sum();
        sum / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Rows held out of each tree's bootstrap sample.
    pub fn oob_indices(&self) -> &[Vec<u32>] {
        &self.oob_indices
    }
}

struct Grower<'a> {
    cols: &'a [Vec<f64>],
    kinds: &'a [FeatureKind],
    /// Per-row `(weight << 1) | label`: one load yields both.
    wl: &'a [u32],
    min_node: u32,
    /// Per-feature (value, row) pairs sorted by value, partitioned in place
    /// as the tree grows; all features share node boundaries.
    idx: &'a mut [Vec<(f64, u32)>],
    left_buf: &'a mut Vec<(f64, u32)>,
    right_buf: &'a mut Vec<(f64, u32)>,
    level_w: &'a mut Vec<u32>,
    level_w1: &'a mut Vec<u32>,
    nodes: Vec<Node>,
}

struct BestSplit {
    decrease: f64,
    feature: usize,
    rule: SplitRule,
    left_w: u64,
    left_w1: u64,
    /// Elements on the left side within the split feature's sorted slice;
    /// threshold splits leave that slice already partitioned.
    left_count: usize,
}

impl<'a> Grower<'a> {
    /// `w`/`w1` are the node's weighted total and class-1 counts, threaded
    /// down from the parent's split scan.
    fn grow(&mut self, lo: usize, hi: usize, w: u64, w1: u64) -> u32 {
        debug_assert!(w > 0);
        let pure = w1 == 0 || w1 == w;
        if pure || w < 2 * self.min_node as u64 {
            return self.push_leaf(w, w1);
        }
        match self.best_split(lo, hi, w, w1) {
            None => self.push_leaf(w, w1),
            Some(best) => {
                let mid = self.partition(lo, hi, &best);
                debug_assert!(mid > lo && mid < hi);
                let left = self.grow(lo, mid, best.left_w, best.left_w1);
                let right = self.grow(mid, hi, w - best.left_w, w1 - best.left_w1);
                self.nodes.push(Node::Split {
                    feature: best.feature as u32,
                    rule: best.rule,
                    left,
                    right,
                });
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn push_leaf(&mut self, w: u64, w1: u64) -> u32 {
        self.nodes.push(Node::Leaf {
            p1: w1 as f64 / w as f64,
            n_samples: w as u32,
        });
        (self.nodes.len() - 1) as u32
    }

    /// Weighted Gini decrease of splitting (w, w1) into (wl, wl1) and the
    /// complement.
    #[inline]
    fn decrease(w: u64, w1: u64, wl: u64, wl1: u64) -> f64 {
        let (w, w1, wl, wl1) = (w as f64, w1 as f64, wl as f64, wl1 as f64);
        let (wr, wr1) = (w - wl, w1 - wl1);
        let parent = 2.0 * w1 * (w - w1) / w;
        let children = 2.0 * (wl1 * (wl - wl1) / wl + wr1 * (wr - wr1) / wr);
        (parent - children) / w
    }

    fn best_split(&mut self, lo: usize, hi: usize, w: u64, w1: u64) -> Option<BestSplit> {
        let min = self.min_node as u64;
        let mut best: Option<BestSplit> = None;
        let consider = |cand: BestSplit, best: &mut Option<BestSplit>| {
            if cand.decrease > 0.0
                && best.as_ref().map_or(true, |b| cand.decrease > b.decrease)
            {
                *best = Some(cand);
            }
        };
        for f in 0..self.cols.len() {
            match self.kinds[f] {
                FeatureKind::Numeric => {
                    let slice = &self.idx[f][lo..hi];
                    let (mut wl, mut wl1) = (0u64, 0u64);
                    for (i, pair) in slice.windows(2).enumerate() {
                        let (cur, r) = pair[0];
                        let next = pair[1].0;
                        let e = self.wl[r as usize] as u64;
                        wl += e >> 1;
                        wl1 += (e >> 1) * (e & 1);
                        if cur == next {
                            continue;
                        }
                        if wl < min || w - wl < min {
                            continue;
                        }
                        consider(
                            BestSplit {
                                decrease: Self::decrease(w, w1, wl, wl1),
                                feature: f,
                                rule: SplitRule::Threshold(0.5 * (cur + next)),
                                left_w: wl,
                                left_w1: wl1,
                                left_count: i + 1,
                            },
                            &mut best,
                        );
                    }
                }
                FeatureKind::Categorical { n_levels } => {
                    self.level_w.clear();
                    self.level_w.resize(n_levels, 0);
                    self.level_w1.clear();
                    self.level_w1.resize(n_levels, 0);
                    for &(value, r) in &self.idx[f][lo..hi] {
                        let code = value as usize;
                        let e = self.wl[r as usize];
                        self.level_w[code] += e >> 1;
                        self.level_w1[code] += (e >> 1) * (e & 1);
                    }
                    for code in 0..n_levels {
                        let wl = self.level_w[code] as u64;
                        let wl1 = self.level_w1[code] as u64;
                        if wl < min || w - wl < min {
                            continue;
                        }
                        consider(
                            BestSplit {
                                decrease: Self::decrease(w, w1, wl, wl1),
                                feature: f,
                                rule: SplitRule::Level(code as f64),
                                left_w: wl,
                                left_w1: wl1,
                                left_count: 0,
                            },
                            &mut best,
                        );
                    }
                }
            }
        }
        best
    }

    /// Stable partition of every feature slice by the chosen rule; returns
    /// the boundary index. A threshold split leaves its own feature's sorted
    /// slice untouched (values at most the threshold already come first).
    fn partition(&mut self, lo: usize, hi: usize, best: &BestSplit) -> usize {
        let split_col = &self.cols[best.feature];
        let skip_own = matches!(best.rule, SplitRule::Threshold(_));
        let mut mid = lo + best.left_count;
        for f in 0..self.idx.len() {
            if skip_own && f == best.feature {
                continue;
            }
            let mut arr = std::mem::take(&mut self.idx[f]);
            self.left_buf.clear();
            self.right_buf.clear();
            for &pair in &arr[lo..hi] {
                let v = split_col[pair.1 as usize];
                let goes_left = match best.rule {
                    SplitRule::Threshold(t) => v <= t,
                    SplitRule::Level(l) => v == l,
                };
                if goes_left {
                    self.left_buf.push(pair);
                } else {
                    self.right_buf.push(pair);
                }
            }
            mid = lo + self.left_buf.len();
            arr[lo..mid].copy_from_slice(&self.left_buf);
            arr[mid..hi].copy_from_slice(&self.right_buf);
            self.idx[f] = arr;
        }
        mid
    }
}

/// Fit a probability forest on a dense feature table with binary labels.
/// Each row counts once.
pub fn fit_forest(
    features: &Table,
    labels: &[u8],
    kinds: &[FeatureKind],
    params: &ForestParams,
) -> Result<ForestModel, ForestError> {
    fit_forest_weighted(features, labels, kinds, &vec![1; features.n_rows()], params)
}

/// Reusable per-thread buffers; forest fits run in tight loops inside the
/// scoring work items.
#[derive(Default)]
struct Scratch {
    cols: Vec<Vec<f64>>,
    sorted: Vec<Vec<(f64, u32)>>,
    expanded: Vec<u32>,
    weights: Vec<u32>,
    wl: Vec<u32>,
    idx: Vec<Vec<(f64, u32)>>,
    left_buf: Vec<(f64, u32)>,
    right_buf: Vec<(f64, u32)>,
    level_w: Vec<u32>,
    level_w1: Vec<u32>,
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Scratch> = Default::default();
}

/// Fit on a weighted multiset: row `r` counts `multiplicity[r]` times. The
/// bootstrap draws `sum(multiplicity)` samples with replacement from the
/// multiset, exactly as if duplicated rows were materialized.
pub fn fit_forest_weighted(
    features: &Table,
    labels: &[u8],
    kinds: &[FeatureKind],
    multiplicity: &[u32],
    params: &ForestParams,
) -> Result<ForestModel, ForestError> {
    let n = features.n_rows();
    let n_feat = features.n_cols();
    if n < 2 {
        return Err(ForestError::TooFewRows(n));
    }
    if labels.len() != n || multiplicity.len() != n {
        return Err(ForestError::LabelMismatch {
            labels: labels.len(),
            rows: n,
        });
    }
    if kinds.len() != n_feat {
        return Err(ForestError::KindMismatch {
            kinds: kinds.len(),
            cols: n_feat,
        });
    }
    if labels.iter().all(|&y| y == 1) || labels.iter().all(|&y| y == 0) {
        return Err(ForestError::SingleClass);
    }
    assert!(params.num_trees >= 1 && params.min_node_size >= 1);
    SCRATCH.with(|cell| {
        let mut scratch = cell.borrow_mut();
        fit_with_scratch(&mut scratch, features, labels, kinds, multiplicity, params)
    })
}

fn fit_with_scratch(
    scratch: &mut Scratch,
    features: &Table,
    labels: &[u8],
    kinds: &[FeatureKind],
    multiplicity: &[u32],
    params: &ForestParams,
) -> Result<ForestModel, ForestError> {
    let n = features.n_rows();
    let n_feat = features.n_cols();
    let Scratch {
        cols,
        sorted,
        expanded,
        weights,
        wl,
        idx,
        left_buf,
        right_buf,
        level_w,
        level_w1,
    } = scratch;

    // column-major copy and per-feature sort, shared by all trees
    cols.resize_with(n_feat.max(cols.len()), Vec::new);
    sorted.resize_with(n_feat.max(sorted.len()), Vec::new);
    idx.resize_with(n_feat.max(idx.len()), Vec::new);
    for f in 0..n_feat {
        let col = &mut cols[f];
        col.clear();
        col.extend((0..n).map(|r| features.row(r)[f]));
        let order = &mut sorted[f];
        order.clear();
        order.extend((0..n as u32).map(|r| (col[r as usize], r)));
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    // row id per multiset element, the bootstrap draw target
    expanded.clear();
    for r in 0..n as u32 {
        expanded.extend(std::iter::repeat(r).take(multiplicity[r as usize] as usize));
    }
    let n_total = expanded.len();

    let mut trees = Vec::with_capacity(params.num_trees);
    let mut oob_indices = Vec::with_capacity(params.num_trees);
    weights.clear();
    weights.resize(n, 0);
    for t in 0..params.num_trees {
        if params.bootstrap {
            weights.iter_mut().for_each(|w| *w = 0);
            let mut rng = seed::rng(params.seed, &[stream::FOREST, t as u64]);
            for _ in 0..n_total {
                weights[expanded[rng.gen_range(0..n_total)] as usize] += 1;
            }
        } else {
            weights.copy_from_slice(multiplicity);
        }
        let oob: Vec<u32> = if params.bootstrap {
            (0..n as u32).filter(|&r| weights[r as usize] == 0).collect()
        } else {
            Vec::new()
        };
        for f in 0..n_feat {
            let arr = &mut idx[f];
            arr.clear();
            arr.extend(
                sorted[f]
                    .iter()
                    .copied()
                    .filter(|&(_, r)| weights[r as usize] > 0),
            );
        }
        let active = idx[0].len();
        wl.clear();
        wl.extend(
            weights
                .iter()
                .zip(labels)
                .map(|(&w, &y)| (w << 1) | u32::from(y == 1)),
        );
        let root_w: u64 = weights.iter().map(|&w| w as u64).sum();
        let root_w1: u64 = weights
            .iter()
            .zip(labels)
            .map(|(&w, &y)| w as u64 * u64::from(y == 1))
            .sum();
        let mut grower = Grower {
            cols: &cols[..n_feat],
            kinds,
            wl,
            min_node: params.min_node_size as u32,
            idx: &mut idx[..n_feat],
            left_buf,
            right_buf,
            level_w,
            level_w1,
            nodes: Vec::new(),
        };
        let root = grower.grow(0, active, root_w, root_w1);
        debug_assert_eq!(root as usize, grower.nodes.len() - 1);
        // reorder so the root sits at index 0
        let mut nodes = grower.nodes;
        let last = nodes.len() - 1;
        nodes.swap(0, last);
        for node in &mut nodes {
            if let Node::Split { left, right, .. } = node {
                for child in [left, right] {
                    if *child as usize == last {
                        *child = 0;
                    } else if *child == 0 {
                        *child = last as u32;
                    }
                }
            }
        }
        trees.push(Tree { nodes });
        oob_indices.push(oob);
    }
    Ok(ForestModel {
        trees,
        kinds: kinds.to_vec(),
        n_train: n,
        oob_indices,
    })
}

/// Out-of-bag classification report.
#[derive(Debug, Clone, Copy)]
pub struct OobReport {
    /// Misclassification rate over rows with at least one OOB tree.
    pub error_rate: f64,
    pub n_evaluated: usize,
    /// Rows that were in-bag for every tree.
    pub n_skipped: usize,
}

/// Majority-vote OOB error over the training sample the model was fit on.
pub fn oob_error(
    model: &ForestModel,
    features: &Table,
    labels: &[u8],
) -> Result<OobReport, ForestError> {
    let n = features.n_rows();
    if labels.len() != n || n != model.n_train {
        return Err(ForestError::LabelMismatch {
            labels: labels.len(),
            rows: n,
        });
    }
    let mut votes1 = vec![0u32; n];
    let mut votes0 = vec![0u32; n];
    for (tree, oob) in model.trees.iter().zip(&model.oob_indices) {
        for &r in oob {
            let (p1, _) = tree.leaf(features.row(r as usize));
            if p1 > 0.5 {
                votes1[r as usize] += 1;
            } else {
                votes0[r as usize] += 1;
            }
        }
    }
    let mut evaluated = 0usize;
    let mut wrong = 0usize;
    for r in 0..n {
        if votes1[r] + votes0[r] == 0 {
            continue;
        }
        evaluated += 1;
        let predicted = u8::from(votes1[r] > votes0[r]);
        if predicted != labels[r] {
            wrong += 1;
        }
    }
    if evaluated == 0 {
        return Err(ForestError::NoOobRows);
    }
    Ok(OobReport {
        error_rate: wrong as f64 / evaluated as f64,
        n_evaluated: evaluated,
        n_skipped: n - evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn table_1d(xs: &[f64]) -> Table {
        Table::from_rows(1, xs.to_vec())
    }

    /// Uniform 1-d points with label x > 0.
    fn separable_toy(n: usize, seed: u64) -> (Table, Vec<u8>) {
        let mut rng = crate::seed::rng(seed, &[99]);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let labels = xs.iter().map(|&x| u8::from(x > 0.0)).collect();
        (table_1d(&xs), labels)
    }

    #[test]
    fn separable_toy_probability_gap() {
        let (features, labels) = separable_toy(200, 1);
        let model = fit_forest(
            &features,
            &labels,
            &[FeatureKind::Numeric],
            &ForestParams::default(),
        )
        .unwrap();
        assert!(model.predict_prob(&[1.0]) >= 0.9);
        assert!(model.predict_prob(&[-1.0]) <= 0.1);
    }

    #[test]
    fn null_labels_stay_near_half() {
        let mut rng = crate::seed::rng(5, &[98]);
        let xs: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let labels: Vec<u8> = (0..500).map(|_| u8::from(rng.gen::<bool>())).collect();
        let model = fit_forest(
            &table_1d(&xs),
            &labels,
            &[FeatureKind::Numeric],
            &ForestParams::default(),
        )
        .unwrap();
        let grid: Vec<f64> = (0..50).map(|i| -0.98 + 0.04 * i as f64).collect();
        let mean: f64 =
            grid.iter().map(|&x| model.predict_prob(&[x])).sum::<f64>() / grid.len() as f64;
        assert!((0.35..=0.65).contains(&mean), "mean prob {mean}");
    }

    #[test]
    fn single_tree_without_bootstrap_gives_exact_cell_frequencies() {
        let (features, labels) = separable_toy(120, 7);
        let params = ForestParams {
            num_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let model = fit_forest(&features, &labels, &[FeatureKind::Numeric], &params).unwrap();
        // group training rows by their leaf and compare stored frequencies
        let mut by_leaf: std::collections::BTreeMap<usize, (u32, u32)> = Default::default();
        for r in 0..features.n_rows() {
            let id = model.trees[0].leaf_index(features.row(r));
            let entry = by_leaf.entry(id).or_insert((0, 0));
            entry.0 += 1;
            entry.1 += u32::from(labels[r] == 1);
        }
        for r in 0..features.n_rows() {
            let id = model.trees[0].leaf_index(features.row(r));
            let (p1, n) = model.trees[0].leaf(features.row(r));
            let (count, ones) = by_leaf[&id];
            assert_eq!(n, count);
            assert_eq!(p1, ones as f64 / count as f64);
        }
    }

    #[test]
    fn predict_prob_is_mean_of_tree_leaves() {
        let leaf = |p1: f64| Tree {
            nodes: vec![Node::Leaf { p1, n_samples: 10 }],
        };
        let model = ForestModel {
            trees: vec![leaf(0.2), leaf(0.6)],
            kinds: vec![FeatureKind::Numeric],
            n_train: 10,
            oob_indices: vec![Vec::new(), Vec::new()],
        };
        assert_eq!(model.predict_prob(&[0.0]), 0.4);
        let ones = ForestModel {
            trees: vec![leaf(1.0), leaf(1.0), leaf(1.0)],
            kinds: vec![FeatureKind::Numeric],
            n_train: 10,
            oob_indices: vec![Vec::new(); 3],
        };
        assert_eq!(ones.predict_prob(&[0.0]), 1.0);
    }

    #[test]
    fn prediction_is_monotone_on_separable_toy() {
        let (features, labels) = separable_toy(400, 11);
        let model = fit_forest(
            &features,
            &labels,
            &[FeatureKind::Numeric],
            &ForestParams::default(),
        )
        .unwrap();
        let mut last = 0.0;
        for i in 0..80 {
            let x = -1.0 + 0.025 * i as f64;
            let p = model.predict_prob(&[x]);
            assert!(p >= last - 1e-12, "not monotone at {x}");
            last = p;
        }
    }

    #[test]
    fn categorical_one_vs_rest_split() {
        // three levels; class 1 iff level == 1
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..240 {
            let code = (i % 3) as f64;
            values.push(code);
            labels.push(u8::from(code == 1.0));
        }
        let model = fit_forest(
            &Table::from_rows(1, values),
            &labels,
            &[FeatureKind::Categorical { n_levels: 3 }],
            &ForestParams::default(),
        )
        .unwrap();
        assert!(model.predict_prob(&[1.0]) >= 0.9);
        assert!(model.predict_prob(&[0.0]) <= 0.1);
        assert!(model.predict_prob(&[2.0]) <= 0.1);
    }

    #[test]
    fn row_order_does_not_affect_the_grown_tree() {
        let (features, labels) = separable_toy(100, 13);
        let params = ForestParams {
            num_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let a = fit_forest(&features, &labels, &[FeatureKind::Numeric], &params).unwrap();
        // reverse row order
        let rev_vals: Vec<f64> = (0..100).rev().map(|r| features.row(r)[0]).collect();
        let rev_labels: Vec<u8> = labels.iter().rev().copied().collect();
        let b = fit_forest(
            &table_1d(&rev_vals),
            &rev_labels,
            &[FeatureKind::Numeric],
            &params,
        )
        .unwrap();
        for i in 0..40 {
            let x = -1.0 + 0.05 * i as f64;
            assert_eq!(a.predict_prob(&[x]), b.predict_prob(&[x]));
        }
    }

    #[test]
    fn single_class_labels_rejected() {
        let (features, _) = separable_toy(50, 17);
        let labels = vec![1u8; 50];
        assert!(matches!(
            fit_forest(
                &features,
                &labels,
                &[FeatureKind::Numeric],
                &ForestParams::default()
            ),
            Err(ForestError::SingleClass)
        ));
    }

    #[test]
    fn oob_error_separable_and_null() {
        let (features, labels) = separable_toy(400, 19);
        let model = fit_forest(
            &features,
            &labels,
            &[FeatureKind::Numeric],
            &ForestParams {
                num_trees: 20,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let report = oob_error(&model, &features, &labels).unwrap();
        assert!(report.error_rate <= 0.05, "separable OOB {}", report.error_rate);

        let mut rng = crate::seed::rng(23, &[97]);
        let xs: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let coin: Vec<u8> = (0..400).map(|_| u8::from(rng.gen::<bool>())).collect();
        let null_model = fit_forest(
            &table_1d(&xs),
            &coin,
            &[FeatureKind::Numeric],
            &ForestParams {
                num_trees: 20,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let null_report = oob_error(&null_model, &table_1d(&xs), &coin).unwrap();
        assert!(
            (0.4..=0.6).contains(&null_report.error_rate),
            "null OOB {}",
            null_report.error_rate
        );
    }

    #[test]
    fn bootstrap_excludes_about_a_third_of_rows() {
        // Single tree, n = 10: expected OOB share is (1 - 1/10)^10 = 0.3487.
        let mut total = 0usize;
        let reps = 400;
        for s in 0..reps {
            let (features, labels) = separable_toy(10, 1000 + s);
            let model = fit_forest(
                &features,
                &labels,
                &[FeatureKind::Numeric],
                &ForestParams {
                    num_trees: 1,
                    min_node_size: 2,
                    seed: s,
                    ..ForestParams::default()
                },
            );
            // tiny samples may come out single-class; skip those draws
            let Ok(model) = model else { continue };
            total += model.oob_indices()[0].len();
        }
        let mean = total as f64 / (reps as f64 * 10.0);
        assert!((mean - 0.3487).abs() < 0.05, "mean OOB share {mean}");
    }

    #[test]
    fn no_oob_rows_is_an_error() {
        let (features, labels) = separable_toy(50, 29);
        let model = fit_forest(
            &features,
            &labels,
            &[FeatureKind::Numeric],
            &ForestParams {
                num_trees: 1,
                bootstrap: false,
                ..ForestParams::default()
            },
        )
        .unwrap();
        assert!(matches!(
            oob_error(&model, &features, &labels),
            Err(ForestError::NoOobRows)
        ));
    }

    #[test]
    fn predictions_stay_in_unit_interval_and_deterministic() {
        let (features, labels) = separable_toy(150, 31);
        let params = ForestParams {
            seed: 5,
            ..ForestParams::default()
        };
        let a = fit_forest(&features, &labels, &[FeatureKind::Numeric], &params).unwrap();
        let b = fit_forest(&features, &labels, &[FeatureKind::Numeric], &params).unwrap();
        for i in 0..60 {
            let x = -1.2 + 0.04 * i as f64;
            let p = a.predict_prob(&[x]);
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(p, b.predict_prob(&[x]));
        }
    }
}
