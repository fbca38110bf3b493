//! CART-style decision tree over concatenated evidence vectors, plus the
//! composed inference step that joins the tree with the knowledge base.
//!
//! Splits minimize Gini impurity over midpoint thresholds between consecutive
//! distinct feature values; ties resolve to the lowest feature index and then
//! the lowest threshold, and a value equal to the threshold descends left.
//! Training pre-sorts rows by content so any permutation of the same rows
//! yields an identical tree.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::attribute_model::{
    AffordanceClass, AttributeKind, FeatureVector, GaussianAttributeClassifier, ModelError,
    ObjectContext,
};
use crate::kb_graph::{
    AffordancePath, AffordanceScores, ConcatenatedEvidence, KbError, KnowledgeBaseGraph,
};

/// Errors from tree training and prediction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("cannot train a tree on an empty training set")]
    EmptyTrainingSet,
    #[error("inconsistent evidence lengths: expected {expected}, got {got}")]
    InconsistentDimensions { expected: usize, got: usize },
    #[error("evidence length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid tree configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
}

/// Stopping rules for tree growth.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    /// Maximum depth of split nodes; `None` grows until purity.
    pub max_depth: Option<usize>,
    /// Minimum number of rows each child of a split must keep.
    pub min_leaf_size: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_leaf_size: 1,
        }
    }
}

/// One labelled training example `(y, Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub evidence: ConcatenatedEvidence,
    pub label: AffordanceClass,
}

/// A tree node: either a split on one evidence feature or a leaf carrying
/// the majority class and the class-count histogram.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        class: AffordanceClass,
        counts: Vec<u64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Majority class and leaf purity returned by prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafPrediction {
    pub class: AffordanceClass,
    pub purity: f64,
}

/// The learned predictive model.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    dimension: usize,
    root: TreeNode,
}

impl DecisionTree {
    pub fn train(rows: &[TrainingRow], config: &TreeConfig) -> Result<Self, TreeError> {
        if rows.is_empty() {
            return Err(TreeError::EmptyTrainingSet);
        }
        if config.min_leaf_size == 0 {
            return Err(TreeError::InvalidConfig(String::from(
                "min_leaf_size must be at least 1",
            )));
        }
        let dimension = rows[0].evidence.len();
        for row in rows {
            if row.evidence.len() != dimension {
                return Err(TreeError::InconsistentDimensions {
                    expected: dimension,
                    got: row.evidence.len(),
                });
            }
        }
        // Canonical pre-sort by row content: training becomes invariant to
        // the order the rows arrive in.
        let mut items: Vec<(&[f64], AffordanceClass)> = rows
            .iter()
            .map(|r| (r.evidence.values(), r.label))
            .collect();
        items.sort_by(|a, b| {
            for (x, y) in a.0.iter().zip(b.0) {
                match x.total_cmp(y) {
                    core::cmp::Ordering::Equal => {}
                    other => return other,
                }
            }
            a.1.index().cmp(&b.1.index())
        });
        let root = grow(&items, 0, dimension, config);
        Ok(DecisionTree { dimension, root })
    }

    /// Rebuilds a tree from stored nodes, re-checking structural invariants.
    pub fn from_parts(dimension: usize, root: TreeNode) -> Result<Self, TreeError> {
        validate_node(&root, dimension)?;
        Ok(DecisionTree { dimension, root })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    /// Number of split levels along the deepest branch.
    pub fn depth(&self) -> usize {
        fn node_depth(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + node_depth(left).max(node_depth(right))
                }
            }
        }
        node_depth(&self.root)
    }

    /// Descends to a leaf (values equal to a threshold go left) and returns
    /// its majority class and purity.
    pub fn predict(&self, y: &ConcatenatedEvidence) -> Result<LeafPrediction, TreeError> {
        if y.len() != self.dimension {
            return Err(TreeError::DimensionMismatch {
                expected: self.dimension,
                got: y.len(),
            });
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class, counts } => {
                    let total: u64 = counts.iter().sum();
                    return Ok(LeafPrediction {
                        class: *class,
                        purity: counts[class.index()] as f64 / total as f64,
                    });
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if y.values()[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

fn histogram(items: &[(&[f64], AffordanceClass)]) -> Vec<u64> {
    let mut counts = vec![0u64; AffordanceClass::COUNT];
    for (_, z) in items {
        counts[z.index()] += 1;
    }
    counts
}

fn majority(counts: &[u64]) -> AffordanceClass {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    AffordanceClass::from_index(best).unwrap()
}

fn gini(counts: &[u64], n: f64) -> f64 {
    let mut g = 1.0;
    for c in counts {
        let p = *c as f64 / n;
        g -= p * p;
    }
    g
}

fn leaf(items: &[(&[f64], AffordanceClass)]) -> TreeNode {
    let counts = histogram(items);
    TreeNode::Leaf {
        class: majority(&counts),
        counts,
    }
}

fn grow(
    items: &[(&[f64], AffordanceClass)],
    depth: usize,
    dimension: usize,
    config: &TreeConfig,
) -> TreeNode {
    let counts = histogram(items);
    let n = items.len();
    let impure = counts.iter().filter(|c| **c > 0).count() > 1;
    let depth_ok = config.max_depth.is_none_or(|d| depth < d);
    if !impure || !depth_ok || n < 2 * config.min_leaf_size {
        return leaf(items);
    }

    // Best split: lowest weighted child Gini; ascending feature/threshold
    // iteration with strict improvement gives the documented tie-break.
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for feature in 0..dimension {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| items[a].0[feature].total_cmp(&items[b].0[feature]));
        let mut left_counts = vec![0u64; AffordanceClass::COUNT];
        for pos in 0..n - 1 {
            left_counts[items[order[pos]].1.index()] += 1;
            let v = items[order[pos]].0[feature];
            let v_next = items[order[pos + 1]].0[feature];
            if v == v_next {
                continue;
            }
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < config.min_leaf_size || n_right < config.min_leaf_size {
                continue;
            }
            let threshold = (v + v_next) / 2.0;
            if threshold >= v_next {
                // Adjacent representable values can collapse the midpoint
                // onto the right value, which would leak it into the left
                // child under the <= convention.
                continue;
            }
            let mut right_counts = vec![0u64; AffordanceClass::COUNT];
            for (rc, (lc, tc)) in right_counts
                .iter_mut()
                .zip(left_counts.iter().zip(&counts))
            {
                *rc = tc - lc;
            }
            let weighted = (n_left as f64 * gini(&left_counts, n_left as f64)
                + n_right as f64 * gini(&right_counts, n_right as f64))
                / n as f64;
            if best.is_none_or(|(g, _, _)| weighted < g) {
                best = Some((weighted, feature, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return leaf(items);
    };
    let (left_items, right_items): (Vec<_>, Vec<_>) = items
        .iter()
        .partition(|(values, _)| values[feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow(&left_items, depth + 1, dimension, config)),
        right: Box::new(grow(&right_items, depth + 1, dimension, config)),
    }
}

fn validate_node(node: &TreeNode, dimension: usize) -> Result<(), TreeError> {
    match node {
        TreeNode::Leaf { class, counts } => {
            if counts.len() != AffordanceClass::COUNT {
                return Err(TreeError::InvalidTree(String::from(
                    "leaf histogram must have one slot per affordance",
                )));
            }
            let total: u64 = counts.iter().sum();
            if total == 0 {
                return Err(TreeError::InvalidTree(String::from(
                    "leaf histogram must be non-empty",
                )));
            }
            let max = counts.iter().copied().max().unwrap();
            if counts[class.index()] != max {
                return Err(TreeError::InvalidTree(String::from(
                    "leaf class must be a histogram majority",
                )));
            }
            Ok(())
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if *feature >= dimension {
                return Err(TreeError::InvalidTree(String::from(
                    "split feature index exceeds the evidence length",
                )));
            }
            if !threshold.is_finite() {
                return Err(TreeError::InvalidTree(String::from(
                    "split threshold must be finite",
                )));
            }
            validate_node(left, dimension)?;
            validate_node(right, dimension)
        }
    }
}

/// Full single-object inference: kb path, linear scores, tree prediction,
/// and the composed final affordance.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub path: AffordancePath,
    pub tree_prediction: AffordanceClass,
    pub scores: AffordanceScores,
    pub final_affordance: AffordanceClass,
    pub leaf_purity: f64,
}

/// Errors propagated through the composed inference step.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Runs the whole reasoning pipeline on one object's attribute features.
///
/// The tree prediction is final while its leaf purity reaches `tau`;
/// otherwise the argmax of the linear affordance scores takes over.
pub fn infer(
    classifiers: &[GaussianAttributeClassifier],
    kb: &KnowledgeBaseGraph,
    tree: &DecisionTree,
    features: &[(AttributeKind, FeatureVector)],
    tau: f64,
) -> Result<InferenceResult, InferError> {
    let mut posteriors = Vec::with_capacity(kb.layers().len());
    for kind in kb.layers().kinds() {
        let clf = classifiers
            .iter()
            .find(|c| c.kind() == *kind)
            .ok_or(ModelError::MissingAttribute(*kind))?;
        let (_, x) = features
            .iter()
            .find(|(k, _)| k == kind)
            .ok_or(ModelError::MissingAttribute(*kind))?;
        posteriors.push(clf.posterior(x)?);
    }
    let ctx = ObjectContext::new(posteriors).map_err(InferError::Model)?;
    let y = ConcatenatedEvidence::from_context(&ctx, kb.layers())?;
    let path = kb.rank_path(&ctx)?;
    let scores = kb.affordance_scores(&y)?;
    let prediction = tree.predict(&y)?;
    let final_affordance = if prediction.purity >= tau {
        prediction.class
    } else {
        scores.argmax
    };
    Ok(InferenceResult {
        path,
        tree_prediction: prediction.class,
        scores,
        final_affordance,
        leaf_purity: prediction.purity,
    })
}
