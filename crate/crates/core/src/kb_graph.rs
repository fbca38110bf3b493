//! Layered knowledge-base graph with row-stochastic edge weights, an
//! entity-to-affordance ranking matrix, and max-product path ranking.
//!
//! Layers follow the attribute order (shape, texture, categorical,
//! environment) and end in the affordance layer. Edge weights between
//! consecutive layers are proportional to co-activated posterior mass over
//! the training contexts; the ranking matrix holds column-normalized class
//! prototypes of the concatenated evidence vector.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::attribute_model::{AffordanceClass, AttributeKind, EntityId, ObjectContext};
use crate::math;

/// Default ceiling on the number of chains `enumerate_paths` will score.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Errors from graph construction, ranking, and scoring.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("cannot build a knowledge base from an empty training set")]
    EmptyTrainingSet,
    #[error("context does not cover the {0} layer")]
    LayerMismatch(AttributeKind),
    #[error("{paths} chains exceed the enumeration cap of {cap}")]
    PathExplosion { paths: usize, cap: usize },
    #[error("evidence length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid layer configuration: {0}")]
    InvalidLayerConfig(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("evidence values must be finite")]
    NonFiniteEvidence,
}

/// Ordered attribute layers of a knowledge base; the affordance layer is
/// implicit at the end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerConfig {
    kinds: Vec<AttributeKind>,
}

impl LayerConfig {
    /// The full four-attribute layout.
    pub fn full() -> Self {
        LayerConfig {
            kinds: AttributeKind::ALL.to_vec(),
        }
    }

    /// The three-attribute layout without the environment layer.
    pub fn ablated() -> Self {
        LayerConfig {
            kinds: vec![
                AttributeKind::Shape,
                AttributeKind::Texture,
                AttributeKind::Categorical,
            ],
        }
    }

    /// A custom ordered subset of the attribute layers.
    pub fn new(kinds: Vec<AttributeKind>) -> Result<Self, KbError> {
        if kinds.is_empty() {
            return Err(KbError::InvalidLayerConfig(String::from(
                "at least one attribute layer is required",
            )));
        }
        for pair in kinds.windows(2) {
            if pair[0] >= pair[1] {
                return Err(KbError::InvalidLayerConfig(String::from(
                    "layers must follow the attribute order without repeats",
                )));
            }
        }
        Ok(LayerConfig { kinds })
    }

    pub fn kinds(&self) -> &[AttributeKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Total entity count across the attribute layers (25 full, 18 ablated).
    pub fn entity_count(&self) -> usize {
        self.kinds.iter().map(|k| k.entity_count()).sum()
    }

    /// Start offset of a layer's block inside the concatenated evidence.
    pub fn offset_of(&self, kind: AttributeKind) -> Option<usize> {
        let mut offset = 0;
        for k in &self.kinds {
            if *k == kind {
                return Some(offset);
            }
            offset += k.entity_count();
        }
        None
    }

    pub fn includes(&self, kind: AttributeKind) -> bool {
        self.kinds.contains(&kind)
    }

    /// Entity names across all attribute layers, in evidence order.
    pub fn entity_names(&self) -> Vec<&'static str> {
        self.kinds
            .iter()
            .flat_map(|k| k.entity_names().iter().copied())
            .collect()
    }
}

/// Identifies either an attribute layer or the terminal affordance layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerRef {
    Attribute(AttributeKind),
    Affordance,
}

impl LayerRef {
    pub fn entity_count(self) -> usize {
        match self {
            LayerRef::Attribute(kind) => kind.entity_count(),
            LayerRef::Affordance => AffordanceClass::COUNT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerRef::Attribute(kind) => kind.name(),
            LayerRef::Affordance => "affordance",
        }
    }
}

impl fmt::Display for LayerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Edge weights between two consecutive layers; rows index source entities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    from: LayerRef,
    to: LayerRef,
    weights: Vec<Vec<f64>>,
}

impl WeightMatrix {
    pub fn new(from: LayerRef, to: LayerRef, weights: Vec<Vec<f64>>) -> Result<Self, KbError> {
        if weights.len() != from.entity_count() {
            return Err(KbError::InvalidWeights(String::from(
                "row count must match the source layer's entity count",
            )));
        }
        for row in &weights {
            if row.len() != to.entity_count() {
                return Err(KbError::InvalidWeights(String::from(
                    "column count must match the target layer's entity count",
                )));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(KbError::InvalidWeights(String::from(
                    "weights must be finite and non-negative",
                )));
            }
        }
        Ok(WeightMatrix { from, to, weights })
    }

    pub fn from_layer(&self) -> LayerRef {
        self.from
    }

    pub fn to_layer(&self) -> LayerRef {
        self.to
    }

    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn cols(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from][to]
    }
}

/// One entity chain through the attribute layers plus its affordance and
/// accumulated log-score.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordancePath {
    pub entities: Vec<EntityId>,
    pub affordance: AffordanceClass,
    pub log_score: f64,
}

/// Concatenation of per-attribute posteriors in layer order (`y(x)`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatenatedEvidence {
    values: Vec<f64>,
}

impl ConcatenatedEvidence {
    pub fn new(values: Vec<f64>) -> Result<Self, KbError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KbError::NonFiniteEvidence);
        }
        Ok(ConcatenatedEvidence { values })
    }

    /// Concatenates a context's posteriors following the layer order.
    pub fn from_context(ctx: &ObjectContext, layers: &LayerConfig) -> Result<Self, KbError> {
        let mut values = Vec::with_capacity(layers.entity_count());
        for kind in layers.kinds() {
            let post = ctx.get(*kind).ok_or(KbError::LayerMismatch(*kind))?;
            values.extend_from_slice(post.probs());
        }
        Ok(ConcatenatedEvidence { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Unnormalized affordance scores `R = ranking^T * y` plus a normalized copy
/// and the argmax class.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceScores {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub argmax: AffordanceClass,
}

impl AffordanceScores {
    /// Normalized score of the argmax class.
    pub fn winning(&self) -> f64 {
        self.normalized[self.argmax.index()]
    }
}

/// Layered entity graph with one weight matrix per consecutive layer pair
/// (the last pair ends in the affordance layer) and the ranking matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBaseGraph {
    layers: LayerConfig,
    edges: Vec<WeightMatrix>,
    ranking: Vec<Vec<f64>>,
}

impl KnowledgeBaseGraph {
    /// Builds the graph from labelled training contexts.
    ///
    /// Edge weights between consecutive layers accumulate co-activated
    /// posterior mass and are row-normalized; the final edge matrix connects
    /// the last attribute layer to the hard affordance labels. Ranking
    /// columns are class means of the concatenated evidence, normalized to
    /// sum to one. Rows or columns with zero mass fall back to uniform.
    /// The accumulation order is canonicalized so permuting the training
    /// list yields a bit-identical graph.
    pub fn build(
        contexts: &[(ObjectContext, AffordanceClass)],
        layers: &LayerConfig,
    ) -> Result<Self, KbError> {
        if contexts.is_empty() {
            return Err(KbError::EmptyTrainingSet);
        }
        for (ctx, _) in contexts {
            for kind in layers.kinds() {
                if ctx.get(*kind).is_none() {
                    return Err(KbError::LayerMismatch(*kind));
                }
            }
        }
        let mut order: Vec<usize> = (0..contexts.len()).collect();
        order.sort_by(|&a, &b| {
            let (ctx_a, z_a) = &contexts[a];
            let (ctx_b, z_b) = &contexts[b];
            z_a.index().cmp(&z_b.index()).then_with(|| {
                for kind in layers.kinds() {
                    let pa = ctx_a.get(*kind).unwrap().probs();
                    let pb = ctx_b.get(*kind).unwrap().probs();
                    for (x, y) in pa.iter().zip(pb) {
                        match x.total_cmp(y) {
                            core::cmp::Ordering::Equal => {}
                            other => return other,
                        }
                    }
                }
                core::cmp::Ordering::Equal
            })
        });

        let kinds = layers.kinds();
        let mut edges = Vec::with_capacity(kinds.len());
        for (k, kind) in kinds.iter().enumerate() {
            let from = LayerRef::Attribute(*kind);
            let to = if k + 1 < kinds.len() {
                LayerRef::Attribute(kinds[k + 1])
            } else {
                LayerRef::Affordance
            };
            let mut acc = vec![vec![0.0f64; to.entity_count()]; from.entity_count()];
            for &i in &order {
                let (ctx, z) = &contexts[i];
                let p_from = ctx.get(*kind).unwrap().probs();
                match to {
                    LayerRef::Attribute(next) => {
                        let p_to = ctx.get(next).unwrap().probs();
                        for (r, pf) in p_from.iter().enumerate() {
                            for (c, pt) in p_to.iter().enumerate() {
                                acc[r][c] += pf * pt;
                            }
                        }
                    }
                    LayerRef::Affordance => {
                        for (r, pf) in p_from.iter().enumerate() {
                            acc[r][z.index()] += pf;
                        }
                    }
                }
            }
            for row in acc.iter_mut() {
                normalize_row(row);
            }
            edges.push(WeightMatrix::new(from, to, acc)?);
        }

        let entity_count = layers.entity_count();
        let mut col_sums = vec![vec![0.0f64; entity_count]; AffordanceClass::COUNT];
        let mut class_counts = [0usize; AffordanceClass::COUNT];
        for &i in &order {
            let (ctx, z) = &contexts[i];
            let col = &mut col_sums[z.index()];
            let mut offset = 0;
            for kind in kinds {
                for (j, p) in ctx.get(*kind).unwrap().probs().iter().enumerate() {
                    col[offset + j] += p;
                }
                offset += kind.entity_count();
            }
            class_counts[z.index()] += 1;
        }
        let mut ranking = vec![vec![0.0f64; AffordanceClass::COUNT]; entity_count];
        for z in 0..AffordanceClass::COUNT {
            if class_counts[z] == 0 {
                let uniform = 1.0 / entity_count as f64;
                for row in ranking.iter_mut() {
                    row[z] = uniform;
                }
            } else {
                let n = class_counts[z] as f64;
                let mean: Vec<f64> = col_sums[z].iter().map(|s| s / n).collect();
                let sum: f64 = mean.iter().sum();
                for (e, m) in mean.iter().enumerate() {
                    ranking[e][z] = m / sum;
                }
            }
        }

        Ok(KnowledgeBaseGraph {
            layers: layers.clone(),
            edges,
            ranking,
        })
    }

    /// Reassembles a graph from stored parts, validating shapes only; the
    /// stochasticity of built graphs is preserved by round-trips, while
    /// hand-assembled graphs may carry arbitrary positive weights.
    pub fn from_parts(
        layers: LayerConfig,
        edges: Vec<WeightMatrix>,
        ranking: Vec<Vec<f64>>,
    ) -> Result<Self, KbError> {
        let kinds = layers.kinds();
        if edges.len() != kinds.len() {
            return Err(KbError::InvalidWeights(String::from(
                "expected one edge matrix per layer, ending at the affordance layer",
            )));
        }
        for (k, edge) in edges.iter().enumerate() {
            let want_from = LayerRef::Attribute(kinds[k]);
            let want_to = if k + 1 < kinds.len() {
                LayerRef::Attribute(kinds[k + 1])
            } else {
                LayerRef::Affordance
            };
            if edge.from_layer() != want_from || edge.to_layer() != want_to {
                return Err(KbError::InvalidWeights(String::from(
                    "edge endpoints do not follow the layer order",
                )));
            }
        }
        if ranking.len() != layers.entity_count() {
            return Err(KbError::InvalidWeights(String::from(
                "ranking row count must match the total entity count",
            )));
        }
        for row in &ranking {
            if row.len() != AffordanceClass::COUNT {
                return Err(KbError::InvalidWeights(String::from(
                    "ranking must have one column per affordance",
                )));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(KbError::InvalidWeights(String::from(
                    "ranking weights must be finite and non-negative",
                )));
            }
        }
        Ok(KnowledgeBaseGraph {
            layers,
            edges,
            ranking,
        })
    }

    pub fn layers(&self) -> &LayerConfig {
        &self.layers
    }

    pub fn edges(&self) -> &[WeightMatrix] {
        &self.edges
    }

    /// Entity-to-affordance ranking matrix, rows in evidence order.
    pub fn ranking(&self) -> &[Vec<f64>] {
        &self.ranking
    }

    /// Log posteriors per layer for a context covering this graph's layers.
    fn log_posteriors(&self, ctx: &ObjectContext) -> Result<Vec<Vec<f64>>, KbError> {
        self.layers
            .kinds()
            .iter()
            .map(|kind| {
                ctx.get(*kind)
                    .map(|p| p.probs().iter().map(|v| math::ln(*v)).collect())
                    .ok_or(KbError::LayerMismatch(*kind))
            })
            .collect()
    }

    fn log_edges(&self) -> Vec<Vec<Vec<f64>>> {
        self.edges
            .iter()
            .map(|e| {
                e.weights()
                    .iter()
                    .map(|row| row.iter().map(|w| math::ln(*w)).collect())
                    .collect()
            })
            .collect()
    }

    /// Score of one chain, accumulated left to right: posterior of the first
    /// entity, then alternating edge and posterior terms, ending with the
    /// edge into the affordance layer.
    fn chain_score(
        lp: &[Vec<f64>],
        lw: &[Vec<Vec<f64>>],
        entities: &[usize],
        affordance: usize,
    ) -> f64 {
        let mut score = lp[0][entities[0]];
        for k in 0..entities.len() - 1 {
            score += lw[k][entities[k]][entities[k + 1]];
            score += lp[k + 1][entities[k + 1]];
        }
        score += lw[entities.len() - 1][entities[entities.len() - 1]][affordance];
        score
    }

    /// Returns the maximum-score chain through the graph via layer-by-layer
    /// dynamic programming. Exact score ties resolve to the chain with the
    /// lexicographically smallest entity indices.
    pub fn rank_path(&self, ctx: &ObjectContext) -> Result<AffordancePath, KbError> {
        let lp = self.log_posteriors(ctx)?;
        let lw = self.log_edges();
        let kinds = self.layers.kinds();
        let n_layers = kinds.len();

        // suffix[k][e]: best score of everything after entity e's own
        // posterior term (edges onward, including later posteriors).
        let mut suffix: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        suffix.resize(n_layers, Vec::new());
        suffix[n_layers - 1] = lw[n_layers - 1]
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        for k in (0..n_layers.saturating_sub(1)).rev() {
            let next = &suffix[k + 1];
            let mut col = Vec::with_capacity(kinds[k].entity_count());
            for edge_row in &lw[k] {
                let mut best = f64::NEG_INFINITY;
                for w in 0..kinds[k + 1].entity_count() {
                    let s = edge_row[w] + lp[k + 1][w] + next[w];
                    if s > best {
                        best = s;
                    }
                }
                col.push(best);
            }
            suffix[k] = col;
        }

        // Greedy front-to-back reconstruction keeps the smallest index at
        // every exact tie, which matches the enumeration order.
        let mut entities = Vec::with_capacity(n_layers);
        let first = argmax_first(kinds[0].entity_count(), |e| lp[0][e] + suffix[0][e]);
        entities.push(first);
        for k in 0..n_layers - 1 {
            let cur = entities[k];
            let next = argmax_first(kinds[k + 1].entity_count(), |w| {
                lw[k][cur][w] + lp[k + 1][w] + suffix[k + 1][w]
            });
            entities.push(next);
        }
        let last = entities[n_layers - 1];
        let affordance = argmax_first(AffordanceClass::COUNT, |a| lw[n_layers - 1][last][a]);

        let log_score = Self::chain_score(&lp, &lw, &entities, affordance);
        Ok(AffordancePath {
            entities: entities
                .iter()
                .zip(kinds)
                .map(|(&e, &k)| EntityId::from_index(k, e).unwrap())
                .collect(),
            affordance: AffordanceClass::from_index(affordance).unwrap(),
            log_score,
        })
    }

    /// Scores every chain and returns them sorted by descending score with a
    /// stable tie order (chains are generated in lexicographic index order).
    pub fn enumerate_paths(&self, ctx: &ObjectContext) -> Result<Vec<AffordancePath>, KbError> {
        self.enumerate_paths_with_cap(ctx, DEFAULT_PATH_CAP)
    }

    pub fn enumerate_paths_with_cap(
        &self,
        ctx: &ObjectContext,
        cap: usize,
    ) -> Result<Vec<AffordancePath>, KbError> {
        let kinds = self.layers.kinds();
        let mut total = AffordanceClass::COUNT;
        for kind in kinds {
            total = total
                .checked_mul(kind.entity_count())
                .ok_or(KbError::PathExplosion {
                    paths: usize::MAX,
                    cap,
                })?;
        }
        if total > cap {
            return Err(KbError::PathExplosion { paths: total, cap });
        }
        let lp = self.log_posteriors(ctx)?;
        let lw = self.log_edges();

        // Odometer over the entity indices, last layer fastest, so chains
        // come out in lexicographic order and the stable sort keeps that
        // order among exact score ties.
        fn advance(entities: &mut [usize], kinds: &[AttributeKind]) -> bool {
            for k in (0..entities.len()).rev() {
                entities[k] += 1;
                if entities[k] < kinds[k].entity_count() {
                    return true;
                }
                entities[k] = 0;
            }
            false
        }

        let mut paths = Vec::with_capacity(total);
        let mut entities = vec![0usize; kinds.len()];
        loop {
            for a in 0..AffordanceClass::COUNT {
                let log_score = Self::chain_score(&lp, &lw, &entities, a);
                paths.push(AffordancePath {
                    entities: entities
                        .iter()
                        .zip(kinds)
                        .map(|(&e, &k)| EntityId::from_index(k, e).unwrap())
                        .collect(),
                    affordance: AffordanceClass::from_index(a).unwrap(),
                    log_score,
                });
            }
            if !advance(&mut entities, kinds) {
                break;
            }
        }
        paths.sort_by(|a, b| b.log_score.total_cmp(&a.log_score));
        Ok(paths)
    }

    /// The linear affordance scorer `R = ranking^T * y`.
    pub fn affordance_scores(
        &self,
        y: &ConcatenatedEvidence,
    ) -> Result<AffordanceScores, KbError> {
        let n = self.layers.entity_count();
        if y.len() != n {
            return Err(KbError::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        let mut raw = vec![0.0f64; AffordanceClass::COUNT];
        for (z, out) in raw.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (e, v) in y.values().iter().enumerate() {
                acc += self.ranking[e][z] * v;
            }
            *out = acc;
        }
        let sum: f64 = raw.iter().sum();
        let normalized: Vec<f64> = if sum > 0.0 {
            raw.iter().map(|v| v / sum).collect()
        } else {
            vec![1.0 / AffordanceClass::COUNT as f64; AffordanceClass::COUNT]
        };
        let argmax = argmax_first(AffordanceClass::COUNT, |i| raw[i]);
        Ok(AffordanceScores {
            raw,
            normalized,
            argmax: AffordanceClass::from_index(argmax).unwrap(),
        })
    }
}

fn normalize_row(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        for w in row.iter_mut() {
            *w /= sum;
        }
    } else {
        let uniform = 1.0 / row.len() as f64;
        row.fill(uniform);
    }
}

/// Index of the maximum value, keeping the first index on exact ties.
fn argmax_first(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = f(0);
    for i in 1..n {
        let v = f(i);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}
