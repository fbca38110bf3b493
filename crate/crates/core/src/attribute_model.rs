//! Attribute taxonomy and the per-attribute Bayes-posterior classifier.
//!
//! Objects are described by four visual-semantic attributes, each with a
//! closed entity vocabulary. A [`GaussianAttributeClassifier`] models each
//! entity with a diagonal Gaussian over ingested feature vectors and produces
//! posterior distributions via Bayes' rule, computed in log space.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::math;

/// Slack allowed when checking that a probability vector sums to one.
pub const PROB_TOLERANCE: f64 = 1e-9;

const SHAPE_ENTITIES: [&str; 5] = ["box", "cylinder", "irregular", "long", "round"];
const TEXTURE_ENTITIES: [&str; 8] = [
    "aluminium",
    "cardboard",
    "coarse",
    "fabric",
    "glass",
    "plastic",
    "rubber",
    "smooth",
];
const CATEGORICAL_ENTITIES: [&str; 5] =
    ["container", "food", "personal", "miscellaneous", "utensils"];
const ENVIRONMENT_ENTITIES: [&str; 7] = [
    "bathroom",
    "bedroom",
    "play-room",
    "closet",
    "kitchen",
    "living room",
    "office",
];

/// The four visual-semantic attribute families, in knowledge-base layer order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttributeKind {
    Shape,
    Texture,
    Categorical,
    Environment,
}

impl AttributeKind {
    /// All attributes in layer order.
    pub const ALL: [AttributeKind; 4] = [
        AttributeKind::Shape,
        AttributeKind::Texture,
        AttributeKind::Categorical,
        AttributeKind::Environment,
    ];

    /// Closed entity vocabulary of this attribute, in canonical index order.
    pub fn entity_names(self) -> &'static [&'static str] {
        match self {
            AttributeKind::Shape => &SHAPE_ENTITIES,
            AttributeKind::Texture => &TEXTURE_ENTITIES,
            AttributeKind::Categorical => &CATEGORICAL_ENTITIES,
            AttributeKind::Environment => &ENVIRONMENT_ENTITIES,
        }
    }

    pub fn entity_count(self) -> usize {
        self.entity_names().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::Shape => "shape",
            AttributeKind::Texture => "texture",
            AttributeKind::Categorical => "categorical",
            AttributeKind::Environment => "environment",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The seven grasp-affordance classes, in fixed matrix-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AffordanceClass {
    ToEat,
    ToContain,
    ToHandOver,
    ToBrush,
    ToSqueeze,
    ToClean,
    ToWear,
}

impl AffordanceClass {
    pub const COUNT: usize = 7;

    pub const ALL: [AffordanceClass; 7] = [
        AffordanceClass::ToEat,
        AffordanceClass::ToContain,
        AffordanceClass::ToHandOver,
        AffordanceClass::ToBrush,
        AffordanceClass::ToSqueeze,
        AffordanceClass::ToClean,
        AffordanceClass::ToWear,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            AffordanceClass::ToEat => "to eat",
            AffordanceClass::ToContain => "to contain",
            AffordanceClass::ToHandOver => "to hand over",
            AffordanceClass::ToBrush => "to brush",
            AffordanceClass::ToSqueeze => "to squeeze",
            AffordanceClass::ToClean => "to clean",
            AffordanceClass::ToWear => "to wear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for AffordanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One concrete entity of an attribute, e.g. `cylinder` for shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    kind: AttributeKind,
    index: usize,
}

impl EntityId {
    /// Looks the name up in the attribute's closed vocabulary.
    pub fn from_name(kind: AttributeKind, name: &str) -> Option<Self> {
        kind.entity_names()
            .iter()
            .position(|n| *n == name)
            .map(|index| EntityId { kind, index })
    }

    pub fn from_index(kind: AttributeKind, index: usize) -> Option<Self> {
        (index < kind.entity_count()).then_some(EntityId { kind, index })
    }

    pub fn kind(self) -> AttributeKind {
        self.kind
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn name(self) -> &'static str {
        self.kind.entity_names()[self.index]
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Errors from classifier fitting and posterior evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("entity `{entity}` of attribute {kind} has no training samples")]
    MissingEntitySamples {
        kind: AttributeKind,
        entity: &'static str,
    },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all log-densities are -inf; the classifier parameters are corrupt")]
    NumericalUnderflow,
    #[error("no evidence for attribute {0}")]
    MissingAttribute(AttributeKind),
    #[error("duplicate evidence for attribute {0}")]
    DuplicateAttribute(AttributeKind),
    #[error("sample labelled {got} fed to a {expected} classifier")]
    KindMismatch {
        expected: AttributeKind,
        got: AttributeKind,
    },
    #[error("variance floor must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("feature vectors must contain finite values")]
    NonFiniteFeature,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// A per-attribute feature vector for one object image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteFeature);
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A posterior distribution over one attribute's entities.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorVector {
    kind: AttributeKind,
    probs: Vec<f64>,
}

impl PosteriorVector {
    pub fn new(kind: AttributeKind, probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.len() != kind.entity_count() {
            return Err(ModelError::DimensionMismatch {
                expected: kind.entity_count(),
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ModelError::InvalidParameters(String::from(
                "posterior entries must lie in [0, 1]",
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(ModelError::InvalidParameters(String::from(
                "posterior entries must sum to 1",
            )));
        }
        Ok(PosteriorVector { kind, probs })
    }

    pub fn kind(&self) -> AttributeKind {
        self.kind
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Entity with the highest posterior; exact ties go to the
    /// lexicographically smaller entity name.
    pub fn top_entity(&self) -> EntityId {
        let names = self.kind.entity_names();
        let mut best = 0usize;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best]
                || (self.probs[i] == self.probs[best] && names[i] < names[best])
            {
                best = i;
            }
        }
        EntityId {
            kind: self.kind,
            index: best,
        }
    }
}

/// Diagonal-covariance Gaussian generative classifier for one attribute.
///
/// Each entity carries a mean vector, a per-dimension variance (clamped below
/// by the fitting floor), and a prior estimated from sample frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAttributeClassifier {
    kind: AttributeKind,
    dim: usize,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    priors: Vec<f64>,
}

impl GaussianAttributeClassifier {
    /// Fits per-entity means, variances (denominator `n`, clamped below by
    /// `epsilon`), and frequency priors. Every entity of the attribute must
    /// appear at least once.
    pub fn fit(
        kind: AttributeKind,
        samples: &[(FeatureVector, EntityId)],
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        Self::fit_impl(kind, samples, epsilon, false)
    }

    /// Like [`fit`](Self::fit), but entities without samples become inert
    /// zero-prior components instead of an error; they can never win a
    /// posterior. Desk-scale datasets rarely exercise the whole closed
    /// vocabulary of an attribute.
    pub fn fit_partial(
        kind: AttributeKind,
        samples: &[(FeatureVector, EntityId)],
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        Self::fit_impl(kind, samples, epsilon, true)
    }

    fn fit_impl(
        kind: AttributeKind,
        samples: &[(FeatureVector, EntityId)],
        epsilon: f64,
        allow_missing: bool,
    ) -> Result<Self, ModelError> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(ModelError::InvalidEpsilon(epsilon));
        }
        let n_entities = kind.entity_count();
        let dim = match samples.first() {
            Some((x, _)) => x.dim(),
            None => {
                return Err(ModelError::MissingEntitySamples {
                    kind,
                    entity: kind.entity_names()[0],
                })
            }
        };
        let mut counts = vec![0usize; n_entities];
        let mut sums = vec![vec![0.0f64; dim]; n_entities];
        for (x, entity) in samples {
            if entity.kind() != kind {
                return Err(ModelError::KindMismatch {
                    expected: kind,
                    got: entity.kind(),
                });
            }
            if x.dim() != dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    got: x.dim(),
                });
            }
            counts[entity.index()] += 1;
            for (acc, v) in sums[entity.index()].iter_mut().zip(x.values()) {
                *acc += v;
            }
        }
        if !allow_missing {
            if let Some(missing) = counts.iter().position(|c| *c == 0) {
                return Err(ModelError::MissingEntitySamples {
                    kind,
                    entity: kind.entity_names()[missing],
                });
            }
        }
        let means: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| {
                if *c == 0 {
                    vec![0.0; dim]
                } else {
                    s.iter().map(|v| v / *c as f64).collect()
                }
            })
            .collect();
        let mut variances = vec![vec![0.0f64; dim]; n_entities];
        for (x, entity) in samples {
            let mu = &means[entity.index()];
            for ((acc, v), m) in variances[entity.index()]
                .iter_mut()
                .zip(x.values())
                .zip(mu)
            {
                let d = v - m;
                *acc += d * d;
            }
        }
        for (var, c) in variances.iter_mut().zip(&counts) {
            for v in var.iter_mut() {
                if *c > 0 {
                    *v /= *c as f64;
                }
                if *v < epsilon {
                    *v = epsilon;
                }
            }
        }
        let total = samples.len() as f64;
        let priors = counts.iter().map(|c| *c as f64 / total).collect();
        Ok(GaussianAttributeClassifier {
            kind,
            dim,
            means,
            variances,
            priors,
        })
    }

    /// Rebuilds a classifier from stored parameters, re-checking invariants.
    pub fn from_parts(
        kind: AttributeKind,
        dim: usize,
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
        priors: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = kind.entity_count();
        if means.len() != n || variances.len() != n || priors.len() != n {
            return Err(ModelError::InvalidParameters(String::from(
                "parameter lists must cover every entity of the attribute",
            )));
        }
        for (mu, var) in means.iter().zip(&variances) {
            if mu.len() != dim || var.len() != dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    got: if mu.len() != dim { mu.len() } else { var.len() },
                });
            }
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::InvalidParameters(String::from(
                    "means must be finite",
                )));
            }
            if var.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(ModelError::InvalidParameters(String::from(
                    "variances must be positive and finite",
                )));
            }
        }
        if priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ModelError::InvalidParameters(String::from(
                "priors must lie in [0, 1]",
            )));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(ModelError::InvalidParameters(String::from(
                "priors must sum to 1",
            )));
        }
        Ok(GaussianAttributeClassifier {
            kind,
            dim,
            means,
            variances,
            priors,
        })
    }

    pub fn kind(&self) -> AttributeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self, entity: usize) -> &[f64] {
        &self.means[entity]
    }

    pub fn variance(&self, entity: usize) -> &[f64] {
        &self.variances[entity]
    }

    pub fn prior(&self, entity: usize) -> f64 {
        self.priors[entity]
    }

    /// Bayes posterior over entities for a feature vector, computed in log
    /// space with a log-sum-exp normalisation.
    pub fn posterior(&self, x: &FeatureVector) -> Result<PosteriorVector, ModelError> {
        if x.dim() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let two_pi = 2.0 * core::f64::consts::PI;
        let mut logs: Vec<f64> = Vec::with_capacity(self.means.len());
        for e in 0..self.means.len() {
            let mut l = math::ln(self.priors[e]);
            for ((v, mu), var) in x.values().iter().zip(&self.means[e]).zip(&self.variances[e]) {
                let d = v - mu;
                l += -0.5 * (math::ln(two_pi * var) + d * d / var);
            }
            logs.push(l);
        }
        if logs.iter().all(|l| *l == f64::NEG_INFINITY) {
            return Err(ModelError::NumericalUnderflow);
        }
        normalize_log(&mut logs);
        PosteriorVector::new(self.kind, logs)
    }

    /// Maximum-posterior entity; ties broken by entity name.
    pub fn predict(&self, x: &FeatureVector) -> Result<EntityId, ModelError> {
        Ok(self.posterior(x)?.top_entity())
    }
}

/// Converts log scores to normalized probabilities in place.
pub(crate) fn normalize_log(logs: &mut [f64]) {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logs.iter_mut() {
        *l = math::exp(*l - max);
        sum += *l;
    }
    for l in logs.iter_mut() {
        *l /= sum;
    }
}

/// The joint attribute evidence of one object: per-attribute posteriors in
/// layer order. Contexts built by [`classify_context`] always cover all four
/// attributes; partial contexts can be assembled directly for ablated layups.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectContext {
    posteriors: Vec<PosteriorVector>,
}

impl ObjectContext {
    pub fn new(mut posteriors: Vec<PosteriorVector>) -> Result<Self, ModelError> {
        posteriors.sort_by_key(|p| p.kind());
        for pair in posteriors.windows(2) {
            if pair[0].kind() == pair[1].kind() {
                return Err(ModelError::DuplicateAttribute(pair[0].kind()));
            }
        }
        Ok(ObjectContext { posteriors })
    }

    pub fn get(&self, kind: AttributeKind) -> Option<&PosteriorVector> {
        self.posteriors.iter().find(|p| p.kind() == kind)
    }

    pub fn posteriors(&self) -> &[PosteriorVector] {
        &self.posteriors
    }
}

/// Runs every attribute's classifier over its feature vector and bundles the
/// posteriors into an [`ObjectContext`]. Requires one classifier and one
/// feature vector for each of the four attributes.
pub fn classify_context(
    classifiers: &[GaussianAttributeClassifier],
    features: &[(AttributeKind, FeatureVector)],
) -> Result<ObjectContext, ModelError> {
    let mut posteriors = Vec::with_capacity(AttributeKind::ALL.len());
    for kind in AttributeKind::ALL {
        let clf = classifiers
            .iter()
            .find(|c| c.kind() == kind)
            .ok_or(ModelError::MissingAttribute(kind))?;
        let (_, x) = features
            .iter()
            .find(|(k, _)| *k == kind)
            .ok_or(ModelError::MissingAttribute(kind))?;
        posteriors.push(clf.posterior(x)?);
    }
    ObjectContext::new(posteriors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new(values.to_vec()).unwrap()
    }

    fn entity(kind: AttributeKind, index: usize) -> EntityId {
        EntityId::from_index(kind, index).unwrap()
    }

    /// Independent density-ratio oracle that avoids log space entirely.
    fn posterior_oracle(clf: &GaussianAttributeClassifier, x: &[f64]) -> Vec<f64> {
        let two_pi = 2.0 * core::f64::consts::PI;
        let dens: Vec<f64> = (0..clf.kind().entity_count())
            .map(|e| {
                let mut d = clf.prior(e);
                for ((v, mu), var) in x.iter().zip(clf.mean(e)).zip(clf.variance(e)) {
                    let diff = v - mu;
                    d *= libm::exp(-diff * diff / (2.0 * var)) / libm::sqrt(two_pi * var);
                }
                d
            })
            .collect();
        let sum: f64 = dens.iter().sum();
        dens.iter().map(|d| d / sum).collect()
    }

    #[test]
    fn taxonomy_counts_and_order() {
        assert_eq!(AttributeKind::Shape.entity_count(), 5);
        assert_eq!(AttributeKind::Texture.entity_count(), 8);
        assert_eq!(AttributeKind::Categorical.entity_count(), 5);
        assert_eq!(AttributeKind::Environment.entity_count(), 7);
        assert!(AttributeKind::Shape < AttributeKind::Texture);
        assert!(AttributeKind::Categorical < AttributeKind::Environment);
        assert_eq!(AffordanceClass::ALL.len(), 7);
        assert_eq!(AffordanceClass::ToWear.index(), 6);
        assert_eq!(AffordanceClass::from_name("to hand over"), Some(AffordanceClass::ToHandOver));
        assert_eq!(EntityId::from_name(AttributeKind::Shape, "sphere"), None);
        assert_eq!(
            EntityId::from_name(AttributeKind::Environment, "living room").map(|e| e.index()),
            Some(5)
        );
    }

    #[test]
    fn fit_constant_samples_clamps_variance() {
        let samples = vec![
            (fv(&[1.0, 2.0]), entity(AttributeKind::Shape, 0)),
            (fv(&[1.0, 2.0]), entity(AttributeKind::Shape, 0)),
            (fv(&[3.0, 4.0]), entity(AttributeKind::Shape, 1)),
            (fv(&[3.0, 4.0]), entity(AttributeKind::Shape, 1)),
            (fv(&[0.0, 0.0]), entity(AttributeKind::Shape, 2)),
            (fv(&[0.0, 0.0]), entity(AttributeKind::Shape, 3)),
            (fv(&[0.0, 0.0]), entity(AttributeKind::Shape, 4)),
        ];
        let clf = GaussianAttributeClassifier::fit(AttributeKind::Shape, &samples, 1e-6).unwrap();
        assert_eq!(clf.mean(0), &[1.0, 2.0]);
        assert_eq!(clf.mean(1), &[3.0, 4.0]);
        assert_eq!(clf.variance(0), &[1e-6, 1e-6]);
        assert_eq!(clf.prior(0), 2.0 / 7.0);
    }

    #[test]
    fn fit_hand_computed_mean_and_variance() {
        // 1-D oracle: A:{0,2}, B:{4,6} -> means [1,5], population variance 1.
        let samples = vec![
            (fv(&[0.0]), entity(AttributeKind::Categorical, 0)),
            (fv(&[2.0]), entity(AttributeKind::Categorical, 0)),
            (fv(&[4.0]), entity(AttributeKind::Categorical, 1)),
            (fv(&[6.0]), entity(AttributeKind::Categorical, 1)),
            (fv(&[0.0]), entity(AttributeKind::Categorical, 2)),
            (fv(&[0.0]), entity(AttributeKind::Categorical, 3)),
            (fv(&[0.0]), entity(AttributeKind::Categorical, 4)),
        ];
        let clf =
            GaussianAttributeClassifier::fit(AttributeKind::Categorical, &samples, 1e-6).unwrap();
        assert_eq!(clf.mean(0), &[1.0]);
        assert_eq!(clf.mean(1), &[5.0]);
        assert_eq!(clf.variance(0), &[1.0]);
        assert_eq!(clf.variance(1), &[1.0]);
        assert_eq!(clf.prior(0), 2.0 / 7.0);
        assert_eq!(clf.prior(1), 2.0 / 7.0);
    }

    #[test]
    fn fit_missing_entity_errors() {
        let samples = vec![(fv(&[0.0]), entity(AttributeKind::Shape, 0))];
        let err = GaussianAttributeClassifier::fit(AttributeKind::Shape, &samples, 1e-6)
            .unwrap_err();
        assert_eq!(
            err,
            ModelError::MissingEntitySamples {
                kind: AttributeKind::Shape,
                entity: "cylinder"
            }
        );
    }

    #[test]
    fn fit_dimension_mismatch_errors() {
        let samples = vec![
            (fv(&[0.0, 1.0]), entity(AttributeKind::Shape, 0)),
            (fv(&[0.0]), entity(AttributeKind::Shape, 1)),
        ];
        assert!(matches!(
            GaussianAttributeClassifier::fit(AttributeKind::Shape, &samples, 1e-6),
            Err(ModelError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn fit_partial_inerts_unseen_entities() {
        let samples = vec![
            (fv(&[0.0]), entity(AttributeKind::Shape, 0)),
            (fv(&[2.0]), entity(AttributeKind::Shape, 0)),
            (fv(&[5.0]), entity(AttributeKind::Shape, 1)),
        ];
        let clf =
            GaussianAttributeClassifier::fit_partial(AttributeKind::Shape, &samples, 1e-6)
                .unwrap();
        assert_eq!(clf.prior(0), 2.0 / 3.0);
        assert_eq!(clf.prior(2), 0.0);
        assert_eq!(clf.prior(4), 0.0);
        // A zero-prior entity can never win, even at its own mean.
        let p = clf.posterior(&fv(&[0.0])).unwrap();
        assert_eq!(p.probs()[2], 0.0);
        assert_eq!(p.probs()[3], 0.0);
        assert!(p.probs()[0] > 0.9);
    }

    #[test]
    fn fit_partial_agrees_with_fit_on_full_coverage() {
        let samples: Vec<(FeatureVector, EntityId)> = (0..10)
            .map(|i| (fv(&[i as f64, -(i as f64)]), entity(AttributeKind::Shape, i % 5)))
            .collect();
        let strict = GaussianAttributeClassifier::fit(AttributeKind::Shape, &samples, 1e-6)
            .unwrap();
        let partial =
            GaussianAttributeClassifier::fit_partial(AttributeKind::Shape, &samples, 1e-6)
                .unwrap();
        assert_eq!(strict, partial);
    }

    #[test]
    fn fit_rejects_bad_epsilon() {
        let samples = vec![(fv(&[0.0]), entity(AttributeKind::Shape, 0))];
        assert!(matches!(
            GaussianAttributeClassifier::fit(AttributeKind::Shape, &samples, 0.0),
            Err(ModelError::InvalidEpsilon(_))
        ));
    }

    /// Builds a shape classifier from explicit 1-D parameters, padding the
    /// remaining entities far away so they carry no posterior mass.
    fn shape_clf_1d(means01: [f64; 2], vars01: [f64; 2], priors01: [f64; 2]) -> GaussianAttributeClassifier {
        let mut means = vec![vec![means01[0]], vec![means01[1]]];
        let mut vars = vec![vec![vars01[0]], vec![vars01[1]]];
        let mut priors = vec![priors01[0], priors01[1]];
        for i in 0..3 {
            means.push(vec![1e6 + i as f64]);
            vars.push(vec![1.0]);
            priors.push(0.0);
        }
        GaussianAttributeClassifier::from_parts(AttributeKind::Shape, 1, means, vars, priors)
            .unwrap()
    }

    #[test]
    fn posterior_symmetric_entities_are_uniform() {
        let clf = shape_clf_1d([0.5, 0.5], [1.0, 1.0], [0.5, 0.5]);
        let p = clf.posterior(&fv(&[3.7])).unwrap();
        assert_eq!(p.probs()[0], 0.5);
        assert_eq!(p.probs()[1], 0.5);
    }

    #[test]
    fn posterior_matches_density_ratio_oracle() {
        // mu=[0,2], var=[1,1], equal priors, x=0 -> ratio 1 : e^-2.
        let clf = shape_clf_1d([0.0, 2.0], [1.0, 1.0], [0.5, 0.5]);
        let p = clf.posterior(&fv(&[0.0])).unwrap();
        let expected = 1.0 / (1.0 + libm::exp(-2.0));
        assert!((p.probs()[0] - 0.8808).abs() < 1e-4);
        assert!((p.probs()[1] - 0.1192).abs() < 1e-4);
        assert!((p.probs()[0] - expected).abs() < 1e-12);
        let oracle = posterior_oracle(&clf, &[0.0]);
        for (a, b) in p.probs().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn posterior_midpoint_is_even() {
        let clf = shape_clf_1d([0.0, 1.0], [1.0, 1.0], [0.5, 0.5]);
        let p = clf.posterior(&fv(&[0.5])).unwrap();
        assert_eq!(p.probs()[0], 0.5);
        assert_eq!(p.probs()[1], 0.5);
    }

    #[test]
    fn posterior_sums_to_one() {
        let clf = shape_clf_1d([-1.0, 4.0], [0.5, 2.0], [0.3, 0.7]);
        let p = clf.posterior(&fv(&[1.2])).unwrap();
        let sum: f64 = p.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.probs().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn posterior_underflow_detected() {
        let clf = shape_clf_1d([0.0, 2.0], [1.0, 1.0], [0.5, 0.5]);
        let err = clf.posterior(&fv(&[1e200])).unwrap_err();
        assert_eq!(err, ModelError::NumericalUnderflow);
    }

    #[test]
    fn posterior_dimension_mismatch() {
        let clf = shape_clf_1d([0.0, 2.0], [1.0, 1.0], [0.5, 0.5]);
        assert!(matches!(
            clf.posterior(&fv(&[0.0, 1.0])),
            Err(ModelError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn predict_takes_argmax_and_follows_derived_posterior() {
        let clf = shape_clf_1d([0.0, 2.0], [1.0, 1.0], [0.5, 0.5]);
        assert_eq!(clf.predict(&fv(&[0.0])).unwrap().index(), 0);
        assert_eq!(clf.predict(&fv(&[2.0])).unwrap().index(), 1);
    }

    #[test]
    fn predict_tie_breaks_on_entity_name() {
        // Identical parameters everywhere: all five shape entities tie, and
        // "box" is the lexicographically smallest name.
        let clf = GaussianAttributeClassifier::from_parts(
            AttributeKind::Shape,
            1,
            vec![vec![0.0]; 5],
            vec![vec![1.0]; 5],
            vec![0.2; 5],
        )
        .unwrap();
        assert_eq!(clf.predict(&fv(&[0.3])).unwrap().name(), "box");

        // Categorical listing order differs from name order: a tie between
        // `personal` (index 2) and `miscellaneous` (index 3) must go to
        // `miscellaneous`.
        let mut means = vec![vec![1e6], vec![1e6], vec![0.0], vec![0.0], vec![1e6]];
        let clf = GaussianAttributeClassifier::from_parts(
            AttributeKind::Categorical,
            1,
            core::mem::take(&mut means),
            vec![vec![1.0]; 5],
            vec![0.2; 5],
        )
        .unwrap();
        assert_eq!(clf.predict(&fv(&[0.0])).unwrap().name(), "miscellaneous");
    }

    #[test]
    fn normalize_log_is_shift_invariant() {
        let mut a = vec![-3.0, -1.0, -2.5];
        let mut b: Vec<f64> = a.iter().map(|v| v + 123.75).collect();
        normalize_log(&mut a);
        normalize_log(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    fn uniform_classifier(kind: AttributeKind) -> GaussianAttributeClassifier {
        let n = kind.entity_count();
        GaussianAttributeClassifier::from_parts(
            kind,
            1,
            vec![vec![0.0]; n],
            vec![vec![1.0]; n],
            vec![1.0 / n as f64; n],
        )
        .unwrap()
    }

    #[test]
    fn classify_context_uniform_classifiers() {
        let classifiers: Vec<_> = AttributeKind::ALL.into_iter().map(uniform_classifier).collect();
        let features: Vec<_> = AttributeKind::ALL
            .into_iter()
            .map(|k| (k, fv(&[0.25])))
            .collect();
        let ctx = classify_context(&classifiers, &features).unwrap();
        for kind in AttributeKind::ALL {
            let p = ctx.get(kind).unwrap();
            let uniform = 1.0 / kind.entity_count() as f64;
            for v in p.probs() {
                assert!((v - uniform).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classify_context_missing_attribute() {
        let classifiers: Vec<_> = AttributeKind::ALL.into_iter().map(uniform_classifier).collect();
        let features = vec![
            (AttributeKind::Shape, fv(&[0.0])),
            (AttributeKind::Texture, fv(&[0.0])),
            (AttributeKind::Categorical, fv(&[0.0])),
        ];
        assert_eq!(
            classify_context(&classifiers, &features).unwrap_err(),
            ModelError::MissingAttribute(AttributeKind::Environment)
        );
    }

    #[test]
    fn classify_context_composes_individual_posteriors() {
        let classifiers: Vec<_> = AttributeKind::ALL.into_iter().map(uniform_classifier).collect();
        let features: Vec<_> = AttributeKind::ALL
            .into_iter()
            .enumerate()
            .map(|(i, k)| (k, fv(&[i as f64 * 0.5])))
            .collect();
        let ctx = classify_context(&classifiers, &features).unwrap();
        for (kind, x) in &features {
            let direct = classifiers
                .iter()
                .find(|c| c.kind() == *kind)
                .unwrap()
                .posterior(x)
                .unwrap();
            assert_eq!(ctx.get(*kind).unwrap(), &direct);
        }
    }

    #[test]
    fn object_context_rejects_duplicates() {
        let p = PosteriorVector::new(AttributeKind::Shape, vec![0.2; 5]).unwrap();
        let err = ObjectContext::new(vec![p.clone(), p]).unwrap_err();
        assert_eq!(err, ModelError::DuplicateAttribute(AttributeKind::Shape));
    }
}
