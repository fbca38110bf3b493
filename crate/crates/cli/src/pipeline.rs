//! Wires manifests into the reasoning core: fits the per-attribute
//! classifiers, builds the knowledge base, trains the predictive tree, and
//! runs per-object inference and grasp computation.

use std::path::Path;

use afford_core::{
    fit_ellipse, infer, partition_z, select_region, AttributeKind, ConcatenatedEvidence,
    DecisionTree, FeatureVector, GaussianAttributeClassifier, GraspCandidateSet, GraspEllipse,
    GraspError, GraspRegion, InferError, InferenceResult, KbError, KnowledgeBaseGraph, ModelError,
    ObjectContext, PointCloud, TrainingRow, TreeConfig, TreeError,
};
use thiserror::Error;

use crate::config::RunConfig;
use crate::datasets::{read_xyz, DatasetError, Manifest, ObjectRecord};

/// Errors from pipeline training and application.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("record `{record}`: unknown {kind} entity `{label}`")]
    UnknownEntity {
        record: String,
        kind: AttributeKind,
        label: String,
    },
    #[error("record `{record}`: unknown affordance `{label}`")]
    UnknownAffordance { record: String, label: String },
}

/// A fully trained pipeline plus the configuration it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// One classifier per attribute layer, in layer order.
    pub classifiers: Vec<GaussianAttributeClassifier>,
    pub kb: KnowledgeBaseGraph,
    pub tree: DecisionTree,
    pub config: RunConfig,
}

fn record_feature(record: &ObjectRecord, kind: AttributeKind) -> Result<FeatureVector, PipelineError> {
    FeatureVector::new(record.attributes.get(kind).features.clone()).map_err(PipelineError::from)
}

/// Attribute features of one record, ready for [`afford_core::infer`].
pub fn record_features(
    record: &ObjectRecord,
) -> Result<Vec<(AttributeKind, FeatureVector)>, PipelineError> {
    AttributeKind::ALL
        .into_iter()
        .map(|kind| Ok((kind, record_feature(record, kind)?)))
        .collect()
}

/// Fits classifiers, builds the knowledge base, and trains the tree on every
/// record of the manifest.
pub fn train_pipeline(manifest: &Manifest, config: &RunConfig) -> Result<TrainedModel, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let layers = config.layer_config();

    let mut classifiers = Vec::with_capacity(layers.len());
    for kind in layers.kinds() {
        let mut samples = Vec::with_capacity(manifest.records.len());
        for record in &manifest.records {
            let entity = record.entity(*kind).ok_or_else(|| PipelineError::UnknownEntity {
                record: record.id.clone(),
                kind: *kind,
                label: record.attributes.get(*kind).label.clone(),
            })?;
            samples.push((record_feature(record, *kind)?, entity));
        }
        // Desk-scale manifests rarely cover an attribute's whole closed
        // vocabulary; unseen entities become inert zero-prior components.
        classifiers.push(GaussianAttributeClassifier::fit_partial(
            *kind,
            &samples,
            config.epsilon,
        )?);
    }

    let mut contexts = Vec::with_capacity(manifest.records.len());
    for record in &manifest.records {
        let class = record
            .affordance_class()
            .ok_or_else(|| PipelineError::UnknownAffordance {
                record: record.id.clone(),
                label: record.affordance.clone(),
            })?;
        let posteriors = layers
            .kinds()
            .iter()
            .zip(&classifiers)
            .map(|(kind, clf)| clf.posterior(&record_feature(record, *kind)?).map_err(PipelineError::from))
            .collect::<Result<Vec<_>, _>>()?;
        contexts.push((ObjectContext::new(posteriors)?, class));
    }
    let kb = KnowledgeBaseGraph::build(&contexts, &layers)?;

    let rows: Vec<TrainingRow> = contexts
        .iter()
        .map(|(ctx, class)| {
            Ok(TrainingRow {
                evidence: ConcatenatedEvidence::from_context(ctx, &layers)?,
                label: *class,
            })
        })
        .collect::<Result<Vec<_>, KbError>>()?;
    let tree = DecisionTree::train(&rows, &TreeConfig::default())?;

    Ok(TrainedModel {
        classifiers,
        kb,
        tree,
        config: config.clone(),
    })
}

/// Runs the composed inference on one record's attribute evidence.
pub fn infer_record(
    model: &TrainedModel,
    record: &ObjectRecord,
) -> Result<InferenceResult, PipelineError> {
    let features = record_features(record)?;
    Ok(infer(
        &model.classifiers,
        &model.kb,
        &model.tree,
        &features,
        model.config.tau,
    )?)
}

/// Inference plus grasp-region geometry for one record.
pub struct GraspOutcome {
    pub result: InferenceResult,
    pub region: GraspRegion,
    pub ellipse: GraspEllipse,
    pub bbox_diagonal: f64,
}

/// Infers the affordance, then constrains the record's grasp candidates and
/// fits the grasp ellipse. `base` is the manifest's directory.
pub fn grasp_record(
    model: &TrainedModel,
    record: &ObjectRecord,
    base: &Path,
) -> Result<GraspOutcome, PipelineError> {
    let result = infer_record(model, record)?;
    let cloud = PointCloud::new(read_xyz(&base.join(&record.point_cloud))?)?;
    let candidates = GraspCandidateSet::new(read_xyz(&base.join(&record.candidates))?)?;
    let partition = partition_z(&cloud, model.config.bins)?;
    let region = select_region(
        &candidates,
        &partition,
        result.final_affordance,
        model.config.theta,
    )?;
    let ellipse = fit_ellipse(&region, model.config.semi_axes)?;
    Ok(GraspOutcome {
        result,
        region,
        ellipse,
        bbox_diagonal: cloud.bbox_diagonal(),
    })
}
