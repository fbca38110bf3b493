//! Model directory layout and JSON document formats.
//!
//! A model directory holds `classifiers/<attribute>.json`, `kb.json`,
//! `tree.json`, and `config.json`. Floating-point values are written in
//! shortest round-trip decimal form, so loading a saved model reproduces the
//! exact same parameter bits.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use afford_core::{
    AffordanceClass, AttributeKind, DecisionTree, GaussianAttributeClassifier,
    KnowledgeBaseGraph, LayerConfig, TreeNode, WeightMatrix,
};
use afford_core::kb_graph::LayerRef;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::pipeline::TrainedModel;

/// Errors from model-file reading and writing.
#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ModelIoError + '_ {
    move |source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, message: impl ToString) -> ModelIoError {
    ModelIoError::Invalid {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ModelIoError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("model documents serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ModelIoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One entity's Gaussian parameters in a classifier document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDoc {
    pub name: String,
    pub prior: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Serialized form of one attribute classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierDoc {
    pub kind: String,
    pub dimension: usize,
    pub entities: Vec<EntityDoc>,
}

pub fn classifier_to_doc(clf: &GaussianAttributeClassifier) -> ClassifierDoc {
    let kind = clf.kind();
    ClassifierDoc {
        kind: kind.name().to_string(),
        dimension: clf.dim(),
        entities: kind
            .entity_names()
            .iter()
            .enumerate()
            .map(|(i, name)| EntityDoc {
                name: name.to_string(),
                prior: clf.prior(i),
                mean: clf.mean(i).to_vec(),
                variance: clf.variance(i).to_vec(),
            })
            .collect(),
    }
}

pub fn classifier_from_doc(
    doc: &ClassifierDoc,
    path: &Path,
) -> Result<GaussianAttributeClassifier, ModelIoError> {
    let kind = AttributeKind::from_name(&doc.kind)
        .ok_or_else(|| invalid(path, format!("unknown attribute kind `{}`", doc.kind)))?;
    let names = kind.entity_names();
    if doc.entities.len() != names.len() {
        return Err(invalid(
            path,
            format!(
                "expected {} entities for {}, found {}",
                names.len(),
                kind,
                doc.entities.len()
            ),
        ));
    }
    for (entity, name) in doc.entities.iter().zip(names) {
        if entity.name != *name {
            return Err(invalid(
                path,
                format!("expected entity `{name}` in canonical order, found `{}`", entity.name),
            ));
        }
    }
    GaussianAttributeClassifier::from_parts(
        kind,
        doc.dimension,
        doc.entities.iter().map(|e| e.mean.clone()).collect(),
        doc.entities.iter().map(|e| e.variance.clone()).collect(),
        doc.entities.iter().map(|e| e.prior).collect(),
    )
    .map_err(|e| invalid(path, e))
}

/// One edge matrix in a knowledge-base document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<Vec<f64>>,
}

/// Entity-to-affordance ranking block of a knowledge-base document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingDoc {
    pub entities: Vec<String>,
    pub affordances: Vec<String>,
    pub weights: Vec<Vec<f64>>,
}

/// Serialized form of the knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbDoc {
    pub layers: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    pub ranking: RankingDoc,
}

pub fn kb_to_doc(kb: &KnowledgeBaseGraph) -> KbDoc {
    let mut layers: Vec<String> = kb
        .layers()
        .kinds()
        .iter()
        .map(|k| k.name().to_string())
        .collect();
    layers.push("affordance".to_string());
    KbDoc {
        layers,
        edges: kb
            .edges()
            .iter()
            .map(|edge| EdgeDoc {
                from: edge.from_layer().name().to_string(),
                to: edge.to_layer().name().to_string(),
                rows: edge.rows(),
                cols: edge.cols(),
                weights: edge.weights().to_vec(),
            })
            .collect(),
        ranking: RankingDoc {
            entities: kb
                .layers()
                .entity_names()
                .iter()
                .map(|n| n.to_string())
                .collect(),
            affordances: AffordanceClass::ALL
                .iter()
                .map(|c| c.name().to_string())
                .collect(),
            weights: kb.ranking().to_vec(),
        },
    }
}

fn layer_ref_from_name(name: &str, path: &Path) -> Result<LayerRef, ModelIoError> {
    if name == "affordance" {
        return Ok(LayerRef::Affordance);
    }
    AttributeKind::from_name(name)
        .map(LayerRef::Attribute)
        .ok_or_else(|| invalid(path, format!("unknown layer `{name}`")))
}

pub fn kb_from_doc(doc: &KbDoc, path: &Path) -> Result<KnowledgeBaseGraph, ModelIoError> {
    if doc.layers.last().map(String::as_str) != Some("affordance") {
        return Err(invalid(path, "the last layer must be `affordance`"));
    }
    let kinds = doc.layers[..doc.layers.len() - 1]
        .iter()
        .map(|name| {
            AttributeKind::from_name(name)
                .ok_or_else(|| invalid(path, format!("unknown attribute layer `{name}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let layers = LayerConfig::new(kinds).map_err(|e| invalid(path, e))?;
    let edges = doc
        .edges
        .iter()
        .map(|edge| {
            if edge.weights.len() != edge.rows
                || edge.weights.iter().any(|row| row.len() != edge.cols)
            {
                return Err(invalid(path, "edge weights do not match the declared shape"));
            }
            let from = layer_ref_from_name(&edge.from, path)?;
            let to = layer_ref_from_name(&edge.to, path)?;
            WeightMatrix::new(from, to, edge.weights.clone()).map_err(|e| invalid(path, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let expected_entities = layers.entity_names();
    if doc.ranking.entities != expected_entities {
        return Err(invalid(path, "ranking entity names do not match the layer order"));
    }
    let expected_affordances: Vec<&str> =
        AffordanceClass::ALL.iter().map(|c| c.name()).collect();
    if doc.ranking.affordances != expected_affordances {
        return Err(invalid(path, "ranking affordance names are not in canonical order"));
    }
    KnowledgeBaseGraph::from_parts(layers, edges, doc.ranking.weights.clone())
        .map_err(|e| invalid(path, e))
}

/// Serialized tree node; splits nest their children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeDoc {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<NodeDoc>,
        right: Box<NodeDoc>,
    },
    Leaf {
        class: String,
        counts: Vec<u64>,
    },
}

/// Serialized form of the decision tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub dimension: usize,
    pub root: NodeDoc,
}

fn node_to_doc(node: &TreeNode) -> NodeDoc {
    match node {
        TreeNode::Leaf { class, counts } => NodeDoc::Leaf {
            class: class.name().to_string(),
            counts: counts.clone(),
        },
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => NodeDoc::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(node_to_doc(left)),
            right: Box::new(node_to_doc(right)),
        },
    }
}

fn node_from_doc(doc: &NodeDoc, path: &Path) -> Result<TreeNode, ModelIoError> {
    match doc {
        NodeDoc::Leaf { class, counts } => Ok(TreeNode::Leaf {
            class: AffordanceClass::from_name(class)
                .ok_or_else(|| invalid(path, format!("unknown affordance `{class}`")))?,
            counts: counts.clone(),
        }),
        NodeDoc::Split {
            feature,
            threshold,
            left,
            right,
        } => Ok(TreeNode::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(node_from_doc(left, path)?),
            right: Box::new(node_from_doc(right, path)?),
        }),
    }
}

pub fn tree_to_doc(tree: &DecisionTree) -> TreeDoc {
    TreeDoc {
        dimension: tree.dimension(),
        root: node_to_doc(tree.root()),
    }
}

pub fn tree_from_doc(doc: &TreeDoc, path: &Path) -> Result<DecisionTree, ModelIoError> {
    let root = node_from_doc(&doc.root, path)?;
    DecisionTree::from_parts(doc.dimension, root).map_err(|e| invalid(path, e))
}

/// Writes the model directory: per-attribute classifiers, the knowledge
/// base, the tree, and the run configuration.
pub fn save_model(dir: &Path, model: &TrainedModel) -> Result<(), ModelIoError> {
    for clf in &model.classifiers {
        let path = dir.join("classifiers").join(format!("{}.json", clf.kind().name()));
        write_json(&path, &classifier_to_doc(clf))?;
    }
    write_json(&dir.join("kb.json"), &kb_to_doc(&model.kb))?;
    write_json(&dir.join("tree.json"), &tree_to_doc(&model.tree))?;
    write_json(&dir.join("config.json"), &model.config)
}

/// Loads a model directory and re-validates every invariant.
pub fn load_model(dir: &Path) -> Result<TrainedModel, ModelIoError> {
    let config_path = dir.join("config.json");
    let config: RunConfig = read_json(&config_path)?;
    config
        .validate()
        .map_err(|e| invalid(&config_path, e))?;
    let layers = config.layer_config();

    let mut classifiers = Vec::with_capacity(layers.len());
    for kind in layers.kinds() {
        let path = dir.join("classifiers").join(format!("{}.json", kind.name()));
        let doc: ClassifierDoc = read_json(&path)?;
        let clf = classifier_from_doc(&doc, &path)?;
        if clf.kind() != *kind {
            return Err(invalid(
                &path,
                format!("expected a {} classifier, found {}", kind, clf.kind()),
            ));
        }
        classifiers.push(clf);
    }

    let kb_path = dir.join("kb.json");
    let kb_doc: KbDoc = read_json(&kb_path)?;
    let kb = kb_from_doc(&kb_doc, &kb_path)?;
    if kb.layers() != &layers {
        return Err(invalid(
            &kb_path,
            "knowledge-base layers do not match the configuration's environment flag",
        ));
    }

    let tree_path = dir.join("tree.json");
    let tree_doc: TreeDoc = read_json(&tree_path)?;
    let tree = tree_from_doc(&tree_doc, &tree_path)?;
    if tree.dimension() != layers.entity_count() {
        return Err(invalid(
            &tree_path,
            format!(
                "tree dimension {} does not match the {}-entity layer configuration",
                tree.dimension(),
                layers.entity_count()
            ),
        ));
    }

    Ok(TrainedModel {
        classifiers,
        kb,
        tree,
        config,
    })
}
