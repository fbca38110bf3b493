//! Dataset manifests, file ingestion, stratified splitting, and grasp
//! rectangle import.
//!
//! A manifest is a schema-versioned JSON document holding per-object feature
//! vectors inline plus relative paths to ASCII point-cloud and candidate
//! files. Grasp rectangles live inline as four 3-D corners each; the ASCII
//! rectangle format (four `x y z` lines per rectangle) covers external label
//! files.

mod synth;

pub use synth::{synth_generate, SynthConfig};

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use afford_core::{AffordanceClass, AttributeKind, EntityId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Manifest schema understood by this build.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Errors from manifest and label-file handling.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("record `{record}`: unknown {kind} entity `{label}`")]
    UnknownEntityName {
        record: String,
        kind: AttributeKind,
        label: String,
    },
    #[error("record `{record}`: unknown affordance `{label}`")]
    UnknownAffordance { record: String, label: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{record}`: referenced file `{path}` does not exist")]
    MissingFile { record: String, path: PathBuf },
    #[error("record `{record}`: {kind} features have dimension {got}, expected {expected}")]
    DimensionMismatch {
        record: String,
        kind: AttributeKind,
        expected: usize,
        got: usize,
    },
    #[error("affordance class `{class}` has {count} records; at least 2 are needed to stratify")]
    ClassTooSmall { class: String, count: usize },
    #[error("{path}: {lines} coordinate lines do not form whole 4-line rectangle groups")]
    TruncatedGroup { path: PathBuf, lines: usize },
    #[error("unsupported manifest schema version {0}")]
    UnsupportedSchema(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Feature-space dimension declared per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDimensions {
    pub shape: usize,
    pub texture: usize,
    pub categorical: usize,
    pub environment: usize,
}

impl FeatureDimensions {
    pub fn uniform(dim: usize) -> Self {
        FeatureDimensions {
            shape: dim,
            texture: dim,
            categorical: dim,
            environment: dim,
        }
    }

    pub fn get(&self, kind: AttributeKind) -> usize {
        match kind {
            AttributeKind::Shape => self.shape,
            AttributeKind::Texture => self.texture,
            AttributeKind::Categorical => self.categorical,
            AttributeKind::Environment => self.environment,
        }
    }
}

/// Ground-truth label plus the ingested feature vector for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEvidence {
    pub label: String,
    pub features: Vec<f64>,
}

/// Per-attribute evidence of one object, in layer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAttributes {
    pub shape: AttributeEvidence,
    pub texture: AttributeEvidence,
    pub categorical: AttributeEvidence,
    pub environment: AttributeEvidence,
}

impl ObjectAttributes {
    pub fn get(&self, kind: AttributeKind) -> &AttributeEvidence {
        match kind {
            AttributeKind::Shape => &self.shape,
            AttributeKind::Texture => &self.texture,
            AttributeKind::Categorical => &self.categorical,
            AttributeKind::Environment => &self.environment,
        }
    }
}

/// A labelled grasp rectangle: four corners in the object frame, meters.
/// The center is always derived, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRectangle {
    pub corners: [[f64; 3]; 4],
}

impl GraspRectangle {
    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0f64; 3];
        for corner in &self.corners {
            for axis in 0..3 {
                c[axis] += corner[axis];
            }
        }
        for v in c.iter_mut() {
            *v /= 4.0;
        }
        c
    }
}

/// One dataset object: labels, inline features, file references, and any
/// labelled grasp rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub category: String,
    pub affordance: String,
    pub attributes: ObjectAttributes,
    pub point_cloud: String,
    pub candidates: String,
    pub rectangles: Vec<GraspRectangle>,
}

impl ObjectRecord {
    pub fn affordance_class(&self) -> Option<AffordanceClass> {
        AffordanceClass::from_name(&self.affordance)
    }

    pub fn entity(&self, kind: AttributeKind) -> Option<EntityId> {
        EntityId::from_name(kind, &self.attributes.get(kind).label)
    }
}

/// The dataset description: schema version, feature dimensions, records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub feature_dimensions: FeatureDimensions,
    pub records: Vec<ObjectRecord>,
}

impl Manifest {
    pub fn record(&self, id: &str) -> Option<&ObjectRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// A copy keeping only records whose category passes the filter.
    pub fn filter_categories(&self, keep: impl Fn(&str) -> bool) -> Manifest {
        Manifest {
            schema_version: self.schema_version,
            feature_dimensions: self.feature_dimensions.clone(),
            records: self
                .records
                .iter()
                .filter(|r| keep(&r.category))
                .cloned()
                .collect(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads and fully validates a manifest; referenced files must exist
/// relative to the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    validate_manifest(&manifest, base)?;
    Ok(manifest)
}

/// Serializes a manifest as pretty JSON plus a trailing newline.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Checks the closed vocabularies, dimensions, id uniqueness, and referenced
/// files of a manifest.
pub fn validate_manifest(manifest: &Manifest, base: &Path) -> Result<(), DatasetError> {
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(DatasetError::UnsupportedSchema(manifest.schema_version));
    }
    let mut seen = std::collections::BTreeSet::new();
    for record in &manifest.records {
        if !seen.insert(record.id.as_str()) {
            return Err(DatasetError::DuplicateId(record.id.clone()));
        }
        if record.affordance_class().is_none() {
            return Err(DatasetError::UnknownAffordance {
                record: record.id.clone(),
                label: record.affordance.clone(),
            });
        }
        for kind in AttributeKind::ALL {
            let evidence = record.attributes.get(kind);
            if EntityId::from_name(kind, &evidence.label).is_none() {
                return Err(DatasetError::UnknownEntityName {
                    record: record.id.clone(),
                    kind,
                    label: evidence.label.clone(),
                });
            }
            let expected = manifest.feature_dimensions.get(kind);
            if evidence.features.len() != expected {
                return Err(DatasetError::DimensionMismatch {
                    record: record.id.clone(),
                    kind,
                    expected,
                    got: evidence.features.len(),
                });
            }
        }
        for rel in [&record.point_cloud, &record.candidates] {
            let full = base.join(rel);
            if !full.is_file() {
                return Err(DatasetError::MissingFile {
                    record: record.id.clone(),
                    path: full,
                });
            }
        }
    }
    Ok(())
}

/// Seeded stratified split by affordance class: each class contributes
/// `round(fraction * n)` records to the training side, and the two outputs
/// partition the input exactly.
pub fn split(
    manifest: &Manifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(Manifest, Manifest), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, record) in manifest.records.iter().enumerate() {
        let class = record
            .affordance_class()
            .ok_or_else(|| DatasetError::UnknownAffordance {
                record: record.id.clone(),
                label: record.affordance.clone(),
            })?;
        by_class.entry(class.index()).or_default().push(i);
    }
    for (class, indices) in &by_class {
        if indices.len() < 2 {
            return Err(DatasetError::ClassTooSmall {
                class: AffordanceClass::from_index(*class).unwrap().name().to_string(),
                count: indices.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (_, mut indices) in by_class {
        indices.shuffle(&mut rng);
        let n_train = (train_fraction * indices.len() as f64).round() as usize;
        train_indices.extend_from_slice(&indices[..n_train]);
        test_indices.extend_from_slice(&indices[n_train..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    let pick = |indices: &[usize]| Manifest {
        schema_version: manifest.schema_version,
        feature_dimensions: manifest.feature_dimensions.clone(),
        records: indices.iter().map(|i| manifest.records[*i].clone()).collect(),
    };
    Ok((pick(&train_indices), pick(&test_indices)))
}

fn parse_xyz_lines(path: &Path, text: &str) -> Result<Vec<[f64; 3]>, DatasetError> {
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut values = [0.0f64; 3];
        let mut fields = line.split_whitespace();
        for value in values.iter_mut() {
            let field = fields.next().ok_or_else(|| DatasetError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected three coordinates, got `{line}`"),
            })?;
            *value = field.parse::<f64>().map_err(|_| DatasetError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("`{field}` is not finite"),
                });
            }
        }
        if fields.next().is_some() {
            return Err(DatasetError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected three coordinates, got `{line}`"),
            });
        }
        points.push(values);
    }
    Ok(points)
}

/// Reads an ASCII point file: one `x y z` triple per line, `#` comments and
/// blank lines allowed.
pub fn read_xyz(path: &Path) -> Result<Vec<[f64; 3]>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_xyz_lines(path, &text)
}

/// Writes points in the ASCII `x y z` format.
pub fn write_xyz(path: &Path, points: &[[f64; 3]]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let mut text = String::with_capacity(points.len() * 24);
    for p in points {
        text.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Imports grasp rectangles from an ASCII file with four `x y z` corner
/// lines per rectangle.
pub fn import_rectangles(path: &Path) -> Result<Vec<GraspRectangle>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let points = parse_xyz_lines(path, &text)?;
    if points.len() % 4 != 0 {
        return Err(DatasetError::TruncatedGroup {
            path: path.to_path_buf(),
            lines: points.len(),
        });
    }
    Ok(points
        .chunks_exact(4)
        .map(|corners| GraspRectangle {
            corners: [corners[0], corners[1], corners[2], corners[3]],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs::File;

    fn minimal_record(id: &str, dir: &Path) -> ObjectRecord {
        let cloud = format!("{id}.xyz");
        write_xyz(&dir.join(&cloud), &[[0.0, 0.0, 0.0], [0.0, 0.0, 0.1]]).unwrap();
        ObjectRecord {
            id: id.to_string(),
            category: "mug".to_string(),
            affordance: "to contain".to_string(),
            attributes: ObjectAttributes {
                shape: AttributeEvidence {
                    label: "cylinder".to_string(),
                    features: vec![0.1, 0.2],
                },
                texture: AttributeEvidence {
                    label: "glass".to_string(),
                    features: vec![0.3, 0.4],
                },
                categorical: AttributeEvidence {
                    label: "container".to_string(),
                    features: vec![0.5, 0.6],
                },
                environment: AttributeEvidence {
                    label: "kitchen".to_string(),
                    features: vec![0.7, 0.8],
                },
            },
            point_cloud: cloud.clone(),
            candidates: cloud,
            rectangles: vec![GraspRectangle {
                corners: [
                    [0.0, 0.0, 0.05],
                    [0.01, 0.0, 0.05],
                    [0.01, 0.01, 0.05],
                    [0.0, 0.01, 0.05],
                ],
            }],
        }
    }

    fn minimal_manifest(dir: &Path) -> Manifest {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            feature_dimensions: FeatureDimensions::uniform(2),
            records: vec![minimal_record("obj-1", dir)],
        }
    }

    #[test]
    fn manifest_round_trip_is_value_identical() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = minimal_manifest(dir.path());
        let path = dir.path().join("manifest.json");
        save_manifest(&manifest, &path).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(manifest, loaded);
    }

    #[test]
    fn unknown_entity_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = minimal_manifest(dir.path());
        manifest.records[0].attributes.shape.label = "sphere".to_string();
        let err = validate_manifest(&manifest, dir.path()).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownEntityName { kind: AttributeKind::Shape, .. }));
    }

    #[test]
    fn unknown_affordance_and_duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = minimal_manifest(dir.path());
        manifest.records[0].affordance = "to juggle".to_string();
        assert!(matches!(
            validate_manifest(&manifest, dir.path()),
            Err(DatasetError::UnknownAffordance { .. })
        ));

        let mut manifest = minimal_manifest(dir.path());
        manifest.records.push(manifest.records[0].clone());
        assert!(matches!(
            validate_manifest(&manifest, dir.path()),
            Err(DatasetError::DuplicateId(_))
        ));
    }

    #[test]
    fn missing_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = minimal_manifest(dir.path());
        manifest.records[0].point_cloud = "nowhere.xyz".to_string();
        assert!(matches!(
            validate_manifest(&manifest, dir.path()),
            Err(DatasetError::MissingFile { .. })
        ));
    }

    #[test]
    fn feature_dimension_checked() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = minimal_manifest(dir.path());
        manifest.records[0].attributes.texture.features = vec![0.1];
        assert!(matches!(
            validate_manifest(&manifest, dir.path()),
            Err(DatasetError::DimensionMismatch { kind: AttributeKind::Texture, expected: 2, got: 1 , ..})
        ));
    }

    #[test]
    fn schema_version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = minimal_manifest(dir.path());
        manifest.schema_version = 99;
        assert!(matches!(
            validate_manifest(&manifest, dir.path()),
            Err(DatasetError::UnsupportedSchema(99))
        ));
    }

    fn many_records(dir: &Path, per_class: usize) -> Manifest {
        let mut records = Vec::new();
        for class in AffordanceClass::ALL {
            for i in 0..per_class {
                let mut record =
                    minimal_record(&format!("{}-{i}", class.name().replace(' ', "-")), dir);
                record.affordance = class.name().to_string();
                records.push(record);
            }
        }
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            feature_dimensions: FeatureDimensions::uniform(2),
            records,
        }
    }

    #[test]
    fn split_is_stratified_seventy_thirty() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = many_records(dir.path(), 10);
        let (train, test) = split(&manifest, 0.7, 42).unwrap();
        for class in AffordanceClass::ALL {
            let in_train = train
                .records
                .iter()
                .filter(|r| r.affordance == class.name())
                .count();
            let in_test = test
                .records
                .iter()
                .filter(|r| r.affordance == class.name())
                .count();
            assert_eq!(in_train, 7);
            assert_eq!(in_test, 3);
        }
    }

    #[test]
    fn split_is_deterministic_and_partitions_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = many_records(dir.path(), 6);
        let (train_a, test_a) = split(&manifest, 0.7, 9).unwrap();
        let (train_b, test_b) = split(&manifest, 0.7, 9).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);

        let mut ids: Vec<&str> = train_a
            .records
            .iter()
            .chain(&test_a.records)
            .map(|r| r.id.as_str())
            .collect();
        ids.sort_unstable();
        let mut expected: Vec<&str> = manifest.records.iter().map(|r| r.id.as_str()).collect();
        expected.sort_unstable();
        assert_eq!(ids, expected);
        assert!(train_a.records.iter().all(|r| test_a.record(&r.id).is_none()));
    }

    #[test]
    fn split_rejects_tiny_classes() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = many_records(dir.path(), 2);
        manifest.records.retain(|r| r.affordance != "to wear" || r.id.ends_with("-0"));
        assert!(matches!(
            split(&manifest, 0.7, 1),
            Err(DatasetError::ClassTooSmall { count: 1, .. })
        ));
    }

    #[test]
    fn rectangles_import_in_groups_of_four() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rects.txt");
        let text = "# two unit squares\n\
                    0 0 0\n1 0 0\n1 1 0\n0 1 0\n\
                    0 0 1\n1 0 1\n1 1 1\n0 1 1\n";
        fs::write(&path, text).unwrap();
        let rects = import_rectangles(&path).unwrap();
        assert_eq!(rects.len(), 2);
        assert_eq!(rects[0].center(), [0.5, 0.5, 0.0]);
        assert_eq!(rects[1].center(), [0.5, 0.5, 1.0]);
    }

    #[test]
    fn truncated_rectangle_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rects.txt");
        fs::write(&path, "0 0 0\n1 0 0\n1 1 0\n0 1 0\n0 0 1\n1 0 1\n").unwrap();
        assert!(matches!(
            import_rectangles(&path),
            Err(DatasetError::TruncatedGroup { lines: 6, .. })
        ));
    }

    #[test]
    fn malformed_coordinates_report_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.xyz");
        fs::write(&path, "0 0 0\n0 zero 0\n").unwrap();
        match read_xyz(&path) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn xyz_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.xyz");
        let points = vec![[0.1, -0.25, 0.333333], [1e-9, 2.5, -0.75]];
        write_xyz(&path, &points).unwrap();
        assert_eq!(read_xyz(&path).unwrap(), points);
    }

    #[test]
    fn empty_cloud_file_parses_to_no_points() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.xyz");
        File::create(&path).unwrap();
        assert!(read_xyz(&path).unwrap().is_empty());
    }
}
