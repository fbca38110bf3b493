//! Evaluation harness: confusion/accuracy reporting, the environment
//! ablation, zero-shot evaluation over held-out categories, grasp point
//! metric, and posterior-score statistics.
//!
//! Reports serialize to JSON with floating-point values rounded to six
//! decimals; the confusion matrix can additionally be exported as CSV with
//! one header-labelled row per true class.

use afford_core::{AffordanceClass, InferenceResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::datasets::Manifest;
use crate::pipeline::{infer_record, train_pipeline, PipelineError, TrainedModel};

/// Errors specific to report assembly.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("cannot build a report from empty input")]
    EmptyInput,
    #[error("no object carries labelled rectangles")]
    NoLabels,
    #[error("no manifest record belongs to the holdout categories")]
    EmptyHoldout,
}

pub(crate) fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

mod serde_round {
    use serde::Serializer;

    pub fn f64_6<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::round6(*v))
    }

    pub fn opt_f64_6<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_some(&super::round6(*v)),
            None => s.serialize_none(),
        }
    }
}

/// 7x7 affordance confusion counts; rows are true classes, columns
/// predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; AffordanceClass::COUNT]; AffordanceClass::COUNT],
}

/// Accumulates (true, predicted) pairs into a confusion matrix.
pub fn confusion(
    pairs: &[(AffordanceClass, AffordanceClass)],
) -> Result<ConfusionMatrix, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut counts = [[0u64; AffordanceClass::COUNT]; AffordanceClass::COUNT];
    for (truth, predicted) in pairs {
        counts[truth.index()][predicted.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn counts(&self) -> &[[u64; AffordanceClass::COUNT]; AffordanceClass::COUNT] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-class recall, or `None` when the class never appears as truth.
    pub fn recall(&self, class: AffordanceClass) -> Option<f64> {
        let row = &self.counts[class.index()];
        let total: u64 = row.iter().sum();
        (total > 0).then(|| row[class.index()] as f64 / total as f64)
    }

    /// Mean per-class recall over the classes that appear as truth; the
    /// "diagonal average" of the row-normalized matrix.
    pub fn diagonal_average(&self) -> f64 {
        let recalls: Vec<f64> = AffordanceClass::ALL
            .into_iter()
            .filter_map(|c| self.recall(c))
            .collect();
        recalls.iter().sum::<f64>() / recalls.len() as f64
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.iter().map(|row| row.to_vec()).collect()
    }

    /// CSV rendering: a header line plus one labelled row per true class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for class in AffordanceClass::ALL {
            out.push(',');
            out.push_str(class.name());
        }
        out.push('\n');
        for class in AffordanceClass::ALL {
            out.push_str(class.name());
            for count in &self.counts[class.index()] {
                out.push(',');
                out.push_str(&count.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Five-number summary of the winning normalized scores of one final class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    pub count: usize,
    #[serde(serialize_with = "serde_round::f64_6")]
    pub min: f64,
    #[serde(serialize_with = "serde_round::f64_6")]
    pub q1: f64,
    #[serde(serialize_with = "serde_round::f64_6")]
    pub median: f64,
    #[serde(serialize_with = "serde_round::f64_6")]
    pub q3: f64,
    #[serde(serialize_with = "serde_round::f64_6")]
    pub max: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Quartiles (linear interpolation) of the winning normalized score,
/// grouped by final class; classes without results are omitted.
pub fn posterior_stats(results: &[InferenceResult]) -> Result<Vec<ClassStats>, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut stats = Vec::new();
    for class in AffordanceClass::ALL {
        let mut scores: Vec<f64> = results
            .iter()
            .filter(|r| r.final_affordance == class)
            .map(|r| r.scores.winning())
            .collect();
        if scores.is_empty() {
            continue;
        }
        scores.sort_by(f64::total_cmp);
        stats.push(ClassStats {
            class: class.name().to_string(),
            count: scores.len(),
            min: scores[0],
            q1: quantile(&scores, 0.25),
            median: quantile(&scores, 0.5),
            q3: quantile(&scores, 0.75),
            max: scores[scores.len() - 1],
        });
    }
    Ok(stats)
}

/// Confusion block embedded in report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub affordances: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    #[serde(serialize_with = "serde_round::f64_6")]
    pub diagonal_average_accuracy: f64,
}

impl ConfusionReport {
    pub fn from_matrix(matrix: &ConfusionMatrix) -> Self {
        ConfusionReport {
            affordances: AffordanceClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            counts: matrix.rows(),
            diagonal_average_accuracy: matrix.diagonal_average(),
        }
    }
}

/// Standard evaluation report: confusion plus posterior statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub objects: usize,
    pub confusion: ConfusionReport,
    pub posterior_stats: Vec<ClassStats>,
}

/// Runs a trained model over every manifest record.
pub fn evaluate(
    model: &TrainedModel,
    manifest: &Manifest,
) -> Result<(EvalReport, ConfusionMatrix), PipelineError> {
    let mut pairs = Vec::with_capacity(manifest.records.len());
    let mut results = Vec::with_capacity(manifest.records.len());
    for record in &manifest.records {
        let truth = record
            .affordance_class()
            .ok_or_else(|| PipelineError::UnknownAffordance {
                record: record.id.clone(),
                label: record.affordance.clone(),
            })?;
        let result = infer_record(model, record)?;
        pairs.push((truth, result.final_affordance));
        results.push(result);
    }
    let matrix = confusion(&pairs).map_err(|_| PipelineError::Config("empty manifest".into()))?;
    let report = EvalReport {
        objects: pairs.len(),
        confusion: ConfusionReport::from_matrix(&matrix),
        posterior_stats: posterior_stats(&results)
            .map_err(|_| PipelineError::Config("empty manifest".into()))?,
    };
    Ok((report, matrix))
}

/// Ablation outcome: the four-layer pipeline against the three-layer one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub with_environment: ConfusionReport,
    pub without_environment: ConfusionReport,
    /// `with` minus `without` diagonal average accuracy, exactly.
    #[serde(serialize_with = "serde_round::f64_6")]
    pub delta: f64,
}

/// Trains the full and the environment-ablated pipeline on the same training
/// manifest and compares them on the test manifest.
pub fn ablate_environment(
    train: &Manifest,
    test: &Manifest,
    config: &RunConfig,
) -> Result<AblationReport, PipelineError> {
    let with_config = RunConfig {
        environment: true,
        ..config.clone()
    };
    let without_config = RunConfig {
        environment: false,
        ..config.clone()
    };
    let with_model = train_pipeline(train, &with_config)?;
    let without_model = train_pipeline(train, &without_config)?;
    let (_, with_matrix) = evaluate(&with_model, test)?;
    let (_, without_matrix) = evaluate(&without_model, test)?;
    let with_report = ConfusionReport::from_matrix(&with_matrix);
    let without_report = ConfusionReport::from_matrix(&without_matrix);
    let delta =
        with_report.diagonal_average_accuracy - without_report.diagonal_average_accuracy;
    Ok(AblationReport {
        with_environment: with_report,
        without_environment: without_report,
        delta,
    })
}

/// Zero-shot outcome over held-out object categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotReport {
    pub holdout_categories: Vec<String>,
    pub objects: usize,
    /// Fraction of holdout objects whose final affordance matches the label.
    #[serde(serialize_with = "serde_round::f64_6")]
    pub accuracy: f64,
    pub confusion: ConfusionReport,
}

/// Evaluates only the records of the held-out categories; the model must
/// have been trained with those categories excluded.
pub fn zero_shot_eval(
    model: &TrainedModel,
    manifest: &Manifest,
    holdout: &[String],
) -> Result<ZeroShotReport, PipelineError> {
    let mut pairs = Vec::new();
    for record in &manifest.records {
        if !holdout.contains(&record.category) {
            continue;
        }
        let truth = record
            .affordance_class()
            .ok_or_else(|| PipelineError::UnknownAffordance {
                record: record.id.clone(),
                label: record.affordance.clone(),
            })?;
        let result = infer_record(model, record)?;
        pairs.push((truth, result.final_affordance));
    }
    if pairs.is_empty() {
        return Err(EvalError::EmptyHoldout.into());
    }
    let matrix = confusion(&pairs).expect("non-empty pairs");
    let correct = pairs.iter().filter(|(t, p)| t == p).count();
    Ok(ZeroShotReport {
        holdout_categories: holdout.to_vec(),
        objects: pairs.len(),
        accuracy: correct as f64 / pairs.len() as f64,
        confusion: ConfusionReport::from_matrix(&matrix),
    })
}

/// Per-object input to the point metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMetricObject {
    pub id: String,
    /// Predicted grasp-ellipse center; `None` when no feasible region exists.
    pub ellipse_center: Option<[f64; 3]>,
    pub rectangle_centers: Vec<[f64; 3]>,
    pub bbox_diagonal: f64,
}

/// Per-object point-metric entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetricEntry {
    pub id: String,
    /// Nearest-rectangle Euclidean distance; absent without a grasp region.
    #[serde(serialize_with = "serde_round::opt_f64_6")]
    pub distance: Option<f64>,
    /// Absolute match threshold in meters for this object.
    #[serde(serialize_with = "serde_round::f64_6")]
    pub threshold: f64,
    pub matched: bool,
    /// Grasp effect: `positive` on a match, `negative` otherwise.
    pub effect: String,
}

/// Point-metric report over all labelled objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetricReport {
    #[serde(serialize_with = "serde_round::f64_6")]
    pub threshold_frac: f64,
    pub labelled: usize,
    pub matched: usize,
    #[serde(serialize_with = "serde_round::f64_6")]
    pub match_percentage: f64,
    pub objects: Vec<PointMetricEntry>,
}

/// Nearest-rectangle distances against a threshold relative to each object's
/// bounding-box diagonal. Objects without rectangles are skipped; at least
/// one labelled object is required.
pub fn point_metric(
    objects: &[PointMetricObject],
    threshold_frac: f64,
) -> Result<PointMetricReport, EvalError> {
    let mut entries = Vec::new();
    let mut matched = 0usize;
    for object in objects {
        if object.rectangle_centers.is_empty() {
            continue;
        }
        let threshold = threshold_frac * object.bbox_diagonal;
        let distance = object.ellipse_center.map(|center| {
            object
                .rectangle_centers
                .iter()
                .map(|rc| {
                    let mut sq = 0.0;
                    for axis in 0..3 {
                        let d = rc[axis] - center[axis];
                        sq += d * d;
                    }
                    sq.sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        });
        let is_match = distance.is_some_and(|d| d <= threshold);
        if is_match {
            matched += 1;
        }
        entries.push(PointMetricEntry {
            id: object.id.clone(),
            distance,
            threshold,
            matched: is_match,
            effect: if is_match { "positive" } else { "negative" }.to_string(),
        });
    }
    if entries.is_empty() {
        return Err(EvalError::NoLabels);
    }
    Ok(PointMetricReport {
        threshold_frac,
        labelled: entries.len(),
        matched,
        match_percentage: 100.0 * matched as f64 / entries.len() as f64,
        objects: entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use AffordanceClass::*;

    #[test]
    fn perfect_predictions_give_identity_pattern() {
        let pairs: Vec<_> = AffordanceClass::ALL.into_iter().map(|c| (c, c)).collect();
        let matrix = confusion(&pairs).unwrap();
        assert_eq!(matrix.total(), 7);
        assert_eq!(matrix.diagonal_average(), 1.0);
        for class in AffordanceClass::ALL {
            assert_eq!(matrix.recall(class), Some(1.0));
        }
    }

    #[test]
    fn one_class_confused_halves_the_diagonal_average() {
        // Truth ToEat always predicted ToContain; truth ToContain correct.
        let pairs = vec![
            (ToEat, ToContain),
            (ToEat, ToContain),
            (ToContain, ToContain),
            (ToContain, ToContain),
        ];
        let matrix = confusion(&pairs).unwrap();
        assert_eq!(matrix.recall(ToEat), Some(0.0));
        assert_eq!(matrix.recall(ToContain), Some(1.0));
        assert_eq!(matrix.diagonal_average(), 0.5);
    }

    #[test]
    fn absent_classes_are_excluded_from_the_mean() {
        let pairs = vec![(ToWear, ToWear), (ToWear, ToWear), (ToWear, ToClean)];
        let matrix = confusion(&pairs).unwrap();
        assert_eq!(matrix.recall(ToEat), None);
        assert!((matrix.diagonal_average() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(confusion(&[]).unwrap_err(), EvalError::EmptyInput);
        assert_eq!(posterior_stats(&[]).unwrap_err(), EvalError::EmptyInput);
    }

    #[test]
    fn csv_has_seven_labelled_rows() {
        let pairs: Vec<_> = AffordanceClass::ALL.into_iter().map(|c| (c, c)).collect();
        let csv = confusion(&pairs).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 8);
        assert!(lines[0].starts_with("true\\predicted,to eat,"));
        assert!(lines[1].starts_with("to eat,1,0,"));
        assert!(lines[7].starts_with("to wear,"));
    }

    #[test]
    fn quartiles_use_linear_interpolation() {
        let sorted = [0.2, 0.4, 0.6, 0.8];
        assert!((quantile(&sorted, 0.5) - 0.5).abs() < 1e-12);
        assert!((quantile(&sorted, 0.25) - 0.35).abs() < 1e-12);
        assert!((quantile(&sorted, 0.75) - 0.65).abs() < 1e-12);
        let single = [0.9];
        assert_eq!(quantile(&single, 0.25), 0.9);
        assert_eq!(quantile(&single, 0.75), 0.9);
    }

    #[test]
    fn point_metric_exact_center_matches() {
        let objects = vec![PointMetricObject {
            id: "a".to_string(),
            ellipse_center: Some([0.1, 0.2, 0.3]),
            rectangle_centers: vec![[0.1, 0.2, 0.3]],
            bbox_diagonal: 1.0,
        }];
        let report = point_metric(&objects, 0.1).unwrap();
        assert_eq!(report.objects[0].distance, Some(0.0));
        assert!(report.objects[0].matched);
        assert_eq!(report.objects[0].effect, "positive");
        assert_eq!(report.match_percentage, 100.0);
    }

    #[test]
    fn point_metric_uses_the_nearest_rectangle() {
        let objects = vec![PointMetricObject {
            id: "a".to_string(),
            ellipse_center: Some([0.2, 0.0, 0.0]),
            rectangle_centers: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            bbox_diagonal: 1.0,
        }];
        let report = point_metric(&objects, 0.25).unwrap();
        let entry = &report.objects[0];
        assert!((entry.distance.unwrap() - 0.2).abs() < 1e-12);
        assert!((entry.threshold - 0.25).abs() < 1e-12);
        assert!(entry.matched);
    }

    #[test]
    fn point_metric_is_monotone_in_threshold() {
        let objects: Vec<PointMetricObject> = (0..10)
            .map(|i| PointMetricObject {
                id: format!("o{i}"),
                ellipse_center: Some([i as f64 * 0.05, 0.0, 0.0]),
                rectangle_centers: vec![[0.0, 0.0, 0.0]],
                bbox_diagonal: 1.0,
            })
            .collect();
        let mut previous = -1.0f64;
        for i in 1..=10 {
            let frac = i as f64 / 10.0;
            let report = point_metric(&objects, frac).unwrap();
            assert!(report.match_percentage >= previous);
            previous = report.match_percentage;
        }
    }

    #[test]
    fn unlabelled_objects_are_skipped_and_failures_count_negative() {
        let objects = vec![
            PointMetricObject {
                id: "labelled".to_string(),
                ellipse_center: None,
                rectangle_centers: vec![[0.0, 0.0, 0.0]],
                bbox_diagonal: 1.0,
            },
            PointMetricObject {
                id: "bare".to_string(),
                ellipse_center: Some([0.0, 0.0, 0.0]),
                rectangle_centers: vec![],
                bbox_diagonal: 1.0,
            },
        ];
        let report = point_metric(&objects, 0.1).unwrap();
        assert_eq!(report.labelled, 1);
        assert_eq!(report.matched, 0);
        assert_eq!(report.objects[0].effect, "negative");
        assert_eq!(report.objects[0].distance, None);

        let bare_only = vec![objects[1].clone()];
        assert_eq!(point_metric(&bare_only, 0.1).unwrap_err(), EvalError::NoLabels);
    }

    #[test]
    fn rounding_applies_at_serialization() {
        let stats = ClassStats {
            class: "to eat".to_string(),
            count: 1,
            min: 0.123456789,
            q1: 0.123456789,
            median: 0.123456789,
            q3: 0.123456789,
            max: 0.123456789,
        };
        let json = serde_json::to_string(&stats).unwrap();
        assert!(json.contains("0.123457"));
        assert!(!json.contains("0.123456789"));
    }
}
