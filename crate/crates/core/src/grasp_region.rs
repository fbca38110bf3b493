//! Affordance-constrained grasp regions on point clouds.
//!
//! The candidate grasp points are discretised along z. Objects meant to
//! contain edibles keep only the bins whose centers fall in the middle third
//! of the z-extent; every other affordance keeps the bins whose candidate
//! count reaches a fraction of the densest bin. The selected points collapse
//! into a grasp ellipse positioned at their centroid, with fixed end-effector
//! semi-axes and no orientation.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::attribute_model::AffordanceClass;
use crate::math;

/// Errors from partitioning, region selection, and ellipse fitting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraspError {
    #[error("point cloud must contain at least one point")]
    EmptyCloud,
    #[error("candidate set must contain at least one point")]
    EmptyCandidates,
    #[error("coordinates must be finite")]
    NonFinitePoint,
    #[error("point cloud has zero z-extent")]
    FlatCloud,
    #[error("bin count {0} is too small; the central-band rule needs at least 3 bins")]
    BadBinCount(usize),
    #[error("density threshold {0} must lie in (0, 1]")]
    InvalidTheta(f64),
    #[error("no candidate point satisfies the grasp rule")]
    NoFeasibleRegion,
    #[error("grasp region is empty")]
    EmptyRegion,
    #[error("end-effector semi-axes must be positive and finite")]
    InvalidSemiAxes,
}

/// Object-frame point cloud in meters, z up.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, GraspError> {
        if points.is_empty() {
            return Err(GraspError::EmptyCloud);
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GraspError::NonFinitePoint);
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            for axis in 0..3 {
                lo[axis] = lo[axis].min(p[axis]);
                hi[axis] = hi[axis].max(p[axis]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        let mut sq = 0.0;
        for axis in 0..3 {
            let d = hi[axis] - lo[axis];
            sq += d * d;
        }
        math::sqrt(sq)
    }
}

/// Grasp candidate points, ingested from the reconstruction stage or
/// synthesized.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspCandidateSet {
    points: Vec<[f64; 3]>,
}

impl GraspCandidateSet {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self, GraspError> {
        if points.is_empty() {
            return Err(GraspError::EmptyCandidates);
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GraspError::NonFinitePoint);
        }
        Ok(GraspCandidateSet { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Uniform discretisation of the cloud's z-extent.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPartition {
    z_min: f64,
    z_max: f64,
    edges: Vec<f64>,
}

impl ZPartition {
    pub fn z_min(&self) -> f64 {
        self.z_min
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bin_center(&self, bin: usize) -> f64 {
        (self.edges[bin] + self.edges[bin + 1]) / 2.0
    }

    /// Bin holding `z`, or `None` outside the partition range. The top edge
    /// belongs to the last bin.
    pub fn bin_of(&self, z: f64) -> Option<usize> {
        if !(self.z_min..=self.z_max).contains(&z) {
            return None;
        }
        let bins = self.bin_count();
        let width = (self.z_max - self.z_min) / bins as f64;
        let idx = math::floor((z - self.z_min) / width) as usize;
        Some(idx.min(bins - 1))
    }
}

/// Discretises the cloud's z-extent into `bins` uniform bins.
pub fn partition_z(cloud: &PointCloud, bins: usize) -> Result<ZPartition, GraspError> {
    if bins < 3 {
        return Err(GraspError::BadBinCount(bins));
    }
    let mut z_min = f64::INFINITY;
    let mut z_max = f64::NEG_INFINITY;
    for p in cloud.points() {
        z_min = z_min.min(p[2]);
        z_max = z_max.max(p[2]);
    }
    if z_max - z_min <= 0.0 {
        return Err(GraspError::FlatCloud);
    }
    let extent = z_max - z_min;
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| z_min + extent * i as f64 / bins as f64)
        .collect();
    edges[0] = z_min;
    edges[bins] = z_max;
    Ok(ZPartition {
        z_min,
        z_max,
        edges,
    })
}

/// Which grasp rule produced a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    CentralBand,
    DensityThreshold,
}

impl SelectionRule {
    pub fn name(self) -> &'static str {
        match self {
            SelectionRule::CentralBand => "central-band",
            SelectionRule::DensityThreshold => "density-threshold",
        }
    }
}

/// The affordance-constrained grasp region: selected bins and the candidate
/// points inside them.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspRegion {
    pub rule: SelectionRule,
    pub bins: Vec<usize>,
    pub points: Vec<[f64; 3]>,
}

/// Applies the grasp rule for `affordance` to the candidate set.
///
/// Containers and edibles (`to contain`, `to eat`) keep the bins whose
/// centers lie within the middle third of the z-extent; everything else
/// keeps the bins whose candidate count is at least `theta` times the
/// densest bin's count.
pub fn select_region(
    candidates: &GraspCandidateSet,
    partition: &ZPartition,
    affordance: AffordanceClass,
    theta: f64,
) -> Result<GraspRegion, GraspError> {
    let central = matches!(
        affordance,
        AffordanceClass::ToContain | AffordanceClass::ToEat
    );
    let bins = partition.bin_count();
    let (rule, selected): (SelectionRule, Vec<usize>) = if central {
        let extent = partition.z_max() - partition.z_min();
        let lower = partition.z_min() + extent / 3.0;
        let upper = partition.z_min() + 2.0 * extent / 3.0;
        let selected = (0..bins)
            .filter(|b| {
                let c = partition.bin_center(*b);
                c >= lower && c <= upper
            })
            .collect();
        (SelectionRule::CentralBand, selected)
    } else {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(GraspError::InvalidTheta(theta));
        }
        let mut counts = vec![0usize; bins];
        for p in candidates.points() {
            if let Some(b) = partition.bin_of(p[2]) {
                counts[b] += 1;
            }
        }
        let max = counts.iter().copied().max().unwrap_or(0);
        let selected = (0..bins)
            .filter(|b| counts[*b] as f64 >= theta * max as f64)
            .collect();
        (SelectionRule::DensityThreshold, selected)
    };

    let points: Vec<[f64; 3]> = candidates
        .points()
        .iter()
        .filter(|p| partition.bin_of(p[2]).is_some_and(|b| selected.contains(&b)))
        .copied()
        .collect();
    if points.is_empty() {
        return Err(GraspError::NoFeasibleRegion);
    }
    Ok(GraspRegion {
        rule,
        bins: selected,
        points,
    })
}

/// Positional grasp summary: region centroid plus the end-effector
/// semi-axes. Orientation is deliberately unmodeled.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspEllipse {
    pub center: [f64; 3],
    pub semi_axes: [f64; 2],
}

/// Places the ellipse at the arithmetic centroid of the region's points.
pub fn fit_ellipse(region: &GraspRegion, semi_axes: [f64; 2]) -> Result<GraspEllipse, GraspError> {
    if region.points.is_empty() {
        return Err(GraspError::EmptyRegion);
    }
    if semi_axes.iter().any(|a| !a.is_finite() || *a <= 0.0) {
        return Err(GraspError::InvalidSemiAxes);
    }
    let n = region.points.len() as f64;
    let mut center = [0.0f64; 3];
    for p in &region.points {
        for axis in 0..3 {
            center[axis] += p[axis];
        }
    }
    for c in center.iter_mut() {
        *c /= n;
    }
    Ok(GraspEllipse { center, semi_axes })
}
