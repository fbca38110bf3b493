//! Seeded synthetic dataset generator for desk-scale experiments.
//!
//! Each affordance class gets a fixed canonical entity profile (shape,
//! texture, categorical, environment) and two object categories. Features
//! are drawn from unit-variance Gaussians whose per-entity means sit a
//! configurable separation apart; the environment label matches the class's
//! canonical environment with probability `p`, otherwise it is uniform over
//! the remaining six. Point clouds are surface samples of a solid matching
//! the shape entity with a densified grip band at mid-height, candidates are
//! all surface points, and each object carries one grasp rectangle placed at
//! the region its affordance rule selects.

use std::path::Path;

use afford_core::{AffordanceClass, AttributeKind, EntityId};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    save_manifest, write_xyz, AttributeEvidence, DatasetError, FeatureDimensions, GraspRectangle,
    Manifest, ObjectAttributes, ObjectRecord, MANIFEST_SCHEMA_VERSION,
};

/// Synthetic-data parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Objects generated per affordance class.
    pub per_class: usize,
    /// Feature dimension shared by all four attributes.
    pub dimension: usize,
    /// Distance between neighbouring entity means in feature space.
    pub separation: f64,
    /// Probability that the sampled environment matches the class's
    /// canonical environment; `1/7` makes the label pure noise.
    pub env_informativeness: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            per_class: 20,
            dimension: 3,
            separation: 4.0,
            env_informativeness: 0.95,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.per_class == 0 {
            return Err(DatasetError::InvalidConfig(
                "per_class must be at least 1".to_string(),
            ));
        }
        if self.dimension == 0 {
            return Err(DatasetError::InvalidConfig(
                "dimension must be at least 1".to_string(),
            ));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(DatasetError::InvalidConfig(format!(
                "separation must be non-negative, got {}",
                self.separation
            )));
        }
        let floor = 1.0 / AffordanceClass::COUNT as f64;
        if !(floor..=1.0).contains(&self.env_informativeness) {
            return Err(DatasetError::InvalidConfig(format!(
                "environment informativeness must lie in [1/7, 1], got {}",
                self.env_informativeness
            )));
        }
        Ok(())
    }
}

/// Canonical entity profile and object categories of one affordance class.
struct ClassProfile {
    shape: &'static str,
    texture: &'static str,
    categorical: &'static str,
    environment: &'static str,
    categories: [&'static str; 2],
}

fn profile(class: AffordanceClass) -> ClassProfile {
    match class {
        AffordanceClass::ToEat => ClassProfile {
            shape: "round",
            texture: "smooth",
            categorical: "food",
            environment: "living room",
            categories: ["apple", "pear"],
        },
        AffordanceClass::ToContain => ClassProfile {
            shape: "cylinder",
            texture: "glass",
            categorical: "container",
            environment: "kitchen",
            categories: ["mug", "tumbler"],
        },
        AffordanceClass::ToHandOver => ClassProfile {
            shape: "box",
            texture: "cardboard",
            categorical: "miscellaneous",
            environment: "office",
            categories: ["parcel", "book"],
        },
        AffordanceClass::ToBrush => ClassProfile {
            shape: "long",
            texture: "coarse",
            categorical: "utensils",
            environment: "bathroom",
            categories: ["hairbrush", "toothbrush"],
        },
        AffordanceClass::ToSqueeze => ClassProfile {
            shape: "irregular",
            texture: "rubber",
            categorical: "personal",
            environment: "play-room",
            categories: ["sponge", "stress-ball"],
        },
        AffordanceClass::ToClean => ClassProfile {
            shape: "long",
            texture: "fabric",
            categorical: "miscellaneous",
            environment: "closet",
            categories: ["rag", "duster"],
        },
        AffordanceClass::ToWear => ClassProfile {
            shape: "irregular",
            texture: "fabric",
            categorical: "personal",
            environment: "bedroom",
            categories: ["scarf", "glove"],
        },
    }
}

/// Mean vector of an entity: one axis active per entity, cycling through the
/// dimensions with growing magnitude so the nearest neighbour sits exactly
/// `separation` away.
pub(crate) fn entity_mean(index: usize, dimension: usize, separation: f64) -> Vec<f64> {
    let mut mean = vec![0.0f64; dimension];
    mean[index % dimension] = separation * (index / dimension + 1) as f64;
    mean
}

fn sample_features(
    entity: EntityId,
    dimension: usize,
    separation: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mean = entity_mean(entity.index(), dimension, separation);
    mean.into_iter()
        .map(|m| m + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn sample_environment(
    canonical: EntityId,
    informativeness: f64,
    rng: &mut ChaCha8Rng,
) -> EntityId {
    if rng.random::<f64>() < informativeness {
        return canonical;
    }
    let n = AttributeKind::Environment.entity_count();
    let mut pick = rng.random_range(0..n - 1);
    if pick >= canonical.index() {
        pick += 1;
    }
    EntityId::from_index(AttributeKind::Environment, pick).unwrap()
}

/// Solids backing the five shape entities; z runs from 0 to the height.
enum Solid {
    Box { x: f64, y: f64, h: f64 },
    Cylinder { r: f64, h: f64 },
    Sphere { r: f64, noise: f64 },
}

impl Solid {
    fn for_shape(shape: &str) -> Solid {
        match shape {
            "box" => Solid::Box {
                x: 0.06,
                y: 0.06,
                h: 0.12,
            },
            "cylinder" => Solid::Cylinder { r: 0.03, h: 0.15 },
            "long" => Solid::Box {
                x: 0.02,
                y: 0.02,
                h: 0.25,
            },
            "round" => Solid::Sphere { r: 0.05, noise: 0.0 },
            "irregular" => Solid::Sphere {
                r: 0.05,
                noise: 0.01,
            },
            other => unreachable!("no solid for shape entity `{other}`"),
        }
    }

    fn height(&self) -> f64 {
        match self {
            Solid::Box { h, .. } => *h,
            Solid::Cylinder { h, .. } => *h,
            Solid::Sphere { r, .. } => 2.0 * r,
        }
    }

    fn sample_surface(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        match *self {
            Solid::Box { x, y, h } => {
                let areas = [y * h, y * h, x * h, x * h, x * y, x * y];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.random::<f64>() * total;
                let mut face = 0;
                for (i, a) in areas.iter().enumerate() {
                    if pick < *a {
                        face = i;
                        break;
                    }
                    pick -= a;
                }
                let u = rng.random::<f64>();
                let v = rng.random::<f64>();
                match face {
                    0 => [-x / 2.0, (u - 0.5) * y, v * h],
                    1 => [x / 2.0, (u - 0.5) * y, v * h],
                    2 => [(u - 0.5) * x, -y / 2.0, v * h],
                    3 => [(u - 0.5) * x, y / 2.0, v * h],
                    4 => [(u - 0.5) * x, (v - 0.5) * y, 0.0],
                    _ => [(u - 0.5) * x, (v - 0.5) * y, h],
                }
            }
            Solid::Cylinder { r, h } => {
                // Side vs caps weighted by area.
                let side = 2.0 * std::f64::consts::PI * r * h;
                let caps = 2.0 * std::f64::consts::PI * r * r;
                if rng.random::<f64>() * (side + caps) < side {
                    let angle = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                    [r * angle.cos(), r * angle.sin(), rng.random::<f64>() * h]
                } else {
                    let z = if rng.random::<f64>() < 0.5 { 0.0 } else { h };
                    let rad = r * rng.random::<f64>().sqrt();
                    let angle = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                    [rad * angle.cos(), rad * angle.sin(), z]
                }
            }
            Solid::Sphere { r, noise } => {
                let mut dir = [0.0f64; 3];
                loop {
                    for d in dir.iter_mut() {
                        *d = rng.sample(StandardNormal);
                    }
                    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
                    if norm > 1e-12 {
                        for d in dir.iter_mut() {
                            *d /= norm;
                        }
                        break;
                    }
                }
                let radius = r + if noise > 0.0 {
                    (rng.random::<f64>() * 2.0 - 1.0) * noise
                } else {
                    0.0
                };
                [dir[0] * radius, dir[1] * radius, r + dir[2] * radius]
            }
        }
    }

    /// Surface point constrained to the mid-height grip band.
    fn sample_band(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        let h = self.height();
        let (lo, hi) = (0.4 * h, 0.6 * h);
        for _ in 0..10_000 {
            let p = self.sample_surface(rng);
            if p[2] >= lo && p[2] <= hi {
                return p;
            }
        }
        // The band spans a fifth of every solid's height, so rejection
        // sampling terminates long before this.
        [0.0, 0.0, h / 2.0]
    }
}

const BASE_POINTS: usize = 360;
const BAND_POINTS: usize = 240;
const RECT_HALF_SIZE: f64 = 0.015;

fn centroid_in_band(points: &[[f64; 3]], lo: f64, hi: f64) -> [f64; 3] {
    let mut c = [0.0f64; 3];
    let mut n = 0usize;
    for p in points {
        if p[2] >= lo && p[2] <= hi {
            for axis in 0..3 {
                c[axis] += p[axis];
            }
            n += 1;
        }
    }
    for v in c.iter_mut() {
        *v /= n as f64;
    }
    c
}

fn rectangle_at(center: [f64; 3]) -> GraspRectangle {
    let e = RECT_HALF_SIZE;
    GraspRectangle {
        corners: [
            [center[0] - e, center[1] - e, center[2]],
            [center[0] + e, center[1] - e, center[2]],
            [center[0] + e, center[1] + e, center[2]],
            [center[0] - e, center[1] + e, center[2]],
        ],
    }
}

/// Generates the dataset under `out_dir` (clouds, candidates, manifest) and
/// returns the manifest. Identical configurations produce byte-identical
/// files.
pub fn synth_generate(config: &SynthConfig, out_dir: &Path) -> Result<Manifest, DatasetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(AffordanceClass::COUNT * config.per_class);

    for class in AffordanceClass::ALL {
        let profile = profile(class);
        let shape = EntityId::from_name(AttributeKind::Shape, profile.shape).unwrap();
        let texture = EntityId::from_name(AttributeKind::Texture, profile.texture).unwrap();
        let categorical =
            EntityId::from_name(AttributeKind::Categorical, profile.categorical).unwrap();
        let canonical_env =
            EntityId::from_name(AttributeKind::Environment, profile.environment).unwrap();
        let solid = Solid::for_shape(profile.shape);

        for i in 0..config.per_class {
            let category = profile.categories[i % 2];
            let id = format!("{category}-{i:03}");

            let environment = sample_environment(canonical_env, config.env_informativeness, &mut rng);
            let evidence = |entity: EntityId, rng: &mut ChaCha8Rng| AttributeEvidence {
                label: entity.name().to_string(),
                features: sample_features(entity, config.dimension, config.separation, rng),
            };
            let attributes = ObjectAttributes {
                shape: evidence(shape, &mut rng),
                texture: evidence(texture, &mut rng),
                categorical: evidence(categorical, &mut rng),
                environment: evidence(environment, &mut rng),
            };

            let mut points = Vec::with_capacity(BASE_POINTS + BAND_POINTS);
            for _ in 0..BASE_POINTS {
                points.push(solid.sample_surface(&mut rng));
            }
            for _ in 0..BAND_POINTS {
                points.push(solid.sample_band(&mut rng));
            }

            let (z_min, z_max) = points.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), p| (lo.min(p[2]), hi.max(p[2])),
            );
            let extent = z_max - z_min;
            let rect_center = match class {
                AffordanceClass::ToContain | AffordanceClass::ToEat => {
                    centroid_in_band(&points, z_min + extent / 3.0, z_min + 2.0 * extent / 3.0)
                }
                _ => centroid_in_band(&points, z_min + 0.4 * extent, z_min + 0.6 * extent),
            };

            let cloud_rel = format!("clouds/{id}.xyz");
            let cand_rel = format!("candidates/{id}.xyz");
            write_xyz(&out_dir.join(&cloud_rel), &points)?;
            write_xyz(&out_dir.join(&cand_rel), &points)?;

            records.push(ObjectRecord {
                id,
                category: category.to_string(),
                affordance: class.name().to_string(),
                attributes,
                point_cloud: cloud_rel,
                candidates: cand_rel,
                rectangles: vec![rectangle_at(rect_center)],
            });
        }
    }

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        feature_dimensions: FeatureDimensions::uniform(config.dimension),
        records,
    };
    save_manifest(&manifest, &out_dir.join("manifest.json"))?;
    Ok(manifest)
}
