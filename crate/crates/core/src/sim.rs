//! Synthetic street surveys with known ground truth.
//!
//! Cameras drive along a straight street, capturing a panorama of
//! `views_per_point` frames at each capture point. Every object within range
//! and inside a frame's frustum yields a detection whose pixel coordinates
//! invert the bearing and pitch models exactly, after which the noise model
//! perturbs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::{
    destination, haversine_distance, initial_bearing, normalize_bearing, CameraFrame, Detection, GeoPoint, LocalChart,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Degrees, applied through the pixel column.
    pub bearing_sigma: f64,
    /// Meters, on monocular depth.
    pub depth_sigma: f64,
    /// Meters per horizontal axis, shared by all views of a capture point.
    pub gps_sigma: f64,
    /// Pixels, on both image axes.
    pub pixel_sigma: f64,
    /// Probability that a frame gets one spurious detection.
    pub false_positive_rate: f64,
    /// Probability that a visible object is not detected in a frame.
    pub miss_rate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            bearing_sigma: 0.5,
            depth_sigma: 1.0,
            gps_sigma: 0.2,
            pixel_sigma: 1.0,
            false_positive_rate: 0.05,
            miss_rate: 0.1,
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            bearing_sigma: 0.0,
            depth_sigma: 0.0,
            gps_sigma: 0.0,
            pixel_sigma: 0.0,
            false_positive_rate: 0.0,
            miss_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: String,
    pub position: GeoPoint,
    /// Meters above reference ground.
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub seed: u64,
    pub start: GeoPoint,
    /// Degrees clockwise from north.
    pub street_bearing: f64,
    pub street_length: f64,
    pub capture_spacing: f64,
    pub views_per_point: u32,
    pub fov: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub camera_height: f64,
    /// Camera pitch of each capture point is uniform in ±this, degrees.
    pub camera_pitch_spread: f64,
    /// Lens offset δ shared by every frame, degrees.
    pub lens_offset: f64,
    /// Detections are only emitted within this horizontal range, meters.
    pub max_range: f64,
    pub objects: Vec<SceneObject>,
    pub noise: NoiseModel,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            start: GeoPoint { lat: 53.3400, lon: -6.2600 },
            street_bearing: 90.0,
            street_length: 120.0,
            capture_spacing: 3.0,
            views_per_point: 6,
            fov: 68.77,
            image_width: 1024,
            image_height: 1024,
            camera_height: 2.5,
            camera_pitch_spread: 1.0,
            lens_offset: 0.5,
            max_range: 30.0,
            objects: Vec::new(),
            noise: NoiseModel::none(),
        }
    }
}

/// Generated survey with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub frames: Vec<CameraFrame>,
    pub detections: Vec<Detection>,
    pub truth: Vec<GroundTruth>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let n = &self.noise;
        let mut problems = Vec::new();
        for (name, v) in [
            ("bearing_sigma", n.bearing_sigma),
            ("depth_sigma", n.depth_sigma),
            ("gps_sigma", n.gps_sigma),
            ("pixel_sigma", n.pixel_sigma),
            ("camera_pitch_spread", self.camera_pitch_spread),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name}: {v} must be non-negative"));
            }
        }
        for (name, v) in [("false_positive_rate", n.false_positive_rate), ("miss_rate", n.miss_rate)] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name}: {v} outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("capture_spacing", self.capture_spacing),
            ("max_range", self.max_range),
        ] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name}: {v} must be positive"));
            }
        }
        if !(self.street_length.is_finite() && self.street_length >= 0.0) {
            problems.push(format!("street_length: {} must be non-negative", self.street_length));
        }
        if !(self.fov > 0.0 && self.fov < 180.0) {
            problems.push(format!("fov: {} outside (0, 180)", self.fov));
        }
        if self.views_per_point == 0 || self.image_width == 0 || self.image_height == 0 {
            problems.push("views_per_point and image dimensions must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Point `along` meters down the street and `right` meters to its right.
    pub fn street_point(&self, along: f64, right: f64) -> GeoPoint {
        let on_street = destination(self.start, self.street_bearing, along);
        destination(on_street, normalize_bearing(self.street_bearing + 90.0), right)
    }

    /// Scene with `count` objects alternating between drains (elevation 0,
    /// at the kerb) and signs (1.8–3.0 m, set back), spread along a street
    /// sized to hold them.
    pub fn street(seed: u64, count: usize, noise: NoiseModel) -> Self {
        let margin = 15.0;
        let gap = 10.0;
        let mut spec = Self {
            seed,
            street_length: 2.0 * margin + gap * count.saturating_sub(1) as f64,
            noise,
            ..Self::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0b1e_c7);
        for i in 0..count {
            let side = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let along = margin + gap * i as f64 + rng.random_range(-1.5..1.5);
            let (class, lateral, elevation) = if i % 2 == 0 {
                ("drain", rng.random_range(3.5..5.0), 0.0)
            } else {
                ("sign", rng.random_range(4.5..7.0), rng.random_range(1.8..3.0))
            };
            spec.objects.push(SceneObject {
                class: class.to_string(),
                position: spec.street_point(along, side * lateral),
                elevation,
            });
        }
        spec
    }

    fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.objects.iter().map(|o| o.class.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn generate(&self) -> Result<Scene> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = &self.noise;
        let classes = self.classes();
        let (w, h) = (f64::from(self.image_width), f64::from(self.image_height));
        let half_fov = 0.5 * self.fov;
        let px_per_deg_x = 0.5 * w / half_fov;
        let px_per_deg_y = 0.5 * h / half_fov;
        let delta = self.lens_offset;

        let points = (self.street_length / self.capture_spacing).floor() as usize + 1;
        let mut frames = Vec::new();
        let mut detections = Vec::new();
        for k in 0..points {
            let truth_pos = destination(self.start, self.street_bearing, k as f64 * self.capture_spacing);
            let chart = LocalChart::new(truth_pos);
            let gps: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let recorded = chart.unproject([noise.gps_sigma * gps[0], noise.gps_sigma * gps[1]]);
            let pitch = if self.camera_pitch_spread > 0.0 {
                rng.random_range(-self.camera_pitch_spread..=self.camera_pitch_spread)
            } else {
                0.0
            };

            for v in 0..self.views_per_point {
                let heading =
                    normalize_bearing(self.street_bearing + f64::from(v) * 360.0 / f64::from(self.views_per_point));
                let frame = CameraFrame {
                    image_id: format!("cp{k:04}-v{v}"),
                    position: recorded,
                    heading,
                    pitch,
                    fov: self.fov,
                    width: self.image_width,
                    height: self.image_height,
                    fov_top: Some(half_fov + delta),
                    fov_bottom: Some(half_fov - delta),
                    camera_height: self.camera_height,
                };

                for obj in &self.objects {
                    // Fixed draw count per pair keeps scenes comparable across noise levels.
                    let miss: f64 = rng.random();
                    let e: [f64; 4] = [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ];
                    let d = haversine_distance(truth_pos, obj.position);
                    if !(d > 0.0 && d <= self.max_range) {
                        continue;
                    }
                    let offset = normalize_bearing(initial_bearing(truth_pos, obj.position) - heading + 180.0) - 180.0;
                    if offset.abs() >= half_fov {
                        continue;
                    }
                    let gamma = (obj.elevation - self.camera_height).atan2(d).to_degrees();
                    let x = 0.5 * w + offset * px_per_deg_x;
                    let y = 0.5 * h - (gamma + pitch - delta) * px_per_deg_y;
                    if !(0.0..w).contains(&x) || !(0.0..h).contains(&y) || miss < noise.miss_rate {
                        continue;
                    }
                    let x = x + noise.bearing_sigma * e[0] * px_per_deg_x + noise.pixel_sigma * e[1];
                    let y = y + noise.pixel_sigma * e[2];
                    if !(0.0..w).contains(&x) || !(0.0..h).contains(&y) {
                        continue;
                    }
                    detections.push(Detection {
                        image_id: frame.image_id.clone(),
                        class: obj.class.clone(),
                        pixel_x: x,
                        pixel_y: y,
                        mono_depth: Some((d + noise.depth_sigma * e[3]).max(0.1)),
                    });
                }

                let spurious: f64 = rng.random();
                let fx = rng.random_range(0.0..w);
                let fy = rng.random_range(0.0..h);
                let fd = rng.random_range(1.0..30.0);
                let fc = rng.random_range(0..classes.len().max(1));
                if spurious < noise.false_positive_rate && !classes.is_empty() {
                    detections.push(Detection {
                        image_id: frame.image_id.clone(),
                        class: classes[fc].clone(),
                        pixel_x: fx,
                        pixel_y: fy,
                        mono_depth: Some(fd),
                    });
                }
                frames.push(frame);
            }
        }
        let truth = self
            .objects
            .iter()
            .map(|o| GroundTruth {
                class: o.class.clone(),
                position: o.position,
                elevation: o.elevation,
            })
            .collect();
        Ok(Scene {
            frames,
            detections,
            truth,
        })
    }
}
