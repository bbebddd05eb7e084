//! Single-view object elevation, per-object aggregation and camera-height
//! calibration from ground-level objects.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pixel_pitch, CameraFrame, Detection};
use crate::mrf::{MrfGraph, NodeHeights};
use crate::pipeline::ObjectInstance;
use crate::survey::Survey;

/// How the object pitch is derived from the pixel row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PitchMode {
    /// Pixel-derived angle only; camera pitch taken as 0.
    Raw,
    /// Camera pitch subtracted.
    CameraPitch,
    /// Camera pitch subtracted and lens offset added.
    #[default]
    Corrected,
}

impl FromStr for PitchMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(Self::Raw),
            "camera-pitch" => Ok(Self::CameraPitch),
            "corrected" => Ok(Self::Corrected),
            other => Err(format!("unknown pitch mode `{other}` (expected raw, camera-pitch or corrected)")),
        }
    }
}

impl fmt::Display for PitchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::CameraPitch => "camera-pitch",
            Self::Corrected => "corrected",
        })
    }
}

pub fn object_pitch(frame: &CameraFrame, det: &Detection, mode: PitchMode) -> f64 {
    match mode {
        PitchMode::Raw => {
            let half_h = 0.5 * f64::from(frame.height);
            (half_h - det.pixel_y) / half_h * (0.5 * frame.fov)
        }
        PitchMode::CameraPitch => pixel_pitch(frame, det, false),
        PitchMode::Corrected => pixel_pitch(frame, det, true),
    }
}

/// Elevation `d · tan γ + h_c` of a detection seen at horizontal distance `d`.
pub fn single_view_height(frame: &CameraFrame, det: &Detection, d: f64, mode: PitchMode) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Validation(format!("camera-to-object distance {d} must be positive")));
    }
    let gamma = object_pitch(frame, det, mode);
    if gamma.abs() >= 90.0 {
        return Err(Error::DegenerateGeometry(format!(
            "object pitch {gamma}° in frame `{}` outside the frustum",
            frame.image_id
        )));
    }
    Ok(d * gamma.to_radians().tan() + frame.camera_height)
}

/// Fills both single-view heights of every node (corrected pitch).
pub fn populate_node_heights(graph: &mut MrfGraph, survey: &Survey) {
    for node in &mut graph.nodes {
        let mut h = [0.0; 2];
        let mut ok = true;
        for (j, &r) in node.rays.iter().enumerate() {
            let det_index = graph.rays[r].detection;
            let frame = survey.frame_of(det_index);
            let det = &survey.detections()[det_index];
            match single_view_height(frame, det, node.tri_dist[j], PitchMode::Corrected) {
                Ok(v) => h[j] = v,
                Err(_) => ok = false,
            }
        }
        node.heights = if ok { NodeHeights::Views(h) } else { NodeHeights::Degenerate };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightEstimate {
    /// (image_id, elevation) per supporting view.
    pub per_view: Vec<(String, f64)>,
    pub mean: f64,
    /// Lower-middle value for even counts.
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl HeightEstimate {
    pub fn aggregate(per_view: Vec<(String, f64)>) -> Result<Self> {
        if per_view.is_empty() {
            return Err(Error::Validation("height aggregation needs at least one view".into()));
        }
        let values: Vec<f64> = per_view.iter().map(|(_, h)| *h).collect();
        let mean = mean(&values);
        let var = values.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / values.len() as f64;
        Ok(Self {
            median: lower_median(&values),
            mean,
            std: var.sqrt(),
            per_view,
        })
    }

    /// Same estimate with every view shifted by `offset` meters.
    pub fn shifted(&self, offset: f64) -> Self {
        let per_view = self.per_view.iter().map(|(id, h)| (id.clone(), h + offset)).collect();
        Self::aggregate(per_view).expect("non-empty by construction")
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median taking the lower of the two middle values for even counts.
pub(crate) fn lower_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CameraHeightCalibration {
    /// Negated mean of per-object mean elevations.
    pub mean_based: f64,
    /// Negated median of per-object median elevations.
    pub median_based: f64,
    pub objects: usize,
}

/// Camera height from objects known to sit at elevation 0 whose heights were
/// estimated with a camera height of 0.
pub fn calibrate_camera_height(ground_objects: &[ObjectInstance]) -> Result<CameraHeightCalibration> {
    if ground_objects.is_empty() {
        return Err(Error::CalibrationUnavailable("no ground-level objects".into()));
    }
    let means: Vec<f64> = ground_objects.iter().map(|o| o.height.mean).collect();
    let medians: Vec<f64> = ground_objects.iter().map(|o| o.height.median).collect();
    Ok(CameraHeightCalibration {
        mean_based: -mean(&means),
        median_based: -lower_median(&medians),
        objects: ground_objects.len(),
    })
}
