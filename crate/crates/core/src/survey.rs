//! Validated collection of camera frames and the detections made in them.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::geometry::{detection_bearing, CameraFrame, Detection, Ray};

#[derive(Debug, Clone, Default)]
pub struct Survey {
    frames: Vec<CameraFrame>,
    detections: Vec<Detection>,
    /// Frame index of every detection.
    det_frame: Vec<usize>,
}

impl Survey {
    /// Validates every record and the detection → frame references.
    pub fn new(frames: Vec<CameraFrame>, detections: Vec<Detection>) -> Result<Self> {
        let mut index = HashMap::with_capacity(frames.len());
        for (i, f) in frames.iter().enumerate() {
            f.validate()?;
            if index.insert(f.image_id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate image_id `{}`", f.image_id)));
            }
        }
        let mut det_frame = Vec::with_capacity(detections.len());
        for (line, d) in detections.iter().enumerate() {
            let &fi = index.get(&d.image_id).ok_or_else(|| Error::DanglingImage {
                image_id: d.image_id.clone(),
                line: line + 1,
            })?;
            d.validate_against(&frames[fi])?;
            det_frame.push(fi);
        }
        Ok(Self { frames, detections, det_frame })
    }

    pub fn frames(&self) -> &[CameraFrame] {
        &self.frames
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn frame_of(&self, detection: usize) -> &CameraFrame {
        &self.frames[self.det_frame[detection]]
    }

    /// Sorted distinct class labels.
    pub fn classes(&self) -> Vec<String> {
        self.detections
            .iter()
            .map(|d| d.class.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// One ray per detection of `class`, in detection order.
    pub fn rays_for_class(&self, class: &str) -> Vec<Ray> {
        self.detections
            .iter()
            .enumerate()
            .filter(|(_, d)| d.class == class)
            .map(|(i, d)| {
                let fi = self.det_frame[i];
                let frame = &self.frames[fi];
                Ray {
                    origin: frame.position,
                    bearing: detection_bearing(frame, d),
                    frame: fi,
                    detection: i,
                }
            })
            .collect()
    }

    /// Same survey with every frame's camera height replaced by `camera_height`.
    pub fn with_camera_height(&self, camera_height: f64) -> Self {
        let mut out = self.clone();
        for f in &mut out.frames {
            f.camera_height = camera_height;
        }
        out
    }

    /// Same survey with one detection class removed.
    pub fn without_class(&self, class: &str) -> Self {
        let keep: Vec<usize> = (0..self.detections.len())
            .filter(|&i| self.detections[i].class != class)
            .collect();
        Self {
            frames: self.frames.clone(),
            detections: keep.iter().map(|&i| self.detections[i].clone()).collect(),
            det_frame: keep.iter().map(|&i| self.det_frame[i]).collect(),
        }
    }
}
