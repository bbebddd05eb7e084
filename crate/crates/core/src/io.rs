//! Line-delimited JSON records for frames, detections, ground truth and
//! fused instances, plus GeoJSON export.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::{CameraFrame, Detection, GeoPoint};
use crate::height::HeightEstimate;
use crate::pipeline::ObjectInstance;
use crate::survey::Survey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub image_id: String,
    pub lat: f64,
    pub lon: f64,
    pub heading: f64,
    pub pitch: f64,
    pub fov: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_top: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_bottom: Option<f64>,
    pub camera_height: f64,
}

impl From<&CameraFrame> for FrameRecord {
    fn from(f: &CameraFrame) -> Self {
        Self {
            image_id: f.image_id.clone(),
            lat: f.position.lat,
            lon: f.position.lon,
            heading: f.heading,
            pitch: f.pitch,
            fov: f.fov,
            width: f.width,
            height: f.height,
            fov_top: f.fov_top,
            fov_bottom: f.fov_bottom,
            camera_height: f.camera_height,
        }
    }
}

impl FrameRecord {
    pub fn into_frame(self) -> Result<CameraFrame> {
        let frame = CameraFrame {
            position: GeoPoint::new(self.lat, self.lon)?,
            image_id: self.image_id,
            heading: self.heading,
            pitch: self.pitch,
            fov: self.fov,
            width: self.width,
            height: self.height,
            fov_top: self.fov_top,
            fov_bottom: self.fov_bottom,
            camera_height: self.camera_height,
        };
        frame.validate()?;
        Ok(frame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class: String,
    pub pixel_x: f64,
    pub pixel_y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mono_depth: Option<f64>,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            image_id: d.image_id.clone(),
            class: d.class.clone(),
            pixel_x: d.pixel_x,
            pixel_y: d.pixel_y,
            mono_depth: d.mono_depth,
        }
    }
}

impl From<DetectionRecord> for Detection {
    fn from(r: DetectionRecord) -> Self {
        Self {
            image_id: r.image_id,
            class: r.class,
            pixel_x: r.pixel_x,
            pixel_y: r.pixel_y,
            mono_depth: r.mono_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub class: String,
    pub lat: f64,
    pub lon: f64,
    pub elevation: f64,
}

impl From<&GroundTruth> for TruthRecord {
    fn from(t: &GroundTruth) -> Self {
        Self {
            class: t.class.clone(),
            lat: t.position.lat,
            lon: t.position.lon,
            elevation: t.elevation,
        }
    }
}

impl TruthRecord {
    pub fn into_truth(self) -> Result<GroundTruth> {
        Ok(GroundTruth {
            position: GeoPoint::new(self.lat, self.lon)?,
            class: self.class,
            elevation: self.elevation,
        })
    }
}

/// Exported instance as read back by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub class: String,
    pub lat: f64,
    pub lon: f64,
    pub height_mean: f64,
    pub height_median: f64,
    pub height_std: f64,
    pub view_count: usize,
}

impl InstanceRecord {
    /// Instance carrying the exported summary statistics; per-view heights
    /// are not part of the export.
    pub fn into_instance(self) -> Result<ObjectInstance> {
        Ok(ObjectInstance {
            position: GeoPoint::new(self.lat, self.lon)?,
            class: self.class,
            view_count: self.view_count,
            height: HeightEstimate {
                per_view: Vec::new(),
                mean: self.height_mean,
                median: self.height_median,
                std: self.height_std,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportFormat {
    /// One JSON record per line.
    #[default]
    Jsonl,
    /// GeoJSON FeatureCollection of points.
    GeoJson,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "geojson" => Ok(Self::GeoJson),
            other => Err(format!("unknown export format `{other}` (expected jsonl or geojson)")),
        }
    }
}

/// Opens `path` for reading; `-` means standard input.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|e| with_path(e, path))?;
    Ok(Box::new(BufReader::new(file)))
}

/// Creates `path` for writing; `-` means standard output.
pub fn create_output(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdout()));
    }
    let file = File::create(path).map_err(|e| with_path(e, path))?;
    Ok(Box::new(io::BufWriter::new(file)))
}

fn with_path(e: io::Error, path: &Path) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Parses one record per non-blank line, returning each with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, source_name: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: k + 1,
            message: e.to_string(),
        })?;
        out.push((k + 1, record));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(records: impl IntoIterator<Item = T>, mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_frames<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<CameraFrame>> {
    read_jsonl::<FrameRecord, _>(reader, source_name)?
        .into_iter()
        .map(|(line, r)| {
            r.into_frame().map_err(|e| Error::Parse {
                source_name: source_name.to_string(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_truth<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<GroundTruth>> {
    read_jsonl::<TruthRecord, _>(reader, source_name)?
        .into_iter()
        .map(|(line, r)| {
            r.into_truth().map_err(|e| Error::Parse {
                source_name: source_name.to_string(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Parses both inputs and checks that every detection names a known frame.
pub fn read_survey<F: BufRead, D: BufRead>(frames: F, frames_name: &str, detections: D, detections_name: &str) -> Result<Survey> {
    let frames = read_frames(frames, frames_name)?;
    let records = read_jsonl::<DetectionRecord, _>(detections, detections_name)?;
    let ids: HashSet<&str> = frames.iter().map(|f| f.image_id.as_str()).collect();
    if let Some((line, r)) = records.iter().find(|(_, r)| !ids.contains(r.image_id.as_str())) {
        return Err(Error::DanglingImage {
            image_id: r.image_id.clone(),
            line: *line,
        });
    }
    Survey::new(frames, records.into_iter().map(|(_, r)| r.into()).collect())
}

pub fn load_survey(frames: &Path, detections: &Path) -> Result<Survey> {
    read_survey(
        open_input(frames)?,
        &frames.display().to_string(),
        open_input(detections)?,
        &detections.display().to_string(),
    )
}

pub fn write_frames<W: Write>(frames: &[CameraFrame], out: W) -> io::Result<()> {
    write_jsonl(frames.iter().map(FrameRecord::from), out)
}

pub fn write_detections<W: Write>(detections: &[Detection], out: W) -> io::Result<()> {
    write_jsonl(detections.iter().map(DetectionRecord::from), out)
}

pub fn write_truth<W: Write>(truth: &[GroundTruth], out: W) -> io::Result<()> {
    write_jsonl(truth.iter().map(TruthRecord::from), out)
}

/// Fixed-point formatting without a negative zero.
fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn instance_fields(o: &ObjectInstance) -> String {
    format!(
        "\"class\":{},\"height_mean\":{},\"height_median\":{},\"height_std\":{},\"view_count\":{}",
        json_string(&o.class),
        fixed(o.height.mean, 3),
        fixed(o.height.median, 3),
        fixed(o.height.std, 3),
        o.view_count
    )
}

/// Writes instances with degrees at 9 decimals and meters at 3.
pub fn export_instances<W: Write>(instances: &[ObjectInstance], format: ExportFormat, mut out: W) -> io::Result<()> {
    let mut s = String::new();
    match format {
        ExportFormat::Jsonl => {
            for o in instances {
                let _ = writeln!(
                    s,
                    "{{\"lat\":{},\"lon\":{},{}}}",
                    fixed(o.position.lat, 9),
                    fixed(o.position.lon, 9),
                    instance_fields(o)
                );
            }
        }
        ExportFormat::GeoJson => {
            s.push_str("{\"type\":\"FeatureCollection\",\"features\":[");
            for (k, o) in instances.iter().enumerate() {
                s.push_str(if k == 0 { "\n" } else { ",\n" });
                let _ = write!(
                    s,
                    "{{\"type\":\"Feature\",\"geometry\":{{\"type\":\"Point\",\"coordinates\":[{},{}]}},\"properties\":{{{}}}}}",
                    fixed(o.position.lon, 9),
                    fixed(o.position.lat, 9),
                    instance_fields(o)
                );
            }
            s.push_str(if instances.is_empty() { "]}\n" } else { "\n]}\n" });
        }
    }
    out.write_all(s.as_bytes())?;
    out.flush()
}

/// Reads instances written by [`export_instances`] in either format.
pub fn read_instances<R: Read>(mut reader: R, source_name: &str) -> Result<Vec<ObjectInstance>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    if let Ok(Value::Object(root)) = serde_json::from_str::<Value>(&text) {
        if root.get("type").and_then(Value::as_str) == Some("FeatureCollection") {
            let features = root
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| parse_err(1, "FeatureCollection without features".into()))?;
            return features
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let fail = |m: &str| parse_err(1, format!("feature {k}: {m}"));
                    let coords = f
                        .pointer("/geometry/coordinates")
                        .and_then(Value::as_array)
                        .filter(|c| c.len() >= 2)
                        .ok_or_else(|| fail("missing point coordinates"))?;
                    let mut props = f
                        .get("properties")
                        .and_then(Value::as_object)
                        .cloned()
                        .ok_or_else(|| fail("missing properties"))?;
                    props.insert("lon".into(), coords[0].clone());
                    props.insert("lat".into(), coords[1].clone());
                    let record: InstanceRecord =
                        serde_json::from_value(Value::Object(props)).map_err(|e| fail(&e.to_string()))?;
                    record.into_instance().map_err(|e| fail(&e.to_string()))
                })
                .collect();
        }
    }
    read_jsonl::<InstanceRecord, _>(text.as_bytes(), source_name)?
        .into_iter()
        .map(|(line, r)| r.into_instance().map_err(|e| parse_err(line, e.to_string())))
        .collect()
}
