//! Geodesic and camera-projection primitives.
//!
//! Positions are latitude/longitude in degrees on a spherical Earth. Ray
//! intersection is decided in a local equirectangular chart anchored at the
//! midpoint of the two ray origins; the accepted intersection is then snapped
//! onto the exact great-circle crossing so that geodesic bearings from both
//! origins agree with the ray bearings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Two rays whose directions differ by less than this are treated as parallel.
pub const PARALLEL_TOLERANCE_RAD: f64 = 1e-9;

/// Intersections closer than this to either origin are rejected.
const MIN_FORWARD_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Validation(format!("latitude {lat} outside [-90, 90]")));
        }
        if !lon.is_finite() || !(-180.0..180.0).contains(&lon) {
            return Err(Error::Validation(format!("longitude {lon} outside [-180, 180)")));
        }
        Ok(Self { lat, lon })
    }

    /// Builds a point from computed coordinates, wrapping longitude into range.
    pub(crate) fn wrapped(lat: f64, lon: f64) -> Self {
        Self {
            lat: lat.clamp(-90.0, 90.0),
            lon: wrap_longitude(lon),
        }
    }

    fn to_unit(self) -> [f64; 3] {
        let (phi, lam) = (self.lat.to_radians(), self.lon.to_radians());
        [phi.cos() * lam.cos(), phi.cos() * lam.sin(), phi.sin()]
    }

    fn from_unit(v: [f64; 3]) -> Self {
        let lat = v[2].atan2(v[0].hypot(v[1])).to_degrees();
        let lon = v[1].atan2(v[0]).to_degrees();
        Self::wrapped(lat, lon)
    }
}

/// Wraps a longitude (or longitude difference) into [-180, 180).
pub fn wrap_longitude(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Normalizes a compass bearing into [0, 360).
pub fn normalize_bearing(deg: f64) -> f64 {
    let b = deg.rem_euclid(360.0);
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Great-circle distance in meters (haversine formula).
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlam = wrap_longitude(b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlam / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Initial great-circle bearing from `from` to `to`, degrees clockwise from north.
pub fn initial_bearing(from: GeoPoint, to: GeoPoint) -> f64 {
    let (phi1, phi2) = (from.lat.to_radians(), to.lat.to_radians());
    let dlam = wrap_longitude(to.lon - from.lon).to_radians();
    let y = dlam.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlam.cos();
    normalize_bearing(y.atan2(x).to_degrees())
}

/// Point reached by travelling `distance` meters from `from` along the
/// great circle with initial bearing `bearing`.
pub fn destination(from: GeoPoint, bearing: f64, distance: f64) -> GeoPoint {
    let delta = distance / EARTH_RADIUS_M;
    let theta = bearing.to_radians();
    let phi1 = from.lat.to_radians();
    let lam1 = from.lon.to_radians();
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lam2 = lam1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    GeoPoint::wrapped(phi2.to_degrees(), lam2.to_degrees())
}

/// Equirectangular tangent-plane chart: east/north meters about an anchor.
#[derive(Debug, Clone, Copy)]
pub struct LocalChart {
    anchor: GeoPoint,
    cos_lat: f64,
}

impl LocalChart {
    pub fn new(anchor: GeoPoint) -> Self {
        Self {
            anchor,
            cos_lat: anchor.lat.to_radians().cos(),
        }
    }

    /// Chart anchored at the midpoint of two points.
    pub fn midpoint(a: GeoPoint, b: GeoPoint) -> Self {
        let lat = 0.5 * (a.lat + b.lat);
        let lon = a.lon + 0.5 * wrap_longitude(b.lon - a.lon);
        Self::new(GeoPoint::wrapped(lat, lon))
    }

    pub fn anchor(&self) -> GeoPoint {
        self.anchor
    }

    /// (east, north) in meters.
    pub fn project(&self, p: GeoPoint) -> [f64; 2] {
        let east = EARTH_RADIUS_M * wrap_longitude(p.lon - self.anchor.lon).to_radians() * self.cos_lat;
        let north = EARTH_RADIUS_M * (p.lat - self.anchor.lat).to_radians();
        [east, north]
    }

    pub fn unproject(&self, xy: [f64; 2]) -> GeoPoint {
        let lat = self.anchor.lat + (xy[1] / EARTH_RADIUS_M).to_degrees();
        let lon = self.anchor.lon + (xy[0] / (EARTH_RADIUS_M * self.cos_lat)).to_degrees();
        GeoPoint::wrapped(lat, lon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub image_id: String,
    pub position: GeoPoint,
    /// Degrees clockwise from north.
    pub heading: f64,
    /// Camera pitch in degrees, subtracted from the pixel-derived angle.
    pub pitch: f64,
    /// Field of view in degrees, shared by both image axes.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
    pub fov_top: Option<f64>,
    pub fov_bottom: Option<f64>,
    /// Camera elevation above reference ground, meters.
    pub camera_height: f64,
}

impl CameraFrame {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(format!("frame `{}`: {msg}", self.image_id)));
        if !(self.fov.is_finite() && self.fov > 0.0 && self.fov < 180.0) {
            return fail(format!("fov {} outside (0, 180)", self.fov));
        }
        if self.width == 0 || self.height == 0 {
            return fail("image dimensions must be at least 1".into());
        }
        if !self.heading.is_finite() || !self.pitch.is_finite() || !self.camera_height.is_finite() {
            return fail("heading, pitch and camera_height must be finite".into());
        }
        for v in [self.fov_top, self.fov_bottom].into_iter().flatten() {
            if !v.is_finite() {
                return fail("fov_top/fov_bottom must be finite".into());
            }
        }
        Ok(())
    }

    /// Lens offset δ = (φ_t − φ_b)/2, zero when either half-extent is missing.
    pub fn lens_offset(&self) -> f64 {
        match (self.fov_top, self.fov_bottom) {
            (Some(top), Some(bottom)) => 0.5 * (top - bottom),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class: String,
    pub pixel_x: f64,
    pub pixel_y: f64,
    /// Monocular depth estimate in meters.
    pub mono_depth: Option<f64>,
}

impl Detection {
    pub fn validate_against(&self, frame: &CameraFrame) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(format!("detection in `{}`: {msg}", self.image_id)));
        if !(self.pixel_x >= 0.0 && self.pixel_x < f64::from(frame.width)) {
            return fail(format!("pixel_x {} outside [0, {})", self.pixel_x, frame.width));
        }
        if !(self.pixel_y >= 0.0 && self.pixel_y < f64::from(frame.height)) {
            return fail(format!("pixel_y {} outside [0, {})", self.pixel_y, frame.height));
        }
        if let Some(depth) = self.mono_depth {
            if !(depth.is_finite() && depth > 0.0) {
                return fail(format!("mono_depth {depth} must be positive"));
            }
        }
        Ok(())
    }
}

/// Half-line from a camera position toward a detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: GeoPoint,
    /// Degrees clockwise from north, in [0, 360).
    pub bearing: f64,
    /// Index of the source frame in the survey.
    pub frame: usize,
    /// Index of the source detection in the survey.
    pub detection: usize,
}

/// Compass bearing toward a detection, mapping pixel columns linearly onto
/// the horizontal field of view.
pub fn detection_bearing(frame: &CameraFrame, det: &Detection) -> f64 {
    let half_w = 0.5 * f64::from(frame.width);
    normalize_bearing(frame.heading + (det.pixel_x - half_w) / half_w * (0.5 * frame.fov))
}

/// Vertical angle of a detection in degrees, positive upward.
///
/// `corrected` adds the lens offset δ of the frame.
pub fn pixel_pitch(frame: &CameraFrame, det: &Detection, corrected: bool) -> f64 {
    let half_h = 0.5 * f64::from(frame.height);
    let raw = (half_h - det.pixel_y) / half_h * (0.5 * frame.fov) - frame.pitch;
    if corrected {
        raw + frame.lens_offset()
    } else {
        raw
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Normal of the great circle leaving `origin` with `bearing`.
fn great_circle_normal(origin: GeoPoint, bearing: f64) -> [f64; 3] {
    let (phi, lam) = (origin.lat.to_radians(), origin.lon.to_radians());
    let theta = bearing.to_radians();
    let east = [-lam.sin(), lam.cos(), 0.0];
    let north = [-phi.sin() * lam.cos(), -phi.sin() * lam.sin(), phi.cos()];
    let dir = [
        theta.cos() * north[0] + theta.sin() * east[0],
        theta.cos() * north[1] + theta.sin() * east[1],
        theta.cos() * north[2] + theta.sin() * east[2],
    ];
    cross(origin.to_unit(), dir)
}

/// Forward intersection of two rays, or `None` when they are parallel or
/// meet behind either origin.
pub fn intersect_rays(r1: &Ray, r2: &Ray) -> Option<GeoPoint> {
    let chart = LocalChart::midpoint(r1.origin, r2.origin);
    let o1 = chart.project(r1.origin);
    let o2 = chart.project(r2.origin);
    let (t1r, t2r) = (r1.bearing.to_radians(), r2.bearing.to_radians());
    let d1 = [t1r.sin(), t1r.cos()];
    let d2 = [t2r.sin(), t2r.cos()];
    let denom = d1[0] * d2[1] - d1[1] * d2[0];
    if denom.abs() < PARALLEL_TOLERANCE_RAD.sin() {
        return None;
    }
    let w = [o2[0] - o1[0], o2[1] - o1[1]];
    let t1 = (w[0] * d2[1] - w[1] * d2[0]) / denom;
    let t2 = (w[0] * d1[1] - w[1] * d1[0]) / denom;
    if !(t1 > MIN_FORWARD_M && t2 > MIN_FORWARD_M) {
        return None;
    }
    let planar = chart.unproject([o1[0] + t1 * d1[0], o1[1] + t1 * d1[1]]);

    let axis = cross(
        great_circle_normal(r1.origin, r1.bearing),
        great_circle_normal(r2.origin, r2.bearing),
    );
    let len = norm(axis);
    if len < PARALLEL_TOLERANCE_RAD {
        return Some(planar);
    }
    let mut x = [axis[0] / len, axis[1] / len, axis[2] / len];
    if dot(x, planar.to_unit()) < 0.0 {
        x = [-x[0], -x[1], -x[2]];
    }
    Some(GeoPoint::from_unit(x))
}
