//! Oriented 3D boxes, ego poses, and rotated-box overlap.
//!
//! Internal frame convention: right-handed, z up, yaw measured about +z
//! from +x. A box's `center` is the centroid of the cuboid, so its vertical
//! extent is `center.z ± h/2`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Point-on-line tolerance used while clipping, in meters.
pub const CLIP_EPSILON: f64 = 1e-9;

/// Tolerance on `‖RᵀR − I‖` and `|det R − 1|` when validating poses.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Largest tilt of the vertical axis, in radians, accepted by [`transform_box`].
pub const PLANAR_TILT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("pose tilts the vertical axis by {tilt:.3e} rad (limit {PLANAR_TILT_TOLERANCE:e})")]
    NonPlanarPose { tilt: f64 },
}

/// Wraps an angle into `(−π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped -= 2.0 * PI;
    }
    // rem_euclid can land exactly on -π after the shift for inputs like 3π
    if wrapped <= -PI {
        wrapped += 2.0 * PI;
    }
    wrapped
}

/// Signed shortest angular difference `to − from`, in `(−π, π]`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    normalize_angle(to - from)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Box size in meters: height (z), width (lateral), length (along heading).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub h: f64,
    pub w: f64,
    pub l: f64,
}

impl Dims {
    pub const fn new(h: f64, w: f64, l: f64) -> Self {
        Self { h, w, l }
    }
}

/// A 7-parameter cuboid: centroid, size and heading about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3D {
    pub center: Vec3,
    pub dims: Dims,
    pub yaw: f64,
}

impl OrientedBox3D {
    /// Builds a validated box; `yaw` is normalized into `(−π, π]`.
    pub fn new(center: Vec3, dims: Dims, yaw: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::InvalidBox(format!("non-finite center {center:?}")));
        }
        let Dims { h, w, l } = dims;
        if !(h.is_finite() && w.is_finite() && l.is_finite()) || h <= 0.0 || w <= 0.0 || l <= 0.0 {
            return Err(GeometryError::InvalidBox(format!(
                "dimensions must be finite and positive, got h={h} w={w} l={l}"
            )));
        }
        if !yaw.is_finite() {
            return Err(GeometryError::InvalidBox(format!("non-finite yaw {yaw}")));
        }
        Ok(Self { center, dims, yaw: normalize_angle(yaw) })
    }

    /// `[x, y, z, h, w, l, yaw]`, the serialized parameter order.
    pub fn to_params(&self) -> [f64; 7] {
        [
            self.center.x,
            self.center.y,
            self.center.z,
            self.dims.h,
            self.dims.w,
            self.dims.l,
            self.yaw,
        ]
    }

    pub fn from_params(p: [f64; 7]) -> Result<Self, GeometryError> {
        Self::new(Vec3::new(p[0], p[1], p[2]), Dims::new(p[3], p[4], p[5]), p[6])
    }

    pub fn volume(&self) -> f64 {
        self.dims.h * self.dims.w * self.dims.l
    }

    pub fn bottom(&self) -> f64 {
        self.center.z - 0.5 * self.dims.h
    }

    pub fn top(&self) -> f64 {
        self.center.z + 0.5 * self.dims.h
    }

    /// Radius of the footprint's circumscribed circle.
    fn footprint_radius(&self) -> f64 {
        0.5 * self.dims.l.hypot(self.dims.w)
    }

    /// Point-in-box test, used by sampling oracles.
    pub fn contains(&self, p: Vec3) -> bool {
        if p.z < self.bottom() || p.z > self.top() {
            return false;
        }
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let along = c * dx + s * dy;
        let across = -s * dx + c * dy;
        along.abs() <= 0.5 * self.dims.l && across.abs() <= 0.5 * self.dims.w
    }
}

/// Rigid sensor-to-world transform at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoPose {
    rotation: [[f64; 3]; 3],
    translation: Vec3,
}

impl EgoPose {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: Vec3::ZERO,
        }
    }

    pub fn new(rotation: [[f64; 3]; 3], translation: Vec3) -> Result<Self, GeometryError> {
        if !translation.is_finite() || rotation.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPose("non-finite entries".into()));
        }
        let mut err = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                err += (dot - target).powi(2);
            }
        }
        let err = err.sqrt();
        if err > ROTATION_TOLERANCE {
            return Err(GeometryError::InvalidPose(format!(
                "rotation is not orthonormal (‖RᵀR − I‖ = {err:.3e})"
            )));
        }
        let det = det3(&rotation);
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::InvalidPose(format!("rotation determinant is {det}")));
        }
        Ok(Self { rotation, translation })
    }

    /// Planar pose: rotation `yaw` about +z followed by `translation`.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation,
        }
    }

    /// Parses 12 numbers laid out row-major as `[R | t]`.
    pub fn from_row_major(m: [f64; 12]) -> Result<Self, GeometryError> {
        let rotation = [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]];
        Self::new(rotation, Vec3::new(m[3], m[7], m[11]))
    }

    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0], r[0][1], r[0][2], t.x, r[1][0], r[1][1], r[1][2], t.y, r[2][0], r[2][1],
            r[2][2], t.z,
        ]
    }

    pub fn rotation(&self) -> &[[f64; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotate(p) + self.translation
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &EgoPose) -> EgoPose {
        let a = &self.rotation;
        let b = &other.rotation;
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        EgoPose { rotation, translation: self.apply(other.translation) }
    }

    pub fn inverse(&self) -> EgoPose {
        let r = &self.rotation;
        let rotation = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let inv = EgoPose { rotation, translation: Vec3::ZERO };
        let t = inv.rotate(self.translation);
        EgoPose { rotation, translation: -t }
    }

    /// Angle between the rotated and original vertical axes.
    pub fn tilt(&self) -> f64 {
        let r = &self.rotation;
        r[0][2].hypot(r[1][2]).atan2(r[2][2])
    }

    /// Heading change induced by the rotation about +z.
    pub fn yaw(&self) -> f64 {
        self.rotation[1][0].atan2(self.rotation[0][0])
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Moves a box through a planar rigid transform.
///
/// Rejects poses whose rotation tilts the vertical axis by more than
/// [`PLANAR_TILT_TOLERANCE`], since a yaw-only box cannot represent the result.
pub fn transform_box(pose: &EgoPose, b: &OrientedBox3D) -> Result<OrientedBox3D, GeometryError> {
    let tilt = pose.tilt();
    if tilt > PLANAR_TILT_TOLERANCE {
        return Err(GeometryError::NonPlanarPose { tilt });
    }
    Ok(OrientedBox3D {
        center: pose.apply(b.center),
        dims: b.dims,
        yaw: normalize_angle(b.yaw + pose.yaw()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Convex polygon with counterclockwise vertices. Empty means no area.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon2D {
    pub vertices: Vec<Point2>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Shoelace signed area; positive for counterclockwise order.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }
}

fn shoelace(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let q = pts[(i + 1) % pts.len()];
        twice += p.x * q.y - q.x * p.y;
    }
    0.5 * twice
}

/// Footprint of a box in the x–y plane: length along the heading, width across it.
pub fn box_to_bev_polygon(b: &OrientedBox3D) -> Polygon2D {
    let (s, c) = b.yaw.sin_cos();
    let hl = 0.5 * b.dims.l;
    let hw = 0.5 * b.dims.w;
    let corners = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
    Polygon2D::new(
        corners
            .iter()
            .map(|&(a, d)| Point2::new(b.center.x + c * a - s * d, b.center.y + s * a + c * d))
            .collect(),
    )
}

/// Area of the intersection of two convex counterclockwise polygons.
///
/// Clips `a` against every edge of `b` (Sutherland–Hodgman), then takes the
/// shoelace area. Touching polygons yield zero.
pub fn convex_intersection_area(a: &Polygon2D, b: &Polygon2D) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut current = a.vertices.clone();
    let mut next = Vec::with_capacity(current.len() + b.vertices.len());
    let n = b.vertices.len();
    for i in 0..n {
        let p = b.vertices[i];
        let q = b.vertices[(i + 1) % n];
        clip_against_edge(&current, p, q, &mut next);
        std::mem::swap(&mut current, &mut next);
        if current.len() < 3 {
            return 0.0;
        }
    }
    let area = shoelace(&current).max(0.0);
    area.min(a.area()).min(b.area())
}

/// Keeps the part of `poly` to the left of the directed line `p → q`.
fn clip_against_edge(poly: &[Point2], p: Point2, q: Point2, out: &mut Vec<Point2>) {
    out.clear();
    let ex = q.x - p.x;
    let ey = q.y - p.y;
    let len = ex.hypot(ey);
    if len == 0.0 {
        out.extend_from_slice(poly);
        return;
    }
    // signed distance to the line, positive on the inside (left)
    let dist = |v: &Point2| (ex * (v.y - p.y) - ey * (v.x - p.x)) / len;

    let mut prev = poly[poly.len() - 1];
    let mut prev_d = dist(&prev);
    for &cur in poly {
        let cur_d = dist(&cur);
        let cur_in = cur_d >= -CLIP_EPSILON;
        let prev_in = prev_d >= -CLIP_EPSILON;
        if cur_in != prev_in {
            let t = prev_d / (prev_d - cur_d);
            out.push(Point2::new(prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)));
        }
        if cur_in {
            out.push(cur);
        }
        prev = cur;
        prev_d = cur_d;
    }
}

/// Total order on boxes by the bit patterns of their parameters.
fn canonical_order(a: &OrientedBox3D, b: &OrientedBox3D) -> std::cmp::Ordering {
    let pa = a.to_params();
    let pb = b.to_params();
    pa.iter()
        .zip(pb.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Volumetric IoU of two yaw-only boxes: BEV polygon overlap times the
/// vertical interval overlap, over the union volume.
///
/// Arguments are put in a canonical order before clipping, so the result is
/// bit-for-bit symmetric.
pub fn iou_3d(a: &OrientedBox3D, b: &OrientedBox3D) -> f64 {
    let (a, b) = match canonical_order(a, b) {
        std::cmp::Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let vertical = (a.top().min(b.top()) - a.bottom().max(b.bottom())).max(0.0);
    if vertical <= 0.0 {
        return 0.0;
    }
    let reach = a.footprint_radius() + b.footprint_radius();
    let dx = a.center.x - b.center.x;
    let dy = a.center.y - b.center.y;
    if dx * dx + dy * dy >= reach * reach {
        return 0.0;
    }
    let bev = convex_intersection_area(&box_to_bev_polygon(a), &box_to_bev_polygon(b));
    let inter = bev * vertical;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}
