//! Pinhole ray construction, depth unprojection and first-hit mesh ray casting.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{CameraIntrinsics, DepthScene, Placement2D, Placement3D};

/// Intersections closer than this to the ray origin are ignored.
pub const MIN_HIT_DISTANCE: f64 = 1e-6;

/// Search radius in pixels used when the queried depth pixel is missing.
pub const DEPTH_SEARCH_RADIUS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("ray direction must be finite and non-zero")]
    ZeroDirection,
    #[error("pixel ({x}, {y}) is outside the {width}x{height} scene")]
    OutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("no valid depth within {radius} px of ({x}, {y})")]
    NoDepth { x: u32, y: u32, radius: u32 },
    #[error("ray does not intersect the mesh")]
    Miss,
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertices} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertices: usize,
    },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn length(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl From<Vec3> for Placement3D {
    fn from(v: Vec3) -> Self {
        Placement3D { x: v.x, y: v.y, z: v.z }
    }
}

/// A ray with a unit-length direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        let len = direction.length();
        if !(origin.is_finite() && direction.is_finite()) || len == 0.0 || !len.is_finite() {
            return Err(GeometryError::ZeroDirection);
        }
        Ok(Self {
            origin,
            direction: direction * (1.0 / len),
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= vertices.len()) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle: t,
                    index,
                    vertices: vertices.len(),
                });
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            if (b - a).cross(c - a).length() == 0.0 {
                return Err(GeometryError::DegenerateTriangle(t));
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, index: usize) -> [Vec3; 3] {
        self.triangles[index].map(|i| self.vertices[i])
    }
}

/// Result of a mesh ray cast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshHit {
    pub triangle: usize,
    pub t: f64,
    pub point: Vec3,
}

/// Camera-centred ray through pixel `(x, y)`.
pub fn pixel_ray(intr: &CameraIntrinsics, x: f64, y: f64) -> Ray {
    let dir = Vec3::new((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0);
    // z = 1 keeps the direction non-zero for any finite pixel
    Ray::new(Vec3::ZERO, dir).expect("pinhole direction has z = 1")
}

/// Watertight ray/triangle intersection (Woop, Benthin and Wald).
///
/// Returns the ray parameter of the hit, which is a distance because the
/// direction is unit length. Edges shared by two triangles never let a ray
/// slip through.
pub fn intersect_triangle(ray: &Ray, tri: [Vec3; 3]) -> Option<f64> {
    let dir = ray.direction;
    let abs = [dir.x.abs(), dir.y.abs(), dir.z.abs()];
    let kz = if abs[0] > abs[1] {
        if abs[0] > abs[2] { 0 } else { 2 }
    } else if abs[1] > abs[2] {
        1
    } else {
        2
    };
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir.axis(kz) < 0.0 {
        core::mem::swap(&mut kx, &mut ky);
    }

    let sz = 1.0 / dir.axis(kz);
    let sx = dir.axis(kx) * sz;
    let sy = dir.axis(ky) * sz;

    let a = tri[0] - ray.origin;
    let b = tri[1] - ray.origin;
    let c = tri[2] - ray.origin;

    let ax = a.axis(kx) - sx * a.axis(kz);
    let ay = a.axis(ky) - sy * a.axis(kz);
    let bx = b.axis(kx) - sx * b.axis(kz);
    let by = b.axis(ky) - sy * b.axis(kz);
    let cx = c.axis(kx) - sx * c.axis(kz);
    let cy = c.axis(ky) - sy * c.axis(kz);

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;

    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }

    let az = sz * a.axis(kz);
    let bz = sz * b.axis(kz);
    let cz = sz * c.axis(kz);
    let t = (u * az + v * bz + w * cz) / det;
    t.is_finite().then_some(t)
}

/// First intersection of `ray` with `mesh` beyond [`MIN_HIT_DISTANCE`].
///
/// Exact ties in `t` go to the lowest triangle index.
pub fn first_hit(mesh: &TriangleMesh, ray: &Ray) -> Option<MeshHit> {
    let mut best: Option<(usize, f64)> = None;
    for index in 0..mesh.triangles.len() {
        let Some(t) = intersect_triangle(ray, mesh.triangle(index)) else {
            continue;
        };
        if t > MIN_HIT_DISTANCE && best.is_none_or(|(_, bt)| t < bt) {
            best = Some((index, t));
        }
    }
    best.map(|(triangle, t)| MeshHit {
        triangle,
        t,
        point: ray.at(t),
    })
}

pub fn raycast_mesh(mesh: &TriangleMesh, ray: &Ray) -> Result<Placement3D, GeometryError> {
    first_hit(mesh, ray)
        .map(|hit| hit.point.into())
        .ok_or(GeometryError::Miss)
}

/// Pixel offsets within `radius`, nearest first, ties in row-major order.
fn search_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut offsets: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    offsets
}

/// Unprojects pixel `(x, y)` with its depth.
///
/// A missing (zero) depth is replaced by the nearest pixel with valid depth
/// within [`DEPTH_SEARCH_RADIUS`], and that pixel is unprojected instead.
pub fn raycast_depth(scene: &DepthScene, x: u32, y: u32) -> Result<Placement3D, GeometryError> {
    let (width, height) = (scene.width(), scene.height());
    if x >= width || y >= height {
        return Err(GeometryError::OutOfBounds { x, y, width, height });
    }
    let intr = scene.intrinsics();
    for (dx, dy) in search_offsets(DEPTH_SEARCH_RADIUS) {
        let (px, py) = (x as i64 + dx, y as i64 + dy);
        if px < 0 || py < 0 || px >= width as i64 || py >= height as i64 {
            continue;
        }
        let (px, py) = (px as u32, py as u32);
        let z = scene.depth_at(px, py).unwrap_or(0.0);
        if z > 0.0 {
            return Ok(Placement3D {
                x: (px as f64 - intr.cx) * z / intr.fx,
                y: (py as f64 - intr.cy) * z / intr.fy,
                z,
            });
        }
    }
    Err(GeometryError::NoDepth {
        x,
        y,
        radius: DEPTH_SEARCH_RADIUS,
    })
}

/// What a 2D placement is lifted into.
#[derive(Debug, Clone, Copy)]
pub enum SceneModel<'a> {
    Depth(&'a DepthScene),
    Mesh {
        mesh: &'a TriangleMesh,
        intrinsics: &'a CameraIntrinsics,
    },
}

pub fn place3d(scene: SceneModel<'_>, placement: &Placement2D) -> Result<Placement3D, GeometryError> {
    match scene {
        SceneModel::Depth(depth) => raycast_depth(depth, placement.x, placement.y),
        SceneModel::Mesh { mesh, intrinsics } => {
            let ray = pixel_ray(intrinsics, placement.x as f64, placement.y as f64);
            raycast_mesh(mesh, &ray)
        }
    }
}
