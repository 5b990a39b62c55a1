//! Synthetic objects resting on the ground plane z = 0, sampled with exact
//! outward normals.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GroundPlane, PointCloud, RigidTransform};
use crate::hand::HandState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Sphere,
    Box,
    Cylinder,
    Kettle,
    Plate,
    Blob,
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sphere" => Self::Sphere,
            "box" => Self::Box,
            "cylinder" => Self::Cylinder,
            "kettle" => Self::Kettle,
            "plate" => Self::Plate,
            "blob" => Self::Blob,
            _ => return Err(Error::Config(format!("unknown shape '{s}'"))),
        })
    }
}

impl std::fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Sphere => "sphere",
            Self::Box => "box",
            Self::Cylinder => "cylinder",
            Self::Kettle => "kettle",
            Self::Plate => "plate",
            Self::Blob => "blob",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub shape: ShapeKind,
    /// Characteristic size: sphere/cylinder/plate radius, half width of the box (m).
    pub size: f64,
    /// Points per square meter.
    pub density: f64,
    /// Standard deviation of isotropic Gaussian position noise (m).
    pub noise: f64,
    /// Keep only points facing this viewpoint.
    pub viewpoint: Option<[f64; 3]>,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(shape: ShapeKind) -> Self {
        let size = match shape {
            ShapeKind::Sphere => 0.05,
            ShapeKind::Box => 0.04,
            ShapeKind::Cylinder => 0.035,
            ShapeKind::Kettle => 0.06,
            ShapeKind::Plate => 0.09,
            ShapeKind::Blob => 0.045,
        };
        Self {
            shape,
            size,
            density: 40_000.0,
            noise: 0.0,
            viewpoint: None,
            seed: 0,
        }
    }
}

struct Builder {
    points: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
    density: f64,
}

impl Builder {
    fn push(&mut self, p: Vector3<f64>, n: Vector3<f64>) {
        self.points.push(p);
        self.normals.push(n.normalize());
    }

    fn count(&self, area: f64) -> usize {
        ((area * self.density).round() as usize).max(1)
    }

    /// Fibonacci lattice on a sphere; `keep` filters by outward normal.
    fn sphere(&mut self, c: Vector3<f64>, r: f64, keep: impl Fn(&Vector3<f64>, &Vector3<f64>) -> bool) {
        let n = self.count(4.0 * PI * r * r);
        let golden = PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let dir = Vector3::new(rho * phi.cos(), rho * phi.sin(), z);
            let p = c + dir * r;
            if keep(&p, &dir) {
                self.push(p, dir);
            }
        }
    }

    /// Rectangle `origin + s u + t v`, `s, t in [0, 1]`, with fixed normal.
    fn rect(&mut self, origin: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64>, n: Vector3<f64>) {
        let spacing = 1.0 / self.density.sqrt();
        let nu = ((u.norm() / spacing).round() as usize).max(1);
        let nv = ((v.norm() / spacing).round() as usize).max(1);
        for a in 0..nu {
            for b in 0..nv {
                let p = origin + u * ((a as f64 + 0.5) / nu as f64) + v * ((b as f64 + 0.5) / nv as f64);
                self.push(p, n);
            }
        }
    }

    /// Lateral surface of a z-aligned cylinder; `inward` flips the normals.
    fn tube(&mut self, c: Vector3<f64>, r: f64, z0: f64, z1: f64, inward: bool) {
        let spacing = 1.0 / self.density.sqrt();
        let na = ((2.0 * PI * r / spacing).round() as usize).max(3);
        let nz = (((z1 - z0) / spacing).round() as usize).max(1);
        for a in 0..na {
            let th = 2.0 * PI * (a as f64 + 0.5) / na as f64;
            let dir = Vector3::new(th.cos(), th.sin(), 0.0);
            for b in 0..nz {
                let z = z0 + (z1 - z0) * (b as f64 + 0.5) / nz as f64;
                let p = c + dir * r + Vector3::new(0.0, 0.0, z);
                self.push(p, if inward { -dir } else { dir });
            }
        }
    }

    /// Flat annulus `r0 <= |x - c| <= r1` at height `z` with normal `n`.
    fn annulus(&mut self, c: Vector3<f64>, r0: f64, r1: f64, z: f64, n: Vector3<f64>) {
        let spacing = 1.0 / self.density.sqrt();
        let nr = (((r1 - r0) / spacing).round() as usize).max(1);
        for k in 0..nr {
            let r = r0 + (r1 - r0) * (k as f64 + 0.5) / nr as f64;
            let na = ((2.0 * PI * r / spacing).round() as usize).max(3);
            for a in 0..na {
                let th = 2.0 * PI * (a as f64 + 0.5) / na as f64 + k as f64 * 0.37;
                self.push(c + Vector3::new(r * th.cos(), r * th.sin(), z), n);
            }
        }
    }
}

/// Centers and radii of the spheres forming the blob shape.
pub fn blob_spheres(size: f64) -> Vec<(Vector3<f64>, f64)> {
    vec![
        (Vector3::new(0.0, 0.0, size), size),
        (Vector3::new(0.8 * size, 0.2 * size, 0.75 * size), 0.7 * size),
        (Vector3::new(-0.5 * size, -0.6 * size, 0.7 * size), 0.65 * size),
        (Vector3::new(0.1 * size, 0.3 * size, 1.75 * size), 0.55 * size),
    ]
}

/// Dimensions of the kettle: body radius `size`, height `1.4 size`, and a
/// side handle loop in the xz-plane at +x.
pub struct KettleDims {
    pub body_radius: f64,
    pub body_height: f64,
    /// Handle bar: vertical segment at x = bar_x between bar_z0 and bar_z1.
    pub bar_x: f64,
    pub bar_z0: f64,
    pub bar_z1: f64,
    pub bar_radius: f64,
}

impl KettleDims {
    pub fn new(size: f64) -> Self {
        Self {
            body_radius: size,
            body_height: 1.4 * size,
            bar_x: size + 0.12,
            bar_z0: 0.35 * size,
            bar_z1: 1.25 * size,
            bar_radius: 0.008,
        }
    }
}

/// Scripted handle grasp on a large kettle: the palm sits above the upper
/// handle arm facing down and the fingers hook under it. The grasp itself is
/// clear of the kettle and the ground, but closing the fingers straight from
/// the pregrasp drags the fingertips through the arm.
pub struct KettleHandleScene {
    pub cloud: PointCloud,
    pub ground: GroundPlane,
    pub grasp: HandState,
}

pub const KETTLE_SCENE_SIZE: f64 = 0.12;

pub fn kettle_handle_scene() -> Result<KettleHandleScene> {
    let mut params = SynthParams::new(ShapeKind::Kettle);
    params.size = KETTLE_SCENE_SIZE;
    let cloud = synthesize(&params)?;
    let k = KettleDims::new(KETTLE_SCENE_SIZE);
    let rotation = Matrix3::from_columns(&[Vector3::y(), Vector3::x(), -Vector3::z()]);
    let palm = Vector3::new(0.5 * (k.body_radius + k.bar_x), 0.0, k.bar_z1 + k.bar_radius + 0.02);
    let flex = 1.55;
    Ok(KettleHandleScene {
        cloud,
        ground: GroundPlane::horizontal(),
        grasp: HandState::new(RigidTransform::new(rotation, palm), vec![0.0, flex, flex, flex]),
    })
}

/// Sample the requested synthetic object.
pub fn synthesize(params: &SynthParams) -> Result<PointCloud> {
    if !(params.size > 0.0 && params.density > 0.0 && params.noise >= 0.0) {
        return Err(Error::Config(format!("invalid synthesis parameters {params:?}")));
    }
    let s = params.size;
    let mut b = Builder {
        points: Vec::new(),
        normals: Vec::new(),
        density: params.density,
    };
    let above_ground = |p: &Vector3<f64>, _: &Vector3<f64>| p.z > 1e-9;
    match params.shape {
        ShapeKind::Sphere => b.sphere(Vector3::new(0.0, 0.0, s), s, above_ground),
        ShapeKind::Box => {
            let (hx, hy, hz) = (s, 0.75 * s, 1.25 * s);
            let c = Vector3::new(0.0, 0.0, hz);
            let x = Vector3::x();
            let y = Vector3::y();
            let z = Vector3::z();
            b.rect(c + Vector3::new(-hx, -hy, hz), x * 2.0 * hx, y * 2.0 * hy, z);
            for (n, u, v, hn) in [(x, y * hy, z * hz, hx), (y, x * hx, z * hz, hy)] {
                for sign in [1.0, -1.0] {
                    let center = c + n * (sign * hn);
                    b.rect(center - u - v, u * 2.0, v * 2.0, n * sign);
                }
            }
        }
        ShapeKind::Cylinder => {
            let h = 4.0 * s;
            b.tube(Vector3::zeros(), s, 0.0, h, false);
            b.annulus(Vector3::zeros(), 0.0, s, h, Vector3::z());
        }
        ShapeKind::Plate => {
            let t = 0.015;
            b.tube(Vector3::zeros(), s, 0.0, t, false);
            b.annulus(Vector3::zeros(), 0.0, s, t, Vector3::z());
        }
        ShapeKind::Kettle => {
            let k = KettleDims::new(s);
            b.tube(Vector3::zeros(), k.body_radius, 0.0, k.body_height, false);
            b.annulus(Vector3::zeros(), 0.0, k.body_radius, k.body_height, Vector3::z());
            // handle: horizontal arms to a vertical bar, all round tubes
            let arm_len = k.bar_x - k.body_radius;
            let spacing = 1.0 / params.density.sqrt();
            let ring = ((2.0 * PI * k.bar_radius / spacing).round() as usize).max(8);
            let along = |len: f64| ((len / spacing).round() as usize).max(2);
            let mut segment = |a: Vector3<f64>, dir: Vector3<f64>, len: f64| {
                let u = if dir.z.abs() > 0.5 { Vector3::x() } else { Vector3::z() };
                let v = dir.cross(&u);
                let n_along = along(len);
                for i in 0..n_along {
                    let c = a + dir * (len * (i as f64 + 0.5) / n_along as f64);
                    for j in 0..ring {
                        let th = 2.0 * PI * j as f64 / ring as f64;
                        let n = u * th.cos() + v * th.sin();
                        b.push(c + n * k.bar_radius, n);
                    }
                }
            };
            segment(Vector3::new(k.bar_x, 0.0, k.bar_z0), Vector3::z(), k.bar_z1 - k.bar_z0);
            segment(Vector3::new(k.body_radius, 0.0, k.bar_z0), Vector3::x(), arm_len);
            segment(Vector3::new(k.body_radius, 0.0, k.bar_z1), Vector3::x(), arm_len);
        }
        ShapeKind::Blob => {
            let spheres = blob_spheres(s);
            for (i, &(c, r)) in spheres.iter().enumerate() {
                let others: Vec<_> = spheres.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                b.sphere(c, r, |p, _| p.z > 1e-9 && others.iter().all(|(oc, or)| (p - oc).norm() > *or));
            }
        }
    }
    let Builder {
        mut points, mut normals, ..
    } = b;
    if let Some(v) = params.viewpoint {
        let v = Vector3::new(v[0], v[1], v[2]);
        let keep: Vec<bool> = points.iter().zip(&normals).map(|(p, n)| n.dot(&(v - p)) > 0.0).collect();
        let mut it = keep.iter();
        points.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        normals.retain(|_| *it.next().unwrap());
    }
    if params.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let dist = Normal::new(0.0, params.noise).map_err(|e| Error::Config(e.to_string()))?;
        for p in &mut points {
            *p += Vector3::new(dist.sample(&mut rng), dist.sample(&mut rng), dist.sample(&mut rng));
        }
    }
    PointCloud::new(points, normals)
}
