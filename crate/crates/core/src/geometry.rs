//! Surface poses, element layouts and the placement constraints.
//!
//! Rotations use the extrinsic x-then-y-then-z convention,
//! `R(u) = R_z(ζ_z) · R_y(ζ_y) · R_x(ζ_x)`, and every surface's local outward
//! normal is `n̄ = (1, 0, 0)`. Elements sit on the local y-z plane.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Margin below which a placement constraint is reported as violated.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Local outward normal of every surface.
pub fn local_normal() -> Vector3<f64> {
    Vector3::x()
}

/// Position (meters) and rotation angles (radians) of one surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePose {
    pub position: Vector3<f64>,
    /// `(ζ_x, ζ_y, ζ_z)`, kept in `[0, 2π)` by [`SurfacePose::new`].
    pub rotation: Vector3<f64>,
}

impl SurfacePose {
    /// Builds a pose and wraps the rotation angles into `[0, 2π)`.
    pub fn new(position: Vector3<f64>, rotation: Vector3<f64>) -> Self {
        Self { position, rotation: wrap_angles(rotation) }
    }

    pub fn rotation_matrix(&self) -> Result<Matrix3<f64>> {
        rotation_matrix(&self.rotation)
    }

    pub fn normal(&self) -> Result<Vector3<f64>> {
        surface_normal(self)
    }

    /// Pose whose outward normal is `normal`, with an extra spin `roll` about it.
    pub fn facing(position: Vector3<f64>, normal: &Vector3<f64>, roll: f64) -> Result<Self> {
        Ok(Self::new(position, rotation_for_normal(normal, roll)?))
    }
}

/// Wraps each angle into `[0, 2π)`.
pub fn wrap_angles(u: Vector3<f64>) -> Vector3<f64> {
    u.map(|a| {
        let w = a.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        if w >= TAU {
            0.0
        } else {
            w
        }
    })
}

/// Axis-aligned cube the surface centers must stay in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteRegion {
    pub center: Vector3<f64>,
    pub side: f64,
}

impl Default for SiteRegion {
    fn default() -> Self {
        Self { center: Vector3::new(1.5, 0.0, 0.0), side: 1.0 }
    }
}

impl SiteRegion {
    pub fn new(center: Vector3<f64>, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::invalid(format!("site region side must be positive, got {side}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("site region center must be finite"));
        }
        Ok(Self { center, side })
    }

    pub fn lower(&self) -> Vector3<f64> {
        self.center.add_scalar(-0.5 * self.side)
    }

    pub fn upper(&self) -> Vector3<f64> {
        self.center.add_scalar(0.5 * self.side)
    }

    /// Smallest distance from `q` to a face, negative outside the cube.
    pub fn margin(&self, q: &Vector3<f64>) -> f64 {
        let lo = self.lower();
        let hi = self.upper();
        (0..3).map(|i| (q[i] - lo[i]).min(hi[i] - q[i])).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, q: &Vector3<f64>) -> bool {
        self.margin(q) >= 0.0
    }
}

/// Element offsets of an `nx × ny` uniform planar array at half-wavelength pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLayout {
    nx: usize,
    ny: usize,
    offsets: Vec<Vector3<f64>>,
}

impl LocalLayout {
    /// `nx` elements per row along local y, `ny` rows along local z. Element
    /// `n = row * nx + col`.
    pub fn uniform(nx: usize, ny: usize, wavelength: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("layout needs at least one element per axis"));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        let pitch = 0.5 * wavelength;
        let cy = 0.5 * (nx as f64 - 1.0);
        let cz = 0.5 * (ny as f64 - 1.0);
        let offsets = (0..ny)
            .flat_map(|row| {
                (0..nx).map(move |col| {
                    Vector3::new(0.0, (col as f64 - cy) * pitch, (row as f64 - cz) * pitch)
                })
            })
            .collect();
        Ok(Self { nx, ny, offsets })
    }

    /// Arbitrary offsets, e.g. for a single element away from the center.
    pub fn from_offsets(offsets: Vec<Vector3<f64>>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::invalid("layout needs at least one element"));
        }
        let n = offsets.len();
        Ok(Self { nx: n, ny: 1, offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn offsets(&self) -> &[Vector3<f64>] {
        &self.offsets
    }
}

fn check_finite(u: &Vector3<f64>, what: &str) -> Result<()> {
    if u.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be finite, got {u:?}")))
    }
}

/// `R(u) = R_z(ζ_z) R_y(ζ_y) R_x(ζ_x)`.
pub fn rotation_matrix(u: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_finite(u, "rotation angles")?;
    let (sx, cx) = u.x.sin_cos();
    let (sy, cy) = u.y.sin_cos();
    let (sz, cz) = u.z.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cx, -sx, 0.0, sx, cx);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rz = Matrix3::new(cz, -sz, 0.0, sz, cz, 0.0, 0.0, 0.0, 1.0);
    Ok(rz * ry * rx)
}

/// Global outward normal `R(u) n̄`.
pub fn surface_normal(pose: &SurfacePose) -> Result<Vector3<f64>> {
    Ok(rotation_matrix(&pose.rotation)? * local_normal())
}

/// Jacobian of the global normal with respect to `(ζ_x, ζ_y, ζ_z)`.
///
/// The normal does not depend on `ζ_x` (a spin about the local normal), so the
/// first column is zero.
pub fn normal_jacobian(u: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_finite(u, "rotation angles")?;
    let (sy, cy) = u.y.sin_cos();
    let (sz, cz) = u.z.sin_cos();
    Ok(Matrix3::new(
        0.0,
        -sy * cz,
        -cy * sz,
        0.0,
        -sy * sz,
        cy * cz,
        0.0,
        -cy,
        0.0,
    ))
}

/// Rotation angles whose normal is `normal`, with spin `roll` about it.
pub fn rotation_for_normal(normal: &Vector3<f64>, roll: f64) -> Result<Vector3<f64>> {
    check_finite(normal, "normal")?;
    let len = normal.norm();
    if len == 0.0 {
        return Err(Error::invalid("normal must be nonzero"));
    }
    let n = normal / len;
    let pitch = -n.z.clamp(-1.0, 1.0).asin();
    let yaw = n.y.atan2(n.x);
    Ok(wrap_angles(Vector3::new(roll, pitch, yaw)))
}

/// Global position `q_b + R(u_b) r̄_n` of element `n` (0-based).
pub fn element_position(pose: &SurfacePose, layout: &LocalLayout, n: usize) -> Result<Vector3<f64>> {
    let offset = layout.offsets().get(n).ok_or_else(|| {
        Error::invalid(format!("element index {n} out of range for {} elements", layout.len()))
    })?;
    Ok(pose.position + pose.rotation_matrix()? * offset)
}

/// Global positions of every element of a surface.
pub fn element_positions(pose: &SurfacePose, layout: &LocalLayout) -> Result<Vec<Vector3<f64>>> {
    let r = pose.rotation_matrix()?;
    Ok(layout.offsets().iter().map(|o| pose.position + r * o).collect())
}

/// Unit direction `(sin e cos a, sin e sin a, cos e)`.
pub fn direction_vector(elevation: f64, azimuth: f64) -> Vector3<f64> {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vector3::new(se * ca, se * sa, ce)
}

/// Outcome for one placement constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintStatus {
    pub passed: bool,
    /// Smallest slack over all instances of the constraint; `+∞` when vacuous.
    pub worst_margin: f64,
}

impl ConstraintStatus {
    fn from_margin(worst_margin: f64) -> Self {
        Self { passed: worst_margin >= -FEASIBILITY_TOL, worst_margin }
    }
}

/// Per-constraint feasibility of a set of poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// Every center inside the site region.
    pub in_region: ConstraintStatus,
    /// `‖q_b − q_j‖ ≥ d_min` for every pair.
    pub min_distance: ConstraintStatus,
    /// `n_bᵀ(q_j − q_b) ≤ 0`: no surface in front of another.
    pub no_mutual_reflection: ConstraintStatus,
    /// `n_bᵀ q_b ≥ 0`: every surface faces away from the reference origin.
    pub faces_outward: ConstraintStatus,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.in_region.passed
            && self.min_distance.passed
            && self.no_mutual_reflection.passed
            && self.faces_outward.passed
    }

    pub fn worst_margin(&self) -> f64 {
        self.in_region
            .worst_margin
            .min(self.min_distance.worst_margin)
            .min(self.no_mutual_reflection.worst_margin)
            .min(self.faces_outward.worst_margin)
    }
}

/// Evaluates the placement constraints for all surfaces.
pub fn feasibility_check(
    poses: &[SurfacePose],
    region: &SiteRegion,
    d_min: f64,
) -> Result<FeasibilityReport> {
    if poses.is_empty() {
        return Err(Error::invalid("feasibility check needs at least one surface"));
    }
    let normals = poses.iter().map(surface_normal).collect::<Result<Vec<_>>>()?;

    let region_margin =
        poses.iter().map(|p| region.margin(&p.position)).fold(f64::INFINITY, f64::min);

    let mut distance_margin = f64::INFINITY;
    let mut reflection_margin = f64::INFINITY;
    for (b, pb) in poses.iter().enumerate() {
        for (j, pj) in poses.iter().enumerate() {
            if b == j {
                continue;
            }
            let delta = pj.position - pb.position;
            distance_margin = distance_margin.min(delta.norm() - d_min);
            reflection_margin = reflection_margin.min(-normals[b].dot(&delta));
        }
    }

    let outward_margin = poses
        .iter()
        .zip(&normals)
        .map(|(p, n)| n.dot(&p.position))
        .fold(f64::INFINITY, f64::min);

    Ok(FeasibilityReport {
        in_region: ConstraintStatus::from_margin(region_margin),
        min_distance: ConstraintStatus::from_margin(distance_margin),
        no_mutual_reflection: ConstraintStatus::from_margin(reflection_margin),
        faces_outward: ConstraintStatus::from_margin(outward_margin),
    })
}
