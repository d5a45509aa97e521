//! Gravitational non-rigid alignment of a mesh to an occupancy grid.
//!
//! Registration runs in two stages that share the iteration budget. A
//! global stage fits one rigid transform to all gravitational pulls, which
//! removes offsets that local fits cannot see (a flat patch only observes
//! the normal component of a shift). The local stage then estimates one
//! rigid transform per vertex, diffuses the transforms over the vertex's
//! k-ring on the mesh, and applies a damped step. Diffusing over mesh rings
//! rather than Euclidean neighbours keeps touching but unconnected parts
//! (adjacent fingers) independent.
//!
//! Either stage ends once an iteration improves the mean target distance
//! by less than the tolerance; an iteration that makes it worse is undone.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::nearest_rotation;
use crate::register::index::OccupancyIndex;
use crate::register::rings::{build_rings_from_adjacency, RingAdjacency, DEFAULT_RING_RADIUS};
use crate::voxgrid::{Mesh, VoxelGrid};
use crate::Vec3;

/// Settings for [`nrga_register`]. Distances are in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrgaConfig {
    /// Edge hops spanned by the transform diffusion.
    pub ring_radius: usize,
    /// Total iteration budget over both stages.
    pub iterations: usize,
    /// At most this many iterations go to the global rigid stage.
    pub rigid_iterations: usize,
    /// Fraction of the diffused transform applied per iteration, in (0, 1].
    pub step: f64,
    /// ε in the kernel `1 / (d² + ε²)`.
    pub softening: f64,
    /// Target points farther than this never attract a vertex.
    pub correspondence_radius: f64,
    /// Per vertex, only target points within `nearest + capture_band` pull.
    pub capture_band: f64,
    /// A stage ends once one iteration lowers the mean target distance by
    /// less than this.
    pub tolerance: f64,
}

impl NrgaConfig {
    /// Defaults scaled to the voxel size of `target`.
    pub fn for_grid(target: &VoxelGrid) -> Self {
        Self::for_voxel_size(target.voxel_size())
    }

    pub fn for_voxel_size(voxel: f64) -> Self {
        Self {
            ring_radius: DEFAULT_RING_RADIUS,
            iterations: 30,
            rigid_iterations: 15,
            step: 0.5,
            softening: 0.5 * voxel,
            correspondence_radius: 6.0 * voxel,
            capture_band: voxel,
            tolerance: 0.01 * voxel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("NRGA needs at least one iteration"));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::invalid(format!("NRGA step {} must lie in (0, 1]", self.step)));
        }
        if !(self.softening > 0.0) {
            return Err(Error::invalid("NRGA softening must be positive"));
        }
        if !(self.correspondence_radius > 0.0 && self.capture_band >= 0.0) {
            return Err(Error::invalid("NRGA radii must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("NRGA tolerance must be non-negative"));
        }
        Ok(())
    }
}

impl Default for NrgaConfig {
    /// Tuned for a 64³ lattice over a 300 mm cube.
    fn default() -> Self {
        Self::for_voxel_size(300.0 / 64.0)
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NrgaIterate {
    pub iteration: usize,
    /// `"rigid"` or `"local"`.
    pub phase: &'static str,
    /// Mean distance from vertices to their nearest occupied voxel centre,
    /// measured after the update.
    pub mean_target_distance: f64,
    /// Fraction of vertices that found target points in range.
    pub matched_fraction: f64,
    /// Largest `|RᵀR − I|` entry over the diffused rotations.
    pub max_orthonormality_error: f64,
    /// Largest vertex displacement of the update.
    pub max_step: f64,
    /// Whether the update was kept; a rejected update ends registration.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrgaOutcome {
    pub mesh: Mesh,
    /// Mean target distance of the input mesh.
    pub initial_distance: f64,
    pub trace: Vec<NrgaIterate>,
}

/// A rigid map `x ↦ R (x − pivot) + pivot + shift`.
#[derive(Debug, Clone, Copy)]
struct LocalTransform {
    rotation: Matrix3<f64>,
    pivot: Vec3,
    shift: Vec3,
}

/// Registers `mesh` onto the occupied voxels (value ≥ 0.5) of `target`.
///
/// Fails with [`Error::NoCorrespondence`], carrying the mesh reached so
/// far, when more than half of the vertices see no target point within
/// `correspondence_radius`.
pub fn nrga_register(mesh: &Mesh, target: &VoxelGrid, cfg: &NrgaConfig) -> Result<NrgaOutcome> {
    cfg.validate()?;
    let index = OccupancyIndex::new(target, 0.5);
    if index.is_empty() {
        return Err(Error::EmptyGrid("target grid"));
    }
    let adj = mesh.neighbors();
    let rings = build_rings_from_adjacency(&adj, cfg.ring_radius);
    let mut verts = mesh.vertices().to_vec();
    let initial_distance = mean_target_distance(&index, &verts);
    let mut current = initial_distance;
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut local = cfg.rigid_iterations == 0;

    for it in 0..cfg.iterations {
        if !local && it >= cfg.rigid_iterations {
            local = true;
        }
        let pulls: Vec<Option<Vec3>> = verts.par_iter().map(|v| gravitational_centroid(&index, v, cfg)).collect();
        let matched = pulls.iter().filter(|p| p.is_some()).count();
        let matched_fraction = if verts.is_empty() { 1.0 } else { matched as f64 / verts.len() as f64 };
        if matched_fraction < 0.5 {
            return Err(Error::NoCorrespondence {
                fraction: 100.0 * (1.0 - matched_fraction),
                iteration: it,
                partial: Box::new(mesh.with_vertices(verts)?),
            });
        }

        let (next, max_orth) = if local {
            local_update(&verts, &adj, &rings, &pulls, cfg.step)
        } else {
            rigid_update(&verts, &pulls)
        };
        let max_step = verts.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let distance = mean_target_distance(&index, &next);
        let accepted = distance <= current;
        trace.push(NrgaIterate {
            iteration: it + 1,
            phase: if local { "local" } else { "rigid" },
            mean_target_distance: if accepted { distance } else { current },
            matched_fraction,
            max_orthonormality_error: max_orth,
            max_step,
            accepted,
        });
        let stalled = !accepted || current - distance < cfg.tolerance;
        if accepted {
            verts = next;
            current = distance;
        }
        if stalled {
            if local {
                break;
            }
            local = true;
        }
    }

    Ok(NrgaOutcome {
        mesh: mesh.with_vertices(verts)?,
        initial_distance,
        trace,
    })
}

/// One Kabsch fit of all matched vertices onto their pulls, applied in full.
fn rigid_update(verts: &[Vec3], pulls: &[Option<Vec3>]) -> (Vec<Vec3>, f64) {
    let all: Vec<usize> = (0..verts.len()).collect();
    let Some(t) = fit_rigid(&all, verts, pulls) else {
        return (verts.to_vec(), 0.0);
    };
    let orth = (t.rotation.transpose() * t.rotation - Matrix3::identity()).abs().max();
    let moved = verts.iter().map(|v| t.pivot + t.rotation * (v - t.pivot) + t.shift).collect();
    (moved, orth)
}

/// Per-vertex fits on 1-rings, diffused over k-rings, applied with damping.
fn local_update(
    verts: &[Vec3],
    adj: &[Vec<usize>],
    rings: &RingAdjacency,
    pulls: &[Option<Vec3>],
    step: f64,
) -> (Vec<Vec3>, f64) {
    let local: Vec<Option<LocalTransform>> = (0..verts.len())
        .into_par_iter()
        .map(|i| {
            let patch: Vec<usize> = std::iter::once(i).chain(adj[i].iter().copied()).collect();
            fit_rigid(&patch, verts, pulls)
        })
        .collect();
    let diffused: Vec<Option<LocalTransform>> = (0..verts.len())
        .into_par_iter()
        .map(|i| diffuse(i, rings.ring(i), &local))
        .collect();
    let mut max_orth = 0.0f64;
    let moved = verts
        .iter()
        .zip(&diffused)
        .map(|(v, t)| match t {
            Some(t) => {
                let orth = (t.rotation.transpose() * t.rotation - Matrix3::identity()).abs().max();
                max_orth = max_orth.max(orth);
                apply_damped(t, v, step)
            }
            None => *v,
        })
        .collect();
    (moved, max_orth)
}

/// Mean distance from each vertex to its nearest occupied voxel centre.
pub fn mean_target_distance(index: &OccupancyIndex, verts: &[Vec3]) -> f64 {
    if verts.is_empty() {
        return 0.0;
    }
    let total: f64 = verts
        .par_iter()
        .map(|v| index.nearest_distance(v).unwrap_or(f64::INFINITY))
        .sum();
    total / verts.len() as f64
}

/// Kernel-weighted centroid of the target points pulling on `v`.
fn gravitational_centroid(index: &OccupancyIndex, v: &Vec3, cfg: &NrgaConfig) -> Option<Vec3> {
    let nearest = index.nearest_distance(v)?;
    if nearest > cfg.correspondence_radius {
        return None;
    }
    let radius = (nearest + cfg.capture_band).min(cfg.correspondence_radius);
    let eps2 = cfg.softening * cfg.softening;
    let mut acc = Vec3::zeros();
    let mut wsum = 0.0;
    index.for_each_within(v, radius, |p, d2| {
        let w = 1.0 / (d2 + eps2);
        acc += p * w;
        wsum += w;
    });
    (wsum > 0.0).then(|| acc / wsum)
}

/// Least-squares rigid fit (Kabsch) of the matched vertices in `patch`
/// onto their pulls. Fewer than three matches give a pure shift.
fn fit_rigid(patch: &[usize], verts: &[Vec3], pulls: &[Option<Vec3>]) -> Option<LocalTransform> {
    let pairs: Vec<(Vec3, Vec3)> = patch
        .iter()
        .filter_map(|&j| pulls[j].map(|g| (verts[j], g)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let src_c = pairs.iter().map(|(s, _)| s).sum::<Vec3>() / n;
    let dst_c = pairs.iter().map(|(_, d)| d).sum::<Vec3>() / n;
    let rotation = if pairs.len() >= 3 {
        let mut h = Matrix3::zeros();
        for (s, d) in &pairs {
            h += (d - dst_c) * (s - src_c).transpose();
        }
        // Rank-deficient covariances (collinear neighbourhoods) fall back to no rotation.
        if h.norm() > 1e-12 {
            nearest_rotation(&h)
        } else {
            Matrix3::identity()
        }
    } else {
        Matrix3::identity()
    };
    Some(LocalTransform {
        rotation,
        pivot: src_c,
        shift: dst_c - src_c,
    })
}

/// Averages the transforms of a vertex and its k-ring: shifts and pivots
/// linearly, rotations by projecting the mean matrix back onto SO(3).
fn diffuse(i: usize, ring: &[usize], local: &[Option<LocalTransform>]) -> Option<LocalTransform> {
    let mut rot = Matrix3::zeros();
    let mut pivot = Vec3::zeros();
    let mut shift = Vec3::zeros();
    let mut n = 0usize;
    for t in std::iter::once(i).chain(ring.iter().copied()).filter_map(|j| local[j].as_ref()) {
        rot += t.rotation;
        pivot += t.pivot;
        shift += t.shift;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let n = n as f64;
    Some(LocalTransform {
        rotation: nearest_rotation(&(rot / n)),
        pivot: pivot / n,
        shift: shift / n,
    })
}

/// Applies a fraction `step` of the transform: the rotation angle and the
/// shift are both scaled.
fn apply_damped(t: &LocalTransform, v: &Vec3, step: f64) -> Vec3 {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(t.rotation));
    let partial = q.powf(step);
    t.pivot + partial * (v - t.pivot) + t.shift * step
}
