//! Surface-to-voxel registration.
//!
//! Two routes fit a fixed-topology mesh to an occupancy grid:
//!
//! * **Displacement field**: voxelize the mesh, estimate a per-voxel
//!   displacement toward the target occupancy, move the vertices through
//!   the interpolated field, then remove roughness with Laplacian smoothing.
//! * **NRGA**: iterative gravitational alignment with per-vertex rigid
//!   transforms diffused over mesh rings ([`nrga_register`]).
//!
//! Both keep the vertex count and face list of the input untouched.

mod field;
pub mod index;
mod nrga;
mod rings;
mod smooth;

pub use field::{
    apply_field, estimate_displacement_field, estimate_displacement_field_with, gt_displacement_field,
    DisplacementField, EstimatorConfig,
};
pub use nrga::{mean_target_distance, nrga_register, NrgaConfig, NrgaIterate, NrgaOutcome};
pub use rings::{build_rings, RingAdjacency, DEFAULT_RING_RADIUS};
pub use smooth::{
    laplacian_energy, laplacian_smooth, laplacian_smooth_traced, DEFAULT_SMOOTH_ITERATIONS,
    DEFAULT_SMOOTH_LAMBDA,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::voxgrid::{voxelize_mesh, CubeFrame, Mesh, VoxelGrid};
use index::OccupancyIndex;

/// Settings of the displacement-field route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRegistration {
    pub estimator: Option<EstimatorConfig>,
    pub smooth_iterations: usize,
    pub smooth_lambda: f64,
}

impl Default for FieldRegistration {
    fn default() -> Self {
        Self {
            estimator: None,
            smooth_iterations: DEFAULT_SMOOTH_ITERATIONS,
            smooth_lambda: DEFAULT_SMOOTH_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegisterMethod {
    DisplacementField(FieldRegistration),
    Nrga(NrgaConfig),
}

/// What happened during a registration, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterReport {
    pub method: &'static str,
    /// Mean vertex-to-nearest-occupied-voxel distance before registration (mm).
    pub initial_target_distance: f64,
    /// Same measure after registration.
    pub final_target_distance: f64,
    /// Laplacian energy before and after each smoothing pass (field route).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub laplacian_energy: Vec<f64>,
    /// Per-iteration diagnostics (NRGA route).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<NrgaIterate>,
}

/// Registers `mesh` onto the occupied voxels of `target`.
///
/// `target` must be the cubic lattice covering `frame`.
pub fn register(mesh: &Mesh, target: &VoxelGrid, method: &RegisterMethod, frame: &CubeFrame) -> Result<Mesh> {
    Ok(register_with_report(mesh, target, method, frame)?.0)
}

pub fn register_with_report(
    mesh: &Mesh,
    target: &VoxelGrid,
    method: &RegisterMethod,
    frame: &CubeFrame,
) -> Result<(Mesh, RegisterReport)> {
    check_frame(target, frame)?;
    let index = OccupancyIndex::new(target, 0.5);
    if index.is_empty() {
        return Err(Error::EmptyGrid("target grid"));
    }
    match method {
        RegisterMethod::DisplacementField(cfg) => {
            let initial = mean_target_distance(&index, mesh.vertices());
            let source = voxelize_mesh(mesh, frame, target.dims()[0])?;
            let est = cfg.estimator.unwrap_or_else(|| EstimatorConfig::for_grid(target));
            let field = estimate_displacement_field_with(&source, target, &est)?;
            let moved = apply_field(mesh, &field)?;
            let (smoothed, energy) = laplacian_smooth_traced(&moved, cfg.smooth_iterations, cfg.smooth_lambda)?;
            let report = RegisterReport {
                method: "dispfield",
                initial_target_distance: initial,
                final_target_distance: mean_target_distance(&index, smoothed.vertices()),
                laplacian_energy: energy,
                iterations: Vec::new(),
            };
            Ok((smoothed, report))
        }
        RegisterMethod::Nrga(cfg) => {
            let out = nrga_register(mesh, target, cfg)?;
            let report = RegisterReport {
                method: "nrga",
                initial_target_distance: out.initial_distance,
                final_target_distance: out
                    .trace
                    .last()
                    .map_or(out.initial_distance, |t| t.mean_target_distance),
                laplacian_energy: Vec::new(),
                iterations: out.trace,
            };
            Ok((out.mesh, report))
        }
    }
}

fn check_frame(target: &VoxelGrid, frame: &CubeFrame) -> Result<()> {
    let tol = 1e-3 * target.voxel_size();
    let ok = target
        .frame()
        .map(|f| (f.center() - frame.center()).abs().max() <= tol && (f.side() - frame.side()).abs() <= tol)
        .unwrap_or(false);
    if ok {
        Ok(())
    } else {
        Err(Error::mismatch("target grid does not cover the registration frame"))
    }
}
