//! Training losses and evaluation metrics.

use crate::error::{Error, Result};
use crate::heatmap::{HeatmapStack, JointSet};
use crate::register::DisplacementField;
use crate::voxgrid::{GridKind, Mesh, VoxelGrid};

/// Probability clamp used by the cross-entropy losses.
pub const BCE_EPSILON: f64 = 1e-7;

/// A scalar loss with optional per-element contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub per_element: Option<Vec<f64>>,
}

impl LossReport {
    fn scalar(value: f64) -> Self {
        Self {
            value,
            per_element: None,
        }
    }
}

/// Whether a sample carries full shape annotation (synthetic) or not (real).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleFlag {
    pub is_synthetic: bool,
}

impl SampleFlag {
    pub const SYNTHETIC: SampleFlag = SampleFlag { is_synthetic: true };
    pub const REAL: SampleFlag = SampleFlag { is_synthetic: false };
}

/// Mean per-voxel binary cross entropy of `pred` against occupancy `gt`,
/// with predictions clamped to `[ε, 1 − ε]`.
pub fn bce_voxel(pred: &VoxelGrid, gt: &VoxelGrid) -> Result<LossReport> {
    if pred.dims() != gt.dims() {
        return Err(Error::mismatch(format!(
            "prediction grid {:?} vs ground truth {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    if gt.kind() != GridKind::Occupancy {
        return Err(Error::invalid("ground-truth grid for BCE must be occupancy"));
    }
    let per: Vec<f64> = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(&p, &g)| {
            let p = (p as f64).clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            let g = g as f64;
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .collect();
    let value = per.iter().sum::<f64>() / per.len() as f64;
    Ok(LossReport {
        value,
        per_element: Some(per),
    })
}

/// Voxelized shape error; identical to [`bce_voxel`].
pub fn shape_error(pred: &VoxelGrid, gt: &VoxelGrid) -> Result<f64> {
    Ok(bce_voxel(pred, gt)?.value)
}

fn check_same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::mismatch(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// `½ Σ_k |v̂_k − v_k|²`. Meant for vertices already normalized to the cube.
pub fn euclidean_vertex_loss(pred: &Mesh, gt: &Mesh) -> Result<LossReport> {
    check_same_len("vertex count", pred.len(), gt.len())?;
    let per: Vec<f64> = pred
        .vertices()
        .iter()
        .zip(gt.vertices())
        .map(|(a, b)| 0.5 * (a - b).norm_squared())
        .collect();
    Ok(LossReport {
        value: per.iter().sum(),
        per_element: Some(per),
    })
}

/// `(1/Q³) Σ |d̂ − d|²` over every voxel of two fields on the same lattice.
pub fn displacement_loss(pred: &DisplacementField, gt: &DisplacementField) -> Result<LossReport> {
    if !pred.same_geometry(gt) {
        return Err(Error::mismatch("displacement fields do not share a lattice"));
    }
    let sum: f64 = pred
        .vectors()
        .iter()
        .zip(gt.vectors())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(LossReport::scalar(sum / pred.vectors().len() as f64))
}

/// Mean Euclidean joint distance in millimetres for one frame.
pub fn joint_error(pred: &JointSet, gt: &JointSet) -> Result<f64> {
    check_same_len("joint count", pred.len(), gt.len())?;
    if pred.is_empty() {
        return Err(Error::invalid("joint error of empty joint sets"));
    }
    Ok(mean_distance(pred.joints().iter().zip(gt.joints())))
}

/// Mean Euclidean vertex distance in millimetres.
pub fn vertex_error(pred: &Mesh, gt: &Mesh) -> Result<f64> {
    check_same_len("vertex count", pred.len(), gt.len())?;
    if pred.is_empty() {
        return Err(Error::invalid("vertex error of empty meshes"));
    }
    Ok(mean_distance(pred.vertices().iter().zip(gt.vertices())))
}

fn mean_distance<'a>(pairs: impl ExactSizeIterator<Item = (&'a crate::Vec3, &'a crate::Vec3)>) -> f64 {
    let n = pairs.len() as f64;
    pairs.map(|(a, b)| (a - b).norm()).sum::<f64>() / n
}

/// Heatmap loss: mean squared error over every voxel of every map.
pub fn heatmap_loss(pred: &HeatmapStack, gt: &HeatmapStack) -> Result<LossReport> {
    check_same_len("heatmap count", pred.len(), gt.len())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (a, b) in pred.maps().iter().zip(gt.maps()) {
        if a.dims() != b.dims() {
            return Err(Error::mismatch("heatmap lattices differ"));
        }
        for (&x, &y) in a.data().iter().zip(b.data()) {
            let d = x as f64 - y as f64;
            sum += d * d;
        }
        n += a.len();
    }
    if n == 0 {
        return Err(Error::invalid("heatmap loss of empty stacks"));
    }
    Ok(LossReport::scalar(sum / n as f64))
}

/// The five terms of the end-to-end objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub heatmap: f64,
    pub shape_voxels: f64,
    pub shape_surface: f64,
    pub depth_from_voxels: f64,
    pub depth_from_surface: f64,
}

/// `L_H + 𝟙·L_VS + 𝟙·L_VT + L_VD^v + L_VD^s`; the two shape terms only count
/// for synthetic samples.
pub fn total_loss(parts: &LossParts, flag: SampleFlag) -> Result<LossReport> {
    let all = [
        ("heatmap", parts.heatmap),
        ("shape_voxels", parts.shape_voxels),
        ("shape_surface", parts.shape_surface),
        ("depth_from_voxels", parts.depth_from_voxels),
        ("depth_from_surface", parts.depth_from_surface),
    ];
    if let Some((name, v)) = all.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!("loss term {name} = {v} must be finite and >= 0")));
    }
    let terms = vec![
        parts.heatmap,
        if flag.is_synthetic { parts.shape_voxels } else { 0.0 },
        if flag.is_synthetic { parts.shape_surface } else { 0.0 },
        parts.depth_from_voxels,
        parts.depth_from_surface,
    ];
    Ok(LossReport {
        value: terms.iter().sum(),
        per_element: Some(terms),
    })
}
