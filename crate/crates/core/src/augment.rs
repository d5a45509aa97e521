//! Volumetric data augmentation: Euler rotation, isotropic scale and
//! translation applied consistently to grids, heatmaps and joints.
//!
//! The forward map on continuous voxel coordinates is
//! `q = s · R · (p − c) + c + t`, with `c` the grid centre, i.e. scale about
//! the centre, rotate, then translate. Grids are resampled by inverse
//! warping so the output has no holes.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heatmap::{HeatmapStack, JointSet};
use crate::voxgrid::{finish_value, Boundary, CubeFrame, VoxelGrid};
use crate::Vec3;

pub const MAX_TILT_DEG: f64 = 40.0;
pub const MAX_SPIN_DEG: f64 = 120.0;
pub const SCALE_RANGE: (f64, f64) = (0.8, 1.2);
pub const MAX_SHIFT_VOXELS: f64 = 8.0;

/// One augmentation draw. Angles in degrees, translation in voxels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub theta_x: f64,
    pub theta_y: f64,
    pub theta_z: f64,
    pub scale: f64,
    pub translation: Vec3,
}

impl AugmentParams {
    /// Validates every field against the sampling ranges.
    pub fn new(theta_x: f64, theta_y: f64, theta_z: f64, scale: f64, translation: Vec3) -> Result<Self> {
        let p = Self {
            theta_x,
            theta_y,
            theta_z,
            scale,
            translation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        Self {
            theta_x: 0.0,
            theta_y: 0.0,
            theta_z: 0.0,
            scale: 1.0,
            translation: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let within = |v: f64, lo: f64, hi: f64| v.is_finite() && v >= lo && v <= hi;
        if !within(self.theta_x, -MAX_TILT_DEG, MAX_TILT_DEG) || !within(self.theta_y, -MAX_TILT_DEG, MAX_TILT_DEG) {
            return Err(Error::invalid("theta_x and theta_y must lie in [-40, 40] degrees"));
        }
        if !within(self.theta_z, -MAX_SPIN_DEG, MAX_SPIN_DEG) {
            return Err(Error::invalid("theta_z must lie in [-120, 120] degrees"));
        }
        if !within(self.scale, SCALE_RANGE.0, SCALE_RANGE.1) {
            return Err(Error::invalid("scale must lie in [0.8, 1.2]"));
        }
        if !self.translation.iter().all(|&t| within(t, -MAX_SHIFT_VOXELS, MAX_SHIFT_VOXELS)) {
            return Err(Error::invalid("translation components must lie in [-8, 8] voxels"));
        }
        Ok(())
    }

    pub fn similarity(&self) -> Similarity {
        Similarity {
            rotation: rotation_matrix(self),
            scale: self.scale,
            translation: self.translation,
        }
    }
}

/// Draws every field uniformly from its range; the same seed always gives
/// the same parameters.
pub fn sample_params(seed: u64) -> AugmentParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_x = rng.random_range(-MAX_TILT_DEG..=MAX_TILT_DEG);
    let theta_y = rng.random_range(-MAX_TILT_DEG..=MAX_TILT_DEG);
    let theta_z = rng.random_range(-MAX_SPIN_DEG..=MAX_SPIN_DEG);
    let scale = rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1);
    let mut shift = || rng.random_range(-MAX_SHIFT_VOXELS..=MAX_SHIFT_VOXELS);
    let translation = Vec3::new(shift(), shift(), shift());
    AugmentParams {
        theta_x,
        theta_y,
        theta_z,
        scale,
        translation,
    }
}

/// Sine and cosine of an angle in degrees, exact at multiples of 90°.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    if deg % 90.0 == 0.0 {
        match (deg / 90.0).rem_euclid(4.0) as u8 {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

pub fn rot_x(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = sin_cos_deg(deg);
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Rot_x(θx) · Rot_y(θy) · Rot_z(θz)`, right-handed.
pub fn rotation_matrix(p: &AugmentParams) -> Matrix3<f64> {
    rot_x(p.theta_x) * rot_y(p.theta_y) * rot_z(p.theta_z)
}

/// A general scale-rotate-translate map on voxel coordinates about the grid
/// centre. Unlike [`AugmentParams`] it is closed under inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vec3,
}

impl Similarity {
    pub fn identity() -> Self {
        AugmentParams::identity().similarity()
    }

    /// Exact inverse: `p = (1/s) Rᵀ (q − c) + c − (1/s) Rᵀ t`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            scale: 1.0 / self.scale,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// The same map expressed on a lattice whose voxels are `factor` times
    /// smaller, so the translation covers the same distance in millimetres.
    pub fn with_translation_scaled(&self, factor: f64) -> Self {
        Self {
            translation: self.translation * factor,
            ..*self
        }
    }

    /// Offset `f(p) − p` of the forward map for a point at `d = p − c`.
    /// Written as an offset so identity maps produce exactly zero.
    fn offset(&self, d: &Vec3, translation: &Vec3) -> Vec3 {
        self.rotation * d * self.scale - d + translation
    }

    /// Source coordinate read by output coordinate `q` under inverse warping.
    fn source_of(&self, q: &Vec3, center: &Vec3) -> Vec3 {
        let d = q - center - self.translation;
        center + self.rotation.transpose() * d / self.scale
    }
}

fn grid_center(g: &VoxelGrid) -> Vec3 {
    let d = g.dims();
    Vec3::new(
        (d[0] as f64 - 1.0) / 2.0,
        (d[1] as f64 - 1.0) / 2.0,
        (d[2] as f64 - 1.0) / 2.0,
    )
}

/// Applies an augmentation to a cubic grid by trilinear inverse warping.
/// Samples falling outside the input read as zero.
pub fn transform_grid(grid: &VoxelGrid, p: &AugmentParams) -> Result<VoxelGrid> {
    transform_grid_with(grid, &p.similarity())
}

pub fn transform_grid_with(grid: &VoxelGrid, t: &Similarity) -> Result<VoxelGrid> {
    if !grid.is_cubic() {
        return Err(Error::invalid("augmentation needs a cubic grid"));
    }
    let c = grid_center(grid);
    let kind = grid.kind();
    let data = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let [x, y, z] = grid.voxel_coords(i);
            let q = Vec3::new(x as f64, y as f64, z as f64);
            let src = t.source_of(&q, &c);
            finish_value(kind, grid.sample(&src, Boundary::Zero))
        })
        .collect();
    grid.with_data(kind, data)
}

/// Applies the same augmentation to every map of a heatmap stack.
pub fn transform_heatmaps(stack: &HeatmapStack, p: &AugmentParams) -> Result<HeatmapStack> {
    transform_heatmaps_with(stack, &p.similarity())
}

pub fn transform_heatmaps_with(stack: &HeatmapStack, t: &Similarity) -> Result<HeatmapStack> {
    let maps = stack
        .maps()
        .iter()
        .map(|m| transform_grid_with(m, t))
        .collect::<Result<Vec<_>>>()?;
    HeatmapStack::new(maps, stack.sigma())
}

/// Joints after augmentation. `outside` lists joints that left the cube;
/// whether to keep such a sample is the caller's decision.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedJoints {
    pub joints: JointSet,
    pub outside: Vec<usize>,
}

impl TransformedJoints {
    pub fn all_inside(&self) -> bool {
        self.outside.is_empty()
    }
}

/// Applies the augmentation in millimetres about the cube centre. `dim` is
/// the lattice resolution whose voxel size converts the translation.
pub fn transform_joints(
    joints: &JointSet,
    frame: &CubeFrame,
    dim: usize,
    p: &AugmentParams,
) -> Result<TransformedJoints> {
    transform_joints_with(joints, frame, dim, &p.similarity())
}

pub fn transform_joints_with(
    joints: &JointSet,
    frame: &CubeFrame,
    dim: usize,
    t: &Similarity,
) -> Result<TransformedJoints> {
    if dim == 0 {
        return Err(Error::invalid("grid dimension must be at least 1"));
    }
    if let Some(j) = joints.joints().iter().find(|j| !frame.contains(j)) {
        return Err(Error::outside(j));
    }
    let voxel = frame.side() / dim as f64;
    let shift = t.translation * voxel;
    let moved: Vec<Vec3> = joints
        .joints()
        .iter()
        .map(|j| j + t.offset(&(j - frame.center()), &shift))
        .collect();
    let outside = moved
        .iter()
        .enumerate()
        .filter(|(_, j)| !frame.contains(j))
        .map(|(i, _)| i)
        .collect();
    Ok(TransformedJoints {
        joints: JointSet::new(moved)?,
        outside,
    })
}
