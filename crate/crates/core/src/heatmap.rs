//! Per-joint 3D Gaussian heatmaps on a voxel lattice.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::voxgrid::{CubeFrame, GridKind, VoxelGrid};
use crate::Vec3;

/// Default Gaussian width as a multiple of the heatmap voxel size.
pub const DEFAULT_SIGMA_VOXELS: f64 = 1.7;

/// Ordered 3D joint positions in millimetres.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointSet {
    joints: Vec<Vec3>,
}

impl JointSet {
    pub fn new(joints: Vec<Vec3>) -> Result<Self> {
        if joints.iter().any(|j| !j.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("joint set contains a non-finite coordinate"));
        }
        Ok(Self { joints })
    }

    pub fn joints(&self) -> &[Vec3] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn translated(&self, t: &Vec3) -> JointSet {
        JointSet {
            joints: self.joints.iter().map(|j| j + t).collect(),
        }
    }
}

/// One probability grid per joint, all on the same lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    maps: Vec<VoxelGrid>,
    sigma: f64,
}

impl HeatmapStack {
    pub fn new(maps: Vec<VoxelGrid>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("heatmap sigma {sigma} must be positive")));
        }
        if let Some(first) = maps.first() {
            if maps.iter().any(|m| !m.same_geometry(first)) {
                return Err(Error::mismatch("heatmaps do not share one lattice"));
            }
        }
        if maps.iter().any(|m| m.kind() != GridKind::Probability) {
            return Err(Error::invalid("heatmaps must be probability grids"));
        }
        Ok(Self { maps, sigma })
    }

    pub fn maps(&self) -> &[VoxelGrid] {
        &self.maps
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn into_maps(self) -> Vec<VoxelGrid> {
        self.maps
    }
}

/// `sigma = 1.7 * voxel_size` for a `dim³` lattice over `frame`.
pub fn default_sigma(frame: &CubeFrame, dim: usize) -> f64 {
    DEFAULT_SIGMA_VOXELS * frame.side() / dim as f64
}

/// Evaluates `exp(-|c - j|² / 2σ²)` at every voxel centre, one map per joint.
pub fn make_heatmaps(
    joints: &JointSet,
    frame: &CubeFrame,
    dim: usize,
    sigma: f64,
) -> Result<HeatmapStack> {
    if joints.is_empty() {
        return Err(Error::invalid("cannot build heatmaps for an empty joint set"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("heatmap sigma {sigma} must be positive")));
    }
    if let Some(j) = joints.joints.iter().find(|j| !frame.contains(j)) {
        return Err(Error::outside(j));
    }
    let template = VoxelGrid::for_frame(frame, dim, GridKind::Probability)?;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let maps = joints
        .joints
        .par_iter()
        .map(|j| {
            let data = (0..template.len())
                .map(|i| {
                    let c = template.voxel_center(template.voxel_coords(i));
                    (-(c - j).norm_squared() * inv).exp() as f32
                })
                .collect();
            VoxelGrid::from_parts(
                template.dims(),
                template.origin(),
                template.voxel_size(),
                GridKind::Probability,
                data,
            )
        })
        .collect();
    Ok(HeatmapStack { maps, sigma })
}

/// Recovers one joint per map as the value-weighted centroid of the 3×3×3
/// block around the arg-max voxel. Ties on the maximum go to the lowest
/// linear index.
pub fn decode_heatmaps(stack: &HeatmapStack) -> Result<JointSet> {
    let joints = stack
        .maps
        .iter()
        .enumerate()
        .map(|(n, map)| decode_one(map).ok_or_else(|| Error::invalid(format!("heatmap {n} has no positive value"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(JointSet { joints })
}

fn decode_one(map: &VoxelGrid) -> Option<Vec3> {
    let mut best = 0usize;
    let mut best_v = f32::NEG_INFINITY;
    for (i, &v) in map.data().iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    if !(best_v > 0.0) {
        return None;
    }
    let [bx, by, bz] = map.voxel_coords(best);
    let dims = map.dims();
    let mut acc = Vec3::zeros();
    let mut wsum = 0.0;
    for z in bz.saturating_sub(1)..=(bz + 1).min(dims[2] - 1) {
        for y in by.saturating_sub(1)..=(by + 1).min(dims[1] - 1) {
            for x in bx.saturating_sub(1)..=(bx + 1).min(dims[0] - 1) {
                let w = map.get([x, y, z]) as f64;
                acc += map.voxel_center([x, y, z]) * w;
                wsum += w;
            }
        }
    }
    Some(acc / wsum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_on_voxel_center_peaks_at_one() {
        let f = CubeFrame::centered(Vec3::new(0.0, 0.0, 400.0));
        let g = VoxelGrid::for_frame(&f, 44, GridKind::Probability).unwrap();
        let c = g.voxel_center([10, 20, 30]);
        let sigma = default_sigma(&f, 44);
        let h = make_heatmaps(&JointSet::new(vec![c]).unwrap(), &f, 44, sigma).unwrap();
        assert_eq!(h.maps()[0].get([10, 20, 30]), 1.0);
        let at_sigma = h.maps()[0].get([10, 20, 31]) as f64;
        let expected = (-(g.voxel_size() / sigma).powi(2) / 2.0).exp();
        assert!((at_sigma - expected).abs() < 1e-6);
        let back = decode_heatmaps(&h).unwrap();
        assert!((back.joints()[0] - c).norm() < 1e-4);
    }

    #[test]
    fn value_one_sigma_away() {
        let f = CubeFrame::centered(Vec3::zeros());
        let g = VoxelGrid::for_frame(&f, 44, GridKind::Probability).unwrap();
        let c = g.voxel_center([5, 5, 5]);
        let sigma = g.voxel_size();
        let h = make_heatmaps(&JointSet::new(vec![c]).unwrap(), &f, 44, sigma).unwrap();
        assert!((h.maps()[0].get([6, 5, 5]) as f64 - (-0.5f64).exp()).abs() < 1e-7);
        assert!((0.6065 - (-0.5f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn decode_tie_prefers_lowest_index() {
        let mut data = vec![0.0f32; 27];
        data[5] = 0.9;
        data[20] = 0.9;
        let g = VoxelGrid::new([3; 3], Vec3::zeros(), 1.0, GridKind::Probability, data).unwrap();
        let h = HeatmapStack::new(vec![g.clone()], 1.0).unwrap();
        let j = decode_heatmaps(&h).unwrap();
        // voxel 20 = (2,0,2) is outside the block around (2,1,0)
        let expected = g.voxel_center(g.voxel_coords(5));
        assert!((j.joints()[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn errors() {
        let f = CubeFrame::centered(Vec3::zeros());
        let outside = JointSet::new(vec![Vec3::new(0.0, 0.0, 200.0)]).unwrap();
        assert!(make_heatmaps(&outside, &f, 44, 5.0).is_err());
        assert!(make_heatmaps(&JointSet::default(), &f, 44, 5.0).is_err());
        let inside = JointSet::new(vec![Vec3::zeros()]).unwrap();
        assert!(make_heatmaps(&inside, &f, 44, 0.0).is_err());
        let zero = VoxelGrid::zeros([4; 3], Vec3::zeros(), 1.0, GridKind::Probability).unwrap();
        assert!(decode_heatmaps(&HeatmapStack::new(vec![zero], 1.0).unwrap()).is_err());
    }
}
