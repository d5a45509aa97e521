use crate::error::{Error, Result};
use crate::register::index::OccupancyIndex;
use crate::voxgrid::{CubeFrame, Mesh, VoxelGrid};
use crate::Vec3;

/// Per-voxel 3-vectors (millimetres) on a cubic lattice, stored in the
/// same x-fastest order as [`VoxelGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    dim: usize,
    origin: Vec3,
    voxel_size: f64,
    vectors: Vec<Vec3>,
}

impl DisplacementField {
    pub fn new(dim: usize, origin: Vec3, voxel_size: f64, vectors: Vec<Vec3>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("displacement field dimension must be at least 1"));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) || !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("displacement field geometry must be finite with positive voxel size"));
        }
        if vectors.len() != dim * dim * dim {
            return Err(Error::mismatch(format!(
                "field of dim {dim} needs {} vectors, got {}",
                dim * dim * dim,
                vectors.len()
            )));
        }
        if vectors.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("displacement field has a non-finite vector"));
        }
        Ok(Self {
            dim,
            origin,
            voxel_size,
            vectors,
        })
    }

    pub fn zeros(dim: usize, origin: Vec3, voxel_size: f64) -> Result<Self> {
        Self::new(dim, origin, voxel_size, vec![Vec3::zeros(); dim * dim * dim])
    }

    pub fn for_frame(frame: &CubeFrame, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("displacement field dimension must be at least 1"));
        }
        Self::zeros(dim, frame.min_corner(), frame.side() / dim as f64)
    }

    /// Zero field on the lattice of `grid`.
    pub fn like(grid: &VoxelGrid) -> Result<Self> {
        if !grid.is_cubic() {
            return Err(Error::invalid("displacement fields live on cubic lattices"));
        }
        Self::zeros(grid.dims()[0], grid.origin(), grid.voxel_size())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.vectors
    }

    #[inline]
    pub fn linear_index(&self, [x, y, z]: [usize; 3]) -> usize {
        (z * self.dim + y) * self.dim + x
    }

    pub fn get(&self, idx: [usize; 3]) -> Vec3 {
        self.vectors[self.linear_index(idx)]
    }

    pub fn same_geometry(&self, other: &DisplacementField) -> bool {
        self.dim == other.dim && self.origin == other.origin && self.voxel_size == other.voxel_size
    }

    /// True when `p` lies inside the closed lattice extent.
    pub fn contains(&self, p: &Vec3) -> bool {
        let side = self.dim as f64 * self.voxel_size;
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] <= self.origin[a] + side)
    }

    /// Trilinear interpolation of the field at `p`; beyond the outermost
    /// voxel centres the border vectors are repeated.
    pub fn sample(&self, p: &Vec3) -> Vec3 {
        let n = self.dim as i64;
        let u = (p - self.origin) / self.voxel_size - Vec3::repeat(0.5);
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let f = u[a].floor();
            base[a] = f as i64;
            frac[a] = u[a] - f;
        }
        let mut acc = Vec3::zeros();
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
                idx[a] = (base[a] + hi as i64).clamp(0, n - 1) as usize;
            }
            if w != 0.0 {
                acc += self.get(idx) * w;
            }
        }
        acc
    }
}

fn same_lattice(a: &VoxelGrid, b: &VoxelGrid) -> bool {
    let tol = 1e-4 * a.voxel_size();
    a.dims() == b.dims()
        && (a.voxel_size() - b.voxel_size()).abs() <= tol
        && (a.origin() - b.origin()).abs().max() <= tol
}

/// Ground-truth field between two vertex-corresponding meshes: each vertex's
/// offset `gt − pred` lands in the voxel holding the predicted vertex.
/// Voxels hit several times keep the mean; untouched voxels stay zero.
pub fn gt_displacement_field(
    gt: &Mesh,
    pred: &Mesh,
    frame: &CubeFrame,
    dim: usize,
) -> Result<DisplacementField> {
    if gt.len() != pred.len() {
        return Err(Error::mismatch(format!(
            "vertex count {} vs {}",
            gt.len(),
            pred.len()
        )));
    }
    let mut field = DisplacementField::for_frame(frame, dim)?;
    let mut counts = vec![0u32; field.vectors.len()];
    for (g, p) in gt.vertices().iter().zip(pred.vertices()) {
        if !frame.contains(p) {
            return Err(Error::outside(p));
        }
        let i = field.linear_index(frame.voxel_index(p, dim));
        field.vectors[i] += g - p;
        counts[i] += 1;
    }
    for (v, &c) in field.vectors.iter_mut().zip(&counts) {
        if c > 1 {
            *v /= c as f64;
        }
    }
    Ok(field)
}

/// Tunables of the closed-form displacement estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Target voxel centres within this distance (mm) are averaged.
    /// Below one voxel this reduces to "self if occupied in the target".
    pub correspondence_radius: f64,
    /// Occupancy threshold applied to both grids.
    pub threshold: f32,
}

impl EstimatorConfig {
    pub fn for_grid(grid: &VoxelGrid) -> Self {
        Self {
            correspondence_radius: 0.5 * grid.voxel_size(),
            threshold: 0.5,
        }
    }
}

/// Non-learned stand-in for a displacement network. Every occupied source
/// voxel points to the centroid of target-occupied centres within the
/// correspondence radius, or, when there are none, to the nearest occupied
/// target centre (exact lattice ties are averaged). Other voxels are zero.
pub fn estimate_displacement_field(source: &VoxelGrid, target: &VoxelGrid) -> Result<DisplacementField> {
    estimate_displacement_field_with(source, target, &EstimatorConfig::for_grid(source))
}

pub fn estimate_displacement_field_with(
    source: &VoxelGrid,
    target: &VoxelGrid,
    cfg: &EstimatorConfig,
) -> Result<DisplacementField> {
    if !source.is_cubic() || !same_lattice(source, target) {
        return Err(Error::mismatch("source and target must share one cubic lattice"));
    }
    let tgt = OccupancyIndex::new(target, cfg.threshold);
    if tgt.is_empty() {
        return Err(Error::EmptyGrid("target grid"));
    }
    if source.count_at_least(cfg.threshold) == 0 {
        return Err(Error::EmptyGrid("source grid"));
    }
    let mut field = DisplacementField::like(source)?;
    for (i, &v) in source.data().iter().enumerate() {
        if v < cfg.threshold {
            continue;
        }
        let q = source.voxel_coords(i);
        let c = source.voxel_center(q);
        let mut sum = Vec3::zeros();
        let mut n = 0usize;
        tgt.for_each_within(&c, cfg.correspondence_radius, |p, _| {
            sum += p;
            n += 1;
        });
        if n == 0 {
            let (_, hits) = tgt.nearest_voxels(q).expect("target is non-empty");
            for h in &hits {
                sum += source.voxel_center(*h);
            }
            n = hits.len();
        }
        field.vectors[i] = sum / n as f64 - c;
    }
    Ok(field)
}

/// Moves every vertex by the trilinearly interpolated field at its position.
pub fn apply_field(mesh: &Mesh, field: &DisplacementField) -> Result<Mesh> {
    let mut out = Vec::with_capacity(mesh.len());
    for v in mesh.vertices() {
        if !field.contains(v) {
            return Err(Error::outside(v));
        }
        out.push(v + field.sample(v));
    }
    mesh.with_vertices(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxgrid::GridKind;

    #[test]
    fn identical_meshes_give_zero_field() {
        let f = CubeFrame::centered(Vec3::zeros());
        let m = Mesh::new(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-40.0, 0.0, 9.0)], vec![]).unwrap();
        let d = gt_displacement_field(&m, &m, &f, 64).unwrap();
        assert!(d.vectors().iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn one_moved_vertex_one_voxel() {
        let f = CubeFrame::centered(Vec3::zeros());
        let pred = Mesh::new(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-40.0, 0.0, 9.0)], vec![]).unwrap();
        let gt = pred
            .with_vertices(vec![Vec3::new(6.0, 2.0, 3.0), Vec3::new(-40.0, 0.0, 9.0)])
            .unwrap();
        let d = gt_displacement_field(&gt, &pred, &f, 64).unwrap();
        let nonzero: Vec<_> = d.vectors().iter().filter(|v| **v != Vec3::zeros()).collect();
        assert_eq!(nonzero, vec![&Vec3::new(5.0, 0.0, 0.0)]);
        assert_eq!(d.get(f.voxel_index(&Vec3::new(1.0, 2.0, 3.0), 64)), Vec3::new(5.0, 0.0, 0.0));
    }

    #[test]
    fn shared_voxel_stores_mean() {
        let f = CubeFrame::centered(Vec3::zeros());
        let pred = Mesh::new(vec![Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.1, 1.1, 1.1)], vec![]).unwrap();
        let gt = pred.with_vertices(vec![Vec3::new(3.0, 1.0, 1.0), Vec3::new(1.1, 1.1, 5.1)]).unwrap();
        let d = gt_displacement_field(&gt, &pred, &f, 64).unwrap();
        assert!((d.get(f.voxel_index(&pred.vertices()[0], 64)) - Vec3::new(1.0, 0.0, 2.0)).norm() < 1e-12);
        assert!(gt_displacement_field(&gt, &Mesh::new(vec![], vec![]).unwrap(), &f, 64).is_err());
    }

    fn sparse_grid(points: &[[usize; 3]]) -> VoxelGrid {
        let mut g = VoxelGrid::zeros([16; 3], Vec3::new(-8.0, -8.0, -8.0), 1.0, GridKind::Occupancy).unwrap();
        for &p in points {
            g.set(p, 1.0).unwrap();
        }
        g
    }

    #[test]
    fn self_estimate_is_zero() {
        let g = sparse_grid(&[[3, 3, 3], [3, 4, 3], [10, 2, 7], [11, 2, 7]]);
        let d = estimate_displacement_field(&g, &g).unwrap();
        assert!(d.vectors().iter().all(|v| *v == Vec3::zeros()));
    }

    #[test]
    fn shifted_plane_gives_uniform_vectors() {
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        for y in 2..12 {
            for z in 3..9 {
                src.push([4, y, z]);
                tgt.push([6, y, z]);
            }
        }
        let s = sparse_grid(&src);
        let t = sparse_grid(&tgt);
        let cfg = EstimatorConfig {
            correspondence_radius: 1.5,
            threshold: 0.5,
        };
        let d = estimate_displacement_field_with(&s, &t, &cfg).unwrap();
        for p in &src {
            assert_eq!(d.get(*p), Vec3::new(2.0, 0.0, 0.0));
        }
        let n_nonzero = d.vectors().iter().filter(|v| **v != Vec3::zeros()).count();
        assert_eq!(n_nonzero, src.len());
    }

    #[test]
    fn empty_grids_rejected() {
        let g = sparse_grid(&[[1, 1, 1]]);
        let e = sparse_grid(&[]);
        assert!(matches!(estimate_displacement_field(&g, &e), Err(Error::EmptyGrid(_))));
        assert!(matches!(estimate_displacement_field(&e, &g), Err(Error::EmptyGrid(_))));
    }

    #[test]
    fn constant_field_translates() {
        let mut f = DisplacementField::zeros(8, Vec3::zeros(), 2.0).unwrap();
        for v in &mut f.vectors {
            *v = Vec3::new(5.0, 0.0, 0.0);
        }
        let m = Mesh::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(7.3, 15.9, 16.0)], vec![]).unwrap();
        let out = apply_field(&m, &f).unwrap();
        for (a, b) in out.vertices().iter().zip(m.vertices()) {
            assert!((a - b - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
        }
        let zero = DisplacementField::zeros(8, Vec3::zeros(), 2.0).unwrap();
        assert_eq!(apply_field(&m, &zero).unwrap(), m);
        let outside = Mesh::new(vec![Vec3::new(-0.1, 0.0, 0.0)], vec![]).unwrap();
        assert!(apply_field(&outside, &zero).is_err());
    }
}
