//! Dense voxel grids and the conversions feeding them.
//!
//! Everything downstream (heatmaps, augmentation, losses, registration)
//! works on [`VoxelGrid`]. Grids are built from depth maps via
//! [`depth_to_points`] → [`crop_points`] → [`voxelize_points`], or from a
//! surface mesh via [`voxelize_mesh`].
//!
//! Coordinates are millimetres in the camera frame. Voxel indices are
//! 0-based; voxel `(i, j, k)` covers
//! `origin + [i, i+1) × [j, j+1) × [k, k+1) · voxel_size`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geom::closest_point_on_triangle;
use crate::Vec3;

/// Default edge length of the hand-centred cube, in millimetres.
pub const DEFAULT_CUBE_SIDE: f64 = 300.0;
/// Resolution of the voxelized depth map.
pub const INPUT_GRID_DIM: usize = 88;
/// Resolution of the joint heatmaps and of the resized depth grid.
pub const HEATMAP_GRID_DIM: usize = 44;
/// Resolution of the voxelized hand shape and of displacement fields.
pub const SHAPE_GRID_DIM: usize = 64;

/// Pinhole camera intrinsics, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::invalid("focal lengths must be positive and finite"));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid("principal point must be finite"));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

impl Default for CameraIntrinsics {
    /// A 640×480 depth sensor with a centred principal point.
    fn default() -> Self {
        Self {
            fx: 475.0,
            fy: 475.0,
            cx: 320.0,
            cy: 240.0,
        }
    }
}

/// Row-major range image in millimetres; `0` marks a missing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, depth: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("depth map must have non-zero size"));
        }
        if depth.len() != width * height {
            return Err(Error::mismatch(format!(
                "depth map {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                depth.len()
            )));
        }
        if let Some(bad) = depth.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::invalid(format!("depth value {bad} is not a finite non-negative range")));
        }
        Ok(Self { width, height, depth })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.width + u]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.depth
    }
}

/// Unordered 3D points in millimetres.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("point cloud contains a non-finite coordinate"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

/// What the scalars of a [`VoxelGrid`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    /// Binary occupancy, every value is exactly 0 or 1.
    Occupancy,
    /// Per-voxel probability in `[0, 1]`.
    Probability,
}

/// How a trilinear sample treats neighbours that fall outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Out-of-range neighbours contribute 0.
    Zero,
    /// Out-of-range neighbours repeat the nearest border voxel.
    Clamp,
}

/// A dense scalar field on an axis-aligned regular lattice.
///
/// Storage is x-fastest: `index = (z * ny + y) * nx + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    origin: Vec3,
    voxel_size: f64,
    kind: GridKind,
    data: Vec<f32>,
}

impl VoxelGrid {
    pub fn new(
        dims: [usize; 3],
        origin: Vec3,
        voxel_size: f64,
        kind: GridKind,
        data: Vec<f32>,
    ) -> Result<Self> {
        check_geometry(dims, &origin, voxel_size)?;
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::mismatch(format!(
                "grid {:?} needs {n} values, got {}",
                dims,
                data.len()
            )));
        }
        for &v in &data {
            check_value(kind, v)?;
        }
        Ok(Self {
            dims,
            origin,
            voxel_size,
            kind,
            data,
        })
    }

    pub fn zeros(dims: [usize; 3], origin: Vec3, voxel_size: f64, kind: GridKind) -> Result<Self> {
        check_geometry(dims, &origin, voxel_size)?;
        Ok(Self {
            dims,
            origin,
            voxel_size,
            kind,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        })
    }

    /// An empty `dim³` grid covering `frame` exactly.
    pub fn for_frame(frame: &CubeFrame, dim: usize, kind: GridKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("grid dimension must be at least 1"));
        }
        Self::zeros([dim; 3], frame.min_corner(), frame.side() / dim as f64, kind)
    }

    /// Builds a grid whose values are already known to be valid for `kind`.
    pub(crate) fn from_parts(
        dims: [usize; 3],
        origin: Vec3,
        voxel_size: f64,
        kind: GridKind,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), dims[0] * dims[1] * dims[2]);
        Self {
            dims,
            origin,
            voxel_size,
            kind,
            data,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_cubic(&self) -> bool {
        self.dims[0] == self.dims[1] && self.dims[1] == self.dims[2]
    }

    /// Physical extent of the grid along each axis.
    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.dims[0] as f64 * self.voxel_size,
            self.dims[1] as f64 * self.voxel_size,
            self.dims[2] as f64 * self.voxel_size,
        )
    }

    /// The cube this grid covers, if it is cubic.
    pub fn frame(&self) -> Option<CubeFrame> {
        if !self.is_cubic() {
            return None;
        }
        let side = self.extent().x;
        CubeFrame::new(self.origin + Vec3::repeat(side / 2.0), side).ok()
    }

    #[inline]
    pub fn linear_index(&self, [x, y, z]: [usize; 3]) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn voxel_coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let yz = index / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    pub fn get(&self, idx: [usize; 3]) -> f32 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], value: f32) -> Result<()> {
        if idx.iter().zip(self.dims).any(|(&i, d)| i >= d) {
            return Err(Error::invalid(format!("voxel {idx:?} outside grid {:?}", self.dims)));
        }
        check_value(self.kind, value)?;
        let i = self.linear_index(idx);
        self.data[i] = value;
        Ok(())
    }

    /// World position of a voxel centre.
    pub fn voxel_center(&self, [x, y, z]: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.voxel_size
    }

    /// Continuous index coordinates of a world point; voxel centres sit at integers.
    pub fn continuous_index(&self, p: &Vec3) -> Vec3 {
        (p - self.origin) / self.voxel_size - Vec3::repeat(0.5)
    }

    /// The voxel containing `p`, or `None` outside the grid.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(t >= 0.0 && t < self.dims[a] as f64) {
                return None;
            }
            out[a] = t as usize;
        }
        Some(out)
    }

    pub fn count_at_least(&self, threshold: f32) -> usize {
        self.data.iter().filter(|&&v| v >= threshold).count()
    }

    pub fn same_geometry(&self, other: &VoxelGrid) -> bool {
        self.dims == other.dims && self.origin == other.origin && self.voxel_size == other.voxel_size
    }

    /// Trilinear sample at continuous index coordinates `u`.
    pub fn sample(&self, u: &Vec3, boundary: Boundary) -> f64 {
        let mut base = [0i64; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let f = u[a].floor();
            base[a] = f as i64;
            frac[a] = u[a] - f;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
                let i = base[a] + hi as i64;
                let n = self.dims[a] as i64;
                idx[a] = match boundary {
                    Boundary::Clamp => i.clamp(0, n - 1) as usize,
                    Boundary::Zero => {
                        if i < 0 || i >= n {
                            inside = false;
                            0
                        } else {
                            i as usize
                        }
                    }
                };
            }
            if w == 0.0 || !inside {
                continue;
            }
            acc += w * self.get(idx) as f64;
        }
        acc
    }

    /// Same lattice, different values; `kind` and values are re-validated.
    pub fn with_data(&self, kind: GridKind, data: Vec<f32>) -> Result<Self> {
        Self::new(self.dims, self.origin, self.voxel_size, kind, data)
    }
}

fn check_geometry(dims: [usize; 3], origin: &Vec3, voxel_size: f64) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid(format!("grid dims {dims:?} must all be >= 1")));
    }
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::invalid(format!("voxel size {voxel_size} must be positive")));
    }
    if !origin.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("grid origin must be finite"));
    }
    Ok(())
}

fn check_value(kind: GridKind, v: f32) -> Result<()> {
    let ok = match kind {
        GridKind::Occupancy => v == 0.0 || v == 1.0,
        GridKind::Probability => (0.0..=1.0).contains(&v),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("value {v} not valid for {kind:?} grid")))
    }
}

/// Triangle surface with a fixed vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("mesh has a non-finite vertex"));
        }
        let k = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= k) {
                return Err(Error::invalid(format!("face {fi} {f:?} indexes past {k} vertices")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::invalid(format!("face {fi} {f:?} is degenerate")));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Vertex count (K).
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Same faces, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::mismatch(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("mesh has a non-finite vertex"));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// Undirected edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                out.insert((a.min(b), a.max(b)));
            }
        }
        out
    }

    /// Sorted edge neighbours of every vertex.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for n in &mut adj {
            n.sort_unstable();
        }
        adj
    }

    /// Area-weighted vertex normals; vertices without faces get zero.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.vertices[i]);
            let fnrm = (b - a).cross(&(c - a));
            for &i in f {
                n[i] += fnrm;
            }
        }
        for v in &mut n {
            let len = v.norm();
            if len > 0.0 {
                *v /= len;
            }
        }
        n
    }

    pub fn centroid(&self) -> Vec3 {
        if self.vertices.is_empty() {
            return Vec3::zeros();
        }
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    pub fn translated(&self, t: &Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// An axis-aligned cube centred on the hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeFrame {
    center: Vec3,
    side: f64,
}

impl CubeFrame {
    pub fn new(center: Vec3, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::invalid(format!("cube side {side} must be positive")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("cube centre must be finite"));
        }
        Ok(Self { center, side })
    }

    /// A 300 mm cube around `center`.
    pub fn centered(center: Vec3) -> Self {
        Self {
            center,
            side: DEFAULT_CUBE_SIDE,
        }
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn min_corner(&self) -> Vec3 {
        self.center - Vec3::repeat(self.side / 2.0)
    }

    /// Closed-interval membership test.
    pub fn contains(&self, p: &Vec3) -> bool {
        let h = self.side / 2.0;
        (0..3).all(|a| p[a] >= self.center[a] - h && p[a] <= self.center[a] + h)
    }

    /// Voxel index of `p` on a `dim³` lattice over this cube, clamped to
    /// `[0, dim-1]` so points on the upper faces land in the last voxel.
    pub fn voxel_index(&self, p: &Vec3, dim: usize) -> [usize; 3] {
        let lo = self.min_corner();
        let mut out = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - lo[a]) / self.side * dim as f64).floor();
            out[a] = t.clamp(0.0, (dim - 1) as f64) as usize;
        }
        out
    }
}

/// Back-projects every pixel with a valid range through the pinhole model.
pub fn depth_to_points(depth: &DepthMap, k: &CameraIntrinsics) -> PointCloud {
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let z = depth.get(u, v);
            if z > 0.0 {
                points.push(Vec3::new(
                    (u as f64 - k.cx) * z / k.fx,
                    (v as f64 - k.cy) * z / k.fy,
                    z,
                ));
            }
        }
    }
    PointCloud { points }
}

/// Keeps the points inside the (closed) cube.
pub fn crop_points(cloud: &PointCloud, frame: &CubeFrame) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().filter(|p| frame.contains(p)).copied().collect(),
    }
}

/// Binary occupancy of a cropped point cloud on a `dim³` lattice over `frame`.
pub fn voxelize_points(cloud: &PointCloud, frame: &CubeFrame, dim: usize) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::for_frame(frame, dim, GridKind::Occupancy)?;
    for p in &cloud.points {
        if !frame.contains(p) {
            return Err(Error::outside(p));
        }
        let i = grid.linear_index(frame.voxel_index(p, dim));
        grid.data[i] = 1.0;
    }
    Ok(grid)
}

/// Trilinear resampling of a cubic grid to `dim³` over the same extent.
///
/// Occupancy grids are re-binarized with `value >= 0.5`.
pub fn resize_grid(grid: &VoxelGrid, dim: usize) -> Result<VoxelGrid> {
    if dim == 0 {
        return Err(Error::invalid("resize target dimension must be at least 1"));
    }
    if !grid.is_cubic() {
        return Err(Error::invalid("resize needs a cubic grid"));
    }
    let src = grid.dims[0];
    let ratio = src as f64 / dim as f64;
    let voxel_size = grid.voxel_size * ratio;
    let n = dim * dim * dim;
    let mut data = Vec::with_capacity(n);
    for z in 0..dim {
        for y in 0..dim {
            for x in 0..dim {
                let u = Vec3::new(
                    (x as f64 + 0.5) * ratio - 0.5,
                    (y as f64 + 0.5) * ratio - 0.5,
                    (z as f64 + 0.5) * ratio - 0.5,
                );
                let v = grid.sample(&u, Boundary::Clamp);
                data.push(finish_value(grid.kind, v));
            }
        }
    }
    Ok(VoxelGrid::from_parts([dim; 3], grid.origin, voxel_size, grid.kind, data))
}

/// Maps an interpolated value back into the grid's value domain.
pub(crate) fn finish_value(kind: GridKind, v: f64) -> f32 {
    match kind {
        GridKind::Occupancy => {
            if v >= 0.5 {
                1.0
            } else {
                0.0
            }
        }
        GridKind::Probability => v.clamp(0.0, 1.0) as f32,
    }
}

/// Surface-shell voxelization of a mesh.
///
/// A voxel is set when its centre is within `voxel_size / 2` of any face,
/// or when it contains a vertex.
pub fn voxelize_mesh(mesh: &Mesh, frame: &CubeFrame, dim: usize) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::for_frame(frame, dim, GridKind::Occupancy)?;
    for v in &mesh.vertices {
        if !frame.contains(v) {
            return Err(Error::outside(v));
        }
        let i = grid.linear_index(frame.voxel_index(v, dim));
        grid.data[i] = 1.0;
    }
    let half = grid.voxel_size / 2.0;
    let half_sq = half * half;
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| mesh.vertices[i]);
        let (lo, hi) = voxel_range(&grid, &[a, b, c], half);
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let i = grid.linear_index([x, y, z]);
                    if grid.data[i] == 1.0 {
                        continue;
                    }
                    let p = grid.voxel_center([x, y, z]);
                    let q = closest_point_on_triangle(&p, &a, &b, &c);
                    if (p - q).norm_squared() <= half_sq {
                        grid.data[i] = 1.0;
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Inclusive voxel index box whose centres may lie within `pad` of the points.
fn voxel_range(grid: &VoxelGrid, pts: &[Vec3], pad: f64) -> ([usize; 3], [usize; 3]) {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let mn = pts.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min) - pad;
        let mx = pts.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max) + pad;
        let n = grid.dims[a] as f64;
        let l = ((mn - grid.origin[a]) / grid.voxel_size - 0.5).floor().clamp(0.0, n - 1.0);
        let h = ((mx - grid.origin[a]) / grid.voxel_size - 0.5).ceil().clamp(0.0, n - 1.0);
        lo[a] = l as usize;
        hi[a] = h as usize;
    }
    (lo, hi)
}

/// Centres of all voxels whose value is at least `threshold`.
pub fn grid_to_points(grid: &VoxelGrid, threshold: f32) -> PointCloud {
    let points = grid
        .data
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(i, _)| grid.voxel_center(grid.voxel_coords(i)))
        .collect();
    PointCloud { points }
}

/// Maps vertices into `[-1, 1]³`: `(v - center) / (side / 2)`.
pub fn normalize_vertices(mesh: &Mesh, frame: &CubeFrame) -> Mesh {
    let h = frame.side / 2.0;
    Mesh {
        vertices: mesh.vertices.iter().map(|v| (v - frame.center) / h).collect(),
        faces: mesh.faces.clone(),
    }
}

/// Inverse of [`normalize_vertices`].
pub fn denormalize_vertices(mesh: &Mesh, frame: &CubeFrame) -> Mesh {
    let h = frame.side / 2.0;
    Mesh {
        vertices: mesh.vertices.iter().map(|v| v * h + frame.center).collect(),
        faces: mesh.faces.clone(),
    }
}
