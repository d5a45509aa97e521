//! Lattice lookups over the occupied voxels of a grid.

use crate::voxgrid::VoxelGrid;
use crate::Vec3;

/// Occupied-voxel membership for nearest-centre and radius queries.
#[derive(Debug, Clone)]
pub struct OccupancyIndex {
    dims: [usize; 3],
    origin: Vec3,
    voxel_size: f64,
    occupied: Vec<bool>,
    count: usize,
}

impl OccupancyIndex {
    /// Indexes voxels with value `>= threshold`.
    pub fn new(grid: &VoxelGrid, threshold: f32) -> Self {
        let occupied: Vec<bool> = grid.data().iter().map(|&v| v >= threshold).collect();
        let count = occupied.iter().filter(|&&o| o).count();
        Self {
            dims: grid.dims(),
            origin: grid.origin(),
            voxel_size: grid.voxel_size(),
            occupied,
            count,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    #[inline]
    fn at(&self, i: [i64; 3]) -> bool {
        if (0..3).any(|a| i[a] < 0 || i[a] >= self.dims[a] as i64) {
            return false;
        }
        let [x, y, z] = i.map(|v| v as usize);
        self.occupied[(z * self.dims[1] + y) * self.dims[0] + x]
    }

    pub fn is_occupied(&self, i: [usize; 3]) -> bool {
        self.at(i.map(|v| v as i64))
    }

    pub fn center(&self, i: [i64; 3]) -> Vec3 {
        self.origin
            + Vec3::new(i[0] as f64 + 0.5, i[1] as f64 + 0.5, i[2] as f64 + 0.5) * self.voxel_size
    }

    fn max_shell(&self) -> i64 {
        self.dims.iter().copied().max().unwrap_or(0) as i64
    }

    /// Visits every lattice offset on the Chebyshev shell of radius `r` around `c`.
    fn for_shell(&self, c: [i64; 3], r: i64, mut f: impl FnMut([i64; 3])) {
        for dz in -r..=r {
            for dy in -r..=r {
                let on_face = dz.abs() == r || dy.abs() == r;
                if on_face {
                    for dx in -r..=r {
                        f([c[0] + dx, c[1] + dy, c[2] + dz]);
                    }
                } else {
                    f([c[0] - r, c[1] + dy, c[2] + dz]);
                    if r > 0 {
                        f([c[0] + r, c[1] + dy, c[2] + dz]);
                    }
                }
            }
        }
    }

    /// All occupied voxels at minimal squared lattice distance from voxel
    /// `from`, with that distance. Lattice distances are exact integers, so
    /// ties are exact. `None` when nothing is occupied.
    pub fn nearest_voxels(&self, from: [usize; 3]) -> Option<(i64, Vec<[usize; 3]>)> {
        if self.count == 0 {
            return None;
        }
        let c = from.map(|v| v as i64);
        let mut best = i64::MAX;
        let mut hits = Vec::new();
        let limit = self.max_shell();
        for r in 0..=limit {
            if r * r > best {
                break;
            }
            self.for_shell(c, r, |i| {
                if self.at(i) {
                    let d2 = (0..3).map(|a| (i[a] - c[a]).pow(2)).sum::<i64>();
                    if d2 < best {
                        best = d2;
                        hits.clear();
                    }
                    if d2 == best {
                        hits.push(i.map(|v| v as usize));
                    }
                }
            });
        }
        hits.sort_unstable_by_key(|&[x, y, z]| (z, y, x));
        Some((best, hits))
    }

    /// Distance from a world point to the nearest occupied voxel centre.
    pub fn nearest_distance(&self, p: &Vec3) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let u = (p - self.origin) / self.voxel_size - Vec3::repeat(0.5);
        let c = [u.x.round() as i64, u.y.round() as i64, u.z.round() as i64];
        // Offset from p to the shell's reference voxel, in voxels.
        let off = (0..3).map(|a| (u[a] - c[a] as f64).abs()).fold(0.0, f64::max);
        // Start where the grid begins if p lies far outside it.
        let outside = (0..3)
            .map(|a| {
                let lo = -c[a];
                let hi = c[a] - (self.dims[a] as i64 - 1);
                lo.max(hi).max(0)
            })
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        let limit = outside + self.max_shell();
        for r in outside..=limit {
            let shell_min = (r as f64 - off - 0.5).max(0.0) * self.voxel_size;
            if shell_min > best {
                break;
            }
            self.for_shell(c, r, |i| {
                if self.at(i) {
                    let d = (self.center(i) - p).norm();
                    if d < best {
                        best = d;
                    }
                }
            });
        }
        Some(best)
    }

    /// Calls `f(centre, squared distance)` for every occupied voxel centre
    /// within `radius` of `p`.
    pub fn for_each_within(&self, p: &Vec3, radius: f64, mut f: impl FnMut(&Vec3, f64)) {
        let lo = (p - Vec3::repeat(radius) - self.origin) / self.voxel_size - Vec3::repeat(0.5);
        let hi = (p + Vec3::repeat(radius) - self.origin) / self.voxel_size - Vec3::repeat(0.5);
        let mut a = [0i64; 3];
        let mut b = [0i64; 3];
        for k in 0..3 {
            a[k] = (lo[k].ceil() as i64).max(0);
            b[k] = (hi[k].floor() as i64).min(self.dims[k] as i64 - 1);
            if a[k] > b[k] {
                return;
            }
        }
        let r2 = radius * radius;
        for z in a[2]..=b[2] {
            for y in a[1]..=b[1] {
                for x in a[0]..=b[0] {
                    if self.at([x, y, z]) {
                        let c = self.center([x, y, z]);
                        let d2 = (c - p).norm_squared();
                        if d2 <= r2 {
                            f(&c, d2);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxgrid::GridKind;

    fn grid_with(points: &[[usize; 3]]) -> VoxelGrid {
        let mut g = VoxelGrid::zeros([10; 3], Vec3::new(-5.0, 0.0, 2.0), 2.0, GridKind::Occupancy).unwrap();
        for &p in points {
            g.set(p, 1.0).unwrap();
        }
        g
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let occ = [[1, 2, 3], [7, 7, 7], [4, 0, 9], [9, 9, 0]];
        let idx = OccupancyIndex::new(&grid_with(&occ), 0.5);
        let g = grid_with(&occ);
        for q in [[0usize, 0, 0], [5, 5, 5], [9, 0, 9], [1, 2, 3]] {
            let (d2, hits) = idx.nearest_voxels(q).unwrap();
            let brute = occ
                .iter()
                .map(|o| (0..3).map(|a| (o[a] as i64 - q[a] as i64).pow(2)).sum::<i64>())
                .min()
                .unwrap();
            assert_eq!(d2, brute);
            assert!(!hits.is_empty());
            let p = g.voxel_center(q) + Vec3::new(0.3, -0.2, 0.7);
            let brute_c = occ.iter().map(|o| (g.voxel_center(*o) - p).norm()).fold(f64::INFINITY, f64::min);
            assert!((idx.nearest_distance(&p).unwrap() - brute_c).abs() < 1e-12);
        }
        let far = Vec3::new(-100.0, 50.0, 300.0);
        let brute_far = occ.iter().map(|o| (g.voxel_center(*o) - far).norm()).fold(f64::INFINITY, f64::min);
        assert!((idx.nearest_distance(&far).unwrap() - brute_far).abs() < 1e-9);
    }

    #[test]
    fn within_radius() {
        let occ = [[1, 1, 1], [2, 1, 1], [5, 5, 5]];
        let g = grid_with(&occ);
        let idx = OccupancyIndex::new(&g, 0.5);
        let mut n = 0;
        idx.for_each_within(&g.voxel_center([1, 1, 1]), 2.0, |_, _| n += 1);
        assert_eq!(n, 2);
        assert!(OccupancyIndex::new(&grid_with(&[]), 0.5).nearest_voxels([0, 0, 0]).is_none());
    }
}
