mod common;

use std::collections::BTreeSet;

use handvox::voxgrid::{
    crop_points, depth_to_points, grid_to_points, voxelize_mesh, voxelize_points, Boundary,
};
use handvox::{CameraIntrinsics, CubeFrame, DepthMap, GridKind, PointCloud, Vec3, VoxelGrid};
use proptest::prelude::*;
use rand::Rng;

use common::{icosphere, rng, surface_distance};

/// Per-point index by scanning the voxel boundaries along each axis.
fn scan_index(p: &Vec3, frame: &CubeFrame, dim: usize) -> [usize; 3] {
    let lo = frame.min_corner();
    let step = frame.side() / dim as f64;
    let mut out = [0; 3];
    for a in 0..3 {
        let mut i = 0;
        while i + 1 < dim && p[a] >= lo[a] + (i + 1) as f64 * step {
            i += 1;
        }
        out[a] = i;
    }
    out
}

fn occupied(g: &VoxelGrid) -> BTreeSet<[usize; 3]> {
    (0..g.len())
        .filter(|&i| g.data()[i] == 1.0)
        .map(|i| g.voxel_coords(i))
        .collect()
}

#[test]
fn point_voxelization_matches_boundary_scan() {
    let mut r = rng(11);
    for case in 0..40 {
        let center = common::random_point(&mut r, -200.0, 200.0);
        let frame = CubeFrame::new(center, r.random_range(50.0..400.0)).unwrap();
        let dim = r.random_range(1..=48);
        let n = r.random_range(0..=500);
        let h = frame.side() / 2.0;
        let pts: Vec<Vec3> = (0..n)
            .map(|_| center + common::random_point(&mut r, -h, h))
            .collect();
        let grid = voxelize_points(&PointCloud::new(pts.clone()).unwrap(), &frame, dim).unwrap();
        let expect: BTreeSet<_> = pts.iter().map(|p| scan_index(p, &frame, dim)).collect();
        assert_eq!(occupied(&grid), expect, "case {case}");
    }
}

#[test]
fn mesh_voxelization_matches_exhaustive_distance_test() {
    let frame = CubeFrame::new(Vec3::new(3.0, -2.0, 1.0), 60.0).unwrap();
    let sphere = icosphere(2, 17.0, Vec3::new(4.0, -1.0, 0.5));
    let dim = 24;
    let grid = voxelize_mesh(&sphere, &frame, dim).unwrap();
    let half = grid.voxel_size() / 2.0;
    let vertex_voxels: BTreeSet<_> = sphere.vertices().iter().map(|v| frame.voxel_index(v, dim)).collect();
    for i in 0..grid.len() {
        let idx = grid.voxel_coords(i);
        let near = surface_distance(&sphere, &grid.voxel_center(idx)) <= half + 1e-9;
        let expect = near || vertex_voxels.contains(&idx);
        assert_eq!(grid.data()[i] == 1.0, expect, "voxel {idx:?}");
    }
}

#[test]
fn trilinear_sampling_matches_eight_corner_sum() {
    let mut r = rng(5);
    let dims = [5, 6, 7];
    let data: Vec<f32> = (0..dims.iter().product::<usize>()).map(|_| r.random::<f32>()).collect();
    let g = VoxelGrid::new(dims, Vec3::zeros(), 1.0, GridKind::Probability, data).unwrap();
    for _ in 0..2000 {
        let u = Vec3::new(r.random_range(-1.5..5.5), r.random_range(-1.5..6.5), r.random_range(-1.5..7.5));
        for boundary in [Boundary::Zero, Boundary::Clamp] {
            let mut expect = 0.0;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let corner = [u.x.floor() as i64 + dx, u.y.floor() as i64 + dy, u.z.floor() as i64 + dz];
                        let w: f64 = (0..3)
                            .map(|a| {
                                let f = u[a] - u[a].floor();
                                if corner[a] == u[a].floor() as i64 { 1.0 - f } else { f }
                            })
                            .product();
                        let inside = (0..3).all(|a| corner[a] >= 0 && corner[a] < dims[a] as i64);
                        let value = match boundary {
                            Boundary::Zero if !inside => 0.0,
                            _ => {
                                let c: Vec<usize> =
                                    (0..3).map(|a| corner[a].clamp(0, dims[a] as i64 - 1) as usize).collect();
                                g.get([c[0], c[1], c[2]]) as f64
                            }
                        };
                        expect += w * value;
                    }
                }
            }
            assert!((g.sample(&u, boundary) - expect).abs() < 1e-12, "{u:?} {boundary:?}");
        }
    }
}

#[test]
fn back_projection_reprojects_to_pixels() {
    let k = CameraIntrinsics::new(475.0, 470.0, 160.0, 120.0).unwrap();
    let mut r = rng(2);
    let (w, h) = (320, 240);
    let depth: Vec<f64> = (0..w * h)
        .map(|_| if r.random_bool(0.3) { r.random_range(200.0..900.0) } else { 0.0 })
        .collect();
    let d = DepthMap::new(w, h, depth.clone()).unwrap();
    let cloud = depth_to_points(&d, &k);
    assert_eq!(cloud.len(), depth.iter().filter(|z| **z > 0.0).count());
    for p in cloud.points() {
        let (u, v) = k.project(p);
        let (ui, vi) = (u.round() as usize, v.round() as usize);
        assert!((u - ui as f64).abs() < 1e-9 && (v - vi as f64).abs() < 1e-9);
        assert_eq!(d.get(ui, vi), p.z);
    }
}

proptest! {
    #[test]
    fn occupied_centres_lie_within_half_diagonal_of_a_point(
        seed in any::<u64>(), dim in 1usize..40, n in 1usize..200,
    ) {
        let mut r = rng(seed);
        let frame = CubeFrame::centered(common::random_point(&mut r, -500.0, 500.0));
        let pts: Vec<Vec3> = (0..n).map(|_| frame.center() + common::random_point(&mut r, -150.0, 150.0)).collect();
        let grid = voxelize_points(&PointCloud::new(pts.clone()).unwrap(), &frame, dim).unwrap();
        let reach = grid.voxel_size() * 3f64.sqrt() / 2.0 + 1e-9;
        let centres = grid_to_points(&grid, 0.5);
        prop_assert!(centres.len() <= n);
        for c in centres.points() {
            prop_assert!(pts.iter().any(|p| (p - c).norm() <= reach));
        }
    }

    #[test]
    fn crop_then_voxelize_never_fails(seed in any::<u64>(), n in 0usize..300) {
        let mut r = rng(seed);
        let frame = CubeFrame::centered(Vec3::new(0.0, 0.0, 400.0));
        let pts: Vec<Vec3> = (0..n).map(|_| frame.center() + common::random_point(&mut r, -300.0, 300.0)).collect();
        let cropped = crop_points(&PointCloud::new(pts).unwrap(), &frame);
        prop_assert!(cropped.points().iter().all(|p| frame.contains(p)));
        prop_assert!(voxelize_points(&cropped, &frame, 88).is_ok());
    }
}
