mod common;

use handvox::augment::{
    rot_x, rot_y, rot_z, rotation_matrix, sample_params, transform_grid, transform_grid_with, transform_heatmaps, transform_joints,
    transform_joints_with, AugmentParams, Similarity,
};
use handvox::heatmap::{decode_heatmaps, make_heatmaps};
use handvox::synthhand::{sample_pose, HandModel};
use handvox::{CubeFrame, GridKind, JointSet, Vec3, VoxelGrid};
use nalgebra::{Matrix3, Rotation3};
use proptest::prelude::*;
use rand::Rng;

use common::rng;

fn random_grid(seed: u64, dim: usize, kind: GridKind) -> VoxelGrid {
    let mut r = rng(seed);
    let data = (0..dim * dim * dim)
        .map(|_| match kind {
            GridKind::Occupancy => r.random_bool(0.3) as u8 as f32,
            GridKind::Probability => r.random::<f32>(),
        })
        .collect();
    VoxelGrid::new([dim; 3], Vec3::new(1.0, -2.0, 3.0), 2.0, kind, data).unwrap()
}

#[test]
fn quarter_turns_permute_voxels() {
    for dim in [7, 8] {
        let g = random_grid(dim as u64, dim, GridKind::Probability);
        let m = dim - 1;
        let quarter = |rotation| Similarity { rotation, scale: 1.0, translation: Vec3::zeros() };
        let cases: [(Similarity, fn([usize; 3], usize) -> [usize; 3]); 4] = [
            (quarter(rot_z(90.0)), |[x, y, z], m| [m - y, x, z]),
            (quarter(rot_x(90.0)), |[x, y, z], m| [x, m - z, y]),
            (quarter(rot_y(-90.0)), |[x, y, z], m| [m - z, y, x]),
            (quarter(rot_z(180.0) * rot_x(-90.0)), |[x, y, z], m| [m - x, m - z, m - y]),
        ];
        for (t, map) in cases {
            let out = transform_grid_with(&g, &t).unwrap();
            for i in 0..g.len() {
                let src = g.voxel_coords(i);
                assert_eq!(out.get(map(src, m)), g.get(src), "{t:?} at {src:?}");
            }
        }
    }
}

#[test]
fn identity_is_exact_everywhere() {
    let id = AugmentParams::identity();
    for kind in [GridKind::Occupancy, GridKind::Probability] {
        let g = random_grid(3, 9, kind);
        assert_eq!(transform_grid(&g, &id).unwrap(), g);
    }
    let frame = CubeFrame::centered(Vec3::new(0.0, 40.0, 400.0));
    let hand = HandModel::new().pose(&sample_pose(5)).unwrap().translated(&Vec3::new(0.0, 0.0, 400.0));
    let h = make_heatmaps(&hand.joints, &frame, 16, 30.0).unwrap();
    assert_eq!(transform_heatmaps(&h, &id).unwrap(), h);
    let j = transform_joints(&hand.joints, &frame, 16, &id).unwrap();
    assert_eq!(j.joints, hand.joints);
}

#[test]
fn heatmaps_and_joints_move_together() {
    let model = HandModel::new();
    for seed in 1..20u64 {
        let hand = model.pose(&sample_pose(seed)).unwrap();
        let frame = CubeFrame::centered(hand.palm_center());
        let dim = 44;
        let vs = frame.side() / dim as f64;
        let stack = make_heatmaps(&hand.joints, &frame, dim, 2.0 * vs).unwrap();
        let mut p = sample_params(seed);
        p.translation /= 4.0;
        let moved = transform_joints(&hand.joints, &frame, dim, &p).unwrap();
        if !moved.all_inside() {
            continue;
        }
        let decoded = decode_heatmaps(&transform_heatmaps(&stack, &p).unwrap()).unwrap();
        let err = handvox::metrics::joint_error(&decoded, &moved.joints).unwrap();
        assert!(err < vs, "seed {seed}: {err} mm");
    }
}

#[test]
fn grid_round_trip_through_inverse_keeps_most_mass() {
    let frame = CubeFrame::centered(Vec3::zeros());
    let j = JointSet::new(vec![Vec3::new(10.0, -5.0, 3.0)]).unwrap();
    let h = make_heatmaps(&j, &frame, 32, 25.0).unwrap();
    let t = sample_params(17).similarity();
    let there = transform_grid_with(&h.maps()[0], &t).unwrap();
    let back = transform_grid_with(&there, &t.inverse()).unwrap();
    let diff: f64 = back.data().iter().zip(h.maps()[0].data()).map(|(a, b)| (a - b).abs() as f64).sum();
    let mass: f64 = h.maps()[0].data().iter().map(|v| *v as f64).sum();
    assert!(diff / mass < 0.1, "{}", diff / mass);
}

proptest! {
    #[test]
    fn rotation_is_product_of_axis_rotations(
        x in -40.0f64..=40.0, y in -40.0f64..=40.0, z in -120.0f64..=120.0,
    ) {
        let p = AugmentParams::new(x, y, z, 1.0, Vec3::zeros()).unwrap();
        let r = rotation_matrix(&p);
        let expect = Rotation3::from_axis_angle(&Vec3::x_axis(), x.to_radians())
            * Rotation3::from_axis_angle(&Vec3::y_axis(), y.to_radians())
            * Rotation3::from_axis_angle(&Vec3::z_axis(), z.to_radians());
        prop_assert!((r - expect.matrix()).amax() < 1e-12);
        prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_params_validate(seed in any::<u64>()) {
        prop_assert!(sample_params(seed).validate().is_ok());
    }

    #[test]
    fn joint_transform_inverts(seed in any::<u64>(), jx in -30.0f64..30.0, jy in -30.0f64..30.0, jz in -30.0f64..30.0) {
        let frame = CubeFrame::centered(Vec3::new(5.0, 6.0, 350.0));
        let j = JointSet::new(vec![frame.center() + Vec3::new(jx, jy, jz)]).unwrap();
        let t: Similarity = sample_params(seed).similarity();
        let there = transform_joints_with(&j, &frame, 88, &t).unwrap();
        prop_assume!(there.all_inside());
        let back = transform_joints_with(&there.joints, &frame, 88, &t.inverse()).unwrap();
        prop_assert!((back.joints.joints()[0] - j.joints()[0]).norm() < 1e-9);
    }

    #[test]
    fn occupancy_stays_binary(seed in any::<u64>()) {
        let g = random_grid(seed, 8, GridKind::Occupancy);
        let out = transform_grid(&g, &sample_params(seed)).unwrap();
        prop_assert!(out.data().iter().all(|v| *v == 0.0 || *v == 1.0));
        prop_assert_eq!(out.kind(), GridKind::Occupancy);
    }
}

/// Filled hand: the surface shell plus every voxel the outside cannot
/// reach through 6-connected empty voxels. The shell marks one endpoint of
/// every centre-to-centre segment crossing the surface, so the fill cannot
/// leak.
fn solid_hand(mesh: &handvox::Mesh, frame: &CubeFrame, dim: usize) -> VoxelGrid {
    let shell = handvox::voxgrid::voxelize_mesh(mesh, frame, dim).unwrap();
    let mut outside = vec![false; shell.len()];
    let mut stack = vec![[0usize; 3]];
    outside[0] = true;
    while let Some(q) = stack.pop() {
        for a in 0..3 {
            for step in [-1i64, 1] {
                let n = q[a] as i64 + step;
                if n < 0 || n >= dim as i64 {
                    continue;
                }
                let mut r = q;
                r[a] = n as usize;
                let i = shell.linear_index(r);
                if !outside[i] && shell.data()[i] == 0.0 {
                    outside[i] = true;
                    stack.push(r);
                }
            }
        }
    }
    let data = outside.iter().map(|&o| if o { 0.0 } else { 1.0 }).collect();
    shell.with_data(GridKind::Occupancy, data).unwrap()
}

#[test]
fn inverse_augmentation_recovers_solid_hands() {
    let model = HandModel::new();
    let (mut kept, mut occupied) = (0, 0);
    for seed in 1..=10u64 {
        let hand = model.pose(&sample_pose(seed)).unwrap();
        let frame = CubeFrame::centered(hand.palm_center());
        let grid = solid_hand(&hand.mesh, &frame, 88);
        let t = sample_params(seed).similarity();
        let back = transform_grid_with(&transform_grid_with(&grid, &t).unwrap(), &t.inverse()).unwrap();
        occupied += grid.count_at_least(0.5);
        kept += (0..grid.len()).filter(|&i| grid.data()[i] == 1.0 && back.data()[i] == 1.0).count();
    }
    assert!(kept as f64 >= 0.95 * occupied as f64, "kept {kept}/{occupied}");
}

proptest! {
    #[test]
    fn joint_distances_scale_exactly(seed in any::<u64>()) {
        let hand = HandModel::new().pose(&sample_pose(seed % 1000)).unwrap();
        let frame = CubeFrame::centered(hand.palm_center());
        let p = sample_params(seed);
        let moved = transform_joints(&hand.joints, &frame, 88, &p).unwrap();
        let (a, b) = (hand.joints.joints(), moved.joints.joints());
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let ratio = (b[i] - b[j]).norm() / (a[i] - a[j]).norm();
                prop_assert!((ratio - p.scale).abs() < 1e-9);
            }
        }
    }
}
