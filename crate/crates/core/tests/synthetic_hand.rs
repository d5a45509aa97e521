mod common;

use handvox::cli::{place_in_view, voxelize_depth};
use handvox::io;
use handvox::synthhand::{
    limits, palm_center, render_depth, sample_pose, HandModel, PoseParams, JOINT_COUNT, MAX_GLOBAL_ROTATION_DEG,
    MAX_GLOBAL_TRANSLATION_MM, VERTEX_COUNT,
};
use handvox::voxgrid::{depth_to_points, grid_to_points};
use handvox::{CameraIntrinsics, CubeFrame, Vec3};
use proptest::prelude::*;

use common::surface_distance;

fn bone_lengths(joints: &[Vec3]) -> Vec<f64> {
    HandModel::parents()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (joints[i] - joints[p]).norm()))
        .collect()
}

#[test]
fn bone_lengths_are_pose_invariant() {
    let model = HandModel::new();
    let rest = bone_lengths(model.pose(&PoseParams::rest()).unwrap().joints.joints());
    assert_eq!(rest.len(), JOINT_COUNT - 1);
    for seed in 1..200 {
        let posed = bone_lengths(model.pose(&sample_pose(seed)).unwrap().joints.joints());
        for (a, b) in rest.iter().zip(&posed) {
            assert!((a - b).abs() < 1e-9, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn sampled_poses_respect_limits() {
    for seed in 0..1000u64 {
        let p = sample_pose(seed);
        p.validate().unwrap();
        for (f, fp) in p.fingers.iter().enumerate() {
            let l = limits(f);
            assert!(fp.pip_flex >= l.pip_flex.0 && fp.pip_flex <= l.pip_flex.1);
        }
        assert!(p.global_rotation.amax() <= MAX_GLOBAL_ROTATION_DEG);
        assert!(p.global_translation.amax() <= MAX_GLOBAL_TRANSLATION_MM);
    }
}

#[test]
fn rendered_pixels_lie_on_the_surface() {
    let model = HandModel::new();
    let k = CameraIntrinsics::new(475.0, 475.0, 320.0, 240.0).unwrap();
    for seed in [1, 7, 30] {
        let hand = place_in_view(&model.pose(&sample_pose(seed)).unwrap());
        let depth = render_depth(&hand.mesh, &k, 640, 480).unwrap();
        let cloud = depth_to_points(&depth, &k);
        assert!(cloud.len() > 5000, "seed {seed}: {} pixels", cloud.len());
        // Check every 25th point against the exact surface.
        for p in cloud.points().iter().step_by(25) {
            let spacing = 0.5 * p.z / k.fx;
            let d = surface_distance(&hand.mesh, p);
            assert!(d <= 2.0 * spacing, "seed {seed}: {p:?} is {d} mm off the surface");
        }
    }
}

#[test]
fn voxelized_depth_stays_near_the_surface() {
    let model = HandModel::new();
    let k = CameraIntrinsics::new(475.0, 475.0, 320.0, 240.0).unwrap();
    let hand = place_in_view(&model.pose(&sample_pose(7)).unwrap());
    let depth = render_depth(&hand.mesh, &k, 640, 480).unwrap();
    let stored = io::read_depth(&io::write_depth(&depth).unwrap()).unwrap();
    let frame = CubeFrame::centered(hand.palm_center());
    let grid = voxelize_depth(&stored, &k, &frame, 88).unwrap();
    let reach = grid.voxel_size() * 3f64.sqrt();
    let centres = grid_to_points(&grid, 0.5);
    assert!(centres.len() > 500);
    for c in centres.points() {
        assert!(surface_distance(&hand.mesh, c) <= reach);
    }
}

#[test]
fn palm_center_is_mean_of_wrist_and_knuckles() {
    let hand = HandModel::new().pose(&sample_pose(12)).unwrap();
    let j = hand.joints.joints();
    let expect = (j[0] + j[1] + j[5] + j[9] + j[13] + j[17]) / 6.0;
    assert!((palm_center(&hand.joints) - expect).norm() < 1e-12);
    assert_eq!(hand.joints22().joints()[JOINT_COUNT], hand.palm_center());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_pose_keeps_topology(seed in any::<u64>()) {
        let model = HandModel::new();
        let hand = model.pose(&sample_pose(seed)).unwrap();
        prop_assert_eq!(hand.mesh.len(), VERTEX_COUNT);
        prop_assert_eq!(hand.mesh.faces(), model.faces());
        prop_assert_eq!(hand.joints.len(), JOINT_COUNT);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>()) {
        prop_assert_eq!(sample_pose(seed), sample_pose(seed));
    }
}
