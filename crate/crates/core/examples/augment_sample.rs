//! Applies random 3D augmentations to a voxelized hand and its joints and
//! checks that the augmented heatmaps still decode onto the moved joints.

use handvox::augment::{sample_params, transform_grid, transform_heatmaps_with, transform_joints};
use handvox::heatmap::{decode_heatmaps, make_heatmaps};
use handvox::metrics::joint_error;
use handvox::synthhand::{sample_pose, HandModel};
use handvox::voxgrid::{voxelize_mesh, HEATMAP_GRID_DIM, INPUT_GRID_DIM};
use handvox::CubeFrame;

fn main() -> handvox::Result<()> {
    let hand = HandModel::new().pose(&sample_pose(3))?;
    let frame = CubeFrame::centered(hand.palm_center());
    let grid = voxelize_mesh(&hand.mesh, &frame, INPUT_GRID_DIM)?;
    let voxel = frame.side() / HEATMAP_GRID_DIM as f64;
    let heat = make_heatmaps(&hand.joints, &frame, HEATMAP_GRID_DIM, 2.0 * voxel)?;

    for seed in 0..5 {
        let p = sample_params(seed);
        let moved_grid = transform_grid(&grid, &p)?;
        let moved = transform_joints(&hand.joints, &frame, INPUT_GRID_DIM, &p)?;
        // Translations are in voxels; the heatmap lattice is coarser.
        let t = p.similarity().with_translation_scaled(grid.voxel_size() / voxel);
        let decoded = decode_heatmaps(&transform_heatmaps_with(&heat, &t)?)?;
        println!(
            "seed {seed}: rot ({:+6.1}, {:+6.1}, {:+7.1}) deg, scale {:.3}, occupied {} -> {}, joints outside {:?}, heatmap/joint gap {:.2} mm",
            p.theta_x,
            p.theta_y,
            p.theta_z,
            p.scale,
            grid.count_at_least(0.5),
            moved_grid.count_at_least(0.5),
            moved.outside,
            joint_error(&decoded, &moved.joints)?,
        );
    }
    Ok(())
}
