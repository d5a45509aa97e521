//! Encodes the 21 joints of a hand as 3D Gaussian heatmaps and decodes them
//! back, printing the per-joint error.

use handvox::heatmap::{decode_heatmaps, make_heatmaps};
use handvox::synthhand::{sample_pose, HandModel};
use handvox::voxgrid::HEATMAP_GRID_DIM;
use handvox::CubeFrame;

fn main() -> handvox::Result<()> {
    let hand = HandModel::new().pose(&sample_pose(12))?;
    let frame = CubeFrame::centered(hand.palm_center());
    let voxel = frame.side() / HEATMAP_GRID_DIM as f64;
    let stack = make_heatmaps(&hand.joints, &frame, HEATMAP_GRID_DIM, 2.0 * voxel)?;
    let decoded = decode_heatmaps(&stack)?;

    println!("{} maps of {}^3, voxel {voxel:.2} mm", stack.len(), HEATMAP_GRID_DIM);
    for (i, (a, b)) in decoded.joints().iter().zip(hand.joints.joints()).enumerate() {
        println!("joint {i:>2}: error {:.2} mm", (a - b).norm());
    }
    println!("mean {:.2} mm", handvox::metrics::joint_error(&decoded, &hand.joints)?);
    Ok(())
}
