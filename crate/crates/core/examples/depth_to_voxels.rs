//! Renders a synthetic hand to a depth map, back-projects it and voxelizes
//! the points inside the palm-centred cube.

use handvox::cli::place_in_view;
use handvox::synthhand::{render_depth, sample_pose, HandModel};
use handvox::voxgrid::{crop_points, depth_to_points, voxelize_points, INPUT_GRID_DIM};
use handvox::{CameraIntrinsics, CubeFrame};

fn main() -> handvox::Result<()> {
    let k = CameraIntrinsics::new(475.0, 475.0, 320.0, 240.0)?;
    let hand = place_in_view(&HandModel::new().pose(&sample_pose(7))?);
    let depth = render_depth(&hand.mesh, &k, 640, 480)?;
    let cloud = depth_to_points(&depth, &k);

    let frame = CubeFrame::centered(hand.palm_center());
    let inside = crop_points(&cloud, &frame);
    let grid = voxelize_points(&inside, &frame, INPUT_GRID_DIM)?;

    let c = frame.center();
    println!("palm centre ({:.1}, {:.1}, {:.1}) mm", c.x, c.y, c.z);
    println!("{} foreground pixels, {} inside the cube", cloud.len(), inside.len());
    println!(
        "{}^3 grid, voxel {:.2} mm, {} occupied",
        grid.dims()[0],
        grid.voxel_size(),
        grid.count_at_least(0.5)
    );
    Ok(())
}
