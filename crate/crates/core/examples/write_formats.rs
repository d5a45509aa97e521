//! Writes one synthetic sample in every supported file format to a
//! directory and reads each file back.
//!
//! cargo run --example write_formats -- [out-dir]

use std::path::PathBuf;

use handvox::cli::place_in_view;
use handvox::heatmap::{default_sigma, make_heatmaps};
use handvox::io;
use handvox::register::gt_displacement_field;
use handvox::synthhand::{perturb_surface, render_depth, sample_pose, HandModel};
use handvox::voxgrid::{depth_to_points, voxelize_mesh, HEATMAP_GRID_DIM, SHAPE_GRID_DIM};
use handvox::{CameraIntrinsics, CubeFrame};

fn main() -> handvox::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("handvox-formats"));
    std::fs::create_dir_all(&dir)?;
    let k = CameraIntrinsics::new(475.0, 475.0, 320.0, 240.0)?;
    let hand = place_in_view(&HandModel::new().pose(&sample_pose(5))?);
    let frame = CubeFrame::centered(hand.palm_center());
    let depth = render_depth(&hand.mesh, &k, 640, 480)?;
    let coarse = perturb_surface(&hand.mesh, 8.0, 5)?;

    std::fs::write(dir.join("mesh.obj"), io::write_mesh(&hand.mesh))?;
    std::fs::write(dir.join("joints.json"), io::write_joints(&hand.joints))?;
    std::fs::write(dir.join("points.json"), io::write_points(&depth_to_points(&depth, &k)))?;
    std::fs::write(dir.join("depth.pgm"), io::write_depth(&depth)?)?;
    std::fs::write(dir.join("shape.vgrd"), io::write_grid(&voxelize_mesh(&hand.mesh, &frame, SHAPE_GRID_DIM)?))?;
    let sigma = default_sigma(&frame, HEATMAP_GRID_DIM);
    std::fs::write(dir.join("heatmaps.bin"), io::write_heatmaps(&make_heatmaps(&hand.joints, &frame, HEATMAP_GRID_DIM, sigma)?))?;
    std::fs::write(dir.join("field.vdsp"), io::write_field(&gt_displacement_field(&hand.mesh, &coarse, &frame, 32)?))?;

    println!("mesh      {} vertices", io::load_mesh(dir.join("mesh.obj"))?.len());
    println!("joints    {}", io::load_joints(dir.join("joints.json"))?.len());
    println!("points    {}", io::load_points(dir.join("points.json"))?.len());
    let d = io::load_depth(dir.join("depth.pgm"))?;
    println!("depth     {}x{}", d.width(), d.height());
    println!("shape     {} occupied", io::load_grid(dir.join("shape.vgrd"))?.count_at_least(0.5));
    println!("heatmaps  {}", io::load_heatmaps(dir.join("heatmaps.bin"))?.len());
    println!("field     {}^3", io::load_field(dir.join("field.vdsp"))?.dim());
    println!("written to {}", dir.display());
    Ok(())
}
