//! Registers perturbed synthetic hands onto their voxelized shapes with both
//! methods and reports the vertex error before and after.
//!
//! cargo run --release --example register_hands -- [count]

use handvox::metrics::vertex_error;
use handvox::register::{register_with_report, FieldRegistration, NrgaConfig, RegisterMethod};
use handvox::synthhand::{perturb_surface, sample_pose, HandModel};
use handvox::voxgrid::{voxelize_mesh, CubeFrame, SHAPE_GRID_DIM};

fn main() -> handvox::Result<()> {
    let count: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let model = HandModel::new();
    println!("seed  coarse   field    nrga   (mean vertex error, mm)");
    for seed in 1..=count {
        let hand = model.pose(&sample_pose(seed))?;
        let frame = CubeFrame::centered(hand.palm_center());
        let target = voxelize_mesh(&hand.mesh, &frame, SHAPE_GRID_DIM)?;
        let coarse = perturb_surface(&hand.mesh, 8.0, seed)?;

        let field = RegisterMethod::DisplacementField(FieldRegistration::default());
        let (by_field, _) = register_with_report(&coarse, &target, &field, &frame)?;
        let nrga = RegisterMethod::Nrga(NrgaConfig::for_grid(&target));
        let (by_nrga, report) = register_with_report(&coarse, &target, &nrga, &frame)?;

        println!(
            "{seed:>4} {:>7.2} {:>7.2} {:>7.2}   nrga: {} iterations, target distance {:.2} -> {:.2}",
            vertex_error(&coarse, &hand.mesh)?,
            vertex_error(&by_field, &hand.mesh)?,
            vertex_error(&by_nrga, &hand.mesh)?,
            report.iterations.len(),
            report.initial_target_distance,
            report.final_target_distance,
        );
    }
    Ok(())
}
