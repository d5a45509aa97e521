//! Evaluates the training losses and metrics on a predicted versus a
//! ground-truth hand.

use handvox::metrics::{
    bce_voxel, displacement_loss, euclidean_vertex_loss, total_loss, vertex_error, LossParts, SampleFlag,
};
use handvox::register::gt_displacement_field;
use handvox::synthhand::{perturb_surface, sample_pose, HandModel};
use handvox::voxgrid::{normalize_vertices, voxelize_mesh, SHAPE_GRID_DIM};
use handvox::CubeFrame;

fn main() -> handvox::Result<()> {
    let gt = HandModel::new().pose(&sample_pose(21))?;
    let pred = perturb_surface(&gt.mesh, 4.0, 21)?;
    let frame = CubeFrame::centered(gt.palm_center());

    let shape_gt = voxelize_mesh(&gt.mesh, &frame, SHAPE_GRID_DIM)?;
    let shape_pred = voxelize_mesh(&pred, &frame, SHAPE_GRID_DIM)?;
    let l_vs = bce_voxel(&shape_pred, &shape_gt)?.value;
    let l_vt = euclidean_vertex_loss(&normalize_vertices(&pred, &frame), &normalize_vertices(&gt.mesh, &frame))?.value;
    let field = gt_displacement_field(&gt.mesh, &pred, &frame, SHAPE_GRID_DIM)?;
    let zero = gt_displacement_field(&pred, &pred, &frame, SHAPE_GRID_DIM)?;

    println!("vertex error        {:.3} mm", vertex_error(&pred, &gt.mesh)?);
    println!("shape BCE           {l_vs:.5}");
    println!("surface loss        {l_vt:.5}");
    println!("displacement loss   {:.5}", displacement_loss(&zero, &field)?.value);
    let parts = LossParts {
        shape_voxels: l_vs,
        shape_surface: l_vt,
        ..LossParts::default()
    };
    println!("total, synthetic    {:.5}", total_loss(&parts, SampleFlag::SYNTHETIC)?.value);
    println!("total, real         {:.5}", total_loss(&parts, SampleFlag::REAL)?.value);
    Ok(())
}
