//! Poses the procedural hand with a few seeds and prints skeleton and
//! surface statistics.

use handvox::synthhand::{sample_pose, HandModel, JOINT_COUNT, VERTEX_COUNT};

fn main() -> handvox::Result<()> {
    let model = HandModel::new();
    println!("{VERTEX_COUNT} vertices, {} faces, {JOINT_COUNT} joints", model.faces().len());
    for seed in [0, 1, 2, 3] {
        let pose = sample_pose(seed);
        let hand = model.pose(&pose)?;
        let tip = hand.joints.joints()[12];
        let c = hand.palm_center();
        println!(
            "seed {seed}: index flexion {:5.1}/{:5.1}/{:5.1} deg, palm centre ({:6.1}, {:6.1}, {:6.1}), middle tip ({:6.1}, {:6.1}, {:6.1})",
            pose.fingers[1].mcp_flex, pose.fingers[1].pip_flex, pose.fingers[1].dip_flex,
            c.x, c.y, c.z, tip.x, tip.y, tip.z,
        );
    }
    Ok(())
}
