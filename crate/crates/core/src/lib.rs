//! Numerical core of a voxel-based hand shape and pose pipeline.
//!
//! Depth maps are back-projected and voxelized into a palm-centred cube,
//! joints are encoded as volumetric Gaussian heatmaps, training samples are
//! augmented in 3D, and a fixed-topology hand mesh is registered onto a
//! voxelized shape. A procedural hand generator provides ground truth.

pub mod augment;
pub mod cli;
pub mod error;
pub mod geom;
pub mod heatmap;
pub mod io;
pub mod metrics;
pub mod register;
pub mod synthhand;
pub mod voxgrid;

/// Points and vectors in millimetres (or voxel units where stated).
pub type Vec3 = nalgebra::Vector3<f64>;

pub use error::{Error, Result};
pub use heatmap::{HeatmapStack, JointSet};
pub use voxgrid::{CameraIntrinsics, CubeFrame, DepthMap, GridKind, Mesh, PointCloud, VoxelGrid};
