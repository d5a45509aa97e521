use thiserror::Error;

use crate::voxgrid::Mesh;

/// Errors produced by the grid, registration and file-format routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Mismatch(String),

    #[error("point ({x:.3}, {y:.3}, {z:.3}) lies outside the cube frame")]
    OutsideFrame { x: f64, y: f64, z: f64 },

    #[error("{0} contains no occupied voxels")]
    EmptyGrid(&'static str),

    /// More than half of the vertices found no target point within the
    /// correspondence radius. The mesh reached so far is kept.
    #[error("registration lost correspondences for {fraction:.1}% of vertices at iteration {iteration}")]
    NoCorrespondence {
        fraction: f64,
        iteration: usize,
        partial: Box<Mesh>,
    },

    #[error("{format} format error at {location}: {message}")]
    Format {
        format: &'static str,
        location: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch(msg.into())
    }

    pub(crate) fn outside(p: &crate::Vec3) -> Self {
        Error::OutsideFrame {
            x: p.x,
            y: p.y,
            z: p.z,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
