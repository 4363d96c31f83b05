//! Multiphase mean curvature motion by diffusion-generated motion with a
//! sub-element representation of the interfaces.

pub mod error;
pub mod dmf;
pub mod driver;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod oracles;
pub mod scenarios;
pub mod simplex;

pub use error::{Error, Result};
pub use field::{PhaseLabels, Region, Shape, VectorField};
pub use mesh::{Point, Rect, TriMesh};
pub use simplex::ReferenceFrame;
