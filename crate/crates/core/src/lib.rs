//! Adaptive P1 finite elements in space and variable-step BDF2 in time for
//! semilinear reaction-diffusion equations and the monodomain model, driven
//! by anisotropic a posteriori error estimators.

pub mod adapt;
pub mod bdf2;
pub mod driver;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod quadrature;
mod textio;

pub use error::{Error, Result};
pub use fem::{MeshData, NodalField, Operators};
pub use geometry::{ElementFrame, Metric, MetricField, Sym2};
pub use mesh::{Adjacency, Mesh, Point, Rect};
pub use models::{DiffusionCoefficient, IonicModel, ScalarReaction};
pub use textio::fmt_f64;
