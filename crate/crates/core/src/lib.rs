//! CP tensor decomposition by alternating least squares and Nesterov-accelerated ALS.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

pub mod accel;
pub mod error;
pub mod kruskal;
pub mod linalg;
pub mod linesearch;
pub mod problems;
pub mod scalar;
pub mod tensor;

pub use accel::{solve, RunStatus, RunTrace, SolveOutput, SolverConfig};
pub use error::{Error, Result};
pub use kruskal::{CpProblem, Evaluation, FlatIterate, KruskalModel, Layout};
pub use scalar::Scalar;
pub use tensor::{DenseTensor, Matrix};

pub type DenseTensorF64 = DenseTensor<f64>;
pub type DenseTensorF32 = DenseTensor<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type KruskalModelF64 = KruskalModel<f64>;
pub type KruskalModelF32 = KruskalModel<f32>;
pub type FlatIterateF64 = FlatIterate<f64>;
pub type FlatIterateF32 = FlatIterate<f32>;
pub type CpProblemF64 = CpProblem<f64>;
pub type CpProblemF32 = CpProblem<f32>;
pub type SolveOutputF64 = SolveOutput<f64>;
pub type SolveOutputF32 = SolveOutput<f32>;
