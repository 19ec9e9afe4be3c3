//! Quantum state diffusion and quantum jump unravelings of Markovian master
//! equations, with a density-matrix oracle, classical Duffing references and
//! stroboscopic surfaces of section.

mod band;
pub mod classical;
pub mod error;
pub mod fock;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod poincare;
pub mod trajectories;

pub use classical::{DuffingField, PhasePoint};
pub use error::{Error, Result};
pub use fock::{OperatorMatrix, StateVector, C64};
pub use model::{DuffingParams, HoParams, LindbladModel};
pub use noise::NoiseStream;
pub use oracle::DensityMatrix;
pub use poincare::{SectionPoint, SectionSeries};
pub use trajectories::{RunOptions, Scheme, TrajectoryRecord, Unraveling};
