//! Numerical toolkit for Markovian open quantum systems: GKSL generators in
//! vectorized form, full-counting statistics of trajectory observables,
//! quantum-jump Monte Carlo, and certification of precision/response bounds
//! (thermo-kinetic, inverse, and response-kinetic uncertainty relations).
//!
//! Everything is dense complex linear algebra sized for Hilbert dimensions of
//! a few tens; superoperators are `d²×d²` matrices acting on row-major
//! vectorized operators.

// Pull in the BLAS/LAPACK backend so its symbols reach the final binary.
extern crate openblas_src;

pub mod bounds;
pub mod config;
pub mod error;
pub mod linalg;
pub mod liouvillian;
pub mod models;
pub mod operators;
pub mod statistics;
pub mod trajectories;

pub use config::{FcsConfig, Tolerances};
pub use error::{Error, Result};
pub use linalg::{C64, CMat, CVec};
pub use operators::{
    ChannelId, CountingVector, DensityOperator, DetailedBalancePairing, HermitianOperator,
    JumpOperator, OpenSystem, SWeight, ValidationReport,
};

pub use liouvillian::{IntegratedPropagators, LiouvillianBundle, SuperOpKind, SuperOperatorMatrix};
pub use statistics::{ObservableStats, StatsMethod, ThermoRates};
pub use bounds::{BoundName, BoundReport, DeltaPhiMode, GapData};
pub use trajectories::{EnsembleEstimate, TrajectoryRecord};
