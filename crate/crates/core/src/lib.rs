//! Carleman-linearized D1Q3 lattice Boltzmann model of the one-dimensional
//! shallow water equations.
//!
//! The pipeline runs initial field → Carleman generator → forward-Euler block
//! system → classical solve → observables. Condition numbers of the block
//! system and inverse-polynomial degrees give the cost model for a quantum
//! linear solver.
//!
//! ```
//! use swe_carleman::{assemble, embed_state, initial_field, solve, CarlemanMatrix, PhysParams, SolveMethod};
//!
//! let p = PhysParams::default();
//! let c = CarlemanMatrix::build(&p).unwrap();
//! let f0 = initial_field(&[1.01, 1.01, 1.0, 1.0], &[0.0; 4]).unwrap();
//! let sys = assemble(&c.total, &embed_state(&f0), p.dt, p.timesteps).unwrap();
//! let report = solve(&sys, SolveMethod::BlockForward).unwrap();
//! assert!(report.residual < 1e-10);
//! ```

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod carleman;
pub mod error;
pub mod euler;
pub mod io;
pub mod lattice;
pub mod qsvt;
pub mod solver;
pub mod sparse;

pub use carleman::{
    build_collision_matrix, build_streaming_matrix, carleman_dim, embed_state, extract_state,
    lift_to_grid, transfer_matrix, CarlemanMatrix, FMatrixSet,
};
pub use error::{Error, Result};
pub use euler::{assemble, extract_observables, step_explicitly, EulerSystem, ObservableSeries};
pub use lattice::{
    equilibrium, initial_field, integrate_reference, moments, rate, reference_step,
    DistributionField, LatticeD1Q3, Moments, MomentumClosure, PhysParams, StreamingScale,
    WeightSet,
};
pub use qsvt::{degree_scaling, inverse_poly, DegreeRow, InverseDomain, PolyApprox};
pub use solver::{
    condition_number, solve, solve_checked, KappaMethod, KappaReport, SolveMethod, SolveReport,
    DEFAULT_RESIDUAL_TOL,
};
pub use sparse::{CsrMatrix, TripletBuilder};
