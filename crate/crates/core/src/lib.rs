//! P1 finite element discretizations of the Gross–Pitaevskii equation
//!
//! `i u_t = -k Lap u + V u + beta |u|^2 u` with homogeneous Dirichlet
//! conditions on intervals and rectangles, five mass-conservative time
//! integrators, a Strang-splitting spectral comparison method, a
//! normalized-gradient-flow ground-state solver and the observables used to
//! compare them.
//!
//! Everything is generic over the floating point type (`f32` or `f64`);
//! the aliases below fix it to `f64`.
//!
//! ```
//! use gpe_core::{problems::{problem, Profile}, steppers::{SchemeId, StepParams}};
//! use gpe_core::evolution::{run_evolution, EvolutionOptions};
//!
//! let spec = problem("single_soliton", Profile::Desk).unwrap();
//! let ops = spec.operators::<f64>(gpe_core::Mesh64::interval(-30.0, 70.0, 512).unwrap()).unwrap();
//! let u0 = spec.exact_initial(ops.mesh()).unwrap();
//! let opts = EvolutionOptions::new(SchemeId::Re, StepParams::new(1.0 / 64.0, spec.beta), 8);
//! let (report, _) = run_evolution(&ops, u0, &opts, |_, _| None).unwrap();
//! assert_eq!(report.steps_taken, 8);
//! ```

pub mod assembly;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod mesh;
pub mod observables;
pub mod problems;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod sparse;
pub mod steppers;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub type Complex64 = num_complex::Complex<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type Space64 = quadrature::P1Space<f64>;
pub type Operators64 = assembly::Operators<f64>;
pub type StateVector64 = assembly::StateVector<f64>;
pub type QuadDensity64 = quadrature::QuadDensity<f64>;
pub type StepParams64 = steppers::StepParams<f64>;
pub type StepperState64 = steppers::StepperState<f64>;
pub type EvolutionOptions64 = evolution::EvolutionOptions<f64>;
pub type ErrorNorms64 = observables::ErrorNorms<f64>;
pub type GroundStateResult64 = problems::GroundStateResult<f64>;
pub type PeriodicGrid64 = spectral::PeriodicGrid<f64>;
pub type SplitStep64 = spectral::SplitStep<f64>;
