//! Dirichlet invariant processes: posterior sampling for random probability
//! measures that are invariant under a finite group of isometries.
//!
//! Everything is generic over the floating-point type through [`Scalar`];
//! the aliases at the crate root fix it to `f64`, and [`f32`] holds the
//! single-precision variants.

pub mod convergence;
pub mod dirichlet;
pub mod error;
pub mod geometry;
pub mod measures;
pub mod posterior;
pub mod scalar;
pub mod symmetry;

pub use convergence::{
    boundary_safe_boxes, box_grid, check_moments, check_moments_with, derive_seed, dip_moment_oracle, distort_measure,
    finite_dim_sample, finite_dim_sample_with, fit_with_group, invariance_gap, ks_distance, moment_oracle, replica_rng,
    sweep_k, sweep_m, ConvergenceReport, InvarianceGap, MomentOracle, ReportRow, SweepKind, WeightDistortion,
};
pub use dirichlet::{dp_posterior_params, sample_dirichlet, sample_dp, PathSampler};
pub use error::{Error, Result};
pub use measures::{centered_empirical, orbit_symmetrize_measure, symmetrized_dirac, symmetrized_empirical, Measure};
pub use posterior::{fit, fit_limit, fit_limit_with, fit_univariate_symmetric, five_step_sample, sample_path};
pub use scalar::Scalar;
pub use symmetry::{make_cyclic_group_2d, make_cyclic_group_3d, make_reflection_group, orbit};

pub type Point = geometry::Point<f64>;
pub type HalfOpenBox = geometry::HalfOpenBox<f64>;
pub type GroupElement = symmetry::GroupElement<f64>;
pub type GroupSpec = symmetry::GroupSpec<f64>;
pub type FiniteGroup = symmetry::FiniteGroup<f64>;
pub type Atom = measures::Atom<f64>;
pub type DiscreteMeasure = measures::DiscreteMeasure<f64>;
pub type BaseMeasure = measures::BaseMeasure<f64>;
pub type MixtureBase = measures::MixtureBase<f64>;
pub type DirichletParams = dirichlet::DirichletParams<f64>;
pub type DPParams = dirichlet::DPParams<f64>;
pub type TruncatedPath = dirichlet::TruncatedPath<f64>;
pub type DipPosterior = posterior::DipPosterior<f64>;
pub type PosteriorGroup = posterior::PosteriorGroup<f64>;
pub type MomentCheck = convergence::MomentCheck<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type Point = crate::geometry::Point<f32>;
    pub type HalfOpenBox = crate::geometry::HalfOpenBox<f32>;
    pub type FiniteGroup = crate::symmetry::FiniteGroup<f32>;
    pub type DiscreteMeasure = crate::measures::DiscreteMeasure<f32>;
    pub type BaseMeasure = crate::measures::BaseMeasure<f32>;
    pub type DipPosterior = crate::posterior::DipPosterior<f32>;
}
