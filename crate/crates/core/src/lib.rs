//! Copula-based Φ-dependence between groups of random variables.
//!
//! The crate measures how far the joint copula of `k` groups of variables is
//! from the product of the group copulas, for a convex generator Φ. Two
//! estimation routes are provided:
//!
//! * a Gaussian-copula route built on the normal-scores rank correlation
//!   matrix, with closed forms for mutual information and the Hellinger
//!   distance and an asymptotic standard deviation ([`gaussian`]);
//! * a parametric route for Archimedean and nested Archimedean copulas:
//!   pseudo-likelihood fitting ([`mle`]) followed by Monte Carlo
//!   integration ([`mc`]).
//!
//! [`inference`] adds rolling-window series and two-period contagion tests.

pub mod copula;
pub mod data;
pub mod error;
pub mod gaussian;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod mc;
pub mod mle;
pub mod normal;
pub mod optim;
pub mod phi;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use copula::{ArchimedeanGenerator, CopulaModel, Family, NestedArchimedeanCopula, Sampler};
pub use data::{BlockCorrelationMatrix, GroupStructure, GroupedSample, MissingPolicy, PriceTable};
pub use error::{Error, Result};
pub use gaussian::{estimate_gaussian, GaussianDependenceResult, GaussianOptions, McConfig};
pub use inference::{contagion_test, rolling_dependence, ContagionTestResult, Direction, RollingSeries};
pub use mc::{estimate_hellinger_reduced, estimate_phi_mc, EstimatorForm, McDependenceEstimate};
pub use mle::FitResult;
pub use normal::TiePolicy;
pub use phi::{ExtendedReal, PhiFunction, PhiKind};
