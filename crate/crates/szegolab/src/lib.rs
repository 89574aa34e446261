//! Numerical laboratory for spaces of holomorphic sections of powers of a
//! positive line bundle over projective models.
//!
//! The crate constructs orthonormal bases of `H^0(CP^m, O(N))` under the
//! curvature-normalized inner product, evaluates Szego kernels and their
//! horizontal-derivative kernels on the unit circle bundle, and verifies the
//! universal near-diagonal scaling limits both exactly and by Monte Carlo:
//!
//! * near-diagonal kernel scaling toward the level-one Heisenberg kernel,
//! * the universal jet-covariance limit for random sections,
//! * spherical vs. Gaussian ensemble equivalence,
//! * diagonal density and asymptotic-isometry expansions,
//! * embedding-separation probes and sup-norm growth statistics.
//!
//! Entry points: [`model_geometry`] builds models, Heisenberg charts, and
//! quadrature grids; [`section_space`] builds orthonormal section bases;
//! [`kernel_engine`] evaluates kernels and scaling studies; [`measure_lab`]
//! houses the ensembles and generalized Gaussians; [`jpd_universality`] and
//! [`global_asymptotics`] run the convergence experiments; [`experiment`]
//! drives everything from a JSON config (see the `szegolab` binary and the
//! runnable examples).

pub mod autodiff;
pub mod experiment;
pub mod global_asymptotics;
pub mod jpd_universality;
pub mod kernel_engine;
pub mod linalg;
pub mod measure_lab;
pub mod model_geometry;
pub mod report;
pub mod rng;
pub mod section_space;
pub mod weight;

use std::sync::Arc;

pub use num_complex::Complex64 as C64;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// schema errors exit 2, resource caps exit 3, numerical breakdowns exit 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Invalid(_) => 2,
            Error::ResourceCap(_) => 3,
            Error::Numerical(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

/// Bundles a model with the section basis and a Heisenberg chart at a chosen
/// base point. Most experiments need all three per bundle power.
pub struct Workbench {
    pub model: Arc<model_geometry::ProjectiveModel>,
    pub basis: section_space::SectionBasis,
    pub chart: model_geometry::HeisenbergChart,
}

impl Workbench {
    /// Build model, basis, and chart at `base_point` for one bundle power.
    /// Uses exact monomial norms for the flat weight, quadrature otherwise.
    pub fn new(m: usize, n_power: u32, weight: &str, base_point: &[C64]) -> Result<Workbench> {
        let model = Arc::new(model_geometry::make_model(m, n_power, weight)?);
        let basis = section_space::build_basis(&model)?;
        let chart = model_geometry::make_heisenberg_chart(&model, base_point)?;
        Ok(Workbench { model, basis, chart })
    }
}
