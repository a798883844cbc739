//! Parametric copula models for grouped data: Gaussian, exchangeable
//! Archimedean and two-level nested Archimedean.

pub mod archimedean;
pub mod generator;
pub mod nested;
pub mod sampling;

#[cfg(test)]
pub(crate) mod testing;

use serde::Serialize;

pub use archimedean::{archimedean_cdf, archimedean_density, archimedean_log_density, BOUNDARY_EPS, MAX_DENSITY_DIM};
pub use generator::{ArchimedeanGenerator, Family};
pub use nested::{NestedArchimedeanCopula, NestedChild, MAX_NESTED_DIM};
pub use sampling::Sampler;

use crate::data::{BlockCorrelationMatrix, GroupStructure};
use crate::error::{Error, Result};
use crate::gaussian::GaussianPair;
use crate::linalg::{cholesky, inverse, log_det, quad_form};
use crate::normal::norm_quantile;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CopulaModel {
    Gaussian(BlockCorrelationMatrix),
    /// One exchangeable Archimedean copula over all `q` coordinates; the
    /// structure only declares how coordinates are grouped.
    Archimedean { generator: ArchimedeanGenerator, structure: GroupStructure },
    Nested(NestedArchimedeanCopula),
}

impl CopulaModel {
    pub fn archimedean(generator: ArchimedeanGenerator, structure: GroupStructure) -> Self {
        CopulaModel::Archimedean { generator, structure }
    }

    pub fn structure(&self) -> &GroupStructure {
        match self {
            CopulaModel::Gaussian(r) => r.structure(),
            CopulaModel::Archimedean { structure, .. } => structure,
            CopulaModel::Nested(c) => c.structure(),
        }
    }

    pub fn q(&self) -> usize {
        self.structure().q()
    }

    /// True when the model makes the groups exactly independent.
    pub fn groups_independent(&self) -> bool {
        match self {
            CopulaModel::Gaussian(r) => r.is_block_diagonal(),
            CopulaModel::Archimedean { generator, structure } => generator.is_independence() || structure.k() == 1,
            CopulaModel::Nested(c) => c.groups_independent(),
        }
    }

    /// A compact description such as `nested-gumbel(3;3,4)`.
    pub fn describe(&self) -> String {
        match self {
            CopulaModel::Gaussian(r) => format!("gaussian(q={})", r.q()),
            CopulaModel::Archimedean { generator, structure } => {
                format!("{}(theta={}, q={})", generator.family, generator.theta, structure.q())
            }
            CopulaModel::Nested(c) => {
                let kids: Vec<String> = c.children.iter().map(|k| format!("{}x{}", k.generator.theta, k.dim)).collect();
                format!("nested-{}({}; {})", c.family(), c.root.theta, kids.join(", "))
            }
        }
    }

    /// `log c(u)`.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.q() {
            return Err(Error::Dimension(format!("point has {} coordinates, model has {}", u.len(), self.q())));
        }
        match self {
            CopulaModel::Gaussian(r) => {
                archimedean::check_interior(u)?;
                gaussian_copula_log_density(r.matrix(), u)
            }
            CopulaModel::Archimedean { generator, .. } => archimedean_log_density(generator, u),
            CopulaModel::Nested(c) => c.log_density(u),
        }
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.log_density(u).map(f64::exp)
    }

    /// `log c_i(u_i)` for group `i`, on that group's coordinates only.
    pub fn group_log_density(&self, i: usize, ui: &[f64]) -> Result<f64> {
        match self {
            CopulaModel::Gaussian(r) => {
                archimedean::check_interior(ui)?;
                gaussian_copula_log_density(&r.block(i, i), ui)
            }
            CopulaModel::Archimedean { generator, .. } => archimedean_log_density(generator, ui),
            CopulaModel::Nested(c) => c.child_log_density(i, ui),
        }
    }

    /// Copula cdf.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        match self {
            CopulaModel::Gaussian(_) => Err(Error::DensityUnavailable("the Gaussian copula cdf is not provided".into())),
            CopulaModel::Archimedean { generator, .. } => Ok(archimedean_cdf(generator, u)),
            CopulaModel::Nested(c) => Ok(c.cdf(u)),
        }
    }

    /// Builds a reusable evaluator of `log c(u) − Σ log c_i(u_i)`.
    pub fn log_ratio_evaluator(&self) -> Result<LogRatio<'_>> {
        Ok(match self {
            CopulaModel::Gaussian(r) => LogRatio::Gaussian(Box::new(GaussianPair::new(r)?)),
            _ => LogRatio::Generic(self),
        })
    }

    /// Free parameters in a fixed order (for Gaussian: the strict upper
    /// triangle of the off-diagonal blocks is not exposed, so this is empty).
    pub fn params(&self) -> Vec<f64> {
        match self {
            CopulaModel::Gaussian(_) => Vec::new(),
            CopulaModel::Archimedean { generator, .. } => vec![generator.theta],
            CopulaModel::Nested(c) => c.params(),
        }
    }

    /// Same model shape with new parameters.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        match self {
            CopulaModel::Gaussian(_) => Err(Error::InvalidParameter("Gaussian models are not parameterized by theta".into())),
            CopulaModel::Archimedean { generator, structure } => {
                let [th] = params else {
                    return Err(Error::Dimension("an Archimedean model has one parameter".into()));
                };
                Ok(Self::archimedean(ArchimedeanGenerator::new(generator.family, *th)?, structure.clone()))
            }
            CopulaModel::Nested(c) => c.with_params(params).map(CopulaModel::Nested),
        }
    }

    pub fn sampler(&self) -> Result<Sampler> {
        Sampler::new(self)
    }
}

/// Evaluator of the log density ratio between a model and its
/// independent-groups counterpart.
pub enum LogRatio<'a> {
    Gaussian(Box<GaussianPair>),
    Generic(&'a CopulaModel),
}

impl LogRatio<'_> {
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        match self {
            LogRatio::Gaussian(pair) => {
                archimedean::check_interior(u)?;
                let z: Vec<f64> = u.iter().map(|&x| norm_quantile(x)).collect();
                Ok(pair.log_ratio(&z))
            }
            LogRatio::Generic(model) => {
                let joint = model.log_density(u)?;
                let mut marg = 0.0;
                for (i, r) in model.structure().ranges().enumerate() {
                    marg += model.group_log_density(i, &u[r])?;
                }
                Ok(joint - marg)
            }
        }
    }
}

/// `log c(u) = −½ log|R| − ½ zᵀ(R⁻¹ − I)z`, `z = Φ⁻¹(u)`.
pub fn gaussian_copula_log_density(r: &nalgebra::DMatrix<f64>, u: &[f64]) -> Result<f64> {
    let chol = cholesky(r)?;
    let mut m = inverse(&chol);
    for i in 0..m.nrows() {
        m[(i, i)] -= 1.0;
    }
    let z: Vec<f64> = u.iter().map(|&x| norm_quantile(x)).collect();
    Ok(-0.5 * log_det(&chol) - 0.5 * quad_form(&m, &z))
}
