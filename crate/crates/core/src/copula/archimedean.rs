//! Exchangeable Archimedean copulas `C(u) = ψ(Σ ψ⁻¹(u_j))`.

use super::generator::{log_gumbel_coefficients, ArchimedeanGenerator, Family};
use crate::error::{Error, Result};

/// Points closer than this to a face of the unit cube are rejected.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Largest dimension with an available density.
pub const MAX_DENSITY_DIM: usize = 6;

pub(crate) fn check_interior(u: &[f64]) -> Result<()> {
    if u.iter().any(|&x| !(x > BOUNDARY_EPS && x < 1.0 - BOUNDARY_EPS)) {
        return Err(Error::Boundary(u.to_vec()));
    }
    Ok(())
}

/// `log c(u)` for the `d = u.len()` dimensional copula.
pub fn archimedean_log_density(g: &ArchimedeanGenerator, u: &[f64]) -> Result<f64> {
    let table = match g.family {
        Family::Gumbel if u.len() <= MAX_DENSITY_DIM => log_gumbel_coefficients(1.0 / g.theta, u.len()),
        _ => Vec::new(),
    };
    archimedean_log_density_with(g, u, &table)
}

/// [`archimedean_log_density`] with a precomputed Gumbel coefficient table of order `u.len()`.
pub(crate) fn archimedean_log_density_with(g: &ArchimedeanGenerator, u: &[f64], log_coeffs: &[f64]) -> Result<f64> {
    check_interior(u)?;
    let d = u.len();
    if d > MAX_DENSITY_DIM {
        return Err(Error::DensityUnavailable(format!(
            "Archimedean densities are available up to dimension {MAX_DENSITY_DIM}, got {d}"
        )));
    }
    if g.is_independence() || d == 1 {
        return Ok(0.0);
    }
    let t: f64 = u.iter().map(|&x| g.psi_inv(x)).sum();
    let jac: f64 = u.iter().map(|&x| g.log_abs_psi_inv_deriv(x)).sum();
    Ok(g.log_abs_derivative_with(t, d, log_coeffs) + jac)
}

/// Copula density `c(u) = |ψ^{(d)}(Σψ⁻¹(u_j))| ∏ |(ψ⁻¹)′(u_j)|`.
pub fn archimedean_density(g: &ArchimedeanGenerator, u: &[f64]) -> Result<f64> {
    archimedean_log_density(g, u).map(f64::exp)
}

/// Copula cdf on `[0, 1]^d`.
pub fn archimedean_cdf(g: &ArchimedeanGenerator, u: &[f64]) -> f64 {
    if u.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    let t: f64 = u.iter().map(|&x| g.psi_inv(x.min(1.0))).sum();
    g.psi(t)
}
