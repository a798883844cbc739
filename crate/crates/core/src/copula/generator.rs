//! Archimedean generators and their derivatives.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest generator derivative exposed by [`ArchimedeanGenerator::derivative`].
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `ψ(t) = exp(−t^{1/θ})`, `θ ≥ 1`.
    Gumbel,
    /// `ψ(t) = (1 + t)^{−1/θ}`, `θ > 0`.
    Clayton,
}

impl Family {
    /// Smallest admissible parameter (inclusive for Gumbel, exclusive for Clayton).
    pub fn lower_bound(self) -> f64 {
        match self {
            Family::Gumbel => 1.0,
            Family::Clayton => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gumbel => "gumbel",
            Family::Clayton => "clayton",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A one-parameter Archimedean generator `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchimedeanGenerator {
    pub family: Family,
    pub theta: f64,
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}



/// Coefficients `b_{n,j}`, `j = 0..=n`, of the Gumbel derivative
/// `ψ^{(n)}(t) = (−1)ⁿ ψ(t) Σ_j b_{n,j} t^{j a − n}` with `a = 1/θ`.
///
/// Built from `b_{n+1,j} = a b_{n,j−1} + (n − j a) b_{n,j}`; every
/// coefficient is nonnegative for `θ ≥ 1`, so the sum has no cancellation.
pub(crate) fn gumbel_coefficients(a: f64, n: usize) -> Vec<f64> {
    let mut b = vec![1.0];
    for k in 0..n {
        let mut next = vec![0.0; k + 2];
        for (j, slot) in next.iter_mut().enumerate() {
            let from_prev = if j >= 1 { a * b[j - 1] } else { 0.0 };
            let stay = if j <= k { (k as f64 - j as f64 * a) * b[j] } else { 0.0 };
            // tiny negatives come only from rounding of k − j·a at θ = 1
            *slot = (from_prev + stay).max(0.0);
        }
        b = next;
    }
    b
}

/// `log b_{n,j}` (with `−∞` for vanishing coefficients).
pub(crate) fn log_gumbel_coefficients(a: f64, n: usize) -> Vec<f64> {
    gumbel_coefficients(a, n).into_iter().map(|c| if c > 0.0 { c.ln() } else { f64::NEG_INFINITY }).collect()
}

impl ArchimedeanGenerator {
    pub fn new(family: Family, theta: f64) -> Result<Self> {
        let ok = theta.is_finite()
            && match family {
                Family::Gumbel => theta >= 1.0,
                Family::Clayton => theta > 0.0,
            };
        if !ok {
            let range = match family {
                Family::Gumbel => "[1, inf)",
                Family::Clayton => "(0, inf)",
            };
            return Err(Error::InvalidParameter(format!("{family} theta must lie in {range}, got {theta}")));
        }
        Ok(Self { family, theta })
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        Self::new(Family::Gumbel, theta)
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        Self::new(Family::Clayton, theta)
    }

    /// True when the generator yields the independence copula.
    pub fn is_independence(&self) -> bool {
        self.family == Family::Gumbel && self.theta == 1.0
    }

    /// `ψ(t)`.
    pub fn psi(&self, t: f64) -> f64 {
        match self.family {
            Family::Gumbel => (-t.powf(1.0 / self.theta)).exp(),
            Family::Clayton => (-(t.ln_1p()) / self.theta).exp(),
        }
    }

    /// `ψ⁻¹(u)` for `u ∈ (0, 1]`.
    pub fn psi_inv(&self, u: f64) -> f64 {
        match self.family {
            Family::Gumbel => (-u.ln()).powf(self.theta),
            Family::Clayton => (-self.theta * u.ln()).exp_m1(),
        }
    }

    /// `log |(ψ⁻¹)′(u)|`.
    pub fn log_abs_psi_inv_deriv(&self, u: f64) -> f64 {
        let th = self.theta;
        let lu = u.ln();
        match self.family {
            Family::Gumbel => th.ln() + (th - 1.0) * (-lu).ln() - lu,
            Family::Clayton => th.ln() - (th + 1.0) * lu,
        }
    }

    /// `log |ψ^{(k)}(t)|` for `t > 0`; the sign of `ψ^{(k)}` is `(−1)^k`.
    pub fn log_abs_derivative(&self, t: f64, k: usize) -> f64 {
        match self.family {
            Family::Clayton => self.log_abs_derivative_with(t, k, &[]),
            Family::Gumbel => self.log_abs_derivative_with(t, k, &log_gumbel_coefficients(1.0 / self.theta, k)),
        }
    }

    /// As [`Self::log_abs_derivative`], with the Gumbel table from
    /// [`log_gumbel_coefficients`] supplied by the caller (ignored for Clayton).
    pub(crate) fn log_abs_derivative_with(&self, t: f64, k: usize, log_coeffs: &[f64]) -> f64 {
        let th = self.theta;
        match self.family {
            Family::Clayton => {
                let inv = 1.0 / th;
                (0..k).map(|j| (inv + j as f64).ln()).sum::<f64>() - (inv + k as f64) * t.ln_1p()
            }
            Family::Gumbel => {
                let a = 1.0 / th;
                let head = -t.powf(a);
                if k == 0 {
                    return head;
                }
                let lt = t.ln();
                head + log_sum_exp(
                    log_coeffs.iter().enumerate().skip(1).map(|(j, &c)| c + (j as f64 * a - k as f64) * lt),
                )
            }
        }
    }

    /// `ψ^{(order)}(t)` for `t ≥ 0` and `order ≤ 6`.
    pub fn derivative(&self, t: f64, order: usize) -> Result<f64> {
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter(format!("generator derivatives are available up to order {MAX_ORDER}")));
        }
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("generator argument must be >= 0, got {t}")));
        }
        if order == 0 {
            return Ok(self.psi(t));
        }
        if t == 0.0 {
            return Ok(match self.family {
                Family::Clayton => {
                    let inv = 1.0 / self.theta;
                    let mag: f64 = (0..order).map(|j| inv + j as f64).product();
                    if order % 2 == 1 { -mag } else { mag }
                }
                Family::Gumbel if self.theta == 1.0 => {
                    if order % 2 == 1 { -1.0 } else { 1.0 }
                }
                Family::Gumbel => {
                    if order % 2 == 1 { f64::NEG_INFINITY } else { f64::INFINITY }
                }
            });
        }
        let mag = self.log_abs_derivative(t, order).exp();
        Ok(if order % 2 == 1 { -mag } else { mag })
    }

    /// Kendall's tau of the bivariate copula.
    pub fn kendall_tau(&self) -> f64 {
        match self.family {
            Family::Gumbel => 1.0 - 1.0 / self.theta,
            Family::Clayton => self.theta / (self.theta + 2.0),
        }
    }
}
