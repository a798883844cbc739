//! Two-level nested Archimedean copulas
//! `C(u) = C₀(C₁(u₁), …, C_k(u_k))` within one family.
//!
//! The density is the mixed partial derivative of
//! `ψ₀(Σᵢ gᵢ(tᵢ))` with `tᵢ = Σⱼ ψᵢ⁻¹(u_ij)` and `gᵢ = ψ₀⁻¹ ∘ ψᵢ`, times the
//! Jacobian `∏ (ψᵢ⁻¹)′(u_ij)`. Faà di Bruno's formula applied once per group
//! gives
//!
//! `Σ_{m₁..m_k} ψ₀^{(Σm)}(S) ∏ᵢ B_{dᵢ,mᵢ}(gᵢ′, gᵢ″, …)`
//!
//! with partial Bell polynomials `B`. For both families `gᵢ` is a power
//! (`t^b` for Gumbel, `(1+t)^b − 1` for Clayton, `b = θ₀/θᵢ ≤ 1`), so every
//! term carries the same sign and the sum is accumulated in log space.

use serde::{Deserialize, Serialize};

use super::archimedean::{archimedean_cdf, archimedean_log_density_with, check_interior};
use super::generator::{log_gumbel_coefficients, log_sum_exp as lse, ArchimedeanGenerator, Family};
use crate::data::GroupStructure;
use crate::error::{Error, Result};

/// Largest total dimension for nested densities.
pub const MAX_NESTED_DIM: usize = 6;

/// A child copula of the root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedChild {
    pub generator: ArchimedeanGenerator,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedArchimedeanCopula {
    pub root: ArchimedeanGenerator,
    pub children: Vec<NestedChild>,
    #[serde(skip)]
    structure: GroupStructure,
    #[serde(skip)]
    tables: Tables,
}

/// Parameter-only quantities reused by every density evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
struct Tables {
    /// Root Gumbel coefficient tables indexed by derivative order.
    root: Vec<Vec<f64>>,
    /// Per child: Gumbel table of order `dᵢ`, `bᵢ = θ₀/θᵢ`, `log β_{dᵢ,m}`.
    children: Vec<(Vec<f64>, f64, Vec<f64>)>,
}

impl Tables {
    fn new(root: &ArchimedeanGenerator, children: &[NestedChild]) -> Self {
        let q: usize = children.iter().map(|c| c.dim).sum();
        if q > MAX_NESTED_DIM {
            return Self::default();
        }
        let gumbel = |g: &ArchimedeanGenerator, k: usize| match g.family {
            Family::Gumbel => log_gumbel_coefficients(1.0 / g.theta, k),
            Family::Clayton => Vec::new(),
        };
        Self {
            root: (0..=q).map(|k| gumbel(root, k)).collect(),
            children: children
                .iter()
                .map(|c| {
                    let b = root.theta / c.generator.theta;
                    (gumbel(&c.generator, c.dim), b, log_bell_row(b, c.dim))
                })
                .collect(),
        }
    }
}

impl NestedArchimedeanCopula {
    /// Validates family agreement and the sufficient nesting condition `θ₀ ≤ θᵢ`.
    pub fn new(root: ArchimedeanGenerator, children: Vec<NestedChild>) -> Result<Self> {
        if children.is_empty() {
            return Err(Error::InvalidParameter("a nested copula needs at least one child".into()));
        }
        for c in &children {
            if c.generator.family != root.family {
                return Err(Error::InvalidParameter(format!(
                    "child family {} differs from root family {}",
                    c.generator.family, root.family
                )));
            }
            if c.dim == 0 {
                return Err(Error::Dimension("child dimension must be positive".into()));
            }
            if root.theta > c.generator.theta {
                return Err(Error::NestingCondition { root: root.theta, child: c.generator.theta });
            }
        }
        let structure = GroupStructure::new(children.iter().map(|c| c.dim).collect())?;
        let tables = Tables::new(&root, &children);
        Ok(Self { root, children, structure, tables })
    }

    /// Convenience constructor from `θ₀` and `(θᵢ, dᵢ)` pairs.
    pub fn from_params(family: Family, theta0: f64, children: &[(f64, usize)]) -> Result<Self> {
        let root = ArchimedeanGenerator::new(family, theta0)?;
        let kids = children
            .iter()
            .map(|&(th, d)| Ok(NestedChild { generator: ArchimedeanGenerator::new(family, th)?, dim: d }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(root, kids)
    }

    pub fn family(&self) -> Family {
        self.root.family
    }

    pub fn structure(&self) -> &GroupStructure {
        &self.structure
    }

    pub fn q(&self) -> usize {
        self.structure.q()
    }

    /// Parameters `(θ₀, θ₁, …, θ_k)`.
    pub fn params(&self) -> Vec<f64> {
        std::iter::once(self.root.theta).chain(self.children.iter().map(|c| c.generator.theta)).collect()
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.children.len() + 1 {
            return Err(Error::Dimension("parameter vector length does not match the nesting".into()));
        }
        let dims: Vec<(f64, usize)> = self.children.iter().zip(&params[1..]).map(|(c, &th)| (th, c.dim)).collect();
        Self::from_params(self.family(), params[0], &dims)
    }

    /// True when the groups are mutually independent (Gumbel root with θ₀ = 1).
    pub fn groups_independent(&self) -> bool {
        self.root.is_independence()
    }

    /// `log c(u)`.
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let q = self.q();
        if u.len() != q {
            return Err(Error::Dimension(format!("point has {} coordinates, copula has {q}", u.len())));
        }
        if q > MAX_NESTED_DIM {
            return Err(Error::DensityUnavailable(format!(
                "nested densities are available up to total dimension {MAX_NESTED_DIM}, got {q}"
            )));
        }
        check_interior(u)?;
        if self.groups_independent() {
            return self
                .structure
                .ranges()
                .zip(&self.children)
                .enumerate()
                .map(|(i, (r, c))| archimedean_log_density_with(&c.generator, &u[r], &self.tables.children[i].0))
                .sum();
        }
        let root = &self.root;
        let mut jac = 0.0;
        let mut s = 0.0;
        // per child: log τ
        let mut log_taus = [0.0f64; MAX_NESTED_DIM];
        for (i, (range, child)) in self.structure.ranges().zip(&self.children).enumerate() {
            let g = &child.generator;
            let ui = &u[range];
            jac += ui.iter().map(|&x| g.log_abs_psi_inv_deriv(x)).sum::<f64>();
            let t: f64 = ui.iter().map(|&x| g.psi_inv(x)).sum();
            let b = self.tables.children[i].1;
            let (log_tau, g_val) = match self.family() {
                Family::Gumbel => (t.ln(), (b * t.ln()).exp()),
                Family::Clayton => (t.ln_1p(), (b * t.ln_1p()).exp_m1()),
            };
            s += g_val;
            log_taus[i] = log_tau;
        }
        // enumerate (m₁, …, m_k) with 1 ≤ mᵢ ≤ dᵢ
        let k = self.children.len();
        let mut m = [1usize; MAX_NESTED_DIM];
        let mut terms = [f64::NEG_INFINITY; 1 << MAX_NESTED_DIM];
        let mut n_terms = 0;
        'outer: loop {
            let total: usize = m[..k].iter().sum();
            let mut lt = root.log_abs_derivative_with(s, total, &self.tables.root[total]);
            for (i, &mi) in m[..k].iter().enumerate() {
                let (_, b, ref beta) = self.tables.children[i];
                lt += beta[mi] + (mi as f64 * b - self.children[i].dim as f64) * log_taus[i];
            }
            terms[n_terms] = lt;
            n_terms += 1;
            for i in 0..k {
                if m[i] < self.children[i].dim {
                    m[i] += 1;
                    continue 'outer;
                }
                m[i] = 1;
            }
            break;
        }
        Ok(lse(terms[..n_terms].iter().copied()) + jac)
    }

    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.log_density(u).map(f64::exp)
    }

    /// Copula cdf.
    pub fn cdf(&self, u: &[f64]) -> f64 {
        let t: f64 = self
            .structure
            .ranges()
            .zip(&self.children)
            .map(|(r, c)| self.root.psi_inv(archimedean_cdf(&c.generator, &u[r]).max(f64::MIN_POSITIVE)))
            .sum();
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        self.root.psi(t)
    }

    /// `log c_i(u_i)` of child `i` on its own coordinates.
    pub fn child_log_density(&self, i: usize, ui: &[f64]) -> Result<f64> {
        match self.tables.children.get(i) {
            Some(t) if t.0.len() == ui.len() + 1 || t.0.is_empty() => archimedean_log_density_with(&self.children[i].generator, ui, &t.0),
            _ => super::archimedean::archimedean_log_density(&self.children[i].generator, ui),
        }
    }
}

/// `log |B_{d,m}|`, `m = 0..=d`, for the partial Bell polynomials evaluated at
/// `x_r = |b (b−1) ⋯ (b−r+1)|`. Entries that vanish are `−∞`.
fn log_bell_row(b: f64, d: usize) -> Vec<f64> {
    let x: Vec<f64> = (1..=d)
        .map(|r| (0..r).map(|j| (b - j as f64).abs()).product::<f64>())
        .collect();
    // B[n][k] via B_{n,k} = Σ_{i=1}^{n−k+1} C(n−1, i−1) x_i B_{n−i,k−1}
    let mut bell = vec![vec![0.0f64; d + 1]; d + 1];
    bell[0][0] = 1.0;
    for n in 1..=d {
        for k in 1..=n {
            let mut acc = 0.0;
            for i in 1..=(n - k + 1) {
                acc += binom(n - 1, i - 1) * x[i - 1] * bell[n - i][k - 1];
            }
            bell[n][k] = acc;
        }
    }
    bell[d].iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::archimedean::archimedean_density;
    use crate::copula::testing::mixed_difference;

    fn example6(th0: f64) -> NestedArchimedeanCopula {
        NestedArchimedeanCopula::from_params(Family::Gumbel, th0, &[(3.0, 2), (4.0, 2)]).unwrap()
    }

    #[test]
    fn bell_row_small() {
        // B_{3,1} = x₃, B_{3,2} = 3 x₁ x₂, B_{3,3} = x₁³ at b = 0.5
        let row = log_bell_row(0.5, 3);
        let x1: f64 = 0.5;
        let x2: f64 = 0.25;
        let x3: f64 = 0.375;
        assert!((row[1].exp() - x3).abs() < 1e-15);
        assert!((row[2].exp() - 3.0 * x1 * x2).abs() < 1e-15);
        assert!((row[3].exp() - x1.powi(3)).abs() < 1e-15);
        assert_eq!(row[0], f64::NEG_INFINITY);
    }

    #[test]
    fn independent_root_factorizes() {
        let c = example6(1.0);
        let u = [0.3, 0.6, 0.5, 0.7];
        let prod = archimedean_density(&c.children[0].generator, &u[..2]).unwrap()
            * archimedean_density(&c.children[1].generator, &u[2..]).unwrap();
        assert!((c.density(&u).unwrap() / prod - 1.0).abs() < 1e-14);
    }

    #[test]
    fn example6_matches_cdf_differences() {
        let c = example6(3.0);
        let u = [0.3, 0.6, 0.5, 0.7];
        let fd = mixed_difference(&|x: &[f64]| c.cdf(x), &u, 1e-3);
        let dens = c.density(&u).unwrap();
        assert!((fd / dens - 1.0).abs() < 1e-3, "{fd} vs {dens}");
    }

    #[test]
    fn equal_parameters_reduce_to_plain_archimedean() {
        for family in [Family::Gumbel, Family::Clayton] {
            let c = NestedArchimedeanCopula::from_params(family, 2.0, &[(2.0, 2), (2.0, 1), (2.0, 2)]).unwrap();
            let g = ArchimedeanGenerator::new(family, 2.0).unwrap();
            let u = [0.2, 0.9, 0.4, 0.55, 0.31];
            let a = c.density(&u).unwrap();
            let b = archimedean_density(&g, &u).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12, "{family}: {a} vs {b}");
        }
    }

    #[test]
    fn clayton_nested_matches_cdf_differences() {
        let c = NestedArchimedeanCopula::from_params(Family::Clayton, 0.5, &[(2.0, 2), (1.2, 1)]).unwrap();
        let u = [0.35, 0.62, 0.48];
        let fd = mixed_difference(&|x: &[f64]| c.cdf(x), &u, 1e-3);
        let dens = c.density(&u).unwrap();
        assert!((fd / dens - 1.0).abs() < 1e-4, "{fd} vs {dens}");
    }

    #[test]
    fn validation() {
        assert_eq!(
            NestedArchimedeanCopula::from_params(Family::Gumbel, 3.5, &[(3.0, 2), (4.0, 2)]),
            Err(Error::NestingCondition { root: 3.5, child: 3.0 })
        );
        let big = NestedArchimedeanCopula::from_params(Family::Gumbel, 1.5, &[(2.0, 4), (2.0, 3)]).unwrap();
        assert!(matches!(big.density(&[0.5; 7]), Err(Error::DensityUnavailable(_))));
    }

    #[test]
    fn within_group_permutation_invariance() {
        let c = example6(2.0);
        let a = c.density(&[0.3, 0.6, 0.5, 0.7]).unwrap();
        let b = c.density(&[0.6, 0.3, 0.7, 0.5]).unwrap();
        assert!((a / b - 1.0).abs() < 1e-13);
    }
}
