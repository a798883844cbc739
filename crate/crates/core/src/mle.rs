//! Pseudo maximum likelihood for Archimedean and nested Archimedean copulas
//! with margins replaced by rescaled ranks.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::copula::{ArchimedeanGenerator, CopulaModel, Family, NestedArchimedeanCopula};
use crate::data::{GroupStructure, GroupedSample};
use crate::error::{Error, Result};
use crate::normal::{ranks_with_policy, TiePolicy};
use crate::optim::{brent_max, NelderMead};
use crate::rng;

/// Upper end of the parameter search box.
pub const THETA_MAX: f64 = 50.0;
/// Lower end of the Clayton search box.
pub const CLAYTON_MIN: f64 = 1e-4;
/// Default number of bootstrap resamples.
pub const DEFAULT_BOOTSTRAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start: Vec<f64>,
    /// Bootstrap covariance of `theta_hat` across row resamples.
    #[serde(rename = "bootstrap_V", skip_serializing_if = "Option::is_none")]
    pub bootstrap_v: Option<Vec<Vec<f64>>>,
}

/// `rank / (n + 1)` per column.
pub fn pseudo_observations(sample: &GroupedSample, policy: TiePolicy) -> Result<DMatrix<f64>> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::Dimension(format!("pseudo-observations need n >= 2, got {n}")));
    }
    let cols = (0..sample.q())
        .into_par_iter()
        .map(|j| {
            ranks_with_policy(&sample.column(j), policy)
                .map(|r| r.into_iter().map(|x| x / (n as f64 + 1.0)).collect::<Vec<f64>>())
                .map_err(|e| match e {
                    Error::Ties { .. } => Error::Ties { column: j },
                    other => other,
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, sample.q(), |i, j| cols[j][i]))
}

fn rows_of(u: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..u.nrows()).map(|i| u.row(i).iter().copied().collect()).collect()
}

/// Pseudo log-likelihood `Σ_ℓ log c(u_ℓ; θ)`; `−∞` when a density fails.
pub fn pseudo_loglik(model: &CopulaModel, rows: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for r in rows {
        match model.log_density(r) {
            Ok(v) if v.is_finite() => acc += v,
            _ => return f64::NEG_INFINITY,
        }
    }
    acc
}

fn family_lower(family: Family) -> f64 {
    match family {
        Family::Gumbel => 1.0,
        Family::Clayton => CLAYTON_MIN,
    }
}

/// Root starting value used by the staged protocol.
pub fn default_root_start(family: Family) -> f64 {
    match family {
        Family::Gumbel => 2.0,
        Family::Clayton => 0.1,
    }
}

/// Clamps parameters into the search box and enforces `θ₀ ≤ min θᵢ` for nested models.
pub fn project_params(template: &CopulaModel, x: &mut [f64]) {
    let family = match template {
        CopulaModel::Archimedean { generator, .. } => generator.family,
        CopulaModel::Nested(c) => c.family(),
        CopulaModel::Gaussian(_) => return,
    };
    let lo = family_lower(family);
    for v in x.iter_mut() {
        *v = if v.is_nan() { lo } else { v.clamp(lo, THETA_MAX) };
    }
    if matches!(template, CopulaModel::Nested(_)) {
        let min_child = x[1..].iter().copied().fold(f64::INFINITY, f64::min);
        x[0] = x[0].min(min_child);
    }
}

fn check_template(template: &CopulaModel, q: usize) -> Result<()> {
    if template.q() != q {
        return Err(Error::Dimension(format!("model has {} coordinates, data has {q}", template.q())));
    }
    match template {
        CopulaModel::Gaussian(_) => {
            Err(Error::InvalidParameter("Gaussian models are fitted by the normal scores correlation".into()))
        }
        _ => {
            // dimension caps surface before the search starts
            template.log_density(&vec![0.5; q]).map(|_| ())
        }
    }
}

/// Maximizes the pseudo log-likelihood of `template`'s shape from `start`.
pub fn fit_pseudo_mle(u: &DMatrix<f64>, template: &CopulaModel, start: &[f64]) -> Result<FitResult> {
    check_template(template, u.ncols())?;
    if start.len() != template.params().len() {
        return Err(Error::Dimension("start vector does not match the model parameters".into()));
    }
    let rows = rows_of(u);
    let mut best: (Vec<f64>, f64) = (Vec::new(), f64::NEG_INFINITY);
    let mut objective = |x: &[f64]| -> f64 {
        let v = template.with_params(x).map(|m| pseudo_loglik(&m, &rows)).unwrap_or(f64::NEG_INFINITY);
        if v > best.1 {
            best = (x.to_vec(), v);
        }
        v
    };
    let mut start_p = start.to_vec();
    project_params(template, &mut start_p);
    objective(&start_p);
    let (iterations, converged) = match template {
        CopulaModel::Archimedean { generator, .. } => {
            let lo = family_lower(generator.family);
            let m = brent_max(|t| objective(&[t]), lo, THETA_MAX, 1e-8, 500);
            // the bracket end itself is admissible and may be the optimum
            objective(&[lo]);
            (m.iterations, m.converged)
        }
        _ => {
            let m = NelderMead::default().maximize(&mut objective, |x| project_params(template, x), &start_p);
            (m.iterations, m.converged)
        }
    };
    if !best.1.is_finite() {
        return Err(Error::InvalidParameter("pseudo log-likelihood is not finite anywhere on the search path".into()));
    }
    Ok(FitResult { theta_hat: best.0, loglik: best.1, iterations, converged, start: start_p, bootstrap_v: None })
}

/// Convenience wrapper: pseudo-observations then [`fit_pseudo_mle`].
pub fn fit_sample(sample: &GroupedSample, template: &CopulaModel, start: &[f64], ties: TiePolicy) -> Result<FitResult> {
    fit_pseudo_mle(&pseudo_observations(sample, ties)?, template, start)
}

/// Starting vector `(θ₀, θ̂₁, …, θ̂_k)`: each child is fitted on its own columns
/// from 2, and the root starts at the family default (clipped to
/// `min θ̂ᵢ`).
pub fn staged_starts(u: &DMatrix<f64>, template: &NestedArchimedeanCopula) -> Result<Vec<f64>> {
    let family = template.family();
    let mut out = vec![default_root_start(family)];
    for (range, child) in template.structure().ranges().zip(&template.children) {
        if child.dim == 1 {
            // a one-dimensional child carries no information on its parameter
            out.push(child.generator.theta.max(out[0]));
            continue;
        }
        let sub = u.columns(range.start, range.len()).into_owned();
        let cm = CopulaModel::archimedean(child.generator, GroupStructure::new(vec![child.dim])?);
        out.push(fit_pseudo_mle(&sub, &cm, &[2.0])?.theta_hat[0]);
    }
    let min_child = out[1..].iter().copied().fold(f64::INFINITY, f64::min);
    out[0] = out[0].min(min_child);
    Ok(out)
}

/// Staged fit: children first, then a joint search from the staged vector.
/// Plain Archimedean templates start at 1 (Gumbel) or 0.1 (Clayton).
pub fn fit_staged(u: &DMatrix<f64>, template: &CopulaModel) -> Result<FitResult> {
    match template {
        CopulaModel::Nested(c) => {
            let start = staged_starts(u, c)?;
            fit_pseudo_mle(u, template, &start)
        }
        CopulaModel::Archimedean { generator, .. } => {
            let start = match generator.family {
                Family::Gumbel => 1.0,
                Family::Clayton => 0.1,
            };
            fit_pseudo_mle(u, template, &[start])
        }
        CopulaModel::Gaussian(_) => {
            Err(Error::InvalidParameter("Gaussian models are fitted by the normal scores correlation".into()))
        }
    }
}

/// Covariance of the staged-fit estimate over `b` row resamples of `sample`.
/// Resamples repeat rows, so their pseudo-observations use midranks.
pub fn bootstrap(sample: &GroupedSample, template: &CopulaModel, b: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if b < 2 {
        return Err(Error::InvalidParameter("bootstrap needs at least 2 resamples".into()));
    }
    let n = sample.n();
    let fits = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream_rng(rng::replicate_seed(seed, i as u64), 0);
            let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            let s = sample.select_rows(&idx)?;
            let u = pseudo_observations(&s, TiePolicy::Midrank)?;
            fit_staged(&u, template).map(|f| f.theta_hat)
        })
        .collect::<Result<Vec<_>>>()?;
    let p = fits[0].len();
    let mean: Vec<f64> = (0..p).map(|j| fits.iter().map(|f| f[j]).sum::<f64>() / b as f64).collect();
    Ok((0..p)
        .map(|a| {
            (0..p)
                .map(|c| fits.iter().map(|f| (f[a] - mean[a]) * (f[c] - mean[c])).sum::<f64>() / (b as f64 - 1.0))
                .collect()
        })
        .collect())
}

/// Template for a plain Archimedean copula used as a model shape.
pub fn archimedean_template(family: Family, structure: GroupStructure) -> Result<CopulaModel> {
    Ok(CopulaModel::archimedean(ArchimedeanGenerator::new(family, default_root_start(family))?, structure))
}

/// Template for a nested copula with children of the given sizes.
pub fn nested_template(family: Family, structure: &GroupStructure) -> Result<CopulaModel> {
    let th = default_root_start(family);
    let kids: Vec<(f64, usize)> = structure.sizes().iter().map(|&d| (th, d)).collect();
    NestedArchimedeanCopula::from_params(family, th, &kids).map(CopulaModel::Nested)
}
