//! Exact samplers for the supported copulas.
//!
//! Archimedean copulas are drawn by the Marshall–Olkin frailty construction
//! `U_j = ψ(E_j / V)` with `V` distributed as the inverse Laplace transform
//! of `ψ`. Nested copulas draw a root frailty `V₀` and then one inner frailty
//! per child whose Laplace transform is `exp(−V₀ ψ₀⁻¹(ψᵢ(s)))`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use super::generator::{ArchimedeanGenerator, Family};
use super::nested::NestedArchimedeanCopula;
use super::CopulaModel;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, lower_factor, lower_mul};
use crate::normal::norm_cdf;
use crate::rng;

/// A positive `α`-stable variable with Laplace transform `exp(−s^α)`,
/// `0 < α ≤ 1`, by the Chambers–Mallows–Stuck / Kanter representation.
pub fn positive_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u = PI * open01(rng);
    let w: f64 = Exp1.sample(rng);
    let ln_v = (alpha * u).sin().ln() - (1.0 / alpha) * u.sin().ln()
        + ((1.0 - alpha) / alpha) * (((1.0 - alpha) * u).sin().ln() - w.ln());
    ln_v.exp()
}

/// Exponentially tilted stable variable with Laplace transform
/// `exp(−v((1+s)^α − 1))`.
///
/// The variable is split into `m = ⌈v⌉` independent parts with parameter
/// `v/m`; each part is an `α`-stable proposal accepted with probability
/// `e^{−X}`, so the acceptance rate per part stays above `e^{−1}`.
pub fn tilted_stable<R: Rng + ?Sized>(rng: &mut R, alpha: f64, v: f64) -> f64 {
    if alpha >= 1.0 {
        return v;
    }
    if v <= 0.0 {
        return 0.0;
    }
    let m = v.ceil().max(1.0);
    let scale = (v / m).powf(1.0 / alpha);
    let mut total = 0.0;
    for _ in 0..m as usize {
        loop {
            let x = scale * positive_stable(rng, alpha);
            if open01(rng) <= (-x).exp() {
                total += x;
                break;
            }
        }
    }
    total
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Frailty `V` of a single generator.
fn frailty<R: Rng + ?Sized>(rng: &mut R, g: &ArchimedeanGenerator, gamma: Option<&Gamma<f64>>) -> f64 {
    match g.family {
        Family::Gumbel => positive_stable(rng, 1.0 / g.theta),
        Family::Clayton => gamma.expect("gamma law precomputed for Clayton").sample(rng),
    }
}

fn fill_from_frailty<R: Rng + ?Sized>(rng: &mut R, g: &ArchimedeanGenerator, v: f64, out: &mut [f64]) {
    for o in out.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        *o = g.psi(e / v);
    }
}

/// Row sampler with all per-model setup done once.
#[derive(Debug, Clone)]
pub enum Sampler {
    Gaussian { l: DMatrix<f64> },
    Archimedean { generator: ArchimedeanGenerator, gamma: Option<Gamma<f64>>, q: usize },
    Nested { copula: NestedArchimedeanCopula, gamma: Option<Gamma<f64>> },
}

fn gamma_for(g: &ArchimedeanGenerator) -> Result<Option<Gamma<f64>>> {
    match g.family {
        Family::Clayton => Gamma::new(1.0 / g.theta, 1.0)
            .map(Some)
            .map_err(|e| Error::InvalidParameter(format!("gamma frailty: {e}"))),
        Family::Gumbel => Ok(None),
    }
}

impl Sampler {
    pub fn new(model: &CopulaModel) -> Result<Self> {
        Ok(match model {
            CopulaModel::Gaussian(r) => Sampler::Gaussian { l: lower_factor(&cholesky(r.matrix())?) },
            CopulaModel::Archimedean { generator, structure } => {
                Sampler::Archimedean { generator: *generator, gamma: gamma_for(generator)?, q: structure.q() }
            }
            CopulaModel::Nested(c) => Sampler::Nested { copula: c.clone(), gamma: gamma_for(&c.root)? },
        })
    }

    pub fn q(&self) -> usize {
        match self {
            Sampler::Gaussian { l } => l.nrows(),
            Sampler::Archimedean { q, .. } => *q,
            Sampler::Nested { copula, .. } => copula.q(),
        }
    }

    /// Fill `out` (length `q`) with one draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Gaussian { l } => {
                let z: Vec<f64> = (0..l.nrows()).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
                lower_mul(l, &z, out);
                for x in out.iter_mut() {
                    *x = norm_cdf(*x);
                }
            }
            Sampler::Archimedean { generator, gamma, .. } => {
                let v = frailty(rng, generator, gamma.as_ref());
                fill_from_frailty(rng, generator, v, out);
            }
            Sampler::Nested { copula, gamma } => {
                let root = &copula.root;
                let v0 = frailty(rng, root, gamma.as_ref());
                for (range, child) in copula.structure().ranges().zip(&copula.children) {
                    let g = &child.generator;
                    let alpha = root.theta / g.theta;
                    let vi = match root.family {
                        Family::Gumbel => v0.powf(1.0 / alpha) * positive_stable(rng, alpha),
                        Family::Clayton => tilted_stable(rng, alpha, v0),
                    };
                    fill_from_frailty(rng, g, vi, &mut out[range]);
                }
            }
        }
    }

    /// `m × q` sample, reproducible from `seed` regardless of thread count.
    pub fn sample(&self, m: usize, seed: u64) -> DMatrix<f64> {
        let q = self.q();
        let chunks = rng::chunked(m, rng::CHUNK, seed, |rng, _, len| {
            let mut rows = vec![0.0; len * q];
            for r in rows.chunks_mut(q) {
                self.draw(rng, r);
            }
            rows
        });
        let flat: Vec<f64> = chunks.into_iter().flatten().collect();
        DMatrix::from_row_slice(m, q, &flat)
    }
}
