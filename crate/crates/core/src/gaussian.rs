//! Φ-dependence under a Gaussian copula.
//!
//! With `R` the copula correlation matrix and `R₀` its block diagonal, the
//! dependence is `E_{N(0,R₀)}[Φ(k(X))]` with density ratio
//! `k = f_R / f_{R₀}`. Mutual information and the Hellinger distance have
//! determinant closed forms; other generators are integrated numerically.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::{normal_scores_correlation, BlockCorrelationMatrix, GroupedSample};
use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, inverse, log_det, quad_form};
use crate::normal::{norm_quantile, TiePolicy};
use crate::phi::{ExtendedReal, PhiFunction, PhiKind};
use crate::quadrature::{self, AxisRule};
use crate::rng;
use crate::stats::Moments;

/// Below this value of `|R| / ∏|R_ii|` the matrix is treated as singular.
pub const SINGULAR_RATIO: f64 = 1e-300;


/// Default Monte Carlo budget for integrals and general-Φ variances.
pub const DEFAULT_MC_DRAWS: usize = 1_000_000;

/// Log-determinants of the within-group blocks; fails on a singular block.
fn block_log_dets(r: &BlockCorrelationMatrix) -> Result<Vec<f64>> {
    (0..r.structure().k())
        .map(|i| {
            let c = cholesky(&r.block(i, i)).map_err(|_| Error::SingularBlock { group: i })?;
            Ok(log_det(&c))
        })
        .collect()
}

/// `log(|R| / ∏|R_ii|)`, or `None` when `R` is numerically singular.
fn log_det_ratio(r: &BlockCorrelationMatrix) -> Result<Option<f64>> {
    let blocks: f64 = block_log_dets(r)?.iter().sum();
    let Ok(c) = cholesky(r.matrix()) else {
        return Ok(None);
    };
    let ratio = log_det(&c) - blocks;
    if ratio < SINGULAR_RATIO.ln() {
        Ok(None)
    } else {
        Ok(Some(ratio.min(0.0)))
    }
}

/// Gaussian-copula mutual information `−½ log(|R| / ∏|R_ii|)`.
pub fn mutual_information_gaussian(r: &BlockCorrelationMatrix) -> Result<ExtendedReal> {
    if r.is_block_diagonal() {
        block_log_dets(r)?;
        return Ok(ExtendedReal::Finite(0.0));
    }
    Ok(match log_det_ratio(r)? {
        Some(l) => ExtendedReal::Finite(-0.5 * l),
        None => ExtendedReal::PositiveInfinity,
    })
}

/// `h = |R|^{1/4} |R₀|^{1/4} / |(R + R₀)/2|^{1/2}`, the Bhattacharyya
/// coefficient of the two normal laws; `None` when `R` is singular.
fn bhattacharyya(r: &BlockCorrelationMatrix) -> Result<Option<f64>> {
    let ld0: f64 = block_log_dets(r)?.iter().sum();
    if log_det_ratio(r)?.is_none() {
        return Ok(None);
    }
    let ld = log_det(&cholesky(r.matrix())?);
    let avg = (r.matrix() + r.r0()) * 0.5;
    let ld_avg = log_det(&cholesky(&avg)?);
    Ok(Some((0.25 * ld + 0.25 * ld0 - 0.5 * ld_avg).exp().min(1.0)))
}

/// Gaussian-copula Hellinger distance `2 − 2h`, in `[0, 2]`.
pub fn hellinger_gaussian(r: &BlockCorrelationMatrix) -> Result<f64> {
    if r.is_block_diagonal() {
        block_log_dets(r)?;
        return Ok(0.0);
    }
    Ok(match bhattacharyya(r)? {
        Some(h) => (2.0 - 2.0 * h).clamp(0.0, 2.0),
        None => 2.0,
    })
}

/// Closed-form value when one exists for this generator.
pub fn closed_form(r: &BlockCorrelationMatrix, phi: &PhiFunction) -> Option<Result<ExtendedReal>> {
    match phi.kind() {
        PhiKind::MutualInformation => Some(mutual_information_gaussian(r)),
        PhiKind::Hellinger => Some(hellinger_gaussian(r).map(ExtendedReal::Finite)),
        _ => None,
    }
}

/// Precomputed pieces of the density ratio `k(x) = f_R(x) / f_{R₀}(x)`.
#[derive(Debug, Clone)]
pub struct GaussianPair {
    pub r: DMatrix<f64>,
    pub r0: DMatrix<f64>,
    pub r_inv: DMatrix<f64>,
    pub r0_inv: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub l0: DMatrix<f64>,
    pub log_det_r: f64,
    pub log_det_r0: f64,
    diff: DMatrix<f64>,
}

impl GaussianPair {
    pub fn new(r: &BlockCorrelationMatrix) -> Result<Self> {
        block_log_dets(r)?;
        let r0 = r.r0();
        let c = cholesky(r.matrix())?;
        let c0 = cholesky(&r0)?;
        let r_inv = inverse(&c);
        let r0_inv = inverse(&c0);
        Ok(Self {
            r: r.matrix().clone(),
            diff: &r_inv - &r0_inv,
            r0,
            log_det_r: log_det(&c),
            log_det_r0: log_det(&c0),
            l: linalg::lower_factor(&c),
            l0: linalg::lower_factor(&c0),
            r_inv,
            r0_inv,
        })
    }

    /// `log k(x)`.
    pub fn log_ratio(&self, x: &[f64]) -> f64 {
        -0.5 * (self.log_det_r - self.log_det_r0) - 0.5 * quad_form(&self.diff, x)
    }

    pub fn q(&self) -> usize {
        self.r.nrows()
    }
}

/// Monte Carlo configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub draws: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { draws: DEFAULT_MC_DRAWS, seed: rng::DEFAULT_SEED }
    }
}

/// How to evaluate the Gaussian integral numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMethod {
    /// Tensor quadrature in the whitened eigenbasis, `q ≤ 4`.
    Quadrature,
    MonteCarlo(McConfig),
}

/// A numerically integrated value with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericValue {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// `Φ(k) · f_{R₀}/f_S` written through logs, where `lw = log(f_{R₀}/f_S)`.
/// `e^{lw} Φ(e^{lr})` without overflowing when `lr` is large.
fn weighted_phi(phi: &PhiFunction, lr: f64, lw: f64) -> f64 {
    if lr > 0.0 {
        (lw + lr).exp() * phi.weighted_by_inverse(lr)
    } else {
        lw.exp() * phi.evaluate_log(lr)
    }
}

/// Evaluate `E_{N(0,R₀)}[Φ(k(X))]` by quadrature or Monte Carlo.
///
/// Quadrature whitens by `R₀` and rotates to the eigenbasis of `A = L₀ᵀR⁻¹L₀`,
/// where `log k = ½ Σ log aᵢ − ½ Σ (aᵢ − 1) wᵢ²`. Axis `i` then carries the
/// scales `1` and `aᵢ^{−1/2}`, both covered by [`AxisRule::even`].
pub fn phi_gaussian_numeric(r: &BlockCorrelationMatrix, phi: &PhiFunction, method: NumericMethod) -> Result<NumericValue> {
    if let NumericMethod::Quadrature = method {
        quadrature::check_dim(r.q())?;
    }
    if r.is_block_diagonal() {
        block_log_dets(r)?;
        return Ok(NumericValue { value: 0.0, std_error: None });
    }
    let pair = GaussianPair::new(r)?;
    match method {
        NumericMethod::Quadrature => Ok(NumericValue { value: quadrature_value(&pair, phi)?, std_error: None }),
        NumericMethod::MonteCarlo(cfg) => {
            let q = pair.q();
            let parts = rng::chunked(cfg.draws, rng::CHUNK, cfg.seed, |rng, _, len| {
                let mut z = vec![0.0; q];
                let mut x = vec![0.0; q];
                let vals: Vec<f64> = (0..len)
                    .map(|_| {
                        z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
                        linalg::lower_mul(&pair.l0, &z, &mut x);
                        phi.evaluate_log(pair.log_ratio(&x))
                    })
                    .collect();
                Moments::from_slice(&vals)
            });
            let m = parts.iter().fold(Moments::default(), |a, b| a.merge(b));
            Ok(NumericValue { value: m.mean, std_error: Some(m.sd() / (m.n).sqrt()) })
        }
    }
}

fn quadrature_value(pair: &GaussianPair, phi: &PhiFunction) -> Result<f64> {
    let a = pair.l0.transpose() * &pair.r_inv * &pair.l0;
    let eig = a.symmetric_eigen();
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if eigenvalues.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let c = -0.5 * (pair.log_det_r - pair.log_det_r0);
    let rules: Vec<AxisRule> = eigenvalues
        .iter()
        .map(|&v| {
            let s = v.powf(-0.5);
            AxisRule::even(s.min(1.0), s.max(1.0))
        })
        .collect();
    Ok(quadrature::even_tensor_sum(&rules, |wsq, lw| {
        let lr = c - 0.5 * eigenvalues.iter().zip(wsq).map(|(v, w)| (v - 1.0) * w).sum::<f64>();
        weighted_phi(phi, lr, lw)
    }))
}

/// Dependence value for any generator: closed form when available,
/// quadrature for `q ≤ 4`, otherwise Monte Carlo with `mc`.
pub fn phi_gaussian(r: &BlockCorrelationMatrix, phi: &PhiFunction, mc: McConfig) -> Result<(ExtendedReal, &'static str, Option<f64>)> {
    if let Some(v) = closed_form(r, phi) {
        return Ok((v?, "closed-form", None));
    }
    if log_det_ratio(r)?.is_none() {
        return Ok((phi.max_value(), "singular", None));
    }
    if r.q() <= quadrature::MAX_QUADRATURE_DIM {
        let v = phi_gaussian_numeric(r, phi, NumericMethod::Quadrature)?;
        Ok((ExtendedReal::Finite(v.value.max(0.0)), "quadrature", None))
    } else {
        let v = phi_gaussian_numeric(r, phi, NumericMethod::MonteCarlo(mc))?;
        Ok((ExtendedReal::Finite(v.value.max(0.0)), "monte-carlo", v.std_error))
    }
}

/// Which expression produced the variance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceForm {
    ClosedForm,
    /// Expectations estimated by simulation; assumes differentiation and
    /// integration may be interchanged.
    MonteCarlo,
}

/// The matrices entering the asymptotic variance.
#[derive(Debug, Clone)]
pub struct TheoremOneMatrices {
    /// Gradient matrix `M_Φ` with `dD(R)[H] = Tr(M_Φ H)`.
    pub m_phi: DMatrix<f64>,
    /// Diagonal of `M_Φ R`.
    pub d_mr: DVector<f64>,
    pub f1: Option<DMatrix<f64>>,
    pub f2: Option<DMatrix<f64>>,
    pub gamma: Option<DMatrix<f64>>,
    /// Diagonal blocks of `R (I + R₀⁻¹R)⁻¹`.
    pub j_blocks: Option<Vec<DMatrix<f64>>>,
    pub form: VarianceForm,
}

fn block_diagonal_part(m: &DMatrix<f64>, r: &BlockCorrelationMatrix) -> DMatrix<f64> {
    let g = r.structure();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if g.group_of(i) == g.group_of(j) { m[(i, j)] } else { 0.0 })
}

fn hellinger_matrices(r: &BlockCorrelationMatrix, pair: &GaussianPair) -> Result<TheoremOneMatrices> {
    let c = bhattacharyya(r)?.ok_or(Error::NotPositiveDefinite)?;
    let sum_inv = inverse(&cholesky(&(&pair.r + &pair.r0))?);
    let j = linalg::symmetrize(&(&pair.r * &sum_inv * &pair.r0));
    let g = r.structure();
    let mut gamma = DMatrix::zeros(r.q(), r.q());
    let mut j_blocks = Vec::with_capacity(g.k());
    for i in 0..g.k() {
        let rg = g.range(i);
        let jii = j.view((rg.start, rg.start), (rg.len(), rg.len())).into_owned();
        let rii_inv = inverse(&cholesky(&r.block(i, i))?);
        gamma.view_mut((rg.start, rg.start), (rg.len(), rg.len())).copy_from(&(&rii_inv * &jii * &rii_inv));
        j_blocks.push(jii);
    }
    let m = (&pair.r0_inv - &pair.r_inv) * 0.5 + &sum_inv - &gamma;
    let m = linalg::symmetrize(&(m * c));
    Ok(TheoremOneMatrices {
        d_mr: (&m * &pair.r).diagonal(),
        m_phi: m,
        f1: None,
        f2: None,
        gamma: Some(gamma),
        j_blocks: Some(j_blocks),
        form: VarianceForm::ClosedForm,
    })
}

fn general_matrices(r: &BlockCorrelationMatrix, pair: &GaussianPair, phi: &PhiFunction, mc: McConfig) -> Result<TheoremOneMatrices> {
    let q = pair.q();
    struct Acc {
        d: f64,
        da: f64,
        a_xx: Vec<f64>,
        ad_xx: Vec<f64>,
    }
    // common random numbers: X₀ = L₀Z under R₀ and X = LZ under R share Z
    let parts = rng::chunked(mc.draws, rng::CHUNK, mc.seed, |rng, _, len| {
        let mut acc = Acc { d: 0.0, da: 0.0, a_xx: vec![0.0; q * q], ad_xx: vec![0.0; q * q] };
        let mut z = vec![0.0; q];
        let mut x0 = vec![0.0; q];
        let mut x = vec![0.0; q];
        for _ in 0..len {
            z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
            linalg::lower_mul(&pair.l0, &z, &mut x0);
            linalg::lower_mul(&pair.l, &z, &mut x);
            let a = phi.evaluate_log(pair.log_ratio(&x0));
            let ad = phi.derivative_log(pair.log_ratio(&x));
            acc.d += a;
            acc.da += ad;
            for i in 0..q {
                for j in 0..q {
                    acc.a_xx[i * q + j] += a * x0[i] * x0[j];
                    acc.ad_xx[i * q + j] += ad * x[i] * x[j];
                }
            }
        }
        acc
    });
    let n = mc.draws as f64;
    let mut d = crate::stats::KahanSum::new();
    let mut da = crate::stats::KahanSum::new();
    let mut a_xx = DMatrix::zeros(q, q);
    let mut ad_xx = DMatrix::zeros(q, q);
    for p in &parts {
        d.add(p.d);
        da.add(p.da);
        for i in 0..q {
            for j in 0..q {
                a_xx[(i, j)] += p.a_xx[i * q + j];
                ad_xx[(i, j)] += p.ad_xx[i * q + j];
            }
        }
    }
    let (d, da) = (d.value() / n, da.value() / n);
    let a_xx = a_xx / n;
    let ad_xx = ad_xx / n;
    let f1 = &pair.r0_inv * block_diagonal_part(&a_xx, r) * &pair.r0_inv;
    let f2 = &pair.r0_inv * block_diagonal_part(&ad_xx, r) * &pair.r0_inv;
    let m = (&f1 - &pair.r0_inv * d - (&pair.r_inv - &pair.r0_inv) * da + &pair.r_inv * &ad_xx * &pair.r_inv - &f2) * 0.5;
    let m = linalg::symmetrize(&m);
    Ok(TheoremOneMatrices {
        d_mr: (&m * &pair.r).diagonal(),
        m_phi: m,
        f1: Some(f1),
        f2: Some(f2),
        gamma: None,
        j_blocks: None,
        form: VarianceForm::MonteCarlo,
    })
}

/// Build `M_Φ` and its companions. Mutual information and Hellinger use
/// closed forms; other differentiable generators use Monte Carlo.
pub fn theorem_one_matrices(r: &BlockCorrelationMatrix, phi: &PhiFunction, mc: McConfig) -> Result<TheoremOneMatrices> {
    if !phi.is_differentiable() {
        return Err(Error::NonDifferentiable(phi.name(), 1.0));
    }
    let pair = GaussianPair::new(r)?;
    match phi.kind() {
        PhiKind::MutualInformation => {
            let m = (&pair.r0_inv - &pair.r_inv) * 0.5;
            Ok(TheoremOneMatrices {
                d_mr: (&m * &pair.r).diagonal(),
                m_phi: m,
                f1: None,
                f2: None,
                gamma: None,
                j_blocks: None,
                form: VarianceForm::ClosedForm,
            })
        }
        PhiKind::Hellinger => hellinger_matrices(r, &pair),
        _ => general_matrices(r, &pair, phi, mc),
    }
}

/// `ζ² = 2 Tr((R(M − D_{MR}))²)`.
pub fn zeta_from_matrices(r: &DMatrix<f64>, t: &TheoremOneMatrices) -> f64 {
    let a = r * (&t.m_phi - DMatrix::from_diagonal(&t.d_mr));
    let z2 = 2.0 * linalg::trace(&(&a * &a));
    z2.max(0.0).sqrt()
}

/// Asymptotic standard deviation `ζ_Φ` of the plug-in estimator at `R`.
pub fn asymptotic_sd(r: &BlockCorrelationMatrix, phi: &PhiFunction) -> Result<f64> {
    asymptotic_sd_with(r, phi, McConfig::default())
}

pub fn asymptotic_sd_with(r: &BlockCorrelationMatrix, phi: &PhiFunction, mc: McConfig) -> Result<f64> {
    if r.is_block_diagonal() && phi.is_differentiable() {
        block_log_dets(r)?;
        return Ok(0.0);
    }
    if log_det_ratio(r)?.is_none() {
        return Err(Error::InfiniteEstimate);
    }
    let t = theorem_one_matrices(r, phi, mc)?;
    Ok(zeta_from_matrices(r.matrix(), &t))
}

/// Options for [`estimate_gaussian`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianOptions {
    pub ties: TiePolicy,
    pub mc: McConfig,
}

impl Default for GaussianOptions {
    fn default() -> Self {
        Self { ties: TiePolicy::Error, mc: McConfig::default() }
    }
}

/// Plug-in estimate at the normal-scores correlation matrix.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianDependenceResult {
    pub value: ExtendedReal,
    pub normalized_value: f64,
    /// `ζ̂`; absent when the estimate is infinite or singular.
    pub sd: Option<f64>,
    pub ci: Option<[f64; 2]>,
    pub n: usize,
    pub phi: PhiFunction,
    pub method: String,
    pub sd_form: Option<VarianceForm>,
    pub mc_se: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub r: BlockCorrelationMatrix,
}

impl GaussianDependenceResult {
    /// Assemble a result from a correlation matrix estimated on `n` rows.
    pub fn from_correlation(r: BlockCorrelationMatrix, n: usize, phi: &PhiFunction, alpha: f64, opts: &GaussianOptions) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        let (value, method, mc_se) = phi_gaussian(&r, phi, opts.mc)?;
        let mut warnings = Vec::new();
        let (sd, sd_form) = match value {
            ExtendedReal::PositiveInfinity => {
                warnings.push("correlation matrix is singular; estimate is infinite and has no standard deviation".into());
                (None, None)
            }
            ExtendedReal::Finite(_) if method == "singular" || (phi.kind() == PhiKind::Hellinger && log_det_ratio(&r)?.is_none()) => {
                warnings.push("correlation matrix is singular; standard deviation unavailable".into());
                (None, None)
            }
            ExtendedReal::Finite(_) => match phi.is_differentiable() {
                true => {
                    let form = match phi.kind() {
                        PhiKind::MutualInformation | PhiKind::Hellinger => VarianceForm::ClosedForm,
                        _ => {
                            warnings.push("standard deviation is Monte Carlo based and assumes differentiation under the integral".into());
                            VarianceForm::MonteCarlo
                        }
                    };
                    (Some(asymptotic_sd_with(&r, phi, opts.mc)?), Some(form))
                }
                false => {
                    warnings.push(format!("{} is not differentiable at 1; no standard deviation", phi.name()));
                    (None, None)
                }
            },
        };
        let ci = match (value, sd) {
            (ExtendedReal::Finite(v), Some(s)) => {
                let h = norm_quantile(1.0 - alpha / 2.0) * s / (n as f64).sqrt();
                Some([v - h, v + h])
            }
            _ => None,
        };
        Ok(Self {
            normalized_value: phi.normalize(value),
            value,
            sd,
            ci,
            n,
            phi: *phi,
            method: method.to_string(),
            sd_form,
            mc_se,
            warnings,
            r,
        })
    }
}

/// Estimate the Gaussian-copula Φ-dependence of a sample with a
/// `1 − alpha` asymptotic confidence interval.
pub fn estimate_gaussian(sample: &GroupedSample, phi: &PhiFunction, alpha: f64, opts: &GaussianOptions) -> Result<GaussianDependenceResult> {
    let (n, q) = (sample.n(), sample.q());
    if n < q + 2 {
        return Err(Error::Dimension(format!("need n >= q + 2 = {} rows, got {n}", q + 2)));
    }
    let r = normal_scores_correlation(sample, opts.ties)?;
    GaussianDependenceResult::from_correlation(r, n, phi, alpha, opts)
}
