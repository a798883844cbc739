//! Two-sample contagion tests, rolling-window dependence series and
//! studentized replicate experiments for the Gaussian-copula estimator.

use rayon::prelude::*;
use serde::Serialize;

use crate::copula::CopulaModel;
use crate::data::{window_ranges, GroupedSample};
use crate::error::{Error, Result};
use crate::gaussian::{estimate_gaussian, phi_gaussian, GaussianDependenceResult, GaussianOptions};
use crate::normal::{norm_cdf, norm_quantile};
use crate::phi::{ExtendedReal, PhiFunction};
use crate::rng;

/// Which alternative a two-period test is aimed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Dependence rises from the first period to the second; small `z` is evidence.
    IncreaseIntoCrisis,
    /// Dependence falls from the first period to the second; large `z` is evidence.
    DecreaseAfterCrisis,
}

impl Direction {
    pub fn p_value(self, z: f64) -> f64 {
        match self {
            Direction::IncreaseIntoCrisis => norm_cdf(z),
            Direction::DecreaseAfterCrisis => norm_cdf(-z),
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Direction::IncreaseIntoCrisis => Direction::DecreaseAfterCrisis,
            Direction::DecreaseAfterCrisis => Direction::IncreaseIntoCrisis,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContagionTestResult {
    pub z: f64,
    pub p_value: f64,
    pub direction: Direction,
    pub estimates: (GaussianDependenceResult, GaussianDependenceResult),
    pub n1: usize,
    pub n2: usize,
}

/// `(D̂_a − D̂_b) / √(ζ̂_a²/n_a + ζ̂_b²/n_b)`.
pub fn z_statistic(d_a: f64, zeta_a: f64, n_a: usize, d_b: f64, zeta_b: f64, n_b: usize) -> Result<f64> {
    let var = zeta_a * zeta_a / n_a as f64 + zeta_b * zeta_b / n_b as f64;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::InvalidParameter(
            "the z statistic needs a positive, finite standard deviation in at least one period".into(),
        ));
    }
    Ok((d_a - d_b) / var.sqrt())
}

fn finite_parts(e: &GaussianDependenceResult) -> Result<(f64, f64)> {
    match (e.value, e.sd) {
        (ExtendedReal::Finite(v), Some(s)) if s.is_finite() => Ok((v, s)),
        (ExtendedReal::PositiveInfinity, _) => Err(Error::InfiniteEstimate),
        _ => Err(Error::InvalidParameter(format!(
            "estimate for {} has no standard deviation; it cannot enter a z test",
            e.phi.name()
        ))),
    }
}

/// Two-period z test on Gaussian-copula estimates of the same Φ.
pub fn contagion_test(a: &GaussianDependenceResult, b: &GaussianDependenceResult, direction: Direction) -> Result<ContagionTestResult> {
    if a.phi != b.phi {
        return Err(Error::InvalidParameter("both periods must use the same generator".into()));
    }
    let (da, za) = finite_parts(a)?;
    let (db, zb) = finite_parts(b)?;
    let z = z_statistic(da, za, a.n, db, zb, b.n)?;
    Ok(ContagionTestResult {
        z,
        p_value: direction.p_value(z),
        direction,
        estimates: (a.clone(), b.clone()),
        n1: a.n,
        n2: b.n,
    })
}

/// Estimates both periods from row ranges of `sample` and runs [`contagion_test`].
pub fn contagion_test_periods(
    sample: &GroupedSample,
    first: std::ops::Range<usize>,
    second: std::ops::Range<usize>,
    phi: &PhiFunction,
    alpha: f64,
    direction: Direction,
    opts: &GaussianOptions,
) -> Result<ContagionTestResult> {
    let a = estimate_gaussian(&sample.slice_rows(first)?, phi, alpha, opts)?;
    let b = estimate_gaussian(&sample.slice_rows(second)?, phi, alpha, opts)?;
    contagion_test(&a, &b, direction)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingEntry {
    pub window_start_label: String,
    /// 0-based half-open row range.
    pub start: usize,
    pub end: usize,
    pub n: usize,
    pub value: Option<ExtendedReal>,
    pub sd: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub short_window: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingSeries {
    pub phi: String,
    pub window: usize,
    pub step: usize,
    pub alpha: f64,
    pub entries: Vec<RollingEntry>,
}

/// Column-oriented copy of a series for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSeries {
    pub labels: Vec<String>,
    pub values: Vec<Option<ExtendedReal>>,
    pub ci_lo: Vec<Option<f64>>,
    pub ci_hi: Vec<Option<f64>>,
}

impl RollingSeries {
    pub fn plot_data(&self) -> PlotSeries {
        PlotSeries {
            labels: self.entries.iter().map(|e| e.window_start_label.clone()).collect(),
            values: self.entries.iter().map(|e| e.value).collect(),
            ci_lo: self.entries.iter().map(|e| e.ci_lo).collect(),
            ci_hi: self.entries.iter().map(|e| e.ci_hi).collect(),
        }
    }

    /// Finite values in window order (`None` for failed or infinite windows).
    pub fn finite_values(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.value.and_then(ExtendedReal::finite)).collect()
    }
}

/// Estimate on every window; each entry is labelled by its first row.
/// Windows whose estimate fails keep their slot with the error as a warning.
pub fn rolling_dependence(
    sample: &GroupedSample,
    window: usize,
    step: usize,
    phi: &PhiFunction,
    alpha: f64,
    opts: &GaussianOptions,
) -> Result<RollingSeries> {
    let q = sample.q();
    if window < q + 2 {
        return Err(Error::Dimension(format!("window must be at least q + 2 = {}, got {window}", q + 2)));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let specs = window_ranges(sample.n(), window, step)?;
    let entries = specs
        .par_iter()
        .map(|spec| {
            let rows = spec.rows.clone();
            let mut entry = RollingEntry {
                window_start_label: sample.row_label(rows.start),
                start: rows.start,
                end: rows.end,
                n: rows.len(),
                value: None,
                sd: None,
                ci_lo: None,
                ci_hi: None,
                short_window: spec.tail,
                warnings: Vec::new(),
            };
            match sample.slice_rows(rows).and_then(|s| estimate_gaussian(&s, phi, alpha, opts)) {
                Ok(est) => {
                    entry.value = Some(est.value);
                    entry.sd = est.sd;
                    entry.ci_lo = est.ci.map(|c| c[0]);
                    entry.ci_hi = est.ci.map(|c| c[1]);
                    entry.warnings = est.warnings;
                }
                Err(e) => entry.warnings.push(e.to_string()),
            }
            entry
        })
        .collect();
    Ok(RollingSeries { phi: phi.name(), window, step, alpha, entries })
}

/// Maps a uniform draw of column `j` to the observed scale.
pub type MarginTransform = dyn Fn(usize, f64) -> f64 + Sync;

/// `(D̂, ζ̂)` for `reps` independent samples of size `n` from a Gaussian copula.
pub fn replicate_gaussian_estimates(
    model: &CopulaModel,
    phi: &PhiFunction,
    n: usize,
    reps: usize,
    seed: u64,
    margins: &MarginTransform,
) -> Result<Vec<(f64, f64)>> {
    let CopulaModel::Gaussian(_) = model else {
        return Err(Error::InvalidParameter("replicate experiments need a Gaussian copula model".into()));
    };
    let structure = model.structure().clone();
    let sampler = model.sampler()?;
    let opts = GaussianOptions::default();
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut u = sampler.sample(n, rng::replicate_seed(seed, i as u64));
            for (j, mut col) in u.column_iter_mut().enumerate() {
                for x in col.iter_mut() {
                    *x = margins(j, *x);
                }
            }
            let s = GroupedSample::new(u, structure.clone())?;
            let est = estimate_gaussian(&s, phi, 0.05, &opts)?;
            finite_parts(&est)
        })
        .collect()
}

/// `√n (D̂ − D) / ζ̂` over `reps` replicates with standard normal margins.
pub fn studentized_replicates(model: &CopulaModel, phi: &PhiFunction, n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    studentized_replicates_with(model, phi, n, reps, seed, &|_, u| norm_quantile(u))
}

/// As [`studentized_replicates`] with user-supplied margins.
pub fn studentized_replicates_with(
    model: &CopulaModel,
    phi: &PhiFunction,
    n: usize,
    reps: usize,
    seed: u64,
    margins: &MarginTransform,
) -> Result<Vec<f64>> {
    let CopulaModel::Gaussian(r) = model else {
        return Err(Error::InvalidParameter("studentized replicates need a Gaussian copula model".into()));
    };
    let truth = phi_gaussian(r, phi, Default::default())?.0.finite().ok_or(Error::InfiniteEstimate)?;
    let root_n = (n as f64).sqrt();
    Ok(replicate_gaussian_estimates(model, phi, n, reps, seed, margins)?
        .into_iter()
        .map(|(d, z)| root_n * (d - truth) / z)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BlockCorrelationMatrix, GroupStructure};
    use nalgebra::DMatrix;

    fn fake(value: f64, sd: f64, n: usize) -> GaussianDependenceResult {
        let s = GroupStructure::new(vec![1, 1]).unwrap();
        let mut r = GaussianDependenceResult::from_correlation(
            BlockCorrelationMatrix::identity(s),
            n,
            &PhiFunction::mutual_information(),
            0.05,
            &GaussianOptions::default(),
        )
        .unwrap();
        r.value = ExtendedReal::Finite(value);
        r.sd = Some(sd);
        r
    }

    #[test]
    fn equal_estimates_give_half() {
        let t = contagion_test(&fake(0.3, 0.4, 100), &fake(0.3, 0.7, 50), Direction::IncreaseIntoCrisis).unwrap();
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p_value, 0.5);
    }

    #[test]
    fn worked_example() {
        let t = contagion_test(&fake(0.2, 0.5, 400), &fake(0.5, 0.5, 400), Direction::IncreaseIntoCrisis).unwrap();
        let z = -0.3 / (0.25f64 / 400.0 * 2.0).sqrt();
        assert!((t.z - z).abs() < 1e-12);
        assert!((t.z + 8.485_281_374_238_57).abs() < 1e-9);
        assert!((t.p_value / 1.075_986_835_624_952_6e-17 - 1.0).abs() < 1e-9, "{}", t.p_value);
    }

    #[test]
    fn antisymmetry() {
        let (a, b) = (fake(0.25, 0.3, 120), fake(0.41, 0.6, 90));
        let ab = contagion_test(&a, &b, Direction::IncreaseIntoCrisis).unwrap();
        let ba = contagion_test(&b, &a, Direction::DecreaseAfterCrisis).unwrap();
        assert_eq!(ab.z, -ba.z);
        assert_eq!(ab.p_value, Direction::DecreaseAfterCrisis.p_value(-ab.z));
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn infinite_estimate_is_rejected() {
        let mut a = fake(0.2, 0.5, 400);
        a.value = ExtendedReal::PositiveInfinity;
        assert_eq!(contagion_test(&a, &fake(0.2, 0.5, 10), Direction::IncreaseIntoCrisis).unwrap_err(), Error::InfiniteEstimate);
    }

    fn gaussian_rows(n: usize, rho: f64, seed: u64) -> GroupedSample {
        let s = GroupStructure::new(vec![1, 1]).unwrap();
        let r = BlockCorrelationMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]), s.clone()).unwrap();
        let u = CopulaModel::Gaussian(r).sampler().unwrap().sample(n, seed);
        GroupedSample::new(u, s).unwrap()
    }

    #[test]
    fn disjoint_windows_match_independent_estimates() {
        let sample = gaussian_rows(300, 0.4, 2);
        let phi = PhiFunction::hellinger();
        let opts = GaussianOptions::default();
        let series = rolling_dependence(&sample, 100, 100, &phi, 0.05, &opts).unwrap();
        assert_eq!(series.entries.len(), 3);
        for (k, e) in series.entries.iter().enumerate() {
            let direct = estimate_gaussian(&sample.slice_rows(k * 100..k * 100 + 100).unwrap(), &phi, 0.05, &opts).unwrap();
            assert_eq!(e.value, Some(direct.value));
            assert_eq!(e.ci_lo, direct.ci.map(|c| c[0]));
        }
    }

    #[test]
    fn paper_window_layout() {
        let sample = gaussian_rows(1099, 0.2, 3);
        let series = rolling_dependence(&sample, 101, 10, &PhiFunction::mutual_information(), 0.05, &GaussianOptions::default()).unwrap();
        assert_eq!(series.entries.len(), 100);
        let last = series.entries.last().unwrap();
        assert_eq!((last.start, last.end, last.short_window), (990, 1099, true));
        for e in &series.entries {
            let v = e.value.unwrap().to_f64();
            assert!(e.ci_lo.unwrap() <= v && v <= e.ci_hi.unwrap());
        }
    }

    #[test]
    fn independent_series_stays_small() {
        let sample = gaussian_rows(1000, 0.0, 4);
        let series = rolling_dependence(&sample, 200, 50, &PhiFunction::mutual_information(), 0.05, &GaussianOptions::default()).unwrap();
        let vals: Vec<f64> = series.finite_values().into_iter().flatten().collect();
        let sds: Vec<f64> = series.entries.iter().filter_map(|e| e.sd).collect();
        let mv = vals.iter().sum::<f64>() / vals.len() as f64;
        let ms = sds.iter().sum::<f64>() / sds.len() as f64;
        assert!(mv < 2.0 * ms / (200f64).sqrt(), "{mv} vs {ms}");
    }

    #[test]
    fn studentized_mean_near_zero() {
        let s = GroupStructure::new(vec![1, 1]).unwrap();
        let r = BlockCorrelationMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]), s).unwrap();
        let reps = 300;
        let t = studentized_replicates(&CopulaModel::Gaussian(r), &PhiFunction::mutual_information(), 2000, reps, 1).unwrap();
        let m = t.iter().sum::<f64>() / reps as f64;
        assert!(m.abs() < 3.5 / (reps as f64).sqrt(), "{m}");
    }
}
