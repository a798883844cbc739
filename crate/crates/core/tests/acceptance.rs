//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run a subset with `PHIDEP_ACCEPTANCE=1,6,11 cargo test --release --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Beta, ContinuousCDF, Exp, FisherSnedecor, StudentsT};

use phidep::copula::{archimedean_cdf, archimedean_density};
use phidep::gaussian::{
    asymptotic_sd, hellinger_gaussian, mutual_information_gaussian, phi_gaussian_numeric, NumericMethod,
};
use phidep::inference::{contagion_test_periods, replicate_gaussian_estimates, studentized_replicates_with};
use phidep::mc::{estimate_from_data, quadrature_oracle, DataEstimateOptions};
use phidep::mle::{fit_staged, nested_template, pseudo_observations};
use phidep::normal::{norm_cdf, norm_pdf, norm_quantile};
use phidep::stats::{ks_test, median, Moments};
use phidep::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn structure(sizes: &[usize]) -> GroupStructure {
    GroupStructure::new(sizes.to_vec()).unwrap()
}

fn bcm(m: DMatrix<f64>, sizes: &[usize]) -> BlockCorrelationMatrix {
    BlockCorrelationMatrix::new(m, structure(sizes)).unwrap()
}

fn example4(r1: f64, r2: f64) -> BlockCorrelationMatrix {
    let m = DMatrix::from_row_slice(4, 4, &[1.0, r1, r2, r2, r1, 1.0, r2, r2, r2, r2, 1.0, r1, r2, r2, r1, 1.0]);
    bcm(m, &[2, 2])
}

/// Admissible Example 4 grid: `ρ₁ ∈ [−0.95, 0.95]`, `|ρ₂| ≤ 0.98 (1 + ρ₁)/2`.
fn example4_grid() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..50 {
        let r1 = -0.95 + 1.9 * i as f64 / 49.0;
        for j in 0..50 {
            let r2 = 0.98 * (1.0 + r1) / 2.0 * (-1.0 + 2.0 * j as f64 / 49.0);
            out.push((r1, r2));
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(1e-300)
    }
}

// 1 ----------------------------------------------------------------------

fn random_correlation(rng: &mut ChaCha8Rng, q: usize) -> DMatrix<f64> {
    let df = q + 3;
    let a = DMatrix::from_fn(q, df, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &a * a.transpose();
    let d: Vec<f64> = (0..q).map(|i| s[(i, i)].sqrt()).collect();
    let mut r = DMatrix::from_fn(q, q, |i, j| s[(i, j)] / (d[i] * d[j]));
    for i in 0..q {
        r[(i, i)] = 1.0;
    }
    r
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let layouts: [&[usize]; 5] = [&[1, 1], &[1, 2], &[1, 1, 1], &[2, 2], &[1, 3]];
    let (mut worst_mi, mut worst_h) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let sizes = layouts[i % layouts.len()];
        let q: usize = sizes.iter().sum();
        let r = bcm(random_correlation(&mut rng, q), sizes);
        let mi = mutual_information_gaussian(&r).unwrap().to_f64();
        let h = hellinger_gaussian(&r).unwrap();
        let mi_q = phi_gaussian_numeric(&r, &PhiFunction::mutual_information(), NumericMethod::Quadrature).unwrap().value;
        let h_q = phi_gaussian_numeric(&r, &PhiFunction::hellinger(), NumericMethod::Quadrature).unwrap().value;
        worst_mi = worst_mi.max(rel(mi_q, mi));
        worst_h = worst_h.max(rel(h_q, h));
    }
    outcome(
        worst_mi < 1e-5 && worst_h < 1e-5,
        format!("50 matrices, max rel err MI {worst_mi:.2e}, Hellinger {worst_h:.2e} (tol 1e-5)"),
    )
}

// 2 ----------------------------------------------------------------------

fn example4_mi(r1: f64, r2: f64) -> f64 {
    -0.5 * ((r1 - 2.0 * r2 + 1.0) * (r1 + 2.0 * r2 + 1.0) / (1.0 + r1).powi(2)).ln()
}

fn example4_half_hellinger(r1: f64, r2: f64) -> f64 {
    1.0 - (1.0 + r1).sqrt() * ((r1 - 2.0 * r2 + 1.0) * (r1 + 2.0 * r2 + 1.0)).powf(0.25)
        / ((1.0 + r1 - r2) * (1.0 + r1 + r2)).sqrt()
}

fn criterion_2() -> Outcome {
    let (mut worst_mi, mut worst_h) = (0.0f64, 0.0f64);
    for (r1, r2) in example4_grid() {
        let r = example4(r1, r2);
        let mi = mutual_information_gaussian(&r).unwrap().to_f64();
        let h = hellinger_gaussian(&r).unwrap() / 2.0;
        worst_mi = worst_mi.max((mi - example4_mi(r1, r2)).abs());
        worst_h = worst_h.max((h - example4_half_hellinger(r1, r2)).abs());
    }
    outcome(
        worst_mi < 1e-10 && worst_h < 1e-10,
        format!("2500 grid points, max abs err MI {worst_mi:.2e}, half-Hellinger {worst_h:.2e} (tol 1e-10)"),
    )
}

// 3 ----------------------------------------------------------------------

fn example4_zeta_half_hellinger(r1: f64, r2: f64) -> f64 {
    ((r1 - 2.0 * r2 + 1.0) * (r1 + 2.0 * r2 + 1.0)).powf(0.25) * (2.0 * r2 * r2 + (1.0 + r1).powi(2)) * r2.abs()
        / (2.0 * (1.0 + r1).sqrt() * (r1 - r2 + 1.0).powf(1.5) * (r1 + r2 + 1.0).powf(1.5))
}

fn criterion_3() -> Outcome {
    let (mut worst_mi, mut worst_h) = (0.0f64, 0.0f64);
    for (r1, r2) in example4_grid() {
        let r = example4(r1, r2);
        let zmi = asymptotic_sd(&r, &PhiFunction::mutual_information()).unwrap();
        let zh = asymptotic_sd(&r, &PhiFunction::hellinger()).unwrap() / 2.0;
        worst_mi = worst_mi.max((zmi - 2.0 * r2.abs() / (1.0 + r1)).abs());
        worst_h = worst_h.max((zh - example4_zeta_half_hellinger(r1, r2)).abs());
    }
    // maximizer over the ρ₁ = 0 slice of the grid resolution (0.5 / 49)
    let step = 0.5 / 49.0;
    let slice: Vec<(f64, f64)> = (0..49)
        .map(|j| {
            let r2 = j as f64 * step;
            (r2, asymptotic_sd(&example4(0.0, r2), &PhiFunction::hellinger()).unwrap() / 2.0)
        })
        .collect();
    let argmax = slice.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let near = (argmax - 0.45427).abs() <= step;
    outcome(
        worst_mi < 1e-8 && worst_h < 1e-8 && near,
        format!(
            "max abs err zeta_MI {worst_mi:.2e}, zeta_H/2 {worst_h:.2e} (tol 1e-8); rho1=0 argmax |rho2| = {argmax:.5} (target 0.45427, grid step {step:.4})"
        ),
    )
}

// 4 ----------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let r = example4(0.5, 0.5);
    let model = CopulaModel::Gaussian(r.clone());
    let (n, reps) = (10_000, 1000);
    let mut lines = Vec::new();
    let mut pass = true;
    for (phi, scale) in [(PhiFunction::mutual_information(), 1.0), (PhiFunction::hellinger(), 0.5)] {
        let est = replicate_gaussian_estimates(&model, &phi, n, reps, 404, &|_, u| u).unwrap();
        let vals: Vec<f64> = est.iter().map(|e| e.0 * scale).collect();
        let emp = (n as f64).sqrt() * Moments::from_slice(&vals).sd();
        let zeta = asymptotic_sd(&r, &phi).unwrap() * scale;
        let ratio = emp / zeta;
        pass &= (ratio - 1.0).abs() <= 0.10;
        lines.push(format!("{}: sqrt(n)SD {emp:.4} vs zeta {zeta:.4} (ratio {ratio:.3})", phi.name()));
    }
    outcome(pass, lines.join("; "))
}

// 5 ----------------------------------------------------------------------

fn ar1(rho: f64, q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

fn criterion_5() -> Outcome {
    let normal = |_: usize, u: f64| norm_quantile(u);
    let t3 = StudentsT::new(0.0, 1.0, 3.0).unwrap();
    let ex = Exp::new(1.0).unwrap();
    let be = Beta::new(2.0, 2.0).unwrap();
    let ff = FisherSnedecor::new(2.0, 6.0).unwrap();
    let mixed = move |j: usize, u: f64| match j {
        0 => t3.inverse_cdf(u),
        1 => ex.inverse_cdf(u),
        2 => be.inverse_cdf(u),
        _ => ff.inverse_cdf(u),
    };
    let settings: [(&str, DMatrix<f64>, &(dyn Fn(usize, f64) -> f64 + Sync)); 3] =
        [("setting 1", ar1(0.25, 4), &normal), ("setting 2", ar1(0.25, 4), &mixed), ("setting 3", ar1(0.8, 4), &normal)];
    let mut pass = true;
    let mut lines = Vec::new();
    for (k, (name, m, margins)) in settings.iter().enumerate() {
        let model = CopulaModel::Gaussian(bcm(m.clone(), &[2, 2]));
        for phi in [PhiFunction::mutual_information(), PhiFunction::hellinger()] {
            let t = studentized_replicates_with(&model, &phi, 5000, 1000, 500 + k as u64, *margins).unwrap();
            let p = ks_test(&t, norm_cdf);
            pass &= p > 0.01;
            lines.push(format!("{name} {} KS p={p:.4}", phi.name()));
        }
    }
    let sizes = [4, 5, 3, 1, 2];
    let eq = DMatrix::from_fn(15, 15, |i, j| if i == j { 1.0 } else { 0.5 });
    let model = CopulaModel::Gaussian(bcm(eq, &sizes));
    for phi in [PhiFunction::mutual_information(), PhiFunction::hellinger()] {
        let t = studentized_replicates_with(&model, &phi, 50, 1000, 540, &normal).unwrap();
        let med = median(&t);
        pass &= med > 0.0;
        lines.push(format!("setting 4 n=50 {} median {med:.3}", phi.name()));
    }
    outcome(pass, lines.join("; "))
}

// 6 ----------------------------------------------------------------------

fn gumbel2(theta: f64) -> CopulaModel {
    CopulaModel::archimedean(ArchimedeanGenerator::gumbel(theta).unwrap(), structure(&[1, 1]))
}

fn criterion_6() -> Outcome {
    let est = quadrature_oracle(&gumbel2(3.0), &PhiFunction::hellinger()).unwrap();
    let half = est.value / 2.0;
    outcome(
        (half - 0.20528).abs() <= 5e-4,
        format!("half-Hellinger {half:.6} (target 0.20528 +/- 0.0005), refinement error {:.1e}", est.error_estimate / 2.0),
    )
}

// 7 ----------------------------------------------------------------------

fn criterion_7() -> Outcome {
    const TRUTH: f64 = 0.20528;
    let reps = 300;
    let n = 200;
    let template = gumbel2(2.0);
    let ms = [100usize, 10_000];
    // per replicate: (general M=100, reduced M=100, reduced M=10⁴)
    let rows: Vec<[f64; 3]> = (0..reps)
        .map(|i| {
            let x = gumbel2(3.0).sampler().unwrap().sample(n, rng::replicate_seed(7, i));
            let u = pseudo_observations(&GroupedSample::new(x, structure(&[1, 1])).unwrap(), TiePolicy::Error).unwrap();
            let fit = fit_staged(&u, &template).unwrap();
            let model = template.with_params(&fit.theta_hat).unwrap();
            let mc_seed = rng::replicate_seed(77, i);
            let g = estimate_phi_mc(&model, &PhiFunction::hellinger(), ms[0], mc_seed).unwrap().value / 2.0;
            let r100 = estimate_hellinger_reduced(&model, ms[0], mc_seed).unwrap().value / 2.0;
            let r1e4 = estimate_hellinger_reduced(&model, ms[1], mc_seed).unwrap().value / 2.0;
            [g, r100, r1e4]
        })
        .collect();
    let col = |k: usize| -> Moments { Moments::from_slice(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()) };
    let (g, r100, r1e4) = (col(0), col(1), col(2));
    // variances: factor-2 band around the cell; biases: magnitude at most twice the cell
    let var_ok = |x: f64, cell: f64| x >= cell / 2.0 && x <= cell * 2.0;
    let bias_ok = |x: f64, cell: f64| x.abs() <= 2.0 * cell;
    let se = |m: &Moments| (m.variance() / reps as f64).sqrt();
    let checks = [
        ("bias M=100", r100.mean - TRUTH, 0.0031, bias_ok(r100.mean - TRUTH, 0.0031), Some(se(&r100))),
        ("var M=100", r100.variance(), 0.0039, var_ok(r100.variance(), 0.0039), None),
        ("bias M=1e4", r1e4.mean - TRUTH, 0.0008, bias_ok(r1e4.mean - TRUTH, 0.0008), Some(se(&r1e4))),
        ("var M=1e4", r1e4.variance(), 0.0005, var_ok(r1e4.variance(), 0.0005), None),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, v, cell, ok, se) in checks {
        pass &= ok;
        let se = se.map(|s| format!(", se {s:.4}")).unwrap_or_default();
        lines.push(format!("reduced {name} {v:.5} (cell {cell}{se}){}", if ok { "" } else { " outside 2x" }));
    }
    let ratio = g.variance() / r100.variance();
    pass &= ratio >= 10.0;
    lines.push(format!("general/reduced var at M=100 {ratio:.1} (>= 10)"));
    outcome(pass, lines.join("; "))
}

// 8 ----------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let c = NestedArchimedeanCopula::from_params(Family::Gumbel, 3.0, &[(3.0, 2), (4.0, 2)]).unwrap();
    let model = CopulaModel::Nested(c);
    let m = 10_000_000;
    let mi = estimate_phi_mc(&model, &PhiFunction::mutual_information(), m, 8).unwrap();
    let h = estimate_hellinger_reduced(&model, m, 88).unwrap();
    let half = h.value / 2.0;
    outcome(
        (mi.value - 0.99935).abs() <= 0.01 && (half - 0.29007).abs() <= 0.005,
        format!(
            "MI {:.5} (se {:.1e}, target 0.99935 +/- 0.01); half-Hellinger {half:.5} (se {:.1e}, target 0.29007 +/- 0.005)",
            mi.value,
            mi.mc_standard_error,
            h.mc_standard_error / 2.0
        ),
    )
}

// 9 ----------------------------------------------------------------------

/// `(n·Var, mean)` of the mutual information and half-Hellinger estimates.
fn nested_replicates(theta: [f64; 3], n: usize, reps: u64, seed: u64) -> [(f64, f64); 2] {
    let truth = CopulaModel::Nested(
        NestedArchimedeanCopula::from_params(Family::Gumbel, theta[0], &[(theta[1], 2), (theta[2], 2)]).unwrap(),
    );
    let template = nested_template(Family::Gumbel, &structure(&[2, 2])).unwrap();
    let sampler = truth.sampler().unwrap();
    let mut mi = Vec::new();
    let mut hh = Vec::new();
    for i in 0..reps {
        let x = sampler.sample(n, rng::replicate_seed(seed, i));
        let s = GroupedSample::new(x, structure(&[2, 2])).unwrap();
        let opts = DataEstimateOptions { m: 2000, seed: rng::replicate_seed(seed + 1, i), ..Default::default() };
        mi.push(estimate_from_data(&s, &template, &PhiFunction::mutual_information(), &opts).unwrap().0.value);
        hh.push(estimate_from_data(&s, &template, &PhiFunction::hellinger(), &opts).unwrap().0.value / 2.0);
    }
    let summary = |v: &[f64]| {
        let m = Moments::from_slice(v);
        (n as f64 * m.variance(), m.mean)
    };
    [summary(&mi), summary(&hh)]
}

fn criterion_9() -> Outcome {
    let reps = 60;
    let mut pass = true;
    let mut lines = Vec::new();
    let mut s1 = Vec::new();
    for n in [50usize, 200] {
        let a = nested_replicates([1.0, 3.0, 4.0], n, reps, 900 + n as u64);
        let b = nested_replicates([3.0, 3.0, 4.0], n, reps, 950 + n as u64);
        for (k, name) in ["MI", "half-H"].iter().enumerate() {
            pass &= a[k].0 < b[k].0;
            lines.push(format!("n={n} {name} nVar S1 {:.2e} < S2 {:.2e}", a[k].0, b[k].0));
        }
        s1.push(a);
    }
    s1.push(nested_replicates([1.0, 3.0, 4.0], 1000, 30, 999));
    for (k, name) in ["MI", "half-H"].iter().enumerate() {
        let nvar: Vec<f64> = s1.iter().map(|r| r[k].0).collect();
        let mean: Vec<f64> = s1.iter().map(|r| r[k].1.abs()).collect();
        let shrinks = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
        pass &= shrinks(&nvar) && shrinks(&mean);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ");
        lines.push(format!("S1 {name} over n=50,200,1000: nVar [{}], |mean| [{}]", fmt(&nvar), fmt(&mean)));
    }
    outcome(pass, lines.join("; "))
}

// 10 ---------------------------------------------------------------------

fn gaussian_sample(r: &BlockCorrelationMatrix, n: usize, seed: u64) -> GroupedSample {
    let u = CopulaModel::Gaussian(r.clone()).sampler().unwrap().sample(n, seed);
    GroupedSample::new(u.map(norm_quantile), r.structure().clone()).unwrap()
}

fn criterion_10() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    let opts = GaussianOptions::default();
    let phis = [PhiFunction::mutual_information(), PhiFunction::hellinger()];
    let m = DMatrix::from_row_slice(
        5,
        5,
        &[
            1.0, 0.4, 0.2, 0.1, 0.3, //
            0.4, 1.0, 0.3, 0.2, 0.1, //
            0.2, 0.3, 1.0, 0.5, 0.2, //
            0.1, 0.2, 0.5, 1.0, 0.4, //
            0.3, 0.1, 0.2, 0.4, 1.0,
        ],
    );
    let r = bcm(m, &[2, 3]);
    let sample = gaussian_sample(&r, 2000, 10);
    let value = |s: &GroupedSample, phi: &PhiFunction| estimate_gaussian(s, phi, 0.05, &opts).unwrap().value.to_f64();

    // A1: swap the groups and permute within each group
    let perm = [4, 2, 3, 1, 0];
    let permuted = sample.permute_columns(&perm, structure(&[3, 2])).unwrap();
    let a1 = phis.iter().map(|p| rel(value(&permuted, p), value(&sample, p))).fold(0.0, f64::max);
    pass &= a1 < 1e-12;
    lines.push(format!("A1 max rel diff {a1:.1e}"));

    // A3: independent groups give values at the sampling-noise floor, dependent ones do not
    let n = 100_000;
    let indep = bcm(DMatrix::from_row_slice(4, 4, &[1.0, 0.5, 0.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.3, 0.0, 0.0, 0.3, 1.0]), &[2, 2]);
    let weak = example4(0.5, 0.05);
    let floor = 18.47 / (2.0 * n as f64); // χ²₄ 0.999 quantile over 2n
    let si = gaussian_sample(&indep, n, 11);
    let sd = gaussian_sample(&weak, n, 12);
    let (vi, vd) = (value(&si, &phis[0]), value(&sd, &phis[0]));
    let (hi, hd) = (value(&si, &phis[1]), value(&sd, &phis[1]));
    let exact_zero = mutual_information_gaussian(&indep).unwrap().to_f64() == 0.0 && hellinger_gaussian(&indep).unwrap() == 0.0;
    let a3 = vi < floor && hi < floor && vd > 10.0 * floor && hd > 2.0 * floor && exact_zero;
    pass &= a3;
    lines.push(format!("A3 independent MI {vi:.1e} H {hi:.1e} < {floor:.1e}; dependent MI {vd:.1e} H {hd:.1e}; closed form exact 0: {exact_zero}"));

    // A6 / A7: increasing transforms of every column, decreasing transform of one
    let inc = (0..5).try_fold(sample.clone(), |s, j| s.map_column(j, |x| (x / 3.0).exp() + j as f64)).unwrap();
    let dec = sample.map_column(3, |x| -x.powi(3)).unwrap();
    let a6 = phis.iter().all(|p| value(&inc, p) == value(&sample, p));
    let a7 = phis.iter().all(|p| value(&dec, p) == value(&sample, p));
    pass &= a6 && a7;
    lines.push(format!("A6 exact: {a6}; A7 exact: {a7}"));

    // A4 equality: append an independent group
    let ext = r.matrix().clone().resize(7, 7, 0.0);
    let mut ext = ext;
    ext[(5, 5)] = 1.0;
    ext[(6, 6)] = 1.0;
    ext[(5, 6)] = 0.6;
    ext[(6, 5)] = 0.6;
    let r_ext = bcm(ext, &[2, 3, 2]);
    let a4_mi = (mutual_information_gaussian(&r_ext).unwrap().to_f64() - mutual_information_gaussian(&r).unwrap().to_f64()).abs();
    let a4_h = (hellinger_gaussian(&r_ext).unwrap() - hellinger_gaussian(&r).unwrap()).abs();
    pass &= a4_mi < 1e-12 && a4_h < 1e-12;
    lines.push(format!("A4 diff MI {a4_mi:.1e} H {a4_h:.1e}"));
    outcome(pass, lines.join("; "))
}

// 11 ---------------------------------------------------------------------

/// Truncated multivariate Taylor number in up to four nilpotent units `ε₁…ε₄`
/// (`εⱼ² = 0`). Component `S` is the coefficient of `∏_{j∈S} εⱼ`, so the
/// coefficient of `ε₁ε₂ε₃ε₄` of `F(u + ε)` is the exact mixed partial of `F`.
#[derive(Clone, Copy, Debug)]
struct Multidual([f64; 16]);

impl Multidual {
    fn constant(x: f64) -> Self {
        let mut c = [0.0; 16];
        c[0] = x;
        Self(c)
    }

    fn variable(x: f64, j: usize) -> Self {
        let mut c = Self::constant(x);
        c.0[1 << j] = 1.0;
        c
    }

    fn add(self, o: Self) -> Self {
        Self(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }

    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; 16];
        for s in 0..16usize {
            // iterate over subsets t of s
            let mut t = s;
            loop {
                c[s] += self.0[t] * o.0[s ^ t];
                if t == 0 {
                    break;
                }
                t = (t - 1) & s;
            }
        }
        Self(c)
    }

    /// `f(self)` from `f(x₀), f'(x₀), …, f⁗(x₀)`.
    fn apply(self, derivs: [f64; 5]) -> Self {
        let mut nil = self;
        nil.0[0] = 0.0;
        let mut out = Self::constant(derivs[0]);
        let mut power = Self::constant(1.0);
        let mut factorial = 1.0;
        for (k, &d) in derivs.iter().enumerate().skip(1) {
            power = power.mul(nil);
            factorial *= k as f64;
            out = out.add(Self(power.0.map(|v| v * d / factorial)));
        }
        out
    }

    fn exp(self) -> Self {
        let e = self.0[0].exp();
        self.apply([e; 5])
    }

    fn ln(self) -> Self {
        let x = self.0[0];
        self.apply([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / x.powi(3), -6.0 / x.powi(4)])
    }

    fn powf(self, p: f64) -> Self {
        let x = self.0[0];
        let mut d = [0.0; 5];
        let mut coef = 1.0;
        for (k, v) in d.iter_mut().enumerate() {
            *v = coef * x.powf(p - k as f64);
            coef *= p - k as f64;
        }
        self.apply(d)
    }

    fn scale(self, a: f64) -> Self {
        Self(self.0.map(|v| v * a))
    }
}

fn md_psi(family: Family, theta: f64, t: Multidual) -> Multidual {
    match family {
        Family::Gumbel => t.powf(1.0 / theta).scale(-1.0).exp(),
        Family::Clayton => t.add(Multidual::constant(1.0)).powf(-1.0 / theta),
    }
}

fn md_psi_inv(family: Family, theta: f64, u: Multidual) -> Multidual {
    match family {
        Family::Gumbel => u.ln().scale(-1.0).powf(theta),
        Family::Clayton => u.powf(-theta).add(Multidual::constant(-1.0)),
    }
}

/// Nested Archimedean cdf `ψ₀(Σᵢ ψ₀⁻¹(ψᵢ(Σ_{j∈i} ψᵢ⁻¹(uⱼ))))` with its exact
/// mixed partial; a single child with `θ₀ = θ₁` is the plain Archimedean cdf.
fn cdf_and_mixed_partial(family: Family, theta0: f64, children: &[(f64, usize)], u: &[f64]) -> (f64, f64) {
    let mut j = 0;
    let mut outer = Multidual::constant(0.0);
    for &(theta, d) in children {
        let mut inner = Multidual::constant(0.0);
        for _ in 0..d {
            inner = inner.add(md_psi_inv(family, theta, Multidual::variable(u[j], j)));
            j += 1;
        }
        outer = outer.add(md_psi_inv(family, theta0, md_psi(family, theta, inner)));
    }
    let c = md_psi(family, theta0, outer);
    (c.0[0], c.0[(1 << u.len()) - 1])
}

/// `∫ c` over the unit cube in probit coordinates with `n` midpoints per axis on `[−w, w]`.
fn probit_integral(density: &dyn Fn(&[f64]) -> f64, q: usize, n: usize, w: f64) -> f64 {
    let h = 2.0 * w / n as f64;
    let nodes: Vec<(f64, f64)> = (0..n).map(|i| -w + (i as f64 + 0.5) * h).map(|z| (norm_cdf(z), norm_pdf(z))).collect();
    let mut total = 0.0;
    let mut u = vec![0.0; q];
    for idx in 0..n.pow(q as u32) {
        let mut rest = idx;
        let mut wt = 1.0;
        for x in u.iter_mut() {
            let (ui, wi) = nodes[rest % n];
            *x = ui;
            wt *= wi;
            rest /= n;
        }
        total += wt * density(&u);
    }
    total * h.powi(q as i32)
}

fn criterion_11() -> Outcome {
    // (label, family, θ₀, children, grid nodes); a single child is a plain Archimedean copula
    let cases: [(&str, Family, f64, Vec<(f64, usize)>, usize); 4] = [
        ("gumbel(3) d=2", Family::Gumbel, 3.0, vec![(3.0, 2)], 200),
        ("clayton(2) d=3", Family::Clayton, 2.0, vec![(2.0, 3)], 80),
        ("nested gumbel(3;3,4) q=4", Family::Gumbel, 3.0, vec![(3.0, 2), (4.0, 2)], 48),
        ("nested clayton(0.5;2,3) q=3", Family::Clayton, 0.5, vec![(2.0, 2), (3.0, 1)], 80),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, family, theta0, children, nodes) in &cases {
        let q: usize = children.iter().map(|c| c.1).sum();
        let (density, cdf): (Box<dyn Fn(&[f64]) -> f64>, Box<dyn Fn(&[f64]) -> f64>) = if children.len() == 1 {
            let g = ArchimedeanGenerator::new(*family, *theta0).unwrap();
            (Box::new(move |u| archimedean_density(&g, u).unwrap()), Box::new(move |u| archimedean_cdf(&g, u)))
        } else {
            let c = NestedArchimedeanCopula::from_params(*family, *theta0, children).unwrap();
            let c2 = c.clone();
            (Box::new(move |u| c.density(u).unwrap()), Box::new(move |u| c2.cdf(u)))
        };
        let (mut worst_d, mut worst_c) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let u: Vec<f64> = (0..q).map(|_| rng.random_range(0.01..0.99)).collect();
            let (c_val, mixed) = cdf_and_mixed_partial(*family, *theta0, children, &u);
            worst_d = worst_d.max(rel(density(&u), mixed));
            worst_c = worst_c.max(rel(cdf(&u), c_val));
        }
        let total = probit_integral(density.as_ref(), q, *nodes, 6.0);
        pass &= worst_d < 1e-3 && worst_c < 1e-10 && (total - 1.0).abs() < 2e-3;
        lines.push(format!("{name}: max rel err vs mixed partial {worst_d:.1e} (cdf agreement {worst_c:.1e}), integral {total:.5}"));
    }
    outcome(pass, lines.join("; "))
}

// 12 ---------------------------------------------------------------------

const CONTINENTS: [usize; 4] = [3, 2, 4, 4];

fn regime_matrix(cross: f64) -> DMatrix<f64> {
    let s = structure(&CONTINENTS);
    DMatrix::from_fn(13, 13, |i, j| {
        if i == j {
            1.0
        } else if s.group_of(i) == s.group_of(j) {
            0.6
        } else {
            cross
        }
    })
}

/// 1100 daily prices whose 1099 log returns switch to strong cross-continent dependence on rows 549–746.
fn synthetic_prices() -> String {
    let calm = CopulaModel::Gaussian(bcm(regime_matrix(0.1), &CONTINENTS)).sampler().unwrap().sample(1099, 1201);
    let crisis = CopulaModel::Gaussian(bcm(regime_matrix(0.55), &CONTINENTS)).sampler().unwrap().sample(1099, 1202);
    let mut csv = String::from("date");
    for j in 0..13 {
        csv.push_str(&format!(",idx{j}"));
    }
    csv.push('\n');
    let mut price = [100.0f64; 13];
    let day0 = 17_000i64;
    for t in 0..=1099usize {
        if t > 0 {
            let row = t - 1;
            let src = if (548..746).contains(&row) { &crisis } else { &calm };
            for (j, p) in price.iter_mut().enumerate() {
                *p *= (0.01 * norm_quantile(src[(row, j)])).exp();
            }
        }
        let (y, m, d) = civil_from_days(day0 + t as i64);
        csv.push_str(&format!("{y:04}-{m:02}-{d:02}"));
        for p in price {
            csv.push_str(&format!(",{p:.10}"));
        }
        csv.push('\n');
    }
    csv
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (yoe + era * 400 + i64::from(m <= 2), m, d)
}

fn criterion_12() -> Outcome {
    let table = io::read_table(synthetic_prices().as_bytes()).unwrap();
    let returns = data::log_returns(&table, structure(&CONTINENTS), MissingPolicy::DropRow).unwrap();
    assert_eq!(returns.n(), 1099);
    let opts = GaussianOptions::default();
    let mut pass = true;
    let mut lines = Vec::new();
    let offsets = [0usize, 3, 5, 9];
    let mut worst_p: f64 = 0.0;
    let mut hump_ok = true;
    for a in 0..4 {
        for b in (a + 1)..4 {
            let cols: Vec<usize> =
                (offsets[a]..offsets[a] + CONTINENTS[a]).chain(offsets[b]..offsets[b] + CONTINENTS[b]).collect();
            let pair = returns.select_columns(&cols, structure(&[CONTINENTS[a], CONTINENTS[b]])).unwrap();
            for phi in [PhiFunction::mutual_information(), PhiFunction::hellinger()] {
                let p12 = contagion_test_periods(&pair, 0..548, 548..746, &phi, 0.05, Direction::IncreaseIntoCrisis, &opts).unwrap();
                let p23 = contagion_test_periods(&pair, 548..746, 746..1099, &phi, 0.05, Direction::DecreaseAfterCrisis, &opts).unwrap();
                worst_p = worst_p.max(p12.p_value).max(p23.p_value);
                let series = rolling_dependence(&pair, 101, 10, &phi, 0.05, &opts).unwrap();
                let vals = series.finite_values();
                let inside: Vec<f64> = series
                    .entries
                    .iter()
                    .zip(&vals)
                    .filter(|(e, _)| e.start >= 548 && e.end <= 746)
                    .filter_map(|(_, v)| *v)
                    .collect();
                let outside: Vec<f64> = series
                    .entries
                    .iter()
                    .zip(&vals)
                    .filter(|(e, _)| e.end <= 548 || e.start >= 746)
                    .filter_map(|(_, v)| *v)
                    .collect();
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let peak = series
                    .entries
                    .iter()
                    .zip(&vals)
                    .max_by(|x, y| x.1.unwrap_or(f64::MIN).total_cmp(&y.1.unwrap_or(f64::MIN)))
                    .unwrap()
                    .0;
                let hump = mean(&inside) > 2.0 * mean(&outside) && peak.end > 548 && peak.start < 746;
                hump_ok &= hump;
                if a == 0 && b == 2 {
                    lines.push(format!(
                        "NA-EU {}: p12 {:.1e}, p23 {:.1e}, regime/calm window mean {:.3}/{:.3}, peak window starts {}",
                        phi.name(),
                        p12.p_value,
                        p23.p_value,
                        mean(&inside),
                        mean(&outside),
                        peak.window_start_label
                    ));
                }
            }
        }
    }
    pass &= worst_p < 0.05 && hump_ok;
    lines.push(format!("all 6 continent pairs: max p {worst_p:.1e} (< 0.05), hump in every series: {hump_ok}"));
    outcome(pass, lines.join("; "))
}

// ------------------------------------------------------------------------

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "closed forms vs quadrature", criterion_1),
        (2, "Example 4 closed-form expressions", criterion_2),
        (3, "Example 4 asymptotic standard deviations", criterion_3),
        (4, "sqrt(n) SD matches zeta", criterion_4),
        (5, "studentized normality and small-sample bias", criterion_5),
        (6, "Gumbel half-Hellinger quadrature truth", criterion_6),
        (7, "general vs reduced Hellinger estimators", criterion_7),
        (8, "nested Gumbel dependence truths", criterion_8),
        (9, "variance ordering and shrinkage", criterion_9),
        (10, "axioms A1 A3 A4 A6 A7", criterion_10),
        (11, "density validity", criterion_11),
        (12, "rolling pipeline and contagion tests", criterion_12),
    ];
    let selected: Option<Vec<u32>> = std::env::var("PHIDEP_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failures = 0;
    for (id, name, f) in criteria {
        if let Some(sel) = &selected {
            if !sel.contains(&id) {
                continue;
            }
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failures += 1;
        }
        println!("criterion {id:>2} [{tag}] {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), result.detail);
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all selected criteria passed");
}
