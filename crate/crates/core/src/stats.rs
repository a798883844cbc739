//! Summary statistics used by the estimators and their tests.

/// Compensated (Kahan–Babuška) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        iter.into_iter().for_each(|x| k.add(x));
        k
    }
}

/// Mergeable first four central moments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    /// Two-pass moments of a batch.
    pub fn from_slice(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        Self { n, mean, m2, m3, m4 }
    }

    /// Combine two batches (Pébay's update formulas).
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0.0 {
            return *other;
        }
        if other.n == 0.0 {
            return *self;
        }
        let (na, nb) = (self.n, other.n);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d2 * delta * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        Self { n, mean, m2, m3, m4 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2 / (self.n - 1.0)
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Non-excess kurtosis `m4 / m2²` (3 for a normal law); 0 for constant data.
    pub fn kurtosis(&self) -> f64 {
        if self.m2 == 0.0 {
            0.0
        } else {
            self.n * self.m4 / (self.m2 * self.m2)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<KahanSum>().value() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    Moments::from_slice(xs).variance()
}

/// Median (average of the two middle values for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (continuous data).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_unstable_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    pearson(&rank(x), &rank(y))
}

/// Kendall's tau for continuous data in `O(n log n)` (Knight's algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let pairs = (n as f64) * (n as f64 - 1.0) / 2.0;
    (pairs - 2.0 * swaps as f64) / pairs
}

fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`, using the
/// Kolmogorov limit law with Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// KS test p-value against an arbitrary continuous cdf.
pub fn ks_test(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    ks_pvalue(ks_statistic(xs, cdf), xs.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-13)).abs() < 1e-16);
    }

    #[test]
    fn merged_moments_match_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>().powi(3) * 10.0).collect();
        let whole = Moments::from_slice(&xs);
        let merged = xs
            .chunks(137)
            .map(Moments::from_slice)
            .fold(Moments::default(), |a, b| a.merge(&b));
        assert!((whole.mean - merged.mean).abs() < 1e-12);
        assert!((whole.variance() / merged.variance() - 1.0).abs() < 1e-10);
        assert!((whole.kurtosis() / merged.kurtosis() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kendall_matches_quadratic_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..300).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.5 * rng.random::<f64>()).collect();
        let mut conc = 0i64;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                conc += if (x[i] - x[j]) * (y[i] - y[j]) > 0.0 { 1 } else { -1 };
            }
        }
        let expect = conc as f64 / (300.0 * 299.0 / 2.0);
        assert!((kendall_tau(&x, &y) - expect).abs() < 1e-12);
    }

    #[test]
    fn ks_uniform_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        assert!(ks_test(&xs, |x| x.clamp(0.0, 1.0)) > 0.01);
        let skewed: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_test(&skewed, |x| x.clamp(0.0, 1.0)) < 1e-6);
        // critical value at the 5% level for large n is about 1.358/sqrt(n)
        assert!((ks_pvalue(1.358 / (1e6f64).sqrt(), 1_000_000) - 0.05).abs() < 2e-3);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
