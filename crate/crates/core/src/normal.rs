//! Standard normal helpers, ranks and normal scores.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal cdf, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile. Returns `±∞` at the endpoints.
///
/// An inverse-erfc starting value is polished by one Halley step on the cdf.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else if p <= 0.5 {
        lower_quantile(p)
    } else {
        -lower_quantile(1.0 - p)
    }
}

fn lower_quantile(p: f64) -> f64 {
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let u = (norm_cdf(x) - p) / norm_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// How tied observations within a column are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Reject columns with duplicate values.
    #[default]
    Error,
    /// Assign tied observations the average of their ranks.
    Midrank,
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" | "strict" => Ok(TiePolicy::Error),
            "midrank" => Ok(TiePolicy::Midrank),
            other => Err(Error::Parse(format!("unknown tie policy {other:?}"))),
        }
    }
}

fn sorted_order(column: &[f64]) -> Result<Vec<usize>> {
    if let Some(pos) = column.iter().position(|x| x.is_nan()) {
        return Err(Error::MissingValue { row: pos, column: 0 });
    }
    let mut idx: Vec<usize> = (0..column.len()).collect();
    idx.sort_unstable_by(|&a, &b| column[a].total_cmp(&column[b]));
    Ok(idx)
}

/// Integer ranks `1..=n`. Fails with [`Error::Ties`] on duplicates.
pub fn ranks(column: &[f64]) -> Result<Vec<usize>> {
    let order = sorted_order(column)?;
    for w in order.windows(2) {
        if column[w[0]] == column[w[1]] {
            return Err(Error::Ties { column: 0 });
        }
    }
    let mut r = vec![0usize; column.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos + 1;
    }
    Ok(r)
}

/// Ranks with ties replaced by their average rank.
pub fn midranks(column: &[f64]) -> Result<Vec<f64>> {
    let order = sorted_order(column)?;
    let n = column.len();
    let mut r = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            r[i] = avg;
        }
        start = end;
    }
    Ok(r)
}

/// Ranks under the given policy, as reals.
pub fn ranks_with_policy(column: &[f64], policy: TiePolicy) -> Result<Vec<f64>> {
    match policy {
        TiePolicy::Error => Ok(ranks(column)?.into_iter().map(|r| r as f64).collect()),
        TiePolicy::Midrank => midranks(column),
    }
}

/// Scores `φ⁻¹(r/(n+1))` for ranks `r = 1..=n`, indexed by `r − 1`.
///
/// The upper half is the exact negation of the lower half, so the table sums
/// to zero and reversing ranks negates scores bit-for-bit.
pub fn score_table(n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    let denom = (n + 1) as f64;
    for r in 1..=n / 2 {
        let v = norm_quantile(r as f64 / denom);
        s[r - 1] = v;
        s[n - r] = -v;
    }
    s
}

/// Normal scores of a column: entry `ℓ` is `φ⁻¹(rank_ℓ/(n+1))`.
pub fn normal_scores(column: &[f64], policy: TiePolicy) -> Result<Vec<f64>> {
    let n = column.len();
    if n < 2 {
        return Err(Error::Dimension(format!("normal scores need n >= 2, got {n}")));
    }
    match policy {
        TiePolicy::Error => {
            let table = score_table(n);
            Ok(ranks(column)?.into_iter().map(|r| table[r - 1]).collect())
        }
        TiePolicy::Midrank => {
            let denom = (n + 1) as f64;
            Ok(midranks(column)?
                .into_iter()
                .map(|r| {
                    // reflect through the centre so that symmetric ranks give symmetric scores
                    if 2.0 * r <= denom {
                        norm_quantile(r / denom)
                    } else {
                        -norm_quantile((denom - r) / denom)
                    }
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_reference_values() {
        // values from a high-precision normal quantile table
        assert!((norm_quantile(0.75) - 0.674_489_750_196_081_7).abs() < 1e-13);
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((norm_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-9);
        assert_eq!(norm_quantile(0.5), 0.0);
    }

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        // lower tail relative accuracy
        let p = norm_cdf(-8.485_281_374_238_57);
        assert!((p / 1.075_986_835_624_952_6e-17 - 1.0).abs() < 1e-13, "{p}");
    }

    #[test]
    fn scores_small_example() {
        let z = normal_scores(&[3.2, 1.1, 5.0], TiePolicy::Error).unwrap();
        assert_eq!(z[0], 0.0);
        assert!((z[1] + 0.674_489_750_196_081_7).abs() < 1e-12);
        assert_eq!(z[2], -z[1]);
    }

    #[test]
    fn ties_rejected_or_averaged() {
        assert_eq!(ranks(&[1.0, 2.0, 1.0]), Err(Error::Ties { column: 0 }));
        assert_eq!(midranks(&[1.0, 2.0, 1.0]).unwrap(), vec![1.5, 3.0, 1.5]);
        let z = normal_scores(&[1.0, 1.0, 1.0], TiePolicy::Midrank).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn score_table_is_antisymmetric() {
        for n in [2usize, 3, 10, 101] {
            let t = score_table(n);
            for r in 0..n {
                assert_eq!(t[r], -t[n - 1 - r]);
            }
            assert!(t.iter().sum::<f64>().abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn scores_sum_to_zero_and_respect_transforms(v in prop::collection::hash_set(-1_000_000i64..1_000_000, 2..200)) {
            let col: Vec<f64> = v.into_iter().map(|x| x as f64 / 1000.0).collect();
            let z = normal_scores(&col, TiePolicy::Error).unwrap();
            prop_assert!(z.iter().sum::<f64>().abs() < 1e-10);
            let transformed: Vec<f64> = col.iter().map(|x| (x / 100.0).exp() + 3.0 * x).collect();
            prop_assert_eq!(&normal_scores(&transformed, TiePolicy::Error).unwrap(), &z);
            let negated: Vec<f64> = col.iter().map(|x| -x).collect();
            let zn = normal_scores(&negated, TiePolicy::Error).unwrap();
            for (a, b) in z.iter().zip(&zn) {
                prop_assert_eq!(*a, -*b);
            }
        }

        #[test]
        fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
            let x = norm_quantile(p);
            let back = norm_cdf(x);
            prop_assert!((back - p).abs() <= 1e-12 * p.min(1.0 - p).max(1e-300) + 1e-15);
        }
    }
}
