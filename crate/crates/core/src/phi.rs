//! Convex divergence generators and their normalization.
//!
//! A generator `Φ : (0, ∞) → ℝ` is convex with `Φ(1) = 0`. The dependence
//! value it induces lies in `[0, Φ(0) + Φ*(0)]`, where `Φ(0)` is the limit at
//! zero and `Φ*(0) = lim Φ(t)/t` at infinity.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value in `[−∞, ∞]` restricted to what dependence measures produce:
/// a finite real or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PositiveInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The finite value, or `None` for `+∞`.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::PositiveInfinity => None,
        }
    }

    /// Lossy conversion to `f64` (`+∞` maps to `f64::INFINITY`).
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtendedReal::PositiveInfinity
        } else {
            ExtendedReal::Finite(x)
        }
    }

    /// Product with the convention `0 · ∞ = 0`.
    pub fn scale(self, factor: f64) -> Self {
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(x * factor),
            ExtendedReal::PositiveInfinity if factor == 0.0 => ExtendedReal::Finite(0.0),
            ExtendedReal::PositiveInfinity => ExtendedReal::PositiveInfinity,
        }
    }

    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PositiveInfinity,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PositiveInfinity => write!(f, "inf"),
        }
    }
}

// JSON has no infinity literal, so `+∞` travels as the string "inf".
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
            ExtendedReal::PositiveInfinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(ExtendedReal::Finite(x)),
            Repr::Str(s) if s == "inf" => Ok(ExtendedReal::PositiveInfinity),
            Repr::Str(s) => Err(de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

/// The generator families supported by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiKind {
    /// `t log t`
    MutualInformation,
    /// `(t − 1)²`
    Pearson,
    /// `(√t − 1)²`
    Hellinger,
    /// `|t − 1|`
    TotalVariation,
    /// `−(t + 1) log((t + 1)/2) + t log t`
    JensenShannon,
    /// `|t − 1|^α` with `α ≥ 1`
    PowerAlpha(f64),
}

/// A divergence generator together with its boundary limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiFunction {
    kind: PhiKind,
}

impl PhiFunction {
    pub fn new(kind: PhiKind) -> Result<Self> {
        if let PhiKind::PowerAlpha(alpha) = kind {
            if !(alpha >= 1.0) || !alpha.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "power generator needs a finite alpha >= 1, got {alpha}"
                )));
            }
        }
        Ok(Self { kind })
    }

    pub const fn mutual_information() -> Self {
        Self { kind: PhiKind::MutualInformation }
    }

    pub const fn hellinger() -> Self {
        Self { kind: PhiKind::Hellinger }
    }

    pub const fn pearson() -> Self {
        Self { kind: PhiKind::Pearson }
    }

    pub const fn total_variation() -> Self {
        Self { kind: PhiKind::TotalVariation }
    }

    pub const fn jensen_shannon() -> Self {
        Self { kind: PhiKind::JensenShannon }
    }

    pub fn kind(&self) -> PhiKind {
        self.kind
    }

    /// `lim_{t→0⁺} Φ(t)`.
    pub fn phi_at_zero(&self) -> ExtendedReal {
        use ExtendedReal::Finite;
        match self.kind {
            PhiKind::MutualInformation => Finite(0.0),
            PhiKind::Pearson | PhiKind::Hellinger | PhiKind::TotalVariation => Finite(1.0),
            PhiKind::JensenShannon => Finite(LN_2),
            PhiKind::PowerAlpha(_) => Finite(1.0),
        }
    }

    /// `lim_{t→∞} Φ(t)/t`.
    pub fn phi_star_at_zero(&self) -> ExtendedReal {
        use ExtendedReal::{Finite, PositiveInfinity};
        match self.kind {
            PhiKind::MutualInformation | PhiKind::Pearson => PositiveInfinity,
            PhiKind::Hellinger | PhiKind::TotalVariation => Finite(1.0),
            PhiKind::JensenShannon => Finite(LN_2),
            PhiKind::PowerAlpha(alpha) if alpha > 1.0 => PositiveInfinity,
            PhiKind::PowerAlpha(_) => Finite(1.0),
        }
    }

    /// Largest attainable dependence value, `Φ(0) + Φ*(0)`.
    pub fn max_value(&self) -> ExtendedReal {
        self.phi_at_zero().add(self.phi_star_at_zero())
    }

    /// `Φ(t)` for `t > 0`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("phi is defined on (0, inf), got t = {t}")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            PhiKind::MutualInformation => t * t.ln(),
            PhiKind::Pearson => (t - 1.0) * (t - 1.0),
            PhiKind::Hellinger => {
                let s = t.sqrt() - 1.0;
                s * s
            }
            PhiKind::TotalVariation => (t - 1.0).abs(),
            PhiKind::JensenShannon => t * t.ln() - (t + 1.0) * ((t + 1.0) / 2.0).ln(),
            PhiKind::PowerAlpha(alpha) => (t - 1.0).abs().powf(alpha),
        }
    }

    /// `Φ′(t)` for `t > 0`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("phi is defined on (0, inf), got t = {t}")));
        }
        match self.kind {
            PhiKind::MutualInformation => Ok(t.ln() + 1.0),
            PhiKind::Pearson => Ok(2.0 * (t - 1.0)),
            PhiKind::Hellinger => Ok(1.0 - 1.0 / t.sqrt()),
            PhiKind::TotalVariation => {
                if t == 1.0 {
                    Err(Error::NonDifferentiable(self.name(), t))
                } else {
                    Ok((t - 1.0).signum())
                }
            }
            PhiKind::JensenShannon => Ok((2.0 * t / (t + 1.0)).ln()),
            PhiKind::PowerAlpha(alpha) => {
                if alpha == 1.0 && t == 1.0 {
                    Err(Error::NonDifferentiable(self.name(), t))
                } else if t == 1.0 {
                    Ok(0.0)
                } else {
                    Ok(alpha * (t - 1.0).abs().powf(alpha - 1.0) * (t - 1.0).signum())
                }
            }
        }
    }

    /// `Φ′(exp(log_ratio))`, usable when `exp(log_ratio)` under- or overflows.
    ///
    /// For kinds without a derivative at 1 the value there is 0.
    pub fn derivative_log(&self, log_ratio: f64) -> f64 {
        let lr = log_ratio;
        match self.kind {
            PhiKind::MutualInformation => lr + 1.0,
            PhiKind::Pearson => 2.0 * lr.exp_m1(),
            PhiKind::Hellinger => -(-0.5 * lr).exp_m1(),
            PhiKind::TotalVariation => {
                if lr == 0.0 {
                    0.0
                } else {
                    lr.signum()
                }
            }
            PhiKind::JensenShannon => {
                if lr >= 0.0 {
                    LN_2 - (-lr).exp().ln_1p()
                } else {
                    LN_2 + lr - lr.exp().ln_1p()
                }
            }
            PhiKind::PowerAlpha(alpha) => {
                if lr == 0.0 {
                    0.0
                } else {
                    alpha * lr.exp_m1().abs().powf(alpha - 1.0) * lr.signum()
                }
            }
        }
    }

    /// True when `Φ′` exists everywhere on `(0, ∞)`.
    pub fn is_differentiable(&self) -> bool {
        match self.kind {
            PhiKind::TotalVariation => false,
            PhiKind::PowerAlpha(alpha) => alpha > 1.0,
            _ => true,
        }
    }

    /// `Φ(t)/t` evaluated at `t = exp(log_ratio)` without overflow.
    ///
    /// This is the Monte Carlo summand when sampling from the joint copula.
    pub fn weighted_by_inverse(&self, log_ratio: f64) -> f64 {
        let lr = log_ratio;
        match self.kind {
            PhiKind::MutualInformation => lr,
            PhiKind::Pearson => {
                let s = (0.5 * lr).sinh();
                4.0 * s * s
            }
            PhiKind::Hellinger => {
                let s = (-0.5 * lr).exp_m1();
                s * s
            }
            PhiKind::TotalVariation => (-lr).exp_m1().abs(),
            PhiKind::JensenShannon => {
                if lr >= 0.0 {
                    let s = (-lr).exp();
                    -s * lr - (1.0 + s) * (s.ln_1p() - LN_2)
                } else {
                    let t = lr.exp();
                    self.eval_unchecked(t) / t
                }
            }
            PhiKind::PowerAlpha(alpha) => {
                if lr >= 0.0 {
                    ((alpha - 1.0) * lr).exp() * (-lr).exp_m1().abs().powf(alpha)
                } else {
                    lr.exp_m1().abs().powf(alpha) * (-lr).exp()
                }
            }
        }
    }

    /// `Φ(exp(log_ratio))` evaluated without forming huge intermediates where possible.
    pub fn evaluate_log(&self, log_ratio: f64) -> f64 {
        match self.kind {
            PhiKind::MutualInformation => {
                if log_ratio > 700.0 {
                    f64::INFINITY
                } else {
                    log_ratio.exp() * log_ratio
                }
            }
            PhiKind::Hellinger => {
                let s = (0.5 * log_ratio).exp_m1();
                s * s
            }
            _ => self.eval_unchecked(log_ratio.exp()),
        }
    }

    /// Map a dependence value onto `[0, 1]`.
    ///
    /// Generators with a finite maximum divide by it; the others use the
    /// artificial normalization `N(t) = √(1 − e^{−2t})`.
    pub fn normalize(&self, d: ExtendedReal) -> f64 {
        match (self.max_value(), d) {
            (ExtendedReal::Finite(max), ExtendedReal::Finite(x)) => (x / max).clamp(0.0, 1.0),
            (ExtendedReal::Finite(_), ExtendedReal::PositiveInfinity) => 1.0,
            (ExtendedReal::PositiveInfinity, ExtendedReal::Finite(x)) => {
                (-(-2.0 * x.max(0.0)).exp_m1()).sqrt()
            }
            (ExtendedReal::PositiveInfinity, ExtendedReal::PositiveInfinity) => 1.0,
        }
    }

    /// CLI spelling of the generator.
    pub fn name(&self) -> String {
        match self.kind {
            PhiKind::MutualInformation => "mutual-information".into(),
            PhiKind::Pearson => "pearson".into(),
            PhiKind::Hellinger => "hellinger".into(),
            PhiKind::TotalVariation => "total-variation".into(),
            PhiKind::JensenShannon => "jensen-shannon".into(),
            PhiKind::PowerAlpha(alpha) => format!("power:{alpha}"),
        }
    }
}

impl fmt::Display for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PhiFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim() {
            "mutual-information" | "mi" => PhiKind::MutualInformation,
            "pearson" => PhiKind::Pearson,
            "hellinger" => PhiKind::Hellinger,
            "total-variation" | "tv" => PhiKind::TotalVariation,
            "jensen-shannon" | "js" => PhiKind::JensenShannon,
            other => match other.strip_prefix("power:") {
                Some(alpha) => {
                    let alpha: f64 = alpha
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad power exponent in {other:?}")))?;
                    PhiKind::PowerAlpha(alpha)
                }
                None => return Err(Error::Parse(format!("unknown phi function {other:?}"))),
            },
        };
        PhiFunction::new(kind)
    }
}

impl Serialize for PhiFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for PhiFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}
