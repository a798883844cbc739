//! Tensor quadrature for Gaussian expectations whose integrand mixes two length scales per axis.
//!
//! Along each axis the integral `∫ g(w) φ(w) dw` of an even `g` is computed by the
//! trapezoid rule after `w = s·sinh(t)`: nodes are dense near the origin at the
//! narrow scale `s` and reach the wide scale within a few multiples of `asinh(ratio)`.

use crate::error::{Error, Result};

/// Trapezoid step in `t`.
pub const SINH_STEP: f64 = 0.12;

/// Nodes extend to this many wide-scale units.
pub const SINH_REACH: f64 = 12.0;

/// Nodes `w ≥ 0` and log weights for `∫_ℝ g(w) φ(w) dw` with `g` even; the
/// weights include the standard normal density and the fold onto `w ≥ 0`.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl AxisRule {
    pub fn even(narrow: f64, wide: f64) -> Self {
        assert!(narrow > 0.0 && wide >= narrow);
        let t_max = (SINH_REACH * wide / narrow).asinh();
        let n = (t_max / SINH_STEP).ceil() as usize;
        let log_norm = -0.5 * (2.0 * std::f64::consts::PI).ln();
        let (nodes, log_weights) = (0..=n)
            .map(|j| {
                let t = j as f64 * SINH_STEP;
                let w = narrow * t.sinh();
                let fold: f64 = if j == 0 { 1.0 } else { 2.0 };
                (w, (fold * SINH_STEP * narrow * t.cosh()).ln() + log_norm - 0.5 * w * w)
            })
            .unzip();
        Self { nodes, log_weights }
    }
}

/// `Σ f(w², log weight)` over the tensor grid of `rules`; `f` receives the
/// squared coordinates and the log of the product weight.
pub fn even_tensor_sum(rules: &[AxisRule], mut f: impl FnMut(&[f64], f64) -> f64) -> f64 {
    let q = rules.len();
    let sizes: Vec<usize> = rules.iter().map(|r| r.nodes.len()).collect();
    let total: usize = sizes.iter().product();
    let mut wsq = vec![0.0; q];
    let mut acc = crate::stats::KahanSum::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut lw = 0.0;
        for (i, rule) in rules.iter().enumerate() {
            let k = rem % sizes[i];
            rem /= sizes[i];
            wsq[i] = rule.nodes[k] * rule.nodes[k];
            lw += rule.log_weights[k];
        }
        acc.add(f(&wsq, lw));
    }
    acc.value()
}

/// Largest dimension accepted by Gaussian quadrature.
pub const MAX_QUADRATURE_DIM: usize = 4;

pub(crate) fn check_dim(q: usize) -> Result<()> {
    if q > MAX_QUADRATURE_DIM {
        Err(Error::Dimension(format!(
            "tensor quadrature supports q <= {MAX_QUADRATURE_DIM}, got q = {q}"
        )))
    } else {
        Ok(())
    }
}
