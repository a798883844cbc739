//! Derivative-free maximizers used by the pseudo-likelihood fits.

/// Outcome of a maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Brent's method (golden section with parabolic steps) maximizing `f` on `[a, b]`.
pub fn brent_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> Maximum {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let g = |v: f64| if v.is_nan() { f64::INFINITY } else { -v };
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(f(x));
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for it in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-10;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Maximum { x: vec![x], value: -fx, iterations: it, converged: true };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(f(u));
        if fu <= fx {
            if u >= x { a = x } else { b = x }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x { a = u } else { b = u }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Maximum { x: vec![x], value: -fx, iterations: max_iter, converged: false }
}

/// Nelder–Mead settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop when the simplex diameter drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative size of the initial simplex steps.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { reflection: 1.0, expansion: 2.0, contraction: 0.5, shrink: 0.5, tol: 1e-6, max_iter: 500, initial_step: 0.1 }
    }
}

impl NelderMead {
    /// Maximizes `f` starting from `start`. Every candidate is passed through
    /// `project` first, which keeps the search inside the admissible set.
    pub fn maximize(
        &self,
        mut f: impl FnMut(&[f64]) -> f64,
        project: impl Fn(&mut [f64]),
        start: &[f64],
    ) -> Maximum {
        let n = start.len();
        let mut eval = |x: &mut Vec<f64>| {
            project(x);
            let v = f(x);
            if v.is_nan() { f64::NEG_INFINITY } else { v }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let mut x0 = start.to_vec();
        let f0 = eval(&mut x0);
        simplex.push((x0.clone(), f0));
        for i in 0..n {
            let mut xi = x0.clone();
            let step = self.initial_step * x0[i].abs().max(0.25);
            xi[i] += step;
            let mut fi = eval(&mut xi);
            if xi == x0 {
                // projection undid the step; try the other direction
                xi[i] -= 2.0 * step;
                fi = eval(&mut xi);
            }
            simplex.push((xi, fi));
        }
        let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
        for it in 0..self.max_iter {
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            let diameter = simplex
                .iter()
                .skip(1)
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if diameter < self.tol {
                let (x, value) = simplex.swap_remove(0);
                return Maximum { x, value, iterations: it, converged: true };
            }
            let worst = simplex[n].clone();
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
            let mut xr = combine(&centroid, &worst.0, -self.reflection);
            let fr = eval(&mut xr);
            if fr > simplex[0].1 {
                let mut xe = combine(&centroid, &worst.0, -self.reflection * self.expansion);
                let fe = eval(&mut xe);
                simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr > simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (mut xc, outside) = if fr > worst.1 {
                (combine(&centroid, &xr, self.contraction), true)
            } else {
                (combine(&centroid, &worst.0, self.contraction), false)
            };
            let fc = eval(&mut xc);
            if (outside && fc >= fr) || (!outside && fc > worst.1) {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for entry in simplex.iter_mut().skip(1) {
                let mut xs = combine(&best, &entry.0, self.shrink);
                let fs = eval(&mut xs);
                *entry = (xs, fs);
            }
        }
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (x, value) = simplex.swap_remove(0);
        Maximum { x, value, iterations: self.max_iter, converged: false }
    }
}
