//! Unconstrained smooth maximization (BFGS with backtracking line search).

use serde::{Deserialize, Serialize};

/// Something that can be maximized.
pub trait SmoothObjective {
    fn value(&self, x: &[f64]) -> f64;

    /// Value and gradient. The default uses central differences with step
    /// `1e-6 * max(1, |x_k|)`.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let f = self.value(x);
        (f, central_difference_gradient(|z| self.value(z), x, 1e-6))
    }
}

/// Central-difference gradient with steps `rel * max(1, |x_k|)`.
pub fn central_difference_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], rel: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = rel * x[k].abs().max(1.0);
            z[k] = x[k] + h;
            let up = f(&z);
            z[k] = x[k] - h;
            let dn = f(&z);
            z[k] = x[k];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Closure adapter: value function plus optional analytic gradient.
pub struct FnObjective<F, G> {
    pub f: F,
    pub grad: Option<G>,
}

impl<F, G> SmoothObjective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let v = (self.f)(x);
        match &self.grad {
            Some(g) => (v, g(x)),
            None => (v, central_difference_gradient(|z| (self.f)(z), x, 1e-6)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizeOptions {
    /// Stop when the gradient infinity-norm drops below this.
    pub gtol: f64,
    /// Stop when an accepted step improves the objective by less than this.
    pub ftol: f64,
    /// Budget of objective evaluations (gradient evaluations count once).
    pub max_evals: usize,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-6,
            ftol: 1e-10,
            max_evals: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaximizeStatus {
    GradientTolerance,
    FunctionTolerance,
    MaxEvaluations,
    LineSearchFailed,
    NonFiniteStart,
}

impl MaximizeStatus {
    pub fn is_converged(self) -> bool {
        matches!(self, Self::GradientTolerance | Self::FunctionTolerance)
    }
}

#[derive(Clone, Debug)]
pub struct MaximizeResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub status: MaximizeStatus,
    pub iterations: usize,
    pub evaluations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximize `obj` from `start`.
///
/// The returned value is never below `obj(start)`: only improving steps are
/// accepted. A non-finite objective during the line search shrinks the step;
/// if that persists the search stops with [`MaximizeStatus::LineSearchFailed`].
pub fn maximize<O: SmoothObjective + ?Sized>(
    obj: &O,
    start: &[f64],
    opts: &MaximizeOptions,
) -> MaximizeResult {
    let n = start.len();
    let mut x = start.to_vec();
    // Internally minimize the negated objective.
    let (v0, g0) = obj.value_and_gradient(&x);
    let mut evals = 1;
    if !v0.is_finite() || g0.iter().any(|g| !g.is_finite()) {
        return MaximizeResult {
            argmax: x,
            value: v0,
            gradient: g0,
            status: MaximizeStatus::NonFiniteStart,
            iterations: 0,
            evaluations: evals,
        };
    }
    let mut fx = -v0;
    let mut g: Vec<f64> = g0.iter().map(|v| -v).collect();
    let mut hinv = vec![0.0; n * n];
    let reset = |h: &mut [f64], scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    reset(&mut hinv, 1.0);
    let mut scaled = false;
    let mut iterations = 0;
    let status;

    loop {
        if inf_norm(&g) <= opts.gtol {
            status = MaximizeStatus::GradientTolerance;
            break;
        }
        if evals >= opts.max_evals {
            status = MaximizeStatus::MaxEvaluations;
            break;
        }
        iterations += 1;
        let mut p: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| hinv[i * n + j] * g[j]).sum::<f64>())
            .collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            reset(&mut hinv, 1.0);
            scaled = false;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        // First step (and after resets) is limited to unit length per coordinate.
        let mut t = if scaled {
            1.0
        } else {
            (1.0 / inf_norm(&p)).min(1.0)
        };
        let mut accepted = None;
        let mut tries = 0;
        while tries < 60 && evals < opts.max_evals {
            tries += 1;
            let xn: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect();
            let (vn, gn) = obj.value_and_gradient(&xn);
            evals += 1;
            let fnew = -vn;
            if fnew.is_finite() && gn.iter().all(|v| v.is_finite()) && fnew <= fx + 1e-4 * t * slope
            {
                accepted = Some((xn, fnew, gn));
                break;
            }
            // Quadratic interpolation when the trial is finite, plain halving otherwise.
            let shrink = if fnew.is_finite() {
                let denom = 2.0 * (fnew - fx - t * slope);
                if denom > 0.0 {
                    (-slope * t / denom).clamp(0.1, 0.5)
                } else {
                    0.5
                }
            } else {
                0.25
            };
            t *= shrink;
        }
        let Some((xn, fnew, gn)) = accepted else {
            if scaled {
                // Retry from steepest descent before giving up.
                reset(&mut hinv, 1.0);
                scaled = false;
                continue;
            }
            status = if evals >= opts.max_evals {
                MaximizeStatus::MaxEvaluations
            } else {
                MaximizeStatus::LineSearchFailed
            };
            break;
        };
        let gn: Vec<f64> = gn.iter().map(|v| -v).collect();
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement < opts.ftol {
            status = MaximizeStatus::FunctionTolerance;
            break;
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                reset(&mut hinv, sy / dot(&y, &y));
                scaled = true;
            }
            // H <- (I - r s y') H (I - r y s') + r s s'
            let r = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| hinv[i * n + j] * y[j]).sum())
                .collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] +=
                        (1.0 + r * yhy) * r * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
    MaximizeResult {
        argmax: x,
        value: -fx,
        gradient: g.iter().map(|v| -v).collect(),
        status,
        iterations,
        evaluations: evals,
    }
}
