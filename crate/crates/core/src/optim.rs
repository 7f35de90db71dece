//! BFGS with a strong-Wolfe line search.
//!
//! The inverse-Hessian approximation starts at the identity, is rescaled by
//! `sᵀy / yᵀy` before the first update, and is updated only when
//! `sᵀy > 1e-10 · ‖s‖‖y‖`. Sufficient decrease is tested up to rounding
//! error in `f`. Near a minimum, where `f` is flat to within rounding, the
//! line search switches to the approximate Wolfe test: the curvature
//! condition alone, with the bracket updated from the sign of the directional
//! derivative.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Stop once `‖∇f‖∞` falls to this value.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search_steps: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            max_iterations: 500,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_steps: 40,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<(), OptimError> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(OptimError::InvalidOptions(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.gradient_tolerance > 0.0) || self.max_line_search_steps == 0 {
            return Err(OptimError::InvalidOptions(
                "tolerance and line-search budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub function_evaluations: usize,
}

impl Minimum {
    pub fn gradient_norm(&self) -> f64 {
        self.gradient.amax()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OptimError {
    #[error("invalid optimizer options: {0}")]
    InvalidOptions(String),
    #[error("objective or gradient is not finite at the starting point")]
    NonFiniteStart,
    #[error("line search found no acceptable step after {} iterations", best.iterations)]
    LineSearchFailed { best: Minimum },
    #[error("no convergence within {} iterations (‖∇f‖∞ = {:.3e})", best.iterations, best.gradient_norm())]
    NotConverged { best: Minimum },
}

impl OptimError {
    /// Best iterate carried by a failed run, if any.
    pub fn best(&self) -> Option<&Minimum> {
        match self {
            OptimError::LineSearchFailed { best } | OptimError::NotConverged { best } => Some(best),
            _ => None,
        }
    }
}

struct Probe {
    alpha: f64,
    value: f64,
    slope: f64,
    x: DVector<f64>,
    gradient: DVector<f64>,
}

struct LineSearch<'a, F, G> {
    f: &'a F,
    g: &'a G,
    x: &'a DVector<f64>,
    dir: &'a DVector<f64>,
    f0: f64,
    slope0: f64,
    opts: &'a OptimizerOptions,
    evaluations: usize,
    /// Best point seen that satisfies sufficient decrease.
    fallback: Option<Probe>,
}

/// Relative rounding slack allowed in the sufficient-decrease test.
const ROUNDING_SLACK: f64 = 8.0 * f64::EPSILON;
/// Relative band within which `f` values are treated as indistinguishable.
const FLAT_BAND: f64 = 1e-12;
/// Consecutive iterations without progress in `f` or `‖∇f‖∞` before giving up.
const MAX_STALLED: usize = 5;

impl<F, G> LineSearch<'_, F, G>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn probe(&mut self, alpha: f64) -> Probe {
        self.evaluations += 1;
        let x = self.x + self.dir * alpha;
        let value = (self.f)(&x);
        let gradient = (self.g)(&x);
        let slope = gradient.dot(self.dir);
        Probe {
            alpha,
            value,
            slope,
            x,
            gradient,
        }
    }

    fn armijo(&self, p: &Probe) -> bool {
        p.value.is_finite()
            && p.value
                <= self.f0 + self.opts.c1 * p.alpha * self.slope0 + ROUNDING_SLACK * self.f0.abs()
    }

    fn flat(&self, p: &Probe) -> bool {
        p.value.is_finite()
            && (p.value - self.f0).abs() <= FLAT_BAND * self.f0.abs().max(f64::MIN_POSITIVE)
    }

    /// Acceptable step: strong Wolfe, or approximate Wolfe where `f` is flat.
    fn acceptable(&self, p: &Probe) -> bool {
        self.curvature(p) && (self.armijo(p) || self.flat(p))
    }

    fn stationary(&self, p: &Probe) -> bool {
        self.armijo(p)
            && p.gradient.iter().all(|v| v.is_finite())
            && p.gradient.amax() <= self.opts.gradient_tolerance
    }

    fn curvature(&self, p: &Probe) -> bool {
        p.slope.is_finite() && p.slope.abs() <= -self.opts.c2 * self.slope0
    }

    fn remember(&mut self, p: &Probe) {
        if self.armijo(p) && self.fallback.as_ref().is_none_or(|b| p.value < b.value) {
            self.fallback = Some(Probe {
                alpha: p.alpha,
                value: p.value,
                slope: p.slope,
                x: p.x.clone(),
                gradient: p.gradient.clone(),
            });
        }
    }

    fn budget_left(&self) -> bool {
        self.evaluations < self.opts.max_line_search_steps
    }

    fn run(mut self) -> (Option<Probe>, usize) {
        let mut prev = Probe {
            alpha: 0.0,
            value: self.f0,
            slope: self.slope0,
            x: self.x.clone(),
            gradient: DVector::zeros(0),
        };
        let mut alpha = 1.0;
        let mut first = true;
        while self.budget_left() {
            let cur = self.probe(alpha);
            self.remember(&cur);
            if self.stationary(&cur) {
                return (Some(cur), self.evaluations);
            }
            if self.acceptable(&cur) {
                return (Some(cur), self.evaluations);
            }
            let worse = if self.flat(&cur) {
                false
            } else {
                !self.armijo(&cur) || (!first && cur.value >= prev.value)
            };
            if worse {
                let found = self.zoom(prev, cur);
                return (found.or(self.fallback.take()), self.evaluations);
            }
            if cur.slope >= 0.0 {
                let found = self.zoom(cur, prev);
                return (found.or(self.fallback.take()), self.evaluations);
            }
            prev = cur;
            alpha *= 2.0;
            first = false;
        }
        (self.fallback.take(), self.evaluations)
    }

    /// `lo` satisfies sufficient decrease with the lower value; the bracket
    /// `[lo, hi]` contains a strong-Wolfe point.
    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Option<Probe> {
        while self.budget_left() {
            let width = hi.alpha - lo.alpha;
            if width.abs() <= f64::EPSILON * lo.alpha.abs().max(1.0) {
                return None;
            }
            // minimizer of the quadratic through (lo.value, lo.slope) and hi.value
            let denom = 2.0 * (hi.value - lo.value - lo.slope * width);
            let mut alpha = if denom.is_finite() && denom > 0.0 {
                lo.alpha - lo.slope * width * width / denom
            } else {
                lo.alpha + 0.5 * width
            };
            let (a, b) = if lo.alpha < hi.alpha {
                (lo.alpha, hi.alpha)
            } else {
                (hi.alpha, lo.alpha)
            };
            let margin = 0.1 * (b - a);
            if !alpha.is_finite() || alpha < a + margin || alpha > b - margin {
                alpha = 0.5 * (a + b);
            }
            let cur = self.probe(alpha);
            self.remember(&cur);
            if self.stationary(&cur) {
                return Some(cur);
            }
            if self.acceptable(&cur) {
                return Some(cur);
            }
            if self.flat(&cur) && cur.slope.is_finite() {
                // values carry no information; follow the derivative sign
                if cur.slope * (hi.alpha - lo.alpha) < 0.0 {
                    lo = cur;
                } else {
                    hi = cur;
                }
            } else if !self.armijo(&cur) || cur.value >= lo.value {
                hi = cur;
            } else {
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        None
    }
}

/// Minimizes `f` from `x0`. Succeeds once `‖∇f‖∞ ≤ gradient_tolerance`;
/// otherwise returns the best iterate inside the error.
pub fn bfgs_minimize<F, G>(
    f: F,
    grad: G,
    x0: DVector<f64>,
    opts: &OptimizerOptions,
) -> Result<Minimum, OptimError>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    opts.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut gx = grad(&x);
    let mut evaluations = 1;
    if !fx.is_finite() || gx.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::NonFiniteStart);
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut stalled = 0;
    let snapshot = |x: &DVector<f64>, fx: f64, gx: &DVector<f64>, it: usize, ev: usize| Minimum {
        x: x.clone(),
        value: fx,
        gradient: gx.clone(),
        iterations: it,
        function_evaluations: ev,
    };

    for iteration in 0..opts.max_iterations {
        if gx.amax() <= opts.gradient_tolerance {
            return Ok(snapshot(&x, fx, &gx, iteration, evaluations));
        }
        let mut dir = -(&h * &gx);
        let mut slope = gx.dot(&dir);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            scaled = false;
            dir = -gx.clone();
            slope = gx.dot(&dir);
        }
        let search = LineSearch {
            f: &f,
            g: &grad,
            x: &x,
            dir: &dir,
            f0: fx,
            slope0: slope,
            opts,
            evaluations: 0,
            fallback: None,
        };
        let (step, used) = search.run();
        evaluations += used;
        let Some(step) = step else {
            return Err(OptimError::LineSearchFailed {
                best: snapshot(&x, fx, &gx, iteration, evaluations),
            });
        };
        let s = &step.x - &x;
        let y = &step.gradient - &gx;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if !scaled {
                h *= sy / y.dot(&y);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H⁺ = H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        let progress = step.value < fx || step.gradient.amax() < gx.amax();
        stalled = if progress { 0 } else { stalled + 1 };
        x = step.x;
        fx = step.value;
        gx = step.gradient;
        if stalled >= MAX_STALLED && gx.amax() > opts.gradient_tolerance {
            return Err(OptimError::NotConverged {
                best: snapshot(&x, fx, &gx, iteration + 1, evaluations),
            });
        }
    }
    let best = snapshot(&x, fx, &gx, opts.max_iterations, evaluations);
    if gx.amax() <= opts.gradient_tolerance {
        Ok(best)
    } else {
        Err(OptimError::NotConverged { best })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn rosenbrock(x: &DVector<f64>) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn rosenbrock_grad(x: &DVector<f64>) -> DVector<f64> {
        dvector![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0])
        ]
    }

    #[test]
    fn exact_quadratic() {
        let a = dvector![1.5, -2.0, 0.25];
        for x0 in [dvector![0.0, 0.0, 0.0], dvector![10.0, -3.0, 7.0]] {
            let m = bfgs_minimize(
                |x| (x - &a).norm_squared(),
                |x| (x - &a) * 2.0,
                x0,
                &OptimizerOptions::default(),
            )
            .unwrap();
            assert!((&m.x - &a).amax() < 1e-8);
            assert!(m.iterations <= 3, "{} iterations", m.iterations);
        }
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let m = bfgs_minimize(
            rosenbrock,
            rosenbrock_grad,
            dvector![-1.2, 1.0],
            &OptimizerOptions::default(),
        )
        .unwrap();
        assert!(
            (m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6,
            "{}",
            m.x
        );
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let opts = OptimizerOptions {
            max_iterations: 1,
            ..Default::default()
        };
        let x0 = dvector![-1.2, 1.0];
        let err = bfgs_minimize(rosenbrock, rosenbrock_grad, x0.clone(), &opts).unwrap_err();
        let OptimError::NotConverged { best } = err else {
            panic!("expected NotConverged, got {err:?}")
        };
        assert_eq!(best.iterations, 1);
        assert!(best.value < rosenbrock(&x0));
    }

    #[test]
    fn rejects_bad_constants() {
        let opts = OptimizerOptions {
            c1: 0.9,
            c2: 0.1,
            ..Default::default()
        };
        assert!(matches!(
            bfgs_minimize(rosenbrock, rosenbrock_grad, dvector![0.0, 0.0], &opts),
            Err(OptimError::InvalidOptions(_))
        ));
    }

    #[test]
    fn unbounded_direction_fails_cleanly() {
        // f = -x on x in R: any step decreases, gradient never vanishes
        let opts = OptimizerOptions {
            max_iterations: 5,
            ..Default::default()
        };
        let err = bfgs_minimize(|x| -x[0], |_| dvector![-1.0], dvector![0.0], &opts).unwrap_err();
        assert!(err.best().is_some());
    }
}
