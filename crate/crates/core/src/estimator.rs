//! Two-step GMM: identity weighting, then the regularized inverse of the
//! long-run moment covariance, followed by sandwich covariance and Wald
//! inference.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::data::LongitudinalDataset;
use crate::design::{build_moment_system, expand_design, DesignError, ModelSpec, MomentSystem};
use crate::linalg::{
    least_squares, regularized_inverse, symmetric_inverse, WeightingDiagnostics, WeightingError,
};
use crate::moments::{long_run_covariance, LinkFunction, MomentError, MomentModel};
use crate::optim::{bfgs_minimize, OptimError, OptimizerOptions};

/// Two-sided 95% normal quantile.
pub const Z_975: f64 = 1.959964;

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error("underidentified: {q} moment conditions and {n} subjects for {p} parameters")]
    Underidentified { q: usize, p: usize, n: usize },
    #[error("singular weighting matrix: {0}")]
    SingularWeighting(String),
    #[error("starting values have length {got}, model has {expected} parameters")]
    BadStart { got: usize, expected: usize },
    #[error(transparent)]
    Optimizer(OptimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum StartingValues {
    /// Least squares on the expanded design for the identity link, zero for logit.
    #[default]
    Default,
    Zero,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Steps {
    /// Identity weighting only.
    One,
    #[default]
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitOptions {
    pub optimizer: OptimizerOptions,
    pub start: StartingValues,
    pub steps: Steps,
}

/// Estimates and inference from one GMM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub param_names: Vec<String>,
    pub beta_hat: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub standard_errors: Vec<f64>,
    /// `None` where the standard error is zero.
    pub z_stats: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub objective_step1: f64,
    pub objective_step2: Option<f64>,
    /// `n · Q(β̂)` under the second-step weighting.
    pub j_statistic: Option<f64>,
    pub n_subjects: usize,
    pub n_times: usize,
    pub n_moments: usize,
    pub n_params: usize,
    pub converged: bool,
    pub iterations_step1: usize,
    pub iterations_step2: usize,
    pub gradient_norm: f64,
    pub weighting: Option<WeightingDiagnostics>,
}

/// Wald summaries for each coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldSummary {
    pub standard_errors: Vec<f64>,
    pub z_stats: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
}

/// Two-sided normal p-value of a z statistic.
pub fn normal_p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

pub fn wald_inference(beta_hat: &[f64], covariance: &DMatrix<f64>) -> WaldSummary {
    let mut out = WaldSummary {
        standard_errors: Vec::new(),
        z_stats: Vec::new(),
        p_values: Vec::new(),
        ci_lower: Vec::new(),
        ci_upper: Vec::new(),
    };
    for (r, &b) in beta_hat.iter().enumerate() {
        let se = covariance[(r, r)].max(0.0).sqrt();
        let z = (se > 0.0).then(|| b / se);
        out.standard_errors.push(se);
        out.z_stats.push(z);
        out.p_values.push(z.map(normal_p_value));
        out.ci_lower.push(b - Z_975 * se);
        out.ci_upper.push(b + Z_975 * se);
    }
    out
}

/// `Gᵀ W G`.
pub fn quadratic_form(g: &DVector<f64>, w: &DMatrix<f64>) -> Result<f64, MomentError> {
    if w.shape() != (g.len(), g.len()) {
        return Err(MomentError::DimensionMismatch(format!(
            "W is {}×{}, G has length {}",
            w.nrows(),
            w.ncols(),
            g.len()
        )));
    }
    Ok(g.dot(&(w * g)))
}

/// A moment model with a fixed weighting matrix.
pub struct GmmObjective<'a> {
    model: MomentModel<'a>,
    weight: DMatrix<f64>,
}

impl<'a> GmmObjective<'a> {
    pub fn new(model: MomentModel<'a>, weight: DMatrix<f64>) -> Result<Self, MomentError> {
        let q = model.n_moments();
        if weight.shape() != (q, q) {
            return Err(MomentError::DimensionMismatch(format!(
                "W is {}×{}, expected {q}×{q}",
                weight.nrows(),
                weight.ncols()
            )));
        }
        Ok(Self { model, weight })
    }

    /// `Q(β) = G(β)ᵀ W G(β)`.
    pub fn value(&self, beta: &DVector<f64>) -> Result<f64, MomentError> {
        quadratic_form(&self.model.moment_vector(beta)?, &self.weight)
    }

    /// `∇Q = 2 Jᵀ W G`.
    pub fn gradient(&self, beta: &DVector<f64>) -> Result<DVector<f64>, MomentError> {
        let g = self.model.moment_vector(beta)?;
        let jac = self.model.jacobian(beta)?;
        Ok(jac.transpose() * (&self.weight * g) * 2.0)
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    fn minimize(
        &self,
        start: DVector<f64>,
        opts: &OptimizerOptions,
    ) -> Result<(DVector<f64>, usize, f64, bool), FitError> {
        let f = |b: &DVector<f64>| self.value(b).unwrap_or(f64::INFINITY);
        let g = |b: &DVector<f64>| {
            self.gradient(b)
                .unwrap_or_else(|_| DVector::from_element(b.len(), f64::NAN))
        };
        match bfgs_minimize(f, g, start, opts) {
            Ok(m) => {
                let norm = m.gradient_norm();
                Ok((m.x, m.iterations, norm, true))
            }
            Err(e) => match e.best() {
                Some(best) => Ok((best.x.clone(), best.iterations, best.gradient_norm(), false)),
                None => Err(FitError::Optimizer(e)),
            },
        }
    }
}

/// `(1/n) · B Jᵀ W S W J B` with `B = (Jᵀ W J)⁻¹`.
pub fn sandwich_covariance(
    jac: &DMatrix<f64>,
    weight: &DMatrix<f64>,
    s: &DMatrix<f64>,
    n: usize,
) -> DMatrix<f64> {
    let wj = weight * jac;
    let bread = symmetric_inverse(&(jac.transpose() * &wj));
    let meat = wj.transpose() * s * &wj;
    let cov = &bread * meat * &bread / n as f64;
    (&cov + cov.transpose()) * 0.5
}

fn starting_values(
    ds: &LongitudinalDataset,
    design: &crate::design::Design,
    link: LinkFunction,
    start: &StartingValues,
) -> Result<DVector<f64>, FitError> {
    let p = design.n_params();
    match start {
        StartingValues::Zero => Ok(DVector::zeros(p)),
        StartingValues::Given(v) if v.len() == p => Ok(DVector::from_column_slice(v)),
        StartingValues::Given(v) => Err(FitError::BadStart {
            got: v.len(),
            expected: p,
        }),
        StartingValues::Default => Ok(match link {
            LinkFunction::Logit => DVector::zeros(p),
            LinkFunction::Identity => {
                // outcomes flattened subject-major to match Design::stacked
                let y = DVector::from_iterator(
                    ds.n_subjects() * ds.n_times(),
                    ds.outcomes().transpose().iter().copied(),
                );
                least_squares(&design.stacked(), &y).unwrap_or_else(|| DVector::zeros(p))
            }
        }),
    }
}

/// Two-step GMM with the canonical stacked moment system of `spec`.
pub fn two_step_fit(
    ds: &LongitudinalDataset,
    spec: &ModelSpec,
    opts: &FitOptions,
) -> Result<GmmFit, FitError> {
    let system = build_moment_system(ds.n_times(), spec)?;
    fit_with_system(ds, spec, &system, opts)
}

/// GMM fit with an explicit moment system.
pub fn fit_with_system(
    ds: &LongitudinalDataset,
    spec: &ModelSpec,
    system: &MomentSystem,
    opts: &FitOptions,
) -> Result<GmmFit, FitError> {
    let design = expand_design(ds, spec)?;
    let model = MomentModel::new(ds, &design, system, spec.link)?;
    let (n, p, q) = (ds.n_subjects(), model.n_params(), model.n_moments());
    if q < p || n <= p {
        return Err(FitError::Underidentified { q, p, n });
    }
    opts.optimizer.validate().map_err(FitError::Optimizer)?;

    let start = starting_values(ds, &design, spec.link, &opts.start)?;
    let first = GmmObjective::new(model, DMatrix::identity(q, q))?;
    let (beta1, iterations_step1, grad1, converged1) = first.minimize(start, &opts.optimizer)?;
    let objective_step1 = first.value(&beta1)?;

    let (objective, beta_hat, iterations_step2, grad2, converged2, diagnostics) = match opts.steps {
        Steps::One => (first, beta1.clone(), 0, grad1, true, None),
        Steps::Two => {
            let s1 = long_run_covariance(&model.evaluate(&beta1)?.contributions)?;
            let weighting = regularized_inverse(&s1, p)
                .map_err(|WeightingError::Degenerate(m)| FitError::SingularWeighting(m))?;
            let second = GmmObjective::new(model, weighting.matrix)?;
            let (beta, it, grad, conv) = second.minimize(beta1.clone(), &opts.optimizer)?;
            (second, beta, it, grad, conv, Some(weighting.diagnostics))
        }
    };

    let eval = model.evaluate(&beta_hat)?;
    let s = long_run_covariance(&eval.contributions)?;
    let jac = model.jacobian(&beta_hat)?;
    let cov = sandwich_covariance(&jac, objective.weight(), &s, n);
    let beta_vec: Vec<f64> = beta_hat.iter().copied().collect();
    let wald = wald_inference(&beta_vec, &cov);
    let objective_step2 = match opts.steps {
        Steps::Two => Some(quadratic_form(&eval.mean, objective.weight())?),
        Steps::One => None,
    };

    Ok(GmmFit {
        param_names: spec.param_names(),
        beta_hat: beta_vec,
        covariance: cov
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        standard_errors: wald.standard_errors,
        z_stats: wald.z_stats,
        p_values: wald.p_values,
        ci_lower: wald.ci_lower,
        ci_upper: wald.ci_upper,
        objective_step1,
        objective_step2,
        j_statistic: objective_step2.map(|q2| n as f64 * q2),
        n_subjects: n,
        n_times: ds.n_times(),
        n_moments: q,
        n_params: p,
        converged: converged1 && converged2,
        iterations_step1,
        iterations_step2,
        gradient_norm: match opts.steps {
            Steps::One => grad1,
            Steps::Two => grad2,
        },
        weighting: diagnostics,
    })
}

impl GmmFit {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.n_params;
        DMatrix::from_fn(p, p, |i, j| self.covariance[i][j])
    }

    /// `param,estimate,se,z,p,ci_lo,ci_hi`, one row per coefficient. Undefined
    /// statistics are written as `NA`.
    pub fn coefficient_csv(&self) -> String {
        let mut out = String::from("param,estimate,se,z,p,ci_lo,ci_hi\n");
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
        for r in 0..self.n_params {
            let name = &self.param_names[r];
            let name = if name.contains([',', '"']) {
                format!("\"{}\"", name.replace('"', "\"\""))
            } else {
                name.clone()
            };
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{}",
                self.beta_hat[r],
                self.standard_errors[r],
                opt(self.z_stats[r]),
                opt(self.p_values[r]),
                self.ci_lower[r],
                self.ci_upper[r]
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report is always serializable")
    }

    /// Coefficient table in the `Coef. | SE | p-val` layout.
    pub fn text_table(&self) -> String {
        let width = self
            .param_names
            .iter()
            .map(|n| n.len())
            .max()
            .unwrap_or(5)
            .max(9);
        let mut out = format!(
            "{:<width$}  {:>10}  {:>9}  {:>8}\n",
            "", "Coef.", "SE", "p-val"
        );
        for r in 0..self.n_params {
            let p = match self.p_values[r] {
                Some(p) if p < 0.001 => "<0.001".to_string(),
                Some(p) => format!("{p:.3}"),
                None => "NA".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>10.4}  {:>9.4}  {:>8}",
                self.param_names[r], self.beta_hat[r], self.standard_errors[r], p
            );
        }
        let _ = write!(
            out,
            "n = {}, T = {}, q = {}, p = {}, converged = {}",
            self.n_subjects, self.n_times, self.n_moments, self.n_params, self.converged
        );
        if let Some(j) = self.j_statistic {
            let _ = write!(out, ", J = {j:.4}");
        }
        out.push('\n');
        out
    }
}
