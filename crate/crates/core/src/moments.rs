//! Mean model, empirical moment vector `G(β)`, its Jacobian and the
//! subject-clustered long-run covariance of the moment contributions.
//!
//! Condition `(r, s, t)` contributes `z_is,r · h(η_is) · (Y_it − μ_it)` for
//! subject `i`, where `h ≡ 1` for the identity link and `h = μ(1 − μ)` for the
//! logit link. Per-subject contributions are reduced sequentially in subject
//! order, so `G` is bit-reproducible.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LongitudinalDataset;
use crate::design::{Design, MomentSystem};

#[derive(Debug, Error, PartialEq)]
pub enum MomentError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("long-run covariance needs at least 2 subjects, found {0}")]
    TooFewSubjects(usize),
}

const ETA_CLAMP: f64 = 700.0;
const MU_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Identity,
    Logit,
}

impl LinkFunction {
    /// Inverse link `μ(η)`. The logit mean stays strictly inside (0, 1).
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            LinkFunction::Identity => eta,
            LinkFunction::Logit => {
                let eta = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
                let mu = if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                };
                mu.min(1.0 - f64::EPSILON / 2.0)
            }
        }
    }

    /// `dμ/dη`.
    pub fn mean_derivative(self, eta: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Logit => {
                let mu = self.mean(eta);
                mu * (1.0 - mu)
            }
        }
    }

    /// Derivative factor `h(η)` and its slope `dh/dη`. For logit, μ is clamped
    /// to `[1e-12, 1 − 1e-12]` and the slope is zero where the clamp is active.
    fn factor(self, eta: f64) -> (f64, f64) {
        match self {
            LinkFunction::Identity => (1.0, 0.0),
            LinkFunction::Logit => {
                let mu = self.mean(eta);
                if !(MU_FLOOR..=1.0 - MU_FLOOR).contains(&mu) {
                    let m = mu.clamp(MU_FLOOR, 1.0 - MU_FLOOR);
                    (m * (1.0 - m), 0.0)
                } else {
                    let h = mu * (1.0 - mu);
                    (h, h * (1.0 - 2.0 * mu))
                }
            }
        }
    }
}

pub fn mean_response(eta: f64, link: LinkFunction) -> f64 {
    link.mean(eta)
}

pub fn linear_predictor(row: &[f64], beta: &[f64]) -> Result<f64, MomentError> {
    if row.len() != beta.len() {
        return Err(MomentError::DimensionMismatch(format!(
            "regressor row has {} entries, β has {}",
            row.len(),
            beta.len()
        )));
    }
    Ok(row.iter().zip(beta).map(|(z, b)| z * b).sum())
}

/// Sample moments and per-subject contributions at one β.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEvaluation {
    /// `G = (1/n) Σ_i g_i`, length q.
    pub mean: DVector<f64>,
    /// Row `i` is `g_i`, shape n × q.
    pub contributions: DMatrix<f64>,
}

/// Per-subject quantities reused across conditions.
struct SubjectState {
    residual: Vec<f64>,
    factor: Vec<f64>,
    factor_slope: Vec<f64>,
    mean_slope: Vec<f64>,
}

/// Binds a dataset's outcomes, its expanded design and a moment system.
#[derive(Debug, Clone, Copy)]
pub struct MomentModel<'a> {
    outcomes: &'a DMatrix<f64>,
    design: &'a Design,
    system: &'a MomentSystem,
    link: LinkFunction,
}

impl<'a> MomentModel<'a> {
    pub fn new(
        ds: &'a LongitudinalDataset,
        design: &'a Design,
        system: &'a MomentSystem,
        link: LinkFunction,
    ) -> Result<Self, MomentError> {
        if (design.n_subjects(), design.n_times()) != (ds.n_subjects(), ds.n_times()) {
            return Err(MomentError::DimensionMismatch(format!(
                "design is {}×{}, dataset is {}×{}",
                design.n_subjects(),
                design.n_times(),
                ds.n_subjects(),
                ds.n_times()
            )));
        }
        if system.n_params() != design.n_params() || system.n_times() != design.n_times() {
            return Err(MomentError::DimensionMismatch(format!(
                "moment system has p = {}, T = {}; design has p = {}, T = {}",
                system.n_params(),
                system.n_times(),
                design.n_params(),
                design.n_times()
            )));
        }
        Ok(Self {
            outcomes: ds.outcomes(),
            design,
            system,
            link,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.design.n_subjects()
    }

    pub fn n_params(&self) -> usize {
        self.design.n_params()
    }

    pub fn n_moments(&self) -> usize {
        self.system.n_moments()
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    pub fn design(&self) -> &Design {
        self.design
    }

    fn check_beta(&self, beta: &DVector<f64>) -> Result<(), MomentError> {
        if beta.len() != self.n_params() {
            return Err(MomentError::DimensionMismatch(format!(
                "β has length {}, model has {} parameters",
                beta.len(),
                self.n_params()
            )));
        }
        Ok(())
    }

    fn subject_state(&self, i: usize, beta: &[f64], state: &mut SubjectState) {
        for t in 0..self.design.n_times() {
            let eta: f64 = self
                .design
                .row(i, t)
                .iter()
                .zip(beta)
                .map(|(z, b)| z * b)
                .sum();
            let mu = self.link.mean(eta);
            let (h, dh) = self.link.factor(eta);
            state.residual[t] = self.outcomes[(i, t)] - mu;
            state.factor[t] = h;
            state.factor_slope[t] = dh;
            state.mean_slope[t] = self.link.mean_derivative(eta);
        }
    }

    fn new_state(&self) -> SubjectState {
        let t = self.design.n_times();
        SubjectState {
            residual: vec![0.0; t],
            factor: vec![0.0; t],
            factor_slope: vec![0.0; t],
            mean_slope: vec![0.0; t],
        }
    }

    /// `G(β)` together with every subject's contribution.
    pub fn evaluate(&self, beta: &DVector<f64>) -> Result<MomentEvaluation, MomentError> {
        self.check_beta(beta)?;
        let (n, q) = (self.n_subjects(), self.n_moments());
        let mut contributions = DMatrix::zeros(n, q);
        let mut state = self.new_state();
        for i in 0..n {
            self.subject_state(i, beta.as_slice(), &mut state);
            for (m, c) in self.system.conditions().iter().enumerate() {
                contributions[(i, m)] = c
                    .terms
                    .iter()
                    .map(|&(s, t)| {
                        self.design.value(i, s, c.param) * state.factor[s] * state.residual[t]
                    })
                    .sum();
            }
        }
        let mut mean = DVector::zeros(q);
        for i in 0..n {
            for m in 0..q {
                mean[m] += contributions[(i, m)];
            }
        }
        mean /= n as f64;
        Ok(MomentEvaluation {
            mean,
            contributions,
        })
    }

    /// `G(β)` without storing per-subject contributions.
    pub fn moment_vector(&self, beta: &DVector<f64>) -> Result<DVector<f64>, MomentError> {
        self.check_beta(beta)?;
        let q = self.n_moments();
        let mut mean = DVector::zeros(q);
        let mut state = self.new_state();
        for i in 0..self.n_subjects() {
            self.subject_state(i, beta.as_slice(), &mut state);
            for (m, c) in self.system.conditions().iter().enumerate() {
                mean[m] += c
                    .terms
                    .iter()
                    .map(|&(s, t)| {
                        self.design.value(i, s, c.param) * state.factor[s] * state.residual[t]
                    })
                    .sum::<f64>();
            }
        }
        Ok(mean / self.n_subjects() as f64)
    }

    /// Analytic `∂G/∂β`, shape q × p.
    pub fn jacobian(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>, MomentError> {
        self.check_beta(beta)?;
        let (n, q, p) = (self.n_subjects(), self.n_moments(), self.n_params());
        let mut jac = DMatrix::zeros(q, p);
        let mut state = self.new_state();
        for i in 0..n {
            self.subject_state(i, beta.as_slice(), &mut state);
            for (m, c) in self.system.conditions().iter().enumerate() {
                for &(s, t) in &c.terms {
                    let d = self.design.value(i, s, c.param);
                    if d == 0.0 {
                        continue;
                    }
                    let zs = self.design.row(i, s);
                    let zt = self.design.row(i, t);
                    let a = d * state.factor_slope[s] * state.residual[t];
                    let b = d * state.factor[s] * state.mean_slope[t];
                    for col in 0..p {
                        jac[(m, col)] += a * zs[col] - b * zt[col];
                    }
                }
            }
        }
        Ok(jac / n as f64)
    }
}

/// `S = (1/n) Σ_i (g_i − ḡ)(g_i − ḡ)ᵀ` from an n × q contribution matrix.
pub fn long_run_covariance(contributions: &DMatrix<f64>) -> Result<DMatrix<f64>, MomentError> {
    let n = contributions.nrows();
    if n < 2 {
        return Err(MomentError::TooFewSubjects(n));
    }
    let mean = contributions.row_mean();
    let mut centered = contributions.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let s = centered.transpose() * &centered / n as f64;
    Ok((&s + s.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{
        build_moment_system, expand_design, CovariateClass, CovariateSpec, LagGrouping, ModelSpec,
    };
    use approx::assert_relative_eq;

    #[test]
    fn predictor_and_means() {
        assert_eq!(linear_predictor(&[1.0, 2.0], &[0.5, 0.5]).unwrap(), 1.5);
        assert_eq!(linear_predictor(&[3.0, -2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(
            linear_predictor(&[0.0, 1.0, 0.0], &[4.0, 5.0, 6.0]).unwrap(),
            5.0
        );
        assert!(linear_predictor(&[1.0], &[1.0, 2.0]).is_err());

        assert_eq!(mean_response(2.5, LinkFunction::Identity), 2.5);
        assert_eq!(mean_response(0.0, LinkFunction::Logit), 0.5);
        let tiny = mean_response(-40.0, LinkFunction::Logit);
        assert!(tiny > 0.0 && tiny < 1e-17);
        for eta in [-1e4, -745.0, -700.0, 700.0, 1e4] {
            let mu = mean_response(eta, LinkFunction::Logit);
            assert!(mu.is_finite() && mu > 0.0 && mu < 1.0, "{eta} -> {mu}");
        }
    }

    /// One subject, T = 2, x = (1, 2), Y = (1, 3), Type I, fully partitioned,
    /// β = 0. Enumerated by hand:
    /// lag 0: (s,t) ∈ {1,2}²: x_s·Y_t = 1·1, 1·3, 2·1, 2·3 = (1, 3, 2, 6)
    /// lag 1: s = 2 only: x_1·Y_t = (1, 3).
    #[test]
    fn hand_enumerated_moments() {
        let ds = LongitudinalDataset::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 3.0]),
            vec![DMatrix::from_row_slice(1, 2, &[1.0, 2.0])],
            vec!["x".into()],
        )
        .unwrap();
        let spec = ModelSpec::new(
            LinkFunction::Identity,
            false,
            vec![CovariateSpec::new(
                "x",
                CovariateClass::TypeI,
                LagGrouping::fully_partitioned(2),
            )],
        )
        .unwrap();
        let design = expand_design(&ds, &spec).unwrap();
        let system = build_moment_system(2, &spec).unwrap();
        let model = MomentModel::new(&ds, &design, &system, spec.link).unwrap();
        let g = model.moment_vector(&DVector::zeros(2)).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 3.0, 2.0, 6.0, 1.0, 3.0]);
        assert!(model.moment_vector(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn covariance_edge_cases() {
        let v = [1.0, -2.0, 0.5];
        let g = DMatrix::from_row_slice(2, 3, &[v[0], v[1], v[2], -v[0], -v[1], -v[2]]);
        let s = long_run_covariance(&g).unwrap();
        let vv = DVector::from_row_slice(&v);
        assert_relative_eq!(s, &vv * vv.transpose(), epsilon = 1e-15);

        let same = DMatrix::from_fn(5, 3, |_, j| j as f64 + 0.25);
        assert_eq!(long_run_covariance(&same).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(
            long_run_covariance(&DMatrix::zeros(1, 3)),
            Err(MomentError::TooFewSubjects(1))
        );
    }

    #[test]
    fn covariance_matches_direct_sum() {
        let g = DMatrix::from_fn(7, 4, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 1.7 + 0.1 * j as f64
        });
        let s = long_run_covariance(&g).unwrap();
        let (n, q) = g.shape();
        for a in 0..q {
            for b in 0..q {
                let ma: f64 = (0..n).map(|i| g[(i, a)]).sum::<f64>() / n as f64;
                let mb: f64 = (0..n).map(|i| g[(i, b)]).sum::<f64>() / n as f64;
                let direct: f64 = (0..n)
                    .map(|i| (g[(i, a)] - ma) * (g[(i, b)] - mb))
                    .sum::<f64>()
                    / n as f64;
                assert_relative_eq!(s[(a, b)], direct, epsilon = 1e-13);
            }
        }
    }
}
