//! Covariate classification, lag groupings, the expanded grouped-lag regressors
//! and the enumeration of valid moment conditions.
//!
//! Times are 0-based inside this module: occasion `t` in `0..T` is wave `t + 1`.
//! A lag `k` at occasion `t` refers to the covariate at `t - k` and exists only
//! when `k <= t`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LongitudinalDataset;
use crate::moments::LinkFunction;

#[derive(Debug, Error, PartialEq)]
pub enum DesignError {
    #[error("invalid lag grouping: {0}")]
    InvalidGrouping(String),
    #[error(
        "covariate `{covariate}` groups lag {lag}, but the panel has only T = {times} occasions"
    )]
    LagOutOfRange {
        covariate: String,
        lag: usize,
        times: usize,
    },
    #[error("model references covariate `{0}`, which is not in the dataset")]
    UnknownCovariate(String),
    #[error("model has no parameters")]
    EmptyModel,
    #[error("need at least 2 occasions, found {0}")]
    TooFewTimes(usize),
    #[error("underidentified: {q} moment conditions for {p} parameters")]
    Underidentified { q: usize, p: usize },
    #[error("invalid moment system: {0}")]
    InvalidSystem(String),
}

/// Covariate types by which outcome times a covariate may be paired with, plus
/// a time-invariant marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovariateClass {
    TypeI,
    TypeII,
    TypeIII,
    TimeInvariant,
}

impl CovariateClass {
    /// Whether the derivative at occasion `s` may be paired with the residual at `t`.
    pub fn is_valid(self, s: usize, t: usize) -> bool {
        match self {
            CovariateClass::TypeI | CovariateClass::TimeInvariant => true,
            CovariateClass::TypeII => s <= t,
            CovariateClass::TypeIII => s == t,
        }
    }
}

impl fmt::Display for CovariateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovariateClass::TypeI => "I",
            CovariateClass::TypeII => "II",
            CovariateClass::TypeIII => "III",
            CovariateClass::TimeInvariant => "time-invariant",
        })
    }
}

/// Valid `(s, t)` pairs for a class, as 1-based wave indices.
pub fn classify_valid_pairs(
    class: CovariateClass,
    times: usize,
) -> Result<Vec<(usize, usize)>, DesignError> {
    if times < 2 {
        return Err(DesignError::TooFewTimes(times));
    }
    Ok((1..=times)
        .flat_map(|s| (1..=times).map(move |t| (s, t)))
        .filter(|&(s, t)| class.is_valid(s, t))
        .collect())
}

/// `T × T` validity indicator over (derivative time, residual time).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMatrix {
    times: usize,
    cells: Vec<bool>,
}

impl ValidityMatrix {
    pub fn new(class: CovariateClass, times: usize) -> Self {
        let cells = (0..times)
            .flat_map(|s| (0..times).map(move |t| class.is_valid(s, t)))
            .collect();
        Self { times, cells }
    }

    pub fn times(&self) -> usize {
        self.times
    }

    pub fn is_valid(&self, s: usize, t: usize) -> bool {
        self.cells[s * self.times + t]
    }

    /// The component at offset `t - s = k` (may be negative for Type I).
    pub fn offset_component(&self, k: isize) -> Vec<(usize, usize)> {
        (0..self.times)
            .filter_map(|s| {
                let t = s as isize + k;
                (0..self.times as isize)
                    .contains(&t)
                    .then_some((s, t as usize))
            })
            .filter(|&(s, t)| self.is_valid(s, t))
            .collect()
    }
}

/// Partition of lags into coefficient blocks. Block 0 is always `{0}`; later
/// blocks hold consecutive lags in increasing order. Lags in no block are
/// dropped from both the mean and the moments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagGrouping {
    blocks: Vec<Vec<usize>>,
}

impl LagGrouping {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self, DesignError> {
        let bad = |m: String| Err(DesignError::InvalidGrouping(m));
        match blocks.first() {
            Some(b) if b == &[0] => {}
            _ => return bad("the first block must be [0]".into()),
        }
        let mut last = 0;
        for block in &blocks[1..] {
            let Some(&first) = block.first() else {
                return bad("empty block".into());
            };
            if first <= last {
                return bad(format!("block {block:?} overlaps or is out of order"));
            }
            if block.windows(2).any(|w| w[1] != w[0] + 1) {
                return bad(format!("block {block:?} is not a run of consecutive lags"));
            }
            last = *block.last().unwrap();
        }
        Ok(Self { blocks })
    }

    /// Contemporaneous coefficient only (aggregated GMM).
    pub fn contemporaneous() -> Self {
        Self {
            blocks: vec![vec![0]],
        }
    }

    /// Separate lag-0 and lag-1 coefficients, higher lags dropped.
    pub fn lag1_only() -> Self {
        Self {
            blocks: vec![vec![0], vec![1]],
        }
    }

    /// `{0}, {1}, {2, …, T-1}`.
    pub fn first_lag_separate(times: usize) -> Self {
        let mut blocks = vec![vec![0]];
        if times > 1 {
            blocks.push(vec![1]);
        }
        if times > 2 {
            blocks.push((2..times).collect());
        }
        Self { blocks }
    }

    /// `{0}, {1, …, T-1}`.
    pub fn single_block(times: usize) -> Self {
        let mut blocks = vec![vec![0]];
        if times > 1 {
            blocks.push((1..times).collect());
        }
        Self { blocks }
    }

    /// One block per lag.
    pub fn fully_partitioned(times: usize) -> Self {
        Self {
            blocks: (0..times.max(1)).map(|k| vec![k]).collect(),
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.blocks.iter().flatten().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub class: CovariateClass,
    pub grouping: LagGrouping,
}

impl CovariateSpec {
    pub fn new(name: impl Into<String>, class: CovariateClass, grouping: LagGrouping) -> Self {
        Self {
            name: name.into(),
            class,
            grouping,
        }
    }

    /// Time-invariant covariates only carry the contemporaneous block.
    pub fn effective_grouping(&self) -> LagGrouping {
        match self.class {
            CovariateClass::TimeInvariant => LagGrouping::contemporaneous(),
            _ => self.grouping.clone(),
        }
    }
}

/// What a parameter multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamRole {
    Intercept,
    Block { covariate: usize, block: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub link: LinkFunction,
    pub intercept: bool,
    pub covariates: Vec<CovariateSpec>,
}

impl ModelSpec {
    pub fn new(
        link: LinkFunction,
        intercept: bool,
        covariates: Vec<CovariateSpec>,
    ) -> Result<Self, DesignError> {
        let spec = Self {
            link,
            intercept,
            covariates,
        };
        if spec.n_params() == 0 {
            return Err(DesignError::EmptyModel);
        }
        Ok(spec)
    }

    pub fn groupings(&self) -> Vec<LagGrouping> {
        self.covariates
            .iter()
            .map(|c| c.effective_grouping())
            .collect()
    }

    /// Parameter layout: intercept first, then each covariate's blocks in order.
    pub fn params(&self) -> Vec<ParamRole> {
        let mut out = Vec::new();
        if self.intercept {
            out.push(ParamRole::Intercept);
        }
        for (j, g) in self.groupings().iter().enumerate() {
            out.extend((0..g.len()).map(|b| ParamRole::Block {
                covariate: j,
                block: b,
            }));
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().len()
    }

    /// Human-readable names, e.g. `bmi`, `bmi (lag 1)`, `bmi (lags 2-4)`.
    pub fn param_names(&self) -> Vec<String> {
        let groupings = self.groupings();
        self.params()
            .into_iter()
            .map(|role| match role {
                ParamRole::Intercept => "(Intercept)".to_string(),
                ParamRole::Block { covariate, block } => {
                    let name = &self.covariates[covariate].name;
                    let lags = &groupings[covariate].blocks()[block];
                    match lags.as_slice() {
                        [0] => name.clone(),
                        [k] => format!("{name} (lag {k})"),
                        [a, .., b] => format!("{name} (lags {a}-{b})"),
                        [] => unreachable!("blocks are never empty"),
                    }
                }
            })
            .collect()
    }

    pub fn check_times(&self, times: usize) -> Result<(), DesignError> {
        if times < 2 {
            return Err(DesignError::TooFewTimes(times));
        }
        for c in &self.covariates {
            let lag = c.effective_grouping().max_lag();
            if lag >= times {
                return Err(DesignError::LagOutOfRange {
                    covariate: c.name.clone(),
                    lag,
                    times,
                });
            }
        }
        Ok(())
    }
}

/// Block regressors for every subject and occasion, laid out `(i, t, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n_subjects: usize,
    n_times: usize,
    n_params: usize,
    values: Vec<f64>,
}

impl Design {
    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Regressor vector of subject `i` at occasion `t`.
    pub fn row(&self, i: usize, t: usize) -> &[f64] {
        let start = (i * self.n_times + t) * self.n_params;
        &self.values[start..start + self.n_params]
    }

    pub fn value(&self, i: usize, t: usize, r: usize) -> f64 {
        self.values[(i * self.n_times + t) * self.n_params + r]
    }

    /// Stacked `(n·T) × p` matrix, subject-major.
    pub fn stacked(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(
            self.n_subjects * self.n_times,
            self.n_params,
            &self.values,
        )
    }
}

/// Resolves the dataset column of every covariate named in the spec.
pub fn covariate_columns(
    ds: &LongitudinalDataset,
    spec: &ModelSpec,
) -> Result<Vec<usize>, DesignError> {
    spec.covariates
        .iter()
        .map(|c| {
            ds.covariate_index(&c.name)
                .ok_or_else(|| DesignError::UnknownCovariate(c.name.clone()))
        })
        .collect()
}

/// Block regressor at occasion `t`: `Σ_{k ∈ block, k ≤ t} x(t − k)`; 1 for the intercept.
pub fn expand_design(ds: &LongitudinalDataset, spec: &ModelSpec) -> Result<Design, DesignError> {
    let (n, times) = (ds.n_subjects(), ds.n_times());
    spec.check_times(times)?;
    let columns = covariate_columns(ds, spec)?;
    let groupings = spec.groupings();
    let params = spec.params();
    let p = params.len();
    let mut values = vec![0.0; n * times * p];
    for i in 0..n {
        for t in 0..times {
            let row = &mut values[(i * times + t) * p..(i * times + t + 1) * p];
            for (r, role) in params.iter().enumerate() {
                row[r] = match *role {
                    ParamRole::Intercept => 1.0,
                    ParamRole::Block { covariate, block } => {
                        let x = ds.covariate(columns[covariate]);
                        groupings[covariate].blocks()[block]
                            .iter()
                            .filter(|&&k| k <= t)
                            .map(|&k| x[(i, t - k)])
                            .sum()
                    }
                };
            }
        }
    }
    Ok(Design {
        n_subjects: n,
        n_times: times,
        n_params: p,
        values,
    })
}

/// One element of the stacked moment vector: the derivative of parameter
/// `param` at occasion `s` times the residual at occasion `t`, summed over
/// `terms`. Canonical conditions have exactly one `(s, t)` term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentCondition {
    pub param: usize,
    pub role: ParamRole,
    pub terms: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSystem {
    n_params: usize,
    n_times: usize,
    conditions: Vec<MomentCondition>,
}

impl MomentSystem {
    /// Wraps a custom condition list. Every term must reference occasions below
    /// `n_times` and a parameter below `n_params`.
    pub fn from_conditions(
        n_params: usize,
        n_times: usize,
        conditions: Vec<MomentCondition>,
    ) -> Result<Self, DesignError> {
        for c in &conditions {
            if c.param >= n_params {
                return Err(DesignError::InvalidSystem(format!(
                    "condition references parameter {} of {n_params}",
                    c.param
                )));
            }
            if c.terms.is_empty() || c.terms.iter().any(|&(s, t)| s >= n_times || t >= n_times) {
                return Err(DesignError::InvalidSystem(format!(
                    "condition for parameter {} has terms {:?} outside 0..{n_times}",
                    c.param, c.terms
                )));
            }
        }
        if conditions.len() < n_params {
            return Err(DesignError::Underidentified {
                q: conditions.len(),
                p: n_params,
            });
        }
        Ok(Self {
            n_params,
            n_times,
            conditions,
        })
    }

    /// Exactly identified system of per-parameter score equations
    /// `Σ_t z_it,r h_it (Y_it − μ_it)`; for the identity link this is the
    /// least-squares normal equations on the expanded design.
    pub fn score_equations(spec: &ModelSpec, times: usize) -> Result<Self, DesignError> {
        spec.check_times(times)?;
        let conditions = spec
            .params()
            .into_iter()
            .enumerate()
            .map(|(param, role)| MomentCondition {
                param,
                role,
                terms: (0..times).map(|t| (t, t)).collect(),
            })
            .collect();
        Self::from_conditions(spec.n_params(), times, conditions)
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_moments(&self) -> usize {
        self.conditions.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn conditions(&self) -> &[MomentCondition] {
        &self.conditions
    }
}

/// Enumerates the stacked moment conditions in canonical order: intercept
/// conditions (one per residual time), then per covariate, block, derivative
/// time `s` and residual time `t`. A block contributes at `s` only if its
/// smallest lag is observable there.
pub fn build_moment_system(times: usize, spec: &ModelSpec) -> Result<MomentSystem, DesignError> {
    spec.check_times(times)?;
    let mut conditions = Vec::new();
    let mut param = 0;
    if spec.intercept {
        conditions.extend((0..times).map(|t| MomentCondition {
            param,
            role: ParamRole::Intercept,
            terms: vec![(t, t)],
        }));
        param += 1;
    }
    for (j, c) in spec.covariates.iter().enumerate() {
        let validity = ValidityMatrix::new(c.class, times);
        for (b, block) in c.effective_grouping().blocks().iter().enumerate() {
            let role = ParamRole::Block {
                covariate: j,
                block: b,
            };
            for s in block[0]..times {
                for t in (0..times).filter(|&t| validity.is_valid(s, t)) {
                    conditions.push(MomentCondition {
                        param,
                        role,
                        terms: vec![(s, t)],
                    });
                }
            }
            param += 1;
        }
    }
    MomentSystem::from_conditions(param, times, conditions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn spec(class: CovariateClass, grouping: LagGrouping) -> ModelSpec {
        ModelSpec::new(
            LinkFunction::Identity,
            false,
            vec![CovariateSpec::new("x", class, grouping)],
        )
        .unwrap()
    }

    /// Brute-force count of `(k, s, t)` with `s ≥ k` (0-based) over the
    /// smallest lag of each block and valid `(s, t)`.
    fn brute_force_q(class: CovariateClass, blocks: &[Vec<usize>], times: usize) -> usize {
        let mut q = 0;
        for b in blocks {
            for s in 1..=times {
                for t in 1..=times {
                    let valid = match class {
                        CovariateClass::TypeI | CovariateClass::TimeInvariant => true,
                        CovariateClass::TypeII => s <= t,
                        CovariateClass::TypeIII => s == t,
                    };
                    if valid && b.iter().any(|&k| k < s) {
                        q += 1;
                    }
                }
            }
        }
        q
    }

    #[test]
    fn valid_pairs_by_class() {
        assert_eq!(
            classify_valid_pairs(CovariateClass::TypeI, 3)
                .unwrap()
                .len(),
            9
        );
        let two = classify_valid_pairs(CovariateClass::TypeII, 3).unwrap();
        assert_eq!(two.len(), 6);
        assert!(two.iter().all(|&(s, t)| s <= t));
        assert_eq!(
            classify_valid_pairs(CovariateClass::TypeIII, 3).unwrap(),
            vec![(1, 1), (2, 2), (3, 3)]
        );
        assert!(classify_valid_pairs(CovariateClass::TypeI, 1).is_err());
    }

    #[test]
    fn validity_offsets() {
        let m = ValidityMatrix::new(CovariateClass::TypeII, 4);
        assert_eq!(m.offset_component(1), vec![(0, 1), (1, 2), (2, 3)]);
        assert!(m.offset_component(-1).is_empty());
        let m = ValidityMatrix::new(CovariateClass::TypeIII, 4);
        assert!(m.offset_component(2).is_empty());
        assert_eq!(m.offset_component(0).len(), 4);
    }

    #[test]
    fn grouping_validation() {
        assert!(LagGrouping::new(vec![vec![0], vec![1], vec![2, 3, 4]]).is_ok());
        assert!(LagGrouping::new(vec![vec![0], vec![2, 3]]).is_ok());
        assert!(LagGrouping::new(vec![vec![1]]).is_err());
        assert!(LagGrouping::new(vec![vec![0], vec![2, 1]]).is_err());
        assert!(LagGrouping::new(vec![vec![0], vec![1, 3]]).is_err());
        assert!(LagGrouping::new(vec![vec![0], vec![2], vec![1]]).is_err());
        assert!(LagGrouping::new(vec![vec![0], vec![]]).is_err());
        assert_eq!(
            LagGrouping::first_lag_separate(5).blocks(),
            &[vec![0], vec![1], vec![2, 3, 4]]
        );
        assert_eq!(LagGrouping::first_lag_separate(2).len(), 2);
    }

    #[test]
    fn moment_counts_match_enumeration() {
        let cases = [
            (CovariateClass::TypeI, LagGrouping::fully_partitioned(3), 18),
            (
                CovariateClass::TypeIII,
                LagGrouping::fully_partitioned(3),
                6,
            ),
            (CovariateClass::TypeIII, LagGrouping::single_block(3), 5),
        ];
        for (class, grouping, expected) in cases {
            let sys = build_moment_system(3, &spec(class, grouping.clone())).unwrap();
            assert_eq!(sys.n_moments(), expected);
            assert_eq!(brute_force_q(class, grouping.blocks(), 3), expected);
        }
        let sys = build_moment_system(
            3,
            &spec(CovariateClass::TypeIII, LagGrouping::single_block(3)),
        )
        .unwrap();
        assert_eq!(sys.n_params(), 2);
        for times in 2..7 {
            for class in [
                CovariateClass::TypeI,
                CovariateClass::TypeII,
                CovariateClass::TypeIII,
            ] {
                for g in [
                    LagGrouping::contemporaneous(),
                    LagGrouping::lag1_only(),
                    LagGrouping::first_lag_separate(times),
                    LagGrouping::single_block(times),
                    LagGrouping::fully_partitioned(times),
                ] {
                    let sys = build_moment_system(times, &spec(class, g.clone())).unwrap();
                    assert_eq!(sys.n_moments(), brute_force_q(class, g.blocks(), times));
                }
            }
        }
    }

    #[test]
    fn every_condition_is_valid_and_observable() {
        let s = spec(CovariateClass::TypeII, LagGrouping::first_lag_separate(5));
        let sys = build_moment_system(5, &s).unwrap();
        let groupings = s.groupings();
        for c in sys.conditions() {
            let ParamRole::Block { covariate, block } = c.role else {
                panic!()
            };
            let (ds, dt) = c.terms[0];
            assert!(ds <= dt);
            assert!(groupings[covariate].blocks()[block]
                .iter()
                .any(|&k| k <= ds));
        }
        // canonical order is reproducible
        assert_eq!(sys, build_moment_system(5, &s).unwrap());
    }

    #[test]
    fn intercept_conditions_one_per_time() {
        let s = ModelSpec::new(
            LinkFunction::Identity,
            true,
            vec![CovariateSpec::new(
                "x",
                CovariateClass::TypeIII,
                LagGrouping::contemporaneous(),
            )],
        )
        .unwrap();
        let sys = build_moment_system(4, &s).unwrap();
        assert_eq!(sys.n_moments(), 8);
        assert!(sys.conditions()[..4]
            .iter()
            .all(|c| c.role == ParamRole::Intercept));
    }

    #[test]
    fn underidentified_is_rejected() {
        let c = CovariateSpec::new(
            "x",
            CovariateClass::TypeIII,
            LagGrouping::fully_partitioned(2),
        );
        // T=2 Type III fully partitioned: 2 + 1 = 3 conditions for 2 params, fine
        assert!(build_moment_system(
            2,
            &ModelSpec::new(LinkFunction::Identity, false, vec![c]).unwrap()
        )
        .is_ok());
        let conds = vec![MomentCondition {
            param: 0,
            role: ParamRole::Intercept,
            terms: vec![(0, 0)],
        }];
        assert!(matches!(
            MomentSystem::from_conditions(2, 2, conds),
            Err(DesignError::Underidentified { q: 1, p: 2 })
        ));
    }

    fn trajectory_dataset() -> LongitudinalDataset {
        let x = DMatrix::from_row_slice(1, 5, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        LongitudinalDataset::new(DMatrix::zeros(1, 5), vec![x], vec!["x".into()]).unwrap()
    }

    #[test]
    fn expanded_rows() {
        let ds = trajectory_dataset();
        let d = expand_design(
            &ds,
            &spec(CovariateClass::TypeI, LagGrouping::first_lag_separate(5)),
        )
        .unwrap();
        assert_eq!(d.row(0, 4), &[5.0, 4.0, 3.0 + 2.0 + 1.0]);
        assert_eq!(d.row(0, 0), &[1.0, 0.0, 0.0]);
        let d = expand_design(
            &ds,
            &spec(CovariateClass::TypeI, LagGrouping::single_block(5)),
        )
        .unwrap();
        assert_eq!(d.row(0, 2), &[3.0, 2.0 + 1.0]);
    }

    #[test]
    fn lag_out_of_range_and_unknown_covariate() {
        let ds = trajectory_dataset();
        let g = LagGrouping::new(vec![vec![0], vec![5]]).unwrap();
        assert!(matches!(
            expand_design(&ds, &spec(CovariateClass::TypeI, g)),
            Err(DesignError::LagOutOfRange { lag: 5, .. })
        ));
        let s = ModelSpec::new(
            LinkFunction::Identity,
            false,
            vec![CovariateSpec::new(
                "z",
                CovariateClass::TypeI,
                LagGrouping::contemporaneous(),
            )],
        )
        .unwrap();
        assert_eq!(
            expand_design(&ds, &s),
            Err(DesignError::UnknownCovariate("z".into()))
        );
    }

    #[test]
    fn time_invariant_has_only_lag_zero() {
        let ds = trajectory_dataset();
        let s = spec(
            CovariateClass::TimeInvariant,
            LagGrouping::fully_partitioned(5),
        );
        let d = expand_design(&ds, &s).unwrap();
        assert_eq!(d.n_params(), 1);
        assert_eq!(s.param_names(), vec!["x"]);
        assert_eq!(build_moment_system(5, &s).unwrap().n_moments(), 25);
    }

    #[test]
    fn parameter_names() {
        let s = ModelSpec::new(
            LinkFunction::Logit,
            true,
            vec![CovariateSpec::new(
                "bmi",
                CovariateClass::TypeII,
                LagGrouping::first_lag_separate(5),
            )],
        )
        .unwrap();
        assert_eq!(
            s.param_names(),
            vec!["(Intercept)", "bmi", "bmi (lag 1)", "bmi (lags 2-4)"]
        );
        assert!(ModelSpec::new(LinkFunction::Identity, false, vec![]).is_err());
    }
}
