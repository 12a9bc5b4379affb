//! Minimal invalidation sets: the smallest subsets of a training set on
//! which the learner still produces a training-set prediction error.
//!
//! For learners that always fit realizable data (maximum-likelihood logistic
//! regression, 1NN) a subset errs exactly when it is not realizable, so the
//! search asks the registered realizability check. Regularized logistic
//! regression and kNN can err on realizable data, so for them each candidate
//! subset is fitted and checked directly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnosis::{DiagnosisEngine, DiagnosisError};
use crate::domain::{featurize_training_set, DomainError, FeatureSet, FeaturizedTrainingSet, ObjectUniverse, TrainingSet};
use crate::learners::{fit, training_errors, LearnerError, LearnerKind, LearnerSpec};
use crate::separability::for_each_combination;

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidationError {
    #[error("exact search exceeded its budget of {budget} subset checks; retry with greedy mode")]
    BudgetExceeded { budget: u64 },
    #[error(transparent)]
    Diagnosis(#[from] DiagnosisError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidationSet {
    pub members: TrainingSet,
    pub cardinality: usize,
    /// Whether the set is known to be of minimum cardinality (exact search).
    pub minimum: bool,
    /// Size guaranteed not to be exceeded by a minimum set, when the learner
    /// family provides one.
    pub bound: Option<usize>,
}

/// The cardinality bound for minimum invalidation sets: `|F| + 2` for
/// maximum-likelihood logistic regression and 2 for 1NN.
pub fn cardinality_bound(kind: &LearnerKind, dim: usize) -> Option<usize> {
    match kind {
        LearnerKind::LogregMl => Some(dim + 2),
        LearnerKind::OneNn => Some(2),
        _ => None,
    }
}

pub struct InvalidationSearch<'a> {
    pub universe: &'a ObjectUniverse,
    pub features: &'a FeatureSet,
    pub spec: &'a LearnerSpec,
    pub mode: SearchMode,
    pub budget: u64,
    engine: DiagnosisEngine,
}

impl<'a> InvalidationSearch<'a> {
    pub fn new(universe: &'a ObjectUniverse, features: &'a FeatureSet, spec: &'a LearnerSpec) -> Self {
        InvalidationSearch {
            universe,
            features,
            spec,
            mode: SearchMode::Exact,
            budget: DEFAULT_BUDGET,
            engine: DiagnosisEngine::default(),
        }
    }

    pub fn mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    /// Whether the learner errs on this subset.
    fn errs(&self, data: &FeaturizedTrainingSet) -> Result<bool, InvalidationError> {
        if self.spec.kind.is_consistent() {
            // Single-class data is always realizable.
            let mixed = data.rows.windows(2).any(|w| w[0].label != w[1].label);
            return Ok(mixed && !self.engine.realizable(self.spec, data)?);
        }
        let h = fit(self.spec, data)?;
        Ok(!training_errors(&h, data)?.is_empty())
    }

    /// Returns `None` when the learner fits `t` without error.
    pub fn find(&self, t: &TrainingSet) -> Result<Option<InvalidationSet>, InvalidationError> {
        let data = featurize_training_set(self.features, t, self.universe)?;
        let h = fit(self.spec, &data)?;
        if training_errors(&h, &data)?.is_empty() {
            return Ok(None);
        }
        let bound = cardinality_bound(&self.spec.kind, data.dim);
        let (idx, minimum) = match self.mode {
            SearchMode::Exact => (self.exact(&data)?, true),
            SearchMode::Greedy => (self.greedy(&data)?, false),
        };
        let members = t.restrict(idx.iter().map(|&i| &data.rows[i].id));
        Ok(Some(InvalidationSet { cardinality: members.len(), members, minimum, bound }))
    }

    fn exact(&self, data: &FeaturizedTrainingSet) -> Result<Vec<usize>, InvalidationError> {
        let n = data.len();
        let mut checks = 0u64;
        for k in 1..=n {
            let mut found = None;
            let mut failure = None;
            for_each_combination(n, k, |idx| {
                checks += 1;
                if checks > self.budget {
                    failure = Some(InvalidationError::BudgetExceeded { budget: self.budget });
                    return true;
                }
                match self.errs(&data.subset(idx)) {
                    Ok(true) => {
                        found = Some(idx.to_vec());
                        true
                    }
                    Ok(false) => false,
                    Err(e) => {
                        failure = Some(e);
                        true
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            if let Some(idx) = found {
                return Ok(idx);
            }
        }
        // The full set errs, so the loop always returns at k = n at the latest.
        Ok((0..n).collect())
    }

    /// Drops examples in id order as long as the remainder still errs.
    fn greedy(&self, data: &FeaturizedTrainingSet) -> Result<Vec<usize>, InvalidationError> {
        let mut keep: Vec<usize> = (0..data.len()).collect();
        let mut i = 0;
        while i < keep.len() {
            let mut trial = keep.clone();
            trial.remove(i);
            if self.errs(&data.subset(&trial))? {
                keep = trial;
            } else {
                i += 1;
            }
        }
        Ok(keep)
    }
}

/// Exact search with the default budget.
pub fn find_invalidation_set(
    t: &TrainingSet,
    features: &FeatureSet,
    universe: &ObjectUniverse,
    spec: &LearnerSpec,
) -> Result<Option<InvalidationSet>, InvalidationError> {
    InvalidationSearch::new(universe, features, spec).find(t)
}

/// Whether training on `s` alone yields a training-set prediction error.
pub fn verify_invalidation(
    s: &TrainingSet,
    features: &FeatureSet,
    universe: &ObjectUniverse,
    spec: &LearnerSpec,
) -> Result<bool, InvalidationError> {
    let data = featurize_training_set(features, s, universe)?;
    let h = fit(spec, &data)?;
    Ok(!training_errors(&h, &data)?.is_empty())
}
