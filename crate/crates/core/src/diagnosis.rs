//! Four-way classification of prediction errors.
//!
//! A training-set error is checked in a fixed order: mislabeled examples
//! first, then whether the learner's hypothesis class contains a classifier
//! consistent with the training set (learner error) or not (representation
//! error). A generalization error on `x` is first retried with
//! `T' = T ∪ {(x, c*(x))}`; if the retrained classifier fits `T'` it is a
//! boundary error, otherwise `T'` goes through the training-set procedure,
//! with mislabeling still only looked for inside `T`.
//!
//! Whether a consistent classifier exists is answered by a
//! [`RealizabilityCheck`] registered per learner family. A learner without a
//! registered check is refused.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::domain::{
    featurize, featurize_training_set, DomainError, FeatureSet, FeaturizedTrainingSet, Label, ObjectId,
    ObjectUniverse, Row, TargetOracle, TrainingSet,
};
use crate::learners::{
    self, fit, penalized_loss, predict, training_errors, Hypothesis, LearnerError, LearnerKind, LearnerSpec,
    LinearHypothesis,
};
use crate::separability::{self, SeparabilityError};

/// Loss gap below which a consistent alternative is not considered better.
pub const LOSS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosisError {
    #[error("no realizability check registered for {0}")]
    NoRealizabilityCheck(LearnerKind),
    #[error("realizable training set but no consistent hypothesis was found")]
    InternalInconsistency,
    #[error("object {0:?} is not in the universe")]
    UnknownObject(ObjectId),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Separability(#[from] SeparabilityError),
}

/// A labeled example, serialized as `[object-id, label]`.
pub type Example = (ObjectId, Label);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Mislabeling,
    Representation,
    Learner,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerSubtype {
    Optimization,
    Objective,
}

/// Result of comparing the returned hypothesis against the best consistent
/// hypothesis found. Losses are absent for nearest-neighbor learners.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerSplit {
    pub subtype: LearnerSubtype,
    pub returned_loss: Option<f64>,
    pub consistent_loss: Option<f64>,
    pub consistent_hypothesis: Option<LinearHypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Evidence {
    Mislabeling { mislabeled: Vec<Example> },
    Representation { witness: Vec<Example> },
    Learner(LearnerSplit),
    Boundary { before: Hypothesis, after: Hypothesis },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub object_id: ObjectId,
    pub evidence: Evidence,
    pub hypothesis_before: Hypothesis,
    pub hypothesis_after: Option<Hypothesis>,
}

impl Diagnosis {
    pub fn category(&self) -> Category {
        match self.evidence {
            Evidence::Mislabeling { .. } => Category::Mislabeling,
            Evidence::Representation { .. } => Category::Representation,
            Evidence::Learner(_) => Category::Learner,
            Evidence::Boundary { .. } => Category::Boundary,
        }
    }

    pub fn subtype(&self) -> Option<LearnerSubtype> {
        match &self.evidence {
            Evidence::Learner(split) => Some(split.subtype),
            _ => None,
        }
    }

    /// `"learner/objective"`, `"boundary"`, ...
    pub fn label(&self) -> String {
        let cat = serde_json::to_value(self.category()).unwrap_or_default();
        let cat = cat.as_str().unwrap_or_default().to_owned();
        match self.subtype() {
            Some(s) => {
                let sub = serde_json::to_value(s).unwrap_or_default();
                format!("{cat}/{}", sub.as_str().unwrap_or_default())
            }
            None => cat,
        }
    }
}

impl Serialize for Diagnosis {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Report<'a> {
            category: Category,
            #[serde(skip_serializing_if = "Option::is_none")]
            subtype: Option<LearnerSubtype>,
            evidence: &'a Evidence,
            object_id: &'a ObjectId,
            hypothesis_before: &'a Hypothesis,
            #[serde(skip_serializing_if = "Option::is_none")]
            hypothesis_after: &'a Option<Hypothesis>,
        }
        Report {
            category: self.category(),
            subtype: self.subtype(),
            evidence: &self.evidence,
            object_id: &self.object_id,
            hypothesis_before: &self.hypothesis_before,
            hypothesis_after: &self.hypothesis_after,
        }
        .serialize(s)
    }
}

/// Decides whether a learner family's hypothesis class contains a classifier
/// consistent with a featurized training set.
pub trait RealizabilityCheck: Send + Sync {
    fn realizable(&self, data: &FeaturizedTrainingSet) -> Result<bool, DiagnosisError>;

    /// A small subset of `data` that is itself not realizable, when `data`
    /// is not realizable.
    fn obstruction(&self, data: &FeaturizedTrainingSet) -> Result<Option<Vec<Row>>, DiagnosisError>;
}

/// Linear hypotheses: realizable iff the two classes are strictly separable.
#[derive(Debug, Default, Clone, Copy)]
pub struct LinearSeparability;

impl RealizabilityCheck for LinearSeparability {
    fn realizable(&self, data: &FeaturizedTrainingSet) -> Result<bool, DiagnosisError> {
        Ok(separability::separate_rows(&data.rows)?.separable)
    }

    fn obstruction(&self, data: &FeaturizedTrainingSet) -> Result<Option<Vec<Row>>, DiagnosisError> {
        Ok(separability::kirchberger_witness(&data.rows, data.dim)?)
    }
}

/// Memorizing hypotheses: realizable iff no point carries both labels.
#[derive(Debug, Default, Clone, Copy)]
pub struct CollisionFree;

impl RealizabilityCheck for CollisionFree {
    fn realizable(&self, data: &FeaturizedTrainingSet) -> Result<bool, DiagnosisError> {
        Ok(conflicting_collision(&data.rows).is_none())
    }

    fn obstruction(&self, data: &FeaturizedTrainingSet) -> Result<Option<Vec<Row>>, DiagnosisError> {
        Ok(conflicting_collision(&data.rows).map(|(i, j)| vec![data.rows[i].clone(), data.rows[j].clone()]))
    }
}

/// First pair `(i, j)`, `i < j` in lexicographic order, of rows at the same
/// point with different labels.
pub fn conflicting_collision(rows: &[Row]) -> Option<(usize, usize)> {
    (0..rows.len()).find_map(|i| {
        (i + 1..rows.len())
            .find(|&j| rows[i].label != rows[j].label && rows[i].x == rows[j].x)
            .map(|j| (i, j))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LearnerFamily {
    Linear,
    NearestNeighbor,
}

impl LearnerFamily {
    pub fn of(kind: &LearnerKind) -> Self {
        if kind.is_linear() {
            LearnerFamily::Linear
        } else {
            LearnerFamily::NearestNeighbor
        }
    }
}

/// Realizability procedures keyed by learner family.
pub struct Registry {
    checks: BTreeMap<LearnerFamily, Box<dyn RealizabilityCheck>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { checks: BTreeMap::new() }
    }

    pub fn register(&mut self, family: LearnerFamily, check: Box<dyn RealizabilityCheck>) {
        self.checks.insert(family, check);
    }

    pub fn get(&self, kind: &LearnerKind) -> Result<&dyn RealizabilityCheck, DiagnosisError> {
        self.checks
            .get(&LearnerFamily::of(kind))
            .map(|b| b.as_ref())
            .ok_or(DiagnosisError::NoRealizabilityCheck(*kind))
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(LearnerFamily::Linear, Box::new(LinearSeparability));
        r.register(LearnerFamily::NearestNeighbor, Box::new(CollisionFree));
        r
    }
}

/// The inputs shared by every diagnosis: universe, training set, features
/// and learner.
#[derive(Debug, Clone, Copy)]
pub struct Setting<'a> {
    pub universe: &'a ObjectUniverse,
    pub training: &'a TrainingSet,
    pub features: &'a FeatureSet,
    pub spec: &'a LearnerSpec,
}

#[derive(Default)]
pub struct DiagnosisEngine {
    registry: Registry,
}

impl DiagnosisEngine {
    pub fn new(registry: Registry) -> Self {
        DiagnosisEngine { registry }
    }

    /// Classifies a training-set prediction error. Returns `None` when no
    /// training example is mispredicted with respect to `oracle`.
    pub fn classify_training_error(
        &self,
        setting: Setting<'_>,
        oracle: &TargetOracle,
    ) -> Result<Option<Diagnosis>, DiagnosisError> {
        let data = featurize_training_set(setting.features, setting.training, setting.universe)?;
        let h = fit(setting.spec, &data)?;
        let mut first_error = None;
        for r in &data.rows {
            if predict(&h, &r.x)? != oracle.label(&r.id)? {
                first_error = Some(r.id.clone());
                break;
            }
        }
        let Some(object_id) = first_error else {
            return Ok(None);
        };
        let evidence = self.training_set_evidence(setting, &data, setting.training, oracle)?;
        Ok(Some(Diagnosis { object_id, evidence, hypothesis_before: h, hypothesis_after: None }))
    }

    /// Classifies a prediction error on object `x`. Returns `None` when the
    /// trained classifier already agrees with `oracle` on `x`.
    pub fn classify_prediction_error(
        &self,
        x: &ObjectId,
        setting: Setting<'_>,
        oracle: &TargetOracle,
    ) -> Result<Option<Diagnosis>, DiagnosisError> {
        let object = setting.universe.get(x).map_err(|_| DiagnosisError::UnknownObject(x.clone()))?;
        let data = featurize_training_set(setting.features, setting.training, setting.universe)?;
        let h = fit(setting.spec, &data)?;
        let truth = oracle.label(x)?;
        if predict(&h, &featurize(setting.features, object)?)? == truth {
            return Ok(None);
        }

        if setting.training.contains(x) {
            let evidence = self.training_set_evidence(setting, &data, setting.training, oracle)?;
            return Ok(Some(Diagnosis { object_id: x.clone(), evidence, hypothesis_before: h, hypothesis_after: None }));
        }

        let mut augmented = setting.training.clone();
        augmented.insert(x.clone(), truth)?;
        let data_aug = featurize_training_set(setting.features, &augmented, setting.universe)?;
        let h_aug = fit(setting.spec, &data_aug)?;
        let evidence = if training_errors(&h_aug, &data_aug)?.is_empty() {
            Evidence::Boundary { before: h.clone(), after: h_aug.clone() }
        } else {
            self.training_set_evidence(Setting { training: &augmented, ..setting }, &data_aug, setting.training, oracle)?
        };
        Ok(Some(Diagnosis { object_id: x.clone(), evidence, hypothesis_before: h, hypothesis_after: Some(h_aug) }))
    }

    /// Mislabeling (searched in `labeled`), then learner vs representation on
    /// `data`, which is the featurization of `setting.training`.
    fn training_set_evidence(
        &self,
        setting: Setting<'_>,
        data: &FeaturizedTrainingSet,
        labeled: &TrainingSet,
        oracle: &TargetOracle,
    ) -> Result<Evidence, DiagnosisError> {
        let mut mislabeled = Vec::new();
        for (id, y) in labeled.iter() {
            if oracle.label(id)? != y {
                mislabeled.push((id.clone(), y));
            }
        }
        if !mislabeled.is_empty() {
            return Ok(Evidence::Mislabeling { mislabeled });
        }
        let check = self.registry.get(&setting.spec.kind)?;
        if check.realizable(data)? {
            return Ok(Evidence::Learner(split_learner_error_on(data, setting.spec)?));
        }
        let witness = check
            .obstruction(data)?
            .unwrap_or_else(|| data.rows.clone())
            .into_iter()
            .map(|r| (r.id, r.label))
            .collect();
        Ok(Evidence::Representation { witness })
    }

    pub fn realizable(&self, spec: &LearnerSpec, data: &FeaturizedTrainingSet) -> Result<bool, DiagnosisError> {
        self.registry.get(&spec.kind)?.realizable(data)
    }
}

/// Convenience wrapper using the default registry.
pub fn classify_training_error(setting: Setting<'_>, oracle: &TargetOracle) -> Result<Option<Diagnosis>, DiagnosisError> {
    DiagnosisEngine::default().classify_training_error(setting, oracle)
}

/// Convenience wrapper using the default registry.
pub fn classify_prediction_error(
    x: &ObjectId,
    setting: Setting<'_>,
    oracle: &TargetOracle,
) -> Result<Option<Diagnosis>, DiagnosisError> {
    DiagnosisEngine::default().classify_prediction_error(x, setting, oracle)
}

/// Splits a learner error into optimization vs objective.
///
/// Requires a realizable training set on which the fitted hypothesis errs.
pub fn split_learner_error(setting: Setting<'_>) -> Result<LearnerSplit, DiagnosisError> {
    let data = featurize_training_set(setting.features, setting.training, setting.universe)?;
    split_learner_error_on(&data, setting.spec)
}

pub fn split_learner_error_on(data: &FeaturizedTrainingSet, spec: &LearnerSpec) -> Result<LearnerSplit, DiagnosisError> {
    if !spec.kind.is_linear() {
        // A memorizing learner has no loss to compare against: its returned
        // hypothesis is the only one it can produce on this training set.
        return Ok(LearnerSplit {
            subtype: LearnerSubtype::Objective,
            returned_loss: None,
            consistent_loss: None,
            consistent_hypothesis: None,
        });
    }
    let lambda = spec.kind.lambda();
    let returned = fit(spec, data)?;
    let returned = returned.as_linear().cloned().ok_or(DiagnosisError::InternalInconsistency)?;
    let returned_loss = penalized_loss(&returned, data, lambda)?;

    let witness = separability::separate_rows(&data.rows)?
        .witness
        .ok_or(DiagnosisError::InternalInconsistency)?;
    let consistent = best_consistent(witness, data, lambda)?;
    let consistent_loss = penalized_loss(&consistent, data, lambda)?;
    let subtype = if consistent_loss < returned_loss - LOSS_TOL {
        LearnerSubtype::Optimization
    } else {
        LearnerSubtype::Objective
    };
    Ok(LearnerSplit {
        subtype,
        returned_loss: Some(returned_loss),
        consistent_loss: Some(consistent_loss),
        consistent_hypothesis: Some(consistent),
    })
}

fn is_consistent(h: &LinearHypothesis, data: &FeaturizedTrainingSet) -> bool {
    data.rows.iter().all(|r| (h.score(&r.x) > 0.0) == (r.label == Label::One))
}

/// Locally minimizes the penalized loss over hypotheses with zero training
/// error, starting from a separating hyperplane: first along the ray of
/// positive rescalings, then by descent steps rejected whenever they would
/// leave the consistent region.
fn best_consistent(
    start: LinearHypothesis,
    data: &FeaturizedTrainingSet,
    lambda: f64,
) -> Result<LinearHypothesis, DiagnosisError> {
    if !is_consistent(&start, data) {
        return Err(DiagnosisError::InternalInconsistency);
    }
    let loss = |h: &LinearHypothesis| learners::loss_and_gradient(h, data, lambda).0;

    let mut best = start.clone();
    let mut best_loss = loss(&best);
    for k in -20..=60 {
        let cand = start.scaled(2f64.powi(k));
        let l = loss(&cand);
        if l < best_loss && is_consistent(&cand, data) {
            best = cand;
            best_loss = l;
        }
    }

    let mut step = 1.0;
    for _ in 0..2_000 {
        let (f, g) = learners::loss_and_gradient(&best, data, lambda);
        let gnorm2: f64 = g.w.iter().map(|x| x * x).sum::<f64>() + g.b * g.b;
        if gnorm2.sqrt() < 1e-10 {
            break;
        }
        let mut moved = false;
        while step > 1e-16 {
            let cand = LinearHypothesis {
                w: best.w.iter().zip(&g.w).map(|(w, gw)| w - step * gw).collect(),
                b: best.b - step * g.b,
            };
            let fc = loss(&cand);
            if fc.is_finite() && fc <= f - 1e-4 * step * gnorm2 && is_consistent(&cand, data) {
                best = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        step *= 2.0;
    }
    Ok(best)
}
