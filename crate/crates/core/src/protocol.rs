//! The error-driven teaching loop as a request/response state machine.
//!
//! A session starts with no examples and with the scenario's declared
//! initial features (none, unless the scenario lists some). The teacher either
//! terminates or adds a labeled example; after every change the learner is
//! retrained. While the classifier errs on its own training set, the session
//! presents a minimum invalidation set and asks whether it holds a
//! mislabeled example. A yes is followed by a request for corrected labels,
//! a no by a request for a new feature from the scenario's pool.
//!
//! Every applied response is appended to an event log. Replaying the log
//! against a fresh session reproduces the same session.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnosis::Example;
use crate::domain::{
    featurize, featurize_training_set, DomainError, FeatureId, FeatureSet, Label, ObjectId, TrainingSet,
};
use crate::invalidation::{InvalidationError, InvalidationSearch, InvalidationSet, SearchMode};
use crate::learners::{fit, predict, training_errors, Hypothesis, LearnerError, LearnerKind, LearnerSpec};
use crate::scenarios::Scenario;
use crate::separability;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("teaching requires a consistent learner; {0} is not one")]
    InconsistentLearner(LearnerKind),
    #[error("session is done")]
    Finished,
    #[error("expected a response to {expected}, got {got}")]
    WrongResponse { expected: &'static str, got: &'static str },
    #[error("object {0} is not in the presented invalidation set")]
    OutsideInvalidationSet(ObjectId),
    #[error("feature {0} is not in the pool")]
    UnknownFeature(FeatureId),
    #[error("feature {0} is already in use")]
    FeatureInUse(FeatureId),
    #[error("replayed event {index} does not match the session's pending request")]
    ReplayMismatch { index: usize },
    #[error(transparent)]
    Invalidation(#[from] InvalidationError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStage {
    CheckLabels,
    CorrectLabels,
    AddFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// The teacher chose to stop.
    Terminated,
    /// Training errors remained and the feature pool was exhausted.
    NotRealizable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "kebab-case")]
pub enum Phase {
    AwaitExample,
    AwaitVerdict { invalidation_set: InvalidationSet, stage: VerdictStage },
    Done { outcome: Outcome },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::AwaitExample => "await-example",
            Phase::AwaitVerdict { .. } => "await-verdict",
            Phase::Done { .. } => "done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TeacherRequest {
    /// Stop, or supply one more labeled example.
    TerminateOrAddExample,
    CheckLabels { set: Vec<Example> },
    CorrectLabels { set: Vec<Example> },
    AddFeature { available: Vec<FeatureId> },
}

impl TeacherRequest {
    pub fn name(&self) -> &'static str {
        match self {
            TeacherRequest::TerminateOrAddExample => "terminate-or-add-example",
            TeacherRequest::CheckLabels { .. } => "check-labels",
            TeacherRequest::CorrectLabels { .. } => "correct-labels",
            TeacherRequest::AddFeature { .. } => "add-feature",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TeacherResponse {
    Terminate,
    AddLabeledExample { object_id: ObjectId, label: Label },
    CheckLabels { found_mislabeled: bool },
    CorrectLabels { corrections: Vec<Example> },
    AddFeature { feature_id: FeatureId },
}

impl TeacherResponse {
    pub fn name(&self) -> &'static str {
        match self {
            TeacherResponse::Terminate => "terminate",
            TeacherResponse::AddLabeledExample { .. } => "add-labeled-example",
            TeacherResponse::CheckLabels { .. } => "check-labels",
            TeacherResponse::CorrectLabels { .. } => "correct-labels",
            TeacherResponse::AddFeature { .. } => "add-feature",
        }
    }
}

/// One applied step. `phase` and `training_error_count` describe the
/// session after the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub round: u64,
    pub phase: String,
    pub request: TeacherRequest,
    pub response: TeacherResponse,
    pub training_error_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeachingSession {
    scenario: Scenario,
    spec: LearnerSpec,
    training: TrainingSet,
    features: FeatureSet,
    hypothesis: Hypothesis,
    training_errors: Vec<ObjectId>,
    phase: Phase,
    round: u64,
    events: Vec<Event>,
}

impl TeachingSession {
    pub fn new(scenario: Scenario, spec: LearnerSpec) -> Result<Self, ProtocolError> {
        spec.validate()?;
        if !spec.kind.is_consistent() {
            return Err(ProtocolError::InconsistentLearner(spec.kind));
        }
        let mut features = FeatureSet::empty();
        for fid in &scenario.initial_features {
            let def = scenario.pool_feature(fid).cloned().ok_or_else(|| ProtocolError::UnknownFeature(fid.clone()))?;
            features = features.with(def)?;
        }
        let mut s = TeachingSession {
            scenario,
            spec,
            training: TrainingSet::new(),
            features,
            hypothesis: Hypothesis::Linear(crate::learners::LinearHypothesis::zeros(0)),
            training_errors: Vec::new(),
            phase: Phase::AwaitExample,
            round: 0,
            events: Vec::new(),
        };
        s.retrain()?;
        Ok(s)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn hypothesis(&self) -> &Hypothesis {
        &self.hypothesis
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_done(&self) -> bool {
        matches!(self.phase, Phase::Done { .. })
    }

    /// Training examples the current classifier gets wrong (by their label in T).
    pub fn training_error_ids(&self) -> &[ObjectId] {
        &self.training_errors
    }

    pub fn unused_features(&self) -> Vec<FeatureId> {
        self.scenario
            .pool
            .iter()
            .filter(|f| !self.features.contains(&f.id))
            .map(|f| f.id.clone())
            .collect()
    }

    /// The current classifier's label for every object in the universe.
    pub fn predictions(&self) -> Result<Vec<(ObjectId, Label)>, ProtocolError> {
        self.scenario
            .universe
            .iter()
            .map(|o| Ok((o.id.clone(), predict(&self.hypothesis, &featurize(&self.features, o)?)?)))
            .collect()
    }

    pub fn pending_request(&self) -> Option<TeacherRequest> {
        match &self.phase {
            Phase::AwaitExample => Some(TeacherRequest::TerminateOrAddExample),
            Phase::AwaitVerdict { invalidation_set, stage } => {
                let set: Vec<Example> = invalidation_set.members.iter().map(|(id, y)| (id.clone(), y)).collect();
                Some(match stage {
                    VerdictStage::CheckLabels => TeacherRequest::CheckLabels { set },
                    VerdictStage::CorrectLabels => TeacherRequest::CorrectLabels { set },
                    VerdictStage::AddFeature => TeacherRequest::AddFeature { available: self.unused_features() },
                })
            }
            Phase::Done { .. } => None,
        }
    }

    /// Applies a teacher response. On error the session is left unchanged.
    pub fn step(&mut self, response: TeacherResponse) -> Result<(), ProtocolError> {
        let request = self.pending_request().ok_or(ProtocolError::Finished)?;
        let mut next = self.clone();
        next.apply(&request, &response)?;
        next.round += 1;
        next.events.push(Event {
            round: next.round,
            phase: next.phase.name().to_owned(),
            request,
            response,
            training_error_count: next.training_errors.len(),
        });
        *self = next;
        Ok(())
    }

    fn apply(&mut self, request: &TeacherRequest, response: &TeacherResponse) -> Result<(), ProtocolError> {
        let mismatch = || ProtocolError::WrongResponse { expected: request.name(), got: response.name() };
        match (request, response) {
            (TeacherRequest::TerminateOrAddExample, TeacherResponse::Terminate) => {
                self.phase = Phase::Done { outcome: Outcome::Terminated };
            }
            (TeacherRequest::TerminateOrAddExample, TeacherResponse::AddLabeledExample { object_id, label }) => {
                self.scenario.universe.get(object_id)?;
                self.training.insert(object_id.clone(), *label)?;
                self.retrain()?;
            }
            (TeacherRequest::CheckLabels { .. }, TeacherResponse::CheckLabels { found_mislabeled }) => {
                let stage = if *found_mislabeled {
                    VerdictStage::CorrectLabels
                } else if self.unused_features().is_empty() {
                    self.phase = Phase::Done { outcome: Outcome::NotRealizable };
                    return Ok(());
                } else {
                    VerdictStage::AddFeature
                };
                if let Phase::AwaitVerdict { stage: s, .. } = &mut self.phase {
                    *s = stage;
                }
            }
            (TeacherRequest::CorrectLabels { set }, TeacherResponse::CorrectLabels { corrections }) => {
                for (id, _) in corrections {
                    if !set.iter().any(|(s, _)| s == id) {
                        return Err(ProtocolError::OutsideInvalidationSet(id.clone()));
                    }
                }
                for (id, y) in corrections {
                    self.training.relabel(id, *y)?;
                }
                self.retrain()?;
            }
            (TeacherRequest::AddFeature { .. }, TeacherResponse::AddFeature { feature_id }) => {
                let def = self
                    .scenario
                    .pool_feature(feature_id)
                    .cloned()
                    .ok_or_else(|| ProtocolError::UnknownFeature(feature_id.clone()))?;
                if self.features.contains(feature_id) {
                    return Err(ProtocolError::FeatureInUse(feature_id.clone()));
                }
                self.features = self.features.with(def)?;
                self.retrain()?;
            }
            _ => return Err(mismatch()),
        }
        Ok(())
    }

    /// Refits and moves to the next phase: back to examples when the
    /// training set is fit, otherwise to a verdict on an invalidation set.
    fn retrain(&mut self) -> Result<(), ProtocolError> {
        let data = featurize_training_set(&self.features, &self.training, &self.scenario.universe)?;
        self.hypothesis = fit(&self.spec, &data)?;
        self.training_errors =
            training_errors(&self.hypothesis, &data)?.into_iter().map(|i| data.rows[i].id.clone()).collect();
        if self.training_errors.is_empty() {
            self.phase = Phase::AwaitExample;
            return Ok(());
        }
        let search = InvalidationSearch::new(&self.scenario.universe, &self.features, &self.spec);
        let found = match search.find(&self.training) {
            Err(InvalidationError::BudgetExceeded { .. }) => {
                InvalidationSearch::new(&self.scenario.universe, &self.features, &self.spec)
                    .mode(SearchMode::Greedy)
                    .find(&self.training)?
            }
            other => other?,
        };
        // The fit erred, so an invalidation set exists; the whole training
        // set is one.
        let invalidation_set = found.unwrap_or_else(|| InvalidationSet {
            cardinality: self.training.len(),
            members: self.training.clone(),
            minimum: false,
            bound: None,
        });
        self.phase = Phase::AwaitVerdict { invalidation_set, stage: VerdictStage::CheckLabels };
        Ok(())
    }

    /// Rebuilds a session from its event log.
    pub fn replay(scenario: Scenario, spec: LearnerSpec, events: &[Event]) -> Result<Self, ProtocolError> {
        let mut s = TeachingSession::new(scenario, spec)?;
        for (index, e) in events.iter().enumerate() {
            if s.pending_request().as_ref() != Some(&e.request) {
                return Err(ProtocolError::ReplayMismatch { index });
            }
            s.step(e.response.clone())?;
            if s.events.last() != Some(e) {
                return Err(ProtocolError::ReplayMismatch { index });
            }
        }
        Ok(s)
    }

    /// The event log as JSON lines.
    pub fn event_log_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }
}

pub fn parse_event_log(text: &str) -> Result<Vec<Event>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub trait Teacher {
    fn respond(&mut self, session: &TeachingSession, request: &TeacherRequest) -> Result<TeacherResponse, ProtocolError>;
}

/// A teacher that knows the target labeling.
///
/// It first supplies the scenario's initial training examples in id order
/// with their recorded (possibly wrong) labels, then the lowest-id object
/// the classifier mispredicts, and terminates once every object is
/// predicted correctly or nothing unlabeled is left to show. Label checks
/// and corrections compare against the target. New features are the first
/// unused pool entry under which the presented set becomes realizable, or
/// simply the first unused one.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleTeacher;

impl Teacher for OracleTeacher {
    fn respond(&mut self, session: &TeachingSession, request: &TeacherRequest) -> Result<TeacherResponse, ProtocolError> {
        let sc = session.scenario();
        Ok(match request {
            TeacherRequest::TerminateOrAddExample => {
                if let Some((id, y)) = sc.initial_training.iter().find(|(id, _)| !session.training().contains(id)) {
                    return Ok(TeacherResponse::AddLabeledExample { object_id: id.clone(), label: y });
                }
                let mut next = None;
                for (id, y) in session.predictions()? {
                    if y != sc.oracle.label(&id)? && !session.training().contains(&id) {
                        next = Some(id);
                        break;
                    }
                }
                match next {
                    Some(id) => TeacherResponse::AddLabeledExample { label: sc.oracle.label(&id)?, object_id: id },
                    None => TeacherResponse::Terminate,
                }
            }
            TeacherRequest::CheckLabels { set } => {
                let mut found = false;
                for (id, y) in set {
                    found |= sc.oracle.label(id)? != *y;
                }
                TeacherResponse::CheckLabels { found_mislabeled: found }
            }
            TeacherRequest::CorrectLabels { set } => {
                let mut corrections = Vec::new();
                for (id, y) in set {
                    let truth = sc.oracle.label(id)?;
                    if truth != *y {
                        corrections.push((id.clone(), truth));
                    }
                }
                TeacherResponse::CorrectLabels { corrections }
            }
            TeacherRequest::AddFeature { available } => {
                let set = match session.phase() {
                    Phase::AwaitVerdict { invalidation_set, .. } => invalidation_set.members.clone(),
                    _ => TrainingSet::new(),
                };
                let mut choice = None;
                for fid in available {
                    let Some(def) = sc.pool_feature(fid) else { continue };
                    let fs = session.features().with(def.clone())?;
                    if realizable_under(session.spec(), &fs, &set, sc)? {
                        choice = Some(fid.clone());
                        break;
                    }
                }
                match choice.or_else(|| available.first().cloned()) {
                    Some(feature_id) => TeacherResponse::AddFeature { feature_id },
                    None => return Err(ProtocolError::Finished),
                }
            }
        })
    }
}

fn realizable_under(spec: &LearnerSpec, fs: &FeatureSet, t: &TrainingSet, sc: &Scenario) -> Result<bool, ProtocolError> {
    let data = featurize_training_set(fs, t, &sc.universe)?;
    Ok(if spec.kind.is_linear() {
        separability::separate_rows(&data.rows).map_err(LearnerError::from)?.separable
    } else {
        crate::diagnosis::conflicting_collision(&data.rows).is_none()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeachingRun {
    pub session: TeachingSession,
    /// False when `max_rounds` was reached before the session finished.
    pub done: bool,
}

impl TeachingRun {
    /// Objects of the universe that the final classifier mispredicts.
    pub fn universe_errors(&self) -> Result<Vec<ObjectId>, ProtocolError> {
        let oracle = &self.session.scenario().oracle;
        let mut out = Vec::new();
        for (id, y) in self.session.predictions()? {
            if oracle.label(&id)? != y {
                out.push(id);
            }
        }
        Ok(out)
    }
}

pub fn run_with_teacher<T: Teacher>(
    scenario: Scenario,
    spec: LearnerSpec,
    teacher: &mut T,
    max_rounds: u64,
) -> Result<TeachingRun, ProtocolError> {
    let mut session = TeachingSession::new(scenario, spec)?;
    while let Some(request) = session.pending_request() {
        if session.round() >= max_rounds {
            return Ok(TeachingRun { session, done: false });
        }
        let response = teacher.respond(&session, &request)?;
        session.step(response)?;
    }
    Ok(TeachingRun { session, done: true })
}

pub fn run_with_oracle_teacher(scenario: Scenario, spec: LearnerSpec, max_rounds: u64) -> Result<TeachingRun, ProtocolError> {
    run_with_teacher(scenario, spec, &mut OracleTeacher, max_rounds)
}
