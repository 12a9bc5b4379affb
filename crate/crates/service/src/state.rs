//! The state document returned for a session.

use serde::Serialize;

use prederr::diagnosis::Example;
use prederr::domain::{featurize, FeatureDef, Label, ObjectId};
use prederr::invalidation::InvalidationSet;
use prederr::learners::{predict, Hypothesis};
use prederr::protocol::{Outcome, Phase, ProtocolError, TeacherRequest, TeachingSession};

use crate::boundary::{boundary_segments, Bounds, Segment};

#[derive(Debug, Clone, Serialize)]
pub struct PoolEntry {
    #[serde(flatten)]
    pub feature: FeatureDef,
    pub used: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub object_id: ObjectId,
    /// The object under the current features.
    pub x: Vec<f64>,
    pub predicted: Label,
    pub in_training: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateDocument {
    pub id: String,
    pub phase: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub version: u64,
    pub round: u64,
    pub training: Vec<Example>,
    pub features: Vec<FeatureDef>,
    pub pool: Vec<PoolEntry>,
    pub training_error_ids: Vec<ObjectId>,
    pub pending_request: Option<TeacherRequest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invalidation_set: Option<InvalidationSet>,
    pub hypothesis: Hypothesis,
    /// Decision boundary segments, present only for 2-D featurizations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Vec<Segment>>,
    pub predictions: Vec<Prediction>,
}

impl StateDocument {
    pub fn build(id: &str, s: &TeachingSession, version: u64) -> Result<Self, ProtocolError> {
        let sc = s.scenario();
        let mut predictions = Vec::with_capacity(sc.universe.len());
        for o in sc.universe.iter() {
            let x = featurize(s.features(), o)?;
            let predicted = predict(s.hypothesis(), &x)?;
            predictions.push(Prediction { object_id: o.id.clone(), in_training: s.training().contains(&o.id), predicted, x });
        }
        let boundary = (s.features().dim() == 2)
            .then(|| {
                let pts: Vec<[f64; 2]> = predictions.iter().map(|p| [p.x[0], p.x[1]]).collect();
                Bounds::around(&pts, 0.1).map(|b| boundary_segments(s.hypothesis(), &b))
            })
            .flatten();
        let (outcome, invalidation_set) = match s.phase() {
            Phase::Done { outcome } => (Some(*outcome), None),
            Phase::AwaitVerdict { invalidation_set, .. } => (None, Some(invalidation_set.clone())),
            Phase::AwaitExample => (None, None),
        };
        Ok(StateDocument {
            id: id.to_owned(),
            phase: s.phase().name(),
            outcome,
            version,
            round: s.round(),
            training: s.training().iter().map(|(id, y)| (id.clone(), y)).collect(),
            features: s.features().features().to_vec(),
            pool: sc
                .pool
                .iter()
                .map(|f| PoolEntry { feature: f.clone(), used: s.features().contains(&f.id) })
                .collect(),
            training_error_ids: s.training_error_ids().to_vec(),
            pending_request: s.pending_request(),
            invalidation_set,
            hypothesis: s.hypothesis().clone(),
            boundary,
            predictions,
        })
    }
}
