//! Objects, labels, features and training sets.
//!
//! Objects carry raw named attributes; features are small expressions over
//! those attributes. Everything keyed by [`ObjectId`] is stored in id order,
//! which is the canonical order used for every tie-break in the crate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("feature {feature:?}: unknown attribute {attr:?} on object {object:?}")]
    UnknownAttribute { feature: FeatureId, object: ObjectId, attr: String },
    #[error("feature {feature:?} evaluated to a non-finite value on object {object:?}")]
    NonFinite { feature: FeatureId, object: ObjectId },
    #[error("unknown object {0:?}")]
    UnknownObject(ObjectId),
    #[error("duplicate object id {0:?}")]
    DuplicateObject(ObjectId),
    #[error("object {0:?} is already labeled")]
    AlreadyLabeled(ObjectId),
    #[error("duplicate feature id {0:?}")]
    DuplicateFeature(FeatureId),
    #[error("object {0:?} has no attributes")]
    EmptyAttributes(ObjectId),
    #[error("object {object:?}: attribute {attr:?} is not finite")]
    NonFiniteAttribute { object: ObjectId, attr: String },
    #[error("label must be 0 or 1, got {0}")]
    BadLabel(u64),
    #[error("feature {id:?}: {source}")]
    Parse {
        id: FeatureId,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectId(id.into())
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(pub String);

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FeatureId {
    fn from(s: &str) -> Self {
        FeatureId(s.to_owned())
    }
}

/// Binary class label, serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub fn flipped(self) -> Self {
        match self {
            Label::Zero => Label::One,
            Label::One => Label::Zero,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Zero => 0.0,
            Label::One => 1.0,
        }
    }
}

impl TryFrom<u64> for Label {
    type Error = DomainError;
    fn try_from(v: u64) -> Result<Self, DomainError> {
        match v {
            0 => Ok(Label::Zero),
            1 => Ok(Label::One),
            other => Err(DomainError::BadLabel(other)),
        }
    }
}

impl From<Label> for u64 {
    fn from(l: Label) -> u64 {
        match l {
            Label::Zero => 0,
            Label::One => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u64::from(*self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub id: ObjectId,
    pub attrs: BTreeMap<String, f64>,
}

impl Object {
    pub fn new<I, K>(id: impl Into<String>, attrs: I) -> Self
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<String>,
    {
        Object {
            id: ObjectId(id.into()),
            attrs: attrs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    fn validate(&self) -> Result<(), DomainError> {
        if self.attrs.is_empty() {
            return Err(DomainError::EmptyAttributes(self.id.clone()));
        }
        if let Some((k, _)) = self.attrs.iter().find(|(_, v)| !v.is_finite()) {
            return Err(DomainError::NonFiniteAttribute { object: self.id.clone(), attr: k.clone() });
        }
        Ok(())
    }
}

/// The set of objects of interest, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectUniverse {
    objects: BTreeMap<ObjectId, Object>,
}

impl ObjectUniverse {
    pub fn new(objects: impl IntoIterator<Item = Object>) -> Result<Self, DomainError> {
        let mut map = BTreeMap::new();
        for o in objects {
            o.validate()?;
            if map.contains_key(&o.id) {
                return Err(DomainError::DuplicateObject(o.id));
            }
            map.insert(o.id.clone(), o);
        }
        Ok(ObjectUniverse { objects: map })
    }

    pub fn get(&self, id: &ObjectId) -> Result<&Object, DomainError> {
        self.objects.get(id).ok_or_else(|| DomainError::UnknownObject(id.clone()))
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.objects.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Objects in canonical (id) order.
    pub fn iter(&self) -> impl Iterator<Item = &Object> {
        self.objects.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ObjectId> {
        self.objects.keys()
    }

    /// Union of attribute names over all objects.
    pub fn attribute_names(&self) -> BTreeSet<&str> {
        self.objects.values().flat_map(|o| o.attrs.keys().map(String::as_str)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDef {
    pub id: FeatureId,
    pub expr: Expr,
}

impl FeatureDef {
    pub fn new(id: &str, expr: Expr) -> Self {
        FeatureDef { id: FeatureId(id.to_owned()), expr }
    }

    pub fn parse(id: &str, src: &str) -> Result<Self, DomainError> {
        let expr = Expr::parse(src)
            .map_err(|source| DomainError::Parse { id: FeatureId(id.to_owned()), source })?;
        Ok(FeatureDef::new(id, expr))
    }

    /// A feature that reads one attribute unchanged.
    pub fn projection(attr: &str) -> Self {
        FeatureDef::new(attr, Expr::attr(attr))
    }
}

impl Serialize for FeatureDef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            id: &'a FeatureId,
            expr: String,
        }
        Repr { id: &self.id, expr: self.expr.to_string() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureDef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            id: String,
            expr: String,
        }
        let r = Repr::deserialize(d)?;
        FeatureDef::parse(&r.id, &r.expr).map_err(serde::de::Error::custom)
    }
}

pub fn eval_feature(f: &FeatureDef, x: &Object) -> Result<f64, DomainError> {
    let v = f
        .expr
        .eval(&|name: &str| x.attrs.get(name).copied())
        .map_err(|e| DomainError::UnknownAttribute {
            feature: f.id.clone(),
            object: x.id.clone(),
            attr: e.0,
        })?;
    if !v.is_finite() {
        return Err(DomainError::NonFinite { feature: f.id.clone(), object: x.id.clone() });
    }
    Ok(v)
}

/// An ordered selection of features; order determines vector coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureDef>", into = "Vec<FeatureDef>")]
pub struct FeatureSet {
    features: Vec<FeatureDef>,
}

impl FeatureSet {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self, DomainError> {
        let mut seen = BTreeSet::new();
        for f in &features {
            if !seen.insert(&f.id) {
                return Err(DomainError::DuplicateFeature(f.id.clone()));
            }
        }
        Ok(FeatureSet { features })
    }

    pub fn empty() -> Self {
        FeatureSet::default()
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn ids(&self) -> impl Iterator<Item = &FeatureId> {
        self.features.iter().map(|f| &f.id)
    }

    pub fn contains(&self, id: &FeatureId) -> bool {
        self.features.iter().any(|f| &f.id == id)
    }

    /// Returns a new set with `f` appended.
    pub fn with(&self, f: FeatureDef) -> Result<Self, DomainError> {
        let mut features = self.features.clone();
        features.push(f);
        FeatureSet::new(features)
    }
}

impl TryFrom<Vec<FeatureDef>> for FeatureSet {
    type Error = DomainError;
    fn try_from(v: Vec<FeatureDef>) -> Result<Self, DomainError> {
        FeatureSet::new(v)
    }
}

impl From<FeatureSet> for Vec<FeatureDef> {
    fn from(fs: FeatureSet) -> Self {
        fs.features
    }
}

pub fn featurize(fs: &FeatureSet, x: &Object) -> Result<Vec<f64>, DomainError> {
    fs.features.iter().map(|f| eval_feature(f, x)).collect()
}

/// Labeled examples, at most one label per object, kept in id order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    examples: BTreeMap<ObjectId, Label>,
}

impl TrainingSet {
    pub fn new() -> Self {
        TrainingSet::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = (ObjectId, Label)>,
    {
        let mut t = TrainingSet::new();
        for (id, y) in pairs {
            t.insert(id, y)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, id: ObjectId, y: Label) -> Result<(), DomainError> {
        if self.examples.contains_key(&id) {
            return Err(DomainError::AlreadyLabeled(id));
        }
        self.examples.insert(id, y);
        Ok(())
    }

    /// Replaces the label of an existing example.
    pub fn relabel(&mut self, id: &ObjectId, y: Label) -> Result<(), DomainError> {
        match self.examples.get_mut(id) {
            Some(slot) => {
                *slot = y;
                Ok(())
            }
            None => Err(DomainError::UnknownObject(id.clone())),
        }
    }

    pub fn label(&self, id: &ObjectId) -> Option<Label> {
        self.examples.get(id).copied()
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.examples.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, Label)> {
        self.examples.iter().map(|(k, v)| (k, *v))
    }

    pub fn union(&self, other: &TrainingSet) -> Result<TrainingSet, DomainError> {
        let mut out = self.clone();
        for (id, y) in other.iter() {
            out.insert(id.clone(), y)?;
        }
        Ok(out)
    }

    /// The sub-training-set restricted to `ids`; unknown ids are ignored.
    pub fn restrict<'a, I>(&self, ids: I) -> TrainingSet
    where
        I: IntoIterator<Item = &'a ObjectId>,
    {
        let examples = ids
            .into_iter()
            .filter_map(|id| self.examples.get(id).map(|y| (id.clone(), *y)))
            .collect();
        TrainingSet { examples }
    }

    pub fn check_in(&self, universe: &ObjectUniverse) -> Result<(), DomainError> {
        match self.examples.keys().find(|id| !universe.contains(id)) {
            Some(id) => Err(DomainError::UnknownObject(id.clone())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: ObjectId,
    pub x: Vec<f64>,
    pub label: Label,
}

/// A training set mapped into feature space; rows are in object-id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizedTrainingSet {
    pub dim: usize,
    pub rows: Vec<Row>,
}

impl FeaturizedTrainingSet {
    pub fn new(dim: usize, mut rows: Vec<Row>) -> Self {
        debug_assert!(rows.iter().all(|r| r.x.len() == dim));
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        FeaturizedTrainingSet { dim, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> FeaturizedTrainingSet {
        FeaturizedTrainingSet { dim: self.dim, rows: idx.iter().map(|&i| self.rows[i].clone()).collect() }
    }
}

pub fn featurize_training_set(
    fs: &FeatureSet,
    t: &TrainingSet,
    universe: &ObjectUniverse,
) -> Result<FeaturizedTrainingSet, DomainError> {
    let rows = t
        .iter()
        .map(|(id, label)| {
            let x = featurize(fs, universe.get(id)?)?;
            Ok(Row { id: id.clone(), x, label })
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    Ok(FeaturizedTrainingSet { dim: fs.dim(), rows })
}

/// The target classification function, as an explicit table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetOracle {
    labeling: BTreeMap<ObjectId, Label>,
}

impl TargetOracle {
    pub fn new(labeling: BTreeMap<ObjectId, Label>) -> Self {
        TargetOracle { labeling }
    }

    pub fn label(&self, id: &ObjectId) -> Result<Label, DomainError> {
        self.labeling.get(id).copied().ok_or_else(|| DomainError::UnknownObject(id.clone()))
    }

    pub fn is_total_over(&self, universe: &ObjectUniverse) -> bool {
        universe.ids().all(|id| self.labeling.contains_key(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, Label)> {
        self.labeling.iter().map(|(k, v)| (k, *v))
    }
}

/// Anything that labels objects.
pub trait ObjectClassifier {
    fn classify(&self, x: &Object) -> Result<Label, DomainError>;
}

/// Always answers the same label.
#[derive(Debug, Clone, Copy)]
pub struct ConstantClassifier(pub Label);

impl ObjectClassifier for ConstantClassifier {
    fn classify(&self, _x: &Object) -> Result<Label, DomainError> {
        Ok(self.0)
    }
}

pub fn consistent_with<C: ObjectClassifier + ?Sized>(
    c: &C,
    t: &TrainingSet,
    universe: &ObjectUniverse,
) -> Result<bool, DomainError> {
    for (id, y) in t.iter() {
        if c.classify(universe.get(id)?)? != y {
            return Ok(false);
        }
    }
    Ok(true)
}
