//! Scenario files and deterministic fixture generators.
//!
//! A scenario bundles an object universe, the target labeling, a pool of
//! teachable features and the starting training set and features. Seeded
//! generators use ChaCha8 so the same `(generator, arguments, seed)` always
//! produces the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    DomainError, FeatureDef, FeatureId, FeatureSet, Label, Object, ObjectId, ObjectUniverse, TargetOracle,
    TrainingSet,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("feature {feature}: unknown attribute {attr:?} (object {object})")]
    UnknownAttribute { feature: FeatureId, attr: String, object: ObjectId },
    #[error("target has no label for object {0}")]
    MissingTarget(ObjectId),
    #[error("initial feature {0} is not in the feature pool")]
    UnknownFeature(FeatureId),
    #[error("duplicate feature {0} in pool")]
    DuplicateFeature(FeatureId),
    #[error("unknown builtin scenario {0:?}")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub universe: ObjectUniverse,
    pub oracle: TargetOracle,
    pub pool: Vec<FeatureDef>,
    pub initial_training: TrainingSet,
    pub initial_features: Vec<FeatureId>,
    pub seed: Option<u64>,
    /// Objects whose initial label was deliberately flipped.
    pub injected_mislabels: Vec<ObjectId>,
}

/// On-disk layout.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    objects: Vec<Object>,
    target: BTreeMap<ObjectId, Label>,
    feature_pool: Vec<FeatureDef>,
    #[serde(default)]
    initial_training: Vec<(ObjectId, Label)>,
    #[serde(default)]
    initial_features: Vec<FeatureId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    injected_mislabels: Vec<ObjectId>,
}

impl Scenario {
    /// Validates cross references and builds a scenario.
    pub fn new(
        universe: ObjectUniverse,
        oracle: TargetOracle,
        pool: Vec<FeatureDef>,
        initial_training: TrainingSet,
        initial_features: Vec<FeatureId>,
    ) -> Result<Self, ScenarioError> {
        let sc = Scenario {
            universe,
            oracle,
            pool,
            initial_training,
            initial_features,
            seed: None,
            injected_mislabels: Vec::new(),
        };
        sc.validate()?;
        Ok(sc)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(id) = self.universe.ids().find(|id| self.oracle.label(id).is_err()) {
            return Err(ScenarioError::MissingTarget(id.clone()));
        }
        if let Some((id, _)) = self.oracle.iter().find(|(id, _)| !self.universe.contains(id)) {
            return Err(DomainError::UnknownObject(id.clone()).into());
        }
        let mut seen = BTreeSet::new();
        for f in &self.pool {
            if !seen.insert(&f.id) {
                return Err(ScenarioError::DuplicateFeature(f.id.clone()));
            }
            for attr in f.expr.attributes() {
                if let Some(o) = self.universe.iter().find(|o| !o.attrs.contains_key(attr)) {
                    return Err(ScenarioError::UnknownAttribute {
                        feature: f.id.clone(),
                        attr: attr.to_owned(),
                        object: o.id.clone(),
                    });
                }
            }
        }
        if let Some(fid) = self.initial_features.iter().find(|fid| !seen.contains(fid)) {
            return Err(ScenarioError::UnknownFeature(fid.clone()));
        }
        self.initial_training.check_in(&self.universe)?;
        Ok(())
    }

    pub fn pool_feature(&self, id: &FeatureId) -> Option<&FeatureDef> {
        self.pool.iter().find(|f| &f.id == id)
    }

    pub fn initial_feature_set(&self) -> Result<FeatureSet, ScenarioError> {
        let defs = self
            .initial_features
            .iter()
            .map(|id| self.pool_feature(id).cloned().ok_or_else(|| ScenarioError::UnknownFeature(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureSet::new(defs)?)
    }

    /// The full pool as a feature set.
    pub fn pool_feature_set(&self) -> Result<FeatureSet, ScenarioError> {
        Ok(FeatureSet::new(self.pool.clone())?)
    }

    /// Every object labeled by the target.
    pub fn oracle_training_set(&self) -> TrainingSet {
        let mut t = TrainingSet::new();
        for (id, y) in self.oracle.iter() {
            // Keys of the oracle are unique.
            let _ = t.insert(id.clone(), y);
        }
        t
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            objects: self.universe.iter().cloned().collect(),
            target: self.oracle.iter().map(|(id, y)| (id.clone(), y)).collect(),
            feature_pool: self.pool.clone(),
            initial_training: self.initial_training.iter().map(|(id, y)| (id.clone(), y)).collect(),
            initial_features: self.initial_features.clone(),
            seed: self.seed,
            injected_mislabels: self.injected_mislabels.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("scenario serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let universe = ObjectUniverse::new(file.objects)?;
        let oracle = TargetOracle::new(file.target);
        let initial_training = TrainingSet::from_pairs(file.initial_training)?;
        let mut sc = Scenario::new(universe, oracle, file.feature_pool, initial_training, file.initial_features)?;
        sc.seed = file.seed;
        sc.injected_mislabels = file.injected_mislabels;
        Ok(sc)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    Scenario::from_json(&text)
}

pub fn save_scenario(sc: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    std::fs::write(path, sc.to_json()).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

fn build(
    objects: Vec<Object>,
    labels: impl IntoIterator<Item = (ObjectId, Label)>,
    pool: Vec<FeatureDef>,
    initial_features: &[&str],
    train_all: bool,
) -> Scenario {
    let oracle = TargetOracle::new(labels.into_iter().collect());
    let initial_training = if train_all {
        TrainingSet::from_pairs(oracle.iter().map(|(id, y)| (id.clone(), y))).expect("oracle keys are unique")
    } else {
        TrainingSet::new()
    };
    let universe = ObjectUniverse::new(objects).expect("fixture objects are valid");
    Scenario::new(universe, oracle, pool, initial_training, initial_features.iter().map(|f| FeatureId((*f).to_owned())).collect())
        .expect("fixture is well formed")
}

fn grid_objects(points: &[(&str, f64, f64, Label)]) -> (Vec<Object>, Vec<(ObjectId, Label)>) {
    let objects = points.iter().map(|(id, a, b, _)| Object::new(*id, [("a", *a), ("b", *b)])).collect();
    let labels = points.iter().map(|(id, _, _, y)| (ObjectId::new(*id), *y)).collect();
    (objects, labels)
}

/// The four corners of the unit square labeled by exclusive or. The pool
/// offers both projections and their product; training starts with all
/// four objects and the two projections.
pub fn gen_xor() -> Scenario {
    let (objects, labels) = grid_objects(&[
        ("x1", 0.0, 0.0, Label::Zero),
        ("x2", 0.0, 1.0, Label::One),
        ("x3", 1.0, 1.0, Label::Zero),
        ("x4", 1.0, 0.0, Label::One),
    ]);
    let pool = vec![
        FeatureDef::projection("a"),
        FeatureDef::projection("b"),
        FeatureDef::parse("ab", "a * b").expect("valid expression"),
    ];
    build(objects, labels, pool, &["a", "b"], true)
}

/// XOR with no product feature in the pool: errors cannot be taught away.
pub fn xor_without_product() -> Scenario {
    let mut sc = gen_xor();
    sc.pool.truncate(2);
    sc
}

/// Two objects with one attribute each, labeled differently.
pub fn two_object() -> Scenario {
    let objects = vec![Object::new("x1", [("a", 5.0)]), Object::new("x2", [("a", 7.0)])];
    let labels = [(ObjectId::new("x1"), Label::One), (ObjectId::new("x2"), Label::Zero)];
    build(objects, labels, vec![FeatureDef::projection("a")], &["a"], true)
}

/// Two objects that coincide under the initial feature `a` but carry
/// different labels; adding `b` separates them.
pub fn collision() -> Scenario {
    let (objects, labels) = grid_objects(&[
        ("p1", 0.0, 0.0, Label::Zero),
        ("p2", 0.0, 1.0, Label::One),
        ("p3", 1.0, 0.0, Label::Zero),
        ("p4", 2.0, 1.0, Label::One),
    ]);
    let pool = vec![FeatureDef::projection("a"), FeatureDef::projection("b")];
    build(objects, labels, pool, &["a"], true)
}

/// A one-dimensional run of zeros with a single positive in the middle:
/// realizable, but voting neighbors outvote the positive.
pub fn isolated_minority() -> Scenario {
    let objects = (0..5).map(|i| Object::new(format!("m{i}"), [("a", i as f64)])).collect();
    let labels = (0..5).map(|i| (ObjectId::new(format!("m{i}")), if i == 2 { Label::One } else { Label::Zero }));
    build(objects, labels, vec![FeatureDef::projection("a")], &["a"], true)
}

pub fn empty() -> Scenario {
    build(Vec::new(), [], Vec::new(), &[], true)
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// `n` points in `[-10, 10]^d` on both sides of a random hyperplane, each at
/// distance at least `margin` from it. Attributes are `x1..xd`, the pool is
/// the coordinate projections, and the whole universe is the initial
/// training set.
pub fn gen_separable(n: usize, d: usize, margin: f64, seed: u64) -> Scenario {
    assert!(d >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = loop {
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.1 {
            break w.iter().map(|x| x / norm).collect();
        }
    };
    let b: f64 = rng.random_range(-2.0..2.0);
    let width = n.to_string().len().max(3);
    let names: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();

    let mut objects = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while objects.len() < n {
        let x: Vec<f64> = (0..d).map(|_| round3(rng.random_range(-10.0..10.0))).collect();
        let s = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
        if s.abs() < margin {
            continue;
        }
        // Alternate classes so both sides are populated.
        let want = if objects.len() % 2 == 0 { Label::One } else { Label::Zero };
        let got = if s > 0.0 { Label::One } else { Label::Zero };
        if got != want && objects.len() + 1 < n {
            continue;
        }
        let id = format!("p{:0width$}", objects.len() + 1);
        objects.push(Object::new(id.clone(), names.iter().cloned().zip(x)));
        labels.push((ObjectId(id), got));
    }
    let pool = names.iter().map(|a| FeatureDef::projection(a)).collect();
    let feats: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut sc = build(objects, labels, pool, &feats, true);
    sc.seed = Some(seed);
    sc
}

/// Flips `⌈rate·|T|⌉` labels of the initial training set, chosen by `seed`.
/// The target is left untouched.
pub fn inject_mislabels(sc: &Scenario, rate: f64, seed: u64) -> Scenario {
    let n = sc.initial_training.len();
    let count = ((rate.clamp(0.0, 1.0) * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<ObjectId> = sc.initial_training.iter().map(|(id, _)| id.clone()).collect();
    let mut picked: Vec<ObjectId> = index::sample(&mut rng, n, count.min(n)).into_iter().map(|i| ids[i].clone()).collect();
    picked.sort();

    let mut out = sc.clone();
    for id in &picked {
        let y = out.initial_training.label(id).expect("picked from T");
        out.initial_training.relabel(id, y.flipped()).expect("picked from T");
    }
    let mut all: BTreeSet<ObjectId> = out.injected_mislabels.drain(..).collect();
    all.extend(picked);
    // Flipping twice restores the label.
    out.injected_mislabels = all
        .into_iter()
        .filter(|id| out.initial_training.label(id) != out.oracle.label(id).ok())
        .collect();
    out
}

const FIGURE1_JSON: &str = include_str!("../data/figure1.json");

/// A frozen two-dimensional dataset on which maximum-likelihood logistic
/// regression fits every example but λ = 0.5 and λ = 1.0 do not.
pub fn gen_figure1() -> Scenario {
    Scenario::from_json(FIGURE1_JSON).expect("bundled fixture is valid")
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] =
    &["xor", "xor-no-product", "figure1", "separable", "noisy-separable", "collision", "isolated-minority", "two-object", "empty"];

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    Ok(match name {
        "xor" => gen_xor(),
        "xor-no-product" => xor_without_product(),
        "figure1" => gen_figure1(),
        "separable" => gen_separable(40, 2, 0.5, 7),
        "noisy-separable" => inject_mislabels(&gen_separable(40, 2, 0.5, 7), 0.1, 11),
        "collision" => collision(),
        "isolated-minority" => isolated_minority(),
        "two-object" => two_object(),
        "empty" => empty(),
        other => return Err(ScenarioError::UnknownBuiltin(other.to_owned())),
    })
}
