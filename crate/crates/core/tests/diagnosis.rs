use prederr::diagnosis::{
    classify_prediction_error, classify_training_error, split_learner_error, Category, Evidence, LearnerSubtype,
    Setting,
};
use prederr::domain::{FeatureDef, FeatureSet, Label, Object, ObjectId, ObjectUniverse, TargetOracle, TrainingSet};
use prederr::learners::{LearnerSpec, OptimizerConfig};
use prederr::scenarios::{self, Scenario};

fn setting<'a>(sc: &'a Scenario, t: &'a TrainingSet, fs: &'a FeatureSet, spec: &'a LearnerSpec) -> Setting<'a> {
    Setting { universe: &sc.universe, training: t, features: fs, spec }
}

#[test]
fn regularized_figure1_is_objective_error() {
    let sc = scenarios::gen_figure1();
    let fs = sc.initial_feature_set().unwrap();
    let spec = LearnerSpec::logreg_reg(1.0).unwrap();
    let d = classify_training_error(setting(&sc, &sc.initial_training, &fs, &spec), &sc.oracle).unwrap().unwrap();
    assert_eq!(d.category(), Category::Learner);
    assert_eq!(d.subtype(), Some(LearnerSubtype::Objective));
    let Evidence::Learner(split) = &d.evidence else { unreachable!() };
    // The consistent alternative cannot beat the convex optimum.
    assert!(split.consistent_loss.unwrap() >= split.returned_loss.unwrap() - 1e-9);
}

#[test]
fn truncated_optimizer_is_optimization_error() {
    let sc = scenarios::gen_figure1();
    let fs = sc.initial_feature_set().unwrap();
    let cfg = OptimizerConfig { max_iters: 1, separable_fallback: false, ..OptimizerConfig::default() };
    let spec = LearnerSpec::logreg_ml().with_optimizer(cfg);
    let d = classify_training_error(setting(&sc, &sc.initial_training, &fs, &spec), &sc.oracle).unwrap().unwrap();
    assert_eq!(d.category(), Category::Learner);
    assert_eq!(d.subtype(), Some(LearnerSubtype::Optimization));
    let split = split_learner_error(setting(&sc, &sc.initial_training, &fs, &spec)).unwrap();
    assert!(split.consistent_loss.unwrap() < split.returned_loss.unwrap());
}

fn line(points: &[(f64, Label)]) -> Scenario {
    let universe =
        ObjectUniverse::new(points.iter().enumerate().map(|(i, (a, _))| Object::new(format!("o{i}"), [("a", *a)]))).unwrap();
    let oracle = TargetOracle::new(points.iter().enumerate().map(|(i, (_, y))| (ObjectId(format!("o{i}")), *y)).collect());
    Scenario::new(universe, oracle, vec![FeatureDef::projection("a")], TrainingSet::new(), vec!["a".into()]).unwrap()
}

#[test]
fn held_out_point_inside_gap_is_boundary_error() {
    // Training on the outer points puts the boundary near the middle; the
    // held-out point sits just on the wrong side of it.
    let sc = line(&[(0.0, Label::Zero), (0.8, Label::Zero), (1.6, Label::One), (2.0, Label::One)]);
    let t = TrainingSet::from_pairs([("o0".into(), Label::Zero), ("o2".into(), Label::One), ("o3".into(), Label::One)]).unwrap();
    let fs = sc.initial_feature_set().unwrap();
    let spec = LearnerSpec::logreg_ml();
    let d = classify_prediction_error(&"o1".into(), setting(&sc, &t, &fs, &spec), &sc.oracle).unwrap().unwrap();
    assert_eq!(d.category(), Category::Boundary);
    assert!(d.hypothesis_after.is_some());
}

#[test]
fn correct_prediction_is_no_error() {
    let sc = line(&[(0.0, Label::Zero), (1.0, Label::One)]);
    let t = TrainingSet::from_pairs([("o0".into(), Label::Zero)]).unwrap();
    let fs = sc.initial_feature_set().unwrap();
    let spec = LearnerSpec::logreg_ml();
    assert_eq!(classify_prediction_error(&"o0".into(), setting(&sc, &t, &fs, &spec), &sc.oracle).unwrap(), None);
}

#[test]
fn mislabel_in_training_wins_over_generalization_error() {
    let sc = line(&[(0.0, Label::Zero), (1.0, Label::Zero), (2.0, Label::One), (3.0, Label::One)]);
    // o0 carries the wrong label, pulling the classifier toward 1 on the left.
    let t = TrainingSet::from_pairs([("o0".into(), Label::One), ("o2".into(), Label::One), ("o3".into(), Label::One)]).unwrap();
    let fs = sc.initial_feature_set().unwrap();
    let spec = LearnerSpec::logreg_ml();
    let d = classify_prediction_error(&"o1".into(), setting(&sc, &t, &fs, &spec), &sc.oracle).unwrap().unwrap();
    assert_eq!(d.category(), Category::Mislabeling);
    assert_eq!(d.evidence, Evidence::Mislabeling { mislabeled: vec![("o0".into(), Label::One)] });
}

#[test]
fn one_nn_collision_is_representation_error() {
    let sc = scenarios::collision();
    let fs = sc.initial_feature_set().unwrap();
    let spec = LearnerSpec::one_nn();
    let d = classify_training_error(setting(&sc, &sc.initial_training, &fs, &spec), &sc.oracle).unwrap().unwrap();
    assert_eq!(d.category(), Category::Representation);
    assert_eq!(
        d.evidence,
        Evidence::Representation { witness: vec![("p1".into(), Label::Zero), ("p2".into(), Label::One)] }
    );
}

#[test]
fn report_is_json_with_expected_fields() {
    let sc = scenarios::gen_figure1();
    let fs = sc.initial_feature_set().unwrap();
    let spec = LearnerSpec::logreg_reg(0.5).unwrap();
    let d = classify_training_error(setting(&sc, &sc.initial_training, &fs, &spec), &sc.oracle).unwrap().unwrap();
    let v = serde_json::to_value(&d).unwrap();
    assert_eq!(v["category"], "learner");
    assert_eq!(v["subtype"], "objective");
    assert!(v["evidence"]["returned_loss"].is_number());
    assert!(v["object_id"].is_string());
}
