//! Vector learning algorithms and their hypotheses.
//!
//! Four learners are provided: maximum-likelihood logistic regression,
//! norm-penalized logistic regression, one-nearest-neighbor and odd-`k`
//! nearest-neighbor. Only the first and third are consistent.
//!
//! Logistic models are fit by full-batch gradient descent with a backtracking
//! (Armijo) line search on
//!
//! ```text
//! Σᵢ log(1 + exp(w·vᵢ + b)) − yᵢ (w·vᵢ + b)  +  λ ‖w‖₂
//! ```
//!
//! The penalty is the plain Euclidean norm (not squared), with subgradient
//! zero at `w = 0`. On strictly separable data the unpenalized optimum does
//! not exist, so the maximum-likelihood learner finishes with a fallback: if
//! the optimizer output still misclassifies a training row and the data are
//! separable, it returns the margin-1 separating hyperplane scaled by
//! [`OptimizerConfig::fallback_scale`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    featurize, DomainError, FeatureSet, FeaturizedTrainingSet, Label, Object, ObjectClassifier, Row,
};
use crate::separability::{self, SeparabilityError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("invalid learner spec: {0}")]
    InvalidSpec(String),
    #[error("optimizer diverged at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("dimension mismatch: hypothesis expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("signed distance undefined for a zero weight vector")]
    ZeroWeight,
    #[error(transparent)]
    Separability(#[from] SeparabilityError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Linear hypothesis: label 1 iff `w·v + b > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHypothesis {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearHypothesis {
    pub fn zeros(dim: usize) -> Self {
        LinearHypothesis { w: vec![0.0; dim], b: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn score(&self, v: &[f64]) -> f64 {
        dot(&self.w, v) + self.b
    }

    pub fn scaled(&self, beta: f64) -> Self {
        LinearHypothesis { w: self.w.iter().map(|x| x * beta).collect(), b: self.b * beta }
    }

    pub fn weight_norm(&self) -> f64 {
        norm(&self.w)
    }
}

/// A memorized training set queried by majority vote among the `k` nearest
/// distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorizedHypothesis {
    pub k: usize,
    pub dim: usize,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hypothesis {
    Linear(LinearHypothesis),
    Memorized(MemorizedHypothesis),
}

impl Hypothesis {
    pub fn dim(&self) -> usize {
        match self {
            Hypothesis::Linear(h) => h.dim(),
            Hypothesis::Memorized(h) => h.dim,
        }
    }

    pub fn as_linear(&self) -> Option<&LinearHypothesis> {
        match self {
            Hypothesis::Linear(h) => Some(h),
            Hypothesis::Memorized(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerKind {
    LogregMl,
    LogregReg { lambda: f64 },
    #[serde(rename = "1nn")]
    OneNn,
    Knn { k: usize },
}

impl LearnerKind {
    pub fn is_linear(&self) -> bool {
        matches!(self, LearnerKind::LogregMl | LearnerKind::LogregReg { .. })
    }

    /// Learners that return a consistent hypothesis whenever one exists.
    pub fn is_consistent(&self) -> bool {
        matches!(self, LearnerKind::LogregMl | LearnerKind::OneNn)
    }

    pub fn lambda(&self) -> f64 {
        match self {
            LearnerKind::LogregReg { lambda } => *lambda,
            _ => 0.0,
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerKind::LogregMl => f.write_str("logreg-ml"),
            LearnerKind::LogregReg { lambda } => write!(f, "logreg-reg(lambda={lambda})"),
            LearnerKind::OneNn => f.write_str("1nn"),
            LearnerKind::Knn { k } => write!(f, "knn(k={k})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub shrink: f64,
    pub separable_fallback: bool,
    pub fallback_scale: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 10_000,
            grad_tol: 1e-8,
            initial_step: 1.0,
            armijo: 1e-4,
            shrink: 0.5,
            separable_fallback: true,
            fallback_scale: 1e4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Result<Self, LearnerError> {
        let spec = LearnerSpec { kind, optimizer: OptimizerConfig::default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn logreg_ml() -> Self {
        LearnerSpec { kind: LearnerKind::LogregMl, optimizer: OptimizerConfig::default() }
    }

    pub fn logreg_reg(lambda: f64) -> Result<Self, LearnerError> {
        LearnerSpec::new(LearnerKind::LogregReg { lambda })
    }

    pub fn one_nn() -> Self {
        LearnerSpec { kind: LearnerKind::OneNn, optimizer: OptimizerConfig::default() }
    }

    pub fn knn(k: usize) -> Result<Self, LearnerError> {
        LearnerSpec::new(LearnerKind::Knn { k })
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerConfig) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        match self.kind {
            LearnerKind::LogregReg { lambda } if !(lambda > 0.0 && lambda.is_finite()) => Err(
                LearnerError::InvalidSpec(format!("regularized logistic regression needs lambda > 0, got {lambda}")),
            ),
            LearnerKind::Knn { k } if k <= 1 || k % 2 == 0 => Err(LearnerError::InvalidSpec(format!(
                "k-nearest-neighbor needs an odd k > 1, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

pub fn fit(spec: &LearnerSpec, data: &FeaturizedTrainingSet) -> Result<Hypothesis, LearnerError> {
    spec.validate()?;
    match spec.kind {
        LearnerKind::OneNn => Ok(memorize(1, data)),
        LearnerKind::Knn { k } => Ok(memorize(k, data)),
        LearnerKind::LogregMl | LearnerKind::LogregReg { .. } => {
            if data.is_empty() {
                return Ok(Hypothesis::Linear(LinearHypothesis::zeros(data.dim)));
            }
            let h = gradient_descent(data, spec.kind.lambda(), &spec.optimizer)?;
            let needs_fallback = spec.kind == LearnerKind::LogregMl
                && spec.optimizer.separable_fallback
                && data.rows.iter().any(|r| predict_linear(&h, &r.x) != r.label);
            if needs_fallback {
                let verdict = separability::separate_rows(&data.rows)?;
                if let Some(witness) = verdict.witness {
                    return Ok(Hypothesis::Linear(witness.scaled(spec.optimizer.fallback_scale)));
                }
            }
            Ok(Hypothesis::Linear(h))
        }
    }
}

fn memorize(k: usize, data: &FeaturizedTrainingSet) -> Hypothesis {
    Hypothesis::Memorized(MemorizedHypothesis { k, dim: data.dim, rows: data.rows.clone() })
}

fn gradient_descent(
    data: &FeaturizedTrainingSet,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<LinearHypothesis, LearnerError> {
    let mut h = LinearHypothesis::zeros(data.dim);
    let mut step = cfg.initial_step;
    for iteration in 0..cfg.max_iters {
        let (f, g) = loss_and_gradient(&h, data, lambda);
        if !f.is_finite() {
            return Err(LearnerError::Divergence { iteration });
        }
        let gnorm2 = dot(&g.w, &g.w) + g.b * g.b;
        if gnorm2.sqrt() < cfg.grad_tol {
            break;
        }
        let mut accepted = false;
        while step > 1e-20 {
            let cand = LinearHypothesis {
                w: h.w.iter().zip(&g.w).map(|(w, gw)| w - step * gw).collect(),
                b: h.b - step * g.b,
            };
            let fc = loss_only(&cand, data, lambda);
            if fc.is_finite() && fc <= f - cfg.armijo * step * gnorm2 {
                h = cand;
                accepted = true;
                break;
            }
            step *= cfg.shrink;
        }
        if !accepted {
            // No descent at machine precision: the iterate is as good as the
            // line search can make it (typically at the kink w = 0).
            break;
        }
        if h.w.iter().any(|x| !x.is_finite()) || !h.b.is_finite() {
            return Err(LearnerError::Divergence { iteration });
        }
        step = (step * 2.0).min(1e6);
    }
    Ok(h)
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn loss_only(h: &LinearHypothesis, data: &FeaturizedTrainingSet, lambda: f64) -> f64 {
    let data_term: f64 = data
        .rows
        .iter()
        .map(|r| {
            let z = h.score(&r.x);
            softplus(z) - r.label.as_f64() * z
        })
        .sum();
    data_term + lambda * h.weight_norm()
}

/// Penalized loss together with its (sub)gradient, packed as a hypothesis
/// with the same shape as `h`.
pub fn loss_and_gradient(
    h: &LinearHypothesis,
    data: &FeaturizedTrainingSet,
    lambda: f64,
) -> (f64, LinearHypothesis) {
    let mut grad = LinearHypothesis::zeros(h.dim());
    let mut loss = 0.0;
    for r in &data.rows {
        let z = h.score(&r.x);
        let y = r.label.as_f64();
        loss += softplus(z) - y * z;
        let resid = sigmoid(z) - y;
        for (g, x) in grad.w.iter_mut().zip(&r.x) {
            *g += resid * x;
        }
        grad.b += resid;
    }
    let wn = h.weight_norm();
    loss += lambda * wn;
    if lambda > 0.0 && wn > 0.0 {
        for (g, w) in grad.w.iter_mut().zip(&h.w) {
            *g += lambda * w / wn;
        }
    }
    (loss, grad)
}

pub fn penalized_loss(
    h: &LinearHypothesis,
    data: &FeaturizedTrainingSet,
    lambda: f64,
) -> Result<f64, LearnerError> {
    if h.dim() != data.dim {
        return Err(LearnerError::DimensionMismatch { expected: h.dim(), got: data.dim });
    }
    if lambda < 0.0 {
        return Err(LearnerError::InvalidSpec(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(loss_only(h, data, lambda))
}

/// `(w·v + b) / ‖w‖₂`.
pub fn signed_distance(h: &LinearHypothesis, v: &[f64]) -> Result<f64, LearnerError> {
    check_dim(h.dim(), v)?;
    let n = h.weight_norm();
    if n == 0.0 {
        return Err(LearnerError::ZeroWeight);
    }
    Ok(h.score(v) / n)
}

fn predict_linear(h: &LinearHypothesis, v: &[f64]) -> Label {
    if h.score(v) > 0.0 {
        Label::One
    } else {
        Label::Zero
    }
}

fn check_dim(expected: usize, v: &[f64]) -> Result<(), LearnerError> {
    if v.len() != expected {
        return Err(LearnerError::DimensionMismatch { expected, got: v.len() });
    }
    Ok(())
}

pub fn predict(h: &Hypothesis, v: &[f64]) -> Result<Label, LearnerError> {
    check_dim(h.dim(), v)?;
    Ok(match h {
        Hypothesis::Linear(lin) => predict_linear(lin, v),
        Hypothesis::Memorized(m) => predict_memorized(m, v),
    })
}

fn predict_memorized(m: &MemorizedHypothesis, v: &[f64]) -> Label {
    if m.rows.is_empty() {
        return Label::Zero;
    }
    let mut order: Vec<(f64, usize)> = m
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (squared_distance(&r.x, v), i))
        .collect();
    // Rows are in id order, so the index breaks distance ties canonically.
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // Rows sharing one point collapse onto the lowest-id row at that point.
    let mut chosen: Vec<&Row> = Vec::with_capacity(m.k);
    for (_, i) in order {
        let row = &m.rows[i];
        if chosen.iter().any(|c| c.x == row.x) {
            continue;
        }
        chosen.push(row);
        if chosen.len() == m.k {
            break;
        }
    }
    let ones = chosen.iter().filter(|r| r.label == Label::One).count();
    let zeros = chosen.len() - ones;
    match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => Label::One,
        std::cmp::Ordering::Less => Label::Zero,
        // Only reachable with fewer than k distinct points.
        std::cmp::Ordering::Equal => chosen[0].label,
    }
}

/// Indices of rows whose prediction disagrees with their label.
pub fn training_errors(h: &Hypothesis, data: &FeaturizedTrainingSet) -> Result<Vec<usize>, LearnerError> {
    let mut out = Vec::new();
    for (i, r) in data.rows.iter().enumerate() {
        if predict(h, &r.x)? != r.label {
            out.push(i);
        }
    }
    Ok(out)
}

/// A hypothesis composed with the feature set it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub features: FeatureSet,
    pub hypothesis: Hypothesis,
}

impl ObjectClassifier for TrainedClassifier {
    fn classify(&self, x: &Object) -> Result<Label, DomainError> {
        let v = featurize(&self.features, x)?;
        // The hypothesis was fit under `features`, so dimensions agree.
        Ok(predict(&self.hypothesis, &v).unwrap_or(Label::Zero))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ObjectId;

    fn rows(points: &[(&str, &[f64], u64)]) -> FeaturizedTrainingSet {
        let dim = points.first().map_or(0, |p| p.1.len());
        FeaturizedTrainingSet::new(
            dim,
            points
                .iter()
                .map(|(id, x, y)| Row { id: ObjectId::new(*id), x: x.to_vec(), label: Label::try_from(*y).unwrap() })
                .collect(),
        )
    }

    #[test]
    fn one_dimensional_separable_fit() {
        let d = rows(&[("a", &[0.0], 0), ("b", &[1.0], 1)]);
        let h = fit(&LearnerSpec::logreg_ml(), &d).unwrap();
        assert!(training_errors(&h, &d).unwrap().is_empty());
    }

    #[test]
    fn empty_training_set_predicts_zero() {
        let d = FeaturizedTrainingSet::new(2, vec![]);
        let h = fit(&LearnerSpec::logreg_ml(), &d).unwrap();
        assert_eq!(h, Hypothesis::Linear(LinearHypothesis::zeros(2)));
        assert_eq!(predict(&h, &[3.0, -1.0]).unwrap(), Label::Zero);
    }

    #[test]
    fn xor_has_a_training_error() {
        let d = rows(&[("x1", &[0.0, 0.0], 0), ("x2", &[0.0, 1.0], 1), ("x3", &[1.0, 1.0], 0), ("x4", &[1.0, 0.0], 1)]);
        let h = fit(&LearnerSpec::logreg_ml(), &d).unwrap();
        assert!(!training_errors(&h, &d).unwrap().is_empty());
    }

    #[test]
    fn tie_predicts_zero() {
        let h = Hypothesis::Linear(LinearHypothesis { w: vec![1.0], b: 0.0 });
        assert_eq!(predict(&h, &[0.0]).unwrap(), Label::Zero);
    }

    #[test]
    fn dimension_mismatch() {
        let h = Hypothesis::Linear(LinearHypothesis { w: vec![1.0], b: 0.0 });
        assert_eq!(
            predict(&h, &[0.0, 1.0]),
            Err(LearnerError::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn nearest_neighbor_examples() {
        let d = rows(&[("a", &[0.0, 0.0], 0), ("b", &[1.0, 1.0], 1)]);
        let h = fit(&LearnerSpec::one_nn(), &d).unwrap();
        assert_eq!(predict(&h, &[0.1, 0.1]).unwrap(), Label::Zero);

        // Coincident rows: the lowest id wins.
        let d = rows(&[("p", &[2.0, 2.0], 1), ("q", &[2.0, 2.0], 0)]);
        let h = fit(&LearnerSpec::one_nn(), &d).unwrap();
        assert_eq!(predict(&h, &[2.0, 2.0]).unwrap(), Label::One);
        let d = rows(&[("p", &[2.0, 2.0], 0), ("q", &[2.0, 2.0], 1)]);
        let h = fit(&LearnerSpec::one_nn(), &d).unwrap();
        assert_eq!(predict(&h, &[2.0, 2.0]).unwrap(), Label::Zero);
    }

    #[test]
    fn knn_isolated_minority_is_misclassified() {
        let d = rows(&[
            ("a", &[0.0], 0),
            ("b", &[0.1], 0),
            ("c", &[0.2], 0),
            ("d", &[0.15], 1),
        ]);
        let h = fit(&LearnerSpec::knn(3).unwrap(), &d).unwrap();
        let errs = training_errors(&h, &d).unwrap();
        assert_eq!(errs, vec![3]);
    }

    #[test]
    fn knn_spec_validation() {
        assert!(LearnerSpec::knn(2).is_err());
        assert!(LearnerSpec::knn(1).is_err());
        assert!(LearnerSpec::logreg_reg(0.0).is_err());
        assert!(LearnerSpec::logreg_reg(-1.0).is_err());
    }

    #[test]
    fn loss_at_origin_is_n_log_two() {
        let d = rows(&[("a", &[0.0, 3.0], 0), ("b", &[1.0, 1.0], 1), ("c", &[5.0, -2.0], 1)]);
        let h = LinearHypothesis::zeros(2);
        let expect = 3.0 * std::f64::consts::LN_2;
        assert!((penalized_loss(&h, &d, 0.0).unwrap() - expect).abs() < 1e-12);
        assert!((penalized_loss(&h, &d, 5.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn signed_distance_examples() {
        let h = LinearHypothesis { w: vec![1.0, 0.0], b: 0.0 };
        assert_eq!(signed_distance(&h, &[3.0, 7.0]).unwrap(), 3.0);
        let h = LinearHypothesis { w: vec![2.0, 0.0], b: 0.0 };
        assert_eq!(signed_distance(&h, &[3.0, 7.0]).unwrap(), 3.0);
        let h = LinearHypothesis { w: vec![1.0, 1.0], b: -2.0 };
        assert_eq!(signed_distance(&h, &[1.0, 1.0]).unwrap(), 0.0);
        let h = LinearHypothesis::zeros(2);
        assert_eq!(signed_distance(&h, &[1.0, 1.0]), Err(LearnerError::ZeroWeight));
    }

    #[test]
    fn hypothesis_json_shape() {
        let h = Hypothesis::Linear(LinearHypothesis { w: vec![1.0], b: -0.5 });
        let v: serde_json::Value = serde_json::to_value(&h).unwrap();
        assert_eq!(v["kind"], "linear");
        assert_eq!(v["b"], -0.5);
        let back: Hypothesis = serde_json::from_value(v).unwrap();
        assert_eq!(back, h);
    }
}
