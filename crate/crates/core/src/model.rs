//! Logistic regression trained on `l_fit + λ·l2 + μ·l_fair`.
//!
//! `l_fit` is the mean cross-entropy, `l2` the squared norm of the feature
//! weights (the bias is not penalized) and `l_fair` one of the soft
//! regularizers from [`crate::regularizers`].

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::fairness::{joint_from_labels, normalized_report, FairnessReport};
use crate::optim::{minimize, LbfgsSettings, StopReason};
use crate::regularizers::{reg_gradient, reg_value, soft_joint, RegularizerKind};
use crate::scalar::Scalar;

/// Model parameters: one weight per feature followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T>(pub Array1<T>);

impl<T: Scalar> Weights<T> {
    /// All-ones initialization, bias included.
    pub fn ones(n_features: usize) -> Self {
        Self(Array1::ones(n_features + 1))
    }

    pub fn zeros(n_features: usize) -> Self {
        Self(Array1::zeros(n_features + 1))
    }

    pub fn n_features(&self) -> usize {
        self.0.len() - 1
    }

    pub fn features(&self) -> ArrayView1<'_, T> {
        self.0.slice(ndarray::s![..-1])
    }

    pub fn bias(&self) -> T {
        self.0[self.0.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    /// Weight of the L2 penalty.
    pub lambda: T,
    /// Weight of the fairness term.
    pub mu: T,
    pub kind: RegularizerKind,
    pub max_iter: usize,
    pub grad_tol: T,
    /// Recorded for provenance; the solver itself is deterministic.
    pub seed: u64,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::zero(),
            mu: T::zero(),
            kind: RegularizerKind::None,
            max_iter: 1000,
            grad_tol: T::lit(1e-6),
            seed: 0,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() || self.mu.is_nan() || self.lambda < T::zero() || self.mu < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "lambda and mu must be nonnegative (lambda = {}, mu = {})",
                self.lambda, self.mu
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= T::zero() {
            return Err(Error::InvalidParameter("grad_tol must be positive".into()));
        }
        Ok(())
    }

    fn fairness_active(&self) -> bool {
        self.mu > T::zero() && self.kind != RegularizerKind::None
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

fn check_dims<T: Scalar>(w: &Weights<T>, x: &ArrayView2<T>) -> Result<()> {
    if x.ncols() + 1 != w.0.len() {
        return Err(Error::Dimension(format!(
            "{} feature columns but {} weights (bias included)",
            x.ncols(),
            w.0.len()
        )));
    }
    Ok(())
}

fn check_labels(n: usize, y: &[u8], a: &[u8]) -> Result<()> {
    if y.len() != n || a.len() != n {
        return Err(Error::Dimension(format!(
            "{n} rows but {} labels and {} attributes",
            y.len(),
            a.len()
        )));
    }
    if y.iter().chain(a).any(|&v| v > 1) {
        return Err(Error::InvalidParameter("labels and attributes must be 0 or 1".into()));
    }
    Ok(())
}

fn logits<T: Scalar>(w: &Weights<T>, x: &ArrayView2<T>) -> Array1<T> {
    let b = w.bias();
    x.dot(&w.features()).mapv(|v| v + b)
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = T::prob_floor();
    p.max(eps).min(T::one() - eps)
}

/// Predicted positive-class probabilities, clamped to `[ε, 1-ε]`.
pub fn predict_proba<T: Scalar>(w: &Weights<T>, x: ArrayView2<T>) -> Result<Array1<T>> {
    check_dims(w, &x)?;
    Ok(logits(w, &x).mapv(|z| clamp_prob(sigmoid(z))))
}

/// Mean cross-entropy of the logistic model, evaluated in logit space.
pub fn cross_entropy<T: Scalar>(w: &Weights<T>, x: ArrayView2<T>, y: &[u8]) -> Result<T> {
    check_dims(w, &x)?;
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    Ok(mean_cross_entropy(&logits(w, &x), y))
}

fn mean_cross_entropy<T: Scalar>(z: &Array1<T>, y: &[u8]) -> T {
    let n = T::from_usize(z.len()).expect("row count fits scalar");
    z.iter()
        .zip(y)
        .map(|(&zi, &yi)| if yi == 1 { softplus(-zi) } else { softplus(zi) })
        .sum::<T>()
        / n
}

/// The individual pieces of the composite loss at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub fit: T,
    pub l2: T,
    /// Zero when the fairness term is switched off.
    pub fair: T,
    pub total: T,
}

struct Evaluated<T> {
    parts: LossParts<T>,
    grad: Option<Array1<T>>,
}

fn evaluate_objective<T: Scalar>(
    w: &Weights<T>,
    x: &ArrayView2<T>,
    y: &[u8],
    a: &[u8],
    cfg: &TrainConfig<T>,
    with_grad: bool,
) -> Result<Evaluated<T>> {
    check_dims(w, x)?;
    check_labels(x.nrows(), y, a)?;
    let n = x.nrows();
    let n_t = T::from_usize(n).expect("row count fits scalar");
    let z = logits(w, x);
    let fit = mean_cross_entropy(&z, y);
    let feats = w.features();
    let l2 = feats.dot(&feats);

    let mut fair = T::zero();
    let mut fair_dr = None;
    let mut probs = None;
    if cfg.fairness_active() {
        let r: Vec<T> = z.iter().map(|&zi| clamp_prob(sigmoid(zi))).collect();
        let joint = soft_joint(&r, a, y)?;
        fair = reg_value(cfg.kind, &joint)?;
        if with_grad {
            fair_dr = Some(reg_gradient(cfg.kind, &joint)?);
        }
        probs = Some(r);
    }
    let total = fit + cfg.lambda * l2 + cfg.mu * fair;
    let parts = LossParts { fit, l2, fair, total };
    if !with_grad {
        return Ok(Evaluated { parts, grad: None });
    }

    let eps = T::prob_floor();
    let mut dz = Array1::zeros(n);
    for i in 0..n {
        let s = sigmoid(z[i]);
        let yi = if y[i] == 1 { T::one() } else { T::zero() };
        let mut d = (s - yi) / n_t;
        if let (Some(dr), Some(r)) = (&fair_dr, &probs) {
            // The clamp is flat outside [ε, 1-ε].
            if s > eps && s < T::one() - eps {
                d += cfg.mu * dr[i] * r[i] * (T::one() - r[i]);
            }
        }
        dz[i] = d;
    }
    let p = w.n_features();
    let mut grad = Array1::zeros(p + 1);
    let feature_grad = x.t().dot(&dz);
    for j in 0..p {
        grad[j] = feature_grad[j] + T::lit(2.0) * cfg.lambda * feats[j];
    }
    grad[p] = dz.sum();
    Ok(Evaluated {
        parts,
        grad: Some(grad),
    })
}

/// Composite loss split into its components.
pub fn loss_parts<T: Scalar>(
    w: &Weights<T>,
    x: ArrayView2<T>,
    y: &[u8],
    a: &[u8],
    cfg: &TrainConfig<T>,
) -> Result<LossParts<T>> {
    Ok(evaluate_objective(w, &x, y, a, cfg, false)?.parts)
}

/// `l_fit + λ·l2 + μ·l_fair`.
pub fn total_loss<T: Scalar>(
    w: &Weights<T>,
    x: ArrayView2<T>,
    y: &[u8],
    a: &[u8],
    cfg: &TrainConfig<T>,
) -> Result<T> {
    Ok(loss_parts(w, x, y, a, cfg)?.total)
}

/// Analytic gradient of [`total_loss`] with respect to the weights.
pub fn total_gradient<T: Scalar>(
    w: &Weights<T>,
    x: ArrayView2<T>,
    y: &[u8],
    a: &[u8],
    cfg: &TrainConfig<T>,
) -> Result<Array1<T>> {
    Ok(evaluate_objective(w, &x, y, a, cfg, true)?
        .grad
        .expect("gradient requested"))
}

#[derive(Debug, Clone)]
pub struct FitDiagnostics<T> {
    pub initial_loss: T,
    pub final_loss: T,
    pub grad_inf_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

impl<T> FitDiagnostics<T> {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::GradientTolerance
    }
}

/// Trains from the all-ones starting point with L-BFGS.
pub fn fit<T: Scalar>(
    x: ArrayView2<T>,
    y: &[u8],
    a: &[u8],
    cfg: &TrainConfig<T>,
) -> Result<(Weights<T>, FitDiagnostics<T>)> {
    cfg.validate()?;
    let n = x.nrows();
    if n < 10 {
        return Err(Error::InvalidParameter(format!("need at least 10 rows, got {n}")));
    }
    check_labels(n, y, a)?;
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels("y contains a single class".into()));
    }

    let p = x.ncols();
    let mut failure = None;
    let objective = |theta: &Array1<T>| {
        let w = Weights(theta.clone());
        match evaluate_objective(&w, &x, y, a, cfg, true) {
            Ok(ev) => (ev.parts.total, ev.grad.expect("gradient requested")),
            Err(e) => {
                failure.get_or_insert(e);
                (T::nan(), Array1::zeros(p + 1))
            }
        }
    };
    let settings = LbfgsSettings {
        max_iter: cfg.max_iter,
        grad_tol: cfg.grad_tol,
        ..LbfgsSettings::default()
    };
    let result = minimize(objective, Weights::<T>::ones(p).0, &settings);
    if let Some(e) = failure {
        return Err(e);
    }
    if !result.value.is_finite() {
        return Err(Error::Fit(format!("non-finite loss {}", result.value)));
    }
    let diagnostics = FitDiagnostics {
        initial_loss: result.initial_value,
        final_loss: result.value,
        grad_inf_norm: result.grad_inf_norm,
        iterations: result.iterations,
        evaluations: result.evaluations,
        stop: result.stop,
    };
    Ok((Weights(result.x), diagnostics))
}

/// Hard predictions: `1` where the predicted probability is at least 0.5.
pub fn predict<T: Scalar>(w: &Weights<T>, x: ArrayView2<T>) -> Result<Vec<u8>> {
    let half = T::lit(0.5);
    Ok(predict_proba(w, x)?
        .iter()
        .map(|&p| u8::from(p >= half))
        .collect())
}

/// Held-out evaluation of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub report: FairnessReport<T>,
    /// Fraction of correctly classified rows.
    pub accuracy_fraction: T,
    pub cross_entropy: T,
}

/// Thresholds predictions at 0.5 and reports fairness on the hard joint.
pub fn evaluate<T: Scalar>(
    w: &Weights<T>,
    x: ArrayView2<T>,
    y: &[u8],
    a: &[u8],
) -> Result<Evaluation<T>> {
    check_dims(w, &x)?;
    check_labels(x.nrows(), y, a)?;
    let r = predict(w, x)?;
    let joint = joint_from_labels::<T>(&r, a, y)?;
    let correct = r.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(Evaluation {
        report: normalized_report(&joint)?,
        accuracy_fraction: T::from_usize(correct).expect("count fits scalar")
            / T::from_usize(y.len()).expect("count fits scalar"),
        cross_entropy: cross_entropy(w, x, y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    #[test]
    fn zero_weights_predict_half() {
        let x = Array2::<f64>::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64 - 5.0);
        let p = predict_proba(&Weights::zeros(3), x.view()).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn saturation_hits_clamp() {
        let x = array![[0.0], [1.0]];
        let w = Weights(array![0.0, 1e6]);
        let p = predict_proba(&w, x.view()).unwrap();
        assert!(p.iter().all(|&v| v == 1.0 - 1e-12));
        let w = Weights(array![0.0, -1e6]);
        let p = predict_proba(&w, x.view()).unwrap();
        assert!(p.iter().all(|&v| v == 1e-12));
    }

    #[test]
    fn dimension_mismatch() {
        let x = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            predict_proba(&Weights::zeros(3), x.view()),
            Err(Error::Dimension(_))
        ));
        let cfg = TrainConfig::default();
        assert!(total_loss(&Weights::zeros(2), x.view(), &[0, 1], &[0, 1, 0], &cfg).is_err());
    }

    #[test]
    fn uniform_prediction_costs_ln2() {
        let x = Array2::<f64>::zeros((4, 2));
        let cfg = TrainConfig::default();
        let l = total_loss(&Weights::zeros(2), x.view(), &[0, 1, 0, 1], &[0, 0, 1, 1], &cfg).unwrap();
        assert_abs_diff_eq!(l, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn l2_gradient_skips_bias() {
        let x = array![[0.5, -1.0], [1.5, 0.2], [-0.3, 0.7], [0.9, -0.4]];
        let y = [0, 1, 1, 0];
        let a = [1, 0, 1, 0];
        let w = Weights(array![0.3, -0.8, 0.25]);
        let base = TrainConfig::<f64>::default();
        let pen = TrainConfig { lambda: 0.7, ..base };
        let g0 = total_gradient(&w, x.view(), &y, &a, &base).unwrap();
        let g1 = total_gradient(&w, x.view(), &y, &a, &pen).unwrap();
        assert_abs_diff_eq!(g1[0] - g0[0], 2.0 * 0.7 * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(g1[1] - g0[1], 2.0 * 0.7 * -0.8, epsilon = 1e-15);
        assert_eq!(g1[2], g0[2]);
    }

    #[test]
    fn mu_zero_ignores_kind() {
        let x = array![[0.5, -1.0], [1.5, 0.2], [-0.3, 0.7], [0.9, -0.4]];
        let y = [0, 1, 1, 0];
        let a = [1, 0, 1, 0];
        let w = Weights(array![0.3, -0.8, 0.25]);
        let none = TrainConfig::<f64>::default();
        for kind in RegularizerKind::ACTIVE {
            let cfg = TrainConfig { kind, ..none };
            assert_eq!(
                total_loss(&w, x.view(), &y, &a, &cfg).unwrap(),
                total_loss(&w, x.view(), &y, &a, &none).unwrap()
            );
        }
    }

    #[test]
    fn fit_rejects_degenerate_labels() {
        let x = Array2::<f64>::zeros((12, 2));
        let y = [1u8; 12];
        let a = [0u8, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let err = fit(x.view(), &y, &a, &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("degenerate labels"));
    }

    #[test]
    fn separable_toy_set_is_classified_perfectly() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 4.0;
            rows.extend([t, 1.0 + 0.1 * t]);
            y.push(1);
            rows.extend([-t - 0.5, -1.0 + 0.05 * t]);
            y.push(0);
        }
        let x = Array2::from_shape_vec((40, 2), rows).unwrap();
        let a: Vec<u8> = (0..40).map(|i| (i / 2 % 2) as u8).collect();
        let cfg = TrainConfig { lambda: 0.001, ..TrainConfig::default() };
        let (w, diag) = fit(x.view(), &y, &a, &cfg).unwrap();
        assert!(diag.final_loss <= diag.initial_loss);
        let ev = evaluate(&w, x.view(), &y, &a).unwrap();
        assert_eq!(ev.accuracy_fraction, 1.0);
        assert_eq!(ev.report.sep, 0.0);
        assert_eq!(ev.report.suf, 0.0);
    }

    #[test]
    fn constant_predictor_has_no_information() {
        let x = Array2::<f64>::zeros((6, 1));
        let w = Weights(array![0.0, -3.0]);
        let ev = evaluate(&w, x.view(), &[0, 1, 1, 0, 1, 0], &[0, 0, 1, 1, 0, 1]).unwrap();
        assert_abs_diff_eq!(ev.report.n_ind.unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev.report.acc, 0.0, epsilon = 1e-12);
    }
}
