//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Curvature pairs `(s, y)` are only stored when `s·y > 0`, which keeps the
//! implicit inverse-Hessian approximation positive definite. If the
//! two-loop direction is not a descent direction the memory is dropped and
//! the step falls back to steepest descent.

use std::collections::VecDeque;

use ndarray::Array1;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsSettings<T> {
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once the gradient's max-norm falls to this value.
    pub grad_tol: T,
    /// Armijo sufficient-decrease constant.
    pub armijo: T,
    /// Maximum halvings per line search.
    pub max_backtracks: usize,
}

impl<T: Scalar> Default for LbfgsSettings<T> {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 1000,
            grad_tol: T::lit(1e-6),
            armijo: T::lit(1e-4),
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// No step along steepest descent reduced the objective.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Array1<T>,
    pub value: T,
    pub initial_value: T,
    pub grad_inf_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

impl<T> Minimum<T> {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::GradientTolerance
    }
}

fn inf_norm<T: Scalar>(v: &Array1<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Minimizes `f`, which returns the objective and its gradient.
pub fn minimize<T, F>(mut f: F, x0: Array1<T>, settings: &LbfgsSettings<T>) -> Minimum<T>
where
    T: Scalar,
    F: FnMut(&Array1<T>) -> (T, Array1<T>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let initial_value = fx;
    let mut evaluations = 1;
    let mut history: VecDeque<(Array1<T>, Array1<T>, T)> = VecDeque::with_capacity(settings.memory);
    let mut iterations = 0;

    let stop = loop {
        if inf_norm(&g) <= settings.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= settings.max_iter {
            break StopReason::MaxIterations;
        }

        let mut dir = two_loop(&g, &history);
        let mut slope = g.dot(&dir);
        if !slope.is_finite() || slope >= T::zero() {
            history.clear();
            dir = g.mapv(|v| -v);
            slope = g.dot(&dir);
        }
        let mut step = if history.is_empty() {
            T::one().min(T::one() / inf_norm(&g))
        } else {
            T::one()
        };

        let mut accepted = None;
        for _ in 0..=settings.max_backtracks {
            let trial = &x + &(&dir * step);
            let (ft, gt) = f(&trial);
            evaluations += 1;
            if ft.is_finite() && ft <= fx + settings.armijo * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= T::lit(0.5);
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if history.is_empty() {
                break StopReason::LineSearchFailed;
            }
            history.clear();
            continue;
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > T::epsilon() * s.dot(&s).sqrt() * y.dot(&y).sqrt() && sy > T::zero() {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
    };

    Minimum {
        grad_inf_norm: inf_norm(&g),
        x,
        value: fx,
        initial_value,
        iterations,
        evaluations,
        stop,
    }
}

/// `-H g` via the standard two-loop recursion.
fn two_loop<T: Scalar>(g: &Array1<T>, history: &VecDeque<(Array1<T>, Array1<T>, T)>) -> Array1<T> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = *rho * s.dot(&q);
        q.scaled_add(-alpha, y);
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = s.dot(y) / y.dot(y);
        q.mapv_inplace(|v| v * gamma);
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = *rho * y.dot(&q);
        q.scaled_add(alpha - beta, s);
    }
    q.mapv_inplace(|v| -v);
    q
}
