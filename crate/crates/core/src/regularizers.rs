//! Differentiable fairness terms computed from predicted probabilities.
//!
//! A [`SoftJoint`] replaces the hard prediction `R` by its expectation:
//! sample `i` with predicted positive probability `r_i` puts mass `r_i / n`
//! into cell `(1, a_i, y_i)` and `(1 - r_i) / n` into `(0, a_i, y_i)`.
//! Every regularizer is a signed sum of entropies of marginals of this
//! 2×2×2 table, so its gradient with respect to the cell masses follows
//! directly and is pushed back to each `r_i` through the per-sample
//! Jacobian, which is `+1/n` on the sample's `R=1` cell and `-1/n` on its
//! `R=0` cell.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{binary_axes, cell_index};
use crate::infotheory::ProbTable;
use crate::scalar::Scalar;

/// Fairness term added to the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegularizerKind {
    #[serde(rename = "IND")]
    Ind,
    #[serde(rename = "SEP")]
    Sep,
    #[serde(rename = "SUF")]
    Suf,
    #[serde(rename = "BAL")]
    Bal,
    #[serde(rename = "NEG_ACC")]
    NegAcc,
    #[serde(rename = "NONE")]
    None,
}

impl RegularizerKind {
    /// The five kinds that add a term to the loss.
    pub const ACTIVE: [RegularizerKind; 5] = [
        RegularizerKind::Ind,
        RegularizerKind::Sep,
        RegularizerKind::Suf,
        RegularizerKind::Bal,
        RegularizerKind::NegAcc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegularizerKind::Ind => "IND",
            RegularizerKind::Sep => "SEP",
            RegularizerKind::Suf => "SUF",
            RegularizerKind::Bal => "BAL",
            RegularizerKind::NegAcc => "NEG_ACC",
            RegularizerKind::None => "NONE",
        }
    }

    /// Signed entropy terms `(coefficient, axis mask)` whose sum is the
    /// regularizer. Mask bits: `R = 4`, `A = 2`, `Y = 1`.
    fn entropy_terms(self) -> &'static [(f64, usize)] {
        const RM: usize = 4;
        const AM: usize = 2;
        const YM: usize = 1;
        match self {
            // H(R) + H(A) - H(R,A)
            RegularizerKind::Ind => &[(1.0, RM), (1.0, AM), (-1.0, RM | AM)],
            // H(R,Y) + H(A,Y) - H(R,A,Y) - H(Y)
            RegularizerKind::Sep => &[
                (1.0, RM | YM),
                (1.0, AM | YM),
                (-1.0, RM | AM | YM),
                (-1.0, YM),
            ],
            // H(Y,R) + H(A,R) - H(R,A,Y) - H(R)
            RegularizerKind::Suf => &[
                (1.0, RM | YM),
                (1.0, RM | AM),
                (-1.0, RM | AM | YM),
                (-1.0, RM),
            ],
            // H(Y,A) + H(R,A) - H(R,A,Y) - H(A)
            RegularizerKind::Bal => &[
                (1.0, AM | YM),
                (1.0, RM | AM),
                (-1.0, RM | AM | YM),
                (-1.0, AM),
            ],
            // -(H(Y) + H(R) - H(R,Y))
            RegularizerKind::NegAcc => &[(-1.0, YM), (-1.0, RM), (1.0, RM | YM)],
            RegularizerKind::None => &[],
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "IND" => Ok(RegularizerKind::Ind),
            "SEP" => Ok(RegularizerKind::Sep),
            "SUF" => Ok(RegularizerKind::Suf),
            "BAL" => Ok(RegularizerKind::Bal),
            "NEG_ACC" | "-ACC" => Ok(RegularizerKind::NegAcc),
            "NONE" => Ok(RegularizerKind::None),
            _ => Err(Error::Schema(format!("unknown regularizer kind `{s}`"))),
        }
    }
}

/// Soft `(R, A, Y)` joint built from per-sample predicted probabilities.
#[derive(Debug, Clone)]
pub struct SoftJoint<T> {
    probs: [T; 8],
    /// `(a_i, y_i)` slice of each sample, encoded as `2 a + y`.
    slice: Vec<u8>,
    inv_n: T,
    clamped: usize,
}

impl<T: Scalar> SoftJoint<T> {
    pub fn probs(&self) -> &[T; 8] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.slice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slice.is_empty()
    }

    /// Number of inputs that fell outside `[ε, 1-ε]` and were clamped.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Nonzero entries of `∂probs/∂r_i` as `(cell, derivative)` pairs.
    pub fn jacobian_row(&self, i: usize) -> [(usize, T); 2] {
        let s = self.slice[i] as usize;
        let (a, y) = (s >> 1, s & 1);
        [
            (cell_index(1, a, y), self.inv_n),
            (cell_index(0, a, y), -self.inv_n),
        ]
    }

    /// The soft joint as a validated probability table.
    pub fn table(&self) -> Result<ProbTable<T>> {
        ProbTable::new(binary_axes(), self.probs.to_vec())
    }
}

/// Builds the soft joint. `a` and `y` must be 0/1 and match `pred` in length.
pub fn soft_joint<T: Scalar>(pred: &[T], a: &[u8], y: &[u8]) -> Result<SoftJoint<T>> {
    let n = pred.len();
    if n == 0 {
        return Err(Error::Dimension("soft joint needs at least one sample".into()));
    }
    if a.len() != n || y.len() != n {
        return Err(Error::Dimension(format!(
            "predictions have length {n}, a has {}, y has {}",
            a.len(),
            y.len()
        )));
    }
    let eps = T::prob_floor();
    let hi = T::one() - eps;
    let mut positive = [T::zero(); 4];
    let mut counts = [0u64; 4];
    let mut slice = Vec::with_capacity(n);
    let mut clamped = 0;
    for ((&r, &ai), &yi) in pred.iter().zip(a).zip(y) {
        if ai > 1 || yi > 1 {
            return Err(Error::InvalidParameter("a and y must be binary (0 or 1)".into()));
        }
        if !r.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite prediction {r}")));
        }
        let rc = if r < eps || r > hi {
            clamped += 1;
            r.max(eps).min(hi)
        } else {
            r
        };
        let s = (ai * 2 + yi) as usize;
        positive[s] += rc;
        counts[s] += 1;
        slice.push(s as u8);
    }
    let n_t = T::from_usize(n).expect("sample count fits scalar");
    let inv_n = T::one() / n_t;
    let mut probs = [T::zero(); 8];
    for s in 0..4 {
        let (a, y) = (s >> 1, s & 1);
        let count = T::from_u64(counts[s]).expect("count fits scalar");
        probs[cell_index(1, a, y)] = positive[s] / n_t;
        probs[cell_index(0, a, y)] = (count - positive[s]) / n_t;
    }
    Ok(SoftJoint {
        probs,
        slice,
        inv_n,
        clamped,
    })
}

fn marginal<T: Scalar>(probs: &[T; 8], mask: usize) -> [T; 8] {
    let mut out = [T::zero(); 8];
    for (c, &p) in probs.iter().enumerate() {
        out[c & mask] += p;
    }
    out
}

/// `-Σ q ln max(q, ε)` over a marginal. Zero masses contribute zero.
fn clamped_entropy<T: Scalar>(masses: &[T; 8], mask: usize, eps: T) -> T {
    let mut acc = T::zero();
    for (idx, &q) in masses.iter().enumerate() {
        if idx & !mask == 0 && q > T::zero() {
            acc -= q * q.max(eps).ln();
        }
    }
    acc
}

/// Derivative of `-q ln max(q, ε)` with respect to `q`.
fn clamped_entropy_slope<T: Scalar>(q: T, eps: T) -> T {
    if q > eps {
        -(q.ln() + T::one())
    } else {
        -eps.ln()
    }
}

/// Regularizer value on the soft joint, in nats.
pub fn reg_value<T: Scalar>(kind: RegularizerKind, j: &SoftJoint<T>) -> Result<T> {
    if kind == RegularizerKind::None {
        return Err(Error::NoRegularizer);
    }
    let eps = T::prob_floor();
    let mut value = T::zero();
    for &(coef, mask) in kind.entropy_terms() {
        let m = marginal(&j.probs, mask);
        value += T::lit(coef) * clamped_entropy(&m, mask, eps);
    }
    Ok(value)
}

/// `∂value/∂probs[c]` for each of the eight cells.
pub fn cell_gradient<T: Scalar>(kind: RegularizerKind, j: &SoftJoint<T>) -> Result<[T; 8]> {
    if kind == RegularizerKind::None {
        return Err(Error::NoRegularizer);
    }
    let eps = T::prob_floor();
    let mut grad = [T::zero(); 8];
    for &(coef, mask) in kind.entropy_terms() {
        let m = marginal(&j.probs, mask);
        let coef = T::lit(coef);
        for (c, g) in grad.iter_mut().enumerate() {
            *g += coef * clamped_entropy_slope(m[c & mask], eps);
        }
    }
    Ok(grad)
}

/// `∂value/∂r_i` for every sample.
pub fn reg_gradient<T: Scalar>(kind: RegularizerKind, j: &SoftJoint<T>) -> Result<Vec<T>> {
    let cells = cell_gradient(kind, j)?;
    // Per-slice derivative, shared by every sample in that slice.
    let mut per_slice = [T::zero(); 4];
    for (s, d) in per_slice.iter_mut().enumerate() {
        let (a, y) = (s >> 1, s & 1);
        *d = (cells[cell_index(1, a, y)] - cells[cell_index(0, a, y)]) * j.inv_n;
    }
    Ok(j.slice.iter().map(|&s| per_slice[s as usize]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn soft_joint_symmetric_input() {
        let j = soft_joint(&[0.5; 4], &[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert_eq!(j.probs(), &[0.125; 8]);
        assert_eq!(j.clamped(), 0);
    }

    #[test]
    fn soft_joint_all_positive() {
        let a = [0, 0, 1, 1, 1];
        let y = [0, 1, 0, 1, 1];
        let j = soft_joint(&[1.0; 5], &a, &y).unwrap();
        // 1.0 lies above 1 - ε and is clamped.
        assert_eq!(j.clamped(), 5);
        for a in 0..2 {
            for y in 0..2 {
                assert!(j.probs()[cell_index(0, a, y)] < 1e-11);
            }
        }
        let ay = j.table().unwrap().marginalize(&["A", "Y"]).unwrap();
        for (got, want) in ay.probs().iter().zip([0.2, 0.2, 0.2, 0.4]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn soft_joint_rejects_bad_input() {
        assert!(soft_joint::<f64>(&[], &[], &[]).is_err());
        assert!(soft_joint(&[0.5, 0.5], &[0], &[0, 1]).is_err());
        assert!(soft_joint(&[0.5], &[2], &[0]).is_err());
    }

    #[test]
    fn none_kind_is_an_error() {
        let j = soft_joint(&[0.5; 4], &[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        let err = reg_value(RegularizerKind::None, &j).unwrap_err();
        assert_eq!(err.to_string(), "no regularizer selected");
        assert!(reg_gradient(RegularizerKind::None, &j).is_err());
    }

    #[test]
    fn constant_prediction_has_no_independence_gap() {
        let a = [0, 1, 1, 0, 1, 0, 0, 1];
        let y = [1, 1, 0, 0, 1, 0, 1, 1];
        let j = soft_joint(&[0.3; 8], &a, &y).unwrap();
        assert_abs_diff_eq!(reg_value(RegularizerKind::Ind, &j).unwrap(), 0.0, epsilon = 1e-12);
        for g in reg_gradient(RegularizerKind::Ind, &j).unwrap() {
            assert_abs_diff_eq!(g, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn correct_predictions() {
        let a = [0, 1, 1, 0, 1, 0, 0, 1];
        let y = [1, 1, 0, 0, 1, 0, 1, 1];
        let r: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let j = soft_joint(&r, &a, &y).unwrap();
        assert_abs_diff_eq!(reg_value(RegularizerKind::Sep, &j).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(reg_value(RegularizerKind::Suf, &j).unwrap(), 0.0, epsilon = 1e-9);
        let h_y = j.table().unwrap().entropy(&["Y"]).unwrap();
        assert_abs_diff_eq!(reg_value(RegularizerKind::NegAcc, &j).unwrap(), -h_y, epsilon = 1e-9);
    }

    #[test]
    fn kind_strings_round_trip() {
        for kind in RegularizerKind::ACTIVE.into_iter().chain([RegularizerKind::None]) {
            assert_eq!(kind.as_str().parse::<RegularizerKind>().unwrap(), kind);
        }
        assert!("FOO".parse::<RegularizerKind>().is_err());
    }
}
