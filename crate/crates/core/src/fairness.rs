//! Fairness gaps of a predictor `R` with respect to a sensitive attribute
//! `A` and ground truth `Y`, expressed as (conditional) mutual informations.
//!
//! | quantity     | expression   |
//! |--------------|--------------|
//! | independence | `I(R;A)`     |
//! | separation   | `I(R;A\|Y)`  |
//! | sufficiency  | `I(Y;A\|R)`  |
//! | accuracy     | `I(Y;R)`     |
//! | balance      | `I(Y;R\|A)`  |
//! | legacy       | `I(A;Y)`     |
//!
//! Sufficiency and separation both decompose as `-accuracy + balance + x`
//! where `x` is the legacy term for sufficiency and independence for
//! separation.

use crate::error::{Error, Result};
use crate::infotheory::{Axis, ProbTable};
use crate::scalar::Scalar;

pub const PREDICTION: &str = "R";
pub const SENSITIVE: &str = "A";
pub const LABEL: &str = "Y";

const R: &[&str] = &[PREDICTION];
const A: &[&str] = &[SENSITIVE];
const Y: &[&str] = &[LABEL];

/// Normalization denominators below this are treated as zero.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Tolerance on the shared (A,Y) marginal in [`maintains_degree`].
pub const COMPARABLE_TOLERANCE: f64 = 1e-6;

/// Flat index of cell `(r, a, y)` in a binary `(R, A, Y)` table.
#[inline]
pub fn cell_index(r: usize, a: usize, y: usize) -> usize {
    r * 4 + a * 2 + y
}

/// Axes of the binary `(R, A, Y)` joint, in storage order.
pub fn binary_axes() -> Vec<Axis> {
    vec![
        Axis::new(PREDICTION, 2),
        Axis::new(SENSITIVE, 2),
        Axis::new(LABEL, 2),
    ]
}

/// Empirical `(R, A, Y)` joint from hard 0/1 predictions, attributes and labels.
pub fn joint_from_labels<T: Scalar>(r: &[u8], a: &[u8], y: &[u8]) -> Result<ProbTable<T>> {
    if r.len() != a.len() || r.len() != y.len() {
        return Err(Error::Dimension(format!(
            "r, a, y have lengths {}, {}, {}",
            r.len(),
            a.len(),
            y.len()
        )));
    }
    let mut counts = [0u64; 8];
    for ((&ri, &ai), &yi) in r.iter().zip(a).zip(y) {
        if ri > 1 || ai > 1 || yi > 1 {
            return Err(Error::InvalidParameter(
                "r, a, y must be binary (0 or 1)".into(),
            ));
        }
        counts[cell_index(ri as usize, ai as usize, yi as usize)] += 1;
    }
    ProbTable::from_counts(binary_axes(), &counts)
}

fn require<T: Scalar>(t: &ProbTable<T>, names: &[&str]) -> Result<()> {
    match names.iter().find(|n| !t.has_axis(n)) {
        Some(missing) => Err(Error::UnknownAxis(missing.to_string())),
        None => Ok(()),
    }
}

/// `I(R;A)`. The table may or may not carry a `Y` axis.
pub fn independence_gap<T: Scalar>(t: &ProbTable<T>) -> Result<T> {
    require(t, &[PREDICTION, SENSITIVE])?;
    t.mutual_information(R, A)
}

/// `I(R;A|Y)`.
pub fn separation_gap<T: Scalar>(t: &ProbTable<T>) -> Result<T> {
    require(t, &[PREDICTION, SENSITIVE, LABEL])?;
    t.conditional_mutual_information(R, A, Y)
}

/// `I(Y;A|R)`.
pub fn sufficiency_gap<T: Scalar>(t: &ProbTable<T>) -> Result<T> {
    require(t, &[PREDICTION, SENSITIVE, LABEL])?;
    t.conditional_mutual_information(Y, A, R)
}

/// `I(Y;R)`.
pub fn accuracy_mi<T: Scalar>(t: &ProbTable<T>) -> Result<T> {
    require(t, &[PREDICTION, LABEL])?;
    t.mutual_information(Y, R)
}

/// `I(Y;R|A)`.
pub fn balance<T: Scalar>(t: &ProbTable<T>) -> Result<T> {
    require(t, &[PREDICTION, SENSITIVE, LABEL])?;
    t.conditional_mutual_information(Y, R, A)
}

/// `I(A;Y)`; does not depend on the prediction at all.
pub fn legacy<T: Scalar>(t: &ProbTable<T>) -> Result<T> {
    require(t, &[SENSITIVE, LABEL])?;
    t.mutual_information(A, Y)
}

/// Terms of `suf = -acc + bal + legacy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficiencyDecomposition<T> {
    pub suf: T,
    pub neg_acc: T,
    pub bal: T,
    pub legacy: T,
}

impl<T: Scalar> SufficiencyDecomposition<T> {
    /// `suf - (neg_acc + bal + legacy)`.
    pub fn residual(&self) -> T {
        self.suf - (self.neg_acc + self.bal + self.legacy)
    }
}

/// Terms of `sep = -acc + bal + ind`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationDecomposition<T> {
    pub sep: T,
    pub neg_acc: T,
    pub bal: T,
    pub ind: T,
}

impl<T: Scalar> SeparationDecomposition<T> {
    pub fn residual(&self) -> T {
        self.sep - (self.neg_acc + self.bal + self.ind)
    }
}

pub fn sufficiency_decomposition<T: Scalar>(
    t: &ProbTable<T>,
) -> Result<SufficiencyDecomposition<T>> {
    Ok(SufficiencyDecomposition {
        suf: sufficiency_gap(t)?,
        neg_acc: -accuracy_mi(t)?,
        bal: balance(t)?,
        legacy: legacy(t)?,
    })
}

pub fn separation_decomposition<T: Scalar>(
    t: &ProbTable<T>,
) -> Result<SeparationDecomposition<T>> {
    Ok(SeparationDecomposition {
        sep: separation_gap(t)?,
        neg_acc: -accuracy_mi(t)?,
        bal: balance(t)?,
        ind: independence_gap(t)?,
    })
}

/// Raw gaps, their entropy-normalized variants and the denominators used.
///
/// A normalized value is `None` when its denominator is below
/// [`DEGENERATE_DENOMINATOR`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairnessReport<T> {
    pub ind: T,
    pub sep: T,
    pub suf: T,
    pub acc: T,
    pub bal: T,
    pub n_ind: Option<T>,
    pub n_sep: Option<T>,
    pub n_suf: Option<T>,
    /// `H(A)`
    pub h_a: T,
    /// `H(A|Y)`
    pub h_a_given_y: T,
    /// `H(A|R)`
    pub h_a_given_r: T,
}

impl<T: Scalar> FairnessReport<T> {
    pub fn to_f64(&self) -> FairnessReport<f64> {
        FairnessReport {
            ind: self.ind.as_f64(),
            sep: self.sep.as_f64(),
            suf: self.suf.as_f64(),
            acc: self.acc.as_f64(),
            bal: self.bal.as_f64(),
            n_ind: self.n_ind.map(Scalar::as_f64),
            n_sep: self.n_sep.map(Scalar::as_f64),
            n_suf: self.n_suf.map(Scalar::as_f64),
            h_a: self.h_a.as_f64(),
            h_a_given_y: self.h_a_given_y.as_f64(),
            h_a_given_r: self.h_a_given_r.as_f64(),
        }
    }
}

fn normalize<T: Scalar>(gap: T, denominator: T) -> Option<T> {
    (denominator >= T::lit(DEGENERATE_DENOMINATOR)).then(|| gap / denominator)
}

pub fn normalized_report<T: Scalar>(t: &ProbTable<T>) -> Result<FairnessReport<T>> {
    require(t, &[PREDICTION, SENSITIVE, LABEL])?;
    let ind = independence_gap(t)?;
    let sep = separation_gap(t)?;
    let suf = sufficiency_gap(t)?;
    let h_a = t.entropy(A)?;
    let h_a_given_y = t.conditional_entropy(A, Y)?;
    let h_a_given_r = t.conditional_entropy(A, R)?;
    Ok(FairnessReport {
        ind,
        sep,
        suf,
        acc: accuracy_mi(t)?,
        bal: balance(t)?,
        n_ind: normalize(ind, h_a),
        n_sep: normalize(sep, h_a_given_y),
        n_suf: normalize(suf, h_a_given_r),
        h_a,
        h_a_given_y,
        h_a_given_r,
    })
}

/// Whether a gap is of degree `d`, i.e. `gap <= d`.
pub fn satisfies_degree<T: Scalar>(gap: T, d: T) -> Result<bool> {
    if d < T::zero() || d.is_nan() {
        return Err(Error::NegativeDegree(d.as_f64()));
    }
    Ok(gap <= d)
}

/// Criterion whose degree a replacement predictor should maintain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Sufficiency,
    Separation,
}

/// Whether the predictor behind `new` maintains the degree of `which` held
/// by the predictor behind `old`.
///
/// Sufficiency: `I(Y;R'|A) <= I(Y;R|A)`.
/// Separation: `I(Y;R'|A) + I(A;R') <= I(Y;R|A) + I(A;R)`.
///
/// Both tables must describe the same population, i.e. share their
/// `(A, Y)` marginal.
pub fn maintains_degree<T: Scalar>(
    old: &ProbTable<T>,
    new: &ProbTable<T>,
    which: Criterion,
) -> Result<bool> {
    require(old, &[PREDICTION, SENSITIVE, LABEL])?;
    require(new, &[PREDICTION, SENSITIVE, LABEL])?;
    let old_ay = old.marginalize(&[SENSITIVE, LABEL])?;
    let new_ay = new.marginalize(&[SENSITIVE, LABEL])?;
    let gap = old_ay
        .probs()
        .iter()
        .zip(new_ay.probs())
        .map(|(p, q)| (*p - *q).abs())
        .fold(T::zero(), T::max);
    if gap > T::lit(COMPARABLE_TOLERANCE) {
        return Err(Error::NotComparable(gap.as_f64()));
    }
    Ok(match which {
        Criterion::Sufficiency => balance(new)? <= balance(old)?,
        Criterion::Separation => {
            balance(new)? + independence_gap(new)? <= balance(old)? + independence_gap(old)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn table(p: [f64; 8]) -> ProbTable<f64> {
        ProbTable::new(binary_axes(), p.to_vec()).unwrap()
    }

    /// Builds `p(r,a,y) = p(a,y) * p(r|a,y)`.
    fn from_conditionals(ay: [f64; 4], r1_given_ay: [f64; 4]) -> ProbTable<f64> {
        let mut p = [0.0; 8];
        for a in 0..2 {
            for y in 0..2 {
                let m = ay[a * 2 + y];
                let q = r1_given_ay[a * 2 + y];
                p[cell_index(1, a, y)] = m * q;
                p[cell_index(0, a, y)] = m * (1.0 - q);
            }
        }
        table(p)
    }

    #[test]
    fn independence_examples() {
        let indep = from_conditionals([0.1, 0.2, 0.3, 0.4], [0.3; 4]);
        assert_abs_diff_eq!(independence_gap(&indep).unwrap(), 0.0, epsilon = 1e-10);
        // R = A, A independent of Y.
        let copy = from_conditionals([0.25; 4], [0.0, 0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(independence_gap(&copy).unwrap(), LN_2, epsilon = 1e-12);
        let no_r = copy.marginalize(&["A", "Y"]).unwrap();
        assert!(matches!(independence_gap(&no_r), Err(Error::UnknownAxis(_))));
    }

    #[test]
    fn independence_ignores_label_axis() {
        let t = from_conditionals([0.1, 0.2, 0.3, 0.4], [0.2, 0.5, 0.7, 0.9]);
        let ra = t.marginalize(&["R", "A"]).unwrap();
        assert_abs_diff_eq!(
            independence_gap(&t).unwrap(),
            independence_gap(&ra).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn perfect_prediction_zeroes_separation_and_sufficiency() {
        let t = from_conditionals([0.1, 0.2, 0.3, 0.4], [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(separation_gap(&t).unwrap(), 0.0);
        assert_eq!(sufficiency_gap(&t).unwrap(), 0.0);
        let suf = sufficiency_decomposition(&t).unwrap();
        assert_abs_diff_eq!(suf.residual(), 0.0, epsilon = 1e-12);
        let sep = separation_decomposition(&t).unwrap();
        assert_abs_diff_eq!(sep.residual(), 0.0, epsilon = 1e-12);
        // accuracy_mi = H(Y) here.
        assert_abs_diff_eq!(accuracy_mi(&t).unwrap(), t.entropy(&["Y"]).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn uninformative_prediction() {
        let t = from_conditionals([0.1, 0.2, 0.3, 0.4], [0.6; 4]);
        assert_abs_diff_eq!(separation_gap(&t).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(accuracy_mi(&t).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(balance(&t).unwrap(), 0.0, epsilon = 1e-10);
        let d = sufficiency_decomposition(&t).unwrap();
        assert_abs_diff_eq!(d.suf, d.legacy, epsilon = 1e-10);
        assert!(d.legacy > 0.0);
    }

    #[test]
    fn label_independent_of_rest_zeroes_sufficiency() {
        // p(r,a,y) = p(r,a) p(y)
        let ra = [0.1, 0.3, 0.35, 0.25];
        let py = [0.4, 0.6];
        let mut p = [0.0; 8];
        for r in 0..2 {
            for a in 0..2 {
                for y in 0..2 {
                    p[cell_index(r, a, y)] = ra[r * 2 + a] * py[y];
                }
            }
        }
        assert_abs_diff_eq!(sufficiency_gap(&table(p)).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn fair_bit_accuracy() {
        let t = from_conditionals([0.25; 4], [0.0, 1.0, 0.0, 1.0]);
        assert_abs_diff_eq!(accuracy_mi(&t).unwrap(), LN_2, epsilon = 1e-12);
    }

    #[test]
    fn normalized_report_examples() {
        let copy = from_conditionals([0.25; 4], [0.0, 0.0, 1.0, 1.0]);
        let rep = normalized_report(&copy).unwrap();
        assert_abs_diff_eq!(rep.n_ind.unwrap(), 1.0, epsilon = 1e-12);
        // A fully determined by R.
        assert_eq!(rep.n_suf, None);
        assert!(rep.suf.is_finite());

        let indep = from_conditionals([0.1, 0.2, 0.3, 0.4], [0.3; 4]);
        let rep = normalized_report(&indep).unwrap();
        assert_abs_diff_eq!(rep.n_ind.unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn degree_predicate() {
        assert!(satisfies_degree(0.0, 0.0).unwrap());
        assert!(!satisfies_degree(LN_2, 0.5).unwrap());
        assert!(satisfies_degree(0.08630462173553419, 0.1).unwrap());
        assert!(matches!(satisfies_degree(0.1, -1.0), Err(Error::NegativeDegree(_))));
    }

    #[test]
    fn maintains_degree_examples() {
        let ay = [0.1, 0.2, 0.3, 0.4];
        let old = from_conditionals(ay, [0.2, 0.7, 0.4, 0.9]);
        for c in [Criterion::Sufficiency, Criterion::Separation] {
            assert!(maintains_degree(&old, &old, c).unwrap());
        }
        let flat = from_conditionals(ay, [0.5; 4]);
        for c in [Criterion::Sufficiency, Criterion::Separation] {
            assert!(maintains_degree(&old, &flat, c).unwrap());
        }
        let other = from_conditionals([0.25; 4], [0.5; 4]);
        assert!(matches!(
            maintains_degree(&old, &other, Criterion::Separation),
            Err(Error::NotComparable(_))
        ));
    }

    #[test]
    fn joint_from_labels_counts() {
        let t: ProbTable<f64> = joint_from_labels(&[1, 0, 1, 1], &[0, 0, 1, 1], &[1, 0, 0, 1]).unwrap();
        assert_eq!(t.probs()[cell_index(1, 0, 1)], 0.25);
        assert_eq!(t.probs()[cell_index(0, 0, 0)], 0.25);
        assert_eq!(t.probs()[cell_index(1, 1, 0)], 0.25);
        assert_eq!(t.probs()[cell_index(1, 1, 1)], 0.25);
        assert!(joint_from_labels::<f64>(&[2], &[0], &[0]).is_err());
        assert!(joint_from_labels::<f64>(&[1], &[0, 1], &[0]).is_err());
    }
}
