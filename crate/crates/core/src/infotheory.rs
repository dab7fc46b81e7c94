//! Plug-in entropies and mutual informations over dense discrete joints.
//!
//! All quantities are in nats. Cells with zero probability contribute
//! nothing (`0 ln 0 = 0`), so identities such as the chain rule hold exactly
//! on sparse tables instead of only up to a smoothing constant.
//!
//! Entropy sums are accumulated over the nonzero cell masses in ascending
//! order. This makes every entropy a function of the multiset of masses
//! alone, so two marginals that carry the same masses in a different cell
//! layout produce bit-identical entropies.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One named axis of a [`ProbTable`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub name: String,
    pub cardinality: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Self {
            name: name.into(),
            cardinality,
        }
    }
}

/// Dense joint probability table, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable<T> {
    axes: Vec<Axis>,
    probs: Vec<T>,
}

impl<T: Scalar> ProbTable<T> {
    /// Builds a table from explicit probabilities.
    ///
    /// Masses summing to one within the scalar's tolerance are renormalized;
    /// anything further off is rejected.
    pub fn new(axes: Vec<Axis>, probs: Vec<T>) -> Result<Self> {
        validate_axes(&axes)?;
        let expected: usize = axes.iter().map(|a| a.cardinality).product();
        if probs.len() != expected {
            return Err(Error::InvalidTable(format!(
                "expected {expected} cells, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < T::zero()) {
            return Err(Error::InvalidTable(format!("invalid cell mass {bad}")));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(T::SUM_TOLERANCE) {
            return Err(Error::InvalidTable(format!(
                "masses sum to {total}, not 1"
            )));
        }
        let probs = probs.into_iter().map(|p| p / total).collect();
        Ok(Self { axes, probs })
    }

    /// Empirical plug-in distribution: each cell is `count / total`.
    pub fn from_counts(axes: Vec<Axis>, counts: &[u64]) -> Result<Self> {
        validate_axes(&axes)?;
        let expected: usize = axes.iter().map(|a| a.cardinality).product();
        if counts.len() != expected {
            return Err(Error::InvalidTable(format!(
                "expected {expected} cells, got {}",
                counts.len()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyDistribution);
        }
        let total = T::from_u64(total).expect("count fits scalar");
        let probs = counts
            .iter()
            .map(|&c| T::from_u64(c).expect("count fits scalar") / total)
            .collect();
        Ok(Self { axes, probs })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    /// Resolves names to a per-axis membership mask.
    fn mask(&self, names: &[&str]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.axes.len()];
        for name in names {
            mask[self.axis_index(name)?] = true;
        }
        Ok(mask)
    }

    /// Marginal masses over the masked axes, in the table's axis order.
    fn marginal_masses(&self, mask: &[bool]) -> Vec<T> {
        let kept: Vec<usize> = (0..self.axes.len()).filter(|&i| mask[i]).collect();
        let size: usize = kept.iter().map(|&i| self.axes[i].cardinality).product();
        let mut out = vec![T::zero(); size];
        let mut coords = vec![0usize; self.axes.len()];
        for &p in &self.probs {
            let mut idx = 0;
            for &i in &kept {
                idx = idx * self.axes[i].cardinality + coords[i];
            }
            out[idx] += p;
            for i in (0..coords.len()).rev() {
                coords[i] += 1;
                if coords[i] < self.axes[i].cardinality {
                    break;
                }
                coords[i] = 0;
            }
        }
        out
    }

    /// Sums out every axis not named in `keep`. Axis order is preserved.
    pub fn marginalize(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidParameter(
                "marginalize needs at least one axis to keep".into(),
            ));
        }
        let mask = self.mask(keep)?;
        let axes = self
            .axes
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(a, _)| a.clone())
            .collect();
        Ok(Self {
            axes,
            probs: self.marginal_masses(&mask),
        })
    }

    /// Joint entropy `H(of)`. An empty set has entropy zero.
    pub fn entropy(&self, of: &[&str]) -> Result<T> {
        let mask = self.mask(of)?;
        if !mask.iter().any(|&m| m) {
            return Ok(T::zero());
        }
        Ok(entropy_of_masses(self.marginal_masses(&mask)))
    }

    /// `H(target | given) = H(target, given) - H(given)`.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<T> {
        ensure_disjoint(&[target, given])?;
        let joint = self.entropy(&union(&[target, given]))?;
        let cond = self.entropy(given)?;
        Ok((joint - cond).max(T::zero()))
    }

    /// `I(x; y) = H(x) + H(y) - H(x, y)`, clamped at zero.
    pub fn mutual_information(&self, x: &[&str], y: &[&str]) -> Result<T> {
        ensure_disjoint(&[x, y])?;
        let hx = self.entropy(x)?;
        let hy = self.entropy(y)?;
        let hxy = self.entropy(&union(&[x, y]))?;
        Ok((hx + hy - hxy).max(T::zero()))
    }

    /// `I(x; y | z) = [H(x,z) - H(x,y,z)] + [H(y,z) - H(z)]`, clamped at zero.
    pub fn conditional_mutual_information(
        &self,
        x: &[&str],
        y: &[&str],
        z: &[&str],
    ) -> Result<T> {
        ensure_disjoint(&[x, y, z])?;
        let hxz = self.entropy(&union(&[x, z]))?;
        let hxyz = self.entropy(&union(&[x, y, z]))?;
        let hyz = self.entropy(&union(&[y, z]))?;
        let hz = self.entropy(z)?;
        Ok(((hxz - hxyz) + (hyz - hz)).max(T::zero()))
    }
}

/// `-Σ p ln p` over the nonzero masses, summed smallest first.
pub fn entropy_of_masses<T: Scalar>(mut masses: Vec<T>) -> T {
    masses.retain(|p| *p > T::zero());
    masses.sort_by(|a, b| a.partial_cmp(b).expect("finite masses"));
    masses
        .into_iter()
        .fold(T::zero(), |acc, p| acc - p * p.ln())
}

fn validate_axes(axes: &[Axis]) -> Result<()> {
    if axes.is_empty() {
        return Err(Error::InvalidTable("table needs at least one axis".into()));
    }
    let mut seen = HashSet::new();
    for axis in axes {
        if axis.cardinality < 2 {
            return Err(Error::InvalidTable(format!(
                "axis `{}` has cardinality {} (< 2)",
                axis.name, axis.cardinality
            )));
        }
        if !seen.insert(axis.name.as_str()) {
            return Err(Error::InvalidTable(format!(
                "duplicate axis `{}`",
                axis.name
            )));
        }
    }
    Ok(())
}

fn ensure_disjoint(sets: &[&[&str]]) -> Result<()> {
    let mut seen = HashSet::new();
    for set in sets {
        for name in *set {
            if !seen.insert(*name) {
                return Err(Error::OverlappingAxes(name.to_string()));
            }
        }
    }
    Ok(())
}

fn union<'a>(sets: &[&[&'a str]]) -> Vec<&'a str> {
    sets.iter().flat_map(|s| s.iter().copied()).collect()
}
