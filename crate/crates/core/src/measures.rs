//! Finite atomic measures, grid discretisation and 1-Wasserstein transport.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, is_finite, Point, PointKey};
use crate::transport::{self, TransportPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub pos: Point,
    pub mass: f64,
}

/// A finite sum of weighted Dirac masses in `R^dim`.
///
/// Masses are strictly positive and positions are distinct (bitwise);
/// duplicates are merged on construction, keeping first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn empty(dim: usize) -> Self {
        DiscreteMeasure { dim, atoms: Vec::new() }
    }

    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut index: HashMap<PointKey, usize> = HashMap::new();
        for (i, atom) in atoms.into_iter().enumerate() {
            if atom.pos.len() != dim {
                return Err(Error::invalid(
                    format!("atom {i}"),
                    format!("position has {} coordinates, expected {dim}", atom.pos.len()),
                ));
            }
            if !is_finite(&atom.pos) {
                return Err(Error::invalid(format!("atom {i}"), "position is not finite"));
            }
            if !atom.mass.is_finite() || atom.mass <= 0.0 {
                return Err(Error::invalid(
                    format!("atom {i}"),
                    format!("mass must be positive and finite, got {}", atom.mass),
                ));
            }
            match index.get(&PointKey::of(&atom.pos)) {
                Some(&k) => merged[k].mass += atom.mass,
                None => {
                    index.insert(PointKey::of(&atom.pos), merged.len());
                    merged.push(atom);
                }
            }
        }
        Ok(DiscreteMeasure { dim, atoms: merged })
    }

    /// Convenience constructor from `(position, mass)` pairs.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (Point, f64)>) -> Result<Self> {
        Self::new(dim, pairs.into_iter().map(|(pos, mass)| Atom { pos, mass }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.iter().map(|a| a.pos.as_slice())
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).collect()
    }

    /// Mass of the atom at exactly `p`, or zero.
    pub fn mass_at(&self, p: &[f64]) -> f64 {
        let key = PointKey::of(p);
        self.atoms
            .iter()
            .find(|a| PointKey::of(&a.pos) == key)
            .map_or(0.0, |a| a.mass)
    }

    pub fn total_mass(&self) -> f64 {
        total_mass(self)
    }
}

/// Sum of atom masses in storage order.
pub fn total_mass(mu: &DiscreteMeasure) -> f64 {
    mu.atoms.iter().map(|a| a.mass).sum()
}

/// Pushes every atom to the lower corner `h * floor(x / h)` of its half-open
/// grid cell and merges atoms landing in the same cell.
pub fn grid_discretize(mu: &DiscreteMeasure, h: f64) -> Result<DiscreteMeasure> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {h}")));
    }
    let atoms = mu
        .atoms
        .iter()
        .map(|a| Atom {
            pos: a.pos.iter().map(|&x| h * (x / h).floor()).collect(),
            mass: a.mass,
        })
        .collect();
    DiscreteMeasure::new(mu.dim, atoms)
}

pub(crate) fn check_balanced(plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Result<()> {
    if plus.dim != minus.dim {
        return Err(Error::DimensionMismatch { expected: plus.dim, found: minus.dim });
    }
    let (p, m) = (plus.total_mass(), minus.total_mass());
    if (p - m).abs() > 1e-9 * p.max(m) {
        return Err(Error::MassMismatch { plus: p, minus: m });
    }
    Ok(())
}

/// Transport problem between two balanced measures for an arbitrary
/// nonnegative ground cost given as a row-major matrix.
pub fn transport_with_costs(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    cost: &[f64],
) -> Result<(f64, TransportPlan)> {
    check_balanced(plus, minus)?;
    Ok(transport::solve(&plus.masses(), &minus.masses(), cost))
}

/// Euclidean cost matrix between the atoms of two measures, row-major.
pub fn euclidean_costs(plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Vec<f64> {
    let mut cost = Vec::with_capacity(plus.len() * minus.len());
    for a in &plus.atoms {
        for b in &minus.atoms {
            cost.push(dist(&a.pos, &b.pos));
        }
    }
    cost
}

/// Exact 1-Wasserstein distance with Euclidean ground cost, with an optimal plan.
pub fn wasserstein1(plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    let cost = euclidean_costs(plus, minus);
    transport_with_costs(plus, minus, &cost)
}
