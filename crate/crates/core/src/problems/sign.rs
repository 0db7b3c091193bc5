//! Product sign constraints between coordinates of different blocks.
//!
//! An edge `(a, u) ~ (b, v)` requires `x_{a,u}·x_{b,v} ≥ 0` (agree) or
//! `≤ 0` (disagree). With the partner coordinate held fixed at `p`, the
//! feasible set of the free coordinate is a half-line, or everything when
//! `p = 0`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::Vector;
use crate::subsolvers::CoordConstraint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// product ≥ 0
    Agree,
    /// product ≤ 0
    Disagree,
}

impl Polarity {
    pub fn flipped(self) -> Self {
        match self {
            Polarity::Agree => Polarity::Disagree,
            Polarity::Disagree => Polarity::Agree,
        }
    }
}

/// `(block, coordinate)`
pub type Coord = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignEdge {
    pub a: Coord,
    pub b: Coord,
    pub polarity: Polarity,
}

impl SignEdge {
    pub fn agree(a: Coord, b: Coord) -> Self {
        SignEdge {
            a,
            b,
            polarity: Polarity::Agree,
        }
    }

    pub fn disagree(a: Coord, b: Coord) -> Self {
        SignEdge {
            a,
            b,
            polarity: Polarity::Disagree,
        }
    }

    /// Constraint value: feasible iff `≤ 0`.
    pub fn value(&self, x: &[Vector]) -> f64 {
        let prod = x[self.a.0][self.a.1] * x[self.b.0][self.b.1];
        match self.polarity {
            Polarity::Agree => -prod,
            Polarity::Disagree => prod,
        }
    }
}

/// Feasible set of a coordinate whose edge partner currently equals `partner`.
pub fn sign_requirement(partner: f64, polarity: Polarity) -> CoordConstraint {
    let same = if partner > 0.0 {
        CoordConstraint::NonNegative
    } else if partner < 0.0 {
        CoordConstraint::NonPositive
    } else {
        return CoordConstraint::Free;
    };
    match polarity {
        Polarity::Agree => same,
        Polarity::Disagree => same.flipped(),
    }
}

/// A validated edge set with per-block incidence lists.
#[derive(Debug, Clone, Default)]
pub struct SignConstraints {
    edges: Vec<SignEdge>,
    /// block → (own coordinate, partner, polarity)
    incident: Vec<Vec<(usize, Coord, Polarity)>>,
}

impl SignConstraints {
    pub fn new(block_dims: &[usize], edges: Vec<SignEdge>) -> Result<Self> {
        let mut seen: HashMap<(Coord, Coord), Polarity> = HashMap::new();
        let mut incident = vec![Vec::new(); block_dims.len()];
        for e in &edges {
            for (blk, coord) in [e.a, e.b] {
                if blk >= block_dims.len() || coord >= block_dims[blk] {
                    return Err(Error::InvalidConfig(format!(
                        "edge endpoint ({blk}, {coord}) out of range"
                    )));
                }
            }
            if e.a == e.b {
                return Err(Error::InvalidConfig(format!(
                    "self-loop on coordinate {:?}",
                    e.a
                )));
            }
            if e.a.0 == e.b.0 {
                // both ends in one block would make the block subproblem nonconvex
                return Err(Error::InvalidConfig(format!(
                    "edge {:?} ~ {:?} joins two coordinates of the same block",
                    e.a, e.b
                )));
            }
            let key = if e.a <= e.b { (e.a, e.b) } else { (e.b, e.a) };
            match seen.get(&key) {
                Some(p) if *p != e.polarity => {
                    return Err(Error::InconsistentEdge(format!(
                        "{:?} ~ {:?} appears with both polarities",
                        e.a, e.b
                    )))
                }
                Some(_) => continue,
                None => {
                    seen.insert(key, e.polarity);
                }
            }
            incident[e.a.0].push((e.a.1, e.b, e.polarity));
            incident[e.b.0].push((e.b.1, e.a, e.polarity));
        }
        Ok(SignConstraints { edges, incident })
    }

    pub fn edges(&self) -> &[SignEdge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Per-coordinate feasible sets of `block` given the current values of
    /// every other block. Conflicting requirements collapse to `FixedZero`.
    pub fn coord_constraints(&self, block: usize, dim: usize, x: &[Vector]) -> Vec<CoordConstraint> {
        let mut out = vec![CoordConstraint::Free; dim];
        for &(own, (pb, pc), polarity) in &self.incident[block] {
            out[own] = out[own].intersect(sign_requirement(x[pb][pc], polarity));
        }
        out
    }

    pub fn values(&self, x: &[Vector]) -> Vec<f64> {
        self.edges.iter().map(|e| e.value(x)).collect()
    }
}
