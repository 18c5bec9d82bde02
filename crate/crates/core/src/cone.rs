//! Convex cones with vertex at the origin.
//!
//! Every supported cone is an intersection of open half-spaces
//! `{x : ν·x > 0}` through the origin, so `x·η = 0` holds on every smooth
//! boundary facet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to decide whether a point sits on a facet.
pub const FACET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cone {
    FullSpace {
        dim: usize,
    },
    /// `{x : x_k > 0 for k in axes}`.
    Orthant {
        dim: usize,
        axes: Vec<usize>,
    },
    /// `{x : normal·x > 0}`.
    Halfspace {
        normal: Vec<f64>,
    },
    /// Intersection of the factor cones (all of the same dimension).
    Product {
        factors: Vec<Cone>,
    },
}

impl Cone {
    pub fn full(dim: usize) -> Self {
        Cone::FullSpace { dim }
    }

    pub fn orthant(dim: usize, axes: &[usize]) -> Self {
        let mut axes = axes.to_vec();
        axes.sort_unstable();
        axes.dedup();
        Cone::Orthant { dim, axes }
    }

    pub fn dim(&self) -> usize {
        match self {
            Cone::FullSpace { dim } | Cone::Orthant { dim, .. } => *dim,
            Cone::Halfspace { normal } => normal.len(),
            Cone::Product { factors } => factors.first().map_or(0, Cone::dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Cone::FullSpace { dim } if *dim == 0 => Err(Error::Config("cone dimension 0".into())),
            Cone::FullSpace { .. } => Ok(()),
            Cone::Orthant { dim, axes } => {
                if *dim == 0 {
                    return Err(Error::Config("cone dimension 0".into()));
                }
                if let Some(k) = axes.iter().find(|&&k| k >= *dim) {
                    return Err(Error::Config(format!("orthant axis {k} out of range for dim {dim}")));
                }
                Ok(())
            }
            Cone::Halfspace { normal } => {
                let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                if normal.is_empty() || !norm.is_finite() || norm == 0.0 {
                    return Err(Error::Config("halfspace normal must be a nonzero vector".into()));
                }
                Ok(())
            }
            Cone::Product { factors } => {
                let Some(first) = factors.first() else {
                    return Err(Error::Config("product cone needs at least one factor".into()));
                };
                for f in factors {
                    f.validate()?;
                    if f.dim() != first.dim() {
                        return Err(Error::Config("product cone factors differ in dimension".into()));
                    }
                }
                Ok(())
            }
        }
    }

    /// Unit inward normals ν of the facets, so that the cone is `{ν·x > 0}`.
    pub fn constraints(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        self.collect_constraints(&mut out);
        out
    }

    fn collect_constraints(&self, out: &mut Vec<Vec<f64>>) {
        let mut push = |v: Vec<f64>| {
            if !out.iter().any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-14)) {
                out.push(v);
            }
        };
        match self {
            Cone::FullSpace { .. } => {}
            Cone::Orthant { dim, axes } => {
                for &k in axes {
                    let mut v = vec![0.0; *dim];
                    v[k] = 1.0;
                    push(v);
                }
            }
            Cone::Halfspace { normal } => {
                let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                push(normal.iter().map(|v| v / norm).collect());
            }
            Cone::Product { factors } => {
                for f in factors {
                    for v in f.constraints() {
                        push(v);
                    }
                }
            }
        }
    }

    /// Axes carrying a coordinate facet, when every facet is a coordinate
    /// hyperplane. `None` for cones with oblique facets.
    pub fn orthant_axes(&self) -> Option<Vec<usize>> {
        let mut axes = Vec::new();
        for v in self.constraints() {
            let nz: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
            if nz.len() != 1 || v[nz[0]] != 1.0 {
                return None;
            }
            axes.push(nz[0]);
        }
        axes.sort_unstable();
        Some(axes)
    }

    pub fn has_boundary(&self) -> bool {
        !self.constraints().is_empty()
    }

    /// `x` in the closure, with facet tolerance.
    pub fn contains_closure(&self, x: &[f64]) -> bool {
        self.constraints().iter().all(|v| dot(v, x) >= -FACET_TOL)
    }

    /// `x` strictly inside, with facet tolerance.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        self.constraints().iter().all(|v| dot(v, x) > FACET_TOL)
    }

    /// True when every constraint of `other` is also a constraint of `self`,
    /// i.e. `self ⊆ other` for the cone family supported here.
    pub fn is_subcone_of(&self, other: &Cone) -> bool {
        let mine = self.constraints();
        other
            .constraints()
            .iter()
            .all(|v| mine.iter().any(|u| u.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-12)))
    }

    /// Outward unit normal at a boundary point lying on exactly one facet.
    pub fn boundary_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!(
                "point has dim {}, cone has dim {}",
                x.len(),
                self.dim()
            )));
        }
        let cons = self.constraints();
        if cons.is_empty() {
            return Err(Error::NoBoundary);
        }
        if !self.contains_closure(x) {
            return Err(Error::Domain(format!("point {x:?} outside the closed cone")));
        }
        let active: Vec<&Vec<f64>> = cons.iter().filter(|v| dot(v, x).abs() <= FACET_TOL).collect();
        match active.as_slice() {
            [] => Err(Error::NotOnBoundary(x.to_vec())),
            [v] => Ok(v.iter().map(|c| -c).collect()),
            _ => Err(Error::AmbiguousNormal(x.to_vec())),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
