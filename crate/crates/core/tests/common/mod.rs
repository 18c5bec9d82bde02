#![allow(dead_code)]

use conegauss::{Cone, Field, Measure, QuadratureTarget, Weight, WeightSpec};

pub struct Case {
    pub name: &'static str,
    pub weight: Weight,
    pub cone: Cone,
    /// Orthant axes; library fields must be even in these.
    pub even: Vec<usize>,
}

impl Case {
    pub fn new(name: &'static str, spec: WeightSpec) -> Self {
        let weight = Weight::new(spec).unwrap();
        let cone = weight.support().clone();
        let even = cone.orthant_axes().unwrap_or_default();
        Case {
            name,
            weight,
            cone,
            even,
        }
    }

    pub fn mu(&self) -> Measure {
        Measure::gaussian(self.weight.clone(), self.cone.clone(), QuadratureTarget::default()).unwrap()
    }

    pub fn nu(&self) -> Measure {
        Measure::lebesgue(self.weight.clone(), self.cone.clone(), QuadratureTarget::default()).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.weight.dim()
    }

    pub fn poly_gauss(&self, seed: u64) -> Field {
        Field::poly_gauss(self.dim(), seed, 3, None, &self.even)
    }
}

pub fn monomial(exponents: &[f64]) -> WeightSpec {
    WeightSpec::Monomial {
        exponents: exponents.to_vec(),
    }
}

pub fn partial(a: f64) -> WeightSpec {
    WeightSpec::PartialProduct {
        inner: Box::new(monomial(&[a])),
        free_coords: vec![1],
    }
}

/// Admissible homogeneous built-ins.
pub fn homogeneous() -> Vec<Case> {
    vec![
        Case::new("unit", WeightSpec::unit(2)),
        Case::new("abs_x1", monomial(&[1.0, 0.0])),
        Case::new("abs_x1_x2_sq", monomial(&[1.0, 2.0])),
        Case::new("radial_1d", WeightSpec::Radial { alpha: 1.0, dim: 1 }),
        Case::new(
            "dunkl_coordinate",
            WeightSpec::DunklProduct {
                roots: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                multiplicities: vec![0.5, 1.0],
            },
        ),
        Case::new("partial_1_5", partial(1.5)),
    ]
}

/// Every built-in kind with a deterministic rule on its support.
pub fn builtins() -> Vec<Case> {
    let mut v = homogeneous();
    v.push(Case::new("tilt_neg_half", WeightSpec::GaussianTilt { s: -0.5, dim: 2 }));
    v.push(Case::new("tilt_pos", WeightSpec::GaussianTilt { s: 0.7, dim: 1 }));
    v
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
