//! Problem data: dimension, exponent, coefficient fields `J` and `V`, and the domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::check_exponent;

/// Axis-aligned box or ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl DomainSpec {
    pub fn unit_box(dim: usize) -> Self {
        DomainSpec::Box {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Box { lower, .. } => lower.len(),
            DomainSpec::Ball { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::UnsupportedShape("box bounds must be nonempty and of equal length".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::UnsupportedShape("box has an empty interior".into()));
                }
            }
            DomainSpec::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::UnsupportedShape("ball needs a center and a positive radius".into()));
                }
            }
        }
        Ok(())
    }

    /// Strict interior membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            DomainSpec::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(x, (l, u))| x > l && x < u),
            DomainSpec::Ball { center, radius } => dist2(x, center) < radius * radius,
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Box { lower, upper } => (lower.clone(), upper.clone()),
            DomainSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match self {
            DomainSpec::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
            DomainSpec::Ball { radius, .. } => {
                let n = self.dim();
                crate::ground_state::unit_sphere_area(n) * radius.powi(n as i32) / n as f64
            }
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| (x - l).min(u - x))
                .fold(f64::INFINITY, f64::min),
            DomainSpec::Ball { center, radius } => radius - dist2(x, center).sqrt(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

/// Built-in coefficient fields with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientField {
    Constant {
        value: f64,
    },
    /// `base + curvature * |x - center|²`
    QuadraticWell {
        base: f64,
        center: Vec<f64>,
        curvature: f64,
    },
    /// `base + Σ amplitude * exp(-|x - center|² / (2 width²))`
    GaussianBumps {
        base: f64,
        bumps: Vec<GaussianBump>,
    },
    /// `Σ coefficient * Π x_d^{powers_d}`
    Polynomial {
        terms: Vec<Monomial>,
    },
}

impl CoefficientField {
    pub fn constant(value: f64) -> Self {
        CoefficientField::Constant { value }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let bad = match self {
            CoefficientField::Constant { .. } => false,
            CoefficientField::QuadraticWell { center, .. } => center.len() != dim,
            CoefficientField::GaussianBumps { bumps, .. } => {
                bumps.iter().any(|b| b.center.len() != dim || !(b.width > 0.0))
            }
            CoefficientField::Polynomial { terms } => terms.iter().any(|t| t.powers.len() != dim),
        };
        if bad {
            Err(Error::InvalidInput(format!("coefficient field does not match dimension {dim}")))
        } else {
            Ok(())
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            CoefficientField::Constant { value } => *value,
            CoefficientField::QuadraticWell { base, center, curvature } => base + curvature * dist2(x, center),
            CoefficientField::GaussianBumps { base, bumps } => {
                base + bumps.iter().map(|b| b.eval(x)).sum::<f64>()
            }
            CoefficientField::Polynomial { terms } => terms
                .iter()
                .map(|t| t.coefficient * t.powers.iter().zip(x).map(|(k, x)| x.powi(*k as i32)).product::<f64>())
                .sum(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        match self {
            CoefficientField::Constant { .. } => vec![0.0; n],
            CoefficientField::QuadraticWell { center, curvature, .. } => {
                x.iter().zip(center).map(|(x, c)| 2.0 * curvature * (x - c)).collect()
            }
            CoefficientField::GaussianBumps { bumps, .. } => {
                let mut g = vec![0.0; n];
                for b in bumps {
                    let v = b.eval(x);
                    for d in 0..n {
                        g[d] -= v * (x[d] - b.center[d]) / (b.width * b.width);
                    }
                }
                g
            }
            CoefficientField::Polynomial { terms } => {
                let mut g = vec![0.0; n];
                for t in terms {
                    for (d, gd) in g.iter_mut().enumerate() {
                        if t.powers[d] == 0 {
                            continue;
                        }
                        let mut prod = t.coefficient * t.powers[d] as f64;
                        for (e, (k, xe)) in t.powers.iter().zip(x).enumerate() {
                            let k = if e == d { *k as i32 - 1 } else { *k as i32 };
                            prod *= xe.powi(k);
                        }
                        *gd += prod;
                    }
                }
                g
            }
        }
    }

    /// Row-major `n × n` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut h = vec![0.0; n * n];
        match self {
            CoefficientField::Constant { .. } => {}
            CoefficientField::QuadraticWell { curvature, .. } => {
                for d in 0..n {
                    h[d * n + d] = 2.0 * curvature;
                }
            }
            CoefficientField::GaussianBumps { bumps, .. } => {
                for b in bumps {
                    let v = b.eval(x);
                    let s2 = b.width * b.width;
                    for i in 0..n {
                        for j in 0..n {
                            let dij = if i == j { 1.0 } else { 0.0 };
                            h[i * n + j] +=
                                v * ((x[i] - b.center[i]) * (x[j] - b.center[j]) / (s2 * s2) - dij / s2);
                        }
                    }
                }
            }
            CoefficientField::Polynomial { terms } => {
                for t in terms {
                    for i in 0..n {
                        for j in 0..n {
                            let mut pw: Vec<i32> = t.powers.iter().map(|k| *k as i32).collect();
                            let mut c = t.coefficient * pw[i] as f64;
                            pw[i] -= 1;
                            c *= pw[j] as f64;
                            pw[j] -= 1;
                            if c == 0.0 {
                                continue;
                            }
                            h[i * n + j] += c * pw.iter().zip(x).map(|(k, x)| x.powi(*k)).product::<f64>();
                        }
                    }
                }
            }
        }
        h
    }
}

impl GaussianBump {
    fn eval(&self, x: &[f64]) -> f64 {
        self.amplitude * (-dist2(x, &self.center) / (2.0 * self.width * self.width)).exp()
    }
}

/// Everything that defines the continuous problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemData {
    pub dim: usize,
    pub exponent: f64,
    pub j: CoefficientField,
    pub v: CoefficientField,
    pub domain: DomainSpec,
}

/// Bounds of the coefficients over a set of sample points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub j_min: f64,
    pub j_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Largest absolute Hessian entry of `J` over the samples.
    pub j_hess_max: f64,
    pub v_hess_max: f64,
}

impl ProblemData {
    pub fn new(dim: usize, exponent: f64, j: CoefficientField, v: CoefficientField, domain: DomainSpec) -> Result<Self> {
        let data = Self {
            dim,
            exponent,
            j,
            v,
            domain,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.dim, self.exponent)?;
        self.domain.validate()?;
        if self.domain.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "domain has dimension {} but the problem has dimension {}",
                self.domain.dim(),
                self.dim
            )));
        }
        self.j.check_dim(self.dim)?;
        self.v.check_dim(self.dim)?;
        Ok(())
    }

    /// Exponent of `V` in the auxiliary function: `(p+1)/(p-1) - N/2`.
    pub fn theta(&self) -> f64 {
        (self.exponent + 1.0) / (self.exponent - 1.0) - self.dim as f64 / 2.0
    }

    /// `(J(x), V(x))`, failing if either is not positive.
    pub fn coefficients_at(&self, x: &[f64]) -> Result<(f64, f64)> {
        let j = self.j.value(x);
        if !(j > 0.0) {
            return Err(Error::NonpositiveCoefficient {
                which: "J",
                point: x.to_vec(),
                value: j,
            });
        }
        let v = self.v.value(x);
        if !(v > 0.0) {
            return Err(Error::NonpositiveCoefficient {
                which: "V",
                point: x.to_vec(),
                value: v,
            });
        }
        Ok((j, v))
    }

    /// Check positivity and boundedness on sample points and report the bounds.
    pub fn coefficient_bounds<'a, I>(&self, points: I) -> Result<CoefficientBounds>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut b = CoefficientBounds {
            j_min: f64::INFINITY,
            j_max: f64::NEG_INFINITY,
            v_min: f64::INFINITY,
            v_max: f64::NEG_INFINITY,
            j_hess_max: 0.0,
            v_hess_max: 0.0,
        };
        for x in points {
            let (j, v) = self.coefficients_at(x)?;
            b.j_min = b.j_min.min(j);
            b.j_max = b.j_max.max(j);
            b.v_min = b.v_min.min(v);
            b.v_max = b.v_max.max(v);
            let hj = self.j.hessian(x).iter().fold(0.0_f64, |m, h| m.max(h.abs()));
            let hv = self.v.hessian(x).iter().fold(0.0_f64, |m, h| m.max(h.abs()));
            b.j_hess_max = b.j_hess_max.max(hj);
            b.v_hess_max = b.v_hess_max.max(hv);
        }
        if !(b.j_max.is_finite() && b.v_max.is_finite() && b.j_hess_max.is_finite() && b.v_hess_max.is_finite()) {
            return Err(Error::InvalidInput("coefficients are unbounded on the samples".into()));
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &CoefficientField, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|d| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[d] += h;
                b[d] -= h;
                (f.value(&a) - f.value(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn fields() -> Vec<CoefficientField> {
        vec![
            CoefficientField::QuadraticWell {
                base: 1.0,
                center: vec![0.5, 0.4],
                curvature: 2.0,
            },
            CoefficientField::GaussianBumps {
                base: 1.5,
                bumps: vec![
                    GaussianBump {
                        center: vec![0.3, 0.5],
                        amplitude: -0.5,
                        width: 0.12,
                    },
                    GaussianBump {
                        center: vec![0.7, 0.5],
                        amplitude: 0.3,
                        width: 0.2,
                    },
                ],
            },
            CoefficientField::Polynomial {
                terms: vec![
                    Monomial {
                        coefficient: 1.0,
                        powers: vec![0, 0],
                    },
                    Monomial {
                        coefficient: 0.7,
                        powers: vec![2, 1],
                    },
                    Monomial {
                        coefficient: -0.2,
                        powers: vec![0, 3],
                    },
                ],
            },
        ]
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let x = [0.37, 0.61];
        for f in fields() {
            let g = f.gradient(&x);
            let fd = fd_gradient(&f, &x);
            for d in 0..2 {
                assert!((g[d] - fd[d]).abs() < 1e-7 * (1.0 + g[d].abs()), "{f:?}");
            }
            let h = f.hessian(&x);
            for d in 0..2 {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[d] += 1e-5;
                b[d] -= 1e-5;
                let (ga, gb) = (f.gradient(&a), f.gradient(&b));
                for e in 0..2 {
                    let fd = (ga[e] - gb[e]) / 2e-5;
                    assert!((h[e * 2 + d] - fd).abs() < 1e-5 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn domain_queries() {
        let b = DomainSpec::Box {
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 3.0],
        };
        assert_eq!(b.measure(), 6.0);
        assert!(b.contains(&[1.0, 1.0]));
        assert!(!b.contains(&[0.0, 1.0]));
        assert_eq!(b.boundary_distance(&[0.5, 2.0]), 0.5);
        let ball = DomainSpec::Ball {
            center: vec![0.0, 0.0],
            radius: 2.0,
        };
        assert!((ball.measure() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!(!ball.contains(&[1.5, 1.5]));
        assert!(DomainSpec::Box {
            lower: vec![0.0],
            upper: vec![0.0]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn nonpositive_coefficients_reported() {
        let data = ProblemData::new(
            2,
            3.0,
            CoefficientField::constant(1.0),
            CoefficientField::QuadraticWell {
                base: -0.1,
                center: vec![0.5, 0.5],
                curvature: 1.0,
            },
            DomainSpec::unit_box(2),
        )
        .unwrap();
        let pts = [vec![0.0, 0.0], vec![0.5, 0.5]];
        let err = data.coefficient_bounds(pts.iter().map(|p| p.as_slice())).unwrap_err();
        assert!(matches!(err, Error::NonpositiveCoefficient { which: "V", .. }));
    }

    #[test]
    fn theta_values() {
        let mk = |dim: usize, p: f64| ProblemData {
            dim,
            exponent: p,
            j: CoefficientField::constant(1.0),
            v: CoefficientField::constant(1.0),
            domain: DomainSpec::unit_box(dim),
        };
        assert_eq!(mk(3, 3.0).theta(), 0.5);
        assert_eq!(mk(2, 3.0).theta(), 1.0);
        assert!(ProblemData::new(3, 5.0, CoefficientField::constant(1.0), CoefficientField::constant(1.0), DomainSpec::unit_box(3)).is_err());
    }
}
