//! The scaled spike `U^Q(x) = V(Q)^{1/(p-1)} Ū(|x - Q| √(V(Q)/J(Q)) / ε)` on
//! the original-variable grid, and its translation tangent space.

use std::sync::Arc;

use crate::dense;
use crate::discretization::{DiscreteField, DomainGrid, OperatorMatrix};
use crate::error::{Error, Result};
use crate::ground_state::RadialProfile;
use crate::par;
use crate::problem::{dist2, ProblemData};

/// A spike of the limiting problem frozen at its center `Q`.
#[derive(Debug, Clone)]
pub struct SpikeProfile {
    pub center: Vec<f64>,
    /// `V(Q)^{1/(p-1)}`
    pub amplitude: f64,
    /// `√(V(Q)/J(Q))`
    pub inv_length: f64,
    pub base: Arc<RadialProfile>,
    pub epsilon: f64,
}

impl SpikeProfile {
    /// Spatial length scale `ε √(J(Q)/V(Q))`.
    pub fn length_scale(&self) -> f64 {
        self.epsilon / self.inv_length
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        let r = dist2(x, &self.center).sqrt() * self.inv_length / self.epsilon;
        self.amplitude * self.base.value(r)
    }

    /// Same amplitude and length scale, center moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> SpikeProfile {
        let mut out = self.clone();
        for (c, s) in out.center.iter_mut().zip(shift) {
            *c += s;
        }
        out
    }

    pub fn with_epsilon(&self, eps: f64) -> SpikeProfile {
        SpikeProfile {
            epsilon: eps,
            ..self.clone()
        }
    }
}

/// Build the spike centered at `q` for the coefficients of `data`.
pub fn scaled_profile(q: &[f64], data: &ProblemData, base: Arc<RadialProfile>, eps: f64) -> Result<SpikeProfile> {
    if base.dim != data.dim || base.exponent != data.exponent {
        return Err(Error::InvalidInput("ground state does not match the problem's (N, p)".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {eps}")));
    }
    if q.len() != data.dim || !data.domain.contains(q) {
        return Err(Error::OutsideDomain { point: q.to_vec() });
    }
    let (j, v) = data.coefficients_at(q)?;
    Ok(SpikeProfile {
        center: q.to_vec(),
        amplitude: v.powf(1.0 / (data.exponent - 1.0)),
        inv_length: (v / j).sqrt(),
        base,
        epsilon: eps,
    })
}

/// Fails with `Unresolved` when the spike's length scale is under three grid spacings.
pub fn check_resolution(prof: &SpikeProfile, grid: &DomainGrid) -> Result<()> {
    let spacing = grid.max_spacing();
    let length_scale = prof.length_scale();
    if length_scale < 3.0 * spacing {
        return Err(Error::Unresolved { length_scale, spacing });
    }
    Ok(())
}

/// Nodal samples of the spike, refusing unresolved spikes.
pub fn evaluate_ansatz(prof: &SpikeProfile, grid: &DomainGrid) -> Result<DiscreteField> {
    check_resolution(prof, grid)?;
    Ok(sample_ansatz(prof, grid))
}

/// Nodal samples of the spike without the resolution guard.
pub fn sample_ansatz(prof: &SpikeProfile, grid: &DomainGrid) -> DiscreteField {
    DiscreteField(par::map_collect(grid.n_nodes(), |i| prof.value_at(grid.coord(i))))
}

/// Inner product used on the tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerProduct {
    /// `∫ u v`
    L2,
    /// The quadratic part of the energy, `∫ ε² J ∇u·∇v + V u v`.
    #[default]
    Energy,
}

impl InnerProduct {
    /// Original-variable inner product; multiply by `ε^{-N}` for rescaled units.
    pub fn eval(self, op: &OperatorMatrix, u: &[f64], v: &[f64]) -> f64 {
        match self {
            InnerProduct::L2 => op.mass_inner(u, v),
            InnerProduct::Energy => op.bilinear(u, v),
        }
    }

    /// `M v` or `A v`: the Riesz map of the inner product.
    pub fn apply(self, op: &OperatorMatrix, v: &[f64]) -> Vec<f64> {
        match self {
            InnerProduct::L2 => v.iter().zip(&op.mass).map(|(v, m)| v * m).collect(),
            InnerProduct::Energy => op.apply(v),
        }
    }
}

/// Finite-difference translation derivatives `∂_{P_i} U_P`, `P = Q/ε`.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    pub fields: Vec<DiscreteField>,
    pub inner: InnerProduct,
    /// Row-major Gram matrix in rescaled units.
    pub gram: Vec<f64>,
    pub condition: f64,
}

impl TangentBasis {
    pub fn dim(&self) -> usize {
        self.fields.len()
    }
}

/// Gram condition number beyond which the basis is rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Centered differences of the translate with step `h` in `Q`; the `i`-th
/// field is `ε (U(Q + h e_i) - U(Q - h e_i)) / (2h)`, the derivative with
/// respect to the rescaled center `P = Q/ε`.
pub fn tangent_basis(prof: &SpikeProfile, grid: &DomainGrid, h: f64, op: &OperatorMatrix, inner: InnerProduct) -> Result<TangentBasis> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("difference step must be positive, got {h}")));
    }
    let dim = grid.dim();
    let eps = prof.epsilon;
    let fields: Vec<DiscreteField> = (0..dim)
        .map(|i| {
            let mut shift = vec![0.0; dim];
            shift[i] = h;
            let plus = prof.translated(&shift);
            shift[i] = -h;
            let minus = prof.translated(&shift);
            DiscreteField(par::map_collect(grid.n_nodes(), |k| {
                let x = grid.coord(k);
                eps * (plus.value_at(x) - minus.value_at(x)) / (2.0 * h)
            }))
        })
        .collect();
    let scale = eps.powi(-(dim as i32));
    let mut gram = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let g = scale * inner.eval(op, &fields[i], &fields[j]);
            gram[i * dim + j] = g;
            gram[j * dim + i] = g;
        }
    }
    let condition = dense::condition_number(&gram, dim);
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::DegenerateBasis { condition });
    }
    Ok(TangentBasis {
        fields,
        inner,
        gram,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, build_grid};
    use crate::ground_state::{profile_moments, solve_ground_state};
    use crate::problem::{CoefficientField, DomainSpec};
    use std::sync::OnceLock;

    fn ground(dim: usize) -> Arc<RadialProfile> {
        static G1: OnceLock<Arc<RadialProfile>> = OnceLock::new();
        static G2: OnceLock<Arc<RadialProfile>> = OnceLock::new();
        let cell = if dim == 1 { &G1 } else { &G2 };
        cell.get_or_init(|| Arc::new(solve_ground_state(dim, 3.0, 1e-10).unwrap())).clone()
    }

    fn constant_data(dim: usize, j: f64, v: f64) -> ProblemData {
        ProblemData::new(dim, 3.0, CoefficientField::constant(j), CoefficientField::constant(v), DomainSpec::unit_box(dim)).unwrap()
    }

    #[test]
    fn scaling_examples() {
        let base = ground(1);
        let p = scaled_profile(&[0.5], &constant_data(1, 1.0, 4.0), base.clone(), 0.1).unwrap();
        assert!((p.amplitude - 2.0).abs() < 1e-15);
        assert!((p.inv_length - 2.0).abs() < 1e-15);
        assert!((p.value_at(&[0.5]) - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        let x = 0.5 + 0.03;
        assert!((p.value_at(&[x]) - 2.0 * base.value(2.0 * 0.03 / 0.1)).abs() < 1e-15);
        let id = scaled_profile(&[0.5], &constant_data(1, 1.0, 1.0), base.clone(), 1.0).unwrap();
        assert!((id.value_at(&[0.5 + 0.7]) - base.value(0.7)).abs() < 1e-15);
        assert!(matches!(
            scaled_profile(&[1.5], &constant_data(1, 1.0, 1.0), base, 0.1),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn homogeneity_in_coefficients() {
        let base = ground(2);
        let t = 3.0;
        let a = scaled_profile(&[0.5, 0.5], &constant_data(2, 1.3, 0.7), base.clone(), 0.2).unwrap();
        let b = scaled_profile(&[0.5, 0.5], &constant_data(2, 1.3 * t, 0.7 * t), base, 0.2).unwrap();
        assert!((b.amplitude / a.amplitude - t.powf(0.5)).abs() < 1e-14);
        assert!((b.inv_length - a.inv_length).abs() < 1e-15);
    }

    #[test]
    fn resolution_guard_and_tail() {
        let base = ground(2);
        let data = constant_data(2, 1.0, 1.0);
        let grid = build_grid(&data.domain, &[32, 32]).unwrap();
        let p = scaled_profile(&[0.5, 0.5], &data, base.clone(), 0.05).unwrap();
        assert!(matches!(evaluate_ansatz(&p, &grid), Err(Error::Unresolved { .. })));
        let p = scaled_profile(&[0.5, 0.5], &data, base, 0.02).unwrap();
        let far = p.value_at(&[0.5 + 40.0 * 0.02, 0.5]);
        assert!(far < 1e-10 * p.amplitude && far >= 0.0);
    }

    #[test]
    fn l2_norm_matches_change_of_variables() {
        let base = ground(2);
        let m = profile_moments(&base);
        let data = constant_data(2, 1.0, 1.0);
        let grid = build_grid(&data.domain, &[161, 161]).unwrap();
        let eps = 0.08;
        let p = scaled_profile(&[0.5, 0.5], &data, base, eps).unwrap();
        let u = evaluate_ansatz(&p, &grid).unwrap();
        let l2 = par::sum(grid.n_nodes(), |i| grid.weights[i] * u[i] * u[i]);
        let expect = eps * eps * m.m_sq;
        assert!((l2 / expect - 1.0).abs() < 0.01, "{l2} vs {expect}");
    }

    #[test]
    fn tangent_basis_symmetry_and_parity() {
        let base = ground(2);
        let data = constant_data(2, 1.0, 1.0);
        let grid = build_grid(&data.domain, &[65, 65]).unwrap();
        let eps = 0.1;
        let op = assemble(&grid, &data, eps).unwrap();
        let p = scaled_profile(&[0.5, 0.5], &data, base, eps).unwrap();
        let t = tangent_basis(&p, &grid, 1e-3 * eps, &op, InnerProduct::Energy).unwrap();
        assert!(t.gram[1].abs() < 1e-6 * t.gram[0], "{:?}", t.gram);
        assert!((t.gram[0] / t.gram[3] - 1.0).abs() < 1e-10);
        let u = sample_ansatz(&p, &grid);
        for f in &t.fields {
            let s: f64 = par::sum(grid.n_nodes(), |i| grid.weights[i] * f[i]);
            let ip = op.mass_inner(f, &u);
            let scale = op.mass_inner(f, f).sqrt() * op.mass_inner(&u, &u).sqrt();
            assert!(s.abs() < 1e-10 && ip.abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn tangent_basis_h_refinement() {
        let base = ground(2);
        let data = constant_data(2, 1.0, 1.0);
        let grid = build_grid(&data.domain, &[41, 41]).unwrap();
        let eps = 0.15;
        let op = assemble(&grid, &data, eps).unwrap();
        let p = scaled_profile(&[0.47, 0.52], &data, base, eps).unwrap();
        let at = |h: f64| tangent_basis(&p, &grid, h, &op, InnerProduct::L2).unwrap().fields[0].0.clone();
        let (h0, h1, h2) = (0.04, 0.02, 0.01);
        let (f0, f1, f2) = (at(h0), at(h1), at(h2));
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let slope = (d(&f0, &f1) / d(&f1, &f2)).log2();
        assert!(slope >= 1.8, "slope {slope}");
        let _ = h2;
    }
}
