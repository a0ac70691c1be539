//! Energy, gradient and Newton solution of the discrete problem
//! `A u = M (u₊)^p`, with ε-continuation and spike location.
//!
//! All quantities live in original variables `x ∈ Ω`. The rescaled energy of
//! `ũ(y) = u(εy)` on `Ω/ε` is exactly `ε^{-N}` times the original one.

use std::sync::Arc;

use crate::discretization::{assemble, DiscreteField, DomainGrid, OperatorMatrix};
use crate::error::{Error, Result};
use crate::gamma::{self, GammaDerivatives, DEGENERACY_THRESHOLD};
use crate::ground_state::RadialProfile;
use crate::linalg::{minres, CsrMatrix, SparseLu};
use crate::par;
use crate::problem::{dist2, ProblemData};
use crate::profiles::{check_resolution, sample_ansatz, scaled_profile};

/// Newton and continuation settings.
#[derive(Debug, Clone)]
pub struct SolveParams {
    pub eps: f64,
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Smallest step fraction tried by the backtracking line search.
    pub min_damping: f64,
    /// Strictly decreasing ε values for [`continuation`].
    pub ladder: Vec<f64>,
    /// Solve even when the spike is narrower than three grid spacings.
    pub allow_unresolved: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            eps: 0.2,
            newton_tol: 1e-9,
            max_iters: 30,
            min_damping: 1.0 / 64.0,
            ladder: vec![0.4, 0.3, 0.2, 0.15, 0.1],
            allow_unresolved: false,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidInput("eps must be positive".into()));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidInput("newton_tol must be positive".into()));
        }
        if self.max_iters == 0 || !(self.min_damping > 0.0 && self.min_damping <= 1.0) {
            return Err(Error::InvalidInput("max_iters must be positive and min_damping in (0, 1]".into()));
        }
        validate_ladder(&self.ladder)
    }
}

/// A ladder must be nonempty, positive and strictly decreasing.
pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidInput("eps_ladder is empty".into()));
    }
    if ladder.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput("eps_ladder entries must be positive".into()));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps_ladder must be strictly decreasing".into()));
    }
    Ok(())
}

/// A converged discrete solution.
#[derive(Debug, Clone)]
pub struct SpikeSolution {
    pub u: DiscreteField,
    pub eps: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Residual norm after each Newton step, starting with the initial guess.
    pub history: Vec<f64>,
    pub location: Vec<f64>,
    pub height: f64,
    /// `f̃_ε(u)` in original variables.
    pub energy: f64,
    /// `ε^{-N} f̃_ε(u)`.
    pub rescaled_energy: f64,
}

/// Grid, coefficients and assembled operator at one ε.
#[derive(Debug)]
pub struct DiscreteProblem<'a> {
    pub grid: &'a DomainGrid,
    pub data: &'a ProblemData,
    pub op: OperatorMatrix,
}

fn positive_part_pow(u: f64, p: f64) -> f64 {
    if u > 0.0 {
        u.powf(p)
    } else {
        0.0
    }
}

impl<'a> DiscreteProblem<'a> {
    pub fn new(grid: &'a DomainGrid, data: &'a ProblemData, eps: f64) -> Result<Self> {
        let op = assemble(grid, data, eps)?;
        Ok(DiscreteProblem { grid, data, op })
    }

    pub fn eps(&self) -> f64 {
        self.op.eps
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    fn p(&self) -> f64 {
        self.data.exponent
    }

    /// `ε^{-N}`
    pub fn rescale(&self) -> f64 {
        self.eps().powi(-(self.data.dim as i32))
    }

    /// `½ uᵀAu − 1/(p+1) Σ w (u₊)^{p+1}`
    pub fn energy(&self, u: &[f64]) -> f64 {
        let p = self.p();
        let w = &self.op.mass;
        0.5 * self.op.bilinear(u, u) - par::sum(u.len(), |i| w[i] * positive_part_pow(u[i], p + 1.0)) / (p + 1.0)
    }

    pub fn rescaled_energy(&self, u: &[f64]) -> f64 {
        self.rescale() * self.energy(u)
    }

    /// `A u − M (u₊)^p`, the gradient of [`Self::energy`].
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let p = self.p();
        let w = &self.op.mass;
        let mut g = self.op.apply(u);
        par::fill_add(&mut g, |i| -w[i] * positive_part_pow(u[i], p));
        g
    }

    /// `A − p M diag((u₊)^{p−1})`
    pub fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        let p = self.p();
        let shift = par::map_collect(self.n(), |i| self.op.potential[i] - p * self.op.mass[i] * positive_part_pow(u[i], p - 1.0));
        self.op.flux.shift_diagonal(&shift)
    }

    /// The operator `A` itself as a sparse matrix.
    pub fn operator_matrix(&self) -> CsrMatrix {
        self.op.flux.shift_diagonal(&self.op.potential)
    }

    pub fn factor(&self, m: CsrMatrix) -> Result<SparseLu> {
        SparseLu::factor(m, self.grid.symbolic_cache())
    }

    /// Discrete `L²` norm of the strong residual, `√(Σ g_i² / w_i)`.
    pub fn residual_norm(&self, g: &[f64]) -> f64 {
        par::sum(g.len(), |i| g[i] * g[i] / self.op.mass[i]).sqrt()
    }

    /// Solve `J δ = rhs`, falling back to MINRES if the factorization fails.
    fn newton_direction(&self, jac: CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        match self.factor(jac.clone()).and_then(|lu| lu.solve(rhs)) {
            Ok(d) => Ok(d),
            Err(_) => Ok(minres(&jac, rhs, 1e-12, 20 * self.n())?.x),
        }
    }
}

/// `f̃_ε(u)` in original variables.
pub fn energy(u: &[f64], grid: &DomainGrid, data: &ProblemData, eps: f64) -> Result<f64> {
    Ok(DiscreteProblem::new(grid, data, eps)?.energy(u))
}

/// Gradient of `f̃_ε` at `u`.
pub fn gradient(u: &[f64], grid: &DomainGrid, data: &ProblemData, eps: f64) -> Result<DiscreteField> {
    Ok(DiscreteField(DiscreteProblem::new(grid, data, eps)?.gradient(u)))
}

/// Argmax node refined by a three-point parabola along each axis.
pub fn locate_spike(u: &[f64], grid: &DomainGrid) -> Result<Vec<f64>> {
    let field = DiscreteField(u.to_vec());
    let (node, peak) = field.argmax().ok_or(Error::FlatField)?;
    if !(peak > 0.0) {
        return Err(Error::FlatField);
    }
    let mut x = grid.coord(node).to_vec();
    for axis in 0..grid.dim() {
        let (Some(lo), Some(hi)) = (grid.neighbor(node, axis, false), grid.neighbor(node, axis, true)) else {
            continue;
        };
        let (a, b, c) = (u[lo], peak, u[hi]);
        let curvature = a - 2.0 * b + c;
        if curvature < 0.0 {
            let h = grid.spacing[axis];
            let offset = 0.5 * h * (a - c) / curvature;
            x[axis] += offset.clamp(-0.5 * h, 0.5 * h);
        }
    }
    Ok(x)
}

fn finish(problem: &DiscreteProblem<'_>, u: Vec<f64>, residual: f64, history: Vec<f64>) -> SpikeSolution {
    let energy = problem.energy(&u);
    let field = DiscreteField(u);
    let (location, height) = match locate_spike(&field, problem.grid) {
        Ok(x) => (x, field.max()),
        Err(_) => (vec![f64::NAN; problem.grid.dim()], field.max()),
    };
    SpikeSolution {
        eps: problem.eps(),
        residual,
        iterations: history.len().saturating_sub(1),
        history,
        location,
        height,
        energy,
        rescaled_energy: problem.rescale() * energy,
        u: field,
    }
}

/// Damped Newton from `u0`. `reference_height` (default: `max u0`) sets the
/// collapse threshold at 10% of itself.
pub fn newton_solve(u0: &[f64], problem: &DiscreteProblem<'_>, params: &SolveParams, reference_height: Option<f64>) -> Result<SpikeSolution> {
    let reference = reference_height.unwrap_or_else(|| DiscreteField(u0.to_vec()).max());
    let mut u = u0.to_vec();
    let mut g = problem.gradient(&u);
    let mut res = problem.residual_norm(&g);
    let mut history = vec![res];
    let mut iter = 0;
    while !(res <= params.newton_tol) {
        if iter == params.max_iters || !res.is_finite() {
            return Err(Error::NoConvergence {
                what: "Newton",
                iterations: iter,
                residual: res,
                history,
            });
        }
        iter += 1;
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = problem.newton_direction(problem.jacobian(&u), &rhs)?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = par::map_collect(u.len(), |i| u[i] + alpha * delta[i]);
            let g_trial = problem.gradient(&trial);
            let r_trial = problem.residual_norm(&g_trial);
            if r_trial <= (1.0 - 1e-4 * alpha) * res || alpha <= params.min_damping {
                u = trial;
                g = g_trial;
                res = r_trial;
                break;
            }
            alpha *= 0.5;
        }
        history.push(res);
    }
    let height = DiscreteField(u.clone()).max();
    if !(height > 0.1 * reference) || height <= 0.0 {
        let solution = finish(problem, u, res, history);
        return Err(Error::CollapseToZero {
            height,
            reference,
            solution: Box::new(solution),
        });
    }
    let min = DiscreteField(u.clone()).min();
    if min < -1e-8 * height {
        return Err(Error::NegativeSolution { min });
    }
    Ok(finish(problem, u, res, history))
}

/// Result of an ε-continuation run.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub start: Vec<f64>,
    pub solutions: Vec<SpikeSolution>,
    /// Γ is flat near the start (Hessian and gradient negligible), so the
    /// spike has no preferred limit at leading order.
    pub gamma_degenerate: bool,
}

/// Newton from the ansatz at `q` for a single ε.
pub fn solve_from_ansatz(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, q: &[f64], params: &SolveParams) -> Result<SpikeSolution> {
    let problem = DiscreteProblem::new(grid, data, params.eps)?;
    let prof = scaled_profile(q, data, base.clone(), params.eps)?;
    if !params.allow_unresolved {
        check_resolution(&prof, grid)?;
    }
    let u0 = sample_ansatz(&prof, grid);
    newton_solve(&u0, &problem, params, Some(prof.amplitude * base.u0))
}

/// Solve down `params.ladder` starting from the ansatz at `q0`, warm-starting
/// each rung from the previous solution. If that fails, or the spike jumps by
/// more than one length scale, the rung restarts from the ansatz at the
/// previous spike location.
pub fn continuation(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, q0: &[f64], params: &SolveParams) -> Result<Continuation> {
    validate_ladder(&params.ladder)?;
    let mut solutions: Vec<SpikeSolution> = Vec::new();
    for &eps in &params.ladder {
        let at_eps = |e: Error| Error::AtEpsilon { eps, source: Box::new(e) };
        let rung = SolveParams { eps, ..params.clone() };
        let sol = match solutions.last() {
            None => solve_from_ansatz(grid, data, base, q0, &rung).map_err(at_eps)?,
            Some(prev) => {
                let problem = DiscreteProblem::new(grid, data, eps).map_err(at_eps)?;
                let prof = scaled_profile(&prev.location, data, base.clone(), eps).map_err(at_eps)?;
                if !rung.allow_unresolved {
                    check_resolution(&prof, grid).map_err(at_eps)?;
                }
                let reference = prof.amplitude * base.u0;
                // a warm start that wanders off by more than a spike length
                // has been captured by another branch (typically the boundary)
                let drift_limit = prof.length_scale().max(2.0 * grid.max_spacing());
                let stayed = |s: &SpikeSolution| dist2(&s.location, &prev.location).sqrt() <= drift_limit;
                match newton_solve(&prev.u, &problem, &rung, Some(reference)) {
                    Ok(s) if stayed(&s) => s,
                    _ => newton_solve(&sample_ansatz(&prof, grid), &problem, &rung, Some(reference)).map_err(at_eps)?,
                }
            }
        };
        solutions.push(sol);
    }
    Ok(Continuation {
        start: q0.to_vec(),
        solutions,
        gamma_degenerate: gamma_flat_at(data, q0),
    })
}

fn gamma_flat_at(data: &ProblemData, q: &[f64]) -> bool {
    let (Ok(g), Ok(grad), Ok(hess)) = (
        gamma::gamma(q, data),
        gamma::grad_gamma(q, data, GammaDerivatives::Analytic),
        gamma::hess_gamma(q, data, GammaDerivatives::Analytic),
    ) else {
        return false;
    };
    let scale = g.abs().max(f64::MIN_POSITIVE);
    grad.iter().chain(&hess).all(|v| v.abs() <= DEGENERACY_THRESHOLD * scale)
}

/// Largest rung at which Newton converges straight from the ansatz at `q`.
pub fn empirical_eps0(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, q: &[f64], params: &SolveParams) -> Option<f64> {
    params
        .ladder
        .iter()
        .cloned()
        .find(|&eps| solve_from_ansatz(grid, data, base, q, &SolveParams { eps, ..params.clone() }).is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;
    use crate::problem::{CoefficientField, DomainSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quadratic_well() -> ProblemData {
        ProblemData::new(
            2,
            3.0,
            CoefficientField::constant(1.0),
            CoefficientField::QuadraticWell {
                base: 1.0,
                center: vec![0.5, 0.5],
                curvature: 1.0,
            },
            DomainSpec::unit_box(2),
        )
        .unwrap()
    }

    #[test]
    fn energy_closed_forms() {
        let data = ProblemData::new(2, 3.0, CoefficientField::constant(1.0), CoefficientField::constant(1.0), DomainSpec::unit_box(2)).unwrap();
        let grid = build_grid(&data.domain, &[16, 16]).unwrap();
        let pb = DiscreteProblem::new(&grid, &data, 0.3).unwrap();
        let n = grid.n_nodes();
        assert_eq!(pb.energy(&vec![0.0; n]), 0.0);
        assert!(pb.gradient(&vec![0.0; n]).iter().all(|g| *g == 0.0));
        let c: f64 = 0.8;
        let expect = c * c / 2.0 - c.powi(4) / 4.0;
        assert!((pb.energy(&vec![c; n]) - expect).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = quadratic_well();
        let grid = build_grid(&data.domain, &[24, 24]).unwrap();
        let pb = DiscreteProblem::new(&grid, &data, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = grid.n_nodes();
        for _ in 0..5 {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..1.5)).collect();
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let up: Vec<f64> = u.iter().zip(&d).map(|(u, d)| u + h * d).collect();
            let um: Vec<f64> = u.iter().zip(&d).map(|(u, d)| u - h * d).collect();
            let fd = (pb.energy(&up) - pb.energy(&um)) / (2.0 * h);
            let an = par::dot(&pb.gradient(&u), &d);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} {an}");
        }
    }

    #[test]
    fn locate_spike_examples() {
        let data = quadratic_well();
        let grid = build_grid(&data.domain, &[41, 41]).unwrap();
        let a = [0.413, 0.587];
        let u: Vec<f64> = (0..grid.n_nodes())
            .map(|i| {
                let x = grid.coord(i);
                (-((x[0] - a[0]).powi(2) + (x[1] - a[1]).powi(2))).exp()
            })
            .collect();
        let x = locate_spike(&u, &grid).unwrap();
        let h = grid.spacing[0];
        assert!((x[0] - a[0]).abs() < 1e-2 * h && (x[1] - a[1]).abs() < 1e-2 * h, "{x:?}");
        let two: Vec<f64> = (0..grid.n_nodes())
            .map(|i| {
                let x = grid.coord(i);
                (-((x[0] - 0.2).powi(2) + (x[1] - 0.2).powi(2)) / 0.01).exp()
                    + 2.0 * (-((x[0] - 0.8).powi(2) + (x[1] - 0.7).powi(2)) / 0.01).exp()
            })
            .collect();
        let x = locate_spike(&two, &grid).unwrap();
        assert!((x[0] - 0.8).abs() < h && (x[1] - 0.7).abs() < h);
        assert!(matches!(locate_spike(&vec![0.0; grid.n_nodes()], &grid), Err(Error::FlatField)));
    }

    #[test]
    fn zero_start_collapses() {
        let data = quadratic_well();
        let grid = build_grid(&data.domain, &[16, 16]).unwrap();
        let pb = DiscreteProblem::new(&grid, &data, 0.3).unwrap();
        let r = newton_solve(&vec![0.0; grid.n_nodes()], &pb, &SolveParams::default(), None);
        match r {
            Err(Error::CollapseToZero { solution, .. }) => assert!(solution.u.iter().all(|v| *v == 0.0)),
            other => panic!("expected collapse, got {other:?}"),
        }
    }

    #[test]
    fn ladder_validation() {
        assert!(validate_ladder(&[0.4, 0.3, 0.1]).is_ok());
        assert!(validate_ladder(&[0.3, 0.4]).is_err());
        assert!(validate_ladder(&[0.3, 0.3]).is_err());
        assert!(validate_ladder(&[]).is_err());
        assert!(validate_ladder(&[0.3, -0.1]).is_err());
    }
}
