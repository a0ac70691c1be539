//! Discrete Lyapunov–Schmidt reduction onto the manifold of translated spikes.
//!
//! For a center `Q` the correction `w` solves
//! `∇f̃(U + w) ∈ span{R T_i}`, `⟨w, T_i⟩ = 0`, where `T_i` are the
//! translation derivatives of the ansatz `U` and `R` is the Riesz map of the
//! working inner product (`A` for the energy product, `M` for `L²`). The
//! reduced functional is the rescaled energy of `U + w`.
//!
//! Norms are reported in rescaled units. With `ũ(y) = u(εy)` one has
//! `‖ũ‖² = ε^{-N} uᵀAu` and `f_ε(ũ) = ε^{-N} f̃_ε(u)`, so the dual norm of the
//! rescaled gradient is `ε^{-N/2} √(gᵀA⁻¹g)` with `g` the original-variable
//! gradient.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense;
use crate::discretization::{DiscreteField, DomainGrid};
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, LineFit};
use crate::gamma::{self, GammaDerivatives};
use crate::ground_state::{profile_moments, RadialProfile};
use crate::linalg::{BorderedSolver, SparseLu};
use crate::par;
use crate::problem::ProblemData;
use crate::profiles::{check_resolution, sample_ansatz, scaled_profile, tangent_basis, InnerProduct, SpikeProfile, TangentBasis};
use crate::solver::DiscreteProblem;

/// How the constrained correction equation is iterated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionMode {
    /// Newton on the KKT system with the Hessian refreshed every step.
    #[default]
    ProjectedNewton,
    /// Fixed point with the Hessian frozen at the ansatz.
    Contraction,
}

#[derive(Debug, Clone)]
pub struct ReductionOptions {
    pub inner: InnerProduct,
    pub mode: CorrectionMode,
    /// Target for the rescaled dual norm of the projected residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Tangent-basis difference step as a fraction of ε.
    pub tangent_step: f64,
    /// `Q`-step for `∇_Q A_ε`; `None` means `max(1e-3, ε²)`.
    pub grad_step: Option<f64>,
    pub allow_unresolved: bool,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions {
            inner: InnerProduct::Energy,
            mode: CorrectionMode::ProjectedNewton,
            tol: 1e-10,
            max_iters: 50,
            tangent_step: 1e-3,
            grad_step: None,
            allow_unresolved: false,
        }
    }
}

/// The solved correction at one `(Q, ε)`.
#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub w: DiscreteField,
    /// Lagrange multipliers on the tangent constraints.
    pub multipliers: Vec<f64>,
    /// Rescaled energy norm `ε^{-N/2} √(wᵀAw)`.
    pub w_norm: f64,
    pub iterations: usize,
    /// Rescaled dual norm of `∇f_ε(U_P)`.
    pub ansatz_residual: f64,
    /// Rescaled dual norm of the projected residual at `U_P + w`.
    pub projected_residual: f64,
    /// `max_i |⟨w, T_i⟩| / (‖w‖ ‖T_i‖)`
    pub orthogonality: f64,
}

/// Everything that depends on ε but not on `Q`.
#[derive(Debug)]
pub struct EpsilonSlice<'a> {
    pub problem: DiscreteProblem<'a>,
    a_lu: SparseLu,
    base: Arc<RadialProfile>,
    pub opts: ReductionOptions,
}

/// Ansatz, tangent basis and constraint rows at one center.
struct Frame {
    prof: SpikeProfile,
    u: DiscreteField,
    basis: TangentBasis,
    /// `R T_i`, so the constraints read `cᵢᵀ w = 0`.
    constraints: Vec<Vec<f64>>,
}

impl<'a> EpsilonSlice<'a> {
    pub fn new(grid: &'a DomainGrid, data: &'a ProblemData, base: Arc<RadialProfile>, eps: f64, opts: ReductionOptions) -> Result<Self> {
        let problem = DiscreteProblem::new(grid, data, eps)?;
        let a_lu = problem.factor(problem.operator_matrix())?;
        Ok(EpsilonSlice { problem, a_lu, base, opts })
    }

    pub fn eps(&self) -> f64 {
        self.problem.eps()
    }

    fn half_rescale(&self) -> f64 {
        self.eps().powf(-(self.problem.data.dim as f64) / 2.0)
    }

    /// Rescaled norm `ε^{-N/2} √(vᵀAv)`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.half_rescale() * self.problem.op.bilinear(v, v).max(0.0).sqrt()
    }

    /// Rescaled dual norm `ε^{-N/2} √(gᵀA⁻¹g)`.
    pub fn dual_norm(&self, g: &[f64]) -> Result<f64> {
        let x = self.a_lu.solve(g)?;
        Ok(self.half_rescale() * par::dot(g, &x).max(0.0).sqrt())
    }

    fn frame(&self, q: &[f64]) -> Result<Frame> {
        let grid = self.problem.grid;
        let prof = scaled_profile(q, self.problem.data, self.base.clone(), self.eps())?;
        if !self.opts.allow_unresolved {
            check_resolution(&prof, grid)?;
        }
        let u = sample_ansatz(&prof, grid);
        let h = self.opts.tangent_step * self.eps();
        let basis = tangent_basis(&prof, grid, h, &self.problem.op, self.opts.inner)?;
        let constraints = basis.fields.iter().map(|t| self.opts.inner.apply(&self.problem.op, t)).collect();
        Ok(Frame { prof, u, basis, constraints })
    }

    /// `‖∇f_ε(U_P)‖` in rescaled units.
    pub fn ansatz_residual_norm(&self, q: &[f64]) -> Result<f64> {
        let prof = scaled_profile(q, self.problem.data, self.base.clone(), self.eps())?;
        if !self.opts.allow_unresolved {
            check_resolution(&prof, self.problem.grid)?;
        }
        let u = sample_ansatz(&prof, self.problem.grid);
        self.dual_norm(&self.problem.gradient(&u))
    }

    /// Project `v` onto the constraint set `cᵢᵀ v = 0` along the tangent fields.
    fn project(&self, frame: &Frame, v: &mut [f64]) {
        let m = frame.constraints.len();
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                gram[i * m + j] = par::dot(&frame.constraints[i], &frame.basis.fields[j]);
            }
        }
        let rhs: Vec<f64> = frame.constraints.iter().map(|c| par::dot(c, v)).collect();
        if let Some(coef) = dense::solve(&gram, &rhs, m) {
            for (j, a) in coef.iter().enumerate() {
                par::axpy(-a, &frame.basis.fields[j], v);
            }
        }
    }

    fn correct_from(&self, frame: &Frame, w0: Vec<f64>) -> Result<CorrectionResult> {
        let pb = &self.problem;
        let m = frame.constraints.len();
        let n = pb.n();
        let mut w = w0;
        let mut mu = vec![0.0; m];
        let ansatz_residual = self.dual_norm(&pb.gradient(&frame.u))?;
        let contraction = self.opts.mode == CorrectionMode::Contraction || pb.data.exponent < 2.0;
        let frozen = if contraction { Some(pb.factor(pb.jacobian(&frame.u))?) } else { None };

        let residual_at = |w: &[f64], mu: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let v: Vec<f64> = par::map_collect(n, |i| frame.u[i] + w[i]);
            let mut f1 = pb.gradient(&v);
            for (c, m) in frame.constraints.iter().zip(mu) {
                par::axpy(-m, c, &mut f1);
            }
            let f2 = frame.constraints.iter().map(|c| par::dot(c, w)).collect();
            (f1, f2)
        };
        let mut history = Vec::new();
        let mut iterations = 0;
        loop {
            let (f1, f2) = residual_at(&w, &mu);
            let res = self.dual_norm(&f1)?;
            history.push(res);
            if res <= self.opts.tol {
                break;
            }
            if iterations == self.opts.max_iters || !res.is_finite() {
                return Err(Error::NoConvergence {
                    what: "correction",
                    iterations,
                    residual: res,
                    history,
                });
            }
            iterations += 1;
            let fresh;
            let h = match &frozen {
                Some(lu) => lu,
                None => {
                    let v: Vec<f64> = par::map_collect(n, |i| frame.u[i] + w[i]);
                    fresh = pb.factor(pb.jacobian(&v))?;
                    &fresh
                }
            };
            let kkt = BorderedSolver::new(h, frame.constraints.clone())?;
            let rhs1: Vec<f64> = f1.iter().map(|v| -v).collect();
            let rhs2: Vec<f64> = f2.iter().map(|v| -v).collect();
            let (dw, neg_dmu) = kkt.solve(&rhs1, &rhs2)?;
            // backtrack on the dual norm of the stationarity residual
            let mut alpha = 1.0;
            loop {
                let w_try: Vec<f64> = par::map_collect(n, |i| w[i] + alpha * dw[i]);
                let mu_try: Vec<f64> = mu.iter().zip(&neg_dmu).map(|(m, d)| m - alpha * d).collect();
                let r_try = self.dual_norm(&residual_at(&w_try, &mu_try).0)?;
                if r_try <= (1.0 - 1e-4 * alpha) * res || alpha <= 1.0 / 64.0 {
                    w = w_try;
                    mu = mu_try;
                    break;
                }
                alpha *= 0.5;
            }
        }
        let (f1, _) = residual_at(&w, &mu);
        let projected_residual = self.dual_norm(&f1)?;
        let w_energy = pb.op.bilinear(&w, &w).max(0.0).sqrt();
        let orthogonality = frame
            .basis
            .fields
            .iter()
            .map(|t| {
                let ip = self.opts.inner.eval(&pb.op, &w, t);
                let nw = self.opts.inner.eval(&pb.op, &w, &w).max(0.0).sqrt();
                let nt = self.opts.inner.eval(&pb.op, t, t).max(0.0).sqrt();
                if nw == 0.0 {
                    0.0
                } else {
                    ip.abs() / (nw * nt)
                }
            })
            .fold(0.0, f64::max);
        Ok(CorrectionResult {
            w: DiscreteField(w),
            multipliers: mu,
            w_norm: self.half_rescale() * w_energy,
            iterations,
            ansatz_residual,
            projected_residual,
            orthogonality,
        })
    }

    /// Solve the projected correction equation at `q` from `w = 0`.
    pub fn solve_correction(&self, q: &[f64]) -> Result<CorrectionResult> {
        let frame = self.frame(q)?;
        self.correct_from(&frame, vec![0.0; self.problem.n()])
    }

    /// Solve the correction starting from `guess - U_P`, projected onto the
    /// constraint set. `guess` approximates the corrected state `U_P + w`.
    pub fn solve_correction_near(&self, q: &[f64], guess: &[f64]) -> Result<CorrectionResult> {
        let frame = self.frame(q)?;
        let mut w0: Vec<f64> = guess.iter().zip(frame.u.iter()).map(|(g, u)| g - u).collect();
        self.project(&frame, &mut w0);
        self.correct_from(&frame, w0)
    }

    /// The sampled ansatz `U_P` at `q`.
    pub fn ansatz(&self, q: &[f64]) -> Result<DiscreteField> {
        let prof = scaled_profile(q, self.problem.data, self.base.clone(), self.eps())?;
        Ok(sample_ansatz(&prof, self.problem.grid))
    }

    /// Solve from `w = 0` and from a small random admissible start; returns both
    /// results and the rescaled norm of their difference.
    pub fn uniqueness_probe(&self, q: &[f64], seed: u64) -> Result<(CorrectionResult, CorrectionResult, f64)> {
        let frame = self.frame(q)?;
        let n = self.problem.n();
        let a = self.correct_from(&frame, vec![0.0; n])?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        self.project(&frame, &mut w0);
        let scale = 1e-2 * frame.prof.amplitude / DiscreteField(w0.clone()).max().abs().max(f64::MIN_POSITIVE);
        for v in w0.iter_mut() {
            *v *= scale;
        }
        let b = self.correct_from(&frame, w0)?;
        let diff: Vec<f64> = a.w.iter().zip(b.w.iter()).map(|(x, y)| x - y).collect();
        let d = self.norm(&diff);
        Ok((a, b, d))
    }

    /// Smallest `|λ|` of `H v = λ A v` on `{cᵢᵀ v = 0}`, by inverse iteration
    /// on the bordered system; `H` is the Hessian at `U_P + w`.
    pub fn coercivity_estimate(&self, q: &[f64]) -> Result<Coercivity> {
        let frame = self.frame(q)?;
        let corr = self.correct_from(&frame, vec![0.0; self.problem.n()])?;
        self.coercivity_at(&frame, &corr.w)
    }

    fn coercivity_at(&self, frame: &Frame, w: &[f64]) -> Result<Coercivity> {
        let pb = &self.problem;
        let n = pb.n();
        let v_full: Vec<f64> = par::map_collect(n, |i| frame.u[i] + w[i]);
        let hess = pb.jacobian(&v_full);
        let h_lu = pb.factor(hess.clone())?;
        let kkt = BorderedSolver::new(&h_lu, frame.constraints.clone())?;
        let rayleigh = |v: &[f64]| par::dot(v, &hess.matvec(v)) / pb.op.bilinear(v, v);

        let translation_quotients = frame.basis.fields.iter().map(|t| rayleigh(t)).collect();

        // deterministic smooth start, made admissible
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                let x = pb.grid.coord(i);
                1.0 + x.iter().enumerate().map(|(d, xd)| ((d + 2) as f64 * xd).sin()).sum::<f64>()
            })
            .collect();
        self.project(frame, &mut v);
        let zeros = vec![0.0; frame.constraints.len()];
        let mut lambda = f64::NAN;
        const MAX_ITERS: usize = 500;
        for it in 1..=MAX_ITERS {
            let av = pb.op.apply(&v);
            let (x, _) = kkt.solve(&av, &zeros)?;
            let nrm = pb.op.bilinear(&x, &x).sqrt();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::IterationStall { iterations: it });
            }
            v = x.iter().map(|x| x / nrm).collect();
            let next = rayleigh(&v);
            if it > 3 && (next - lambda).abs() <= 1e-9 * next.abs().max(1e-12) {
                return Ok(Coercivity {
                    estimate: next.abs(),
                    eigenvalue: next,
                    iterations: it,
                    translation_quotients,
                });
            }
            lambda = next;
        }
        Err(Error::IterationStall { iterations: MAX_ITERS })
    }

    /// Corrected energy at `q`: cold start first, then `guess` (an
    /// approximation of `U_P + w`) if the cold start fails.
    fn energy_at(&self, q: &[f64], guess: Option<&[f64]>) -> Result<(f64, CorrectionResult, Frame)> {
        let frame = self.frame(q)?;
        let corr = match (self.correct_from(&frame, vec![0.0; self.problem.n()]), guess) {
            (Ok(c), _) => c,
            (Err(_), Some(g)) => {
                let mut w0: Vec<f64> = g.iter().zip(frame.u.iter()).map(|(g, u)| g - u).collect();
                self.project(&frame, &mut w0);
                self.correct_from(&frame, w0)?
            }
            (Err(e), None) => return Err(e),
        };
        let v: Vec<f64> = frame.u.iter().zip(corr.w.iter()).map(|(u, w)| u + w).collect();
        Ok((self.problem.rescaled_energy(&v), corr, frame))
    }

    /// `A_ε(Q)` with its `P`-gradient and diagnostics.
    pub fn reduced_energy(&self, q: &[f64]) -> Result<ReducedSample> {
        self.reduced_energy_near(q, None).map(|(s, _)| s)
    }

    /// As [`reduced_energy`](Self::reduced_energy), falling back to `guess`
    /// when the cold correction fails. Also returns the corrected state.
    pub fn reduced_energy_near(&self, q: &[f64], guess: Option<&[f64]>) -> Result<(ReducedSample, DiscreteField)> {
        let eps = self.eps();
        let data = self.problem.data;
        let (a_eps, corr, frame) = self.energy_at(q, guess)?;
        let state: Vec<f64> = frame.u.iter().zip(corr.w.iter()).map(|(u, w)| u + w).collect();
        let step = self.opts.grad_step.unwrap_or(f64::max(1e-3, eps * eps));
        let mut grad_a = Vec::with_capacity(q.len());
        for i in 0..q.len() {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[i] += step;
            qm[i] -= step;
            // a failed shifted solve leaves the gradient undefined, not the row
            let d = match (self.energy_at(&qp, Some(&state)), self.energy_at(&qm, Some(&state))) {
                (Ok((ap, _, _)), Ok((am, _, _))) => ap - am,
                _ => f64::NAN,
            };
            // ∂_P = ε ∂_Q with P = Q/ε
            grad_a.push(eps * d / (2.0 * step));
        }
        let c0 = profile_moments(&self.base).c0_bar;
        let gamma_value = gamma::gamma(q, data)?;
        let grad_gamma = gamma::grad_gamma(q, data, GammaDerivatives::Analytic)?;
        let gg = grad_gamma.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ga = grad_a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let grad_ratio = if gg > 0.0 { ga / (eps * c0 * gg) } else { f64::NAN };
        let coercivity = self.coercivity_at(&frame, &corr.w).map(|c| c.estimate).unwrap_or(f64::NAN);
        let sample = ReducedSample {
            q: q.to_vec(),
            eps,
            a_eps,
            grad_a,
            gamma_value,
            c0_gamma: c0 * gamma_value,
            gap: a_eps - c0 * gamma_value,
            grad_ratio,
            ansatz_residual: corr.ansatz_residual,
            w_norm: corr.w_norm,
            coercivity,
        };
        Ok((sample, DiscreteField(state)))
    }
}

/// Inverse-iteration result.
#[derive(Debug, Clone)]
pub struct Coercivity {
    /// `|λ_min|` on the constrained subspace.
    pub estimate: f64,
    pub eigenvalue: f64,
    pub iterations: usize,
    /// `T_iᵀ H T_i / T_iᵀ A T_i` for the unprojected translation modes.
    pub translation_quotients: Vec<f64>,
}

/// One `(Q, ε)` row of the reduced functional.
#[derive(Debug, Clone)]
pub struct ReducedSample {
    pub q: Vec<f64>,
    pub eps: f64,
    /// `A_ε(Q)` in rescaled units.
    pub a_eps: f64,
    /// `∂_P A_ε` with `P = Q/ε`.
    pub grad_a: Vec<f64>,
    pub gamma_value: f64,
    /// `c̄₀ Γ(Q)`
    pub c0_gamma: f64,
    /// `A_ε(Q) − c̄₀ Γ(Q)`
    pub gap: f64,
    /// `‖∂_P A_ε‖ / (ε c̄₀ ‖∇Γ‖)`
    pub grad_ratio: f64,
    pub ansatz_residual: f64,
    pub w_norm: f64,
    pub coercivity: f64,
}

/// Convenience wrappers building a fresh slice for a single query.
pub fn ansatz_residual_norm(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, q: &[f64], eps: f64) -> Result<f64> {
    EpsilonSlice::new(grid, data, base.clone(), eps, ReductionOptions::default())?.ansatz_residual_norm(q)
}

pub fn solve_correction(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, q: &[f64], eps: f64, opts: &ReductionOptions) -> Result<CorrectionResult> {
    EpsilonSlice::new(grid, data, base.clone(), eps, opts.clone())?.solve_correction(q)
}

pub fn coercivity_estimate(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, q: &[f64], eps: f64) -> Result<Coercivity> {
    EpsilonSlice::new(grid, data, base.clone(), eps, ReductionOptions::default())?.coercivity_estimate(q)
}

pub fn reduced_energy(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, q: &[f64], eps: f64, opts: &ReductionOptions) -> Result<ReducedSample> {
    EpsilonSlice::new(grid, data, base.clone(), eps, opts.clone())?.reduced_energy(q)
}

/// A report row: the sample or the reason it is missing.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub q: Vec<f64>,
    pub eps: f64,
    pub sample: std::result::Result<ReducedSample, String>,
}

impl ReportRow {
    pub fn status(&self) -> &str {
        match &self.sample {
            Ok(_) => "ok",
            Err(e) => e.as_str(),
        }
    }
}

/// Fitted log-log slopes for one `Q` along the ladder.
#[derive(Debug, Clone)]
pub struct QSlopes {
    pub q: Vec<f64>,
    pub ansatz_residual: LineFit,
    pub w_norm: LineFit,
    pub gap: LineFit,
}

#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub rows: Vec<ReportRow>,
    pub slopes: Vec<QSlopes>,
    /// `max_Q |gap| / ε` for each rung.
    pub max_scaled_gap: Vec<f64>,
    /// Lattice minimizer of `A_ε` for each rung (`None` if any row failed).
    pub argmin_a: Vec<Option<Vec<f64>>>,
    /// Lattice minimizer of `Γ`.
    pub argmin_gamma: Option<Vec<f64>>,
}

/// Slopes are fitted on the last this-many successful rungs.
pub const SLOPE_RUNGS: usize = 4;

/// Sample `A_ε` over the centers `qs` and every rung of `ladder`.
pub fn expansion_report(grid: &DomainGrid, data: &ProblemData, base: &Arc<RadialProfile>, qs: &[Vec<f64>], ladder: &[f64], opts: &ReductionOptions) -> Result<ExpansionReport> {
    crate::solver::validate_ladder(ladder)?;
    let slices: Vec<std::result::Result<EpsilonSlice, String>> = ladder
        .iter()
        .map(|&eps| EpsilonSlice::new(grid, data, base.clone(), eps, opts.clone()).map_err(|e| e.to_string()))
        .collect();
    // each Q walks the ladder in order; a failed cold correction retries from
    // the previous rung's corrected state
    let per_q: Vec<Vec<ReportRow>> = par::map_collect(qs.len(), |k| {
        let q = &qs[k];
        let mut state: Option<DiscreteField> = None;
        ladder
            .iter()
            .zip(&slices)
            .map(|(&eps, slice)| {
                let sample = match slice {
                    Ok(slice) => match slice.reduced_energy_near(q, state.as_deref()) {
                        Ok((s, st)) => {
                            state = Some(st);
                            Ok(s)
                        }
                        Err(e) => Err(e.to_string()),
                    },
                    Err(e) => Err(e.clone()),
                };
                ReportRow { q: q.clone(), eps, sample }
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(qs.len() * ladder.len());
    for r in 0..ladder.len() {
        for q_rows in &per_q {
            rows.push(q_rows[r].clone());
        }
    }

    let slopes = qs
        .iter()
        .map(|q| {
            let mine: Vec<&ReducedSample> = rows.iter().filter(|r| &r.q == q).filter_map(|r| r.sample.as_ref().ok()).collect();
            let eps: Vec<f64> = mine.iter().map(|s| s.eps).collect();
            let pick = |f: &dyn Fn(&ReducedSample) -> f64| -> LineFit {
                let vals: Vec<f64> = mine.iter().map(|s| f(s)).collect();
                loglog_slope(&eps, &vals, SLOPE_RUNGS)
            };
            QSlopes {
                q: q.clone(),
                ansatz_residual: pick(&|s| s.ansatz_residual),
                w_norm: pick(&|s| s.w_norm),
                gap: pick(&|s| s.gap.abs()),
            }
        })
        .collect();

    let mut max_scaled_gap = Vec::new();
    let mut argmin_a = Vec::new();
    for &eps in ladder {
        let at: Vec<&ReportRow> = rows.iter().filter(|r| r.eps == eps).collect();
        let ok: Vec<&ReducedSample> = at.iter().filter_map(|r| r.sample.as_ref().ok()).collect();
        max_scaled_gap.push(ok.iter().map(|s| s.gap.abs() / eps).fold(f64::NAN, f64::max));
        argmin_a.push(if ok.len() == at.len() && !ok.is_empty() {
            ok.iter().min_by(|a, b| a.a_eps.total_cmp(&b.a_eps)).map(|s| s.q.clone())
        } else {
            None
        });
    }
    let argmin_gamma = qs
        .iter()
        .filter_map(|q| gamma::gamma(q, data).ok().map(|g| (q, g)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(q, _)| q.clone());

    Ok(ExpansionReport {
        rows,
        slopes,
        max_scaled_gap,
        argmin_a,
        argmin_gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;
    use crate::ground_state::solve_ground_state;
    use crate::problem::{CoefficientField, DomainSpec};

    fn base() -> Arc<RadialProfile> {
        Arc::new(solve_ground_state(2, 3.0, 1e-10).unwrap())
    }

    fn constant() -> ProblemData {
        ProblemData::new(2, 3.0, CoefficientField::constant(1.0), CoefficientField::constant(1.0), DomainSpec::unit_box(2)).unwrap()
    }

    #[test]
    fn constant_coefficients_need_no_correction() {
        let data = constant();
        let grid = build_grid(&data.domain, &[65, 65]).unwrap();
        let base = base();
        let slice = EpsilonSlice::new(&grid, &data, base, 0.1, ReductionOptions::default()).unwrap();
        let c = slice.solve_correction(&[0.5, 0.5]).unwrap();
        assert!(c.orthogonality < 1e-8, "{}", c.orthogonality);
        assert!(c.projected_residual <= 1e-10);
        let u_norm = slice.norm(&slice.frame(&[0.5, 0.5]).unwrap().u);
        assert!(c.w_norm < 0.05 * u_norm, "{} vs {}", c.w_norm, u_norm);
    }

    #[test]
    fn contraction_matches_newton() {
        let data = ProblemData::new(
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
        .unwrap();
        let grid = build_grid(&data.domain, &[49, 49]).unwrap();
        let base = base();
        let q = [0.62, 0.5];
        let newton = solve_correction(&grid, &data, &base, &q, 0.2, &ReductionOptions::default()).unwrap();
        let opts = ReductionOptions {
            mode: CorrectionMode::Contraction,
            ..Default::default()
        };
        let chord = solve_correction(&grid, &data, &base, &q, 0.2, &opts).unwrap();
        assert!(chord.iterations >= newton.iterations);
        let d = newton.w.iter().zip(chord.w.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-8, "{d}");
    }
}
