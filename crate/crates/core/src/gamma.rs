//! The auxiliary function `Γ(Q) = V(Q)^θ J(Q)^{N/2}`, `θ = (p+1)/(p-1) - N/2`,
//! its derivatives, and a search for its critical points (the predicted spike
//! locations).

use crate::dense;
use crate::error::{Error, Result};
use crate::par;
use crate::problem::{dist2, ProblemData};

/// How derivatives of `Γ` are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaDerivatives {
    /// Chain rule on the analytic derivatives of `J` and `V`.
    Analytic,
    /// Centered differences of `Γ` with the given step.
    FiniteDifference { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Min,
    Max,
    Saddle,
    Degenerate,
}

impl CriticalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriticalKind::Min => "min",
            CriticalKind::Max => "max",
            CriticalKind::Saddle => "saddle",
            CriticalKind::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub gradient_norm: f64,
    /// Ascending Hessian eigenvalues.
    pub hessian_eigs: Vec<f64>,
    pub kind: CriticalKind,
    /// Strict local extremum on a small sampling sphere.
    pub isolated_strict: bool,
}

/// A seed whose Newton iteration failed.
#[derive(Debug)]
pub struct SeedFailure {
    pub seed: Vec<f64>,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct CriticalPointSearch {
    pub points: Vec<CriticalPoint>,
    pub failures: Vec<SeedFailure>,
}

/// Relative eigenvalue threshold below which a critical point is degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

fn in_domain(q: &[f64], data: &ProblemData) -> Result<()> {
    if data.domain.contains(q) {
        Ok(())
    } else {
        Err(Error::OutsideDomain { point: q.to_vec() })
    }
}

fn gamma_unchecked(q: &[f64], data: &ProblemData) -> Result<f64> {
    let (j, v) = data.coefficients_at(q)?;
    Ok(v.powf(data.theta()) * j.powf(data.dim as f64 / 2.0))
}

pub fn gamma(q: &[f64], data: &ProblemData) -> Result<f64> {
    in_domain(q, data)?;
    gamma_unchecked(q, data)
}

/// Gradient of `log Γ`: `θ ∇V/V + (N/2) ∇J/J`.
fn log_gradient(q: &[f64], data: &ProblemData, j: f64, v: f64) -> Vec<f64> {
    let theta = data.theta();
    let half_n = data.dim as f64 / 2.0;
    let gv = data.v.gradient(q);
    let gj = data.j.gradient(q);
    gv.iter().zip(&gj).map(|(gv, gj)| theta * gv / v + half_n * gj / j).collect()
}

pub fn grad_gamma(q: &[f64], data: &ProblemData, mode: GammaDerivatives) -> Result<Vec<f64>> {
    in_domain(q, data)?;
    match mode {
        GammaDerivatives::Analytic => {
            let (j, v) = data.coefficients_at(q)?;
            let g = gamma_unchecked(q, data)?;
            Ok(log_gradient(q, data, j, v).into_iter().map(|x| g * x).collect())
        }
        GammaDerivatives::FiniteDifference { step } => (0..data.dim)
            .map(|d| {
                let (a, b) = shifted(q, d, step);
                Ok((gamma_unchecked(&a, data)? - gamma_unchecked(&b, data)?) / (2.0 * step))
            })
            .collect(),
    }
}

/// Row-major `N × N` Hessian of `Γ`.
pub fn hess_gamma(q: &[f64], data: &ProblemData, mode: GammaDerivatives) -> Result<Vec<f64>> {
    in_domain(q, data)?;
    let n = data.dim;
    match mode {
        GammaDerivatives::Analytic => {
            let (j, v) = data.coefficients_at(q)?;
            let g = gamma_unchecked(q, data)?;
            let lg = log_gradient(q, data, j, v);
            let (gv, gj) = (data.v.gradient(q), data.j.gradient(q));
            let (hv, hj) = (data.v.hessian(q), data.j.hessian(q));
            let theta = data.theta();
            let half_n = n as f64 / 2.0;
            let mut h = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    let dlog = theta * (hv[a * n + b] / v - gv[a] * gv[b] / (v * v))
                        + half_n * (hj[a * n + b] / j - gj[a] * gj[b] / (j * j));
                    h[a * n + b] = g * (lg[a] * lg[b] + dlog);
                }
            }
            Ok(h)
        }
        GammaDerivatives::FiniteDifference { step } => {
            let mut h = vec![0.0; n * n];
            let g0 = gamma_unchecked(q, data)?;
            for a in 0..n {
                for b in 0..n {
                    h[a * n + b] = if a == b {
                        let (p, m) = shifted(q, a, step);
                        (gamma_unchecked(&p, data)? - 2.0 * g0 + gamma_unchecked(&m, data)?) / (step * step)
                    } else {
                        let mut pp = q.to_vec();
                        let mut pm = q.to_vec();
                        let mut mp = q.to_vec();
                        let mut mm = q.to_vec();
                        pp[a] += step;
                        pp[b] += step;
                        pm[a] += step;
                        pm[b] -= step;
                        mp[a] -= step;
                        mp[b] += step;
                        mm[a] -= step;
                        mm[b] -= step;
                        (gamma_unchecked(&pp, data)? - gamma_unchecked(&pm, data)? - gamma_unchecked(&mp, data)?
                            + gamma_unchecked(&mm, data)?)
                            / (4.0 * step * step)
                    };
                }
            }
            Ok(h)
        }
    }
}

fn shifted(q: &[f64], d: usize, step: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = q.to_vec();
    let mut b = q.to_vec();
    a[d] += step;
    b[d] -= step;
    (a, b)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Classify from Hessian eigenvalues with the relative degeneracy threshold.
pub fn classify(eigs: &[f64]) -> CriticalKind {
    let max_abs = eigs.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    if max_abs == 0.0 || eigs.iter().any(|e| e.abs() < DEGENERACY_THRESHOLD * max_abs) {
        CriticalKind::Degenerate
    } else if eigs.iter().all(|&e| e > 0.0) {
        CriticalKind::Min
    } else if eigs.iter().all(|&e| e < 0.0) {
        CriticalKind::Max
    } else {
        CriticalKind::Saddle
    }
}

/// Unit directions used to probe strictness around a critical point.
fn sphere_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 8.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // every nonzero {-1,0,1}^dim direction, normalized
            let total = 3usize.pow(dim as u32);
            (0..total)
                .filter_map(|mut k| {
                    let v: Vec<f64> = (0..dim)
                        .map(|_| {
                            let c = (k % 3) as f64 - 1.0;
                            k /= 3;
                            c
                        })
                        .collect();
                    let n = norm(&v);
                    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
                })
                .collect()
        }
    }
}

fn newton_from_seed(data: &ProblemData, seed: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = data.dim;
    in_domain(seed, data)?;
    let mut q = seed.to_vec();
    let mut g = grad_gamma(&q, data, GammaDerivatives::Analytic)?;
    let mut gn = norm(&g);
    let max_iters = 200;
    let mut history = vec![gn];
    for _ in 0..max_iters {
        if gn < tol {
            return Ok(q);
        }
        let h = hess_gamma(&q, data, GammaDerivatives::Analytic)?;
        let (eigs, vecs) = dense::sym_eigen(&h, n);
        let max_abs = eigs.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        // pseudo-inverse Newton step, dropping degenerate directions
        let mut step = vec![0.0; n];
        for k in 0..n {
            if eigs[k].abs() <= DEGENERACY_THRESHOLD * max_abs || eigs[k] == 0.0 {
                continue;
            }
            let c: f64 = (0..n).map(|i| vecs[i * n + k] * g[i]).sum::<f64>() / eigs[k];
            for i in 0..n {
                step[i] -= c * vecs[i * n + k];
            }
        }
        if norm(&step) == 0.0 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let trial: Vec<f64> = q.iter().zip(&step).map(|(q, s)| q + t * s).collect();
            if !data.domain.contains(&trial) {
                t *= 0.5;
                if t <= 1e-6 {
                    return Err(Error::BoundaryEscape { point: trial });
                }
                continue;
            }
            let gt = grad_gamma(&trial, data, GammaDerivatives::Analytic)?;
            let gtn = norm(&gt);
            if gtn <= (1.0 - 1e-4 * t) * gn {
                q = trial;
                g = gt;
                gn = gtn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        history.push(gn);
        if !accepted {
            break;
        }
    }
    if gn < tol {
        return Ok(q);
    }
    Err(Error::NoConvergence {
        what: "critical-point Newton",
        iterations: history.len() - 1,
        residual: gn,
        history,
    })
}

/// Damped Newton on `∇Γ` from every seed, deduplicated and classified.
pub fn find_critical_points(data: &ProblemData, seeds: &[Vec<f64>], tol: f64) -> CriticalPointSearch {
    let outcomes = par::map_collect(seeds.len(), |i| newton_from_seed(data, &seeds[i], tol));
    let mut search = CriticalPointSearch::default();
    let probe = 1e-3 * {
        let (lo, hi) = data.domain.bounding_box();
        dist2(&lo, &hi).sqrt()
    };
    for (seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Err(error) => search.failures.push(SeedFailure {
                seed: seed.clone(),
                error,
            }),
            Ok(q) => {
                if search.points.iter().any(|p| dist2(&p.location, &q).sqrt() < 10.0 * tol) {
                    continue;
                }
                match describe(data, q, probe) {
                    Ok(cp) => search.points.push(cp),
                    Err(error) => search.failures.push(SeedFailure {
                        seed: seed.clone(),
                        error,
                    }),
                }
            }
        }
    }
    search
}

fn describe(data: &ProblemData, q: Vec<f64>, probe: f64) -> Result<CriticalPoint> {
    let n = data.dim;
    let g = grad_gamma(&q, data, GammaDerivatives::Analytic)?;
    let h = hess_gamma(&q, data, GammaDerivatives::Analytic)?;
    let (eigs, _) = dense::sym_eigen(&h, n);
    let kind = classify(&eigs);
    let center = gamma(&q, data)?;
    let mut above = true;
    let mut below = true;
    for dir in sphere_directions(n) {
        let x: Vec<f64> = q.iter().zip(&dir).map(|(q, d)| q + probe * d).collect();
        let val = gamma_unchecked(&x, data)?;
        above &= val > center;
        below &= val < center;
    }
    Ok(CriticalPoint {
        location: q,
        gradient_norm: norm(&g),
        hessian_eigs: eigs,
        kind,
        isolated_strict: above || below,
    })
}

/// Cell-centered `k^N` lattice over the bounding box, restricted to the domain.
pub fn lattice_points(data: &ProblemData, k: usize) -> Vec<Vec<f64>> {
    let n = data.dim;
    let (lo, hi) = data.domain.bounding_box();
    let total = k.pow(n as u32);
    (0..total)
        .filter_map(|mut flat| {
            let x: Vec<f64> = (0..n)
                .map(|d| {
                    let i = flat % k;
                    flat /= k;
                    lo[d] + (i as f64 + 0.5) / k as f64 * (hi[d] - lo[d])
                })
                .collect();
            data.domain.contains(&x).then_some(x)
        })
        .collect()
}

/// `Γ` on a lattice, in lattice order.
pub fn scan_lattice(data: &ProblemData, k: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let pts = lattice_points(data, k);
    let vals = par::map_collect(pts.len(), |i| gamma(&pts[i], data));
    pts.into_iter().zip(vals).map(|(p, v)| Ok((p, v?))).collect()
}
