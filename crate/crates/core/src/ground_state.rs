//! Radial ground state of `-ΔU + U = U^p` on the whole space.
//!
//! The profile is found by shooting on `U(0)`: trajectories that cross zero
//! started too high, trajectories that turn back up started too low. Bisection
//! on that classification pins `U(0)` to the requested width; the profile is
//! then assembled from an outward shot and an inward shot that starts on the
//! decaying branch of the linearized equation at `r_max`, matched in value and
//! slope at an intermediate radius. The inward half is stable, so the tail is
//! accurate down to `1e-12 U(0)` instead of being lost to the growing mode.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ode::{State, Stepper};
use crate::par;

/// Tabulated ground state on a uniform radial grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub dim: usize,
    pub exponent: f64,
    /// Uniform spacing of `r_nodes`.
    pub dr: f64,
    pub r_nodes: Vec<f64>,
    pub u_values: Vec<f64>,
    pub du_values: Vec<f64>,
    pub u0: f64,
    pub r_max: f64,
    /// Exponential rate fitted on `[r_max/2, r_max]` after removing the
    /// algebraic prefactor `r^{-(N-1)/2}`.
    pub decay_rate: f64,
}

/// Whole-space integrals of the ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `∫ U^{p+1}`
    pub m_pp1: f64,
    /// `∫ |∇U|²`
    pub m_grad2: f64,
    /// `∫ U²`
    pub m_sq: f64,
    /// `(1/2 - 1/(p+1)) ∫ U^{p+1}`
    pub c0_bar: f64,
}

/// Integrand selector for [`radial_symmetry_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `∫ x_i |∇U|²`
    GradSquared,
    /// `∫ x_i U²`
    Squared,
}

/// Knobs for the shooting solver. The defaults are what [`solve_ground_state`] uses.
#[derive(Debug, Clone)]
pub struct ShootingOptions {
    /// Radial grid spacing of the output table.
    pub dr: f64,
    /// Multiplier applied to the adaptively chosen truncation radius.
    pub r_max_scale: f64,
    /// Relative decay `U(r_max)/U(0)` targeted by the truncation radius.
    pub tail_target: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            dr: 0.005,
            r_max_scale: 1.0,
            tail_target: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// crossed zero: `U(0)` too large
    Over,
    /// turned back up while positive: `U(0)` too small
    Under,
    Undecided,
}

/// Area of the unit sphere in `R^dim` (2 for `dim = 1`).
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI * unit_sphere_area(d - 2) / (d - 2) as f64,
    }
}

/// Largest admissible exponent, `(N+2)/(N-2)` for `N >= 3`.
pub fn critical_exponent(dim: usize) -> f64 {
    if dim >= 3 {
        (dim as f64 + 2.0) / (dim as f64 - 2.0)
    } else {
        f64::INFINITY
    }
}

pub(crate) fn check_exponent(dim: usize, exponent: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if !(exponent > 1.0) || !exponent.is_finite() {
        return Err(Error::InvalidInput(format!("exponent must exceed 1, got {exponent}")));
    }
    if exponent >= critical_exponent(dim) {
        return Err(Error::Supercritical { dim, exponent });
    }
    Ok(())
}

fn spow(u: f64, p: f64) -> f64 {
    u.abs().powf(p - 1.0) * u
}

struct RadialOde {
    dim: usize,
    p: f64,
}

impl RadialOde {
    fn rhs(&self) -> impl Fn(f64, &State) -> State + '_ {
        move |r: f64, y: &State| {
            let damping = if self.dim > 1 { (self.dim - 1) as f64 / r } else { 0.0 };
            [y[1], -damping * y[1] + y[0] - spow(y[0], self.p)]
        }
    }

    /// Two-term Taylor start `u0 + a r² + b r⁴` around the origin.
    fn series(&self, u0: f64, r: f64) -> State {
        let n = self.dim as f64;
        let f = u0 - u0.powf(self.p);
        let df = 1.0 - self.p * u0.powf(self.p - 1.0);
        let a = f / (2.0 * n);
        let b = df * a / (4.0 * (n + 2.0));
        [u0 + a * r * r + b * r.powi(4), 2.0 * a * r + 4.0 * b * r.powi(3)]
    }
}

/// Decaying solution of the linearized equation, `r^{-ν} K_ν(r)` with `ν = N/2 - 1`
/// up to normalization, from the asymptotic series of `K_ν`. Returns `(T, T')`.
fn linear_tail(dim: usize, r: f64) -> (f64, f64) {
    let nu = dim as f64 / 2.0 - 1.0;
    let mu = 4.0 * nu * nu;
    let mut s = 1.0;
    let mut ds = 0.0;
    let mut coef = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let kk = k as f64;
        coef *= (mu - (2.0 * kk - 1.0).powi(2)) / (8.0 * kk);
        let term = coef / r.powi(k);
        if term.abs() >= last || term.abs() < 1e-17 {
            if term.abs() < 1e-17 {
                s += term;
                ds -= kk * term / r;
            }
            break;
        }
        last = term.abs();
        s += term;
        ds -= kk * term / r;
    }
    let half = (dim as f64 - 1.0) / 2.0;
    let t = r.powf(-half) * (-r).exp() * s;
    let dt = t * (-half / r - 1.0 + ds / s);
    (t, dt)
}

impl RadialOde {
    fn stepper(&self, tol: f64, dr: f64) -> Stepper {
        Stepper::new((tol / 10.0).max(1e-14), 1e-300, dr)
    }

    /// State at `r = dr`: the series is taken well inside `dr`, where its
    /// truncation error is negligible, and integrated out.
    fn start(&self, u0: f64, dr: f64, st: &mut Stepper) -> Option<State> {
        let r0 = dr / 64.0;
        st.advance(&self.rhs(), r0, self.series(u0, r0), dr)
    }

    fn classify(&self, u0: f64, tol: f64, dr: f64) -> Shot {
        let f = self.rhs();
        let mut st = self.stepper(tol, dr);
        let mut r = dr;
        let Some(mut y) = self.start(u0, dr, &mut st) else {
            return Shot::Over;
        };
        let window = 0.05;
        while r < 80.0 {
            let Some(next) = st.advance(&f, r, y, r + window) else {
                return Shot::Over;
            };
            r += window;
            y = next;
            if y[0] < 0.0 {
                return Shot::Over;
            }
            if y[1] > 0.0 {
                return Shot::Under;
            }
        }
        Shot::Undecided
    }

    /// Outward shot recording states at `r = i*dr` for `i = 0..=last`.
    fn shoot_out(&self, u0: f64, tol: f64, dr: f64, last: usize) -> Option<Vec<State>> {
        let f = self.rhs();
        let mut st = self.stepper(tol, dr);
        let mut out = Vec::with_capacity(last + 1);
        out.push([u0, 0.0]);
        if last == 0 {
            return Some(out);
        }
        let mut y = self.start(u0, dr, &mut st)?;
        out.push(y);
        for i in 2..=last {
            y = st.advance(&f, (i - 1) as f64 * dr, y, i as f64 * dr)?;
            out.push(y);
        }
        Some(out)
    }

    /// Inward shot from `i_end*dr` down to `i_start*dr` along `amp * T(r)`.
    /// Entry `k` of the result is node `i_start + k`.
    fn shoot_in(&self, amp: f64, tol: f64, dr: f64, i_start: usize, i_end: usize) -> Option<Vec<State>> {
        let f = self.rhs();
        let mut st = self.stepper(tol, dr);
        let r_end = i_end as f64 * dr;
        let (t, dt) = linear_tail(self.dim, r_end);
        let mut y = [amp * t, amp * dt];
        let mut rev = Vec::with_capacity(i_end - i_start + 1);
        rev.push(y);
        for i in (i_start..i_end).rev() {
            y = st.advance(&f, (i + 1) as f64 * dr, y, i as f64 * dr)?;
            rev.push(y);
        }
        rev.reverse();
        Some(rev)
    }
}

/// Solve for the ground state with default options.
pub fn solve_ground_state(dim: usize, exponent: f64, tol: f64) -> Result<RadialProfile> {
    solve_ground_state_with(dim, exponent, tol, &ShootingOptions::default())
}

pub fn solve_ground_state_with(dim: usize, exponent: f64, tol: f64, opts: &ShootingOptions) -> Result<RadialProfile> {
    check_exponent(dim, exponent)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if !(opts.dr > 0.0) || !(opts.r_max_scale >= 1.0) {
        return Err(Error::InvalidInput("bad shooting options".into()));
    }
    let ode = RadialOde { dim, p: exponent };
    let dr = opts.dr;

    // Bracket: just above the constant state 1 the trajectory oscillates back up.
    let mut lo = 1.0 + 1e-6;
    if ode.classify(lo, tol, dr) != Shot::Under {
        return Err(Error::NoBracket { dim, exponent });
    }
    let mut hi = ((exponent + 1.0) / 2.0).powf(1.0 / (exponent - 1.0)).max(lo * 1.01);
    let mut found = false;
    for _ in 0..80 {
        match ode.classify(hi, tol, dr) {
            Shot::Over => {
                found = true;
                break;
            }
            Shot::Under => {
                lo = hi;
                hi *= 1.5;
            }
            Shot::Undecided => {
                lo = hi;
                found = true;
                break;
            }
        }
    }
    if !found {
        return Err(Error::NoBracket { dim, exponent });
    }

    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match ode.classify(mid, tol, dr) {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let u0_bisect = 0.5 * (lo + hi);

    // Probe shot: locate the matching radius and an amplitude for the tail.
    let probe_len = (12.0 / dr).ceil() as usize;
    let probe = ode
        .shoot_out(u0_bisect, tol, dr, probe_len)
        .ok_or(Error::NoBracket { dim, exponent })?;
    let i_match = probe
        .iter()
        .position(|y| y[0] < 0.25 * u0_bisect)
        .ok_or(Error::NoBracket { dim, exponent })?;
    let i_ref = probe
        .iter()
        .position(|y| y[0] < 1e-3 * u0_bisect || y[1] > 0.0)
        .filter(|&i| i > i_match)
        .ok_or(Error::NoBracket { dim, exponent })?;
    let r_ref = i_ref as f64 * dr;
    let amp0 = probe[i_ref][0] / linear_tail(dim, r_ref).0;

    let mut r_trunc = r_ref;
    while amp0 * linear_tail(dim, r_trunc).0 > opts.tail_target * u0_bisect {
        r_trunc += 0.25;
    }
    let i_end = ((r_trunc * opts.r_max_scale) / dr).ceil() as usize;

    // Match outward and inward shots in value and slope at the matching radius.
    let mismatch = |u0: f64, amp: f64| -> Option<[f64; 2]> {
        let out = *ode.shoot_out(u0, tol, dr, i_match)?.last()?;
        let inn = ode.shoot_in(amp, tol, dr, i_match, i_end)?[0];
        Some([out[0] - inn[0], out[1] - inn[1]])
    };
    let fail = || Error::NoConvergence {
        what: "ground-state matching",
        iterations: 0,
        residual: f64::NAN,
        history: vec![],
    };
    let (mut u0, mut amp) = (u0_bisect, amp0);
    let mut res = mismatch(u0, amp).ok_or_else(fail)?;
    for _ in 0..30 {
        let norm = res[0].abs().max(res[1].abs());
        if norm < 1e-15 * u0 {
            break;
        }
        let du = 1e-7 * u0;
        let da = 1e-7 * amp;
        let r1 = mismatch(u0 + du, amp).ok_or_else(fail)?;
        let r2 = mismatch(u0, amp + da).ok_or_else(fail)?;
        let j = [
            [(r1[0] - res[0]) / du, (r2[0] - res[0]) / da],
            [(r1[1] - res[1]) / du, (r2[1] - res[1]) / da],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let s0 = (j[1][1] * res[0] - j[0][1] * res[1]) / det;
        let s1 = (-j[1][0] * res[0] + j[0][0] * res[1]) / det;
        let next = (u0 - s0, amp - s1);
        let next_res = mismatch(next.0, next.1).ok_or_else(fail)?;
        if next_res[0].abs().max(next_res[1].abs()) >= norm {
            break;
        }
        u0 = next.0;
        amp = next.1;
        res = next_res;
    }

    let out = ode.shoot_out(u0, tol, dr, i_match).ok_or_else(fail)?;
    let inn = ode.shoot_in(amp, tol, dr, i_match, i_end).ok_or_else(fail)?;
    let n_nodes = i_end + 1;
    let mut r_nodes = Vec::with_capacity(n_nodes);
    let mut u_values = Vec::with_capacity(n_nodes);
    let mut du_values = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let y = if i < i_match {
            out[i]
        } else if i == i_match {
            [0.5 * (out[i][0] + inn[0][0]), 0.5 * (out[i][1] + inn[0][1])]
        } else {
            inn[i - i_match]
        };
        r_nodes.push(i as f64 * dr);
        u_values.push(y[0]);
        du_values.push(y[1]);
    }
    let r_max = i_end as f64 * dr;

    let decay_rate = fit_decay(dim, &r_nodes, &u_values, r_max);
    Ok(RadialProfile {
        dim,
        exponent,
        dr,
        r_nodes,
        u_values,
        du_values,
        u0,
        r_max,
        decay_rate,
    })
}

/// Least-squares slope of `ln(U r^{(N-1)/2})` against `r` on `[r_max/2, r_max]`.
fn fit_decay(dim: usize, r: &[f64], u: &[f64], r_max: f64) -> f64 {
    let half = (dim as f64 - 1.0) / 2.0;
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(u)
        .filter(|(r, u)| **r >= 0.5 * r_max && **u > 0.0)
        .map(|(r, u)| (*r, u.ln() + half * r.ln()))
        .collect();
    -crate::fit::least_squares_slope(&pts).slope
}

impl RadialProfile {
    /// `(U(r), U'(r))` by cubic Hermite interpolation; exponential tail past `r_max`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        if r >= self.r_max {
            return self.tail(r);
        }
        let x = r / self.dr;
        let i = (x.floor() as usize).min(self.r_nodes.len() - 2);
        let t = x - i as f64;
        let (u0, u1) = (self.u_values[i], self.u_values[i + 1]);
        let (m0, m1) = (self.du_values[i] * self.dr, self.du_values[i + 1] * self.dr);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let u = h00 * u0 + h10 * m0 + h01 * u1 + h11 * m1;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let du = (d00 * u0 + d10 * m0 + d01 * u1 + d11 * m1) / self.dr;
        (u, du)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    fn tail(&self, r: f64) -> (f64, f64) {
        let half = (self.dim as f64 - 1.0) / 2.0;
        let u_end = *self.u_values.last().unwrap();
        let u = u_end * (-self.decay_rate * (r - self.r_max)).exp() * (self.r_max / r).powf(half);
        (u, -u * (self.decay_rate + half / r))
    }

    /// Pointwise residual of `-U'' - (N-1)/r U' + U - U^p` at interior nodes
    /// `1..len-4`, with `U''` from an eighth-order central difference of the
    /// tabulated `U'` (odd reflection through the origin).
    pub fn ode_residual(&self) -> Vec<f64> {
        const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let n = self.r_nodes.len();
        let du = |k: isize| -> f64 {
            if k < 0 {
                -self.du_values[(-k) as usize]
            } else {
                self.du_values[k as usize]
            }
        };
        let damping = (self.dim as f64) - 1.0;
        (1..n.saturating_sub(4))
            .map(|i| {
                let ii = i as isize;
                let mut d2 = 0.0;
                for (k, c) in C.iter().enumerate() {
                    let k = k as isize + 1;
                    d2 += c * (du(ii + k) - du(ii - k));
                }
                d2 /= self.dr;
                let u = self.u_values[i];
                -d2 - damping / self.r_nodes[i] * self.du_values[i] + u - spow(u, self.exponent)
            })
            .collect()
    }

    /// Composite Simpson rule for `ω_{N-1} ∫_0^{r_max} r^{N-1} g(U, U') dr`.
    fn radial_integral<F: Fn(f64, f64) -> f64>(&self, g: F) -> f64 {
        let n = self.r_nodes.len();
        let f = |i: usize| self.r_nodes[i].powi(self.dim as i32 - 1) * g(self.u_values[i], self.du_values[i]);
        let intervals = n - 1;
        let simpson_end = intervals - intervals % 2;
        let mut s = f(0) + f(simpson_end);
        for i in 1..simpson_end {
            s += if i % 2 == 1 { 4.0 * f(i) } else { 2.0 * f(i) };
        }
        let mut total = s * self.dr / 3.0;
        if simpson_end < intervals {
            // trailing interval: trapezoid, the integrand is ~1e-24 there
            total += 0.5 * self.dr * (f(intervals - 1) + f(intervals));
        }
        unit_sphere_area(self.dim) * total
    }
}

/// Whole-space moments of the ground state.
pub fn profile_moments(prof: &RadialProfile) -> Moments {
    let p = prof.exponent;
    let m_pp1 = prof.radial_integral(|u, _| u.abs().powf(p + 1.0));
    let m_grad2 = prof.radial_integral(|_, du| du * du);
    let m_sq = prof.radial_integral(|u, _| u * u);
    Moments {
        m_pp1,
        m_grad2,
        m_sq,
        c0_bar: (0.5 - 1.0 / (p + 1.0)) * m_pp1,
    }
}

/// `∫ x_axis g(x) dx` over a symmetric Cartesian grid covering the support of
/// the profile, with `g = |∇U|²` or `U²`. Zero up to rounding for every axis.
pub fn radial_symmetry_moment(prof: &RadialProfile, axis: usize, kind: MomentKind) -> Result<f64> {
    let dim = prof.dim;
    if axis >= dim {
        return Err(Error::InvalidInput(format!("axis {axis} out of range for dimension {dim}")));
    }
    let half_nodes: usize = match dim {
        1 => 2000,
        2 => 200,
        _ => 50,
    };
    let half_width = prof.r_max.min(16.0);
    let h = half_width / half_nodes as f64;
    let side = 2 * half_nodes + 1;
    let total = side.pow(dim as u32);
    let s = par::sum(total, |flat| {
        let mut rest = flat;
        let mut r2 = 0.0;
        let mut xa = 0.0;
        for d in 0..dim {
            let k = rest % side;
            rest /= side;
            let x = (k as f64 - half_nodes as f64) * h;
            r2 += x * x;
            if d == axis {
                xa = x;
            }
        }
        let (u, du) = prof.eval(r2.sqrt());
        let g = match kind {
            MomentKind::GradSquared => du * du,
            MomentKind::Squared => u * u,
        };
        xa * g
    });
    Ok(s * h.powi(dim as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soliton(p: f64, r: f64) -> f64 {
        // closed-form one-dimensional ground state
        ((p + 1.0) / 2.0).powf(1.0 / (p - 1.0)) * (1.0 / ((p - 1.0) * r / 2.0).cosh()).powf(2.0 / (p - 1.0))
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(unit_sphere_area(1), 2.0);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn supercritical_rejected() {
        assert!(matches!(solve_ground_state(3, 5.0, 1e-8), Err(Error::Supercritical { .. })));
        assert!(matches!(solve_ground_state(4, 3.5, 1e-8), Err(Error::Supercritical { .. })));
        assert!(matches!(solve_ground_state(2, 1.0, 1e-8), Err(Error::InvalidInput(_))));
        assert!(matches!(solve_ground_state(1, 3.0, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn one_dimensional_cubic_matches_soliton() {
        let prof = solve_ground_state(1, 3.0, 1e-12).unwrap();
        assert!((prof.u0 - 2f64.sqrt()).abs() < 1e-10);
        let err = prof
            .r_nodes
            .iter()
            .zip(&prof.u_values)
            .filter(|(r, _)| **r <= 20.0)
            .map(|(r, u)| (u - soliton(3.0, *r)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "max error {err}");
    }

    #[test]
    fn one_dimensional_quadratic_matches_soliton() {
        let prof = solve_ground_state(1, 2.0, 1e-12).unwrap();
        assert!((prof.u0 - 1.5).abs() < 1e-10);
        for r in [0.3, 1.7, 4.2, 9.9] {
            assert!((prof.value(r) - 1.5 / (r / 2.0).cosh().powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn invariants_hold_in_three_dimensions() {
        let tol = 1e-10;
        let prof = solve_ground_state(3, 3.0, tol).unwrap();
        assert_eq!(prof.du_values[0], 0.0);
        let max = prof.u_values.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, prof.u_values[0]);
        assert!(prof.u_values.windows(2).all(|w| w[1] < w[0]));
        assert!(prof.u_values.iter().all(|&u| u > 0.0));
        assert!(*prof.u_values.last().unwrap() < 1e-10 * prof.u0);
        assert!((prof.decay_rate - 1.0).abs() < 0.05, "decay {}", prof.decay_rate);
        let worst = prof.ode_residual().into_iter().map(f64::abs).fold(0.0, f64::max);
        assert!(worst < 10.0 * tol, "residual {worst}");
    }

    #[test]
    fn cubic_soliton_moments() {
        let prof = solve_ground_state(1, 3.0, 1e-12).unwrap();
        let m = profile_moments(&prof);
        assert!((m.m_pp1 - 16.0 / 3.0).abs() < 1e-9);
        assert!((m.c0_bar - 4.0 / 3.0).abs() < 1e-9);
        // ∫ 2 sech² tanh² = 4/3 and ∫ 2 sech² = 4
        assert!((m.m_grad2 - 4.0 / 3.0).abs() < 1e-9);
        assert!((m.m_sq - 4.0).abs() < 1e-9);
    }

    #[test]
    fn symmetry_moments_vanish() {
        let prof = solve_ground_state(2, 3.0, 1e-10).unwrap();
        for axis in 0..2 {
            for kind in [MomentKind::GradSquared, MomentKind::Squared] {
                assert!(radial_symmetry_moment(&prof, axis, kind).unwrap().abs() < 1e-10);
            }
        }
        assert!(radial_symmetry_moment(&prof, 2, MomentKind::Squared).is_err());
    }

    #[test]
    fn hermite_interpolation_between_nodes() {
        let prof = solve_ground_state(1, 3.0, 1e-12).unwrap();
        for r in [0.0012, 0.5031, 3.3333, 7.77] {
            let (u, du) = prof.eval(r);
            let exact = 2f64.sqrt() / r.cosh();
            assert!((u - exact).abs() < 1e-11);
            assert!((du + exact * r.tanh()).abs() < 1e-8);
        }
        // tail continues past r_max and keeps decaying
        let (a, _) = prof.eval(prof.r_max + 1.0);
        assert!(a > 0.0 && a < *prof.u_values.last().unwrap());
    }
}
