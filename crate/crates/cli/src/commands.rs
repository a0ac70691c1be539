//! The six experiments. Each writes its tables, the resolved config and a
//! key=value summary, and returns the summary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use spikelab_core::discretization::{assemble, build_grid, DomainGrid};
use spikelab_core::fit::loglog_slope;
use spikelab_core::gamma::{self, find_critical_points, lattice_points, scan_lattice, CriticalKind};
use spikelab_core::ground_state::{profile_moments, radial_symmetry_moment, solve_ground_state, MomentKind, RadialProfile};
use spikelab_core::problem::ProblemData;
use spikelab_core::profiles::scaled_profile;
use spikelab_core::reduction::{ansatz_residual_norm, expansion_report, EpsilonSlice, ExpansionReport, SLOPE_RUNGS};
use spikelab_core::solver::{continuation, empirical_eps0, Continuation};

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, Csv, Layout, Summary};
use crate::{Failure, VERSION};

fn coord_cols(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

fn point(q: &[f64]) -> String {
    q.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn start(summary: &mut Summary, command: &str) {
    summary.put("version", VERSION);
    summary.put("command", command);
}

fn finish(layout: &Layout, cfg: &RunConfig, summary: &Summary) -> Result<(), Failure> {
    std::fs::write(layout.path("resolved.toml"), cfg.to_toml(VERSION))?;
    std::fs::write(layout.path("summary.txt"), summary.render())?;
    Ok(())
}

fn base_profile(cfg: &RunConfig) -> Result<Arc<RadialProfile>, Failure> {
    Ok(Arc::new(solve_ground_state(cfg.problem.dim, cfg.problem.exponent, cfg.numerics.ground_state_tol)?))
}

fn grid(cfg: &RunConfig) -> Result<DomainGrid, Failure> {
    Ok(build_grid(&cfg.problem.domain, &cfg.numerics.resolution)?)
}

fn dump(layout: &Layout, cfg: &RunConfig, grid: &DomainGrid, eps: f64) -> Result<(), Failure> {
    if cfg.numerics.debug_dump {
        grid.write_dump(std::fs::File::create(layout.path("grid.txt"))?)?;
        assemble(grid, &cfg.problem, eps)?.write_triplets(std::fs::File::create(layout.path("operator.txt"))?)?;
    }
    Ok(())
}

/// Lowest nondegenerate minimum of Γ found from lattice seeds, else the
/// domain center (constant Γ has no preferred point).
pub fn gamma_minimum(data: &ProblemData, lattice: usize, tol: f64) -> Vec<f64> {
    let found = find_critical_points(data, &lattice_points(data, lattice), tol);
    found
        .points
        .iter()
        .filter(|c| c.kind == CriticalKind::Min)
        .filter_map(|c| gamma::gamma(&c.location, data).ok().map(|g| (c, g)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c.location.clone())
        .unwrap_or_else(|| data.domain.center())
}

pub fn ground_state(cfg: &RunConfig, dim: usize, p: f64, tol: f64, out: &Path) -> Result<Summary, Failure> {
    let mut record = cfg.clone();
    record.problem.dim = dim;
    record.problem.exponent = p;
    record.numerics.ground_state_tol = tol;
    let layout = Layout::file(out)?;

    let prof = solve_ground_state(dim, p, tol)?;
    let m = profile_moments(&prof);
    let max_res = prof.ode_residual().iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let mut sym = 0.0f64;
    for axis in 0..dim {
        for kind in [MomentKind::GradSquared, MomentKind::Squared] {
            sym = sym.max(radial_symmetry_moment(&prof, axis, kind)?.abs());
        }
    }
    let pohozaev = (m.m_grad2 + m.m_sq - m.m_pp1).abs() / m.m_pp1;
    let tail = prof.u_values.last().copied().unwrap_or(0.0) / prof.u0;

    let mut csv = Csv::new(&["r", "u", "du"]);
    csv.comment(format!(
        "N={dim},p={},u0={},decay_rate={},m_pp1={},m_grad2={},m_sq={},c0_bar={}",
        num(p),
        num(prof.u0),
        num(prof.decay_rate),
        num(m.m_pp1),
        num(m.m_grad2),
        num(m.m_sq),
        num(m.c0_bar)
    ));
    for i in 0..prof.r_nodes.len() {
        csv.row(vec![num(prof.r_nodes[i]), num(prof.u_values[i]), num(prof.du_values[i])]);
    }
    csv.write(&layout.main("ground_state.csv"))?;

    let mut s = Summary::new();
    start(&mut s, "ground-state");
    s.put("dim", dim);
    s.num("p", p);
    s.num("u0", prof.u0);
    s.num("r_max", prof.r_max);
    s.num("decay_rate", prof.decay_rate);
    s.put("decay_rate_pass", (prof.decay_rate - 1.0).abs() <= 0.05);
    s.num("m_pp1", m.m_pp1);
    s.num("m_grad2", m.m_grad2);
    s.num("m_sq", m.m_sq);
    s.num("c0_bar", m.c0_bar);
    s.num("moment_identity_rel", pohozaev);
    s.put("moment_identity_pass", pohozaev <= 1e-6);
    s.num("max_ode_residual", max_res);
    s.put("ode_residual_pass", max_res < 10.0 * tol);
    s.num("tail_ratio", tail);
    s.put("tail_pass", tail < 1e-10);
    s.num("symmetry_moment_max", sym);
    s.put("symmetry_pass", sym < 1e-10);
    finish(&layout, &record, &s)?;
    Ok(s)
}

pub fn gamma_scan(cfg: &RunConfig, out: &Path) -> Result<Summary, Failure> {
    let layout = Layout::file(out)?;
    let data = &cfg.problem;
    let k = cfg.experiment.lattice;
    let values = scan_lattice(data, k)?;
    let mut csv = Csv::new(&[coord_cols("Q", data.dim), vec!["gamma".into()]].concat());
    for (q, g) in &values {
        let mut row: Vec<String> = q.iter().map(|&x| num(x)).collect();
        row.push(num(*g));
        csv.row(row);
    }
    csv.write(&layout.main("gamma.csv"))?;

    let found = find_critical_points(data, &lattice_points(data, k), cfg.numerics.critical_tol);
    let mut header = coord_cols("Q", data.dim);
    header.push("kind".into());
    header.extend(coord_cols("eig", data.dim));
    header.extend(["gradient_norm".to_string(), "isolated_strict".to_string()]);
    let mut table = Csv::new(&header);
    for c in &found.points {
        let mut row: Vec<String> = c.location.iter().map(|&x| num(x)).collect();
        row.push(c.kind.as_str().into());
        row.extend(c.hessian_eigs.iter().map(|&e| num(e)));
        row.push(num(c.gradient_norm));
        row.push(c.isolated_strict.to_string());
        table.row(row);
    }
    table.write(&layout.path("critical.csv"))?;

    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, g)| (lo.min(*g), hi.max(*g)));
    let constant = hi - lo <= 1e-12 * hi.abs().max(lo.abs());
    let count = |kind: CriticalKind| found.points.iter().filter(|c| c.kind == kind).count();
    let argmin = values.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(q, _)| q.clone()).unwrap_or_default();
    let (blo, bhi) = data.domain.bounding_box();
    let spacing = blo.iter().zip(&bhi).map(|(l, h)| (h - l) / k as f64).fold(0.0, f64::max);
    let nearest_min = found
        .points
        .iter()
        .filter(|c| c.kind == CriticalKind::Min)
        .map(|c| dist(&c.location, &argmin))
        .fold(f64::INFINITY, f64::min);

    let mut s = Summary::new();
    start(&mut s, "gamma-scan");
    s.put("lattice", k);
    s.put("gamma_constant", constant);
    s.num("gamma_min", lo);
    s.num("gamma_max", hi);
    s.put("critical_points", found.points.len());
    s.put("minima", count(CriticalKind::Min));
    s.put("maxima", count(CriticalKind::Max));
    s.put("saddles", count(CriticalKind::Saddle));
    s.put("degenerate", count(CriticalKind::Degenerate));
    s.put("nondegenerate", found.points.len() - count(CriticalKind::Degenerate));
    s.put("seed_failures", found.failures.len());
    s.put("lattice_argmin", point(&argmin));
    if !constant {
        s.put("argmin_matches_minimum", nearest_min <= spacing);
    }
    finish(&layout, cfg, &s)?;
    Ok(s)
}

fn write_fields(layout: &Layout, grid: &DomainGrid, run: &Continuation) -> Result<(), Failure> {
    let dim = grid.dim();
    for sol in &run.solutions {
        let mut csv = Csv::new(&[coord_cols("x", dim), vec!["u".into()]].concat());
        for i in 0..grid.n_nodes() {
            let mut row: Vec<String> = grid.coord(i).iter().map(|&x| num(x)).collect();
            row.push(num(sol.u[i]));
            csv.row(row);
        }
        csv.write(&layout.path(&format!("u_eps_{}.csv", num(sol.eps))))?;
    }
    Ok(())
}

fn start_point(cfg: &RunConfig) -> (Vec<f64>, &'static str) {
    match &cfg.experiment.q0 {
        Some(q) => (q.clone(), "config"),
        None => (gamma_minimum(&cfg.problem, cfg.experiment.lattice, cfg.numerics.critical_tol), "gamma_minimum"),
    }
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<Summary, Failure> {
    let layout = Layout::dir(out)?;
    let data = &cfg.problem;
    let grid = grid(cfg)?;
    dump(&layout, cfg, &grid, cfg.numerics.eps_ladder[0])?;
    let base = base_profile(cfg)?;
    let (q0, source) = start_point(cfg);
    let params = cfg.solve_params();
    let run = continuation(&grid, data, &base, &q0, &params)?;

    let mut csv = Csv::new(
        &[
            vec!["eps".to_string()],
            coord_cols("x", data.dim),
            ["height", "energy", "rescaled_energy", "residual", "iterations"].map(String::from).to_vec(),
        ]
        .concat(),
    );
    for s in &run.solutions {
        let mut row = vec![num(s.eps)];
        row.extend(s.location.iter().map(|&x| num(x)));
        row.extend([num(s.height), num(s.energy), num(s.rescaled_energy), num(s.residual), s.iterations.to_string()]);
        csv.row(row);
    }
    csv.write(&layout.main("solutions.csv"))?;
    write_fields(&layout, &grid, &run)?;

    let last = run.solutions.last().expect("ladder is nonempty");
    let mut s = Summary::new();
    start(&mut s, "solve");
    s.put("q0", point(&q0));
    s.put("q0_source", source);
    s.put("rungs", run.solutions.len());
    s.put("final_location", point(&last.location));
    s.num("final_offset_spacings", dist(&last.location, &q0) / grid.max_spacing());
    s.num("final_height", last.height);
    s.put("gamma_degenerate", run.gamma_degenerate);
    match empirical_eps0(&grid, data, &base, &q0, &params) {
        Some(e) => s.num("empirical_eps0", e),
        None => s.put("empirical_eps0", "none"),
    }
    finish(&layout, cfg, &s)?;
    Ok(s)
}

fn report_csv(dim: usize, report: &ExpansionReport) -> Csv {
    let header = [
        coord_cols("Q", dim),
        ["eps", "A_eps", "c0_gamma", "gap", "grad_ratio", "ansatz_residual", "w_norm", "coercivity", "status"]
            .map(String::from)
            .to_vec(),
    ]
    .concat();
    let mut csv = Csv::new(&header);
    for r in &report.rows {
        let mut row: Vec<String> = r.q.iter().map(|&x| num(x)).collect();
        row.push(num(r.eps));
        match &r.sample {
            Ok(s) => row.extend([s.a_eps, s.c0_gamma, s.gap, s.grad_ratio, s.ansatz_residual, s.w_norm, s.coercivity].map(num)),
            Err(_) => row.extend(std::iter::repeat_n("NaN".to_string(), 7)),
        }
        row.push(r.status().to_string());
        csv.row(row);
    }
    csv
}

pub fn reduce(cfg: &RunConfig, out: &Path) -> Result<Summary, Failure> {
    let q = cfg.experiment.q.clone().ok_or_else(|| ConfigError("experiment.q: required for reduce (or pass --q)".into()))?;
    let layout = Layout::file(out)?;
    let data = &cfg.problem;
    let grid = grid(cfg)?;
    let base = base_profile(cfg)?;
    let opts = cfg.reduction_options();
    let ladder = &cfg.numerics.eps_ladder;
    let report = expansion_report(&grid, data, &base, std::slice::from_ref(&q), ladder, &opts)?;
    report_csv(data.dim, &report).write(&layout.main("reduce.csv"))?;

    let mut s = Summary::new();
    start(&mut s, "reduce");
    s.put("q", point(&q));
    let failed = report.rows.iter().filter(|r| r.sample.is_err()).count();
    s.put("failed_rows", failed);
    let slopes = &report.slopes[0];
    s.put("slope_rungs", SLOPE_RUNGS);
    s.num("ansatz_residual_slope", slopes.ansatz_residual.slope);
    s.num("ansatz_residual_fit_residual", slopes.ansatz_residual.residual);
    s.put("ansatz_residual_slope_pass", slopes.ansatz_residual.slope >= 0.9);
    s.num("w_norm_slope", slopes.w_norm.slope);
    s.num("w_norm_fit_residual", slopes.w_norm.residual);
    s.put("w_norm_slope_pass", slopes.w_norm.slope >= 0.9);
    s.num("gap_slope", slopes.gap.slope);
    s.num("gap_fit_residual", slopes.gap.residual);
    s.put("gap_slope_pass", slopes.gap.slope >= 1.5);

    let ok: Vec<_> = report.rows.iter().filter_map(|r| r.sample.as_ref().ok()).collect();
    let coer: Vec<f64> = ok.iter().map(|x| x.coercivity).collect();
    let cmin = coer.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = coer.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    s.num("coercivity_min", cmin);
    s.num("coercivity_max", cmax);
    s.num("coercivity_spread", cmax / cmin);
    s.put("coercivity_pass", failed == 0 && cmin > 0.0 && cmax / cmin < 2.0);

    let ratios: Vec<f64> = ok.iter().map(|x| x.grad_ratio).collect();
    if let Some(&last) = ratios.last() {
        let dev = (last - 1.0).abs();
        let trending = ratios[..ratios.len() - 1].iter().filter(|r| r.is_finite()).all(|r| (r - 1.0).abs() > dev);
        s.num("grad_ratio_smallest_eps", last);
        s.put("grad_ratio_pass", (0.9..=1.1).contains(&last));
        s.put("grad_ratio_trending", trending);
    }

    // probes at the smallest rung
    let eps_min = *ladder.last().expect("ladder is nonempty");
    let slice = EpsilonSlice::new(&grid, data, base.clone(), eps_min, opts.clone())?;
    match slice.uniqueness_probe(&q, cfg.experiment.seed) {
        Ok((_, _, diff)) => {
            s.num("uniqueness_diff", diff);
            s.put("uniqueness_pass", diff <= 10.0 * opts.tol);
        }
        Err(e) => s.put("uniqueness_error", e),
    }
    match slice.coercivity_estimate(&q) {
        Ok(c) => {
            let worst = c.translation_quotients.iter().fold(0.0f64, |a, r| a.max(r.abs()));
            s.num("translation_quotient_ratio", worst / c.estimate);
            s.put("translation_pass", worst <= 1e-2 * c.estimate);
        }
        Err(e) => s.put("translation_error", e),
    }
    let mut sym = 0.0f64;
    for axis in 0..data.dim {
        for kind in [MomentKind::GradSquared, MomentKind::Squared] {
            sym = sym.max(radial_symmetry_moment(&base, axis, kind)?.abs());
        }
    }
    s.num("symmetry_moment_max", sym);
    s.put("symmetry_pass", sym < 1e-10);
    finish(&layout, cfg, &s)?;
    Ok(s)
}

pub fn verify_expansion(cfg: &RunConfig, out: &Path) -> Result<Summary, Failure> {
    let layout = Layout::file(out)?;
    let data = &cfg.problem;
    let grid = grid(cfg)?;
    let base = base_profile(cfg)?;
    let qs = lattice_points(data, cfg.experiment.lattice);
    let ladder = &cfg.numerics.eps_ladder;
    let report = expansion_report(&grid, data, &base, &qs, ladder, &cfg.reduction_options())?;
    report_csv(data.dim, &report).write(&layout.main("expansion.csv"))?;

    let mut s = Summary::new();
    start(&mut s, "verify-expansion");
    s.put("lattice_points", qs.len());
    s.put("failed_rows", report.rows.iter().filter(|r| r.sample.is_err()).count());
    for (eps, g) in ladder.iter().zip(&report.max_scaled_gap) {
        s.num(&format!("max_scaled_gap_eps_{}", num(*eps)), *g);
    }
    let finite: Vec<f64> = report.max_scaled_gap.iter().cloned().filter(|g| g.is_finite()).collect();
    s.put("max_scaled_gap_nonincreasing", finite.windows(2).all(|w| w[1] <= w[0]));
    if let Some(g) = &report.argmin_gamma {
        s.put("argmin_gamma", point(g));
    }
    // largest rung from which every smaller rung has matching argmins
    let mut transfer = None;
    for (eps, a) in ladder.iter().zip(&report.argmin_a).rev() {
        if a.is_some() && a == &report.argmin_gamma {
            transfer = Some(*eps);
        } else {
            break;
        }
    }
    for (eps, a) in ladder.iter().zip(&report.argmin_a) {
        s.put(&format!("argmin_a_eps_{}", num(*eps)), a.as_deref().map(point).unwrap_or_else(|| "none".into()));
    }
    match transfer {
        Some(e) => s.num("argmin_transfer_eps", e),
        None => s.put("argmin_transfer_eps", "none"),
    }
    finish(&layout, cfg, &s)?;
    Ok(s)
}

pub fn spike_track(cfg: &RunConfig, out: &Path) -> Result<Summary, Failure> {
    let layout = Layout::dir(out)?;
    let data = &cfg.problem;
    let grid = grid(cfg)?;
    let base = base_profile(cfg)?;
    let (q0, source) = start_point(cfg);
    let run = continuation(&grid, data, &base, &q0, &cfg.solve_params())?;
    let c0 = profile_moments(&base).c0_bar;
    let h = grid.max_spacing();

    let header = [
        "eps",
        "offset",
        "offset_spacings",
        "height",
        "predicted_height",
        "rescaled_energy",
        "c0_gamma",
        "energy_gap",
        "ansatz_residual",
        "iterations",
    ];
    let mut csv = Csv::new(&[vec![header[0].to_string()], coord_cols("x", data.dim), header[1..].iter().map(|s| s.to_string()).collect()].concat());
    let mut eps = Vec::new();
    let mut offsets = Vec::new();
    let mut residuals = Vec::new();
    let mut gaps = Vec::new();
    for sol in &run.solutions {
        let offset = dist(&sol.location, &q0);
        let predicted = scaled_profile(&q0, data, base.clone(), sol.eps)?.amplitude * base.u0;
        let c0g = c0 * gamma::gamma(&sol.location, data)?;
        let gap = (sol.rescaled_energy - c0g).abs();
        let res = ansatz_residual_norm(&grid, data, &base, &q0, sol.eps)?;
        let mut row = vec![num(sol.eps)];
        row.extend(sol.location.iter().map(|&x| num(x)));
        row.extend([offset, offset / h, sol.height, predicted, sol.rescaled_energy, c0g, gap, res].map(num));
        row.push(sol.iterations.to_string());
        csv.row(row);
        eps.push(sol.eps);
        offsets.push(offset);
        residuals.push(res);
        gaps.push(gap);
    }
    csv.write(&layout.main("track.csv"))?;
    write_fields(&layout, &grid, &run)?;

    let final_spacings = offsets.last().copied().unwrap_or(f64::NAN) / h;
    let mut s = Summary::new();
    start(&mut s, "spike-track");
    s.put("q0", point(&q0));
    s.put("q0_source", source);
    s.put("rungs", run.solutions.len());
    s.num("grid_spacing", h);
    s.num("final_offset_spacings", final_spacings);
    // the location fit carries round-off far below a grid spacing
    let slack = 1e-9 * h;
    s.put("offset_nonincreasing", offsets.windows(2).all(|w| w[1] <= w[0] + slack));
    s.put("offset_pass", final_spacings <= 2.0);
    s.num("ansatz_residual_slope", loglog_slope(&eps, &residuals, SLOPE_RUNGS).slope);
    s.num("energy_gap_slope", loglog_slope(&eps, &gaps, SLOPE_RUNGS).slope);
    s.put("gamma_degenerate", run.gamma_degenerate);
    finish(&layout, cfg, &s)?;
    Ok(s)
}

/// Default output location when neither `--out` nor `output` is given.
pub fn default_out(command: &str, single_file: bool) -> PathBuf {
    if single_file {
        PathBuf::from("out").join(format!("{command}.csv"))
    } else {
        PathBuf::from("out").join(command)
    }
}
