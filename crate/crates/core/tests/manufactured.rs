use std::f64::consts::PI;

use spikelab_core::discretization::{assemble, build_grid};
use spikelab_core::fit::loglog_slope;
use spikelab_core::linalg::SparseLu;
use spikelab_core::problem::{CoefficientField, DomainSpec, Monomial, ProblemData};

// u = cos(πx) cos(πy) has zero normal derivative on the unit square.
fn exact(x: &[f64]) -> f64 {
    (PI * x[0]).cos() * (PI * x[1]).cos()
}

fn data() -> ProblemData {
    let j = CoefficientField::Polynomial {
        terms: vec![
            Monomial { coefficient: 1.0, powers: vec![0, 0] },
            Monomial { coefficient: 0.5, powers: vec![1, 1] },
        ],
    };
    let v = CoefficientField::QuadraticWell { base: 1.0, center: vec![0.0, 0.0], curvature: 1.0 };
    ProblemData::new(2, 3.0, j, v, DomainSpec::unit_box(2)).unwrap()
}

fn forcing(x: &[f64], eps: f64, data: &ProblemData) -> f64 {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let grad_u = [-PI * sx * cy, -PI * cx * sy];
    let lap_u = -2.0 * PI * PI * cx * cy;
    let j = data.j.value(x);
    let gj = data.j.gradient(x);
    let div = j * lap_u + gj[0] * grad_u[0] + gj[1] * grad_u[1];
    -eps * eps * div + data.v.value(x) * exact(x)
}

fn max_error(n: usize, eps: f64) -> f64 {
    let data = data();
    let grid = build_grid(&data.domain, &[n, n]).unwrap();
    let op = assemble(&grid, &data, eps).unwrap();
    let a = op.flux.shift_diagonal(&op.potential);
    let rhs: Vec<f64> = (0..grid.n_nodes()).map(|i| grid.weights[i] * forcing(grid.coord(i), eps, &data)).collect();
    let lu = SparseLu::factor(a, grid.symbolic_cache()).unwrap();
    let u = lu.solve(&rhs).unwrap();
    (0..grid.n_nodes()).map(|i| (u[i] - exact(grid.coord(i))).abs()).fold(0.0, f64::max)
}

#[test]
fn neumann_operator_converges_at_second_order() {
    let ns = [32usize, 64, 128];
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let err: Vec<f64> = ns.iter().map(|&n| max_error(n, 1.0)).collect();
    let fit = loglog_slope(&h, &err, usize::MAX);
    assert!(fit.slope >= 1.8, "slope {} errors {:?}", fit.slope, err);
}

#[test]
fn small_eps_still_second_order() {
    let ns = [32usize, 64, 128];
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / (n - 1) as f64).collect();
    let err: Vec<f64> = ns.iter().map(|&n| max_error(n, 0.3)).collect();
    let fit = loglog_slope(&h, &err, usize::MAX);
    assert!(fit.slope >= 1.8, "slope {} errors {:?}", fit.slope, err);
}
