use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikelab_core::discretization::build_grid;
use spikelab_core::problem::{CoefficientField, DomainSpec, ProblemData};
use spikelab_core::solver::DiscreteProblem;

#[test]
fn energy_gradient_matches_directional_differences() {
    let data = ProblemData::new(
        2,
        3.0,
        CoefficientField::QuadraticWell { base: 1.0, center: vec![0.3, 0.6], curvature: 0.5 },
        CoefficientField::QuadraticWell { base: 1.0, center: vec![0.5, 0.5], curvature: 1.0 },
        DomainSpec::unit_box(2),
    )
    .unwrap();
    let grid = build_grid(&data.domain, &[64, 64]).unwrap();
    let pb = DiscreteProblem::new(&grid, &data, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = 1e-5;
    for trial in 0..20 {
        let u: Vec<f64> = (0..pb.n()).map(|_| rng.random_range(-1.0..2.0)).collect();
        let d: Vec<f64> = (0..pb.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = pb.gradient(&u);
        let exact: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let up: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
        let um: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - t * b).collect();
        let fd = (pb.energy(&up) - pb.energy(&um)) / (2.0 * t);
        let rel = (fd - exact).abs() / exact.abs();
        assert!(rel <= 1e-6, "trial {trial}: rel {rel:e}");
    }
}
