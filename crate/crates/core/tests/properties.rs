use proptest::prelude::*;
use spikelab_core::discretization::{assemble, build_grid};
use spikelab_core::fit::loglog_slope;
use spikelab_core::problem::{CoefficientField, DomainSpec, ProblemData};
use spikelab_core::solver::{locate_spike, validate_ladder, DiscreteProblem};

fn well(base: f64, cx: f64, cy: f64, curv: f64) -> CoefficientField {
    CoefficientField::QuadraticWell { base, center: vec![cx, cy], curvature: curv }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assembled_operator_is_symmetric_with_zero_flux_row_sums(
        nx in 8usize..24, ny in 8usize..24,
        eps in 0.05f64..1.0,
        jb in 0.5f64..2.0, vb in 0.5f64..2.0,
        cx in 0.0f64..1.0, cy in 0.0f64..1.0,
    ) {
        let data = ProblemData::new(2, 3.0, well(jb, cx, cy, 0.7), well(vb, cy, cx, 1.3), DomainSpec::unit_box(2)).unwrap();
        let grid = build_grid(&data.domain, &[nx, ny]).unwrap();
        let op = assemble(&grid, &data, eps).unwrap();
        prop_assert!(op.flux.is_symmetric());
        for r in 0..op.n() {
            let s: f64 = op.flux.row(r).map(|(_, v)| v).sum();
            let d = op.flux.get(r, r).unwrap();
            prop_assert!(s.abs() <= 1e-12 * d.abs().max(1.0));
        }
        let ones = vec![1.0; op.n()];
        let a1 = op.apply(&ones);
        for (a, p) in a1.iter().zip(&op.potential) {
            prop_assert!((a - p).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn constant_states_have_closed_form_energy(c in 0.0f64..2.0, v in 0.5f64..3.0, eps in 0.05f64..0.5) {
        let data = ProblemData::new(2, 3.0, CoefficientField::constant(1.0), CoefficientField::constant(v), DomainSpec::unit_box(2)).unwrap();
        let grid = build_grid(&data.domain, &[12, 12]).unwrap();
        let pb = DiscreteProblem::new(&grid, &data, eps).unwrap();
        let u = vec![c; pb.n()];
        let expected = 0.5 * v * c * c - c.powi(4) / 4.0;
        prop_assert!((pb.energy(&u) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    #[test]
    fn spike_location_is_subgrid_accurate(qx in 0.3f64..0.7, qy in 0.3f64..0.7) {
        let spec = DomainSpec::unit_box(2);
        let grid = build_grid(&spec, &[65, 65]).unwrap();
        let u: Vec<f64> = (0..grid.n_nodes())
            .map(|i| {
                let x = grid.coord(i);
                (-((x[0] - qx).powi(2) + (x[1] - qy).powi(2)) / 0.02).exp()
            })
            .collect();
        let loc = locate_spike(&u, &grid).unwrap();
        let h = grid.max_spacing();
        prop_assert!((loc[0] - qx).abs() < 0.1 * h && (loc[1] - qy).abs() < 0.1 * h, "{loc:?} vs {qx},{qy}");
    }

    #[test]
    fn power_laws_are_recovered(order in 0.5f64..3.0, scale in 0.1f64..10.0) {
        let eps: [f64; 5] = [0.4, 0.3, 0.2, 0.15, 0.1];
        let v: Vec<f64> = eps.iter().map(|e| scale * e.powf(order)).collect();
        prop_assert!((loglog_slope(&eps, &v, usize::MAX).slope - order).abs() < 1e-10);
    }

    #[test]
    fn ladders_must_strictly_decrease(mut rungs in proptest::collection::vec(0.01f64..1.0, 2..6)) {
        rungs.sort_by(|a, b| b.total_cmp(a));
        rungs.dedup();
        prop_assume!(rungs.len() >= 2);
        prop_assert!(validate_ladder(&rungs).is_ok());
        rungs.reverse();
        let err = validate_ladder(&rungs).unwrap_err().to_string();
        prop_assert!(err.contains("eps_ladder"));
    }
}
