use proptest::prelude::*;
use spikelab_core::ground_state::{profile_moments, solve_ground_state};

#[test]
fn one_dimensional_solitons() {
    let cubic = solve_ground_state(1, 3.0, 1e-12).unwrap();
    let quad = solve_ground_state(1, 2.0, 1e-12).unwrap();
    for k in 0..=2000 {
        let r = k as f64 * 0.01;
        let sech = 1.0 / r.cosh();
        assert!((cubic.value(r) - 2f64.sqrt() * sech).abs() <= 1e-8, "p=3 at r={r}");
        let s2 = 1.0 / (r / 2.0).cosh();
        assert!((quad.value(r) - 1.5 * s2 * s2).abs() <= 1e-8, "p=2 at r={r}");
    }
    let m = profile_moments(&cubic);
    assert!((m.m_pp1 - 16.0 / 3.0).abs() <= 1e-8);
    assert!((m.c0_bar - 4.0 / 3.0).abs() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // Testing the equation against U and against x·∇U gives two independent
    // identities: ∫|∇U|² + ∫U² = ∫U^{p+1} and the Pohozaev balance.
    #[test]
    fn energy_and_pohozaev_identities(dim in 1usize..=3, t in 0.0f64..1.0) {
        let p = if dim == 3 { 1.5 + 3.0 * t } else { 1.5 + 3.5 * t };
        let prof = solve_ground_state(dim, p, 1e-10).unwrap();
        let m = profile_moments(&prof);
        prop_assert!((m.m_grad2 + m.m_sq - m.m_pp1).abs() <= 1e-6 * m.m_pp1);
        let n = dim as f64;
        let lhs = (n - 2.0) / 2.0 * m.m_grad2 + n / 2.0 * m.m_sq;
        let rhs = n / (p + 1.0) * m.m_pp1;
        prop_assert!((lhs - rhs).abs() <= 1e-6 * rhs, "{lhs} vs {rhs}");
        prop_assert!(prof.u_values.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(prof.u0 > 1.0);
    }
}
