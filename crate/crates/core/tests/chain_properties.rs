use chainlb_core::chainfun::*;
use chainlb_core::tridiag::SymTridiag;
use proptest::prelude::*;

fn span_point(d: usize, t: usize, vals: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for k in 0..t.min(d) {
        x[k] = vals[k % vals.len()];
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_tail_is_exactly_zero(
        alpha in 1e-4f64..1.0,
        m in 2usize..40,
        t_frac in 0.0f64..1.0,
        vals in prop::collection::vec(-5.0f64..5.0, 1..8),
    ) {
        let t = ((m - 1) as f64 * t_frac) as usize;
        let specs = [
            ChainFunctionSpec::NesterovSc(NesterovScParams::new(alpha, m).unwrap()),
            ChainFunctionSpec::NesterovC(NesterovCParams::new(m).unwrap()),
            ChainFunctionSpec::Carmon(CarmonParams::new(alpha, m).unwrap()),
        ];
        for s in specs {
            let x = span_point(s.dim(), t, &vals);
            let mut g = vec![0.0; s.dim()];
            s.value_grad_into(&x, &mut g);
            prop_assert!(g[t + 1..].iter().all(|v| *v == 0.0), "{s:?} at span {t}");
        }
    }

    #[test]
    fn nsc_gap_at_zero_closed_form(alpha in 1e-4f64..1.0, m in 1usize..60) {
        let p = NesterovScParams::new(alpha, m).unwrap();
        let h = nsc_hessian(&p);
        let mut b = vec![0.0; m];
        b[0] = (1.0 - alpha) / 4.0;
        let xs = h.solve(&b).unwrap();
        // gap at 0 of ½xᵀHx − bᵀx is ½ bᵀx*
        let gap = 0.5 * b[0] * xs[0];
        let s = alpha.sqrt();
        prop_assert!((gap - (1.0 - s).powi(2) / 8.0).abs() <= 1e-12);
        let q = p.q();
        if q > 0.0 {
            prop_assert!(gap <= q * q / (1.0 - q * q) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fc_nonnegative_and_floor_on_slice(
        alpha in 1e-3f64..1.0,
        m in 2usize..30,
        x in prop::collection::vec(-4.0f64..4.0, 32),
    ) {
        let p = CarmonParams::new(alpha, m).unwrap();
        let d = p.dim();
        let mut y = x[..d].to_vec();
        let (v, _) = fc_eval(&y, &p).unwrap();
        prop_assert!(v >= 0.0);
        y[d - 2] = 0.0;
        y[d - 1] = 0.0;
        let (_, g) = fc_eval(&y, &p).unwrap();
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(gn >= fc_grad_floor(&p) * (1.0 - 1e-12), "{gn} < {}", fc_grad_floor(&p));
    }

    #[test]
    fn tridiagonal_solve_and_spectrum(
        diag in prop::collection::vec(2.5f64..4.0, 2..30),
        off_seed in prop::collection::vec(-1.0f64..1.0, 30),
    ) {
        let m = diag.len();
        let off = off_seed[..m - 1].to_vec();
        let h = SymTridiag::new(diag.clone(), off);
        // diagonally dominant: PD
        let b: Vec<f64> = (0..m).map(|k| k as f64 - 1.0).collect();
        let x = h.solve(&b).unwrap();
        let mut r = vec![0.0; m];
        h.matvec(&x, &mut r);
        for (ri, bi) in r.iter().zip(&b) {
            prop_assert!((ri - bi).abs() <= 1e-10);
        }
        let eig = h.eigenvalues(1e-12);
        prop_assert_eq!(eig.len(), m);
        let trace: f64 = diag.iter().sum();
        prop_assert!((eig.iter().sum::<f64>() - trace).abs() <= 1e-9 * trace);
        for (k, e) in eig.iter().enumerate() {
            prop_assert!(h.count_below(*e - 1e-9) <= k);
        }
    }
}

#[test]
fn gamma_reference_values() {
    // independent: 120 ∫_1^0 s²(s−1)/(1+s²) ds = 120(1/2 − π/4 + ln 2 / 2) ... evaluated directly
    let at_zero = 120.0 * (0.5 - std::f64::consts::FRAC_PI_4 + 0.5 * 2f64.ln());
    assert!((gamma1(0.0) - at_zero).abs() < 1e-12, "{} vs {at_zero}", gamma1(0.0));
    assert_eq!(gamma1(1.0), 0.0);
    assert_eq!(gamma1_prime(0.0), 0.0);
    assert_eq!(gamma1_prime(1.0), 0.0);
}

#[test]
fn nc_minimizer_and_distance_closed_form() {
    for m in [1usize, 2, 7, 50] {
        let p = NesterovCParams::new(m).unwrap();
        let x = nc_minimizer(&p);
        for (k, v) in x.iter().enumerate() {
            assert!((v - (1.0 - (k + 1) as f64 / (2 * m) as f64)).abs() < 1e-15);
        }
        let d2: f64 = x.iter().map(|v| v * v).sum();
        let mf = m as f64;
        assert!((d2 - (2.0 * mf - 1.0) * (4.0 * mf - 1.0) / (12.0 * mf)).abs() < 1e-10);
    }
}
