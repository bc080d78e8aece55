use chainlb_core::instance::{make_instance, FiniteSumInstance};
use chainlb_core::oracle::{OracleConfig, OracleError, OracleSession, AUDIT_TOLERANCE};
use chainlb_core::solvers::{Solver, StepOutcome};
use chainlb_core::Family;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Arbitrary linear-span algorithm: random component, query at a random
/// span element, new iterate a random combination of span elements.
struct RandomSpan {
    x: Vec<f64>,
    span: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    n: usize,
    step: f64,
}

impl RandomSpan {
    fn new(d: usize, n: usize, step: f64, seed: u64) -> Self {
        Self { x: vec![0.0; d], span: vec![vec![0.0; d]], rng: ChaCha8Rng::seed_from_u64(seed), n, step }
    }
}

impl Solver for RandomSpan {
    fn step(&mut self, oracle: &mut OracleSession<'_>) -> Result<StepOutcome, OracleError> {
        let i = self.rng.gen_range(0..self.n);
        let at = if self.rng.gen_bool(0.7) { self.x.clone() } else { self.span[self.rng.gen_range(0..self.span.len())].clone() };
        let (_, g) = oracle.query(i, &at)?;
        let b = -self.step * self.rng.gen_range(0.0..2.0);
        let c = self.rng.gen_range(-0.2..0.2);
        let v = self.span[self.rng.gen_range(0..self.span.len())].clone();
        for k in 0..self.x.len() {
            self.x[k] += b * g[k] + c * (v[k] - self.x[k]);
        }
        self.span.push(g);
        self.span.push(self.x.clone());
        Ok(StepOutcome { iterate_changed: true })
    }

    fn iterate(&self) -> &[f64] {
        &self.x
    }

    fn name(&self) -> &'static str {
        "random_span"
    }
}

fn small_instances() -> Vec<FiniteSumInstance> {
    vec![
        make_instance(Family::Sc, 4, 1.0, 1e-2, 1.0, 1e-4).unwrap(),
        make_instance(Family::Cvx, 4, 1.0, 1.0, 1.0, 1e-4).unwrap(),
        make_instance(Family::AvgNc, 4, 1.0, 0.04, 1.0, 6e-4).unwrap(),
        make_instance(Family::IndNc, 4, 1.0, 0.1, 1.0, 1e-3).unwrap(),
        make_instance(Family::OmegaN, 6, 1.0, 1.0, 1.0, 0.2).unwrap(),
        make_instance(Family::OmegaNCvx, 6, 1.0, 1.0, 1.0, 0.2).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn progress_is_bounded_and_certificates_hold(seed in any::<u64>(), which in 0usize..6, step_scale in 0.1f64..3.0) {
        let inst = &small_instances()[which];
        let step = step_scale / inst.meta.f_interval.1.abs().max(inst.component_smoothness());
        let mut s = RandomSpan::new(inst.dim(), inst.n, step, seed);
        let mut session = OracleSession::with_config(inst, seed, OracleConfig::audit());
        session.set_initial(s.iterate()).unwrap();
        let target = inst.meta.target_epsilon;
        let mut prev_k = session.blocks_below(s.iterate());
        let mut lost = false;
        for _ in 0..(2 * inst.meta.lower_bound_ifo).max(40) {
            s.step(&mut session).unwrap();
            let x = s.iterate().to_vec();
            session.observe_iterate(&x);
            let total: usize = session.prefix_profile().iter().sum();
            prop_assert!(total as u64 <= session.ifo_count());
            let cert = session.certificate(&x);
            prop_assert!(cert.blocks_below_threshold <= prev_k, "block count grew");
            prev_k = cert.blocks_below_threshold;
            let live = cert.floor_value >= target;
            prop_assert!(!(lost && live), "certificate reappeared");
            lost |= !live;
            let r = inst.residual(&x);
            prop_assert!(r >= cert.floor_value * (1.0 - 1e-10), "{}: residual {r:e} < floor {:e} at {}", inst.family, cert.floor_value, session.ifo_count());
            // before the certified bound the certificate cannot have lapsed
            prop_assert!(live || session.ifo_count() >= inst.meta.lower_bound_ifo, "lapsed at {}", session.ifo_count());
        }
        prop_assert_eq!(session.zero_chain_violations(), 0);
        let report = session.span_audit(AUDIT_TOLERANCE).unwrap();
        prop_assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn corrupted_step_fails_exactly_there(seed in any::<u64>(), which in 0usize..6, frac in 0.0f64..1.0) {
        let inst = &small_instances()[which];
        let step = 1.0 / inst.component_smoothness();
        let mut s = RandomSpan::new(inst.dim(), inst.n, step, seed);
        let mut session = OracleSession::with_config(inst, seed, OracleConfig::audit());
        session.set_initial(s.iterate()).unwrap();
        let steps = 30usize;
        for _ in 0..steps {
            s.step(&mut session).unwrap();
            let x = s.iterate().to_vec();
            session.observe_iterate(&x);
        }
        let t = ((steps - 1) as f64 * frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let junk: Vec<f64> = (0..inst.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assert!(session.corrupt_iterate(t, &junk));
        let report = session.span_audit(AUDIT_TOLERANCE).unwrap();
        // a random direction lies outside a span of rank < d; skip the rare full-rank case
        if report.final_rank < inst.dim() || report.violations.len() == 1 {
            prop_assert_eq!(report.violations.iter().map(|v| v.t).collect::<Vec<_>>(), vec![t as u64]);
        }
    }
}

#[test]
fn query_skipping_a_link_is_rejected() {
    let inst = make_instance(Family::Cvx, 2, 1.0, 1.0, 1.0, 1e-4).unwrap();
    let mut session = OracleSession::new(&inst, 0);
    let mut x = vec![0.0; inst.dim()];
    x[1] = 1.0; // block 0, second coordinate, first still zero
    assert!(matches!(session.query(0, &x), Err(OracleError::ZeroChainViolation { component: 0, .. })));
    assert_eq!(session.ifo_count(), 0);
}
