use chainlb_bench::format::*;
use chainlb_core::instance::make_instance;
use chainlb_core::oracle::{OracleConfig, OracleSession};
use chainlb_core::solvers::{run_spec, RunOptions, SolverKind, SolverSpec};
use chainlb_core::Family;
use proptest::prelude::*;

fn every_family(n: usize) -> Vec<chainlb_core::FiniteSumInstance> {
    vec![
        make_instance(Family::Sc, n, 1.0, 1e-3, 1.0, 1e-4).unwrap(),
        make_instance(Family::Cvx, n, 1.0, 2.0, 1.0, 1e-4).unwrap(),
        make_instance(Family::AvgNc, n, 1.0, 0.04, 1.0, 3e-4).unwrap(),
        make_instance(Family::IndNc, n, 1.0, 0.1, 1.0, 5e-4).unwrap(),
        make_instance(Family::OmegaN, n, 1.0, 1.0, 1.0, 0.1).unwrap(),
        make_instance(Family::OmegaNCvx, n, 2.0, 1.5, 1.0, 0.1).unwrap(),
    ]
}

#[test]
fn instance_documents_round_trip_bit_for_bit() {
    for inst in every_family(8) {
        let doc = InstanceDoc::new(inst.clone(), 42);
        let text = doc.to_json();
        let back = InstanceDoc::from_json(&text).unwrap();
        assert_eq!(back, doc, "{}", inst.family);
        assert_eq!(back.to_json(), text);
        assert!(text.contains(INSTANCE_SCHEMA));
        assert!(text.contains(&format!("\"{}\"", inst.family.tag())));
    }
}

#[test]
fn wrong_schema_is_rejected() {
    let inst = make_instance(Family::OmegaN, 4, 1.0, 1.0, 1.0, 0.1).unwrap();
    let text = InstanceDoc::new(inst, 0).to_json().replace(INSTANCE_SCHEMA, "chainlb.instance/v0");
    assert!(matches!(InstanceDoc::from_json(&text), Err(FormatError::Schema { .. })));
}

#[test]
fn trace_and_points_round_trip() {
    let inst = make_instance(Family::AvgNc, 4, 1.0, 0.04, 1.0, 6e-4).unwrap();
    let spec = SolverSpec::defaults(SolverKind::Svrg, &inst, inst.meta.target_epsilon, 7);
    let mut s = OracleSession::with_config(&inst, 7, OracleConfig::audit());
    run_spec(&spec, &mut s, RunOptions::new(100, inst.meta.target_epsilon), None).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, s.trace()).unwrap();
    assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 100);
    assert_eq!(read_trace(&buf[..]).unwrap(), s.trace());
    let mut pts = Vec::new();
    write_points(&mut pts, s.store()).unwrap();
    let store = read_points(&pts[..]).unwrap();
    for (id, p) in s.store().iter() {
        assert_eq!(store.get(id).unwrap(), p);
    }
    let a = chainlb_core::oracle::span_audit(&inst, s.trace(), &store, s.initial_id(), 1e-8).unwrap();
    assert!(a.passed());
}

#[test]
fn bad_trace_line_reports_its_number() {
    let text = "{\"t\":0,\"component\":0,\"point_id\":0,\"iterate_id\":null,\"grad_norm\":1.0,\"prefix_digest\":3}\nnot json\n";
    match read_trace(text.as_bytes()) {
        Err(FormatError::Line { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factory_documents_round_trip(n in 1usize..50, fam in 0usize..6) {
        if let Some(inst) = every_family(n).into_iter().nth(fam) {
            let doc = InstanceDoc::new(inst, n as u64);
            prop_assert_eq!(InstanceDoc::from_json(&doc.to_json()).unwrap(), doc);
        }
    }
}
