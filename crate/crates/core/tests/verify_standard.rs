use chainlb_core::verify::{run_suite, CaseStatus, Grid};

#[test]
fn standard_grid_passes() {
    let r = run_suite(&Grid::standard());
    for c in &r.cases {
        println!("{:8} {:?} checks={} witness={:?}", c.id, c.status, c.checks, c.witness);
    }
    assert!(r.cases.iter().all(|c| c.status == CaseStatus::Pass));
}

#[test]
fn factory_instances_cover_every_family() {
    for n in [1usize, 4, 16, 64] {
        let fams: Vec<_> = chainlb_core::verify::standard_factory_instances(n).iter().map(|i| i.family).collect();
        assert_eq!(fams, chainlb_core::Family::ALL.to_vec(), "n={n}");
    }
}
