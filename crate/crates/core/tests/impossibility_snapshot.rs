use minquota::strategy::impossibility_scenario;

#[test]
fn certificate_matches_snapshot() {
    let report = impossibility_scenario().unwrap();
    assert!(report.is_contradiction());
    assert_eq!(
        report.to_string(),
        include_str!("snapshots/impossibility.txt")
    );
}
