use mesodyn::verify::{run_suite, DEFAULT_SEED};

#[test]
fn property_suite_passes_with_default_seed() {
    let outcomes = run_suite(DEFAULT_SEED);
    for o in &outcomes {
        println!(
            "{:<34} {:>12.4e} {:?} {:e} {:?}",
            o.name, o.value, o.bound, o.threshold, o.error
        );
    }
    let failed: Vec<_> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.name)
        .collect();
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}
