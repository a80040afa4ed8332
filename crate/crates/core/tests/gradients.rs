#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use common::gradcheck::{run_suite, INSTANCES, TOL};

#[test]
fn every_op_and_loss_matches_finite_differences() {
    let failures: Vec<String> = run_suite(INSTANCES)
        .into_iter()
        .filter(|&(_, worst)| !(worst <= TOL))
        .map(|(name, worst)| format!("{name}: {worst:.3e}"))
        .collect();
    assert!(failures.is_empty(), "relative error above {TOL}: {failures:?}");
}
