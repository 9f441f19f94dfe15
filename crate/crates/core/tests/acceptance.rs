//! Acceptance criteria at full size. Each criterion prints one PASS/FAIL line.

use stathyper::suite::{self, CriterionReport, SuiteSize};

const SEED: u64 = 0xC0FFEE;

fn check(r: CriterionReport) {
    println!("[{}] {:>2} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.name, r.detail);
    assert!(r.passed, "criterion {} failed: {}", r.id, r.detail);
}

#[test]
fn c01_entropy_identities() {
    check(suite::entropy_identities(SEED, &SuiteSize::full()));
}

#[test]
fn c02_variation_finite_differences() {
    check(suite::variation_finite_differences(SEED, &SuiteSize::full()));
}

#[test]
fn c03_classification() {
    check(suite::classification(SEED, &SuiteSize::full()));
}

#[test]
fn c04_total_uncorrelation() {
    check(suite::total_uncorrelation(SEED, &SuiteSize::full()));
}

#[test]
fn c05_reversible_solver() {
    check(suite::reversible_solver(SEED, &SuiteSize::full()));
}

#[test]
fn c06_weingarten_consistency() {
    check(suite::weingarten_consistency(SEED, &SuiteSize::full()));
}

#[test]
fn c07_potential() {
    check(suite::potential_checks(SEED, &SuiteSize::full()));
}

#[test]
fn c08_replicator_and_stationarity() {
    check(suite::replicator_and_stationarity(SEED, &SuiteSize::full()));
}

#[test]
fn c09_closed_form_integral() {
    check(suite::closed_form_integral(SEED, &SuiteSize::full()));
}

#[test]
fn c10_volume_identity() {
    check(suite::volume_identity(SEED, &SuiteSize::full()));
}

#[test]
fn c11_ideal_case() {
    check(suite::ideal_case(SEED, &SuiteSize::full()));
}
