//! Reporting helper shared by the acceptance suite.

use std::io::Write;

/// Writes one verdict line straight to stderr (bypassing the test harness capture),
/// then panics if the criterion failed.
pub fn verdict(id: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} [{tag}] {title}: {detail}");
    assert!(pass, "criterion {id} failed: {title}: {detail}");
}
