//! Runs acceptance criteria one at a time and prints each verdict straight to
//! stdout, so the lines show up without `--nocapture`.

use std::io::Write;
use std::sync::Mutex;

use perpliq::validation::{run_criterion, CriterionReport, ValidationOptions};

// Criteria carry wall-clock budgets, so they must not overlap.
static SERIAL: Mutex<()> = Mutex::new(());

/// Run criterion `id` with the default seed and print its report.
///
/// # Panics
/// If `id` is not a known criterion.
pub fn run_and_print(id: u8) -> CriterionReport {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let report = run_criterion(id, &ValidationOptions::default()).expect("known criterion");
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", report.render());
    let _ = out.flush();
    report
}
