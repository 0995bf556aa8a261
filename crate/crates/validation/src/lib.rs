//! Pass/fail bookkeeping for the acceptance suite.

use std::fmt::Display;
use std::panic::{catch_unwind, UnwindSafe};
use std::time::{Duration, Instant};

pub struct Criterion {
    name: String,
    started: Instant,
    checks: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    pub fn new(name: impl Into<String>) -> Self {
        Criterion {
            name: name.into(),
            started: Instant::now(),
            checks: 0,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records one check; the description is printed only on failure.
    pub fn check(&mut self, ok: bool, what: impl Display) -> bool {
        self.checks += 1;
        if !ok {
            self.failures.push(what.to_string());
        }
        ok
    }

    /// Context printed under the result line either way.
    pub fn note(&mut self, what: impl Display) {
        self.notes.push(what.to_string());
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    /// Prints the verdict; true when every check passed.
    pub fn finish(mut self, max_runtime: Option<Duration>) -> bool {
        let elapsed = self.elapsed();
        if let Some(limit) = max_runtime {
            self.check(
                elapsed <= limit,
                format!("runtime {:.2} s exceeds {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64()),
            );
        }
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut text = format!(
            "[acceptance] {verdict} {} ({} checks, {} failed, {:.2} s)\n",
            self.name,
            self.checks,
            self.failures.len(),
            elapsed.as_secs_f64()
        );
        for n in &self.notes {
            text.push_str(&format!("[acceptance]     {n}\n"));
        }
        for f in &self.failures {
            text.push_str(&format!("[acceptance]     failed: {f}\n"));
        }
        print!("{text}");
        self.failures.is_empty()
    }
}

/// Runs each criterion, skipping those whose name lacks `filter`, and
/// returns the names that failed or panicked.
pub fn run_all<F>(criteria: Vec<(&'static str, F)>, filter: Option<&str>) -> Vec<&'static str>
where
    F: FnOnce() -> bool + UnwindSafe,
{
    std::panic::set_hook(Box::new(|info| println!("[acceptance]     panic: {info}")));
    let mut failed = Vec::new();
    let mut ran = 0;
    for (name, f) in criteria {
        if filter.is_some_and(|pat| !name.contains(pat)) {
            continue;
        }
        ran += 1;
        if !catch_unwind(f).unwrap_or(false) {
            failed.push(name);
        }
    }
    println!(
        "[acceptance] summary: {} of {ran} criteria passed{}",
        ran - failed.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    failed
}
