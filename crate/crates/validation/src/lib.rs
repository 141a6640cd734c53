//! Bookkeeping for the acceptance run: one line per criterion, then a tally.

use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "criterion {:<3} {} [{}] {} ({:.1} s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Collects verdicts and prints each one as soon as it is known.
#[derive(Debug, Default)]
pub struct Run {
    pub verdicts: Vec<Verdict>,
}

impl Run {
    /// Times `check`, which returns `(pass, detail)`; an error counts as a failure.
    pub fn criterion<E: std::fmt::Display>(
        &mut self,
        id: &'static str,
        title: &'static str,
        check: impl FnOnce() -> Result<(bool, String), E>,
    ) {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let v = Verdict {
            id,
            title,
            pass,
            detail,
            elapsed: start.elapsed(),
        };
        println!("{}", v.line());
        self.verdicts.push(v);
    }

    pub fn failed(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.pass).collect()
    }
}

/// Pass only if every part passes; the detail lists each part.
pub fn all_of(parts: &[(&str, bool, String)]) -> (bool, String) {
    let pass = parts.iter().all(|p| p.1);
    let detail = parts
        .iter()
        .map(|(name, ok, d)| format!("{name} {}: {d}", if *ok { "ok" } else { "FAIL" }))
        .collect::<Vec<_>>()
        .join("; ");
    (pass, detail)
}
