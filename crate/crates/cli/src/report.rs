//! The JSON report every command prints.
//!
//! Top-level fields, all always present:
//!
//! | field             | meaning                                                   |
//! |-------------------|-----------------------------------------------------------|
//! | `command`         | subcommand name                                           |
//! | `inputs`          | spec path and every flag value that was used              |
//! | `seed`, `samples` | randomization parameters (`null` when nothing is sampled) |
//! | `checks`          | `{name, residual, tolerance, pass}` per numeric check     |
//! | `counterexamples` | witnesses for failed checks or negative classifications   |
//! | `outputs`         | computed values                                           |
//! | `summary`         | one-line human-readable findings                          |
//! | `status`          | `ok`, `failed` (exit code 1) or `finding`                 |
//!
//! Object keys are sorted, so a report depends only on its contents.

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub checks: Vec<Check>,
    pub counterexamples: Vec<Value>,
    pub outputs: Map<String, Value>,
    pub summary: Vec<String>,
    pub status: String,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), status: "ok".into(), ..Self::default() }
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) {
        self.inputs.insert(key.into(), value.into());
    }

    pub fn output(&mut self, key: &str, value: impl Into<Value>) {
        self.outputs.insert(key.into(), value.into());
    }

    /// Records a check that passes when `residual <= tolerance`.
    pub fn check(&mut self, name: &str, residual: f64, tolerance: f64) -> bool {
        let pass = residual <= tolerance;
        self.checks.push(Check { name: name.into(), residual, tolerance, pass });
        pass
    }

    /// Records a check whose pass/fail was decided elsewhere.
    pub fn verdict(&mut self, name: &str, residual: f64, tolerance: f64, pass: bool) {
        self.checks.push(Check { name: name.into(), residual, tolerance, pass });
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn render(&self) -> String {
        let value = serde_json::to_value(self).expect("reports always serialize");
        let mut out = serde_json::to_string_pretty(&value).expect("values always serialize");
        out.push('\n');
        out
    }
}
