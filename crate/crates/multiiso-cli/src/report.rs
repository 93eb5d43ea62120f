//! Machine-readable command reports.

use std::collections::BTreeMap;

use multiiso::numcore::{CMatrix, Subspace};
use serde_json::{json, Value};

use crate::instance::matrix_to_json;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub residuals: BTreeMap<String, f64>,
    pub artifacts: BTreeMap<String, Value>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            pass: true,
            residuals: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn residual(&mut self, name: &str, value: f64) {
        self.residuals.insert(name.to_string(), value);
    }

    /// Record `value` and fail the report unless it is at most `limit`.
    pub fn check(&mut self, name: &str, value: f64, limit: f64) {
        self.residual(name, value);
        if !(value <= limit) {
            self.pass = false;
            self.note(format!("{name} = {value:.3e} exceeds {limit:.1e}"));
        }
    }

    pub fn require(&mut self, ok: bool, failure: impl Into<String>) {
        if !ok {
            self.pass = false;
            self.note(failure);
        }
    }

    pub fn matrix(&mut self, name: &str, m: &CMatrix) {
        self.artifacts.insert(name.to_string(), json!(matrix_to_json(m)));
    }

    /// A subspace as its canonical orthonormal basis, one column per vector.
    pub fn subspace(&mut self, name: &str, s: &Subspace) {
        self.matrix(name, s.basis());
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn to_value(&self) -> Value {
        let residuals: serde_json::Map<String, Value> =
            self.residuals.iter().map(|(k, v)| (k.clone(), json!(*v))).collect();
        json!({
            "command": self.command,
            "pass": self.pass,
            "residuals": residuals,
            "artifacts": self.artifacts,
            "notes": self.notes,
        })
    }

    pub fn to_text(&self, pretty: bool) -> String {
        crate::json::to_text(&self.to_value(), pretty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use multiiso::numcore::identity;

    #[test]
    fn check_fails_on_large_or_nan_residuals() {
        let mut r = Report::new("validate");
        r.check("small", 1e-14, 1e-9);
        assert!(r.pass);
        r.check("nan", f64::NAN, 1e-9);
        assert!(!r.pass);
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn serializes_with_sorted_fields() {
        let mut r = Report::new("validate");
        r.residual("b", 0.5);
        r.residual("a", 0.25);
        r.matrix("I", &identity(1));
        let text = r.to_text(false);
        assert_eq!(
            text,
            "{\"artifacts\":{\"I\":[[[1.0000000000000000e0,0.0000000000000000e0]]]},\"command\":\"validate\",\
             \"notes\":[],\"pass\":true,\"residuals\":{\"a\":2.5000000000000000e-1,\"b\":5.0000000000000000e-1}}\n"
        );
    }
}
