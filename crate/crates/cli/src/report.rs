//! Run reports: what ran, what was written, and every checked assertion.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// How a measured value is compared with the expected one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `|measured - expected| ≤ tolerance`
    Within,
    /// `measured ≤ expected + tolerance`
    AtMost,
    /// `measured ≥ expected - tolerance`
    AtLeast,
}

/// Where the expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// a closed-form value of the worked example
    ClosedForm,
    /// an independent computation
    Oracle,
    /// a structural property that holds for every input
    Invariant,
    /// a runtime budget
    Budget,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    /// `<criterion>.<name>`, e.g. `c1.plateau-start`
    pub id: String,
    pub description: String,
    #[serde(with = "lossy")]
    pub measured: f64,
    #[serde(with = "lossy")]
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub basis: Basis,
    pub passed: bool,
}

impl Assertion {
    pub fn new(
        id: &str,
        description: &str,
        measured: f64,
        expected: f64,
        tolerance: f64,
        relation: Relation,
        basis: Basis,
    ) -> Self {
        let passed = match relation {
            Relation::Within => (measured - expected).abs() <= tolerance,
            Relation::AtMost => measured <= expected + tolerance,
            Relation::AtLeast => measured >= expected - tolerance,
        };
        Self {
            id: id.to_string(),
            description: description.to_string(),
            measured,
            expected,
            tolerance,
            relation,
            basis,
            passed,
        }
    }
}

/// Non-finite floats travel as JSON `null` and come back as NaN.
mod lossy {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub assertions: Vec<Assertion>,
    /// free-form measurements that are reported but not asserted
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub notes: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<RunReport>,
}

impl RunReport {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self { command: command.to_string(), config_hash: config_hash(config), ..Self::default() }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed) && self.entries.iter().all(RunReport::passed)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn check(
        &mut self,
        id: &str,
        description: &str,
        measured: f64,
        expected: f64,
        tolerance: f64,
        relation: Relation,
        basis: Basis,
    ) -> bool {
        let a = Assertion::new(id, description, measured, expected, tolerance, relation, basis);
        let ok = a.passed;
        self.assertions.push(a);
        ok
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn output(&mut self, path: Option<String>) {
        self.outputs.extend(path);
    }

    /// Every assertion of this report and its entries, depth first.
    pub fn all_assertions(&self) -> Vec<&Assertion> {
        let mut out: Vec<&Assertion> = self.assertions.iter().collect();
        for e in &self.entries {
            out.extend(e.all_assertions());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }

    /// One line per assertion.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for a in self.all_assertions() {
            s.push_str(&format!(
                "{} {:<28} measured {:<14.8e} expected {:<14.8e} tol {:.1e}  {}\n",
                if a.passed { "PASS" } else { "FAIL" },
                a.id,
                a.measured,
                a.expected,
                a.tolerance,
                a.description
            ));
        }
        s
    }
}

/// SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &impl Serialize) -> String {
    let text = serde_json::to_string(config).expect("configs serialise");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}
