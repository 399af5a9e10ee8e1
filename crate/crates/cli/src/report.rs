use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use umbra_core::verifier::Verdict;

pub const SCHEMA_VERSION: u32 = 1;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "u8")]
pub enum Exit {
    Shadow = 0,
    NoShadow = 1,
    Undecided = 2,
    Usage = 3,
    Numeric = 4,
}

impl Exit {
    /// Successful commands that do not decide shadow also exit with 0.
    pub const OK: Exit = Exit::Shadow;

    pub fn for_verdict(v: &Verdict) -> Exit {
        match v {
            Verdict::CertifiedShadow { .. } => Exit::Shadow,
            Verdict::CertifiedNoShadow { .. } => Exit::NoShadow,
            Verdict::Undecided { .. } => Exit::Undecided,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<Exit> for u8 {
    fn from(e: Exit) -> u8 {
        e.code()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    pub exit_code: Exit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_covered: Option<f64>,
    pub details: Value,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock time; the only field that varies between identical runs.
    pub elapsed_seconds: f64,
}

impl Report {
    pub fn new(command: &'static str) -> Report {
        Report {
            schema: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            input_digest: None,
            exit_code: Exit::OK,
            verdict: None,
            fraction_covered: None,
            details: Value::Object(Default::default()),
            warnings: Vec::new(),
            error: None,
            elapsed_seconds: 0.0,
        }
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report details serialize");
        if let Value::Object(map) = &mut self.details {
            map.insert(key.to_string(), v);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} — {}", self.tool, self.version, self.command);
        if let Some(d) = &self.input_digest {
            let _ = writeln!(out, "input sha256: {d}");
        }
        if let Some(v) = &self.verdict {
            let _ = writeln!(out, "verdict: {v}");
            if let Verdict::CertifiedNoShadow { witness } = v {
                let u = witness.direction;
                let _ = writeln!(out, "witness: [{:?}, {:?}, {:?}]", u.x, u.y, u.z);
                for (i, m) in witness.margins.iter().enumerate() {
                    let _ = writeln!(out, "  ball {i} margin {m:e}");
                }
            }
        }
        if let Some(f) = self.fraction_covered {
            let _ = writeln!(out, "fraction covered: {f}");
        }
        if let Value::Object(map) = &self.details {
            for (k, v) in map {
                let _ = writeln!(out, "{k}: {v}");
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {e}");
        }
        let _ = writeln!(out, "exit code: {} ({:.3} s)", self.exit_code.code(), self.elapsed_seconds);
        out
    }
}
