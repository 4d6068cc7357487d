//! Report assembly and deterministic emission.
//!
//! JSON keys come out in construction order and all numbers render with 17
//! significant digits, so identical configs yield byte-identical files.
//! Wall time goes to stderr only — serialized reports must not differ
//! between runs.

use chlab_core::grid::format_f64;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    /// Grid/ladder provenance and any auxiliary measurements.
    pub details: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, value: f64, tolerance: f64, details: String) -> Self {
        Check { name: name.to_string(), pass, value, tolerance, details }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub kind: String,
    pub tool_version: String,
    pub config_echo: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(kind: &str, config_echo: String) -> Self {
        Report {
            kind: kind.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_echo,
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = String::new();
        s.push_str("{\n");
        s.push_str(&format!("  \"kind\": {},\n", json_string(&self.kind)));
        s.push_str(&format!("  \"tool_version\": {},\n", json_string(&self.tool_version)));
        s.push_str(&format!("  \"config\": {},\n", json_string(&self.config_echo)));
        s.push_str("  \"checks\": [\n");
        for (i, c) in self.checks.iter().enumerate() {
            s.push_str("    {");
            s.push_str(&format!("\"name\": {}, ", json_string(&c.name)));
            s.push_str(&format!("\"pass\": {}, ", c.pass));
            s.push_str(&format!("\"value\": {}, ", format_f64(c.value)));
            s.push_str(&format!("\"tolerance\": {}, ", format_f64(c.tolerance)));
            s.push_str(&format!("\"details\": {}", json_string(&c.details)));
            s.push('}');
            if i + 1 < self.checks.len() {
                s.push(',');
            }
            s.push('\n');
        }
        s.push_str("  ]\n}\n");
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,pass,value,tolerance,details\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&c.name),
                c.pass,
                format_f64(c.value),
                format_f64(c.tolerance),
                csv_field(&c.details)
            ));
        }
        s
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
