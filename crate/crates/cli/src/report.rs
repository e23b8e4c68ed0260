use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the input bytes, hex encoded.
    pub inputs_digest: String,
    pub seed: u64,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Counts>,
    /// Only recorded with `--timing`; left out so reports stay reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        render(&mut out, &v, 0);
        out
    }
}

fn render(out: &mut String, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                if is_leaf(x) {
                    let _ = writeln!(out, "{pad}{k}: {}", leaf(x));
                } else {
                    let _ = writeln!(out, "{pad}{k}:");
                    render(out, x, depth + 1);
                }
            }
        }
        Value::Array(items) => {
            for x in items {
                if is_leaf(x) {
                    let _ = writeln!(out, "{pad}- {}", leaf(x));
                } else {
                    let _ = writeln!(out, "{pad}-");
                    render(out, x, depth + 1);
                }
            }
        }
        x => {
            let _ = writeln!(out, "{pad}{}", leaf(x));
        }
    }
}

fn is_leaf(v: &Value) -> bool {
    match v {
        Value::Object(m) => m.is_empty(),
        // short numeric vectors stay on one line
        Value::Array(a) => a.is_empty() || (a.len() <= 16 && a.iter().all(|x| x.is_number() || x.is_null())),
        _ => true,
    }
}

fn leaf(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(a) => format!("[{}]", a.iter().map(leaf).collect::<Vec<_>>().join(", ")),
        x => x.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn text_carries_every_leaf() {
        let r = RunReport {
            command: "check".into(),
            inputs_digest: digest(b"x"),
            seed: 3,
            results: json!({ "inside": false, "margin": 0.5, "weights": [0.25, 0.75], "nested": { "k": "v" } }),
            counts: None,
            wall_time_s: None,
        };
        let t = r.to_text();
        for needle in ["command: check", "seed: 3", "inside: false", "margin: 0.5", "weights: [0.25, 0.75]", "k: v"] {
            assert!(t.contains(needle), "{needle} missing from\n{t}");
        }
        assert!(!r.to_json().contains("wall_time_s"));
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(digest(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
