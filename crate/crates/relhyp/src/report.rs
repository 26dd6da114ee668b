//! Report envelopes shared by the driver and the verification suites:
//! versioned JSON with the echoed config and a content hash of the inputs,
//! plus flat CSV tables for residual dumps.

use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const FORMAT_VERSION: &str = "1.0";

/// Hex digest in the git blob style: SHA-256 over `"blob <len>\0"` + bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(2 * digest.len());
    for b in digest {
        write!(hex, "{b:02x}").unwrap();
    }
    hex
}

/// Envelope for every emitted JSON document. Struct field order is the key
/// order on the wire, nested objects are sorted maps, and floats use the
/// shortest round-trip form, so identical runs serialize to identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub format_version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub content_hash: String,
    pub pass: bool,
    pub results: serde_json::Value,
}

impl Report {
    pub fn new(
        command: impl Into<String>,
        config: BTreeMap<String, String>,
        input: &[u8],
        pass: bool,
        results: serde_json::Value,
    ) -> Report {
        Report {
            format_version: FORMAT_VERSION,
            command: command.into(),
            config,
            content_hash: content_hash(input),
            pass,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report has no non-finite floats");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Residual table written next to the JSON report.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let emit = |out: &mut String, cells: &[String]| {
            for (i, c) in cells.iter().enumerate() {
                debug_assert!(!c.contains([',', '"', '\n']), "cell needs no quoting");
                if i > 0 {
                    out.push(',');
                }
                out.push_str(c);
            }
            out.push('\n');
        };
        emit(&mut out, &self.columns);
        for row in &self.rows {
            emit(&mut out, row);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Canonical numeric cell: integral values print bare, the rest keep the
/// shortest round-trip form.
pub fn num(x: f64) -> String {
    if x.is_finite() && x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_distinguishes_content_and_length() {
        let a = content_hash(b"abc");
        assert_eq!(a.len(), 64);
        assert_eq!(a, content_hash(b"abc"));
        assert_ne!(a, content_hash(b"abd"));
        assert_ne!(a, content_hash(b"abc\0"));
    }

    #[test]
    fn reports_serialize_with_fixed_key_order() {
        let mut config = BTreeMap::new();
        config.insert("radius".to_string(), "6".to_string());
        config.insert("depth".to_string(), "8".to_string());
        let results = serde_json::json!({"zeta": 1.0, "alpha": [1, 2]});
        let r = Report::new("verify horoball", config, b"spec", true, results);
        let s = r.to_json();
        let order = [
            "format_version",
            "command",
            "config",
            "content_hash",
            "pass",
            "results",
        ];
        let mut last = 0;
        for key in order {
            let at = s.find(&format!("\"{key}\"")).expect("key present");
            assert!(at >= last, "{key} out of order");
            last = at;
        }
        // map keys come out sorted
        assert!(s.find("\"alpha\"").unwrap() < s.find("\"zeta\"").unwrap());
        assert!(s.find("\"depth\"").unwrap() < s.find("\"radius\"").unwrap());
        assert_eq!(r.to_json(), s);
    }

    #[test]
    fn csv_round_trip_layout() {
        let mut t = Table::new(&["graph", "level", "max_err"]);
        t.push(vec!["path20".into(), "0".into(), num(1.5)]);
        t.push(vec!["path20".into(), "1".into(), num(2.0)]);
        assert_eq!(t.to_csv(), "graph,level,max_err\npath20,0,1.5\npath20,1,2\n");
    }

    #[test]
    fn numeric_cells_stay_short() {
        assert_eq!(num(3.0), "3");
        assert_eq!(num(0.30000000000000004), "0.30000000000000004");
        assert_eq!(num(-2.5), "-2.5");
    }
}
