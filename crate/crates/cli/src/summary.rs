//! Consolidates report files into one CSV table.

use std::fmt::Write as _;
use std::path::Path;

use crate::report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Pass,
    Fail,
    ParseError,
}

impl RowStatus {
    fn label(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::ParseError => "parse_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub csv: String,
    pub statuses: Vec<RowStatus>,
}

impl Summary {
    /// 0 when every row passes, 1 when a gate failed, 2 when a report
    /// could not be read.
    pub fn exit_code(&self) -> u8 {
        if self.statuses.contains(&RowStatus::ParseError) {
            2
        } else if self.statuses.contains(&RowStatus::Fail) {
            1
        } else {
            0
        }
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Quotes a CSV field when it needs it.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summarize(paths: &[&Path]) -> Summary {
    let mut csv = String::from("experiment,key_metric,value,expected_min,expected_max,status,source\n");
    let mut statuses = Vec::with_capacity(paths.len());
    for path in paths {
        let parsed = std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<Report>(&t).map_err(|e| e.to_string()));
        let src = field(&path.display().to_string());
        match parsed {
            Ok(r) => {
                let status = if r.pass { RowStatus::Pass } else { RowStatus::Fail };
                let k = &r.key_metric;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{src}",
                    field(&r.experiment),
                    field(&k.name),
                    num(k.value),
                    num(k.min),
                    num(k.max),
                    status.label()
                );
                statuses.push(status);
            }
            Err(_) => {
                let _ = writeln!(csv, ",,,,,{},{src}", RowStatus::ParseError.label());
                statuses.push(RowStatus::ParseError);
            }
        }
    }
    Summary { csv, statuses }
}
