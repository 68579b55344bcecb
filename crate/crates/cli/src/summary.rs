//! Pass/fail summary of a persisted table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KindSummary {
    pub rows: usize,
    pub passed: usize,
    pub failed: usize,
    /// Rows without a check.
    pub unchecked: usize,
    /// Rows whose computation failed (`status != ok`).
    pub errors: usize,
    /// Smallest margin and the `experiment#row` where it occurs.
    pub worst_margin: Option<(f64, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub kinds: BTreeMap<String, KindSummary>,
    /// `experiment#row` of every failing row.
    pub failing: Vec<String>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.failing.is_empty()
    }
}

const REQUIRED: [&str; 6] = ["experiment", "kind", "row", "margin", "pass", "status"];

pub fn summarize_path(path: &Path) -> Result<Summary, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    summarize_bytes(&bytes).map_err(|message| CliError::Table {
        path: path.display().to_string(),
        message,
    })
}

pub fn summarize_bytes(bytes: &[u8]) -> Result<Summary, String> {
    let mut summary = Summary::default();
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(summary);
    }
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column `{name}`"))
    };
    let idx: Vec<usize> = REQUIRED.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let [experiment, kind, row, margin, pass, status] = idx[..] else { unreachable!() };
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let location = format!("{}#{}", field(experiment), field(row));
        let entry = summary.kinds.entry(field(kind).to_string()).or_default();
        entry.rows += 1;
        if field(status) != "ok" {
            entry.errors += 1;
        }
        match field(pass) {
            "true" => entry.passed += 1,
            "false" => {
                entry.failed += 1;
                summary.failing.push(location.clone());
            }
            "" => entry.unchecked += 1,
            other => return Err(format!("data line {}: bad pass value {other:?}", line + 1)),
        }
        if !field(margin).is_empty() {
            let m: f64 = field(margin)
                .parse()
                .map_err(|_| format!("data line {}: bad margin {:?}", line + 1, field(margin)))?;
            if entry.worst_margin.as_ref().is_none_or(|(w, _)| m < *w) {
                entry.worst_margin = Some((m, location));
            }
        }
    }
    Ok(summary)
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<18} {:>6} {:>6} {:>6} {:>9} {:>6}  worst margin",
            "kind", "rows", "pass", "fail", "unchecked", "errors"
        )?;
        for (kind, k) in &self.kinds {
            let worst = k
                .worst_margin
                .as_ref()
                .map(|(m, at)| format!("{m:.6e} ({at})"))
                .unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{kind:<18} {:>6} {:>6} {:>6} {:>9} {:>6}  {worst}",
                k.rows, k.passed, k.failed, k.unchecked, k.errors
            )?;
        }
        for at in &self.failing {
            writeln!(f, "FAIL {at}")?;
        }
        let total: usize = self.kinds.values().map(|k| k.rows).sum();
        write!(f, "{total} rows, {} failing", self.failing.len())
    }
}
