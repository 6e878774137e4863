//! Crash-record CSV loading with deduplication, row-level error collection and
//! median/mode imputation of missing cells.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codes::CodeMap;
use crate::error::{Error, Result};
use crate::types::Label;

pub const CASENUM: &str = "CASENUM";
/// Optional label column; rows without it are crashes.
pub const LABEL: &str = "LABEL";

/// One crash (or synthetic safe) record: coded raw fields keyed by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub casenum: String,
    pub label: Label,
    pub fields: BTreeMap<String, f64>,
}

impl CrashRecord {
    pub fn new(casenum: impl Into<String>) -> Self {
        Self {
            casenum: casenum.into(),
            label: Label::Crash,
            fields: BTreeMap::new(),
        }
    }

    pub fn with(mut self, column: &str, value: f64) -> Self {
        self.fields.insert(column.to_string(), value);
        self
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        self.fields.get(column).copied()
    }

    pub fn set(&mut self, column: &str, value: f64) {
        self.fields.insert(column.to_string(), value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the file, header is line 1.
    pub line: u64,
    pub casenum: String,
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub records: usize,
    pub duplicates_removed: usize,
    pub row_errors: Vec<RowError>,
    pub imputed: BTreeMap<String, usize>,
}

pub fn load_crash_records(
    path: &Path,
    required: &[String],
    codes: &CodeMap,
) -> Result<(Vec<CrashRecord>, LoadReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_crash_records(file, required, codes)
}

pub fn read_crash_records<R: Read>(
    reader: R,
    required: &[String],
    codes: &CodeMap,
) -> Result<(Vec<CrashRecord>, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let case_col = headers
        .iter()
        .position(|h| h == CASENUM)
        .ok_or_else(|| Error::MissingColumn(CASENUM.into()))?;
    for col in required {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.clone()));
        }
    }
    let label_col = headers.iter().position(|h| h == LABEL);

    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    let mut partial: Vec<(String, Label, Vec<Option<f64>>)> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        report.rows_read += 1;
        let line = i as u64 + 2;
        let casenum = row.get(case_col).unwrap_or_default().to_string();
        let mut bad = false;
        let label = match label_col.map(|c| row.get(c).unwrap_or_default()) {
            None | Some("") | Some("1") | Some("crash") => Label::Crash,
            Some("0") | Some("safe") => Label::Safe,
            Some(other) => {
                report.row_errors.push(RowError {
                    line,
                    casenum: casenum.clone(),
                    column: LABEL.into(),
                    value: other.into(),
                });
                bad = true;
                Label::Crash
            }
        };
        let mut values = Vec::with_capacity(headers.len());
        for (c, cell) in row.iter().enumerate() {
            if c == case_col || Some(c) == label_col {
                values.push(None);
                continue;
            }
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(Some(v)),
                _ => {
                    report.row_errors.push(RowError {
                        line,
                        casenum: casenum.clone(),
                        column: headers[c].clone(),
                        value: cell.into(),
                    });
                    bad = true;
                    values.push(None);
                }
            }
        }
        if bad {
            continue;
        }
        if !seen.insert(casenum.clone()) {
            report.duplicates_removed += 1;
            continue;
        }
        partial.push((casenum, label, values));
    }

    let data_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != case_col && Some(c) != label_col)
        .collect();
    let mut fill = vec![None; headers.len()];
    for &c in &data_cols {
        let missing = partial.iter().filter(|(_, _, v)| v[c].is_none()).count();
        if missing == 0 {
            continue;
        }
        let present: Vec<f64> = partial.iter().filter_map(|(_, _, v)| v[c]).collect();
        if present.is_empty() {
            return Err(Error::Load(format!(
                "column `{}` has no values to impute from",
                headers[c]
            )));
        }
        let value = if codes.column(&headers[c]).is_some() {
            mode(&present)
        } else {
            median(&present)
        };
        fill[c] = Some(value);
        report.imputed.insert(headers[c].clone(), missing);
    }

    let records: Vec<CrashRecord> = partial
        .into_iter()
        .map(|(casenum, label, values)| {
            let fields = data_cols
                .iter()
                .map(|&c| (headers[c].clone(), values[c].or(fill[c]).expect("imputed")))
                .collect();
            CrashRecord {
                casenum,
                label,
                fields,
            }
        })
        .collect();
    report.records = records.len();
    Ok((records, report))
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Most frequent value; ties go to the smallest.
fn mode(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (v[0], 0);
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|&&x| x == v[i]).count();
        if j > best_n {
            best = v[i];
            best_n = j;
        }
        i += j;
    }
    best
}

/// Write records as CSV: CASENUM, LABEL, then `columns` in order.
pub fn write_crash_records<W: Write>(writer: W, records: &[CrashRecord], columns: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![CASENUM.to_string(), LABEL.to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.casenum.clone(), r.label.as_u8().to_string()];
        for c in columns {
            row.push(r.get(c).map(format_value).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Load(e.to_string()))?;
    Ok(())
}

pub(crate) fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
