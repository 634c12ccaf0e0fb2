use std::io::Write;

use super::{CurvePoint, FreqBinRow};
use crate::error::{Error, Result};

/// A CSV file: `#` comment lines, then a header row and data rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io("<csv output>", e),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

impl CsvTable {
    pub fn new(comments: Vec<String>, header: &[&str]) -> Self {
        CsvTable { comments, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for c in &self.comments {
            for line in c.lines() {
                writeln!(w, "# {line}").map_err(|e| Error::io("<csv output>", e))?;
            }
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record(r).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("<csv output>", e))
    }

    pub fn render(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}

/// One row per grid cell; the `seconds` column only with `timing`.
pub fn curve_table(x_name: &str, points: &[CurvePoint], comments: Vec<String>, timing: bool) -> CsvTable {
    let mut header = vec![x_name, "system", "seed", "accuracy", "oov_accuracy"];
    if timing {
        header.push("seconds");
    }
    let mut t = CsvTable::new(comments, &header);
    for p in points {
        let mut row = vec![p.x.to_string(), p.system.clone(), p.seed.to_string(), p.accuracy.to_string(), opt(p.oov_accuracy)];
        if timing {
            row.push(format!("{:.3}", p.seconds));
        }
        t.rows.push(row);
    }
    t
}

pub fn freq_bin_table(rows: &[FreqBinRow], comments: Vec<String>) -> CsvTable {
    let mut t = CsvTable::new(comments, &["bin", "tokens", "mean_log_freq", "accuracy_a", "accuracy_b", "delta"]);
    for r in rows {
        t.rows.push(vec![
            r.bin.to_string(),
            r.tokens.to_string(),
            opt(r.mean_log_freq),
            opt(r.accuracy_a),
            opt(r.accuracy_b),
            opt(r.delta),
        ]);
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub x: f64,
    pub system: String,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single run.
    pub sd: Option<f64>,
}

/// Mean and standard deviation of accuracy per `(x, system)`, in first-seen order.
pub fn summarize(points: &[CurvePoint]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, &str)> = Vec::new();
    for p in points {
        if !keys.iter().any(|&(x, s)| x == p.x && s == p.system) {
            keys.push((p.x, &p.system));
        }
    }
    keys.into_iter()
        .map(|(x, system)| {
            let accs: Vec<f64> = points.iter().filter(|p| p.x == x && p.system == system).map(|p| p.accuracy).collect();
            let n = accs.len();
            let mean = accs.iter().sum::<f64>() / n as f64;
            let sd = (n > 1).then(|| (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
            SummaryRow { x, system: system.to_string(), runs: n, mean, sd }
        })
        .collect()
}

pub fn summary_table(x_name: &str, rows: &[SummaryRow], comments: Vec<String>) -> CsvTable {
    let mut t = CsvTable::new(comments, &[x_name, "system", "runs", "mean_accuracy", "sd_accuracy"]);
    for r in rows {
        t.rows.push(vec![r.x.to_string(), r.system.clone(), r.runs.to_string(), r.mean.to_string(), opt(r.sd)]);
    }
    t
}
