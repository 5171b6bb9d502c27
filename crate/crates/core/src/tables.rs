//! Text wire formats shared with external feature extractors.
//!
//! FeatureTable:
//! ```text
//! dim,class_0,class_1,...
//! id,label_index,f_1,...,f_dim
//! ```
//! PredictionLog:
//! ```text
//! id,true,pred,p_0,...,p_{N-1}
//! id,true_class,pred_class,p_0,...
//! ```
//! `true` / `pred` carry class names; a bare integer that is not a class
//! name is accepted as a class index. Reals are written in Rust's shortest
//! round-trip decimal form.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub label: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dim: usize,
    pub classes: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

/// Shortest round-trip decimal; exponent form for very small or large magnitudes.
struct Num(f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FeatureTable {
    pub fn new(dim: usize, classes: Vec<String>) -> Self {
        FeatureTable {
            dim,
            classes,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<()> {
        self.check_row(&row, self.rows.len() + 2)?;
        self.rows.push(row);
        Ok(())
    }

    fn check_row(&self, row: &FeatureRow, line: usize) -> Result<()> {
        if row.features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.features.len(),
            });
        }
        if row.label >= self.classes.len() {
            return Err(Error::parse(
                "feature table",
                line,
                format!("label index {} out of range", row.label),
            ));
        }
        if let Some(v) = row.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::parse(
                "feature table",
                line,
                format!("non-finite feature {v}"),
            ));
        }
        Ok(())
    }

    /// Rows whose id is in `ids`, in the order of `ids`.
    pub fn select(&self, ids: &[String]) -> Result<FeatureTable> {
        let index: std::collections::HashMap<&str, &FeatureRow> =
            self.rows.iter().map(|r| (r.id.as_str(), r)).collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|r| (*r).clone())
                    .ok_or_else(|| Error::UnknownLabel(format!("feature row for id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            dim: self.dim,
            classes: self.classes.clone(),
            rows,
        })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<feature table>", e);
        write!(w, "{}", self.dim).map_err(io)?;
        for c in &self.classes {
            write!(w, ",{c}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for r in &self.rows {
            write!(w, "{},{}", r.id, r.label).map_err(io)?;
            for v in &r.features {
                write!(w, ",{}", Num(*v)).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<FeatureTable> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io("<feature table>", e))?,
            None => return Err(Error::parse("feature table", 1, "missing header")),
        };
        let mut head = header.trim_end().split(',');
        let dim: usize = head.next().unwrap_or("").parse().map_err(|_| {
            Error::parse(
                "feature table",
                1,
                "header must start with the feature dimension",
            )
        })?;
        let classes: Vec<String> = head.map(str::to_owned).collect();
        if classes.is_empty() {
            return Err(Error::parse("feature table", 1, "header lists no classes"));
        }
        let mut table = FeatureTable::new(dim, classes);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io("<feature table>", e))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or("").to_owned();
            let label = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse("feature table", i + 1, "bad label index"))?;
            let features = fields
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse("feature table", i + 1, e.to_string()))?;
            let row = FeatureRow {
                id,
                label,
                features,
            };
            table.check_row(&row, i + 1)?;
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<FeatureTable> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        FeatureTable::read(BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    pub truth: usize,
    pub predicted: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLog {
    pub classes: Vec<String>,
    pub rows: Vec<PredictionRow>,
}

fn resolve_class(classes: &[String], token: &str, line: usize) -> Result<usize> {
    if let Some(i) = classes.iter().position(|c| c == token) {
        return Ok(i);
    }
    match token.parse::<usize>() {
        Ok(i) if i < classes.len() => Ok(i),
        _ => Err(Error::UnknownLabel(format!(
            "{token} (prediction log line {line})"
        ))),
    }
}

impl PredictionLog {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<prediction log>", e);
        write!(w, "id,true,pred").map_err(io)?;
        for i in 0..self.classes.len() {
            write!(w, ",p_{i}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for r in &self.rows {
            write!(
                w,
                "{},{},{}",
                r.id, self.classes[r.truth], self.classes[r.predicted]
            )
            .map_err(io)?;
            for p in &r.probs {
                write!(w, ",{}", Num(*p)).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        Ok(())
    }

    /// Parse a log against a known class list.
    pub fn read<R: BufRead>(r: R, classes: &[String]) -> Result<PredictionLog> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io("<prediction log>", e))?,
            None => return Err(Error::parse("prediction log", 1, "missing header")),
        };
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.len() < 3 || cols[..3] != ["id", "true", "pred"] {
            return Err(Error::parse(
                "prediction log",
                1,
                "header must start with id,true,pred",
            ));
        }
        let n_probs = cols.len() - 3;
        if n_probs != classes.len() {
            return Err(Error::DimensionMismatch {
                expected: classes.len(),
                got: n_probs,
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io("<prediction log>", e))?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::parse(
                    "prediction log",
                    i + 1,
                    format!("expected {} fields", cols.len()),
                ));
            }
            let truth = resolve_class(classes, fields[1], i + 1)?;
            let predicted = resolve_class(classes, fields[2], i + 1)?;
            let probs = fields[3..]
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse("prediction log", i + 1, e.to_string()))?;
            rows.push(PredictionRow {
                id: fields[0].to_owned(),
                truth,
                predicted,
                probs,
            });
        }
        Ok(PredictionLog {
            classes: classes.to_vec(),
            rows,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, classes: &[String]) -> Result<PredictionLog> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        PredictionLog::read(BufReader::new(f), classes)
    }
}
