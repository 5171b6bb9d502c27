//! Confusion matrices and classification metrics.
//!
//! Every per-class metric is reported in two averages: `macro_avg`, the
//! plain mean over classes, and `weighted`, the mean weighted by class
//! support. `accuracy_std` is trace / total; `accuracy_eq1` is the mean over
//! classes of the one-vs-rest accuracy `(TP_i + TN_i) / total`.
//!
//! A zero denominator yields 0 and a warning in the report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tables::PredictionLog;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[true][predicted]`
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn zeros(classes: Vec<String>) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = classes.len();
        if counts.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: counts.len(),
            });
        }
        if let Some(row) = counts.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn n(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    pub fn tallies(&self) -> Vec<ClassTally> {
        let total = self.total();
        (0..self.n())
            .map(|i| {
                let tp = self.counts[i][i];
                let fn_ = self.support(i) - tp;
                let fp = self.predicted(i) - tp;
                ClassTally {
                    tp,
                    fp,
                    fn_,
                    tn: total - tp - fp - fn_,
                }
            })
            .collect()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    /// Sum of matrices over the same class list.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Config(
                "cannot merge confusion matrices over different classes".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }
}

pub fn confusion_from_log(log: &PredictionLog, classes: &[String]) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::zeros(classes.to_vec());
    let n = classes.len();
    for row in &log.rows {
        for idx in [row.truth, row.predicted] {
            if idx >= n {
                return Err(Error::UnknownLabel(format!(
                    "class index {idx} in row {}",
                    row.id
                )));
            }
        }
        cm.add(row.truth, row.predicted);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averages {
    /// One-vs-rest accuracy `(TP + TN) / total`.
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub tally: ClassTally,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub classes: Vec<String>,
    pub total: u64,
    pub accuracy_std: f64,
    pub accuracy_eq1: f64,
    pub macro_avg: Averages,
    pub weighted: Averages,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<u64>>,
    pub normalized: Vec<Vec<f64>>,
    pub empty_rows: Vec<usize>,
    pub warnings: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let n = cm.n();
    let mut warnings = Vec::new();
    let mut per_class = Vec::with_capacity(n);
    for (i, tally) in cm.tallies().into_iter().enumerate() {
        let class = &cm.classes[i];
        let support = tally.tp + tally.fn_;
        let precision = ratio(tally.tp, tally.tp + tally.fp).unwrap_or_else(|| {
            warnings.push(format!(
                "precision undefined for class {class} (never predicted); set to 0"
            ));
            0.0
        });
        let recall = ratio(tally.tp, support).unwrap_or_else(|| {
            warnings.push(format!(
                "recall undefined for class {class} (no support); set to 0"
            ));
            0.0
        });
        per_class.push(ClassMetrics {
            class: class.clone(),
            support,
            tally,
            accuracy: (tally.tp + tally.tn) as f64 / total as f64,
            precision,
            recall,
            f1: harmonic(precision, recall),
        });
    }

    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
    let wmean = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|c| c.support as f64 * f(c))
            .sum::<f64>()
            / total as f64
    };
    let averages = |avg: &dyn Fn(fn(&ClassMetrics) -> f64) -> f64| Averages {
        accuracy: avg(|c| c.accuracy),
        precision: avg(|c| c.precision),
        recall: avg(|c| c.recall),
        f1: avg(|c| c.f1),
    };
    let macro_avg = averages(&mean);
    let weighted = averages(&wmean);
    let (normalized, empty_rows) = normalize_rows(cm);

    Ok(MetricReport {
        classes: cm.classes.clone(),
        total,
        accuracy_std: cm.trace() as f64 / total as f64,
        accuracy_eq1: macro_avg.accuracy,
        macro_avg,
        weighted,
        per_class,
        confusion: cm.counts.clone(),
        normalized,
        empty_rows,
        warnings,
    })
}

/// Row-normalized matrix and the indices of rows with zero support (which
/// are rendered as zeros).
pub fn normalize_rows(cm: &ConfusionMatrix) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut empty = Vec::new();
    let rows = cm
        .counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let support: u64 = row.iter().sum();
            if support == 0 {
                empty.push(i);
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&c| c as f64 / support as f64).collect()
            }
        })
        .collect();
    (rows, empty)
}

/// Combine per-fold reports: every scalar becomes the fold-size-weighted
/// mean; counts and confusion matrices are summed.
pub fn aggregate_folds(reports: &[(MetricReport, usize)]) -> Result<MetricReport> {
    let (first, _) = reports.first().ok_or(Error::Empty("fold reports"))?;
    let weight_total: usize = reports.iter().map(|(_, s)| s).sum();
    if weight_total == 0 {
        return Err(Error::Empty("fold sizes"));
    }
    for (r, _) in reports {
        if r.classes != first.classes {
            return Err(Error::Config(
                "fold reports disagree on the class list".into(),
            ));
        }
    }
    let w = weight_total as f64;
    let wavg = |f: &dyn Fn(&MetricReport) -> f64| {
        reports.iter().map(|(r, s)| *s as f64 * f(r)).sum::<f64>() / w
    };
    let avg_of = |pick: &dyn Fn(&MetricReport) -> &Averages| Averages {
        accuracy: wavg(&|r| pick(r).accuracy),
        precision: wavg(&|r| pick(r).precision),
        recall: wavg(&|r| pick(r).recall),
        f1: wavg(&|r| pick(r).f1),
    };

    let n = first.classes.len();
    let mut confusion = ConfusionMatrix::zeros(first.classes.clone());
    for (r, _) in reports {
        confusion.merge(&ConfusionMatrix::from_counts(
            first.classes.clone(),
            r.confusion.clone(),
        )?)?;
    }
    let per_class = (0..n)
        .map(|i| {
            let sum = |f: &dyn Fn(&ClassTally) -> u64| {
                reports.iter().map(|(r, _)| f(&r.per_class[i].tally)).sum()
            };
            ClassMetrics {
                class: first.classes[i].clone(),
                support: reports.iter().map(|(r, _)| r.per_class[i].support).sum(),
                tally: ClassTally {
                    tp: sum(&|t| t.tp),
                    fp: sum(&|t| t.fp),
                    fn_: sum(&|t| t.fn_),
                    tn: sum(&|t| t.tn),
                },
                accuracy: wavg(&|r| r.per_class[i].accuracy),
                precision: wavg(&|r| r.per_class[i].precision),
                recall: wavg(&|r| r.per_class[i].recall),
                f1: wavg(&|r| r.per_class[i].f1),
            }
        })
        .collect();
    let (normalized, empty_rows) = normalize_rows(&confusion);
    let mut warnings: Vec<String> = Vec::new();
    for (r, _) in reports {
        for msg in &r.warnings {
            if !warnings.contains(msg) {
                warnings.push(msg.clone());
            }
        }
    }

    Ok(MetricReport {
        classes: first.classes.clone(),
        total: reports.iter().map(|(r, _)| r.total).sum(),
        accuracy_std: wavg(&|r| r.accuracy_std),
        accuracy_eq1: wavg(&|r| r.accuracy_eq1),
        macro_avg: avg_of(&|r| &r.macro_avg),
        weighted: avg_of(&|r| &r.weighted),
        per_class,
        confusion: confusion.counts,
        normalized,
        empty_rows,
        warnings,
    })
}
