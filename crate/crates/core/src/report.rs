//! Comparison tables and confusion-matrix heatmaps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricReport;

/// One row of the model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    /// Parameter count of the full model, if known.
    pub parameters: Option<u64>,
    pub report: MetricReport,
}

pub fn percent(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

pub fn format_parameters(p: Option<u64>) -> String {
    match p {
        Some(p) => format!("{:.1}M", p as f64 / 1e6),
        None => "-".into(),
    }
}

/// Left-align the first column, right-align the rest, two spaces apart.
pub fn align_columns(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "{cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn comparison_rows(results: &[ModelResult]) -> Vec<Vec<String>> {
    let mut rows = vec![vec![
        "Model".to_string(),
        "Parameters".into(),
        "Accuracy".into(),
        "Precision".into(),
        "Recall".into(),
        "F1".into(),
    ]];
    for r in results {
        rows.push(vec![
            r.model.clone(),
            format_parameters(r.parameters),
            percent(r.report.accuracy_std),
            percent(r.report.weighted.precision),
            percent(r.report.weighted.recall),
            percent(r.report.weighted.f1),
        ]);
    }
    rows
}

/// Weighted-average comparison table, one row per model.
pub fn comparison_table(results: &[ModelResult]) -> String {
    align_columns(&comparison_rows(results))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn to_csv(rows: &[Vec<String>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",") + "\n")
        .collect()
}

pub fn comparison_csv(results: &[ModelResult]) -> String {
    to_csv(&comparison_rows(results))
}

fn per_class_rows(report: &MetricReport) -> Vec<Vec<String>> {
    let mut rows = vec![vec![
        "class".to_string(),
        "support".into(),
        "precision".into(),
        "recall".into(),
        "f1".into(),
    ]];
    for c in &report.per_class {
        rows.push(vec![
            c.class.clone(),
            c.support.to_string(),
            format!("{:.4}", c.precision),
            format!("{:.4}", c.recall),
            format!("{:.4}", c.f1),
        ]);
    }
    for (name, avg) in [
        ("macro avg", &report.macro_avg),
        ("weighted avg", &report.weighted),
    ] {
        rows.push(vec![
            name.to_string(),
            report.total.to_string(),
            format!("{:.4}", avg.precision),
            format!("{:.4}", avg.recall),
            format!("{:.4}", avg.f1),
        ]);
    }
    rows
}

pub fn per_class_table(report: &MetricReport) -> String {
    align_columns(&per_class_rows(report))
}

pub fn per_class_csv(report: &MetricReport) -> String {
    to_csv(&per_class_rows(report))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Row-normalized confusion matrix as an SVG heatmap with one percentage
/// label per cell. Rows are true classes, columns predicted classes.
pub fn heatmap_svg(title: &str, classes: &[String], normalized: &[Vec<f64>]) -> String {
    const CELL: usize = 64;
    const LEFT: usize = 160;
    const TOP: usize = 60;
    const BOTTOM: usize = 140;
    let n = classes.len();
    let width = LEFT + n * CELL + 20;
    let height = TOP + n * CELL + BOTTOM;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2,
        xml_escape(title)
    );
    for (i, row) in normalized.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let x = LEFT + j * CELL;
            let y = TOP + i * CELL;
            let v = v.clamp(0.0, 1.0);
            // white -> dark blue
            let r = (255.0 - 247.0 * v).round() as u8;
            let g = (255.0 - 207.0 * v).round() as u8;
            let b = (255.0 - 148.0 * v).round() as u8;
            let ink = if v > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                svg,
                r##"<rect class="cell" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}" stroke="#cccccc"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text class="cell-label" x="{}" y="{}" font-size="13" text-anchor="middle" dominant-baseline="middle" fill="{ink}">{}</text>"#,
                x + CELL / 2,
                y + CELL / 2,
                percent(v)
            );
        }
    }
    for (i, c) in classes.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            LEFT - 8,
            TOP + i * CELL + CELL / 2,
            xml_escape(c)
        );
        let cx = LEFT + i * CELL + CELL / 2;
        let cy = TOP + n * CELL + 10;
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="{cy}" font-size="12" text-anchor="end" transform="rotate(-45 {cx} {cy})">{}</text>"#,
            xml_escape(c)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" font-size="13" transform="rotate(-90 20 {})" text-anchor="middle">true class</text>"#,
        TOP + n * CELL / 2,
        TOP + n * CELL / 2
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">predicted class</text>"#,
        LEFT + n * CELL / 2,
        height - 12
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute_metrics, ConfusionMatrix};

    fn report() -> MetricReport {
        let cm = ConfusionMatrix::from_counts(
            vec!["a".into(), "b".into()],
            vec![vec![9, 1], vec![0, 10]],
        )
        .unwrap();
        compute_metrics(&cm).unwrap()
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(percent(0.964), "96.4%");
        assert_eq!(percent(1.0), "100.0%");
        assert_eq!(percent(0.0495), "5.0%");
    }

    #[test]
    fn parameter_formatting() {
        assert_eq!(format_parameters(Some(88_000_000)), "88.0M");
        assert_eq!(format_parameters(Some(27_200_000)), "27.2M");
        assert_eq!(format_parameters(None), "-");
    }

    #[test]
    fn single_model_table_has_one_row() {
        let mut r = report();
        r.weighted.f1 = 0.964;
        let table = comparison_table(&[ModelResult {
            model: "DaViT-B".into(),
            parameters: Some(88_000_000),
            report: r,
        }]);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("Model"));
        assert!(lines[1].starts_with("DaViT-B"));
        assert!(lines[1].ends_with("96.4%"));
        assert!(lines[1].contains("88.0M"));
    }

    #[test]
    fn csv_quotes_when_needed() {
        let r = ModelResult {
            model: "a,b".into(),
            parameters: None,
            report: report(),
        };
        let csv = comparison_csv(&[r]);
        assert!(csv.lines().nth(1).unwrap().starts_with("\"a,b\",-,"));
    }

    #[test]
    fn heatmap_has_one_label_per_cell() {
        let classes: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
        let mut m = vec![vec![0.0; 5]; 5];
        m[2][2] = 0.84;
        m[2][1] = 0.11;
        let svg = heatmap_svg("t", &classes, &m);
        assert_eq!(svg.matches(r#"class="cell""#).count(), 25);
        assert_eq!(svg.matches(r#"class="cell-label""#).count(), 25);
        assert!(svg.contains(">84.0%<"));
        assert!(svg.contains(">11.0%<"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn per_class_table_rows() {
        let t = per_class_table(&report());
        assert_eq!(t.lines().count(), 1 + 2 + 2);
        assert!(per_class_csv(&report()).starts_with("class,support,precision,recall,f1\n"));
    }
}
