use serde::{Deserialize, Serialize};

use super::RunManifest;

/// One method's line in a comparison table: best-epoch test metrics and the
/// total training time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub total_time_s: f64,
}

impl From<&RunManifest> for ComparisonRow {
    fn from(m: &RunManifest) -> Self {
        Self {
            method: m.name.clone(),
            accuracy: m.best.accuracy,
            precision: m.best.precision,
            recall: m.best.recall,
            f1: m.best.f1,
            total_time_s: m.total_wall_ms / 1e3,
        }
    }
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "accuracy", "precision", "recall", "f1", "total_time_s"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.method.clone(),
            format!("{:?}", r.accuracy),
            format!("{:?}", r.precision),
            format!("{:?}", r.recall),
            format!("{:?}", r.f1),
            format!("{:.3}", r.total_time_s),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Fixed-width table with metrics as whole percentages.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.method.len()).chain([6]).max().unwrap_or(6);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>9}  {:>6}  {:>8}  {:>10}\n",
        "Method", "Accuracy", "Precision", "Recall", "F1-Score", "Total Time"
    );
    let pct = |x: f64| format!("{:.0}%", x * 100.0);
    for r in rows {
        out += &format!(
            "{:<width$}  {:>8}  {:>9}  {:>6}  {:>8}  {:>9.1}s\n",
            r.method,
            pct(r.accuracy),
            pct(r.precision),
            pct(r.recall),
            pct(r.f1),
            r.total_time_s
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let rows = [ComparisonRow {
            method: "pcd".into(),
            accuracy: 0.84,
            precision: 0.86,
            recall: 0.81,
            f1: 0.8343,
            total_time_s: 12.3,
        }];
        let t = comparison_table(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Method"));
        assert!(lines[1].contains("84%") && lines[1].contains("83%") && lines[1].ends_with("12.3s"));
        let csv = comparison_csv(&rows);
        assert!(csv.starts_with("method,accuracy,precision,recall,f1,total_time_s\npcd,0.84,"));
    }
}
