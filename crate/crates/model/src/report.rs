//! Bucketed analysis tables: metrics broken down by query length and by
//! target graph size, plus the training-fraction sweep table.

use std::fmt::Write as _;

use crate::metrics::{ExampleRecord, MetricsReport};

pub const BUCKET_LABELS: [&str; 3] = ["<5", "5-10", ">=10"];

fn bucket_of(value: usize) -> usize {
    if value < 5 {
        0
    } else if value < 10 {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone)]
pub struct BucketRow {
    pub label: &'static str,
    pub count: usize,
    pub metrics: Option<MetricsReport>,
}

/// Groups records into the three standard buckets by the chosen key.
pub fn bucketize(records: &[ExampleRecord], by_query_length: bool) -> Vec<BucketRow> {
    let mut groups: [Vec<ExampleRecord>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for r in records {
        let key = if by_query_length {
            r.query_len
        } else {
            r.target_size
        };
        groups[bucket_of(key)].push(r.clone());
    }
    BUCKET_LABELS
        .iter()
        .zip(groups)
        .map(|(label, rows)| BucketRow {
            label,
            count: rows.len(),
            metrics: (!rows.is_empty()).then(|| MetricsReport::from_records(rows)),
        })
        .collect()
}

fn render_rows(title: &str, rows: &[BucketRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{title:<14}{:>8}{:>10}{:>10}{:>10}",
        "N", "NodeF1", "EdgeF1", "GAcc"
    );
    for row in rows {
        match &row.metrics {
            Some(m) => {
                let _ = writeln!(
                    out,
                    "{:<14}{:>8}{:>10.2}{:>10.2}{:>10.2}",
                    row.label,
                    row.count,
                    100.0 * m.node_f1,
                    100.0 * m.edge_f1,
                    100.0 * m.graph_acc
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:<14}{:>8}{:>10}{:>10}{:>10}",
                    row.label, 0, "n/a", "n/a", "n/a"
                );
            }
        }
    }
    out
}

/// The two bucket tables, in the row layout of the corpus analyses.
pub fn bucket_tables(report: &MetricsReport) -> String {
    let by_len = bucketize(&report.examples, true);
    let by_size = bucketize(&report.examples, false);
    format!(
        "{}\n{}",
        render_rows("Query Length", &by_len),
        render_rows("Graph Size", &by_size)
    )
}

/// Machine-readable bucket lines.
pub fn bucket_machine_lines(report: &MetricsReport) -> String {
    let mut out = String::new();
    for (name, by_len) in [("query_length", true), ("graph_size", false)] {
        for row in bucketize(&report.examples, by_len) {
            match &row.metrics {
                Some(m) => {
                    let _ = writeln!(
                        out,
                        "bucket {name} {} n={} node_f1={:.4} edge_f1={:.4} graph_acc={:.4}",
                        row.label, row.count, m.node_f1, m.edge_f1, m.graph_acc
                    );
                }
                None => {
                    let _ = writeln!(out, "bucket {name} {} n=0 n/a", row.label);
                }
            }
        }
    }
    out
}

/// Rows of a training-fraction sweep, rendered fraction by fraction.
pub fn sweep_table(rows: &[(f64, MetricsReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14}{:>10}{:>10}{:>10}",
        "% of Train", "NodeF1", "EdgeF1", "GAcc"
    );
    for (fraction, m) in rows {
        let _ = writeln!(
            out,
            "{:<14}{:>10.2}{:>10.2}{:>10.2}",
            format!("{:.0}%", fraction * 100.0),
            100.0 * m.node_f1,
            100.0 * m.edge_f1,
            100.0 * m.graph_acc
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(query_len: usize, target_size: usize, exact: bool) -> ExampleRecord {
        ExampleRecord {
            node_f1: if exact { 1.0 } else { 0.5 },
            edge_f1: if exact { 1.0 } else { 0.25 },
            exact,
            query_len,
            target_size,
        }
    }

    #[test]
    fn short_queries_only_fill_first_bucket() {
        let records = vec![record(3, 2, true), record(4, 3, false)];
        let rows = bucketize(&records, true);
        assert_eq!(rows[0].count, 2);
        assert_eq!(rows[1].count, 0);
        assert_eq!(rows[2].count, 0);
        let table = render_rows("Query Length", &rows);
        assert!(table.contains("n/a"));
    }

    #[test]
    fn buckets_recombine_to_global_accuracy() {
        let records = vec![
            record(3, 2, true),
            record(7, 6, false),
            record(12, 11, true),
            record(8, 6, true),
        ];
        let global = MetricsReport::from_records(records.clone());
        let rows = bucketize(&records, true);
        let weighted: f64 = rows
            .iter()
            .filter_map(|r| r.metrics.as_ref().map(|m| m.graph_acc * r.count as f64))
            .sum::<f64>()
            / records.len() as f64;
        assert!((weighted - global.graph_acc).abs() < 1e-12);
    }

    #[test]
    fn all_three_rows_always_render() {
        let report = MetricsReport::from_records(vec![record(3, 2, true)]);
        let tables = bucket_tables(&report);
        for label in BUCKET_LABELS {
            assert_eq!(tables.matches(label).count(), 2, "row {label} in both tables");
        }
        assert!(tables.contains("Query Length"));
        assert!(tables.contains("Graph Size"));
    }
}
