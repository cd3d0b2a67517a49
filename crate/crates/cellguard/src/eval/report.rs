//! Plain-text and machine-readable result tables.
//!
//! The main table mirrors the reporting layout: one row per LLM, one column
//! per metric and configuration. Stratified tables carry per-group counts so
//! downstream breakdowns stay reconstructible.

use std::collections::BTreeMap;

use serde_json::json;

use super::{metrics, stratify, Counts, Metrics, OutcomeRecord, StratifyKey};

/// A rendered report in both output forms.
#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub json: serde_json::Value,
}

pub const FOOTNOTES: [&str; 3] = [
    "percentile method: nearest-rank",
    "undefined precision/recall reported as undef, never coerced to 0 or 1",
    "stratified allocation rounds per-stratum shares up; realized totals may exceed targets",
];

fn metric_value(m: &Metrics, name: &str) -> Option<f64> {
    match name {
        "precision" => m.precision,
        "recall" => m.recall,
        "f1" => m.f1,
        "accuracy" => Some(m.accuracy),
        _ => None,
    }
}

fn format_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.1}%", v * 100.0),
        None => "undef".to_string(),
    }
}

fn counts_json(counts: &Counts) -> serde_json::Value {
    json!({"tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.r#fn})
}

/// Group outcome records by (llm, config) and compute metrics per group.
pub fn metrics_by_llm_config(records: &[OutcomeRecord]) -> BTreeMap<(String, String), Metrics> {
    let mut counts: BTreeMap<(String, String), Counts> = BTreeMap::new();
    for record in records {
        counts
            .entry((record.llm.clone(), record.config.clone()))
            .or_default()
            .add(record.cell);
    }
    counts
        .into_iter()
        .filter_map(|(key, c)| metrics(c).ok().map(|m| (key, m)))
        .collect()
}

/// Build the main results table: one row per LLM, `metric (config)` columns.
pub fn build_main_report(
    records: &[OutcomeRecord],
    configs: &[String],
    metric_names: &[&str],
    title: &str,
) -> Report {
    let by_key = metrics_by_llm_config(records);
    let llms: Vec<String> = {
        let mut seen: Vec<String> = Vec::new();
        for ((llm, _), _) in &by_key {
            if !seen.contains(llm) {
                seen.push(llm.clone());
            }
        }
        seen
    };

    let mut header = vec!["LLM".to_string()];
    for metric in metric_names {
        for config in configs {
            header.push(format!("{metric} ({config})"));
        }
    }

    let mut rows_text: Vec<Vec<String>> = vec![header];
    let mut rows_json = Vec::new();
    for llm in &llms {
        let mut row = vec![llm.clone()];
        let mut metrics_json = serde_json::Map::new();
        let mut counts_by_config = serde_json::Map::new();
        for metric in metric_names {
            let mut per_config = serde_json::Map::new();
            for config in configs {
                let cell = by_key.get(&(llm.clone(), config.clone()));
                let value = cell.and_then(|m| metric_value(m, metric));
                row.push(match cell {
                    Some(_) => format_metric(value),
                    None => "-".to_string(),
                });
                per_config.insert(
                    config.clone(),
                    value.map(|v| json!(v)).unwrap_or(serde_json::Value::Null),
                );
            }
            metrics_json.insert(metric.to_string(), serde_json::Value::Object(per_config));
        }
        for config in configs {
            if let Some(m) = by_key.get(&(llm.clone(), config.clone())) {
                counts_by_config.insert(config.clone(), counts_json(&m.counts));
            }
        }
        rows_json.push(json!({
            "llm": llm,
            "metrics": metrics_json,
            "counts": counts_by_config,
        }));
        rows_text.push(row);
    }

    let text = format!("{title}\n{}\n{}", render_grid(&rows_text), render_footnotes());
    let json = json!({
        "title": title,
        "configs": configs,
        "metrics": metric_names,
        "rows": rows_json,
        "footnotes": FOOTNOTES,
    });
    Report { text, json }
}

/// Build a stratified table: one row per group with metrics and counts.
pub fn build_stratified_report(
    records: &[OutcomeRecord],
    key: StratifyKey,
    title: &str,
) -> Report {
    let (groups, notes) = stratify(records, key);
    let mut rows_text = vec![vec![
        "group".to_string(),
        "precision".to_string(),
        "recall".to_string(),
        "f1".to_string(),
        "accuracy".to_string(),
        "tp/fp/tn/fn".to_string(),
    ]];
    let mut rows_json = Vec::new();
    for (group, m) in &groups {
        rows_text.push(vec![
            group.clone(),
            format_metric(m.precision),
            format_metric(m.recall),
            format_metric(m.f1),
            format_metric(Some(m.accuracy)),
            format!("{}/{}/{}/{}", m.counts.tp, m.counts.fp, m.counts.tn, m.counts.r#fn),
        ]);
        rows_json.push(json!({
            "group": group,
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
            "accuracy": m.accuracy,
            "counts": counts_json(&m.counts),
        }));
    }
    let mut text = format!("{title}\n{}", render_grid(&rows_text));
    for note in &notes {
        text.push_str(&format!("note: {note}\n"));
    }
    text.push_str(&render_footnotes());
    let json = json!({
        "title": title,
        "rows": rows_json,
        "notes": notes,
        "footnotes": FOOTNOTES,
    });
    Report { text, json }
}

fn render_footnotes() -> String {
    FOOTNOTES
        .iter()
        .map(|f| format!("# {f}\n"))
        .collect::<String>()
}

fn render_grid(rows: &[Vec<String>]) -> String {
    if rows.is_empty() {
        return String::new();
    }
    let columns = rows[0].len();
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for (idx, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if idx == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{ConfusionCell, LibraryCause, RootCause};

    fn record(llm: &str, config: &str, cell: ConfusionCell) -> OutcomeRecord {
        OutcomeRecord {
            case_id: "c".into(),
            llm: llm.into(),
            config: config.into(),
            library_cause: LibraryCause::Sklearn,
            root_cause: RootCause::ApiMisuse,
            cell,
            sub_outcome: None,
        }
    }

    #[test]
    fn paired_config_columns() {
        let records = vec![
            record("mock", "-RT", ConfusionCell::TP),
            record("mock", "-RT", ConfusionCell::FN),
            record("mock", "+RT", ConfusionCell::TP),
            record("mock", "+RT", ConfusionCell::TN),
        ];
        let report = build_main_report(
            &records,
            &["-RT".to_string(), "+RT".to_string()],
            &["precision", "recall", "f1", "accuracy"],
            "Crash detection",
        );
        assert!(report.text.contains("precision (-RT)"));
        assert!(report.text.contains("precision (+RT)"));
        assert!(report.text.contains("accuracy (+RT)"));
        let rows = report.json["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["metrics"]["accuracy"]["+RT"], json!(1.0));
    }

    #[test]
    fn ablation_table_shape() {
        let configs: Vec<String> = ["+RT", "+RT-S", "+RT-V", "+RT-R"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut records = Vec::new();
        for config in &configs {
            records.push(record("mock", config, ConfusionCell::TP));
            records.push(record("mock", config, ConfusionCell::TN));
        }
        let report = build_main_report(&records, &configs, &["f1", "accuracy"], "Ablation");
        for config in &configs {
            assert!(report.text.contains(&format!("f1 ({config})")));
            assert!(report.text.contains(&format!("accuracy ({config})")));
        }
    }

    #[test]
    fn stratified_report_carries_counts() {
        let records = vec![
            record("mock", "+RT", ConfusionCell::TP),
            record("mock", "+RT", ConfusionCell::FP),
        ];
        let report = build_stratified_report(&records, StratifyKey::LibraryCause, "By library");
        assert!(report.text.contains("sklearn"));
        assert!(report.text.contains("1/1/0/0"));
        assert!(report.json["rows"][0]["counts"]["tp"] == json!(1));
    }

    #[test]
    fn undefined_metrics_render_as_undef() {
        let records = vec![record("mock", "+RT", ConfusionCell::TN)];
        let report = build_main_report(
            &records,
            &["+RT".to_string()],
            &["precision", "accuracy"],
            "t",
        );
        assert!(report.text.contains("undef"));
    }
}
