//! Success-grid CSV and accuracy / token metric reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{HarnessError, TrialOutcome};
use crate::selection::StrategyKind;

/// One grid row. Column order is the CSV header order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRow {
    pub task_id: String,
    pub pool_size: usize,
    pub position: usize,
    pub trial: usize,
    pub strategy: String,
    pub success: u8,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

impl From<&TrialOutcome> for GridRow {
    fn from(o: &TrialOutcome) -> Self {
        GridRow {
            task_id: o.spec.task_id.clone(),
            pool_size: o.spec.pool_size,
            position: o.spec.position,
            trial: o.spec.trial,
            strategy: o.spec.strategy.to_string(),
            success: u8::from(o.success),
            prompt_tokens: o.prompt_tokens,
            completion_tokens: o.completion_tokens,
            latency_ms: o.latency_ms,
        }
    }
}

fn row_key(r: &GridRow) -> (&str, usize, usize, usize, &str) {
    (&r.task_id, r.pool_size, r.position, r.trial, &r.strategy)
}

pub fn write_grid_csv<W: Write>(outcomes: &[TrialOutcome], writer: W) -> Result<(), HarnessError> {
    let mut rows: Vec<GridRow> = outcomes.iter().map(GridRow::from).collect();
    rows.sort_by(|a, b| row_key(a).cmp(&row_key(b)));
    let mut w = csv::Writer::from_writer(writer);
    for row in &rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "task_id",
            "pool_size",
            "position",
            "trial",
            "strategy",
            "success",
            "prompt_tokens",
            "completion_tokens",
            "latency_ms",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn grid_csv_string(outcomes: &[TrialOutcome]) -> String {
    let mut out = Vec::new();
    write_grid_csv(outcomes, &mut out).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("csv output is UTF-8")
}

pub fn read_grid_csv<R: Read>(reader: R) -> Result<Vec<GridRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<Result<Vec<GridRow>, _>>()?;
    Ok(rows)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub strategy: String,
    pub accuracy_pct: f64,
    pub avg_prompt_tokens: f64,
    pub avg_completion_tokens: f64,
    pub trial_count: usize,
}

impl MetricsRow {
    pub fn label(&self) -> String {
        let (kind, k) = match self.strategy.split_once('@') {
            Some((kind, k)) => (kind, Some(k)),
            None => (self.strategy.as_str(), None),
        };
        let base = kind.parse::<StrategyKind>().map(StrategyKind::label).unwrap_or(kind);
        match k {
            Some(k) => format!("{base}@{k}"),
            None => base.to_owned(),
        }
    }

    fn sort_rank(&self) -> usize {
        let kind = self.strategy.split('@').next().unwrap_or_default();
        kind.parse::<StrategyKind>()
            .ok()
            .and_then(|k| StrategyKind::ALL.iter().position(|x| *x == k))
            .unwrap_or(StrategyKind::ALL.len())
    }
}

/// Accuracy and mean token counts for one strategy's rows.
pub fn aggregate_rows(rows: &[&GridRow]) -> Result<MetricsRow, HarnessError> {
    let first = rows.first().ok_or(HarnessError::EmptyOutcomes)?;
    if let Some(other) = rows.iter().find(|r| r.strategy != first.strategy) {
        return Err(HarnessError::MixedStrategies(first.strategy.clone(), other.strategy.clone()));
    }
    let n = rows.len() as f64;
    let successes = rows.iter().filter(|r| r.success == 1).count() as f64;
    let prompt: f64 = rows.iter().map(|r| r.prompt_tokens as f64).sum();
    let completion: f64 = rows.iter().map(|r| r.completion_tokens as f64).sum();
    Ok(MetricsRow {
        strategy: first.strategy.clone(),
        accuracy_pct: round2(100.0 * successes / n),
        avg_prompt_tokens: round2(prompt / n),
        avg_completion_tokens: round2(completion / n),
        trial_count: rows.len(),
    })
}

/// Metrics for a single-strategy set of outcomes.
pub fn aggregate_metrics(outcomes: &[TrialOutcome]) -> Result<MetricsRow, HarnessError> {
    let rows: Vec<GridRow> = outcomes.iter().map(GridRow::from).collect();
    aggregate_rows(&rows.iter().collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    /// One row per strategy, ordered MCP-RAG, Actual Match, Blank.
    pub fn from_rows(rows: &[GridRow]) -> Result<Self, HarnessError> {
        if rows.is_empty() {
            return Err(HarnessError::EmptyOutcomes);
        }
        let mut groups: BTreeMap<&str, Vec<&GridRow>> = BTreeMap::new();
        for row in rows {
            groups.entry(&row.strategy).or_default().push(row);
        }
        let mut out = groups
            .values()
            .map(|g| aggregate_rows(g))
            .collect::<Result<Vec<_>, _>>()?;
        out.sort_by(|a, b| a.sort_rank().cmp(&b.sort_rank()).then_with(|| a.strategy.cmp(&b.strategy)));
        Ok(MetricsReport { rows: out })
    }

    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Result<Self, HarnessError> {
        let rows: Vec<GridRow> = outcomes.iter().map(GridRow::from).collect();
        MetricsReport::from_rows(&rows)
    }

    pub fn row(&self, strategy: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Fixed-width table: Baseline, Accuracy (%), Avg Prompt Tokens, Avg Completion Tokens.
    pub fn to_table(&self) -> String {
        const HEADERS: [&str; 4] = ["Baseline", "Accuracy (%)", "Avg Prompt Tokens", "Avg Completion Tokens"];
        let label_width = self
            .rows
            .iter()
            .map(|r| r.label().len())
            .chain([HEADERS[0].len(), 12])
            .max()
            .unwrap_or(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<lw$}  {:>12}  {:>17}  {:>21}",
            HEADERS[0],
            HEADERS[1],
            HEADERS[2],
            HEADERS[3],
            lw = label_width
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<lw$}  {:>12.2}  {:>17.2}  {:>21.2}",
                r.label(),
                r.accuracy_pct,
                r.avg_prompt_tokens,
                r.avg_completion_tokens,
                lw = label_width
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: &str, success: bool, prompt: u64, completion: u64) -> GridRow {
        GridRow {
            task_id: "t".into(),
            pool_size: 1,
            position: 0,
            trial: 0,
            strategy: strategy.into(),
            success: u8::from(success),
            prompt_tokens: prompt,
            completion_tokens: completion,
            latency_ms: 0,
        }
    }

    #[test]
    fn nine_of_twenty() {
        let rows: Vec<GridRow> = (0..20).map(|i| row("rag_mcp", i < 9, 10 + i, 0)).collect();
        let m = aggregate_rows(&rows.iter().collect::<Vec<_>>()).unwrap();
        assert_eq!(m.accuracy_pct, 45.0);
        assert_eq!(m.avg_prompt_tokens, 19.5);
        assert_eq!(m.trial_count, 20);
    }

    #[test]
    fn all_success_and_rounding() {
        let rows: Vec<GridRow> = (0..3).map(|i| row("blank_conditioning", true, i, 1)).collect();
        let m = aggregate_rows(&rows.iter().collect::<Vec<_>>()).unwrap();
        assert_eq!(m.accuracy_pct, 100.0);
        assert_eq!(m.avg_prompt_tokens, 1.0);
        let rows: Vec<GridRow> = vec![row("x", true, 1, 0), row("x", false, 1, 0), row("x", false, 2, 0)];
        let m = aggregate_rows(&rows.iter().collect::<Vec<_>>()).unwrap();
        assert_eq!(m.accuracy_pct, 33.33);
        assert_eq!(m.avg_prompt_tokens, 1.33);
    }

    #[test]
    fn empty_and_mixed_are_errors() {
        assert!(matches!(aggregate_rows(&[]), Err(HarnessError::EmptyOutcomes)));
        let (a, b) = (row("rag_mcp", true, 1, 0), row("actual_match", true, 1, 0));
        assert!(matches!(aggregate_rows(&[&a, &b]), Err(HarnessError::MixedStrategies(..))));
        assert!(matches!(MetricsReport::from_rows(&[]), Err(HarnessError::EmptyOutcomes)));
    }

    #[test]
    fn table_row_shape_with_reference_values() {
        let report = MetricsReport {
            rows: vec![
                MetricsRow { strategy: "rag_mcp".into(), accuracy_pct: 43.13, avg_prompt_tokens: 1084.00, avg_completion_tokens: 78.14, trial_count: 20 },
                MetricsRow { strategy: "actual_match".into(), accuracy_pct: 18.20, avg_prompt_tokens: 1646.00, avg_completion_tokens: 23.60, trial_count: 20 },
                MetricsRow { strategy: "blank_conditioning".into(), accuracy_pct: 13.62, avg_prompt_tokens: 2133.84, avg_completion_tokens: 162.25, trial_count: 20 },
            ],
        };
        let expected = "\
Baseline      Accuracy (%)  Avg Prompt Tokens  Avg Completion Tokens
MCP-RAG              43.13            1084.00                  78.14
Actual Match         18.20            1646.00                  23.60
Blank                13.62            2133.84                 162.25
";
        assert_eq!(report.to_table(), expected);
        let json = report.to_json();
        assert!(json.contains("\"accuracy_pct\": 43.13"));
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn report_orders_strategies() {
        let rows = vec![row("blank_conditioning", false, 9, 0), row("rag_mcp@3", true, 2, 0), row("rag_mcp", true, 1, 0)];
        let report = MetricsReport::from_rows(&rows).unwrap();
        let order: Vec<_> = report.rows.iter().map(|r| r.label()).collect();
        assert_eq!(order, ["MCP-RAG", "MCP-RAG@3", "Blank"]);
    }

    #[test]
    fn csv_roundtrip_through_reader() {
        let rows = vec![row("rag_mcp", true, 5, 0)];
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.serialize(&rows[0]).unwrap();
            w.flush().unwrap();
        }
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("task_id,pool_size,position,trial,strategy,success,prompt_tokens,completion_tokens,latency_ms\n"));
        assert_eq!(read_grid_csv(buf.as_slice()).unwrap(), rows);
    }
}
