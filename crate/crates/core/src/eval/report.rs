use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{refrain_metrics, RefrainObservation};

/// One evaluated question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub question_id: String,
    pub predicted: String,
    pub golds: Vec<String>,
    pub correct: bool,
    pub refrained: bool,
    /// A gold answer appears in the evidence handed to the generator.
    pub answer_in_prompt_evidence: bool,
    /// Answer presence in the re-ranked list, per cutoff.
    pub presence_at: BTreeMap<usize, bool>,
    /// Reciprocal rank of the first relevant piece, per cutoff.
    pub reciprocal_rank_at: BTreeMap<usize, f64>,
    pub supporting_evidence: Vec<String>,
    /// Set when the pipeline failed for this question; the row then counts
    /// as incorrect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRow {
    pub fn failed(question_id: &str, golds: &[String], ks: &[usize], error: String) -> Self {
        EvalRow {
            question_id: question_id.to_string(),
            predicted: String::new(),
            golds: golds.to_vec(),
            correct: false,
            refrained: false,
            answer_in_prompt_evidence: false,
            presence_at: ks.iter().map(|&k| (k, false)).collect(),
            reciprocal_rank_at: ks.iter().map(|&k| (k, 0.0)).collect(),
            supporting_evidence: Vec::new(),
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub questions: usize,
    pub failures: usize,
    pub p_at_1: f64,
    /// Over answered questions only; `None` when all were refused.
    pub p_at_1_answered: Option<f64>,
    pub answer_presence_at: BTreeMap<usize, f64>,
    pub mrr_at: BTreeMap<usize, f64>,
    pub refrain_rate: f64,
    /// Denominator is the number of refused questions; `None` when there
    /// were none.
    pub refrain_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub aggregates: Aggregates,
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

impl EvalReport {
    /// Aggregates `rows`, sorted by question id for a stable layout.
    pub fn from_rows(mut rows: Vec<EvalRow>, ks: &[usize]) -> Self {
        rows.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        let n = rows.len();
        let observations: Vec<_> = rows
            .iter()
            .map(|r| RefrainObservation {
                refrained: r.refrained,
                answer_in_evidence: r.answer_in_prompt_evidence,
                correct: r.correct,
            })
            .collect();
        let refrain = refrain_metrics(&observations);
        let answer_presence_at = ks
            .iter()
            .map(|&k| {
                let hits = rows
                    .iter()
                    .map(|r| f64::from(u8::from(r.presence_at.get(&k).copied().unwrap_or(false))));
                (k, mean(hits, n))
            })
            .collect();
        let mrr_at = ks
            .iter()
            .map(|&k| {
                (
                    k,
                    mean(
                        rows.iter()
                            .map(|r| r.reciprocal_rank_at.get(&k).copied().unwrap_or(0.0)),
                        n,
                    ),
                )
            })
            .collect();
        let aggregates = Aggregates {
            questions: n,
            failures: rows.iter().filter(|r| r.error.is_some()).count(),
            p_at_1: mean(rows.iter().map(|r| f64::from(u8::from(r.correct))), n),
            p_at_1_answered: refrain.p_at_1_answered,
            answer_presence_at,
            mrr_at,
            refrain_rate: refrain.refrain_rate,
            refrain_accuracy: refrain.refrain_accuracy,
        };
        EvalReport { rows, aggregates }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(format!("cannot serialize report: {e}")))
    }

    /// Aligned plain-text summary followed by one line per question.
    pub fn to_table(&self) -> String {
        let a = &self.aggregates;
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        let mut metrics: Vec<(String, String)> = vec![
            ("questions".into(), a.questions.to_string()),
            ("failures".into(), a.failures.to_string()),
            ("P@1".into(), format!("{:.4}", a.p_at_1)),
            ("P@1 (answered)".into(), opt(a.p_at_1_answered)),
        ];
        for (k, v) in &a.answer_presence_at {
            metrics.push((format!("AP@{k}"), format!("{v:.4}")));
        }
        for (k, v) in &a.mrr_at {
            metrics.push((format!("MRR@{k}"), format!("{v:.4}")));
        }
        metrics.push(("refrain rate".into(), format!("{:.4}", a.refrain_rate)));
        metrics.push(("refrain accuracy".into(), opt(a.refrain_accuracy)));

        let width = metrics.iter().map(|(m, _)| m.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in &metrics {
            let _ = writeln!(out, "{name:<width$}  {value:>8}");
        }

        if !self.rows.is_empty() {
            let id_w = self.rows.iter().map(|r| r.question_id.len()).max().unwrap_or(0).max(2);
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<id_w$}  {:<7}  predicted", "id", "correct");
            for r in &self.rows {
                let status = match (&r.error, r.correct) {
                    (Some(_), _) => "error",
                    (None, true) => "yes",
                    (None, false) => "no",
                };
                let shown = r.error.as_deref().unwrap_or(&r.predicted);
                let _ = writeln!(out, "{:<id_w$}  {status:<7}  {shown}", r.question_id);
            }
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        std::fs::write(&txt, self.to_table()).map_err(|e| Error::io(&txt, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, correct: bool, refrained: bool, present30: bool) -> EvalRow {
        EvalRow {
            question_id: id.into(),
            predicted: if refrained { "unknown".into() } else { "x".into() },
            golds: vec!["x".into()],
            correct,
            refrained,
            answer_in_prompt_evidence: present30,
            presence_at: [(30, present30), (100, true)].into_iter().collect(),
            reciprocal_rank_at: [(30, if present30 { 0.5 } else { 0.0 }), (100, 0.25)]
                .into_iter()
                .collect(),
            supporting_evidence: vec![],
            error: None,
        }
    }

    #[test]
    fn aggregates_by_hand() {
        let report = EvalReport::from_rows(
            vec![
                row("b", false, true, false),
                row("a", true, false, true),
                row("c", false, false, true),
            ],
            &[30, 100],
        );
        assert_eq!(report.rows[0].question_id, "a");
        let a = &report.aggregates;
        assert_eq!(a.questions, 3);
        assert!((a.p_at_1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.p_at_1_answered, Some(0.5));
        assert!((a.answer_presence_at[&30] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.answer_presence_at[&100], 1.0);
        assert!((a.mrr_at[&30] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.refrain_accuracy, Some(1.0));
    }

    #[test]
    fn json_round_trip_and_table() {
        let mut failed = EvalRow::failed("z", &["x".into()], &[30, 100], "client error".into());
        failed.golds = vec!["x".into()];
        let report = EvalReport::from_rows(vec![row("a", true, false, true), failed], &[30, 100]);
        let back: EvalReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
        let table = report.to_table();
        assert!(table.contains("AP@30"));
        assert!(table.contains("refrain accuracy"));
        assert!(table.contains("z   error    client error"));
        assert_eq!(report.aggregates.failures, 1);
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let report = EvalReport::from_rows(vec![row("a", true, false, true)], &[30]);
        report.write(dir.path(), "report").unwrap();
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("report.txt").exists());
    }
}
