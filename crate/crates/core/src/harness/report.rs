use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::saliency::{saliency_csv, saliency_svg};
use super::stats::TTest;
use crate::error::Result;
use crate::models::ModelKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model: ModelKind,
    pub param_count: usize,
    pub published_param_count: usize,
}

/// Accuracy of one trained scorer on one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub model: ModelKind,
    /// Subject label, or `"all"` for pooled runs.
    pub subject: String,
    pub condition: String,
    pub fold: usize,
    pub accuracy: f64,
    pub n_trials: usize,
    /// Per-epoch mean training loss (empty for LDA).
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub subject: String,
    pub condition: String,
    pub accuracy: f64,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub model: ModelKind,
    pub level_ms: i64,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub level_ms: i64,
    pub model_a: ModelKind,
    pub model_b: ModelKind,
    /// `None` when the test is undefined (e.g. both groups constant).
    pub result: Option<TTest>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub model: ModelKind,
    pub subject: String,
    /// Epoch-level AUC on the evaluation split before and after fine-tuning.
    pub auc_before: f64,
    pub auc_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyResult {
    pub model: ModelKind,
    pub n_epochs: usize,
    pub times_ms: Vec<f64>,
    /// Share of total mass in the 200–500 ms columns.
    pub mass_fraction_200_500: f64,
    /// The same share for a flat map.
    pub uniform_share_200_500: f64,
    /// `[channels][samples]`, raw mean absolute gradient.
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub generator: String,
    /// The configuration as run; `jobs` is recorded as 1 since it cannot change results.
    pub config: ExperimentConfig,
    pub models: Vec<ModelInfo>,
    pub folds: Vec<FoldResult>,
    pub summary: Vec<SummaryRow>,
    pub noise: Vec<NoiseRow>,
    pub t_tests: Vec<TTestRow>,
    pub transfer: Vec<TransferRow>,
    pub saliency: Vec<SaliencyResult>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            generator: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            config: ExperimentConfig {
                jobs: 1,
                ..config.clone()
            },
            models: Vec::new(),
            folds: Vec::new(),
            summary: Vec::new(),
            noise: Vec::new(),
            t_tests: Vec::new(),
            transfer: Vec::new(),
            saliency: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Mean fold accuracy per (model, subject, condition), plus a `"mean"`
    /// row per (model, condition) averaging the subjects.
    pub fn summarize(&mut self) {
        let mut rows: Vec<SummaryRow> = Vec::new();
        let mut keys: Vec<(ModelKind, String, String)> = Vec::new();
        for f in &self.folds {
            let k = (f.model, f.subject.clone(), f.condition.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        for (model, subject, condition) in &keys {
            let accs: Vec<f64> = self
                .folds
                .iter()
                .filter(|f| f.model == *model && &f.subject == subject && &f.condition == condition)
                .map(|f| f.accuracy)
                .collect();
            rows.push(SummaryRow {
                model: *model,
                subject: subject.clone(),
                condition: condition.clone(),
                accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                folds: accs.len(),
            });
        }
        let mut groups: Vec<(ModelKind, String)> = Vec::new();
        for r in &rows {
            let g = (r.model, r.condition.clone());
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
        for (model, condition) in groups {
            let subj: Vec<f64> = rows
                .iter()
                .filter(|r| r.model == model && r.condition == condition)
                .map(|r| r.accuracy)
                .collect();
            if subj.len() > 1 {
                rows.push(SummaryRow {
                    model,
                    subject: "mean".into(),
                    condition,
                    accuracy: subj.iter().sum::<f64>() / subj.len() as f64,
                    folds: subj.len(),
                });
            }
        }
        self.summary = rows;
    }

    /// Subject-averaged accuracy of `model` under `condition`.
    pub fn mean_accuracy(&self, model: ModelKind, condition: &str) -> Option<f64> {
        let rows: Vec<&SummaryRow> = self
            .summary
            .iter()
            .filter(|r| r.model == model && r.condition == condition)
            .collect();
        rows.iter()
            .find(|r| r.subject == "mean")
            .or_else(|| rows.first())
            .map(|r| r.accuracy)
    }

    pub fn noise_accuracy(&self, model: ModelKind, level_ms: i64) -> Option<f64> {
        self.noise
            .iter()
            .find(|r| r.model == model && r.level_ms == level_ms)
            .map(|r| r.mean_accuracy)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Plain-text accuracy table for the terminal.
    pub fn headline(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.experiment);
        if !self.summary.is_empty() {
            let _ = writeln!(s, "{:<16} {:<12} {:<18} {:>8}", "model", "subject", "condition", "accuracy");
            for r in self.summary.iter().filter(|r| r.subject == "mean" || r.subject == "all") {
                let _ = writeln!(
                    s,
                    "{:<16} {:<12} {:<18} {:>8.3}",
                    r.model.name(),
                    r.subject,
                    r.condition,
                    r.accuracy
                );
            }
            if !self.summary.iter().any(|r| r.subject == "mean" || r.subject == "all") {
                for r in &self.summary {
                    let _ = writeln!(
                        s,
                        "{:<16} {:<12} {:<18} {:>8.3}",
                        r.model.name(),
                        r.subject,
                        r.condition,
                        r.accuracy
                    );
                }
            }
        }
        if !self.noise.is_empty() {
            let _ = writeln!(s, "{:<16} {:>9} {:>8}", "model", "jitter_ms", "accuracy");
            for r in &self.noise {
                let _ = writeln!(s, "{:<16} {:>9} {:>8.3}", r.model.name(), r.level_ms, r.mean_accuracy);
            }
        }
        for r in &self.saliency {
            let _ = writeln!(
                s,
                "{:<16} saliency mass in 200-500 ms: {:.3} (flat map: {:.3})",
                r.model.name(),
                r.mass_fraction_200_500,
                r.uniform_share_200_500
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    fn csv_bytes<F>(header: &[&str], f: F) -> Result<Vec<u8>>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        f(&mut w)?;
        w.into_inner()
            .map_err(|e| crate::error::Error::Io(e.into_error()))
    }

    /// `(relative path, contents)` of every output file.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut out = vec![("report.json".to_string(), self.to_json()?.into_bytes())];
        if !self.folds.is_empty() {
            let bytes = Self::csv_bytes(&["model", "subject", "condition", "fold", "accuracy"], |w| {
                for f in &self.folds {
                    w.write_record([
                        f.model.name(),
                        &f.subject,
                        &f.condition,
                        &f.fold.to_string(),
                        &f.accuracy.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            out.push(("tables/accuracy.csv".into(), bytes));
            let bytes = Self::csv_bytes(&["model", "subject", "condition", "folds", "accuracy"], |w| {
                for r in &self.summary {
                    w.write_record([
                        r.model.name(),
                        &r.subject,
                        &r.condition,
                        &r.folds.to_string(),
                        &r.accuracy.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            out.push(("tables/summary.csv".into(), bytes));
        }
        if !self.models.is_empty() {
            let bytes = Self::csv_bytes(&["model", "param_count", "published_param_count"], |w| {
                for m in &self.models {
                    w.write_record([
                        m.model.name(),
                        &m.param_count.to_string(),
                        &m.published_param_count.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            out.push(("tables/parameters.csv".into(), bytes));
        }
        if !self.noise.is_empty() {
            let bytes = Self::csv_bytes(&["model", "level_ms", "mean_accuracy", "folds"], |w| {
                for r in &self.noise {
                    w.write_record([
                        r.model.name(),
                        &r.level_ms.to_string(),
                        &r.mean_accuracy.to_string(),
                        &r.fold_accuracies.len().to_string(),
                    ])?;
                }
                Ok(())
            })?;
            out.push(("tables/noise.csv".into(), bytes));
        }
        if !self.t_tests.is_empty() {
            let bytes = Self::csv_bytes(&["level_ms", "model_a", "model_b", "t", "df", "p"], |w| {
                for r in &self.t_tests {
                    let (t, df, p) = match r.result {
                        Some(x) => (x.t.to_string(), x.df.to_string(), x.p.to_string()),
                        None => (String::new(), String::new(), String::new()),
                    };
                    w.write_record([
                        r.level_ms.to_string().as_str(),
                        r.model_a.name(),
                        r.model_b.name(),
                        &t,
                        &df,
                        &p,
                    ])?;
                }
                Ok(())
            })?;
            out.push(("tables/t_tests.csv".into(), bytes));
        }
        if !self.transfer.is_empty() {
            let bytes = Self::csv_bytes(&["model", "subject", "auc_before", "auc_after"], |w| {
                for r in &self.transfer {
                    w.write_record([
                        r.model.name(),
                        &r.subject,
                        &r.auc_before.to_string(),
                        &r.auc_after.to_string(),
                    ])?;
                }
                Ok(())
            })?;
            out.push(("tables/transfer.csv".into(), bytes));
        }
        for r in &self.saliency {
            let map = ndarray::Array2::from_shape_fn(
                (r.matrix.len(), r.matrix.first().map_or(0, Vec::len)),
                |(i, j)| r.matrix[i][j],
            );
            out.push((
                format!("saliency/{}.csv", r.model.name()),
                saliency_csv(&map, &r.times_ms).into_bytes(),
            ));
            if self.config.saliency_svg {
                out.push((
                    format!("saliency/{}.svg", r.model.name()),
                    saliency_svg(&map, &r.times_ms, &format!("{} mean |∂f/∂x|", r.model.name()))
                        .into_bytes(),
                ));
            }
        }
        Ok(out)
    }

    /// Writes every output file under `dir`, each via a temporary file and rename.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (rel, bytes) in self.files()? {
            let path = dir.join(&rel);
            let parent = path.parent().expect("joined path has a parent");
            fs::create_dir_all(parent)?;
            let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
            std::io::Write::write_all(&mut tmp, &bytes)?;
            tmp.persist(&path).map_err(|e| crate::error::Error::Io(e.error))?;
        }
        Ok(())
    }
}
