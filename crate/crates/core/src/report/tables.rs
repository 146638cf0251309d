use std::collections::BTreeMap;

use crate::classify::{category_distribution, Category, CategoryLabel};
use crate::evalkit::MetricReport;
use crate::llmclient::Registry;
use crate::types::Setup;

use super::ReportError;

/// Column labels of one setup group, in metric order.
pub const METRIC_LABELS: [&str; 4] = ["ROUGE-L", "BLEU-4", "CodeBERTScore", "GPTScore"];

const EMPTY_CELL: &str = "—";

/// Human-readable row label for a registry model name.
pub fn model_label(name: &str) -> String {
    match name.to_ascii_lowercase().as_str() {
        "o3" => "OpenAI o3".into(),
        "o4-mini" => "OpenAI o4-mini".into(),
        "codestral-25.01" => "Codestral 25.01".into(),
        "deepseek-r1" => "DeepSeek-R1".into(),
        "gpt-4o" => "GPT-4o".into(),
        _ => name.to_string(),
    }
}

/// Registry order first, then unknown models alphabetically.
pub(crate) fn model_order(models: impl IntoIterator<Item = String>) -> Vec<String> {
    let reg = Registry::builtin();
    let rank = |m: &str| {
        reg.models
            .iter()
            .position(|s| s.name.eq_ignore_ascii_case(m))
            .unwrap_or(usize::MAX)
    };
    let mut v: Vec<String> = models.into_iter().collect();
    v.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
    v.dedup();
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Mean,
    Median,
}

fn aggregate(values: &mut [f64], agg: Aggregate) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(match agg {
        Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Median => {
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                (values[n / 2 - 1] + values[n / 2]) / 2.0
            }
        }
    })
}

fn metric_values(r: &MetricReport) -> [Option<f64>; 4] {
    [Some(r.rouge_l), Some(r.bleu_4), r.embed_sim.value(), r.judge_score.value()]
}

type Cells = BTreeMap<(String, Setup), [Vec<f64>; 4]>;

fn collect(reports: &[MetricReport]) -> Cells {
    let mut cells: Cells = BTreeMap::new();
    for r in reports {
        let slot = cells.entry((r.model.clone(), r.setup)).or_default();
        for (i, v) in metric_values(r).into_iter().enumerate() {
            if let Some(v) = v {
                slot[i].push(v);
            }
        }
    }
    cells
}

/// Models as rows, setups as column groups of four metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityTable {
    /// `["Context", <setup titles>]`.
    pub groups: Vec<String>,
    /// `["Model", <metric labels> x 4]`.
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn table_similarity(reports: &[MetricReport], agg: Aggregate) -> SimilarityTable {
    let mut cells = collect(reports);
    let models = model_order(cells.keys().map(|(m, _)| m.clone()));
    let mut header = vec!["Model".to_string()];
    for _ in Setup::ALL {
        header.extend(METRIC_LABELS.iter().map(|s| s.to_string()));
    }
    let rows = models
        .iter()
        .map(|m| {
            let mut row = vec![model_label(m)];
            for s in Setup::ALL {
                match cells.get_mut(&(m.clone(), s)) {
                    Some(vals) => row.extend(vals.iter_mut().map(|v| {
                        aggregate(v, agg).map_or(EMPTY_CELL.to_string(), |x| format!("{x:.2}"))
                    })),
                    None => row.extend((0..4).map(|_| EMPTY_CELL.to_string())),
                }
            }
            row
        })
        .collect();
    SimilarityTable {
        groups: std::iter::once("Context".to_string())
            .chain(Setup::ALL.iter().map(|s| s.title().to_string()))
            .collect(),
        header,
        rows,
    }
}

impl SimilarityTable {
    pub fn render_text(&self) -> String {
        let mut out = format!("{}\n{}\n", self.groups.join(" | "), self.header.join(" | "));
        for r in &self.rows {
            out.push_str(&r.join(" | "));
            out.push('\n');
        }
        out
    }

    /// Tabular body rows, `\texttt{model} & v & ... \\`.
    pub fn render_latex_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| format!("\\texttt{{{}}} & {} \\\\", r[0], r[1..].join(" & ")))
            .collect()
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt6(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// `model,setup,metric,n,mean,median`, one line per populated cell.
pub fn similarity_csv(reports: &[MetricReport]) -> Result<String, ReportError> {
    let mut cells = collect(reports);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "setup", "metric", "n", "mean", "median"])?;
    for m in model_order(cells.keys().map(|(m, _)| m.clone())) {
        for s in Setup::ALL {
            let Some(vals) = cells.get_mut(&(m.clone(), s)) else { continue };
            for (label, v) in METRIC_LABELS.iter().zip(vals.iter_mut()) {
                w.write_record([
                    m.clone(),
                    s.key().to_string(),
                    label.to_string(),
                    v.len().to_string(),
                    fmt6(aggregate(v, Aggregate::Mean)),
                    fmt6(aggregate(v, Aggregate::Median)),
                ])?;
            }
        }
    }
    csv_string(w)
}

/// `group,category,percent`.
pub fn categories_csv(labels: &[CategoryLabel]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "category", "percent"])?;
    for (g, row) in category_distribution(labels) {
        for c in Category::ALL {
            w.write_record([g.clone(), c.to_string(), format!("{:.2}", row[&c])])?;
        }
    }
    csv_string(w)
}

pub fn render_categories(labels: &[CategoryLabel]) -> String {
    let mut out = String::from("Group");
    for c in Category::ALL {
        out.push_str(&format!(" | {c}"));
    }
    out.push('\n');
    for (g, row) in category_distribution(labels) {
        out.push_str(&g);
        for c in Category::ALL {
            out.push_str(&format!(" | {:.2}", row[&c]));
        }
        out.push('\n');
    }
    out
}
