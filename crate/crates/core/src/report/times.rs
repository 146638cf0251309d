use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::evalkit::chi_square_two_tailed;
use crate::types::Setup;

use super::tables::model_label;
use super::ReportError;

pub const TIME_COLUMNS: [&str; 5] = ["participant", "model", "setup", "task", "minutes"];

/// Setup values naming the two baselines that have no model.
const ORIGINAL: &str = "original";
const NO_COMMENTS: &str = "none";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRecord {
    pub participant: String,
    pub model: String,
    /// A setup key, `original` or `none`.
    pub setup: String,
    pub task: String,
    pub minutes: f64,
}

/// Reads task durations. The header must contain every column of
/// [`TIME_COLUMNS`]; extra columns are ignored.
pub fn read_times(path: &Path) -> Result<Vec<TimeRecord>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let missing: Vec<String> = TIME_COLUMNS
        .iter()
        .filter(|c| !found.iter().any(|f| f == *c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ReportError::MissingColumns {
            path: path.display().to_string(),
            missing,
            found,
        });
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let r: TimeRecord = rec?;
        if r.setup != ORIGINAL && r.setup != NO_COMMENTS && r.setup.parse::<Setup>().is_err() {
            return Err(ReportError::BadInput {
                path: path.display().to_string(),
                message: format!("unknown condition `{}`", r.setup),
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// How continuous times are split into faster/slower counts for the χ² test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binning {
    /// Faster than the median of the no-comment condition for the task
    /// (falls back to the pooled median when that condition is absent).
    #[default]
    NoCommentMedian,
    /// Faster than the median of the two compared conditions pooled.
    PooledMedian,
}

impl FromStr for Binning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no-comment-median" => Ok(Binning::NoCommentMedian),
            "pooled-median" => Ok(Binning::PooledMedian),
            _ => Err(format!("unknown binning `{s}` (no-comment-median|pooled-median)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarTest {
    pub model: String,
    pub against: Setup,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// Why no p-value could be computed, if so.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub model: String,
    /// Mean minutes per setup, in `Setup::ALL` order.
    pub cells: [Option<f64>; 4],
    pub starred: [bool; 4],
}

/// Two decimals with trailing zeros dropped: 24.00 → "24", 30.50 → "30.5".
pub fn format_minutes(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

impl TimeRow {
    pub fn cell_texts(&self) -> Vec<String> {
        self.cells
            .iter()
            .zip(self.starred)
            .map(|(c, star)| match c {
                Some(v) => format!("{}{}", format_minutes(*v), if star { "*" } else { "" }),
                None => "—".to_string(),
            })
            .collect()
    }

    /// Cells separated by " / ".
    pub fn summary(&self) -> String {
        self.cell_texts().join(" / ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub model: String,
    pub setup: Setup,
    /// Percent less time than the baseline; negative when slower.
    pub vs_original_pct: Option<f64>,
    pub vs_no_comments_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTable {
    pub task: String,
    pub rows: Vec<TimeRow>,
    pub original: Option<f64>,
    pub no_comments: Option<f64>,
    pub tests: Vec<StarTest>,
    pub reductions: Vec<Reduction>,
    /// Counts per row/setup, for the CSV.
    pub counts: Vec<[usize; 4]>,
}

impl TimeTable {
    pub fn render_text(&self) -> String {
        let mut out = String::from("Model");
        for s in Setup::ALL {
            out.push_str(&format!(" | {}", s.title()));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{} | {}\n", model_label(&r.model), r.cell_texts().join(" | ")));
        }
        if let Some(v) = self.original {
            out.push_str(&format!("Original | {}\n", format_minutes(v)));
        }
        if let Some(v) = self.no_comments {
            out.push_str(&format!("No Comments | {}\n", format_minutes(v)));
        }
        out
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 })
}

fn pct_less(x: f64, base: Option<f64>) -> Option<f64> {
    base.filter(|b| *b > 0.0).map(|b| 100.0 * (b - x) / b)
}

/// Per-task tables of mean minutes. The design-doc cell of a model is starred
/// when it is faster than, and significantly different (p < 0.05) from, every
/// other setup that model has data for.
pub fn time_analysis(records: &[TimeRecord], binning: Binning) -> Vec<TimeTable> {
    let mut tasks: BTreeMap<&str, Vec<&TimeRecord>> = BTreeMap::new();
    for r in records {
        tasks.entry(&r.task).or_default().push(r);
    }
    let doc = Setup::CodeDoc;
    let doc_col = Setup::ALL.iter().position(|s| *s == doc).expect("setup listed");
    tasks
        .into_iter()
        .map(|(task, recs)| {
            let of = |pred: &dyn Fn(&TimeRecord) -> bool| -> Vec<f64> {
                recs.iter().filter(|r| pred(r)).map(|r| r.minutes).collect()
            };
            let none_times = of(&|r| r.setup == NO_COMMENTS);
            let original = mean(&of(&|r| r.setup == ORIGINAL));
            let no_comments = mean(&none_times);
            let mut per_model: BTreeMap<String, BTreeMap<Setup, Vec<f64>>> = BTreeMap::new();
            for r in &recs {
                if let Ok(s) = r.setup.parse::<Setup>() {
                    per_model.entry(r.model.clone()).or_default().entry(s).or_default().push(r.minutes);
                }
            }
            let models = super::tables::model_order(per_model.keys().cloned());
            let mut rows = Vec::new();
            let mut tests = Vec::new();
            let mut reductions = Vec::new();
            let mut counts = Vec::new();
            for m in models {
                let by_setup = &per_model[&m];
                let cells = Setup::ALL.map(|s| by_setup.get(&s).and_then(|v| mean(v)));
                counts.push(Setup::ALL.map(|s| by_setup.get(&s).map_or(0, Vec::len)));
                let mut starred = [false; 4];
                if let (Some(doc_times), Some(doc_mean)) = (by_setup.get(&doc), cells[doc_col]) {
                    let mut all_significant = true;
                    let mut compared = 0;
                    for other in Setup::ALL.into_iter().filter(|s| *s != doc) {
                        let Some(other_times) = by_setup.get(&other) else { continue };
                        compared += 1;
                        let threshold = match binning {
                            Binning::NoCommentMedian if !none_times.is_empty() => median(&none_times),
                            _ => median(&[doc_times.as_slice(), other_times.as_slice()].concat()),
                        }
                        .expect("non-empty");
                        let row = |v: &[f64]| {
                            let fast = v.iter().filter(|&&t| t < threshold).count() as f64;
                            vec![fast, v.len() as f64 - fast]
                        };
                        let test = chi_square_two_tailed(&[row(doc_times), row(other_times)]);
                        let faster = mean(other_times).is_some_and(|o| doc_mean < o);
                        let (statistic, p_value, note) = match test {
                            Ok(c) => (Some(c.statistic), Some(c.p_value), None),
                            Err(e) => (None, None, Some(e.to_string())),
                        };
                        all_significant &= faster && p_value.is_some_and(|p| p < 0.05);
                        tests.push(StarTest {
                            model: m.clone(),
                            against: other,
                            statistic,
                            p_value,
                            note,
                        });
                    }
                    starred[doc_col] = compared > 0 && all_significant;
                }
                for (i, s) in Setup::ALL.into_iter().enumerate() {
                    if let Some(x) = cells[i] {
                        reductions.push(Reduction {
                            model: m.clone(),
                            setup: s,
                            vs_original_pct: pct_less(x, original),
                            vs_no_comments_pct: pct_less(x, no_comments),
                        });
                    }
                }
                rows.push(TimeRow { model: m, cells, starred });
            }
            TimeTable {
                task: task.to_string(),
                rows,
                original,
                no_comments,
                tests,
                reductions,
                counts,
            }
        })
        .collect()
}

/// `task,model,setup,n,mean_minutes,starred,reduction_vs_original_pct,reduction_vs_no_comments_pct`.
pub fn times_csv(tables: &[TimeTable]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "task",
        "model",
        "setup",
        "n",
        "mean_minutes",
        "starred",
        "reduction_vs_original_pct",
        "reduction_vs_no_comments_pct",
    ])?;
    let f2 = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.2}"));
    for t in tables {
        for (row, counts) in t.rows.iter().zip(&t.counts) {
            for (i, s) in Setup::ALL.into_iter().enumerate() {
                let Some(m) = row.cells[i] else { continue };
                let red = t.reductions.iter().find(|r| r.model == row.model && r.setup == s);
                w.write_record([
                    t.task.clone(),
                    row.model.clone(),
                    s.key().to_string(),
                    counts[i].to_string(),
                    format_minutes(m),
                    row.starred[i].to_string(),
                    f2(red.and_then(|r| r.vs_original_pct)),
                    f2(red.and_then(|r| r.vs_no_comments_pct)),
                ])?;
            }
        }
        for (name, v) in [(ORIGINAL, t.original), (NO_COMMENTS, t.no_comments)] {
            if let Some(v) = v {
                w.write_record([t.task.clone(), String::new(), name.to_string(), String::new(), format_minutes(v), "false".into(), String::new(), String::new()])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
