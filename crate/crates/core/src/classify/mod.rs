//! Useful-comment categories: rule-based and judge-based labelling, and
//! per-setup category distributions.

mod rules;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::llmclient::{Client, LlmError, RequestMeta};
use crate::types::Setup;

pub use rules::classify_rules;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Consistency,
    Irrelevance,
    DomainMapping,
    PossibleExceptions,
    AlternativeSolutions,
    Links,
    AlgorithmicDetails,
    Complexity,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Consistency,
        Category::Irrelevance,
        Category::DomainMapping,
        Category::PossibleExceptions,
        Category::AlternativeSolutions,
        Category::Links,
        Category::AlgorithmicDetails,
        Category::Complexity,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Category::Consistency => "Consistency",
            Category::Irrelevance => "Irrelevance",
            Category::DomainMapping => "Mapping to Application Domain Concepts",
            Category::PossibleExceptions => "Possible Exceptions",
            Category::AlternativeSolutions => "Alternative Solutions",
            Category::Links => "Links",
            Category::AlgorithmicDetails => "Algorithmic Details",
            Category::Complexity => "Complexity",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            Category::Consistency => "The concepts in the comment correctly talk about the code",
            Category::Irrelevance => "The comment explains concepts already easily understandable from code",
            Category::DomainMapping => {
                "The comment links the program domain concepts with application domain concepts"
            }
            Category::PossibleExceptions => {
                "The comment lists potential bugs that can arise due to change in parameter"
            }
            Category::AlternativeSolutions => "Provides alternate solutions to solve bugs, improve complexity",
            Category::Links => "The comment links the function to the files where it is defined or the header",
            Category::AlgorithmicDetails => "Explains working summary",
            Category::Complexity => "Provides analysis on time and space complexity and also reasons for it",
        }
    }

    /// Share of useful comments showing this category in the reference study.
    pub fn reference_useful_pct(self) -> f64 {
        match self {
            Category::Consistency => 73.26,
            Category::Irrelevance => 10.26,
            Category::DomainMapping => 35.31,
            Category::PossibleExceptions => 30.66,
            Category::AlternativeSolutions => 9.14,
            Category::Links => 36.88,
            Category::AlgorithmicDetails => 65.56,
            Category::Complexity => 8.19,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        Category::ALL
            .into_iter()
            .find(|c| {
                format!("{c:?}").to_lowercase() == norm
                    || c.title().chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase()
                        == norm
            })
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommentSource {
    Original,
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Rules,
    Judge,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rules" => Ok(Method::Rules),
            "judge" => Ok(Method::Judge),
            _ => Err(format!("unknown method `{s}` (rules|judge)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryLabel {
    pub unit_id: String,
    pub source: CommentSource,
    /// Setup that produced the comment; `None` for original comments.
    pub setup: Option<Setup>,
    pub model: Option<String>,
    pub categories: BTreeSet<Category>,
    pub method: Method,
}

impl CategoryLabel {
    /// Grouping key used in distributions.
    pub fn group(&self) -> String {
        match (&self.model, self.setup) {
            (_, None) => "Original".to_string(),
            (Some(m), Some(s)) => format!("{m} / {}", s.title()),
            (None, Some(s)) => s.title().to_string(),
        }
    }
}

const JUDGE_PREFIX: &str = "Classify the comment below into the categories that apply. Categories:";

pub fn judge_prompt(comment: &str, code: &str) -> String {
    let mut p = String::from(JUDGE_PREFIX);
    for c in Category::ALL {
        p.push_str(&format!("\n- {c}: {}", c.definition()));
    }
    p.push_str(&format!(
        "\n\nAnswer with a comma-separated list of category names, or NONE.\n\nComment:\n{comment}\n\nCode:\n{code}\n"
    ));
    p
}

#[derive(Clone, Copy)]
pub enum Classifier<'a> {
    Rules,
    Judge(&'a Client),
}

impl Classifier<'_> {
    pub fn method(&self) -> Method {
        match self {
            Classifier::Rules => Method::Rules,
            Classifier::Judge(_) => Method::Judge,
        }
    }
}

/// Labels one comment. Rules never fail; a judge can.
pub fn classify_comment(
    unit_id: &str,
    source: CommentSource,
    comment: &str,
    code: &str,
    classifier: Classifier<'_>,
) -> Result<CategoryLabel, LlmError> {
    let categories = match classifier {
        Classifier::Rules => classify_rules(comment, code),
        Classifier::Judge(client) => classify_judge(comment, code, client)?,
    };
    Ok(CategoryLabel {
        unit_id: unit_id.to_string(),
        source,
        setup: None,
        model: None,
        categories,
        method: classifier.method(),
    })
}

/// Asks a model to label the comment; names it cannot parse are ignored.
pub fn classify_judge(comment: &str, code: &str, judge: &Client) -> Result<BTreeSet<Category>, LlmError> {
    let reply = judge.complete_prompt(&judge_prompt(comment, code), &RequestMeta::default())?;
    Ok(reply
        .text
        .split([',', '\n', ';'])
        .filter_map(|w| w.trim().trim_start_matches('-').trim().parse::<Category>().ok())
        .collect())
}

/// Per-group share (percent) of comments carrying each category. Groups are
/// multi-label, so a group's percentages need not add up to 100.
pub fn category_distribution(labels: &[CategoryLabel]) -> BTreeMap<String, BTreeMap<Category, f64>> {
    let mut counts: BTreeMap<String, (usize, BTreeMap<Category, usize>)> = BTreeMap::new();
    for l in labels {
        let entry = counts.entry(l.group()).or_default();
        entry.0 += 1;
        for c in &l.categories {
            *entry.1.entry(*c).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(g, (n, per))| {
            let row = Category::ALL
                .into_iter()
                .map(|c| (c, 100.0 * per.get(&c).copied().unwrap_or(0) as f64 / n as f64))
                .collect();
            (g, row)
        })
        .collect()
}

/// The reference "%useful" column, one category per line.
pub fn render_reference_distribution() -> String {
    Category::ALL
        .iter()
        .map(|c| format!("{} {:.2}%\n", c.title(), c.reference_useful_pct()))
        .collect()
}
