use std::sync::LazyLock;

use regex::Regex;

use super::{DocError, DocType};

const PATH_WEIGHT: u32 = 3;
const NAME_WEIGHT: u32 = 5;

struct Rule {
    doc_type: DocType,
    content: Vec<Regex>,
    path: Option<Regex>,
    /// Strong cue on the bare file stem (README, MANUAL, ...).
    stem: Option<Regex>,
}

fn rx(p: &str) -> Regex {
    Regex::new(&format!("(?i){p}")).unwrap()
}

fn rule(doc_type: DocType, content: &[&str], path: Option<&str>, stem: Option<&str>) -> Rule {
    Rule {
        doc_type,
        content: content.iter().map(|p| rx(p)).collect(),
        path: path.map(rx),
        stem: stem.map(rx),
    }
}

static RULES: LazyLock<Vec<Rule>> = LazyLock::new(|| {
    use DocType::*;
    vec![
        rule(
            Requirements,
            &[r"\bshall\b", r"acceptance criteria", r"\brequirements?\b", r"\bmust support\b", r"\bstakeholders?\b"],
            Some(r"requirement|\bsrs\b|\bspecs?\b"),
            None,
        ),
        rule(
            Architecture,
            &[r"\bcomponents?\b", r"\binterfaces?\b", r"module diagram", r"\barchitecture\b", r"\bdecomposition\b", r"\bsubsystems?\b", r"data exchange"],
            Some(r"architecture|\barch\b|overview"),
            None,
        ),
        rule(
            DetailedDesign,
            &[r"\buml\b", r"use cases?", r"data models?", r"object models?", r"behaviou?r models?", r"sequence diagram", r"class diagram", r"state machine", r"detailed design"],
            Some(r"design"),
            None,
        ),
        rule(
            Implementation,
            &[r"\bimplementation\b", r"\balgorithms?\b", r"\binternals?\b", r"data structures?", r"source code", r"\bcomplex logic\b"],
            Some(r"impl|internals|hacking"),
            None,
        ),
        rule(
            Test,
            &[r"test plan", r"test cases?", r"test reports?", r"unit tests?", r"\btesting\b", r"\bregression\b", r"\bcoverage\b"],
            Some(r"\btests?\b|testing"),
            None,
        ),
        rule(
            ProjectManagement,
            &[r"project plan", r"\bscheduling\b", r"\bschedule\b", r"milestones?", r"\bgantt\b", r"\broadmap\b", r"status reports?", r"\bdeadlines?\b"],
            Some(r"roadmap|governance|milestone|\bplan\b"),
            None,
        ),
        rule(
            ConfigurationManagement,
            &[r"\bversioning\b", r"\breleases?\b", r"\bchangelog\b", r"\bbranch(es|ing)?\b", r"semantic version", r"repository structure", r"configuration items?"],
            Some(r"changelog|\bchanges\b|\bnews\b|release|version|history"),
            None,
        ),
        rule(
            ProjectInfrastructure,
            &[r"\bconventions?\b", r"coding style", r"\btemplates?\b", r"reporting (bugs|issues|procedures?)", r"pull requests?", r"\bcontribut(e|ing|ors?)\b", r"code of conduct", r"continuous integration"],
            Some(r"contributing|conduct|\bstyle\b|\.github|\bci\b"),
            None,
        ),
        rule(
            UserSoftware,
            &[r"\bmanuals?\b", r"error messages?", r"online help", r"\btutorials?\b", r"getting started", r"\binstall(ation|ing)?\b", r"\busage\b", r"user guide", r"\bfaq\b", r"\bhow to\b"],
            Some(r"manual|tutorial|guide|\bfaq\b|install|usage|help|\bman\b"),
            Some(r"^(readme|manual|tutorial|install|usage)"),
        ),
    ]
});

/// Assigns one of the nine document types by weighted keyword and path cues.
///
/// Every distinct content pattern that matches counts 1, a path match counts
/// 3, and a README/MANUAL-style file name 5. The highest total wins; ties (and
/// documents with no cue at all) go to the type seen most often in practice.
pub fn classify_doc(path: &str, content: &str) -> Result<DocType, DocError> {
    if content.trim().is_empty() {
        return Err(DocError::EmptyContent(path.to_string()));
    }
    let path_norm = path.replace('\\', "/");
    let file = path_norm.rsplit('/').next().unwrap_or(&path_norm);
    let stem = file.split('.').next().unwrap_or(file);
    let best = RULES
        .iter()
        .map(|r| {
            let mut score = r.content.iter().filter(|re| re.is_match(content)).count() as u32;
            if r.path.as_ref().is_some_and(|re| re.is_match(&path_norm.replace(['_', '-'], " "))) {
                score += PATH_WEIGHT;
            }
            if r.stem.as_ref().is_some_and(|re| re.is_match(stem)) {
                score += NAME_WEIGHT;
            }
            (score, r.doc_type.frequency_prior(), r.doc_type)
        })
        .max_by_key(|&(score, prior, _)| (score, prior))
        .map(|(_, _, t)| t)
        .unwrap_or(DocType::UserSoftware);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_examples() {
        assert_eq!(
            classify_doc("docs/architecture.md", "Describes the components and interfaces.").unwrap(),
            DocType::Architecture
        );
        assert_eq!(
            classify_doc("MANUAL.txt", "Lists error messages, online help pointers.").unwrap(),
            DocType::UserSoftware
        );
        assert_eq!(classify_doc("notes.txt", "lorem ipsum dolor").unwrap(), DocType::UserSoftware);
    }

    #[test]
    fn requirement_cues() {
        let t = classify_doc("doc/x.md", "The system shall reject input. Acceptance criteria: none.").unwrap();
        assert_eq!(t, DocType::Requirements);
    }

    #[test]
    fn tie_goes_to_more_frequent_type() {
        // one cue each for Test (48) and ConfigurationManagement (64)
        let t = classify_doc("x.txt", "regression; versioning").unwrap();
        assert_eq!(t, DocType::ConfigurationManagement);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(classify_doc("a.md", " \n\t"), Err(DocError::EmptyContent(_))));
    }
}
