use serde::{Deserialize, Serialize};

use crate::corpus::{CodeUnit, SourceFile};
use crate::types::estimate_tokens;

use super::{target_code, PromptError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pass {
    pub index: usize,
    pub units: Vec<String>,
    /// Units from earlier passes whose generated comments are carried along.
    pub carried_from: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedUnit {
    pub unit: String,
    pub tokens: usize,
    pub diagnostic: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassPlan {
    pub passes: Vec<Pass>,
    pub skipped: Vec<SkippedUnit>,
}

/// Tokens taken by a unit's code block.
pub fn unit_cost(unit: &CodeUnit) -> usize {
    estimate_tokens(&target_code(unit, None))
}

/// Packs consecutive units greedily into passes of at most `budget` code
/// tokens. A unit that cannot fit even on its own is skipped.
pub fn plan_passes(file: &SourceFile, units: &[CodeUnit], budget: usize) -> Result<PassPlan, PromptError> {
    if let Some(u) = units.iter().find(|u| u.path != file.path || u.repo_id != file.repo_id) {
        return Err(PromptError::ForeignUnit {
            unit: u.id.clone(),
            file: file.path.clone(),
        });
    }
    let mut plan = PassPlan::default();
    let mut current: Vec<String> = Vec::new();
    let mut used = 0;
    let mut done: Vec<String> = Vec::new();
    let close = |current: &mut Vec<String>, plan: &mut PassPlan, done: &mut Vec<String>| {
        if current.is_empty() {
            return;
        }
        plan.passes.push(Pass {
            index: plan.passes.len(),
            units: current.clone(),
            carried_from: done.clone(),
        });
        done.append(current);
    };
    for u in units {
        let cost = unit_cost(u);
        if cost > budget {
            plan.skipped.push(SkippedUnit {
                unit: u.id.clone(),
                tokens: cost,
                diagnostic: format!("{} needs {cost} tokens on its own; budget is {budget}", u.name),
            });
            continue;
        }
        if used + cost > budget {
            close(&mut current, &mut plan, &mut done);
            used = 0;
        }
        current.push(u.id.clone());
        used += cost;
    }
    close(&mut current, &mut plan, &mut done);
    Ok(plan)
}
