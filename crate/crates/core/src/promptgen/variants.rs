use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PromptBundle, PromptError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariantKind {
    OrderPermutation,
    Rewording,
    ContextShrink,
}

/// Alternative instructions used for wording-sensitivity checks.
pub const PARAPHRASES: [&str; 6] = [
    "Write a docstring-style comment for each function in the code above so that a new maintainer \
understands what it does and how to change it safely. Return the whole code with the comments added and nothing else changed.",
    "Document every function shown above with an explanatory comment placed directly before its signature. \
Keep the code itself exactly as it is and return all of it.",
    "For each function above, add a comment that explains its purpose and any behaviour a maintainer could trip over. \
Output the complete code, modified only by the new comments.",
    "Annotate the code above: put a descriptive doc comment in front of each function. \
Do not alter, reorder or drop any code; return the full listing.",
    "Insert a maintainer-oriented comment above every function in this code explaining what it is for. \
Reply with the full code including your comments and no other edits.",
    "Explain each function above in a doc comment written right before it, aimed at someone new to the project. \
Return the entire code with only those comments inserted.",
];

#[derive(Debug, Clone, Default)]
pub struct VariantSet {
    pub variants: Vec<PromptBundle>,
    pub warnings: Vec<String>,
}

/// Perturbed copies of `bundle` for bias checks. The code block is never
/// touched, so any change in the output comes from the perturbation alone.
pub fn make_variants(
    bundle: &PromptBundle,
    kind: VariantKind,
    n: usize,
    seed: u64,
) -> Result<VariantSet, PromptError> {
    if n == 0 {
        return Err(PromptError::ZeroVariants);
    }
    let mut set = VariantSet::default();
    match kind {
        VariantKind::OrderPermutation => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n {
                let mut v = bundle.clone();
                v.exemplars.shuffle(&mut rng);
                v.fit(bundle.budget)?;
                set.variants.push(v);
            }
        }
        VariantKind::Rewording => {
            let choices: Vec<&str> = PARAPHRASES
                .iter()
                .copied()
                .filter(|p| *p != bundle.instruction)
                .collect();
            let offset = (seed % choices.len() as u64) as usize;
            for i in 0..n {
                let mut v = bundle.clone();
                v.instruction = choices[(offset + i) % choices.len()].to_string();
                match v.fit(bundle.budget) {
                    Ok(()) => set.variants.push(v),
                    Err(e) => set.warnings.push(format!("rewording {i} omitted: {e}")),
                }
            }
        }
        VariantKind::ContextShrink => {
            let base = bundle.token_estimate;
            for i in 1..=n {
                let budget = base * (n + 1 - i) / (n + 1);
                let mut v = bundle.clone();
                match v.fit(budget) {
                    Ok(()) => set.variants.push(v),
                    Err(e) => set.warnings.push(format!("shrink to {budget} tokens omitted: {e}")),
                }
            }
        }
    }
    Ok(set)
}
