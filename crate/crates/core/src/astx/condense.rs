use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::CodeUnit;
use crate::types::{estimate_tokens, estimate_tokens_from_chars};

use super::{AstError, RawAst};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AstKind {
    Function,
    Parameter,
    Compound,
    Call,
    If,
    Loop,
    Return,
    Declaration,
    Record,
    Field,
    Enum,
    EnumConstant,
}

impl AstKind {
    fn label(self) -> &'static str {
        match self {
            AstKind::Function => "function",
            AstKind::Parameter => "param",
            AstKind::Compound => "block",
            AstKind::Call => "call",
            AstKind::If => "if",
            AstKind::Loop => "loop",
            AstKind::Return => "return",
            AstKind::Declaration => "decl",
            AstKind::Record => "record",
            AstKind::Field => "field",
            AstKind::Enum => "enum",
            AstKind::EnumConstant => "enumerator",
        }
    }

    fn from_clang(kind: &str) -> Option<AstKind> {
        Some(match kind {
            "FunctionDecl" | "CXXMethodDecl" | "CXXConstructorDecl" | "CXXDestructorDecl"
            | "CXXConversionDecl" => AstKind::Function,
            "ParmVarDecl" => AstKind::Parameter,
            "CompoundStmt" => AstKind::Compound,
            "CallExpr" | "CXXMemberCallExpr" => AstKind::Call,
            "IfStmt" => AstKind::If,
            "ForStmt" | "WhileStmt" | "DoStmt" | "CXXForRangeStmt" => AstKind::Loop,
            "ReturnStmt" => AstKind::Return,
            "VarDecl" => AstKind::Declaration,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    /// Identity of the source node in the dump (clang's `id`, or the
    /// declaration id for callee and type summaries).
    pub origin: String,
    pub kind: AstKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_text: Option<String>,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<usize>,
}

impl AstNode {
    fn line(&self) -> String {
        let mut s = format!("{}{}", "  ".repeat(self.depth), self.kind.label());
        if let Some(n) = &self.name {
            s.push(' ');
            s.push_str(n);
        }
        if let Some(t) = &self.type_text {
            s.push_str(" : ");
            s.push_str(t);
        }
        s
    }

    fn cost_chars(&self) -> usize {
        self.line().chars().count() + 1
    }
}

/// Budget-bounded structural summary of one function. Node 0 is the root;
/// nodes are stored in priority order, which is also render order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondensedAst {
    pub unit_id: String,
    pub nodes: Vec<AstNode>,
    pub callees: Vec<String>,
    pub token_estimate: usize,
}

impl CondensedAst {
    pub fn render(&self) -> String {
        self.nodes.iter().map(|n| n.line() + "\n").collect()
    }

    /// Keeps the `n` highest-priority nodes. Any prefix is still a tree.
    pub fn prefix(&self, n: usize) -> CondensedAst {
        let n = n.min(self.nodes.len());
        let nodes: Vec<AstNode> = self.nodes[..n]
            .iter()
            .map(|node| AstNode {
                children: node.children.iter().copied().filter(|&c| c < n).collect(),
                ..node.clone()
            })
            .collect();
        finish(self.unit_id.clone(), nodes)
    }

    pub fn parent_of(&self, idx: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.children.contains(&idx))
    }
}

fn finish(unit_id: String, nodes: Vec<AstNode>) -> CondensedAst {
    let mut seen = HashSet::new();
    let callees = nodes
        .iter()
        .filter(|n| n.kind == AstKind::Call)
        .filter_map(|n| n.name.clone())
        .filter(|n| seen.insert(n.clone()))
        .collect();
    let mut ast = CondensedAst {
        unit_id,
        nodes,
        callees,
        token_estimate: 0,
    };
    ast.token_estimate = estimate_tokens(&ast.render());
    ast
}

struct Candidate {
    node: AstNode,
    parent: Option<usize>,
}

/// Declarations in the dump that summaries can point at.
#[derive(Default)]
struct DeclIndex<'a> {
    functions: HashMap<&'a str, &'a Value>,
    records: HashMap<&'a str, &'a Value>,
    typedefs: HashMap<&'a str, &'a str>,
}

impl<'a> DeclIndex<'a> {
    fn build(root: &'a Value) -> Self {
        let mut idx = DeclIndex::default();
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            if is_implicit(v) {
                continue;
            }
            if let (Some(kind), Some(name)) = (str_field(v, "kind"), str_field(v, "name")) {
                match kind {
                    k if AstKind::from_clang(k) == Some(AstKind::Function) => {
                        let better = idx.functions.get(name).is_none_or(|old| !has_body(old) && has_body(v));
                        if better {
                            idx.functions.insert(name, v);
                        }
                    }
                    "RecordDecl" | "CXXRecordDecl" | "EnumDecl" if has_members(v) => {
                        idx.records.entry(name).or_insert(v);
                    }
                    "TypedefDecl" => {
                        if let Some(t) = v.get("type").and_then(|t| str_field(t, "qualType")) {
                            idx.typedefs.entry(name).or_insert(t);
                        }
                    }
                    _ => {}
                }
            }
            if let Some(inner) = v.get("inner").and_then(Value::as_array) {
                stack.extend(inner.iter().rev());
            }
        }
        idx
    }

    fn resolve_record(&self, word: &str, depth: usize) -> Option<&'a Value> {
        if let Some(r) = self.records.get(word) {
            return Some(r);
        }
        if depth > 4 {
            return None;
        }
        let target = self.typedefs.get(word)?;
        type_words(target)
            .into_iter()
            .find_map(|w| if w == word { None } else { self.resolve_record(w, depth + 1) })
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

fn is_implicit(v: &Value) -> bool {
    v.get("isImplicit").and_then(Value::as_bool).unwrap_or(false)
}

fn inner(v: &Value) -> &[Value] {
    v.get("inner").and_then(Value::as_array).map_or(&[], Vec::as_slice)
}

fn has_body(v: &Value) -> bool {
    inner(v).iter().any(|c| str_field(c, "kind") == Some("CompoundStmt"))
}

fn has_members(v: &Value) -> bool {
    inner(v)
        .iter()
        .any(|c| matches!(str_field(c, "kind"), Some("FieldDecl" | "EnumConstantDecl")))
}

fn origin(v: &Value) -> String {
    str_field(v, "id").unwrap_or_default().to_string()
}

fn qual_type(v: &Value) -> Option<String> {
    v.get("type").and_then(|t| str_field(t, "qualType")).map(str::to_string)
}

const TYPE_NOISE: [&str; 20] = [
    "const", "volatile", "struct", "union", "enum", "class", "unsigned", "signed", "int", "char",
    "long", "short", "float", "double", "void", "bool", "_Bool", "restrict", "__restrict", "auto",
];

fn type_words(t: &str) -> Vec<&str> {
    t.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty() && !TYPE_NOISE.contains(w) && !w.starts_with(|c: char| c.is_ascii_digit()))
        .collect()
}

/// `object_pool<T>` names the constructor of a class template.
fn without_template_args(name: &str) -> &str {
    match name.find('<') {
        Some(i) if !name.starts_with("operator") && name.ends_with('>') => &name[..i],
        _ => name,
    }
}

fn find_definition<'a>(root: &'a Value, name: &str) -> Option<&'a Value> {
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        if is_implicit(v) {
            continue;
        }
        let is_fn = str_field(v, "kind").and_then(AstKind::from_clang) == Some(AstKind::Function);
        if is_fn && str_field(v, "name").map(without_template_args) == Some(name) && has_body(v) {
            return Some(v);
        }
        stack.extend(inner(v).iter().rev());
    }
    None
}

fn callee_name(call: &Value) -> Option<String> {
    let callee = inner(call).first()?;
    let mut stack = vec![callee];
    while let Some(v) = stack.pop() {
        match str_field(v, "kind") {
            Some("DeclRefExpr") => {
                if let Some(n) = v.get("referencedDecl").and_then(|d| str_field(d, "name")) {
                    return Some(n.to_string());
                }
            }
            Some("MemberExpr") => {
                if let Some(n) = str_field(v, "name") {
                    return Some(n.to_string());
                }
            }
            _ => {}
        }
        stack.extend(inner(v).iter().rev());
    }
    None
}

fn collect_own(v: &Value, parent: Option<usize>, depth: usize, out: &mut Vec<Candidate>) {
    if is_implicit(v) {
        return;
    }
    let Some(kind_str) = str_field(v, "kind") else {
        return;
    };
    match AstKind::from_clang(kind_str) {
        Some(kind) => {
            let name = match kind {
                AstKind::Call => callee_name(v),
                AstKind::Function | AstKind::Parameter | AstKind::Declaration => {
                    str_field(v, "name").map(str::to_string)
                }
                _ => None,
            };
            let type_text = match kind {
                AstKind::Function | AstKind::Parameter | AstKind::Declaration => qual_type(v),
                _ => None,
            };
            let idx = out.len();
            out.push(Candidate {
                node: AstNode {
                    origin: origin(v),
                    kind,
                    name,
                    type_text,
                    depth,
                    children: Vec::new(),
                },
                parent,
            });
            for c in inner(v) {
                collect_own(c, Some(idx), depth + 1, out);
            }
        }
        None => {
            for c in inner(v) {
                collect_own(c, parent, depth, out);
            }
        }
    }
}

/// Condenses the dump around `unit` to fit `budget` tokens.
///
/// Candidates are ranked: the unit's own subtree (pre-order), then signatures
/// of directly called functions, then member names of referenced record and
/// enum types. The longest prefix of that ranking that fits is kept, so a
/// larger budget always keeps a superset. The root is kept even at budget 0.
pub fn condense(raw: &RawAst, unit: &CodeUnit, budget: usize) -> Result<CondensedAst, AstError> {
    let base = unit.name.rsplit("::").next().unwrap_or(&unit.name);
    let def = find_definition(&raw.root, base).ok_or_else(|| AstError::UnitNotInDump(unit.name.clone()))?;
    let index = DeclIndex::build(&raw.root);

    let mut cands = Vec::new();
    collect_own(def, None, 0, &mut cands);

    let mut seen = HashSet::new();
    let callees: Vec<String> = cands
        .iter()
        .filter(|c| c.node.kind == AstKind::Call)
        .filter_map(|c| c.node.name.clone())
        .filter(|n| seen.insert(n.clone()))
        .collect();
    for name in &callees {
        if let Some(decl) = index.functions.get(name.as_str()) {
            cands.push(Candidate {
                node: AstNode {
                    origin: origin(decl),
                    kind: AstKind::Function,
                    name: Some(name.clone()),
                    type_text: qual_type(decl),
                    depth: 1,
                    children: Vec::new(),
                },
                parent: Some(0),
            });
        }
    }

    let mut type_text_seen: Vec<String> = Vec::new();
    for c in &cands {
        if matches!(c.node.kind, AstKind::Parameter | AstKind::Declaration | AstKind::Function) {
            if let Some(t) = &c.node.type_text {
                type_text_seen.push(t.clone());
            }
        }
    }
    let mut records_done = HashSet::new();
    for t in &type_text_seen {
        for word in type_words(t) {
            let Some(rec) = index.resolve_record(word, 0) else { continue };
            let rec_origin = origin(rec);
            if !records_done.insert(rec_origin.clone()) {
                continue;
            }
            let is_enum = str_field(rec, "kind") == Some("EnumDecl");
            let rec_idx = cands.len();
            cands.push(Candidate {
                node: AstNode {
                    origin: rec_origin,
                    kind: if is_enum { AstKind::Enum } else { AstKind::Record },
                    name: str_field(rec, "name").map(str::to_string),
                    type_text: None,
                    depth: 1,
                    children: Vec::new(),
                },
                parent: Some(0),
            });
            for m in inner(rec) {
                let kind = match str_field(m, "kind") {
                    Some("FieldDecl") => AstKind::Field,
                    Some("EnumConstantDecl") => AstKind::EnumConstant,
                    _ => continue,
                };
                if is_implicit(m) {
                    continue;
                }
                cands.push(Candidate {
                    node: AstNode {
                        origin: origin(m),
                        kind,
                        name: str_field(m, "name").map(str::to_string),
                        type_text: None,
                        depth: 2,
                        children: Vec::new(),
                    },
                    parent: Some(rec_idx),
                });
            }
        }
    }

    let mut total_chars = 0usize;
    let mut keep = 0usize;
    for (i, c) in cands.iter().enumerate() {
        let next = total_chars + c.node.cost_chars();
        if i > 0 && estimate_tokens_from_chars(next) > budget {
            break;
        }
        total_chars = next;
        keep = i + 1;
    }

    let mut nodes: Vec<AstNode> = cands[..keep].iter().map(|c| c.node.clone()).collect();
    for (i, c) in cands[..keep].iter().enumerate() {
        if let Some(p) = c.parent {
            nodes[p].children.push(i);
        }
    }
    Ok(finish(unit.id.clone(), nodes))
}
