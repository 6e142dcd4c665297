use super::ops::{OpRole, Operation};
use super::{Span, VersionConstraint};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Name of the synthetic contract that holds declarations found outside any
/// contract body (audit snippets, free functions).
pub const SNIPPET_CONTRACT: &str = "<snippet>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    MissingSemicolon,
    UnexpectedToken,
    UnexpectedEof,
    UnbalancedBrace,
    MisplacedDeclaration,
    MissingPlaceholder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
    pub severity: Severity,
    pub code: DiagnosticCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub path: String,
    pub raw: String,
    pub pragma: Option<VersionConstraint>,
    pub contracts: Vec<ContractDef>,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(skip)]
    line_starts: Vec<usize>,
}

impl SourceUnit {
    pub(crate) fn new(path: String, raw: String) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(raw.match_indices('\n').map(|(i, _)| i + 1));
        SourceUnit {
            path,
            raw,
            pragma: None,
            contracts: Vec::new(),
            diagnostics: Vec::new(),
            line_starts,
        }
    }

    pub fn text(&self, span: Span) -> &str {
        &self.raw[span.start..span.end]
    }

    /// Zero-based line index containing byte `offset`.
    pub fn line_of(&self, offset: usize) -> usize {
        match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    /// Text of zero-based line `line`, without the line terminator.
    pub fn line_text(&self, line: usize) -> &str {
        let start = self.line_starts[line];
        let end = self
            .line_starts
            .get(line + 1)
            .map(|e| e - 1)
            .unwrap_or(self.raw.len());
        self.raw[start..end].trim_end_matches('\r')
    }

    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }

    /// Zero-based line indices touched by `span`.
    pub fn lines_of(&self, span: Span) -> std::ops::RangeInclusive<usize> {
        let first = self.line_of(span.start);
        let last = self.line_of(span.end.saturating_sub(1).max(span.start));
        first..=last
    }

    /// One-based `line:col` for messages.
    pub fn position(&self, offset: usize) -> (usize, usize) {
        let line = self.line_of(offset);
        let col = self.raw[self.line_starts[line]..offset].chars().count();
        (line + 1, col + 1)
    }

    pub fn contract(&self, name: &str) -> Option<&ContractDef> {
        self.contracts.iter().find(|c| c.name == name)
    }

    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractKind {
    Contract,
    Interface,
    Library,
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Contract,
    Function,
    Modifier,
    StateVar,
    Event,
    Error,
    Struct,
    Enum,
    UserType,
}

impl fmt::Display for DeclKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DeclKind::Contract => "contract",
            DeclKind::Function => "function",
            DeclKind::Modifier => "modifier",
            DeclKind::StateVar => "state variable",
            DeclKind::Event => "event",
            DeclKind::Error => "error",
            DeclKind::Struct => "struct",
            DeclKind::Enum => "enum",
            DeclKind::UserType => "type",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeclRef {
    pub kind: DeclKind,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentSpan {
    pub text: String,
    pub span: Span,
    /// Declaration the comment documents: the declaration whose span contains
    /// it, otherwise the nearest following declaration in the same scope.
    pub attached_to: Option<DeclRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractDef {
    pub name: String,
    pub kind: ContractKind,
    pub inherits: Vec<String>,
    pub functions: Vec<FunctionDef>,
    pub modifiers: Vec<ModifierDef>,
    pub state_vars: Vec<StateVarDef>,
    /// Events, errors, structs, enums and user value types.
    pub other_decls: Vec<OtherDecl>,
    pub comments: Vec<CommentSpan>,
    pub span: Span,
    /// Holder for top-level declarations outside any contract.
    pub synthetic: bool,
}

impl ContractDef {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn modifier(&self, name: &str) -> Option<&ModifierDef> {
        self.modifiers.iter().find(|m| m.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVarDef> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    /// Every declaration in source order with its span.
    pub fn declarations(&self) -> Vec<(DeclRef, Span)> {
        let mut out: Vec<(DeclRef, Span)> = Vec::new();
        for f in &self.functions {
            out.push((
                DeclRef {
                    kind: DeclKind::Function,
                    name: f.name.clone(),
                },
                f.span,
            ));
        }
        for m in &self.modifiers {
            out.push((
                DeclRef {
                    kind: DeclKind::Modifier,
                    name: m.name.clone(),
                },
                m.span,
            ));
        }
        for v in &self.state_vars {
            out.push((
                DeclRef {
                    kind: DeclKind::StateVar,
                    name: v.name.clone(),
                },
                v.span,
            ));
        }
        for o in &self.other_decls {
            out.push((
                DeclRef {
                    kind: o.kind,
                    name: o.name.clone(),
                },
                o.span,
            ));
        }
        out.sort_by_key(|(_, s)| s.start);
        out
    }

    pub fn display_name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtherDecl {
    pub kind: DeclKind,
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
    Unset,
}

impl Visibility {
    pub fn from_keyword(s: &str) -> Option<Visibility> {
        Some(match s {
            "public" => Visibility::Public,
            "external" => Visibility::External,
            "internal" => Visibility::Internal,
            "private" => Visibility::Private,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mutability {
    Pure,
    View,
    Payable,
    Nonpayable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    /// Empty for unnamed parameters.
    pub name: String,
    pub type_name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierInvocation {
    pub name: String,
    pub args: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub kind: FunctionKind,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub visibility: Visibility,
    pub mutability: Mutability,
    pub modifiers: Vec<ModifierInvocation>,
    pub body: Vec<Statement>,
    /// False for declaration-only functions (`;` instead of a block).
    pub has_body: bool,
    pub signature_text: String,
    pub signature_span: Span,
    pub span: Span,
}

impl FunctionDef {
    /// Operations of the body in control order (pre-order over statements).
    pub fn operations(&self) -> Vec<&Operation> {
        flatten_ops(&self.body)
    }

    pub fn param_types(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.type_name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Statement>,
    pub has_body: bool,
    pub signature_text: String,
    pub signature_span: Span,
    pub span: Span,
}

impl ModifierDef {
    pub fn operations(&self) -> Vec<&Operation> {
        flatten_ops(&self.body)
    }

    pub fn has_placeholder(&self) -> bool {
        fn walk(stmts: &[Statement]) -> bool {
            stmts
                .iter()
                .any(|s| s.is_placeholder() || walk(&s.children) || walk(&s.alt))
        }
        walk(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVarDef {
    pub name: String,
    pub type_name: String,
    pub visibility: Visibility,
    pub constant: bool,
    pub immutable: bool,
    pub initializer: Option<String>,
    /// Operation for the initializer, if any.
    pub init_op: Option<Operation>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Expr,
    Require,
    IfRevert,
    Assign,
    Call,
    Return,
    Decl,
    Control,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub kind: StatementKind,
    /// Operations owned by this statement itself; for compound statements
    /// these come from the header (condition, loop clauses).
    pub operations: Vec<Operation>,
    pub text: String,
    pub span: Span,
    /// Nested statements: `if`/loop body, `try` blocks.
    pub children: Vec<Statement>,
    /// `else` branch.
    pub alt: Vec<Statement>,
}

impl Statement {
    pub fn is_placeholder(&self) -> bool {
        self.kind == StatementKind::Other && self.text.trim_end_matches(';').trim() == "_"
    }

    /// True if executing this statement may abort the call.
    pub fn is_revert_like(&self) -> bool {
        let t = self.text.trim_start();
        t.starts_with("revert") || t.starts_with("throw")
    }

    pub fn guard_ops(&self) -> impl Iterator<Item = &Operation> {
        self.operations.iter().filter(|o| o.role == OpRole::Guard)
    }
}

pub fn flatten_ops(stmts: &[Statement]) -> Vec<&Operation> {
    let mut out = Vec::new();
    fn walk<'a>(stmts: &'a [Statement], out: &mut Vec<&'a Operation>) {
        for s in stmts {
            out.extend(s.operations.iter());
            walk(&s.children, out);
            walk(&s.alt, out);
        }
    }
    walk(stmts, &mut out);
    out
}

/// Pre-order list of every statement in `stmts`.
pub fn flatten_statements(stmts: &[Statement]) -> Vec<&Statement> {
    let mut out = Vec::new();
    fn walk<'a>(stmts: &'a [Statement], out: &mut Vec<&'a Statement>) {
        for s in stmts {
            out.push(s);
            walk(&s.children, out);
            walk(&s.alt, out);
        }
    }
    walk(stmts, &mut out);
    out
}
