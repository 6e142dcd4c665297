//! Statement splitting and identifier-level read/write extraction.
//!
//! A source line can hold several operations (`require(a && b)`, two
//! statements on one line). Slicing works on operations, so statements are
//! split at `;`, and conditions at top-level `&&` / `||`. Each operation
//! records the identifiers it reads and writes and the calls it makes.

use super::lexer::{tokenize, Token, TokenKind};
use super::Span;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpRole {
    Plain,
    /// Condition of `if`/`while`/`for`, or a `require`/`assert` conjunct.
    Guard,
    LoopInit,
    LoopPost,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Normal,
    Emit,
    New,
    RevertError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallExpr {
    /// Final name of the callee (`transfer` in `token.transfer(x)`).
    pub name: String,
    /// Root of a member-call chain (`token`), if any.
    pub base: Option<String>,
    /// Full dotted callee text (`token.transfer`).
    pub path: String,
    pub args: Vec<String>,
    pub span: Span,
    pub kind: CallKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub text: String,
    pub span: Span,
    pub role: OpRole,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    /// Subset of `writes` introduced by a local declaration.
    pub declares: BTreeSet<String>,
    pub calls: Vec<CallExpr>,
}

impl Operation {
    pub fn touches(&self, var: &str) -> bool {
        self.reads.contains(var) || self.writes.contains(var)
    }

    pub fn is_return(&self) -> bool {
        self.role == OpRole::Return
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "after", "anonymous", "as", "assembly", "break", "calldata", "case", "catch",
    "constant", "constructor", "continue", "contract", "default", "delete", "do", "else", "emit",
    "enum", "error", "event", "external", "fallback", "false", "final", "for", "function", "if",
    "immutable", "import", "in", "indexed", "inline", "interface", "internal", "is", "let",
    "library", "mapping", "memory", "modifier", "new", "null", "override", "payable", "pragma",
    "private", "public", "pure", "receive", "return", "returns", "revert", "static", "storage",
    "struct", "super", "switch", "this", "throw", "true", "try", "type", "typeof", "unchecked",
    "using", "view", "virtual", "while", "wei", "gwei", "ether", "finney", "szabo", "seconds",
    "minutes", "hours", "days", "weeks", "years", "_",
];

const BUILTIN_FUNCTIONS: &[&str] = &[
    "require", "assert", "revert", "keccak256", "sha256", "sha3", "ripemd160", "ecrecover",
    "addmod", "mulmod", "selfdestruct", "suicide", "blockhash", "gasleft", "type", "payable",
];

const BUILTIN_MEMBERS: &[&str] = &[
    "transfer", "send", "call", "delegatecall", "staticcall", "callcode", "push", "pop",
    "encode", "encodePacked", "encodeWithSelector", "encodeWithSignature", "encodeCall",
    "decode", "concat", "selector", "wrap", "unwrap",
];

const AMBIENT_ROOTS: &[&str] = &["msg", "tx", "block"];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn is_builtin_function(s: &str) -> bool {
    BUILTIN_FUNCTIONS.contains(&s) || is_elementary_type(s)
}

pub fn is_builtin_member(s: &str) -> bool {
    BUILTIN_MEMBERS.contains(&s)
}

/// `msg.sender`, `tx.origin`, `block.*` and `now` are read-only ambient values.
pub fn is_ambient(s: &str) -> bool {
    s == "now"
        || AMBIENT_ROOTS
            .iter()
            .any(|r| s.strip_prefix(r).is_some_and(|rest| rest.starts_with('.')))
}

pub fn is_elementary_type(s: &str) -> bool {
    fn sized(s: &str, prefix: &str, ok: fn(u32) -> bool) -> bool {
        s.strip_prefix(prefix)
            .is_some_and(|n| n.is_empty() || n.parse::<u32>().is_ok_and(ok))
    }
    matches!(s, "address" | "bool" | "string" | "byte" | "var" | "fixed" | "ufixed")
        || sized(s, "uint", |n| n % 8 == 0 && (8..=256).contains(&n))
        || sized(s, "int", |n| n % 8 == 0 && (8..=256).contains(&n))
        || sized(s, "bytes", |n| (1..=32).contains(&n))
}

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=",
];

/// Borrowed view of a token run within its source.
#[derive(Clone, Copy)]
pub(crate) struct Toks<'a> {
    pub src: &'a str,
    pub toks: &'a [Token],
}

impl<'a> Toks<'a> {
    pub fn new(src: &'a str, toks: &'a [Token]) -> Self {
        Toks { src, toks }
    }

    pub fn text(&self, i: usize) -> &'a str {
        self.toks[i].text(self.src)
    }

    pub fn is(&self, i: usize, s: &str) -> bool {
        i < self.toks.len() && self.text(i) == s
    }

    pub fn is_ident(&self, i: usize) -> bool {
        i < self.toks.len() && self.toks[i].kind == TokenKind::Ident
    }

    pub fn len(&self) -> usize {
        self.toks.len()
    }

    pub fn slice(&self, a: usize, b: usize) -> Toks<'a> {
        Toks {
            src: self.src,
            toks: &self.toks[a.min(self.toks.len())..b.min(self.toks.len())],
        }
    }

    pub fn span(&self) -> Option<Span> {
        Some(Span::new(
            self.toks.first()?.span.start,
            self.toks.last()?.span.end,
        ))
    }

    /// Index of the bracket closing the one opened at `open`, or `len` when
    /// unbalanced.
    pub fn matching(&self, open: usize) -> usize {
        let mut depth = 0i32;
        for i in open..self.len() {
            match self.text(i) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        return i;
                    }
                }
                _ => {}
            }
        }
        self.len()
    }

    /// Splits at `sep` tokens found at bracket depth zero.
    pub fn split_top(&self, seps: &[&str]) -> Vec<Toks<'a>> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for i in 0..self.len() {
            let t = self.text(i);
            match t {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ if depth == 0 && seps.contains(&t) => {
                    out.push(self.slice(start, i));
                    start = i + 1;
                }
                _ => {}
            }
        }
        out.push(self.slice(start, self.len()));
        out
    }

    pub fn find_top(&self, pred: impl Fn(&str) -> bool) -> Option<usize> {
        let mut depth = 0i32;
        for i in 0..self.len() {
            let t = self.text(i);
            match t {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ if depth == 0 && pred(t) => return Some(i),
                _ => {}
            }
        }
        None
    }
}

/// Identifier-level facts about an expression.
#[derive(Debug, Default, Clone)]
pub(crate) struct ExprFacts {
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub declares: BTreeSet<String>,
    pub calls: Vec<CallExpr>,
}

impl ExprFacts {
    fn merge(&mut self, other: ExprFacts) {
        self.reads.extend(other.reads);
        self.writes.extend(other.writes);
        self.declares.extend(other.declares);
        self.calls.extend(other.calls);
    }
}

/// Collects identifiers read by `t`, calls made in it and in-place mutations
/// (`x.push(..)`, `x++`, `delete x`).
pub(crate) fn expr_facts(t: Toks<'_>) -> ExprFacts {
    let mut facts = ExprFacts::default();
    // bracket stack to recognise `{key: value}` option / struct-literal keys
    let mut stack: Vec<&str> = Vec::new();
    let n = t.len();
    let mut i = 0;
    while i < n {
        let tok = t.toks[i];
        let text = t.text(i);
        match text {
            "(" | "[" | "{" => {
                stack.push(text);
                i += 1;
                continue;
            }
            ")" | "]" | "}" => {
                stack.pop();
                i += 1;
                continue;
            }
            "++" | "--" => {
                // prefix form: the operand follows
                if t.is_ident(i + 1) && !(i > 0 && (t.is_ident(i - 1) || t.is(i - 1, "]"))) {
                    let root = t.text(i + 1).to_string();
                    if !is_keyword(&root) {
                        facts.writes.insert(root);
                    }
                }
                i += 1;
                continue;
            }
            _ => {}
        }
        if tok.kind != TokenKind::Ident {
            i += 1;
            continue;
        }
        if i > 0 && t.is(i - 1, ".") {
            i += 1;
            continue;
        }
        if stack.last() == Some(&"{") && t.is(i + 1, ":") {
            i += 1;
            continue;
        }
        if text == "delete" {
            if let Some(root) = (i + 1 < n).then(|| t.text(i + 1)) {
                if t.is_ident(i + 1) && !is_keyword(root) {
                    facts.writes.insert(root.to_string());
                }
            }
            i += 1;
            continue;
        }
        if AMBIENT_ROOTS.contains(&text) && t.is(i + 1, ".") && t.is_ident(i + 2) {
            facts.reads.insert(format!("{}.{}", text, t.text(i + 2)));
            i += 3;
            continue;
        }
        if text == "now" {
            facts.reads.insert("now".to_string());
            i += 1;
            continue;
        }
        if is_keyword(text) && !matches!(text, "revert" | "payable" | "type") {
            i += 1;
            continue;
        }
        // member chain: name(.name)* possibly ending in a call
        let mut j = i;
        let mut path = text.to_string();
        while t.is(j + 1, ".") && t.is_ident(j + 2) {
            j += 2;
            path.push('.');
            path.push_str(t.text(j));
        }
        // skip `{value: ..}` call options
        let mut k = j + 1;
        if t.is(k, "{") && j > i {
            k = t.matching(k) + 1;
        }
        let is_call = t.is(k, "(");
        let root = text;
        if is_call {
            let close = t.matching(k);
            let args = t
                .slice(k + 1, close)
                .split_top(&[","])
                .into_iter()
                .filter_map(|a| a.span().map(|s| t.src[s.start..s.end].to_string()))
                .collect::<Vec<_>>();
            let kind = if i > 0 && t.is(i - 1, "emit") {
                CallKind::Emit
            } else if i > 0 && t.is(i - 1, "new") {
                CallKind::New
            } else if i > 0 && t.is(i - 1, "revert") {
                CallKind::RevertError
            } else {
                CallKind::Normal
            };
            let name = t.text(j).to_string();
            let base = (j > i).then(|| root.to_string());
            let span_end = t.toks.get(close).map(|c| c.span.end).unwrap_or_else(|| {
                t.toks.last().map(|l| l.span.end).unwrap_or(tok.span.end)
            });
            let is_builtin_call = base.is_none() && is_builtin_function(&name);
            if !is_builtin_call || kind != CallKind::Normal {
                facts.calls.push(CallExpr {
                    name: name.clone(),
                    base: base.clone(),
                    path: path.clone(),
                    args,
                    span: Span::new(tok.span.start, span_end),
                    kind,
                });
            }
            if let Some(b) = &base {
                if !is_keyword(b) && !is_elementary_type(b) && b != "abi" {
                    facts.reads.insert(b.clone());
                    if matches!(name.as_str(), "push" | "pop") && j == i + 2 {
                        facts.writes.insert(b.clone());
                    }
                }
            }
        } else if !is_elementary_type(root) && root != "revert" && root != "type" {
            facts.reads.insert(root.to_string());
            // postfix ++/--
            let mut after = j + 1;
            while t.is(after, "[") {
                after = t.matching(after) + 1;
            }
            if t.is(after, "++") || t.is(after, "--") {
                facts.writes.insert(root.to_string());
            }
        }
        i = j + 1;
    }
    // delete/++ targets are also read
    let written: Vec<String> = facts.writes.iter().cloned().collect();
    facts.reads.extend(written);
    facts
}

/// Root identifiers assigned by an lvalue; bracket contents are reads.
fn lvalue_facts(t: Toks<'_>) -> ExprFacts {
    let mut facts = ExprFacts::default();
    let parts = if t.is(0, "(") && t.matching(0) + 1 >= t.len() {
        t.slice(1, t.matching(0)).split_top(&[","])
    } else {
        vec![t]
    };
    for p in parts {
        if p.len() == 0 {
            continue;
        }
        // a typed element inside a tuple declaration: last ident is the name
        if let Some(decl) = match_declaration(p) {
            facts.writes.extend(decl.iter().cloned());
            facts.declares.extend(decl);
            continue;
        }
        if p.is_ident(0) {
            let root = p.text(0);
            if !is_keyword(root) && !is_ambient(root) {
                facts.writes.insert(root.to_string());
            }
        }
        let mut i = 1;
        while i < p.len() {
            if p.is(i, "[") {
                let close = p.matching(i);
                facts.merge(expr_facts(p.slice(i + 1, close)));
                i = close + 1;
            } else {
                i += 1;
            }
        }
    }
    facts
}

/// If `t` starts with `Type [location] name`, returns the declared names.
pub(crate) fn match_declaration(t: Toks<'_>) -> Option<Vec<String>> {
    if t.len() == 0 {
        return None;
    }
    if t.is(0, "(") {
        let close = t.matching(0);
        let inner = t.slice(1, close);
        let mut names = Vec::new();
        let mut any = false;
        for part in inner.split_top(&[","]) {
            if part.len() == 0 {
                continue;
            }
            match match_declaration(part) {
                Some(n) => {
                    any = true;
                    names.extend(n);
                }
                None => return None,
            }
        }
        return any.then_some(names);
    }
    let mut i = type_end(t)?;
    while t.is(i, "memory") || t.is(i, "storage") || t.is(i, "calldata") {
        i += 1;
    }
    if !t.is_ident(i) || is_keyword(t.text(i)) {
        return None;
    }
    let name = t.text(i).to_string();
    if i + 1 == t.len() || t.is(i + 1, "=") {
        Some(vec![name])
    } else {
        None
    }
}

/// End index (exclusive) of a type expression at the start of `t`.
pub(crate) fn type_end(t: Toks<'_>) -> Option<usize> {
    let mut i;
    if t.is(0, "mapping") && t.is(1, "(") {
        i = t.matching(1) + 1;
    } else if t.is(0, "var") {
        return Some(1);
    } else if t.is(0, "function") && t.is(1, "(") {
        return None;
    } else if t.is_ident(0) && (!is_keyword(t.text(0)) || t.text(0) == "payable") {
        i = 1;
        while t.is(i, ".") && t.is_ident(i + 1) {
            i += 2;
        }
        if t.text(0) == "address" && t.is(i, "payable") {
            i += 1;
        }
    } else {
        return None;
    }
    while t.is(i, "[") {
        let close = t.matching(i);
        if close >= t.len() {
            return None;
        }
        i = close + 1;
    }
    Some(i)
}

fn make_op(t: Toks<'_>, role: OpRole, facts: ExprFacts) -> Option<Operation> {
    let span = t.span()?;
    Some(Operation {
        text: t.src[span.start..span.end].to_string(),
        span,
        role,
        reads: facts.reads,
        writes: facts.writes,
        declares: facts.declares,
        calls: facts.calls,
    })
}

/// Operations for a condition: one per top-level `&&` / `||` operand.
pub(crate) fn condition_ops(t: Toks<'_>, role: OpRole) -> Vec<Operation> {
    // strip a single enclosing pair of parentheses
    let t = if t.is(0, "(") && t.matching(0) + 1 == t.len() && t.len() >= 2 {
        t.slice(1, t.len() - 1)
    } else {
        t
    };
    t.split_top(&["&&", "||"])
        .into_iter()
        .filter_map(|p| make_op(p, role, expr_facts(p)))
        .collect()
}

/// Operations of one simple statement (no trailing `;`).
pub(crate) fn simple_statement_ops(t: Toks<'_>) -> Vec<Operation> {
    if t.len() == 0 {
        return Vec::new();
    }
    if (t.is(0, "require") || t.is(0, "assert")) && t.is(1, "(") {
        let close = t.matching(1);
        let args = t.slice(2, close).split_top(&[","]);
        let mut ops = condition_ops(args[0], OpRole::Guard);
        if ops.is_empty() {
            ops.extend(make_op(t, OpRole::Guard, expr_facts(t)));
        }
        return ops;
    }
    if t.is(0, "return") {
        let facts = expr_facts(t.slice(1, t.len()));
        return make_op(t, OpRole::Return, facts).into_iter().collect();
    }
    if t.is(0, "emit") || t.is(0, "revert") || t.is(0, "throw") {
        return make_op(t, OpRole::Plain, expr_facts(t)).into_iter().collect();
    }
    if let Some(eq) = t.find_top(|s| ASSIGN_OPS.contains(&s)) {
        let lhs = t.slice(0, eq);
        let rhs = t.slice(eq + 1, t.len());
        let mut facts = lvalue_facts(lhs);
        if t.text(eq) != "=" {
            let w: Vec<String> = facts.writes.iter().cloned().collect();
            facts.reads.extend(w);
        }
        facts.merge(expr_facts(rhs));
        return make_op(t, OpRole::Plain, facts).into_iter().collect();
    }
    if let Some(names) = match_declaration(t) {
        let mut facts = ExprFacts::default();
        facts.writes.extend(names.iter().cloned());
        facts.declares.extend(names);
        return make_op(t, OpRole::Plain, facts).into_iter().collect();
    }
    t.split_top(&["&&", "||"])
        .into_iter()
        .filter_map(|p| make_op(p, OpRole::Plain, expr_facts(p)))
        .collect()
}

/// Splits the text of one statement (or a line holding several) into
/// operations, in source order. Spans are relative to `text`.
pub fn split_statement(text: &str) -> Vec<Operation> {
    let toks: Vec<Token> = tokenize(text, 0)
        .into_iter()
        .filter(|t| !t.is_comment())
        .collect();
    let all = Toks::new(text, &toks);
    let mut out = Vec::new();
    for piece in all.split_top(&[";"]) {
        split_piece(piece, &mut out);
    }
    out
}

fn split_piece(piece: Toks<'_>, out: &mut Vec<Operation>) {
    if piece.len() == 0 {
        return;
    }
    // strip braces left over from a block
    if piece.is(0, "{") {
        let close = piece.matching(0);
        let inner = piece.slice(1, close);
        for p in inner.split_top(&[";"]) {
            split_piece(p, out);
        }
        split_piece(piece.slice(close + 1, piece.len()), out);
        return;
    }
    if (piece.is(0, "if") || piece.is(0, "while")) && piece.is(1, "(") {
        let close = piece.matching(1);
        out.extend(condition_ops(piece.slice(2, close), OpRole::Guard));
        split_piece(piece.slice(close + 1, piece.len()), out);
        return;
    }
    if piece.is(0, "else") {
        split_piece(piece.slice(1, piece.len()), out);
        return;
    }
    out.extend(simple_statement_ops(piece));
}

/// Identifiers (non-keyword) appearing in `text`, in order of first use.
pub fn idents_in(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in tokenize(text, 0) {
        if t.kind == TokenKind::Ident {
            let s = t.text(text);
            if !is_keyword(s) && seen.insert(s.to_string()) {
                out.push(s.to_string());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_assignment() {
        let ops = split_statement("a = b + c;");
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].writes, set(&["a"]));
        assert_eq!(ops[0].reads, set(&["b", "c"]));
    }

    #[test]
    fn require_conjuncts_expose_reads() {
        // hand trace: condition splits at && into `msg.sender == owner` and `x > 0`
        let ops = split_statement("require(msg.sender == owner && x > 0);");
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[0].reads, set(&["msg.sender", "owner"]));
        assert_eq!(ops[1].reads, set(&["x"]));
        let all: BTreeSet<String> = ops.iter().flat_map(|o| o.reads.clone()).collect();
        assert_eq!(all, set(&["msg.sender", "owner", "x"]));
        assert!(ops.iter().all(|o| o.role == OpRole::Guard && o.writes.is_empty()));
    }

    #[test]
    fn two_statements_on_one_line() {
        let ops = split_statement("a = f(b); g(a);");
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[0].text, "a = f(b)");
        assert_eq!(ops[0].writes, set(&["a"]));
        assert_eq!(ops[0].reads, set(&["b"]));
        assert_eq!(ops[0].calls[0].name, "f");
        assert_eq!(ops[1].text, "g(a)");
        assert_eq!(ops[1].reads, set(&["a"]));
        assert!(ops[0].span.end <= ops[1].span.start);
    }

    #[test]
    fn indexed_and_compound_assignment() {
        let ops = split_statement("balances[msg.sender] += amount;");
        assert_eq!(ops[0].writes, set(&["balances"]));
        assert_eq!(ops[0].reads, set(&["balances", "msg.sender", "amount"]));
    }

    #[test]
    fn declarations_and_tuples() {
        let ops = split_statement("uint256 total = a * b;");
        assert_eq!(ops[0].writes, set(&["total"]));
        assert_eq!(ops[0].reads, set(&["a", "b"]));
        let ops = split_statement("(uint a, , bool ok) = pool.get(x);");
        assert_eq!(ops[0].writes, set(&["a", "ok"]));
        assert_eq!(ops[0].declares, set(&["a", "ok"]));
        assert_eq!(ops[0].reads, set(&["pool", "x"]));
        let ops = split_statement("Info storage info = infos[id];");
        assert_eq!(ops[0].writes, set(&["info"]));
        assert_eq!(ops[0].reads, set(&["infos", "id"]));
    }

    #[test]
    fn member_calls_and_mutation() {
        let ops = split_statement("holders.push(who); token.transfer(to, amt);");
        assert_eq!(ops[0].writes, set(&["holders"]));
        assert_eq!(ops[1].calls[0].base.as_deref(), Some("token"));
        assert_eq!(ops[1].calls[0].args, vec!["to", "amt"]);
        let ops = split_statement("(bool s, ) = to.call{value: amt}(\"\");");
        assert_eq!(ops[0].reads, set(&["to", "amt"]));
        assert_eq!(ops[0].calls[0].name, "call");
    }

    #[test]
    fn emits_casts_and_builtins() {
        let ops = split_statement("emit Deposit(msg.sender, uint256(x));");
        assert_eq!(ops[0].calls.len(), 1);
        assert_eq!(ops[0].calls[0].kind, CallKind::Emit);
        assert_eq!(ops[0].reads, set(&["msg.sender", "x"]));
        let ops = split_statement("x++; delete y;");
        assert_eq!(ops[0].writes, set(&["x"]));
        assert_eq!(ops[1].writes, set(&["y"]));
    }

    #[test]
    fn never_empty_for_garbage() {
        let ops = split_statement("))) ((( ;;; ===");
        assert!(ops.len() <= 3);
        assert!(split_statement("").is_empty());
    }

    #[test]
    fn elementary_types() {
        assert!(is_elementary_type("uint256"));
        assert!(is_elementary_type("bytes32"));
        assert!(!is_elementary_type("uint7"));
        assert!(!is_elementary_type("bytes33"));
        assert!(!is_elementary_type("owner"));
        assert!(is_ambient("msg.sender"));
        assert!(!is_ambient("message"));
    }
}
