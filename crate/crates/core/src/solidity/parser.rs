//! Recursive-descent parser over the token stream.
//!
//! Recovery is statement-level: a statement that cannot be understood is
//! kept as an `Other` statement, and scanning resumes after the next `;` or
//! at the next `}`.

use super::lexer::{tokenize, Token, TokenKind};
use super::model::*;
use super::ops::{
    condition_ops, expr_facts, simple_statement_ops, type_end, OpRole, Operation, Toks,
};
use super::{Span, VersionConstraint};
use crate::error::{Error, Result};

/// Parses every file. Files are independent and parsed in parallel.
pub fn parse_sources(files: &[(String, String)]) -> Result<Vec<SourceUnit>> {
    use rayon::prelude::*;
    if files.is_empty() {
        return Err(Error::Usage("no source files given".into()));
    }
    Ok(files
        .par_iter()
        .map(|(p, t)| parse_source(p, t))
        .collect())
}

pub fn parse_source(path: &str, text: &str) -> SourceUnit {
    let all = tokenize(text, 0);
    let (comments, toks): (Vec<Token>, Vec<Token>) = all.into_iter().partition(|t| t.is_comment());
    let mut p = Parser {
        src: text,
        toks,
        pos: 0,
        diags: Vec::new(),
        abort_body: false,
    };
    let mut unit = SourceUnit::new(path.to_string(), text.to_string());
    let (pragma, mut contracts) = p.parse_unit();
    attach_comments(text, &comments, &mut contracts);
    unit.pragma = pragma;
    unit.contracts = contracts;
    unit.diagnostics = p.diags;
    unit
}

const MISPLACED: &[&str] = &[
    "function", "modifier", "contract", "interface", "library", "event", "struct", "enum",
];

const STATEMENT_STARTERS: &[&str] = &[
    "if", "for", "while", "do", "return", "require", "assert", "emit", "revert",
];

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    /// Set when a declaration keyword shows up inside a body: the enclosing
    /// body is closed there so the declaration can be parsed as a member.
    abort_body: bool,
}

impl<'a> Parser<'a> {
    fn text(&self, i: usize) -> &'a str {
        self.toks.get(i).map(|t| t.text(self.src)).unwrap_or("")
    }

    fn peek(&self) -> &'a str {
        self.text(self.pos)
    }

    fn at(&self, s: &str) -> bool {
        self.pos < self.toks.len() && self.peek() == s
    }

    fn at_off(&self, off: usize, s: &str) -> bool {
        self.pos + off < self.toks.len() && self.text(self.pos + off) == s
    }

    fn is_ident_at(&self, i: usize) -> bool {
        self.toks.get(i).is_some_and(|t| t.kind == TokenKind::Ident)
    }

    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn span_of(&self, a: usize, b_incl: usize) -> Span {
        let end_tok = b_incl.min(self.toks.len().saturating_sub(1));
        Span::new(self.toks[a].span.start, self.toks[end_tok].span.end.max(self.toks[a].span.start))
    }

    fn end_span(&self) -> Span {
        let e = self.src.len();
        Span::new(e, e)
    }

    fn diag(&mut self, span: Span, code: DiagnosticCode, msg: impl Into<String>) {
        let severity = match code {
            DiagnosticCode::MissingPlaceholder => Severity::Warning,
            _ => Severity::Error,
        };
        self.diags.push(Diagnostic {
            span,
            message: msg.into(),
            severity,
            code,
        });
    }

    fn tok_span(&self, i: usize) -> Span {
        self.toks.get(i).map(|t| t.span).unwrap_or_else(|| self.end_span())
    }

    /// Index of the bracket matching the one at `open`; `len` if unbalanced.
    fn matching(&self, open: usize) -> usize {
        Toks::new(self.src, &self.toks).matching(open)
    }

    fn toks_slice(&self, a: usize, b: usize) -> Toks<'_> {
        Toks::new(self.src, &self.toks).slice(a, b)
    }

    /// Skips to just after the next `;` at depth 0, or to a `}` at depth 0
    /// (not consumed).
    fn resync(&mut self) {
        let mut depth = 0i32;
        while !self.eof() {
            match self.peek() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" => depth -= 1,
                "}" => {
                    if depth <= 0 {
                        return;
                    }
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return;
                    }
                }
                ";" if depth <= 0 => {
                    self.pos += 1;
                    return;
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn parse_unit(&mut self) -> (Option<VersionConstraint>, Vec<ContractDef>) {
        let mut pragma = None;
        let mut contracts = Vec::new();
        let mut snippet: Option<ContractDef> = None;
        while !self.eof() {
            let t = self.peek();
            match t {
                "pragma" => {
                    let start = self.pos;
                    let mut end = start;
                    while end < self.toks.len() && self.text(end) != ";" {
                        end += 1;
                    }
                    if self.text(start + 1) == "solidity" && pragma.is_none() && end > start + 2 {
                        let s = self.toks[start + 2].span.start;
                        let e = self.toks[end - 1].span.end;
                        pragma = Some(VersionConstraint::parse(&self.src[s..e]));
                    }
                    self.pos = end + 1;
                }
                "import" | "using" => self.resync(),
                "contract" | "interface" | "library" => {
                    if let Some(c) = self.parse_contract(self.pos) {
                        contracts.push(c);
                    }
                }
                "abstract" if self.at_off(1, "contract") => {
                    if let Some(c) = self.parse_contract(self.pos) {
                        contracts.push(c);
                    }
                }
                "}" => {
                    let sp = self.tok_span(self.pos);
                    self.diag(sp, DiagnosticCode::UnbalancedBrace, "unmatched `}`");
                    self.pos += 1;
                }
                ";" => self.pos += 1,
                _ => {
                    let c = snippet.get_or_insert_with(|| ContractDef {
                        name: SNIPPET_CONTRACT.to_string(),
                        kind: ContractKind::Contract,
                        inherits: Vec::new(),
                        functions: Vec::new(),
                        modifiers: Vec::new(),
                        state_vars: Vec::new(),
                        other_decls: Vec::new(),
                        comments: Vec::new(),
                        span: Span::new(0, 0),
                        synthetic: true,
                    });
                    let mut c = std::mem::replace(c, placeholder_contract());
                    let before = self.pos;
                    if !self.parse_member(&mut c) {
                        let sp = self.tok_span(before);
                        self.diag(
                            sp,
                            DiagnosticCode::UnexpectedToken,
                            format!("unexpected `{}` at top level", self.text(before)),
                        );
                        self.resync();
                        if self.pos == before {
                            self.pos += 1;
                        }
                    }
                    snippet = Some(c);
                }
            }
        }
        if let Some(mut s) = snippet {
            let spans = s
                .functions
                .iter()
                .map(|f| f.span)
                .chain(s.modifiers.iter().map(|m| m.span))
                .chain(s.state_vars.iter().map(|v| v.span))
                .chain(s.other_decls.iter().map(|o| o.span));
            s.span = spans.reduce(Span::join).unwrap_or_default_span();
            if !(s.functions.is_empty()
                && s.modifiers.is_empty()
                && s.state_vars.is_empty()
                && s.other_decls.is_empty())
            {
                contracts.push(s);
            }
        }
        contracts.sort_by_key(|c| c.span.start);
        (pragma, contracts)
    }

    fn parse_contract(&mut self, start: usize) -> Option<ContractDef> {
        let mut i = start;
        let kind = match self.text(i) {
            "abstract" => {
                i += 1;
                ContractKind::Abstract
            }
            "interface" => ContractKind::Interface,
            "library" => ContractKind::Library,
            _ => ContractKind::Contract,
        };
        i += 1;
        if !self.is_ident_at(i) {
            let sp = self.tok_span(i);
            self.diag(sp, DiagnosticCode::UnexpectedToken, "expected contract name");
            self.pos = i;
            self.resync();
            if self.pos == start {
                self.pos += 1;
            }
            return None;
        }
        let name = self.text(i).to_string();
        i += 1;
        let mut inherits = Vec::new();
        if self.text(i) == "is" {
            i += 1;
            while i < self.toks.len() && self.text(i) != "{" {
                if self.is_ident_at(i) && self.text(i - 1) != "." {
                    let mut n = self.text(i).to_string();
                    while self.text(i + 1) == "." && self.is_ident_at(i + 2) {
                        n.push('.');
                        n.push_str(self.text(i + 2));
                        i += 2;
                    }
                    inherits.push(n);
                    i += 1;
                    if self.text(i) == "(" {
                        i = self.matching(i) + 1;
                    }
                } else {
                    i += 1;
                }
            }
        }
        let mut c = ContractDef {
            name,
            kind,
            inherits,
            functions: Vec::new(),
            modifiers: Vec::new(),
            state_vars: Vec::new(),
            other_decls: Vec::new(),
            comments: Vec::new(),
            span: Span::new(self.toks[start].span.start, self.toks[start].span.end),
            synthetic: false,
        };
        if self.text(i) != "{" {
            let sp = self.tok_span(i);
            self.diag(sp, DiagnosticCode::UnexpectedToken, "expected `{` after contract header");
            self.pos = i;
            c.span = self.span_of(start, i.saturating_sub(1));
            return Some(c);
        }
        self.pos = i + 1;
        loop {
            if self.eof() {
                let sp = self.end_span();
                self.diag(sp, DiagnosticCode::UnbalancedBrace, format!("contract `{}` is not closed", c.name));
                c.span = Span::new(c.span.start, self.src.len());
                break;
            }
            if self.at("}") {
                c.span = self.span_of(start, self.pos);
                self.pos += 1;
                break;
            }
            if matches!(self.peek(), "contract" | "interface" | "library")
                || (self.at("abstract") && self.at_off(1, "contract"))
            {
                // previous contract was never closed
                let sp = self.tok_span(self.pos);
                self.diag(sp, DiagnosticCode::UnbalancedBrace, format!("contract `{}` is not closed", c.name));
                c.span = self.span_of(start, self.pos - 1);
                break;
            }
            let before = self.pos;
            if !self.parse_member(&mut c) {
                let sp = self.tok_span(before);
                self.diag(
                    sp,
                    DiagnosticCode::UnexpectedToken,
                    format!("unexpected `{}` in contract body", self.text(before)),
                );
                self.resync();
                if self.pos == before {
                    self.pos += 1;
                }
            }
        }
        Some(c)
    }

    /// Parses one contract member at `pos`. Returns false when nothing
    /// recognisable starts here.
    fn parse_member(&mut self, c: &mut ContractDef) -> bool {
        let t = self.peek();
        match t {
            "function" => {
                self.parse_function(c, FunctionKind::Function);
                true
            }
            "constructor" | "fallback" | "receive" if self.at_off(1, "(") => {
                let kind = match t {
                    "constructor" => FunctionKind::Constructor,
                    "fallback" => FunctionKind::Fallback,
                    _ => FunctionKind::Receive,
                };
                self.parse_function(c, kind);
                true
            }
            "modifier" => {
                self.parse_modifier(c);
                true
            }
            "event" | "error" | "struct" | "enum" | "type"
                if self.is_ident_at(self.pos + 1) && t != "type" || self.at_off(2, "is") =>
            {
                self.parse_other_decl(c);
                true
            }
            "using" => {
                self.resync();
                true
            }
            ";" => {
                self.pos += 1;
                true
            }
            _ => self.parse_state_var(c),
        }
    }

    fn parse_other_decl(&mut self, c: &mut ContractDef) {
        let start = self.pos;
        let kind = match self.peek() {
            "event" => DeclKind::Event,
            "error" => DeclKind::Error,
            "struct" => DeclKind::Struct,
            "enum" => DeclKind::Enum,
            _ => DeclKind::UserType,
        };
        let name = self.text(start + 1).to_string();
        let mut i = start + 2;
        let end;
        loop {
            if i >= self.toks.len() {
                end = self.toks.len() - 1;
                let sp = self.end_span();
                self.diag(sp, DiagnosticCode::UnexpectedEof, format!("unterminated {kind} `{name}`"));
                break;
            }
            match self.text(i) {
                "{" if matches!(kind, DeclKind::Struct | DeclKind::Enum) => {
                    end = self.matching(i).min(self.toks.len() - 1);
                    break;
                }
                "(" => i = self.matching(i) + 1,
                ";" => {
                    end = i;
                    break;
                }
                "}" => {
                    end = i - 1;
                    let sp = self.tok_span(i);
                    self.diag(sp, DiagnosticCode::MissingSemicolon, "missing `;`");
                    i -= 1;
                    break;
                }
                _ => i += 1,
            }
        }
        c.other_decls.push(OtherDecl {
            kind,
            name,
            span: self.span_of(start, end),
        });
        self.pos = end.max(i) + 1;
        if self.pos > self.toks.len() {
            self.pos = self.toks.len();
        }
    }

    fn parse_params(&self, open: usize, close: usize) -> Vec<Param> {
        let inner = self.toks_slice(open + 1, close);
        let mut out = Vec::new();
        for part in inner.split_top(&[","]) {
            let Some(span) = part.span() else { continue };
            let te = type_end(part).unwrap_or(part.len().min(1));
            let type_span = part.slice(0, te).span().unwrap_or(span);
            let mut j = te;
            while j < part.len()
                && matches!(part.text(j), "memory" | "storage" | "calldata" | "indexed" | "payable")
            {
                j += 1;
            }
            let name = if part.is_ident(j) { part.text(j).to_string() } else { String::new() };
            out.push(Param {
                name,
                type_name: self.src[type_span.start..type_span.end].to_string(),
                span,
            });
        }
        out
    }

    fn parse_function(&mut self, c: &mut ContractDef, mut kind: FunctionKind) {
        let start = self.pos;
        let mut i = start + 1;
        let name = if kind == FunctionKind::Function {
            if self.is_ident_at(i) && self.text(i + 1) == "(" {
                i += 1;
                let n = self.text(i - 1);
                match n {
                    "fallback" => kind = FunctionKind::Fallback,
                    "receive" => kind = FunctionKind::Receive,
                    _ => {}
                }
                n.to_string()
            } else {
                kind = FunctionKind::Fallback;
                "fallback".to_string()
            }
        } else {
            self.text(start).to_string()
        };
        if kind == FunctionKind::Function && name == c.name {
            kind = FunctionKind::Constructor;
        }
        let mut params = Vec::new();
        if self.text(i) == "(" {
            let close = self.matching(i);
            params = self.parse_params(i, close);
            i = close + 1;
        }
        let mut visibility = Visibility::Unset;
        let mut mutability = Mutability::Nonpayable;
        let mut modifiers = Vec::new();
        let mut returns = Vec::new();
        while i < self.toks.len() {
            let t = self.text(i);
            match t {
                "{" | ";" | "}" => break,
                "returns" => {
                    if self.text(i + 1) == "(" {
                        let close = self.matching(i + 1);
                        returns = self.parse_params(i + 1, close);
                        i = close + 1;
                    } else {
                        i += 1;
                    }
                }
                "override" => {
                    i += 1;
                    if self.text(i) == "(" {
                        i = self.matching(i) + 1;
                    }
                }
                "pure" => {
                    mutability = Mutability::Pure;
                    i += 1;
                }
                "view" | "constant" => {
                    mutability = Mutability::View;
                    i += 1;
                }
                "payable" => {
                    mutability = Mutability::Payable;
                    i += 1;
                }
                "virtual" => i += 1,
                _ if Visibility::from_keyword(t).is_some() => {
                    visibility = Visibility::from_keyword(t).unwrap_or(Visibility::Unset);
                    i += 1;
                }
                _ if self.is_ident_at(i) && MISPLACED.contains(&t) => break,
                _ if self.is_ident_at(i) => {
                    let mstart = i;
                    let mut mname = t.to_string();
                    while self.text(i + 1) == "." && self.is_ident_at(i + 2) {
                        mname.push('.');
                        mname.push_str(self.text(i + 2));
                        i += 2;
                    }
                    i += 1;
                    let mut args = Vec::new();
                    if self.text(i) == "(" {
                        let close = self.matching(i);
                        args = self
                            .toks_slice(i + 1, close)
                            .split_top(&[","])
                            .into_iter()
                            .filter_map(|a| a.span().map(|s| self.src[s.start..s.end].to_string()))
                            .collect();
                        i = close + 1;
                    }
                    modifiers.push(ModifierInvocation {
                        name: mname,
                        args,
                        span: self.span_of(mstart, i - 1),
                    });
                }
                _ => {
                    let sp = self.tok_span(i);
                    self.diag(sp, DiagnosticCode::UnexpectedToken, format!("unexpected `{t}` in function header"));
                    i += 1;
                }
            }
        }
        let sig_end = i.saturating_sub(1).max(start);
        let signature_span = self.span_of(start, sig_end);
        let signature_text = self.src[signature_span.start..signature_span.end].to_string();
        let (body, has_body, end) = self.parse_body_at(i, &name);
        c.functions.push(FunctionDef {
            name,
            kind,
            params,
            returns,
            visibility,
            mutability,
            modifiers,
            body,
            has_body,
            signature_text,
            signature_span,
            span: Span::new(self.toks[start].span.start, end),
        });
    }

    /// Parses `{ ... }` or `;` at token `i`. Returns the body, whether a block
    /// was present and the end byte offset of the declaration.
    fn parse_body_at(&mut self, i: usize, name: &str) -> (Vec<Statement>, bool, usize) {
        let i = i.min(self.toks.len());
        match self.text(i) {
            "{" if i < self.toks.len() => {
                self.pos = i + 1;
                let body = self.parse_block_items();
                let end = if self.at("}") && !self.abort_body {
                    let e = self.toks[self.pos].span.end;
                    self.pos += 1;
                    e
                } else {
                    if !self.abort_body {
                        let sp = self.end_span();
                        self.diag(sp, DiagnosticCode::UnexpectedEof, format!("body of `{name}` is not closed"));
                    }
                    self.last_end()
                };
                self.abort_body = false;
                (body, true, end)
            }
            ";" if i < self.toks.len() => {
                self.pos = i + 1;
                (Vec::new(), false, self.toks[i].span.end)
            }
            _ => {
                let sp = self.tok_span(i);
                if i >= self.toks.len() {
                    self.diag(sp, DiagnosticCode::UnexpectedEof, format!("`{name}` has no body"));
                } else {
                    self.diag(sp, DiagnosticCode::MissingSemicolon, format!("expected body or `;` after `{name}`"));
                }
                self.pos = i;
                let end = if i > 0 { self.toks[i - 1].span.end } else { 0 };
                (Vec::new(), false, end)
            }
        }
    }

    /// End byte of the last consumed token.
    fn last_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[(self.pos - 1).min(self.toks.len() - 1)].span.end
        }
    }

    fn parse_modifier(&mut self, c: &mut ContractDef) {
        let start = self.pos;
        let mut i = start + 1;
        let name = if self.is_ident_at(i) {
            i += 1;
            self.text(i - 1).to_string()
        } else {
            String::new()
        };
        let mut params = Vec::new();
        if self.text(i) == "(" {
            let close = self.matching(i);
            params = self.parse_params(i, close);
            i = close + 1;
        }
        while i < self.toks.len() && !matches!(self.text(i), "{" | ";" | "}") {
            if self.text(i) == "(" {
                i = self.matching(i);
            }
            i += 1;
        }
        let signature_span = self.span_of(start, i.saturating_sub(1).max(start));
        let signature_text = self.src[signature_span.start..signature_span.end].to_string();
        let (body, has_body, end) = self.parse_body_at(i, &name);
        let m = ModifierDef {
            name,
            params,
            body,
            has_body,
            signature_text,
            signature_span,
            span: Span::new(self.toks[start].span.start, end),
        };
        if m.has_body && !m.has_placeholder() {
            self.diag(m.span, DiagnosticCode::MissingPlaceholder, format!("modifier `{}` has no `_;`", m.name));
        }
        c.modifiers.push(m);
    }

    fn parse_state_var(&mut self, c: &mut ContractDef) -> bool {
        let start = self.pos;
        let mut end = start;
        let mut depth = 0i32;
        let mut missing_semi = false;
        while end < self.toks.len() {
            match self.text(end) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" => depth -= 1,
                "}" => {
                    if depth <= 0 {
                        missing_semi = true;
                        break;
                    }
                    depth -= 1;
                }
                ";" if depth <= 0 => break,
                _ => {}
            }
            end += 1;
        }
        if end >= self.toks.len() {
            missing_semi = true;
        }
        let t = self.toks_slice(start, end);
        let Some(te) = type_end(t) else { return false };
        if te == 0 {
            return false;
        }
        let mut j = te;
        let mut visibility = Visibility::Unset;
        let mut constant = false;
        let mut immutable = false;
        while j < t.len() {
            match t.text(j) {
                "constant" => constant = true,
                "immutable" => immutable = true,
                "override" => {
                    if t.is(j + 1, "(") {
                        j = t.matching(j + 1);
                    }
                }
                "transient" => {}
                v if Visibility::from_keyword(v).is_some() => {
                    visibility = Visibility::from_keyword(v).unwrap_or(Visibility::Unset);
                }
                _ => break,
            }
            j += 1;
        }
        if !t.is_ident(j) || super::ops::is_keyword(t.text(j)) {
            return false;
        }
        if !(j + 1 == t.len() || t.is(j + 1, "=")) {
            return false;
        }
        let name = t.text(j).to_string();
        let type_span = t.slice(0, te).span().unwrap_or_default_span();
        let (initializer, init_op) = if t.is(j + 1, "=") {
            let init = t.slice(j + 2, t.len());
            match init.span() {
                Some(isp) => {
                    let mut facts = expr_facts(init);
                    facts.writes.insert(name.clone());
                    let whole = t.span().unwrap_or(isp);
                    let op = Operation {
                        text: self.src[whole.start..whole.end].to_string(),
                        span: whole,
                        role: OpRole::Plain,
                        reads: facts.reads,
                        writes: facts.writes,
                        declares: Default::default(),
                        calls: facts.calls,
                    };
                    (Some(self.src[isp.start..isp.end].to_string()), Some(op))
                }
                None => (None, None),
            }
        } else {
            (None, None)
        };
        let last = if missing_semi {
            let sp = self.tok_span(end);
            self.diag(sp, DiagnosticCode::MissingSemicolon, format!("missing `;` after `{name}`"));
            end - 1
        } else {
            end
        };
        c.state_vars.push(StateVarDef {
            name,
            type_name: self.src[type_span.start..type_span.end].to_string(),
            visibility,
            constant,
            immutable,
            initializer,
            init_op,
            span: self.span_of(start, last),
        });
        self.pos = if missing_semi { end } else { end + 1 };
        true
    }

    /// Parses statements until a `}` at this level (not consumed), EOF, or a
    /// misplaced declaration.
    fn parse_block_items(&mut self) -> Vec<Statement> {
        let mut out = Vec::new();
        while !self.eof() && !self.at("}") && !self.abort_body {
            let before = self.pos;
            out.extend(self.parse_statement());
            if self.pos == before && !self.abort_body {
                self.pos += 1;
            }
        }
        out
    }

    /// Parses a statement used as an `if`/loop body: either a block or a
    /// single statement.
    fn parse_branch(&mut self) -> Vec<Statement> {
        if self.at("{") {
            self.pos += 1;
            let body = self.parse_block_items();
            self.close_block();
            body
        } else {
            self.parse_statement()
        }
    }

    fn close_block(&mut self) {
        if self.abort_body {
            return;
        }
        if self.at("}") {
            self.pos += 1;
        } else {
            let sp = self.end_span();
            self.diag(sp, DiagnosticCode::UnexpectedEof, "block is not closed");
        }
    }

    fn statement(&self, kind: StatementKind, a: usize, b_incl: usize, ops: Vec<Operation>) -> Statement {
        let span = self.span_of(a, b_incl);
        Statement {
            kind,
            operations: ops,
            text: self.src[span.start..span.end].to_string(),
            span,
            children: Vec::new(),
            alt: Vec::new(),
        }
    }

    fn parse_statement(&mut self) -> Vec<Statement> {
        let start = self.pos;
        let t = self.peek();
        if MISPLACED.contains(&t) && self.is_ident_at(start + 1) || t == "constructor" && self.at_off(1, "(") {
            let sp = self.tok_span(start);
            self.diag(
                sp,
                DiagnosticCode::MisplacedDeclaration,
                format!("`{t}` declaration inside a body"),
            );
            self.abort_body = true;
            return Vec::new();
        }
        match t {
            "{" => {
                self.pos += 1;
                let b = self.parse_block_items();
                self.close_block();
                b
            }
            "unchecked" if self.at_off(1, "{") => {
                self.pos += 2;
                let b = self.parse_block_items();
                self.close_block();
                b
            }
            "assembly" => {
                let mut i = start + 1;
                while i < self.toks.len() && self.text(i) != "{" {
                    if self.text(i) == "(" {
                        i = self.matching(i);
                    }
                    i += 1;
                }
                let close = self.matching(i).min(self.toks.len() - 1);
                self.pos = close + 1;
                vec![self.statement(StatementKind::Other, start, close, Vec::new())]
            }
            "if" if self.at_off(1, "(") => {
                let close = self.matching(start + 1);
                let cond = self.toks_slice(start + 2, close);
                let ops = condition_ops(cond, OpRole::Guard);
                self.pos = close + 1;
                let children = self.parse_branch();
                let mut alt = Vec::new();
                if self.at("else") && !self.abort_body {
                    self.pos += 1;
                    alt = self.parse_branch();
                }
                let end = self.pos.saturating_sub(1).max(start);
                let mut s = self.statement(StatementKind::Control, start, end, ops);
                if alt.is_empty()
                    && !children.is_empty()
                    && children.iter().all(|c| c.is_revert_like())
                {
                    s.kind = StatementKind::IfRevert;
                }
                s.children = children;
                s.alt = alt;
                vec![s]
            }
            "while" if self.at_off(1, "(") => {
                let close = self.matching(start + 1);
                let ops = condition_ops(self.toks_slice(start + 2, close), OpRole::Guard);
                self.pos = close + 1;
                let children = self.parse_branch();
                let end = self.pos.saturating_sub(1).max(start);
                let mut s = self.statement(StatementKind::Control, start, end, ops);
                s.children = children;
                vec![s]
            }
            "for" if self.at_off(1, "(") => {
                let close = self.matching(start + 1);
                let header = self.toks_slice(start + 2, close);
                let parts = header.split_top(&[";"]);
                let mut ops = Vec::new();
                if let Some(init) = parts.first() {
                    ops.extend(simple_statement_ops(*init).into_iter().map(|mut o| {
                        o.role = OpRole::LoopInit;
                        o
                    }));
                }
                if let Some(cond) = parts.get(1) {
                    ops.extend(condition_ops(*cond, OpRole::Guard));
                }
                if let Some(post) = parts.get(2) {
                    ops.extend(simple_statement_ops(*post).into_iter().map(|mut o| {
                        o.role = OpRole::LoopPost;
                        o
                    }));
                }
                self.pos = close + 1;
                let children = self.parse_branch();
                let end = self.pos.saturating_sub(1).max(start);
                let mut s = self.statement(StatementKind::Control, start, end, ops);
                s.children = children;
                vec![s]
            }
            "do" => {
                self.pos += 1;
                let children = self.parse_branch();
                let mut ops = Vec::new();
                if self.at("while") && self.at_off(1, "(") {
                    let close = self.matching(self.pos + 1);
                    ops = condition_ops(self.toks_slice(self.pos + 2, close), OpRole::Guard);
                    self.pos = close + 1;
                    if self.at(";") {
                        self.pos += 1;
                    }
                }
                let end = self.pos.saturating_sub(1).max(start);
                let mut s = self.statement(StatementKind::Control, start, end, ops);
                s.children = children;
                vec![s]
            }
            "try" => {
                let mut i = start + 1;
                while i < self.toks.len() && !matches!(self.text(i), "{" | "returns") {
                    if matches!(self.text(i), "(" | "[") {
                        i = self.matching(i);
                    }
                    i += 1;
                }
                let ops = simple_statement_ops(self.toks_slice(start + 1, i));
                if self.text(i) == "returns" && self.text(i + 1) == "(" {
                    i = self.matching(i + 1) + 1;
                }
                self.pos = i;
                let mut children = self.parse_branch();
                while self.at("catch") && !self.abort_body {
                    self.pos += 1;
                    while !self.eof() && !self.at("{") {
                        if self.at("(") {
                            self.pos = self.matching(self.pos);
                        }
                        self.pos += 1;
                    }
                    children.extend(self.parse_branch());
                }
                let end = self.pos.saturating_sub(1).max(start);
                let mut s = self.statement(StatementKind::Control, start, end, ops);
                s.children = children;
                vec![s]
            }
            "else" => {
                let sp = self.tok_span(start);
                self.diag(sp, DiagnosticCode::UnexpectedToken, "`else` without `if`");
                self.pos += 1;
                Vec::new()
            }
            _ => self.parse_simple_statement(),
        }
    }

    fn parse_simple_statement(&mut self) -> Vec<Statement> {
        let start = self.pos;
        let mut i = start;
        let mut depth = 0i32;
        let mut terminated = false;
        while i < self.toks.len() {
            let t = self.text(i);
            if depth == 0 && i > start && STATEMENT_STARTERS.contains(&t) && self.newline_before(i) {
                let sp = self.tok_span(i - 1);
                self.diag(sp, DiagnosticCode::MissingSemicolon, "missing `;` before new statement");
                break;
            }
            match t {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" => depth -= 1,
                "}" => {
                    if depth <= 0 {
                        let sp = self.tok_span(i.saturating_sub(1));
                        self.diag(sp, DiagnosticCode::MissingSemicolon, "missing `;`");
                        break;
                    }
                    depth -= 1;
                }
                ";" if depth <= 0 => {
                    terminated = true;
                    break;
                }
                _ => {}
            }
            i += 1;
        }
        if i >= self.toks.len() && !terminated {
            let sp = self.end_span();
            self.diag(sp, DiagnosticCode::UnexpectedEof, "statement is not terminated");
        }
        if i == start {
            return Vec::new();
        }
        let expr = self.toks_slice(start, i);
        let ops = simple_statement_ops(expr);
        let kind = classify(expr, &ops);
        let last = if terminated { i } else { i - 1 };
        self.pos = if terminated { i + 1 } else { i };
        vec![self.statement(kind, start, last, ops)]
    }

    fn newline_before(&self, i: usize) -> bool {
        let prev_end = self.toks[i - 1].span.end;
        self.src[prev_end..self.toks[i].span.start].contains('\n')
    }
}

fn classify(t: Toks<'_>, ops: &[Operation]) -> StatementKind {
    match t.text(0) {
        "require" | "assert" if t.is(1, "(") => StatementKind::Require,
        "return" => StatementKind::Return,
        "emit" => StatementKind::Call,
        "_" if t.len() == 1 => StatementKind::Other,
        "throw" | "revert" | "break" | "continue" => StatementKind::Expr,
        _ => {
            if t.find_top(|s| matches!(s, "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "|=" | "&=" | "^=" | "<<=" | ">>=")).is_some() {
                if super::ops::match_declaration(t.slice(0, t.find_top(|s| s == "=").unwrap_or(0))).is_some() {
                    StatementKind::Decl
                } else {
                    StatementKind::Assign
                }
            } else if super::ops::match_declaration(t).is_some() {
                StatementKind::Decl
            } else if ops.iter().any(|o| !o.writes.is_empty()) {
                StatementKind::Assign
            } else if ops.iter().any(|o| !o.calls.is_empty()) {
                StatementKind::Call
            } else {
                StatementKind::Expr
            }
        }
    }
}

fn placeholder_contract() -> ContractDef {
    ContractDef {
        name: String::new(),
        kind: ContractKind::Contract,
        inherits: Vec::new(),
        functions: Vec::new(),
        modifiers: Vec::new(),
        state_vars: Vec::new(),
        other_decls: Vec::new(),
        comments: Vec::new(),
        span: Span::new(0, 0),
        synthetic: true,
    }
}

trait SpanDefault {
    fn unwrap_or_default_span(self) -> Span;
}

impl SpanDefault for Option<Span> {
    fn unwrap_or_default_span(self) -> Span {
        self.unwrap_or(Span::new(0, 0))
    }
}

fn attach_comments(src: &str, comments: &[Token], contracts: &mut [ContractDef]) {
    for tok in comments {
        let span = tok.span;
        let comment = |attached_to| CommentSpan {
            text: src[span.start..span.end].to_string(),
            span,
            attached_to,
        };
        let owner = contracts
            .iter()
            .position(|c| !c.synthetic && c.span.contains(span))
            .or_else(|| {
                // nearest following top-level item: a contract or a snippet member
                let mut best: Option<(usize, usize)> = None;
                for (i, c) in contracts.iter().enumerate() {
                    let starts: Vec<usize> = if c.synthetic {
                        c.declarations()
                            .iter()
                            .filter(|(_, s)| s.contains(span) || s.start >= span.end)
                            .map(|(_, s)| s.start)
                            .collect()
                    } else if c.span.start >= span.end {
                        vec![c.span.start]
                    } else {
                        Vec::new()
                    };
                    for s in starts {
                        if best.is_none_or(|(b, _)| s < b) {
                            best = Some((s, i));
                        }
                    }
                }
                best.map(|(_, i)| i)
            });
        let Some(ci) = owner else { continue };
        let c = &mut contracts[ci];
        let decls = c.declarations();
        let inside_contract = c.synthetic || c.span.contains(span);
        let attached = if !inside_contract {
            Some(DeclRef {
                kind: DeclKind::Contract,
                name: c.name.clone(),
            })
        } else {
            decls
                .iter()
                .find(|(_, s)| s.contains(span))
                .or_else(|| decls.iter().find(|(_, s)| s.start >= span.end))
                .map(|(d, _)| d.clone())
        };
        c.comments.push(comment(attached));
    }
}
