//! Assembles a patched source file from the pieces of a generator reply.

use crate::error::{Error, Result};
use crate::solidity::{parse_source, ContractDef, FunctionDef, FunctionKind, SourceUnit, Span};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchParts {
    pub patched_function: String,
    pub new_declarations: String,
    pub replaced_declarations: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spliced {
    pub source: String,
    /// Names of existing declarations the patch rewrote.
    pub replaced: Vec<String>,
}

/// Text between the first pair of code fences, or the whole text.
pub fn strip_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text.trim_matches('\n');
    };
    let after = &text[open + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => body[..close].trim_end_matches([' ', '\t']).trim_matches('\n'),
        None => body.trim_matches('\n'),
    }
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start_matches([' ', '\t']).len()
}

/// Removes the indentation common to the code so its outermost lines start
/// at column zero. Replies often leave the first line flush and the rest at
/// their original depth; a closing brace then tells the extra depth.
pub fn dedent(code: &str) -> Vec<String> {
    let lines: Vec<&str> = code.trim_end().lines().collect();
    let non_blank: Vec<&&str> = lines.iter().filter(|l| !l.trim().is_empty()).collect();
    if non_blank.is_empty() {
        return Vec::new();
    }
    let common = non_blank.iter().map(|l| indent_of(l)).min().unwrap_or(0);
    let mut out: Vec<String> = lines
        .iter()
        .map(|l| if l.trim().is_empty() { String::new() } else { l[common..].to_string() })
        .collect();
    let first_flush = !lines[0].trim().is_empty() && indent_of(lines[0]) == 0;
    let last = out.iter().rev().find(|l| !l.trim().is_empty()).cloned().unwrap_or_default();
    let extra = indent_of(&last);
    if first_flush && last.trim_start().starts_with('}') && extra > 0 && out.len() > 1 && out[1..].iter().all(|l| l.trim().is_empty() || indent_of(l) >= extra) {
        for l in out.iter_mut().skip(1) {
            if !l.is_empty() {
                *l = l[extra..].to_string();
            }
        }
    }
    out
}

/// Code re-indented for placement at `indent`; the first line carries no
/// indentation when `indent_first` is false.
fn reindent(code: &str, indent: &str, indent_first: bool) -> String {
    let lines = dedent(code);
    let mut out = String::new();
    for (i, l) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if !l.is_empty() && (i > 0 || indent_first) {
            out.push_str(indent);
        }
        out.push_str(l);
    }
    out
}

fn line_start(raw: &str, offset: usize) -> usize {
    raw[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0)
}

fn leading_indent(raw: &str, offset: usize) -> &str {
    let start = line_start(raw, offset);
    let prefix = &raw[start..offset];
    if prefix.trim().is_empty() {
        prefix
    } else {
        ""
    }
}

enum Decl {
    Function(String, FunctionKind, Vec<String>),
    Modifier(String),
    StateVar(String),
}

fn find_existing(owners: &[&ContractDef], decl: &Decl) -> Option<(String, Span)> {
    for c in owners {
        let hit = match decl {
            Decl::Function(name, kind, params) => c
                .functions
                .iter()
                .filter(|f| f.kind == *kind && (*kind != FunctionKind::Function || f.name == *name))
                .find(|f| f.param_types().iter().map(|s| s.to_string()).collect::<Vec<_>>() == *params)
                .or_else(|| c.functions.iter().find(|f| f.kind == *kind && (*kind != FunctionKind::Function || f.name == *name)))
                .map(|f| (f.name.clone(), f.span)),
            Decl::Modifier(name) => c.modifier(name).map(|m| (m.name.clone(), m.span)),
            Decl::StateVar(name) => c.state_var(name).map(|v| (v.name.clone(), v.span)),
        };
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// Rewrites `unit` with the target function replaced, existing
/// declarations in `owners` (the target contract first, then ancestors from
/// the same file) rewritten, and new declarations placed above the target.
pub fn splice(unit: &SourceUnit, owners: &[&ContractDef], func: &FunctionDef, parts: &PatchParts) -> Result<Spliced> {
    let raw = &unit.raw;
    let patched_fn = strip_fences(&parts.patched_function);
    if patched_fn.trim().is_empty() {
        return Err(Error::GenerationFailed("empty patched function".into()));
    }
    let indent = leading_indent(raw, func.span.start).to_string();
    let mut edits: Vec<(usize, usize, String)> = vec![(func.span.start, func.span.end, reindent(patched_fn, &indent, false))];
    let mut replaced = Vec::new();
    let mut additions: Vec<String> = Vec::new();

    let rewritten = strip_fences(&parts.replaced_declarations);
    if !rewritten.trim().is_empty() {
        let parsed = parse_source("<replaced>", rewritten);
        for c in &parsed.contracts {
            let mut decls: Vec<(Decl, Span)> = Vec::new();
            for f in &c.functions {
                let params = f.param_types().iter().map(|s| s.to_string()).collect();
                decls.push((Decl::Function(f.name.clone(), f.kind, params), f.span));
            }
            for m in &c.modifiers {
                decls.push((Decl::Modifier(m.name.clone()), m.span));
            }
            for v in &c.state_vars {
                decls.push((Decl::StateVar(v.name.clone()), v.span));
            }
            decls.sort_by_key(|(_, s)| s.start);
            for (decl, span) in decls {
                let text = parsed.text(span);
                match find_existing(owners, &decl) {
                    Some((_, old)) if old == func.span => additions.push(text.to_string()),
                    Some((name, old)) => {
                        let ind = leading_indent(raw, old.start).to_string();
                        edits.push((old.start, old.end, reindent(text, &ind, false)));
                        replaced.push(name);
                    }
                    None => additions.push(text.to_string()),
                }
            }
        }
    }

    let added = strip_fences(&parts.new_declarations);
    if !added.trim().is_empty() {
        additions.insert(0, added.to_string());
    }
    if !additions.is_empty() {
        let at = line_start(raw, func.span.start);
        let mut block = String::new();
        for a in &additions {
            block.push_str(&reindent(a, &indent, true));
            block.push_str("\n\n");
        }
        edits.push((at, at, block));
    }

    edits.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    for w in edits.windows(2) {
        // sorted descending: the later edit must start at or after the earlier one's end
        if w[1].1 > w[0].0 {
            return Err(Error::GenerationFailed("patch rewrites overlapping declarations".into()));
        }
    }
    let mut source = raw.clone();
    for (start, end, text) in edits {
        source.replace_range(start..end, &text);
    }
    Ok(Spliced { source, replaced })
}
