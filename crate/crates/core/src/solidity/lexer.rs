//! Tolerant tokenizer for Solidity source.
//!
//! Never fails: unknown characters become single-character punctuation
//! tokens and unterminated strings or block comments run to the end of the
//! line or input.

use super::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Punct,
    LineComment,
    BlockComment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.start..self.span.end]
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokenKind::LineComment | TokenKind::BlockComment)
    }
}

const PUNCT3: &[&str] = &[">>>", ">>=", "<<=", "..."];
const PUNCT2: &[&str] = &[
    "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "|=", "&=",
    "^=", "<<", ">>", "**", "->", ":=",
];

/// Tokenizes `src`, keeping comments as tokens. Offsets are byte offsets into
/// `src` plus `base`.
pub fn tokenize(src: &str, base: usize) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind;
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            // trailing \r belongs to the line break
            let mut end = i;
            if end > start && bytes[end - 1] == b'\r' {
                end -= 1;
            }
            out.push(Token {
                kind: TokenKind::LineComment,
                span: Span::new(base + start, base + end),
            });
            continue;
        } else if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            loop {
                if i >= bytes.len() {
                    break;
                }
                if bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/') {
                    i += 2;
                    break;
                }
                i += 1;
            }
            kind = TokenKind::BlockComment;
        } else if c == b'_' || c == b'$' || c.is_ascii_alphabetic() {
            while i < bytes.len()
                && (bytes[i] == b'_' || bytes[i] == b'$' || bytes[i].is_ascii_alphanumeric())
            {
                i += 1;
            }
            kind = TokenKind::Ident;
        } else if c.is_ascii_digit() {
            if c == b'0' && matches!(bytes.get(i + 1), Some(b'x') | Some(b'X')) {
                i += 2;
                while i < bytes.len() && (bytes[i].is_ascii_hexdigit() || bytes[i] == b'_') {
                    i += 1;
                }
            } else {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                    i += 1;
                }
                if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && bytes[j] == b'-' {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
            }
            kind = TokenKind::Number;
        } else if c == b'"' || c == b'\'' {
            i += 1;
            while i < bytes.len() && bytes[i] != c && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] != b'\n' {
                    i += 1;
                }
                i += 1;
            }
            if i < bytes.len() && bytes[i] == c {
                i += 1;
            }
            kind = TokenKind::Str;
        } else {
            let rest = &src[i..];
            let len = PUNCT3
                .iter()
                .chain(PUNCT2.iter())
                .find(|p| rest.starts_with(**p))
                .map(|p| p.len())
                .unwrap_or_else(|| rest.chars().next().map(char::len_utf8).unwrap_or(1));
            i += len;
            kind = TokenKind::Punct;
        }
        out.push(Token {
            kind,
            span: Span::new(base + start, base + i),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<&str> {
        tokenize(src, 0).iter().map(|t| t.text(src)).collect()
    }

    #[test]
    fn splits_operators_and_idents() {
        assert_eq!(
            texts("require(msg.sender == owner && x >= 0x1F);"),
            vec![
                "require", "(", "msg", ".", "sender", "==", "owner", "&&", "x", ">=", "0x1F", ")",
                ";"
            ]
        );
    }

    #[test]
    fn comments_and_strings() {
        let src = "a = \"x // y\"; // tail\n/* block */ b";
        let toks = tokenize(src, 0);
        let kinds: Vec<_> = toks.iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Ident,
                TokenKind::Punct,
                TokenKind::Str,
                TokenKind::Punct,
                TokenKind::LineComment,
                TokenKind::BlockComment,
                TokenKind::Ident
            ]
        );
    }

    #[test]
    fn unterminated_constructs_do_not_panic() {
        for src in ["\"abc", "/* never closed", "'x\n", "é∂ƒ", "1e", "0x"] {
            let toks = tokenize(src, 0);
            for t in toks {
                assert!(src.is_char_boundary(t.span.start) && src.is_char_boundary(t.span.end));
            }
        }
    }
}
