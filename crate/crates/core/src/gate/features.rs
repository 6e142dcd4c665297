use crate::solidity::{tokenize, SemVer, Token, TokenKind};
use serde::Deserialize;
use std::sync::OnceLock;

const SHIPPED: &str = include_str!("data/version_features.toml");

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct VersionFeature {
    pub name: String,
    pub description: String,
    #[serde(default, deserialize_with = "semver_opt")]
    pub since: Option<SemVer>,
    #[serde(default, deserialize_with = "semver_opt")]
    pub until: Option<SemVer>,
}

fn semver_opt<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<SemVer>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    match s {
        None => Ok(None),
        Some(s) => SemVer::parse(&s)
            .map(Some)
            .ok_or_else(|| serde::de::Error::custom(format!("bad version `{s}`"))),
    }
}

#[derive(Deserialize)]
struct Table {
    feature: Vec<VersionFeature>,
}

pub fn version_features() -> &'static [VersionFeature] {
    static T: OnceLock<Vec<VersionFeature>> = OnceLock::new();
    T.get_or_init(|| {
        toml::from_str::<Table>(SHIPPED)
            .expect("shipped feature table parses")
            .feature
    })
}

struct Toks<'a> {
    src: &'a str,
    toks: Vec<Token>,
}

impl<'a> Toks<'a> {
    fn new(src: &'a str) -> Self {
        Toks {
            src,
            toks: tokenize(src, 0).into_iter().filter(|t| !t.is_comment()).collect(),
        }
    }

    fn at(&self, i: usize) -> &'a str {
        self.toks.get(i).map(|t| t.text(self.src)).unwrap_or("")
    }

    fn prev(&self, i: usize) -> &'a str {
        if i == 0 {
            ""
        } else {
            self.at(i - 1)
        }
    }

    fn is_ident(&self, i: usize) -> bool {
        self.toks.get(i).is_some_and(|t| t.kind == TokenKind::Ident)
    }
}

fn at_decl_start(prev: &str) -> bool {
    matches!(prev, "" | ";" | "{" | "}")
}

const FN_TAIL: &[&str] = &[
    "{", "returns", "public", "external", "internal", "private", "view", "pure", "payable", ";",
];

/// Number of occurrences of the named construct in `src`; `None` for a name
/// without a detector.
pub fn count_feature(name: &str, src: &str) -> Option<usize> {
    let t = Toks::new(src);
    let n = t.toks.len();
    let count = |pred: &dyn Fn(usize) -> bool| (0..n).filter(|&i| pred(i)).count();
    let not_member = |i: usize| t.prev(i) != ".";
    Some(match name {
        "constructor-keyword" => count(&|i| t.at(i) == "constructor" && t.at(i + 1) == "(" && not_member(i)),
        "emit" => count(&|i| t.at(i) == "emit" && t.is_ident(i + 1) && not_member(i)),
        "abi-coder" => count(&|i| {
            t.at(i) == "abi" && t.at(i + 1) == "." && t.at(i + 2).starts_with("encode")
                || t.at(i) == "abi" && t.at(i + 1) == "." && t.at(i + 2) == "decode"
        }),
        "address-payable" => count(&|i| t.at(i) == "address" && t.at(i + 1) == "payable"),
        "receive-function" => count(&|i| t.at(i) == "receive" && t.at(i + 1) == "(" && at_decl_start(t.prev(i))),
        "fallback-keyword" => count(&|i| t.at(i) == "fallback" && t.at(i + 1) == "(" && at_decl_start(t.prev(i))),
        "virtual" => count(&|i| t.at(i) == "virtual"),
        "override" => count(&|i| t.at(i) == "override"),
        "try-catch" => count(&|i| t.at(i) == "try" && not_member(i)),
        "immutable" => count(&|i| t.at(i) == "immutable"),
        "unchecked-block" => count(&|i| t.at(i) == "unchecked" && t.at(i + 1) == "{"),
        "custom-error" => count(&|i| {
            (t.at(i) == "error" && at_decl_start(t.prev(i)) && t.is_ident(i + 1) && t.at(i + 2) == "(")
                || (t.at(i) == "revert" && t.is_ident(i + 1) && t.at(i + 2) == "(")
        }),
        "throw" => count(&|i| t.at(i) == "throw" && not_member(i)),
        "suicide" => count(&|i| t.at(i) == "suicide" && t.at(i + 1) == "(" && not_member(i)),
        "sha3" => count(&|i| t.at(i) == "sha3" && t.at(i + 1) == "(" && not_member(i)),
        "var-declaration" => count(&|i| t.at(i) == "var" && (t.is_ident(i + 1) || t.at(i + 1) == "(")),
        "callcode" => count(&|i| t.at(i) == "callcode" && t.prev(i) == "."),
        "years-unit" => count(&|i| {
            t.at(i) == "years" && t.toks.get(i.wrapping_sub(1)).is_some_and(|p| p.kind == TokenKind::Number)
        }),
        "constant-function" => count(&|i| {
            t.at(i) == "constant"
                && (FN_TAIL.contains(&t.at(i + 1)) || (t.is_ident(i + 1) && !matches!(t.at(i + 2), "=" | ";")))
                && !is_type_word(t.prev(i))
        }),
        "now" => count(&|i| t.at(i) == "now" && not_member(i) && t.at(i + 1) != "("),
        _ => return None,
    })
}

/// Words that can directly precede `constant` in a state variable declaration.
fn is_type_word(w: &str) -> bool {
    crate::solidity::is_elementary_type(w) || w.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}
