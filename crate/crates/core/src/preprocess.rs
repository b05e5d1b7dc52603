//! Comment stripping and callable compression of subject sources.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FocalUnit;
use crate::syntax::{self, LexError, MemberKind, ParseError, TokKind, TypeDecl};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionResult {
    pub compressed_context: String,
    pub removed_comment_count: usize,
    pub compressed_callable_count: usize,
    pub estimated_tokens: usize,
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("focal method {0} not found in class source")]
    FocalNotFound(String),
}

/// Token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Removes comments and collapses runs of blank lines, leaving every other token intact.
pub fn strip_comments_and_blanks(source: &str) -> Result<String, LexError> {
    strip_counting(source).map(|(s, _)| s)
}

fn strip_counting(source: &str) -> Result<(String, usize), LexError> {
    let toks = syntax::lex(source)?;
    let bytes = source.as_bytes();
    let mut out = String::with_capacity(source.len());
    // Lines (1-based, of the output) that lost a comment, and lines inside multi-line literals.
    let mut touched = std::collections::BTreeSet::new();
    let mut protected = std::collections::BTreeSet::new();
    let mut cursor = 0;
    let mut removed = 0;
    for t in &toks {
        match t.kind {
            TokKind::LineComment | TokKind::BlockComment => {
                out.push_str(&source[cursor..t.start]);
                let before = t.start.checked_sub(1).map(|i| bytes[i]);
                let after = bytes.get(t.end).copied();
                let glued = |b: Option<u8>| b.is_some_and(|b| !b.is_ascii_whitespace());
                if t.kind == TokKind::BlockComment && glued(before) && glued(after) {
                    out.push(' ');
                }
                touched.insert(out.matches('\n').count() + 1);
                cursor = t.end;
                removed += 1;
            }
            TokKind::Str if source[t.start..t.end].contains('\n') => {
                let first = out.matches('\n').count() + 1 + source[cursor..t.start].matches('\n').count();
                let last = first + source[t.start..t.end].matches('\n').count();
                protected.extend(first + 1..=last);
            }
            _ => {}
        }
    }
    out.push_str(&source[cursor..]);
    let had_trailing_newline = out.ends_with('\n');
    let mut lines: Vec<String> = Vec::new();
    let mut blank_run = 0;
    for (i, line) in out.split('\n').enumerate() {
        let n = i + 1;
        if protected.contains(&n) {
            blank_run = 0;
            lines.push(line.to_string());
            continue;
        }
        let line = if touched.contains(&n) { line.trim_end() } else { line };
        if line.trim().is_empty() {
            if touched.contains(&n) {
                continue;
            }
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        lines.push(line.to_string());
    }
    let mut text = lines.join("\n");
    if had_trailing_newline && !text.ends_with('\n') {
        text.push('\n');
    }
    Ok((text, removed))
}

/// `modifiers name(param-types): return-type`, the one-line form of a compressed callable.
pub fn signature_line(modifiers: &[String], method: &syntax::Method) -> String {
    let mut s = String::new();
    for m in modifiers {
        s.push_str(m);
        s.push(' ');
    }
    s.push_str(&method.name);
    s.push('(');
    s.push_str(&method.param_types.join(", "));
    s.push(')');
    if let Some(ret) = &method.return_type {
        s.push_str(": ");
        s.push_str(ret);
    }
    s
}

/// The `name(T1,T2)` key of a focal, taken from its identifier.
pub fn focal_key(focal: &FocalUnit) -> &str {
    focal.id.split_once('#').map_or(focal.id.as_str(), |(_, k)| k)
}

/// Keeps the focal method verbatim and reduces every other callable to its signature line.
pub fn compress_context(focal: &FocalUnit, class_source: &str) -> Result<CompressionResult, PreprocessError> {
    let (stripped, removed_comment_count) = strip_counting(class_source)?;
    let outline = syntax::parse_outline(&stripped)?;
    let key = focal_key(focal);
    let mut edits: Vec<(usize, usize, String)> = Vec::new();
    let mut found = false;
    let top: Vec<&TypeDecl> = outline.types.iter().collect();
    for t in top {
        collect_edits(t, key, &focal.class_name, &mut edits, &mut found, true);
    }
    if !found {
        return Err(PreprocessError::FocalNotFound(focal.id.clone()));
    }
    edits.sort_by_key(|e| e.0);
    let mut out = String::with_capacity(stripped.len());
    let mut cursor = 0;
    for (start, end, text) in &edits {
        out.push_str(&stripped[cursor..*start]);
        out.push_str(text);
        cursor = *end;
    }
    out.push_str(&stripped[cursor..]);
    let estimated_tokens = estimate_tokens(&out);
    Ok(CompressionResult { compressed_context: out, removed_comment_count, compressed_callable_count: edits.len(), estimated_tokens })
}

fn collect_edits(t: &TypeDecl, key: &str, focal_class: &str, edits: &mut Vec<(usize, usize, String)>, found: &mut bool, top: bool) {
    for m in &t.members {
        match &m.kind {
            MemberKind::Method(method) => {
                if top && t.name == focal_class && !*found && method.key() == key && method.body.is_some() {
                    *found = true;
                    continue;
                }
                edits.push((m.start, m.end, signature_line(&m.modifiers, method)));
            }
            MemberKind::Type(inner) => collect_edits(inner, key, focal_class, edits, found, false),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn focal(class: &str, key: &str) -> FocalUnit {
        FocalUnit {
            id: format!("p.{class}#{key}"),
            slug: "x".into(),
            source_path: "src/main/java/p/X.java".into(),
            package: Some("p".into()),
            class_name: class.into(),
            method_name: key.split('(').next().unwrap().into(),
            signature: String::new(),
            body_span: (1, 1),
            compressed_context: String::new(),
            symbol_index: BTreeMap::new(),
            framework_profile: "junit4".into(),
        }
    }

    #[test]
    fn strips_line_comment() {
        assert_eq!(strip_comments_and_blanks("int x=1; // note").unwrap(), "int x=1;");
    }

    #[test]
    fn keeps_comment_lookalikes_in_strings() {
        let s = "s = \"//not a comment\";";
        assert_eq!(strip_comments_and_blanks(s).unwrap(), s);
        let t = "s = \"/* no */\"; c = '/';";
        assert_eq!(strip_comments_and_blanks(t).unwrap(), t);
    }

    #[test]
    fn collapses_blank_runs() {
        assert_eq!(strip_comments_and_blanks("a;\n\n\n\nb;\n").unwrap(), "a;\n\nb;\n");
    }

    #[test]
    fn drops_comment_only_lines_and_glues_safely() {
        let src = "/**\n * Doc.\n */\nclass A {\n    // lone\n    int a/**/= 1;\n    int/**/b;\n}\n";
        assert_eq!(strip_comments_and_blanks(src).unwrap(), "class A {\n    int a = 1;\n    int b;\n}\n");
    }

    #[test]
    fn tofloat_signature() {
        let src = "public class NumberUtils {\n    public static float toFloat(final String str){ return toFloat(str, 0.0f); }\n    public static float toFloat(final String str, final float defaultValue) {\n        if (str == null) {\n            return defaultValue;\n        }\n        return Float.parseFloat(str);\n    }\n}\n";
        let r = compress_context(&focal("NumberUtils", "toFloat(String,float)"), src).unwrap();
        assert!(r.compressed_context.contains("    public static toFloat(String): float\n"), "{}", r.compressed_context);
        assert!(r.compressed_context.contains("if (str == null) {\n            return defaultValue;"));
        assert_eq!(r.compressed_callable_count, 1);
    }

    #[test]
    fn single_focal_class_is_unchanged() {
        let src = "class A {\n    // c\n    int f(int x) { return x + 1; }\n}\n";
        let r = compress_context(&focal("A", "f(int)"), src).unwrap();
        assert_eq!(r.compressed_context, strip_comments_and_blanks(src).unwrap());
        assert_eq!(r.compressed_callable_count, 0);
        assert_eq!(r.removed_comment_count, 1);
    }

    #[test]
    fn compresses_others_and_nested() {
        let src = "class A {\n    static final int K = 2;\n    A() { }\n    @Deprecated\n    private int g(int[] a, java.util.List<String> b) { return 1; }\n    int f() { return K; }\n    static class B { void h() { } }\n}\n";
        let r = compress_context(&focal("A", "f()"), src).unwrap();
        assert_eq!(r.compressed_callable_count, 3);
        let c = &r.compressed_context;
        assert!(c.contains("    static final int K = 2;"));
        assert!(c.contains("    A()\n"));
        assert!(c.contains("    private g(int[], java.util.List<String>): int\n"));
        assert!(!c.contains("@Deprecated"));
        assert!(c.contains("static class B { h(): void }"));
        assert!(c.contains("int f() { return K; }"));
        assert!(r.estimated_tokens < estimate_tokens(src));
    }

    #[test]
    fn missing_focal() {
        let err = compress_context(&focal("A", "nope()"), "class A { int f() { return 1; } }").unwrap_err();
        assert!(matches!(err, PreprocessError::FocalNotFound(_)));
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("12345678"), 2);
        assert_eq!(estimate_tokens("123456789"), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn piece() -> impl Strategy<Value = String> {
            prop_oneof![
                Just("int x = 1;".to_string()),
                Just("// note".to_string()),
                Just("/* block\n comment */".to_string()),
                Just("String s = \"// not /* a */ comment\";".to_string()),
                Just("char c = '\"';".to_string()),
                Just(String::new()),
                Just("   ".to_string()),
                "[a-z]{1,6}\\(\\);".prop_map(|s| s),
            ]
        }

        proptest! {
            #[test]
            fn idempotent_and_literal_safe(parts in proptest::collection::vec(piece(), 0..20)) {
                let src = parts.join("\n");
                let once = strip_comments_and_blanks(&src).unwrap();
                let twice = strip_comments_and_blanks(&once).unwrap();
                prop_assert_eq!(&once, &twice);
                let kept = |s: &str| -> Vec<String> {
                    syntax::code_tokens(s).unwrap().iter().map(|t| t.text(s).to_string()).collect()
                };
                prop_assert_eq!(kept(&src), kept(&once));
                prop_assert!(!once.contains("\n\n\n"));
            }

            #[test]
            fn estimate_is_monotone(a in ".{0,40}", b in ".{0,40}") {
                let ab = format!("{a}{b}");
                prop_assert!(estimate_tokens(&ab) >= estimate_tokens(&a).max(estimate_tokens(&b)));
            }
        }
    }
}
