//! Source-level operations on whole test classes.

use std::collections::BTreeSet;

use crate::model::FocalUnit;
use crate::syntax::{self, MemberKind, Outline, TokKind};

/// Renames the primary class to the focal's test class and aligns the package declaration.
/// Code that does not parse is returned unchanged so the syntax check can report it.
pub fn normalize_test_class(code: &str, focal: &FocalUnit) -> String {
    let Ok(outline) = syntax::parse_outline(code) else { return code.to_string() };
    let Some(primary) = outline.primary_type() else { return code.to_string() };
    let expected = focal.test_class_name();
    let mut out = if primary.name != expected { rename_identifier(code, &primary.name, &expected) } else { code.to_string() };
    let Ok(outline) = syntax::parse_outline(&out) else { return out };
    let declared = package_span(&out, &outline);
    match (&focal.package, declared) {
        (Some(p), None) => out = format!("package {p};\n\n{out}"),
        (Some(p), Some((start, end))) if outline.package.as_deref() != Some(p) => {
            out.replace_range(start..end, &format!("package {p};"));
        }
        (None, Some((start, end))) => {
            let end = out[end..].find('\n').map_or(end, |i| end + i + 1);
            out.replace_range(start..end, "");
        }
        _ => {}
    }
    out
}

fn package_span(code: &str, outline: &Outline) -> Option<(usize, usize)> {
    let end = outline.package_end?;
    let toks = syntax::code_tokens(code).ok()?;
    let start = toks.iter().find(|t| t.text(code) == "package")?.start;
    Some((start, end))
}

/// Replaces every identifier token equal to `from`, leaving strings and comments alone.
pub fn rename_identifier(code: &str, from: &str, to: &str) -> String {
    let Ok(toks) = syntax::lex(code) else { return code.to_string() };
    let mut out = String::with_capacity(code.len());
    let mut cursor = 0;
    for t in toks.iter().filter(|t| t.kind == TokKind::Ident && t.text(code) == from) {
        out.push_str(&code[cursor..t.start]);
        out.push_str(to);
        cursor = t.end;
    }
    out.push_str(&code[cursor..]);
    out
}

/// Adds the imports, fields, types and methods of `addition` that `base` lacks.
/// A method whose signature exists in `base` with a different body is kept under the name `{name}_r{round}`.
pub fn merge_suites(base: &str, addition: &str, round: u32) -> String {
    let (Ok(b), Ok(a)) = (syntax::parse_outline(base), syntax::parse_outline(addition)) else {
        return addition.to_string();
    };
    let (Some(bt), Some(at)) = (b.primary_type(), a.primary_type()) else { return addition.to_string() };

    let mut method_names: BTreeSet<String> = BTreeSet::new();
    let mut method_bodies: Vec<(String, String)> = Vec::new();
    let mut fields: BTreeSet<String> = BTreeSet::new();
    let mut types: BTreeSet<String> = BTreeSet::new();
    for m in &bt.members {
        match &m.kind {
            MemberKind::Method(method) => {
                method_names.insert(method.name.clone());
                method_bodies.push((method.key(), syntax::normalize_ws(&base[m.start..m.end])));
            }
            MemberKind::Field { names } => fields.extend(names.iter().cloned()),
            MemberKind::Type(t) => {
                types.insert(t.name.clone());
            }
            _ => {}
        }
    }

    let mut members = Vec::new();
    for m in &at.members {
        let text = &addition[m.start..m.end];
        let indent = syntax::indent_at(addition, m.start);
        match &m.kind {
            MemberKind::Method(method) => {
                let key = method.key();
                let normalized = syntax::normalize_ws(text);
                if method_bodies.iter().any(|(k, body)| *k == key && *body == normalized) {
                    continue;
                }
                let clash = method_bodies.iter().any(|(k, _)| *k == key);
                if clash && method.return_type.is_none() {
                    continue;
                }
                let text = if clash {
                    let mut name = format!("{}_r{round}", method.name);
                    let mut n = 2;
                    while method_names.contains(&name) {
                        name = format!("{}_r{round}_{n}", method.name);
                        n += 1;
                    }
                    method_names.insert(name.clone());
                    rename_declaration(addition, m.start, m.end, method.header_start, &method.name, &name)
                } else {
                    method_names.insert(method.name.clone());
                    text.to_string()
                };
                method_bodies.push((key, normalized));
                members.push(format!("{indent}{text}"));
            }
            MemberKind::Field { names } => {
                if names.iter().any(|n| fields.contains(n)) {
                    continue;
                }
                fields.extend(names.iter().cloned());
                members.push(format!("{indent}{text}"));
            }
            MemberKind::Type(t) if types.insert(t.name.clone()) => {
                members.push(format!("{indent}{text}"));
            }
            _ => {}
        }
    }

    let imports: Vec<String> = a
        .imports
        .iter()
        .filter(|i| !b.imports.iter().any(|bi| bi.path == i.path && bi.is_static == i.is_static))
        .map(|i| addition[i.start..i.end].to_string())
        .collect();

    let mut out = base.to_string();
    if !members.is_empty() {
        let close = bt.body_close;
        let line_begin = out[..close].rfind('\n').map_or(0, |i| i + 1);
        let insert = if out[line_begin..close].trim().is_empty() { line_begin } else { close };
        let block: String = members.iter().map(|m| format!("\n{m}\n")).collect();
        out.insert_str(insert, &block);
    }
    if !imports.is_empty() {
        let at = b.imports.last().map(|i| i.end).or(b.package_end);
        let text: String = imports.iter().map(|i| format!("\n{i}")).collect();
        match at {
            Some(pos) => out.insert_str(pos, &text),
            None => out.insert_str(0, &format!("{}\n\n", text.trim_start())),
        }
    }
    out
}

/// The member text with its declared name replaced.
fn rename_declaration(src: &str, start: usize, end: usize, header_start: usize, from: &str, to: &str) -> String {
    let toks = syntax::code_tokens(&src[header_start..end]).unwrap_or_default();
    let name_tok = toks.iter().find(|t| t.text(&src[header_start..end]) == from);
    match name_tok {
        Some(t) => {
            let at = header_start + t.start;
            format!("{}{to}{}", &src[start..at], &src[at + from.len()..end])
        }
        None => src[start..end].to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn focal(package: Option<&str>) -> FocalUnit {
        FocalUnit {
            id: "shop.Cart#add(int)".into(),
            slug: "shop.Cart-add".into(),
            source_path: String::new(),
            package: package.map(String::from),
            class_name: "Cart".into(),
            method_name: "add".into(),
            signature: String::new(),
            body_span: (1, 1),
            compressed_context: String::new(),
            symbol_index: BTreeMap::new(),
            framework_profile: "junit4".into(),
        }
    }

    #[test]
    fn normalizes_name_and_package() {
        let code = "import org.junit.Test;\n\npublic class CartTest {\n    public CartTest() { }\n    String s = \"CartTest\";\n}\n";
        let out = normalize_test_class(code, &focal(Some("shop")));
        assert!(out.starts_with("package shop;\n\nimport org.junit.Test;"));
        assert!(out.contains("public class CartGenTest {\n    public CartGenTest() { }"));
        assert!(out.contains("\"CartTest\""));

        let wrong = "package other;\nclass CartGenTest { }\n";
        assert_eq!(normalize_test_class(wrong, &focal(Some("shop"))), "package shop;\nclass CartGenTest { }\n");
        assert_eq!(normalize_test_class(wrong, &focal(None)), "class CartGenTest { }\n");
        assert_eq!(normalize_test_class("class {", &focal(None)), "class {");
    }

    const BASE: &str = "package shop;\n\nimport org.junit.Test;\n\npublic class CartGenTest {\n    private Cart cart = new Cart();\n\n    @Test\n    public void testAdd() {\n        cart.add(1);\n    }\n}\n";

    #[test]
    fn merge_adds_new_members_only() {
        let addition = "package shop;\n\nimport org.junit.Test;\nimport static org.junit.Assert.*;\n\npublic class CartGenTest {\n    private Cart cart = new Cart();\n\n    @Test\n    public void testAdd() {\n        cart.add(1);\n    }\n\n    @Test\n    public void testNegative() {\n        assertTrue(cart.add(-1) < 0);\n    }\n}\n";
        let merged = merge_suites(BASE, addition, 2);
        assert_eq!(merged.matches("public void testAdd()").count(), 1);
        assert_eq!(merged.matches("private Cart cart").count(), 1);
        assert!(merged.contains("import org.junit.Test;\nimport static org.junit.Assert.*;\n"));
        assert!(
            merged.contains("    }\n\n    @Test\n    public void testNegative() {\n        assertTrue(cart.add(-1) < 0);\n    }\n}\n"),
            "{merged}"
        );
        syntax::check_structure(&merged).unwrap();
        assert_eq!(merge_suites(&merged, addition, 3), merged);
    }

    #[test]
    fn merge_renames_changed_duplicates() {
        let addition = "public class CartGenTest {\n    @Test\n    public void testAdd() {\n        cart.add(2);\n    }\n}\n";
        let merged = merge_suites(BASE, addition, 3);
        assert!(merged.contains("public void testAdd() {\n        cart.add(1);"));
        assert!(merged.contains("public void testAdd_r3() {\n        cart.add(2);"));
        let again = merge_suites(
            &merged,
            "public class CartGenTest {\n    @Test\n    public void testAdd() {\n        cart.add(3);\n    }\n}\n",
            3,
        );
        assert!(again.contains("testAdd_r3_2()"));
    }
}
