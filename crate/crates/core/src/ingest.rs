//! Scans a subject project for focal methods.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::model::FocalUnit;
use crate::preprocess::{compress_context, signature_line, PreprocessError};
use crate::profile::FrameworkProfile;
use crate::syntax::{self, MemberKind, Outline, TypeKind};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Source { path: String, source: PreprocessError },
}

struct SourceFile {
    rel: String,
    text: String,
    outline: Outline,
}

/// Every `.java` file under `source_root`, sorted by relative path.
fn read_sources(project: &Path, source_root: &str) -> Result<Vec<SourceFile>, IngestError> {
    let root = project.join(source_root);
    let mut paths: Vec<PathBuf> = WalkDir::new(&root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"))
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let rel = path.strip_prefix(project).unwrap_or(&path).to_string_lossy().replace('\\', "/");
        let text = fs::read_to_string(&path).map_err(|source| IngestError::Io { path: rel.clone(), source })?;
        let outline =
            syntax::parse_outline(&text).map_err(|e| IngestError::Source { path: rel.clone(), source: PreprocessError::Parse(e) })?;
        out.push(SourceFile { rel, text, outline });
    }
    Ok(out)
}

/// Simple name to qualified names, ordered: same-package project types, other project types, standard library, third party.
pub fn symbol_index(project_types: &[String], package: Option<&str>, profile: &FrameworkProfile) -> BTreeMap<String, Vec<String>> {
    let mut index: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let same_package = |q: &str| q.rsplit_once('.').map(|(p, _)| p) == package;
    let mut project: Vec<&String> = project_types.iter().collect();
    project.sort_by_key(|q| !same_package(q));
    let symbols = &profile.spec.symbols;
    for q in project.into_iter().chain(&symbols.standard).chain(&symbols.third_party) {
        let simple = q.rsplit('.').next().unwrap_or(q).to_string();
        let entry = index.entry(simple).or_default();
        if !entry.contains(q) {
            entry.push(q.clone());
        }
    }
    index
}

/// Public methods with bodies of public, non-abstract top-level classes.
pub fn scan_project(project: &Path, source_root: &str, profile: &FrameworkProfile) -> Result<Vec<FocalUnit>, IngestError> {
    let files = read_sources(project, source_root)?;
    let project_types: Vec<String> = files
        .iter()
        .flat_map(|f| {
            let pkg = f.outline.package.clone();
            f.outline.types.iter().map(move |t| match &pkg {
                Some(p) => format!("{p}.{}", t.name),
                None => t.name.clone(),
            })
        })
        .collect();
    let mut focals = Vec::new();
    let mut slugs: BTreeMap<String, usize> = BTreeMap::new();
    for file in &files {
        let package = file.outline.package.clone();
        let index = symbol_index(&project_types, package.as_deref(), profile);
        for t in &file.outline.types {
            let public = t.modifiers.iter().any(|m| m == "public");
            let abstract_ = t.modifiers.iter().any(|m| m == "abstract");
            if t.kind != TypeKind::Class || !public || abstract_ {
                continue;
            }
            let qualified = match &package {
                Some(p) => format!("{p}.{}", t.name),
                None => t.name.clone(),
            };
            for m in &t.members {
                let MemberKind::Method(method) = &m.kind else { continue };
                let is_public = m.modifiers.iter().any(|x| x == "public");
                if !is_public || method.body.is_none() || method.return_type.is_none() {
                    continue;
                }
                let id = format!("{qualified}#{}", method.key());
                let base = format!("{qualified}-{}", method.name);
                let n = slugs.entry(base.clone()).or_insert(0);
                *n += 1;
                let slug = if *n == 1 { base } else { format!("{base}-{n}") };
                let header = syntax::normalize_ws(&file.text[method.header_start..method.header_end]);
                let signature = if m.modifiers.is_empty() { header } else { format!("{} {header}", m.modifiers.join(" ")) };
                let body_span = (syntax::line_of(&file.text, method.header_start), syntax::line_of(&file.text, m.end.saturating_sub(1)));
                let mut focal = FocalUnit {
                    id,
                    slug,
                    source_path: file.rel.clone(),
                    package: package.clone(),
                    class_name: t.name.clone(),
                    method_name: method.name.clone(),
                    signature,
                    body_span,
                    compressed_context: String::new(),
                    symbol_index: index.clone(),
                    framework_profile: profile.name().to_string(),
                };
                let compressed =
                    compress_context(&focal, &file.text).map_err(|source| IngestError::Source { path: file.rel.clone(), source })?;
                focal.compressed_context = compressed.compressed_context;
                focals.push(focal);
            }
        }
    }
    Ok(focals)
}

/// One-line listing of a focal for the `ingest` command.
pub fn describe(focal: &FocalUnit) -> String {
    format!("{}\t{}:{}-{}\t{}", focal.id, focal.source_path, focal.body_span.0, focal.body_span.1, focal.signature)
}

/// Signature lines of every callable in a class, in declaration order.
pub fn callable_signatures(source: &str) -> Result<Vec<String>, PreprocessError> {
    let outline = syntax::parse_outline(source)?;
    let mut types = Vec::new();
    syntax::walk_types(&outline.types, &mut types);
    Ok(types.iter().flat_map(|t| t.members.iter()).filter_map(|m| m.method().map(|method| signature_line(&m.modifiers, method))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (path, text) in files {
            let p = dir.path().join(path);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            fs::write(p, text).unwrap();
        }
        dir
    }

    const CART: &str = "package shop;\n\nimport java.util.List;\n\n/** A cart. */\npublic class Cart {\n    private int total;\n\n    public Cart() { }\n\n    // adds\n    public int add(int n) {\n        if (n < 0) {\n            throw new IllegalArgumentException(\"negative\");\n        }\n        total += n;\n        return total;\n    }\n\n    public int add(int a, int b) { return add(a) + add(b); }\n\n    private void helper() { }\n\n    public static boolean isEmpty(List<String> xs) { return xs == null || xs.isEmpty(); }\n}\n";

    #[test]
    fn selects_public_methods_of_public_concrete_classes() {
        let dir = project(&[
            ("src/main/java/shop/Cart.java", CART),
            ("src/main/java/shop/Base.java", "package shop;\npublic abstract class Base { public int f() { return 1; } }\n"),
            ("src/main/java/shop/Hidden.java", "package shop;\nclass Hidden { public int g() { return 2; } }\n"),
            ("src/main/java/shop/Shape.java", "package shop;\npublic interface Shape { int area(); }\n"),
            ("src/test/java/shop/CartTest.java", "package shop;\npublic class CartTest { public void t() { } }\n"),
        ]);
        let focals = scan_project(dir.path(), "src/main/java", &FrameworkProfile::junit4()).unwrap();
        let ids: Vec<&str> = focals.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, vec!["shop.Cart#add(int)", "shop.Cart#add(int,int)", "shop.Cart#isEmpty(List<String>)"]);
        let slugs: Vec<&str> = focals.iter().map(|f| f.slug.as_str()).collect();
        assert_eq!(slugs, vec!["shop.Cart-add", "shop.Cart-add-2", "shop.Cart-isEmpty"]);

        let add = &focals[0];
        assert_eq!(add.signature, "public int add(int n)");
        assert_eq!(add.body_span, (12, 18));
        assert_eq!(add.source_path, "src/main/java/shop/Cart.java");
        assert!(add.compressed_context.contains("        if (n < 0) {\n            throw new IllegalArgumentException(\"negative\");"));
        assert!(add.compressed_context.contains("public add(int, int): int"));
        assert!(!add.compressed_context.contains("adds"));
        assert_eq!(add.symbol_index["List"], vec!["java.util.List"]);
        assert_eq!(add.symbol_index["Cart"], vec!["shop.Cart"]);
        assert!(add.symbol_index["Assert"].contains(&"org.junit.Assert".to_string()));
    }

    #[test]
    fn project_types_take_precedence() {
        let profile = FrameworkProfile::junit4();
        let idx = symbol_index(&["other.List".into(), "mine.List".into()], Some("mine"), &profile);
        assert_eq!(idx["List"], vec!["mine.List", "other.List", "java.util.List"]);
    }

    #[test]
    fn signatures_listing() {
        let sigs = callable_signatures(CART).unwrap();
        assert_eq!(sigs[0], "public Cart()");
        assert_eq!(sigs[1], "public add(int): int");
    }
}
