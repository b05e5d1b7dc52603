//! Coverage report ingestion, the coverage standard, and uncovered-branch reports.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BranchCoverage, CoverageSnapshot, FocalUnit, LineCoverage, RunConfig};
use crate::syntax;

/// Maximum number of entries an uncovered-branch report carries.
pub const MAX_UNCOVERED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// The neutral schema: `{file, lines:[{line,hits}], branches:[{line,condition,true_hits,false_hits}]}`.
    Json,
    /// OpenClover XML.
    Clover,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageDocument {
    pub format: ReportFormat,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("coverage report has no entry for {0}")]
    ReportMissing(String),
    #[error("coverage report is malformed: {0}")]
    ReportMalformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissingSide {
    TrueSide,
    FalseSide,
    BothSides,
}

impl MissingSide {
    pub fn marker(self) -> &'static str {
        match self {
            MissingSide::TrueSide => "true branch not covered",
            MissingSide::FalseSide => "false branch not covered",
            MissingSide::BothSides => "true and false branches not covered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncoveredEntry {
    pub branch_code: String,
    pub line: u32,
    pub missing_side: MissingSide,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncoveredReport {
    pub class_name: String,
    pub method_name: String,
    pub entries: Vec<UncoveredEntry>,
}

impl UncoveredReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Deserialize)]
struct JsonLine {
    line: u32,
    hits: u64,
}

#[derive(Debug, Clone, Deserialize)]
struct JsonBranch {
    line: u32,
    #[serde(default)]
    condition: String,
    true_hits: u64,
    false_hits: u64,
}

#[derive(Debug, Clone, Deserialize)]
struct JsonFile {
    file: String,
    #[serde(default)]
    lines: Vec<JsonLine>,
    #[serde(default)]
    branches: Vec<JsonBranch>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonDoc {
    Many(Vec<JsonFile>),
    Wrapped { files: Vec<JsonFile> },
    One(JsonFile),
}

fn same_file(report_path: &str, source_path: &str) -> bool {
    let a = report_path.replace('\\', "/");
    let b = source_path.replace('\\', "/");
    a == b || a.ends_with(&format!("/{b}")) || b.ends_with(&format!("/{a}"))
}

fn parse_json(text: &str) -> Result<Vec<JsonFile>, CoverageError> {
    let doc: JsonDoc = serde_json::from_str(text).map_err(|e| CoverageError::ReportMalformed(e.to_string()))?;
    Ok(match doc {
        JsonDoc::Many(v) => v,
        JsonDoc::Wrapped { files } => files,
        JsonDoc::One(f) => vec![f],
    })
}

fn xml_unescape(s: &str) -> String {
    s.replace("&quot;", "\"").replace("&apos;", "'").replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

/// Reads the `<file>` and `<line>` elements of an OpenClover report.
fn parse_clover(text: &str, source: Option<&str>) -> Result<Vec<JsonFile>, CoverageError> {
    let tag = Regex::new(r"<(/?)(coverage|file|line)\b([^>]*?)/?>").expect("valid");
    let attr = Regex::new(r#"([\w:-]+)\s*=\s*"([^"]*)""#).expect("valid");
    if !text.contains("<coverage") {
        return Err(CoverageError::ReportMalformed("no <coverage> element".into()));
    }
    let source_lines: Vec<&str> = source.map(|s| s.lines().collect()).unwrap_or_default();
    let mut files: Vec<JsonFile> = Vec::new();
    for cap in tag.captures_iter(text) {
        if &cap[1] == "/" {
            continue;
        }
        let attrs: BTreeMap<String, String> = attr.captures_iter(&cap[3]).map(|a| (a[1].to_string(), xml_unescape(&a[2]))).collect();
        let num = |k: &str| -> Result<u64, CoverageError> {
            attrs
                .get(k)
                .ok_or_else(|| CoverageError::ReportMalformed(format!("<line> without {k}")))?
                .parse()
                .map_err(|_| CoverageError::ReportMalformed(format!("bad {k} value")))
        };
        match &cap[2] {
            "file" => {
                let path = attrs.get("path").or(attrs.get("name")).cloned().unwrap_or_default();
                files.push(JsonFile { file: path, lines: Vec::new(), branches: Vec::new() });
            }
            "line" => {
                let Some(file) = files.last_mut() else {
                    return Err(CoverageError::ReportMalformed("<line> outside <file>".into()));
                };
                let line = num("num")? as u32;
                match attrs.get("type").map(String::as_str) {
                    Some("cond") => {
                        let condition = source_lines.get(line as usize - 1).map_or(String::new(), |l| syntax::normalize_ws(l));
                        file.branches.push(JsonBranch { line, condition, true_hits: num("truecount")?, false_hits: num("falsecount")? });
                    }
                    _ => file.lines.push(JsonLine { line, hits: num("count")? }),
                }
            }
            _ => {}
        }
    }
    Ok(files)
}

/// Restricts a report to the focal's body lines.
pub fn ingest_report(doc: &CoverageDocument, focal: &FocalUnit, source: Option<&str>) -> Result<CoverageSnapshot, CoverageError> {
    let files = match doc.format {
        ReportFormat::Json => parse_json(&doc.text)?,
        ReportFormat::Clover => parse_clover(&doc.text, source)?,
    };
    let Some(file) = files.into_iter().find(|f| same_file(&f.file, &focal.source_path)) else {
        return Err(CoverageError::ReportMissing(focal.source_path.clone()));
    };
    let (lo, hi) = focal.body_span;
    let within = |l: u32| lo <= l && l <= hi;
    let mut lines: BTreeMap<u32, u64> = BTreeMap::new();
    for l in file.lines.iter().filter(|l| within(l.line)) {
        *lines.entry(l.line).or_default() += l.hits;
    }
    let mut per_line: BTreeMap<u32, usize> = BTreeMap::new();
    let mut branches = Vec::new();
    for b in file.branches.iter().filter(|b| within(b.line)) {
        let idx = per_line.entry(b.line).or_default();
        branches.push(BranchCoverage {
            branch_id: format!("{}:{}", b.line, idx),
            line: b.line,
            code_text: b.condition.clone(),
            true_covered: b.true_hits > 0,
            false_covered: b.false_hits > 0,
        });
        *idx += 1;
    }
    let lines = lines.into_iter().map(|(line_no, hits)| LineCoverage { line_no, covered: hits > 0 }).collect();
    Ok(CoverageSnapshot::from_entries(branches, lines))
}

/// Whether the branch rate reaches the standard; a focal without branches always does.
pub fn meets_standard(snapshot: &CoverageSnapshot, config: &RunConfig) -> bool {
    meets(snapshot, config.coverage_standard)
}

pub fn meets(snapshot: &CoverageSnapshot, standard: f64) -> bool {
    if snapshot.branch_total == 0 {
        return true;
    }
    // Compare in integers so 19/20 against 0.95 is exact.
    let needed = (standard * snapshot.branch_total as f64 - 1e-9).ceil().max(0.0) as u64;
    snapshot.branch_covered >= needed
}

/// One entry per branch with an uncovered direction, in source order, capped at [`MAX_UNCOVERED`].
pub fn uncovered_branches(snapshot: &CoverageSnapshot, focal: &FocalUnit) -> UncoveredReport {
    let mut entries: Vec<UncoveredEntry> = snapshot
        .branches
        .iter()
        .filter_map(|b| {
            let side = match (b.true_covered, b.false_covered) {
                (true, true) => return None,
                (true, false) => MissingSide::FalseSide,
                (false, true) => MissingSide::TrueSide,
                (false, false) => MissingSide::BothSides,
            };
            Some(UncoveredEntry { branch_code: b.code_text.clone(), line: b.line, missing_side: side })
        })
        .collect();
    entries.sort_by_key(|e| e.line);
    entries.truncate(MAX_UNCOVERED);
    UncoveredReport { class_name: focal.class_name.clone(), method_name: focal.method_name.clone(), entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn focal(span: (u32, u32)) -> FocalUnit {
        FocalUnit {
            id: "shop.Cart#add(int)".into(),
            slug: "Cart-add".into(),
            source_path: "src/main/java/shop/Cart.java".into(),
            package: Some("shop".into()),
            class_name: "Cart".into(),
            method_name: "add".into(),
            signature: "public int add(int n)".into(),
            body_span: span,
            compressed_context: "class Cart {}".into(),
            symbol_index: BTreeMap::new(),
            framework_profile: "junit4".into(),
        }
    }

    const JSON: &str = r#"[{"file":"src/main/java/shop/Cart.java",
        "lines":[{"line":3,"hits":1},{"line":5,"hits":2},{"line":6,"hits":0},{"line":20,"hits":1}],
        "branches":[{"line":5,"condition":"n > 0","true_hits":2,"false_hits":0},
                    {"line":6,"condition":"n > 10","true_hits":0,"false_hits":0},
                    {"line":6,"condition":"case 1","true_hits":1,"false_hits":1},
                    {"line":20,"condition":"x","true_hits":0,"false_hits":0}]}]"#;

    #[test]
    fn json_restricted_to_span() {
        let doc = CoverageDocument { format: ReportFormat::Json, text: JSON.into() };
        let s = ingest_report(&doc, &focal((4, 10)), None).unwrap();
        assert_eq!((s.branch_covered, s.branch_total), (3, 6));
        assert_eq!((s.line_covered, s.line_total), (1, 2));
        assert_eq!(s.branches[2].branch_id, "6:1");
        let r = uncovered_branches(&s, &focal((4, 10)));
        assert_eq!(r.entries.len(), 2);
        assert_eq!(r.entries[0].missing_side, MissingSide::FalseSide);
        assert_eq!(r.entries[1].missing_side, MissingSide::BothSides);
        assert_eq!(r.entries[1].branch_code, "n > 10");
    }

    #[test]
    fn single_object_and_wrapped_forms() {
        let one = r#"{"file":"shop/Cart.java","lines":[],"branches":[{"line":5,"condition":"a","true_hits":1,"false_hits":1}]}"#;
        let doc = CoverageDocument { format: ReportFormat::Json, text: one.into() };
        let s = ingest_report(&doc, &focal((1, 9)), None).unwrap();
        assert_eq!((s.branch_covered, s.branch_total), (2, 2));
        let wrapped = format!("{{\"files\":[{one}]}}");
        let doc = CoverageDocument { format: ReportFormat::Json, text: wrapped };
        assert!(ingest_report(&doc, &focal((1, 9)), None).is_ok());
    }

    #[test]
    fn missing_and_malformed() {
        let doc = CoverageDocument { format: ReportFormat::Json, text: r#"[{"file":"Other.java"}]"#.into() };
        assert!(matches!(ingest_report(&doc, &focal((1, 9)), None), Err(CoverageError::ReportMissing(_))));
        let doc = CoverageDocument { format: ReportFormat::Json, text: "nope".into() };
        assert!(matches!(ingest_report(&doc, &focal((1, 9)), None), Err(CoverageError::ReportMalformed(_))));
    }

    #[test]
    fn clover_report() {
        let xml = r#"<?xml version="1.0"?><coverage><project><package name="shop">
            <file name="Cart.java" path="src/main/java/shop/Cart.java">
            <line num="2" count="1" type="stmt"/>
            <line num="2" truecount="1" falsecount="0" type="cond"/>
            <line num="3" count="0" type="stmt"/>
            </file></package></project></coverage>"#;
        let src = "class Cart {\n  int add(int n) { if (n  >  0) {\n    return 1; }\n  return 0; }\n}\n";
        let doc = CoverageDocument { format: ReportFormat::Clover, text: xml.into() };
        let s = ingest_report(&doc, &focal((2, 4)), Some(src)).unwrap();
        assert_eq!((s.branch_covered, s.branch_total, s.line_covered, s.line_total), (1, 2, 1, 2));
        assert_eq!(s.branches[0].code_text, "int add(int n) { if (n > 0) {");
    }

    #[test]
    fn standard_thresholds() {
        let mk = |covered: usize, total: usize| {
            let branches = (0..total / 2)
                .map(|i| BranchCoverage {
                    branch_id: format!("{i}:0"),
                    line: i as u32,
                    code_text: "c".into(),
                    true_covered: 2 * i < covered,
                    false_covered: 2 * i + 1 < covered,
                })
                .collect();
            CoverageSnapshot::from_entries(branches, Vec::new())
        };
        let cfg = RunConfig::default();
        assert!(meets_standard(&mk(19, 20), &cfg));
        assert!(!meets_standard(&mk(18, 20), &cfg));
        assert!(meets_standard(&mk(0, 0), &cfg));
    }
}
