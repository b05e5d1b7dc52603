//! Statement and branch coverage for non-test sources, with neutral JSON and
//! OpenClover XML renderings.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::ast::*;
use crate::project::Project;

/// Identifies a branch point inside one file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchKey {
    /// A boolean condition, keyed by its byte offset.
    Cond(usize),
    /// One arm group of a switch statement.
    Arm { line: u32, col: u32, idx: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchCoverage {
    pub line: u32,
    pub condition: String,
    pub true_hits: u64,
    pub false_hits: u64,
}

#[derive(Debug, Clone, Default)]
pub struct FileCoverage {
    pub lines: BTreeMap<u32, u64>,
    pub branches: Vec<BranchCoverage>,
    index: HashMap<BranchKey, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Coverage {
    pub files: BTreeMap<String, FileCoverage>,
}

#[derive(Serialize)]
struct LineDoc {
    line: u32,
    hits: u64,
}

#[derive(Serialize)]
struct FileDoc<'a> {
    file: &'a str,
    lines: Vec<LineDoc>,
    branches: &'a [BranchCoverage],
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn walk_expr(e: &Expr, f: &mut dyn FnMut(&Expr)) {
    f(e);
    match &e.kind {
        ExprKind::Field { target, .. } => walk_expr(target, f),
        ExprKind::Call { target, args, .. } => {
            if let Some(t) = target {
                walk_expr(t, f);
            }
            args.iter().for_each(|a| walk_expr(a, f));
        }
        ExprKind::New { args, .. } | ExprKind::ArrayLit(args) => args.iter().for_each(|a| walk_expr(a, f)),
        ExprKind::NewArray { dims, init, .. } => {
            dims.iter().for_each(|a| walk_expr(a, f));
            if let Some(items) = init {
                items.iter().for_each(|a| walk_expr(a, f));
            }
        }
        ExprKind::Index { target, index } => {
            walk_expr(target, f);
            walk_expr(index, f);
        }
        ExprKind::Unary { operand, .. } => walk_expr(operand, f),
        ExprKind::IncDec { target, .. } => walk_expr(target, f),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::InstanceOf { expr, .. } | ExprKind::Cast { expr, .. } => walk_expr(expr, f),
        ExprKind::Cond { cond, then, els } => {
            walk_expr(cond, f);
            walk_expr(then, f);
            walk_expr(els, f);
        }
        ExprKind::Assign { target, value, .. } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        ExprKind::Lit(_) | ExprKind::Name(_) | ExprKind::This | ExprKind::ClassLit(_) => {}
    }
}

struct Collector<'a> {
    src: &'a str,
    file: FileCoverage,
}

impl Collector<'_> {
    fn text(&self, e: &Expr) -> String {
        normalize(self.src.get(e.start..e.end).unwrap_or(""))
    }

    fn branch(&mut self, key: BranchKey, line: u32, condition: String) {
        if self.file.index.contains_key(&key) {
            return;
        }
        self.file.index.insert(key, self.file.branches.len());
        self.file.branches.push(BranchCoverage { line, condition, true_hits: 0, false_hits: 0 });
    }

    fn cond(&mut self, e: &Expr) {
        let text = self.text(e);
        self.branch(BranchKey::Cond(e.start), e.line, text);
    }

    fn expr(&mut self, e: &Expr) {
        let mut ternaries = Vec::new();
        walk_expr(e, &mut |x| {
            if let ExprKind::Cond { cond, .. } = &x.kind {
                ternaries.push((**cond).clone());
            }
        });
        for c in &ternaries {
            self.cond(c);
        }
    }

    fn block(&mut self, b: &Block) {
        b.stmts.iter().for_each(|s| self.stmt(s));
    }

    fn stmt(&mut self, s: &Stmt) {
        if !matches!(s.kind, StmtKind::Block(_) | StmtKind::Try { .. } | StmtKind::Empty) {
            self.file.lines.entry(s.line).or_insert(0);
        }
        match &s.kind {
            StmtKind::Block(b) => self.block(b),
            StmtKind::Local(decls) => {
                for d in decls {
                    if let Some(i) = &d.init {
                        self.expr(i);
                    }
                }
            }
            StmtKind::Expr(e) | StmtKind::Throw(e) => self.expr(e),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            StmtKind::If { cond, then, els } => {
                self.cond(cond);
                self.expr(cond);
                self.stmt(then);
                if let Some(e) = els {
                    self.stmt(e);
                }
            }
            StmtKind::While { cond, body } | StmtKind::DoWhile { body, cond } => {
                self.cond(cond);
                self.expr(cond);
                self.stmt(body);
            }
            StmtKind::For { init, cond, update, body } => {
                init.iter().for_each(|i| self.stmt(i));
                if let Some(c) = cond {
                    self.cond(c);
                    self.expr(c);
                }
                update.iter().for_each(|u| self.expr(u));
                self.stmt(body);
            }
            StmtKind::ForEach { iter, body, .. } => {
                self.expr(iter);
                self.stmt(body);
            }
            StmtKind::Try { body, catches, finally } => {
                self.block(body);
                catches.iter().for_each(|c| self.block(&c.body));
                if let Some(f) = finally {
                    self.block(f);
                }
            }
            StmtKind::Switch { scrutinee, arms } => {
                self.expr(scrutinee);
                for (idx, a) in arms.iter().enumerate() {
                    self.branch(BranchKey::Arm { line: s.line, col: s.col, idx }, a.line, normalize(&a.text));
                    a.body.iter().for_each(|st| self.stmt(st));
                }
            }
            StmtKind::CtorCall { args, .. } => args.iter().for_each(|a| self.expr(a)),
            StmtKind::Break | StmtKind::Continue | StmtKind::Empty => {}
        }
    }
}

impl Coverage {
    /// Registers every countable line and branch of the project's non-test sources.
    pub fn instrument(project: &Project) -> Coverage {
        let mut files = BTreeMap::new();
        for unit in &project.units {
            let Some(src) = project.file(&unit.file) else { continue };
            if src.is_test {
                continue;
            }
            let mut c = Collector { src: &src.text, file: FileCoverage::default() };
            for class in &unit.classes {
                for f in &class.fields {
                    if let Some(i) = &f.init {
                        c.expr(i);
                    }
                }
                for m in &class.methods {
                    if let Some(b) = &m.body {
                        c.block(b);
                    }
                }
            }
            files.insert(unit.file.clone(), c.file);
        }
        Coverage { files }
    }

    pub fn hit_line(&mut self, file: &str, line: u32) {
        if let Some(f) = self.files.get_mut(file) {
            *f.lines.entry(line).or_insert(0) += 1;
        }
    }

    pub fn hit_branch(&mut self, file: &str, key: BranchKey, taken: bool) {
        let Some(f) = self.files.get_mut(file) else { return };
        let Some(&i) = f.index.get(&key) else { return };
        let b = &mut f.branches[i];
        if taken {
            b.true_hits += 1;
        } else {
            b.false_hits += 1;
        }
    }

    /// Neutral JSON: an array with one document per source file.
    pub fn to_json(&self) -> String {
        let docs: Vec<FileDoc> = self
            .files
            .iter()
            .map(|(name, f)| FileDoc {
                file: name,
                lines: f.lines.iter().map(|(&line, &hits)| LineDoc { line, hits }).collect(),
                branches: &f.branches,
            })
            .collect();
        serde_json::to_string_pretty(&docs).expect("coverage serializes")
    }

    /// OpenClover XML report.
    pub fn to_clover(&self) -> String {
        let mut packages: BTreeMap<String, Vec<(&String, &FileCoverage)>> = BTreeMap::new();
        for (name, f) in &self.files {
            let pkg = package_of(name);
            packages.entry(pkg).or_default().push((name, f));
        }
        let (mut st, mut cst, mut cond, mut ccond) = (0, 0, 0, 0);
        let mut body = String::new();
        for (pkg, files) in &packages {
            let _ = writeln!(body, "    <package name=\"{}\">", xml_escape(pkg));
            for (name, f) in files {
                let fs = f.lines.len();
                let fcs = f.lines.values().filter(|&&h| h > 0).count();
                let fc = f.branches.len() * 2;
                let fcc: usize = f.branches.iter().map(|b| (b.true_hits > 0) as usize + (b.false_hits > 0) as usize).sum();
                st += fs;
                cst += fcs;
                cond += fc;
                ccond += fcc;
                let simple = name.rsplit('/').next().unwrap_or(name);
                let _ = writeln!(body, "      <file name=\"{}\" path=\"{}\">", xml_escape(simple), xml_escape(name));
                let _ = writeln!(
                    body,
                    "        <metrics statements=\"{fs}\" coveredstatements=\"{fcs}\" conditionals=\"{fc}\" coveredconditionals=\"{fcc}\"/>"
                );
                let mut entries: Vec<(u32, String)> =
                    f.lines.iter().map(|(l, h)| (*l, format!("        <line num=\"{l}\" count=\"{h}\" type=\"stmt\"/>"))).collect();
                for b in &f.branches {
                    entries.push((
                        b.line,
                        format!(
                            "        <line num=\"{}\" truecount=\"{}\" falsecount=\"{}\" type=\"cond\"/>",
                            b.line, b.true_hits, b.false_hits
                        ),
                    ));
                }
                entries.sort_by_key(|e| e.0);
                for (_, e) in entries {
                    body.push_str(&e);
                    body.push('\n');
                }
                body.push_str("      </file>\n");
            }
            body.push_str("    </package>\n");
        }
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<coverage generated=\"0\" clover=\"4.4.1\">\n  <project timestamp=\"0\">\n",
        );
        let _ = writeln!(
            out,
            "    <metrics statements=\"{st}\" coveredstatements=\"{cst}\" conditionals=\"{cond}\" coveredconditionals=\"{ccond}\"/>"
        );
        out.push_str(&body);
        out.push_str("  </project>\n</coverage>\n");
        out
    }
}

fn package_of(path: &str) -> String {
    let dir = path.rsplit_once('/').map(|(d, _)| d).unwrap_or("");
    let dir = dir.split_once("src/main/java").map(|(_, rest)| rest).unwrap_or(dir);
    let pkg = dir.trim_matches('/').replace('/', ".");
    if pkg.is_empty() {
        "default-pkg".into()
    } else {
        pkg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::project::SourceFile;
    use std::path::PathBuf;

    fn project(src: &str) -> Project {
        let files = vec![SourceFile { rel_path: "src/main/java/p/A.java".into(), text: src.into(), is_test: false }];
        Project::from_files(PathBuf::from("."), files)
    }

    #[test]
    fn registers_conditions_and_arms() {
        let p = project(
            "package p;\npublic class A {\n  int f(int x) {\n    if (x > 0 &&\n        x < 10) { return 1; }\n    switch (x) { case 1: case 2: return 2; default: return x > 5 ? 3 : 4; }\n  }\n}\n",
        );
        let c = Coverage::instrument(&p);
        let f = &c.files["src/main/java/p/A.java"];
        let conds: Vec<_> = f.branches.iter().map(|b| b.condition.as_str()).collect();
        assert_eq!(conds, vec!["x > 0 && x < 10", "case 1, case 2", "default", "x > 5"]);
        assert_eq!(f.lines.keys().copied().collect::<Vec<_>>(), vec![4, 5, 6]);
    }

    #[test]
    fn clover_has_cond_lines() {
        let p = project("package p;\npublic class A {\n  int f(int x) {\n    if (x > 0) { return 1; }\n    return 0;\n  }\n}\n");
        let mut c = Coverage::instrument(&p);
        c.hit_line("src/main/java/p/A.java", 4);
        c.hit_branch("src/main/java/p/A.java", BranchKey::Cond(p.files[0].text.find("x > 0").unwrap()), true);
        let xml = c.to_clover();
        assert!(xml.contains("<line num=\"4\" truecount=\"1\" falsecount=\"0\" type=\"cond\"/>"));
        assert!(xml.contains("<package name=\"p\">"));
        let json: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(json[0]["branches"][0]["true_hits"], 1);
    }
}
