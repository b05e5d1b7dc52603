use std::fs;
use std::path::Path;

use minijava::{compile_workspace, test_workspace};

fn write(root: &Path, rel: &str, text: &str) {
    let p = root.join(rel);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(p, text).unwrap();
}

const SHAPES: &str = r#"package geo;

import java.util.ArrayList;
import java.util.HashMap;
import java.util.List;
import java.util.Map;

public class Shapes {
    private final Map<String, Integer> counts = new HashMap<>();
    private static int created = 0;

    public Shapes() {
        created++;
    }

    public static int created() {
        return created;
    }

    public int sides(String name) {
        switch (name) {
            case "triangle":
                return 3;
            case "square":
            case "rectangle":
                return 4;
            default:
                throw new IllegalArgumentException("unknown shape: " + name);
        }
    }

    public void record(String name) {
        Integer c = counts.get(name);
        counts.put(name, c == null ? 1 : c + 1);
    }

    public int count(String name) {
        return counts.getOrDefault(name, 0);
    }

    public List<String> names() {
        List<String> out = new ArrayList<>(counts.keySet());
        java.util.Collections.sort(out);
        return out;
    }

    public int depth(int n) {
        return depth(n + 1);
    }

    public void spin() {
        while (true) {
        }
    }

    public double ratio(int a, int b) {
        return (double) a / b;
    }
}
"#;

fn workspace(test: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "src/main/java/geo/Shapes.java", SHAPES);
    write(dir.path(), "src/test/java/geo/ShapesTest.java", test);
    dir
}

fn test_class(body: &str) -> String {
    format!(
        "package geo;\n\nimport org.junit.Before;\nimport org.junit.Test;\nimport static org.junit.Assert.*;\n\npublic class ShapesTest {{\n    private Shapes s;\n\n    @Before\n    public void setUp() {{\n        s = new Shapes();\n    }}\n{body}}}\n"
    )
}

#[test]
fn passing_suite_reports_ok_and_coverage() {
    let dir = workspace(&test_class(
        "    @Test\n    public void sides() {\n        assertEquals(3, s.sides(\"triangle\"));\n        assertEquals(4, s.sides(\"square\"));\n    }\n\n    @Test\n    public void records() {\n        s.record(\"a\");\n        s.record(\"a\");\n        s.record(\"b\");\n        assertEquals(2, s.count(\"a\"));\n        assertEquals(\"[a, b]\", s.names().toString());\n        assertEquals(0.5, s.ratio(1, 2), 1e-9);\n    }\n",
    ));
    let report = test_workspace(dir.path(), "geo.ShapesTest").unwrap();
    assert!(report.compile.success(), "{}", report.compile.log);
    let run = report.run.unwrap();
    assert!(run.log.ends_with("\nOK (2 tests)\n\n"), "{}", run.log);
    let file = &run.coverage.files["src/main/java/geo/Shapes.java"];
    let arms: Vec<_> = file.branches.iter().filter(|b| b.condition.starts_with("case") || b.condition == "default").collect();
    assert_eq!(arms.len(), 3);
    assert_eq!((arms[0].true_hits, arms[0].false_hits), (1, 1));
    assert_eq!((arms[1].true_hits, arms[1].false_hits), (1, 1));
    assert_eq!((arms[2].true_hits, arms[2].false_hits), (0, 2));
    let ternary = file.branches.iter().find(|b| b.condition == "c == null").unwrap();
    assert_eq!((ternary.true_hits, ternary.false_hits), (2, 1));
}

#[test]
fn failures_render_like_junit() {
    let dir = workspace(&test_class(
        "    @Test\n    public void unknown() {\n        s.sides(\"circle\");\n    }\n\n    @Test(expected = IllegalStateException.class)\n    public void wrongExpected() {\n        s.sides(\"circle\");\n    }\n\n    @Test\n    public void caught() {\n        try {\n            s.sides(\"hexagon\");\n        } catch (NullPointerException e) {\n            fail(\"npe\");\n        }\n    }\n\n    @Test\n    public void deep() {\n        s.depth(0);\n    }\n\n    @Test\n    public void spins() {\n        s.spin();\n    }\n\n    @Test\n    public void notNull() {\n        assertNotNull(null);\n    }\n",
    ));
    let run = test_workspace(dir.path(), "ShapesTest").unwrap().run.unwrap();
    let log = &run.log;
    assert!(log.contains("Tests run: 6,  Failures: 6"), "{log}");
    assert!(log.contains("1) unknown(geo.ShapesTest)\njava.lang.IllegalArgumentException: unknown shape: circle\n\tat geo.Shapes.sides(Shapes.java:28)\n\tat geo.ShapesTest.unknown(ShapesTest.java:16)\n"), "{log}");
    assert!(log.contains(
        "java.lang.Exception: Unexpected exception, expected<java.lang.IllegalStateException> but was<java.lang.IllegalArgumentException>"
    ));
    assert!(log.contains("Caused by: java.lang.IllegalArgumentException: unknown shape: circle"));
    assert!(log.contains("3) caught(geo.ShapesTest)\njava.lang.IllegalArgumentException: unknown shape: hexagon\n\tat geo.Shapes.sides(Shapes.java:28)\n\tat geo.ShapesTest.caught(ShapesTest.java:27)\n"), "{log}");
    assert!(log.contains("4) deep(geo.ShapesTest)\njava.lang.StackOverflowError\n\tat geo.Shapes.depth(Shapes.java:48)"));
    assert!(log.contains("org.junit.runners.model.TestTimedOutException"));
    assert!(log.contains("java.lang.AssertionError\n\tat org.junit.Assert.fail(Assert.java:86)\n\tat org.junit.Assert.assertTrue(Assert.java:41)\n\tat org.junit.Assert.assertNotNull(Assert.java:712)"));
}

#[test]
fn compile_errors_follow_javac_layout() {
    let dir = workspace(&test_class("    @Test\n    public void t() {\n        s.area();\n    }\n"));
    let out = compile_workspace(dir.path()).unwrap();
    assert_eq!(out.errors, 1);
    assert_eq!(
        out.log,
        "src/test/java/geo/ShapesTest.java:16: error: cannot find symbol\n        s.area();\n         ^\n  symbol:   method area()\n  location: variable s of type Shapes\n1 error\n"
    );
    let report = test_workspace(dir.path(), "geo.ShapesTest").unwrap();
    assert!(report.run.is_none());
}

#[test]
fn syntax_errors_suppress_semantic_checks() {
    let dir = workspace(&test_class("    @Test\n    public void t() {\n        s.area()\n    }\n"));
    let out = compile_workspace(dir.path()).unwrap();
    assert_eq!(out.errors, 1);
    assert!(out.log.starts_with("src/test/java/geo/ShapesTest.java:16: error: ';' expected\n"), "{}", out.log);
}

#[test]
fn class_without_tests_is_an_initialization_error() {
    let dir = workspace("package geo;\n\npublic class ShapesTest {\n}\n");
    let run = test_workspace(dir.path(), "geo.ShapesTest").unwrap().run.unwrap();
    assert!(run.log.contains("1) initializationError(geo.ShapesTest)\njava.lang.Exception: No runnable methods"));
}
