//! The built-in class library visible to programs: a slice of `java.lang`,
//! `java.util`, `java.io` and JUnit 4.

/// (fully qualified name, superclass, is_interface)
pub const CLASSES: &[(&str, Option<&str>, bool)] = &[
    ("java.lang.Object", None, false),
    ("java.lang.String", Some("java.lang.Object"), false),
    ("java.lang.CharSequence", None, true),
    ("java.lang.Comparable", None, true),
    ("java.lang.Iterable", None, true),
    ("java.lang.Number", Some("java.lang.Object"), false),
    ("java.lang.Integer", Some("java.lang.Number"), false),
    ("java.lang.Long", Some("java.lang.Number"), false),
    ("java.lang.Short", Some("java.lang.Number"), false),
    ("java.lang.Byte", Some("java.lang.Number"), false),
    ("java.lang.Double", Some("java.lang.Number"), false),
    ("java.lang.Float", Some("java.lang.Number"), false),
    ("java.lang.Boolean", Some("java.lang.Object"), false),
    ("java.lang.Character", Some("java.lang.Object"), false),
    ("java.lang.Math", Some("java.lang.Object"), false),
    ("java.lang.StringBuilder", Some("java.lang.Object"), false),
    ("java.lang.System", Some("java.lang.Object"), false),
    ("java.lang.Override", None, true),
    ("java.lang.Throwable", Some("java.lang.Object"), false),
    ("java.lang.Exception", Some("java.lang.Throwable"), false),
    ("java.lang.Error", Some("java.lang.Throwable"), false),
    ("java.lang.AssertionError", Some("java.lang.Error"), false),
    ("java.lang.StackOverflowError", Some("java.lang.Error"), false),
    ("java.lang.RuntimeException", Some("java.lang.Exception"), false),
    ("java.lang.IllegalArgumentException", Some("java.lang.RuntimeException"), false),
    ("java.lang.NumberFormatException", Some("java.lang.IllegalArgumentException"), false),
    ("java.lang.IllegalStateException", Some("java.lang.RuntimeException"), false),
    ("java.lang.NullPointerException", Some("java.lang.RuntimeException"), false),
    ("java.lang.ArithmeticException", Some("java.lang.RuntimeException"), false),
    ("java.lang.IndexOutOfBoundsException", Some("java.lang.RuntimeException"), false),
    ("java.lang.ArrayIndexOutOfBoundsException", Some("java.lang.IndexOutOfBoundsException"), false),
    ("java.lang.StringIndexOutOfBoundsException", Some("java.lang.IndexOutOfBoundsException"), false),
    ("java.lang.UnsupportedOperationException", Some("java.lang.RuntimeException"), false),
    ("java.lang.ClassCastException", Some("java.lang.RuntimeException"), false),
    ("java.lang.NegativeArraySizeException", Some("java.lang.RuntimeException"), false),
    ("java.lang.CloneNotSupportedException", Some("java.lang.Exception"), false),
    ("java.lang.InterruptedException", Some("java.lang.Exception"), false),
    ("java.io.IOException", Some("java.lang.Exception"), false),
    ("java.io.FileNotFoundException", Some("java.io.IOException"), false),
    ("java.util.NoSuchElementException", Some("java.lang.RuntimeException"), false),
    ("java.util.ConcurrentModificationException", Some("java.lang.RuntimeException"), false),
    ("java.util.Collection", None, true),
    ("java.util.List", None, true),
    ("java.util.ArrayList", Some("java.lang.Object"), false),
    ("java.util.LinkedList", Some("java.lang.Object"), false),
    ("java.util.Map", None, true),
    ("java.util.HashMap", Some("java.lang.Object"), false),
    ("java.util.LinkedHashMap", Some("java.util.HashMap"), false),
    ("java.util.TreeMap", Some("java.lang.Object"), false),
    ("java.util.Set", None, true),
    ("java.util.HashSet", Some("java.lang.Object"), false),
    ("java.util.LinkedHashSet", Some("java.util.HashSet"), false),
    ("java.util.Arrays", Some("java.lang.Object"), false),
    ("java.util.Collections", Some("java.lang.Object"), false),
    ("java.util.Objects", Some("java.lang.Object"), false),
    ("org.junit.Test", None, true),
    ("org.junit.Before", None, true),
    ("org.junit.After", None, true),
    ("org.junit.BeforeClass", None, true),
    ("org.junit.AfterClass", None, true),
    ("org.junit.Ignore", None, true),
    ("org.junit.Assert", Some("java.lang.Object"), false),
    ("org.junit.ComparisonFailure", Some("java.lang.AssertionError"), false),
];

/// Static methods of `org.junit.Assert` reachable via static import.
pub const ASSERT_METHODS: &[&str] = &[
    "assertEquals",
    "assertNotEquals",
    "assertTrue",
    "assertFalse",
    "assertNull",
    "assertNotNull",
    "assertSame",
    "assertNotSame",
    "assertArrayEquals",
    "fail",
];

pub fn lookup(fqn: &str) -> Option<(&'static str, Option<&'static str>, bool)> {
    CLASSES.iter().find(|(n, _, _)| *n == fqn).copied()
}

pub fn package_exists(pkg: &str) -> bool {
    CLASSES.iter().any(|(n, _, _)| n.rsplit_once('.').map(|(p, _)| p == pkg).unwrap_or(false))
}

pub fn in_package(pkg: &str, simple: &str) -> Option<&'static str> {
    CLASSES.iter().map(|c| c.0).find(|n| n.rsplit_once('.').map(|(p, s)| p == pkg && s == simple).unwrap_or(false))
}

pub fn superclass_of(fqn: &str) -> Option<&'static str> {
    lookup(fqn).and_then(|c| c.1)
}

pub fn is_exception(fqn: &str) -> bool {
    let mut cur = Some(fqn);
    while let Some(c) = cur {
        if c == "java.lang.Throwable" {
            return true;
        }
        cur = superclass_of(c);
    }
    false
}

/// Return type names of well-known library instance methods, for the checker.
pub fn instance_return(class: &str, method: &str) -> Option<&'static str> {
    let r = match (class, method) {
        ("java.lang.String", "length" | "indexOf" | "lastIndexOf" | "compareTo" | "hashCode") => "int",
        ("java.lang.String", "charAt") => "char",
        (
            "java.lang.String",
            "substring" | "trim" | "toUpperCase" | "toLowerCase" | "replace" | "concat" | "toString" | "strip" | "repeat",
        ) => "java.lang.String",
        ("java.lang.String", "equals" | "equalsIgnoreCase" | "contains" | "startsWith" | "endsWith" | "isEmpty" | "matches") => "boolean",
        ("java.lang.StringBuilder", "toString") => "java.lang.String",
        ("java.lang.StringBuilder", "length") => "int",
        ("java.lang.StringBuilder", "append" | "reverse" | "insert") => "java.lang.StringBuilder",
        (_, "getMessage") => "java.lang.String",
        (_, "size") => "int",
        (_, "isEmpty" | "contains" | "containsKey" | "containsValue") => "boolean",
        _ => return None,
    };
    Some(r)
}

pub fn static_return(class: &str, method: &str) -> Option<&'static str> {
    let r = match (class, method) {
        ("java.lang.Integer", "parseInt" | "compare") => "int",
        ("java.lang.Long", "parseLong") => "long",
        ("java.lang.Double", "parseDouble") => "double",
        ("java.lang.Boolean", "parseBoolean") => "boolean",
        ("java.lang.String", "valueOf" | "join") => "java.lang.String",
        ("java.lang.Integer" | "java.lang.Long" | "java.lang.Double", "toString") => "java.lang.String",
        ("java.lang.Character", "isDigit" | "isLetter" | "isUpperCase" | "isLowerCase" | "isWhitespace" | "isLetterOrDigit") => "boolean",
        ("java.lang.Character", "toUpperCase" | "toLowerCase") => "char",
        ("java.lang.Math", "sqrt" | "pow" | "floor" | "ceil") => "double",
        ("java.util.Objects", "equals" | "isNull" | "nonNull") => "boolean",
        _ => return None,
    };
    Some(r)
}

/// Static fields of library classes.
pub fn static_field(class: &str, field: &str) -> Option<&'static str> {
    let r = match (class, field) {
        ("java.lang.Integer", "MAX_VALUE" | "MIN_VALUE") => "int",
        ("java.lang.Long", "MAX_VALUE" | "MIN_VALUE") => "long",
        ("java.lang.Double", "MAX_VALUE" | "MIN_VALUE" | "NaN" | "POSITIVE_INFINITY" | "NEGATIVE_INFINITY") => "double",
        ("java.lang.Math", "PI" | "E") => "double",
        ("java.lang.System", "out" | "err") => "java.io.PrintStream",
        ("java.lang.Boolean", "TRUE" | "FALSE") => "java.lang.Boolean",
        _ => return None,
    };
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exception_hierarchy() {
        assert!(is_exception("java.lang.NumberFormatException"));
        assert!(!is_exception("java.util.HashMap"));
        assert_eq!(in_package("java.util", "HashMap"), Some("java.util.HashMap"));
        assert!(package_exists("org.junit"));
        assert!(!package_exists("org.junit.jupiter"));
    }
}
