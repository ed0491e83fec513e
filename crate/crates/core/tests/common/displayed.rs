//! Incidence matrices of the 3 x 3 cell grid, written out row by row.

pub const GRAD: &str = "\
-1  1  0  0  0  0  0  0  0  0  0  0  0  0  0  0
 0 -1  1  0  0  0  0  0  0  0  0  0  0  0  0  0
 0  0 -1  1  0  0  0  0  0  0  0  0  0  0  0  0
 0  0  0  0 -1  1  0  0  0  0  0  0  0  0  0  0
 0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0  0
 0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0
 0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0
 0  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0
 0  0  0  0  0  0  0  0  0  0 -1  1  0  0  0  0
 0  0  0  0  0  0  0  0  0  0  0  0 -1  1  0  0
 0  0  0  0  0  0  0  0  0  0  0  0  0 -1  1  0
 0  0  0  0  0  0  0  0  0  0  0  0  0  0 -1  1
-1  0  0  0  1  0  0  0  0  0  0  0  0  0  0  0
 0 -1  0  0  0  1  0  0  0  0  0  0  0  0  0  0
 0  0 -1  0  0  0  1  0  0  0  0  0  0  0  0  0
 0  0  0 -1  0  0  0  1  0  0  0  0  0  0  0  0
 0  0  0  0 -1  0  0  0  1  0  0  0  0  0  0  0
 0  0  0  0  0 -1  0  0  0  1  0  0  0  0  0  0
 0  0  0  0  0  0 -1  0  0  0  1  0  0  0  0  0
 0  0  0  0  0  0  0 -1  0  0  0  1  0  0  0  0
 0  0  0  0  0  0  0  0 -1  0  0  0  1  0  0  0
 0  0  0  0  0  0  0  0  0 -1  0  0  0  1  0  0
 0  0  0  0  0  0  0  0  0  0 -1  0  0  0  1  0
 0  0  0  0  0  0  0  0  0  0  0 -1  0  0  0  1
";

pub const CURL: &str = "\
 1  0  0 -1  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0  0  0
 0  1  0  0 -1  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0  0
 0  0  1  0  0 -1  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0
 0  0  0  1  0  0 -1  0  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0
 0  0  0  0  1  0  0 -1  0  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0
 0  0  0  0  0  1  0  0 -1  0  0  0  0  0  0  0  0  0 -1  1  0  0  0  0
 0  0  0  0  0  0  1  0  0 -1  0  0  0  0  0  0  0  0  0  0 -1  1  0  0
 0  0  0  0  0  0  0  1  0  0 -1  0  0  0  0  0  0  0  0  0  0 -1  1  0
 0  0  0  0  0  0  0  0  1  0  0 -1  0  0  0  0  0  0  0  0  0  0 -1  1
";

pub const REDUCED_GRAD: &str = "\
 1  0  0  0
-1  1  0  0
 0 -1  0  0
 0  0  1  0
 0  0 -1  1
 0  0  0 -1
 1  0  0  0
 0  1  0  0
-1  0  1  0
 0 -1  0  1
 0  0 -1  0
 0  0  0 -1
";

pub const DIV: &str = "\
-1  1  0  0  0  0  0  0  0  0  0  0 -1  0  0  1  0  0  0  0  0  0  0  0
 0 -1  1  0  0  0  0  0  0  0  0  0  0 -1  0  0  1  0  0  0  0  0  0  0
 0  0 -1  1  0  0  0  0  0  0  0  0  0  0 -1  0  0  1  0  0  0  0  0  0
 0  0  0  0 -1  1  0  0  0  0  0  0  0  0  0 -1  0  0  1  0  0  0  0  0
 0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0  0 -1  0  0  1  0  0  0  0
 0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0  0 -1  0  0  1  0  0  0
 0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0 -1  0  0  1  0  0
 0  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0 -1  0  0  1  0
 0  0  0  0  0  0  0  0  0  0 -1  1  0  0  0  0  0  0  0  0 -1  0  0  1
";

pub const STREAM: &str = "\
-1  0  0  0  1  0  0  0  0  0  0  0  0  0  0  0
 0 -1  0  0  0  1  0  0  0  0  0  0  0  0  0  0
 0  0 -1  0  0  0  1  0  0  0  0  0  0  0  0  0
 0  0  0 -1  0  0  0  1  0  0  0  0  0  0  0  0
 0  0  0  0 -1  0  0  0  1  0  0  0  0  0  0  0
 0  0  0  0  0 -1  0  0  0  1  0  0  0  0  0  0
 0  0  0  0  0  0 -1  0  0  0  1  0  0  0  0  0
 0  0  0  0  0  0  0 -1  0  0  0  1  0  0  0  0
 0  0  0  0  0  0  0  0 -1  0  0  0  1  0  0  0
 0  0  0  0  0  0  0  0  0 -1  0  0  0  1  0  0
 0  0  0  0  0  0  0  0  0  0 -1  0  0  0  1  0
 0  0  0  0  0  0  0  0  0  0  0 -1  0  0  0  1
 1 -1  0  0  0  0  0  0  0  0  0  0  0  0  0  0
 0  1 -1  0  0  0  0  0  0  0  0  0  0  0  0  0
 0  0  1 -1  0  0  0  0  0  0  0  0  0  0  0  0
 0  0  0  0  1 -1  0  0  0  0  0  0  0  0  0  0
 0  0  0  0  0  1 -1  0  0  0  0  0  0  0  0  0
 0  0  0  0  0  0  1 -1  0  0  0  0  0  0  0  0
 0  0  0  0  0  0  0  0  1 -1  0  0  0  0  0  0
 0  0  0  0  0  0  0  0  0  1 -1  0  0  0  0  0
 0  0  0  0  0  0  0  0  0  0  1 -1  0  0  0  0
 0  0  0  0  0  0  0  0  0  0  0  0  1 -1  0  0
 0  0  0  0  0  0  0  0  0  0  0  0  0  1 -1  0
 0  0  0  0  0  0  0  0  0  0  0  0  0  0  1 -1
";

/// Rows of whitespace-separated integers.
pub fn parse(text: &str) -> Vec<Vec<i8>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect()
}
