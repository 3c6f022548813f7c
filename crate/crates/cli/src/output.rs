//! Deterministic, atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::CliError;

/// Fixed 17 significant digits: round-trips every `f64` and keeps files byte-stable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Sparse triplet listing: `# rows cols nnz`, then `row col value` per entry.
pub fn triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> String {
    let mut out = format!("# {rows} {cols} {}\n", entries.len());
    for &(i, j, v) in entries {
        writeln!(out, "{i} {j} {}", fmt_f64(v)).unwrap();
    }
    out
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut file = std::fs::File::create(&tmp).map_err(io)?;
    file.write_all(contents.as_bytes()).map_err(io)?;
    file.sync_all().map_err(io)?;
    drop(file);
    std::fs::rename(&tmp, dir.join(name)).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, -7.25e-300, 6.02e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_and_triplet_layout() {
        assert_eq!(csv("a,b", [vec![1.0, 0.5]]), "a,b\n1.0000000000000000e0,5.0000000000000000e-1\n");
        let text = triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        assert_eq!(text.lines().next(), Some("# 2 2 2"));
        assert_eq!(text.lines().nth(2), Some("1 1 1.0000000000000000e0"));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "x.txt", "one").unwrap();
        write_atomic(dir.path(), "x.txt", "two").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("x.txt")).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
