//! Plain-text phase-space snapshots.
//!
//! ```text
//! vfp-snapshot v1 <dim> <nx> <nv> <vmax> <period> <time>
//! <value>        one per line, row-major, 17 significant digits
//! ```

use std::fmt::Write as _;
use std::path::Path;

use vfp_core::{DistField, PhaseGrid};

use crate::error::{Error, Result};

const MAGIC: &str = "vfp-snapshot";
const VERSION: &str = "v1";

pub fn format_snapshot(field: &DistField, time: f64) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(24 * (g.len() + 1));
    let _ = writeln!(
        out,
        "{MAGIC} {VERSION} {} {} {} {:e} {:e} {:e}",
        g.dim(),
        g.nx(),
        g.nv(),
        g.vmax(),
        g.period(),
        time
    );
    for v in field.values() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

/// Parses a snapshot without the sign check, so corrupted data can still be
/// audited. `path` only labels errors.
pub fn parse_snapshot(text: &str, path: &Path) -> Result<(DistField, f64)> {
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 8 || parts[0] != MAGIC || parts[1] != VERSION {
        return Err(bad(
            1,
            format!("expected `{MAGIC} {VERSION} dim nx nv vmax period time`"),
        ));
    }
    let int = |k: usize| {
        parts[k]
            .parse::<usize>()
            .map_err(|e| bad(1, format!("{}: {e}", parts[k])))
    };
    let real = |k: usize| {
        parts[k]
            .parse::<f64>()
            .map_err(|e| bad(1, format!("{}: {e}", parts[k])))
    };
    let grid = PhaseGrid::new(int(2)?, int(3)?, int(4)?, real(5)?, real(6)?).map_err(|e| bad(1, e.to_string()))?;
    let time = real(7)?;
    let mut values = Vec::with_capacity(grid.len());
    for (k, line) in lines.enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        values.push(s.parse::<f64>().map_err(|e| bad(k + 2, format!("{s}: {e}")))?);
    }
    if values.len() != grid.len() {
        return Err(bad(
            0,
            format!("expected {} values, found {}", grid.len(), values.len()),
        ));
    }
    Ok((DistField::from_raw(grid, values)?, time))
}

pub fn write_snapshot(path: &Path, field: &DistField, time: f64) -> Result<()> {
    std::fs::write(path, format_snapshot(field, time)).map_err(Error::io(path))
}

/// Reads a snapshot; the values are not sign-checked.
pub fn read_snapshot(path: &Path) -> Result<(DistField, f64)> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    parse_snapshot(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let g = PhaseGrid::new(1, 4, 8, 8.0, 1.0).unwrap();
        let f = DistField::sample(g, |x, v| (1.0 + x[0]).exp() / (3.0 + v[0] * v[0]) * 1e-3f64.powf(v[0])).unwrap();
        let text = format_snapshot(&f, 0.1 + 0.2);
        let (back, t) = parse_snapshot(&text, Path::new("mem")).unwrap();
        assert_eq!(t.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back.grid(), f.grid());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(text.starts_with("vfp-snapshot v1 1 4 8 "));
    }

    #[test]
    fn rejects_malformed() {
        let p = Path::new("mem");
        assert!(parse_snapshot("", p).is_err());
        assert!(parse_snapshot("vfp-snapshot v2 1 4 8 8 1 0\n", p).is_err());
        let short = "vfp-snapshot v1 1 4 8 8 1 0\n1.0\n";
        assert!(matches!(parse_snapshot(short, p), Err(Error::Parse { .. })));
        let mut text = String::from("vfp-snapshot v1 1 4 8 8 1 0\n");
        for k in 0..32 {
            text.push_str(if k == 5 { "abc\n" } else { "1.0\n" });
        }
        match parse_snapshot(&text, p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn keeps_negative_values_for_auditing() {
        let mut text = String::from("vfp-snapshot v1 1 4 8 8 1 0\n");
        for k in 0..32 {
            text.push_str(if k == 3 { "-1e-3\n" } else { "1.0\n" });
        }
        let (f, _) = parse_snapshot(&text, Path::new("mem")).unwrap();
        assert!(f.validate().is_err());
    }
}
