//! Plain-text field snapshots.
//!
//! The first line is `MARANGONI-FIELD v1 <field> <nx> <ny> <lx> <ly> <t>`,
//! then one line per grid row with 17 significant digits per value.
//! Cell fields have `ny` rows of `nx` values; the x-velocity has `ny`
//! rows of `nx + 1` and the y-velocity `ny + 1` rows of `nx`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{CellField, Grid};
use crate::state::State;

pub const MAGIC: &str = "MARANGONI-FIELD";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line 1: expected '{MAGIC} v1' header, found '{found}'")]
    Magic { found: String },
    #[error("line 1: malformed header field '{field}'")]
    Header { field: &'static str },
    #[error("unknown field name '{0}'")]
    UnknownField(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    Columns { line: usize, expected: usize, found: usize },
    #[error("expected {expected} data rows, found {found}")]
    Rows { expected: usize, found: usize },
    #[error("line {line}: '{token}' is not a number")]
    NotNumeric { line: usize, token: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Cell,
    U,
    V,
}

pub fn field_kind(name: &str) -> Option<FieldKind> {
    match name {
        "phi" | "theta" | "p" => Some(FieldKind::Cell),
        "u" => Some(FieldKind::U),
        "v" => Some(FieldKind::V),
        _ => None,
    }
}

fn shape(kind: FieldKind, g: &Grid) -> (usize, usize) {
    match kind {
        FieldKind::Cell => (g.ny, g.nx),
        FieldKind::U => (g.ny, g.nx + 1),
        FieldKind::V => (g.ny + 1, g.nx),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: String,
    pub grid: Grid,
    pub t: f64,
    /// Row-major values, x fastest.
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn render(&self) -> String {
        let g = &self.grid;
        let kind = field_kind(&self.field).unwrap_or(FieldKind::Cell);
        let (_, cols) = shape(kind, g);
        let mut s = format!("{MAGIC} v1 {} {} {} {} {} {}\n", self.field, g.nx, g.ny, g.lx, g.ly, self.t);
        for row in self.values.chunks(cols) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, SnapshotError> {
        let mut lines = text.lines();
        let head = lines.next().unwrap_or("");
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks.len() != 8 || toks[0] != MAGIC || toks[1] != "v1" {
            return Err(SnapshotError::Magic { found: head.to_string() });
        }
        let field = toks[2].to_string();
        let kind = field_kind(&field).ok_or_else(|| SnapshotError::UnknownField(field.clone()))?;
        let nx: usize = toks[3].parse().map_err(|_| SnapshotError::Header { field: "nx" })?;
        let ny: usize = toks[4].parse().map_err(|_| SnapshotError::Header { field: "ny" })?;
        let lx: f64 = toks[5].parse().map_err(|_| SnapshotError::Header { field: "lx" })?;
        let ly: f64 = toks[6].parse().map_err(|_| SnapshotError::Header { field: "ly" })?;
        let t: f64 = toks[7].parse().map_err(|_| SnapshotError::Header { field: "t" })?;
        let grid = Grid::new(nx, ny, lx, ly).map_err(|_| SnapshotError::Header { field: "grid" })?;
        let (rows, cols) = shape(kind, &grid);

        let mut values = Vec::with_capacity(rows * cols);
        let mut found = 0;
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = n + 2;
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| SnapshotError::NotNumeric {
                    line: lineno,
                    token: tok.to_string(),
                })?;
                values.push(v);
            }
            let count = values.len() - before;
            if count != cols {
                return Err(SnapshotError::Columns {
                    line: lineno,
                    expected: cols,
                    found: count,
                });
            }
            found += 1;
        }
        if found != rows {
            return Err(SnapshotError::Rows { expected: rows, found });
        }
        Ok(Self { field, grid, t, values })
    }

    /// Cell-centred field with the boundary condition of the named field.
    pub fn into_cell_field(self, template: &CellField) -> Option<CellField> {
        (self.grid == template.grid && self.values.len() == template.values.len()).then(|| CellField {
            values: self.values,
            ..template.clone()
        })
    }
}

/// One snapshot per stored field.
pub fn state_snapshots(state: &State) -> Vec<Snapshot> {
    let g = state.grid();
    let mk = |name: &str, v: &[f64]| Snapshot {
        field: name.to_string(),
        grid: g,
        t: state.t,
        values: v.to_vec(),
    };
    vec![
        mk("u", &state.u.u),
        mk("v", &state.u.v),
        mk("p", &state.p.values),
        mk("phi", &state.phi.values),
        mk("theta", &state.theta.values),
    ]
}

pub fn write_snapshot(snap: &Snapshot, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, snap.render()).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    let text = std::fs::read_to_string(path).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Snapshot::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn sample() -> Snapshot {
        let g = Grid::new(5, 4, 1.25, 0.75).unwrap();
        let f = CellField::from_fn(g, Boundary::Dirichlet(0.0), |x, y| (7.0 * x).sin() * (1.0 / 3.0 + y).exp() * 1e-7);
        Snapshot {
            field: "theta".into(),
            grid: g,
            t: 0.1 + 0.2,
            values: f.values,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let back = Snapshot::parse(&s.render()).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.values.iter().zip(&s.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_and_shape() {
        let text = sample().render();
        assert!(text.starts_with("MARANGONI-FIELD v1 theta 5 4 1.25 0.75 "));
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().skip(1).all(|l| l.split_whitespace().count() == 5));
    }

    #[test]
    fn truncated_file_reports_row_count() {
        let text = sample().render();
        let cut: Vec<&str> = text.lines().take(4).collect();
        match Snapshot::parse(&cut.join("\n")) {
            Err(SnapshotError::Rows { expected: 4, found: 3 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_row_and_garbage_are_located() {
        let mut lines: Vec<String> = sample().render().lines().map(String::from).collect();
        lines[2] = lines[2].rsplit_once(' ').unwrap().0.to_string();
        assert!(matches!(
            Snapshot::parse(&lines.join("\n")),
            Err(SnapshotError::Columns {
                line: 3,
                expected: 5,
                found: 4
            })
        ));
        let mut lines: Vec<String> = sample().render().lines().map(String::from).collect();
        lines[1] = lines[1].replacen(' ', " abc ", 1);
        assert!(matches!(
            Snapshot::parse(&lines.join("\n")),
            Err(SnapshotError::NotNumeric { line: 2, .. })
        ));
        assert!(matches!(
            Snapshot::parse("HELLO v1 phi 4 4 1 1 0"),
            Err(SnapshotError::Magic { .. })
        ));
    }

    #[test]
    fn velocity_shapes() {
        let s = State::rest(Grid::new(4, 6, 1.0, 1.5).unwrap());
        let snaps = state_snapshots(&s);
        let u = Snapshot::parse(&snaps[0].render()).unwrap();
        let v = Snapshot::parse(&snaps[1].render()).unwrap();
        assert_eq!(u.values.len(), 5 * 6);
        assert_eq!(v.values.len(), 4 * 7);
    }
}
