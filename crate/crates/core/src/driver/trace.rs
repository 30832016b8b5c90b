//! CSV time series of energies and monitor output.

use std::fmt::Write as _;
use std::io::Write;

use crate::energy::EnergyRecord;
use crate::monitors::MonitorReport;

pub const TRACE_MAGIC: &str = "# nsac trace v1";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub record: EnergyRecord,
    pub monitor: MonitorReport,
    /// Discrete isothermal energy-law residual of the step that produced
    /// this row; NaN when not applicable.
    pub isothermal_residual: f64,
}

pub fn header() -> String {
    let mut cols = vec!["step"];
    cols.extend(EnergyRecord::COLUMNS);
    cols.extend(["cfl", "lambda_min", "smallness_ok", "violations", "isothermal_residual"]);
    cols.join(",")
}

pub fn format_row(row: &TraceRow) -> String {
    let mut s = row.step.to_string();
    for v in row.record.values() {
        let _ = write!(s, ",{v:.16e}");
    }
    let m = &row.monitor;
    let _ = write!(
        s,
        ",{:.16e},{:.16e},{},{},{:.16e}",
        m.cfl,
        m.lambda_min,
        u8::from(m.smallness_ok),
        m.violations.len(),
        row.isothermal_residual
    );
    s
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{TRACE_MAGIC}")?;
        writeln!(out, "{}", header())?;
        Ok(Self { out })
    }

    pub fn push(&mut self, row: &TraceRow) -> std::io::Result<()> {
        writeln!(self.out, "{}", format_row(row))
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads `(t, column)` pairs back from a trace.
pub fn read_column(text: &str, column: &str) -> Option<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head: Vec<&str> = lines.next()?.split(',').collect();
    let ti = head.iter().position(|c| *c == "t")?;
    let ci = head.iter().position(|c| *c == column)?;
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            Some((f.get(ti)?.parse().ok()?, f.get(ci)?.parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_columns_match_rows() {
        let row = TraceRow {
            step: 3,
            record: EnergyRecord::default(),
            monitor: MonitorReport {
                t: 0.0,
                max_abs_phi: 1.0,
                max_abs_theta: 0.0,
                div_u_inf: 0.0,
                cfl: 0.0,
                lambda_min: 0.05,
                smallness_ok: true,
                violations: vec![],
            },
            isothermal_residual: f64::NAN,
        };
        let n = header().split(',').count();
        assert_eq!(format_row(&row).split(',').count(), n);
        assert!(header().starts_with("step,t,"));

        let mut w = TraceWriter::new(Vec::new()).unwrap();
        w.push(&row).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(text.lines().next(), Some(TRACE_MAGIC));
        let col = read_column(&text, "lambda_min").unwrap();
        assert_eq!(col, vec![(0.0, 0.05)]);
    }
}
