//! File formats: plot-ready CSV tables and JSON records.
//!
//! CSV floats use `{:.16e}` (17 significant digits, round-trip exact), comma
//! separators and no locale. JSON goes through `serde_json`, whose float
//! printing is also round-trip exact.

use std::io::{self, Write};

use serde::Serialize;

use crate::cone::ConeAudit;
use crate::dynamics::Trajectory;
use crate::transversality::{ScanRow, ScanTable};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

/// `event_index,time,symbol,q_1..q_n,v_1..v_n,energy`, one row per event.
pub fn write_trajectory_csv<W: Write>(mut w: W, trajectory: &Trajectory, n: usize) -> io::Result<()> {
    let qs: Vec<String> = (1..=n).map(|i| format!("q_{i}")).collect();
    let vs: Vec<String> = (1..=n).map(|i| format!("v_{i}")).collect();
    writeln!(w, "event_index,time,symbol,{},{},energy", qs.join(","), vs.join(","))?;
    for r in &trajectory.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.index,
            fmt_f64(r.time),
            r.symbol,
            join_floats(&r.q),
            join_floats(&r.v),
            fmt_f64(r.energy)
        )?;
    }
    w.flush()
}

pub fn write_cone_csv<W: Write>(mut w: W, audit: &ConeAudit) -> io::Result<()> {
    writeln!(w, "event_index,time,symbol,q_before,q_after,delta_q,alpha_or_floor_increment")?;
    for r in &audit.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.event_index,
            fmt_f64(r.time),
            r.symbol,
            fmt_f64(r.q_before),
            fmt_f64(r.q_after),
            fmt_f64(r.delta_q),
            fmt_f64(r.alpha_or_floor_increment)
        )?;
    }
    w.flush()
}

pub const SCAN_HEADER: &str = "trial,seed,n,k,mode,symbol_string,sigma_min,sigma_max,sigma_ratio,rank,flag";

pub fn scan_row_csv(r: &ScanRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.trial,
        r.seed,
        r.n,
        r.k,
        r.mode.name(),
        r.symbol_string,
        fmt_f64(r.sigma_min),
        fmt_f64(r.sigma_max),
        fmt_f64(r.sigma_ratio),
        r.rank,
        r.flag
    )
}

pub fn write_scan_csv<W: Write>(mut w: W, table: &ScanTable) -> io::Result<()> {
    writeln!(w, "{SCAN_HEADER}")?;
    for r in &table.rows {
        writeln!(w, "{}", scan_row_csv(r))?;
    }
    w.flush()
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

/// One compact JSON object per line.
pub fn write_json_lines<W: Write, T: Serialize>(mut w: W, values: &[T]) -> io::Result<()> {
    for v in values {
        serde_json::to_writer(&mut w, v)?;
        writeln!(w)?;
    }
    w.flush()
}

/// Provenance record written next to every output. `wall_time_seconds` is
/// the only field that varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    pub wall_time_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate;
    use crate::masses::MassVector;
    use crate::sampling::{sample_state, Locus};

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn trajectory_csv_shape() {
        let m = MassVector::new(vec![3.0, 2.0, 1.0]).unwrap();
        let s = sample_state(&m, 7, Locus::Interior);
        let t = simulate(&s, &m, 25, &Default::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 26);
        assert_eq!(lines[0], "event_index,time,symbol,q_1,q_2,q_3,v_1,v_2,v_3,energy");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 10));
    }
}
