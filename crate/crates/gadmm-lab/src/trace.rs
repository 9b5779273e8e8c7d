//! Per-round metrics records and their CSV serialization.
//!
//! Row `k` snapshots the state after `k` solver rounds, so row 0 is the
//! shared initialization and carries zero communication. The CSV schema is
//! `round,obj_error,cum_bits,cum_joules,msgs_sent,msgs_censored` after one
//! `# key=value` metadata comment line; analog traces append
//! `noise_floor_est,imag_residue` columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One trace row. `obj_error` is the absolute objective gap `|F(mean
/// model) - F*|`; bits and joules are cumulative; message counters are
/// per-round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub obj_error: f64,
    pub cum_bits: u64,
    pub cum_joules: f64,
    pub msgs_sent: u64,
    pub msgs_censored: u64,
    /// Realized noise perturbation of the global model (analog runs only).
    pub noise_floor_est: Option<f64>,
    /// Norm of the imaginary residue discarded by the server (analog only).
    pub imag_residue: Option<f64>,
}

/// Full per-run record: rows plus the metadata comparisons key on.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTrace {
    pub rows: Vec<TraceRow>,
    pub problem_hash: String,
    pub variant: String,
    pub seed: u64,
    /// Centralized optimum `F*` the objective errors are measured against.
    pub fstar: f64,
    /// Whether rows carry the analog diagnostic columns.
    pub analog_columns: bool,
}

impl MetricsTrace {
    /// Appends a row, enforcing that cumulative bits and joules never
    /// decrease.
    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.cum_bits >= last.cum_bits, "cumulative bits decreased");
            assert!(row.cum_joules >= last.cum_joules, "cumulative joules decreased");
            assert_eq!(row.round, last.round + 1, "round indices must be contiguous");
        }
        self.rows.push(row);
    }

    /// First round whose relative objective error `|F - F*| / F*` is at or
    /// below `target`. `None` when the run never reached it.
    pub fn rounds_to_target(&self, target_rel: f64) -> Option<usize> {
        let scale = self.fstar.abs().max(f64::MIN_POSITIVE);
        self.rows
            .iter()
            .find(|r| r.obj_error / scale <= target_rel)
            .map(|r| r.round)
    }

    /// Cumulative (bits, joules, messages) at the first row meeting
    /// `target_rel`, or at the final row when the target was never met.
    pub fn cost_at_target(&self, target_rel: f64) -> (u64, f64, u64) {
        let scale = self.fstar.abs().max(f64::MIN_POSITIVE);
        let mut msgs = 0u64;
        for r in &self.rows {
            msgs += r.msgs_sent;
            if r.obj_error / scale <= target_rel {
                return (r.cum_bits, r.cum_joules, msgs);
            }
        }
        let last = self.rows.last().expect("trace has rows");
        (last.cum_bits, last.cum_joules, msgs)
    }

    pub fn total_messages(&self) -> u64 {
        self.rows.iter().map(|r| r.msgs_sent).sum()
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map(|r| r.obj_error).unwrap_or(f64::NAN)
    }

    /// Renders the CSV document (metadata comment, header, rows).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# problem_hash={} variant={} seed={} fstar={}",
            self.problem_hash, self.variant, self.seed, self.fstar
        );
        if self.analog_columns {
            let _ = writeln!(
                out,
                "round,obj_error,cum_bits,cum_joules,msgs_sent,msgs_censored,noise_floor_est,imag_residue"
            );
        } else {
            let _ = writeln!(out, "round,obj_error,cum_bits,cum_joules,msgs_sent,msgs_censored");
        }
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                r.round, r.obj_error, r.cum_bits, r.cum_joules, r.msgs_sent, r.msgs_censored
            );
            if self.analog_columns {
                let _ = write!(
                    out,
                    ",{},{}",
                    r.noise_floor_est.unwrap_or(0.0),
                    r.imag_residue.unwrap_or(0.0)
                );
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses a trace CSV produced by [`MetricsTrace::to_csv`].
    pub fn from_csv(text: &str) -> Result<MetricsTrace> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::invalid("empty trace file"))?;
        let mut problem_hash = String::new();
        let mut variant = String::new();
        let mut seed = 0u64;
        let mut fstar = f64::NAN;
        for kv in meta.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                match k {
                    "problem_hash" => problem_hash = v.to_string(),
                    "variant" => variant = v.to_string(),
                    "seed" => seed = v.parse().map_err(|e| Error::invalid(format!("seed: {e}")))?,
                    "fstar" => fstar = v.parse().map_err(|e| Error::invalid(format!("fstar: {e}")))?,
                    _ => {}
                }
            }
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("trace file missing header"))?;
        let analog_columns = header.ends_with("noise_floor_est,imag_residue");
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let want = if analog_columns { 8 } else { 6 };
            if f.len() != want {
                return Err(Error::invalid(format!("trace row {i}: {} fields, expected {want}", f.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|e| Error::invalid(format!("trace row {i}: {e}")))
            };
            rows.push(TraceRow {
                round: parse(f[0])? as usize,
                obj_error: parse(f[1])?,
                cum_bits: parse(f[2])? as u64,
                cum_joules: parse(f[3])?,
                msgs_sent: parse(f[4])? as u64,
                msgs_censored: parse(f[5])? as u64,
                noise_floor_est: if analog_columns { Some(parse(f[6])?) } else { None },
                imag_residue: if analog_columns { Some(parse(f[7])?) } else { None },
            });
        }
        Ok(MetricsTrace { rows, problem_hash, variant, seed, fstar, analog_columns })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsTrace {
        let mut t = MetricsTrace {
            rows: Vec::new(),
            problem_hash: "ab12".into(),
            variant: "gadmm".into(),
            seed: 7,
            fstar: 2.0,
            analog_columns: false,
        };
        for k in 0..4 {
            t.push(TraceRow {
                round: k,
                obj_error: 1.0 / (k + 1) as f64,
                cum_bits: 100 * k as u64,
                cum_joules: 0.5 * k as f64,
                msgs_sent: if k == 0 { 0 } else { 10 },
                msgs_censored: 0,
                noise_floor_est: None,
                imag_residue: None,
            });
        }
        t
    }

    #[test]
    fn csv_round_trips() {
        let t = sample();
        let parsed = MetricsTrace::from_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed, t);
    }

    #[test]
    fn rounds_to_target_is_relative() {
        let t = sample();
        // relative errors: 0.5, 0.25, 1/6, 0.125
        assert_eq!(t.rounds_to_target(0.25), Some(1));
        assert_eq!(t.rounds_to_target(0.01), None);
        assert_eq!(t.total_messages(), 30);
    }

    #[test]
    #[should_panic(expected = "cumulative bits decreased")]
    fn push_rejects_decreasing_bits() {
        let mut t = sample();
        t.push(TraceRow {
            round: 4,
            obj_error: 0.1,
            cum_bits: 0,
            cum_joules: 10.0,
            msgs_sent: 0,
            msgs_censored: 0,
            noise_floor_est: None,
            imag_residue: None,
        });
    }
}
