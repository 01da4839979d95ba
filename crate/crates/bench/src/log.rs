//! Per-step trajectory log and its CSV form.
//!
//! Columns: `t, x0..x{n-1}, u0..u{m-1}, delta, eta_min, certified,
//! fallback_active, iterations, solve_time`. `certified` is empty for
//! methods without a certificate; `delta` and `eta_min` are then `NaN`.
//! Floats are written in shortest round-trip form, so a log parses back
//! exactly.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub delta: f64,
    pub eta_min: f64,
    pub certified: Option<bool>,
    pub fallback: bool,
    pub iterations: usize,
    /// Wall time of the controller call in seconds.
    pub solve_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(nx: usize, nu: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..nx).map(|i| format!("x{i}")));
        h.extend((0..nu).map(|i| format!("u{i}")));
        h.extend(["delta", "eta_min", "certified", "fallback_active", "iterations", "solve_time"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let (nx, nu) = match self.rows.first() {
            Some(r) => (r.x.len(), r.u.len()),
            None => (0, 0),
        };
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::header(nx, nu))?;
        for r in &self.rows {
            let mut rec: Vec<String> = Vec::with_capacity(nx + nu + 7);
            rec.push(r.t.to_string());
            rec.extend(r.x.iter().map(f64::to_string));
            rec.extend(r.u.iter().map(f64::to_string));
            rec.push(r.delta.to_string());
            rec.push(r.eta_min.to_string());
            rec.push(match r.certified {
                Some(true) => "1".into(),
                Some(false) => "0".into(),
                None => String::new(),
            });
            rec.push(if r.fallback { "1" } else { "0" }.into());
            rec.push(r.iterations.to_string());
            rec.push(r.solve_time.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let nx = headers.iter().filter(|h| h.starts_with('x')).count();
        let nu = headers.iter().filter(|h| h.starts_with('u')).count();
        if headers.len() != 1 + nx + nu + 6 || headers.get(0) != Some("t") {
            return Err(BenchError::Log { row: 0, msg: "unexpected header".into() });
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| BenchError::Log { row, msg: e.to_string() })?;
            if rec.len() != headers.len() {
                return Err(BenchError::Log { row, msg: format!("expected {} fields, got {}", headers.len(), rec.len()) });
            }
            let num = |j: usize| -> Result<f64> {
                rec[j].parse::<f64>().map_err(|e| BenchError::Log { row, msg: format!("column {}: {e}", &headers[j]) })
            };
            let flag = |j: usize| -> Result<bool> {
                match &rec[j] {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    v => Err(BenchError::Log { row, msg: format!("column {}: bad flag `{v}`", &headers[j]) }),
                }
            };
            let x = (1..=nx).map(num).collect::<Result<Vec<_>>>()?;
            let u = (1 + nx..1 + nx + nu).map(num).collect::<Result<Vec<_>>>()?;
            let b = 1 + nx + nu;
            let certified = if rec[b + 2].is_empty() { None } else { Some(flag(b + 2)?) };
            rows.push(StepRecord {
                t: num(0)?,
                x: DVector::from_vec(x),
                u: DVector::from_vec(u),
                delta: num(b)?,
                eta_min: num(b + 1)?,
                certified,
                fallback: flag(b + 3)?,
                iterations: rec[b + 4]
                    .parse()
                    .map_err(|e| BenchError::Log { row, msg: format!("column iterations: {e}") })?,
                solve_time: num(b + 5)?,
            });
        }
        Ok(Self { rows })
    }
}
