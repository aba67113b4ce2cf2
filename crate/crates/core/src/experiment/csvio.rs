//! CSV artifacts: trajectories (`t,u,x,d`), summaries (`key,value`), sweeps
//! and comparisons. Numbers are written with 6 decimals.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::Trajectory;

use super::{ComparisonRow, RunSummary, SweepPoint};

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "u", "x", "d"];

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for i in 0..traj.len() {
        w.write_record([
            fixed(traj.times[i]),
            fixed(traj.u[i]),
            fixed(traj.x[i]),
            fixed(traj.d[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(Error::MalformedTrajectory(format!(
            "expected header t,u,x,d, got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut t, mut u, mut x, mut d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let mut vals = [0.0; 4];
        for (slot, field) in vals.iter_mut().zip(record.iter()) {
            *slot = field.trim().parse().map_err(|_| {
                Error::MalformedTrajectory(format!("row {}: `{field}` is not a number", row + 2))
            })?;
        }
        t.push(vals[0]);
        u.push(vals[1]);
        x.push(vals[2]);
        d.push(vals[3]);
    }
    Trajectory::new(t, x, u, d)
}

pub fn write_summary<W: Write>(out: W, summary: &RunSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "value"])?;
    for (k, v) in summary.rows() {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(out: W, param: &str, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([param, "profit", "ok"])?;
    for p in points {
        w.write_record([fixed(p.value), fixed(p.profit), p.ok.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison<W: Write>(out: W, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x_A", "x_B", "u_A", "u_B"])?;
    for r in rows {
        w.write_record([fixed(r.t), fixed(r.x_a), fixed(r.x_b), fixed(r.u_a), fixed(r.u_b)])?;
    }
    w.flush()?;
    Ok(())
}
