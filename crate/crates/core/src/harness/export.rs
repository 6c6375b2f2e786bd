//! CSV output. Floats are written with 17 significant digits so every value
//! parses back to the identical `f64`.
//!
//! Schemas (one header row each):
//! - ticks: `trial,tick,x,y,theta,room,score,goal_x,goal_y`
//! - entries: `trial,room,tag,tick`
//! - windows: `trial,tick,room,tag,score,model_version`
//! - trials: `trial,condition,seed,ticks,anomaly_rooms,non_anomaly_rooms,ledger_records,map_complete,aborted`
//! - metrics: `condition,trials,aborted,anomaly_rooms,non_anomaly_rooms,anomaly_fraction,group,mean,std,count`
//!
//! Missing values are empty fields.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::experiment::MetricsTable;
use super::trial::{TickRow, TrialRecord};
use crate::error::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn opt_f(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_f64)
}

pub const TICK_HEADER: [&str; 9] = [
    "trial", "tick", "x", "y", "theta", "room", "score", "goal_x", "goal_y",
];

pub fn write_ticks<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TICK_HEADER)?;
    for r in records {
        for t in &r.ticks {
            w.write_record([
                r.trial.to_string(),
                t.tick.to_string(),
                fmt_f64(t.x),
                fmt_f64(t.y),
                fmt_f64(t.theta),
                opt(t.room),
                opt_f(t.score),
                opt_f(t.goal.map(|g| g.0)),
                opt_f(t.goal.map(|g| g.1)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<Option<T>> {
    let s = rec
        .get(i)
        .ok_or_else(|| Error::Format(format!("missing column {i}")))?;
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("bad value {s:?} in column {i}")))
}

fn required<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    field(rec, i)?.ok_or_else(|| Error::Format(format!("empty required column {i}")))
}

/// Parses a ticks CSV back into `(trial, row)` pairs.
pub fn read_ticks<R: Read>(input: R) -> Result<Vec<(usize, TickRow)>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TICK_HEADER.iter().copied()) {
        return Err(Error::Format("unexpected ticks header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let goal = match (field::<f64>(&rec, 7)?, field::<f64>(&rec, 8)?) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        };
        out.push((
            required(&rec, 0)?,
            TickRow {
                tick: required(&rec, 1)?,
                x: required(&rec, 2)?,
                y: required(&rec, 3)?,
                theta: required(&rec, 4)?,
                room: field(&rec, 5)?,
                score: field(&rec, 6)?,
                goal,
            },
        ));
    }
    Ok(out)
}

pub fn write_entries<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "room", "tag", "tick"])?;
    for r in records {
        for e in &r.entries {
            w.write_record([
                r.trial.to_string(),
                e.room.to_string(),
                e.tag.to_string(),
                e.tick.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_windows<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "tick", "room", "tag", "score", "model_version"])?;
    for r in records {
        for s in &r.windows {
            w.write_record([
                r.trial.to_string(),
                s.tick.to_string(),
                opt(s.room),
                opt(s.tag),
                fmt_f64(s.score),
                s.model_version.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "condition",
        "seed",
        "ticks",
        "anomaly_rooms",
        "non_anomaly_rooms",
        "ledger_records",
        "map_complete",
        "aborted",
    ])?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.condition.to_string(),
            r.seed.to_string(),
            r.ticks.len().to_string(),
            r.anomaly_rooms.to_string(),
            r.non_anomaly_rooms.to_string(),
            r.ledger_records.to_string(),
            r.map_complete.to_string(),
            r.aborted.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics<W: Write>(tables: &[MetricsTable], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "condition",
        "trials",
        "aborted",
        "anomaly_rooms",
        "non_anomaly_rooms",
        "anomaly_fraction",
        "group",
        "mean",
        "std",
        "count",
    ])?;
    for t in tables {
        let head = [
            t.condition.to_string(),
            t.trials.to_string(),
            t.aborted.to_string(),
            t.anomaly_rooms.to_string(),
            t.non_anomaly_rooms.to_string(),
            fmt_f64(t.anomaly_fraction()),
        ];
        if t.per_tag.is_empty() {
            let mut row = head.to_vec();
            row.extend([String::new(), String::new(), String::new(), String::new()]);
            w.write_record(row)?;
        }
        for (tag, s) in &t.per_tag {
            let mut row = head.to_vec();
            row.extend([
                tag.map_or("hall".to_string(), |t| t.to_string()),
                fmt_f64(s.mean),
                fmt_f64(s.std),
                s.count.to_string(),
            ]);
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes every per-condition file under `dir` with the condition as prefix.
pub fn export_csv(records: &[TrialRecord], table: &MetricsTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = table.condition.as_str();
    write_ticks(records, File::create(dir.join(format!("{p}_ticks.csv")))?)?;
    write_entries(records, File::create(dir.join(format!("{p}_entries.csv")))?)?;
    write_windows(records, File::create(dir.join(format!("{p}_windows.csv")))?)?;
    write_trials(records, File::create(dir.join(format!("{p}_trials.csv")))?)?;
    write_metrics(
        std::slice::from_ref(table),
        File::create(dir.join(format!("{p}_metrics.csv")))?,
    )?;
    Ok(())
}
