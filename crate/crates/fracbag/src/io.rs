//! Artifact writers. CSV numbers carry 17 significant digits; JSON numbers use
//! the shortest representation that round-trips.

use crate::error::CliError;
use fracbag_core::integrator::{diagnostics, Terminal, Trajectory};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// `{:.16e}`: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `r,u,v,H,theta` per sample; `theta` is the unwrapped angle of `(v, u)`.
pub fn write_trajectory_csv(path: &Path, tr: &Trajectory) -> Result<(), CliError> {
    let d = diagnostics(tr)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["r", "u", "v", "H", "theta"])?;
    for (s, th) in tr.samples.iter().zip(&d.theta) {
        w.write_record([num(s.r), num(s.u), num(s.v), num(s.h), num(*th)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_csv(path: &Path, tr: &Trajectory) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["kind", "r", "u", "v"])?;
    for e in &tr.events {
        w.write_record([e.kind.name().to_string(), num(e.r), num(e.state.u), num(e.state.v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// One compact JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    for v in values {
        serde_json::to_writer(&mut f, v)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn terminal_name(t: &Terminal) -> &'static str {
    match t {
        Terminal::HitOrigin { .. } => "HitOrigin",
        Terminal::EnergyNegativeHorizon => "EnergyNegativeHorizon",
        Terminal::HorizonReached => "HorizonReached",
        Terminal::CrossingLimit => "CrossingLimit",
    }
}
