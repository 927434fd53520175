//! Parameter sweeps and seed-robustness experiments over synthetic scenes.
//!
//! Both produce flat rows that serialize to CSV with a header line. Wall-clock
//! timing is off unless requested so that reruns with fixed seeds give
//! byte-identical files.

mod robust;
mod stats;
mod sweep;

pub use robust::{
    run_robustness, GroupStats, RobustnessOptions, RobustnessReport, RobustnessRow, Sweep,
    SUCCESS_ROTATION_DEG, SUCCESS_TRANSLATION_MM,
};
pub use stats::{summarize, Stats, SummaryRow};
pub use sweep::{
    run_sweep, Algorithm, CloudSize, GuessConfig, MlsMethod, ParamGrid, ParamSet, Preset, SceneRef,
    SweepOptions, SweepReport, SweepRow, SweepSpec,
};

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Serializes `rows` as CSV with a header line.
pub fn write_csv<R: Serialize, W: Write>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<R: Serialize>(rows: &[R], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_csv<R: DeserializeOwned>(text: &str) -> Result<Vec<R>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

pub fn read_csv_file<R: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<R>> {
    read_csv(&std::fs::read_to_string(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: Default::default(),
        line,
        message: e.to_string(),
    }
}
