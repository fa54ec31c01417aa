//! Plain-text persistence of sample sets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::chain::PosteriorSampleSet;
use crate::error::{Error, Result};

/// One line per sample: space-separated cluster labels in record order.
pub fn write_linkage_samples(path: &Path, samples: &PosteriorSampleSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for row in &samples.labels {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        writeln!(w, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_linkage_samples(path: &Path) -> Result<Vec<Vec<u32>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::load(path, format!("line {}: {e}", i + 1)))?;
        if out.first().is_some_and(|r: &Vec<u32>| r.len() != row.len()) {
            return Err(Error::load(path, format!("line {} has a different record count", i + 1)));
        }
        out.push(row);
    }
    Ok(out)
}

/// Scalar traces as CSV with a `sample` column and one column per trace.
pub fn write_traces_csv(path: &Path, samples: &PosteriorSampleSet) -> Result<()> {
    let traces = samples.scalar_traces();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::load(path, e.to_string()))?;
    let csv_err = |e: csv::Error| Error::load(path, e.to_string());
    let mut header = vec!["sample".to_string()];
    header.extend(traces.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(csv_err)?;
    for s in 0..samples.n_samples() {
        let mut rec = vec![(s + 1).to_string()];
        rec.extend(traces.iter().map(|(_, v)| v[s].to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Full pointwise matrix, one row per sample. Fails when the chain did not
/// keep the matrix.
pub fn write_pointwise_csv(path: &Path, samples: &PosteriorSampleSet) -> Result<()> {
    let rows = samples
        .pointwise
        .rows()
        .ok_or_else(|| Error::Config("pointwise matrix was not stored (set store_pointwise)".into()))?;
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let pw = &samples.pointwise;
    let header: Vec<String> = (0..pw.n_network_units())
        .map(|i| format!("dyad_{}", i + 1))
        .chain((0..pw.n_profile_units()).map(|i| format!("cell_{}", i + 1)))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for row in rows.take(pw.n_samples()) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
