use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Adjacency, Dataset, FieldKind, FieldSpec, PairSet, ProfileTable, RecordRef};
use crate::error::{Error, Result};

/// Cells equal to one of these (or empty) are treated as missing.
const MISSING_MARKERS: [&str; 2] = ["", "NA"];

/// Profile tables of all files and their pooled field specs.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    pub fields: Vec<FieldSpec>,
    pub tables: Vec<ProfileTable>,
}

/// Reads one profile CSV per file. The header is `record_id,<field>...`;
/// every file must list the same fields in the same order. Fields absent
/// from `field_kinds` are categorical.
pub fn load_profiles<P: AsRef<Path>>(paths: &[P], field_kinds: &BTreeMap<String, FieldKind>) -> Result<ProfileSet> {
    let mut header: Option<Vec<String>> = None;
    let mut files = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::load(path, e.to_string()))?;
        let h: Vec<String> = reader
            .headers()
            .map_err(|e| Error::load(path, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if h.is_empty() || h[0].is_empty() {
            return Err(Error::load(path, "missing header row"));
        }
        match &header {
            None => header = Some(h.clone()),
            Some(prev) if *prev != h => {
                return Err(Error::load(
                    path,
                    format!("header {:?} differs from {:?}", &h[1..], &prev[1..]),
                ))
            }
            _ => {}
        }
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
            if rec.len() != h.len() {
                return Err(Error::load(
                    path,
                    format!("row {} has {} columns, header has {}", line + 1, rec.len(), h.len()),
                ));
            }
            ids.push(rec[0].trim().to_string());
            rows.push(
                rec.iter()
                    .skip(1)
                    .map(|c| {
                        let c = c.trim();
                        (!MISSING_MARKERS.contains(&c)).then(|| c.to_string())
                    })
                    .collect(),
            );
        }
        if rows.is_empty() {
            return Err(Error::load(path, "file contains no records"));
        }
        files.push((ids, rows));
    }
    let header = header.ok_or_else(|| Error::Config("no profile files given".into()))?;
    let names: Vec<String> = header[1..].to_vec();
    for key in field_kinds.keys() {
        if !names.contains(key) {
            return Err(Error::Config(format!("unknown field `{key}` in field kinds")));
        }
    }
    let kinds: Vec<FieldKind> = names
        .iter()
        .map(|n| field_kinds.get(n).copied().unwrap_or(FieldKind::Categorical))
        .collect();
    let sizes: Vec<usize> = files.iter().map(|(ids, _)| ids.len()).collect();
    let nets = sizes
        .iter()
        .enumerate()
        .map(|(j, &n)| Adjacency::new(j, n, []))
        .collect::<Result<Vec<_>>>()?;
    let d = Dataset::from_raw(&names, &kinds, files, nets)?;
    Ok(ProfileSet {
        fields: d.fields,
        tables: d.profiles,
    })
}

/// Reads an edge list of 1-based `i j` pairs separated by whitespace or a
/// comma. Blank lines and `#` comments are ignored.
pub fn load_network(path: impl AsRef<Path>, file_id: usize, n_actors: usize) -> Result<Adjacency> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() != 2 {
            return Err(Error::load(path, format!("line {}: expected two indices", lineno + 1)));
        }
        let mut idx = [0usize; 2];
        for (k, t) in toks.iter().enumerate() {
            let v: usize = t
                .parse()
                .map_err(|_| Error::load(path, format!("line {}: bad index `{t}`", lineno + 1)))?;
            if v == 0 || v > n_actors {
                return Err(Error::load(
                    path,
                    format!("line {}: index {v} out of range 1..={n_actors}", lineno + 1),
                ));
            }
            idx[k] = v - 1;
        }
        if idx[0] == idx[1] {
            return Err(Error::load(path, format!("line {}: self-loop on {}", lineno + 1, idx[0] + 1)));
        }
        pairs.push((idx[0], idx[1]));
    }
    Adjacency::new(file_id, n_actors, pairs)
}

/// Reads `file_a,index_a,file_b,index_b` rows (1-based) without validating
/// them against a dataset.
pub fn read_pairs_raw(path: impl AsRef<Path>) -> Result<Vec<(RecordRef, RecordRef)>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| Error::load(path, e.to_string()))?;
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::load(path, e.to_string()))?;
        if rec.len() < 4 {
            return Err(Error::load(path, format!("row {}: expected 4 columns", line + 1)));
        }
        let mut v = [0usize; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            let n: usize = rec[k]
                .trim()
                .parse()
                .map_err(|_| Error::load(path, format!("row {}: bad integer `{}`", line + 1, &rec[k])))?;
            if n == 0 {
                return Err(Error::load(path, format!("row {}: indices are 1-based", line + 1)));
            }
            *slot = n - 1;
        }
        out.push((RecordRef::new(v[0], v[1]), RecordRef::new(v[2], v[3])));
    }
    Ok(out)
}

/// Reads a ground-truth or anchor CSV and checks it against the file sizes.
pub fn load_pairs(path: impl AsRef<Path>, file_sizes: &[usize]) -> Result<PairSet> {
    let path = path.as_ref();
    let pairs = PairSet::new(read_pairs_raw(path)?).map_err(|e| Error::load(path, e.to_string()))?;
    pairs.check_against(file_sizes)?;
    Ok(pairs)
}

/// Loads profiles (optional) and edge lists for every file.
///
/// When `profile_paths` is empty, `sizes` gives the number of actors per file.
pub fn load_dataset<P: AsRef<Path>>(
    profile_paths: &[P],
    network_paths: &[P],
    field_kinds: &BTreeMap<String, FieldKind>,
    sizes: Option<&[usize]>,
) -> Result<Dataset> {
    let (fields, tables) = if profile_paths.is_empty() {
        let sizes = sizes.ok_or_else(|| Error::Config("network-only data need `sizes`".into()))?;
        let tables = sizes.iter().enumerate().map(|(j, &n)| ProfileTable::empty(j, n)).collect();
        (Vec::new(), tables)
    } else {
        let set = load_profiles(profile_paths, field_kinds)?;
        (set.fields, set.tables)
    };
    let networks = if network_paths.is_empty() {
        tables
            .iter()
            .enumerate()
            .map(|(j, t): (usize, &ProfileTable)| Adjacency::new(j, t.n_records(), []))
            .collect::<Result<Vec<_>>>()?
    } else {
        if network_paths.len() != tables.len() {
            return Err(Error::Config(format!(
                "{} network files for {} profile files",
                network_paths.len(),
                tables.len()
            )));
        }
        network_paths
            .iter()
            .enumerate()
            .map(|(j, p)| load_network(p, j, tables[j].n_records()))
            .collect::<Result<Vec<_>>>()?
    };
    Dataset::new(fields, tables, networks)
}

pub fn write_profiles(path: impl AsRef<Path>, table: &ProfileTable, fields: &[FieldSpec]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::load(path, e.to_string()))?;
    let mut header = vec!["record_id".to_string()];
    header.extend(fields.iter().map(|f| f.name.clone()));
    w.write_record(&header).map_err(|e| Error::load(path, e.to_string()))?;
    for i in 0..table.n_records() {
        let mut row = vec![table.record_ids[i].clone()];
        row.extend(
            table
                .row(i)
                .zip(fields)
                .map(|(c, f)| c.map_or_else(|| "NA".to_string(), |v| f.levels[v].clone())),
        );
        w.write_record(&row).map_err(|e| Error::load(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_network(path: impl AsRef<Path>, adj: &Adjacency) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for &(a, b) in adj.edges() {
        writeln!(w, "{} {}", a + 1, b + 1).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[(RecordRef, RecordRef)]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "file_a,index_a,file_b,index_b").map_err(|e| Error::io(path, e))?;
    for (a, b) in pairs {
        writeln!(w, "{},{},{},{}", a.file + 1, a.index + 1, b.file + 1, b.index + 1)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
