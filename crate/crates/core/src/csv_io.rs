//! CSV tables of points and snapshot pairs, with `# key: value` header
//! comments carrying provenance (system, seed, observable, delay settings).

use std::io::{BufRead, BufReader, Read, Write};

use crate::embedding::SnapshotPairs;
use crate::error::{Error, Result};
use crate::observables::Domain;

/// Numeric table with metadata comments.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut meta = Vec::new();
        let mut body = String::new();
        for line in BufReader::new(input).lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
            } else if !line.trim().is_empty() {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::input(format!("data row {}: {s:?} is not a number", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::input(format!("data row {} has {} fields, expected {}", i + 1, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }
}

fn numbered(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

/// Points as columns `x_1..x_m`, headed by `system` and `seed` comments.
pub fn samples_table(points: &[Vec<f64>], system: &str, seed: Option<u64>, extra: Vec<(String, String)>) -> CsvTable {
    let d = points.first().map_or(0, Vec::len);
    let mut meta = vec![("system".to_string(), system.to_string())];
    if let Some(s) = seed {
        meta.push(("seed".into(), s.to_string()));
    }
    meta.extend(extra);
    CsvTable {
        meta,
        columns: numbered("x", d).collect(),
        rows: points.to_vec(),
    }
}

/// Snapshot pairs as columns `x_1..x_d, y_1..y_d`. `meta` should record the
/// system, the delay observable `f`, `embed_dim` and `lag`.
pub fn snapshots_table(pairs: &SnapshotPairs, meta: Vec<(String, String)>) -> CsvTable {
    let d = pairs.dim();
    let mut all = vec![("domain".to_string(), pairs.domain().to_string())];
    all.extend(meta);
    CsvTable {
        meta: all,
        columns: numbered("x", d).chain(numbered("y", d)).collect(),
        rows: pairs
            .x()
            .iter()
            .zip(pairs.y())
            .map(|(x, y)| x.iter().chain(y).copied().collect())
            .collect(),
    }
}

/// Inverse of [`snapshots_table`]. The domain defaults to embedded when the
/// table carries no `domain` comment (e.g. a hand-made Hankel export).
pub fn table_to_snapshots(t: &CsvTable) -> Result<SnapshotPairs> {
    let domain = match t.meta("domain") {
        None | Some("embedded") => Domain::Embedded,
        Some("original") => Domain::Original,
        Some(other) => return Err(Error::input(format!("unknown snapshot domain {other:?}"))),
    };
    let cols = t.columns.len();
    let d = cols / 2;
    let expect: Vec<String> = numbered("x", d).chain(numbered("y", d)).collect();
    if cols == 0 || cols % 2 != 0 || t.columns != expect {
        return Err(Error::input(format!(
            "snapshot columns must be x_1..x_d,y_1..y_d, got {}",
            t.columns.join(",")
        )));
    }
    let (x, y) = t.rows.iter().map(|r| (r[..d].to_vec(), r[d..].to_vec())).unzip();
    SnapshotPairs::new(x, y, domain)
}

/// Inverse of [`samples_table`].
pub fn table_to_points(t: &CsvTable) -> Result<Vec<Vec<f64>>> {
    let expect: Vec<String> = numbered("x", t.columns.len()).collect();
    if t.columns.is_empty() || t.columns != expect {
        return Err(Error::input(format!("sample columns must be x_1..x_m, got {}", t.columns.join(","))));
    }
    Ok(t.rows.clone())
}
