//! File formats: sampled series as CSV, everything else as JSON. All writes
//! go through a temporary file in the target directory and a rename.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::HistBin;
use crate::phase::{DemodConfig, PhaseSeries};
use crate::signals::TimeSeries;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Writes `bytes` to `path` atomically, creating parent directories.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e.to_string()))?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&s).map_err(|e| format_err(path, e.to_string()))
}

/// Named columns sampled on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTable {
    pub rate_hz: f64,
    /// Sample index of the first row.
    pub start_index: usize,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl SampledTable {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn series(&self, name: &str) -> Option<TimeSeries> {
        self.column(name).map(|c| TimeSeries {
            samples: c.to_vec(),
            rate_hz: self.rate_hz,
            start_index: self.start_index,
        })
    }

    /// Table of equally long series sharing one rate.
    pub fn from_series(named: &[(&str, &TimeSeries)]) -> Result<Self> {
        let Some((_, first)) = named.first() else {
            return Err(crate::error::invalid("series", "need at least one column"));
        };
        for (name, s) in named {
            if s.len() != first.len() || s.rate_hz != first.rate_hz || s.start_index != first.start_index {
                return Err(crate::error::invalid(
                    "series",
                    format!("column `{name}` does not share the grid of `{}`", named[0].0),
                ));
            }
        }
        Ok(Self {
            rate_hz: first.rate_hz,
            start_index: first.start_index,
            names: named.iter().map(|(n, _)| n.to_string()).collect(),
            columns: named.iter().map(|(_, s)| s.samples.clone()).collect(),
        })
    }
}

/// 17 significant digits: every `f64` reads back bit-exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `index,time_s,<names...>`.
pub fn write_table_csv(path: &Path, table: &SampledTable) -> Result<()> {
    let mut out = String::with_capacity(64 * (table.len() + 1) * (table.names.len() + 2));
    out.push_str("index,time_s");
    for n in &table.names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for i in 0..table.len() {
        let index = table.start_index + i;
        out.push_str(&index.to_string());
        out.push(',');
        out.push_str(&num(index as f64 / table.rate_hz));
        for c in &table.columns {
            out.push(',');
            out.push_str(&num(c[i]));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Reads a CSV written by [`write_table_csv`]. The rate is recovered from
/// the `time_s` column; a single-row file needs `rate_hz`.
pub fn read_table_csv(path: &Path, rate_hz: Option<f64>) -> Result<SampledTable> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() < 3 || header[0] != "index" || header[1] != "time_s" {
        return Err(format_err(path, "header must start with `index,time_s` and name at least one channel"));
    }
    let names = header[2..].to_vec();
    let mut index = Vec::new();
    let mut times = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(format_err(
                path,
                format!("row {} has {} fields, expected {}", row + 1, fields.len(), header.len()),
            ));
        }
        let bad = |what: &str, v: &str| format_err(path, format!("row {}: cannot parse {what} `{v}`", row + 1));
        index.push(fields[0].parse::<usize>().map_err(|_| bad("index", fields[0]))?);
        times.push(fields[1].parse::<f64>().map_err(|_| bad("time_s", fields[1]))?);
        for (c, v) in columns.iter_mut().zip(&fields[2..]) {
            c.push(v.parse::<f64>().map_err(|_| bad("value", v))?);
        }
    }
    if index.is_empty() {
        return Err(format_err(path, "no data rows"));
    }
    if index.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(format_err(path, "indices must be consecutive"));
    }
    let rate = match rate_hz {
        Some(r) => r,
        None if times.len() >= 2 => {
            let span = times[times.len() - 1] - times[0];
            if !(span > 0.0) {
                return Err(format_err(path, "time_s must increase"));
            }
            let r = (times.len() - 1) as f64 / span;
            // rates are almost always whole or simple fractions of a hertz
            let rounded = (r * 1e6).round() / 1e6;
            if (rounded - r).abs() < 1e-6 * r { rounded } else { r }
        }
        None => return Err(format_err(path, "a single row does not determine the sampling rate")),
    };
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(format_err(path, "sampling rate must be positive"));
    }
    Ok(SampledTable {
        rate_hz: rate,
        start_index: index[0],
        names,
        columns,
    })
}

/// Sidecar describing an exported phase series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMeta {
    pub rate_hz: f64,
    pub burn_in: usize,
    pub straightened: bool,
    pub group_delay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demod: Option<DemodConfig>,
}

/// Path of the JSON sidecar next to `csv`: `name.csv` → `name.meta.json`.
pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("meta.json")
}

/// CSV `index,time_s,phase_rad` plus the metadata sidecar.
pub fn write_phase_csv(path: &Path, phi: &PhaseSeries, demod: Option<&DemodConfig>) -> Result<()> {
    let table = SampledTable {
        rate_hz: phi.rate_hz,
        start_index: 0,
        names: vec!["phase_rad".into()],
        columns: vec![phi.values.clone()],
    };
    write_table_csv(path, &table)?;
    let meta = PhaseMeta {
        rate_hz: phi.rate_hz,
        burn_in: phi.burn_in,
        straightened: phi.straightened,
        group_delay: phi.group_delay,
        demod: demod.copied(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a phase CSV; the sidecar is used when present.
pub fn read_phase_csv(path: &Path) -> Result<(PhaseSeries, Option<PhaseMeta>)> {
    let side = sidecar_path(path);
    let meta: Option<PhaseMeta> = if side.exists() { Some(read_json(&side)?) } else { None };
    let table = read_table_csv(path, meta.as_ref().map(|m| m.rate_hz))?;
    let values = table
        .column("phase_rad")
        .ok_or_else(|| format_err(path, "no `phase_rad` column"))?
        .to_vec();
    let phi = match &meta {
        Some(m) => PhaseSeries {
            values,
            rate_hz: m.rate_hz,
            burn_in: m.burn_in,
            straightened: m.straightened,
            group_delay: m.group_delay,
        },
        None => PhaseSeries::from_straight(values, table.rate_hz),
    };
    Ok((phi, meta))
}

/// Histogram CSV `bin_center,count,density`.
pub fn write_histogram_csv(path: &Path, bins: &[HistBin]) -> Result<()> {
    let mut out = String::from("bin_center,count,density\n");
    for b in bins {
        out.push_str(&format!("{},{},{}\n", num(b.center), b.count, num(b.density)));
    }
    atomic_write(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.csv");
        let t = SampledTable {
            rate_hz: 250.0,
            start_index: 7,
            names: vec!["a".into(), "b".into()],
            columns: vec![vec![0.1, -1e-300, std::f64::consts::PI], vec![1.0 / 3.0, 2e20, -0.0]],
        };
        write_table_csv(&p, &t).unwrap();
        let back = read_table_csv(&p, None).unwrap();
        assert_eq!(back.rate_hz, 250.0);
        assert_eq!(back.start_index, 7);
        assert_eq!(back.names, t.names);
        for (x, y) in back.columns.iter().flatten().zip(t.columns.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("index,time_s,a,b\n7,"));
    }

    #[test]
    fn malformed_csv_is_reported_with_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "index,time_s,a\n0,0.0,1.0\n1,0.004,oops\n").unwrap();
        let e = read_table_csv(&p, None).unwrap_err().to_string();
        assert!(e.contains("row 2") && e.contains("oops"), "{e}");
        std::fs::write(&p, "t,a\n0,1\n").unwrap();
        assert!(matches!(read_table_csv(&p, None), Err(Error::Format { .. })));
        assert!(matches!(
            read_table_csv(&dir.path().join("missing.csv"), None),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn phase_sidecar_restores_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("phi.csv");
        let mut phi = PhaseSeries::from_straight(vec![0.0, 0.5, 1.0, 1.5], 100.0).with_burn_in(1);
        phi.group_delay = 2.5;
        let demod = DemodConfig::butterworth(9.0, 1.0, 4);
        write_phase_csv(&p, &phi, Some(&demod)).unwrap();
        assert!(dir.path().join("phi.meta.json").exists());
        let (back, meta) = read_phase_csv(&p).unwrap();
        assert_eq!(back, phi);
        assert_eq!(meta.unwrap().demod, Some(demod));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        write_json(&p, &vec![1.5, 2.5]).unwrap();
        let v: Vec<f64> = read_json(&p).unwrap();
        assert_eq!(v, vec![1.5, 2.5]);
    }
}
