//! File names and readers/writers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hzreach::Vector;
use serde::Serialize;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const MEASUREMENTS: &str = "measurements.csv";
pub const TRUTH: &str = "truth.csv";
pub const MODELS: &str = "models.json";
pub const MODELS_Y: &str = "models_y.json";
pub const REACH: &str = "reach.json";
pub const POLYGONS: &str = "polygons.csv";
pub const SIZES: &str = "sizes.csv";
pub const CONTAINMENT: &str = "containment.csv";
pub const REACH_TIMES: &str = "reach_times.csv";
pub const ESTIMATES: &str = "estimates.json";
pub const BOUNDS: &str = "bounds.csv";
pub const EQUIVALENCE: &str = "equivalence.csv";
pub const TIMING: &str = "timing.csv";
pub const TIMING_STATS: &str = "timing_stats.csv";

/// Files whose contents depend on wall-clock time.
pub const TIMING_FILES: [&str; 3] = [REACH_TIMES, TIMING, TIMING_STATS];

/// Shortest round-tripping decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn nums<'a>(v: impl IntoIterator<Item = &'a f64> + 'a) -> impl Iterator<Item = String> + 'a {
    v.into_iter().map(|x| num(*x))
}

/// Column names `prefix1..prefixN`.
pub fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn read(&self, name: &str) -> Result<String> {
        let p = self.path(name);
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    }

    /// Deletes a stale artifact from an earlier run.
    pub fn remove(&self, name: &str) -> Result<()> {
        let p = self.path(name);
        if p.is_file() {
            fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
        Ok(())
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        serde_json::from_str(&self.read(name)?).with_context(|| format!("parsing {name}"))
    }

    pub fn write_csv<I, R>(&self, name: &str, header: &[String], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads `k, x1..xn[, mode]` rows of a truth file.
pub fn parse_truth(text: &str) -> Result<Vec<Vector>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers()?.clone();
    let xs: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with('x'))
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let step: usize = rec.get(0).unwrap_or("").parse().with_context(|| format!("truth row {k}"))?;
        if step != k {
            bail!("truth rows must be contiguous from 0, found step {step} at row {k}");
        }
        let x = xs
            .iter()
            .map(|&i| rec.get(i).unwrap_or("").parse::<f64>().with_context(|| format!("truth row {k}")))
            .collect::<Result<Vec<_>>>()?;
        out.push(Vector::from_vec(x));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1.0), "1.0");
    }

    #[test]
    fn truth_file_parses_with_mode_tags() {
        let t = parse_truth("k,x1,x2,mode\n0,1.0,2.0,0\n1,3.0,4.0,1\n").unwrap();
        assert_eq!(t, vec![Vector::from_row_slice(&[1.0, 2.0]), Vector::from_row_slice(&[3.0, 4.0])]);
        assert!(parse_truth("k,x1\n1,0.0\n").is_err());
    }

    #[test]
    fn csv_and_json_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = Output::new(&dir.path().join("nested")).unwrap();
        out.write_csv("a.csv", &["k".into(), "v".into()], vec![vec!["0".to_string(), num(0.5)]])
            .unwrap();
        assert_eq!(out.read("a.csv").unwrap(), "k,v\n0,0.5\n");
        out.write_json("b.json", &vec![1, 2]).unwrap();
        assert_eq!(out.read_json::<Vec<i32>>("b.json").unwrap(), vec![1, 2]);
    }
}
