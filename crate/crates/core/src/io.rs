//! Run configuration and the on-disk formats.
//!
//! * Config files are `key = value` lines; `#` starts a comment.
//! * Candidates are one JSON object per line, fields in the order of
//!   [`CandidateRecord`].
//! * A curve file holds one candidate record per point followed by a trailer
//!   line `{"termination": .., "points": .., "free_axes": .., "step_policy": ..}`.
//! * Plot data is CSV with the family's parameter names and `R` as columns.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::automorphy::SolverSettings;
use crate::deform::{DeformationCurve, StepPolicy, Termination};
use crate::error::{MaassError, Result};
use crate::group::{Character, Family};
use crate::search::{MaassCandidate, Parity};
use crate::verify::VerificationReport;

/// Environment variable overriding the thread count of a config file.
pub const THREADS_ENV: &str = "MAASS_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub eps: f64,
    pub oversample: f64,
    pub y0_factor: f64,
    pub scan_step: f64,
    pub step_policy: StepPolicy,
    pub thread_count: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            oversample: 1.25,
            y0_factor: 0.8,
            scan_step: 0.005,
            step_policy: StepPolicy::default(),
            thread_count: std::thread::available_parallelism().map_or(1, |n| n.get()),
            output_dir: PathBuf::from("."),
        }
    }
}

/// Values given explicitly (on the command line); each wins over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub eps: Option<f64>,
    pub oversample: Option<f64>,
    pub y0_factor: Option<f64>,
    pub scan_step: Option<f64>,
    pub step_initial: Option<f64>,
    pub step_min: Option<f64>,
    pub step_max: Option<f64>,
    pub thread_count: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn config_err(msg: String) -> MaassError {
    MaassError::Config(msg)
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(format!("line {line}: `{key}` expects a number, got `{value}`")))
}

impl RunConfig {
    /// Parses `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<ConfigOverrides> {
        let mut o = ConfigOverrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let ln = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {ln}: expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "eps" => o.eps = Some(parse_number(key, value, ln)?),
                "oversample" => o.oversample = Some(parse_number(key, value, ln)?),
                "y0_factor" => o.y0_factor = Some(parse_number(key, value, ln)?),
                "scan_step" => o.scan_step = Some(parse_number(key, value, ln)?),
                "step_initial" => o.step_initial = Some(parse_number(key, value, ln)?),
                "step_min" => o.step_min = Some(parse_number(key, value, ln)?),
                "step_max" => o.step_max = Some(parse_number(key, value, ln)?),
                "thread_count" | "threads" => o.thread_count = Some(parse_number(key, value, ln)?),
                "output_dir" => o.output_dir = Some(PathBuf::from(value)),
                _ => return Err(config_err(format!("line {ln}: unknown key `{key}`"))),
            }
        }
        Ok(o)
    }

    /// Resolves a configuration: flag, then `MAASS_THREADS` (thread count
    /// only), then file, then default.
    pub fn resolve(file: Option<&str>, env_threads: Option<&str>, flags: &ConfigOverrides) -> Result<RunConfig> {
        let from_file = match file {
            Some(text) => Self::parse(text)?,
            None => ConfigOverrides::default(),
        };
        let env = match env_threads {
            Some(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| config_err(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
            ),
            None => None,
        };
        let d = RunConfig::default();
        let pick = |flag: Option<f64>, file: Option<f64>, default: f64| flag.or(file).unwrap_or(default);
        let cfg = RunConfig {
            eps: pick(flags.eps, from_file.eps, d.eps),
            oversample: pick(flags.oversample, from_file.oversample, d.oversample),
            y0_factor: pick(flags.y0_factor, from_file.y0_factor, d.y0_factor),
            scan_step: pick(flags.scan_step, from_file.scan_step, d.scan_step),
            step_policy: StepPolicy {
                initial: pick(flags.step_initial, from_file.step_initial, d.step_policy.initial),
                min: pick(flags.step_min, from_file.step_min, d.step_policy.min),
                max: pick(flags.step_max, from_file.step_max, d.step_policy.max),
            },
            thread_count: flags.thread_count.or(env).or(from_file.thread_count).unwrap_or(d.thread_count),
            output_dir: flags
                .output_dir
                .clone()
                .or(from_file.output_dir)
                .unwrap_or(d.output_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file (if any) and the environment.
    pub fn load(path: Option<&Path>, flags: &ConfigOverrides) -> Result<RunConfig> {
        let text = match path {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let env = std::env::var(THREADS_ENV).ok();
        Self::resolve(text.as_deref(), env.as_deref(), flags)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-10..=1e-3).contains(&self.eps) {
            return Err(config_err(format!("eps must lie in [1e-10, 1e-3], got {}", self.eps)));
        }
        let positive = [
            ("oversample", self.oversample),
            ("y0_factor", self.y0_factor),
            ("scan_step", self.scan_step),
            ("step_initial", self.step_policy.initial),
            ("step_min", self.step_policy.min),
            ("step_max", self.step_policy.max),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{k} must be positive, got {v}")));
            }
        }
        if self.thread_count == 0 {
            return Err(config_err("thread_count must be positive".into()));
        }
        if !(self.step_policy.min <= self.step_policy.initial && self.step_policy.initial <= self.step_policy.max) {
            return Err(config_err("step policy needs step_min ≤ step_initial ≤ step_max".into()));
        }
        Ok(())
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            eps: self.eps,
            oversample: self.oversample,
            y0_factor: self.y0_factor,
            ..SolverSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub timestamp: String,
}

impl Provenance {
    pub fn new(timestamp: impl Into<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp.into(),
        }
    }
}

/// Wire form of a candidate. Coefficients are `[n, re, im]` for
/// `0 < |n| ≤ M`, in the scaled units of the solver (`a_1 = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub family: Family,
    pub params: Vec<f64>,
    pub character: Character,
    #[serde(rename = "R")]
    pub r: f64,
    pub lambda: f64,
    pub parity: Parity,
    pub residual: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub y0: f64,
    pub eps: f64,
    pub normalization: i64,
    pub coeffs: Vec<(i64, f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    pub provenance: Provenance,
}

impl CandidateRecord {
    pub fn new(c: &MaassCandidate, verification: Option<VerificationReport>, provenance: Provenance) -> Self {
        let mi = c.m as i64;
        Self {
            family: c.family,
            params: c.params.clone(),
            character: c.character.clone(),
            r: c.r,
            lambda: c.lambda(),
            parity: c.parity,
            residual: c.residual,
            m: c.m,
            n: c.n_points,
            y0: c.y0,
            eps: c.eps,
            normalization: c.normalization,
            coeffs: (-mi..=mi)
                .filter(|&n| n != 0)
                .map(|n| {
                    let a = c.coeff(n);
                    (n, a.re, a.im)
                })
                .collect(),
            verification,
            provenance,
        }
    }

    pub fn candidate(&self) -> Result<MaassCandidate> {
        let character = Character::new(self.family, self.character.signs().to_vec())?;
        if self.params.len() != self.family.num_params() {
            return Err(MaassError::Io(format!(
                "{} expects {} parameters, record has {}",
                self.family,
                self.family.num_params(),
                self.params.len()
            )));
        }
        let mi = self.m as i64;
        let mut coefficients = vec![Complex64::new(0.0, 0.0); 2 * self.m + 1];
        for &(n, re, im) in &self.coeffs {
            if n == 0 || n.abs() > mi {
                return Err(MaassError::Io(format!("coefficient index {n} outside 0 < |n| ≤ {}", self.m)));
            }
            coefficients[(n + mi) as usize] = Complex64::new(re, im);
        }
        Ok(MaassCandidate {
            family: self.family,
            params: self.params.clone(),
            character,
            r: self.r,
            coefficients,
            residual: self.residual,
            parity: self.parity,
            m: self.m,
            n_points: self.n,
            y0: self.y0,
            eps: self.eps,
            normalization: self.normalization,
        })
    }
}

pub fn write_records(path: &Path, records: &[CandidateRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<CandidateRecord>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTrailer {
    pub termination: Termination,
    pub points: usize,
    pub free_axes: Vec<usize>,
    pub step_policy: StepPolicy,
}

/// Appends curve points one at a time, so an interrupted track keeps what it
/// has found.
pub struct CurveWriter {
    out: std::io::BufWriter<File>,
    points: usize,
    timestamp: String,
}

impl CurveWriter {
    pub fn create(path: &Path, timestamp: impl Into<String>) -> Result<Self> {
        Ok(Self {
            out: std::io::BufWriter::new(File::create(path)?),
            points: 0,
            timestamp: timestamp.into(),
        })
    }

    pub fn push(&mut self, point: &MaassCandidate) -> Result<()> {
        let rec = CandidateRecord::new(point, None, Provenance::new(self.timestamp.clone()));
        serde_json::to_writer(&mut self.out, &rec)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        self.points += 1;
        Ok(())
    }

    pub fn finish(mut self, termination: Termination, free_axes: &[usize], step_policy: StepPolicy) -> Result<()> {
        let t = CurveTrailer {
            termination,
            points: self.points,
            free_axes: free_axes.to_vec(),
            step_policy,
        };
        serde_json::to_writer(&mut self.out, &t)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_curve(path: &Path, curve: &DeformationCurve, timestamp: &str) -> Result<()> {
    let mut w = CurveWriter::create(path, timestamp)?;
    for p in &curve.points {
        w.push(p)?;
    }
    w.finish(curve.termination, &curve.free_axes, curve.step_policy)
}

pub fn read_curve(path: &Path) -> Result<DeformationCurve> {
    let text = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (last, body) = lines
        .split_last()
        .ok_or_else(|| MaassError::Io(format!("{} is empty", path.display())))?;
    let trailer: CurveTrailer = serde_json::from_str(last)
        .map_err(|e| MaassError::Io(format!("{}: missing or bad trailer line: {e}", path.display())))?;
    let points = body
        .iter()
        .map(|l| serde_json::from_str::<CandidateRecord>(l)?.candidate())
        .collect::<Result<Vec<_>>>()?;
    if points.len() != trailer.points {
        return Err(MaassError::Io(format!(
            "{}: trailer counts {} points, file has {}",
            path.display(),
            trailer.points,
            points.len()
        )));
    }
    let family = points
        .first()
        .map(|p| p.family)
        .ok_or_else(|| MaassError::Io(format!("{} has no points", path.display())))?;
    Ok(DeformationCurve {
        family,
        free_axes: trailer.free_axes,
        points,
        step_policy: trailer.step_policy,
        termination: trailer.termination,
    })
}

/// CSV with one row per curve point: the parameters, then `R`.
pub fn plot_csv(curve: &DeformationCurve) -> String {
    let mut s = curve.family.axis_names().join(",");
    s.push_str(",R\n");
    for p in &curve.points {
        let row: Vec<String> = p.params.iter().chain(std::iter::once(&p.r)).map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let file = "# desk run\neps = 1e-8\nscan_step = 0.01 # coarse\nthreads = 3\n";
        let flags = ConfigOverrides {
            eps: Some(1e-7),
            ..Default::default()
        };
        let c = RunConfig::resolve(Some(file), None, &flags).unwrap();
        assert_eq!(c.eps, 1e-7);
        assert_eq!(c.scan_step, 0.01);
        assert_eq!(c.oversample, 1.25);
        assert_eq!(c.thread_count, 3);
        let c = RunConfig::resolve(Some(file), Some("5"), &ConfigOverrides::default()).unwrap();
        assert_eq!(c.thread_count, 5);
        assert_eq!(c.eps, 1e-8);
    }

    #[test]
    fn rejects_bad_config() {
        let none = ConfigOverrides::default();
        for bad in ["eps = 1e-2", "eps = 1e-12", "oversample = -1", "nonsense = 1", "eps 1e-6", "threads = 0"] {
            let e = RunConfig::resolve(Some(bad), None, &none).unwrap_err();
            assert_eq!(e.name(), "ConfigError", "{bad}");
        }
        assert!(RunConfig::resolve(None, Some("many"), &none).is_err());
    }

    #[test]
    fn csv_header_follows_family() {
        let curve = DeformationCurve {
            family: Family::Gamma2222,
            free_axes: vec![3],
            points: vec![],
            step_policy: StepPolicy::default(),
            termination: Termination::Lost,
        };
        assert_eq!(plot_csv(&curve), "a,b,c,d,R\n");
    }
}
