//! Run configuration: defaults, a flat `key = value` file, a JSON override
//! file and command-line flags, applied in that order.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spiderweb_core::{Complex64, EntireFunction, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.source, line, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridArg {
    pub cx: f64,
    pub cy: f64,
    pub hw: f64,
    pub res: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// `gap-series`, `exponential`, `polynomial` or `monomial`.
    pub function: String,
    /// Exponential: `re[,im]` of lambda. Polynomial: coefficients from the
    /// constant term up, each `re` or `re:im`. Monomial: the degree.
    pub param: Option<String>,
    pub radius: f64,
    pub r_max: f64,
    pub ladder_depth: usize,
    pub level: i32,
    pub depth: usize,
    pub grid: GridArg,
    pub holes: usize,
    pub stride: Option<usize>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    /// Samples along a loop for the forward-map and degree checks.
    pub samples: usize,
    /// Lattice probes for expanding-index detection.
    pub probes: usize,
    /// Random start points for `itinerary`.
    pub points: usize,
    /// Symbols computed per itinerary.
    pub length: usize,
    /// A single start point for `itinerary`, `x,y`.
    pub point: Option<[f64; 2]>,
    /// Orbit type for `construct`: `a`, `b` or `c`.
    pub kind: String,
    pub prefix: usize,
    pub max_subdiv: usize,
    pub period: usize,
    pub seeds: usize,
    pub scales: Vec<f64>,
    pub evidence_res: usize,
    pub evidence_depth: usize,
    /// SWGC rasters whose complement cells are used as holes by `loops`.
    pub masks: Vec<PathBuf>,
    /// SWGC raster read by `render`.
    pub input: Option<PathBuf>,
    /// Loops JSON overlaid by `render`.
    pub overlay: Option<PathBuf>,
    pub png: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            function: "gap-series".into(),
            param: None,
            radius: 1.0,
            r_max: 100.0,
            ladder_depth: 20,
            level: 0,
            depth: 10,
            grid: GridArg { cx: 0.0, cy: 0.0, hw: 30.0, res: 1024 },
            holes: 4,
            stride: None,
            out: PathBuf::from("out"),
            seed: 0,
            threads: 0,
            samples: 512,
            probes: 1_000_000,
            points: 100,
            length: 16,
            point: None,
            kind: "a".into(),
            prefix: 8,
            max_subdiv: 48,
            period: 1,
            seeds: 64,
            scales: vec![0.5, 0.1, 0.02],
            evidence_res: 256,
            evidence_depth: 12,
            masks: Vec::new(),
            input: None,
            overlay: None,
            png: false,
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.trim().parse::<f64>().map_err(|_| format!("expected a number, got {v:?}"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.trim().parse::<usize>().map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(parse_f64).collect()
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

pub fn parse_grid(v: &str) -> Result<GridArg, String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("grid is cx,cy,hw,res, got {v:?}"));
    }
    Ok(GridArg {
        cx: parse_f64(parts[0])?,
        cy: parse_f64(parts[1])?,
        hw: parse_f64(parts[2])?,
        res: parse_usize(parts[3])?,
    })
}

fn optional(v: &str) -> Option<&str> {
    let v = v.trim();
    (!v.is_empty() && v != "none").then_some(v)
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "function" => self.function = v.to_string(),
            "param" => self.param = optional(v).map(str::to_string),
            "radius" => self.radius = parse_f64(v)?,
            "r_max" => self.r_max = parse_f64(v)?,
            "ladder_depth" => self.ladder_depth = parse_usize(v)?,
            "level" => self.level = v.parse().map_err(|_| format!("expected an integer, got {v:?}"))?,
            "depth" => self.depth = parse_usize(v)?,
            "grid" => self.grid = parse_grid(v)?,
            "holes" => self.holes = parse_usize(v)?,
            "stride" => self.stride = optional(v).map(parse_usize).transpose()?,
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = v.parse().map_err(|_| format!("expected an unsigned integer, got {v:?}"))?,
            "threads" => self.threads = parse_usize(v)?,
            "samples" => self.samples = parse_usize(v)?,
            "probes" => self.probes = parse_usize(v)?,
            "points" => self.points = parse_usize(v)?,
            "length" => self.length = parse_usize(v)?,
            "point" => {
                self.point = match optional(v) {
                    None => None,
                    Some(v) => match parse_list(v)?.as_slice() {
                        &[x, y] => Some([x, y]),
                        _ => return Err(format!("point is x,y, got {v:?}")),
                    },
                }
            }
            "kind" => match v {
                "a" | "b" | "c" => self.kind = v.to_string(),
                _ => return Err(format!("kind is a, b or c, got {v:?}")),
            },
            "prefix" => self.prefix = parse_usize(v)?,
            "max_subdiv" => self.max_subdiv = parse_usize(v)?,
            "period" => self.period = parse_usize(v)?,
            "seeds" => self.seeds = parse_usize(v)?,
            "scales" => self.scales = parse_list(v)?,
            "evidence_res" => self.evidence_res = parse_usize(v)?,
            "evidence_depth" => self.evidence_depth = parse_usize(v)?,
            "masks" => self.masks = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect(),
            "input" => self.input = optional(v).map(PathBuf::from),
            "overlay" => self.overlay = optional(v).map(PathBuf::from),
            "png" => self.png = parse_bool(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Apply a `key = value` file; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str, source: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError { source: source.to_string(), line: Some(n + 1), message };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            self.set(k, v).map_err(err)?;
        }
        Ok(())
    }

    /// Apply a JSON object whose values are strings, numbers, booleans or arrays.
    pub fn apply_json(&mut self, text: &str, source: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError { source: source.to_string(), line: None, message };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError {
            source: source.to_string(),
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| err("expected a JSON object".into()))?;
        for (k, v) in obj {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                serde_json::Value::Null => "none".into(),
                other => other.to_string(),
            };
            self.set(k, &text).map_err(|m| err(format!("key {k:?}: {m}")))?;
        }
        Ok(())
    }

    pub fn load_kv(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        self.apply_kv(&text, &path.display().to_string())
    }

    pub fn load_json(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        self.apply_json(&text, &path.display().to_string())
    }

    /// The configuration without the keys that cannot change results
    /// (output directory, thread count).
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out");
            obj.remove("threads");
        }
        v
    }

    /// SHA-256 of the canonical configuration, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn grid_spec(&self, level: i32) -> GridSpec {
        GridSpec::new(Complex64::new(self.grid.cx, self.grid.cy), self.grid.hw, self.grid.res, self.depth, level)
    }

    pub fn entire_function(&self) -> Result<EntireFunction, String> {
        let param = self.param.as_deref();
        let f = match self.function.as_str() {
            "gap-series" | "cos-cosh" => {
                if param.is_some() {
                    return Err("gap-series takes no parameter".into());
                }
                EntireFunction::gap_series()
            }
            "exponential" | "exp" => {
                let lambda = match param {
                    None => Complex64::new(1.0, 0.0),
                    Some(p) => match parse_list(p)?.as_slice() {
                        [re] => Complex64::new(*re, 0.0),
                        [re, im] => Complex64::new(*re, *im),
                        _ => return Err(format!("exponential takes re[,im], got {p:?}")),
                    },
                };
                EntireFunction::exponential(lambda).map_err(|e| e.to_string())?
            }
            "polynomial" => {
                let p = param.ok_or("polynomial needs coefficients in param")?;
                let coeffs = p
                    .split(',')
                    .map(|c| match c.split_once(':') {
                        Some((re, im)) => Ok(Complex64::new(parse_f64(re)?, parse_f64(im)?)),
                        None => Ok(Complex64::new(parse_f64(c)?, 0.0)),
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                EntireFunction::polynomial(coeffs).map_err(|e| e.to_string())?
            }
            "monomial" => {
                let d = parse_usize(param.ok_or("monomial needs its degree in param")?)?;
                EntireFunction::monomial(d).map_err(|e| e.to_string())?
            }
            other => return Err(format!("unknown function {other:?}")),
        };
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_file_reports_line() {
        let mut c = RunConfig::default();
        let e = c.apply_kv("# header\ndepth = 12\n\nlevel = x\n", "run.cfg").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert_eq!(c.depth, 12);
        assert!(e.to_string().starts_with("run.cfg:4:"));
        let e = c.apply_kv("nonsense\n", "run.cfg").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn json_override() {
        let mut c = RunConfig::default();
        c.apply_json(r#"{"grid": "1,2,3,64", "scales": [0.4, 0.2], "png": true, "stride": null}"#, "o.json").unwrap();
        assert_eq!(c.grid, GridArg { cx: 1.0, cy: 2.0, hw: 3.0, res: 64 });
        assert_eq!(c.scales, vec![0.4, 0.2]);
        assert!(c.png);
        assert!(c.apply_json(r#"{"bogus": 1}"#, "o.json").is_err());
    }

    #[test]
    fn hash_ignores_out_and_threads() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("/elsewhere");
        b.threads = 8;
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn functions() {
        let mut c = RunConfig::default();
        assert!(c.entire_function().unwrap().is_transcendental());
        c.function = "polynomial".into();
        c.param = Some("0,0,1".into());
        assert!(!c.entire_function().unwrap().is_transcendental());
        c.function = "exponential".into();
        c.param = Some("0.5,0.1".into());
        assert!(c.entire_function().is_ok());
        c.function = "sine".into();
        assert!(c.entire_function().is_err());
    }
}
