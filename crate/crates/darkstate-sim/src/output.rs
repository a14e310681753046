//! Result export: CSV for plotting pipelines, JSON for programmatic reload.
//!
//! CSV files carry the fully resolved run configuration as `# `-prefixed
//! TOML comment lines, so a result file is a runnable description of the
//! run that produced it. Floats are written in fixed 17-significant-digit
//! scientific notation, which round-trips f64 exactly; two runs with the
//! same configuration produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;
use crate::integrate::TrajectoryRecord;
use crate::sweep::{DiagonalScan, GminPoint, HeatmapResult, ThresholdScan};

/// 17 significant digits: enough to reproduce any f64 bit pattern.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn config_header(cfg: &RunConfig, command: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# command = {command:?}");
    out.push_str("# units: rates and frequencies in MHz, times in inverse MHz (microseconds)\n");
    out.push_str("#\n");
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Which export formats to produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

impl Formats {
    pub fn parse(s: &str) -> Result<Formats> {
        let mut f = Formats {
            csv: false,
            json: false,
        };
        for part in s.split(',') {
            match part.trim() {
                "csv" => f.csv = true,
                "json" => f.json = true,
                "" => {}
                other => {
                    return Err(Error::Config(format!(
                        "unknown output format {other:?} (expected csv, json)"
                    )))
                }
            }
        }
        if !f.csv && !f.json {
            return Err(Error::Config("no output format selected".into()));
        }
        Ok(f)
    }
}

impl Default for Formats {
    fn default() -> Self {
        Formats {
            csv: true,
            json: true,
        }
    }
}

/// Run-health numbers shared by every result document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopped_early: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_trace_dev: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_herm_dev: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_leakage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censored_cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl Diagnostics {
    pub fn from_trajectory(rec: &TrajectoryRecord) -> Self {
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        Diagnostics {
            steps: Some(rec.steps as u64),
            stopped_early: Some(rec.stopped_early),
            t_final: Some(rec.t_final()),
            max_trace_dev: Some(max(&rec.trace_dev)),
            max_herm_dev: Some(max(&rec.herm_dev)),
            min_eigenvalue: Some(min(&rec.min_eig)),
            max_leakage: Some(max(&rec.leakage)),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_ret_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonAxis {
    pub param: String,
    pub values: Vec<f64>,
}

/// Censored cells are `null` in the raw grids; the mask says which.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawGrids {
    pub t_stab: Vec<Vec<Option<f64>>>,
    pub p_ret: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedGrids {
    pub t_stab: Vec<Vec<f64>>,
    pub p_ret: Vec<Vec<f64>>,
    pub t_stab_range: [f64; 2],
    pub p_ret_range: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub raw: RawGrids,
    pub normalized: NormalizedGrids,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapDoc {
    pub config: serde_json::Value,
    pub command: String,
    pub axes: Vec<JsonAxis>,
    pub grids: Grids,
    pub censored: Vec<Vec<bool>>,
    pub summary: Summary,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalDoc {
    pub config: serde_json::Value,
    pub command: String,
    pub axes: Vec<JsonAxis>,
    pub grids: Grids,
    pub censored: Vec<Vec<bool>>,
    pub labels: Vec<String>,
    pub boundary_minimum: bool,
    pub summary: Summary,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GminDoc {
    pub config: serde_json::Value,
    pub command: String,
    pub axes: Vec<JsonAxis>,
    pub gamma_min: Vec<Option<f64>>,
    pub t_min: Vec<Option<f64>>,
    pub p_ret_min: Vec<Option<f64>>,
    pub boundary_minimum: Vec<bool>,
    pub summary: Summary,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct K0EvalDoc {
    pub g1: f64,
    pub k: f64,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct K0Doc {
    pub config: serde_json::Value,
    pub command: String,
    pub axes: Vec<JsonAxis>,
    pub k0: Vec<f64>,
    pub evaluations: Vec<K0EvalDoc>,
    pub summary: Summary,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDoc {
    pub config: serde_json::Value,
    pub command: String,
    pub state_labels: Vec<String>,
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub dark_weight: Vec<f64>,
    pub trace_dev: Vec<f64>,
    pub herm_dev: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub leakage: Vec<f64>,
    pub drift: Vec<f64>,
    pub summary: Summary,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleDoc {
    pub config: serde_json::Value,
    pub command: String,
    pub state_labels: Vec<String>,
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
    pub summary: Summary,
    pub diagnostics: Diagnostics,
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg.to_doc()).expect("config serializes to JSON")
}

fn to_json_string<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("result serializes");
    s.push('\n');
    s
}

/// Column labels `p_n{n}_{s1}{s2}` for the product basis.
pub fn state_labels(space: &HilbertSpace) -> Vec<String> {
    space
        .states()
        .map(|s| format!("p_n{}_{}{}", s.n, s.s1, s.s2))
        .collect()
}

fn option_grid(
    grid: &ndarray::Array2<f64>,
    censored: &ndarray::Array2<bool>,
) -> Vec<Vec<Option<f64>>> {
    grid.rows()
        .into_iter()
        .zip(censored.rows())
        .map(|(vals, cens)| {
            vals.iter()
                .zip(cens.iter())
                .map(|(&v, &c)| if c { None } else { Some(v) })
                .collect()
        })
        .collect()
}

fn plain_grid(grid: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    grid.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn bool_grid(grid: &ndarray::Array2<bool>) -> Vec<Vec<bool>> {
    grid.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub struct Written {
    pub files: Vec<PathBuf>,
}

fn target(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}

pub fn write_trajectory(
    dir: &Path,
    stem: &str,
    formats: Formats,
    cfg: &RunConfig,
    command: &str,
    labels: &[String],
    rec: &TrajectoryRecord,
) -> Result<Written> {
    let mut files = Vec::new();
    let samples = rec.times.len();
    let dim = rec.populations.ncols();
    if formats.csv {
        let mut out = config_header(cfg, command);
        out.push_str("t");
        for l in labels {
            let _ = write!(out, ",{l}");
        }
        out.push_str(",dark_weight,trace_dev,herm_dev,min_eig,leakage,drift\n");
        for k in 0..samples {
            out.push_str(&fmt_float(rec.times[k]));
            for s in 0..dim {
                let _ = write!(out, ",{}", fmt_float(rec.populations[(k, s)]));
            }
            let _ = write!(
                out,
                ",{},{},{},{},{},{}\n",
                fmt_float(rec.dark_weight[k]),
                fmt_float(rec.trace_dev[k]),
                fmt_float(rec.herm_dev[k]),
                fmt_float(rec.min_eig[k]),
                fmt_float(rec.leakage[k]),
                fmt_float(rec.drift[k]),
            );
        }
        let path = target(dir, stem, "csv");
        write_file(&path, &out)?;
        files.push(path);
    }
    if formats.json {
        let doc = TrajectoryDoc {
            config: config_json(cfg),
            command: command.to_string(),
            state_labels: labels.to_vec(),
            times: rec.times.clone(),
            populations: (0..samples)
                .map(|k| (0..dim).map(|s| rec.populations[(k, s)]).collect())
                .collect(),
            dark_weight: rec.dark_weight.clone(),
            trace_dev: rec.trace_dev.clone(),
            herm_dev: rec.herm_dev.clone(),
            min_eig: rec.min_eig.clone(),
            leakage: rec.leakage.clone(),
            drift: rec.drift.clone(),
            summary: Summary::default(),
            diagnostics: Diagnostics::from_trajectory(rec),
        };
        let path = target(dir, stem, "json");
        write_file(&path, &to_json_string(&doc))?;
        files.push(path);
    }
    Ok(Written { files })
}

pub fn write_heatmap(
    dir: &Path,
    stem: &str,
    formats: Formats,
    cfg: &RunConfig,
    command: &str,
    map: &HeatmapResult,
) -> Result<Written> {
    let mut files = Vec::new();
    let xs = map.axes[0].values();
    let ys = map.axes[1].values();
    let censored_cells = map.censored.iter().filter(|&&c| c).count();
    let diagnostics = Diagnostics {
        censored_cells: Some(censored_cells),
        ..Default::default()
    };
    if formats.csv {
        let mut out = config_header(cfg, command);
        let _ = writeln!(
            out,
            "{},{},t_stab,p_ret,t_stab_norm,p_ret_norm,censored",
            map.axes[0].param.name(),
            map.axes[1].param.name()
        );
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_float(x),
                    fmt_float(y),
                    fmt_float(map.t_stab[(i, j)]),
                    fmt_float(map.p_ret[(i, j)]),
                    fmt_float(map.t_stab_norm[(i, j)]),
                    fmt_float(map.p_ret_norm[(i, j)]),
                    u8::from(map.censored[(i, j)]),
                );
            }
        }
        let path = target(dir, stem, "csv");
        write_file(&path, &out)?;
        files.push(path);
    }
    if formats.json {
        let doc = HeatmapDoc {
            config: config_json(cfg),
            command: command.to_string(),
            axes: vec![
                JsonAxis {
                    param: map.axes[0].param.name().to_string(),
                    values: xs,
                },
                JsonAxis {
                    param: map.axes[1].param.name().to_string(),
                    values: ys,
                },
            ],
            grids: Grids {
                raw: RawGrids {
                    t_stab: option_grid(&map.t_stab, &map.censored),
                    p_ret: option_grid(&map.p_ret, &map.censored),
                },
                normalized: NormalizedGrids {
                    t_stab: plain_grid(&map.t_stab_norm),
                    p_ret: plain_grid(&map.p_ret_norm),
                    t_stab_range: [map.t_stab_range.0, map.t_stab_range.1],
                    p_ret_range: [map.p_ret_range.0, map.p_ret_range.1],
                },
            },
            censored: bool_grid(&map.censored),
            summary: Summary::default(),
            diagnostics,
        };
        let path = target(dir, stem, "json");
        write_file(&path, &to_json_string(&doc))?;
        files.push(path);
    }
    Ok(Written { files })
}

pub fn write_diagonal(
    dir: &Path,
    stem: &str,
    formats: Formats,
    cfg: &RunConfig,
    command: &str,
    scan: &DiagonalScan,
) -> Result<Written> {
    let mut files = Vec::new();
    let summary = Summary {
        gamma_min: scan.gamma_min,
        t_min: scan.t_min,
        p_ret_min: scan.p_ret_at_min,
        k0: None,
    };
    let censored_cells = scan.censored.iter().filter(|&&c| c).count();
    let diagnostics = Diagnostics {
        censored_cells: Some(censored_cells),
        ..Default::default()
    };
    if formats.csv {
        let mut out = config_header(cfg, command);
        if let Some(g) = scan.gamma_min {
            let _ = writeln!(out, "# summary: gamma_min = {}", fmt_float(g));
        }
        if scan.boundary_minimum {
            out.push_str("# summary: minimum sits on the scan boundary\n");
        }
        out.push_str("gamma_deph,t_stab,p_ret,label,censored\n");
        for k in 0..scan.gamma.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_float(scan.gamma[k]),
                fmt_float(scan.t_stab[k]),
                fmt_float(scan.p_ret[k]),
                scan.labels[k].name(),
                u8::from(scan.censored[k]),
            );
        }
        let path = target(dir, stem, "csv");
        write_file(&path, &out)?;
        files.push(path);
    }
    if formats.json {
        let n = scan.gamma.len();
        let cens2 = ndarray::Array2::from_shape_vec((1, n), scan.censored.clone())
            .expect("shape");
        let t2 = ndarray::Array2::from_shape_vec((1, n), scan.t_stab.clone()).expect("shape");
        let p2 = ndarray::Array2::from_shape_vec((1, n), scan.p_ret.clone()).expect("shape");
        let (tn, tr) = crate::sweep::normalize_heatmap(&t2, &cens2)
            .unwrap_or_else(|_| (ndarray::Array2::zeros((1, n)), (f64::NAN, f64::NAN)));
        let (pn, pr) = crate::sweep::normalize_heatmap(&p2, &cens2)
            .unwrap_or_else(|_| (ndarray::Array2::zeros((1, n)), (f64::NAN, f64::NAN)));
        let doc = DiagonalDoc {
            config: config_json(cfg),
            command: command.to_string(),
            axes: vec![JsonAxis {
                param: "gamma_deph".to_string(),
                values: scan.gamma.clone(),
            }],
            grids: Grids {
                raw: RawGrids {
                    t_stab: option_grid(&t2, &cens2),
                    p_ret: option_grid(&p2, &cens2),
                },
                normalized: NormalizedGrids {
                    t_stab: plain_grid(&tn),
                    p_ret: plain_grid(&pn),
                    t_stab_range: [tr.0, tr.1],
                    p_ret_range: [pr.0, pr.1],
                },
            },
            censored: bool_grid(&cens2),
            labels: scan.labels.iter().map(|l| l.name().to_string()).collect(),
            boundary_minimum: scan.boundary_minimum,
            summary,
            diagnostics,
        };
        let path = target(dir, stem, "json");
        write_file(&path, &to_json_string(&doc))?;
        files.push(path);
    }
    Ok(Written { files })
}

pub fn write_gmin(
    dir: &Path,
    stem: &str,
    formats: Formats,
    cfg: &RunConfig,
    command: &str,
    series: &[GminPoint],
) -> Result<Written> {
    let mut files = Vec::new();
    let last = series.last();
    let summary = Summary {
        gamma_min: last.and_then(|p| p.gamma_min),
        t_min: last.and_then(|p| p.t_min),
        p_ret_min: last.and_then(|p| p.p_ret_min),
        k0: None,
    };
    if formats.csv {
        let mut out = config_header(cfg, command);
        out.push_str("g,gamma_min,t_min,p_ret_min,boundary\n");
        for p in series {
            let opt = |v: Option<f64>| fmt_float(v.unwrap_or(f64::NAN));
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_float(p.g),
                opt(p.gamma_min),
                opt(p.t_min),
                opt(p.p_ret_min),
                u8::from(p.boundary_minimum),
            );
        }
        let path = target(dir, stem, "csv");
        write_file(&path, &out)?;
        files.push(path);
    }
    if formats.json {
        let doc = GminDoc {
            config: config_json(cfg),
            command: command.to_string(),
            axes: vec![JsonAxis {
                param: "g".to_string(),
                values: series.iter().map(|p| p.g).collect(),
            }],
            gamma_min: series.iter().map(|p| p.gamma_min).collect(),
            t_min: series.iter().map(|p| p.t_min).collect(),
            p_ret_min: series.iter().map(|p| p.p_ret_min).collect(),
            boundary_minimum: series.iter().map(|p| p.boundary_minimum).collect(),
            summary,
            diagnostics: Diagnostics::default(),
        };
        let path = target(dir, stem, "json");
        write_file(&path, &to_json_string(&doc))?;
        files.push(path);
    }
    Ok(Written { files })
}

pub fn write_k0(
    dir: &Path,
    stem: &str,
    formats: Formats,
    cfg: &RunConfig,
    command: &str,
    scan: &ThresholdScan,
) -> Result<Written> {
    let mut files = Vec::new();
    let summary = Summary {
        k0: scan.k0.first().copied(),
        ..Default::default()
    };
    if formats.csv {
        let mut out = config_header(cfg, command);
        out.push_str("g1,k0\n");
        for (g1, k0) in scan.g1.iter().zip(scan.k0.iter()) {
            let _ = writeln!(out, "{},{}", fmt_float(*g1), fmt_float(*k0));
        }
        let path = target(dir, stem, "csv");
        write_file(&path, &out)?;
        files.push(path);
    }
    if formats.json {
        let doc = K0Doc {
            config: config_json(cfg),
            command: command.to_string(),
            axes: vec![JsonAxis {
                param: "g1".to_string(),
                values: scan.g1.clone(),
            }],
            k0: scan.k0.clone(),
            evaluations: scan
                .evaluations
                .iter()
                .map(|e| K0EvalDoc {
                    g1: e.g1,
                    k: e.k,
                    class: e.class.name().to_string(),
                })
                .collect(),
            summary,
            diagnostics: Diagnostics::default(),
        };
        let path = target(dir, stem, "json");
        write_file(&path, &to_json_string(&doc))?;
        files.push(path);
    }
    Ok(Written { files })
}

pub fn write_oracle(
    dir: &Path,
    stem: &str,
    formats: Formats,
    cfg: &RunConfig,
    command: &str,
    labels: &[String],
    rho: &crate::hilbert::DensityOp,
    residual: f64,
) -> Result<Written> {
    let mut files = Vec::new();
    let d = rho.nrows();
    if formats.csv {
        let mut out = config_header(cfg, command);
        let _ = writeln!(out, "# residual = {}", fmt_float(residual));
        out.push_str("row,col,re,im\n");
        for i in 0..d {
            for j in 0..d {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    labels[i],
                    labels[j],
                    fmt_float(rho[(i, j)].re),
                    fmt_float(rho[(i, j)].im),
                );
            }
        }
        let path = target(dir, stem, "csv");
        write_file(&path, &out)?;
        files.push(path);
    }
    if formats.json {
        let doc = OracleDoc {
            config: config_json(cfg),
            command: command.to_string(),
            state_labels: labels.to_vec(),
            rho_re: (0..d)
                .map(|i| (0..d).map(|j| rho[(i, j)].re).collect())
                .collect(),
            rho_im: (0..d)
                .map(|i| (0..d).map(|j| rho[(i, j)].im).collect())
                .collect(),
            summary: Summary::default(),
            diagnostics: Diagnostics {
                residual: Some(residual),
                ..Default::default()
            },
        };
        let path = target(dir, stem, "json");
        write_file(&path, &to_json_string(&doc))?;
        files.push(path);
    }
    Ok(Written { files })
}
