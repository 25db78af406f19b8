//! Problem files and result artifacts.
//!
//! A problem is a JSON object:
//!
//! ```json
//! {
//!   "domain": {"bounds": [[0, 1], [0, 1]], "resolution": [64, 64]},
//!   "density": {"kind": "tabulated", "file": "rho.csv", "holder_alpha": 1},
//!   "sites": {"file": "sites.csv"},
//!   "cost_scale": 0.5,
//!   "backend": "exact",
//!   "fee": [{"kind": "quadratic", "params": {"center": 0.1}, "domain": [0.02, 1]}]
//! }
//! ```
//!
//! `density` may also be `{"kind": "uniform"}` or carry inline `values`;
//! `sites` may be an inline list of points (or of numbers in 1-D); `fee` may
//! be `{"file": "fee.json"}`. Relative paths are resolved against the
//! directory of the problem file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fees::config::{fee_from_config, FeePartConfig};
use crate::fees::SplittingFee;
use crate::geometry::{Backend, DensityField, DomainSpec, Point, QuadraticCost, SiteSet, TransportProblem};
use crate::regularize::RegularizationReport;
use crate::solver::SolveStatus;

const KNOWN_KEYS: [&str; 6] = ["domain", "density", "sites", "cost_scale", "backend", "fee"];

#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: TransportProblem,
    pub fee: Option<SplittingFee>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainConfig {
    bounds: Vec<[f64; 2]>,
    resolution: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DensityConfig {
    Uniform,
    Tabulated {
        file: Option<PathBuf>,
        values: Option<Vec<f64>>,
        #[serde(default = "lipschitz")]
        holder_alpha: f64,
    },
}

fn lipschitz() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SitesConfig {
    File {
        file: PathBuf,
    },
    Points(Vec<[f64; 2]>),
    Line(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FeeConfig {
    File { file: PathBuf },
    Inline(Vec<FeePartConfig>),
}

fn section<T: DeserializeOwned>(map: &Map<String, Value>, field: &'static str) -> Result<Option<T>> {
    match map.get(field) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::invalid(field, e.to_string())),
    }
}

fn required<T: DeserializeOwned>(map: &Map<String, Value>, field: &'static str) -> Result<T> {
    section(map, field)?.ok_or_else(|| Error::invalid(field, "missing"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_problem(&text, base)
}

pub fn parse_problem(text: &str, base: &Path) -> Result<LoadedProblem> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::invalid("problem", e.to_string()))?;
    let map = value
        .as_object()
        .ok_or_else(|| Error::invalid("problem", "expected a JSON object"))?;
    if let Some(key) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::invalid(
            "problem",
            format!("unknown field {key:?}; expected one of {KNOWN_KEYS:?}"),
        ));
    }

    let dc: DomainConfig = required(map, "domain")?;
    let domain = DomainSpec::new(dc.bounds, dc.resolution)?;
    let density = match required::<DensityConfig>(map, "density")? {
        DensityConfig::Uniform => DensityField::uniform(&domain),
        DensityConfig::Tabulated {
            file,
            values,
            holder_alpha,
        } => {
            let values = match (file, values) {
                (Some(file), None) => {
                    let (shape, values) = read_density_csv(&resolve(base, &file))?;
                    if shape != domain.resolution() {
                        return Err(Error::invalid(
                            "density",
                            format!(
                                "file grid {shape:?} differs from domain resolution {:?}",
                                domain.resolution()
                            ),
                        ));
                    }
                    values
                }
                (None, Some(values)) => values,
                _ => {
                    return Err(Error::invalid(
                        "density",
                        "tabulated density needs exactly one of file or values",
                    ))
                }
            };
            DensityField::tabulated(&domain, values, holder_alpha)?
        }
    };
    let points = match required::<SitesConfig>(map, "sites")? {
        SitesConfig::File { file } => read_sites_csv(&resolve(base, &file))?,
        SitesConfig::Points(points) => points,
        SitesConfig::Line(xs) => xs.iter().map(|&x| [x, 0.0]).collect(),
    };
    let sites = SiteSet::new(points)?;
    let cost = match section::<f64>(map, "cost_scale")? {
        Some(scale) => QuadraticCost::new(scale)?,
        None => QuadraticCost::default(),
    };
    let backend = section::<Backend>(map, "backend")?.unwrap_or_default();
    let fee = match section::<FeeConfig>(map, "fee")? {
        None => None,
        Some(FeeConfig::Inline(parts)) => Some(fee_from_config(&parts)?),
        Some(FeeConfig::File { file }) => Some(load_fee(&resolve(base, &file))?),
    };
    let problem = TransportProblem::new(domain, density, sites, cost, backend)?;
    if let Some(fee) = &fee {
        fee.check_len(problem.n_sites())?;
    }
    Ok(LoadedProblem { problem, fee })
}

/// A JSON list of fee parts.
pub fn load_fee(path: &Path) -> Result<SplittingFee> {
    let text = read_text(path)?;
    let parts: Vec<FeePartConfig> =
        serde_json::from_str(&text).map_err(|e| Error::invalid("fee", e.to_string()))?;
    fee_from_config(&parts)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_row<T: std::str::FromStr>(
    record: &csv::StringRecord,
    field: &'static str,
    line: usize,
) -> Result<Vec<T>> {
    record
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::invalid(field, format!("line {line}: cannot parse {s:?}")))
        })
        .collect()
}

/// Header row `nx[,ny]`, then the values in row-major order.
pub fn read_density_csv(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut reader = csv_reader(path)?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::invalid("density", "empty density file"))?
        .map_err(|e| Error::Io(e.to_string()))?;
    let shape: Vec<usize> = parse_row(&header, "density", 1)?;
    if shape.is_empty() || shape.len() > 2 {
        return Err(Error::invalid("density", "header must be nx or nx,ny"));
    }
    let mut values = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| Error::Io(e.to_string()))?;
        values.extend(parse_row::<f64>(&record, "density", i + 2)?);
    }
    let expected: usize = shape.iter().product();
    if values.len() != expected {
        return Err(Error::invalid(
            "density",
            format!("header announces {expected} values, file has {}", values.len()),
        ));
    }
    Ok((shape, values))
}

/// One site per row: `x` or `x,y`.
pub fn read_sites_csv(path: &Path) -> Result<Vec<Point>> {
    let mut reader = csv_reader(path)?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Io(e.to_string()))?;
        let row: Vec<f64> = parse_row(&record, "sites", i + 1)?;
        match row.as_slice() {
            [] => continue,
            [x] => points.push([*x, 0.0]),
            [x, y] => points.push([*x, *y]),
            _ => {
                return Err(Error::invalid(
                    "sites",
                    format!("line {}: expected 1 or 2 coordinates", i + 1),
                ))
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub psi: Vec<f64>,
    pub w: Vec<f64>,
    pub masses: Vec<f64>,
    pub transport_cost: f64,
    pub fee_value: f64,
    pub newton_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularization: Option<RegularizationReport>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("sdot-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn inline_one_dimensional_problem() {
        let text = r#"{
            "domain": {"bounds": [[0, 1]], "resolution": [100]},
            "density": {"kind": "uniform"},
            "sites": [0.25, 0.85],
            "cost_scale": 1.0,
            "fee": [
                {"kind": "quadratic", "domain": [0, 1]},
                {"kind": "quadratic", "domain": [0, 1]}
            ]
        }"#;
        let loaded = parse_problem(text, Path::new(".")).unwrap();
        assert_eq!(loaded.problem.n_sites(), 2);
        assert_eq!(loaded.problem.cost().scale, 1.0);
        assert_eq!(loaded.fee.unwrap().len(), 2);
    }

    #[test]
    fn files_are_resolved_next_to_the_problem() {
        let dir = scratch("files");
        fs::write(dir.join("rho.csv"), "2,2\n1,2\n3,4\n").unwrap();
        fs::write(dir.join("sites.csv"), "0.2,0.3\n0.7,0.6\n").unwrap();
        let problem = r#"{
            "domain": {"bounds": [[0, 1], [0, 1]], "resolution": [2, 2]},
            "density": {"kind": "tabulated", "file": "rho.csv"},
            "sites": {"file": "sites.csv"}
        }"#;
        fs::write(dir.join("p.json"), problem).unwrap();
        let loaded = load_problem(&dir.join("p.json")).unwrap();
        assert_eq!(loaded.problem.sites().points()[1], [0.7, 0.6]);
        let v = loaded.problem.density().values();
        assert!((v[3] / v[0] - 4.0).abs() < 1e-12);
        assert!(loaded.fee.is_none());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn errors_name_the_field() {
        let base = r#"{"domain": {"bounds": [[0, 1]], "resolution": [10]}, "density": {"kind": "uniform"}, "sites": [0.5]"#;
        let cases = [
            (format!("{base}, \"colour\": 1}}"), "problem"),
            (format!("{base}, \"cost_scale\": -1}}"), "cost_scale"),
            (format!("{base}, \"backend\": \"mesh\"}}"), "backend"),
            (format!("{base}, \"fee\": [{{\"kind\": \"quadratic\", \"domain\": [0, 2]}}]}}"), "fee.domain"),
            (base.replace("uniform", "smooth") + "}", "density"),
            (base.replace("\"sites\": [0.5]", "\"sites\": \"x\"") + "}", "sites"),
            (base.replace("\"resolution\": [10]", "\"resolution\": [1]") + "}", "domain"),
        ];
        for (text, field) in cases {
            let err = parse_problem(&text, Path::new(".")).unwrap_err();
            match err {
                Error::Invalid { field: f, .. } => assert!(f.starts_with(field), "{f} for {text}"),
                other => panic!("{other} for {text}"),
            }
        }
    }

    #[test]
    fn density_file_shape_is_checked() {
        let dir = scratch("shape");
        fs::write(dir.join("bad.csv"), "3\n1,2\n").unwrap();
        assert!(read_density_csv(&dir.join("bad.csv")).is_err());
        fs::write(dir.join("ok.csv"), "3\n1\n2\n3\n").unwrap();
        assert_eq!(read_density_csv(&dir.join("ok.csv")).unwrap(), (vec![3], vec![1.0, 2.0, 3.0]));
        fs::remove_dir_all(dir).ok();
    }
}
