//! Domain files (canonical JSON) and batch files (CSV plus a JSON sidecar
//! carrying the config and digests).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{CombRule, CombSpec, DomainRef, GeometryError, Tooth};
use crate::stochastic::{ExitSample, Hit, SampleBatch, SimConfig};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid domain file: {0}")]
    Schema(String),
    #[error("invalid domain: {0}")]
    Invalid(#[from] GeometryError),
    #[error("batch check failed: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

/// 17 significant digits; infinities become the string `"inf"`.
pub fn fmt_float(v: f64) -> String {
    if v == f64::INFINITY {
        "\"inf\"".into()
    } else if v == f64::NEG_INFINITY {
        "\"-inf\"".into()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_float(v: &Value, what: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| IoError::Schema(format!("{what} is not a number"))),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        _ => Err(IoError::Schema(format!("{what} must be a number"))),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".into(), fmt_float)
}

/// Canonical one-line JSON for a domain. Keys come in a fixed order, so
/// equal domains give identical bytes.
pub fn domain_to_json(d: &DomainRef) -> String {
    let (kind, family, theta, b0, teeth, min_gap, extra) = match d {
        DomainRef::Comb(spec) => {
            let (family, theta, teeth, extra) = match spec.rule() {
                CombRule::Case1 { theta } => ("\"case1\"", Some(*theta), None, String::new()),
                CombRule::Case2 => ("\"case2\"", None, None, String::new()),
                CombRule::Case3 => ("\"case3\"", None, None, String::new()),
                CombRule::Explicit { teeth, extend } => {
                    let list: Vec<String> = teeth
                        .iter()
                        .map(|t| format!("[{},{},{}]", t.n, fmt_float(t.x), fmt_float(t.b)))
                        .collect();
                    let extra = if *extend { ",\"extend\":true".to_string() } else { String::new() };
                    ("\"explicit\"", None, Some(format!("[{}]", list.join(","))), extra)
                }
            };
            ("comb", family, theta, None, teeth, Some(spec.min_gap()), extra)
        }
        DomainRef::Sector { theta, vertex_x } => {
            let extra = if *vertex_x != 0.0 { format!(",\"vertex_x\":{}", fmt_float(*vertex_x)) } else { String::new() };
            ("sector", "null", Some(*theta), None, None, None, extra)
        }
        DomainRef::SlitPlane { b0 } => ("slitplane", "null", None, Some(*b0), None, None, String::new()),
        DomainRef::UpperHalfPlane => ("halfplane", "null", None, None, None, None, String::new()),
    };
    format!(
        "{{\"kind\":\"{kind}\",\"family\":{family},\"theta\":{},\"b0\":{},\"teeth\":{},\"min_gap\":{}{extra}}}",
        opt(theta),
        opt(b0),
        teeth.unwrap_or_else(|| "null".into()),
        opt(min_gap),
    )
}

pub fn domain_digest(d: &DomainRef) -> String {
    sha256_hex(domain_to_json(d).as_bytes())
}

fn domain_from_value(v: &Value) -> Result<DomainRef> {
    let obj = v.as_object().ok_or_else(|| IoError::Schema("expected a JSON object".into()))?;
    const KEYS: [&str; 8] = ["kind", "family", "theta", "b0", "teeth", "min_gap", "extend", "vertex_x"];
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(IoError::Schema(format!("unknown key {k:?}")));
    }
    let get = |k: &str| obj.get(k).filter(|v| !v.is_null());
    let num = |k: &str| get(k).map(|v| parse_float(v, k)).transpose();
    let need = |k: &str| num(k)?.ok_or_else(|| IoError::Schema(format!("{k} is required")));
    let kind = get("kind").and_then(Value::as_str).ok_or_else(|| IoError::Schema("kind is required".into()))?;
    let family = get("family").map(|v| v.as_str().ok_or_else(|| IoError::Schema("family must be a string".into()))).transpose()?;
    // Fields that do not apply to the kind must be null or absent.
    let unused: &[&str] = match (kind, family) {
        ("comb", Some("case1")) => &["b0", "teeth", "extend", "vertex_x"],
        ("comb", Some("case2" | "case3")) => &["theta", "b0", "teeth", "extend", "vertex_x"],
        ("comb", _) => &["theta", "b0", "vertex_x"],
        ("sector", _) => &["family", "b0", "teeth", "min_gap", "extend"],
        ("slitplane", _) => &["family", "theta", "teeth", "min_gap", "extend", "vertex_x"],
        _ => &["family", "theta", "b0", "teeth", "min_gap", "extend", "vertex_x"],
    };
    if let Some(k) = unused.iter().find(|k| get(k).is_some()) {
        return Err(IoError::Schema(format!("{k} does not apply to this domain")));
    }
    Ok(match kind {
        "comb" => {
            let spec = match family {
                Some("case1") => CombSpec::case1(need("theta")?)?,
                Some("case2") => CombSpec::case2(),
                Some("case3") => CombSpec::case3(),
                Some("explicit") => {
                    let rows = get("teeth")
                        .and_then(Value::as_array)
                        .ok_or_else(|| IoError::Schema("explicit combs need teeth".into()))?;
                    let mut teeth = Vec::with_capacity(rows.len());
                    for row in rows {
                        let cells = row.as_array().filter(|r| r.len() == 3).ok_or_else(|| {
                            IoError::Schema("each tooth must be [n, x, b]".into())
                        })?;
                        let n = cells[0].as_i64().ok_or_else(|| IoError::Schema("tooth index must be an integer".into()))?;
                        teeth.push(Tooth { n, x: parse_float(&cells[1], "x")?, b: parse_float(&cells[2], "b")? });
                    }
                    let extend = match get("extend") {
                        None => false,
                        Some(v) => v.as_bool().ok_or_else(|| IoError::Schema("extend must be a boolean".into()))?,
                    };
                    CombSpec::explicit(teeth, num("min_gap")?, extend)?
                }
                other => return Err(IoError::Schema(format!("unknown comb family {other:?}"))),
            };
            if let (Some(gap), true) = (num("min_gap")?, spec.is_rule_based()) {
                if gap != spec.min_gap() {
                    return Err(IoError::Schema(format!("min_gap {gap} disagrees with the rule's {}", spec.min_gap())));
                }
            }
            DomainRef::Comb(spec)
        }
        "sector" => DomainRef::sector(need("theta")?, num("vertex_x")?.unwrap_or(0.0))?,
        "slitplane" => DomainRef::slit_plane(need("b0")?)?,
        "halfplane" => DomainRef::UpperHalfPlane,
        other => return Err(IoError::Schema(format!("unknown kind {other:?}"))),
    })
}

pub fn domain_from_json(text: &str) -> Result<DomainRef> {
    domain_from_value(&serde_json::from_str(text)?)
}

pub fn save_domain(path: &Path, d: &DomainRef) -> Result<()> {
    write(path, &(domain_to_json(d) + "\n"))
}

pub fn load_domain(path: &Path) -> Result<DomainRef> {
    domain_from_json(&read(path)?)
}

pub fn config_to_json(cfg: &SimConfig) -> String {
    format!(
        "{{\"step_factor\":{},\"dt_max\":{},\"eps_absorb\":{},\"t_cap\":{},\"r_stop\":{},\"master_seed\":{}}}",
        fmt_float(cfg.step_factor),
        fmt_float(cfg.dt_max),
        fmt_float(cfg.eps_absorb),
        fmt_float(cfg.t_cap),
        opt(cfg.r_stop),
        cfg.master_seed
    )
}

fn config_from_value(v: &Value) -> Result<SimConfig> {
    let obj = v.as_object().ok_or_else(|| IoError::Schema("config must be an object".into()))?;
    let num = |k: &str| {
        obj.get(k).ok_or_else(|| IoError::Schema(format!("config.{k} is required"))).and_then(|v| parse_float(v, k))
    };
    let r_stop = match obj.get("r_stop") {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_float(v, "r_stop")?),
    };
    Ok(SimConfig {
        step_factor: num("step_factor")?,
        dt_max: num("dt_max")?,
        eps_absorb: num("eps_absorb")?,
        t_cap: num("t_cap")?,
        r_stop,
        master_seed: obj
            .get("master_seed")
            .and_then(Value::as_u64)
            .ok_or_else(|| IoError::Schema("config.master_seed must be an unsigned integer".into()))?,
    })
}

fn hit_fields(hit: Hit) -> (&'static str, String) {
    match hit {
        Hit::Ray { tooth, upper } => ("ray", format!("{tooth}:{}", if upper { '+' } else { '-' })),
        Hit::Edge(id) => ("edge", id.to_string()),
        Hit::Circle(id) => ("circle", id.to_string()),
        Hit::Capped => ("capped", String::new()),
    }
}

fn parse_hit(kind: &str, id: &str) -> Result<Hit> {
    let bad = || IoError::Mismatch(format!("bad hit {kind:?}/{id:?}"));
    Ok(match kind {
        "ray" => {
            let (n, sign) = id.split_once(':').ok_or_else(bad)?;
            Hit::Ray {
                tooth: n.parse().map_err(|_| bad())?,
                upper: match sign {
                    "+" => true,
                    "-" => false,
                    _ => return Err(bad()),
                },
            }
        }
        "edge" => Hit::Edge(id.parse().map_err(|_| bad())?),
        "circle" => Hit::Circle(id.parse().map_err(|_| bad())?),
        "capped" => Hit::Capped,
        _ => return Err(bad()),
    })
}

pub const BATCH_HEADER: [&str; 8] = ["sample_id", "tau", "exit_x", "exit_y", "hit_kind", "hit_id", "n_steps", "capped"];

/// Sample rows as CSV. Floats use the shortest text that reads back to
/// the same bits.
pub fn batch_csv(batch: &SampleBatch) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BATCH_HEADER)?;
    for (i, s) in batch.samples.iter().enumerate() {
        let (kind, id) = hit_fields(s.hit);
        w.write_record([
            i.to_string(),
            format!("{:e}", s.tau),
            format!("{:e}", s.exit_point.re),
            format!("{:e}", s.exit_point.im),
            kind.to_string(),
            id,
            s.n_steps.to_string(),
            u8::from(s.capped()).to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| IoError::Mismatch(e.to_string()))
}

/// Sidecar next to a batch file: `runs.csv` -> `runs.csv.json`.
pub fn sidecar_path(batch: &Path) -> PathBuf {
    let mut name = batch.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn sidecar_json(batch: &SampleBatch, csv_bytes: &[u8]) -> String {
    format!(
        "{{\"m\":{},\"z0\":[{},{}],\"config\":{},\"domain\":{},\"domain_digest\":\"{}\",\"config_digest\":\"{}\",\"samples_sha256\":\"{}\"}}\n",
        batch.len(),
        fmt_float(batch.z0.re),
        fmt_float(batch.z0.im),
        config_to_json(&batch.config),
        domain_to_json(&batch.domain),
        domain_digest(&batch.domain),
        sha256_hex(config_to_json(&batch.config).as_bytes()),
        sha256_hex(csv_bytes),
    )
}

pub fn save_batch(path: &Path, batch: &SampleBatch) -> Result<()> {
    let csv_bytes = batch_csv(batch)?;
    fs::write(path, &csv_bytes).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    write(&sidecar_path(path), &sidecar_json(batch, &csv_bytes))
}

/// Reads a batch back, checking row count and all three digests.
pub fn load_batch(path: &Path) -> Result<SampleBatch> {
    let csv_bytes = fs::read(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    let side: Value = serde_json::from_str(&read(&sidecar_path(path))?)?;
    let side: &Map<String, Value> = side.as_object().ok_or_else(|| IoError::Schema("sidecar must be an object".into()))?;
    let field = |k: &str| side.get(k).ok_or_else(|| IoError::Mismatch(format!("sidecar lacks {k}")));
    let text = |k: &str| field(k).and_then(|v| v.as_str().ok_or_else(|| IoError::Mismatch(format!("{k} must be a string"))));

    let domain = domain_from_value(field("domain")?)?;
    if domain_digest(&domain) != text("domain_digest")? {
        return Err(IoError::Mismatch("domain digest differs".into()));
    }
    let config = config_from_value(field("config")?)?;
    if sha256_hex(config_to_json(&config).as_bytes()) != text("config_digest")? {
        return Err(IoError::Mismatch("config digest differs".into()));
    }
    if sha256_hex(&csv_bytes) != text("samples_sha256")? {
        return Err(IoError::Mismatch("sample rows differ from the recorded digest".into()));
    }
    let z0 = field("z0")?
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| IoError::Mismatch("z0 must be [x, y]".into()))?;
    let z0 = Complex64::new(parse_float(&z0[0], "z0")?, parse_float(&z0[1], "z0")?);
    let m = field("m")?.as_u64().ok_or_else(|| IoError::Mismatch("m must be an integer".into()))? as usize;

    let mut reader = csv::Reader::from_reader(csv_bytes.as_slice());
    if reader.headers()?.iter().ne(BATCH_HEADER) {
        return Err(IoError::Mismatch("unexpected CSV header".into()));
    }
    let mut samples = Vec::with_capacity(m);
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let num = |j: usize| -> Result<f64> {
            row[j].parse().map_err(|_| IoError::Mismatch(format!("row {i}: bad number {:?}", &row[j])))
        };
        if row[0].parse::<usize>().ok() != Some(i) {
            return Err(IoError::Mismatch(format!("row {i}: sample_id out of order")));
        }
        let hit = parse_hit(&row[4], &row[5])?;
        if (hit == Hit::Capped) != (&row[7] == "1") {
            return Err(IoError::Mismatch(format!("row {i}: capped flag disagrees with hit kind")));
        }
        samples.push(ExitSample {
            tau: num(1)?,
            exit_point: Complex64::new(num(2)?, num(3)?),
            hit,
            n_steps: row[6].parse().map_err(|_| IoError::Mismatch(format!("row {i}: bad step count")))?,
        });
    }
    if samples.len() != m {
        return Err(IoError::Mismatch(format!("{} rows, sidecar says {m}", samples.len())));
    }
    Ok(SampleBatch { domain, z0, config, samples })
}
