//! Binary cube files and the key=value configuration format.
//!
//! Cube file layout (all little-endian):
//!
//! | offset | size      | content                          |
//! |--------|-----------|----------------------------------|
//! | 0      | 8         | ASCII `HSICUBE1`                 |
//! | 8      | 4 × 3     | `h`, `w`, `p` as `u32`            |
//! | 20     | 4·h·w·p   | `f32` payload, mode-1 fastest     |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::{DeadlineSpec, NoiseSpec, Range, StripeKind};
use crate::priors::TvWeights;
use crate::solver::SolverConfig;
use crate::tensor::HsiCube;
use crate::tucker::TuckerRanks;

pub const CUBE_MAGIC: &[u8; 8] = b"HSICUBE1";
const HEADER_LEN: usize = 20;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), message: message.into() }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Serializes a cube; values are stored as `f32`.
pub fn encode_cube(cube: &HsiCube) -> Result<Vec<u8>> {
    if !cube.is_finite() {
        return Err(Error::arg("refusing to write a cube with non-finite values"));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * cube.len());
    out.extend_from_slice(CUBE_MAGIC);
    for d in cube.dims() {
        let d = u32::try_from(d).map_err(|_| Error::arg(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in cube.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses the bytes of a cube file; `path` is only used in error messages.
pub fn decode_cube(bytes: &[u8], path: &Path) -> Result<HsiCube> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            path,
            format!("truncated header: expected {HEADER_LEN} bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[..8] != CUBE_MAGIC {
        return Err(format_err(path, "bad magic, expected HSICUBE1"));
    }
    let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let dims = [dim(8), dim(12), dim(16)];
    if dims.contains(&0) {
        return Err(format_err(path, format!("header dims must be positive, got {dims:?}")));
    }
    let count = dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(dims[2]))
        .ok_or_else(|| format_err(path, "header dims overflow"))?;
    let expected = HEADER_LEN + 4 * count;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("payload size mismatch: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in bytes[HEADER_LEN..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(format_err(path, "payload contains non-finite values"));
        }
        data.push(v as f64);
    }
    HsiCube::new(dims, data)
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_cube(&bytes, path)
}

pub fn write_cube(path: impl AsRef<Path>, cube: &HsiCube) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_cube(cube)?;
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Min-max normalization of every band to `[0, 1]`; constant bands become 0.
pub fn normalize_bands(cube: &HsiCube) -> HsiCube {
    let mut out = cube.clone();
    for k in 0..cube.dims()[2] {
        let band = out.band_mut(k);
        let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for v in band.iter_mut() {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }
    out
}

/// Solver settings and noise description read from one key=value file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub noise: NoiseSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), noise: NoiseSpec::case(1, 0).expect("case 1 exists") }
    }
}

pub const SOLVER_KEYS: &[&str] = &[
    "lambda1",
    "lambda2",
    "beta0",
    "beta_max",
    "beta_growth",
    "weights",
    "ranks_x",
    "ranks_b",
    "epsilon",
    "k_max",
    "p_override",
    "hooi_max_iter",
    "hooi_tol",
    "model_stripes",
    "stripe_shrink",
];

pub const NOISE_KEYS: &[&str] = &[
    "case",
    "seed",
    "gaussian_sigma",
    "impulse_ratio",
    "stripe",
    "stripe_coverage",
    "stripe_amplitude",
    "deadline_band_fraction",
    "deadline_count",
    "deadline_width",
];

/// Splits `key = value` lines; `#` starts a comment. Duplicate or unknown keys are rejected.
pub fn parse_kv(text: &str, allowed: &[&str]) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(format!("line {}: unknown key '{key}'", n + 1));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key '{key}'", n + 1));
        }
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("{key}: cannot parse '{v}'"))
}

fn list<T: std::str::FromStr>(key: &str, v: &str, n: usize) -> std::result::Result<Vec<T>, String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("{key}: expected {n} comma-separated values, got '{v}'"));
    }
    parts.iter().map(|p| num(key, p)).collect()
}

fn range(key: &str, v: &str) -> std::result::Result<Range, String> {
    if v.contains(',') {
        let r: Vec<f64> = list(key, v, 2)?;
        Ok(Range::new(r[0], r[1]))
    } else {
        Ok(Range::fixed(num(key, v)?))
    }
}

fn pair(key: &str, v: &str) -> std::result::Result<(usize, usize), String> {
    let r: Vec<usize> = list(key, v, 2)?;
    Ok((r[0], r[1]))
}

fn ranks(key: &str, v: &str) -> std::result::Result<Option<TuckerRanks>, String> {
    if v == "auto" {
        return Ok(None);
    }
    let r: Vec<usize> = list(key, v, 3)?;
    TuckerRanks::new(r[0], r[1], r[2]).map(Some).map_err(|e| format!("{key}: {e}"))
}

fn boolean(key: &str, v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got '{v}'")),
    }
}

/// Applies solver keys onto `cfg`.
fn apply_solver(map: &BTreeMap<String, String>, cfg: &mut SolverConfig) -> std::result::Result<(), String> {
    for (key, v) in map {
        let key = key.as_str();
        match key {
            "lambda1" => cfg.lambda1 = num(key, v)?,
            "lambda2" => cfg.lambda2 = num(key, v)?,
            "beta0" => cfg.beta0 = num(key, v)?,
            "beta_max" => cfg.beta_max = num(key, v)?,
            "beta_growth" => cfg.beta_growth = num(key, v)?,
            "weights" => {
                let w: Vec<f64> = list(key, v, 3)?;
                cfg.weights = TvWeights::raw(w[0], w[1], w[2]);
            }
            "ranks_x" => cfg.ranks_x = ranks(key, v)?,
            "ranks_b" => cfg.ranks_b = ranks(key, v)?,
            "epsilon" => cfg.epsilon = num(key, v)?,
            "k_max" => cfg.k_max = num(key, v)?,
            "p_override" => {
                cfg.p_override = if v == "auto" {
                    None
                } else {
                    let p: Vec<f64> = list(key, v, 3)?;
                    Some([p[0], p[1], p[2]])
                }
            }
            "hooi_max_iter" => cfg.hooi_max_iter = num(key, v)?,
            "hooi_tol" => cfg.hooi_tol = num(key, v)?,
            "model_stripes" => cfg.model_stripes = boolean(key, v)?,
            "stripe_shrink" => cfg.stripe_shrink = num(key, v)?,
            _ => {}
        }
    }
    cfg.validate(None).map_err(|e| e.to_string())
}

/// Builds a noise spec: the `case` preset (default 1) with the remaining keys as overrides.
fn build_noise(map: &BTreeMap<String, String>) -> std::result::Result<NoiseSpec, String> {
    let case: u8 = map.get("case").map(|v| num("case", v)).transpose()?.unwrap_or(1);
    let seed: u64 = map.get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(0);
    let mut spec = NoiseSpec::case(case, seed).map_err(|e| e.to_string())?;
    if let Some(v) = map.get("gaussian_sigma") {
        spec.gaussian_sigma = range("gaussian_sigma", v)?;
    }
    if let Some(v) = map.get("impulse_ratio") {
        spec.impulse_ratio = range("impulse_ratio", v)?;
    }
    if map.contains_key("stripe") || map.contains_key("stripe_coverage") {
        let name = map.get("stripe").map(String::as_str).unwrap_or(spec.stripe.name());
        let coverage = match map.get("stripe_coverage") {
            Some(v) => range("stripe_coverage", v)?,
            None => spec.stripe.coverage(),
        };
        spec.stripe = StripeKind::from_parts(name, coverage).map_err(|e| e.to_string())?;
    }
    if let Some(v) = map.get("stripe_amplitude") {
        spec.stripe_amplitude = num("stripe_amplitude", v)?;
    }
    if let Some(v) = map.get("deadline_band_fraction") {
        spec.deadlines.band_fraction = num("deadline_band_fraction", v)?;
    }
    if let Some(v) = map.get("deadline_count") {
        spec.deadlines.count = pair("deadline_count", v)?;
    }
    if let Some(v) = map.get("deadline_width") {
        spec.deadlines.width = pair("deadline_width", v)?;
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Parses a config accepting both solver and noise keys.
pub fn parse_run_config(text: &str) -> std::result::Result<RunConfig, String> {
    let allowed: Vec<&str> = SOLVER_KEYS.iter().chain(NOISE_KEYS).copied().collect();
    let map = parse_kv(text, &allowed)?;
    let mut solver = SolverConfig::default();
    apply_solver(&map, &mut solver)?;
    Ok(RunConfig { solver, noise: build_noise(&map)? })
}

/// Parses a noise-only description such as a simulation manifest.
pub fn parse_noise_spec(text: &str) -> std::result::Result<NoiseSpec, String> {
    build_noise(&parse_kv(text, NOISE_KEYS)?)
}

pub fn read_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_run_config(&text).map_err(|m| format_err(path, m))
}

fn fmt_range(r: Range) -> String {
    if r.lo == r.hi {
        format!("{:?}", r.lo)
    } else {
        format!("{:?},{:?}", r.lo, r.hi)
    }
}

fn fmt_ranks(r: Option<TuckerRanks>) -> String {
    match r {
        Some(r) => format!("{},{},{}", r.r1, r.r2, r.r3),
        None => "auto".into(),
    }
}

/// Every noise key, written explicitly.
pub fn noise_spec_to_kv(spec: &NoiseSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "case = {}", spec.case_id);
    let _ = writeln!(s, "seed = {}", spec.seed);
    let _ = writeln!(s, "gaussian_sigma = {}", fmt_range(spec.gaussian_sigma));
    let _ = writeln!(s, "impulse_ratio = {}", fmt_range(spec.impulse_ratio));
    let _ = writeln!(s, "stripe = {}", spec.stripe.name());
    let _ = writeln!(s, "stripe_coverage = {}", fmt_range(spec.stripe.coverage()));
    let _ = writeln!(s, "stripe_amplitude = {:?}", spec.stripe_amplitude);
    let DeadlineSpec { band_fraction, count, width } = spec.deadlines;
    let _ = writeln!(s, "deadline_band_fraction = {band_fraction:?}");
    let _ = writeln!(s, "deadline_count = {},{}", count.0, count.1);
    let _ = writeln!(s, "deadline_width = {},{}", width.0, width.1);
    s
}

/// Every solver key, written explicitly.
pub fn solver_config_to_kv(cfg: &SolverConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lambda1 = {:?}", cfg.lambda1);
    let _ = writeln!(s, "lambda2 = {:?}", cfg.lambda2);
    let _ = writeln!(s, "beta0 = {:?}", cfg.beta0);
    let _ = writeln!(s, "beta_max = {:?}", cfg.beta_max);
    let _ = writeln!(s, "beta_growth = {:?}", cfg.beta_growth);
    let w = cfg.weights;
    let _ = writeln!(s, "weights = {:?},{:?},{:?}", w.w_h, w.w_w, w.w_p);
    let _ = writeln!(s, "ranks_x = {}", fmt_ranks(cfg.ranks_x));
    let _ = writeln!(s, "ranks_b = {}", fmt_ranks(cfg.ranks_b));
    let _ = writeln!(s, "epsilon = {:?}", cfg.epsilon);
    let _ = writeln!(s, "k_max = {}", cfg.k_max);
    match cfg.p_override {
        Some(p) => {
            let _ = writeln!(s, "p_override = {:?},{:?},{:?}", p[0], p[1], p[2]);
        }
        None => {
            let _ = writeln!(s, "p_override = auto");
        }
    }
    let _ = writeln!(s, "hooi_max_iter = {}", cfg.hooi_max_iter);
    let _ = writeln!(s, "hooi_tol = {:?}", cfg.hooi_tol);
    let _ = writeln!(s, "model_stripes = {}", cfg.model_stripes);
    let _ = writeln!(s, "stripe_shrink = {:?}", cfg.stripe_shrink);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_payload_reports_sizes() {
        let cube = HsiCube::filled([2, 2, 2], 0.5).unwrap();
        let bytes = encode_cube(&cube).unwrap();
        let err = decode_cube(&bytes[..bytes.len() - 3], Path::new("x.cube")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 52") && msg.contains("found 49"), "{msg}");
    }

    #[test]
    fn bad_magic_and_zero_dims() {
        let cube = HsiCube::filled([2, 2, 2], 0.5).unwrap();
        let mut bytes = encode_cube(&cube).unwrap();
        bytes[0] = b'X';
        assert!(decode_cube(&bytes, Path::new("x")).is_err());
        let mut header = CUBE_MAGIC.to_vec();
        header.extend_from_slice(&0u32.to_le_bytes());
        header.extend_from_slice(&1u32.to_le_bytes());
        header.extend_from_slice(&1u32.to_le_bytes());
        let err = decode_cube(&header, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("positive"));
    }

    #[test]
    fn non_finite_payload_rejected() {
        let cube = HsiCube::filled([1, 1, 2], 0.5).unwrap();
        let mut bytes = encode_cube(&cube).unwrap();
        bytes[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_cube(&bytes, Path::new("x")).is_err());
    }

    #[test]
    fn header_layout() {
        let cube = HsiCube::new([2, 1, 1], vec![1.0, -2.0]).unwrap();
        let bytes = encode_cube(&cube).unwrap();
        assert_eq!(&bytes[..8], b"HSICUBE1");
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn normalization_is_per_band() {
        let cube = HsiCube::new([2, 1, 2], vec![2.0, 4.0, 5.0, 5.0]).unwrap();
        let n = normalize_bands(&cube);
        assert_eq!(n.as_slice(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(parse_run_config("lambda3 = 1").unwrap_err().contains("unknown key"));
        assert!(parse_run_config("lambda1 = 1\nlambda1 = 2").unwrap_err().contains("duplicate"));
        assert!(parse_run_config("lambda1 1").is_err());
        assert!(parse_run_config("lambda1 = -1").is_err());
        assert!(parse_run_config("stripe = zigzag").is_err());
        assert!(parse_noise_spec("lambda1 = 0.1").is_err());
    }

    #[test]
    fn config_overrides() {
        let cfg = parse_run_config(
            "# comment\nlambda1 = 0.01\nranks_x = 4,4,2 # trailing\nmodel_stripes = false\np_override = 0.5,0.6,0.7\ncase = 4\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.solver.lambda1, 0.01);
        assert_eq!(cfg.solver.ranks_x, Some(TuckerRanks::new(4, 4, 2).unwrap()));
        assert!(!cfg.solver.model_stripes);
        assert_eq!(cfg.solver.p_override, Some([0.5, 0.6, 0.7]));
        assert_eq!(cfg.noise.stripe, StripeKind::Periodic(0.4));
        assert_eq!(cfg.noise.seed, 9);
    }

    #[test]
    fn solver_config_round_trip() {
        let cfg = SolverConfig {
            lambda1: 0.0123,
            ranks_b: Some(TuckerRanks::new(1, 3, 2).unwrap()),
            p_override: Some([0.642, 0.684, 0.485]),
            ..SolverConfig::default()
        };
        let back = parse_run_config(&solver_config_to_kv(&cfg)).unwrap();
        assert_eq!(back.solver, cfg);
    }
}
