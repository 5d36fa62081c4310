use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::SweepRow;
use crate::error::{QedError, Result};
use crate::protocol::Backend;

pub const CSV_HEADER: [&str; 7] = ["p", "p_u", "tau2_us", "metric", "value", "P_DN", "stderr"];

pub const DEFAULT_PRECISION: usize = 12;

/// Shortest form with 12 significant digits, like C's `%.12g`.
pub fn format_g12(x: f64) -> String {
    format_g(x, DEFAULT_PRECISION)
}

/// C's `%.{digits}g`.
pub fn format_g(x: f64, digits: usize) -> String {
    let digits = digits.max(1) as i32;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (digits - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    write_csv_with_precision(rows, out, DEFAULT_PRECISION)
}

pub fn write_csv_with_precision<W: Write>(rows: &[SweepRow], out: W, digits: usize) -> Result<()> {
    let opt = |x: Option<f64>| x.map(|v| format_g(v, digits)).unwrap_or_default();
    let io = |e: csv::Error| QedError::Config(format!("csv output: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            opt(r.p),
            opt(r.p_u),
            format_g(r.tau2_us, digits),
            r.metric.clone(),
            opt(r.value),
            opt(r.p_dn),
            opt(r.stderr),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| QedError::Config(format!("csv output: {e}")))?;
    Ok(())
}

/// SHA-256 of the compact JSON form (object keys sorted).
pub fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

/// Unix seconds, or `SOURCE_DATE_EPOCH` when set.
pub fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub backend: Backend,
    pub shots: u64,
    pub seed: u64,
    pub timestamp: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, config: &C, backend: Backend, shots: u64, seed: u64) -> Result<Self> {
        let config =
            serde_json::to_value(config).map_err(|e| QedError::Config(format!("manifest: {e}")))?;
        Ok(Self {
            tool: "qed".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            backend,
            shots,
            seed,
            timestamp: timestamp(),
            config_hash: config_hash(&config),
            config,
        })
    }
}
