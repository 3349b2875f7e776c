//! Flat `key = value` configuration files and sweep descriptions.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::combining::CombinerScheme;
use crate::error::{Error, Result};
use crate::scenario::{ApCorrelation, PilotNoise, SystemConfig};

/// Evaluation paths an experiment can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    McMr,
    McLmmse,
    CfMr,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::McMr => "MC-MR",
            Method::McLmmse => "MC-LMMSE",
            Method::CfMr => "CF-MR",
        }
    }

    pub fn from_tag(s: &str) -> Option<Method> {
        [Method::McMr, Method::McLmmse, Method::CfMr].into_iter().find(|m| m.tag() == s)
    }

    pub fn combiner(self) -> CombinerScheme {
        match self {
            Method::McMr | Method::CfMr => CombinerScheme::Mr,
            Method::McLmmse => CombinerScheme::Lmmse,
        }
    }
}

/// Parses a method list such as `mr,lmmse,cf` (sorted, deduplicated).
pub fn parse_methods(s: &str) -> std::result::Result<Vec<Method>, String> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m = match tok.to_ascii_lowercase().as_str() {
            "mr" => Method::McMr,
            "lmmse" => Method::McLmmse,
            "cf" => Method::CfMr,
            other => return Err(format!("unknown method `{other}` (expected mr, lmmse or cf)")),
        };
        out.push(m);
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err("method list is empty".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// a single point at the base configuration
    None,
    M,
    N,
    L,
    DSpacing,
    Asd,
    Combiner,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::None => "none",
            SweepVar::M => "M",
            SweepVar::N => "N",
            SweepVar::L => "L",
            SweepVar::DSpacing => "d_spacing",
            SweepVar::Asd => "asd",
            SweepVar::Combiner => "combiner",
        }
    }

    fn parse(s: &str) -> Option<SweepVar> {
        [
            SweepVar::None,
            SweepVar::M,
            SweepVar::N,
            SweepVar::L,
            SweepVar::DSpacing,
            SweepVar::Asd,
            SweepVar::Combiner,
        ]
        .into_iter()
        .find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Count(usize),
    Real(f64),
    Combiner(CombinerScheme),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Count(n) => write!(f, "{n}"),
            SweepValue::Real(x) => f.write_str(&crate::output::format_g9(*x)),
            SweepValue::Combiner(CombinerScheme::Mr) => f.write_str("mr"),
            SweepValue::Combiner(CombinerScheme::Lmmse) => f.write_str("lmmse"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: Vec<SweepValue>,
    pub methods: Vec<Method>,
    pub out_dir: PathBuf,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            variable: SweepVar::None,
            values: vec![SweepValue::Count(0)],
            methods: vec![Method::McMr, Method::McLmmse, Method::CfMr],
            out_dir: PathBuf::from("results"),
        }
    }
}

impl SweepSpec {
    /// Configuration of one sweep point.
    pub fn apply(&self, base: &SystemConfig, value: SweepValue) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        match (self.variable, value) {
            (SweepVar::None, _) | (SweepVar::Combiner, _) => {}
            (SweepVar::M, SweepValue::Count(n)) => cfg.m_aps = n,
            (SweepVar::N, SweepValue::Count(n)) => cfg.set_ris_elements(n),
            (SweepVar::L, SweepValue::Count(n)) => cfg.l_antennas = n,
            (SweepVar::DSpacing, SweepValue::Real(d)) => {
                cfg.d_h = d;
                cfg.d_v = d;
            }
            (SweepVar::Asd, SweepValue::Real(a)) => cfg.asd_deg = a,
            (var, v) => {
                return Err(Error::config("sweep_values", 0, format!("value {v} does not fit sweep variable {}", var.name())))
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Methods evaluated at one sweep point.
    pub fn methods_at(&self, value: SweepValue) -> Vec<Method> {
        match value {
            SweepValue::Combiner(scheme) => self.methods.iter().copied().filter(|m| m.combiner() == scheme).collect(),
            _ => self.methods.clone(),
        }
    }
}

fn parse_sweep_value(var: SweepVar, tok: &str) -> std::result::Result<SweepValue, String> {
    match var {
        SweepVar::None => Err("no sweep variable set".into()),
        SweepVar::M | SweepVar::N | SweepVar::L => tok
            .parse::<usize>()
            .map(SweepValue::Count)
            .map_err(|_| format!("`{tok}` is not a non-negative integer")),
        SweepVar::DSpacing | SweepVar::Asd => tok
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(SweepValue::Real)
            .ok_or_else(|| format!("`{tok}` is not a finite number")),
        SweepVar::Combiner => match tok.to_ascii_lowercase().as_str() {
            "mr" => Ok(SweepValue::Combiner(CombinerScheme::Mr)),
            "lmmse" => Ok(SweepValue::Combiner(CombinerScheme::Lmmse)),
            _ => Err(format!("`{tok}` is not a combiner (mr or lmmse)")),
        },
    }
}

/// Line number at which each key was last set, for error reporting.
#[derive(Debug, Clone, Default)]
pub struct KeyLines(HashMap<String, usize>);

impl KeyLines {
    pub fn line_of(&self, key: &str) -> usize {
        self.0.get(key).copied().unwrap_or(0)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, line: usize, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::config(key, line, format!("cannot parse `{v}`")))
}

fn parse_real(key: &str, line: usize, v: &str) -> Result<f64> {
    let x: f64 = parse_num(key, line, v)?;
    if !x.is_finite() {
        return Err(Error::config(key, line, format!("`{v}` is not finite")));
    }
    Ok(x)
}

/// Parses configuration text on top of the defaults.
pub fn parse_config(text: &str) -> Result<(SystemConfig, SweepSpec)> {
    let mut cfg = SystemConfig::default();
    let mut sweep = SweepSpec::default();
    let mut lines = KeyLines::default();
    let mut raw_values: Option<(usize, String)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::config(content, line, "expected `key = value`"))?;
        let (key, v) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::config("", line, "missing key"));
        }
        match key {
            "M" => cfg.m_aps = parse_num(key, line, v)?,
            "K" => cfg.k_ues = parse_num(key, line, v)?,
            "L" => cfg.l_antennas = parse_num(key, line, v)?,
            "N" => cfg.set_ris_elements(parse_num(key, line, v)?),
            "N_H" => cfg.n_h = parse_num(key, line, v)?,
            "N_V" => cfg.n_v = parse_num(key, line, v)?,
            "d_h" => cfg.d_h = parse_real(key, line, v)?,
            "d_v" => cfg.d_v = parse_real(key, line, v)?,
            "d_spacing" => {
                cfg.d_h = parse_real(key, line, v)?;
                cfg.d_v = cfg.d_h;
                lines.0.insert("d_h".into(), line);
                lines.0.insert("d_v".into(), line);
            }
            "wavelength" => cfg.wavelength = parse_real(key, line, v)?,
            "tau_c" => cfg.tau_c = parse_num(key, line, v)?,
            "tau_p" => cfg.tau_p = parse_num(key, line, v)?,
            "p_dbm" => cfg.p_dbm = parse_real(key, line, v)?,
            "pilot_p_dbm" => cfg.pilot_p_dbm = parse_real(key, line, v)?,
            "sigma2_dbm" => cfg.sigma2_dbm = parse_real(key, line, v)?,
            "asd" => cfg.asd_deg = parse_real(key, line, v)?,
            "ap_spacing" => cfg.ap_spacing = parse_real(key, line, v)?,
            "area_ap" => cfg.area_ap = parse_real(key, line, v)?,
            "area_ue" => cfg.area_ue = parse_real(key, line, v)?,
            "h_ap" => cfg.h_ap = parse_real(key, line, v)?,
            "h_ue" => cfg.h_ue = parse_real(key, line, v)?,
            "h_ris" => cfg.h_ris = parse_real(key, line, v)?,
            "phase_shift" => cfg.phase_shift = parse_real(key, line, v)?,
            "shadow_std_db" => cfg.shadow_std_db = parse_real(key, line, v)?,
            "direct_loss_db" => cfg.direct_loss_db = parse_real(key, line, v)?,
            "ap_correlation" => {
                cfg.ap_correlation = match v {
                    "local" => ApCorrelation::LocalScattering,
                    "iid" => ApCorrelation::Uncorrelated,
                    _ => return Err(Error::config(key, line, format!("`{v}` is not `local` or `iid`"))),
                }
            }
            "pilot_noise" => {
                cfg.pilot_noise = match v {
                    "despread" => PilotNoise::Despread,
                    "literal" => PilotNoise::Literal,
                    _ => return Err(Error::config(key, line, format!("`{v}` is not `despread` or `literal`"))),
                }
            }
            "seed" => cfg.seed = parse_num(key, line, v)?,
            "setups" => cfg.n_setups = parse_num(key, line, v)?,
            "fading" => cfg.n_fading = parse_num(key, line, v)?,
            "methods" => sweep.methods = parse_methods(v).map_err(|e| Error::config(key, line, e))?,
            "sweep_var" => {
                sweep.variable = SweepVar::parse(v)
                    .ok_or_else(|| Error::config(key, line, format!("`{v}` is not a sweep variable")))?
            }
            "sweep_values" => raw_values = Some((line, v.to_string())),
            "out" => sweep.out_dir = PathBuf::from(v),
            _ => return Err(Error::config(key, line, "unknown key")),
        }
        lines.0.insert(key.to_string(), line);
    }

    match (sweep.variable, raw_values) {
        (SweepVar::None, Some((line, _))) => {
            return Err(Error::config("sweep_values", line, "sweep_values given without sweep_var"))
        }
        (SweepVar::None, None) => {}
        (var, None) => {
            return Err(Error::config("sweep_values", lines.line_of("sweep_var"), format!("sweep over {} needs values", var.name())))
        }
        (var, Some((line, text))) => {
            let values = text
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| parse_sweep_value(var, t))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::config("sweep_values", line, e))?;
            if values.is_empty() {
                return Err(Error::config("sweep_values", line, "empty value list"));
            }
            sweep.values = values;
        }
    }

    validate_with_lines(&cfg, &lines)?;
    for &value in &sweep.values {
        sweep.apply(&cfg, value).map_err(|e| locate(e, &lines))?;
    }
    Ok((cfg, sweep))
}

fn locate(e: Error, lines: &KeyLines) -> Error {
    match e {
        Error::Config { key, line: 0, msg } => {
            let line = lines.line_of(&key);
            Error::Config { key, line, msg }
        }
        other => other,
    }
}

/// Validates and attaches the line where the offending key was set.
pub fn validate_with_lines(cfg: &SystemConfig, lines: &KeyLines) -> Result<()> {
    cfg.validate().map_err(|e| locate(e, lines))
}

pub fn load_config(path: &Path) -> Result<(SystemConfig, SweepSpec)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}
