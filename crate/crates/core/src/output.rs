//! CSV emission of SE reports and their empirical CDFs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Method;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentResult, SEReport};

pub const SWEEP_HEADER: &str = "sweep_var,sweep_value,setup,ue,method,gamma,se";
pub const CDF_HEADER: &str = "method,se,cdf";

/// Formats like C's `%.9g`.
pub fn format_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // the exponent after rounding to P significant digits
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= P {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sweep_csv(reports: &[SEReport]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.sweep_var,
            r.sweep_value,
            r.setup,
            r.ue + 1,
            r.method.tag(),
            format_g9(r.gamma),
            format_g9(r.se)
        ));
    }
    s
}

/// Per method, the empirical CDF of all per-UE SE values (over setups, UEs
/// and sweep values), sorted ascending.
pub fn cdf_rows(reports: &[SEReport]) -> Vec<(Method, f64, f64)> {
    let mut methods: Vec<Method> = reports.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut rows = Vec::new();
    for m in methods {
        let mut se: Vec<f64> = reports.iter().filter(|r| r.method == m).map(|r| r.se).collect();
        se.sort_by(f64::total_cmp);
        let n = se.len() as f64;
        for (i, v) in se.into_iter().enumerate() {
            rows.push((m, v, (i + 1) as f64 / n));
        }
    }
    rows
}

pub fn cdf_csv(reports: &[SEReport]) -> String {
    let mut s = String::from(CDF_HEADER);
    s.push('\n');
    for (m, se, cdf) in cdf_rows(reports) {
        s.push_str(&format!("{},{},{}\n", m.tag(), format_g9(se), format_g9(cdf)));
    }
    s
}

fn run_info(result: &ExperimentResult) -> String {
    let mut s = format!(
        "points = {}\nreports = {}\nfading_trials = {}\nwall_clock_s = {:.3}\ndegenerate = {}\nfailures = {}\n",
        result.points,
        result.reports.len(),
        result.fading_trials,
        result.wall_clock_s,
        result.degenerate_count(),
        result.failures.len()
    );
    for f in &result.failures {
        s.push_str(&format!("failed: value={} setup={}: {}\n", f.sweep_value, f.setup, f.message));
    }
    s
}

/// Writes `se_sweep.csv`, `se_cdf.csv` and `run_info.txt` into `dir`.
pub fn emit_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.reports.is_empty() {
        return Err(Error::Domain("no reports to write".into()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = [
        (dir.join("se_sweep.csv"), sweep_csv(&result.reports)),
        (dir.join("se_cdf.csv"), cdf_csv(&result.reports)),
        (dir.join("run_info.txt"), run_info(result)),
    ];
    let mut written = Vec::new();
    for (path, body) in files {
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(body.as_bytes()).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
