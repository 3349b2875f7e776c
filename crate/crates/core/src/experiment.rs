//! Sweep orchestration: one network per (sweep value, setup), every
//! requested SE method evaluated on it.

use std::time::Instant;

use rayon::prelude::*;

use crate::combining::CombinerScheme;
use crate::config::{Method, SweepSpec, SweepValue};
use crate::error::Result;
use crate::network::Network;
use crate::scenario::SystemConfig;
use crate::se::{closed_form_sinrs, mc_expectations, mc_sinrs, uatf_se};

/// SE of one UE in one setup by one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SEReport {
    pub sweep_var: &'static str,
    pub sweep_value: SweepValue,
    pub setup: usize,
    pub ue: usize,
    pub method: Method,
    pub gamma: f64,
    pub se: f64,
    pub degenerate: bool,
    pub m_aps: usize,
    pub k_ues: usize,
    pub l_antennas: usize,
    pub n_ris: usize,
    pub spacing: f64,
    pub asd_deg: f64,
    pub seed: u64,
}

/// A sweep point whose evaluation failed; it is skipped, not fatal.
#[derive(Debug, Clone)]
pub struct PointFailure {
    pub sweep_value: SweepValue,
    pub setup: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub reports: Vec<SEReport>,
    pub failures: Vec<PointFailure>,
    pub wall_clock_s: f64,
    pub fading_trials: usize,
    pub points: usize,
}

impl ExperimentResult {
    pub fn degenerate_count(&self) -> usize {
        self.reports.iter().filter(|r| r.degenerate).count()
    }
}

/// Per-UE SE of every method in `methods` for one network.
pub fn evaluate_network(net: &Network, methods: &[Method]) -> Result<Vec<(Method, Vec<(f64, bool)>)>> {
    let schemes: Vec<CombinerScheme> = [Method::McMr, Method::McLmmse]
        .into_iter()
        .filter(|m| methods.contains(m))
        .map(Method::combiner)
        .collect();
    let mc = if schemes.is_empty() {
        Vec::new()
    } else {
        mc_expectations(net, &schemes, net.cfg.n_fading)?
    };
    let mut out = Vec::new();
    for &method in methods {
        let (gammas, degenerate) = match method {
            Method::CfMr => closed_form_sinrs(net),
            _ => {
                let mo = mc.iter().find(|r| r.scheme == method.combiner()).expect("scheme evaluated");
                mc_sinrs(net, &mo.moments)
            }
        };
        out.push((method, gammas.into_iter().zip(degenerate).collect()));
    }
    Ok(out)
}

fn point_reports(cfg: &SystemConfig, sweep: &SweepSpec, value: SweepValue, setup: usize) -> Result<Vec<SEReport>> {
    let net = Network::build(cfg, setup)?;
    let methods = sweep.methods_at(value);
    let mut reports = Vec::new();
    for (method, per_ue) in evaluate_network(&net, &methods)? {
        for (ue, (gamma, degenerate)) in per_ue.into_iter().enumerate() {
            reports.push(SEReport {
                sweep_var: sweep.variable.name(),
                sweep_value: value,
                setup,
                ue,
                method,
                gamma,
                se: uatf_se(gamma, cfg.tau_u(), cfg.tau_c),
                degenerate,
                m_aps: cfg.m_aps,
                k_ues: cfg.k_ues,
                l_antennas: cfg.l_antennas,
                n_ris: cfg.n_ris(),
                spacing: cfg.d_h,
                asd_deg: cfg.asd_deg,
                seed: cfg.seed,
            });
        }
    }
    Ok(reports)
}

/// Runs every (sweep value, setup) point concurrently and returns reports in
/// (sweep value, setup, method, UE) order.
pub fn run_experiment(base: &SystemConfig, sweep: &SweepSpec) -> Result<ExperimentResult> {
    let start = Instant::now();
    let mut points = Vec::new();
    for &value in &sweep.values {
        let cfg = sweep.apply(base, value)?;
        for setup in 0..cfg.n_setups {
            points.push((value, setup, cfg.clone()));
        }
    }
    let results: Vec<_> = points
        .par_iter()
        .map(|(value, setup, cfg)| point_reports(cfg, sweep, *value, *setup))
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut fading_trials = 0;
    for ((value, setup, cfg), r) in points.iter().zip(results) {
        match r {
            Ok(rs) => {
                if sweep.methods_at(*value).iter().any(|m| *m != Method::CfMr) {
                    fading_trials += cfg.n_fading;
                }
                reports.extend(rs);
            }
            Err(e) => failures.push(PointFailure {
                sweep_value: *value,
                setup: *setup,
                message: e.to_string(),
            }),
        }
    }
    Ok(ExperimentResult {
        reports,
        failures,
        wall_clock_s: start.elapsed().as_secs_f64(),
        fading_trials,
        points: points.len(),
    })
}

/// Mean SE of one method over all reports at one sweep value.
pub fn mean_se(reports: &[SEReport], method: Method, value: Option<SweepValue>) -> f64 {
    let sel: Vec<f64> = reports
        .iter()
        .filter(|r| r.method == method && value.is_none_or(|v| r.sweep_value == v))
        .map(|r| r.se)
        .collect();
    if sel.is_empty() {
        return f64::NAN;
    }
    sel.iter().sum::<f64>() / sel.len() as f64
}
