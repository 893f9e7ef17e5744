//! Paracontraction certificate for a configured scenario.

use std::fs::File;
use std::path::Path;

use asyncgl_core::{certify_paracontraction, generalized_alphas, relaxation_bounds, CertificateReport, SpectralBounds};

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::run::{build_scenario, ASYNC_SAFETY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    /// `None` selects `ASYNC_SAFETY` times the certified bound.
    pub omega: Option<f64>,
    /// `None` uses the config's `max_delay`.
    pub max_delay: Option<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Certification {
    pub omega: f64,
    pub bounds: SpectralBounds,
    pub report: CertificateReport,
}

pub fn certify(cfg: &ScenarioConfig, opts: &CertifyOptions) -> Result<Certification, CliError> {
    cfg.validate()?;
    if opts.trials == 0 {
        return Err(CliError::InvalidArgument("trials must be at least 1".into()));
    }
    let scenario = build_scenario(&cfg.problem)?;
    let d = opts.max_delay.unwrap_or(cfg.solver.max_delay);
    let (lo, hi) = generalized_alphas(&scenario)?;
    let bounds = relaxation_bounds(lo, hi, d)?;
    let omega = opts.omega.unwrap_or(ASYNC_SAFETY * bounds.safe_omega());
    let report = certify_paracontraction(&scenario, omega, d, opts.trials, opts.seed)?;
    Ok(Certification { omega, bounds, report })
}

pub fn write_certificate(cert: &Certification, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("certificate.csv");
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    cert.report.write_csv(file)?;
    Ok(())
}
