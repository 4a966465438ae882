//! JSON run-configuration schema and conversion into model types.
//!
//! Complex entries are `[re, im]` pairs; kernels follow the kernel-module
//! schema, e.g. `{"channels":[{"form":"exp","terms":[{"c":1.0,"beta":9.0}]}]}`.
//! Unknown keys are rejected everywhere.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kernel::{ExpTerm, KernelChannel, MemoryKernel};
use crate::matops::{ComplexMatrix, RealMatrix};
use crate::model::SubsystemParams;
use crate::solver::{IntegratorSpec, Method};
use crate::{Error, Result};

pub type CxPair = [f64; 2];

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Exactly two subsystems.
    pub subsystems: Vec<SubsystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlocksConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemConfig {
    pub omega: Vec<Vec<f64>>,
    pub v: Vec<Vec<CxPair>>,
    pub kernel: KernelConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub channels: Vec<ChannelConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "form", deny_unknown_fields)]
pub enum ChannelConfig {
    #[serde(rename = "exp")]
    Exp { terms: Vec<TermConfig> },
    #[serde(rename = "tab")]
    Tab { dt: f64, values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub c: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksConfig {
    pub omega12: Vec<Vec<f64>>,
    pub v12: Vec<Vec<CxPair>>,
    pub v21: Vec<Vec<CxPair>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub alpha1: Vec<CxPair>,
    pub alpha2: Vec<CxPair>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl RunConfig {
    /// Load and validate a configuration file; parse failures carry the
    /// file path plus serde's line/column anchor.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsystems.len() != 2 {
            return Err(Error::Config(format!(
                "config must declare exactly 2 subsystems, got {}",
                self.subsystems.len()
            )));
        }
        Ok(())
    }

    pub fn subsystem(&self, idx: usize) -> Result<SubsystemParams> {
        self.subsystems[idx].build()
    }

    /// Integrator spec resolved against the given defaults; the default
    /// method is the exponential lift when every kernel is an
    /// exponential sum, else convolution quadrature.
    pub fn integrator_spec(&self, kernels_exponential: bool) -> Result<IntegratorSpec> {
        let cfg = self.integrator.clone().unwrap_or_default();
        let method = match cfg.method.as_deref() {
            Some("cq") => Method::ConvolutionQuadrature,
            Some("lift") => Method::ExponentialLift,
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown integrator method {other:?} (expected \"cq\" or \"lift\")"
                )))
            }
            None => {
                if kernels_exponential {
                    Method::ExponentialLift
                } else {
                    Method::ConvolutionQuadrature
                }
            }
        };
        IntegratorSpec::new(method, cfg.dt.unwrap_or(1e-3), cfg.horizon.unwrap_or(20.0))
    }
}

impl SubsystemConfig {
    pub fn build(&self) -> Result<SubsystemParams> {
        SubsystemParams::new(
            parse_real_matrix(&self.omega, "omega")?,
            parse_complex_matrix(&self.v, "v")?,
            self.kernel.build()?,
        )
    }
}

impl KernelConfig {
    pub fn build(&self) -> Result<MemoryKernel> {
        let channels: Result<Vec<KernelChannel>> = self
            .channels
            .iter()
            .map(|c| match c {
                ChannelConfig::Exp { terms } => KernelChannel::exp_sum(
                    terms
                        .iter()
                        .map(|t| ExpTerm { weight: t.c, rate: t.beta })
                        .collect(),
                ),
                ChannelConfig::Tab { dt, values } => KernelChannel::tabulated(*dt, values.clone()),
            })
            .collect();
        MemoryKernel::new(channels?)
    }
}

pub fn parse_real_matrix(rows: &[Vec<f64>], what: &str) -> Result<RealMatrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config(format!("{what}: matrix must be nonempty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what}: ragged matrix rows")));
    }
    Ok(RealMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

pub fn parse_complex_matrix(rows: &[Vec<CxPair>], what: &str) -> Result<ComplexMatrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config(format!("{what}: matrix must be nonempty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what}: ragged matrix rows")));
    }
    Ok(ComplexMatrix::from_fn(rows.len(), cols, |r, c| {
        Complex64::new(rows[r][c][0], rows[r][c][1])
    }))
}

pub fn parse_complex_vector(entries: &[CxPair]) -> Vec<Complex64> {
    entries.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Real matrix as nested JSON arrays.
pub fn real_matrix_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// Complex matrix as nested `[re, im]` JSON arrays.
pub fn complex_matrix_rows(m: &ComplexMatrix) -> Vec<Vec<CxPair>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}
