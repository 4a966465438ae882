//! Command implementations backing the `qsync` binary.
//!
//! Exit-code contract: 0 success, 1 analysis/certificate failure,
//! 2 configuration or validation error, 3 simulation divergence.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use serde_json::json;

use crate::config::{
    complex_matrix_rows, parse_complex_matrix, parse_complex_vector, parse_real_matrix,
    real_matrix_rows, BlocksConfig, ChannelConfig, IntegratorConfig, KernelConfig, RunConfig,
    ScenarioConfig, SubsystemConfig, TermConfig,
};
use crate::matops::RealVector;
use crate::model::{self, AugmentedSystem, SubsystemParams};
use crate::solver::{self, fmt_num, IntegratorSpec, SimOutput};
use crate::sync::{self, SynthesisResult};
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

/// Map an error to the exit-code contract above.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::ConditionsViolated(_) | Error::InfiniteMeanDelay => EXIT_ANALYSIS_FAILED,
        _ => EXIT_CONFIG,
    }
}

/// Write via a temporary sibling then rename, so readers never observe a
/// partially written file.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name: OsString = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = Path::new(&tmp_name);
    fs::write(tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Finite floats pass through; non-finite thresholds become JSON null.
fn json_f64(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Resolve the augmented system: explicit `blocks` win; otherwise the
/// coupling is synthesized (identical subsystems required), using the
/// configured gain or a grid search.
fn resolve_augmented(cfg: &RunConfig) -> Result<AugmentedSystem> {
    let sub1 = cfg.subsystem(0)?;
    let sub2 = cfg.subsystem(1)?;
    if let Some(blocks) = &cfg.blocks {
        return AugmentedSystem::new(
            sub1,
            sub2,
            parse_real_matrix(&blocks.omega12, "blocks.omega12")?,
            parse_complex_matrix(&blocks.v12, "blocks.v12")?,
            parse_complex_matrix(&blocks.v21, "blocks.v21")?,
        );
    }
    let syn = synthesize_from_config(cfg)?;
    let sub = padded_subsystem(cfg)?;
    syn.into_augmented(&sub)
}

/// First subsystem, padded with inert field channels when it has fewer
/// fields than modes (synthesis needs one channel per mode).
fn padded_subsystem(cfg: &RunConfig) -> Result<SubsystemParams> {
    let sub = cfg.subsystem(0)?;
    let n = sub.n_modes();
    if sub.field_count() < n {
        sub.pad_fields(n)
    } else {
        Ok(sub)
    }
}

fn synthesize_from_config(cfg: &RunConfig) -> Result<SynthesisResult> {
    let sub1 = cfg.subsystem(0)?;
    let sub2 = cfg.subsystem(1)?;
    if !sub1.approx_eq(&sub2, 1e-10) {
        return Err(Error::Parameter(
            "synthesis requires identical subsystems: differing local dynamics make exact \
             synchronization unattainable"
                .into(),
        ));
    }
    let sub = padded_subsystem(cfg)?;
    let gain = match cfg.gain {
        Some(a) => a,
        None => sync::find_gain(sub.omega(), sub.kernel())?.ok_or_else(|| {
            Error::Parameter("no stabilizing gain found on the search grid".into())
        })?,
    };
    sync::synthesize(&sub, gain)
}

/// Verify the synchronization conditions and the delay-based stability
/// certificate; writes `report.json`.
pub fn cmd_check(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let aug = resolve_augmented(cfg)?;
    let r = aug.block_kernel().max_range().min(5.0);
    let samples: Vec<f64> = [0.0, 0.01, 0.05, 0.25, 0.5, 1.0]
        .iter()
        .map(|f| f * r)
        .collect();
    let report = sync::check_conditions(&aug, &samples)?;
    let mut certificate = serde_json::Value::Null;
    let mut passes = false;
    if report.c1_sufficient {
        let dynamics = sync::error_dynamics(&aug)?;
        let cert = sync::certify_stability(&dynamics)?;
        passes = cert.passes;
        certificate = json!({
            "hurwitz": cert.hurwitz,
            "lambda1": [cert.lambda1.re, cert.lambda1.im],
            "threshold": json_f64(cert.threshold),
            "mean_delay": cert.mean_delay,
            "passes": cert.passes,
        });
    }
    let doc = json!({
        "conditions": report,
        "certificate": certificate,
    });
    write_json(&out.join("report.json"), &doc)?;
    Ok(if report.c1_sufficient && passes {
        EXIT_OK
    } else {
        EXIT_ANALYSIS_FAILED
    })
}

/// Synthesize the engineered coupling blocks; writes `synthesis.json`
/// whose `blocks` object can be pasted back into a run configuration.
pub fn cmd_synthesize(cfg: &RunConfig, out: &Path) -> Result<i32> {
    match synthesize_from_config(cfg) {
        Ok(syn) => {
            let doc = json!({
                "found": true,
                "gain": syn.gain_a,
                "k": complex_matrix_rows(&syn.k_mat),
                "blocks": {
                    "omega12": real_matrix_rows(&syn.omega12),
                    "v12": complex_matrix_rows(&syn.v12),
                    "v21": complex_matrix_rows(&syn.v21),
                },
            });
            write_json(&out.join("synthesis.json"), &doc)?;
            Ok(EXIT_OK)
        }
        Err(Error::Parameter(reason)) => {
            let doc = json!({ "found": false, "reason": reason });
            write_json(&out.join("synthesis.json"), &doc)?;
            Ok(EXIT_ANALYSIS_FAILED)
        }
        Err(e) => Err(e),
    }
}

/// One finished scenario run: divergence is recorded per scenario rather
/// than aborting the batch; all other errors abort.
type ScenarioRun = (String, std::result::Result<SimOutput, Error>);

fn run_scenarios(
    cfg: &RunConfig,
    aug: &AugmentedSystem,
    spec: &IntegratorSpec,
) -> Result<Vec<ScenarioRun>> {
    let n = aug.n_modes();
    let run_one = |sc: &ScenarioConfig| -> Result<ScenarioRun> {
        if sc.alpha1.len() != n || sc.alpha2.len() != n {
            return Err(Error::Config(format!(
                "scenario {:?}: alpha vectors must have {n} entries",
                sc.name
            )));
        }
        let e1 = model::coherent_expectations(&parse_complex_vector(&sc.alpha1));
        let e2 = model::coherent_expectations(&parse_complex_vector(&sc.alpha2));
        let mut xi0 = RealVector::zeros(4 * n);
        xi0.rows_mut(0, 2 * n).copy_from(&e1);
        xi0.rows_mut(2 * n, 2 * n).copy_from(&e2);
        let outcome = match solver::simulate_augmented(aug, &xi0, spec) {
            Ok(sim) => Ok(sim),
            Err(e @ Error::Divergence { .. }) => Err(e),
            Err(e) => return Err(e),
        };
        Ok((sc.name.clone(), outcome))
    };

    #[cfg(feature = "parallel")]
    let results: Result<Vec<ScenarioRun>> = cfg.scenarios.par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<ScenarioRun>> = cfg.scenarios.iter().map(run_one).collect();
    results
}

fn write_scenario_outputs(runs: &[ScenarioRun], out: &Path) -> Result<i32> {
    let mut entries = Vec::with_capacity(runs.len());
    let mut any_diverged = false;
    for (name, outcome) in runs {
        match outcome {
            Ok(sim) => {
                let mut buf = Vec::new();
                sim.full.write_csv(&mut buf)?;
                atomic_write(&out.join(format!("traj_{name}.csv")), &buf)?;
                buf.clear();
                sim.error.write_csv(&mut buf)?;
                atomic_write(&out.join(format!("err_{name}.csv")), &buf)?;
                entries.push(json!({
                    "name": name,
                    "status": "ok",
                    "initial_error_norm": sim.error.norms[0],
                    "final_error_norm": sim.error.final_norm(),
                    "first_time_error_below_1e-3": match sim.error.first_time_below(1e-3) {
                        Some(t) => json!(t),
                        None => serde_json::Value::Null,
                    },
                    "history_cutoff": match sim.full.history_cutoff {
                        Some(t) => json!(t),
                        None => serde_json::Value::Null,
                    },
                }));
            }
            Err(Error::Divergence { t, limit }) => {
                any_diverged = true;
                entries.push(json!({
                    "name": name,
                    "status": "diverged",
                    "diverged_at": t,
                    "norm_limit": limit,
                }));
            }
            Err(e) => return Err(Error::Parameter(format!("scenario {name:?}: {e}"))),
        }
    }
    write_json(&out.join("summary.json"), &json!({ "scenarios": entries }))?;
    Ok(if any_diverged { EXIT_DIVERGENCE } else { EXIT_OK })
}

/// Simulate every configured scenario; writes `traj_<name>.csv`,
/// `err_<name>.csv`, and `summary.json`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<i32> {
    if cfg.scenarios.is_empty() {
        return Err(Error::Config(
            "simulate requires at least one scenario".into(),
        ));
    }
    let aug = resolve_augmented(cfg)?;
    let kernels_exp =
        aug.sub1().kernel().is_exponential() && aug.sub2().kernel().is_exponential();
    let spec = cfg.integrator_spec(kernels_exp)?;
    let runs = run_scenarios(cfg, &aug, &spec)?;
    write_scenario_outputs(&runs, out)
}

/// Built-in worked example: one mode per subsystem, weak beam-splitter
/// Hamiltonian, single damped field channel with a sharp exponential
/// memory, coupling gain 0.4, three coherent-state scenarios.
pub fn example_config() -> RunConfig {
    let subsystem = SubsystemConfig {
        omega: vec![vec![0.0, 0.1], vec![0.1, 0.0]],
        v: vec![vec![[0.2, 0.0], [0.0, -0.1]]],
        kernel: KernelConfig {
            channels: vec![ChannelConfig::Exp {
                terms: vec![TermConfig { c: 1.0, beta: 9.0 }],
            }],
        },
    };
    RunConfig {
        subsystems: vec![subsystem.clone(), subsystem],
        blocks: None,
        gain: Some(0.4),
        integrator: Some(IntegratorConfig {
            method: Some("lift".into()),
            dt: Some(1e-3),
            horizon: Some(20.0),
        }),
        scenarios: vec![
            ScenarioConfig {
                name: "scenario1".into(),
                alpha1: vec![[1.0, 0.0]],
                alpha2: vec![[0.0, 0.0]],
            },
            ScenarioConfig {
                name: "scenario2".into(),
                alpha1: vec![[0.0, 0.0]],
                alpha2: vec![[0.0, 1.0]],
            },
            ScenarioConfig {
                name: "scenario3".into(),
                alpha1: vec![[1.0, 0.0]],
                alpha2: vec![[0.0, 1.0]],
            },
        ],
    }
}

/// End-to-end reproduction of the built-in example: emits the config,
/// runs synthesis, verification, and all three scenario simulations, and
/// collates the error norms into `fig1_data.csv`.
pub fn cmd_reproduce_example(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let cfg_json = serde_json::to_value(cfg)?;
    write_json(&out.join("example_config.json"), &cfg_json)?;

    let code_syn = cmd_synthesize(cfg, out)?;
    if code_syn != EXIT_OK {
        return Ok(code_syn);
    }
    let syn = synthesize_from_config(cfg)?;
    let mut resolved = cfg.clone();
    resolved.blocks = Some(BlocksConfig {
        omega12: real_matrix_rows(&syn.omega12),
        v12: complex_matrix_rows(&syn.v12),
        v21: complex_matrix_rows(&syn.v21),
    });

    let code_check = cmd_check(&resolved, out)?;

    if resolved.scenarios.is_empty() {
        return Err(Error::Config(
            "reproduce-example requires at least one scenario".into(),
        ));
    }
    let aug = resolve_augmented(&resolved)?;
    let kernels_exp =
        aug.sub1().kernel().is_exponential() && aug.sub2().kernel().is_exponential();
    let spec = resolved.integrator_spec(kernels_exp)?;
    let runs = run_scenarios(&resolved, &aug, &spec)?;
    let code_sim = write_scenario_outputs(&runs, out)?;

    if code_sim == EXIT_OK {
        let mut buf = String::from("t");
        for (name, _) in &runs {
            buf.push_str(&format!(",|e|_{name}"));
        }
        buf.push('\n');
        let first = runs[0].1.as_ref().expect("checked ok above");
        for (k, t) in first.error.times.iter().enumerate() {
            buf.push_str(&fmt_num(*t));
            for (_, outcome) in &runs {
                let sim = outcome.as_ref().expect("checked ok above");
                buf.push(',');
                buf.push_str(&fmt_num(sim.error.norms[k]));
            }
            buf.push('\n');
        }
        atomic_write(&out.join("fig1_data.csv"), buf.as_bytes())?;
    }

    Ok([code_check, code_sim]
        .into_iter()
        .find(|c| *c != EXIT_OK)
        .unwrap_or(EXIT_OK))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_reproduction_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = example_config();
        let code = cmd_reproduce_example(&cfg, dir.path()).unwrap();
        assert_eq!(code, EXIT_OK);
        for f in [
            "example_config.json",
            "synthesis.json",
            "report.json",
            "summary.json",
            "fig1_data.csv",
            "traj_scenario1.csv",
            "err_scenario3.csv",
        ] {
            assert!(dir.path().join(f).exists(), "missing {f}");
        }
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report["conditions"]["c1_sufficient"], true);
        assert_eq!(report["certificate"]["passes"], true);
    }

    #[test]
    fn synthesize_rejects_heterogeneous_subsystems() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = example_config();
        cfg.subsystems[1].omega = vec![vec![0.0, 0.2], vec![0.2, 0.0]];
        let code = cmd_synthesize(&cfg, dir.path()).unwrap();
        assert_eq!(code, EXIT_ANALYSIS_FAILED);
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("synthesis.json")).unwrap())
                .unwrap();
        assert_eq!(doc["found"], false);
    }

    #[test]
    fn check_flags_asymmetric_engineered_hamiltonian() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = example_config();
        cfg.blocks = Some(BlocksConfig {
            omega12: vec![vec![0.0, 0.3], vec![0.0, 0.0]],
            v12: vec![vec![[0.0, 0.0], [0.0, 0.0]]],
            v21: vec![vec![[0.0, 0.0], [0.0, 0.0]]],
        });
        let code = cmd_check(&cfg, dir.path()).unwrap();
        assert_eq!(code, EXIT_ANALYSIS_FAILED);
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(doc["conditions"]["eq31_holds"], false);
    }
}
