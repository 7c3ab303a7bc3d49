//! Experiment configuration: a flat key-value file (TOML scalars only)
//! versioned with `schema_version`.
//!
//! Keys by section (all top-level):
//! - problem: `problem` (`quadratic` | `quadratic-box` | `mdp` |
//!   `matrix-game`), `problem_seed`, `regularization` (`none` |
//!   `quadratic` | `entropy`), plus per-kind shape/noise keys
//!   (`dim_x`, `mu`, `l`, `l_xy`, `sigma`, `heavy_tailed`, `box_bound`,
//!   `n_states`, `n_actions`, `u_x`, `sigma_r`, `n_x`, `n_y`, `sigma_a`).
//! - procedure: `procedure` (`plain` | `rde` | `pbssp`), `oracle`
//!   (`saa` | `speg` | `mogda`), `theory_mode`.
//! - targets: `epsilon`, `p`.
//! - schedule overrides: `nu`, `t_rounds`, `m` (absent = theory values).
//! - oracle parameters: `saa_n`, `speg_iters`, `speg_batch`, `speg_step`,
//!   `grad_n`, `grad_call_weight`, `inner_tol_frac`, `inner_max_iters`,
//!   `mogda_target`.
//! - run: `replications`, `master_seed`, `parallel`, `long_running`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use ssp_core::perturb::ProxKind;
use ssp_core::problems::{
    make_constrained_quadratic, make_matrix_game, make_mdp_ssp, make_quadratic, MdpModel,
    Regularization,
};
use ssp_core::SspProblem;

use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,

    // problem
    pub problem: String,
    #[serde(default)]
    pub problem_seed: u64,
    #[serde(default = "default_reg")]
    pub regularization: String,
    #[serde(default = "default_dim")]
    pub dim_x: usize,
    #[serde(default = "default_dim")]
    pub dim_y: usize,
    #[serde(default = "default_one")]
    pub mu: f64,
    #[serde(default = "default_l")]
    pub l: f64,
    #[serde(default = "default_one")]
    pub l_xy: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub heavy_tailed: bool,
    #[serde(default = "default_one")]
    pub box_bound: f64,
    #[serde(default = "default_active")]
    pub active_fraction: f64,
    #[serde(default = "default_states")]
    pub n_states: usize,
    #[serde(default = "default_actions")]
    pub n_actions: usize,
    #[serde(default = "default_ux")]
    pub u_x: f64,
    #[serde(default = "default_one")]
    pub sigma_r: f64,
    #[serde(default = "default_nx")]
    pub n_x: usize,
    #[serde(default = "default_ny")]
    pub n_y: usize,
    #[serde(default = "default_one")]
    pub sigma_a: f64,

    // procedure
    pub procedure: String,
    pub oracle: String,
    #[serde(default)]
    pub theory_mode: bool,

    // targets
    pub epsilon: f64,
    pub p: f64,

    // schedule overrides (absent = theory values)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,

    // oracle parameters
    #[serde(default = "default_saa_n")]
    pub saa_n: usize,
    #[serde(default = "default_speg_iters")]
    pub speg_iters: usize,
    #[serde(default = "default_speg_batch")]
    pub speg_batch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speg_step: Option<f64>,
    #[serde(default = "default_grad_n")]
    pub grad_n: usize,
    #[serde(default = "default_grad_w")]
    pub grad_call_weight: f64,
    #[serde(default = "default_tol_frac")]
    pub inner_tol_frac: f64,
    #[serde(default = "default_inner_iters")]
    pub inner_max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mogda_target: Option<f64>,

    // run
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub parallel: usize,
    #[serde(default)]
    pub long_running: bool,
}

fn default_reg() -> String {
    "none".into()
}
fn default_dim() -> usize {
    20
}
fn default_l() -> f64 {
    8.0
}
fn default_active() -> f64 {
    0.5
}
fn default_states() -> usize {
    10
}
fn default_actions() -> usize {
    4
}
fn default_ux() -> f64 {
    0.5
}
fn default_nx() -> usize {
    30
}
fn default_ny() -> usize {
    50
}
fn default_saa_n() -> usize {
    20_000
}
fn default_speg_iters() -> usize {
    2_000
}
fn default_speg_batch() -> usize {
    10
}
fn default_grad_n() -> usize {
    2_000
}
fn default_grad_w() -> f64 {
    0.1
}
fn default_tol_frac() -> f64 {
    0.01
}
fn default_inner_iters() -> usize {
    2_000_000
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(BenchError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replications == 0 {
            return Err(BenchError::Config("replications must be ≥ 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(BenchError::Config("epsilon must be positive".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(BenchError::Config("p must lie in (0,1)".into()));
        }
        match self.problem.as_str() {
            "quadratic" | "quadratic-box" | "mdp" | "matrix-game" => {}
            other => {
                return Err(BenchError::Config(format!("unknown problem kind '{other}'")))
            }
        }
        match self.regularization.as_str() {
            "none" | "quadratic" | "entropy" => {}
            other => {
                return Err(BenchError::Config(format!(
                    "unknown regularization '{other}'"
                )))
            }
        }
        match self.procedure.as_str() {
            "plain" | "rde" | "pbssp" => {}
            other => {
                return Err(BenchError::Config(format!(
                    "unknown procedure '{other}'"
                )))
            }
        }
        match self.oracle.as_str() {
            "saa" | "speg" | "mogda" => {}
            other => return Err(BenchError::Config(format!("unknown oracle '{other}'"))),
        }
        if self.oracle == "speg" && self.problem != "matrix-game" {
            return Err(BenchError::Config(
                "the stochastic proximal extragradient oracle needs simplex domains".into(),
            ));
        }
        if self.oracle == "mogda" && self.problem != "quadratic" {
            return Err(BenchError::Config(
                "the optimistic first-order oracle needs an unconstrained problem".into(),
            ));
        }
        let constrained = self.problem != "quadratic";
        if constrained && self.procedure == "pbssp" {
            if let Some(m) = self.m {
                if m % 2 == 0 {
                    return Err(BenchError::Config(
                        "constrained boosting needs an odd trial count m".into(),
                    ));
                }
            }
        }
        if constrained && self.regularization == "none" && self.procedure == "pbssp" {
            return Err(BenchError::Config(
                "boosting a merely convex-concave problem needs regularization".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// The problems an experiment runs on: the (possibly regularized) surrogate
/// handed to the solver, and the original problem used for scoring.
pub struct ProblemSet {
    pub solve: Arc<dyn SspProblem>,
    pub score: Arc<dyn SspProblem>,
    /// Whether the feasible sets are bounded (selects the constrained
    /// machinery).
    pub constrained: bool,
    /// Proximity kind for the dual block in proximal rounds.
    pub prox_kind_y: ProxKind,
    /// Payoff scale for the default proximal-extragradient stepsize.
    pub speg_scale: f64,
}

pub fn build_problems(cfg: &ExperimentConfig) -> Result<ProblemSet, BenchError> {
    let reg = match cfg.regularization.as_str() {
        "none" => Regularization::None,
        "quadratic" => Regularization::Quadratic {
            epsilon: cfg.epsilon,
        },
        "entropy" => Regularization::Entropy {
            epsilon: cfg.epsilon,
        },
        other => return Err(BenchError::Config(format!("unknown regularization '{other}'"))),
    };
    match cfg.problem.as_str() {
        "quadratic" => {
            let p = make_quadratic(
                cfg.dim_x,
                cfg.dim_y,
                cfg.mu,
                cfg.l,
                cfg.l_xy,
                cfg.sigma,
                cfg.heavy_tailed,
                cfg.problem_seed,
            )?;
            let arc: Arc<dyn SspProblem> = Arc::new(p);
            Ok(ProblemSet {
                solve: Arc::clone(&arc),
                score: arc,
                constrained: false,
                prox_kind_y: ProxKind::Quadratic,
                speg_scale: 1.0,
            })
        }
        "quadratic-box" => {
            let p = make_constrained_quadratic(
                cfg.dim_x,
                cfg.dim_y,
                cfg.mu,
                cfg.l,
                cfg.l_xy,
                cfg.sigma,
                cfg.box_bound,
                cfg.active_fraction,
                cfg.problem_seed,
            )?;
            let arc: Arc<dyn SspProblem> = Arc::new(p);
            Ok(ProblemSet {
                solve: Arc::clone(&arc),
                score: arc,
                constrained: true,
                prox_kind_y: ProxKind::Quadratic,
                speg_scale: 1.0,
            })
        }
        "mdp" => {
            let model = MdpModel::random(
                cfg.n_states,
                cfg.n_actions,
                cfg.u_x,
                cfg.sigma_r,
                cfg.problem_seed,
            );
            let score: Arc<dyn SspProblem> =
                Arc::new(make_mdp_ssp(model.clone(), Regularization::None)?);
            let solve: Arc<dyn SspProblem> = if matches!(reg, Regularization::None) {
                Arc::clone(&score)
            } else {
                Arc::new(make_mdp_ssp(model, reg)?)
            };
            let prox = if cfg.regularization == "entropy" {
                ProxKind::Kl
            } else {
                ProxKind::Quadratic
            };
            Ok(ProblemSet {
                solve,
                score,
                constrained: true,
                prox_kind_y: prox,
                speg_scale: 1.0,
            })
        }
        "matrix-game" => {
            let score_game =
                make_matrix_game(cfg.n_x, cfg.n_y, cfg.sigma_a, cfg.problem_seed, Regularization::None)?;
            let scale = score_game
                .payoff()
                .iter()
                .fold(0.0f64, |a, &b| a.max(b.abs()))
                .max(1e-9);
            let score: Arc<dyn SspProblem> = Arc::new(score_game);
            let solve: Arc<dyn SspProblem> = if matches!(reg, Regularization::None) {
                Arc::clone(&score)
            } else {
                Arc::new(make_matrix_game(
                    cfg.n_x,
                    cfg.n_y,
                    cfg.sigma_a,
                    cfg.problem_seed,
                    reg,
                )?)
            };
            let prox = if cfg.regularization == "entropy" {
                ProxKind::Kl
            } else {
                ProxKind::Quadratic
            };
            Ok(ProblemSet {
                solve,
                score,
                constrained: true,
                prox_kind_y: prox,
                speg_scale: scale,
            })
        }
        other => Err(BenchError::Config(format!("unknown problem kind '{other}'"))),
    }
}
