//! Replicated experiment execution.

use rayon::prelude::*;

use ssp_core::boost::{
    boost_constrained_with, boost_mogda, boost_saa, boost_saa_c, plan_geometric, rde_baseline,
    rde_function_gap, rde_robust_pairs, BoostOutcome, BoostSaaConfig, InnerPolicy, PbsspPlan,
    PlanMode, PlanOverrides, Telemetry,
};
use ssp_core::oracles::{mogda_solve, speg_solve, MogdaConfig, OracleOutput, SpegConfig};
use ssp_core::oracles::extragradient::{extragradient_solve, EgConfig};
use ssp_core::perturb::{perturb, PerturbedProblem, ProxKind};
use ssp_core::problem::eval_gap;
use ssp_core::robust::GradSpec;
use ssp_core::rng::{self, SspRng};
use ssp_core::{PrimalDualPair, SspProblem};

use crate::config::{build_problems, ExperimentConfig, ProblemSet};
use crate::BenchError;

/// One macro-replication outcome.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub replication: usize,
    pub procedure: String,
    pub nu: Option<f64>,
    pub t_rounds: Option<usize>,
    pub m: Option<usize>,
    /// Base-oracle invocations, with gradient mini-batches at fractional
    /// weight.
    pub oracle_calls: f64,
    pub samples: u64,
    /// Duality gap on the original (unregularized) problem.
    pub gap: f64,
    pub success: bool,
    /// Failure message when the replication errored (recorded, not fatal).
    pub error: Option<String>,
}

/// Aggregate over the replications of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub procedure: String,
    pub nu: Option<f64>,
    pub t_rounds: Option<usize>,
    pub m: Option<usize>,
    pub calls: f64,
    pub mean_gap: f64,
    pub fail_prob: f64,
    /// 95% normal-approximation binomial interval on the failure rate.
    pub fail_ci: (f64, f64),
    pub samples: f64,
    pub seed: u64,
    pub replications: usize,
    pub errors: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

struct Procedure<'a> {
    cfg: &'a ExperimentConfig,
    problems: &'a ProblemSet,
    plan: Option<PbsspPlan>,
    label: String,
}

impl Procedure<'_> {
    fn plan_mode(&self) -> PlanMode {
        if self.problems.constrained {
            PlanMode::Constrained
        } else {
            PlanMode::Unconstrained
        }
    }

    fn inner_policy(&self) -> InnerPolicy {
        InnerPolicy {
            tol_frac: self.cfg.inner_tol_frac,
            max_iters: self.cfg.inner_max_iters,
            gap_floor: if self.cfg.theory_mode {
                None
            } else {
                Some(self.cfg.epsilon * self.cfg.inner_tol_frac)
            },
        }
    }

    /// Stationarity tolerance for fixed-size empirical solves: chosen so
    /// the induced weak-gap error is about `ε · tol_frac`.
    fn flat_inner_cfg(&self) -> EgConfig {
        let mu = self.problems.solve.constants().mu().max(1e-12);
        let tol = (2.0 * self.cfg.epsilon * self.cfg.inner_tol_frac * mu).sqrt();
        EgConfig::new(tol.max(1e-13), self.cfg.inner_max_iters)
    }

    fn speg_cfg(&self) -> SpegConfig {
        match self.cfg.speg_step {
            Some(step) => SpegConfig::new(self.cfg.speg_iters, self.cfg.speg_batch, step),
            None => SpegConfig::default_for(
                self.cfg.speg_iters,
                self.cfg.speg_batch,
                self.problems.speg_scale,
            ),
        }
    }

    fn plain_mogda_target(&self) -> f64 {
        match self.cfg.mogda_target {
            Some(t) => t,
            None => {
                let c = self.problems.solve.constants();
                let lf = c.l_f().unwrap_or(c.l());
                let lg = c.l_g().unwrap_or(c.l());
                2.0 * self.cfg.epsilon / (lf + lg).max(1e-12)
            }
        }
    }

    /// One invocation of the configured base oracle on `target`.
    fn oracle_once(
        &self,
        target: &PerturbedProblem,
        rng: &mut SspRng,
    ) -> Result<OracleOutput, ssp_core::SspError> {
        match self.cfg.oracle.as_str() {
            "saa" => {
                let emp = target.empirical(self.cfg.saa_n, rng)?;
                let pair = extragradient_solve(emp.as_ref(), None, &self.flat_inner_cfg())?;
                Ok(OracleOutput {
                    pair,
                    samples: self.cfg.saa_n as u64,
                })
            }
            "speg" => speg_solve(target, &self.speg_cfg(), None, rng),
            "mogda" => {
                let z0 = PrimalDualPair::zeros(target.dim_x(), target.dim_y());
                mogda_solve(target, &MogdaConfig::new(self.plain_mogda_target()), z0, rng)
            }
            other => Err(ssp_core::SspError::Capability(format!(
                "unknown oracle '{other}'"
            ))),
        }
    }

    fn run_once(&self, rng: &mut SspRng) -> Result<(PrimalDualPair, Telemetry), BenchError> {
        let solve = &self.problems.solve;
        let identity = perturb(
            std::sync::Arc::clone(solve),
            0.0,
            None,
            0.0,
            None,
            ProxKind::Quadratic,
        )?;
        match self.cfg.procedure.as_str() {
            "plain" => {
                let out = self.oracle_once(&identity, rng)?;
                let telemetry = Telemetry {
                    samples_total: out.samples,
                    base_calls: 1,
                    ..Default::default()
                };
                Ok((out.pair, telemetry))
            }
            "rde" => {
                if self.cfg.theory_mode {
                    let out = rde_baseline(
                        solve,
                        self.cfg.epsilon,
                        self.cfg.p,
                        self.plan_mode(),
                        &self.inner_policy(),
                        rng,
                    )?;
                    return Ok((out.pair, out.telemetry));
                }
                let m = self.cfg.m.unwrap_or_else(|| {
                    let m = (18.0 * (4.0 / self.cfg.p).ln()).ceil() as usize;
                    if m % 2 == 0 {
                        m + 1
                    } else {
                        m
                    }
                });
                let out: BoostOutcome = if self.problems.constrained {
                    rde_function_gap(
                        solve,
                        m,
                        self.cfg.epsilon,
                        |r| self.oracle_once(&identity, r),
                        Some(GradSpec::FixedN { n: self.cfg.grad_n }),
                        rng,
                    )?
                } else {
                    rde_robust_pairs(m, |r| self.oracle_once(&identity, r), rng)?
                };
                Ok((out.pair, out.telemetry))
            }
            "pbssp" => {
                let plan = self.plan.as_ref().expect("plan built for boosting");
                let out: BoostOutcome = match self.cfg.oracle.as_str() {
                    "mogda" => {
                        let z0 = PrimalDualPair::zeros(solve.dim_x(), solve.dim_y());
                        boost_mogda(solve, plan, z0, rng)?
                    }
                    "speg" => boost_constrained_with(
                        solve,
                        plan,
                        self.problems.prox_kind_y,
                        |target, r| speg_solve(target, &self.speg_cfg(), None, r),
                        Some(GradSpec::FixedN { n: self.cfg.grad_n }),
                        rng,
                    )?,
                    "saa" => {
                        let scfg = if self.cfg.theory_mode {
                            BoostSaaConfig {
                                fixed_n: None,
                                inner: self.inner_policy(),
                                grad_spec: None,
                            }
                        } else {
                            BoostSaaConfig {
                                fixed_n: Some(self.cfg.saa_n),
                                inner: self.inner_policy(),
                                grad_spec: Some(GradSpec::FixedN { n: self.cfg.grad_n }),
                            }
                        };
                        if self.problems.constrained {
                            boost_saa_c(solve, plan, self.problems.prox_kind_y, &scfg, rng)?
                        } else {
                            boost_saa(solve, plan, &scfg, rng)?
                        }
                    }
                    other => {
                        return Err(BenchError::Config(format!("unknown oracle '{other}'")))
                    }
                };
                Ok((out.pair, out.telemetry))
            }
            other => Err(BenchError::Config(format!("unknown procedure '{other}'"))),
        }
    }
}

/// Runs the configured experiment: independent replications with derived
/// seeds, each scored by the exact duality gap on the original problem.
/// Results are reproducible functions of `(config, master_seed)` and
/// independent of the parallelism degree.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, BenchError> {
    cfg.validate()?;
    let problems = build_problems(cfg)?;
    let plan = if cfg.procedure == "pbssp" {
        let overrides = PlanOverrides {
            nu: cfg.nu,
            t_rounds: cfg.t_rounds,
            m: cfg.m,
            delta: None,
        };
        let mode = if problems.constrained {
            PlanMode::Constrained
        } else {
            PlanMode::Unconstrained
        };
        Some(plan_geometric(
            problems.solve.constants(),
            cfg.epsilon,
            cfg.p,
            mode,
            overrides,
        )?)
    } else {
        None
    };
    let label = format!("{}+{}", cfg.oracle, cfg.procedure);
    let proc = Procedure {
        cfg,
        problems: &problems,
        plan,
        label,
    };

    let body = || -> Vec<RunRecord> {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| run_replication(&proc, rep))
            .collect()
    };
    let mut records = if cfg.parallel > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallel)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        pool.install(body)
    } else {
        body()
    };
    records.sort_by_key(|r| r.replication);
    let summary = summarize(cfg, &proc, &records);
    Ok(ExperimentResult { records, summary })
}

fn run_replication(proc: &Procedure, rep: usize) -> RunRecord {
    let cfg = proc.cfg;
    let mut rng = rng::stream(cfg.master_seed, &[0xb0, rep as u64]);
    let (nu, t_rounds, m) = match &proc.plan {
        Some(p) => (Some(p.nu), Some(p.t_rounds), Some(p.m)),
        None => (None, None, cfg.m.filter(|_| cfg.procedure == "rde")),
    };
    let base = RunRecord {
        replication: rep,
        procedure: proc.label.clone(),
        nu,
        t_rounds,
        m,
        oracle_calls: 0.0,
        samples: 0,
        gap: f64::NAN,
        success: false,
        error: None,
    };
    match proc.run_once(&mut rng) {
        Ok((pair, telemetry)) => {
            match eval_gap(proc.problems.score.as_ref(), &pair) {
                Ok(report) => RunRecord {
                    oracle_calls: telemetry.weighted_calls(cfg.grad_call_weight),
                    samples: telemetry.samples_total,
                    gap: report.gap,
                    success: report.gap <= cfg.epsilon,
                    ..base
                },
                Err(e) => RunRecord {
                    error: Some(format!("scoring failed: {e}")),
                    ..base
                },
            }
        }
        Err(e) => RunRecord {
            error: Some(e.to_string()),
            ..base
        },
    }
}

fn summarize(cfg: &ExperimentConfig, proc: &Procedure, records: &[RunRecord]) -> Summary {
    let r = records.len().max(1) as f64;
    let ok: Vec<&RunRecord> = records.iter().filter(|x| x.error.is_none()).collect();
    let errors = records.len() - ok.len();
    let mean = |f: &dyn Fn(&RunRecord) -> f64| -> f64 {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|x| f(x)).sum::<f64>() / ok.len() as f64
        }
    };
    let failures = records.iter().filter(|x| !x.success).count() as f64;
    let fail_prob = failures / r;
    let half = 1.96 * (fail_prob * (1.0 - fail_prob) / r).sqrt();
    let (nu, t_rounds, m) = records
        .first()
        .map(|x| (x.nu, x.t_rounds, x.m))
        .unwrap_or((None, None, None));
    Summary {
        procedure: proc.label.clone(),
        nu,
        t_rounds,
        m,
        calls: mean(&|x| x.oracle_calls),
        mean_gap: mean(&|x| x.gap),
        fail_prob,
        fail_ci: ((fail_prob - half).max(0.0), (fail_prob + half).min(1.0)),
        samples: mean(&|x| x.samples as f64),
        seed: cfg.master_seed,
        replications: records.len(),
        errors,
    }
}
