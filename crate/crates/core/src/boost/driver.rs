//! The confidence-boosting drivers: a generic proximal-boost loop plus
//! concrete instantiations for the sample-average and first-order oracles,
//! and the single-shot robust-estimation baselines.

use std::sync::Arc;

use rayon::prelude::*;

use crate::boost::plan::{
    mogda_final_targets, mogda_round_targets, rde_constrained_params, rde_unconstrained_params,
    saa_c_oracle_size, saa_c_round_sizes, saa_final_sizes, saa_round_sizes, saa_size_for_weak_gap,
    LastRound, PbsspPlan, PlanMode,
};
use crate::error::{Result, SspError};
use crate::oracles::extragradient::{extragradient_solve, EgConfig};
use crate::oracles::mogda::{mogda_solve, MogdaConfig};
use crate::oracles::OracleOutput;
use crate::perturb::{perturb, PerturbedProblem, ProxKind};
use crate::problem::{PrimalDualPair, SspProblem};
use crate::rng::{child, SspRng};
use crate::robust::{
    function_gap_select_from, robust_select, EuclideanMetric, GapFlag, GradSpec,
};
use crate::Vector;

/// One oracle round's result with its resource bill.
#[derive(Debug, Clone)]
pub struct RoundOut {
    pub pair: PrimalDualPair,
    pub samples: u64,
    /// Base-oracle invocations (unit weight in call accounting).
    pub base_calls: u64,
    /// Gradient-oracle mini-batches (fractional weight).
    pub grad_batches: u64,
}

impl RoundOut {
    fn new(pair: PrimalDualPair, samples: u64, base_calls: u64) -> Self {
        RoundOut {
            pair,
            samples,
            base_calls,
            grad_batches: 0,
        }
    }
}

/// Context handed to the per-round oracle.
pub struct RoundCtx<'a> {
    /// Round index `i ∈ 0..=T`; the perturbation amplitude is `λ^{i−1}`.
    pub round: usize,
    pub stream: GapFlag,
    pub lambda: f64,
    pub perturbed: &'a PerturbedProblem,
    /// Distance target `ε^i` for this stream.
    pub radius_target: f64,
    pub plan: &'a PbsspPlan,
}

/// Context handed to the final-round oracle.
pub struct FinalCtx<'a> {
    pub stream: GapFlag,
    pub lambda: f64,
    pub perturbed: &'a PerturbedProblem,
    pub plan: &'a PbsspPlan,
}

/// Per-round telemetry.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    /// `0..=T` for proximal rounds; `T+1` for the final round.
    pub round: usize,
    pub stream: char,
    pub lambda: f64,
    pub radius_target: Option<f64>,
    pub samples: u64,
    /// Distance from the produced center to the exact perturbed saddle,
    /// when the latter is computable.
    pub achieved_dist: Option<f64>,
}

/// Numerical check of the proximal-chain decomposition: the suboptimality
/// of the returned point on the original problem is bounded by the final
/// perturbed suboptimality plus the weighted squared per-round errors.
#[derive(Debug, Clone)]
pub struct LedgerCheck {
    pub primal_lhs: f64,
    pub primal_rhs: f64,
    pub dual_lhs: f64,
    pub dual_rhs: f64,
}

impl LedgerCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.primal_lhs <= self.primal_rhs + slack && self.dual_lhs <= self.dual_rhs + slack
    }
}

#[derive(Debug, Clone, Default)]
pub struct Telemetry {
    pub records: Vec<RoundRecord>,
    pub samples_total: u64,
    pub base_calls: u64,
    pub grad_batches: u64,
    pub ledger: Option<LedgerCheck>,
}

impl Telemetry {
    /// Call count under the convention that one gradient mini-batch costs
    /// `grad_weight` base calls.
    pub fn weighted_calls(&self, grad_weight: f64) -> f64 {
        self.base_calls as f64 + grad_weight * self.grad_batches as f64
    }
}

#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub pair: PrimalDualPair,
    pub telemetry: Telemetry,
}

/// The generic proximal-boost driver.
///
/// Runs rounds `i = 0..=T`: each builds the perturbed problems
/// `Φ_x^{i−1}` (amplitude on the primal block, centered at the previous
/// primal center) and `Φ_y^{i−1}` (dual analogue), and asks the round
/// oracle for new centers. A final certification round on `Φ_x^T`/`Φ_y^T`
/// produces the returned pair. The two streams are independent; all
/// randomness comes from derived child streams so runs are reproducible.
pub fn proximal_boost<R, F>(
    problem: &Arc<dyn SspProblem>,
    plan: &PbsspPlan,
    prox_kind_y: ProxKind,
    mut round_oracle: R,
    mut final_oracle: F,
    rng: &mut SspRng,
) -> Result<BoostOutcome>
where
    R: FnMut(&RoundCtx, &mut SspRng) -> Result<RoundOut>,
    F: FnMut(&FinalCtx, &mut SspRng) -> Result<RoundOut>,
{
    let t = plan.t_rounds;
    let mut telemetry = Telemetry::default();
    let mut x_c: Option<Vector> = None;
    let mut y_c: Option<Vector> = None;
    // per-round distances to the exact perturbed saddles, for the ledger
    let mut dists_x: Vec<Option<f64>> = Vec::with_capacity(t + 1);
    let mut dists_y: Vec<Option<f64>> = Vec::with_capacity(t + 1);

    for i in 0..=t {
        let lam_x = plan.lambda_x_at(i as isize - 1);
        let px = perturb(
            Arc::clone(problem),
            lam_x,
            x_c.clone(),
            0.0,
            None,
            ProxKind::Quadratic,
        )?;
        let ctx = RoundCtx {
            round: i,
            stream: GapFlag::X,
            lambda: lam_x,
            perturbed: &px,
            radius_target: plan.radii_x[i],
            plan,
        };
        let mut r = child(rng, (4 * i) as u64);
        let out = round_oracle(&ctx, &mut r)?;
        let dist = px.saddle().map(|s| (&out.pair.x - &s.x).norm());
        dists_x.push(dist);
        telemetry.records.push(RoundRecord {
            round: i,
            stream: 'x',
            lambda: lam_x,
            radius_target: Some(plan.radii_x[i]),
            samples: out.samples,
            achieved_dist: dist,
        });
        telemetry.samples_total += out.samples;
        telemetry.base_calls += out.base_calls;
        telemetry.grad_batches += out.grad_batches;
        x_c = Some(out.pair.x);

        let lam_y = plan.lambda_y_at(i as isize - 1);
        let py = perturb(
            Arc::clone(problem),
            0.0,
            None,
            lam_y,
            y_c.clone(),
            prox_kind_y,
        )?;
        let ctx = RoundCtx {
            round: i,
            stream: GapFlag::Y,
            lambda: lam_y,
            perturbed: &py,
            radius_target: plan.radii_y[i],
            plan,
        };
        let mut r = child(rng, (4 * i + 1) as u64);
        let out = round_oracle(&ctx, &mut r)?;
        let dist = py.saddle().map(|s| (&out.pair.y - &s.y).norm());
        dists_y.push(dist);
        telemetry.records.push(RoundRecord {
            round: i,
            stream: 'y',
            lambda: lam_y,
            radius_target: Some(plan.radii_y[i]),
            samples: out.samples,
            achieved_dist: dist,
        });
        telemetry.samples_total += out.samples;
        telemetry.base_calls += out.base_calls;
        telemetry.grad_batches += out.grad_batches;
        y_c = Some(out.pair.y);
    }

    // final certification round on Φ_x^T and Φ_y^T
    let lam_x_t = plan.lambda_x_at(t as isize);
    let fx = perturb(
        Arc::clone(problem),
        lam_x_t,
        x_c.clone(),
        0.0,
        None,
        ProxKind::Quadratic,
    )?;
    let mut r = child(rng, (4 * t + 2) as u64);
    let out_x = final_oracle(
        &FinalCtx {
            stream: GapFlag::X,
            lambda: lam_x_t,
            perturbed: &fx,
            plan,
        },
        &mut r,
    )?;
    telemetry.records.push(RoundRecord {
        round: t + 1,
        stream: 'x',
        lambda: lam_x_t,
        radius_target: None,
        samples: out_x.samples,
        achieved_dist: fx.saddle().map(|s| (&out_x.pair.x - &s.x).norm()),
    });
    telemetry.samples_total += out_x.samples;
    telemetry.base_calls += out_x.base_calls;
    telemetry.grad_batches += out_x.grad_batches;
    let x_final = out_x.pair.x;

    let lam_y_t = plan.lambda_y_at(t as isize);
    let fy = perturb(
        Arc::clone(problem),
        0.0,
        None,
        lam_y_t,
        y_c.clone(),
        prox_kind_y,
    )?;
    let mut r = child(rng, (4 * t + 3) as u64);
    let out_y = final_oracle(
        &FinalCtx {
            stream: GapFlag::Y,
            lambda: lam_y_t,
            perturbed: &fy,
            plan,
        },
        &mut r,
    )?;
    telemetry.records.push(RoundRecord {
        round: t + 1,
        stream: 'y',
        lambda: lam_y_t,
        radius_target: None,
        samples: out_y.samples,
        achieved_dist: fy.saddle().map(|s| (&out_y.pair.y - &s.y).norm()),
    });
    telemetry.samples_total += out_y.samples;
    telemetry.base_calls += out_y.base_calls;
    telemetry.grad_batches += out_y.grad_batches;
    let y_final = out_y.pair.y;

    // proximal-chain ledger when exact references are available
    telemetry.ledger = build_ledger(
        problem.as_ref(),
        plan,
        &fx,
        &fy,
        &x_final,
        &y_final,
        &dists_x,
        &dists_y,
    );

    Ok(BoostOutcome {
        pair: PrimalDualPair::new(x_final, y_final),
        telemetry,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_ledger(
    problem: &dyn SspProblem,
    plan: &PbsspPlan,
    fx: &PerturbedProblem,
    fy: &PerturbedProblem,
    x_final: &Vector,
    y_final: &Vector,
    dists_x: &[Option<f64>],
    dists_y: &[Option<f64>],
) -> Option<LedgerCheck> {
    let saddle_value = problem.saddle_value()?;
    if dists_x.iter().any(|d| d.is_none()) || dists_y.iter().any(|d| d.is_none()) {
        return None;
    }
    let fx_star = fx.saddle()?;
    let fy_star = fy.saddle()?;
    let f_final = problem.inner_max(x_final).ok()?;
    let g_final = problem.inner_min(y_final).ok()?;
    let primal_lhs = f_final - saddle_value;
    let dual_lhs = saddle_value - g_final;
    let ft_final = fx.inner_max(x_final).ok()?;
    let ft_star = fx.inner_max(&fx_star.x).ok()?;
    let gt_final = fy.inner_min(y_final).ok()?;
    let gt_star = fy.inner_min(&fy_star.y).ok()?;
    let mut primal_rhs = ft_final - ft_star;
    let mut dual_rhs = gt_star - gt_final;
    for i in 0..=plan.t_rounds {
        let dx = dists_x[i].unwrap();
        let dy = dists_y[i].unwrap();
        primal_rhs += 0.5 * plan.lambda_x_at(i as isize) * dx * dx;
        dual_rhs += 0.5 * plan.lambda_y_at(i as isize) * dy * dy;
    }
    Some(LedgerCheck {
        primal_lhs,
        primal_rhs,
        dual_lhs,
        dual_rhs,
    })
}

/// Inner-solver policy used by the SAA-backed drivers.
#[derive(Debug, Clone, Copy)]
pub struct InnerPolicy {
    /// The stationarity tolerance is `μ_emp · radius_target · tol_frac`.
    pub tol_frac: f64,
    pub max_iters: usize,
    /// Experiment mode: stop once the induced function error is below
    /// this floor (tolerance `√(2·gap_floor·μ_emp)`), instead of chasing
    /// the theory radii, whose final-round values can be vanishingly
    /// small next to a fixed oracle size.
    pub gap_floor: Option<f64>,
}

impl Default for InnerPolicy {
    fn default() -> Self {
        InnerPolicy {
            tol_frac: 0.01,
            max_iters: 2_000_000,
            gap_floor: None,
        }
    }
}

impl InnerPolicy {
    fn config(&self, perturbed: &PerturbedProblem, radius_target: f64) -> EgConfig {
        let mu = perturbed.constants().mu().max(1e-12);
        let mut tol = mu * radius_target * self.tol_frac;
        if let Some(floor) = self.gap_floor {
            tol = tol.max((2.0 * floor * mu).sqrt());
        }
        EgConfig::new(tol.max(1e-13), self.max_iters)
    }
}

/// Configuration of the SAA-backed drivers.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoostSaaConfig {
    /// Experiment mode: one fixed sample size for every oracle call,
    /// replacing the theory calculators.
    pub fixed_n: Option<usize>,
    pub inner: InnerPolicy,
    /// Gradient mini-batch rule for constrained final rounds; `None`
    /// applies the theory accuracy rule.
    pub grad_spec: Option<GradSpec>,
}

impl BoostSaaConfig {
    pub fn experiment(fixed_n: usize, grad_n: usize) -> Self {
        BoostSaaConfig {
            fixed_n: Some(fixed_n),
            inner: InnerPolicy::default(),
            grad_spec: Some(GradSpec::FixedN { n: grad_n }),
        }
    }
}

/// `m` empirical solves of a perturbed problem in parallel.
fn saa_trials(
    perturbed: &PerturbedProblem,
    n: usize,
    m: usize,
    eg: &EgConfig,
    rng: &mut SspRng,
) -> Result<Vec<PrimalDualPair>> {
    let seeds: Vec<SspRng> = (0..m).map(|j| child(rng, j as u64)).collect();
    seeds
        .into_par_iter()
        .map(|mut r| -> Result<PrimalDualPair> {
            let emp = perturbed.empirical(n, &mut r)?;
            extragradient_solve(emp.as_ref(), None, eg)
        })
        .collect()
}

/// Independent extraction over the primal and dual candidate lists.
fn select_split(pairs: &[PrimalDualPair]) -> Result<PrimalDualPair> {
    let xs: Vec<Vector> = pairs.iter().map(|p| p.x.clone()).collect();
    let ys: Vec<Vector> = pairs.iter().map(|p| p.y.clone()).collect();
    let (x, _) = robust_select(&xs, &EuclideanMetric)?;
    let (y, _) = robust_select(&ys, &EuclideanMetric)?;
    Ok(PrimalDualPair::new(x, y))
}

/// Boosted SAA for unconstrained problems: every round (including the
/// final one) is a robust-distance round; the final round inflates the
/// sample size by the residual condition number.
pub fn boost_saa(
    problem: &Arc<dyn SspProblem>,
    plan: &PbsspPlan,
    cfg: &BoostSaaConfig,
    rng: &mut SspRng,
) -> Result<BoostOutcome> {
    let consts = problem.constants().clone();
    let cfg = *cfg;
    let round_oracle = |ctx: &RoundCtx, r: &mut SspRng| -> Result<RoundOut> {
        let n = match cfg.fixed_n {
            Some(n) => n,
            None => {
                let (nx, ny) = saa_round_sizes(ctx.plan, &consts, ctx.round)?;
                match ctx.stream {
                    GapFlag::X => nx,
                    GapFlag::Y => ny,
                }
            }
        };
        let eg = cfg.inner.config(ctx.perturbed, ctx.radius_target);
        let pairs = saa_trials(ctx.perturbed, n, ctx.plan.m, &eg, r)?;
        Ok(RoundOut::new(
            select_split(&pairs)?,
            (n * ctx.plan.m) as u64,
            ctx.plan.m as u64,
        ))
    };
    let final_oracle = |ctx: &FinalCtx, r: &mut SspRng| -> Result<RoundOut> {
        let n = match cfg.fixed_n {
            Some(n) => n,
            None => {
                let (nx, ny) = saa_final_sizes(ctx.plan, &consts)?;
                match ctx.stream {
                    GapFlag::X => nx,
                    GapFlag::Y => ny,
                }
            }
        };
        // distance target of the final round: √(2δ/(L_f-style modulus))
        let infl = match ctx.stream {
            GapFlag::X => consts.l_xy * consts.l_xy / consts.mu_y + consts.l_x + ctx.lambda,
            GapFlag::Y => consts.l_xy * consts.l_xy / consts.mu_x + consts.l_y + ctx.lambda,
        };
        let radius = (2.0 * ctx.plan.delta / infl).sqrt();
        let eg = cfg.inner.config(ctx.perturbed, radius);
        let pairs = saa_trials(ctx.perturbed, n, ctx.plan.m, &eg, r)?;
        Ok(RoundOut::new(
            select_split(&pairs)?,
            (n * ctx.plan.m) as u64,
            ctx.plan.m as u64,
        ))
    };
    proximal_boost(
        problem,
        plan,
        ProxKind::Quadratic,
        round_oracle,
        final_oracle,
        rng,
    )
}

/// Boosted SAA for constrained problems: robust-distance rounds followed
/// by function-gap selection in the final round.
pub fn boost_saa_c(
    problem: &Arc<dyn SspProblem>,
    plan: &PbsspPlan,
    prox_kind_y: ProxKind,
    cfg: &BoostSaaConfig,
    rng: &mut SspRng,
) -> Result<BoostOutcome> {
    if plan.m % 2 == 0 {
        return Err(SspError::domain(
            "constrained boosting needs an odd trial count",
        ));
    }
    let consts = problem.constants().clone();
    let cfg = *cfg;
    let (mult_x, mult_y) = match plan.last_round {
        LastRound::FunctionGap { m_x, m_y } => (m_x, m_y),
        LastRound::Distance => {
            return Err(SspError::domain(
                "constrained boosting needs a function-gap final round",
            ))
        }
    };
    let round_oracle = |ctx: &RoundCtx, r: &mut SspRng| -> Result<RoundOut> {
        let n = match cfg.fixed_n {
            Some(n) => n,
            None => {
                let (nx, ny) = saa_c_round_sizes(ctx.plan, &consts, ctx.round)?;
                match ctx.stream {
                    GapFlag::X => nx,
                    GapFlag::Y => ny,
                }
            }
        };
        let eg = cfg.inner.config(ctx.perturbed, ctx.radius_target);
        let pairs = saa_trials(ctx.perturbed, n, ctx.plan.m, &eg, r)?;
        Ok(RoundOut::new(
            select_split(&pairs)?,
            (n * ctx.plan.m) as u64,
            ctx.plan.m as u64,
        ))
    };
    let final_oracle = |ctx: &FinalCtx, r: &mut SspRng| -> Result<RoundOut> {
        let (mult, flag) = match ctx.stream {
            GapFlag::X => (mult_x, GapFlag::X),
            GapFlag::Y => (mult_y, GapFlag::Y),
        };
        let delta_prime = ctx.plan.delta / mult;
        let n = match cfg.fixed_n {
            Some(n) => n,
            None => saa_c_oracle_size(
                &consts,
                ctx.lambda,
                delta_prime / 3.0,
                matches!(ctx.stream, GapFlag::X),
            )?,
        };
        let mu_emp = ctx.perturbed.constants().mu().max(1e-12);
        let radius = (2.0 * delta_prime / (3.0 * mu_emp)).sqrt();
        let eg = cfg.inner.config(ctx.perturbed, radius);
        let pairs = saa_trials(ctx.perturbed, n, ctx.plan.m, &eg, r)?;
        let sel = function_gap_select_from(
            pairs,
            (n * ctx.plan.m) as u64,
            ctx.perturbed,
            delta_prime,
            flag,
            cfg.grad_spec,
            r,
        )?;
        let k = sel.index;
        let mut out = RoundOut::new(
            sel.candidates[k].clone(),
            sel.oracle_samples + sel.grad_samples,
            ctx.plan.m as u64,
        );
        out.grad_batches = sel.grad_batches;
        // the selected block is authoritative for this stream
        match flag {
            GapFlag::X => out.pair.x = sel.point,
            GapFlag::Y => out.pair.y = sel.point,
        }
        Ok(out)
    };
    proximal_boost(problem, plan, prox_kind_y, round_oracle, final_oracle, rng)
}

/// Constrained boosting over an arbitrary weak-gap oracle (experiment
/// mode): every proximal round runs `m` oracle calls on the perturbed
/// problem and extracts per block; the final round applies function-gap
/// selection per stream at accuracy `δ/M`.
pub fn boost_constrained_with<O>(
    problem: &Arc<dyn SspProblem>,
    plan: &PbsspPlan,
    prox_kind_y: ProxKind,
    oracle: O,
    grad_spec: Option<GradSpec>,
    rng: &mut SspRng,
) -> Result<BoostOutcome>
where
    O: Fn(&PerturbedProblem, &mut SspRng) -> Result<OracleOutput> + Sync,
{
    if plan.m % 2 == 0 {
        return Err(SspError::domain(
            "constrained boosting needs an odd trial count",
        ));
    }
    let (mult_x, mult_y) = match plan.last_round {
        LastRound::FunctionGap { m_x, m_y } => (m_x, m_y),
        LastRound::Distance => {
            return Err(SspError::domain(
                "constrained boosting needs a function-gap final round",
            ))
        }
    };
    let trials = |perturbed: &PerturbedProblem,
                  m: usize,
                  r: &mut SspRng|
     -> Result<(Vec<PrimalDualPair>, u64)> {
        let seeds: Vec<SspRng> = (0..m).map(|j| child(r, j as u64)).collect();
        let outs: Vec<OracleOutput> = seeds
            .into_par_iter()
            .map(|mut rr| oracle(perturbed, &mut rr))
            .collect::<Result<Vec<_>>>()?;
        let samples = outs.iter().map(|o| o.samples).sum();
        Ok((outs.into_iter().map(|o| o.pair).collect(), samples))
    };
    let round_oracle = |ctx: &RoundCtx, r: &mut SspRng| -> Result<RoundOut> {
        let (pairs, samples) = trials(ctx.perturbed, ctx.plan.m, r)?;
        Ok(RoundOut::new(select_split(&pairs)?, samples, ctx.plan.m as u64))
    };
    let final_oracle = |ctx: &FinalCtx, r: &mut SspRng| -> Result<RoundOut> {
        let (mult, flag) = match ctx.stream {
            GapFlag::X => (mult_x, GapFlag::X),
            GapFlag::Y => (mult_y, GapFlag::Y),
        };
        let delta_prime = ctx.plan.delta / mult;
        let (pairs, samples) = trials(ctx.perturbed, ctx.plan.m, r)?;
        let sel = function_gap_select_from(
            pairs,
            samples,
            ctx.perturbed,
            delta_prime,
            flag,
            grad_spec,
            r,
        )?;
        let k = sel.index;
        let mut out = RoundOut::new(
            sel.candidates[k].clone(),
            sel.oracle_samples + sel.grad_samples,
            ctx.plan.m as u64,
        );
        out.grad_batches = sel.grad_batches;
        match flag {
            GapFlag::X => out.pair.x = sel.point,
            GapFlag::Y => out.pair.y = sel.point,
        }
        Ok(out)
    };
    proximal_boost(problem, plan, prox_kind_y, round_oracle, final_oracle, rng)
}

/// Boosted first-order oracle for unconstrained problems: every round
/// calls the multistage optimistic method `m` times from the warm start
/// and extracts jointly over the pairs; warm starts are threaded forward
/// per stream.
pub fn boost_mogda(
    problem: &Arc<dyn SspProblem>,
    plan: &PbsspPlan,
    z0: PrimalDualPair,
    rng: &mut SspRng,
) -> Result<BoostOutcome> {
    let consts = problem.constants().clone();
    let warm_x = std::cell::RefCell::new(z0.clone());
    let warm_y = std::cell::RefCell::new(z0);

    let run_round = |perturbed: &PerturbedProblem,
                     target: f64,
                     m: usize,
                     warm: &std::cell::RefCell<PrimalDualPair>,
                     r: &mut SspRng|
     -> Result<RoundOut> {
        let start = warm.borrow().clone();
        let hint = perturbed
            .saddle()
            .map(|s| (start.dist_sq(&s) * 1.05).max(1e-12));
        let mcfg = {
            let mut c = MogdaConfig::new(target);
            c.initial_sq_dist = hint;
            c
        };
        let seeds: Vec<SspRng> = (0..m).map(|j| child(r, j as u64)).collect();
        let outs: Vec<OracleOutput> = seeds
            .into_par_iter()
            .map(|mut rr| mogda_solve(perturbed, &mcfg, start.clone(), &mut rr))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<PrimalDualPair> = outs.iter().map(|o| o.pair.clone()).collect();
        let samples: u64 = outs.iter().map(|o| o.samples).sum();
        let (sel, _) = robust_select(&pairs, &EuclideanMetric)?;
        *warm.borrow_mut() = sel.clone();
        Ok(RoundOut::new(sel, samples, m as u64))
    };

    let round_oracle = |ctx: &RoundCtx, r: &mut SspRng| -> Result<RoundOut> {
        let (tx, ty) = mogda_round_targets(ctx.plan, &consts, ctx.round);
        match ctx.stream {
            GapFlag::X => run_round(ctx.perturbed, tx, ctx.plan.m, &warm_x, r),
            GapFlag::Y => run_round(ctx.perturbed, ty, ctx.plan.m, &warm_y, r),
        }
    };
    let final_oracle = |ctx: &FinalCtx, r: &mut SspRng| -> Result<RoundOut> {
        let (tx, ty) = mogda_final_targets(ctx.plan, &consts);
        match ctx.stream {
            GapFlag::X => run_round(ctx.perturbed, tx, ctx.plan.m, &warm_x, r),
            GapFlag::Y => run_round(ctx.perturbed, ty, ctx.plan.m, &warm_y, r),
        }
    };
    proximal_boost(
        problem,
        plan,
        ProxKind::Quadratic,
        round_oracle,
        final_oracle,
        rng,
    )
}

/// Single-shot robust-distance baseline over a generic oracle: `m` calls,
/// independent extraction per block.
pub fn rde_robust_pairs<O>(m: usize, mut oracle: O, rng: &mut SspRng) -> Result<BoostOutcome>
where
    O: FnMut(&mut SspRng) -> Result<OracleOutput>,
{
    if m == 0 {
        return Err(SspError::domain("trial count must be ≥ 1"));
    }
    let mut pairs = Vec::with_capacity(m);
    let mut samples = 0u64;
    for j in 0..m {
        let mut r = child(rng, j as u64);
        let out = oracle(&mut r)?;
        samples += out.samples;
        pairs.push(out.pair);
    }
    let pair = select_split(&pairs)?;
    let telemetry = Telemetry {
        samples_total: samples,
        base_calls: m as u64,
        ..Default::default()
    };
    Ok(BoostOutcome { pair, telemetry })
}

/// Single-shot robust function-gap baseline for constrained problems:
/// the `m` oracle calls are shared between the primal and dual selections.
pub fn rde_function_gap<O>(
    problem: &Arc<dyn SspProblem>,
    m: usize,
    delta: f64,
    mut oracle: O,
    grad_spec: Option<GradSpec>,
    rng: &mut SspRng,
) -> Result<BoostOutcome>
where
    O: FnMut(&mut SspRng) -> Result<OracleOutput>,
{
    let identity = perturb(Arc::clone(problem), 0.0, None, 0.0, None, ProxKind::Quadratic)?;
    let mut pairs = Vec::with_capacity(m);
    let mut samples = 0u64;
    for j in 0..m {
        let mut r = child(rng, j as u64);
        let out = oracle(&mut r)?;
        samples += out.samples;
        pairs.push(out.pair);
    }
    let mut rx = child(rng, 0xf1a6);
    let sel_x = function_gap_select_from(
        pairs.clone(),
        samples,
        &identity,
        delta,
        GapFlag::X,
        grad_spec,
        &mut rx,
    )?;
    let mut ry = child(rng, 0xf1a7);
    let sel_y =
        function_gap_select_from(pairs, 0, &identity, delta, GapFlag::Y, grad_spec, &mut ry)?;
    let telemetry = Telemetry {
        samples_total: samples + sel_x.grad_samples + sel_y.grad_samples,
        base_calls: m as u64,
        grad_batches: sel_x.grad_batches + sel_y.grad_batches,
        ..Default::default()
    };
    Ok(BoostOutcome {
        pair: PrimalDualPair::new(sel_x.point, sel_y.point),
        telemetry,
    })
}

/// Theory-mode robust-estimation baseline with the SAA oracle.
///
/// Unconstrained: `m = ⌈18 ln(1/p)⌉` oracle calls at per-call weak-gap
/// accuracy `ε/(54(κ²+κ))`, two independent extractions. Constrained:
/// shared-effort function-gap selection at `δ = ε/(M_x+M_y)` with an odd
/// `m = ⌈18 ln(4/p)⌉`.
pub fn rde_baseline(
    problem: &Arc<dyn SspProblem>,
    epsilon: f64,
    p: f64,
    mode: PlanMode,
    inner: &InnerPolicy,
    rng: &mut SspRng,
) -> Result<BoostOutcome> {
    let consts = problem.constants().clone();
    match mode {
        PlanMode::Unconstrained => {
            let (m, delta) = rde_unconstrained_params(&consts, epsilon, p)?;
            let n = saa_size_for_weak_gap(&consts, delta)?;
            let radius = (2.0 * delta / (9.0 * consts.mu())).sqrt();
            let identity =
                perturb(Arc::clone(problem), 0.0, None, 0.0, None, ProxKind::Quadratic)?;
            let eg = inner.config(&identity, radius);
            let oracle = |r: &mut SspRng| -> Result<OracleOutput> {
                let emp = identity.empirical(n, r)?;
                let pair = extragradient_solve(emp.as_ref(), None, &eg)?;
                Ok(OracleOutput {
                    pair,
                    samples: n as u64,
                })
            };
            rde_robust_pairs(m, oracle, rng)
        }
        PlanMode::Constrained => {
            let (m, delta, _, _) = rde_constrained_params(&consts, epsilon, p);
            let n = saa_c_oracle_size(&consts, 0.0, delta / 3.0, true)?;
            let radius = (2.0 * delta / (3.0 * consts.mu().max(1e-12))).sqrt();
            let identity =
                perturb(Arc::clone(problem), 0.0, None, 0.0, None, ProxKind::Quadratic)?;
            let eg = inner.config(&identity, radius);
            let oracle = |r: &mut SspRng| -> Result<OracleOutput> {
                let emp = identity.empirical(n, r)?;
                let pair = extragradient_solve(emp.as_ref(), None, &eg)?;
                Ok(OracleOutput {
                    pair,
                    samples: n as u64,
                })
            };
            rde_function_gap(problem, m, delta, oracle, None, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::plan::{plan_geometric, PlanOverrides};
    use crate::problem::eval_gap;
    use crate::problems::make_quadratic;
    use approx::assert_abs_diff_eq;

    fn benchmark(sigma: f64, seed: u64) -> Arc<dyn SspProblem> {
        Arc::new(make_quadratic(3, 3, 1.0, 4.0, 1.5, sigma, false, seed).unwrap())
    }

    fn theory_plan(problem: &Arc<dyn SspProblem>, epsilon: f64, p: f64) -> PbsspPlan {
        plan_geometric(
            problem.constants(),
            epsilon,
            p,
            PlanMode::Unconstrained,
            PlanOverrides::default(),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_chain_reaches_tiny_gap() {
        let problem = benchmark(0.0, 41);
        let mut plan = theory_plan(&problem, 0.1, 0.1);
        plan.m = 3; // noiseless: extraction is trivial
        let cfg = BoostSaaConfig {
            fixed_n: Some(2),
            ..Default::default()
        };
        let mut rng = crate::rng::stream(7, &[]);
        let out = boost_saa(&problem, &plan, &cfg, &mut rng).unwrap();
        let gap = eval_gap(problem.as_ref(), &out.pair).unwrap().gap;
        // only inner-solver error remains
        assert!(gap < 1e-5, "gap {gap}");
        let ledger = out.telemetry.ledger.expect("benchmark has exact references");
        assert!(ledger.holds(1e-8));
    }

    #[test]
    fn telemetry_accounting_is_exact() {
        let problem = benchmark(0.3, 43);
        let plan = theory_plan(&problem, 0.5, 0.2);
        let consts = problem.constants().clone();
        let cfg = BoostSaaConfig::default();
        let mut rng = crate::rng::stream(11, &[]);
        let out = boost_saa(&problem, &plan, &cfg, &mut rng).unwrap();
        // expected totals from the schedule calculators
        let mut expected = 0u64;
        for i in 0..=plan.t_rounds {
            let (nx, ny) = saa_round_sizes(&plan, &consts, i).unwrap();
            expected += (plan.m * (nx + ny)) as u64;
        }
        let (nx, ny) = saa_final_sizes(&plan, &consts).unwrap();
        expected += (plan.m * (nx + ny)) as u64;
        assert_eq!(out.telemetry.samples_total, expected);
        assert_eq!(
            out.telemetry.base_calls,
            (plan.m * 2 * (plan.t_rounds + 2)) as u64
        );
        let sum_records: u64 = out.telemetry.records.iter().map(|r| r.samples).sum();
        assert_eq!(sum_records, out.telemetry.samples_total);
        // gap within the certified budget (single run at generous margin)
        let gap = eval_gap(problem.as_ref(), &out.pair).unwrap().gap;
        let budget = plan.guarantee_budget(consts.mu_x, consts.mu_y);
        assert!(gap <= budget, "gap {gap} budget {budget}");
        assert!(out.telemetry.ledger.unwrap().holds(1e-8));
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let problem = benchmark(0.5, 47);
        let mut plan = theory_plan(&problem, 0.4, 0.3);
        plan.m = 5;
        let cfg = BoostSaaConfig {
            fixed_n: Some(200),
            ..Default::default()
        };
        let run = || {
            let mut rng = crate::rng::stream(99, &[1]);
            boost_saa(&problem, &plan, &cfg, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.pair, b.pair);
        assert_eq!(a.telemetry.samples_total, b.telemetry.samples_total);
    }

    #[test]
    fn degenerate_single_round_schedule() {
        let problem = benchmark(0.0, 53);
        let mut plan = theory_plan(&problem, 0.5, 0.2);
        plan.t_rounds = 0;
        plan.lambda_x.truncate(2);
        plan.lambda_y.truncate(2);
        plan.radii_x.truncate(1);
        plan.radii_y.truncate(1);
        plan.m = 1;
        let cfg = BoostSaaConfig {
            fixed_n: Some(2),
            ..Default::default()
        };
        let mut rng = crate::rng::stream(13, &[]);
        let out = boost_saa(&problem, &plan, &cfg, &mut rng).unwrap();
        // one proximal round plus the final round, two streams each
        assert_eq!(out.telemetry.records.len(), 4);
        assert!(out.telemetry.ledger.unwrap().holds(1e-8));
    }

    #[test]
    fn exact_oracle_leaves_only_final_round_error() {
        // an oracle that returns the exact perturbed saddle: the ledger's
        // per-round error sum vanishes and the final gap equals the final
        // perturbed suboptimality (here also zero)
        let problem = benchmark(0.0, 59);
        let plan = theory_plan(&problem, 0.2, 0.2);
        let exact = |ctx: &RoundCtx, _r: &mut SspRng| -> Result<RoundOut> {
            let s = ctx.perturbed.saddle().expect("closed form");
            Ok(RoundOut::new(s, 0, 1))
        };
        let exact_final = |ctx: &FinalCtx, _r: &mut SspRng| -> Result<RoundOut> {
            let s = ctx.perturbed.saddle().expect("closed form");
            Ok(RoundOut::new(s, 0, 1))
        };
        let mut rng = crate::rng::stream(5, &[]);
        let out =
            proximal_boost(&problem, &plan, ProxKind::Quadratic, exact, exact_final, &mut rng)
                .unwrap();
        let ledger = out.telemetry.ledger.unwrap();
        assert_abs_diff_eq!(ledger.primal_lhs, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(ledger.primal_rhs, 0.0, epsilon = 1e-9);
        let gap = eval_gap(problem.as_ref(), &out.pair).unwrap().gap;
        assert!(gap < 1e-9);
    }

    #[test]
    fn boost_mogda_noiseless_chain() {
        let problem = benchmark(0.0, 61);
        let mut plan = theory_plan(&problem, 0.05, 0.2);
        plan.m = 3;
        let mut rng = crate::rng::stream(3, &[]);
        let out = boost_mogda(&problem, &plan, PrimalDualPair::zeros(3, 3), &mut rng).unwrap();
        let gap = eval_gap(problem.as_ref(), &out.pair).unwrap().gap;
        assert!(gap <= 0.05, "gap {gap}");
        // warm starts keep per-round distances bounded by their targets
        for rec in &out.telemetry.records {
            if let (Some(d), Some(t)) = (rec.achieved_dist, rec.radius_target) {
                assert!(d <= t, "round {} dist {d} target {t}", rec.round);
            }
        }
    }

    #[test]
    fn rde_unconstrained_baseline_runs() {
        let problem = benchmark(0.2, 67);
        let mut rng = crate::rng::stream(17, &[]);
        // generous target so the theory sample sizes stay small
        let out = rde_baseline(
            &problem,
            20.0,
            0.2,
            PlanMode::Unconstrained,
            &InnerPolicy::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.telemetry.base_calls, 29); // ⌈18 ln 5⌉
        let gap = eval_gap(problem.as_ref(), &out.pair).unwrap().gap;
        assert!(gap <= 20.0);
    }
}
