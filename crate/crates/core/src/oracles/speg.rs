//! Stochastic proximal extragradient on simplex domains with entropic
//! proximal steps and a fresh mini-batch for each of the two half-steps.

use crate::domain::entropic_prox;
use crate::error::{Result, SspError};
use crate::oracles::OracleOutput;
use crate::problem::{PrimalDualPair, SspProblem};
use crate::rng::SspRng;
use crate::Vector;

#[derive(Debug, Clone, Copy)]
pub struct SpegConfig {
    pub iters: usize,
    pub batch: usize,
    /// Effective stepsize: multiplies the gradient inside the entropic
    /// update (equivalently, the KL proximity carries weight `1/step`).
    pub step: f64,
}

impl SpegConfig {
    pub fn new(iters: usize, batch: usize, step: f64) -> Self {
        SpegConfig { iters, batch, step }
    }

    /// Default calibration for a payoff scale `max_abs`: the KL proximity
    /// weight grows like `2·max|A|·√iters`, i.e. the effective stepsize is
    /// its reciprocal.
    pub fn default_for(iters: usize, batch: usize, max_abs: f64) -> Self {
        SpegConfig {
            iters,
            batch,
            step: 1.0 / (2.0 * max_abs.max(1e-12) * (iters as f64).sqrt()),
        }
    }
}

/// Runs the stochastic proximal extragradient iteration and returns the
/// average of all iterates.
///
/// Requires both blocks to live on simplices so the entropic proximal
/// steps are exact; the problem's entropy/KL regularization terms are
/// folded into them.
pub fn speg_solve(
    problem: &dyn SspProblem,
    cfg: &SpegConfig,
    z0: Option<PrimalDualPair>,
    rng: &mut SspRng,
) -> Result<OracleOutput> {
    speg_solve_with(problem, cfg, z0, rng, |_, _| {})
}

/// As [`speg_solve`], invoking `inspect` on every full iterate.
pub fn speg_solve_with(
    problem: &dyn SspProblem,
    cfg: &SpegConfig,
    z0: Option<PrimalDualPair>,
    rng: &mut SspRng,
    mut inspect: impl FnMut(&Vector, &Vector),
) -> Result<OracleOutput> {
    if !problem.domain_x().is_simplex() || !problem.domain_y().is_simplex() {
        return Err(SspError::capability(
            "stochastic proximal extragradient needs simplex domains",
        ));
    }
    if cfg.iters == 0 || cfg.batch == 0 || cfg.step <= 0.0 {
        return Err(SspError::domain("iterations, batch and step must be positive"));
    }
    let reg_x = problem.reg_x();
    let reg_y = problem.reg_y();
    let mut z = z0.unwrap_or_else(|| {
        PrimalDualPair::new(problem.domain_x().center(), problem.domain_y().center())
    });
    let mut avg_x = Vector::zeros(problem.dim_x());
    let mut avg_y = Vector::zeros(problem.dim_y());
    let step_x = |u: &Vector, g: &Vector| {
        entropic_prox(u, g, cfg.step, reg_x.entropy_w, reg_x.kl_w, reg_x.kl_center.as_ref())
    };
    let step_y = |u: &Vector, g: &Vector| {
        entropic_prox(u, g, cfg.step, reg_y.entropy_w, reg_y.kl_w, reg_y.kl_center.as_ref())
    };
    for _ in 0..cfg.iters {
        // two independent mini-batches per iteration
        let emp1 = problem.empirical(cfg.batch, rng)?;
        let x_half = step_x(&z.x, &emp1.smooth_grad_x(&z.x, &z.y));
        let y_half = step_y(&z.y, &(-emp1.smooth_grad_y(&z.x, &z.y)));
        let emp2 = problem.empirical(cfg.batch, rng)?;
        let x_next = step_x(&x_half, &emp2.smooth_grad_x(&z.x, &z.y));
        let y_next = step_y(&y_half, &(-emp2.smooth_grad_y(&z.x, &z.y)));
        z = PrimalDualPair::new(x_next, y_next);
        debug_assert!((z.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        debug_assert!((z.y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        inspect(&z.x, &z.y);
        avg_x += &z.x;
        avg_y += &z.y;
    }
    avg_x /= cfg.iters as f64;
    avg_y /= cfg.iters as f64;
    Ok(OracleOutput {
        pair: PrimalDualPair::new(avg_x, avg_y),
        samples: (2 * cfg.iters * cfg.batch) as u64,
    })
}
