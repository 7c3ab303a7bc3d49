//! Multistage stochastic optimistic gradient descent ascent for
//! unconstrained SC-SC problems, fulfilling an expected-squared-distance
//! contract: `E[‖z_out − z*‖²] ≤ target`.
//!
//! The stage schedule is computed a priori from the problem constants: a
//! stage runs optimistic updates at a constant stepsize until its
//! contraction budget is met, then the stepsize halves whenever the noise
//! floor dominates the remaining error budget. Sampling stops as soon as
//! the a-priori budget reaches the target.

use crate::error::{Result, SspError};
use crate::oracles::OracleOutput;
use crate::problem::{PrimalDualPair, SspProblem};
use crate::rng::SspRng;

#[derive(Debug, Clone, Copy)]
pub struct MogdaConfig {
    /// Target on the expected squared distance to the saddle.
    pub target_sq_dist: f64,
    /// Upper bound on the initial squared distance; when absent and the
    /// saddle point is known the exact value is used.
    pub initial_sq_dist: Option<f64>,
    /// Hard cap on the sample budget.
    pub max_samples: u64,
    /// Calibration constant for the per-stage noise floor `c·η σ²/μ`.
    pub noise_floor_const: f64,
}

impl MogdaConfig {
    pub fn new(target_sq_dist: f64) -> Self {
        MogdaConfig {
            target_sq_dist,
            initial_sq_dist: None,
            max_samples: u64::MAX,
            noise_floor_const: 8.0,
        }
    }

    pub fn with_initial(mut self, d0: f64) -> Self {
        self.initial_sq_dist = Some(d0);
        self
    }
}

/// Runs the multistage optimistic iteration from `z0` until the a-priori
/// bound on `E[‖z − z*‖²]` reaches `cfg.target_sq_dist`.
pub fn mogda_solve(
    problem: &dyn SspProblem,
    cfg: &MogdaConfig,
    z0: PrimalDualPair,
    rng: &mut SspRng,
) -> Result<OracleOutput> {
    use crate::domain::BlockDomain;
    if !matches!(problem.domain_x(), BlockDomain::Free { .. })
        || !matches!(problem.domain_y(), BlockDomain::Free { .. })
    {
        return Err(SspError::capability(
            "the optimistic gradient oracle handles unconstrained problems only",
        ));
    }
    if cfg.target_sq_dist <= 0.0 {
        return Err(SspError::domain("target squared distance must be positive"));
    }
    let c = problem.constants();
    let mu = c.mu();
    if mu <= 0.0 {
        return Err(SspError::capability("strong convexity required"));
    }
    let l = c.l().max(mu);
    let sigma = c.sigma_x()?.max(c.sigma_y()?);

    let mut budget = cfg.initial_sq_dist.unwrap_or_else(|| {
        problem
            .saddle()
            .map(|s| z0.dist_sq(&s).max(1e-12))
            .unwrap_or_else(|| 4.0 * (1.0 + z0.x.norm_squared() + z0.y.norm_squared()))
    });
    let mut eta = 0.25 / l;
    let mut z = z0;
    let mut prev_gx = problem.smooth_grad_x(&z.x, &z.y);
    let mut prev_gy = problem.smooth_grad_y(&z.x, &z.y);
    let mut samples = 0u64;

    while budget > cfg.target_sq_dist {
        // stage length: contract the current budget by 4
        let stage_len = ((2.0 * (4.0f64).ln()) / (eta * mu)).ceil() as u64;
        if samples + stage_len > cfg.max_samples {
            return Err(SspError::NonConvergence {
                iters: samples as usize,
                residual: budget,
                tol: cfg.target_sq_dist,
                last: Box::new(z),
            });
        }
        for _ in 0..stage_len {
            let s = problem.draw(rng);
            let gx = s.smooth_grad_x(&z.x, &z.y);
            let gy = s.smooth_grad_y(&z.x, &z.y);
            let step_x = 2.0 * &gx - &prev_gx;
            let step_y = 2.0 * &gy - &prev_gy;
            z = PrimalDualPair::new(&z.x - eta * step_x, &z.y + eta * step_y);
            prev_gx = gx;
            prev_gy = gy;
        }
        samples += stage_len;
        let floor = cfg.noise_floor_const * eta * sigma * sigma / mu;
        budget = budget / 4.0 + floor;
        // halve the stepsize once the noise floor dominates what remains
        if floor > budget / 2.0 || floor > cfg.target_sq_dist / 2.0 {
            eta *= 0.5;
        }
    }
    Ok(OracleOutput { pair: z, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic;
    use crate::rng::child;

    #[test]
    fn deterministic_case_converges_linearly() {
        let p = make_quadratic(3, 3, 1.0, 4.0, 1.5, 0.0, false, 13).unwrap();
        let s = p.saddle().unwrap();
        let mut rng = crate::rng::stream(1, &[]);
        let z0 = PrimalDualPair::zeros(3, 3);
        let out = mogda_solve(&p, &MogdaConfig::new(1e-6), z0, &mut rng).unwrap();
        assert!(out.pair.dist_sq(&s) <= 1e-6, "dist {}", out.pair.dist_sq(&s));
    }

    #[test]
    fn stochastic_contract_holds_on_average() {
        let p = make_quadratic(2, 2, 1.0, 2.0, 0.8, 0.3, false, 17).unwrap();
        let s = p.saddle().unwrap();
        let target = 0.01;
        let mut rng = crate::rng::stream(2, &[]);
        let runs = 200;
        let mut acc = 0.0;
        for i in 0..runs {
            let mut r = child(&mut rng, i);
            let out = mogda_solve(
                &p,
                &MogdaConfig::new(target),
                PrimalDualPair::zeros(2, 2),
                &mut r,
            )
            .unwrap();
            acc += out.pair.dist_sq(&s);
        }
        let mean = acc / runs as f64;
        assert!(mean <= target * 1.5, "mean squared distance {mean}");
    }

    #[test]
    fn halving_target_at_most_quadruples_samples() {
        let p = make_quadratic(2, 2, 1.0, 2.0, 0.5, 0.5, false, 19).unwrap();
        let mut spent = Vec::new();
        for target in [4e-2, 2e-2, 1e-2, 5e-3] {
            let mut rng = crate::rng::stream(3, &[]);
            let out = mogda_solve(
                &p,
                &MogdaConfig::new(target),
                PrimalDualPair::zeros(2, 2),
                &mut rng,
            )
            .unwrap();
            spent.push(out.samples as f64);
        }
        for w in spent.windows(2) {
            assert!(w[1] <= 4.0 * w[0] + 64.0, "budget jump {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn constrained_problem_rejected() {
        let p =
            crate::problems::make_constrained_quadratic(2, 2, 1.0, 2.0, 0.5, 0.1, 1.0, 0.5, 3)
                .unwrap();
        let mut rng = crate::rng::stream(4, &[]);
        assert!(matches!(
            mogda_solve(&p, &MogdaConfig::new(0.1), PrimalDualPair::zeros(2, 2), &mut rng),
            Err(SspError::Capability(_))
        ));
    }
}
