//! Sample-average approximation oracle: draw `n` i.i.d. samples, build
//! the empirical problem (plus optional proximal terms) and solve it with
//! the deterministic extragradient inner solver.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::oracles::extragradient::{extragradient_solve, EgConfig};
use crate::oracles::OracleOutput;
use crate::perturb::{perturb, ProxKind};
use crate::problem::{PrimalDualPair, SspProblem};
use crate::rng::{child, SspRng};
use crate::robust::{robust_select, EuclideanMetric};
use crate::Vector;

#[derive(Debug, Clone, Copy)]
pub struct SaaConfig {
    /// Stationarity tolerance of the inner solver.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
}

impl SaaConfig {
    pub fn new(inner_tol: f64, inner_max_iters: usize) -> Self {
        SaaConfig {
            inner_tol,
            inner_max_iters,
        }
    }
}

impl Default for SaaConfig {
    fn default() -> Self {
        SaaConfig {
            inner_tol: 1e-8,
            inner_max_iters: 2_000_000,
        }
    }
}

/// One SAA call: solves the empirical saddle problem
/// `min max (1/n)ΣΦ_ξᵢ + λ_x/2‖x−c_x‖² − λ_y proximity` to the inner
/// tolerance and returns the solution with its sample bill.
#[allow(clippy::too_many_arguments)]
pub fn saa_solve(
    problem: &Arc<dyn SspProblem>,
    n: usize,
    lambda_x: f64,
    center_x: Option<Vector>,
    lambda_y: f64,
    center_y: Option<Vector>,
    prox_kind_y: ProxKind,
    cfg: &SaaConfig,
    rng: &mut SspRng,
) -> Result<OracleOutput> {
    let perturbed = perturb(
        Arc::clone(problem),
        lambda_x,
        center_x,
        lambda_y,
        center_y,
        prox_kind_y,
    )?;
    let emp = perturbed.empirical(n, rng)?;
    let pair = extragradient_solve(
        emp.as_ref(),
        None,
        &EgConfig::new(cfg.inner_tol, cfg.inner_max_iters),
    )?;
    Ok(OracleOutput {
        pair,
        samples: n as u64,
    })
}

/// `m` independent SAA calls followed by independent majority-ball
/// extraction over the primal and dual candidate lists.
#[allow(clippy::too_many_arguments)]
pub fn robust_saa(
    problem: &Arc<dyn SspProblem>,
    n: usize,
    m: usize,
    lambda_x: f64,
    center_x: Option<Vector>,
    lambda_y: f64,
    center_y: Option<Vector>,
    prox_kind_y: ProxKind,
    cfg: &SaaConfig,
    rng: &mut SspRng,
) -> Result<OracleOutput> {
    let seeds: Vec<SspRng> = (0..m).map(|j| child(rng, j as u64)).collect();
    let solutions: Vec<PrimalDualPair> = seeds
        .into_par_iter()
        .map(|mut trial_rng| {
            saa_solve(
                problem,
                n,
                lambda_x,
                center_x.clone(),
                lambda_y,
                center_y.clone(),
                prox_kind_y,
                cfg,
                &mut trial_rng,
            )
            .map(|o| o.pair)
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<Vector> = solutions.iter().map(|p| p.x.clone()).collect();
    let ys: Vec<Vector> = solutions.iter().map(|p| p.y.clone()).collect();
    let (x, _) = robust_select(&xs, &EuclideanMetric)?;
    let (y, _) = robust_select(&ys, &EuclideanMetric)?;
    Ok(OracleOutput {
        pair: PrimalDualPair::new(x, y),
        samples: (n * m) as u64,
    })
}
