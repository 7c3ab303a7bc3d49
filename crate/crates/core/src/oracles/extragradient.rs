//! Deterministic projected/proximal extragradient for SC-SC problems with
//! exact gradients (the inner solver behind the sample-average oracle).
//!
//! Euclidean blocks take projected steps; simplex blocks take entropic
//! proximal steps so that entropy and KL terms in the objective are
//! handled exactly rather than through their (unbounded) gradients.

use crate::domain::{entropic_prox, BlockDomain};
use crate::error::{Result, SspError};
use crate::problem::{BlockReg, PrimalDualPair, SspProblem};
use crate::Vector;

#[derive(Debug, Clone, Copy)]
pub struct EgConfig {
    /// Stationarity tolerance on the prox-step residual.
    pub tol: f64,
    pub max_iters: usize,
    /// Stepsize override; default `1/(2L)` from the problem constants.
    pub step: Option<f64>,
}

impl EgConfig {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        EgConfig {
            tol,
            max_iters,
            step: None,
        }
    }
}

struct BlockStepper<'a> {
    domain: &'a BlockDomain,
    reg: BlockReg,
}

impl BlockStepper<'_> {
    /// One proximal step from `u` along descent direction `g` with
    /// stepsize `eta`.
    fn step(&self, u: &Vector, g: &Vector, eta: f64) -> Vector {
        match self.domain {
            BlockDomain::Simplex { .. } => entropic_prox(
                u,
                g,
                eta,
                self.reg.entropy_w,
                self.reg.kl_w,
                self.reg.kl_center.as_ref(),
            ),
            _ => self.domain.project(&(u - eta * g)),
        }
    }
}

/// Solves `min_x max_y Φ(x,y)` for a problem with exact gradients.
///
/// Terminates when the prox-step residual `‖z − step(z, F(z))‖/η` falls
/// below `cfg.tol`; errors with the last iterate when the iteration
/// budget runs out.
pub fn extragradient_solve(
    problem: &dyn SspProblem,
    z0: Option<PrimalDualPair>,
    cfg: &EgConfig,
) -> Result<PrimalDualPair> {
    let c = problem.constants();
    let l = problem.eg_smoothness_hint().unwrap_or_else(|| c.l()).max(1e-12);
    let eta = cfg.step.unwrap_or(0.5 / l);
    let sx = BlockStepper {
        domain: problem.domain_x(),
        reg: problem.reg_x(),
    };
    let sy = BlockStepper {
        domain: problem.domain_y(),
        reg: problem.reg_y(),
    };
    let mut z = z0.unwrap_or_else(|| {
        PrimalDualPair::new(problem.domain_x().center(), problem.domain_y().center())
    });

    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let gx = problem.smooth_grad_x(&z.x, &z.y);
        let gy = problem.smooth_grad_y(&z.x, &z.y);
        let x_next = sx.step(&z.x, &gx, eta);
        let y_next = sy.step(&z.y, &(-&gy), eta);
        residual = (((&z.x - &x_next).norm_squared() + (&z.y - &y_next).norm_squared()).sqrt())
            / eta;
        if residual <= cfg.tol {
            return Ok(z);
        }
        // half step, then a full step from the original point with the
        // half-point gradients
        let gx_h = problem.smooth_grad_x(&x_next, &y_next);
        let gy_h = problem.smooth_grad_y(&x_next, &y_next);
        z = PrimalDualPair::new(sx.step(&z.x, &gx_h, eta), sy.step(&z.y, &(-&gy_h), eta));
    }
    Err(SspError::NonConvergence {
        iters: cfg.max_iters,
        residual,
        tol: cfg.tol,
        last: Box::new(z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_matrix_game, quadratic::NoiseModel, QuadraticSsp, Regularization};
    use crate::{Matrix, Vector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_problem_reaches_origin() {
        let p = QuadraticSsp::from_parts(
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(1, 1),
            Matrix::from_element(1, 1, 1.0),
            Vector::zeros(1),
            Vector::zeros(1),
            NoiseModel::Gaussian { sigma: 0.0 },
            BlockDomain::Free { dim: 1 },
            BlockDomain::Free { dim: 1 },
        )
        .unwrap();
        let z0 = PrimalDualPair::new(Vector::from_element(1, 1.0), Vector::from_element(1, 1.0));
        let z = extragradient_solve(&p, Some(z0), &EgConfig::new(1e-9, 100_000)).unwrap();
        assert_abs_diff_eq!(z.x[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(z.y[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn bilinear_plus_quadratic_matches_linear_solve() {
        let p = QuadraticSsp::from_parts(
            Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]),
            Matrix::from_row_slice(2, 2, &[0.5, -0.2, 0.1, 0.4]),
            Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 2.0]),
            Vector::from_column_slice(&[0.3, -0.7]),
            Vector::from_column_slice(&[0.2, 0.5]),
            NoiseModel::Gaussian { sigma: 0.0 },
            BlockDomain::Free { dim: 2 },
            BlockDomain::Free { dim: 2 },
        )
        .unwrap();
        let z = extragradient_solve(&p, None, &EgConfig::new(1e-10, 200_000)).unwrap();
        let s = p.saddle().unwrap(); // direct linear solve
        assert!(z.dist_sq(&s).sqrt() < 1e-8);
    }

    #[test]
    fn entropy_regularized_game_kkt_residual() {
        let g = make_matrix_game(4, 6, 0.0, 3, Regularization::Entropy { epsilon: 0.5 }).unwrap();
        let tol = 1e-8;
        let z = extragradient_solve(&g, None, &EgConfig::new(tol, 500_000)).unwrap();
        // recompute the residual independently: one entropic prox step must
        // not move the returned point by more than tol·eta
        let eta = 0.5 / g.eg_smoothness_hint().unwrap_or_else(|| g.constants().l());
        let gx = g.smooth_grad_x(&z.x, &z.y);
        let gy = g.smooth_grad_y(&z.x, &z.y);
        let rx = crate::domain::entropic_prox(&z.x, &gx, eta, g.reg_x().entropy_w, 0.0, None);
        let ry = crate::domain::entropic_prox(&z.y, &(-gy), eta, g.reg_y().entropy_w, 0.0, None);
        let resid = (((&z.x - &rx).norm_squared() + (&z.y - &ry).norm_squared()).sqrt()) / eta;
        assert!(resid <= tol * 1.01, "residual {resid}");
        // feasibility
        assert!(g.domain_x().contains(&z.x, 1e-12));
        assert!(g.domain_y().contains(&z.y, 1e-12));
    }

    #[test]
    fn iteration_budget_error_carries_last_iterate() {
        let p = QuadraticSsp::from_parts(
            Matrix::from_element(1, 1, 1.0),
            Matrix::zeros(1, 1),
            Matrix::from_element(1, 1, 1.0),
            Vector::from_element(1, 3.0),
            Vector::zeros(1),
            NoiseModel::Gaussian { sigma: 0.0 },
            BlockDomain::Free { dim: 1 },
            BlockDomain::Free { dim: 1 },
        )
        .unwrap();
        match extragradient_solve(&p, None, &EgConfig::new(1e-14, 3)) {
            Err(SspError::NonConvergence { iters, last, .. }) => {
                assert_eq!(iters, 3);
                assert!(last.x[0].is_finite());
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }
}
