//! The SSP problem abstraction, solution types and exact gap evaluators.

use crate::constants::ProblemConstants;
use crate::domain::{BlockDomain, FEASIBILITY_TOL};
use crate::error::{Result, SspError};
use crate::rng::SspRng;
use crate::Vector;

/// A candidate primal/dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPair {
    pub x: Vector,
    pub y: Vector,
}

impl PrimalDualPair {
    pub fn new(x: Vector, y: Vector) -> Self {
        PrimalDualPair { x, y }
    }

    pub fn zeros(dim_x: usize, dim_y: usize) -> Self {
        PrimalDualPair::new(Vector::zeros(dim_x), Vector::zeros(dim_y))
    }

    /// Squared Euclidean distance over both blocks.
    pub fn dist_sq(&self, other: &PrimalDualPair) -> f64 {
        (&self.x - &other.x).norm_squared() + (&self.y - &other.y).norm_squared()
    }
}

/// Entropy-type composite terms attached to one block. These are kept out
/// of the smooth gradients and folded into proximal steps instead, since
/// their gradients blow up at the simplex boundary.
#[derive(Debug, Clone, Default)]
pub struct BlockReg {
    /// Weight of `Σ uᵢ ln uᵢ`.
    pub entropy_w: f64,
    /// Weight of `KL(u ‖ center)`.
    pub kl_w: f64,
    pub kl_center: Option<Vector>,
}

impl BlockReg {
    pub fn none() -> Self {
        BlockReg::default()
    }

    pub fn entropy(w: f64) -> Self {
        BlockReg {
            entropy_w: w,
            ..Default::default()
        }
    }

    pub fn is_none(&self) -> bool {
        self.entropy_w == 0.0 && self.kl_w == 0.0
    }

    /// Value of the composite term at `u`.
    pub fn value(&self, u: &Vector) -> f64 {
        let mut t = 0.0;
        if self.entropy_w > 0.0 {
            t += self.entropy_w
                * u.iter()
                    .map(|&a| if a > 0.0 { a * a.ln() } else { 0.0 })
                    .sum::<f64>();
        }
        if self.kl_w > 0.0 {
            let c = self.kl_center.as_ref().expect("kl term without center");
            t += self.kl_w
                * u.iter()
                    .zip(c.iter())
                    .map(|(&a, &b)| if a > 0.0 { a * (a / b.max(1e-300)).ln() } else { 0.0 })
                    .sum::<f64>();
        }
        t
    }

    /// Gradient of the composite term; finite only at interior points.
    pub fn grad(&self, u: &Vector) -> Vector {
        let n = u.len();
        let mut g = Vector::zeros(n);
        if self.entropy_w > 0.0 {
            for i in 0..n {
                g[i] += self.entropy_w * (u[i].max(1e-300).ln() + 1.0);
            }
        }
        if self.kl_w > 0.0 {
            let c = self.kl_center.as_ref().expect("kl term without center");
            for i in 0..n {
                g[i] += self.kl_w * ((u[i].max(1e-300) / c[i].max(1e-300)).ln() + 1.0);
            }
        }
        g
    }
}

/// One realization `Φ_ξ`, evaluable at arbitrary feasible points.
pub trait SampleFn: Send + Sync {
    /// Full sample objective, including any regularization terms of the
    /// owning problem.
    fn value(&self, x: &Vector, y: &Vector) -> f64;
    /// Gradient of the smooth part of `Φ_ξ` w.r.t. `x`.
    fn smooth_grad_x(&self, x: &Vector, y: &Vector) -> Vector;
    /// Gradient of the smooth part of `Φ_ξ` w.r.t. `y`.
    fn smooth_grad_y(&self, x: &Vector, y: &Vector) -> Vector;
}

/// A stochastic saddle-point problem `min_x max_y Φ(x,y) = E[Φ_ξ(x,y)]`.
///
/// The objective splits as `Φ = S + reg_x − reg_y` where `S` is smooth and
/// the `reg` parts are entropy-type terms handled by proximal steps.
/// Exact-expectation evaluators are a capability: benchmark problems
/// provide them in closed form, and operations that need a missing one
/// fail with [`SspError::Capability`].
pub trait SspProblem: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn constants(&self) -> &ProblemConstants;
    fn domain_x(&self) -> &BlockDomain;
    fn domain_y(&self) -> &BlockDomain;

    fn reg_x(&self) -> BlockReg {
        BlockReg::none()
    }
    fn reg_y(&self) -> BlockReg {
        BlockReg::none()
    }

    /// Exact objective value (including regularization terms).
    fn value(&self, x: &Vector, y: &Vector) -> f64;

    /// Exact gradient of the smooth part w.r.t. `x`.
    fn smooth_grad_x(&self, x: &Vector, y: &Vector) -> Vector;
    /// Exact gradient of the smooth part w.r.t. `y`.
    fn smooth_grad_y(&self, x: &Vector, y: &Vector) -> Vector;

    /// Full exact gradient w.r.t. `x` (smooth part plus entropy terms).
    fn grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        let mut g = self.smooth_grad_x(x, y);
        let r = self.reg_x();
        if !r.is_none() {
            g += r.grad(x);
        }
        g
    }

    /// Full exact gradient w.r.t. `y`.
    fn grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        let mut g = self.smooth_grad_y(x, y);
        let r = self.reg_y();
        if !r.is_none() {
            g -= r.grad(y);
        }
        g
    }

    /// Exact primal function `f(x) = max_{y∈𝒴} Φ(x,y)`.
    fn inner_max(&self, x: &Vector) -> Result<f64>;
    /// Exact dual function `g(y) = min_{x∈𝒳} Φ(x,y)`.
    fn inner_min(&self, y: &Vector) -> Result<f64>;

    /// The saddle point, when known in closed form.
    fn saddle(&self) -> Option<PrimalDualPair> {
        None
    }
    /// `Φ(x*,y*)`, when the saddle is known.
    fn saddle_value(&self) -> Option<f64> {
        None
    }

    /// Smoothness scale of the smooth part in the geometry the inner
    /// solver uses for this problem (entropic on simplex blocks, Euclidean
    /// elsewhere). Simplex problems can report the `ℓ1`-coupling norm
    /// (e.g. the largest payoff entry), which is far smaller than the
    /// spectral norm; `None` falls back to the Euclidean constants.
    fn eg_smoothness_hint(&self) -> Option<f64> {
        None
    }

    /// Draws one sample `ξ ~ 𝒫` and returns the realization `Φ_ξ`.
    fn draw(&self, rng: &mut SspRng) -> Box<dyn SampleFn>;

    /// Builds the empirical average of `n` fresh draws as a deterministic
    /// problem of the same family, with exact gradients of the empirical
    /// objective.
    fn empirical(&self, n: usize, rng: &mut SspRng) -> Result<Box<dyn SspProblem>>;

    /// Saddle point of the proximally perturbed problem
    /// `Φ + λ_x/2‖x−c_x‖² − λ_y/2‖y−c_y‖²`, when computable in closed form.
    fn perturbed_saddle(
        &self,
        _lambda_x: f64,
        _center_x: Option<&Vector>,
        _lambda_y: f64,
        _center_y: Option<&Vector>,
    ) -> Option<PrimalDualPair> {
        None
    }
}

/// Duality-gap report for a candidate pair.
#[derive(Debug, Clone)]
pub struct GapReport {
    /// `Δ_Φ = max_y Φ(x,y) − min_x Φ(x,y)`.
    pub gap: f64,
    /// `Δ^w_Φ = Φ(x,y*) − Φ(x*,y)`; present only when the saddle is known.
    pub weak_gap: Option<f64>,
    /// `f(x) − f(x*)`; present only when the saddle value is known.
    pub primal_gap: Option<f64>,
    /// `g(y*) − g(y)`; present only when the saddle value is known.
    pub dual_gap: Option<f64>,
}

/// Evaluates the duality gap of `z` on `problem`.
///
/// Errors: infeasible `z` is a domain error; missing exact inner
/// evaluators propagate as capability errors.
pub fn eval_gap(problem: &dyn SspProblem, z: &PrimalDualPair) -> Result<GapReport> {
    problem.domain_x().check_feasible(&z.x, "primal point")?;
    problem.domain_y().check_feasible(&z.y, "dual point")?;
    let f_x = problem.inner_max(&z.x)?;
    let g_y = problem.inner_min(&z.y)?;
    let gap = f_x - g_y;
    let weak_gap = problem
        .saddle()
        .map(|s| problem.value(&z.x, &s.y) - problem.value(&s.x, &z.y));
    let (primal_gap, dual_gap) = match problem.saddle_value() {
        Some(v) => (Some(f_x - v), Some(v - g_y)),
        None => (None, None),
    };
    Ok(GapReport {
        gap,
        weak_gap,
        primal_gap,
        dual_gap,
    })
}

/// Evaluates the weak duality gap `Φ(x,y*) − Φ(x*,y)`.
///
/// Errors: capability error when the saddle point is unknown.
pub fn eval_weak_gap(problem: &dyn SspProblem, z: &PrimalDualPair) -> Result<f64> {
    let s = problem
        .saddle()
        .ok_or_else(|| SspError::capability("weak gap needs a known saddle point"))?;
    problem.domain_x().check_feasible(&z.x, "primal point")?;
    problem.domain_y().check_feasible(&z.y, "dual point")?;
    Ok(problem.value(&z.x, &s.y) - problem.value(&s.x, &z.y))
}

/// Checks that `z` lies in the problem's feasible set within the
/// post-projection tolerance.
pub fn check_feasible(problem: &dyn SspProblem, z: &PrimalDualPair) -> bool {
    problem.domain_x().contains(&z.x, FEASIBILITY_TOL)
        && problem.domain_y().contains(&z.y, FEASIBILITY_TOL)
}
