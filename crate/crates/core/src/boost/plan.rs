//! Schedule and sample-size calculators for the confidence-boosting
//! drivers.

use crate::constants::ProblemConstants;
use crate::error::{Result, SspError};

/// Whether the plan serves an unconstrained run (distance-certified final
/// round) or a constrained one (function-gap final round).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Unconstrained,
    Constrained,
}

/// Final-round certification strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum LastRound {
    /// Distance round with condition-number-inflated oracle budgets.
    Distance,
    /// Function-gap selection with the given multipliers.
    FunctionGap { m_x: f64, m_y: f64 },
}

/// Experiment-mode overrides; any field set replaces the theory value.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlanOverrides {
    pub nu: Option<f64>,
    pub t_rounds: Option<usize>,
    pub m: Option<usize>,
    pub delta: Option<f64>,
}

/// The full boosting schedule: proximal amplitudes, per-round radii and
/// the trial count, derived from the target `(ε, p)`.
#[derive(Debug, Clone)]
pub struct PbsspPlan {
    pub epsilon: f64,
    pub p: f64,
    pub nu: f64,
    /// Number of proximal rounds `T`; rounds run `i = 0..=T` plus a final
    /// certification round.
    pub t_rounds: usize,
    /// Per-round relative accuracy `δ`.
    pub delta: f64,
    /// Trial count per robust extraction.
    pub m: usize,
    /// `[λ^{-1}=0, λ^0, …, λ^T]` (length `T+2`).
    pub lambda_x: Vec<f64>,
    pub lambda_y: Vec<f64>,
    /// Distance targets `ε_x^i = √(2δ/(μ_x+λ_x^{i−1}))`, `i = 0..=T`.
    pub radii_x: Vec<f64>,
    pub radii_y: Vec<f64>,
    pub mode: PlanMode,
    pub last_round: LastRound,
}

impl PbsspPlan {
    /// `λ_x^i` for `i ∈ [-1, T]`.
    pub fn lambda_x_at(&self, i: isize) -> f64 {
        self.lambda_x[(i + 1) as usize]
    }

    pub fn lambda_y_at(&self, i: isize) -> f64 {
        self.lambda_y[(i + 1) as usize]
    }

    /// The guarantee budget `δ(2 + Σᵢ λ_x^i/(μ_x+λ_x^{i−1}) + λ_y^i/(μ_y+λ_y^{i−1}))`:
    /// the certified duality-gap bound of the full schedule.
    pub fn guarantee_budget(&self, mu_x: f64, mu_y: f64) -> f64 {
        self.delta * (2.0 + self.lambda_ratio_sum(mu_x, mu_y))
    }

    fn lambda_ratio_sum(&self, mu_x: f64, mu_y: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..=self.t_rounds as isize {
            s += self.lambda_x_at(i) / (mu_x + self.lambda_x_at(i - 1));
            s += self.lambda_y_at(i) / (mu_y + self.lambda_y_at(i - 1));
        }
        s
    }
}

/// Theorem-guarantee multipliers for function-gap selection on the
/// `λ^T`-perturbed problems.
pub fn gap_multipliers(c: &ProblemConstants, lambda_x_t: f64, lambda_y_t: f64) -> (f64, f64) {
    let s2 = 2.0f64.sqrt();
    let m_x = 3.0
        + (18.0 * s2 + 45.0) * (c.l_x + lambda_x_t) / (c.mu_x + lambda_x_t)
        + 36.0 * c.l_xy / ((c.mu_x + lambda_x_t) * c.mu_y).sqrt()
        + 9.0 * c.l_xy * c.l_xy / ((c.mu_x + lambda_x_t) * c.mu_y);
    let m_y = 3.0
        + (18.0 * s2 + 45.0) * (c.l_y + lambda_y_t) / (c.mu_y + lambda_y_t)
        + 36.0 * c.l_xy / (c.mu_x * (c.mu_y + lambda_y_t)).sqrt()
        + 9.0 * c.l_xy * c.l_xy / (c.mu_x * (c.mu_y + lambda_y_t));
    (m_x, m_y)
}

/// Builds the geometric-decay schedule for target accuracy `epsilon` and
/// failure probability `p`.
///
/// Theory values: `T = ⌈log_ν(max condition ratio)⌉` (mode-specific),
/// `δ = ε/(4+4T)` (tightened when a non-default base `ν` would break the
/// guarantee budget), `λ^i = μ νⁱ`, and
/// `m = ⌈18 ln((2T+4)/p)⌉` (unconstrained) or `⌈18 ln((2T+6)/p)⌉` forced
/// odd (constrained). Overrides replace individual values for experiment
/// runs.
pub fn plan_geometric(
    constants: &ProblemConstants,
    epsilon: f64,
    p: f64,
    mode: PlanMode,
    overrides: PlanOverrides,
) -> Result<PbsspPlan> {
    if epsilon <= 0.0 {
        return Err(SspError::domain("target accuracy must be positive"));
    }
    if !(0.0 < p && p < 1.0) {
        return Err(SspError::domain("failure probability must lie in (0,1)"));
    }
    let (mu_x, mu_y) = (constants.mu_x, constants.mu_y);
    if mu_x <= 0.0 || mu_y <= 0.0 {
        return Err(SspError::capability(
            "strongly convex-concave constants required; regularize first",
        ));
    }
    let nu = overrides.nu.unwrap_or(2.0);
    if nu <= 1.0 {
        return Err(SspError::domain("base number must exceed 1"));
    }
    let ratio = match mode {
        PlanMode::Unconstrained => {
            let rx = (constants.l_xy * constants.l_xy / mu_y + constants.l_x) / mu_x;
            let ry = (constants.l_xy * constants.l_xy / mu_x + constants.l_y) / mu_y;
            rx.max(ry)
        }
        PlanMode::Constrained => (constants.l_x / mu_x)
            .max(constants.l_y / mu_y)
            .max(constants.l_xy * constants.l_xy / (mu_x * mu_y)),
    };
    let t_rounds = overrides
        .t_rounds
        .unwrap_or_else(|| (ratio.ln() / nu.ln()).ceil().max(0.0) as usize);

    let lambda = |mu: f64| -> Vec<f64> {
        let mut v = Vec::with_capacity(t_rounds + 2);
        v.push(0.0);
        for i in 0..=t_rounds {
            v.push(mu * nu.powi(i as i32));
        }
        v
    };
    let lambda_x = lambda(mu_x);
    let lambda_y = lambda(mu_y);

    let delta = match overrides.delta {
        Some(d) => d,
        None => {
            let base = epsilon / (4.0 + 4.0 * t_rounds as f64);
            // keep the guarantee budget at ε even for non-default bases
            let mut ratio_sum = 0.0;
            for i in 0..=t_rounds {
                ratio_sum += lambda_x[i + 1] / (mu_x + lambda_x[i]);
                ratio_sum += lambda_y[i + 1] / (mu_y + lambda_y[i]);
            }
            base.min(epsilon / (2.0 + ratio_sum))
        }
    };

    let m = overrides.m.unwrap_or_else(|| match mode {
        PlanMode::Unconstrained => {
            (18.0 * ((2.0 * t_rounds as f64 + 4.0) / p).ln()).ceil() as usize
        }
        PlanMode::Constrained => {
            let m = (18.0 * ((2.0 * t_rounds as f64 + 6.0) / p).ln()).ceil() as usize;
            if m % 2 == 0 {
                m + 1
            } else {
                m
            }
        }
    });
    if m == 0 {
        return Err(SspError::domain("trial count must be ≥ 1"));
    }
    if mode == PlanMode::Constrained && m % 2 == 0 {
        return Err(SspError::domain(
            "constrained schedules need an odd trial count",
        ));
    }

    let radii = |mu: f64, lam: &[f64]| -> Vec<f64> {
        (0..=t_rounds)
            .map(|i| (2.0 * delta / (mu + lam[i])).sqrt())
            .collect()
    };
    let radii_x = radii(mu_x, &lambda_x);
    let radii_y = radii(mu_y, &lambda_y);

    let last_round = match mode {
        PlanMode::Unconstrained => LastRound::Distance,
        PlanMode::Constrained => {
            let (m_x, m_y) = gap_multipliers(
                constants,
                lambda_x[t_rounds + 1],
                lambda_y[t_rounds + 1],
            );
            LastRound::FunctionGap { m_x, m_y }
        }
    };

    Ok(PbsspPlan {
        epsilon,
        p,
        nu,
        t_rounds,
        delta,
        m,
        lambda_x,
        lambda_y,
        radii_x,
        radii_y,
        mode,
        last_round,
    })
}

/// Sample size of one SAA call in round `i` (perturbation index `i−1`) of
/// the unconstrained driver: `n = ⌈432·C·L_xy²/((μ+λ^{i−1})·μ_other²·δ)⌉`
/// per block.
pub fn saa_round_sizes(
    plan: &PbsspPlan,
    c: &ProblemConstants,
    round: usize,
) -> Result<(usize, usize)> {
    let cc = c.c_at_saddle()?;
    let base = 432.0 * cc * c.l_xy * c.l_xy / plan.delta;
    let lx = plan.lambda_x_at(round as isize - 1);
    let ly = plan.lambda_y_at(round as isize - 1);
    let n_x = (base / ((c.mu_x + lx) * c.mu_y * c.mu_y)).ceil() as usize;
    let n_y = (base / (c.mu_x * c.mu_x * (c.mu_y + ly))).ceil() as usize;
    Ok((n_x.max(1), n_y.max(1)))
}

/// Final-round SAA sizes of the unconstrained driver, inflated by the
/// residual condition numbers of the `λ^T`-perturbed functions.
pub fn saa_final_sizes(plan: &PbsspPlan, c: &ProblemConstants) -> Result<(usize, usize)> {
    let cc = c.c_at_saddle()?;
    let base = 432.0 * cc * c.l_xy * c.l_xy / plan.delta;
    let lx = plan.lambda_x_at(plan.t_rounds as isize);
    let ly = plan.lambda_y_at(plan.t_rounds as isize);
    let infl_x = (c.l_xy * c.l_xy / c.mu_y + c.l_x + lx) / (c.mu_x + lx);
    let infl_y = (c.l_xy * c.l_xy / c.mu_x + c.l_y + ly) / (c.mu_y + ly);
    let n_x = (infl_x * base / ((c.mu_x + lx) * c.mu_y * c.mu_y)).ceil() as usize;
    let n_y = (infl_y * base / (c.mu_x * c.mu_x * (c.mu_y + ly))).ceil() as usize;
    Ok((n_x.max(1), n_y.max(1)))
}

/// Round sizes for the constrained driver:
/// `n = ⌈(54/δ)(ℓ_x²/(μ_x+λ^{i−1}) + ℓ_y²/μ_y)⌉` per block.
pub fn saa_c_round_sizes(
    plan: &PbsspPlan,
    c: &ProblemConstants,
    round: usize,
) -> Result<(usize, usize)> {
    let ell_x = c.ell_x.ok_or_else(|| SspError::capability("ℓ_x unknown"))?;
    let ell_y = c.ell_y.ok_or_else(|| SspError::capability("ℓ_y unknown"))?;
    let lx = plan.lambda_x_at(round as isize - 1);
    let ly = plan.lambda_y_at(round as isize - 1);
    let n_x = (54.0 / plan.delta * (ell_x * ell_x / (c.mu_x + lx) + ell_y * ell_y / c.mu_y))
        .ceil() as usize;
    let n_y = (54.0 / plan.delta * (ell_x * ell_x / c.mu_x + ell_y * ell_y / (c.mu_y + ly)))
        .ceil() as usize;
    Ok((n_x.max(1), n_y.max(1)))
}

/// Constrained final round: the weak-gap oracle cost at accuracy `δ'`:
/// `n = ⌈(2/δ')(ℓ_x²/(μ_x+λ^T) + ℓ_y²/μ_y)⌉` (primal stream; dual analogous).
pub fn saa_c_oracle_size(
    c: &ProblemConstants,
    lambda_t: f64,
    delta_prime: f64,
    primal_stream: bool,
) -> Result<usize> {
    let ell_x = c.ell_x.ok_or_else(|| SspError::capability("ℓ_x unknown"))?;
    let ell_y = c.ell_y.ok_or_else(|| SspError::capability("ℓ_y unknown"))?;
    let n = if primal_stream {
        2.0 / delta_prime * (ell_x * ell_x / (c.mu_x + lambda_t) + ell_y * ell_y / c.mu_y)
    } else {
        2.0 / delta_prime * (ell_x * ell_x / c.mu_x + ell_y * ell_y / (c.mu_y + lambda_t))
    };
    Ok((n.ceil() as usize).max(1))
}

/// Per-round squared-distance targets handed to the first-order oracle:
/// `δ_x^{i−1} = 2δ/(27(μ_x+λ_x^{i−1}))`, etc.
pub fn mogda_round_targets(plan: &PbsspPlan, c: &ProblemConstants, round: usize) -> (f64, f64) {
    let lx = plan.lambda_x_at(round as isize - 1);
    let ly = plan.lambda_y_at(round as isize - 1);
    (
        2.0 * plan.delta / (27.0 * (c.mu_x + lx)),
        2.0 * plan.delta / (27.0 * (c.mu_y + ly)),
    )
}

/// Final-round first-order targets:
/// `δ_x^T = 2δ/(27(L_xy²/μ_y + L_x + λ_x^T))`, etc.
pub fn mogda_final_targets(plan: &PbsspPlan, c: &ProblemConstants) -> (f64, f64) {
    let lx = plan.lambda_x_at(plan.t_rounds as isize);
    let ly = plan.lambda_y_at(plan.t_rounds as isize);
    (
        2.0 * plan.delta / (27.0 * (c.l_xy * c.l_xy / c.mu_y + c.l_x + lx)),
        2.0 * plan.delta / (27.0 * (c.l_xy * c.l_xy / c.mu_x + c.l_y + ly)),
    )
}

/// Baseline robust-distance parameters (unconstrained): number of oracle
/// calls `m = ⌈18 ln(1/p)⌉` and the per-call accuracy `ε/(54(κ²+κ))`.
pub fn rde_unconstrained_params(c: &ProblemConstants, epsilon: f64, p: f64) -> Result<(usize, f64)> {
    let kappa = c.kappa()?;
    let m = (18.0 * (1.0 / p).ln()).ceil().max(1.0) as usize;
    let delta = epsilon / (54.0 * (kappa * kappa + kappa));
    Ok((m, delta))
}

/// SAA sample size realizing a weak-gap accuracy `δ` on an unconstrained
/// problem: `E[Δ^w] ≤ (L_f+L_g)/2 · 32CL_xy²/(n μ_x²μ_y²) ≤ δ`.
pub fn saa_size_for_weak_gap(c: &ProblemConstants, delta: f64) -> Result<usize> {
    let cc = c.c_at_saddle()?;
    let lf = c.l_f()?;
    let lg = c.l_g()?;
    let n = 16.0 * cc * c.l_xy * c.l_xy * (lf + lg)
        / (delta * c.mu_x * c.mu_x * c.mu_y * c.mu_y);
    Ok((n.ceil() as usize).max(1))
}

/// Baseline robust-gap parameters (constrained): odd `m = ⌈18 ln(4/p)⌉`
/// and the shared accuracy `δ = ε/(M_x + M_y)` at zero amplitude.
pub fn rde_constrained_params(c: &ProblemConstants, epsilon: f64, p: f64) -> (usize, f64, f64, f64) {
    let (m_x, m_y) = gap_multipliers(c, 0.0, 0.0);
    let mut m = (18.0 * (4.0 / p).ln()).ceil().max(1.0) as usize;
    if m % 2 == 0 {
        m += 1;
    }
    (m, epsilon / (m_x + m_y), m_x, m_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn consts() -> ProblemConstants {
        ProblemConstants {
            mu_x: 1.0,
            mu_y: 1.0,
            l_x: 4.0,
            l_y: 4.0,
            l_xy: 2.0,
            c_at_saddle: Some(1.0),
            ell_x: Some(1.0),
            ell_y: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn corollary_schedule_example() {
        let plan = plan_geometric(
            &consts(),
            0.16,
            0.01,
            PlanMode::Unconstrained,
            PlanOverrides::default(),
        )
        .unwrap();
        // max((4+4)/1, (4+4)/1) = 8 → T = 3 at ν = 2
        assert_eq!(plan.t_rounds, 3);
        assert_abs_diff_eq!(plan.delta, 0.16 / 16.0, epsilon = 1e-15);
        // m = ⌈18 ln(1000)⌉ = 125
        assert_eq!(plan.m, 125);
        assert_eq!(plan.lambda_x.len(), 5);
        assert_eq!(plan.lambda_x_at(-1), 0.0);
        assert_abs_diff_eq!(plan.lambda_x_at(3), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn guarantee_budget_within_target() {
        for nu in [2.0, 4.0] {
            let plan = plan_geometric(
                &consts(),
                0.1,
                0.05,
                PlanMode::Unconstrained,
                PlanOverrides {
                    nu: Some(nu),
                    ..Default::default()
                },
            )
            .unwrap();
            let budget = plan.guarantee_budget(1.0, 1.0);
            assert!(
                budget <= 0.1 * (1.0 + 1e-12),
                "budget {budget} exceeds target at ν={nu}"
            );
        }
    }

    #[test]
    fn condition_numbers_collapse_after_t_rounds() {
        let c = consts();
        let plan = plan_geometric(
            &c,
            0.1,
            0.01,
            PlanMode::Unconstrained,
            PlanOverrides::default(),
        )
        .unwrap();
        let lx = plan.lambda_x_at(plan.t_rounds as isize);
        let ly = plan.lambda_y_at(plan.t_rounds as isize);
        let lf = c.l_f().unwrap();
        let lg = c.l_g().unwrap();
        assert!((lf + lx) / (c.mu_x + lx) <= 2.0);
        assert!((lg + ly) / (c.mu_y + ly) <= 2.0);
    }

    #[test]
    fn constrained_m_is_odd() {
        let plan = plan_geometric(
            &consts(),
            0.1,
            0.01,
            PlanMode::Constrained,
            PlanOverrides::default(),
        )
        .unwrap();
        assert_eq!(plan.m % 2, 1);
        assert!(matches!(plan.last_round, LastRound::FunctionGap { .. }));
        // constrained T formula: max(4, 4, 4) → T = 2 at ν = 2
        assert_eq!(plan.t_rounds, 2);
    }

    #[test]
    fn saa_size_pinned_values() {
        // C=1, L_xy=2, μ_x=μ_y=1, λ^{-1}=0, δ=0.1 → n = 432·4/0.1 = 17280
        let c = consts();
        let plan = plan_geometric(
            &c,
            1.6,
            0.01,
            PlanMode::Unconstrained,
            PlanOverrides {
                delta: Some(0.1),
                ..Default::default()
            },
        )
        .unwrap();
        let (n_x, _) = saa_round_sizes(&plan, &c, 0).unwrap();
        assert_eq!(n_x, 17_280);

        // ℓ_x=ℓ_y=1, μ=1, λ=0, δ=0.1 → n = ⌈54·2/0.1⌉ = 1080
        let plan_c = plan_geometric(
            &c,
            1.6,
            0.01,
            PlanMode::Constrained,
            PlanOverrides {
                delta: Some(0.1),
                ..Default::default()
            },
        )
        .unwrap();
        let (n_x, n_y) = saa_c_round_sizes(&plan_c, &c, 0).unwrap();
        assert_eq!(n_x, 1080);
        assert_eq!(n_y, 1080);
    }

    #[test]
    fn multiplier_bound_under_corollary_schedule() {
        // with λ_x^T ≥ L_x and L_xy² ≤ (μ_x+λ_x^T)μ_y the multiplier is at
        // most 138 + 36√2
        let c = consts();
        let plan = plan_geometric(
            &c,
            0.1,
            0.01,
            PlanMode::Constrained,
            PlanOverrides::default(),
        )
        .unwrap();
        let lx = plan.lambda_x_at(plan.t_rounds as isize);
        let ly = plan.lambda_y_at(plan.t_rounds as isize);
        assert!(lx >= c.l_x);
        assert!(c.l_xy * c.l_xy <= (c.mu_x + lx) * c.mu_y);
        let (m_x, m_y) = gap_multipliers(&c, lx, ly);
        let cap = 138.0 + 36.0 * 2.0f64.sqrt();
        assert!(m_x <= cap, "M_x = {m_x}");
        assert!(m_y <= cap, "M_y = {m_y}");
    }

    #[test]
    fn rde_parameters_pinned() {
        // κ = 1, ε = 0.108 → per-call accuracy 0.001
        let c = ProblemConstants {
            mu_x: 1.0,
            mu_y: 1.0,
            l_x: 1.0,
            l_y: 1.0,
            l_xy: 1.0,
            ..Default::default()
        };
        let (m, delta) = rde_unconstrained_params(&c, 0.108, 0.01).unwrap();
        assert_abs_diff_eq!(delta, 0.001, epsilon = 1e-15);
        // m = ⌈18 ln 100⌉ = 83
        assert_eq!(m, 83);
    }

    #[test]
    fn zero_modulus_needs_regularization() {
        let c = ProblemConstants {
            mu_x: 0.0,
            mu_y: 1.0,
            l_x: 1.0,
            l_y: 1.0,
            l_xy: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            plan_geometric(&c, 0.1, 0.1, PlanMode::Unconstrained, PlanOverrides::default()),
            Err(SspError::Capability(_))
        ));
    }
}
