//! Structural constants of an SSP objective.

use crate::error::{Result, SspError};

/// All structural constants of an objective `Φ`. Fields that a particular
/// problem cannot provide are `None`; operations that need a missing
/// constant fail with a capability error rather than guessing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemConstants {
    /// Strong-convexity modulus in the primal block (`0` for convex-concave).
    pub mu_x: f64,
    /// Strong-concavity modulus in the dual block.
    pub mu_y: f64,
    /// Gradient Lipschitz constants.
    pub l_x: f64,
    pub l_y: f64,
    pub l_xy: f64,
    /// Function Lipschitz constants (constrained case).
    pub ell_x: Option<f64>,
    pub ell_y: Option<f64>,
    /// Gradient-noise standard deviations per block.
    pub sigma_x: Option<f64>,
    pub sigma_y: Option<f64>,
    /// Second-moment bound of the stochastic gradient at the saddle point.
    pub c_at_saddle: Option<f64>,
    /// Squared domain size constants (constrained case).
    pub d_x_sq: Option<f64>,
    pub d_y_sq: Option<f64>,
}

impl ProblemConstants {
    /// `min(μ_x, μ_y)`.
    pub fn mu(&self) -> f64 {
        self.mu_x.min(self.mu_y)
    }

    /// `max(L_x, L_y, L_xy)`.
    pub fn l(&self) -> f64 {
        self.l_x.max(self.l_y).max(self.l_xy)
    }

    /// `max(ℓ_x, ℓ_y)`; capability error when either is missing.
    pub fn ell(&self) -> Result<f64> {
        match (self.ell_x, self.ell_y) {
            (Some(a), Some(b)) => Ok(a.max(b)),
            _ => Err(SspError::capability("function Lipschitz constants unknown")),
        }
    }

    /// Condition number `L/μ`; capability error when `μ = 0`.
    pub fn kappa(&self) -> Result<f64> {
        let mu = self.mu();
        if mu <= 0.0 {
            return Err(SspError::capability(
                "condition number undefined: zero strong convexity modulus",
            ));
        }
        Ok(self.l() / mu)
    }

    /// Smoothness of the primal function `f(x) = max_y Φ(x,y)`:
    /// `L_f = L_x + L_xy²/μ_y`. Recomputed on demand, never stored.
    pub fn l_f(&self) -> Result<f64> {
        if self.mu_y <= 0.0 {
            return Err(SspError::capability("L_f undefined: μ_y = 0"));
        }
        Ok(self.l_x + self.l_xy * self.l_xy / self.mu_y)
    }

    /// Smoothness of the dual function `g(y) = min_x Φ(x,y)`:
    /// `L_g = L_y + L_xy²/μ_x`.
    pub fn l_g(&self) -> Result<f64> {
        if self.mu_x <= 0.0 {
            return Err(SspError::capability("L_g undefined: μ_x = 0"));
        }
        Ok(self.l_y + self.l_xy * self.l_xy / self.mu_x)
    }

    pub fn sigma_x(&self) -> Result<f64> {
        self.sigma_x
            .ok_or_else(|| SspError::capability("σ_x unknown"))
    }

    pub fn sigma_y(&self) -> Result<f64> {
        self.sigma_y
            .ok_or_else(|| SspError::capability("σ_y unknown"))
    }

    pub fn c_at_saddle(&self) -> Result<f64> {
        self.c_at_saddle
            .ok_or_else(|| SspError::capability("second-moment constant C unknown"))
    }

    /// Basic consistency checks (`μ ≤ L` per block, `κ ≥ 1` when defined).
    pub fn validate(&self) -> Result<()> {
        if self.mu_x < 0.0 || self.mu_y < 0.0 {
            return Err(SspError::domain("negative strong convexity modulus"));
        }
        if self.mu_x > 0.0 && self.l_x > 0.0 && self.mu_x > self.l_x * (1.0 + 1e-12) {
            return Err(SspError::domain("μ_x exceeds L_x"));
        }
        if self.mu_y > 0.0 && self.l_y > 0.0 && self.mu_y > self.l_y * (1.0 + 1e-12) {
            return Err(SspError::domain("μ_y exceeds L_y"));
        }
        if let Ok(k) = self.kappa() {
            if k < 1.0 - 1e-12 {
                return Err(SspError::domain("condition number below 1"));
            }
        }
        Ok(())
    }

    /// Constants after adding `λ_x/2‖x−c‖²` and subtracting a `λ_y` proximal
    /// term in `y` (quadratic: shifts `L_y`; entropic: leaves `L_y`).
    pub fn perturbed(&self, lambda_x: f64, lambda_y: f64, quadratic_y: bool) -> Self {
        let mut c = self.clone();
        c.mu_x += lambda_x;
        c.mu_y += lambda_y;
        c.l_x += lambda_x;
        if quadratic_y {
            c.l_y += lambda_y;
        }
        // the proximal terms are deterministic: noise levels carry over,
        // while the saddle moves so C no longer refers to this problem
        c.c_at_saddle = self.c_at_saddle;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ProblemConstants {
        ProblemConstants {
            mu_x: 1.0,
            mu_y: 2.0,
            l_x: 4.0,
            l_y: 4.0,
            l_xy: 2.0,
            ..Default::default()
        }
    }

    #[test]
    fn derived_quantities() {
        let c = base();
        assert_eq!(c.mu(), 1.0);
        assert_eq!(c.l(), 4.0);
        assert_eq!(c.kappa().unwrap(), 4.0);
        assert_eq!(c.l_f().unwrap(), 4.0 + 4.0 / 2.0);
        assert_eq!(c.l_g().unwrap(), 4.0 + 4.0 / 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn perturbation_shifts_moduli() {
        let c = base().perturbed(3.0, 5.0, true);
        assert_eq!(c.mu_x, 4.0);
        assert_eq!(c.mu_y, 7.0);
        assert_eq!(c.l_x, 7.0);
        assert_eq!(c.l_y, 9.0);
        assert_eq!(c.l_xy, 2.0);
        let c = base().perturbed(0.0, 5.0, false);
        assert_eq!(c.l_y, 4.0); // entropic proximities do not raise smoothness
        assert_eq!(c.mu_y, 7.0);
    }

    #[test]
    fn missing_constants_are_capability_errors() {
        let c = base();
        assert!(matches!(c.ell(), Err(SspError::Capability(_))));
        assert!(matches!(c.sigma_x(), Err(SspError::Capability(_))));
        let cc = ProblemConstants {
            mu_x: 0.0,
            ..base()
        };
        assert!(matches!(cc.kappa(), Err(SspError::Capability(_))));
    }

    #[test]
    fn validation_catches_mu_above_l() {
        let mut c = base();
        c.mu_x = 8.0;
        assert!(c.validate().is_err());
    }
}
