//! Feasible-set geometry: projections, feasibility checks and entropic
//! proximal steps on the simplex.

use crate::error::{Result, SspError};
use crate::Vector;

/// Tolerance applied after projections when checking feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Geometry of one block (primal or dual) of an SSP problem.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockDomain {
    /// The full Euclidean space.
    Free { dim: usize },
    /// The uniform box `[lo, hi]^dim`.
    Box { dim: usize, lo: f64, hi: f64 },
    /// The unit probability simplex.
    Simplex { dim: usize },
}

impl BlockDomain {
    pub fn dim(&self) -> usize {
        match *self {
            BlockDomain::Free { dim } => dim,
            BlockDomain::Box { dim, .. } => dim,
            BlockDomain::Simplex { dim } => dim,
        }
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self, BlockDomain::Simplex { .. })
    }

    /// Symmetric box around zero with `‖x‖∞ ≤ bound`.
    pub fn sym_box(dim: usize, bound: f64) -> Self {
        BlockDomain::Box {
            dim,
            lo: -bound,
            hi: bound,
        }
    }

    /// Exact Euclidean projection onto the set.
    pub fn project(&self, v: &Vector) -> Vector {
        match *self {
            BlockDomain::Free { .. } => v.clone(),
            BlockDomain::Box { lo, hi, .. } => v.map(|t| t.clamp(lo, hi)),
            BlockDomain::Simplex { .. } => project_simplex(v),
        }
    }

    /// Whether `v` lies in the set within `tol` (after-projection distance).
    pub fn contains(&self, v: &Vector, tol: f64) -> bool {
        if v.len() != self.dim() {
            return false;
        }
        (v - self.project(v)).norm() <= tol
    }

    /// Squared size constant used by regularization-weight formulas:
    /// the squared diameter for the simplex, and the largest squared
    /// Euclidean norm over a symmetric box (its radius about the center,
    /// where the regularizer is anchored). `None` for unbounded sets.
    pub fn diameter_sq(&self) -> Option<f64> {
        match *self {
            BlockDomain::Free { .. } => None,
            BlockDomain::Box { dim, lo, hi } => {
                let u = lo.abs().max(hi.abs());
                Some(dim as f64 * u * u)
            }
            BlockDomain::Simplex { .. } => Some(2.0),
        }
    }

    /// Uniform point of the set when one is canonical (simplex center,
    /// box center, origin for free space).
    pub fn center(&self) -> Vector {
        match *self {
            BlockDomain::Free { dim } => Vector::zeros(dim),
            BlockDomain::Box { dim, lo, hi } => Vector::from_element(dim, 0.5 * (lo + hi)),
            BlockDomain::Simplex { dim } => Vector::from_element(dim, 1.0 / dim as f64),
        }
    }

    pub fn check_feasible(&self, v: &Vector, what: &str) -> Result<()> {
        if !self.contains(v, FEASIBILITY_TOL) {
            return Err(SspError::domain(format!(
                "{what} is infeasible (distance to set exceeds {FEASIBILITY_TOL:.0e})"
            )));
        }
        Ok(())
    }
}

/// Euclidean projection onto the unit simplex by the sorted-threshold rule.
pub fn project_simplex(v: &Vector) -> Vector {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if s - t > 0.0 {
            theta = t;
            rho = i + 1;
        }
    }
    debug_assert!(rho > 0);
    let _ = rho;
    v.map(|t| (t - theta).max(0.0))
}

/// Solves `argmin_{u ∈ simplex} ⟨g,u⟩ + beta·Σ uᵢ ln uᵢ + kl_w·KL(u‖c) + (1/eta)·KL(u‖x)`
/// in closed form (multiplicative update followed by normalization).
///
/// `eta` is the proximal stepsize of the KL term anchored at `x`; `beta` is
/// the weight of a plain entropy term in the objective; `kl_w`/`kl_center`
/// an optional KL-to-center term. All weights must be nonnegative and
/// `beta + kl_w + 1/eta` positive.
pub fn entropic_prox(
    x: &Vector,
    g: &Vector,
    eta: f64,
    beta: f64,
    kl_w: f64,
    kl_center: Option<&Vector>,
) -> Vector {
    let inv_eta = if eta.is_finite() { 1.0 / eta } else { 0.0 };
    let denom = beta + kl_w + inv_eta;
    debug_assert!(denom > 0.0);
    let n = x.len();
    let mut expo = Vector::zeros(n);
    for i in 0..n {
        let mut num = -g[i];
        if kl_w > 0.0 {
            let c = kl_center.expect("kl_center required when kl_w > 0");
            num += kl_w * safe_ln(c[i]);
        }
        if inv_eta > 0.0 {
            num += inv_eta * safe_ln(x[i]);
        }
        expo[i] = num / denom;
    }
    softmax(&expo)
}

fn safe_ln(t: f64) -> f64 {
    t.max(1e-300).ln()
}

/// Numerically stable softmax; maps -inf entries to exact zeros.
pub fn softmax(expo: &Vector) -> Vector {
    let mx = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = expo.map(|e| (e - mx).exp());
    let s: f64 = out.iter().sum();
    out /= s;
    out
}

/// `log Σ exp(vᵢ)`, stable.
pub fn log_sum_exp(v: &Vector) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = v.iter().map(|&t| (t - mx).exp()).sum();
    mx + s.ln()
}
