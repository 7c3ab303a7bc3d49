//! Average-reward MDP as a box × simplex saddle-point problem:
//!
//! `Φ(x,y) = Σ_a y_aᵀ(P_a − I)x + ⟨r, y⟩`
//!
//! over `𝒳 = {‖x‖∞ ≤ U_x}` and the unit simplex `𝒴` on state-action
//! pairs, optionally with quadratic or entropy regularization. One sample
//! draws a transition for every `(s,a)` pair plus a gamma reward.

use std::sync::Arc;

use rand::Rng;
use rand_distr::Distribution;

use crate::constants::ProblemConstants;
use crate::domain::{log_sum_exp, project_simplex, BlockDomain};
use crate::error::{Result, SspError};
use crate::problem::{BlockReg, SampleFn, SspProblem};
use crate::problems::{gamma_mean_draw, Regularization};
use crate::rng::SspRng;
use crate::{Matrix, Vector};

/// Tabular average-reward MDP data.
#[derive(Debug, Clone)]
pub struct MdpModel {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-stochastic transition matrix per action.
    pub p: Vec<Matrix>,
    /// Mean rewards, `n_states × n_actions`.
    pub r: Matrix,
    /// Box bound for the difference-value block.
    pub u_x: f64,
    /// Reward noise standard deviation (gamma-distributed rewards).
    pub sigma_r: f64,
}

impl MdpModel {
    pub fn validate(&self) -> Result<()> {
        if self.p.len() != self.n_actions {
            return Err(SspError::domain("one transition matrix per action required"));
        }
        for (a, pa) in self.p.iter().enumerate() {
            if pa.nrows() != self.n_states || pa.ncols() != self.n_states {
                return Err(SspError::domain("transition matrix has wrong shape"));
            }
            for s in 0..self.n_states {
                let row_sum: f64 = pa.row(s).iter().sum();
                if (row_sum - 1.0).abs() > 1e-12 {
                    return Err(SspError::domain(format!(
                        "transition row ({s},{a}) sums to {row_sum}, expected 1"
                    )));
                }
                if pa.row(s).iter().any(|&t| t < 0.0) {
                    return Err(SspError::domain("negative transition probability"));
                }
            }
        }
        for v in self.r.iter() {
            if !(*v > 0.0 && *v < 1.0) {
                return Err(SspError::domain("mean rewards must lie in (0,1)"));
            }
        }
        Ok(())
    }

    /// Random model: uniform Dirichlet transition rows (strictly positive,
    /// so every policy induces an irreducible chain) and rewards uniform
    /// in `(0.05, 0.95)`.
    pub fn random(
        n_states: usize,
        n_actions: usize,
        u_x: f64,
        sigma_r: f64,
        seed: u64,
    ) -> Self {
        let mut rng = crate::rng::stream(seed, &[0x3d9]);
        let mut p = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            let mut pa = Matrix::zeros(n_states, n_states);
            for s in 0..n_states {
                let mut row: Vec<f64> = (0..n_states)
                    .map(|_| -rng.random::<f64>().max(1e-12).ln())
                    .collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|t| *t /= sum);
                for (sp, t) in row.iter().enumerate() {
                    pa[(s, sp)] = *t;
                }
            }
            p.push(pa);
        }
        let r = Matrix::from_fn(n_states, n_actions, |_, _| {
            0.05 + 0.9 * rng.random::<f64>()
        });
        MdpModel {
            n_states,
            n_actions,
            p,
            r,
            u_x,
            sigma_r,
        }
    }

    /// Flat state-action index; dual vectors are action-major: `y_a` is
    /// the contiguous block `a·|S| .. (a+1)·|S|`.
    #[inline]
    pub fn idx(&self, s: usize, a: usize) -> usize {
        a * self.n_states + s
    }

    /// Rewards flattened to the dual layout.
    pub fn r_flat(&self) -> Vector {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        Vector::from_fn(s_n * a_n, |i, _| self.r[(i % s_n, i / s_n)])
    }
}

#[derive(Debug, Clone)]
enum MdpReg {
    None,
    Quadratic {
        alpha_x: f64,
        alpha_y: f64,
        y_center: Vector,
    },
    Entropy {
        alpha_x: f64,
        w_y: f64,
    },
}

struct MdpData {
    model: MdpModel,
    reg: MdpReg,
    domain_x: BlockDomain,
    domain_y: BlockDomain,
    constants: ProblemConstants,
    r_flat: Vector,
    /// Per (action, state): cumulative transition distribution.
    cdf: Vec<Vec<Vec<f64>>>,
}

/// The MDP saddle-point problem. Cheap to clone (shared internals).
#[derive(Clone)]
pub struct MdpSsp {
    inner: Arc<MdpData>,
}

impl MdpSsp {
    pub fn model(&self) -> &MdpModel {
        &self.inner.model
    }

    fn alpha_x(&self) -> f64 {
        match &self.inner.reg {
            MdpReg::None => 0.0,
            MdpReg::Quadratic { alpha_x, .. } => *alpha_x,
            MdpReg::Entropy { alpha_x, .. } => *alpha_x,
        }
    }

    /// `q(x)` with `q_{(s,a)} = ((P_a − I)x + r_a)_s`, in the dual layout.
    fn q_vec(&self, x: &Vector) -> Vector {
        let m = &self.inner.model;
        let (s_n, a_n) = (m.n_states, m.n_actions);
        let mut q = Vector::zeros(s_n * a_n);
        for a in 0..a_n {
            let px = &m.p[a] * x;
            for s in 0..s_n {
                q[m.idx(s, a)] = px[s] - x[s] + m.r[(s, a)];
            }
        }
        q
    }

    /// `Σ_a (P_a − I)ᵀ y_a`.
    fn coupling_adjoint(&self, y: &Vector) -> Vector {
        let m = &self.inner.model;
        let (s_n, a_n) = (m.n_states, m.n_actions);
        let mut w = Vector::zeros(s_n);
        for a in 0..a_n {
            let ya = y.rows(a * s_n, s_n);
            w += m.p[a].transpose() * ya;
            for s in 0..s_n {
                w[s] -= y[m.idx(s, a)];
            }
        }
        w
    }

    fn reg_value_x(&self, x: &Vector) -> f64 {
        let ax = self.alpha_x();
        if ax > 0.0 {
            0.5 * ax * x.norm_squared()
        } else {
            0.0
        }
    }

    fn reg_value_y(&self, y: &Vector) -> f64 {
        match &self.inner.reg {
            MdpReg::None => 0.0,
            MdpReg::Quadratic {
                alpha_y, y_center, ..
            } => 0.5 * alpha_y * (y - y_center).norm_squared(),
            MdpReg::Entropy { w_y, .. } => {
                w_y * y
                    .iter()
                    .map(|&t| if t > 0.0 { t * t.ln() } else { 0.0 })
                    .sum::<f64>()
            }
        }
    }
}

/// One generator-model sample: a next state for every `(s,a)` pair plus a
/// gamma reward draw.
pub struct MdpSample {
    inner: Arc<MdpData>,
    /// `next[a·|S| + s]` is the sampled successor of `(s,a)`.
    pub next: Vec<usize>,
    /// Reward draws in the dual layout.
    pub rhat: Vector,
}

impl MdpSample {
    /// The indicator transition matrix `P_{ξ,a}`.
    pub fn indicator_p(&self, a: usize) -> Matrix {
        let s_n = self.inner.model.n_states;
        let mut p = Matrix::zeros(s_n, s_n);
        for s in 0..s_n {
            p[(s, self.next[a * s_n + s])] = 1.0;
        }
        p
    }
}

impl SampleFn for MdpSample {
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        let d = &*self.inner;
        let m = &d.model;
        let mut v = 0.0;
        for a in 0..m.n_actions {
            for s in 0..m.n_states {
                let i = m.idx(s, a);
                v += y[i] * (x[self.next[i]] - x[s] + self.rhat[i]);
            }
        }
        let owner = MdpSsp {
            inner: Arc::clone(&self.inner),
        };
        v + owner.reg_value_x(x) - owner.reg_value_y(y)
    }

    fn smooth_grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        let d = &*self.inner;
        let m = &d.model;
        let mut g = Vector::zeros(m.n_states);
        for a in 0..m.n_actions {
            for s in 0..m.n_states {
                let i = m.idx(s, a);
                g[self.next[i]] += y[i];
                g[s] -= y[i];
            }
        }
        let owner = MdpSsp {
            inner: Arc::clone(&self.inner),
        };
        let ax = owner.alpha_x();
        if ax > 0.0 {
            g += ax * x;
        }
        g
    }

    fn smooth_grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        let d = &*self.inner;
        let m = &d.model;
        let mut g = Vector::zeros(m.n_states * m.n_actions);
        for a in 0..m.n_actions {
            for s in 0..m.n_states {
                let i = m.idx(s, a);
                g[i] = x[self.next[i]] - x[s] + self.rhat[i];
            }
        }
        if let MdpReg::Quadratic {
            alpha_y, y_center, ..
        } = &d.reg
        {
            g -= *alpha_y * (y - y_center);
        }
        g
    }
}

/// Draws one generator-model sample from the MDP.
pub fn mdp_sample(problem: &MdpSsp, rng: &mut SspRng) -> MdpSample {
    let d = &problem.inner;
    let m = &d.model;
    let (s_n, a_n) = (m.n_states, m.n_actions);
    let mut next = vec![0usize; s_n * a_n];
    for a in 0..a_n {
        for s in 0..s_n {
            let u: f64 = rng.random();
            let cdf = &d.cdf[a][s];
            let j = cdf.partition_point(|&c| c < u).min(s_n - 1);
            next[m.idx(s, a)] = j;
        }
    }
    let sigma2 = m.sigma_r * m.sigma_r;
    let rhat = Vector::from_fn(s_n * a_n, |i, _| {
        gamma_mean_draw(m.r[(i % s_n, i / s_n)], sigma2, 1, rng)
    });
    MdpSample {
        inner: Arc::clone(&problem.inner),
        next,
        rhat,
    }
}

impl SspProblem for MdpSsp {
    fn dim_x(&self) -> usize {
        self.inner.model.n_states
    }

    fn dim_y(&self) -> usize {
        self.inner.model.n_states * self.inner.model.n_actions
    }

    fn constants(&self) -> &ProblemConstants {
        &self.inner.constants
    }

    fn domain_x(&self) -> &BlockDomain {
        &self.inner.domain_x
    }

    fn domain_y(&self) -> &BlockDomain {
        &self.inner.domain_y
    }

    fn reg_y(&self) -> BlockReg {
        match &self.inner.reg {
            MdpReg::Entropy { w_y, .. } => BlockReg::entropy(*w_y),
            _ => BlockReg::none(),
        }
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        let q = self.q_vec(x);
        q.dot(y) + self.reg_value_x(x) - self.reg_value_y(y)
    }

    fn smooth_grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        let mut g = self.coupling_adjoint(y);
        let ax = self.alpha_x();
        if ax > 0.0 {
            g += ax * x;
        }
        g
    }

    fn smooth_grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        let mut g = self.q_vec(x);
        if let MdpReg::Quadratic {
            alpha_y, y_center, ..
        } = &self.inner.reg
        {
            g -= *alpha_y * (y - y_center);
        }
        g
    }

    fn eg_smoothness_hint(&self) -> Option<f64> {
        // coupling measured box(ℓ2) → simplex(ℓ∞): the largest row norm of
        // the stacked (P_a − I) blocks, plus the quadratic term weights
        let m = &self.inner.model;
        let mut row_max: f64 = 0.0;
        for a in 0..m.n_actions {
            for s in 0..m.n_states {
                let mut sq = 0.0;
                for sp in 0..m.n_states {
                    let v = m.p[a][(s, sp)] - if s == sp { 1.0 } else { 0.0 };
                    sq += v * v;
                }
                row_max = row_max.max(sq.sqrt());
            }
        }
        let quad = match &self.inner.reg {
            MdpReg::None => 0.0,
            MdpReg::Quadratic {
                alpha_x, alpha_y, ..
            } => alpha_x.max(*alpha_y),
            MdpReg::Entropy { alpha_x, .. } => *alpha_x,
        };
        Some(row_max.max(quad).max(1e-12))
    }

    fn inner_max(&self, x: &Vector) -> Result<f64> {
        let q = self.q_vec(x);
        let base = self.reg_value_x(x);
        match &self.inner.reg {
            MdpReg::None => Ok(base + q.max()),
            MdpReg::Entropy { w_y, .. } => Ok(base + w_y * log_sum_exp(&(q / *w_y))),
            MdpReg::Quadratic {
                alpha_y, y_center, ..
            } => {
                let y_star = project_simplex(&(y_center + &q / *alpha_y));
                Ok(base + q.dot(&y_star)
                    - 0.5 * alpha_y * (&y_star - y_center).norm_squared())
            }
        }
    }

    fn inner_min(&self, y: &Vector) -> Result<f64> {
        let m = &self.inner.model;
        let w = self.coupling_adjoint(y);
        let base = self.inner.r_flat.dot(y) - self.reg_value_y(y);
        let ax = self.alpha_x();
        let u = m.u_x;
        if ax == 0.0 {
            Ok(base - u * w.iter().map(|t| t.abs()).sum::<f64>())
        } else {
            let mut t = base;
            for i in 0..w.len() {
                let xi = (-w[i] / ax).clamp(-u, u);
                t += w[i] * xi + 0.5 * ax * xi * xi;
            }
            Ok(t)
        }
    }

    fn draw(&self, rng: &mut SspRng) -> Box<dyn SampleFn> {
        Box::new(mdp_sample(self, rng))
    }

    fn empirical(&self, n: usize, rng: &mut SspRng) -> Result<Box<dyn SspProblem>> {
        if n == 0 {
            return Err(SspError::domain("empirical sample count must be ≥ 1"));
        }
        let d = &*self.inner;
        let m = &d.model;
        let (s_n, a_n) = (m.n_states, m.n_actions);
        // empirical transition rows are multinomial draws scaled by 1/n
        let mut p_bar = Vec::with_capacity(a_n);
        for a in 0..a_n {
            let mut pa = Matrix::zeros(s_n, s_n);
            for s in 0..s_n {
                let counts = multinomial(n, m.p[a].row(s).transpose().as_slice(), rng);
                for (sp, &c) in counts.iter().enumerate() {
                    pa[(s, sp)] = c as f64 / n as f64;
                }
            }
            p_bar.push(pa);
        }
        let sigma2 = m.sigma_r * m.sigma_r;
        let r_bar = Matrix::from_fn(s_n, a_n, |s, a| gamma_mean_draw(m.r[(s, a)], sigma2, n, rng));
        let model = MdpModel {
            n_states: s_n,
            n_actions: a_n,
            p: p_bar,
            r: r_bar,
            u_x: m.u_x,
            sigma_r: 0.0,
        };
        Ok(Box::new(build_mdp(model, d.reg.clone(), false)?))
    }
}

/// Multinomial draw by chained conditional binomials.
fn multinomial(n: usize, probs: &[f64], rng: &mut SspRng) -> Vec<u64> {
    use rand_distr::Binomial;
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n as u64;
    let mut rest: f64 = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == probs.len() - 1 || rest <= p {
            out[i] = remaining;
            break;
        }
        let q = (p / rest).clamp(0.0, 1.0);
        let b = Binomial::new(remaining, q).expect("binomial parameters");
        let c = b.sample(rng);
        out[i] = c;
        remaining -= c;
        rest -= p;
    }
    out
}

fn build_mdp(model: MdpModel, reg: MdpReg, validate: bool) -> Result<MdpSsp> {
    if validate {
        model.validate()?;
    }
    let (s_n, a_n) = (model.n_states, model.n_actions);
    let domain_x = BlockDomain::sym_box(s_n, model.u_x);
    let domain_y = BlockDomain::Simplex { dim: s_n * a_n };

    // coupling operator norm: K = vstack_a (P_a − I)
    let mut k = Matrix::zeros(s_n * a_n, s_n);
    for a in 0..a_n {
        let mut block = model.p[a].clone();
        for s in 0..s_n {
            block[(s, s)] -= 1.0;
        }
        k.view_mut((a * s_n, 0), (s_n, s_n)).copy_from(&block);
    }
    let l_xy = k.svd(false, false).singular_values.max();

    let (mu_x, mu_y, l_x, l_y) = match &reg {
        MdpReg::None => (0.0, 0.0, 0.0, 0.0),
        MdpReg::Quadratic {
            alpha_x, alpha_y, ..
        } => (*alpha_x, *alpha_y, *alpha_x, *alpha_y),
        MdpReg::Entropy { alpha_x, w_y } => (*alpha_x, *w_y, *alpha_x, 0.0),
    };
    let u = model.u_x;
    let sa = (s_n * a_n) as f64;
    let sigma_r = model.sigma_r;
    let constants = ProblemConstants {
        mu_x,
        mu_y,
        l_x,
        l_y,
        l_xy,
        // one transition indicator row deviates from its distribution by at
        // most √2 in norm; rows are independent across (s,a)
        sigma_x: Some(2.0f64.sqrt()),
        sigma_y: Some((sa * (u * u + sigma_r * sigma_r)).sqrt()),
        ell_x: Some(2.0),
        // rewards are unbounded; 3σ allowance documented as a surrogate
        ell_y: Some(sa.sqrt() * (2.0 * u + 1.0 + 3.0 * sigma_r)),
        c_at_saddle: None,
        d_x_sq: Some(s_n as f64 * u * u),
        d_y_sq: Some(2.0),
    };

    let cdf = (0..a_n)
        .map(|a| {
            (0..s_n)
                .map(|s| {
                    let mut acc = 0.0;
                    (0..s_n)
                        .map(|sp| {
                            acc += model.p[a][(s, sp)];
                            acc
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let r_flat = model.r_flat();
    Ok(MdpSsp {
        inner: Arc::new(MdpData {
            model,
            reg,
            domain_x,
            domain_y,
            constants,
            r_flat,
            cdf,
        }),
    })
}

/// Builds the saddle-point formulation of an MDP, optionally regularized
/// to be strongly convex-concave.
pub fn make_mdp_ssp(model: MdpModel, regularization: Regularization) -> Result<MdpSsp> {
    model.validate()?;
    let s_n = model.n_states;
    let a_n = model.n_actions;
    let d_x_sq = s_n as f64 * model.u_x * model.u_x;
    let d_y_sq = 2.0;
    let reg = match regularization {
        Regularization::None => MdpReg::None,
        Regularization::Quadratic { epsilon } => MdpReg::Quadratic {
            alpha_x: epsilon / (2.0 * d_x_sq),
            alpha_y: epsilon / (2.0 * d_y_sq),
            y_center: Vector::from_element(s_n * a_n, 1.0 / (s_n * a_n) as f64),
        },
        Regularization::Entropy { epsilon } => MdpReg::Entropy {
            alpha_x: epsilon / (2.0 * d_x_sq),
            w_y: epsilon / (4.0 * ((s_n * a_n) as f64).ln()),
        },
    };
    build_mdp(model, reg, true)
}

/// A stationary randomized policy; rows are per-state action distributions.
#[derive(Debug, Clone)]
pub struct Policy(pub Matrix);

/// Recovers the policy encoded by a dual feasible point:
/// `P[π(s)=a] = y_{sa} / Σ_{a'} y_{sa'}`, with zero-mass states mapped to
/// the uniform distribution.
pub fn policy_from_y(y: &Vector, n_states: usize, n_actions: usize) -> Policy {
    let mut p = Matrix::zeros(n_states, n_actions);
    for s in 0..n_states {
        let mass: f64 = (0..n_actions).map(|a| y[a * n_states + s]).sum();
        for a in 0..n_actions {
            p[(s, a)] = if mass > 0.0 {
                y[a * n_states + s] / mass
            } else {
                1.0 / n_actions as f64
            };
        }
    }
    Policy(p)
}

/// Long-run average reward of a policy: solves the stationary distribution
/// of the induced chain. Errors when the chain has no unique stationary
/// distribution.
pub fn avg_reward(policy: &Policy, model: &MdpModel) -> Result<f64> {
    let s_n = model.n_states;
    let mut p_pi = Matrix::zeros(s_n, s_n);
    for s in 0..s_n {
        for a in 0..model.n_actions {
            let w = policy.0[(s, a)];
            if w > 0.0 {
                for sp in 0..s_n {
                    p_pi[(s, sp)] += w * model.p[a][(s, sp)];
                }
            }
        }
    }
    // dᵀ(P − I) = 0, Σd = 1: replace the last column with the normalization
    let mut sys = p_pi.transpose() - Matrix::identity(s_n, s_n);
    for s in 0..s_n {
        sys[(s_n - 1, s)] = 1.0;
    }
    let mut rhs = Vector::zeros(s_n);
    rhs[s_n - 1] = 1.0;
    let d = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SspError::Invariant("induced chain is reducible".into()))?;
    if d.iter().any(|&t| t < -1e-9) {
        return Err(SspError::Invariant(
            "stationary distribution has negative mass".into(),
        ));
    }
    let residual = (p_pi.transpose() * &d - &d).norm();
    if residual > 1e-8 {
        return Err(SspError::Invariant(format!(
            "stationary distribution residual {residual:.2e}"
        )));
    }
    let mut v = 0.0;
    for s in 0..s_n {
        for a in 0..model.n_actions {
            v += d[s] * policy.0[(s, a)] * model.r[(s, a)];
        }
    }
    Ok(v)
}

/// Exhaustive search over deterministic policies; the reference optimum
/// for small models.
pub fn enumerate_optimal(model: &MdpModel) -> Result<(Policy, f64)> {
    let (s_n, a_n) = (model.n_states, model.n_actions);
    let total = (a_n as u64).pow(s_n as u32);
    let mut best: Option<(Policy, f64)> = None;
    for code in 0..total {
        let mut p = Matrix::zeros(s_n, a_n);
        let mut c = code;
        for s in 0..s_n {
            p[(s, (c % a_n as u64) as usize)] = 1.0;
            c /= a_n as u64;
        }
        let pi = Policy(p);
        let v = avg_reward(&pi, model)?;
        if best.as_ref().map(|(_, b)| v > *b).unwrap_or(true) {
            best = Some((pi, v));
        }
    }
    Ok(best.expect("at least one policy"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_state_two_action() -> MdpModel {
        // single state, self loops, rewards (0.3, 0.7)
        MdpModel {
            n_states: 1,
            n_actions: 2,
            p: vec![Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0)],
            r: Matrix::from_row_slice(1, 2, &[0.3, 0.7]),
            u_x: 0.5,
            sigma_r: 0.0,
        }
    }

    #[test]
    fn one_state_optimum_is_second_action() {
        let m = one_state_two_action();
        let (pi, v) = enumerate_optimal(&m).unwrap();
        assert_abs_diff_eq!(v, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.0[(0, 1)], 1.0, epsilon = 1e-12);
        // y concentrated on action 2 recovers the same value
        let y = Vector::from_column_slice(&[0.0, 1.0]);
        let pi2 = policy_from_y(&y, 1, 2);
        assert_abs_diff_eq!(avg_reward(&pi2, &m).unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn zero_x_uniform_y_gives_mean_reward() {
        let m = MdpModel::random(4, 3, 0.5, 0.0, 1);
        let mean_r = m.r.iter().sum::<f64>() / 12.0;
        let p = make_mdp_ssp(m, Regularization::None).unwrap();
        let x = Vector::zeros(4);
        let y = Vector::from_element(12, 1.0 / 12.0);
        assert_abs_diff_eq!(p.value(&x, &y), mean_r, epsilon = 1e-12);
    }

    #[test]
    fn paper_scale_diameters() {
        let m = MdpModel::random(100, 10, 0.5, 1.0, 2);
        let p = make_mdp_ssp(m, Regularization::Quadratic { epsilon: 0.01 }).unwrap();
        let c = p.constants();
        assert_abs_diff_eq!(c.d_x_sq.unwrap(), 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.d_y_sq.unwrap(), 2.0, epsilon = 1e-12);
        // regularization weights from the convex-concave recipe
        assert_abs_diff_eq!(c.mu_x, 2e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(c.mu_y, 2.5e-3, epsilon = 1e-18);
    }

    #[test]
    fn deterministic_transitions_reproduce_p() {
        let mut m = one_state_two_action();
        m.n_states = 2;
        m.p = vec![
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        ];
        m.r = Matrix::from_element(2, 2, 0.5);
        let p = make_mdp_ssp(m, Regularization::None).unwrap();
        let mut rng = crate::rng::stream(3, &[]);
        for _ in 0..20 {
            let s = mdp_sample(&p, &mut rng);
            assert_eq!(s.indicator_p(0), p.model().p[0]);
            assert_eq!(s.indicator_p(1), p.model().p[1]);
        }
    }

    #[test]
    fn strong_duality_on_random_small_mdps() {
        for seed in 0..5u64 {
            let m = MdpModel::random(3, 2, 4.0, 0.0, 100 + seed);
            let (pi_star, v_star) = enumerate_optimal(&m).unwrap();
            let p = make_mdp_ssp(m.clone(), Regularization::None).unwrap();

            // dual route: the stationary state-action distribution of the
            // optimal policy is dual feasible with value v*
            let mut p_pi = Matrix::zeros(3, 3);
            for s in 0..3 {
                for a in 0..2 {
                    for sp in 0..3 {
                        p_pi[(s, sp)] += pi_star.0[(s, a)] * m.p[a][(s, sp)];
                    }
                }
            }
            let mut sys = p_pi.transpose() - Matrix::identity(3, 3);
            for s in 0..3 {
                sys[(2, s)] = 1.0;
            }
            let mut rhs = Vector::zeros(3);
            rhs[2] = 1.0;
            let d = sys.lu().solve(&rhs).unwrap();
            let mut y = Vector::zeros(6);
            for s in 0..3 {
                for a in 0..2 {
                    y[a * 3 + s] = d[s] * pi_star.0[(s, a)];
                }
            }
            let g = p.inner_min(&y).unwrap();
            assert_abs_diff_eq!(g, v_star, epsilon = 1e-8);

            // primal route: the shifted bias vector of the optimal policy
            // attains v* in the primal function
            let mut r_pi = Vector::zeros(3);
            for s in 0..3 {
                for a in 0..2 {
                    r_pi[s] += pi_star.0[(s, a)] * m.r[(s, a)];
                }
            }
            // solve v·1 + h = r_π + P_π h with h[2] = 0
            let mut sys2 = Matrix::zeros(3, 3);
            let eye = Matrix::identity(3, 3);
            let ip = &eye - &p_pi;
            sys2.view_mut((0, 0), (3, 2)).copy_from(&ip.columns(0, 2));
            for s in 0..3 {
                sys2[(s, 2)] = 1.0; // coefficient of v
            }
            let h_sol = sys2.lu().solve(&r_pi).unwrap();
            let mut h = Vector::zeros(3);
            h[0] = h_sol[0];
            h[1] = h_sol[1];
            let v_bellman = h_sol[2];
            assert_abs_diff_eq!(v_bellman, v_star, epsilon = 1e-8);
            // center h so it fits the box
            let mid = (h.max() + h.min()) / 2.0;
            let h_c = h.map(|t| t - mid);
            assert!(p.domain_x().contains(&h_c, 1e-9), "u_x too small for bias");
            let f = p.inner_max(&h_c).unwrap();
            assert_abs_diff_eq!(f, v_star, epsilon = 1e-6);

            // policy recovery from the dual optimum
            let pi_rec = policy_from_y(&y, 3, 2);
            let v_rec = avg_reward(&pi_rec, &m).unwrap();
            assert_abs_diff_eq!(v_rec, v_star, epsilon = 1e-8);
        }
    }

    #[test]
    fn transition_monte_carlo_matches_p() {
        let m = MdpModel::random(3, 2, 0.5, 1.0, 7);
        let p = make_mdp_ssp(m.clone(), Regularization::None).unwrap();
        let mut rng = crate::rng::stream(9, &[]);
        let n = 100_000;
        let mut freq = vec![Matrix::zeros(3, 3); 2];
        let mut r_acc = Matrix::zeros(3, 2);
        let mut r_sq = Matrix::zeros(3, 2);
        for _ in 0..n {
            let s = mdp_sample(&p, &mut rng);
            for a in 0..2 {
                for st in 0..3 {
                    freq[a][(st, s.next[a * 3 + st])] += 1.0;
                    let rv = s.rhat[a * 3 + st];
                    r_acc[(st, a)] += rv;
                    r_sq[(st, a)] += rv * rv;
                }
            }
        }
        for a in 0..2 {
            freq[a] /= n as f64;
            for s in 0..3 {
                for sp in 0..3 {
                    let p0 = m.p[a][(s, sp)];
                    let se = (p0 * (1.0 - p0) / n as f64).sqrt();
                    assert!(
                        (freq[a][(s, sp)] - p0).abs() <= 4.0 * se + 1e-9,
                        "transition mismatch at ({s},{a},{sp})"
                    );
                }
            }
        }
        // reward sample variance ≈ σ_r² = 1 within 5%
        for s in 0..3 {
            for a in 0..2 {
                let mean = r_acc[(s, a)] / n as f64;
                let var = r_sq[(s, a)] / n as f64 - mean * mean;
                assert!((var - 1.0).abs() < 0.05, "reward variance {var}");
                let se = (var / n as f64).sqrt();
                assert!((mean - m.r[(s, a)]).abs() < 4.0 * se + 1e-9);
            }
        }
    }

    #[test]
    fn entropy_inner_max_tends_to_vertex_max() {
        let m = MdpModel::random(4, 3, 0.5, 0.0, 11);
        let x = Vector::from_column_slice(&[0.1, -0.3, 0.2, 0.0]);
        let bare = make_mdp_ssp(m.clone(), Regularization::None)
            .unwrap()
            .inner_max(&x)
            .unwrap();
        let mut prev_gap = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            let reg = make_mdp_ssp(m.clone(), Regularization::Entropy { epsilon: eps }).unwrap();
            // compare the y-part only: remove the quadratic x term
            let v = reg.inner_max(&x).unwrap() - 0.5 * reg.constants().mu_x * x.norm_squared();
            let gap = (v - bare).abs();
            assert!(gap < prev_gap, "smoothing gap not shrinking");
            prev_gap = gap;
        }
        assert!(prev_gap < 0.02);
    }
}
