//! Two-player stochastic matrix game over simplices:
//! `Φ(x,y) = xᵀ E[A_ξ] y`, optionally entropy-regularized per block.

use std::sync::Arc;

use rand::Rng;

use crate::constants::ProblemConstants;
use crate::domain::{log_sum_exp, BlockDomain};
use crate::error::{Result, SspError};
use crate::problem::{BlockReg, SampleFn, SspProblem};
use crate::problems::{gamma_mean_draw, Regularization};
use crate::rng::SspRng;
use crate::{Matrix, Vector};

struct GameData {
    a_mean: Matrix,
    sigma_a: f64,
    /// Entropy weights per block; zero means unregularized.
    w_x: f64,
    w_y: f64,
    domain_x: BlockDomain,
    domain_y: BlockDomain,
    constants: ProblemConstants,
}

/// The stochastic matrix game. Cheap to clone (shared internals).
#[derive(Clone)]
pub struct MatrixGame {
    inner: Arc<GameData>,
}

impl MatrixGame {
    pub fn from_payoff(
        a_mean: Matrix,
        sigma_a: f64,
        regularization: Regularization,
    ) -> Result<Self> {
        let (n_x, n_y) = (a_mean.nrows(), a_mean.ncols());
        let (w_x, w_y) = match regularization {
            Regularization::None => (0.0, 0.0),
            Regularization::Entropy { epsilon } => (
                epsilon / (4.0 * (n_x as f64).ln()),
                epsilon / (4.0 * (n_y as f64).ln()),
            ),
            Regularization::Quadratic { .. } => {
                return Err(SspError::capability(
                    "matrix games use entropy regularization on their simplex blocks",
                ))
            }
        };
        let l_xy = a_mean.clone().svd(false, false).singular_values.max();
        let col_norm = (0..n_y)
            .map(|j| a_mean.column(j).norm())
            .fold(0.0f64, f64::max);
        let row_norm = (0..n_x)
            .map(|i| a_mean.row(i).norm())
            .fold(0.0f64, f64::max);
        let constants = ProblemConstants {
            mu_x: w_x,
            mu_y: w_y,
            l_x: 0.0,
            l_y: 0.0,
            l_xy,
            sigma_x: Some(sigma_a * (n_x as f64).sqrt()),
            sigma_y: Some(sigma_a * (n_y as f64).sqrt()),
            // 3σ allowance on top of the mean payoff; entries are unbounded
            ell_x: Some(col_norm + 3.0 * sigma_a * (n_x as f64).sqrt()),
            ell_y: Some(row_norm + 3.0 * sigma_a * (n_y as f64).sqrt()),
            c_at_saddle: None,
            d_x_sq: Some(2.0),
            d_y_sq: Some(2.0),
        };
        Ok(MatrixGame {
            inner: Arc::new(GameData {
                a_mean,
                sigma_a,
                w_x,
                w_y,
                domain_x: BlockDomain::Simplex { dim: n_x },
                domain_y: BlockDomain::Simplex { dim: n_y },
                constants,
            }),
        })
    }

    pub fn payoff(&self) -> &Matrix {
        &self.inner.a_mean
    }

    fn reg_terms(&self, x: &Vector, y: &Vector) -> f64 {
        let d = &*self.inner;
        let mut t = 0.0;
        if d.w_x > 0.0 {
            t += d.w_x * neg_entropy(x);
        }
        if d.w_y > 0.0 {
            t -= d.w_y * neg_entropy(y);
        }
        t
    }
}

fn neg_entropy(u: &Vector) -> f64 {
    u.iter()
        .map(|&t| if t > 0.0 { t * t.ln() } else { 0.0 })
        .sum()
}

struct GameSample {
    inner: Arc<GameData>,
    a_xi: Matrix,
}

impl SampleFn for GameSample {
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        let owner = MatrixGame {
            inner: Arc::clone(&self.inner),
        };
        x.dot(&(&self.a_xi * y)) + owner.reg_terms(x, y)
    }

    fn smooth_grad_x(&self, _x: &Vector, y: &Vector) -> Vector {
        &self.a_xi * y
    }

    fn smooth_grad_y(&self, x: &Vector, _y: &Vector) -> Vector {
        self.a_xi.transpose() * x
    }
}

impl SspProblem for MatrixGame {
    fn dim_x(&self) -> usize {
        self.inner.a_mean.nrows()
    }

    fn dim_y(&self) -> usize {
        self.inner.a_mean.ncols()
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

    fn reg_x(&self) -> BlockReg {
        if self.inner.w_x > 0.0 {
            BlockReg::entropy(self.inner.w_x)
        } else {
            BlockReg::none()
        }
    }

    fn reg_y(&self) -> BlockReg {
        if self.inner.w_y > 0.0 {
            BlockReg::entropy(self.inner.w_y)
        } else {
            BlockReg::none()
        }
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        x.dot(&(&self.inner.a_mean * y)) + self.reg_terms(x, y)
    }

    fn smooth_grad_x(&self, _x: &Vector, y: &Vector) -> Vector {
        &self.inner.a_mean * y
    }

    fn smooth_grad_y(&self, x: &Vector, _y: &Vector) -> Vector {
        self.inner.a_mean.transpose() * x
    }

    fn eg_smoothness_hint(&self) -> Option<f64> {
        // ℓ1→ℓ∞ coupling norm: the largest payoff magnitude
        Some(
            self.inner
                .a_mean
                .iter()
                .fold(0.0f64, |a, &b| a.max(b.abs()))
                .max(1e-12),
        )
    }

    fn inner_max(&self, x: &Vector) -> Result<f64> {
        let d = &*self.inner;
        let q = d.a_mean.transpose() * x;
        let base = if d.w_x > 0.0 { d.w_x * neg_entropy(x) } else { 0.0 };
        if d.w_y > 0.0 {
            Ok(base + d.w_y * log_sum_exp(&(q / d.w_y)))
        } else {
            Ok(base + q.max())
        }
    }

    fn inner_min(&self, y: &Vector) -> Result<f64> {
        let d = &*self.inner;
        let v = &d.a_mean * y;
        let base = if d.w_y > 0.0 { -d.w_y * neg_entropy(y) } else { 0.0 };
        if d.w_x > 0.0 {
            Ok(base - d.w_x * log_sum_exp(&(-v / d.w_x)))
        } else {
            Ok(base + v.min())
        }
    }

    fn draw(&self, rng: &mut SspRng) -> Box<dyn SampleFn> {
        let d = &*self.inner;
        let var = d.sigma_a * d.sigma_a;
        let a_xi = Matrix::from_fn(d.a_mean.nrows(), d.a_mean.ncols(), |i, j| {
            gamma_mean_draw(d.a_mean[(i, j)], var, 1, rng)
        });
        Box::new(GameSample {
            inner: Arc::clone(&self.inner),
            a_xi,
        })
    }

    fn empirical(&self, n: usize, rng: &mut SspRng) -> Result<Box<dyn SspProblem>> {
        if n == 0 {
            return Err(SspError::domain("empirical sample count must be ≥ 1"));
        }
        let d = &*self.inner;
        let var = d.sigma_a * d.sigma_a;
        let a_bar = Matrix::from_fn(d.a_mean.nrows(), d.a_mean.ncols(), |i, j| {
            gamma_mean_draw(d.a_mean[(i, j)], var, n, rng)
        });
        let reg = if d.w_x > 0.0 || d.w_y > 0.0 {
            // preserve the entropy weights exactly
            let mut g = MatrixGame::from_payoff(a_bar, 0.0, Regularization::None)?;
            {
                let data = Arc::get_mut(&mut g.inner).expect("unshared");
                data.w_x = d.w_x;
                data.w_y = d.w_y;
                data.constants.mu_x = d.w_x;
                data.constants.mu_y = d.w_y;
            }
            g
        } else {
            MatrixGame::from_payoff(a_bar, 0.0, Regularization::None)?
        };
        Ok(Box::new(reg))
    }
}

/// Builds a random game with mean payoffs uniform in `(0,1)` and per-entry
/// gamma noise of variance `sigma_a²`.
pub fn make_matrix_game(
    n_x: usize,
    n_y: usize,
    sigma_a: f64,
    seed: u64,
    regularization: Regularization,
) -> Result<MatrixGame> {
    if n_x < 2 || n_y < 2 {
        return Err(SspError::domain("both players need at least two strategies"));
    }
    let mut rng = crate::rng::stream(seed, &[0x6a3e]);
    let a_mean = Matrix::from_fn(n_x, n_y, |_, _| 0.01 + 0.98 * rng.random::<f64>());
    MatrixGame::from_payoff(a_mean, sigma_a, regularization)
}
