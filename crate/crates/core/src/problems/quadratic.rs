//! Synthetic strongly-convex/strongly-concave quadratic benchmark with a
//! known saddle point:
//!
//! `Φ(x,y) = ½xᵀAx + xᵀBy − ½yᵀCy + ⟨a,x⟩ − ⟨b,y⟩`,
//!
//! where noise enters the linear terms only, so empirical problems stay in
//! the same family and perturbed saddles reduce to linear solves.

use std::sync::Arc;

use nalgebra::{Cholesky, Dyn, LU};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::constants::ProblemConstants;
use crate::domain::BlockDomain;
use crate::error::{Result, SspError};
use crate::problem::{PrimalDualPair, SampleFn, SspProblem};
use crate::rng::SspRng;
use crate::{Matrix, Vector};

/// Noise model for the linear terms; components are i.i.d. zero-mean with
/// standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    /// Centered gamma (gamma minus its mean), preserving unbiasedness
    /// while giving heavy tails. `shape` controls the tail weight.
    CenteredGamma { sigma: f64, shape: f64 },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma,
            NoiseModel::CenteredGamma { sigma, .. } => sigma,
        }
    }

    fn draw_one(&self, rng: &mut SspRng) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseModel::CenteredGamma { sigma, shape } => {
                if sigma == 0.0 {
                    return 0.0;
                }
                let theta = sigma / shape.sqrt();
                let g = Gamma::new(shape, theta).expect("gamma parameters");
                g.sample(rng) - shape * theta
            }
        }
    }

    fn draw_vec(&self, dim: usize, rng: &mut SspRng) -> Vector {
        Vector::from_iterator(dim, (0..dim).map(|_| self.draw_one(rng)))
    }

    /// Mean of `n` i.i.d. draws, sampled directly from the aggregate law.
    fn draw_mean_vec(&self, dim: usize, n: usize, rng: &mut SspRng) -> Vector {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                let s = sigma / (n as f64).sqrt();
                Vector::from_iterator(dim, (0..dim).map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    s * z
                }))
            }
            NoiseModel::CenteredGamma { sigma, shape } => {
                if sigma == 0.0 {
                    return Vector::zeros(dim);
                }
                let theta = sigma / shape.sqrt();
                let total_shape = shape * n as f64;
                let g = Gamma::new(total_shape, theta).expect("gamma parameters");
                Vector::from_iterator(dim, (0..dim).map(|_| {
                    (g.sample(rng) - total_shape * theta) / n as f64
                }))
            }
        }
    }
}

struct QuadData {
    a_mat: Matrix,
    b_mat: Matrix,
    c_mat: Matrix,
    a_lin: Vector,
    b_lin: Vector,
    noise: NoiseModel,
    domain_x: BlockDomain,
    domain_y: BlockDomain,
    constants: ProblemConstants,
    saddle: Option<PrimalDualPair>,
    saddle_value: Option<f64>,
    // cached factorizations for the exact inner evaluators (unconstrained)
    chol_a: Option<Cholesky<f64, Dyn>>,
    chol_c: Option<Cholesky<f64, Dyn>>,
    lu_saddle: Option<LU<f64, Dyn, Dyn>>,
}

/// The quadratic SSP benchmark. Cheap to clone (shared internals).
#[derive(Clone)]
pub struct QuadraticSsp {
    inner: Arc<QuadData>,
}

impl QuadraticSsp {
    /// Builds a problem from explicit parts. `A` and `C` must be symmetric
    /// positive definite; box-constrained problems additionally require
    /// them diagonal so that the inner max/min stay in closed form.
    pub fn from_parts(
        a_mat: Matrix,
        b_mat: Matrix,
        c_mat: Matrix,
        a_lin: Vector,
        b_lin: Vector,
        noise: NoiseModel,
        domain_x: BlockDomain,
        domain_y: BlockDomain,
    ) -> Result<Self> {
        let (dx, dy) = (a_lin.len(), b_lin.len());
        if a_mat.nrows() != dx || a_mat.ncols() != dx {
            return Err(SspError::domain("A must be d_x × d_x"));
        }
        if c_mat.nrows() != dy || c_mat.ncols() != dy {
            return Err(SspError::domain("C must be d_y × d_y"));
        }
        if b_mat.nrows() != dx || b_mat.ncols() != dy {
            return Err(SspError::domain("B must be d_x × d_y"));
        }
        let unconstrained = matches!(domain_x, BlockDomain::Free { .. })
            && matches!(domain_y, BlockDomain::Free { .. });
        if !unconstrained && !(is_diagonal(&a_mat) && is_diagonal(&c_mat)) {
            return Err(SspError::capability(
                "box-constrained quadratic problems require diagonal A and C",
            ));
        }
        if domain_x.is_simplex() || domain_y.is_simplex() {
            return Err(SspError::capability(
                "simplex domains are not supported by the quadratic family",
            ));
        }

        let eig_a = a_mat.clone().symmetric_eigen().eigenvalues;
        let eig_c = c_mat.clone().symmetric_eigen().eigenvalues;
        let mu_x = eig_a.min();
        let mu_y = eig_c.min();
        if mu_x <= 0.0 || mu_y <= 0.0 {
            return Err(SspError::domain("A and C must be positive definite"));
        }
        let l_x = eig_a.max();
        let l_y = eig_c.max();
        let l_xy = b_mat.clone().svd(false, false).singular_values.max();
        let sigma = noise.sigma();

        let (chol_a, chol_c, lu_saddle, saddle) = if unconstrained {
            let chol_a = Cholesky::new(a_mat.clone())
                .ok_or_else(|| SspError::domain("A is not positive definite"))?;
            let chol_c = Cholesky::new(c_mat.clone())
                .ok_or_else(|| SspError::domain("C is not positive definite"))?;
            let m = saddle_system(&a_mat, &b_mat, &c_mat, 0.0, 0.0);
            let lu = m.lu();
            let rhs = stack(&(-&a_lin), &b_lin);
            let sol = lu
                .solve(&rhs)
                .ok_or_else(|| SspError::domain("singular stationarity system"))?;
            let s = PrimalDualPair::new(sol.rows(0, dx).into(), sol.rows(dx, dy).into());
            (Some(chol_a), Some(chol_c), Some(lu), Some(s))
        } else {
            (None, None, None, None)
        };

        let grad_norm_sq_at_saddle = saddle.as_ref().map(|_| 0.0);
        let constants = ProblemConstants {
            mu_x,
            mu_y,
            l_x,
            l_y,
            l_xy,
            sigma_x: Some(sigma * (dx as f64).sqrt()),
            sigma_y: Some(sigma * (dy as f64).sqrt()),
            c_at_saddle: grad_norm_sq_at_saddle
                .map(|g| g + (dx + dy) as f64 * sigma * sigma),
            ell_x: None,
            ell_y: None,
            d_x_sq: domain_x.diameter_sq(),
            d_y_sq: domain_y.diameter_sq(),
        };

        let mut data = QuadData {
            a_mat,
            b_mat,
            c_mat,
            a_lin,
            b_lin,
            noise,
            domain_x,
            domain_y,
            constants,
            saddle,
            saddle_value: None,
            chol_a,
            chol_c,
            lu_saddle,
        };
        data.saddle_value = data
            .saddle
            .as_ref()
            .map(|s| quad_value(&data, &s.x, &s.y));
        Ok(QuadraticSsp { inner: Arc::new(data) })
    }

    /// Installs a known saddle point (used when it is established by
    /// construction rather than by the stationarity solve), together with
    /// the implied second-moment constant at the saddle.
    fn with_saddle(mut self, saddle: PrimalDualPair) -> Self {
        let data = Arc::get_mut(&mut self.inner).expect("unshared at build time");
        let gx = &data.a_mat * &saddle.x + &data.b_mat * &saddle.y + &data.a_lin;
        let gy = data.b_mat.transpose() * &saddle.x - &data.c_mat * &saddle.y - &data.b_lin;
        let sigma = data.noise.sigma();
        let dims = (data.a_lin.len() + data.b_lin.len()) as f64;
        data.constants.c_at_saddle =
            Some(gx.norm_squared() + gy.norm_squared() + dims * sigma * sigma);
        data.saddle_value = Some(quad_value(data, &saddle.x, &saddle.y));
        data.saddle = Some(saddle);
        self
    }

    /// Overrides the function-Lipschitz constants (constrained planners).
    pub fn with_ell(mut self, ell_x: f64, ell_y: f64) -> Self {
        let data = Arc::get_mut(&mut self.inner).expect("unshared at build time");
        data.constants.ell_x = Some(ell_x);
        data.constants.ell_y = Some(ell_y);
        self
    }

    pub fn a_mat(&self) -> &Matrix {
        &self.inner.a_mat
    }

    pub fn b_mat(&self) -> &Matrix {
        &self.inner.b_mat
    }

    pub fn c_mat(&self) -> &Matrix {
        &self.inner.c_mat
    }

    /// Exact gradient at the saddle (zero for unconstrained instances).
    pub fn saddle_gradients(&self) -> Option<(Vector, Vector)> {
        let s = self.inner.saddle.as_ref()?;
        Some((
            self.smooth_grad_x(&s.x, &s.y),
            self.smooth_grad_y(&s.x, &s.y),
        ))
    }
}

fn is_diagonal(m: &Matrix) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

fn stack(top: &Vector, bottom: &Vector) -> Vector {
    let mut v = Vector::zeros(top.len() + bottom.len());
    v.rows_mut(0, top.len()).copy_from(top);
    v.rows_mut(top.len(), bottom.len()).copy_from(bottom);
    v
}

/// Stationarity system matrix `[[A+λ_xI, B], [Bᵀ, −(C+λ_yI)]]`.
fn saddle_system(a: &Matrix, b: &Matrix, c: &Matrix, lambda_x: f64, lambda_y: f64) -> Matrix {
    let (dx, dy) = (a.nrows(), c.nrows());
    let mut m = Matrix::zeros(dx + dy, dx + dy);
    m.view_mut((0, 0), (dx, dx)).copy_from(a);
    for i in 0..dx {
        m[(i, i)] += lambda_x;
    }
    m.view_mut((0, dx), (dx, dy)).copy_from(b);
    m.view_mut((dx, 0), (dy, dx)).copy_from(&b.transpose());
    let mut lower = -c.clone();
    for i in 0..dy {
        lower[(i, i)] -= lambda_y;
    }
    m.view_mut((dx, dx), (dy, dy)).copy_from(&lower);
    m
}

fn quad_value(d: &QuadData, x: &Vector, y: &Vector) -> f64 {
    0.5 * x.dot(&(&d.a_mat * x)) + x.dot(&(&d.b_mat * y)) - 0.5 * y.dot(&(&d.c_mat * y))
        + d.a_lin.dot(x)
        - d.b_lin.dot(y)
}

struct QuadraticSample {
    inner: Arc<QuadData>,
    eta_a: Vector,
    eta_b: Vector,
}

impl SampleFn for QuadraticSample {
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        quad_value(&self.inner, x, y) + self.eta_a.dot(x) - self.eta_b.dot(y)
    }

    fn smooth_grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        &self.inner.a_mat * x + &self.inner.b_mat * y + &self.inner.a_lin + &self.eta_a
    }

    fn smooth_grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        self.inner.b_mat.transpose() * x - &self.inner.c_mat * y - &self.inner.b_lin - &self.eta_b
    }
}

impl SspProblem for QuadraticSsp {
    fn dim_x(&self) -> usize {
        self.inner.a_lin.len()
    }

    fn dim_y(&self) -> usize {
        self.inner.b_lin.len()
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

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        quad_value(&self.inner, x, y)
    }

    fn smooth_grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        &self.inner.a_mat * x + &self.inner.b_mat * y + &self.inner.a_lin
    }

    fn smooth_grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        self.inner.b_mat.transpose() * x - &self.inner.c_mat * y - &self.inner.b_lin
    }

    fn inner_max(&self, x: &Vector) -> Result<f64> {
        let d = &*self.inner;
        let w = d.b_mat.transpose() * x - &d.b_lin;
        let base = 0.5 * x.dot(&(&d.a_mat * x)) + d.a_lin.dot(x);
        match &d.domain_y {
            BlockDomain::Free { .. } => {
                let chol = d.chol_c.as_ref().expect("cached for unconstrained");
                let y_star = chol.solve(&w);
                Ok(base + 0.5 * w.dot(&y_star))
            }
            BlockDomain::Box { lo, hi, .. } => {
                // diagonal C: maximize w_j y − ½ c_j y² per coordinate
                let mut v = base;
                for j in 0..w.len() {
                    let c = d.c_mat[(j, j)];
                    let y = (w[j] / c).clamp(*lo, *hi);
                    v += w[j] * y - 0.5 * c * y * y;
                }
                Ok(v)
            }
            BlockDomain::Simplex { .. } => unreachable!("rejected at construction"),
        }
    }

    fn inner_min(&self, y: &Vector) -> Result<f64> {
        let d = &*self.inner;
        let v = &d.b_mat * y + &d.a_lin;
        let base = -0.5 * y.dot(&(&d.c_mat * y)) - d.b_lin.dot(y);
        match &d.domain_x {
            BlockDomain::Free { .. } => {
                let chol = d.chol_a.as_ref().expect("cached for unconstrained");
                let x_star = chol.solve(&v);
                Ok(base - 0.5 * v.dot(&x_star))
            }
            BlockDomain::Box { lo, hi, .. } => {
                let mut t = base;
                for i in 0..v.len() {
                    let a = d.a_mat[(i, i)];
                    let x = (-v[i] / a).clamp(*lo, *hi);
                    t += 0.5 * a * x * x + v[i] * x;
                }
                Ok(t)
            }
            BlockDomain::Simplex { .. } => unreachable!("rejected at construction"),
        }
    }

    fn saddle(&self) -> Option<PrimalDualPair> {
        self.inner.saddle.clone()
    }

    fn saddle_value(&self) -> Option<f64> {
        self.inner.saddle_value
    }

    fn draw(&self, rng: &mut SspRng) -> Box<dyn SampleFn> {
        let eta_a = self.inner.noise.draw_vec(self.dim_x(), rng);
        let eta_b = self.inner.noise.draw_vec(self.dim_y(), rng);
        Box::new(QuadraticSample {
            inner: Arc::clone(&self.inner),
            eta_a,
            eta_b,
        })
    }

    fn empirical(&self, n: usize, rng: &mut SspRng) -> Result<Box<dyn SspProblem>> {
        if n == 0 {
            return Err(SspError::domain("empirical sample count must be ≥ 1"));
        }
        let d = &*self.inner;
        let eta_a = d.noise.draw_mean_vec(self.dim_x(), n, rng);
        let eta_b = d.noise.draw_mean_vec(self.dim_y(), n, rng);
        let emp = QuadraticSsp::from_parts(
            d.a_mat.clone(),
            d.b_mat.clone(),
            d.c_mat.clone(),
            &d.a_lin + eta_a,
            &d.b_lin + eta_b,
            NoiseModel::Gaussian { sigma: 0.0 },
            d.domain_x.clone(),
            d.domain_y.clone(),
        )?;
        Ok(Box::new(emp))
    }

    fn perturbed_saddle(
        &self,
        lambda_x: f64,
        center_x: Option<&Vector>,
        lambda_y: f64,
        center_y: Option<&Vector>,
    ) -> Option<PrimalDualPair> {
        let d = &*self.inner;
        if !matches!(d.domain_x, BlockDomain::Free { .. })
            || !matches!(d.domain_y, BlockDomain::Free { .. })
        {
            return None;
        }
        let (dx, dy) = (self.dim_x(), self.dim_y());
        let mut rhs_top = -&d.a_lin;
        if lambda_x > 0.0 {
            rhs_top += lambda_x * center_x.expect("center required");
        }
        let mut rhs_bot = d.b_lin.clone();
        if lambda_y > 0.0 {
            rhs_bot -= lambda_y * center_y.expect("center required");
        }
        let rhs = stack(&rhs_top, &rhs_bot);
        let sol = if lambda_x == 0.0 && lambda_y == 0.0 {
            d.lu_saddle.as_ref()?.solve(&rhs)?
        } else {
            saddle_system(&d.a_mat, &d.b_mat, &d.c_mat, lambda_x, lambda_y)
                .lu()
                .solve(&rhs)?
        };
        Some(PrimalDualPair::new(
            sol.rows(0, dx).into(),
            sol.rows(dx, dy).into(),
        ))
    }
}

/// Builds an unconstrained benchmark whose spectra of `A` and `C` span
/// `[mu, l]`, with coupling of spectral norm exactly `l_xy` and linear
/// terms drawn from a unit Gaussian.
pub fn make_quadratic(
    dim_x: usize,
    dim_y: usize,
    mu: f64,
    l: f64,
    l_xy: f64,
    sigma: f64,
    heavy_tailed: bool,
    seed: u64,
) -> Result<QuadraticSsp> {
    if !(mu > 0.0 && l >= mu) {
        return Err(SspError::domain("need 0 < mu ≤ l"));
    }
    let mut rng = crate::rng::stream(seed, &[0x51ad]);
    let a_mat = random_spd(dim_x, mu, l, &mut rng);
    let c_mat = random_spd(dim_y, mu, l, &mut rng);
    let b_mat = random_coupling(dim_x, dim_y, l_xy, &mut rng);
    let a_lin = Vector::from_iterator(dim_x, (0..dim_x).map(|_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    }));
    let b_lin = Vector::from_iterator(dim_y, (0..dim_y).map(|_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z
    }));
    let noise = if heavy_tailed {
        NoiseModel::CenteredGamma { sigma, shape: 0.25 }
    } else {
        NoiseModel::Gaussian { sigma }
    };
    QuadraticSsp::from_parts(
        a_mat,
        b_mat,
        c_mat,
        a_lin,
        b_lin,
        noise,
        BlockDomain::Free { dim: dim_x },
        BlockDomain::Free { dim: dim_y },
    )
}

/// Builds a box-constrained benchmark (diagonal `A`, `C`) whose saddle
/// point sits partly on the box boundary, with the boundary first-order
/// conditions synthesized so the saddle and its gradient are known exactly.
#[allow(clippy::too_many_arguments)]
pub fn make_constrained_quadratic(
    dim_x: usize,
    dim_y: usize,
    mu: f64,
    l: f64,
    l_xy: f64,
    sigma: f64,
    bound: f64,
    active_fraction: f64,
    seed: u64,
) -> Result<QuadraticSsp> {
    if !(mu > 0.0 && l >= mu) {
        return Err(SspError::domain("need 0 < mu ≤ l"));
    }
    let mut rng = crate::rng::stream(seed, &[0x51ae]);
    let a_mat = Matrix::from_diagonal(&spread(dim_x, mu, l));
    let c_mat = Matrix::from_diagonal(&spread(dim_y, mu, l));
    let b_mat = random_coupling(dim_x, dim_y, l_xy, &mut rng);

    // choose the saddle, some coordinates on the boundary
    let pick = |rng: &mut SspRng, dim: usize| -> (Vector, Vec<i8>) {
        let mut v = Vector::zeros(dim);
        let mut side = vec![0i8; dim];
        for i in 0..dim {
            if rng.random::<f64>() < active_fraction {
                let s: i8 = if rng.random::<bool>() { 1 } else { -1 };
                v[i] = bound * s as f64;
                side[i] = s;
            } else {
                v[i] = bound * (rng.random::<f64>() - 0.5);
            }
        }
        (v, side)
    };
    let (x_star, side_x) = pick(&mut rng, dim_x);
    let (y_star, side_y) = pick(&mut rng, dim_y);

    // synthesize gradients compatible with the box optimality conditions:
    // minimizer: grad ≥ 0 at the lower face, ≤ 0 at the upper face;
    // maximizer: reversed signs
    let mut gx = Vector::zeros(dim_x);
    for i in 0..dim_x {
        if side_x[i] != 0 {
            gx[i] = -(side_x[i] as f64) * (0.5 + rng.random::<f64>());
        }
    }
    let mut gy = Vector::zeros(dim_y);
    for j in 0..dim_y {
        if side_y[j] != 0 {
            gy[j] = (side_y[j] as f64) * (0.5 + rng.random::<f64>());
        }
    }

    let a_lin = &gx - &a_mat * &x_star - &b_mat * &y_star;
    let b_lin = b_mat.transpose() * &x_star - &c_mat * &y_star - &gy;

    let noise = NoiseModel::Gaussian { sigma };
    let problem = QuadraticSsp::from_parts(
        a_mat,
        b_mat,
        c_mat,
        a_lin,
        b_lin,
        noise,
        BlockDomain::sym_box(dim_x, bound),
        BlockDomain::sym_box(dim_y, bound),
    )?
    .with_saddle(PrimalDualPair::new(x_star, y_star));

    // function Lipschitz bounds over the box, with a 3σ noise allowance
    let d = &problem.inner;
    let rx = bound * (dim_x as f64).sqrt();
    let ry = bound * (dim_y as f64).sqrt();
    let op = |m: &Matrix| m.clone().svd(false, false).singular_values.max();
    let ell_x = op(&d.a_mat) * rx + op(&d.b_mat) * ry + d.a_lin.norm()
        + 3.0 * sigma * (dim_x as f64).sqrt();
    let ell_y = op(&d.b_mat) * rx + op(&d.c_mat) * ry + d.b_lin.norm()
        + 3.0 * sigma * (dim_y as f64).sqrt();
    Ok(problem.with_ell(ell_x, ell_y))
}

fn spread(dim: usize, mu: f64, l: f64) -> Vector {
    if dim == 1 {
        return Vector::from_element(1, mu);
    }
    Vector::from_iterator(
        dim,
        (0..dim).map(|i| mu + (l - mu) * i as f64 / (dim - 1) as f64),
    )
}

fn random_spd(dim: usize, mu: f64, l: f64, rng: &mut SspRng) -> Matrix {
    let d = Matrix::from_diagonal(&spread(dim, mu, l));
    let q = random_orthogonal(dim, rng);
    &q * d * q.transpose()
}

fn random_orthogonal(dim: usize, rng: &mut SspRng) -> Matrix {
    let g = Matrix::from_fn(dim, dim, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    });
    let qr = g.qr();
    qr.q()
}

fn random_coupling(dim_x: usize, dim_y: usize, l_xy: f64, rng: &mut SspRng) -> Matrix {
    if l_xy == 0.0 {
        return Matrix::zeros(dim_x, dim_y);
    }
    let g = Matrix::from_fn(dim_x, dim_y, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    });
    let smax = g.clone().svd(false, false).singular_values.max();
    g * (l_xy / smax)
}
