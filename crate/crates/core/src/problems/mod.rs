//! Benchmark problem zoo with exact gap evaluators.

pub mod matrix_game;
pub mod mdp;
pub mod quadratic;

pub use matrix_game::{make_matrix_game, MatrixGame};
pub use mdp::{make_mdp_ssp, mdp_sample, policy_from_y, avg_reward, MdpModel, MdpSsp, Policy};
pub use quadratic::{make_constrained_quadratic, make_quadratic, NoiseModel, QuadraticSsp};

/// Regularization applied when building a constrained benchmark problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    None,
    /// Quadratic terms `+α_x/2‖x−x'‖² − α_y/2‖y−y'‖²` with the weights of
    /// the convex-concave recipe at accuracy `epsilon`.
    Quadratic { epsilon: f64 },
    /// Entropy terms on simplex blocks (quadratic fallback on boxes).
    Entropy { epsilon: f64 },
}

/// Mean of `n_sum` i.i.d. gamma draws with the given mean and variance,
/// sampled directly from the aggregate law (a gamma sum is gamma). Shape
/// `k = mean²/σ²`, scale `θ = σ²/mean`; when the implied shape would fall
/// below a floor the sampler switches to a floor-shape gamma shifted to
/// preserve mean and variance.
pub(crate) fn gamma_mean_draw(
    mean: f64,
    var: f64,
    n_sum: usize,
    rng: &mut crate::rng::SspRng,
) -> f64 {
    use rand_distr::{Distribution, Gamma};
    if var == 0.0 {
        return mean;
    }
    const SHAPE_FLOOR: f64 = 1e-4;
    let shape = mean * mean / var;
    let n = n_sum as f64;
    if shape >= SHAPE_FLOOR {
        let theta = var / mean;
        let g = Gamma::new(shape * n, theta).expect("gamma parameters");
        g.sample(rng) / n
    } else {
        let theta = var.sqrt() / SHAPE_FLOOR.sqrt();
        let g = Gamma::new(SHAPE_FLOOR * n, theta).expect("gamma parameters");
        let shift = mean - SHAPE_FLOOR * theta;
        g.sample(rng) / n + shift
    }
}
