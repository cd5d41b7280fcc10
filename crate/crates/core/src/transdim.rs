//! Lifted trans-dimensional sampling over a partially ordered model space
//! with per-model continuous parameters, its reversible-jump counterpart,
//! and a conjugate Gaussian toy problem with enumerable ground truth.
//!
//! Models are spin vectors (covariate in = `+1`); a model's parameters are
//! the included coefficients in ascending index order followed by the noise
//! variance. The model proposal puts a fixed self-mass `w0` on staying (a
//! within-model update) and spreads the rest uniformly over the directed
//! neighbourhood, so the self-proposal probability is the same in both
//! directions by construction.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::poset::{BinaryState, Direction};

#[derive(Debug, Error)]
pub enum TransDimError {
    #[error("self-proposal mass must not depend on the direction (got {down} down, {up} up)")]
    AsymmetricSelfMass { down: f64, up: f64 },
    #[error("self-proposal mass {0} outside [0, 1]")]
    SelfMassOutOfRange(f64),
    #[error("model space dimension {0} too large for the conjugate fixture (limit 6)")]
    DimensionTooLarge(usize),
}

/// Validated self-proposal probability `w0`, required to be identical for
/// the two directions.
#[derive(Debug, Clone, Copy)]
pub struct SelfMass(f64);

impl SelfMass {
    pub fn new(down: f64, up: f64) -> Result<Self, TransDimError> {
        if down != up {
            return Err(TransDimError::AsymmetricSelfMass { down, up });
        }
        Self::symmetric(down)
    }

    pub fn symmetric(w0: f64) -> Result<Self, TransDimError> {
        if !(0.0..=1.0).contains(&w0) {
            return Err(TransDimError::SelfMassOutOfRange(w0));
        }
        Ok(SelfMass(w0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A model indicator, its parameter vector, and the lifted direction.
#[derive(Debug, Clone)]
pub struct TransDimState {
    pub model: BinaryState,
    pub params: Vec<f64>,
    pub direction: Direction,
}

impl TransDimState {
    pub fn new(model: BinaryState, params: Vec<f64>, direction: Direction) -> Self {
        TransDimState {
            model,
            params,
            direction,
        }
    }
}

/// Proposes parameters for a model switch `x -> y` and returns the
/// method-dependent acceptance factor `log r`.
pub trait ModelSwitchProposal {
    fn propose<R: Rng>(
        &self,
        x: &BinaryState,
        theta_x: &[f64],
        y: &BinaryState,
        rng: &mut R,
    ) -> (Vec<f64>, f64);
}

/// Updates parameters within a fixed model, leaving the conditional law
/// invariant.
pub trait WithinModelKernel {
    fn update<R: Rng>(&self, x: &BinaryState, theta_x: &[f64], rng: &mut R) -> Vec<f64>;
}

/// Log acceptance probability of a model switch: the model-proposal ratio
/// `|N_nu(x)| / |N_{-nu}(y)|` (the self-mass cancels) times `r`.
pub fn model_switch_log_alpha(
    x: &BinaryState,
    y: &BinaryState,
    nu: Direction,
    log_r: f64,
) -> f64 {
    let fwd = x.count_opposite(nu) as f64;
    let rev = y.count_opposite(nu.flip()) as f64;
    (fwd.ln() - rev.ln() + log_r).min(0.0)
}

/// One step of the lifted trans-dimensional sampler: with probability `w0`
/// run the within-model kernel (direction kept); otherwise attempt a model
/// switch in the current direction, flipping the direction on rejection or
/// when the neighbourhood is empty.
pub fn lifted_rj_step<S, W, R>(
    w0: SelfMass,
    switch: &S,
    within: &W,
    state: &TransDimState,
    rng: &mut R,
) -> TransDimState
where
    S: ModelSwitchProposal,
    W: WithinModelKernel,
    R: Rng,
{
    let nu = state.direction;
    if rng.gen::<f64>() < w0.value() {
        let params = within.update(&state.model, &state.params, rng);
        return TransDimState::new(state.model.clone(), params, nu);
    }
    let nbrs = state.model.directed_neighborhood(nu);
    if nbrs.is_empty() {
        return TransDimState::new(state.model.clone(), state.params.clone(), nu.flip());
    }
    let y = state.model.flip(nbrs[rng.gen_range(0..nbrs.len())]);
    let (theta_y, log_r) = switch.propose(&state.model, &state.params, &y, rng);
    let log_alpha = model_switch_log_alpha(&state.model, &y, nu, log_r);
    if rng.gen::<f64>().ln() < log_alpha {
        TransDimState::new(y, theta_y, nu)
    } else {
        TransDimState::new(state.model.clone(), state.params.clone(), nu.flip())
    }
}

/// Reversible-jump counterpart: the model proposal is the half/half mixture
/// of the two directed proposals, so a rejected switch keeps the state (the
/// stored direction is never used to bias moves).
pub fn rj_step<S, W, R>(
    w0: SelfMass,
    switch: &S,
    within: &W,
    state: &TransDimState,
    rng: &mut R,
) -> TransDimState
where
    S: ModelSwitchProposal,
    W: WithinModelKernel,
    R: Rng,
{
    if rng.gen::<f64>() < w0.value() {
        let params = within.update(&state.model, &state.params, rng);
        return TransDimState::new(state.model.clone(), params, state.direction);
    }
    let d = Direction::random(rng);
    let nbrs = state.model.directed_neighborhood(d);
    if nbrs.is_empty() {
        return state.clone();
    }
    let y = state.model.flip(nbrs[rng.gen_range(0..nbrs.len())]);
    let (theta_y, log_r) = switch.propose(&state.model, &state.params, &y, rng);
    // q_x(y) = (1 - w0)/2 / |N_d(x)| and only one direction reaches y, so
    // the proposal ratio coincides with the directed one.
    let log_alpha = model_switch_log_alpha(&state.model, &y, d, log_r);
    if rng.gen::<f64>().ln() < log_alpha {
        TransDimState::new(y, theta_y, state.direction)
    } else {
        state.clone()
    }
}

struct ModelPosterior {
    cols: Vec<usize>,
    /// `X_S^T X_S + I/g`, the posterior precision of the coefficients (up
    /// to `1/sigma^2`).
    precision: DMatrix<f64>,
    beta_n: DVector<f64>,
    /// Cholesky factor of the posterior covariance `precision^{-1}`.
    cov_chol: Option<Cholesky<f64, Dyn>>,
    log_det_cov: f64,
    b_n: f64,
    log_marginal: f64,
}

/// Gaussian linear model with a conjugate normal–inverse-gamma prior:
/// `beta | sigma^2 ~ N(0, g sigma^2 I)`, `sigma^2 ~ IG(a0, b0)`, uniform
/// prior over the `2^p` models. Marginal likelihoods, conditional parameter
/// laws, and joint densities are all available in closed form.
pub struct ConjugateLinearModel {
    p: usize,
    n_obs: usize,
    x: DMatrix<f64>,
    y: DVector<f64>,
    g: f64,
    a0: f64,
    b0: f64,
    a_n: f64,
    models: Vec<ModelPosterior>,
}

/// Builds the toy fixture with a seeded synthetic data set: standard-normal
/// design, the first half of the coefficients active.
pub fn toy_conjugate_target(
    p: usize,
    n_obs: usize,
    seed: u64,
) -> Result<ConjugateLinearModel, TransDimError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n_obs, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta_true: Vec<f64> = (0..p)
        .map(|j| if j < p.div_ceil(2) { 1.5 - j as f64 } else { 0.0 })
        .collect();
    let y = DVector::from_fn(n_obs, |i, _| {
        (0..p).map(|j| x[(i, j)] * beta_true[j]).sum::<f64>()
            + rng.sample::<f64, _>(StandardNormal)
    });
    ConjugateLinearModel::new(x, y, 4.0, 3.0, 3.0)
}

impl ConjugateLinearModel {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        g: f64,
        a0: f64,
        b0: f64,
    ) -> Result<Self, TransDimError> {
        let p = x.ncols();
        if p > 6 {
            return Err(TransDimError::DimensionTooLarge(p));
        }
        let n_obs = x.nrows();
        let a_n = a0 + n_obs as f64 / 2.0;
        let yty = y.dot(&y);
        let models = (0..1u64 << p)
            .map(|code| {
                let cols: Vec<usize> = (0..p).filter(|&j| code >> j & 1 == 1).collect();
                let k = cols.len();
                if k == 0 {
                    let b_n = b0 + 0.5 * yty;
                    return ModelPosterior {
                        cols,
                        precision: DMatrix::zeros(0, 0),
                        beta_n: DVector::zeros(0),
                        cov_chol: None,
                        log_det_cov: 0.0,
                        b_n,
                        log_marginal: marginal_log_lik(n_obs, 0, g, a0, b0, a_n, 0.0, b_n),
                    };
                }
                let xs = x.select_columns(cols.iter());
                let mut precision = xs.transpose() * &xs;
                for i in 0..k {
                    precision[(i, i)] += 1.0 / g;
                }
                let prec_chol = Cholesky::new(precision.clone())
                    .expect("ridge-regularized Gram matrix is positive definite");
                let xty = xs.transpose() * &y;
                let beta_n = prec_chol.solve(&xty);
                let cov = prec_chol.inverse();
                let log_det_cov: f64 =
                    -2.0 * (0..k).map(|i| prec_chol.l_dirty()[(i, i)].ln()).sum::<f64>();
                let b_n = b0 + 0.5 * (yty - xty.dot(&beta_n));
                ModelPosterior {
                    cols,
                    precision,
                    beta_n,
                    cov_chol: Cholesky::new(cov),
                    log_det_cov,
                    b_n,
                    log_marginal: marginal_log_lik(n_obs, k, g, a0, b0, a_n, log_det_cov, b_n),
                }
            })
            .collect();
        Ok(ConjugateLinearModel {
            p,
            n_obs,
            x,
            y,
            g,
            a0,
            b0,
            a_n,
            models,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Parameter count of a model: included coefficients plus the variance.
    pub fn param_count(&self, model: &BinaryState) -> usize {
        model.counts().1 + 1
    }

    fn posterior(&self, model: &BinaryState) -> &ModelPosterior {
        &self.models[model.code() as usize]
    }

    /// Marginal log-likelihood of a model (coefficients and variance
    /// integrated out); the uniform model prior is a constant on top.
    pub fn log_marginal(&self, model: &BinaryState) -> f64 {
        self.posterior(model).log_marginal
    }

    /// Exactly normalized posterior over the `2^p` models.
    pub fn model_posterior_pmf(&self) -> Vec<f64> {
        let max = self
            .models
            .iter()
            .map(|m| m.log_marginal)
            .fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = self.models.iter().map(|m| (m.log_marginal - max).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|v| v / z).collect()
    }

    /// Draws from the exact conditional posterior `pi(theta | model)`, with
    /// the coefficient scale inflated by `c` (`c = 1` is exact).
    pub fn sample_conditional<R: Rng>(
        &self,
        model: &BinaryState,
        c: f64,
        rng: &mut R,
    ) -> Vec<f64> {
        let post = self.posterior(model);
        let k = post.cols.len();
        let tau = Gamma::new(self.a_n, 1.0 / post.b_n)
            .expect("posterior shape/rate are positive")
            .sample(rng);
        let sigma_sq = 1.0 / tau;
        let mut params = Vec::with_capacity(k + 1);
        if k > 0 {
            let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let beta = &post.beta_n
                + post.cov_chol.as_ref().expect("covariance factored").l_dirty().lower_triangle()
                    * z
                    * (c * sigma_sq.sqrt());
            params.extend(beta.iter());
        }
        params.push(sigma_sq);
        params
    }

    /// Log-density of [`sample_conditional`](Self::sample_conditional) at
    /// `params`.
    pub fn log_conditional_density(&self, model: &BinaryState, params: &[f64], c: f64) -> f64 {
        let post = self.posterior(model);
        let k = post.cols.len();
        assert_eq!(params.len(), k + 1);
        let sigma_sq = params[k];
        let mut out = log_inv_gamma(sigma_sq, self.a_n, post.b_n);
        if k > 0 {
            let diff = DVector::from_fn(k, |i, _| params[i] - post.beta_n[i]);
            let quad = (&post.precision * &diff).dot(&diff);
            out += -0.5 * k as f64 * (2.0 * std::f64::consts::PI * sigma_sq).ln()
                - k as f64 * c.ln()
                - 0.5 * post.log_det_cov
                - quad / (2.0 * c * c * sigma_sq);
        }
        out
    }

    /// Log joint density `pi(model, beta, sigma^2)` including the uniform
    /// model prior.
    pub fn log_joint(&self, model: &BinaryState, params: &[f64]) -> f64 {
        let post = self.posterior(model);
        let k = post.cols.len();
        assert_eq!(params.len(), k + 1);
        let sigma_sq = params[k];
        let mut out = -(self.p as f64) * std::f64::consts::LN_2
            + log_inv_gamma(sigma_sq, self.a0, self.b0);
        let beta_sq: f64 = params[..k].iter().map(|b| b * b).sum();
        out += -0.5 * k as f64 * (2.0 * std::f64::consts::PI * self.g * sigma_sq).ln()
            - beta_sq / (2.0 * self.g * sigma_sq);
        let mut rss = 0.0;
        for i in 0..self.n_obs {
            let fit: f64 = post
                .cols
                .iter()
                .zip(params)
                .map(|(&j, b)| self.x[(i, j)] * b)
                .sum();
            let e = self.y[i] - fit;
            rss += e * e;
        }
        out += -0.5 * self.n_obs as f64 * (2.0 * std::f64::consts::PI * sigma_sq).ln()
            - rss / (2.0 * sigma_sq);
        out
    }

    /// Uniform model prior in log form.
    pub fn model_log_prior(&self) -> f64 {
        -(self.p as f64) * std::f64::consts::LN_2
    }
}

fn marginal_log_lik(
    n_obs: usize,
    k: usize,
    g: f64,
    a0: f64,
    b0: f64,
    a_n: f64,
    log_det_cov: f64,
    b_n: f64,
) -> f64 {
    -0.5 * n_obs as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * k as f64 * g.ln()
        + 0.5 * log_det_cov
        + a0 * b0.ln()
        - a_n * b_n.ln()
        + ln_gamma(a_n)
        - ln_gamma(a0)
}

fn log_inv_gamma(s: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * s.ln() - b / s
}

/// Samples the proposed model's parameters from its conditional posterior
/// with the coefficient scale inflated by `scale_inflation`; at inflation 1
/// the returned `log r` is exactly the marginal ratio.
pub struct ExactConditionalSwitch<'a> {
    pub target: &'a ConjugateLinearModel,
    pub scale_inflation: f64,
}

impl<'a> ExactConditionalSwitch<'a> {
    pub fn exact(target: &'a ConjugateLinearModel) -> Self {
        ExactConditionalSwitch {
            target,
            scale_inflation: 1.0,
        }
    }

    pub fn noisy(target: &'a ConjugateLinearModel, scale_inflation: f64) -> Self {
        assert!(scale_inflation >= 1.0);
        ExactConditionalSwitch {
            target,
            scale_inflation,
        }
    }
}

impl ModelSwitchProposal for ExactConditionalSwitch<'_> {
    fn propose<R: Rng>(
        &self,
        x: &BinaryState,
        theta_x: &[f64],
        y: &BinaryState,
        rng: &mut R,
    ) -> (Vec<f64>, f64) {
        let c = self.scale_inflation;
        let t = self.target;
        let theta_y = t.sample_conditional(y, c, rng);
        let log_r = t.log_joint(y, &theta_y) - t.log_conditional_density(y, &theta_y, c)
            - (t.log_joint(x, theta_x) - t.log_conditional_density(x, theta_x, c));
        (theta_y, log_r)
    }
}

/// Within-model update drawing fresh parameters from the exact conditional.
pub struct GibbsWithin<'a> {
    pub target: &'a ConjugateLinearModel,
}

impl WithinModelKernel for GibbsWithin<'_> {
    fn update<R: Rng>(&self, x: &BinaryState, _theta_x: &[f64], rng: &mut R) -> Vec<f64> {
        self.target.sample_conditional(x, 1.0, rng)
    }
}
