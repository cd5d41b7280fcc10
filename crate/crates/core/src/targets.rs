//! Concrete target PMFs: the 2-D Ising model with external field, the
//! marginalized Bayesian variable-selection posterior, and tabular fixtures
//! for oracle testing.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::poset::BinaryState;

/// An unnormalized PMF on `{-1,+1}^n` exposing log-mass and single-flip
/// log-ratios. `log_ratio(x, i)` must equal
/// `log_mass(flip(x,i)) - log_mass(x)` wherever both are finite.
pub trait TargetModel {
    fn dim(&self) -> usize;

    /// Unnormalized log-mass; `-inf` marks zero-mass states.
    fn log_mass(&self, x: &BinaryState) -> f64;

    /// `log pi(flip(x,i)) - log pi(x)`.
    fn log_ratio(&self, x: &BinaryState, i: usize) -> f64 {
        self.log_mass(&x.flip(i)) - self.log_mass(x)
    }
}

impl<T: TargetModel + ?Sized> TargetModel for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_mass(&self, x: &BinaryState) -> f64 {
        (**self).log_mass(x)
    }
    fn log_ratio(&self, x: &BinaryState, i: usize) -> f64 {
        (**self).log_ratio(x, i)
    }
}

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: csv parse error")]
    Csv(String, #[source] csv::Error),
    #[error("{path}, row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}, row {row}, column {col}: non-numeric cell {cell:?}")]
    NonNumeric {
        path: String,
        row: usize,
        col: usize,
        cell: String,
    },
    #[error("{path}: {found} data rows; need more observations than covariates + intercept ({p} + 1)")]
    TooFewRows { path: String, found: usize, p: usize },
    #[error("non-finite response value at row {row}")]
    NonFiniteResponse { row: usize },
    #[error("covariate column {col} is constant; cannot standardize")]
    ConstantColumn { col: usize },
}

// ---------------------------------------------------------------------------
// Ising model
// ---------------------------------------------------------------------------

/// Free (or optionally periodic) boundary conditions on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Free,
    Periodic,
}

/// Two-dimensional Ising model on an `eta x eta` square lattice, row-major
/// site encoding:
///
/// `log pi(x) = sum_i alpha_i x_i + lambda * sum_{<ij>} x_i x_j + const`.
#[derive(Debug, Clone)]
pub struct IsingModel {
    eta: usize,
    lambda: f64,
    alpha: Vec<f64>,
    neighbors: Vec<Vec<u32>>,
}

impl IsingModel {
    pub fn new(eta: usize, lambda: f64, alpha: Vec<f64>, boundary: Boundary) -> Self {
        assert!(eta >= 1);
        assert!(lambda > 0.0, "coupling lambda must be positive");
        assert_eq!(alpha.len(), eta * eta, "field length must be eta^2");
        let mut neighbors = vec![Vec::new(); eta * eta];
        for r in 0..eta {
            for c in 0..eta {
                let i = r * eta + c;
                let mut push = |j: usize| neighbors[i].push(j as u32);
                match boundary {
                    Boundary::Free => {
                        if r > 0 {
                            push((r - 1) * eta + c);
                        }
                        if r + 1 < eta {
                            push((r + 1) * eta + c);
                        }
                        if c > 0 {
                            push(r * eta + c - 1);
                        }
                        if c + 1 < eta {
                            push(r * eta + c + 1);
                        }
                    }
                    Boundary::Periodic => {
                        if eta > 1 {
                            push(((r + eta - 1) % eta) * eta + c);
                            push(((r + 1) % eta) * eta + c);
                            push(r * eta + (c + eta - 1) % eta);
                            push(r * eta + (c + 1) % eta);
                        }
                    }
                }
            }
        }
        IsingModel {
            eta,
            lambda,
            alpha,
            neighbors,
        }
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Nearest-neighbour sites of `i`.
    pub fn site_neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(|v| v.len()).sum::<usize>() / 2
    }
}

impl TargetModel for IsingModel {
    fn dim(&self) -> usize {
        self.eta * self.eta
    }

    fn log_mass(&self, x: &BinaryState) -> f64 {
        assert_eq!(x.dim(), self.dim(), "state dimension must be eta^2");
        let mut field = 0.0;
        let mut coupling = 0.0;
        for i in 0..x.dim() {
            let xi = x.spin(i) as f64;
            field += self.alpha[i] * xi;
            for &j in &self.neighbors[i] {
                if (j as usize) > i {
                    coupling += xi * x.spin(j as usize) as f64;
                }
            }
        }
        field + self.lambda * coupling
    }

    fn log_ratio(&self, x: &BinaryState, i: usize) -> f64 {
        let xi = x.spin(i) as f64;
        let nbr_sum: f64 = self.neighbors[i]
            .iter()
            .map(|&j| x.spin(j as usize) as f64)
            .sum();
        -2.0 * xi * (self.alpha[i] + self.lambda * nbr_sum)
    }
}

/// Split-field layout: sites in columns `1..=ell` get `-mu + eps`,
/// the rest `+mu + eps`, with `eps` i.i.d. uniform on
/// `(-noise_half_width, +noise_half_width)`.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub mu: f64,
    pub ell: usize,
    pub noise_half_width: f64,
    pub seed: u64,
}

impl FieldSpec {
    pub fn new(mu: f64, ell: usize, seed: u64) -> Self {
        FieldSpec {
            mu,
            ell,
            noise_half_width: 0.1,
            seed,
        }
    }

    /// Deterministic given the seed; row-major over the lattice.
    pub fn build_field(&self, eta: usize) -> Vec<f64> {
        assert!(self.ell >= 1 && self.ell <= eta, "split column out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut alpha = Vec::with_capacity(eta * eta);
        for _r in 0..eta {
            for c in 0..eta {
                let eps = if self.noise_half_width > 0.0 {
                    rng.gen_range(-self.noise_half_width..self.noise_half_width)
                } else {
                    0.0
                };
                let base = if c + 1 <= self.ell { -self.mu } else { self.mu };
                alpha.push(base + eps);
            }
        }
        alpha
    }
}

// ---------------------------------------------------------------------------
// Variable selection
// ---------------------------------------------------------------------------

/// Marginal posterior over linear-regression models, intercept always
/// included, Jeffreys prior `pi(beta, sigma | x) ~ 1/sigma` on the
/// within-model parameters:
///
/// `log pi(x) = prior(k) + lgamma((n-k-1)/2) - ((n-k-1)/2) ln RSS_x
///              - 1/2 ln det(X_x' X_x) - ((n-k-1)/2) ln pi - ln 2`.
///
/// The default model-size prior cancels the `k`-dependent constants above,
/// leaving `log pi(x) = -((n-k-1)/2) ln RSS_x - 1/2 ln det(X_x' X_x)`; the
/// determinant term acts as the dimension penalty that keeps large diffuse
/// priors from collapsing the posterior onto the null model.
#[derive(Debug, Clone)]
pub struct VariableSelectionTarget {
    design: DMatrix<f64>, // n_obs x p, standardized columns
    response: DVector<f64>,
    /// log prior as a function of model size k, length p+1.
    log_prior_by_size: Vec<f64>,
}

impl VariableSelectionTarget {
    /// `design` columns are standardized (mean 0, unit variance) here;
    /// requires `n_obs > p + 1`.
    pub fn new(design: DMatrix<f64>, response: DVector<f64>) -> Result<Self, TargetError> {
        let (n_obs, p) = design.shape();
        if n_obs <= p + 1 {
            return Err(TargetError::TooFewRows {
                path: "<in-memory>".into(),
                found: n_obs,
                p,
            });
        }
        for (row, v) in response.iter().enumerate() {
            if !v.is_finite() {
                return Err(TargetError::NonFiniteResponse { row });
            }
        }
        let mut design = design;
        for c in 0..p {
            let mut col = design.column_mut(c);
            let mean = col.iter().sum::<f64>() / n_obs as f64;
            col.iter_mut().for_each(|v| *v -= mean);
            let var = col.iter().map(|v| v * v).sum::<f64>() / (n_obs as f64 - 1.0);
            if var <= 0.0 {
                return Err(TargetError::ConstantColumn { col: c });
            }
            let sd = var.sqrt();
            col.iter_mut().for_each(|v| *v /= sd);
        }
        let log_prior_by_size = (0..=p)
            .map(|k| {
                let half = (n_obs as f64 - k as f64 - 1.0) / 2.0;
                half * std::f64::consts::PI.ln() + std::f64::consts::LN_2 - ln_gamma(half)
            })
            .collect();
        Ok(VariableSelectionTarget {
            design,
            response,
            log_prior_by_size,
        })
    }

    /// Replaces the model-size prior; `log_prior.len()` must be `p + 1`.
    pub fn with_model_log_prior(mut self, log_prior: Vec<f64>) -> Self {
        assert_eq!(log_prior.len(), self.design.ncols() + 1);
        self.log_prior_by_size = log_prior;
        self
    }

    pub fn n_obs(&self) -> usize {
        self.design.nrows()
    }

    pub fn model_log_prior(&self, k: usize) -> f64 {
        self.log_prior_by_size[k]
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    /// Log marginal likelihood of the model selecting `cols`, plus the size
    /// prior; `-inf` when the Gram matrix is singular.
    fn model_log_mass(&self, cols: &[usize]) -> f64 {
        let n_obs = self.design.nrows();
        let k = cols.len();
        // Design with intercept in column 0.
        let mut x = DMatrix::zeros(n_obs, k + 1);
        x.column_mut(0).fill(1.0);
        for (j, &c) in cols.iter().enumerate() {
            x.set_column(j + 1, &self.design.column(c));
        }
        let gram = x.transpose() * &x;
        let xty = x.transpose() * &self.response;
        let chol = match gram.clone().cholesky() {
            Some(c) => c,
            None => return f64::NEG_INFINITY,
        };
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let beta = chol.solve(&xty);
        let rss = self.response.dot(&self.response) - xty.dot(&beta);
        if rss <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let half = (n_obs as f64 - k as f64 - 1.0) / 2.0;
        self.log_prior_by_size[k] + ln_gamma(half)
            - half * rss.ln()
            - 0.5 * log_det
            - half * std::f64::consts::PI.ln()
            - std::f64::consts::LN_2
    }
}

impl TargetModel for VariableSelectionTarget {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn log_mass(&self, x: &BinaryState) -> f64 {
        assert_eq!(x.dim(), self.dim());
        let cols: Vec<usize> = (0..x.dim()).filter(|&i| x.spin(i) == 1).collect();
        self.model_log_mass(&cols)
    }
}

/// Column preprocessing applied by [`load_crime_csv_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preprocess {
    /// Log-transform every strictly positive column (covariates and
    /// response), then standardize the covariates.
    LogStandardize,
    /// Standardize covariates only; leave values on their original scale.
    RawStandardize,
}

pub const CRIME_COVARIATES: usize = 15;

/// Loads a crime-study CSV: header row, 15 covariate columns then the
/// response, 47 data rows in the canonical export. Applies the log +
/// standardize preprocessing.
pub fn load_crime_csv(path: impl AsRef<Path>) -> Result<VariableSelectionTarget, TargetError> {
    load_crime_csv_with(path, Preprocess::LogStandardize)
}

pub fn load_crime_csv_with(
    path: impl AsRef<Path>,
    preprocess: Preprocess,
) -> Result<VariableSelectionTarget, TargetError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => TargetError::Io {
                path: path_str.clone(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => TargetError::Csv(path_str.clone(), e),
        })?;
    let expected = CRIME_COVARIATES + 1;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TargetError::Csv(path_str.clone(), e))?;
        if record.len() != expected {
            return Err(TargetError::ColumnCount {
                path: path_str.clone(),
                row: r + 1,
                expected,
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| TargetError::NonNumeric {
                path: path_str.clone(),
                row: r + 1,
                col: c + 1,
                cell: cell.to_string(),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    let n_obs = rows.len();
    if n_obs <= CRIME_COVARIATES + 1 {
        return Err(TargetError::TooFewRows {
            path: path_str,
            found: n_obs,
            p: CRIME_COVARIATES,
        });
    }
    let mut data = DMatrix::from_fn(n_obs, expected, |r, c| rows[r][c]);
    if preprocess == Preprocess::LogStandardize {
        for c in 0..expected {
            if (0..n_obs).all(|r| data[(r, c)] > 0.0) {
                for r in 0..n_obs {
                    data[(r, c)] = data[(r, c)].ln();
                }
            }
        }
    }
    let design = data.columns(0, CRIME_COVARIATES).into_owned();
    let response = data.column(CRIME_COVARIATES).into_owned();
    VariableSelectionTarget::new(design, response)
}

// ---------------------------------------------------------------------------
// Tabular fixtures
// ---------------------------------------------------------------------------

/// Explicit table of `2^n` unnormalized log-masses, `n <= 14`. The oracle
/// test fixture.
#[derive(Debug, Clone)]
pub struct TabularTarget {
    n: usize,
    log_masses: Vec<f64>,
}

impl TabularTarget {
    pub fn from_log_masses(n: usize, log_masses: Vec<f64>) -> Self {
        assert!(n >= 1 && n <= 14, "tabular targets support n <= 14");
        assert_eq!(log_masses.len(), 1 << n);
        assert!(
            log_masses.iter().any(|m| m.is_finite()),
            "at least one state must carry mass"
        );
        TabularTarget { n, log_masses }
    }

    pub fn from_masses(n: usize, masses: Vec<f64>) -> Self {
        assert!(masses.iter().all(|&m| m >= 0.0));
        Self::from_log_masses(n, masses.iter().map(|m| m.ln()).collect())
    }

    /// Seeded rough target: log-masses i.i.d. uniform on [-3, 3].
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_log_masses(n, (0..1usize << n).map(|_| rng.gen_range(-3.0..3.0)).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self::from_log_masses(n, vec![0.0; 1 << n])
    }
}

impl TargetModel for TabularTarget {
    fn dim(&self) -> usize {
        self.n
    }

    fn log_mass(&self, x: &BinaryState) -> f64 {
        self.log_masses[x.code() as usize]
    }
}

// ---------------------------------------------------------------------------
// Instrumentation wrappers
// ---------------------------------------------------------------------------

/// Wraps a target and counts log-mass / log-ratio evaluations.
pub struct CountingTarget<T> {
    inner: T,
    mass_evals: Cell<u64>,
    ratio_evals: Cell<u64>,
}

impl<T: TargetModel> CountingTarget<T> {
    pub fn new(inner: T) -> Self {
        CountingTarget {
            inner,
            mass_evals: Cell::new(0),
            ratio_evals: Cell::new(0),
        }
    }

    pub fn mass_evals(&self) -> u64 {
        self.mass_evals.get()
    }

    pub fn ratio_evals(&self) -> u64 {
        self.ratio_evals.get()
    }

    pub fn reset(&self) {
        self.mass_evals.set(0);
        self.ratio_evals.set(0);
    }

    pub fn into_inner(self) -> T {
        self.inner
    }
}

impl<T: TargetModel> TargetModel for CountingTarget<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_mass(&self, x: &BinaryState) -> f64 {
        self.mass_evals.set(self.mass_evals.get() + 1);
        self.inner.log_mass(x)
    }
    fn log_ratio(&self, x: &BinaryState, i: usize) -> f64 {
        self.ratio_evals.set(self.ratio_evals.get() + 1);
        self.inner.log_ratio(x, i)
    }
}

/// Memoizes log-mass by state code. Worth it for targets whose state space
/// is small relative to the run length (variable selection: 2^15 models,
/// each mass a regression solve). Single-chain use only.
pub struct CachedTarget<T> {
    inner: T,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<T: TargetModel> CachedTarget<T> {
    pub fn new(inner: T) -> Self {
        assert!(inner.dim() <= 30, "cache keys states by 2^n code");
        CachedTarget {
            inner,
            cache: RefCell::new(HashMap::new()),
        }
    }
}

impl<T: TargetModel> TargetModel for CachedTarget<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_mass(&self, x: &BinaryState) -> f64 {
        let code = x.code();
        if let Some(&v) = self.cache.borrow().get(&code) {
            return v;
        }
        let v = self.inner.log_mass(x);
        self.cache.borrow_mut().insert(code, v);
        v
    }
    fn log_ratio(&self, x: &BinaryState, i: usize) -> f64 {
        self.log_mass(&x.flip(i)) - self.log_mass(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn ising_log_mass_single_site() {
        let m = IsingModel::new(1, 0.5, vec![0.3], Boundary::Free);
        assert_abs_diff_eq!(m.log_mass(&BinaryState::new(vec![1])), 0.3);
    }

    #[test]
    fn ising_log_mass_2x2_free_boundary() {
        // 4 free-boundary edges at lambda = 0.5.
        let m = IsingModel::new(2, 0.5, vec![0.0; 4], Boundary::Free);
        assert_eq!(m.edge_count(), 4);
        assert_abs_diff_eq!(m.log_mass(&BinaryState::all_plus(4)), 2.0, epsilon = 1e-12);
        // All four edges discordant.
        let x = BinaryState::new(vec![1, -1, -1, 1]);
        assert_abs_diff_eq!(m.log_mass(&x), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn ising_edge_count_matches_free_lattice() {
        for eta in 1..=6 {
            let m = IsingModel::new(eta, 1.0, vec![0.0; eta * eta], Boundary::Free);
            assert_eq!(m.edge_count(), 2 * eta * (eta - 1));
        }
    }

    #[test]
    fn ising_log_ratio_matches_mass_difference() {
        let m = IsingModel::new(2, 0.5, vec![0.0; 4], Boundary::Free);
        let x = BinaryState::all_plus(4);
        assert_abs_diff_eq!(m.log_ratio(&x, 0), -2.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = FieldSpec::new(0.7, 2, 11);
        let m = IsingModel::new(3, 0.4, spec.build_field(3), Boundary::Free);
        for _ in 0..50 {
            let x = BinaryState::random(9, &mut rng);
            for i in 0..9 {
                let direct = m.log_mass(&x.flip(i)) - m.log_mass(&x);
                assert_abs_diff_eq!(m.log_ratio(&x, i), direct, epsilon = 1e-10);
                // Antisymmetry.
                assert_abs_diff_eq!(
                    m.log_ratio(&x, i) + m.log_ratio(&x.flip(i), i),
                    0.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn ising_global_flip_symmetry_without_field() {
        let m = IsingModel::new(2, 0.7, vec![0.0; 4], Boundary::Free);
        for code in 0..16u64 {
            let x = BinaryState::from_code(code, 4);
            let neg = BinaryState::new(x.spins().iter().map(|&b| -b).collect());
            assert_abs_diff_eq!(m.log_mass(&x), m.log_mass(&neg), epsilon = 1e-12);
        }
    }

    #[test]
    fn field_spec_structure() {
        let spec = FieldSpec::new(1.0, 25, 42);
        let alpha = spec.build_field(50);
        assert_eq!(alpha.len(), 2500);
        for r in 0..50 {
            for c in 0..50 {
                let v = alpha[r * 50 + c];
                if c < 25 {
                    assert!(v > -1.1 && v < -0.9, "left side in (-1.1,-0.9), got {v}");
                } else {
                    assert!(v > 0.9 && v < 1.1, "right side in (0.9,1.1), got {v}");
                }
            }
        }
        // Deterministic given the seed.
        assert_eq!(alpha, spec.build_field(50));
        // Zero contrast, zero noise: all-zero field.
        let flat = FieldSpec {
            mu: 0.0,
            ell: 1,
            noise_half_width: 0.0,
            seed: 0,
        };
        assert!(flat.build_field(3).iter().all(|&a| a == 0.0));
    }

    #[test]
    fn tabular_rejects_bad_input() {
        let t = TabularTarget::uniform(3);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.log_mass(&BinaryState::all_minus(3)), 0.0);
    }

    #[test]
    fn counting_target_counts() {
        let t = CountingTarget::new(TabularTarget::random(4, 0));
        let x = BinaryState::all_minus(4);
        t.log_mass(&x);
        t.log_ratio(&x, 1);
        assert_eq!(t.mass_evals(), 1);
        assert_eq!(t.ratio_evals(), 1);
    }

    #[test]
    fn cached_target_agrees_with_inner() {
        let inner = TabularTarget::random(5, 9);
        let cached = CachedTarget::new(inner.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = BinaryState::random(5, &mut rng);
            assert_eq!(cached.log_mass(&x), inner.log_mass(&x));
            assert_eq!(cached.log_ratio(&x, 2), inner.log_ratio(&x, 2));
        }
    }
}
