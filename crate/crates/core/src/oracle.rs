//! Brute-force ground truth for small state spaces: enumeration, explicit
//! kernel matrices for every sampler, stationarity and reversibility checks,
//! and exact asymptotic variances via the Poisson equation.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::poset::{BinaryState, Direction};
use crate::proposals::ProposalSpec;
use crate::samplers::{acceptance_masses, SamplerKind};
use crate::targets::TargetModel;

pub const MAX_PLAIN_DIM: usize = 14;
pub const MAX_LIFTED_DIM: usize = 12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension {n} too large for enumeration (limit {limit})")]
    DimensionTooLarge { n: usize, limit: usize },
    #[error("kernel is reducible on its support; unreachable state indices: {unreachable:?}")]
    Reducible { unreachable: Vec<usize> },
    #[error("statistic must not depend on the direction component")]
    DirectionDependentStatistic,
}

/// Index of `(x, nu)` in the lifted enumeration: states ordered by code,
/// `Down` before `Up`.
pub fn lifted_index(code: u64, nu: Direction) -> usize {
    (code as usize) << 1 | matches!(nu, Direction::Up) as usize
}

pub fn lifted_unindex(idx: usize) -> (u64, Direction) {
    let nu = if idx & 1 == 1 { Direction::Up } else { Direction::Down };
    ((idx >> 1) as u64, nu)
}

/// Enumerates all `2^n` states with the exactly normalized PMF.
pub fn enumerate<T: TargetModel>(target: &T) -> Result<(Vec<BinaryState>, Vec<f64>), OracleError> {
    let n = target.dim();
    if n > MAX_PLAIN_DIM {
        return Err(OracleError::DimensionTooLarge {
            n,
            limit: MAX_PLAIN_DIM,
        });
    }
    let states: Vec<BinaryState> = (0..1u64 << n).map(|c| BinaryState::from_code(c, n)).collect();
    let log_masses: Vec<f64> = states.iter().map(|x| target.log_mass(x)).collect();
    let max = log_masses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_masses.iter().map(|lm| (lm - max).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    Ok((states, unnorm.into_iter().map(|m| m / z).collect()))
}

/// Enumerates the lifted space; the PMF is `pi (x) * 1/2` per direction.
pub fn enumerate_lifted<T: TargetModel>(target: &T) -> Result<Vec<f64>, OracleError> {
    let n = target.dim();
    if n > MAX_LIFTED_DIM {
        return Err(OracleError::DimensionTooLarge {
            n,
            limit: MAX_LIFTED_DIM,
        });
    }
    let (_, pmf) = enumerate(target)?;
    let mut lifted = vec![0.0; pmf.len() * 2];
    for (code, p) in pmf.iter().enumerate() {
        lifted[lifted_index(code as u64, Direction::Down)] = p / 2.0;
        lifted[lifted_index(code as u64, Direction::Up)] = p / 2.0;
    }
    Ok(lifted)
}

/// Dense row-stochastic transition matrix over the enumerated lifted state
/// space (reversible samplers are block-diagonal in the direction).
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub matrix: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest deviation of any row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.dim())
            .map(|r| (self.matrix.row(r).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_j |(pi P)_j - pi_j|`.
    pub fn stationarity_error(&self, pbar: &[f64]) -> f64 {
        let pi = DVector::from_column_slice(pbar);
        let out = self.matrix.transpose() * &pi;
        (out - pi).amax()
    }

    /// Largest violation of `pi(x) P((x,nu),(y,nu)) = pi(y) P((y,-nu),(x,-nu))`
    /// over off-diagonal state pairs.
    pub fn skew_detailed_balance_error(&self, pbar: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        let m = self.dim();
        for a in 0..m {
            let (code_x, nu) = lifted_unindex(a);
            for b in 0..m {
                let (code_y, nu_b) = lifted_unindex(b);
                if code_x == code_y || nu_b != nu {
                    continue;
                }
                let lhs = pbar[a] * self.matrix[(a, b)];
                let rev_from = lifted_index(code_y, nu.flip());
                let rev_to = lifted_index(code_x, nu.flip());
                let rhs = pbar[rev_from] * self.matrix[(rev_from, rev_to)];
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    /// Largest violation of plain detailed balance (for reversible kernels).
    pub fn detailed_balance_error(&self, pbar: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim() {
            for b in 0..a {
                worst = worst
                    .max((pbar[a] * self.matrix[(a, b)] - pbar[b] * self.matrix[(b, a)]).abs());
            }
        }
        worst
    }
}

/// Builds the exact transition matrix of a sampler on the lifted space.
/// Entries mirror the step functions: the same proposal weights, acceptance
/// probabilities, and branch structure.
pub fn build_kernel<T: TargetModel>(
    kind: &SamplerKind,
    proposal: ProposalSpec,
    target: &T,
) -> Result<KernelMatrix, OracleError> {
    let n = target.dim();
    if n > MAX_LIFTED_DIM {
        return Err(OracleError::DimensionTooLarge {
            n,
            limit: MAX_LIFTED_DIM,
        });
    }
    let size = 1usize << n;
    let mut p = DMatrix::zeros(size * 2, size * 2);
    for code in 0..size as u64 {
        let x = BinaryState::from_code(code, n);
        for nu in Direction::BOTH {
            let row = lifted_index(code, nu);
            match kind {
                SamplerKind::MetropolisHastings => {
                    let (weights, log_c) = proposal.log_weights_undirected(target, &x);
                    let mut stay = 1.0;
                    for (i, lw) in weights {
                        let q = (lw - log_c).exp();
                        let y = x.flip(i);
                        let log_rev = proposal.log_q_undirected(target, &y, i);
                        let log_alpha =
                            (target.log_ratio(&x, i) + log_rev - (lw - log_c)).min(0.0);
                        let mass = q * log_alpha.exp();
                        p[(row, lifted_index(y.code(), nu))] += mass;
                        stay -= mass;
                    }
                    p[(row, row)] += stay.max(0.0);
                }
                SamplerKind::Lifted1 => {
                    let (masses, t) = acceptance_masses(target, proposal, &x, nu);
                    for (i, m) in masses {
                        p[(row, lifted_index(x.flip(i).code(), nu))] += m;
                    }
                    p[(row, lifted_index(code, nu.flip()))] += (1.0 - t).max(0.0);
                }
                SamplerKind::Lifted2(policy) => {
                    let (masses, t_fwd) = acceptance_masses(target, proposal, &x, nu);
                    let (_, t_rev) = acceptance_masses(target, proposal, &x, nu.flip());
                    let rho = policy.rho(&x, nu, t_fwd, t_rev);
                    for (i, m) in masses {
                        p[(row, lifted_index(x.flip(i).code(), nu))] += m;
                    }
                    p[(row, lifted_index(code, nu.flip()))] += rho;
                    // Guard against -1e-17-scale cancellation when rho
                    // saturates at 1 - T.
                    p[(row, row)] += (1.0 - t_fwd - rho).max(0.0);
                }
                SamplerKind::RevMix => {
                    let mut stay = 1.0;
                    for d in Direction::BOTH {
                        let (masses, _) = acceptance_masses(target, proposal, &x, d);
                        for (i, m) in masses {
                            p[(row, lifted_index(x.flip(i).code(), nu))] += 0.5 * m;
                            stay -= 0.5 * m;
                        }
                    }
                    p[(row, row)] += stay.max(0.0);
                }
            }
        }
    }
    Ok(KernelMatrix { matrix: p })
}

/// Exact asymptotic variance `var(f, P)` of ergodic averages, via the
/// Poisson equation `(I - P) h = f - pbar(f)` restricted to the support of
/// `pbar`, with the normalization `pbar . h = 0` replacing one redundant row.
///
/// `f` must assign equal values to the two directions of each state when the
/// kernel lives on a lifted space; callers enumerate `f` over the same index
/// space as the kernel.
pub fn asymptotic_variance(
    kernel: &KernelMatrix,
    pbar: &[f64],
    f: &[f64],
) -> Result<f64, OracleError> {
    let m = kernel.dim();
    assert_eq!(pbar.len(), m);
    assert_eq!(f.len(), m);
    let support: Vec<usize> = (0..m).filter(|&i| pbar[i] > 0.0).collect();
    check_irreducible(kernel, &support)?;
    let s = support.len();
    let mean: f64 = support.iter().map(|&i| pbar[i] * f[i]).sum();
    let fbar: Vec<f64> = support.iter().map(|&i| f[i] - mean).collect();
    // (I - P) restricted to the support; row 0 replaced by the
    // normalization (the dropped equation is linearly dependent).
    let mut a = DMatrix::zeros(s, s);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[(r, c)] = (r == c) as u8 as f64 - kernel.matrix[(i, j)];
        }
    }
    let mut rhs = DVector::from_column_slice(&fbar);
    for (c, &j) in support.iter().enumerate() {
        a[(0, c)] = pbar[j];
    }
    rhs[0] = 0.0;
    let h = a
        .lu()
        .solve(&rhs)
        .expect("support-restricted Poisson system is nonsingular");
    let inner: f64 = support
        .iter()
        .enumerate()
        .map(|(r, &i)| pbar[i] * fbar[r] * h[r])
        .sum();
    let var: f64 = support
        .iter()
        .enumerate()
        .map(|(r, &i)| pbar[i] * fbar[r] * fbar[r])
        .sum();
    Ok(2.0 * inner - var)
}

fn check_irreducible(kernel: &KernelMatrix, support: &[usize]) -> Result<(), OracleError> {
    if support.is_empty() {
        return Ok(());
    }
    let in_support: Vec<bool> = {
        let mut v = vec![false; kernel.dim()];
        support.iter().for_each(|&i| v[i] = true);
        v
    };
    let mut seen = vec![false; kernel.dim()];
    let mut stack = vec![support[0]];
    seen[support[0]] = true;
    while let Some(i) = stack.pop() {
        for j in 0..kernel.dim() {
            if !seen[j] && in_support[j] && kernel.matrix[(i, j)] > 1e-300 {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    let unreachable: Vec<usize> = support.iter().copied().filter(|&i| !seen[i]).collect();
    if unreachable.is_empty() {
        Ok(())
    } else {
        Err(OracleError::Reducible { unreachable })
    }
}

/// Extracts the `Down` direction block of a direction-preserving
/// (reversible) kernel as a plain-space kernel. Such kernels never mix the
/// two blocks, so the full lifted matrix is reducible by construction and
/// variances must be taken per block.
pub fn direction_block(kernel: &KernelMatrix) -> KernelMatrix {
    let m = kernel.dim() / 2;
    let matrix = DMatrix::from_fn(m, m, |r, c| kernel.matrix[(r * 2, c * 2)]);
    KernelMatrix { matrix }
}

/// Total variation distance `1/2 sum |p - q|` between distributions on the
/// same support.
pub fn tv_distance(empirical: &[f64], exact: &[f64]) -> f64 {
    assert_eq!(empirical.len(), exact.len());
    0.5 * empirical
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

/// Lifts a statistic on states (indexed by code) to the lifted index space,
/// equal across directions.
pub fn lift_statistic(f_by_code: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f_by_code.len() * 2];
    for (code, &v) in f_by_code.iter().enumerate() {
        out[lifted_index(code as u64, Direction::Down)] = v;
        out[lifted_index(code as u64, Direction::Up)] = v;
    }
    out
}

/// Spin-sum statistic enumerated by code, the default `f` for variance
/// orderings.
pub fn spin_sum_by_code(n: usize) -> Vec<f64> {
    (0..1u64 << n)
        .map(|c| BinaryState::from_code(c, n).spin_sum())
        .collect()
}
