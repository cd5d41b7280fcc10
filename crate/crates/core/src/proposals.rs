//! Proposal kernels over one-flip neighbourhoods: uniform, and locally
//! balanced (informed) with a pluggable balancing function.
//!
//! All weight arithmetic is done in log-space; the Barker weight is computed
//! as a log-sigmoid of the target log-ratio so high-contrast targets do not
//! overflow. Categorical sampling is inverse-CDF over ascending coordinate
//! index.

use rand::Rng;

use crate::poset::{BinaryState, Direction};
use crate::targets::TargetModel;

/// Balancing function `g` with `g(t)/g(1/t) = t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalancingFunction {
    /// `g(t) = t / (1 + t)`, bounded; stabilizes weights on rough targets.
    Barker,
    /// `g(t) = sqrt(t)`.
    Sqrt,
}

impl BalancingFunction {
    pub fn eval(self, t: f64) -> f64 {
        debug_assert!(t > 0.0);
        match self {
            BalancingFunction::Barker => t / (1.0 + t),
            BalancingFunction::Sqrt => t.sqrt(),
        }
    }

    /// `log g(exp(delta))`, computed without forming `exp(delta)`.
    pub fn log_eval(self, delta: f64) -> f64 {
        match self {
            // log sigmoid(delta)
            BalancingFunction::Barker => {
                if delta >= 0.0 {
                    -(-delta).exp().ln_1p()
                } else {
                    delta - delta.exp().ln_1p()
                }
            }
            BalancingFunction::Sqrt => 0.5 * delta,
        }
    }
}

/// Which proposal kernel a sampler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalSpec {
    /// Uniform over the (directed) neighbourhood.
    Uniform,
    /// Locally balanced: weight `g(pi(y)/pi(x))` per neighbour.
    Informed(BalancingFunction),
}

impl ProposalSpec {
    pub fn barker() -> Self {
        ProposalSpec::Informed(BalancingFunction::Barker)
    }

    fn log_weight<T: TargetModel>(self, target: &T, x: &BinaryState, i: usize) -> f64 {
        match self {
            ProposalSpec::Uniform => 0.0,
            ProposalSpec::Informed(g) => g.log_eval(target.log_ratio(x, i)),
        }
    }

    /// Per-neighbour log-weights over `N_nu(x)` together with the
    /// log-normalizer `log c_{nu}(x)`. `None` on a boundary state.
    pub fn log_weights_directed<T: TargetModel>(
        self,
        target: &T,
        x: &BinaryState,
        nu: Direction,
    ) -> Option<(Vec<(usize, f64)>, f64)> {
        let idx = x.directed_neighborhood(nu);
        if idx.is_empty() {
            return None;
        }
        let weights: Vec<(usize, f64)> = idx
            .into_iter()
            .map(|i| (i, self.log_weight(target, x, i)))
            .collect();
        let log_c = log_sum(weights.iter().map(|&(_, lw)| lw));
        Some((weights, log_c))
    }

    /// As above over the full one-flip neighbourhood; the normalizer
    /// satisfies `c(x) = c_{-1}(x) + c_{+1}(x)`.
    pub fn log_weights_undirected<T: TargetModel>(
        self,
        target: &T,
        x: &BinaryState,
    ) -> (Vec<(usize, f64)>, f64) {
        let weights: Vec<(usize, f64)> = (0..x.dim())
            .map(|i| (i, self.log_weight(target, x, i)))
            .collect();
        let log_c = log_sum(weights.iter().map(|&(_, lw)| lw));
        (weights, log_c)
    }

    /// Draws a flip index `y = flip(x, i)` from `q_{x,nu}` and returns
    /// `(i, log q_{x,nu}(y))`. `None` signals an empty neighbourhood; the
    /// caller treats it as an automatic rejection.
    pub fn sample_directed<T: TargetModel, R: Rng>(
        self,
        target: &T,
        x: &BinaryState,
        nu: Direction,
        rng: &mut R,
    ) -> Option<(usize, f64)> {
        let (weights, log_c) = self.log_weights_directed(target, x, nu)?;
        Some(sample_categorical(&weights, log_c, rng))
    }

    pub fn sample_undirected<T: TargetModel, R: Rng>(
        self,
        target: &T,
        x: &BinaryState,
        rng: &mut R,
    ) -> (usize, f64) {
        let (weights, log_c) = self.log_weights_undirected(target, x);
        sample_categorical(&weights, log_c, rng)
    }

    /// `log q_{x,nu}(flip(x,i))`; `i` must lie in `N_nu(x)`.
    pub fn log_q_directed<T: TargetModel>(
        self,
        target: &T,
        x: &BinaryState,
        nu: Direction,
        i: usize,
    ) -> f64 {
        debug_assert_eq!(x.spin(i), -nu.target_spin());
        match self {
            ProposalSpec::Uniform => -(x.count_opposite(nu) as f64).ln(),
            ProposalSpec::Informed(_) => {
                let (_, log_c) = self
                    .log_weights_directed(target, x, nu)
                    .expect("nonempty by membership of i");
                self.log_weight(target, x, i) - log_c
            }
        }
    }

    pub fn log_q_undirected<T: TargetModel>(
        self,
        target: &T,
        x: &BinaryState,
        i: usize,
    ) -> f64 {
        match self {
            ProposalSpec::Uniform => -(x.dim() as f64).ln(),
            ProposalSpec::Informed(_) => {
                let (_, log_c) = self.log_weights_undirected(target, x);
                self.log_weight(target, x, i) - log_c
            }
        }
    }

    /// `log c_{nu}(x)`; for the uniform kernel this is `log |N_nu(x)|`.
    /// `None` on a boundary state.
    pub fn log_normalizer_directed<T: TargetModel>(
        self,
        target: &T,
        x: &BinaryState,
        nu: Direction,
    ) -> Option<f64> {
        match self {
            ProposalSpec::Uniform => {
                let k = x.count_opposite(nu);
                (k > 0).then(|| (k as f64).ln())
            }
            ProposalSpec::Informed(_) => {
                self.log_weights_directed(target, x, nu).map(|(_, c)| c)
            }
        }
    }

    pub fn log_normalizer_undirected<T: TargetModel>(self, target: &T, x: &BinaryState) -> f64 {
        match self {
            ProposalSpec::Uniform => (x.dim() as f64).ln(),
            ProposalSpec::Informed(_) => self.log_weights_undirected(target, x).1,
        }
    }
}

/// Log-sum-exp with the usual max shift.
pub fn log_sum(log_terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = log_terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + log_terms.map(|lw| (lw - max).exp()).sum::<f64>().ln()
}

/// Inverse-CDF draw over `(index, log-weight)` pairs in the given order.
fn sample_categorical<R: Rng>(weights: &[(usize, f64)], log_c: f64, rng: &mut R) -> (usize, f64) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(i, lw) in weights {
        let p = (lw - log_c).exp();
        acc += p;
        if u < acc {
            return (i, lw - log_c);
        }
    }
    // Rounding left u above the accumulated mass; take the last entry.
    let &(i, lw) = weights.last().expect("nonempty weight list");
    (i, lw - log_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{CountingTarget, TabularTarget};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn balancing_identity_on_log_grid() {
        // g(t)/g(1/t) = t on a 100-point log-spaced grid.
        for g in [BalancingFunction::Barker, BalancingFunction::Sqrt] {
            for k in 0..100 {
                let log_t = -8.0 + 16.0 * k as f64 / 99.0;
                let lhs = g.log_eval(log_t) - g.log_eval(-log_t);
                assert_abs_diff_eq!(lhs, log_t, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn barker_log_eval_is_stable() {
        let g = BalancingFunction::Barker;
        assert_abs_diff_eq!(g.log_eval(0.0), 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.log_eval(-800.0), -800.0, epsilon = 1e-9);
        assert!(g.log_eval(800.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_directed_log_q() {
        let t = TabularTarget::uniform(2);
        let x = BinaryState::all_minus(2);
        let q = ProposalSpec::Uniform;
        assert_abs_diff_eq!(
            q.log_q_directed(&t, &x, Direction::Up, 0),
            -(2f64.ln()),
            epsilon = 1e-15
        );
        // Boundary.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(q.sample_directed(&t, &x, Direction::Down, &mut rng).is_none());
    }

    #[test]
    fn barker_weight_examples() {
        // Two up-neighbors with mass ratios {1, 3}: weights {0.5, 0.75}.
        let t = TabularTarget::from_masses(2, vec![1.0, 1.0, 3.0, 1.0]);
        let x = BinaryState::all_minus(2); // neighbors: code 1 (ratio 1), code 2 (ratio 3)
        let q = ProposalSpec::barker();
        let (w, log_c) = q.log_weights_directed(&t, &x, Direction::Up).unwrap();
        assert_abs_diff_eq!(w[0].1.exp(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1].1.exp(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(log_c.exp(), 1.25, epsilon = 1e-12);
        // Sqrt g with ratio 4: weight 2.
        let t4 = TabularTarget::from_masses(1, vec![1.0, 4.0]);
        let x1 = BinaryState::all_minus(1);
        let qs = ProposalSpec::Informed(BalancingFunction::Sqrt);
        let (w4, _) = qs.log_weights_directed(&t4, &x1, Direction::Up).unwrap();
        assert_abs_diff_eq!(w4[0].1.exp(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn undirected_normalizer_is_sum_of_directed() {
        let t = TabularTarget::random(6, 17);
        let q = ProposalSpec::barker();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = BinaryState::random(6, &mut rng);
            let c_all = q.log_normalizer_undirected(&t, &x).exp();
            let c_up = q
                .log_normalizer_directed(&t, &x, Direction::Up)
                .map_or(0.0, f64::exp);
            let c_down = q
                .log_normalizer_directed(&t, &x, Direction::Down)
                .map_or(0.0, f64::exp);
            assert_abs_diff_eq!(c_all, c_up + c_down, epsilon = 1e-12);
        }
    }

    #[test]
    fn proposal_pmf_sums_to_one() {
        // exp(log q) over the support sums to 1, for n up to 12.
        for (n, seed) in [(3usize, 1u64), (7, 2), (12, 3)] {
            let t = TabularTarget::random(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = BinaryState::random(n, &mut rng);
            for q in [ProposalSpec::Uniform, ProposalSpec::barker()] {
                for nu in Direction::BOTH {
                    if let Some((w, log_c)) = q.log_weights_directed(&t, &x, nu) {
                        let total: f64 = w.iter().map(|&(_, lw)| (lw - log_c).exp()).sum();
                        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                    }
                }
                let (w, log_c) = q.log_weights_undirected(&t, &x);
                let total: f64 = w.iter().map(|&(_, lw)| (lw - log_c).exp()).sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn uniform_target_informed_proposal_is_uniform() {
        let t = TabularTarget::uniform(5);
        let q = ProposalSpec::barker();
        let x = BinaryState::all_minus(5);
        let (w, log_c) = q.log_weights_undirected(&t, &x);
        for (_, lw) in w {
            assert_abs_diff_eq!((lw - log_c).exp(), 0.2, epsilon = 1e-12);
        }
    }

    /// 4-sigma multinomial band check of empirical draw frequencies.
    fn check_frequencies(counts: &[u64], probs: &[f64], total: u64) {
        for (c, p) in counts.iter().zip(probs) {
            let mean = total as f64 * p;
            let sd = (total as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (*c as f64 - mean).abs() <= 4.0 * sd + 1.0,
                "count {c} outside 4-sigma of {mean} (sd {sd})"
            );
        }
    }

    #[test]
    fn empirical_frequencies_match_uniform_directed() {
        let t = TabularTarget::uniform(4);
        let x = BinaryState::new(vec![-1, -1, 1, -1]);
        let q = ProposalSpec::Uniform;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0u64; 4];
        let n = 100_000;
        for _ in 0..n {
            let (i, _) = q.sample_directed(&t, &x, Direction::Up, &mut rng).unwrap();
            counts[i] += 1;
        }
        let third = 1.0 / 3.0;
        check_frequencies(&counts, &[third, third, 0.0, third], n);
    }

    #[test]
    fn empirical_frequencies_match_informed_weights() {
        let t = TabularTarget::random(4, 77);
        let x = BinaryState::all_minus(4);
        let q = ProposalSpec::barker();
        let (w, log_c) = q.log_weights_undirected(&t, &x);
        let probs: Vec<f64> = w.iter().map(|&(_, lw)| (lw - log_c).exp()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut counts = [0u64; 4];
        let n = 100_000;
        for _ in 0..n {
            let (i, _) = q.sample_undirected(&t, &x, &mut rng);
            counts[i] += 1;
        }
        check_frequencies(&counts, &probs, n);
    }

    #[test]
    fn informed_weights_cost_one_ratio_per_neighbor() {
        let t = CountingTarget::new(TabularTarget::random(8, 5));
        let x = BinaryState::new(vec![-1, 1, -1, -1, 1, -1, 1, -1]);
        let q = ProposalSpec::barker();
        q.log_weights_directed(&t, &x, Direction::Up).unwrap();
        assert_eq!(t.ratio_evals(), x.count_opposite(Direction::Up) as u64);
    }
}
