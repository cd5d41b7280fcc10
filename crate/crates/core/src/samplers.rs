//! The four single-space samplers: reversible Metropolis-Hastings, the
//! plain lifted sampler, the generalized lifted sampler with direction-flip
//! policies, and the coin-flip reversible mixture counterpart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poset::{BinaryState, Direction, LiftedChainState};
use crate::proposals::ProposalSpec;
use crate::targets::{CountingTarget, TargetModel};

pub use crate::proposals::BalancingFunction;

/// Direction-flip probability policy for the generalized lifted sampler.
///
/// Every policy must satisfy `0 <= rho_nu(x) <= 1 - T_nu(x)` and
/// `rho_nu(x) - rho_{-nu}(x) = T_{-nu}(x) - T_nu(x)`. The family implemented
/// here is `rho_nu = rho*_nu + s(x) * (1 - max(T_-1, T_+1))` with a mixing
/// coefficient `s(x) in [0,1]`, which covers the whole admissible range:
/// `s = 0` is the variance-optimal choice and `s = 1` the worst one (which
/// reproduces the plain lifted sampler).
#[derive(Debug, Clone, PartialEq)]
pub enum RhoPolicy {
    /// `rho*_nu(x) = max(0, T_{-nu}(x) - T_nu(x))`.
    Optimal,
    /// `rho^w_nu(x) = 1 - T_nu(x)`; never keeps direction on rejection.
    Worst,
    /// Fixed mixing coefficient `s` for all states.
    Interpolate(f64),
    /// State-dependent mixing coefficient drawn deterministically from a
    /// hash of the state; exercises arbitrary valid policies in tests.
    InterpolateHashed(u64),
}

impl RhoPolicy {
    fn mixing(&self, x: &BinaryState) -> f64 {
        match self {
            RhoPolicy::Optimal => 0.0,
            RhoPolicy::Worst => 1.0,
            RhoPolicy::Interpolate(s) => {
                assert!((0.0..=1.0).contains(s));
                *s
            }
            RhoPolicy::InterpolateHashed(seed) => {
                // splitmix64 over (code, seed); uniform enough in [0,1).
                let mut z = x.code() ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
                (z ^ (z >> 31)) as f64 / u64::MAX as f64
            }
        }
    }

    /// `rho_nu(x)` given both acceptance masses.
    pub fn rho(&self, x: &BinaryState, nu: Direction, t_fwd: f64, t_rev: f64) -> f64 {
        let _ = nu;
        let rho_star = (t_rev - t_fwd).max(0.0);
        let slack = 1.0 - t_fwd.max(t_rev);
        let rho = rho_star + self.mixing(x) * slack;
        debug_assert!(rho >= -1e-12 && rho <= 1.0 - t_fwd + 1e-12);
        rho.clamp(0.0, 1.0 - t_fwd)
    }

    /// Whether `T_{-nu}` must be computed to evaluate `rho_nu`.
    fn needs_reverse_t(&self, t_fwd: f64) -> bool {
        match self {
            // rho* can only be positive if T_nu < 1.
            RhoPolicy::Optimal => t_fwd < 1.0 - 1e-15,
            RhoPolicy::Worst => false,
            _ => true,
        }
    }
}

/// Which sampler to run. The proposal kernel is chosen separately via
/// [`ProposalSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerKind {
    /// Reversible Metropolis-Hastings over the full neighbourhood.
    MetropolisHastings,
    /// Lifted sampler: accept keeps the direction, reject flips it.
    Lifted1,
    /// Generalized lifted sampler with an explicit direction-flip policy.
    Lifted2(RhoPolicy),
    /// Reversible counterpart that flips a coin each iteration to choose the
    /// up or down directed proposal.
    RevMix,
}

impl SamplerKind {
    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::MetropolisHastings => "mh",
            SamplerKind::Lifted1 => "lifted1",
            SamplerKind::Lifted2(RhoPolicy::Optimal) => "lifted2-opt",
            SamplerKind::Lifted2(RhoPolicy::Worst) => "lifted2-worst",
            SamplerKind::Lifted2(_) => "lifted2",
            SamplerKind::RevMix => "revmix",
        }
    }
}

/// Which branch a step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Accept,
    FlipDirection,
    /// Rejected but kept the direction; only reachable under the
    /// generalized sampler with a policy other than the worst one.
    KeepDirectionReject,
    /// Reversible rejection (no direction semantics).
    Reject,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: LiftedChainState,
    pub accepted: bool,
    pub branch: Branch,
    /// Whether this step computed the reverse-direction acceptance mass.
    pub reverse_t_computed: bool,
}

/// `log alpha_nu(x, flip(x,i))` for a directed proposal.
pub fn log_alpha_directed<T: TargetModel>(
    target: &T,
    proposal: ProposalSpec,
    x: &BinaryState,
    nu: Direction,
    i: usize,
) -> f64 {
    let y = x.flip(i);
    let log_fwd = proposal.log_q_directed(target, x, nu, i);
    let log_rev = proposal.log_q_directed(target, &y, nu.flip(), i);
    (target.log_ratio(x, i) + log_rev - log_fwd).min(0.0)
}

/// One reversible MH step with an undirected proposal. The direction field
/// is carried through untouched.
pub fn mh_step<T: TargetModel, R: Rng>(
    target: &T,
    proposal: ProposalSpec,
    current: &LiftedChainState,
    rng: &mut R,
) -> StepOutcome {
    let x = &current.state;
    let (i, log_fwd) = proposal.sample_undirected(target, x, rng);
    let y = x.flip(i);
    let log_rev = proposal.log_q_undirected(target, &y, i);
    let log_alpha = (target.log_ratio(x, i) + log_rev - log_fwd).min(0.0);
    let accept = rng.gen::<f64>().ln() < log_alpha;
    StepOutcome {
        next: LiftedChainState::new(if accept { y } else { x.clone() }, current.direction),
        accepted: accept,
        branch: if accept { Branch::Accept } else { Branch::Reject },
        reverse_t_computed: false,
    }
}

/// One step of the plain lifted sampler: propose in the current direction,
/// accept and keep the direction, or reject and reverse it. An empty
/// directed neighbourhood is an automatic rejection.
pub fn lifted1_step<T: TargetModel, R: Rng>(
    target: &T,
    proposal: ProposalSpec,
    current: &LiftedChainState,
    rng: &mut R,
) -> StepOutcome {
    let x = &current.state;
    let nu = current.direction;
    let Some((i, log_fwd)) = proposal.sample_directed(target, x, nu, rng) else {
        return StepOutcome {
            next: LiftedChainState::new(x.clone(), nu.flip()),
            accepted: false,
            branch: Branch::FlipDirection,
            reverse_t_computed: false,
        };
    };
    let y = x.flip(i);
    let log_rev = proposal.log_q_directed(target, &y, nu.flip(), i);
    let log_alpha = (target.log_ratio(x, i) + log_rev - log_fwd).min(0.0);
    if rng.gen::<f64>().ln() < log_alpha {
        StepOutcome {
            next: LiftedChainState::new(y, nu),
            accepted: true,
            branch: Branch::Accept,
            reverse_t_computed: false,
        }
    } else {
        StepOutcome {
            next: LiftedChainState::new(x.clone(), nu.flip()),
            accepted: false,
            branch: Branch::FlipDirection,
            reverse_t_computed: false,
        }
    }
}

/// Per-neighbour `q * alpha` masses in direction `nu` and their total
/// `T_nu(x)`. Empty neighbourhoods give `T = 0`.
pub fn acceptance_masses<T: TargetModel>(
    target: &T,
    proposal: ProposalSpec,
    x: &BinaryState,
    nu: Direction,
) -> (Vec<(usize, f64)>, f64) {
    let Some((weights, log_c)) = proposal.log_weights_directed(target, x, nu) else {
        return (Vec::new(), 0.0);
    };
    let mut total = 0.0;
    let masses: Vec<(usize, f64)> = weights
        .iter()
        .map(|&(i, lw)| {
            let q = (lw - log_c).exp();
            let la = log_alpha_directed(target, proposal, x, nu, i);
            let m = q * la.exp();
            total += m;
            (i, m)
        })
        .collect();
    (masses, total.min(1.0))
}

/// `T_nu(x, X)`: the probability that the next proposal from `(x, nu)` is
/// accepted.
pub fn acceptance_mass_t<T: TargetModel>(
    target: &T,
    proposal: ProposalSpec,
    x: &BinaryState,
    nu: Direction,
) -> f64 {
    acceptance_masses(target, proposal, x, nu).1
}

/// One step of the generalized lifted sampler: with probability `T_nu`
/// accept a draw from the acceptance-weighted proposal, with probability
/// `rho_nu` reverse the direction, otherwise stay put keeping the direction.
pub fn lifted2_step<T: TargetModel, R: Rng>(
    target: &T,
    proposal: ProposalSpec,
    policy: &RhoPolicy,
    current: &LiftedChainState,
    rng: &mut R,
) -> StepOutcome {
    let x = &current.state;
    let nu = current.direction;
    let (masses, t_fwd) = acceptance_masses(target, proposal, x, nu);
    let (rho, reverse_t_computed) = if policy.needs_reverse_t(t_fwd) {
        let t_rev = acceptance_mass_t(target, proposal, x, nu.flip());
        (policy.rho(x, nu, t_fwd, t_rev), true)
    } else {
        match policy {
            RhoPolicy::Optimal => (0.0, false),
            RhoPolicy::Worst => (1.0 - t_fwd, false),
            _ => unreachable!("only rho* skips the reverse mass"),
        }
    };
    debug_assert!((0.0..=1.0 - t_fwd + 1e-12).contains(&rho));
    let u: f64 = rng.gen();
    if u < t_fwd {
        // y ~ Q_{x,nu}, Q proportional to q * alpha; inverse CDF over the
        // masses already in ascending index order.
        let mut acc = 0.0;
        let mut pick = masses.last().expect("T > 0 implies nonempty").0;
        for &(i, m) in &masses {
            acc += m;
            if u <= acc {
                pick = i;
                break;
            }
        }
        StepOutcome {
            next: LiftedChainState::new(x.flip(pick), nu),
            accepted: true,
            branch: Branch::Accept,
            reverse_t_computed,
        }
    } else if u < t_fwd + rho {
        StepOutcome {
            next: LiftedChainState::new(x.clone(), nu.flip()),
            accepted: false,
            branch: Branch::FlipDirection,
            reverse_t_computed,
        }
    } else {
        StepOutcome {
            next: LiftedChainState::new(x.clone(), nu),
            accepted: false,
            branch: Branch::KeepDirectionReject,
            reverse_t_computed,
        }
    }
}

/// One step of the reversible mixture sampler: flip a coin for the
/// direction, propose from the directed kernel, accept with the lifted
/// acceptance probability. No direction persists between steps.
pub fn revmix_step<T: TargetModel, R: Rng>(
    target: &T,
    proposal: ProposalSpec,
    current: &LiftedChainState,
    rng: &mut R,
) -> StepOutcome {
    let x = &current.state;
    let nu = Direction::random(rng);
    let Some((i, log_fwd)) = proposal.sample_directed(target, x, nu, rng) else {
        return StepOutcome {
            next: current.clone(),
            accepted: false,
            branch: Branch::Reject,
            reverse_t_computed: false,
        };
    };
    let y = x.flip(i);
    let log_rev = proposal.log_q_directed(target, &y, nu.flip(), i);
    let log_alpha = (target.log_ratio(x, i) + log_rev - log_fwd).min(0.0);
    let accept = rng.gen::<f64>().ln() < log_alpha;
    StepOutcome {
        next: LiftedChainState::new(if accept { y } else { x.clone() }, current.direction),
        accepted: accept,
        branch: if accept { Branch::Accept } else { Branch::Reject },
        reverse_t_computed: false,
    }
}

/// Dispatches one step of any sampler kind.
pub fn step<T: TargetModel, R: Rng>(
    kind: &SamplerKind,
    target: &T,
    proposal: ProposalSpec,
    current: &LiftedChainState,
    rng: &mut R,
) -> StepOutcome {
    match kind {
        SamplerKind::MetropolisHastings => mh_step(target, proposal, current, rng),
        SamplerKind::Lifted1 => lifted1_step(target, proposal, current, rng),
        SamplerKind::Lifted2(policy) => lifted2_step(target, proposal, policy, current, rng),
        SamplerKind::RevMix => revmix_step(target, proposal, current, rng),
    }
}

/// Raw output of a single chain run; summarized by the diagnostics module.
#[derive(Debug, Clone)]
pub struct ChainRun {
    /// Post-burn-in statistic trace, one entry per iteration.
    pub trace: Vec<f64>,
    pub iters: u64,
    pub burnin: u64,
    pub accepted: u64,
    pub direction_flips: u64,
    /// Target log-mass evaluations over the whole run.
    pub mass_evals: u64,
    /// Target log-ratio evaluations over the whole run.
    pub ratio_evals: u64,
    /// Steps that computed the reverse-direction acceptance mass.
    pub reverse_t_steps: u64,
    pub seconds: f64,
    pub final_state: LiftedChainState,
}

impl ChainRun {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.iters as f64
    }

    pub fn flip_rate(&self) -> f64 {
        self.direction_flips as f64 / self.iters as f64
    }
}

/// Runs a chain for `iters` steps, recording `statistic` after each
/// post-burn-in step. Deterministic given the seed; the initial state is
/// drawn uniformly from the hypercube unless `init` is given, and the
/// initial direction uniformly from the two directions.
pub fn run_chain<T: TargetModel>(
    kind: &SamplerKind,
    proposal: ProposalSpec,
    target: &T,
    statistic: impl Fn(&BinaryState) -> f64,
    iters: u64,
    burnin: u64,
    seed: u64,
    init: Option<BinaryState>,
) -> ChainRun {
    assert!(iters > burnin, "iters must exceed burnin");
    let started = std::time::Instant::now();
    let counting = CountingTarget::new(target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = init.unwrap_or_else(|| BinaryState::random(target.dim(), &mut rng));
    let mut current = LiftedChainState::new(state, Direction::random(&mut rng));
    let mut trace = Vec::with_capacity((iters - burnin) as usize);
    let mut accepted = 0;
    let mut direction_flips = 0;
    let mut reverse_t_steps = 0;
    for it in 0..iters {
        let out = step(kind, &counting, proposal, &current, &mut rng);
        if out.accepted {
            accepted += 1;
        }
        if out.branch == Branch::FlipDirection {
            direction_flips += 1;
        }
        if out.reverse_t_computed {
            reverse_t_steps += 1;
        }
        current = out.next;
        if it >= burnin {
            trace.push(statistic(&current.state));
        }
    }
    ChainRun {
        trace,
        iters,
        burnin,
        accepted,
        direction_flips,
        mass_evals: counting.mass_evals(),
        ratio_evals: counting.ratio_evals(),
        reverse_t_steps,
        seconds: started.elapsed().as_secs_f64(),
        final_state: current,
    }
}
