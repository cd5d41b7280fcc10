//! Validation suite: exact stationarity, reversibility identities, and
//! asymptotic-variance orderings on seeded random tabular targets, printed
//! as one pass/fail line per check.

use lifted_mcmc::oracle::{
    asymptotic_variance, build_kernel, direction_block, enumerate, enumerate_lifted,
    lift_statistic, spin_sum_by_code,
};
use lifted_mcmc::samplers::{RhoPolicy, SamplerKind};
use lifted_mcmc::targets::TabularTarget;
use lifted_mcmc::{ProposalSpec, TargetModel};

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn all_kinds() -> Vec<SamplerKind> {
    vec![
        SamplerKind::MetropolisHastings,
        SamplerKind::Lifted1,
        SamplerKind::Lifted2(RhoPolicy::Optimal),
        SamplerKind::Lifted2(RhoPolicy::Worst),
        SamplerKind::Lifted2(RhoPolicy::InterpolateHashed(77)),
        SamplerKind::RevMix,
    ]
}

fn proposals() -> [ProposalSpec; 2] {
    [ProposalSpec::Uniform, ProposalSpec::barker()]
}

/// Runs the oracle suite on tabular targets with dimensions 3..=6 seeded
/// from `seed`. Returns true iff every check passes.
pub fn run_validation(seed: u64) -> bool {
    let battery: Vec<TabularTarget> = (3..=6usize)
        .flat_map(|n| (0..3u64).map(move |i| TabularTarget::random(n, seed ^ (n as u64) << 8 ^ i)))
        .collect();

    let mut checks = Vec::new();

    // Stationarity of every kernel.
    let mut worst: f64 = 0.0;
    for t in &battery {
        let pbar = enumerate_lifted(t).unwrap();
        for kind in all_kinds() {
            for proposal in proposals() {
                let k = build_kernel(&kind, proposal, t).unwrap();
                worst = worst.max(k.stationarity_error(&pbar)).max(k.row_sum_error());
            }
        }
    }
    checks.push(Check {
        name: "stationarity",
        passed: worst < 1e-12,
        detail: format!("max error {worst:.2e}"),
    });

    // Detailed balance for the reversible kernels, skew detailed balance
    // for the lifted ones.
    let mut worst: f64 = 0.0;
    for t in &battery {
        let pbar = enumerate_lifted(t).unwrap();
        for proposal in proposals() {
            for kind in [SamplerKind::MetropolisHastings, SamplerKind::RevMix] {
                let k = build_kernel(&kind, proposal, t).unwrap();
                worst = worst.max(k.detailed_balance_error(&pbar));
            }
            for kind in [
                SamplerKind::Lifted1,
                SamplerKind::Lifted2(RhoPolicy::Optimal),
            ] {
                let k = build_kernel(&kind, proposal, t).unwrap();
                worst = worst.max(k.skew_detailed_balance_error(&pbar));
            }
        }
    }
    checks.push(Check {
        name: "balance-identities",
        passed: worst < 1e-12,
        detail: format!("max violation {worst:.2e}"),
    });

    // The worst-case generalized sampler is the one-stage sampler.
    let mut worst: f64 = 0.0;
    for t in &battery {
        for proposal in proposals() {
            let a = build_kernel(&SamplerKind::Lifted1, proposal, t).unwrap();
            let b = build_kernel(&SamplerKind::Lifted2(RhoPolicy::Worst), proposal, t).unwrap();
            worst = worst.max((&a.matrix - &b.matrix).amax());
        }
    }
    checks.push(Check {
        name: "worst-rho-collapse",
        passed: worst < 1e-12,
        detail: format!("max entry difference {worst:.2e}"),
    });

    // Variance orderings: rho* <= custom rho <= worst rho, and any lifted
    // kernel <= the reversible mixture.
    let mut ordering_ok = true;
    let mut lifted_ok = true;
    let mut detail = String::new();
    'outer: for t in &battery {
        let pbar = enumerate_lifted(t).unwrap();
        let f = lift_statistic(&spin_sum_by_code(t.dim()));
        let (_, plain_pmf) = enumerate(t).unwrap();
        let plain_f = spin_sum_by_code(t.dim());
        for proposal in proposals() {
            let var = |kind: &SamplerKind| {
                let k = build_kernel(kind, proposal, t).unwrap();
                asymptotic_variance(&k, &pbar, &f).unwrap()
            };
            let opt = var(&SamplerKind::Lifted2(RhoPolicy::Optimal));
            let custom = var(&SamplerKind::Lifted2(RhoPolicy::InterpolateHashed(seed)));
            let worst_rho = var(&SamplerKind::Lifted2(RhoPolicy::Worst));
            // The mixture kernel carries its direction untouched, so take
            // the variance on the collapsed space.
            let mix = {
                let k = build_kernel(&SamplerKind::RevMix, proposal, t).unwrap();
                asymptotic_variance(&direction_block(&k), &plain_pmf, &plain_f).unwrap()
            };
            if !(opt <= custom + 1e-9 && custom <= worst_rho + 1e-9) {
                ordering_ok = false;
                detail = format!("rho ordering violated: {opt} / {custom} / {worst_rho}");
                break 'outer;
            }
            if !(custom <= mix + 1e-9 && worst_rho <= mix + 1e-9) {
                lifted_ok = false;
                detail = format!("lifted {custom} above mixture {mix}");
                break 'outer;
            }
        }
    }
    checks.push(Check {
        name: "rho-variance-ordering",
        passed: ordering_ok,
        detail: detail.clone(),
    });
    checks.push(Check {
        name: "lifted-below-mixture",
        passed: lifted_ok,
        detail,
    });

    let mut all = true;
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.name);
        } else {
            println!("{status} {} ({})", c.name, c.detail);
        }
        all &= c.passed;
    }
    all
}
