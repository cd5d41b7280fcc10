//! Run statistics: effective sample size, trace summaries, and the CSV
//! result schema shared by the experiment drivers.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::poset::BinaryState;
use crate::samplers::ChainRun;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("trace of length {0} is too short for an ESS estimate (need >= 10)")]
    TraceTooShort(usize),
    #[error("trace contains a non-finite value")]
    NonFiniteTrace,
    #[error("no replicate records to summarize")]
    EmptySummary,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Magnetisation statistic: the sum of spins.
pub fn magnetisation(x: &BinaryState) -> f64 {
    x.spin_sum()
}

/// Biased autocovariance estimates `gamma_0 .. gamma_{n-1}` computed with an
/// FFT (zero-padded circular convolution, normalized by `n`).
pub fn autocovariances(trace: &[f64]) -> Vec<f64> {
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;
    let padded = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = trace
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(padded)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(padded).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(padded).process(&mut buf);
    // The inverse pass is unnormalized: divide by the FFT length, then by
    // `n` for the biased covariance estimator.
    let scale = 1.0 / (padded as f64 * n as f64);
    buf[..n].iter().map(|v| v.re * scale).collect()
}

/// Effective sample size of a scalar trace using the initial monotone
/// positive sequence estimator: consecutive autocovariances are paired, the
/// pair sums are truncated at the first non-positive value and forced to be
/// non-increasing, and the ESS is `n * gamma_0 / sigma^2`.
///
/// A constant trace is exactly uncorrelated, so its ESS equals the trace
/// length.
pub fn ess(trace: &[f64]) -> Result<f64, DiagnosticsError> {
    let n = trace.len();
    if n < 10 {
        return Err(DiagnosticsError::TraceTooShort(n));
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(DiagnosticsError::NonFiniteTrace);
    }
    let gamma = autocovariances(trace);
    if gamma[0] <= 0.0 {
        return Ok(n as f64);
    }
    let mut sigma_sq = -gamma[0];
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = gamma[2 * m] + gamma[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sigma_sq += 2.0 * pair;
        prev = pair;
        m += 1;
    }
    if sigma_sq <= 0.0 {
        return Ok(n as f64);
    }
    // Anticorrelated traces can estimate above the nominal sample size;
    // cap at 1.25x so the ratio stays interpretable.
    Ok((n as f64 * gamma[0] / sigma_sq).min(1.25 * n as f64))
}

/// Point summary of a scalar trace.
#[derive(Debug, Clone)]
pub struct TraceSummary {
    pub mean: f64,
    pub variance: f64,
    pub ess: f64,
    pub ess_per_iter: f64,
}

pub fn summarize_trace(trace: &[f64]) -> Result<TraceSummary, DiagnosticsError> {
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let variance = trace.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let ess = ess(trace)?;
    Ok(TraceSummary {
        mean,
        variance,
        ess,
        ess_per_iter: ess / n,
    })
}

/// One CSV row of the shared result schema. The `replicate` column holds the
/// replicate id, or `mean` / `stderr` for the aggregate rows appended per
/// `(sampler, proposal, target)` group.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub replicate: u64,
    pub sampler: String,
    pub proposal: String,
    pub target: String,
    pub ess: f64,
    pub ess_per_iter: f64,
    pub accept_rate: f64,
    pub flip_rate: f64,
    pub mass_evals: u64,
    pub ratio_evals: u64,
    pub seconds: f64,
}

impl RunRecord {
    /// Builds a row from a finished chain, estimating the ESS of its trace.
    pub fn from_run(
        run: &ChainRun,
        replicate: u64,
        sampler: impl Into<String>,
        proposal: impl Into<String>,
        target: impl Into<String>,
    ) -> Result<Self, DiagnosticsError> {
        let summary = summarize_trace(&run.trace)?;
        Ok(RunRecord {
            replicate,
            sampler: sampler.into(),
            proposal: proposal.into(),
            target: target.into(),
            ess: summary.ess,
            ess_per_iter: summary.ess_per_iter,
            accept_rate: run.acceptance_rate(),
            flip_rate: run.flip_rate(),
            mass_evals: run.mass_evals,
            ratio_evals: run.ratio_evals,
            seconds: run.seconds,
        })
    }

    fn group_key(&self) -> (String, String, String) {
        (self.sampler.clone(), self.proposal.clone(), self.target.clone())
    }

    fn metrics(&self) -> [f64; 7] {
        [
            self.ess,
            self.ess_per_iter,
            self.accept_rate,
            self.flip_rate,
            self.mass_evals as f64,
            self.ratio_evals as f64,
            self.seconds,
        ]
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "replicate",
    "sampler",
    "proposal",
    "target",
    "ess",
    "ess_per_iter",
    "accept_rate",
    "flip_rate",
    "mass_evals",
    "ratio_evals",
    "seconds",
];

/// Writes per-replicate rows followed by `mean` and `stderr` aggregate rows
/// for each `(sampler, proposal, target)` group, preserving first-seen group
/// order.
pub fn write_summary<W: Write>(out: W, records: &[RunRecord]) -> Result<(), DiagnosticsError> {
    if records.is_empty() {
        return Err(DiagnosticsError::EmptySummary);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let mut row = vec![r.replicate.to_string(), r.sampler.clone(), r.proposal.clone(), r.target.clone()];
        row.extend(r.metrics().iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    let mut groups: Vec<(String, String, String)> = Vec::new();
    for r in records {
        if !groups.contains(&r.group_key()) {
            groups.push(r.group_key());
        }
    }
    for key in groups {
        let members: Vec<&RunRecord> = records.iter().filter(|r| r.group_key() == key).collect();
        let k = members.len() as f64;
        let mut mean = [0.0f64; 7];
        for r in &members {
            for (m, v) in mean.iter_mut().zip(r.metrics()) {
                *m += v / k;
            }
        }
        let mut stderr = [0.0f64; 7];
        if members.len() > 1 {
            for r in &members {
                for ((s, v), m) in stderr.iter_mut().zip(r.metrics()).zip(mean) {
                    *s += (v - m) * (v - m) / (k - 1.0);
                }
            }
            for s in stderr.iter_mut() {
                *s = (*s / k).sqrt();
            }
        }
        for (label, vals) in [("mean", mean), ("stderr", stderr)] {
            let mut row = vec![label.to_string(), key.0.clone(), key.1.clone(), key.2.clone()];
            row.extend(vals.iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
