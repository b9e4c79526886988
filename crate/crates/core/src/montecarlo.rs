//! Click sampling and one-bit decoding from Bob's counts.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`): a counter-based stream
//! cipher whose output for a given `(seed, stream)` is fixed by its
//! definition, so counts are reproducible on every platform. Seeds are
//! expanded with `SeedableRng::seed_from_u64`, and uniforms are built from
//! the top 53 bits of each 64-bit word. Changing any of these is a breaking
//! change for recorded outputs.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::hilbert::StateVector;
use crate::measurement::{
    outcome_distribution, MeasurementError, MeasurementModel, OutcomeDistribution,
};

/// Bob's expected click fraction with complete (`DA1`) and interfering
/// (`DA2`, in phase) detection on Alice's side.
pub const BOB_FRACTION_DA1: f64 = 0.5;
pub const BOB_FRACTION_DA2: f64 = 1.0 / 3.0;
/// Midpoint of the two fractions.
pub const DECISION_THRESHOLD: f64 = 5.0 / 12.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("number of trials must be at least 1")]
    EmptyTrials,
    #[error("bob_counts {counts} exceeds trials {n}")]
    CountsExceedTrials { counts: u64, n: u64 },
    #[error("empty phase list")]
    EmptySweep,
    #[error("distribution has no outcome with positive probability")]
    EmptyDistribution,
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

pub type Result<T> = std::result::Result<T, MonteCarloError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountSummary {
    pub counts: BTreeMap<String, u64>,
    pub n_trials: u64,
    pub seed: u64,
    pub stream: u64,
}

impl CountSummary {
    pub fn count(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn frequency(&self, label: &str) -> f64 {
        self.count(label) as f64 / self.n_trials as f64
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn sample_clicks(dist: &OutcomeDistribution, n: u64, seed: u64) -> Result<CountSummary> {
    sample_clicks_stream(dist, n, seed, 0)
}

/// `n` independent categorical draws from `dist.probabilities`, using
/// ChaCha stream `stream` of `seed`.
pub fn sample_clicks_stream(
    dist: &OutcomeDistribution,
    n: u64,
    seed: u64,
    stream: u64,
) -> Result<CountSummary> {
    if n == 0 {
        return Err(MonteCarloError::EmptyTrials);
    }
    let mut cumulative = Vec::with_capacity(dist.outcomes.len());
    let mut acc = 0.0;
    for o in &dist.outcomes {
        acc += o.probability;
        cumulative.push(acc);
    }
    // rounding can leave the last cumulative value just below 1
    let fallback = dist
        .outcomes
        .iter()
        .rposition(|o| o.probability > 0.0)
        .ok_or(MonteCarloError::EmptyDistribution)?;

    let mut tallies = vec![0u64; dist.outcomes.len()];
    let mut rng = rng_for(seed, stream);
    for _ in 0..n {
        let u = uniform(&mut rng);
        let i = cumulative.iter().position(|&c| u < c).unwrap_or(fallback);
        tallies[i] += 1;
    }

    let mut counts = BTreeMap::new();
    for (o, t) in dist.outcomes.iter().zip(tallies) {
        *counts.entry(o.label.clone()).or_insert(0) += t;
    }
    Ok(CountSummary {
        counts,
        n_trials: n,
        seed,
        stream,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalDecision {
    /// 0: Alice measured with `DA1`, 1: with `DA2`
    pub decided_bit: u8,
    /// `ln L(½) − ln L(⅓)` for Bob's counts; positive favors bit 0
    pub log_likelihood_ratio: f64,
    pub threshold: f64,
    /// Hoeffding bound on the decision error, `exp(−2n (1/12)²)`
    pub error_bound: f64,
}

/// Reads Alice's bit from Bob's click fraction on arm `h`.
pub fn distinguish_bit(bob_counts: u64, n: u64) -> Result<SignalDecision> {
    if n == 0 {
        return Err(MonteCarloError::EmptyTrials);
    }
    if bob_counts > n {
        return Err(MonteCarloError::CountsExceedTrials {
            counts: bob_counts,
            n,
        });
    }
    let c = bob_counts as f64;
    let nf = n as f64;
    let llr = c * (BOB_FRACTION_DA1 / BOB_FRACTION_DA2).ln()
        + (nf - c) * ((1.0 - BOB_FRACTION_DA1) / (1.0 - BOB_FRACTION_DA2)).ln();
    let gap = BOB_FRACTION_DA1 - DECISION_THRESHOLD;
    Ok(SignalDecision {
        decided_bit: if c / nf > DECISION_THRESHOLD { 0 } else { 1 },
        log_likelihood_ratio: llr,
        threshold: DECISION_THRESHOLD,
        error_bound: (-2.0 * nf * gap * gap).exp().clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub phi: f64,
    pub analytic_bob_rate: f64,
    pub empirical_bob_rate: f64,
    pub stderr: f64,
}

/// Bob's rate (per unit input rate) under `DA2(φ)` for each phase: analytic
/// from the renormalized distribution, empirical from `n` clicks on stream
/// `i` for the `i`-th phase. Points are sampled in parallel; row order
/// follows `phis`.
pub fn phase_sweep(state: &StateVector, phis: &[f64], n: u64, seed: u64) -> Result<Vec<SweepRow>> {
    if phis.is_empty() {
        return Err(MonteCarloError::EmptySweep);
    }
    phis.par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let dist =
                outcome_distribution(state, &MeasurementModel::CoherentIncompleteDA2 { phi })?;
            let p = dist.probability("p");
            let counts = sample_clicks_stream(&dist, n, seed, i as u64)?;
            Ok(SweepRow {
                phi,
                analytic_bob_rate: p,
                empirical_bob_rate: counts.frequency("p"),
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuitspec::CircuitSpec;
    use crate::optics::build_output_state;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn psi() -> StateVector {
        build_output_state(&CircuitSpec::paper_fig1()).unwrap()
    }

    #[test]
    fn degenerate_distribution() {
        let d = OutcomeDistribution::from_probabilities(&[("p", 1.0)]).unwrap();
        for seed in [0, 1, u64::MAX] {
            let c = sample_clicks(&d, 100, seed).unwrap();
            assert_eq!(c.count("p"), 100);
        }
        let d = OutcomeDistribution::from_probabilities(&[("k", 0.0), ("p", 1.0)]).unwrap();
        let c = sample_clicks(&d, 1000, 9).unwrap();
        assert_eq!((c.count("k"), c.count("p")), (0, 1000));
    }

    #[test]
    fn empty_trials() {
        let d = OutcomeDistribution::from_probabilities(&[("p", 1.0)]).unwrap();
        assert_eq!(sample_clicks(&d, 0, 1), Err(MonteCarloError::EmptyTrials));
    }

    #[test]
    fn frequencies_within_four_sigma() {
        let n = 100_000u64;
        let da2 =
            OutcomeDistribution::from_probabilities(&[("k", 2.0 / 3.0), ("p", 1.0 / 3.0)]).unwrap();
        let c = sample_clicks(&da2, n, 42).unwrap();
        let sigma = (2.0f64 / 9.0 / n as f64).sqrt();
        assert!((c.frequency("p") - 1.0 / 3.0).abs() <= 4.0 * sigma);

        let da1 = OutcomeDistribution::from_probabilities(&[("l", 0.25), ("m", 0.25), ("p", 0.5)])
            .unwrap();
        let c = sample_clicks(&da1, n, 42).unwrap();
        assert_eq!(c.counts.values().sum::<u64>(), n);
        for o in &da1.outcomes {
            let p = o.probability;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (c.frequency(&o.label) - p).abs() <= 4.0 * sigma,
                "{}",
                o.label
            );
        }
    }

    #[test]
    fn streams_differ_and_repeat() {
        let d = OutcomeDistribution::from_probabilities(&[("k", 0.5), ("p", 0.5)]).unwrap();
        let a = sample_clicks_stream(&d, 1000, 7, 0).unwrap();
        let b = sample_clicks_stream(&d, 1000, 7, 1).unwrap();
        assert_ne!(a.counts, b.counts);
        assert_eq!(a, sample_clicks_stream(&d, 1000, 7, 0).unwrap());
    }

    #[test]
    fn decision_examples() {
        let n = 10_000;
        assert_eq!(distinguish_bit(n / 2, n).unwrap().decided_bit, 0);
        assert_eq!(distinguish_bit(3333, n).unwrap().decided_bit, 1);
        let d = distinguish_bit(5000, n).unwrap();
        assert!(d.error_bound <= (-2.0f64 * 1e4 / 144.0).exp() * (1.0 + 1e-12));
        // exp(-20000/144) = 4.8009e-61
        assert!(d.error_bound < 4.81e-61 && d.error_bound > 4.80e-61);
        assert!(d.log_likelihood_ratio > 0.0);
        assert!(distinguish_bit(3333, n).unwrap().log_likelihood_ratio < 0.0);
        assert_eq!(d.threshold, 5.0 / 12.0);

        let one = distinguish_bit(1, 1).unwrap();
        assert!((one.error_bound - (-2.0f64 / 144.0).exp()).abs() < 1e-15);
        assert!((one.error_bound - 0.986).abs() < 1e-3);

        assert!(distinguish_bit(11, 10).is_err());
        assert!(distinguish_bit(0, 0).is_err());
    }

    #[test]
    fn llr_matches_binomial_pmf_ratio() {
        // small n: compare with the ratio of explicit binomial probabilities
        let n = 12u64;
        for c in 0..=n {
            let pmf = |p: f64| p.powi(c as i32) * (1.0 - p).powi((n - c) as i32);
            let expect = (pmf(0.5) / pmf(1.0 / 3.0)).ln();
            let got = distinguish_bit(c, n).unwrap().log_likelihood_ratio;
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_examples() {
        let n = 100_000;
        let rows = phase_sweep(&psi(), &[0.0, FRAC_PI_2, PI], n, 3).unwrap();
        assert!((rows[0].analytic_bob_rate - 1.0 / 3.0).abs() < 1e-12);
        assert!((rows[1].analytic_bob_rate - 0.5).abs() < 1e-12);
        assert!((rows[2].analytic_bob_rate - 1.0).abs() < 1e-12);
        assert!((rows[1].empirical_bob_rate - 0.5).abs() <= 4.0 * (0.25 / n as f64).sqrt());
        assert_eq!(rows[2].empirical_bob_rate, 1.0);
        assert_eq!(
            phase_sweep(&psi(), &[], 10, 0),
            Err(MonteCarloError::EmptySweep)
        );
    }
}
