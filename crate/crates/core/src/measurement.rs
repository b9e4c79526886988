//! Detection models on the three-beam state and the renormalization rule.
//!
//! A model is a list of labeled weight operators. When the operators resolve
//! the identity on `{a, b, h}` the weights are already probabilities; when
//! they do not (the interfering `DA2` detector), the weights are divided by
//! their sum `renorm_beta`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::hilbert::{
    completeness_deviation, expectation_tol, mode_projector, ray_projector, Basis, HilbertError,
    LinearOperator, ModeLabel, StateVector, DEFAULT_TOL,
};
use crate::optics::interfering_mode;
pub use crate::optics::region_of;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("state is not normalized (⟨ψ|ψ⟩ = {0})")]
    Unnormalized(f64),
    #[error("invalid measurement model: {0}")]
    InvalidModel(String),
    #[error("no outcome of the model can fire on this state (renorm_beta = {0:e})")]
    NoDetection(f64),
    #[error("outcome `{label}` has negative weight {weight:e}")]
    NegativeWeight { label: String, weight: f64 },
    #[error("input rate must be positive, got {0}")]
    InvalidRate(f64),
}

pub type Result<T> = std::result::Result<T, MeasurementError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum MeasurementModel {
    /// Separate detectors on `a` (region l) and `b` (region m).
    #[serde(rename = "complete_da1")]
    CompleteDA1,
    /// One detector where `a` and `b` overlap with relative phase `phi`.
    #[serde(rename = "coherent_incomplete_da2")]
    CoherentIncompleteDA2 { phi: f64 },
    /// `P̂_l + P̂_m` as a single outcome: indistinguishable but without
    /// cross-beam terms.
    StandardSumControl,
    /// Young double slit on `a`, `b` with a screen sampled at `n_points`.
    DoubleSlitScreen { n_points: usize },
}

impl MeasurementModel {
    pub fn check(&self) -> Result<()> {
        match *self {
            MeasurementModel::CoherentIncompleteDA2 { phi } if !phi.is_finite() => Err(
                MeasurementError::InvalidModel(format!("phi {phi} is not finite")),
            ),
            MeasurementModel::DoubleSlitScreen { n_points } if n_points < 2 => {
                Err(MeasurementError::InvalidModel(format!(
                    "screen needs at least 2 points, got {n_points}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub label: String,
    pub weight: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub outcomes: Vec<Outcome>,
    pub renorm_beta: f64,
    /// of the model's weight operators; zero for a complete basis
    pub completeness_deviation: f64,
}

impl OutcomeDistribution {
    /// Distribution from already normalized probabilities (weights equal
    /// probabilities, `renorm_beta = 1`).
    pub fn from_probabilities(pairs: &[(&str, f64)]) -> Result<Self> {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if let Some(&(label, w)) = pairs.iter().find(|p| p.1.is_nan() || p.1 < 0.0) {
            return Err(MeasurementError::NegativeWeight {
                label: label.into(),
                weight: w,
            });
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(MeasurementError::InvalidModel(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(OutcomeDistribution {
            outcomes: pairs
                .iter()
                .map(|&(label, p)| Outcome {
                    label: label.into(),
                    weight: p,
                    probability: p,
                })
                .collect(),
            renorm_beta: 1.0,
            completeness_deviation: 0.0,
        })
    }

    pub fn get(&self, label: &str) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    /// Probability of `label`, zero when the model has no such outcome.
    pub fn probability(&self, label: &str) -> f64 {
        self.get(label).map_or(0.0, |o| o.probability)
    }

    pub fn weight(&self, label: &str) -> f64 {
        self.get(label).map_or(0.0, |o| o.weight)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|o| o.label.as_str())
    }
}

/// `P̂_k(φ)`: unnormalized ray weight operator of the interfering detector.
pub fn coherent_projector(phi: f64) -> LinearOperator {
    ray_projector(&interfering_mode(phi), false).expect("nonzero mode")
}

fn screen_phase(j: usize, n: usize) -> f64 {
    TAU * j as f64 / n as f64
}

/// Screen point operators `S⁻¹ (α(y)|a⟩ + β(y)|b⟩)(…)†` for `n` points with
/// relative phase `δ_j = 2πj/n` spanning exactly one period.
pub fn screen_projectors(n_points: usize) -> Vec<LinearOperator> {
    let scale = Complex64::new(1.0 / n_points as f64, 0.0);
    (0..n_points)
        .map(|j| {
            let v = StateVector::from_pairs(
                Basis::beams(),
                &[
                    (
                        ModeLabel::A,
                        Complex64::from_polar(1.0, screen_phase(j, n_points)),
                    ),
                    (ModeLabel::B, Complex64::new(1.0, 0.0)),
                ],
            )
            .expect("beam basis");
            ray_projector(&v, false).expect("nonzero mode").scale(scale)
        })
        .collect()
}

/// Labeled weight operators of a model on `{a, b, h}`. The double-slit
/// model returns one operator per screen point, all labeled `screen`.
pub fn weight_operators(model: &MeasurementModel) -> Result<Vec<(&'static str, LinearOperator)>> {
    model.check()?;
    let b = Basis::beams();
    let p = mode_projector(&b, ModeLabel::H)?;
    Ok(match *model {
        MeasurementModel::CompleteDA1 => vec![
            ("l", mode_projector(&b, ModeLabel::A)?),
            ("m", mode_projector(&b, ModeLabel::B)?),
            ("p", p),
        ],
        MeasurementModel::CoherentIncompleteDA2 { phi } => {
            vec![("k", coherent_projector(phi)), ("p", p)]
        }
        MeasurementModel::StandardSumControl => vec![
            (
                "k",
                mode_projector(&b, ModeLabel::A)?.add(&mode_projector(&b, ModeLabel::B)?)?,
            ),
            ("p", p),
        ],
        MeasurementModel::DoubleSlitScreen { n_points } => {
            let mut ops: Vec<_> = screen_projectors(n_points)
                .into_iter()
                .map(|op| ("screen", op))
                .collect();
            ops.push(("p", p));
            ops
        }
    })
}

fn check_normalized(state: &StateVector, tol: f64) -> Result<()> {
    if !state.is_normalized(tol) {
        return Err(MeasurementError::Unnormalized(state.norm_sqr()));
    }
    Ok(())
}

fn weight_of(label: &str, op: &LinearOperator, state: &StateVector, tol: f64) -> Result<f64> {
    let w = expectation_tol(op, state, tol)?;
    if w < -tol {
        return Err(MeasurementError::NegativeWeight {
            label: label.into(),
            weight: w,
        });
    }
    Ok(w.max(0.0))
}

pub fn outcome_distribution(
    state: &StateVector,
    model: &MeasurementModel,
) -> Result<OutcomeDistribution> {
    outcome_distribution_tol(state, model, DEFAULT_TOL)
}

/// Weights are expectations of the model's operators; outcomes sharing a
/// label are summed. `renorm_beta` is 1 when the operators are complete and
/// the weight sum otherwise.
pub fn outcome_distribution_tol(
    state: &StateVector,
    model: &MeasurementModel,
    tol: f64,
) -> Result<OutcomeDistribution> {
    check_normalized(state, tol)?;
    let ops = weight_operators(model)?;

    let mut weights: Vec<(&'static str, f64)> = Vec::new();
    for (label, op) in &ops {
        let w = weight_of(label, op, state, tol)?;
        match weights.iter_mut().find(|(l, _)| l == label) {
            Some(slot) => slot.1 += w,
            None => weights.push((label, w)),
        }
    }

    let operators: Vec<LinearOperator> = ops.into_iter().map(|(_, op)| op).collect();
    let deviation = completeness_deviation(&operators)?;
    let renorm_beta = if deviation <= tol {
        1.0
    } else {
        weights.iter().map(|w| w.1).sum()
    };
    if renorm_beta <= tol {
        return Err(MeasurementError::NoDetection(renorm_beta));
    }

    Ok(OutcomeDistribution {
        outcomes: weights
            .into_iter()
            .map(|(label, weight)| Outcome {
                label: label.to_string(),
                weight,
                probability: weight / renorm_beta,
            })
            .collect(),
        renorm_beta,
        completeness_deviation: deviation,
    })
}

/// Bob's count rate on arm `h`: `C · P(p)`.
pub fn bob_rate(state: &StateVector, model: &MeasurementModel, input_rate: f64) -> Result<f64> {
    if !(input_rate.is_finite() && input_rate > 0.0) {
        return Err(MeasurementError::InvalidRate(input_rate));
    }
    Ok(input_rate * outcome_distribution(state, model)?.probability("p"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScreenPoint {
    /// relative phase of `a` against `b` at this point
    pub delta: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenPattern {
    pub points: Vec<ScreenPoint>,
    pub integrated_weight: f64,
}

/// Per-point screen weights `(|ψ_a|² + |ψ_b|² + 2 Re(ψ_a ψ_b* e^{-iδ}))/N`
/// and their sum.
pub fn double_slit_screen(state: &StateVector, n_points: usize) -> Result<ScreenPattern> {
    MeasurementModel::DoubleSlitScreen { n_points }.check()?;
    let mut points = Vec::with_capacity(n_points);
    for (j, op) in screen_projectors(n_points).iter().enumerate() {
        points.push(ScreenPoint {
            delta: screen_phase(j, n_points),
            intensity: weight_of("screen", op, state, DEFAULT_TOL)?,
        });
    }
    let integrated_weight = points.iter().map(|p| p.intensity).sum();
    Ok(ScreenPattern {
        points,
        integrated_weight,
    })
}

/// `‖Σ_y P̂_k(y)/N − (P̂_l + P̂_m)‖_F` on `{a, b, h}`.
pub fn screen_completeness_deviation(n_points: usize) -> Result<f64> {
    MeasurementModel::DoubleSlitScreen { n_points }.check()?;
    let b = Basis::beams();
    let mut sum = LinearOperator::zeros(b.clone());
    for op in screen_projectors(n_points) {
        sum = sum.add(&op)?;
    }
    let target = mode_projector(&b, ModeLabel::A)?.add(&mode_projector(&b, ModeLabel::B)?)?;
    Ok(sum.sub(&target)?.frobenius_norm())
}

/// Counterfactual where Bob's rate stays pinned at its complete-basis value
/// while Alice keeps her unrenormalized interfering weight. Quantities are
/// fractions of the input rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausalityAudit {
    pub alice_weight: f64,
    pub bob_pinned_weight: f64,
    pub total: f64,
    pub excess: f64,
    pub violates_conservation: bool,
}

pub fn causality_audit(state: &StateVector, phi: f64) -> Result<CausalityAudit> {
    check_normalized(state, DEFAULT_TOL)?;
    MeasurementModel::CoherentIncompleteDA2 { phi }.check()?;
    let alice_weight = weight_of("k", &coherent_projector(phi), state, DEFAULT_TOL)?;
    let bob_pinned_weight = weight_of(
        "p",
        &mode_projector(&Basis::beams(), ModeLabel::H)?,
        state,
        DEFAULT_TOL,
    )?;
    let total = alice_weight + bob_pinned_weight;
    let excess = total - 1.0;
    Ok(CausalityAudit {
        alice_weight,
        bob_pinned_weight,
        total,
        excess,
        violates_conservation: excess > DEFAULT_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn psi() -> StateVector {
        let c = |x| Complex64::new(x, 0.0);
        StateVector::new(Basis::beams(), vec![c(0.5), c(0.5), c(FRAC_1_SQRT_2)]).unwrap()
    }

    fn ket(l: ModeLabel) -> StateVector {
        StateVector::ket(Basis::beams(), l).unwrap()
    }

    fn assert_dist(d: &OutcomeDistribution, expect: &[(&str, f64)], beta: f64) {
        assert_eq!(d.outcomes.len(), expect.len());
        for &(l, p) in expect {
            assert!(
                (d.probability(l) - p).abs() <= 1e-12,
                "{l}: {} vs {p}",
                d.probability(l)
            );
        }
        assert!((d.renorm_beta - beta).abs() <= 1e-12);
    }

    #[test]
    fn default_circuit_distributions() {
        let s = psi();
        let d = outcome_distribution(&s, &MeasurementModel::CompleteDA1).unwrap();
        assert_dist(&d, &[("l", 0.25), ("m", 0.25), ("p", 0.5)], 1.0);
        assert!(d.completeness_deviation <= 1e-12);

        let d = outcome_distribution(&s, &MeasurementModel::CoherentIncompleteDA2 { phi: 0.0 })
            .unwrap();
        assert_dist(&d, &[("k", 2.0 / 3.0), ("p", 1.0 / 3.0)], 1.5);
        assert!(d.completeness_deviation > 0.4);

        let d =
            outcome_distribution(&s, &MeasurementModel::CoherentIncompleteDA2 { phi: PI }).unwrap();
        assert_dist(&d, &[("k", 0.0), ("p", 1.0)], 0.5);

        let d = outcome_distribution(&s, &MeasurementModel::StandardSumControl).unwrap();
        assert_dist(&d, &[("k", 0.5), ("p", 0.5)], 1.0);

        let d =
            outcome_distribution(&s, &MeasurementModel::DoubleSlitScreen { n_points: 16 }).unwrap();
        assert_dist(&d, &[("screen", 0.5), ("p", 0.5)], 1.0);
    }

    #[test]
    fn contract_violations() {
        let bad = psi().scaled(Complex64::new(2.0, 0.0));
        assert!(matches!(
            outcome_distribution(&bad, &MeasurementModel::CompleteDA1),
            Err(MeasurementError::Unnormalized(_))
        ));
        assert!(matches!(
            outcome_distribution(&psi(), &MeasurementModel::DoubleSlitScreen { n_points: 1 }),
            Err(MeasurementError::InvalidModel(_))
        ));
        assert!(matches!(
            outcome_distribution(
                &psi(),
                &MeasurementModel::CoherentIncompleteDA2 { phi: f64::NAN }
            ),
            Err(MeasurementError::InvalidModel(_))
        ));
        assert!(matches!(
            bob_rate(&psi(), &MeasurementModel::CompleteDA1, 0.0),
            Err(MeasurementError::InvalidRate(_))
        ));
    }

    #[test]
    fn no_detection_is_an_error() {
        // antisymmetric a/b state is dark at k for φ = 0 and has nothing on h
        let dark = StateVector::from_pairs(
            Basis::beams(),
            &[
                (ModeLabel::A, Complex64::new(FRAC_1_SQRT_2, 0.0)),
                (ModeLabel::B, Complex64::new(-FRAC_1_SQRT_2, 0.0)),
            ],
        )
        .unwrap();
        assert!(matches!(
            outcome_distribution(&dark, &MeasurementModel::CoherentIncompleteDA2 { phi: 0.0 }),
            Err(MeasurementError::NoDetection(_))
        ));
    }

    #[test]
    fn bob_rates() {
        let s = psi();
        let r = |m| bob_rate(&s, &m, 1.0).unwrap();
        assert!((r(MeasurementModel::CompleteDA1) - 0.5).abs() < 1e-12);
        assert!(
            (r(MeasurementModel::CoherentIncompleteDA2 { phi: 0.0 }) - 1.0 / 3.0).abs() < 1e-12
        );
        assert!(
            (r(MeasurementModel::CoherentIncompleteDA2 { phi: FRAC_PI_2 }) - 0.5).abs() < 1e-12
        );
        assert!(
            (bob_rate(&s, &MeasurementModel::CompleteDA1, 3000.0).unwrap() - 1500.0).abs() < 1e-9
        );
    }

    #[test]
    fn double_slit_examples() {
        let s = psi();
        let pat = double_slit_screen(&s, 4).unwrap();
        let deltas: Vec<f64> = pat.points.iter().map(|p| p.delta).collect();
        assert_eq!(deltas, vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]);
        assert!((pat.integrated_weight - 0.5).abs() < 1e-12);
        for p in &pat.points {
            assert!((p.intensity - 0.5 * (1.0 + p.delta.cos()) / 4.0).abs() < 1e-12);
        }
        assert!((double_slit_screen(&s, 1024).unwrap().integrated_weight - 0.5).abs() <= 1e-9);
        for n in [2, 3, 17] {
            let w = double_slit_screen(&ket(ModeLabel::A), n)
                .unwrap()
                .integrated_weight;
            assert!((w - 1.0).abs() < 1e-12);
        }
        assert!(double_slit_screen(&s, 1).is_err());
        assert!(screen_completeness_deviation(0).is_err());
    }

    #[test]
    fn screen_completeness() {
        assert!(screen_completeness_deviation(2).unwrap() <= 1e-15);
        assert!(screen_completeness_deviation(64).unwrap() <= 1e-12);
        assert!(screen_completeness_deviation(1024).unwrap() <= 1e-12);
    }

    #[test]
    fn causality_examples() {
        let a = causality_audit(&psi(), 0.0).unwrap();
        assert!((a.total - 1.5).abs() < 1e-12 && (a.excess - 0.5).abs() < 1e-12);
        assert!(a.violates_conservation);

        let a = causality_audit(&psi(), PI).unwrap();
        assert!((a.total - 0.5).abs() < 1e-12 && (a.excess + 0.5).abs() < 1e-12);
        assert!(!a.violates_conservation);

        let a = causality_audit(&ket(ModeLabel::H), 0.0).unwrap();
        assert!((a.total - 1.0).abs() < 1e-12 && a.excess.abs() < 1e-12);
        assert!(!a.violates_conservation);
    }

    #[test]
    fn region_labels() {
        assert_eq!(region_of(ModeLabel::A), "l");
        assert_eq!(region_of(ModeLabel::B), "m");
        assert_eq!(region_of(ModeLabel::H), "p");
    }
}
