//! Interferometer output state, detector field modes and the weak-source
//! first-order correlation engine.
//!
//! Beam profiles are top-hat: the amplitude density is uniform across a
//! beam, so every integral over a detector width reduces to
//! `|amplitude density|² · width`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use thiserror::Error;

pub use crate::circuitspec::Placement;

use crate::circuitspec::CircuitSpec;
use crate::hilbert::{inner_product, Basis, HilbertError, ModeLabel, StateVector};

pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("splitter ratio {0} does not describe a unitary 50/50-type splitter")]
    NonUnitary(f64),
    #[error("unsupported topology: {0} splitters")]
    Topology(usize),
    #[error("leg `{0}` is required by this detector placement")]
    MissingLeg(ModeLabel),
    #[error("detector width must be positive, got {0}")]
    Width(f64),
}

pub type Result<T> = std::result::Result<T, OpticsError>;

/// Beam width before and after folding, with the matching amplitude
/// densities (`λ² · width = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub width: f64,
    /// degrees
    pub fold_angle: f64,
    pub width_prime: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
}

impl BeamGeometry {
    pub fn new(width: f64, fold_angle: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(OpticsError::Geometry(format!(
                "width {width} must be positive"
            )));
        }
        if !(fold_angle > 45.0 && fold_angle < 90.0) {
            return Err(OpticsError::Geometry(format!(
                "fold angle {fold_angle} outside (45, 90)"
            )));
        }
        let width_prime = width / (90.0 - fold_angle).to_radians().cos();
        Ok(BeamGeometry {
            width,
            fold_angle,
            width_prime,
            lambda: width.sqrt().recip(),
            lambda_prime: width_prime.sqrt().recip(),
        })
    }

    pub fn from_circuit(spec: &CircuitSpec) -> Result<Self> {
        BeamGeometry::new(spec.source.width, spec.fold_angle)
    }

    /// Width of the detector that registers `label` in the given arrangement:
    /// the folded width for Alice's beams, the raw width for `h`.
    pub fn detector_width(&self, label: ModeLabel) -> f64 {
        match label {
            ModeLabel::H | ModeLabel::Vac => self.width,
            ModeLabel::A | ModeLabel::B => self.width_prime,
        }
    }
}

/// `|Ψ⟩ = |vac⟩ + ε Σ c_X |X⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakSourceState {
    pub epsilon: f64,
    /// relative amplitudes `c_X` on the beam basis
    pub mode_amplitudes: StateVector,
}

impl WeakSourceState {
    /// Weak-source form of a normalized beam state. The relative amplitudes
    /// are `c = 2ψ`, which gives `c_a = c_b = 1, c_h = √2` for the two-splitter
    /// circuit.
    pub fn from_output_state(psi: &StateVector, epsilon: f64) -> Self {
        WeakSourceState {
            epsilon,
            mode_amplitudes: psi.scaled(Complex64::new(2.0, 0.0)),
        }
    }

    /// The full field state on `{vac, a, b, h}`. Not normalized.
    pub fn field_state(&self) -> Result<StateVector> {
        let mut pairs = vec![(ModeLabel::Vac, Complex64::new(1.0, 0.0))];
        for (&l, &c) in self
            .mode_amplitudes
            .basis()
            .labels()
            .iter()
            .zip(self.mode_amplitudes.amplitudes())
        {
            pairs.push((l, c * self.epsilon));
        }
        Ok(StateVector::from_pairs(Basis::with_vacuum(), &pairs)?)
    }
}

/// Wavenumber, per-leg path lengths to the detection region and the extra
/// phase of the shifter on leg `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub wavenumber: f64,
    pub path_lengths: BTreeMap<ModeLabel, f64>,
    pub phi: f64,
}

impl PathConfig {
    /// Both legs present with equal lengths, unit wavelength.
    pub fn compensated(phi: f64) -> Self {
        PathConfig {
            wavenumber: TAU,
            path_lengths: BTreeMap::from([(ModeLabel::A, 1.0), (ModeLabel::B, 1.0)]),
            phi,
        }
    }

    /// Unit wavelength, nominal legs of equal length; each PLC lengthens its
    /// leg by `compensation` wavelengths, phase shifters on `b` count
    /// negatively against the relative phase.
    pub fn from_circuit(spec: &CircuitSpec) -> Self {
        let mut path_lengths = BTreeMap::new();
        let n = spec.splitter_ratios().len();
        if n >= 1 {
            path_lengths.insert(ModeLabel::A, 1.0 + spec.compensation_on(ModeLabel::A));
        }
        if n >= 2 {
            path_lengths.insert(ModeLabel::B, 1.0 + spec.compensation_on(ModeLabel::B));
        }
        PathConfig {
            wavenumber: TAU,
            path_lengths,
            phi: spec.phase_on(ModeLabel::A) - spec.phase_on(ModeLabel::B),
        }
    }

    fn leg(&self, label: ModeLabel) -> Result<f64> {
        self.path_lengths
            .get(&label)
            .copied()
            .ok_or(OpticsError::MissingLeg(label))
    }

    /// `k (r_a − r_b) + φ`, reduced to `(−π, π]`.
    pub fn relative_phase(&self) -> Result<f64> {
        let raw = self.wavenumber * (self.leg(ModeLabel::A)? - self.leg(ModeLabel::B)?) + self.phi;
        let mut p = raw.rem_euclid(TAU);
        if p > PI {
            p -= TAU;
        }
        Ok(p)
    }
}

/// Region label of the detector that registers a single beam under `DA1`
/// (`l`, `m`) or Bob's region `p`.
pub fn region_of(arm: ModeLabel) -> &'static str {
    match arm {
        ModeLabel::A => "l",
        ModeLabel::B => "m",
        ModeLabel::H | ModeLabel::Vac => "p",
    }
}

/// Beam state after the splitters, on `{a, b, h}`.
pub fn build_output_state(circuit: &CircuitSpec) -> Result<StateVector> {
    let ratios = circuit.splitter_ratios();
    if ratios.is_empty() || ratios.len() > 2 {
        return Err(OpticsError::Topology(ratios.len()));
    }
    if let Some(&r) = ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(OpticsError::NonUnitary(r));
    }
    let upper = ratios[0].sqrt();
    let h = (1.0 - ratios[0]).sqrt();
    let (a, b) = match ratios.get(1) {
        Some(&r2) => (upper * r2.sqrt(), upper * (1.0 - r2).sqrt()),
        None => (upper, 0.0),
    };
    Ok(StateVector::new(
        Basis::beams(),
        vec![
            Complex64::new(a, 0.0),
            Complex64::new(b, 0.0),
            Complex64::new(h, 0.0),
        ],
    )?)
}

/// Detector field mode vectors `v` on `{a, b, h}`; a detector's
/// positive-frequency field acting on a state gives amplitude `⟨v|·⟩`.
///
/// `DA1` yields the two singleton modes, `DA2` the single interfering mode
/// `e^{iδ}|a⟩ + |b⟩` with `δ = k(r_a − r_b) + φ` (global phase dropped).
pub fn detector_field_mode(placement: Placement, cfg: &PathConfig) -> Result<Vec<StateVector>> {
    let basis = Basis::beams();
    match placement {
        Placement::DA1 => {
            let legs: Vec<_> = [ModeLabel::A, ModeLabel::B]
                .into_iter()
                .filter(|l| cfg.path_lengths.contains_key(l))
                .collect();
            if legs.is_empty() {
                return Err(OpticsError::MissingLeg(ModeLabel::A));
            }
            legs.into_iter()
                .map(|l| Ok(StateVector::ket(basis.clone(), l)?))
                .collect()
        }
        Placement::DA2 => {
            let delta = cfg.relative_phase()?;
            Ok(vec![StateVector::from_pairs(
                basis,
                &[
                    (ModeLabel::A, Complex64::from_polar(1.0, delta)),
                    (ModeLabel::B, Complex64::new(1.0, 0.0)),
                ],
            )?])
        }
    }
}

/// Interfering DA2 mode for a bare relative phase.
pub fn interfering_mode(phi: f64) -> StateVector {
    detector_field_mode(Placement::DA2, &PathConfig::compensated(phi))
        .expect("compensated config has both legs")
        .remove(0)
}

/// `∫⟨E⁻E⁺⟩dz` over a detector of the given width.
///
/// With a uniform amplitude density `1/√width` the integrand is constant and
/// the width cancels, leaving `ε² |⟨field|c⟩|²`.
pub fn first_order_correlation(
    state: &WeakSourceState,
    field: &StateVector,
    width: f64,
) -> Result<f64> {
    if !(width.is_finite() && width > 0.0) {
        return Err(OpticsError::Width(width));
    }
    let amplitude = inner_product(field, &state.mode_amplitudes)?;
    let density_sqr = 1.0 / width;
    let intensity = density_sqr * state.epsilon * state.epsilon * amplitude.norm_sqr();
    Ok(intensity * width)
}

/// Integrated correlation `∫⟨E⁻E⁺⟩dz` at every detector of a placement,
/// labeled by region: `l`, `m` (or `k` for `DA2`) on Alice's side and `p`
/// for Bob on `h`.
pub fn placement_correlations(
    state: &WeakSourceState,
    placement: Placement,
    cfg: &PathConfig,
    geometry: &BeamGeometry,
) -> Result<Vec<(&'static str, f64)>> {
    let modes = detector_field_mode(placement, cfg)?;
    let mut out = Vec::with_capacity(modes.len() + 1);
    for mode in &modes {
        let label = match placement {
            Placement::DA2 => "k",
            Placement::DA1 => {
                if mode.amplitude(ModeLabel::A).norm() > 0.0 {
                    region_of(ModeLabel::A)
                } else {
                    region_of(ModeLabel::B)
                }
            }
        };
        let width = geometry.detector_width(ModeLabel::A);
        out.push((label, first_order_correlation(state, mode, width)?));
    }
    let bob = StateVector::ket(Basis::beams(), ModeLabel::H)?;
    out.push((
        region_of(ModeLabel::H),
        first_order_correlation(state, &bob, geometry.detector_width(ModeLabel::H))?,
    ));
    Ok(out)
}
