//! Simulator for a three-beam single-photon interferometer in which Alice
//! either registers her two beams separately or lets them interfere at a
//! single detector, and Bob counts clicks on the third beam.
//!
//! * [`hilbert`]: states, operators, projectors and completeness checks
//! * [`optics`]: splitter chain, detector field modes, weak-source correlations
//! * [`measurement`]: detection models, renormalization, double slit, audits
//! * [`montecarlo`]: seeded click sampling and one-bit decoding
//! * [`circuitspec`]: the circuit description format
//! * [`cli`]: the `tribeam` command line

pub mod circuitspec;
pub mod cli;
pub mod hilbert;
pub mod measurement;
pub mod montecarlo;
pub mod optics;
