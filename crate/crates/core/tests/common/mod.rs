#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tribeam::circuitspec::{CircuitSpec, Detectors, Element, Placement, Source};
use tribeam::hilbert::{Basis, ModeLabel, StateVector};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Normalized random state on `{a, b, h}`.
pub fn unit_state() -> impl Strategy<Value = StateVector> {
    prop::array::uniform6(-1.0f64..1.0)
        .prop_filter("nonzero", |x| x.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|x| {
            StateVector::new(
                Basis::beams(),
                vec![c(x[0], x[1]), c(x[2], x[3]), c(x[4], x[5])],
            )
            .unwrap()
            .normalized()
            .unwrap()
        })
}

/// Normalized random state supported on `{a, b}` only.
pub fn ab_state() -> impl Strategy<Value = StateVector> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("nonzero", |x| x.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|x| {
            StateVector::new(
                Basis::beams(),
                vec![c(x[0], x[1]), c(x[2], x[3]), c(0.0, 0.0)],
            )
            .unwrap()
            .normalized()
            .unwrap()
        })
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        prop::num::f64::NORMAL,
        Just(0.0),
        Just(-0.0),
        Just(1e-300),
    ]
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![
        1e-6f64..1e6,
        prop::num::f64::POSITIVE.prop_filter("finite", |v| v.is_finite() && *v > 0.0)
    ]
}

fn ratio() -> impl Strategy<Value = f64> {
    prop_oneof![
        (1e-12f64..1.0).prop_filter("open interval", |r| *r > 0.0 && *r < 1.0),
        Just(0.5),
    ]
}

fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_-]{0,8}"
}

fn leg() -> impl Strategy<Value = ModeLabel> {
    prop_oneof![Just(ModeLabel::A), Just(ModeLabel::B)]
}

fn element() -> impl Strategy<Value = Element> {
    prop_oneof![
        (ident(), ratio()).prop_map(|(id, ratio)| Element::Splitter { id, ratio }),
        (ident(), finite()).prop_map(|(id, angle)| Element::Mirror { id, angle }),
        (leg(), finite()).prop_map(|(leg, compensation)| Element::Plc { leg, compensation }),
        (leg(), finite()).prop_map(|(leg, phi)| Element::PhaseShifter { leg, phi }),
    ]
}

/// Any circuit the parser accepts (not necessarily physically valid).
pub fn circuit_spec() -> impl Strategy<Value = CircuitSpec> {
    (
        positive(),
        positive(),
        prop::collection::vec(element(), 0..8),
        prop_oneof![Just(Placement::DA1), Just(Placement::DA2)],
        prop_oneof![Just(ModeLabel::A), Just(ModeLabel::B), Just(ModeLabel::H)],
        finite(),
    )
        .prop_map(|(width, rate, elements, alice, bob_arm, fold_angle)| {
            let mut seen = Vec::new();
            let elements = elements
                .into_iter()
                .filter(|e| match e {
                    Element::Splitter { id, .. } | Element::Mirror { id, .. } => {
                        if seen.contains(id) {
                            false
                        } else {
                            seen.push(id.clone());
                            true
                        }
                    }
                    _ => true,
                })
                .collect();
            CircuitSpec {
                source: Source { width, rate },
                elements,
                detectors: Detectors { alice, bob_arm },
                fold_angle,
            }
        })
}

const FRAGMENTS: &[&[u8]] = &[
    b"source",
    b"splitter",
    b"mirror",
    b"plc",
    b"phase",
    b"detector",
    b"geometry",
    b"preset",
    b"paper-fig1",
    b"alice",
    b"bob",
    b"w=",
    b"rate=",
    b"ratio=",
    b"angle=",
    b"compensation=",
    b"phi=",
    b"placement=DA2",
    b"arm=h",
    b"fold_angle=",
    b"1.5e3",
    b"-0.",
    b".5",
    b"=",
    b"#",
    b" ",
    b"\t",
    b"\n",
    b"\r\n",
    b"BS1",
    b"a",
    b"b",
    b"\xff",
    b"\xc3\xa9",
    b"\xe2\x80",
];

const SEED_DOC: &[u8] = b"source w=1 rate=1\ngeometry fold_angle=60\nsplitter BS1 ratio=0.5\n\
splitter BS2 ratio=0.5\nplc a compensation=0\nphase b phi=0\n\
detector alice placement=DA2\ndetector bob arm=h\n";

/// Random byte strings: either fragments of the grammar mixed with raw
/// bytes, or a valid document with a few bytes overwritten or dropped.
pub fn fuzz_input(rng: &mut ChaCha8Rng) -> Vec<u8> {
    if rng.next_u32().is_multiple_of(2) {
        let mut doc = SEED_DOC.to_vec();
        for _ in 0..rng.next_u32() % 3 {
            let at = rng.next_u32() as usize % doc.len();
            if rng.next_u32().is_multiple_of(2) {
                doc[at] = rng.next_u32() as u8;
            } else {
                doc.remove(at);
            }
        }
        return doc;
    }
    let len = (rng.next_u32() % 24) as usize;
    let mut out = Vec::new();
    for _ in 0..len {
        if rng.next_u32().is_multiple_of(3) {
            out.push(rng.next_u32() as u8);
        } else {
            out.extend_from_slice(FRAGMENTS[rng.next_u32() as usize % FRAGMENTS.len()]);
        }
    }
    out
}

pub fn fuzz_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
