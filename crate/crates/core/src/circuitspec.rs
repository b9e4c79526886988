//! Textual description of the interferometer.
//!
//! The format is line oriented, one statement per line, `#` starts a comment
//! that runs to the end of the line, and LF or CRLF line endings are both
//! accepted:
//!
//! ```text
//! document  := { line } ;
//! line      := ( statement | comment | blank ) ;
//! statement := "source" kv kv
//!            | "splitter" IDENT [ kv ]
//!            | "mirror" IDENT kv
//!            | "plc" IDENT kv
//!            | "phase" IDENT [ kv ]
//!            | "detector" IDENT kv
//!            | "geometry" kv
//!            | "preset" IDENT ;
//! kv        := KEY "=" NUMBER | KEY "=" IDENT ;
//! ```
//!
//! Recognized keys per statement:
//!
//! | statement              | keys                          | default      |
//! |------------------------|-------------------------------|--------------|
//! | `source`               | `w` (> 0), `rate` (> 0)       | required     |
//! | `splitter <id>`        | `ratio` in (0, 1)             | `0.5`        |
//! | `mirror <id>`          | `angle` (degrees)             | required     |
//! | `plc <a\|b>`           | `compensation` (wavelengths)  | required     |
//! | `phase <a\|b>`         | `phi` (radians)               | `0`          |
//! | `detector alice`       | `placement` = `DA1` \| `DA2`  | required     |
//! | `detector bob`         | `arm` = `a` \| `b` \| `h`     | `h`          |
//! | `geometry`             | `fold_angle` (degrees)        | `60`         |
//! | `preset <name>`        | only `paper-fig1`             |              |
//!
//! The first splitter is the source splitter (upper output towards the
//! second splitter, lower output is beam `h`); the second one splits the
//! upper beam into `a` and `b`. `ratio` is the intensity fraction sent to the
//! upper output and to `a` respectively.
//!
//! `preset paper-fig1` supplies the two 50/50 splitters, unit width and rate,
//! `DA2` placement and Bob on `h`. Statements anywhere in the document
//! override the matching preset entry.

use std::fmt::{self, Write as _};
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::hilbert::ModeLabel;

pub const DEFAULT_RATIO: f64 = 0.5;
pub const DEFAULT_FOLD_ANGLE: f64 = 60.0;
pub const PAPER_PRESET: &str = "paper-fig1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Source {
    pub width: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    Splitter { id: String, ratio: f64 },
    Mirror { id: String, angle: f64 },
    Plc { leg: ModeLabel, compensation: f64 },
    PhaseShifter { leg: ModeLabel, phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Placement {
    DA1,
    DA2,
}

impl Placement {
    pub fn as_str(self) -> &'static str {
        match self {
            Placement::DA1 => "DA1",
            Placement::DA2 => "DA2",
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detectors {
    pub alice: Placement,
    pub bob_arm: ModeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitSpec {
    pub source: Source,
    pub elements: Vec<Element>,
    pub detectors: Detectors,
    pub fold_angle: f64,
}

impl CircuitSpec {
    /// Two 50/50 splitters, `DA2` placement, Bob on `h`.
    pub fn paper_fig1() -> Self {
        CircuitSpec {
            source: Source {
                width: 1.0,
                rate: 1.0,
            },
            elements: vec![
                Element::Splitter {
                    id: "BS1".into(),
                    ratio: DEFAULT_RATIO,
                },
                Element::Splitter {
                    id: "BS2".into(),
                    ratio: DEFAULT_RATIO,
                },
            ],
            detectors: Detectors {
                alice: Placement::DA2,
                bob_arm: ModeLabel::H,
            },
            fold_angle: DEFAULT_FOLD_ANGLE,
        }
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.detectors.alice = placement;
        self
    }

    /// Splitter ratios in declaration order.
    pub fn splitter_ratios(&self) -> Vec<f64> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Splitter { ratio, .. } => Some(*ratio),
                _ => None,
            })
            .collect()
    }

    /// Sum of phase shifter settings on `leg`.
    pub fn phase_on(&self, leg: ModeLabel) -> f64 {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::PhaseShifter { leg: l, phi } if *l == leg => Some(*phi),
                _ => None,
            })
            .sum()
    }

    /// Sum of PLC compensations (in wavelengths) on `leg`.
    pub fn compensation_on(&self, leg: ModeLabel) -> f64 {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Plc {
                    leg: l,
                    compensation,
                } if *l == leg => Some(*compensation),
                _ => None,
            })
            .sum()
    }

    /// Canonical text form; `parse(&spec.to_text())` reproduces `spec`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "source w={} rate={}",
            self.source.width, self.source.rate
        );
        let _ = writeln!(out, "geometry fold_angle={}", self.fold_angle);
        for e in &self.elements {
            let _ = match e {
                Element::Splitter { id, ratio } => writeln!(out, "splitter {id} ratio={ratio}"),
                Element::Mirror { id, angle } => writeln!(out, "mirror {id} angle={angle}"),
                Element::Plc { leg, compensation } => {
                    writeln!(out, "plc {leg} compensation={compensation}")
                }
                Element::PhaseShifter { leg, phi } => writeln!(out, "phase {leg} phi={phi}"),
            };
        }
        let _ = writeln!(out, "detector alice placement={}", self.detectors.alice);
        let _ = writeln!(out, "detector bob arm={}", self.detectors.bob_arm);
        out
    }
}

/// First problem found in a document. `line` and `column` are 1-based,
/// `span` is the byte range of `token` in the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message} (at `{token}`)")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub token: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    /// byte offset in the whole document
    start: usize,
    line: usize,
    column: usize,
}

struct Cursor<'a> {
    line: usize,
    line_start: usize,
    line_text: &'a str,
}

impl<'a> Cursor<'a> {
    fn tokens(&self) -> Vec<Token<'a>> {
        let mut toks = Vec::new();
        let mut start = None;
        for (i, ch) in self.line_text.char_indices() {
            if ch == ' ' || ch == '\t' {
                if let Some(s) = start.take() {
                    toks.push(self.token(s, i));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            toks.push(self.token(s, self.line_text.len()));
        }
        toks
    }

    fn token(&self, s: usize, e: usize) -> Token<'a> {
        Token {
            text: &self.line_text[s..e],
            start: self.line_start + s,
            line: self.line,
            column: self.line_text[..s].chars().count() + 1,
        }
    }
}

fn error_at(tok: &Token<'_>, message: impl Into<String>) -> ParseError {
    ParseError {
        line: tok.line,
        column: tok.column,
        message: message.into(),
        token: tok.text.to_string(),
        span: tok.start..tok.start + tok.text.len(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn is_number(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

struct KeyValue<'a> {
    key: &'a str,
    value: &'a str,
    tok: Token<'a>,
}

fn split_kv<'a>(tok: &Token<'a>) -> Result<KeyValue<'a>, ParseError> {
    let (key, value) = tok
        .text
        .split_once('=')
        .ok_or_else(|| error_at(tok, "expected KEY=VALUE"))?;
    if !is_ident(key) || key.contains('-') {
        return Err(error_at(tok, "malformed key"));
    }
    if value.is_empty() {
        return Err(error_at(tok, "missing value"));
    }
    Ok(KeyValue {
        key,
        value,
        tok: *tok,
    })
}

impl KeyValue<'_> {
    fn number(&self) -> Result<f64, ParseError> {
        if !is_number(self.value) {
            return Err(error_at(
                &self.tok,
                format!("`{}` expects a number", self.key),
            ));
        }
        let v: f64 = self
            .value
            .parse()
            .map_err(|_| error_at(&self.tok, "unreadable number"))?;
        if !v.is_finite() {
            return Err(error_at(&self.tok, "number out of range"));
        }
        Ok(v)
    }

    fn ident(&self) -> Result<&str, ParseError> {
        if !is_ident(self.value) {
            return Err(error_at(
                &self.tok,
                format!("`{}` expects an identifier", self.key),
            ));
        }
        Ok(self.value)
    }
}

/// Fields accumulated while reading; explicit statements and preset values
/// are kept apart so explicit ones can override the preset.
#[derive(Default)]
struct Draft {
    source: Option<Source>,
    fold_angle: Option<f64>,
    alice: Option<Placement>,
    bob_arm: Option<ModeLabel>,
    elements: Vec<Element>,
    preset: Option<CircuitSpec>,
}

fn leg_of(tok: &Token<'_>) -> Result<ModeLabel, ParseError> {
    match tok.text {
        "a" => Ok(ModeLabel::A),
        "b" => Ok(ModeLabel::B),
        _ => Err(error_at(tok, "leg must be `a` or `b`")),
    }
}

fn expect_count(toks: &[Token<'_>], min: usize, max: usize, what: &str) -> Result<(), ParseError> {
    if toks.len() - 1 < min {
        return Err(error_at(
            &toks[0],
            format!("`{what}` needs {min} argument(s)"),
        ));
    }
    if toks.len() - 1 > max {
        return Err(error_at(&toks[max + 1], "unexpected extra argument"));
    }
    Ok(())
}

fn single_kv<'a>(
    toks: &[Token<'a>],
    at: usize,
    key: &str,
) -> Result<Option<KeyValue<'a>>, ParseError> {
    let Some(tok) = toks.get(at) else {
        return Ok(None);
    };
    let kv = split_kv(tok)?;
    if kv.key != key {
        return Err(error_at(tok, format!("unknown key `{}`", kv.key)));
    }
    Ok(Some(kv))
}

fn statement(draft: &mut Draft, toks: &[Token<'_>]) -> Result<(), ParseError> {
    let head = &toks[0];
    match head.text {
        "source" => {
            expect_count(toks, 2, 2, "source")?;
            if draft.source.is_some() {
                return Err(error_at(head, "duplicate source statement"));
            }
            let (mut w, mut rate) = (None, None);
            for tok in &toks[1..] {
                let kv = split_kv(tok)?;
                let slot = match kv.key {
                    "w" => &mut w,
                    "rate" => &mut rate,
                    other => return Err(error_at(tok, format!("unknown key `{other}`"))),
                };
                if slot.is_some() {
                    return Err(error_at(tok, format!("duplicate key `{}`", kv.key)));
                }
                let v = kv.number()?;
                if v <= 0.0 {
                    return Err(error_at(tok, format!("`{}` must be positive", kv.key)));
                }
                *slot = Some(v);
            }
            draft.source = Some(Source {
                width: w.expect("two distinct keys"),
                rate: rate.expect("two distinct keys"),
            });
        }
        "splitter" | "mirror" => {
            let is_splitter = head.text == "splitter";
            expect_count(toks, if is_splitter { 1 } else { 2 }, 2, head.text)?;
            let id_tok = &toks[1];
            if !is_ident(id_tok.text) {
                return Err(error_at(id_tok, "malformed identifier"));
            }
            let taken = draft.elements.iter().any(|e| match e {
                Element::Splitter { id, .. } | Element::Mirror { id, .. } => id == id_tok.text,
                _ => false,
            });
            if taken {
                return Err(error_at(id_tok, "duplicate element id"));
            }
            let id = id_tok.text.to_string();
            if is_splitter {
                let ratio = match single_kv(toks, 2, "ratio")? {
                    Some(kv) => {
                        let r = kv.number()?;
                        if !(r > 0.0 && r < 1.0) {
                            return Err(error_at(&kv.tok, "ratio must lie in (0, 1)"));
                        }
                        r
                    }
                    None => DEFAULT_RATIO,
                };
                draft.elements.push(Element::Splitter { id, ratio });
            } else {
                let angle = single_kv(toks, 2, "angle")?
                    .expect("count checked")
                    .number()?;
                draft.elements.push(Element::Mirror { id, angle });
            }
        }
        "plc" => {
            expect_count(toks, 2, 2, "plc")?;
            let leg = leg_of(&toks[1])?;
            let compensation = single_kv(toks, 2, "compensation")?
                .expect("count checked")
                .number()?;
            draft.elements.push(Element::Plc { leg, compensation });
        }
        "phase" => {
            expect_count(toks, 1, 2, "phase")?;
            let leg = leg_of(&toks[1])?;
            let phi = match single_kv(toks, 2, "phi")? {
                Some(kv) => kv.number()?,
                None => 0.0,
            };
            draft.elements.push(Element::PhaseShifter { leg, phi });
        }
        "detector" => {
            expect_count(toks, 2, 2, "detector")?;
            let who = &toks[1];
            match who.text {
                "alice" => {
                    if draft.alice.is_some() {
                        return Err(error_at(who, "duplicate alice detector"));
                    }
                    let kv = single_kv(toks, 2, "placement")?.expect("count checked");
                    draft.alice = Some(match kv.ident()? {
                        "DA1" => Placement::DA1,
                        "DA2" => Placement::DA2,
                        _ => return Err(error_at(&kv.tok, "placement must be DA1 or DA2")),
                    });
                }
                "bob" => {
                    if draft.bob_arm.is_some() {
                        return Err(error_at(who, "duplicate bob detector"));
                    }
                    let kv = single_kv(toks, 2, "arm")?.expect("count checked");
                    draft.bob_arm = Some(match kv.ident()? {
                        "a" => ModeLabel::A,
                        "b" => ModeLabel::B,
                        "h" => ModeLabel::H,
                        _ => return Err(error_at(&kv.tok, "arm must be a, b or h")),
                    });
                }
                _ => return Err(error_at(who, "detector must be `alice` or `bob`")),
            }
        }
        "geometry" => {
            expect_count(toks, 1, 1, "geometry")?;
            if draft.fold_angle.is_some() {
                return Err(error_at(head, "duplicate geometry statement"));
            }
            let kv = single_kv(toks, 1, "fold_angle")?.expect("count checked");
            draft.fold_angle = Some(kv.number()?);
        }
        "preset" => {
            expect_count(toks, 1, 1, "preset")?;
            if draft.preset.is_some() {
                return Err(error_at(head, "duplicate preset statement"));
            }
            if toks[1].text != PAPER_PRESET {
                return Err(error_at(&toks[1], "unknown preset"));
            }
            draft.preset = Some(CircuitSpec::paper_fig1());
        }
        _ => return Err(error_at(head, "unknown statement")),
    }
    Ok(())
}

fn finish(draft: Draft, text: &str) -> Result<CircuitSpec, ParseError> {
    let eof = || {
        let line = text.split('\n').count().max(1);
        ParseError {
            line,
            column: 1,
            message: String::new(),
            token: String::new(),
            span: text.len()..text.len(),
        }
    };
    let preset = draft.preset;
    let source = draft
        .source
        .or(preset.as_ref().map(|p| p.source))
        .ok_or_else(|| ParseError {
            message: "missing source statement".into(),
            ..eof()
        })?;
    let alice = draft
        .alice
        .or(preset.as_ref().map(|p| p.detectors.alice))
        .ok_or_else(|| ParseError {
            message: "missing `detector alice` statement".into(),
            ..eof()
        })?;
    let bob_arm = draft
        .bob_arm
        .or(preset.as_ref().map(|p| p.detectors.bob_arm))
        .unwrap_or(ModeLabel::H);
    let fold_angle = draft
        .fold_angle
        .or(preset.as_ref().map(|p| p.fold_angle))
        .unwrap_or(DEFAULT_FOLD_ANGLE);

    let elements = match preset {
        None => draft.elements,
        Some(p) => {
            // explicit splitters replace preset splitters with the same id in place
            let mut explicit = draft.elements;
            let mut merged = Vec::new();
            for pe in p.elements {
                if let Element::Splitter { id, .. } = &pe {
                    if let Some(pos) = explicit
                        .iter()
                        .position(|e| matches!(e, Element::Splitter { id: eid, .. } if eid == id))
                    {
                        merged.push(explicit.remove(pos));
                        continue;
                    }
                }
                merged.push(pe);
            }
            merged.extend(explicit);
            merged
        }
    };

    Ok(CircuitSpec {
        source,
        elements,
        detectors: Detectors { alice, bob_arm },
        fold_angle,
    })
}

pub fn parse(text: &str) -> Result<CircuitSpec, ParseError> {
    let mut draft = Draft::default();
    let mut offset = 0;
    for (i, raw) in text.split('\n').enumerate() {
        let line_start = offset;
        offset += raw.len() + 1;
        let body = raw.strip_suffix('\r').unwrap_or(raw);
        let body = match body.find('#') {
            Some(p) => &body[..p],
            None => body,
        };
        let cursor = Cursor {
            line: i + 1,
            line_start,
            line_text: body,
        };
        let toks = cursor.tokens();
        if toks.is_empty() {
            continue;
        }
        statement(&mut draft, &toks)?;
    }
    finish(draft, text)
}

/// Like [`parse`] but starts from raw bytes; invalid UTF-8 is reported at
/// the first offending byte.
pub fn parse_bytes(bytes: &[u8]) -> Result<CircuitSpec, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let good = std::str::from_utf8(&bytes[..e.valid_up_to()]).expect("valid prefix");
            let line = good.matches('\n').count() + 1;
            let line_start = good.rfind('\n').map_or(0, |p| p + 1);
            let column = good[line_start..].chars().count() + 1;
            let bad_len = e.error_len().unwrap_or(bytes.len() - e.valid_up_to());
            let span = e.valid_up_to()..e.valid_up_to() + bad_len;
            Err(ParseError {
                line,
                column,
                message: "invalid UTF-8".into(),
                token: String::from_utf8_lossy(&bytes[span.clone()]).into_owned(),
                span,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub message: String,
}

fn violation(rule: &'static str, message: impl Into<String>) -> Violation {
    Violation {
        rule,
        message: message.into(),
    }
}

/// Physical-setup checks. An empty list means the element chain is unitary
/// and every declared detector sees a populated arm.
pub fn validate(spec: &CircuitSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = spec.source;
    if !(s.width.is_finite() && s.width > 0.0) {
        out.push(violation(
            "source",
            "beam width must be positive and finite",
        ));
    }
    if !(s.rate.is_finite() && s.rate > 0.0) {
        out.push(violation(
            "source",
            "input rate must be positive and finite",
        ));
    }

    let ratios = spec.splitter_ratios();
    match ratios.len() {
        0 => out.push(violation("topology", "at least one splitter is required")),
        1 | 2 => {}
        n => out.push(violation(
            "topology",
            format!("{n} splitters declared; at most two are supported"),
        )),
    }
    for e in &spec.elements {
        match e {
            Element::Splitter { id, ratio } if !(*ratio > 0.0 && *ratio < 1.0) => {
                out.push(violation(
                    "unitarity",
                    format!("splitter {id} ratio {ratio} is outside (0, 1)"),
                ));
            }
            Element::Mirror { id, angle } if !angle.is_finite() => {
                out.push(violation(
                    "geometry",
                    format!("mirror {id} angle is not finite"),
                ));
            }
            Element::Plc { leg, compensation } if !compensation.is_finite() => {
                out.push(violation("path", format!("plc on {leg} is not finite")));
            }
            Element::PhaseShifter { leg, phi } if !phi.is_finite() => {
                out.push(violation("path", format!("phase on {leg} is not finite")));
            }
            _ => {}
        }
    }

    if !(spec.fold_angle > 45.0 && spec.fold_angle < 90.0) {
        out.push(violation(
            "geometry",
            format!(
                "fold_angle {} outside (45, 90); the folded width w·sec(90° − fold_angle) degenerates",
                spec.fold_angle
            ),
        ));
    }

    let has_b = ratios.len() >= 2;
    if !has_b {
        if spec.detectors.alice == Placement::DA2 {
            out.push(violation(
                "detector",
                "DA2 interferes legs a and b but the second splitter is missing",
            ));
        }
        if spec.detectors.bob_arm == ModeLabel::B {
            out.push(violation("detector", "bob arm b is never populated"));
        }
        let b_elements = spec.elements.iter().any(|e| {
            matches!(
                e,
                Element::Plc {
                    leg: ModeLabel::B,
                    ..
                } | Element::PhaseShifter {
                    leg: ModeLabel::B,
                    ..
                }
            )
        });
        if b_elements {
            out.push(violation(
                "path",
                "element placed on leg b, which is never populated",
            ));
        }
    }
    if spec.detectors.alice == Placement::DA2 && spec.detectors.bob_arm != ModeLabel::H {
        out.push(violation(
            "detector",
            format!(
                "bob arm {} is consumed by the DA2 interference region",
                spec.detectors.bob_arm
            ),
        ));
    }
    out
}
