//! Command-line front end: argument definitions, report assembly and
//! rendering. The binary only parses arguments and calls [`execute`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::circuitspec::{parse_bytes, validate, CircuitSpec, Placement, Violation};
use crate::measurement::{
    causality_audit, double_slit_screen, outcome_distribution, region_of,
    screen_completeness_deviation, CausalityAudit, MeasurementModel, OutcomeDistribution,
    ScreenPoint,
};
use crate::montecarlo::{
    distinguish_bit, phase_sweep, sample_clicks, sample_clicks_stream, SignalDecision,
};
use crate::optics::{
    build_output_state, placement_correlations, BeamGeometry, PathConfig, WeakSourceState,
    DEFAULT_EPSILON,
};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "tribeam",
    version,
    about = "Three-beam interferometer simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic distribution, Monte Carlo counts and audits for the configured placement
    Simulate(SimulateArgs),
    /// Bob's rate against the DA2 phase shifter setting
    Sweep(SweepArgs),
    /// Double-slit screen fringe table and integrated weight
    Doubleslit(DoubleSlitArgs),
    /// Send a bit string by switching Alice's placement; decode from Bob's counts
    Signal(SignalArgs),
    /// Check a circuit description
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Circuit description file
    #[arg(long)]
    pub spec: PathBuf,
    /// Write output here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of simulated clicks
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Clicks per phase point
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// START:STOP:COUNT, half-open; values accept a `pi` suffix (`0:2pi:256`)
    #[arg(long, default_value = "0:2pi:16")]
    pub phi_grid: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DoubleSlitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of screen points
    #[arg(long, default_value_t = 1024)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SignalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Message, a string of 0 and 1
    #[arg(long)]
    pub bits: String,
    /// Clicks per bit
    #[arg(long, default_value_t = 10_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
}

/// Failure with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn runtime(err: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: err.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Reads, parses and validates a circuit file.
pub fn load_spec(path: &std::path::Path) -> CliResult<CircuitSpec> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let spec = parse_bytes(&bytes).map_err(|e| {
        CliError::input(format!(
            "{}:{}:{}: {} (at `{}`)",
            path.display(),
            e.line,
            e.column,
            e.message,
            e.token
        ))
    })?;
    let violations = validate(&spec);
    if !violations.is_empty() {
        let mut msg = format!("{}: invalid circuit", path.display());
        for v in &violations {
            let _ = write!(msg, "\n  [{}] {}", v.rule, v.message);
        }
        return Err(CliError::input(msg));
    }
    Ok(spec)
}

/// Measurement model selected by the circuit's detector placement.
pub fn model_for(spec: &CircuitSpec) -> CliResult<MeasurementModel> {
    Ok(match spec.detectors.alice {
        Placement::DA1 => MeasurementModel::CompleteDA1,
        Placement::DA2 => MeasurementModel::CoherentIncompleteDA2 {
            phi: PathConfig::from_circuit(spec)
                .relative_phase()
                .map_err(CliError::runtime)?,
        },
    })
}

#[derive(Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

const TOOL: ToolInfo = ToolInfo {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Debug, Serialize)]
pub struct Configuration {
    pub circuit: CircuitSpec,
    pub canonical_text: String,
    pub model: MeasurementModel,
}

#[derive(Debug, Serialize)]
pub struct MonteCarloSummary {
    pub n_trials: u64,
    pub seed: u64,
    pub counts: BTreeMap<String, u64>,
    pub frequencies: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct Audits {
    pub completeness_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub causality: Option<CausalityAudit>,
    /// Alice's unrenormalized rate plus Bob's pinned rate, in counts per
    /// unit time; only for DA2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterfactual_total_rate: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub command: &'static str,
    pub configuration: Configuration,
    pub analytic: OutcomeDistribution,
    pub renorm_beta: f64,
    /// `C · probability` per outcome
    pub rates: BTreeMap<String, f64>,
    pub bob_rate: f64,
    /// Weak-source `∫⟨E⁻E⁺⟩dz` per detector, in units of ε²
    pub correlation_per_epsilon_sqr: BTreeMap<String, f64>,
    pub monte_carlo: MonteCarloSummary,
    pub audits: Audits,
}

pub fn simulate_report(spec: &CircuitSpec, n: u64, seed: u64) -> CliResult<Report> {
    let model = model_for(spec)?;
    let psi = build_output_state(spec).map_err(CliError::runtime)?;
    let dist = outcome_distribution(&psi, &model).map_err(CliError::runtime)?;
    let counts = sample_clicks(&dist, n, seed).map_err(CliError::runtime)?;
    let c = spec.source.rate;

    let geometry = BeamGeometry::from_circuit(spec).map_err(CliError::runtime)?;
    let source = WeakSourceState::from_output_state(&psi, DEFAULT_EPSILON);
    let cfg = PathConfig::from_circuit(spec);
    let eps2 = DEFAULT_EPSILON * DEFAULT_EPSILON;
    let correlation_per_epsilon_sqr =
        placement_correlations(&source, spec.detectors.alice, &cfg, &geometry)
            .map_err(CliError::runtime)?
            .into_iter()
            .map(|(l, v)| (l.to_string(), v / eps2))
            .collect();

    let (causality, counterfactual_total_rate) = match model {
        MeasurementModel::CoherentIncompleteDA2 { phi } => {
            let audit = causality_audit(&psi, phi).map_err(CliError::runtime)?;
            (Some(audit), Some(audit.total * c))
        }
        _ => (None, None),
    };

    Ok(Report {
        tool: TOOL,
        command: "simulate",
        configuration: Configuration {
            circuit: spec.clone(),
            canonical_text: spec.to_text(),
            model,
        },
        rates: dist
            .outcomes
            .iter()
            .map(|o| (o.label.clone(), c * o.probability))
            .collect(),
        bob_rate: c * dist.probability(region_of(spec.detectors.bob_arm)),
        renorm_beta: dist.renorm_beta,
        correlation_per_epsilon_sqr,
        monte_carlo: MonteCarloSummary {
            n_trials: counts.n_trials,
            seed,
            frequencies: counts
                .counts
                .keys()
                .map(|l| (l.clone(), counts.frequency(l)))
                .collect(),
            counts: counts.counts,
        },
        audits: Audits {
            completeness_deviation: dist.completeness_deviation,
            causality,
            counterfactual_total_rate,
        },
        analytic: dist,
    })
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    s.push('\n');
    Ok(s)
}

fn render_simulate(report: &Report, format: Format) -> CliResult<String> {
    match format {
        Format::Json => to_json(report),
        Format::Csv => {
            let mut out = String::from("label,weight,probability,rate,count\n");
            for o in &report.analytic.outcomes {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    o.label,
                    o.weight,
                    o.probability,
                    report.rates[&o.label],
                    report
                        .monte_carlo
                        .counts
                        .get(&o.label)
                        .copied()
                        .unwrap_or(0)
                );
            }
            Ok(out)
        }
    }
}

fn parse_grid_value(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim_end_matches('*');
        let mult = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().ok()?,
        };
        mult * PI
    } else {
        s.parse::<f64>().ok()?
    };
    v.is_finite().then_some(v)
}

/// `START:STOP:COUNT` → `START + i (STOP − START)/COUNT` for `i < COUNT`.
pub fn parse_phi_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = || {
        CliError::input(format!(
            "bad --phi-grid `{text}`; expected START:STOP:COUNT"
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(bad());
    };
    let start = parse_grid_value(start).ok_or_else(bad)?;
    let stop = parse_grid_value(stop).ok_or_else(bad)?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(bad());
    }
    let step = (stop - start) / count as f64;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

fn sweep(spec: &CircuitSpec, args: &SweepArgs) -> CliResult<String> {
    if spec.detectors.alice != Placement::DA2 {
        return Err(CliError::input(
            "sweep needs `detector alice placement=DA2`",
        ));
    }
    let grid = parse_phi_grid(&args.phi_grid)?;
    // path mismatch left by the PLCs shifts every grid point
    let mut base = PathConfig::from_circuit(spec);
    base.phi = 0.0;
    let offset = base.relative_phase().map_err(CliError::runtime)?;
    let psi = build_output_state(spec).map_err(CliError::runtime)?;
    let shifted: Vec<f64> = grid.iter().map(|phi| phi + offset).collect();
    let mut rows = phase_sweep(&psi, &shifted, args.n, args.seed).map_err(CliError::runtime)?;
    let c = spec.source.rate;
    for (row, &phi) in rows.iter_mut().zip(&grid) {
        row.phi = phi;
        row.analytic_bob_rate *= c;
        row.empirical_bob_rate *= c;
        row.stderr *= c;
    }
    match args.format {
        Format::Csv => {
            let mut out = String::from("phi,analytic_bob_rate,empirical_bob_rate,stderr\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.phi, r.analytic_bob_rate, r.empirical_bob_rate, r.stderr
                );
            }
            Ok(out)
        }
        Format::Json => to_json(&rows),
    }
}

#[derive(Debug, Serialize)]
struct DoubleSlitReport {
    tool: ToolInfo,
    command: &'static str,
    n_points: usize,
    points: Vec<ScreenPoint>,
    integrated_weight: f64,
    standard_sum_weight: f64,
    screen_completeness_deviation: f64,
    integrated_rate: f64,
}

fn doubleslit(spec: &CircuitSpec, args: &DoubleSlitArgs) -> CliResult<String> {
    let n_points = usize::try_from(args.n).map_err(|_| CliError::input("--n too large"))?;
    if n_points < 2 {
        return Err(CliError::input("doubleslit needs --n >= 2 screen points"));
    }
    let psi = build_output_state(spec).map_err(CliError::runtime)?;
    let pattern = double_slit_screen(&psi, n_points).map_err(CliError::runtime)?;
    let control = outcome_distribution(&psi, &MeasurementModel::StandardSumControl)
        .map_err(CliError::runtime)?;
    match args.format {
        Format::Json => to_json(&DoubleSlitReport {
            tool: TOOL,
            command: "doubleslit",
            n_points,
            integrated_rate: pattern.integrated_weight * spec.source.rate,
            integrated_weight: pattern.integrated_weight,
            points: pattern.points,
            standard_sum_weight: control.weight("k"),
            screen_completeness_deviation: screen_completeness_deviation(n_points)
                .map_err(CliError::runtime)?,
        }),
        Format::Csv => {
            let mut out = String::from("delta,intensity\n");
            for p in &pattern.points {
                let _ = writeln!(out, "{},{}", p.delta, p.intensity);
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SignalEntry {
    pub index: usize,
    pub sent_bit: u8,
    pub alice_placement: Placement,
    pub bob_counts: u64,
    pub decision: SignalDecision,
}

#[derive(Debug, Serialize)]
pub struct Transcript {
    pub tool: ToolInfo,
    pub command: &'static str,
    pub message: String,
    pub n_per_bit: u64,
    pub seed: u64,
    pub phi: f64,
    pub entries: Vec<SignalEntry>,
    pub decoded: String,
    pub bit_errors: usize,
    pub bit_error_rate: f64,
}

/// One bit per block of `n` clicks: `0` → Alice at DA1, `1` → DA2. Block
/// `i` draws from ChaCha stream `i`.
pub fn signal_transcript(
    spec: &CircuitSpec,
    bits: &str,
    n: u64,
    seed: u64,
) -> CliResult<Transcript> {
    if bits.is_empty() {
        return Err(CliError::input("--bits must not be empty"));
    }
    let sent: Vec<u8> = bits
        .chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(CliError::input(format!(
                "--bits may only contain 0 and 1, found `{ch}`"
            ))),
        })
        .collect::<CliResult<_>>()?;
    if n == 0 {
        return Err(CliError::input("--n must be at least 1"));
    }

    let psi = build_output_state(spec).map_err(CliError::runtime)?;
    let da2 = model_for(&spec.clone().with_placement(Placement::DA2))?;
    let phi = match da2 {
        MeasurementModel::CoherentIncompleteDA2 { phi } => phi,
        _ => unreachable!("DA2 placement maps to the coherent model"),
    };
    let dists: [OutcomeDistribution; 2] = [
        outcome_distribution(&psi, &MeasurementModel::CompleteDA1).map_err(CliError::runtime)?,
        outcome_distribution(&psi, &da2).map_err(CliError::runtime)?,
    ];

    let mut entries = Vec::with_capacity(sent.len());
    let mut decoded = String::with_capacity(sent.len());
    for (i, &bit) in sent.iter().enumerate() {
        let counts = sample_clicks_stream(&dists[bit as usize], n, seed, i as u64)
            .map_err(CliError::runtime)?;
        let bob_counts = counts.count("p");
        let decision = distinguish_bit(bob_counts, n).map_err(CliError::runtime)?;
        decoded.push(if decision.decided_bit == 0 { '0' } else { '1' });
        entries.push(SignalEntry {
            index: i,
            sent_bit: bit,
            alice_placement: if bit == 0 {
                Placement::DA1
            } else {
                Placement::DA2
            },
            bob_counts,
            decision,
        });
    }
    let bit_errors = entries
        .iter()
        .filter(|e| e.sent_bit != e.decision.decided_bit)
        .count();
    Ok(Transcript {
        tool: TOOL,
        command: "signal",
        message: bits.to_string(),
        n_per_bit: n,
        seed,
        phi,
        bit_error_rate: bit_errors as f64 / entries.len() as f64,
        bit_errors,
        decoded,
        entries,
    })
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    valid: bool,
    violations: Vec<Violation>,
}

/// Rendered output of a successful run. `code` is nonzero when the run
/// completed but found problems (validation violations).
#[derive(Debug)]
pub struct Output {
    pub text: String,
    /// `None` for stdout
    pub path: Option<PathBuf>,
    pub code: i32,
}

fn output(text: String, path: &Option<PathBuf>) -> Output {
    Output {
        text,
        path: path.clone(),
        code: 0,
    }
}

pub fn run(command: &Command) -> CliResult<Output> {
    match command {
        Command::Simulate(a) => {
            let spec = load_spec(&a.common.spec)?;
            let report = simulate_report(&spec, a.n, a.seed)?;
            Ok(output(render_simulate(&report, a.format)?, &a.common.out))
        }
        Command::Sweep(a) => {
            let spec = load_spec(&a.common.spec)?;
            Ok(output(sweep(&spec, a)?, &a.common.out))
        }
        Command::Doubleslit(a) => {
            let spec = load_spec(&a.common.spec)?;
            Ok(output(doubleslit(&spec, a)?, &a.common.out))
        }
        Command::Signal(a) => {
            let spec = load_spec(&a.common.spec)?;
            let t = signal_transcript(&spec, &a.bits, a.n, a.seed)?;
            Ok(output(to_json(&t)?, &a.common.out))
        }
        Command::Validate(a) => {
            // parse errors still fail with a position; violations are reported as data
            let bytes = std::fs::read(&a.common.spec)
                .map_err(|e| CliError::input(format!("{}: {e}", a.common.spec.display())))?;
            let spec = parse_bytes(&bytes).map_err(|e| {
                CliError::input(format!(
                    "{}:{}:{}: {}",
                    a.common.spec.display(),
                    e.line,
                    e.column,
                    e.message
                ))
            })?;
            let violations = validate(&spec);
            let report = ValidationReport {
                valid: violations.is_empty(),
                violations,
            };
            let mut out = output(to_json(&report)?, &a.common.out);
            if !report.valid {
                out.code = EXIT_INPUT;
            }
            Ok(out)
        }
    }
}

/// Runs the command and writes its output. Returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    match run(&cli.command) {
        Ok(Output {
            text,
            path: None,
            code,
        }) => {
            print!("{text}");
            code
        }
        Ok(Output {
            text,
            path: Some(path),
            code,
        }) => match std::fs::write(&path, text) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                EXIT_RUNTIME
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_grid_parsing() {
        assert_eq!(parse_phi_grid("0:0:1").unwrap(), vec![0.0]);
        assert_eq!(parse_phi_grid("pi:2pi:1").unwrap(), vec![PI]);
        let g = parse_phi_grid("0:2pi:256").unwrap();
        assert_eq!(g.len(), 256);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(*g.last().unwrap() < 2.0 * PI);
        assert_eq!(
            parse_phi_grid("-pi:0.5*pi:2").unwrap(),
            vec![-PI, -PI / 4.0]
        );
        for bad in ["", "0:1", "0:1:0", "0:x:3", "0:1:2:3", "0:inf:2"] {
            assert!(parse_phi_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn simulate_reports_default_numbers() {
        let da2 = simulate_report(&CircuitSpec::paper_fig1(), 1000, 1).unwrap();
        assert!((da2.renorm_beta - 1.5).abs() < 1e-12);
        assert!((da2.rates["k"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((da2.bob_rate - 1.0 / 3.0).abs() < 1e-12);
        assert!((da2.correlation_per_epsilon_sqr["k"] - 4.0).abs() < 1e-9);
        assert!((da2.audits.counterfactual_total_rate.unwrap() - 1.5).abs() < 1e-12);
        assert!(da2.audits.causality.unwrap().violates_conservation);

        let spec = CircuitSpec::paper_fig1().with_placement(Placement::DA1);
        let da1 = simulate_report(&spec, 1000, 1).unwrap();
        assert_eq!(da1.renorm_beta, 1.0);
        assert!(da1.audits.causality.is_none());
        for (l, p) in [("l", 0.25), ("m", 0.25), ("p", 0.5)] {
            assert!((da1.analytic.probability(l) - p).abs() < 1e-12);
        }
        assert_eq!(da1.monte_carlo.counts.values().sum::<u64>(), 1000);
    }

    #[test]
    fn signal_usage_errors() {
        let spec = CircuitSpec::paper_fig1();
        assert_eq!(
            signal_transcript(&spec, "", 10, 0).unwrap_err().code,
            EXIT_INPUT
        );
        assert_eq!(
            signal_transcript(&spec, "01x", 10, 0).unwrap_err().code,
            EXIT_INPUT
        );
    }

    #[test]
    fn signal_single_click() {
        let t = signal_transcript(&CircuitSpec::paper_fig1(), "0", 1, 0).unwrap();
        assert!((t.entries[0].decision.error_bound - (-2.0f64 / 144.0).exp()).abs() < 1e-15);
    }
}
