//! Command-line front end: moment estimation, model fitting in both causal
//! directions, boundary comparison, plot data, the grid oracle, and
//! synthetic data generation.
//!
//! Exit codes: 0 success, 2 data error, 3 infeasibility or non-convergence,
//! 64 usage error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use cmaxent::anticausal::{
    anticausal_posterior, fit_anticausal, fit_anticausal_missing_phi2,
    fit_anticausal_missing_s12, AnticausalModel, ImputationStrategy,
};
use cmaxent::boundary::{
    boundary_from_anticausal, boundary_from_causal, compare, DecisionBoundary,
};
use cmaxent::causal::{
    causal_posterior, fit_causal, fit_causal_missing_phi2, fit_causal_missing_s12, CausalModel,
};
use cmaxent::combined::{fit_combined, CombinedMomentSpec};
use cmaxent::datagen::{sample_anticausal, sample_causal, Seeded};
use cmaxent::error::{Error, Result};
use cmaxent::grid::oracle_report;
use cmaxent::json::to_string_17;
use cmaxent::moments::{center, estimate_moments, validate, MissingMoment, MomentSpec, SampleSet};
use cmaxent::Direction;

#[derive(Parser)]
#[command(
    name = "cmaxent",
    version,
    about = "Merge single-variable predictors of a binary target under causal \
             and anticausal maximum-entropy assumptions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate moment constraints from a CSV sample (y,x1,x2[,x3,x4])
    Moments {
        #[command(flatten)]
        io: IoArgs,
        /// Shift to the zero-mean convention expected by the solvers
        #[arg(long)]
        center: bool,
    },
    /// Fit a model from a moment-spec JSON
    Fit {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[command(flatten)]
        missing: MissingArgs,
    },
    /// Compare the decision boundaries of the two directions
    Compare {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        missing: MissingArgs,
    },
    /// Emit posterior surfaces and boundary segments for plotting
    PlotData {
        /// Input moment-spec JSON
        #[arg(long = "in")]
        input: PathBuf,
        /// Output CSV (x1,x2,p_causal,p_anticausal); boundary segments go to
        /// the same path with extension `boundaries.json`
        #[arg(long = "out")]
        output: PathBuf,
        #[command(flatten)]
        missing: MissingArgs,
        /// Cells per axis
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
    /// Check closed-form solutions against the brute-force grid solver
    Oracle {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Cells per axis
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
    /// Sample a synthetic CSV data set from a fitted model JSON
    Gen {
        #[command(flatten)]
        io: IoArgs,
        /// Number of rows
        #[arg(long)]
        n: usize,
        /// Stream seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct IoArgs {
    /// Input path
    #[arg(long = "in")]
    input: PathBuf,
    /// Output path (stdout when absent)
    #[arg(long = "out")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MissingArgs {
    /// Which moment to treat as unobserved
    #[arg(long, value_enum)]
    missing: Option<MissingArg>,
    /// Imputation for an unobserved phi2 (anticausal direction)
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Causal,
    Anticausal,
    Combined,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Direction {
        match d {
            DirectionArg::Causal => Direction::Causal,
            DirectionArg::Anticausal => Direction::Anticausal,
            DirectionArg::Combined => Direction::Combined,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum MissingArg {
    None,
    Phi2,
    S12,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Paper,
    Entropy,
}

impl From<StrategyArg> for ImputationStrategy {
    fn from(s: StrategyArg) -> ImputationStrategy {
        match s {
            StrategyArg::Paper => ImputationStrategy::Paper,
            StrategyArg::Entropy => ImputationStrategy::Entropy,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Moments { io, center: do_center } => cmd_moments(&io, do_center),
        Command::Fit { io, direction, missing } => cmd_fit(&io, direction.into(), &missing),
        Command::Compare { io, missing } => cmd_compare(&io, &missing),
        Command::PlotData { input, output, missing, grid } => {
            cmd_plot_data(&input, &output, &missing, grid)
        }
        Command::Oracle { io, direction, grid } => cmd_oracle(&io, direction.into(), grid),
        Command::Gen { io, n, seed } => cmd_gen(&io, n, seed),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut buf = String::new();
    File::open(path)?.read_to_string(&mut buf)?;
    Ok(buf)
}

fn write_output(output: Option<&PathBuf>, content: &str) -> Result<()> {
    match output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(content.as_bytes())?;
            f.write_all(b"\n")?;
        }
        None => println!("{content}"),
    }
    Ok(())
}

fn load_spec(path: &Path) -> Result<MomentSpec> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

/// Reconcile the `--missing` flag with the spec's own availability flags.
/// The flag may mask an available moment; it may not resurrect a missing
/// one or contradict which moment is absent.
fn apply_missing(spec: &mut MomentSpec, requested: Option<MissingArg>) -> Result<MissingMoment> {
    let current = spec.missing();
    let Some(requested) = requested else {
        return Ok(current);
    };
    match (requested, current) {
        (MissingArg::None, MissingMoment::None) => Ok(MissingMoment::None),
        (MissingArg::None, other) => Err(Error::InvalidArgument(format!(
            "--missing none, but the spec marks {other:?} as unavailable"
        ))),
        (MissingArg::Phi2, MissingMoment::None) => {
            spec.avail_phi2 = false;
            spec.phi.y = 0.0;
            Ok(MissingMoment::Phi2)
        }
        (MissingArg::Phi2, MissingMoment::Phi2) => Ok(MissingMoment::Phi2),
        (MissingArg::S12, MissingMoment::None) => {
            spec.avail_s12 = false;
            spec.sigma_x[(0, 1)] = 0.0;
            spec.sigma_x[(1, 0)] = 0.0;
            Ok(MissingMoment::S12)
        }
        (MissingArg::S12, MissingMoment::S12) => Ok(MissingMoment::S12),
        (want, have) => Err(Error::InvalidArgument(format!(
            "--missing {want:?} conflicts with the spec, which lacks {have:?}"
        ))),
    }
}

fn resolve_strategy(
    missing: &MissingArgs,
    effective: MissingMoment,
) -> Result<ImputationStrategy> {
    if missing.strategy.is_some() && effective != MissingMoment::Phi2 {
        return Err(Error::InvalidArgument(
            "--strategy only applies when phi2 is the missing moment".into(),
        ));
    }
    Ok(missing
        .strategy
        .map(ImputationStrategy::from)
        .unwrap_or(ImputationStrategy::Entropy))
}

fn cmd_moments(io: &IoArgs, do_center: bool) -> Result<()> {
    let samples = SampleSet::from_csv(BufReader::new(File::open(&io.input)?))?;

    let finish = |spec: MomentSpec| -> Result<MomentSpec> {
        let spec = if do_center { center(&spec) } else { spec };
        let violations = validate(&spec);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidSpec(msgs.join("; ")));
        }
        Ok(spec)
    };

    let json = if samples.has_second_block() {
        let spec4 = CombinedMomentSpec::estimate(&samples)?;
        let spec4 = CombinedMomentSpec {
            cause: finish(spec4.cause)?,
            effect: finish(spec4.effect)?,
        };
        to_string_17(&spec4)?
    } else {
        to_string_17(&finish(estimate_moments(&samples)?)?)?
    };
    write_output(io.output.as_ref(), &json)
}

fn cmd_fit(io: &IoArgs, direction: Direction, missing: &MissingArgs) -> Result<()> {
    if direction == Direction::Combined {
        if missing.missing.map_or(false, |m| m != MissingArg::None) || missing.strategy.is_some() {
            return Err(Error::InvalidArgument(
                "--missing/--strategy do not apply to the combined graph".into(),
            ));
        }
        let spec4: CombinedMomentSpec = serde_json::from_str(&read_to_string(&io.input)?)?;
        let model = fit_combined(&spec4)?;
        eprintln!("fitted combined model (cause block + effect block)");
        return write_output(io.output.as_ref(), &to_string_17(&model)?);
    }

    let mut spec = load_spec(&io.input)?;
    let effective = apply_missing(&mut spec, missing.missing)?;
    let json = match direction {
        Direction::Causal => {
            if missing.strategy.is_some() {
                return Err(Error::InvalidArgument(
                    "--strategy only applies to the anticausal imputation".into(),
                ));
            }
            let model = match effective {
                MissingMoment::None => fit_causal(&spec)?,
                MissingMoment::Phi2 => fit_causal_missing_phi2(&spec)?,
                MissingMoment::S12 => fit_causal_missing_s12(&spec)?,
            };
            eprintln!("fitted causal model (missing = {effective:?})");
            to_string_17(&model)?
        }
        Direction::Anticausal => {
            let strategy = resolve_strategy(missing, effective)?;
            let model = match effective {
                MissingMoment::None => fit_anticausal(&spec)?,
                MissingMoment::Phi2 => fit_anticausal_missing_phi2(&spec, strategy)?,
                MissingMoment::S12 => fit_anticausal_missing_s12(&spec)?,
            };
            eprintln!("fitted anticausal model (missing = {effective:?})");
            to_string_17(&model)?
        }
        Direction::Combined => unreachable!(),
    };
    write_output(io.output.as_ref(), &json)
}

fn cmd_compare(io: &IoArgs, missing: &MissingArgs) -> Result<()> {
    let mut spec = load_spec(&io.input)?;
    let effective = apply_missing(&mut spec, missing.missing)?;
    let strategy = resolve_strategy(missing, effective)?;
    let report = compare(&spec, strategy)?;
    write_output(io.output.as_ref(), &to_string_17(&report)?)
}

#[derive(Serialize, Deserialize)]
struct BoundarySegment {
    direction: String,
    from: [f64; 2],
    to: [f64; 2],
    w: [f64; 2],
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct BoundarySegments {
    segments: Vec<BoundarySegment>,
}

/// Clip the line `w·x + b = 0` to a rectangular window.
fn clip_boundary(
    boundary: &DecisionBoundary,
    window: [(f64, f64); 2],
) -> Option<([f64; 2], [f64; 2])> {
    let (w, b) = (boundary.w, boundary.b);
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut push = |x1: f64, x2: f64| {
        if x1 >= window[0].0 - 1e-12
            && x1 <= window[0].1 + 1e-12
            && x2 >= window[1].0 - 1e-12
            && x2 <= window[1].1 + 1e-12
            && !points
                .iter()
                .any(|p| (p[0] - x1).abs() < 1e-9 && (p[1] - x2).abs() < 1e-9)
        {
            points.push([x1, x2]);
        }
    };
    if w.y != 0.0 {
        for x1 in [window[0].0, window[0].1] {
            push(x1, -(b + w.x * x1) / w.y);
        }
    }
    if w.x != 0.0 {
        for x2 in [window[1].0, window[1].1] {
            push(-(b + w.y * x2) / w.x, x2);
        }
    }
    if points.len() < 2 {
        return None;
    }
    // Take the two most distant crossings.
    let mut best = (0usize, 1usize, -1.0f64);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.2 > 1e-9).then(|| (points[best.0], points[best.1]))
}

fn cmd_plot_data(
    input: &Path,
    output: &Path,
    missing: &MissingArgs,
    grid: usize,
) -> Result<()> {
    if grid < 3 {
        return Err(Error::InvalidArgument("--grid must be at least 3".into()));
    }
    let mut spec = load_spec(input)?;
    let effective = apply_missing(&mut spec, missing.missing)?;
    let strategy = resolve_strategy(missing, effective)?;

    let causal_model = match effective {
        MissingMoment::None => fit_causal(&spec)?,
        MissingMoment::Phi2 => fit_causal_missing_phi2(&spec)?,
        MissingMoment::S12 => fit_causal_missing_s12(&spec)?,
    };
    let anticausal_model = match effective {
        MissingMoment::None => fit_anticausal(&spec)?,
        MissingMoment::Phi2 => fit_anticausal_missing_phi2(&spec, strategy)?,
        MissingMoment::S12 => fit_anticausal_missing_s12(&spec)?,
    };

    // Fixed plotting window: ±4 marginal standard deviations.
    let cov = spec.covariance();
    let mut window = [(0.0, 0.0); 2];
    for i in 0..2 {
        let sd = cov[(i, i)].max(0.0).sqrt();
        window[i] = (spec.xbar[i] - 4.0 * sd, spec.xbar[i] + 4.0 * sd);
    }

    let mut csv = String::with_capacity(grid * grid * 48);
    csv.push_str("x1,x2,p_causal,p_anticausal\n");
    for i in 0..grid {
        let x1 = window[0].0 + (i as f64 + 0.5) * (window[0].1 - window[0].0) / grid as f64;
        for j in 0..grid {
            let x2 = window[1].0 + (j as f64 + 0.5) * (window[1].1 - window[1].0) / grid as f64;
            let x = Vector2::new(x1, x2);
            let pc = causal_posterior(&causal_model, x);
            let pa = anticausal_posterior(&anticausal_model, x);
            csv.push_str(&format!("{x1},{x2},{pc},{pa}\n"));
        }
    }
    let mut f = BufWriter::new(File::create(output)?);
    f.write_all(csv.as_bytes())?;
    drop(f);

    let mut segments = Vec::new();
    let mut add = |name: &str, boundary: cmaxent::error::Result<DecisionBoundary>| {
        if let Ok(boundary) = boundary {
            if let Some((from, to)) = clip_boundary(&boundary, window) {
                segments.push(BoundarySegment {
                    direction: name.to_string(),
                    from,
                    to,
                    w: [boundary.w.x, boundary.w.y],
                    b: boundary.b,
                });
            }
        }
    };
    add("causal", boundary_from_causal(&causal_model));
    add("anticausal", boundary_from_anticausal(&anticausal_model));

    let boundaries_path = output.with_extension("boundaries.json");
    let mut f = BufWriter::new(File::create(&boundaries_path)?);
    f.write_all(to_string_17(&BoundarySegments { segments })?.as_bytes())?;
    f.write_all(b"\n")?;
    eprintln!(
        "wrote {}x{grid} posterior grid to {} and segments to {}",
        grid,
        output.display(),
        boundaries_path.display()
    );
    Ok(())
}

fn cmd_oracle(io: &IoArgs, direction: Direction, grid: usize) -> Result<()> {
    let spec = load_spec(&io.input)?;
    let report = oracle_report(&spec, direction, grid)?;
    write_output(io.output.as_ref(), &to_string_17(&report)?)?;
    if report.passes() {
        Ok(())
    } else {
        Err(Error::Infeasible {
            reason: format!(
                "oracle gap {:.3e} exceeds threshold {:.3e}",
                report.sup_norm_gap,
                cmaxent::grid::GAP_THRESHOLD
            ),
        })
    }
}

/// Model file payload: either direction, told apart by their fields.
#[derive(Deserialize)]
#[serde(untagged)]
enum ModelFile {
    Causal(CausalModel),
    Anticausal(AnticausalModel),
}

fn cmd_gen(io: &IoArgs, n: usize, seed: u64) -> Result<()> {
    let model: ModelFile = serde_json::from_str(&read_to_string(&io.input)?)?;
    let mut rng = Seeded::new(seed);
    let samples = match &model {
        ModelFile::Causal(m) => sample_causal(m, n, &mut rng)?,
        ModelFile::Anticausal(m) => sample_anticausal(m, n, &mut rng)?,
    };
    match &io.output {
        Some(path) => samples.to_csv(BufWriter::new(File::create(path)?))?,
        None => {
            let mut buf = Vec::new();
            samples.to_csv(&mut buf)?;
            let stdout = std::io::stdout();
            stdout.lock().write_all(&buf)?;
        }
    }
    Ok(())
}
