//! Command-line front end: argument parsing, rotation ingestion, subcommand
//! dispatch and output writing.
//!
//! Exit codes: 0 on success, 1 on a validation error (a JSON error object is
//! written to the error stream), 2 when `--assert` is given and a checked
//! defect exceeds `--tol`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::hamiltonian::CouplingSet;
use crate::krawtchouk::KrawtchoukTable;
use crate::lattice::{Site, TriangularLattice};
use crate::rotation::{RotationMatrix, RotationSpec, DEFAULT_TOL_ORTHO};
use crate::spectral::{self, AnalyticSpectrum};
use crate::transfer::{self, AmplitudeSeries};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Off-diagonal threshold (relative to `‖H‖_F`) for the Jacobi oracle.
pub const ORACLE_TOL: f64 = 1e-14;

#[derive(Debug, Parser)]
#[command(name = "trispin", version, about = "Single-excitation dynamics of XY spin lattices on a triangle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit the coupling tables I, J, B of the solvable lattice.
    Couplings(CommonArgs),
    /// Analytic spectrum, optionally checked against the Jacobi oracle.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Diagonalize the assembled Hamiltonian and compare.
        #[arg(long)]
        oracle: bool,
    },
    /// Orthogonality defect and recurrence residuals of the polynomial table.
    OrthoCheck(CommonArgs),
    /// One transition amplitude.
    Transfer {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        route: RouteArgs,
        /// Evolution time.
        #[arg(long, allow_hyphen_values = true)]
        time: f64,
    },
    /// Sampled transition amplitudes over a time window.
    FidelitySeries {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        route: RouteArgs,
        /// First sample time.
        #[arg(long = "t-min", allow_hyphen_values = true)]
        t_min: f64,
        /// Last sample time, included.
        #[arg(long = "t-max", allow_hyphen_values = true)]
        t_max: f64,
        /// Number of samples, at least 2.
        #[arg(long)]
        steps: usize,
    },
    /// Hypotenuse-transfer conditions and leakage.
    PstCheck(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON file with {"rotation": [9 numbers]} or {"euler": [a,b,c], "improper": bool}.
    #[arg(long)]
    rotation: Option<PathBuf>,
    /// z-y-z Euler angles in radians, as `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    euler: Option<String>,
    /// Compose the Euler rotation with diag(1,1,-1).
    #[arg(long)]
    improper: bool,
    /// Use the built-in improper example rotation.
    #[arg(long = "paper-example")]
    paper_example: bool,
    /// Lattice order.
    #[arg(long = "N")]
    order: usize,
    /// Assertion and PST tolerance [default: 1e-9].
    #[arg(long, env = "TRISPIN_TOL")]
    tol: Option<f64>,
    /// Exit with status 2 when a checked quantity exceeds --tol.
    #[arg(long)]
    assert: bool,
    /// Write output to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; csv only for spectrum and fidelity-series.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct RouteArgs {
    /// Source site `i,j`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    from: String,
    /// Target site `k,l`.
    #[arg(long, allow_hyphen_values = true)]
    to: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RotationSource {
    File(PathBuf),
    Euler { angles: [f64; 3], improper: bool },
    Reference,
}

/// Validated settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub rotation: RotationSource,
    pub order: usize,
    pub tol: f64,
    pub assert: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    fn from_args(args: &CommonArgs, default_format: Format) -> Result<Self> {
        let mut sources = Vec::new();
        if let Some(path) = &args.rotation {
            sources.push(RotationSource::File(path.clone()));
        }
        if let Some(text) = &args.euler {
            let angles: Vec<f64> = text
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::BadConfig(format!("bad --euler value `{text}`")))?;
            let angles: [f64; 3] = angles
                .try_into()
                .map_err(|_| Error::BadConfig("--euler needs exactly three angles".into()))?;
            sources.push(RotationSource::Euler {
                angles,
                improper: args.improper,
            });
        } else if args.improper {
            return Err(Error::BadConfig("--improper requires --euler".into()));
        }
        if args.paper_example {
            sources.push(RotationSource::Reference);
        }
        if sources.len() != 1 {
            return Err(Error::BadConfig(format!(
                "exactly one of --rotation, --euler, --paper-example is required (got {})",
                sources.len()
            )));
        }
        let tol = args.tol.unwrap_or(DEFAULT_TOL);
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::BadConfig(format!("tolerance must be positive, got {tol}")));
        }
        Ok(Self {
            rotation: sources.pop().expect("one source"),
            order: args.order,
            tol,
            assert: args.assert,
            out: args.out.clone(),
            format: args.format.unwrap_or(default_format),
        })
    }

    pub fn build_rotation(&self) -> Result<RotationMatrix> {
        match &self.rotation {
            RotationSource::Reference => Ok(RotationMatrix::reference()),
            RotationSource::Euler { angles, improper } => {
                RotationMatrix::from_euler(angles[0], angles[1], angles[2], *improper)
            }
            RotationSource::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let spec: RotationSpec = serde_json::from_str(&text)?;
                spec.build(DEFAULT_TOL_ORTHO)
            }
        }
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    return 0;
                }
                ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand => {
                    let name = e
                        .get(clap::error::ContextKind::InvalidSubcommand)
                        .map(|v| v.to_string())
                        .unwrap_or_default();
                    report_error(stderr, &Error::UnknownCommand(name));
                }
                _ => report_error(stderr, &Error::BadConfig(e.to_string().trim().to_string())),
            }
            return 1;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e @ Error::VerificationFailed(_)) => {
            report_error(stderr, &e);
            2
        }
        Err(e) => {
            report_error(stderr, &e);
            1
        }
    }
}

fn report_error(stderr: &mut dyn Write, e: &Error) {
    let obj = json!({ "error": { "code": e.code(), "message": e.to_string() } });
    let _ = writeln!(stderr, "{obj}");
}

fn emit(cfg: &RunConfig, stdout: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(cfg: &RunConfig, stdout: &mut dyn Write, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(cfg, stdout, text.as_bytes())
}

fn json_only(cfg: &RunConfig, command: &str) -> Result<()> {
    if cfg.format != Format::Json {
        return Err(Error::BadConfig(format!("{command} only writes json")));
    }
    Ok(())
}

/// 17 significant digits, round-trip safe.
fn sci(x: f64) -> String {
    // adding 0.0 turns -0.0 into 0.0
    format!("{:.16e}", x + 0.0)
}

fn verify(cfg: &RunConfig, checks: &[(&str, Option<f64>)]) -> Result<()> {
    if !cfg.assert {
        return Ok(());
    }
    let failed: Vec<String> = checks
        .iter()
        .filter_map(|(name, v)| match v {
            Some(v) if *v <= cfg.tol => None,
            Some(v) => Some(format!("{name} = {v:.3e} > {:.3e}", cfg.tol)),
            None => Some(format!("{name} unavailable")),
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::VerificationFailed(failed.join("; ")))
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Couplings(common) => {
            let cfg = RunConfig::from_args(&common, Format::Json)?;
            json_only(&cfg, "couplings")?;
            let rot = cfg.build_rotation()?;
            emit_json(&cfg, stdout, &CouplingSet::from_rotation(&rot, cfg.order).to_file())
        }
        Command::Spectrum { common, oracle } => {
            let cfg = RunConfig::from_args(&common, Format::Json)?;
            spectrum(&cfg, oracle, stdout)
        }
        Command::OrthoCheck(common) => {
            let cfg = RunConfig::from_args(&common, Format::Json)?;
            json_only(&cfg, "ortho-check")?;
            let table = KrawtchoukTable::build(&cfg.build_rotation()?, cfg.order)?;
            let ortho = table.orthogonality_defect();
            let (r1, r2) = table.recurrence_residuals();
            emit_json(
                &cfg,
                stdout,
                &json!({ "ortho_defect": ortho, "recu1_residual": r1, "recu2_residual": r2 }),
            )?;
            verify(
                &cfg,
                &[
                    ("ortho_defect", Some(ortho)),
                    ("recu1_residual", Some(r1)),
                    ("recu2_residual", Some(r2)),
                ],
            )
        }
        Command::Transfer { common, route, time } => {
            let cfg = RunConfig::from_args(&common, Format::Json)?;
            json_only(&cfg, "transfer")?;
            if !time.is_finite() {
                return Err(Error::NonFinite("--time"));
            }
            let (from, to) = parse_route(&cfg, &route)?;
            let eval = Evaluator::new(&cfg.build_rotation()?, cfg.order, from)?;
            let f = eval.amplitude(to, time)?;
            emit_json(
                &cfg,
                stdout,
                &json!({ "re": f.re, "im": f.im, "fidelity": f.norm_sqr() }),
            )
        }
        Command::FidelitySeries {
            common,
            route,
            t_min,
            t_max,
            steps,
        } => {
            let cfg = RunConfig::from_args(&common, Format::Csv)?;
            let (from, to) = parse_route(&cfg, &route)?;
            let eval = Evaluator::new(&cfg.build_rotation()?, cfg.order, from)?;
            let series = eval.series(to, t_min, t_max, steps)?;
            match cfg.format {
                Format::Json => emit_json(&cfg, stdout, &series),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["time", "re", "im", "fidelity"])?;
                    for ((t, a), p) in series.times.iter().zip(&series.amplitudes).zip(&series.fidelities) {
                        w.write_record([sci(*t), sci(a.re), sci(a.im), sci(*p)])?;
                    }
                    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                    emit(&cfg, stdout, &bytes)
                }
            }
        }
        Command::PstCheck(common) => {
            let cfg = RunConfig::from_args(&common, Format::Json)?;
            json_only(&cfg, "pst-check")?;
            let report = transfer::pst_check(&cfg.build_rotation()?, cfg.order, cfg.tol)?;
            emit_json(&cfg, stdout, &report)?;
            let worst_prob = report
                .hypotenuse
                .iter()
                .map(|h| (h.observed_probability - h.predicted_probability).abs())
                .fold(0.0, f64::max);
            verify(
                &cfg,
                &[
                    ("condition_a_defect", Some(report.condition_a_defect)),
                    ("condition_b_defect", Some(report.condition_b_defect)),
                    ("leakage", report.leakage),
                    ("hypotenuse_probability_error", report.leakage.map(|_| worst_prob)),
                ],
            )
        }
    }
}

fn parse_route(cfg: &RunConfig, route: &RouteArgs) -> Result<(Site, Site)> {
    let lattice = TriangularLattice::new(cfg.order);
    let parse = |text: &str| -> Result<Site> {
        match text.parse::<Site>() {
            Err(Error::OutOfDomain { i, j, .. }) => Err(Error::OutOfDomain {
                i,
                j,
                order: cfg.order,
            }),
            other => lattice.check(other?),
        }
    };
    Ok((parse(&route.from)?, parse(&route.to)?))
}

/// Amplitude source for one starting site: the spectral sum when the
/// polynomial table exists, otherwise the closed form (origin only).
enum Evaluator {
    Spectral {
        table: KrawtchoukTable,
        spectrum: AnalyticSpectrum,
        from: Site,
    },
    ClosedForm {
        rotation: RotationMatrix,
        order: usize,
    },
}

impl Evaluator {
    fn new(rot: &RotationMatrix, order: usize, from: Site) -> Result<Self> {
        match KrawtchoukTable::build(rot, order) {
            Ok(table) => Ok(Self::Spectral {
                table,
                spectrum: AnalyticSpectrum::new(rot, order),
                from,
            }),
            Err(Error::DegenerateRotation { .. }) if from == Site::ORIGIN => Ok(Self::ClosedForm {
                rotation: *rot,
                order,
            }),
            Err(e) => Err(e),
        }
    }

    fn amplitude(&self, to: Site, time: f64) -> Result<Complex64> {
        match self {
            Self::Spectral { table, spectrum, from } => {
                transfer::amplitude_spectral(table, spectrum, *from, to, time)
            }
            Self::ClosedForm { rotation, order } => transfer::amplitude_closed_form(rotation, *order, to, time),
        }
    }

    fn series(&self, to: Site, t_min: f64, t_max: f64, steps: usize) -> Result<AmplitudeSeries> {
        match self {
            Self::Spectral { table, spectrum, from } => {
                transfer::fidelity_series(table, spectrum, *from, to, t_min, t_max, steps)
            }
            Self::ClosedForm { rotation, order } => {
                let times = transfer::sample_times(t_min, t_max, steps)?;
                TriangularLattice::new(*order).check(to)?;
                AmplitudeSeries::sample(Site::ORIGIN, to, times, |t| {
                    transfer::amplitude_closed_form(rotation, *order, to, t)
                })
            }
        }
    }
}

#[derive(Serialize)]
struct SpectrumRow {
    s: usize,
    t: usize,
    x: f64,
}

fn spectrum(cfg: &RunConfig, oracle: bool, stdout: &mut dyn Write) -> Result<()> {
    if cfg.assert && !oracle {
        return Err(Error::BadConfig("spectrum --assert needs --oracle".into()));
    }
    let rot = cfg.build_rotation()?;
    let analytic = AnalyticSpectrum::new(&rot, cfg.order);

    let mut numeric = None;
    let mut max_dev = None;
    let mut projector_dev = None;
    if oracle {
        let h = CouplingSet::from_rotation(&rot, cfg.order).assemble();
        let decomp = spectral::diagonalize(&h, ORACLE_TOL)?;
        max_dev = Some(
            analytic
                .sorted()
                .iter()
                .zip(&decomp.eigenvalues)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        // eigenvectors are only available for non-degenerate rotations
        if let Ok(table) = KrawtchoukTable::build(&rot, cfg.order) {
            projector_dev = Some(spectral::compare(&decomp, &table, &analytic)?.projector_deviation);
        }
        numeric = Some(decomp.eigenvalues);
    }

    match cfg.format {
        Format::Json => {
            let rows: Vec<SpectrumRow> = analytic
                .entries()
                .map(|(st, x)| SpectrumRow { s: st.i, t: st.j, x })
                .collect();
            emit_json(
                cfg,
                stdout,
                &json!({
                    "N": cfg.order,
                    "analytic": rows,
                    "numeric": numeric,
                    "max_dev": max_dev,
                    "projector_dev": projector_dev,
                }),
            )?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["s", "t", "x"])?;
            for (st, x) in analytic.entries() {
                w.write_record([st.i.to_string(), st.j.to_string(), sci(x)])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            emit(cfg, stdout, &bytes)?;
        }
    }
    let mut checks = vec![("max_dev", max_dev)];
    if projector_dev.is_some() {
        checks.push(("projector_dev", projector_dev));
    }
    verify(cfg, &checks)
}
