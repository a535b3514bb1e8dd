//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::commutator::{build_frame, commutator_test, lambda_ops, recover_symbol};
use crate::error::Error;
use crate::factorize::weak_factorize;
use crate::grid::SampledFunction;
use crate::nehari::{bounded_symbol, hankel_pairing_residual, nehari_solve_spec, TOL_AAK};
use crate::pwspace::{project_band, Band, BandlimitedFunction};
use crate::split::{bump_table, split_symbol};
use crate::toeplitz::{toeplitz_matrix, NyquistBasis, OperatorMatrix, SymbolSpec};
use crate::verify::{run_checks, VerifyConfig, VerifyReport};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Input = 1,
    Certificate = 2,
    Numerical = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid argument --{flag}: {message}")]
    Argument { flag: &'static str, message: String },
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("certificate failed: {0}")]
    Certificate(String),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Argument { .. } => Exit::Input,
            CliError::Numerical(_) => Exit::Numerical,
            CliError::Certificate(_) => Exit::Certificate,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "pwlab", version, about = "Toeplitz operators on Paley-Wiener spaces")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Window {
    /// Band radius a.
    #[arg(long, default_value_t = 1.0)]
    band: f64,
    /// Window period P.
    #[arg(long, default_value_t = 128.0)]
    period: f64,
    /// Grid points per Nyquist interval.
    #[arg(long, default_value_t = 8)]
    oversample: usize,
}

impl Window {
    fn basis(&self) -> CliResult<NyquistBasis> {
        NyquistBasis::desk(self.band, self.period, self.oversample).map_err(|e| CliError::Argument {
            flag: "band",
            message: e.to_string(),
        })
    }
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Project a sampled function onto PW_a.
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        band: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Assemble the matrix of T_phi in the Nyquist basis.
    Toeplitz {
        #[arg(long)]
        symbol: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        out: Output,
    },
    /// Split a symbol into left, central and right spectral parts.
    Split {
        #[arg(long)]
        symbol: PathBuf,
        /// Also write the bump table (x, L, C, R) as CSV to this path.
        #[arg(long)]
        emit_bumps: Option<PathBuf>,
        #[arg(long, default_value_t = 1001)]
        bump_points: usize,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        out: Output,
    },
    /// Replace a symbol by a bounded one defining the same operator.
    BoundedSymbol {
        #[arg(long)]
        symbol: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Omit the three parts from the output.
        #[arg(long)]
        summary: bool,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        out: Output,
    },
    /// Minimal-norm symbol with the Hankel part of b.
    Nehari {
        #[arg(long)]
        symbol: PathBuf,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        out: Output,
    },
    /// Factor a band-2b function as a sum of products of band-a functions.
    Factorize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        band: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Half the target band; defaults to 0.9 a.
        #[arg(long)]
        margin: Option<f64>,
        /// Omit the pair list.
        #[arg(long)]
        summary: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Decide whether a matrix is a Toeplitz operator.
    CommutatorTest {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        band: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Recover a symbol from a Toeplitz matrix.
    RecoverSymbol {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        band: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Run the self-check suite and write report.json and report.csv.
    Verify {
        #[arg(long, default_value_t = 1.0)]
        band: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 128.0)]
        period: f64,
        #[arg(long, default_value_t = 8)]
        oversample: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Run only these check ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

/// Writes floats with 17 significant digits.
struct Fixed17;

impl serde_json::ser::Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_f64(value))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        "0.0".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.into(),
        source,
    })
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.into(),
            source,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn emit<T: Serialize>(out: &Output, value: &T) -> CliResult<()> {
    let text = to_json(value).map_err(|source| CliError::Parse {
        path: "<output>".into(),
        source,
    })?;
    write_text(out.output.as_deref(), &text)
}

fn band_arg(flag: &'static str, v: f64) -> CliResult<Band> {
    Band::new(v).map_err(|e| CliError::Argument {
        flag,
        message: e.to_string(),
    })
}

fn exponent_arg(p: f64) -> CliResult<f64> {
    if p > 1.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(CliError::Argument {
            flag: "p",
            message: format!("must lie in (1, inf), got {p}"),
        })
    }
}

fn read_matrix(path: &Path, band: f64) -> CliResult<OperatorMatrix> {
    let m: OperatorMatrix = read_json(path)?;
    if (m.band.value() - band).abs() > 1e-12 {
        return Err(CliError::Argument {
            flag: "band",
            message: format!("matrix band is {}, not {band}", m.band.value()),
        });
    }
    Ok(m)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        path: path.into(),
        source: io::Error::other(e),
    }
}

fn write_bumps(path: &Path, points: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["x", "left", "central", "right"]).map_err(|e| csv_error(path, e))?;
    for row in bump_table(points) {
        w.write_record(row.map(format_f64)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

pub fn write_report_csv(path: &Path, report: &VerifyReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["check_id", "paper_ref", "measured", "bound", "pass"])
        .map_err(|e| csv_error(path, e))?;
    for c in &report.checks {
        if let Some(err) = &c.error {
            let id = format!("{:02}.error", c.id);
            w.write_record([id.as_str(), c.identity.as_str(), "", "", "false"])
                .map_err(|e| csv_error(path, e))?;
            eprintln!("check {} failed to run: {err}", c.id);
        }
        for m in &c.measurements {
            let id = format!("{:02}.{}", c.id, m.name);
            w.write_record([
                id,
                c.identity.clone(),
                format_f64(m.measured),
                format_f64(m.bound),
                m.pass.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

#[derive(Serialize)]
struct NehariOutput {
    psi: SampledFunction,
    certificate: NehariCertificate,
}

#[derive(Serialize)]
struct NehariCertificate {
    sigma0: f64,
    sup_norm: f64,
    hankel_norm_line: f64,
    pairing_residual: f64,
    truncation: usize,
    tail_ratio: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ProjectOutput {
    band: f64,
    residual_before: f64,
    function: SampledFunction,
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Project { input, band, out } => {
            let a = band_arg("band", band)?;
            let f: SampledFunction = read_json(&input)?;
            let residual_before = crate::pwspace::band_residual(&f, a);
            let p = project_band(&f, a)?;
            emit(
                &out,
                &ProjectOutput {
                    band,
                    residual_before,
                    function: p.into_function(),
                },
            )
        }
        Command::Toeplitz { symbol, p, window, out } => {
            let p = exponent_arg(p)?;
            let basis = window.basis()?;
            let phi: SymbolSpec = read_json(&symbol)?;
            emit(&out, &toeplitz_matrix(&phi, &basis, p)?)
        }
        Command::Split {
            symbol,
            emit_bumps,
            bump_points,
            window,
            out,
        } => {
            let basis = window.basis()?;
            let phi: SymbolSpec = read_json(&symbol)?;
            let r = split_symbol(&phi, basis.band(), basis.grid())?;
            if let Some(path) = emit_bumps {
                write_bumps(&path, bump_points)?;
            }
            emit(&out, &r)
        }
        Command::BoundedSymbol {
            symbol,
            p,
            summary,
            window,
            out,
        } => {
            let p = exponent_arg(p)?;
            let basis = window.basis()?;
            let phi: SymbolSpec = read_json(&symbol)?;
            let mut r = bounded_symbol(&phi, &basis, p)?;
            if summary {
                r.parts = None;
            }
            emit(&out, &r)?;
            if r.certified {
                Ok(())
            } else {
                Err(CliError::Certificate(format!(
                    "operator residual {:.3e} exceeds 1e-3 of the operator norm",
                    r.operator_residual
                )))
            }
        }
        Command::Nehari { symbol, window, out } => {
            let basis = window.basis()?;
            let a = basis.band();
            let b: SymbolSpec = read_json(&symbol)?;
            let sol = nehari_solve_spec(&b, a, basis.grid())?;
            let pairing_residual = hankel_pairing_residual(&sol.psi, &b.sample(sol.psi.grid())?, a, 11)?;
            let s0 = sol.sigma0;
            let pass = if s0 > 0.0 {
                sol.sup_norm <= (1.0 + TOL_AAK) * s0 && (s0 - sol.hankel_norm_line).abs() <= TOL_AAK * s0
            } else {
                sol.sup_norm == 0.0
            };
            let output = NehariOutput {
                certificate: NehariCertificate {
                    sigma0: sol.sigma0,
                    sup_norm: sol.sup_norm,
                    hankel_norm_line: sol.hankel_norm_line,
                    pairing_residual,
                    truncation: sol.truncation,
                    tail_ratio: sol.tail_ratio,
                    pass,
                    warnings: sol.warnings,
                },
                psi: sol.psi,
            };
            emit(&out, &output)?;
            if pass {
                Ok(())
            } else {
                Err(CliError::Certificate("minimal-norm symbol exceeds the Hankel norm bound".into()))
            }
        }
        Command::Factorize {
            input,
            band,
            p,
            margin,
            summary,
            out,
        } => {
            let a = band_arg("band", band)?;
            let p = exponent_arg(p)?;
            let b = margin.unwrap_or(0.9 * band);
            if !(b > 0.0 && b < band) {
                return Err(CliError::Argument {
                    flag: "margin",
                    message: format!("must lie in (0, band) = (0, {band}), got {b}"),
                });
            }
            let target_band = band_arg("margin", 2.0 * b)?;
            let f: SampledFunction = read_json(&input)?;
            let h = BandlimitedFunction::certify(f, target_band).map_err(|e| CliError::Argument {
                flag: "input",
                message: e.to_string(),
            })?;
            let r = weak_factorize(&h, a, p)?;
            let flagged = r.flagged;
            if summary {
                emit(&out, &r.summary())?;
            } else {
                emit(&out, &r)?;
            }
            if flagged {
                Err(CliError::Certificate("reconstruction residual above 1e-6".into()))
            } else {
                Ok(())
            }
        }
        Command::CommutatorTest { matrix, band, p, out } => {
            let p = exponent_arg(p)?;
            let t = read_matrix(&matrix, band)?;
            let frame = build_frame(&t.basis, p)?;
            emit(&out, &commutator_test(&t, &frame)?)
        }
        Command::RecoverSymbol { matrix, band, out } => {
            let t = read_matrix(&matrix, band)?;
            let frame = build_frame(&t.basis, 2.0)?;
            let ops = lambda_ops(&frame)?;
            let r = recover_symbol(&t, &frame, &ops)?;
            emit(&out, &r)?;
            if r.round_trip <= 1e-3 {
                Ok(())
            } else {
                Err(CliError::Certificate(format!(
                    "round trip {:.3e} exceeds 1e-3",
                    r.round_trip
                )))
            }
        }
        Command::Verify {
            band,
            p,
            period,
            oversample,
            seed,
            only,
            out_dir,
        } => {
            band_arg("band", band)?;
            let p = exponent_arg(p)?;
            let cfg = VerifyConfig {
                band,
                p,
                period,
                oversample,
                seed,
            };
            let report = run_checks(&cfg, &only);
            fs::create_dir_all(&out_dir).map_err(|source| CliError::Io {
                path: out_dir.clone(),
                source,
            })?;
            let json = to_json(&report).map_err(|source| CliError::Parse {
                path: "<report>".into(),
                source,
            })?;
            write_text(Some(&out_dir.join("report.json")), &json)?;
            write_report_csv(&out_dir.join("report.csv"), &report)?;
            for c in &report.checks {
                println!("{:>2} {:<24} {}", c.id, c.name, if c.pass { "PASS" } else { "FAIL" });
            }
            let failed: Vec<String> = report.failed().map(|c| c.id.to_string()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Certificate(format!("checks {} failed", failed.join(", "))))
            }
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("PWLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| CliError::Argument {
        flag: "PWLAB_THREADS",
        message: format!("expected a positive integer, got {v:?}"),
    })?;
    if n == 0 {
        return Err(CliError::Argument {
            flag: "PWLAB_THREADS",
            message: "must be positive".into(),
        });
    }
    // A pool built earlier in the same process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Input } else { Exit::Ok };
            let _ = e.print();
            return code as i32;
        }
    };
    let result = configure_threads().and_then(|_| execute(cli.command));
    match result {
        Ok(()) => Exit::Ok as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit() as i32
        }
    }
}
