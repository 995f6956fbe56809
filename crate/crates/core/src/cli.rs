//! The `mlfock` command-line front end.
//!
//! Every subcommand writes one JSON document (or a flat CSV projection of it)
//! to standard output or `--output`. Exit codes: 0 success, 1 failed
//! self-test, 2 invalid input, 3 convergence failure (partial data is still
//! written).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::operators::{self, OperatorKind};
use crate::space::{self, MLState, SlitPoint};
use crate::specfun::{self, EvalControl, LevelFunction};
use crate::thermal::{self, PartitionResult, ThermalError, ThermalSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Orders below this make the series evaluations impractically long.
pub const MIN_CLI_ORDER: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "mlfock", version, about = "Mittag-Leffler Fock space numerics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Relative stopping tolerance for series.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,

    /// Term cap for series.
    #[arg(long, global = true, env = "MLFOCK_MAX_TERMS", default_value_t = 4096)]
    pub max_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpName {
    /// Annihilation (Caputo derivative).
    A,
    /// Creation (multiplication by z^q).
    Adag,
    /// Number operator.
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    Annihilation,
    Creation,
    Number,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Level spectrum n_q for n = 0..=N.
    Levels {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: usize,
    },
    /// Mittag-Leffler function E_q(z).
    Mlf {
        #[arg(long)]
        q: f64,
        /// Complex argument as RE,IM.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    /// Reproducing kernel E_q(conj(z)^q w^q) on the slitted plane.
    Kernel {
        #[arg(long)]
        q: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, allow_hyphen_values = true)]
        w: String,
    },
    /// Scalar product of two state files.
    Inner {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        /// Expected order; must match the files when given.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Apply a, a† or a†a to a state file.
    Apply {
        #[arg(long, value_enum)]
        op: OpName,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Truncated operator matrix in the ψ_n basis.
    Matrix {
        #[arg(long, value_enum)]
        kind: MatrixKind,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: usize,
    },
    /// Partition function Z(s, q).
    Partition {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        s: f64,
    },
    /// Thermal state with observables.
    Thermal {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        s: f64,
        /// Probe length for the abscissa profile.
        #[arg(long, default_value_t = 2000)]
        n: usize,
    },
    /// Abscissa profile σ_n = ln(n)/n_q for n = 2..=N.
    Abscissa {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        n: usize,
    },
    /// Convergence diagnostics for Z(s, q).
    Report {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 2000)]
        n: usize,
    },
    /// Closed-form checks at q = 1.
    Selftest,
}

/// A failure that maps to a non-zero exit code with a JSON error object.
#[derive(Debug)]
struct Failure {
    code: i32,
    body: Value,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            body: json!({ "error": { "kind": "validation", "message": message.into() } }),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Convergence { .. } => (EXIT_NOT_CONVERGED, "convergence"),
            Error::OnSlit { .. } => (EXIT_INVALID, "slit"),
            Error::Domain { .. } => (EXIT_INVALID, "domain"),
            Error::IncompatibleSpace { .. } => (EXIT_INVALID, "incompatible_space"),
            Error::Overflow { .. } => (EXIT_INVALID, "overflow"),
            Error::InvalidParameter { .. } => (EXIT_INVALID, "validation"),
            Error::InternalConsistency(_) => (EXIT_INVALID, "internal_consistency"),
        };
        let mut error = json!({ "kind": kind, "message": e.to_string() });
        if let Error::Convergence { partial, terms } = e {
            error["terms"] = json!(terms);
            error["partial"] = json!([partial.re, partial.im]);
        }
        Self {
            code,
            body: json!({ "error": error }),
        }
    }
}

/// Flat CSV view of a result.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn single(fields: Vec<(&'static str, Value)>) -> Self {
        let (header, row) = fields.into_iter().unzip();
        Self {
            header,
            rows: vec![row],
        }
    }
}

/// A successful (or partially successful) command result.
struct Output {
    code: i32,
    json: Value,
    table: Table,
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("serializable result")
}

fn complex_value(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn parse_complex(text: &str) -> Result<Complex64, Failure> {
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::invalid(format!("cannot parse complex number '{text}'")))
    };
    match text.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse(re)?, parse(im)?)),
        None => Ok(Complex64::new(parse(text)?, 0.0)),
    }
}

fn check_order(q: f64) -> Result<(), Failure> {
    if !q.is_finite() || q <= 0.0 {
        return Err(Failure::invalid(format!("--q must be positive, got {q}")));
    }
    if q < MIN_CLI_ORDER {
        return Err(Failure::invalid(format!(
            "--q {q} is below {MIN_CLI_ORDER}: Gamma(qn+1) grows too slowly there for \
             series evaluation to finish; use the library directly and expect \
             convergence errors"
        )));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<(), Failure> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Failure::invalid(format!("--s must be positive, got {s}")))
    }
}

fn read_state(path: &Path) -> Result<MLState, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("invalid state file {}: {e}", path.display())))
}

fn check_file_order(state: &MLState, q: Option<f64>) -> Result<(), Failure> {
    if let Some(q) = q {
        check_order(q)?;
        if q != state.q() {
            return Err(Error::IncompatibleSpace {
                left: q,
                right: state.q(),
            }
            .into());
        }
    }
    Ok(())
}

fn state_output(state: &MLState) -> Output {
    Output {
        code: EXIT_OK,
        json: to_value(state),
        table: Table {
            header: vec!["n", "re", "im"],
            rows: state
                .coeffs()
                .iter()
                .enumerate()
                .map(|(n, c)| vec![json!(n), json!(c.re), json!(c.im)])
                .collect(),
        },
    }
}

fn partition_fields(q: f64, s: f64, p: &PartitionResult) -> Vec<(&'static str, Value)> {
    vec![
        ("q", json!(q)),
        ("s", json!(s)),
        ("Z", json!(p.z)),
        ("terms_used", json!(p.terms_used)),
        ("last_term", json!(p.last_term)),
        ("tail_estimate", json!(p.tail_estimate)),
        ("converged", json!(p.converged)),
    ]
}

fn object(fields: &[(&'static str, Value)]) -> Value {
    Value::Object(
        fields
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
    )
}

/// Full thermal report with fixed key order.
#[derive(Serialize)]
struct ThermalReport {
    q: f64,
    s: f64,
    #[serde(rename = "Z")]
    z: f64,
    terms_used: usize,
    tail_estimate: f64,
    converged: bool,
    probs: Vec<f64>,
    mean_occupation: Option<f64>,
    mean_level: Option<f64>,
    entropy: Option<f64>,
    abscissa_tail_max: f64,
}

fn execute(command: &Command, ctl: EvalControl) -> Result<Output, Failure> {
    match command {
        Command::Levels { q, n } => {
            check_order(*q)?;
            if *n < 1 {
                return Err(Failure::invalid("--n must be at least 1"));
            }
            let spectrum = specfun::level_spectrum(*q, *n)?;
            Ok(Output {
                code: EXIT_OK,
                json: json!({ "q": q, "n": n, "levels": spectrum.levels() }),
                table: Table {
                    header: vec!["n", "level"],
                    rows: spectrum
                        .levels()
                        .iter()
                        .enumerate()
                        .map(|(k, l)| vec![json!(k), json!(l)])
                        .collect(),
                },
            })
        }
        Command::Mlf { q, z } => {
            check_order(*q)?;
            let z = parse_complex(z)?;
            let value = specfun::mittag_leffler(*q, z, &ctl)?;
            let fields = vec![
                ("q", json!(q)),
                ("z", complex_value(z)),
                ("value", complex_value(value)),
            ];
            Ok(Output {
                code: EXIT_OK,
                json: object(&fields),
                table: Table::single(vec![
                    ("q", json!(q)),
                    ("z_re", json!(z.re)),
                    ("z_im", json!(z.im)),
                    ("re", json!(value.re)),
                    ("im", json!(value.im)),
                ]),
            })
        }
        Command::Kernel { q, z, w } => {
            check_order(*q)?;
            let z = SlitPoint::new(parse_complex(z)?)?;
            let w = SlitPoint::new(parse_complex(w)?)?;
            let value = space::kernel(*q, &z, &w, &ctl)?;
            let fields = vec![
                ("q", json!(q)),
                ("z", complex_value(z.value())),
                ("w", complex_value(w.value())),
                ("value", complex_value(value)),
            ];
            Ok(Output {
                code: EXIT_OK,
                json: object(&fields),
                table: Table::single(vec![
                    ("q", json!(q)),
                    ("z_re", json!(z.value().re)),
                    ("z_im", json!(z.value().im)),
                    ("w_re", json!(w.value().re)),
                    ("w_im", json!(w.value().im)),
                    ("re", json!(value.re)),
                    ("im", json!(value.im)),
                ]),
            })
        }
        Command::Inner { f, g, q } => {
            let f = read_state(f)?;
            let g = read_state(g)?;
            check_file_order(&f, *q)?;
            let value = space::inner(&f, &g)?;
            Ok(Output {
                code: EXIT_OK,
                json: json!({ "q": f.q(), "value": complex_value(value) }),
                table: Table::single(vec![
                    ("q", json!(f.q())),
                    ("re", json!(value.re)),
                    ("im", json!(value.im)),
                ]),
            })
        }
        Command::Apply { op, f, q } => {
            let f = read_state(f)?;
            check_file_order(&f, *q)?;
            let kind = match op {
                OpName::A => OperatorKind::Annihilation,
                OpName::Adag => OperatorKind::Creation,
                OpName::N => OperatorKind::Number,
            };
            Ok(state_output(&kind.apply(&f)))
        }
        Command::Matrix { kind, q, n } => {
            check_order(*q)?;
            let kind = match kind {
                MatrixKind::Annihilation => OperatorKind::Annihilation,
                MatrixKind::Creation => OperatorKind::Creation,
                MatrixKind::Number => OperatorKind::Number,
            };
            let m = operators::matrix(*q, kind, *n)?;
            let rows = m
                .entries
                .chunks(m.dim)
                .map(|row| row.iter().map(|v| json!(v)).collect())
                .collect();
            Ok(Output {
                code: EXIT_OK,
                json: to_value(&m),
                table: Table {
                    header: Vec::new(),
                    rows,
                },
            })
        }
        Command::Partition { q, s } => {
            check_order(*q)?;
            check_s(*s)?;
            let spec = ThermalSpec::new(*q, *s, ctl)?;
            let p = thermal::partition(&spec)?;
            let fields = partition_fields(*q, *s, &p);
            Ok(Output {
                code: if p.converged {
                    EXIT_OK
                } else {
                    EXIT_NOT_CONVERGED
                },
                json: object(&fields),
                table: Table::single(fields),
            })
        }
        Command::Thermal { q, s, n } => {
            check_order(*q)?;
            check_s(*s)?;
            if *n < 2 {
                return Err(Failure::invalid("--n must be at least 2"));
            }
            let spec = ThermalSpec::new(*q, *s, ctl)?;
            let abscissa_tail_max = thermal::abscissa_tail_max(*q, *n)?;
            let (report, code) = match thermal::thermal_state(&spec) {
                Ok(state) => {
                    let p = *state.partition();
                    (
                        ThermalReport {
                            q: *q,
                            s: *s,
                            z: state.z(),
                            terms_used: p.terms_used,
                            tail_estimate: p.tail_estimate,
                            converged: true,
                            probs: state.to_vec(),
                            mean_occupation: Some(state.mean_occupation()),
                            mean_level: Some(state.mean_level()),
                            entropy: Some(state.entropy()),
                            abscissa_tail_max,
                        },
                        EXIT_OK,
                    )
                }
                Err(ThermalError::NotConverged(e)) => (
                    ThermalReport {
                        q: *q,
                        s: *s,
                        z: e.partial.z,
                        terms_used: e.partial.terms_used,
                        tail_estimate: e.partial.tail_estimate,
                        converged: false,
                        probs: Vec::new(),
                        mean_occupation: None,
                        mean_level: None,
                        entropy: None,
                        abscissa_tail_max,
                    },
                    EXIT_NOT_CONVERGED,
                ),
                Err(ThermalError::Numeric(e)) => return Err(e.into()),
            };
            let levels = LevelFunction::new(*q)?;
            let rows = report
                .probs
                .iter()
                .enumerate()
                .map(|(k, p)| vec![json!(k), json!(levels.level(k as u64)), json!(p)])
                .collect();
            Ok(Output {
                code,
                json: to_value(&report),
                table: Table {
                    header: vec!["n", "level", "prob"],
                    rows,
                },
            })
        }
        Command::Abscissa { q, n } => {
            check_order(*q)?;
            if *n < 2 {
                return Err(Failure::invalid("--n must be at least 2"));
            }
            let sigma = thermal::abscissa_profile(*q, *n)?;
            let ns: Vec<usize> = (2..=*n).collect();
            let rows = ns
                .iter()
                .zip(&sigma)
                .map(|(k, v)| vec![json!(k), json!(v)])
                .collect();
            Ok(Output {
                code: EXIT_OK,
                json: json!({ "q": q, "n": ns, "sigma": sigma }),
                table: Table {
                    header: vec!["n", "sigma"],
                    rows,
                },
            })
        }
        Command::Report { q, s, n } => {
            check_order(*q)?;
            check_s(*s)?;
            let spec = ThermalSpec::new(*q, *s, ctl)?;
            let r = thermal::convergence_report(&spec, *n)?;
            let mut fields = vec![
                ("q", json!(r.q)),
                ("s", json!(r.s)),
                ("n_probe", json!(r.n_probe)),
                ("spectrum_valid", json!(r.spectrum_valid)),
                ("abscissa_tail_max", json!(r.abscissa_tail_max)),
            ];
            fields.extend(partition_fields(*q, *s, &r.partition).into_iter().skip(2));
            fields.push(("z_quadruple", json!(r.z_quadruple)));
            fields.push(("doubling_defect", json!(r.doubling_defect)));
            Ok(Output {
                code: if r.partition.converged {
                    EXIT_OK
                } else {
                    EXIT_NOT_CONVERGED
                },
                json: to_value(&r),
                table: Table::single(fields),
            })
        }
        Command::Selftest => {
            let checks = selftest();
            let passed = checks.iter().all(|c| c.passed);
            let rows = checks
                .iter()
                .map(|c| {
                    vec![
                        json!(c.name),
                        json!(c.max_error),
                        json!(c.tolerance),
                        json!(c.passed),
                    ]
                })
                .collect();
            Ok(Output {
                code: if passed {
                    EXIT_OK
                } else {
                    EXIT_SELFTEST_FAILED
                },
                json: json!({ "passed": passed, "checks": to_value(&checks) }),
                table: Table {
                    header: vec!["name", "max_error", "tolerance", "passed"],
                    rows,
                },
            })
        }
    }
}

/// One closed-form check of the self-test battery.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check(name: &'static str, errors: impl IntoIterator<Item = f64>, tolerance: f64) -> Check {
    // NaN poisons the maximum so a broken evaluation cannot pass.
    let max_error = errors.into_iter().fold(0.0, |m: f64, e| {
        if e.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(e)
        }
    });
    Check {
        name,
        max_error,
        tolerance,
        passed: max_error <= tolerance,
    }
}

/// q = 1 oracle battery: the space reduces to the classical Fock space.
pub fn selftest() -> Vec<Check> {
    let ctl = EvalControl::new(1e-12, 0.0, 1 << 16).expect("valid control");
    let temperatures: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
    let thermal = |s: f64| {
        let spec = ThermalSpec::new(1.0, s, ctl).expect("valid spec");
        thermal::thermal_state(&spec).ok()
    };
    let nan_or = |x: Option<f64>| x.unwrap_or(f64::NAN);
    let levels = LevelFunction::new(1.0).expect("valid order");

    vec![
        check(
            "level_equals_index",
            (1..=100u64).map(|n| (levels.level(n) - n as f64).abs() / n as f64),
            1e-10,
        ),
        check(
            "mittag_leffler_is_exp",
            [-3.0, -0.5, 0.7, 2.0, 4.5].iter().flat_map(|&re| {
                [-2.0, 0.0, 1.5].iter().map(move |&im| {
                    let z = Complex64::new(re, im);
                    nan_or(
                        specfun::mittag_leffler(1.0, z, &ctl)
                            .ok()
                            .map(|v| (v - z.exp()).norm() / z.exp().norm()),
                    )
                })
            }),
            1e-10,
        ),
        check(
            "orthonormal_basis",
            (0..=16).flat_map(|m| {
                (0..=16).map(move |n| {
                    let (pm, pn) = (space::basis_state(1.0, m), space::basis_state(1.0, n));
                    let delta = if m == n { 1.0 } else { 0.0 };
                    nan_or(
                        pm.and_then(|pm| space::inner(&pm, &pn?))
                            .ok()
                            .map(|v| (v - delta).norm()),
                    )
                })
            }),
            1e-12,
        ),
        check(
            "number_eigenvalues",
            (0..=16).map(|n| {
                let psi = space::basis_state(1.0, n).expect("basis state");
                let diff = operators::number_apply(&psi).combine(
                    Complex64::new(1.0, 0.0),
                    &psi,
                    Complex64::new(-(n as f64), 0.0),
                );
                nan_or(diff.ok().and_then(|d| space::norm(&d).ok()))
            }),
            1e-12,
        ),
        check(
            "ladder_matrix_entries",
            {
                let m = operators::matrix(1.0, OperatorKind::Annihilation, 16).expect("matrix");
                (1..=16)
                    .map(|n| (m.get(n - 1, n) - (n as f64).sqrt()).abs())
                    .collect::<Vec<_>>()
            },
            1e-12,
        ),
        check(
            "partition_geometric",
            temperatures.iter().map(|&s| {
                let exact = 1.0 / (1.0 - (-s).exp());
                nan_or(thermal(s).map(|t| (t.z() - exact).abs() / exact))
            }),
            1e-10,
        ),
        check(
            "mean_occupation_bose_einstein",
            temperatures.iter().map(|&s| {
                let exact = 1.0 / (s.exp() - 1.0);
                nan_or(thermal(s).map(|t| (t.mean_occupation() - exact).abs()))
            }),
            1e-10,
        ),
        check(
            "entropy_closed_form",
            temperatures.iter().map(|&s| {
                let e = (-s).exp();
                let exact = -(1.0 - e).ln() + s * e / (1.0 - e);
                nan_or(thermal(s).map(|t| (t.entropy() - exact).abs() / exact))
            }),
            1e-10,
        ),
    ]
}

fn render(out: &Output, format: Format) -> String {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&out.json).expect("serializable");
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .flexible(true)
                .from_writer(Vec::new());
            if !out.table.header.is_empty() {
                writer
                    .write_record(&out.table.header)
                    .expect("in-memory write");
            }
            for row in &out.table.rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        Value::Null => String::new(),
                        other => other.to_string(),
                    })
                    .collect();
                writer.write_record(&cells).expect("in-memory write");
            }
            String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8")
        }
    }
}

fn emit(text: &str, output: Option<&Path>, stdout: &mut dyn Write) -> std::io::Result<()> {
    match output {
        Some(path) => fs::write(path, text),
        None => stdout.write_all(text.as_bytes()),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let GlobalOpts {
        format,
        ref output,
        tol,
        max_terms,
    } = cli.global;

    let result = EvalControl::new(tol, 0.0, max_terms)
        .map_err(Failure::from)
        .and_then(|ctl| execute(&cli.command, ctl));
    let (code, text) = match result {
        Ok(out) => (out.code, render(&out, format)),
        Err(failure) => {
            let mut text = serde_json::to_string_pretty(&failure.body).expect("serializable");
            text.push('\n');
            (failure.code, text)
        }
    };
    if let Err(e) = emit(&text, output.as_deref(), stdout) {
        let _ = writeln!(stderr, "mlfock: cannot write output: {e}");
        return EXIT_INVALID;
    }
    code
}
