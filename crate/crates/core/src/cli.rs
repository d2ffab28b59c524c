//! Command-line front end: the system document format, the example builders
//! and one subcommand per stage of the pipeline.
//!
//! Every subcommand reads a system document and writes JSON to standard
//! output. Floats are written with 17 significant digits and fields in a fixed
//! order, so equal inputs give byte-identical output. Errors go to standard
//! error as JSON with exit codes 2 (parse), 3 (validation), 4 (math domain)
//! and 5 (internal).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bvp::{expand, solve_bvp, solve_bvp_dense_oracle, BvpSolution};
use crate::eigenbasis::{boundary_residual, kernel_eigenfunctions, orthonormal_eigen_set_from};
use crate::error::SpectralError;
use crate::families;
use crate::linalg::{c64, hermitian_part, imaginary_part, max_abs, min_hermitian_eigenvalue, CMatrix};
use crate::measure::{m_integral_representation_with, spectral_function, IntegralRepresentation, Jump, SpectralStepFunction};
use crate::spectrum::{check_atkinson, eigenvalues, AtkinsonCheck, EIG_TOL};
use crate::system::{semi_norm, space_dimensions, validate_system, SpaceDimensions, ValidationReport, RANK_TOL, TOL_STRUCT};
use crate::weyl::{green_kernel, m_function, m_residue, MFunctionValue};
use crate::{BoundaryMatrix, SymplecticSystem, VectorSequence};

pub fn serialize_complex<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

pub fn serialize_complex_vec<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

pub fn serialize_matrix<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

pub fn serialize_sequence<S: Serializer>(z: &VectorSequence, s: S) -> std::result::Result<S::Ok, S::Error> {
    let all: Vec<_> = z.values().iter().map(matrix_rows).collect();
    all.serialize(s)
}

fn serialize_matrix_vec<S: Serializer>(v: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
    let all: Vec<_> = v.iter().map(matrix_rows).collect();
    all.serialize(s)
}

/// Row-major matrix with complex entries as `[re, im]`.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_rows(rows: &MatrixRows) -> std::result::Result<CMatrix, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err("matrix must have at least one row and one column".into());
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err("matrix rows have different lengths".into());
    }
    Ok(CMatrix::from_fn(r, c, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

// ---------------------------------------------------------------------------
// Errors and exit codes

#[derive(Debug)]
pub enum CliError {
    /// Unreadable input or a document that does not match the schema.
    Parse(String),
    /// The document parses but the system or a boundary matrix is invalid.
    Validation { message: String, report: Option<ValidationReport> },
    Spectral(SpectralError),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation { .. } => 3,
            CliError::Internal(_) => 5,
            CliError::Spectral(e) => match e {
                SpectralError::IndexOutOfRange { .. } => 2,
                SpectralError::Dimension(_) | SpectralError::InvalidBoundary { .. } => 3,
                SpectralError::NumericalConsistency { .. } | SpectralError::Overflow(_) | SpectralError::NoConvergence => 5,
                _ => 4,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "parse",
            3 => "validation",
            4 => "math-domain",
            _ => "internal",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Parse(m) | CliError::Internal(m) => m.clone(),
            CliError::Validation { message, .. } => message.clone(),
            CliError::Spectral(e) => e.to_string(),
        }
    }

    /// Structured form written to standard error.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'static str,
            exit_code: i32,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            report: Option<&'a ValidationReport>,
        }
        let report = match self {
            CliError::Validation { report, .. } => report.as_ref(),
            _ => None,
        };
        let payload = Payload { error: self.kind(), exit_code: self.exit_code(), message: self.message(), report };
        to_json_string(&payload).unwrap_or_else(|_| format!("{{\"error\": \"{}\"}}", self.kind()))
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::Spectral(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message())
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Deterministic JSON

/// `x` with 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes with fixed float formatting; arrays of scalars stay on one line.
pub fn to_json_string<T: Serialize>(value: &T) -> CliResult<String> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    render(&v, 0, &mut out);
    Ok(out)
}

fn render(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap_or_default()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    render(x, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, x) in items.iter().enumerate() {
                    out.push_str(&" ".repeat(indent + 2));
                    render(x, indent + 2, out);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&" ".repeat(indent));
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                out.push_str(&" ".repeat(indent + 2));
                out.push_str(&serde_json::to_string(k).unwrap_or_default());
                out.push_str(": ");
                render(x, indent + 2, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&" ".repeat(indent));
            out.push('}');
        }
    }
}

// ---------------------------------------------------------------------------
// System documents

/// On-disk form of a system and, optionally, its boundary matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub n: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "S")]
    pub s: Vec<MatrixRows>,
    #[serde(rename = "Psi")]
    pub psi: Vec<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

/// A decoded and validated document.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: SymplecticSystem,
    pub alpha: Option<BoundaryMatrix>,
    pub beta: Option<BoundaryMatrix>,
    pub metadata: BTreeMap<String, String>,
}

impl SystemDocument {
    pub fn from_system(sys: &SymplecticSystem, alpha: Option<&BoundaryMatrix>, beta: Option<&BoundaryMatrix>) -> Self {
        Self {
            n: sys.n(),
            horizon: sys.horizon(),
            s: sys.s_all().iter().map(matrix_rows).collect(),
            psi: sys.psi_all().iter().map(matrix_rows).collect(),
            alpha: alpha.map(|a| matrix_rows(a.matrix())),
            beta: beta.map(|b| matrix_rows(b.matrix())),
            metadata: BTreeMap::new(),
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("not a system document: {e}")))
    }

    pub fn to_json(&self) -> CliResult<String> {
        to_json_string(self)
    }

    /// Builds the system and checks every structural hypothesis.
    pub fn decode(&self) -> CliResult<LoadedSystem> {
        let count = self.horizon + 1;
        if self.s.len() != count || self.psi.len() != count {
            return Err(CliError::Parse(format!(
                "N = {} needs {count} matrices S and Psi, got {} and {}",
                self.horizon,
                self.s.len(),
                self.psi.len()
            )));
        }
        let read = |rows: &MatrixRows, what: String| -> CliResult<CMatrix> {
            let m = matrix_from_rows(rows).map_err(|e| CliError::Parse(format!("{what}: {e}")))?;
            if m.shape() != (2 * self.n, 2 * self.n) {
                return Err(CliError::Parse(format!("{what} must be {0}x{0}, got {1:?}", 2 * self.n, m.shape())));
            }
            Ok(m)
        };
        let s = self.s.iter().enumerate().map(|(k, m)| read(m, format!("S[{k}]"))).collect::<CliResult<Vec<_>>>()?;
        let psi =
            self.psi.iter().enumerate().map(|(k, m)| read(m, format!("Psi[{k}]"))).collect::<CliResult<Vec<_>>>()?;
        let system = SymplecticSystem::new(self.n, s, psi).map_err(|e| CliError::Parse(e.to_string()))?;
        let report = validate_system(&system, TOL_STRUCT);
        if !report.passed {
            let failing: Vec<String> =
                report.failing().map(|c| format!("{} at {:?}", c.name, c.failing_indices)).collect();
            return Err(CliError::Validation {
                message: format!("system fails validation: {}", failing.join("; ")),
                report: Some(report),
            });
        }
        let boundary = |rows: &Option<MatrixRows>, name: &str| -> CliResult<Option<BoundaryMatrix>> {
            rows.as_ref()
                .map(|r| {
                    let m = matrix_from_rows(r).map_err(|e| CliError::Parse(format!("{name}: {e}")))?;
                    boundary_from_matrix(m, self.n, name)
                })
                .transpose()
        };
        Ok(LoadedSystem {
            alpha: boundary(&self.alpha, "alpha")?,
            beta: boundary(&self.beta, "beta")?,
            system,
            metadata: self.metadata.clone(),
        })
    }
}

fn boundary_from_matrix(m: CMatrix, n: usize, name: &str) -> CliResult<BoundaryMatrix> {
    if m.shape() != (n, 2 * n) {
        return Err(CliError::Validation {
            message: format!("{name} must be {n}x{}, got {:?}", 2 * n, m.shape()),
            report: None,
        });
    }
    BoundaryMatrix::new(m).map_err(|e| CliError::Validation { message: format!("{name}: {e}"), report: None })
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

pub fn load_system(path: &Path) -> CliResult<LoadedSystem> {
    SystemDocument::parse(&read_file(path)?)?.decode()
}

pub fn save_system(path: &Path, doc: &SystemDocument) -> CliResult<()> {
    let mut text = doc.to_json()?;
    text.push('\n');
    write_file(path, &text)
}

/// A sequence `z_0, …, z_{N+1}` of `2n × m` blocks. Output of `solve` is
/// accepted as is (its `z` field).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceDocument {
    #[serde(alias = "z")]
    pub sequence: Vec<MatrixRows>,
}

impl SequenceDocument {
    pub fn from_sequence(z: &VectorSequence) -> Self {
        Self { sequence: z.values().iter().map(matrix_rows).collect() }
    }

    pub fn decode(&self) -> CliResult<VectorSequence> {
        let blocks = self
            .sequence
            .iter()
            .enumerate()
            .map(|(k, m)| matrix_from_rows(m).map_err(|e| CliError::Parse(format!("sequence[{k}]: {e}"))))
            .collect::<CliResult<Vec<_>>>()?;
        VectorSequence::new(blocks).map_err(|e| CliError::Parse(e.to_string()))
    }
}

pub fn load_sequence(path: &Path) -> CliResult<VectorSequence> {
    let doc: SequenceDocument = serde_json::from_str(&read_file(path)?)
        .map_err(|e| CliError::Parse(format!("not a sequence document: {e}")))?;
    doc.decode()
}

// ---------------------------------------------------------------------------
// Example builders

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// `S_k = I`, `Ψ_k = diag{0, v_{k+1} − v_k}`.
    SlScalar,
    /// `S_k = I_4`, `Ψ_k = [[aI, √(ab)I], [√(ab)I, bI]]`.
    BlockAb,
}

#[derive(Debug, Clone, Default)]
pub struct ExampleParams {
    pub v: Vec<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub horizon: Option<usize>,
}

pub fn build_example(
    family: Family,
    params: &ExampleParams,
    alpha: Option<&BoundaryMatrix>,
    beta: Option<&BoundaryMatrix>,
) -> CliResult<SystemDocument> {
    let domain = |e: SpectralError| CliError::Spectral(e);
    let (sys, meta) = match family {
        Family::SlScalar => {
            let sys = families::sl_scalar(&params.v).map_err(domain)?;
            let v: Vec<String> = params.v.iter().map(|x| x.to_string()).collect();
            (sys, vec![("family", "sl-scalar".to_string()), ("v", v.join(","))])
        }
        Family::BlockAb => {
            let missing = |what: &str| CliError::Parse(format!("block-ab needs --{what}"));
            let a = params.a.ok_or_else(|| missing("a"))?;
            let b = params.b.ok_or_else(|| missing("b"))?;
            let horizon = params.horizon.ok_or_else(|| missing("horizon"))?;
            let sys = families::block_ab(a, b, horizon).map_err(domain)?;
            (
                sys,
                vec![
                    ("family", "block-ab".to_string()),
                    ("a", a.to_string()),
                    ("b", b.to_string()),
                    ("N", horizon.to_string()),
                ],
            )
        }
    };
    for m in alpha.iter().chain(beta.iter()) {
        if m.n() != sys.n() {
            return Err(CliError::Validation {
                message: format!("boundary matrix has n = {}, the system has n = {}", m.n(), sys.n()),
                report: None,
            });
        }
    }
    let mut doc = SystemDocument::from_system(&sys, alpha, beta);
    doc.metadata = meta.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Ok(doc)
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "symspec", version, about = "Spectral analysis of discrete symplectic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// System document (JSON).
    pub system: PathBuf,
    /// Left boundary matrix; overrides the document. Real rows as
    /// `1,0;0,1`, or a JSON matrix of `[re, im]` entries.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Right boundary matrix, same forms as `--alpha`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural hypotheses on (S, Ψ).
    Validate {
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Eigenvalues with multiplicities.
    Spectrum {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = EIG_TOL)]
        tol: f64,
    },
    /// Weak Atkinson condition at the given probe points.
    Atkinson {
        #[command(flatten)]
        sys: SystemArgs,
        /// Probe points `RE,IM`.
        #[arg(long, num_args = 1.., value_parser = parse_complex, allow_hyphen_values = true)]
        probes: Vec<Complex64>,
    },
    /// The Weyl–Titchmarsh function at one point.
    Mfunction {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        /// Also rebuild M from the spectral function.
        #[arg(long)]
        check_representation: bool,
    },
    /// One row `G_{k,0}, …, G_{k,N+1}` of the Green kernel.
    Green {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        row: usize,
    },
    /// Nonhomogeneous boundary value problem.
    Solve {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        /// Forcing sequence document.
        #[arg(long)]
        rhs: PathBuf,
        /// Left boundary datum, n values `RE,IM` (default 0).
        #[arg(long, num_args = 1.., value_parser = parse_complex, allow_hyphen_values = true)]
        xi: Vec<Complex64>,
        /// Use the dense stacked solve (also valid at eigenvalues).
        #[arg(long)]
        oracle: bool,
    },
    /// Eigenfunction expansion of a solution at λ = 0.
    Expand {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        zhat: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
    },
    /// Spectral step function τ.
    SpectralFn {
        #[command(flatten)]
        sys: SystemArgs,
        /// Write tab-separated samples of τ for plotting.
        #[arg(long)]
        emit_plot: Option<PathBuf>,
    },
    /// Summary of every stage with consistency checks.
    Report {
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Write a system document for one of the built-in families.
    BuildExample {
        #[arg(value_enum)]
        family: Family,
        /// sl-scalar: the sequence v_0 = 0 ≤ v_1 ≤ … ≤ v_{N+1}.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v: Vec<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
        /// Output file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `RE,IM` (or a bare real number).
pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    let z = match parts.as_slice() {
        [re] => c64(num(re)?, 0.0),
        [re, im] => c64(num(re)?, num(im)?),
        _ => return Err(format!("expected RE,IM, got `{s}`")),
    };
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(z)
}

/// Reads `--alpha`/`--beta`: `1,0;0,1` for real rows or a JSON matrix.
pub fn parse_boundary(text: &str, n: usize, name: &str) -> CliResult<BoundaryMatrix> {
    let text = text.trim();
    let m = if text.starts_with('[') {
        let rows: MatrixRows =
            serde_json::from_str(text).map_err(|e| CliError::Parse(format!("--{name}: {e}")))?;
        matrix_from_rows(&rows).map_err(|e| CliError::Parse(format!("--{name}: {e}")))?
    } else {
        let rows = text
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|t| t.trim().parse::<f64>().map(|x| [x, 0.0]))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<MatrixRows, _>>()
            .map_err(|e| CliError::Parse(format!("--{name}: {e}")))?;
        matrix_from_rows(&rows).map_err(|e| CliError::Parse(format!("--{name}: {e}")))?
    };
    boundary_from_matrix(m, n, name)
}

struct Context {
    loaded: LoadedSystem,
}

impl Context {
    fn open(args: &SystemArgs) -> CliResult<Self> {
        let mut loaded = load_system(&args.system)?;
        let n = loaded.system.n();
        if let Some(a) = &args.alpha {
            loaded.alpha = Some(parse_boundary(a, n, "alpha")?);
        }
        if let Some(b) = &args.beta {
            loaded.beta = Some(parse_boundary(b, n, "beta")?);
        }
        Ok(Self { loaded })
    }

    fn sys(&self) -> &SymplecticSystem {
        &self.loaded.system
    }

    fn alpha(&self) -> CliResult<&BoundaryMatrix> {
        self.loaded.alpha.as_ref().ok_or_else(|| CliError::Parse("no alpha in the document or on the command line".into()))
    }

    fn beta(&self) -> CliResult<&BoundaryMatrix> {
        self.loaded.beta.as_ref().ok_or_else(|| CliError::Parse("no beta in the document or on the command line".into()))
    }
}

#[derive(Serialize)]
struct ValidateOutput {
    passed: bool,
    report: ValidationReport,
    dimensions: SpaceDimensions,
    n: usize,
    #[serde(rename = "N")]
    horizon: usize,
}

#[derive(Serialize)]
struct MFunctionOutput {
    value: MFunctionValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    representation: Option<IntegralRepresentation>,
}

#[derive(Serialize)]
struct GreenRow {
    #[serde(serialize_with = "serialize_complex")]
    lambda: Complex64,
    row: usize,
    /// `G_{row, j}` for `j = 0, …, N + 1`.
    #[serde(serialize_with = "serialize_matrix_vec")]
    entries: Vec<CMatrix>,
}

/// Runs one parsed command and returns the text for standard output.
pub fn execute(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Validate { sys } => {
            let ctx = Context::open(&sys)?;
            let report = validate_system(ctx.sys(), TOL_STRUCT);
            to_json_string(&ValidateOutput {
                passed: report.passed,
                report,
                dimensions: space_dimensions(ctx.sys(), RANK_TOL),
                n: ctx.sys().n(),
                horizon: ctx.sys().horizon(),
            })
        }
        Command::Spectrum { sys, tol } => {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(CliError::Parse(format!("--tol must be positive, got {tol}")));
            }
            let ctx = Context::open(&sys)?;
            to_json_string(&eigenvalues(ctx.sys(), ctx.alpha()?, ctx.beta()?, tol)?)
        }
        Command::Atkinson { sys, probes } => {
            let ctx = Context::open(&sys)?;
            to_json_string(&check_atkinson(ctx.sys(), ctx.alpha()?, &probes)?)
        }
        Command::Mfunction { sys, lambda, check_representation } => {
            let ctx = Context::open(&sys)?;
            let (s, a, b) = (ctx.sys(), ctx.alpha()?, ctx.beta()?);
            let value = m_function(s, a, b, lambda)?;
            let representation = if check_representation {
                let tau = spectral_function(s, a, b)?;
                Some(m_integral_representation_with(s, a, b, &tau, lambda)?)
            } else {
                None
            };
            to_json_string(&MFunctionOutput { value, representation })
        }
        Command::Green { sys, lambda, row } => {
            let ctx = Context::open(&sys)?;
            let kernel = green_kernel(ctx.sys(), ctx.alpha()?, ctx.beta()?, lambda)?;
            to_json_string(&GreenRow { lambda, row, entries: kernel.row(row)? })
        }
        Command::Solve { sys, lambda, rhs, xi, oracle } => {
            let ctx = Context::open(&sys)?;
            let f = load_sequence(&rhs)?;
            let n = ctx.sys().n();
            let xi = match xi.len() {
                0 => None,
                len if len == n => Some(CMatrix::from_column_slice(n, 1, &xi)),
                len => return Err(CliError::Parse(format!("--xi needs {n} values, got {len}"))),
            };
            let solution: BvpSolution = if oracle {
                solve_bvp_dense_oracle(ctx.sys(), ctx.alpha()?, ctx.beta()?, lambda, &f, xi.as_ref())?
            } else {
                solve_bvp(ctx.sys(), ctx.alpha()?, ctx.beta()?, lambda, &f, xi.as_ref())?
            };
            to_json_string(&solution)
        }
        Command::Expand { sys, zhat, rhs } => {
            let ctx = Context::open(&sys)?;
            let z = load_sequence(&zhat)?;
            let f = load_sequence(&rhs)?;
            to_json_string(&expand(ctx.sys(), ctx.alpha()?, ctx.beta()?, &z, &f)?)
        }
        Command::SpectralFn { sys, emit_plot } => {
            let ctx = Context::open(&sys)?;
            let tau = spectral_function(ctx.sys(), ctx.alpha()?, ctx.beta()?)?;
            if let Some(path) = emit_plot {
                write_file(&path, &plot_table(&tau))?;
            }
            to_json_string(&tau)
        }
        Command::Report { sys } => {
            let ctx = Context::open(&sys)?;
            to_json_string(&report(ctx.sys(), ctx.alpha()?, ctx.beta()?)?)
        }
        Command::BuildExample { family, v, a, b, horizon, alpha, beta, out } => {
            let n = match family {
                Family::SlScalar => 1,
                Family::BlockAb => 2,
            };
            let alpha = alpha.map(|t| parse_boundary(&t, n, "alpha")).transpose()?;
            let beta = beta.map(|t| parse_boundary(&t, n, "beta")).transpose()?;
            let doc = build_example(family, &ExampleParams { v, a, b, horizon }, alpha.as_ref(), beta.as_ref())?;
            let text = doc.to_json()?;
            match out {
                Some(path) => {
                    save_system(&path, &doc)?;
                    to_json_string(&serde_json::json!({ "written": path.display().to_string() }))
                }
                None => Ok(text),
            }
        }
    }
}

/// Samples of `τ` for a step plot: both one-sided values at every jump, `0`,
/// and one point beyond each end. Tab-separated with a header line.
pub fn plot_table(tau: &SpectralStepFunction) -> String {
    let n = tau.n;
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("re_{i}{j}"));
            header.push(format!("im_{i}{j}"));
        }
    }
    let lo = tau.jumps.first().map_or(0.0, |j| j.t.min(0.0)) - 1.0;
    let hi = tau.jumps.last().map_or(0.0, |j| j.t.max(0.0)) + 1.0;
    let mut rows: Vec<(f64, CMatrix)> = vec![(lo, tau.tau_at(lo))];
    if !tau.jumps.iter().any(|j| j.t == 0.0) {
        rows.push((0.0, tau.tau_at(0.0)));
    }
    for jump in &tau.jumps {
        rows.push((jump.t, tau.tau_left(jump.t)));
        rows.push((jump.t, tau.tau_at(jump.t)));
    }
    rows.push((hi, tau.tau_at(hi)));
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = header.join("\t");
    out.push('\n');
    for (t, m) in rows {
        let mut line = vec![format_float(t)];
        for i in 0..n {
            for j in 0..n {
                line.push(format_float(m[(i, j)].re));
                line.push(format_float(m[(i, j)].im));
            }
        }
        out.push_str(&line.join("\t"));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Report

/// Points where the report samples `M(λ)`.
pub const REPORT_SAMPLES: [Complex64; 3] = [Complex64::new(0.0, 1.0), Complex64::new(1.0, 1.0), Complex64::new(-2.0, 0.5)];

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub degenerate: bool,
    pub atkinson_holds: bool,
    pub complex_warning: bool,
    pub poly_degree: usize,
    #[serde(serialize_with = "serialize_complex_vec")]
    pub eigenvalues: Vec<Complex64>,
    pub total_alg: usize,
    pub total_geom: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenfunctionRow {
    pub lambda: f64,
    pub alg_mult: usize,
    pub geom_mult: usize,
    /// `‖Z̃(λ) ξ‖_Ψ` for the orthonormal kernel basis vectors `ξ`.
    pub kernel_norms: Vec<f64>,
    /// Semi-norms of the orthonormalized eigenfunctions.
    pub orthonormal_norms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MSample {
    #[serde(serialize_with = "serialize_complex")]
    pub lambda: Complex64,
    #[serde(serialize_with = "serialize_matrix")]
    pub m: CMatrix,
}

/// A measured quantity against its bound; `upper` bounds pass when
/// `value ≤ bound`, lower bounds when `value ≥ bound`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub upper: bool,
    pub passed: bool,
}

impl CheckLine {
    fn at_most(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, value, bound, upper: true, passed: value <= bound }
    }

    fn at_least(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, value, bound, upper: false, passed: value >= bound }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub spectrum: SpectrumSummary,
    pub atkinson: AtkinsonCheck,
    pub eigenfunctions: Vec<EigenfunctionRow>,
    pub m_samples: Vec<MSample>,
    pub tau_jumps: Vec<Jump>,
    pub checks: Vec<CheckLine>,
    /// Stages that could not be evaluated and why.
    pub notes: Vec<String>,
}

pub fn report(sys: &SymplecticSystem, alpha: &BoundaryMatrix, beta: &BoundaryMatrix) -> CliResult<ReportDocument> {
    let atkinson = check_atkinson(sys, alpha, &[])?;
    let spec = eigenvalues(sys, alpha, beta, EIG_TOL)?;
    let mut notes = Vec::new();
    let mut checks = Vec::new();
    let summary = SpectrumSummary {
        degenerate: spec.degenerate,
        atkinson_holds: spec.atkinson_holds,
        complex_warning: spec.complex_warning,
        poly_degree: spec.poly_degree,
        eigenvalues: spec.eigenvalues.iter().map(|e| e.lambda).collect(),
        total_alg: spec.total_alg(),
        total_geom: spec.total_geom(),
    };
    let mismatch = spec.eigenvalues.iter().filter(|e| e.alg_mult != e.geom_mult).count();
    checks.push(CheckLine::at_most("multiplicity_mismatches", mismatch as f64, 0.0));

    let mut m_samples = Vec::new();
    let mut reflection: f64 = 0.0;
    let mut nevanlinna = f64::INFINITY;
    for &lambda in &REPORT_SAMPLES {
        match (m_function(sys, alpha, beta, lambda), m_function(sys, alpha, beta, lambda.conj())) {
            (Ok(m), Ok(mc)) => {
                let scale = 1.0 + max_abs(&m.m);
                reflection = reflection.max(max_abs(&(&mc.m - m.m.adjoint())) / scale);
                let im = imaginary_part(&m.m).scale(lambda.im.signum());
                nevanlinna = nevanlinna.min(min_hermitian_eigenvalue(&hermitian_part(&im)) / scale);
                m_samples.push(MSample { lambda, m: m.m });
            }
            (Err(e), _) | (_, Err(e)) => notes.push(format!("M at {lambda}: {e}")),
        }
    }
    if !m_samples.is_empty() {
        checks.push(CheckLine::at_most("reflection", reflection, 1e-10));
        if atkinson.holds {
            checks.push(CheckLine::at_least("nevanlinna", nevanlinna, -1e-10));
        }
    }

    let mut rows = Vec::new();
    let mut tau_jumps = Vec::new();
    if spec.degenerate {
        notes.push("degenerate spectrum: no eigenfunctions".into());
    } else if !atkinson.holds && !spec.eigenvalues.is_empty() {
        notes.push("weak Atkinson condition fails: eigenfunctions are not orthonormalized".into());
    } else {
        let set = orthonormal_eigen_set_from(sys, alpha, beta, &spec.eigenvalues)?;
        for ev in &spec.eigenvalues {
            let z = kernel_eigenfunctions(sys, alpha, beta, ev)?;
            let kernel_norms =
                (0..z.cols()).map(|i| semi_norm(sys, &z.column(i))).collect::<crate::Result<Vec<_>>>()?;
            let orthonormal_norms = set
                .entries_at(ev.lambda.re)
                .map(|e| semi_norm(sys, &e.eigenfunction))
                .collect::<crate::Result<Vec<_>>>()?;
            rows.push(EigenfunctionRow {
                lambda: ev.lambda.re,
                alg_mult: ev.alg_mult,
                geom_mult: ev.geom_mult,
                kernel_norms,
                orthonormal_norms,
            });
        }
        let tau = SpectralStepFunction::from_set(sys.n(), &set);
        if !set.is_empty() {
            let gram = set.gram(sys)?;
            let identity = CMatrix::identity(gram.nrows(), gram.ncols());
            checks.push(CheckLine::at_most("orthonormality", max_abs(&(gram - identity)), 1e-9));
            checks.push(CheckLine::at_most("eigenfunction_boundary", boundary_residual(&set, alpha, beta), 1e-9));
            let mut residue: f64 = 0.0;
            let mut jump: f64 = 0.0;
            for t in set.eigenvalues() {
                let r = m_residue(sys, alpha, beta, &set, t)?;
                residue = residue.max(r.relative_gap);
                let d = hermitian_part(&(tau.tau_at(t) - tau.tau_left(t)));
                jump = jump.max(max_abs(&(d + &r.l_minus1)));
            }
            checks.push(CheckLine::at_most("residue_vs_projector", residue, 1e-6));
            checks.push(CheckLine::at_most("tau_jump_vs_residue", jump, 1e-9));
        }
        let mut gap: f64 = 0.0;
        for &lambda in &REPORT_SAMPLES {
            match m_integral_representation_with(sys, alpha, beta, &tau, lambda) {
                Ok(rep) => gap = gap.max(rep.gap),
                Err(e) => notes.push(format!("integral representation at {lambda}: {e}")),
            }
        }
        checks.push(CheckLine::at_most("integral_representation", gap, 1e-6));
        tau_jumps = tau.jumps;
    }
    Ok(ReportDocument { spectrum: summary, atkinson, eigenfunctions: rows, m_samples, tau_jumps, checks, notes })
}

/// Parses `args` (program name first), runs the command and writes its output.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    match execute(cli) {
        Ok(text) => {
            let _ = writeln!(out, "{text}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn main_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
