//! Batch front end over the information-geometry library: parses JSON model
//! files describing finite exponential families, dispatches computations,
//! and emits machine-readable JSON documents (or CSV tables for curves).
//!
//! Every run writes one result document of the form
//! `{"command", "inputs", "result", "warnings"}` to stdout or `--out`.
//! Errors go to stderr as `{"error": {"code", "message"}}` with a stable
//! code; the process exits 0 on success, 1 on domain/math errors, and 2 on
//! usage or parse errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use infogeo_core::{
    ceva_line, curvature, fit_ahs, geodesic, gws_correlator, kl_divergence, monge_ampere_density,
    parallel_transport, trace_split_diagnostics, ConnectionField, ExponentialFamily, FamilyError,
    FrobeniusError, GeomError, LearnError, PreFrobeniusData, ProbVector, SampleSpace, SymTensor,
    Tensor3, Tensor4, TensorError,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A fully classified failure: a stable machine-readable code, the process
/// exit code it maps to, and a human-readable message.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: "usage_error", exit_code: EXIT_USAGE, message: message.into() }
    }

    fn parse(message: impl Into<String>) -> Self {
        CliError { code: "parse_error", exit_code: EXIT_USAGE, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError { code: "io_error", exit_code: EXIT_USAGE, message: message.into() }
    }

    fn domain(code: &'static str, message: impl Into<String>) -> Self {
        CliError { code, exit_code: EXIT_DOMAIN, message: message.into() }
    }

    /// The stderr document for this failure.
    pub fn to_json(&self) -> Value {
        json!({"error": {"code": self.code, "message": self.message}})
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

fn map_family(e: FamilyError) -> CliError {
    match &e {
        FamilyError::RankDeficient { .. } => CliError::domain("rank_error", e.to_string()),
        FamilyError::BadFace { .. } => CliError::domain("bad_face", e.to_string()),
        FamilyError::InvalidProbability(_) => {
            CliError::domain("invalid_probability", e.to_string())
        }
        FamilyError::NonFinite(_) => CliError::domain("non_finite", e.to_string()),
        FamilyError::DimMismatch { .. } => CliError::usage(e.to_string()),
        FamilyError::InvalidFamily(_) => CliError::usage(e.to_string()),
    }
}

fn map_tensor(e: TensorError) -> CliError {
    match &e {
        TensorError::SingularMetric { .. } => CliError::domain("singular_metric", e.to_string()),
        TensorError::NotSymmetric { .. } => CliError::domain("not_symmetric", e.to_string()),
        TensorError::EvalFailed(_) => CliError::domain("eval_error", e.to_string()),
        TensorError::DimMismatch { .. } | TensorError::UnsupportedOrder(_) => {
            CliError::usage(e.to_string())
        }
    }
}

fn map_geom(e: GeomError) -> CliError {
    match e {
        GeomError::Tensor(t) => map_tensor(t),
        GeomError::Family(f) => map_family(f),
        GeomError::DegeneratePlane { .. } => {
            CliError::domain("degenerate_plane", e_string(&e))
        }
        GeomError::BlowUp { .. } | GeomError::TransportBlowUp { .. } => {
            CliError::domain("blow_up", e_string(&e))
        }
        GeomError::NonFinite => CliError::domain("non_finite", e_string(&e)),
        GeomError::BadInput(_) => CliError::usage(e_string(&e)),
    }
}

fn map_frobenius(e: FrobeniusError) -> CliError {
    match e {
        FrobeniusError::Tensor(t) => map_tensor(t),
        FrobeniusError::Family(f) => map_family(f),
        FrobeniusError::Geometry(g) => map_geom(g),
        FrobeniusError::NotAssociative { .. } => {
            CliError::domain("not_associative", e_string(&e))
        }
        FrobeniusError::NotSemisimple(_) => CliError::domain("not_semisimple", e_string(&e)),
        FrobeniusError::BadInput(_) => CliError::usage(e_string(&e)),
    }
}

fn map_learn(e: LearnError) -> CliError {
    match e {
        LearnError::Family(f) => map_family(f),
        LearnError::Tensor(t) => map_tensor(t),
        LearnError::NoDescent { .. } => CliError::domain("no_descent", e_string(&e)),
        LearnError::IterLimit { .. } => CliError::domain("iter_limit", e_string(&e)),
        LearnError::DimMismatch { .. }
        | LearnError::UnsupportedOrder(_)
        | LearnError::BadInput(_) => CliError::usage(e_string(&e)),
    }
}

fn e_string(e: &dyn std::error::Error) -> String {
    e.to_string()
}

/// Parameter sign convention. Under `minus` the user-facing parameters are
/// `beta = -theta`: densities read `exp(-beta . X - psi)`, inputs are
/// negated on the way in, and parameter-space outputs (points, tangent
/// vectors, odd-order derivative tensors) are transformed back on the way
/// out.
#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, Default, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    fn is_minus(self) -> bool {
        self == Sign::Minus
    }

    /// Negates a parameter-space vector when the convention is `minus`.
    fn flip_vec(self, v: &[f64]) -> Vec<f64> {
        if self.is_minus() {
            v.iter().map(|x| -x).collect()
        } else {
            v.to_vec()
        }
    }

    /// Scale factor for a derivative tensor with the given total number of
    /// parameter indices.
    fn tensor_scale(self, indices: usize) -> f64 {
        if self.is_minus() && indices % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

/// On-disk model description of a finite exponential family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Outcome labels; must be unique and non-empty.
    pub omega: Vec<String>,
    /// m x n statistics matrix, one row per outcome.
    pub stats: Vec<Vec<f64>>,
    /// Optional positive base weights, one per outcome (counting measure
    /// when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_weights: Option<Vec<f64>>,
    /// Default sign convention for this model; the `--sign` flag overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_convention: Option<Sign>,
}

/// Reads and validates a model file without building the family.
pub fn read_spec(path: &Path) -> Result<ModelSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

/// Constructs the exponential family a spec describes. Rank deficiency is
/// a domain error; all other construction failures are malformed input.
pub fn build_family(spec: &ModelSpec) -> Result<ExponentialFamily, CliError> {
    let space = SampleSpace::new(spec.omega.clone()).map_err(construction_error)?;
    let fam = match &spec.base_weights {
        Some(w) => ExponentialFamily::with_weights(space, spec.stats.clone(), w.clone()),
        None => ExponentialFamily::new(space, spec.stats.clone()),
    };
    fam.map_err(construction_error)
}

fn construction_error(e: FamilyError) -> CliError {
    match &e {
        FamilyError::RankDeficient { .. } => CliError::domain("rank_error", e.to_string()),
        _ => CliError::parse(e.to_string()),
    }
}

/// Loads a model file into a validated family.
pub fn parse_model(path: &Path) -> Result<ExponentialFamily, CliError> {
    build_family(&read_spec(path)?)
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "infogeo",
    version,
    about = "Information geometry of finite exponential families: Fisher metrics, \
             alpha-connections, geodesics, Frobenius/WDVV diagnostics, paracomplex \
             trace splittings, and KL moment-matching fits over JSON model files."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the result document to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Path to a JSON model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated natural parameters; defaults to the origin.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Parameter sign convention; overrides the model file's default.
    #[arg(long, value_enum)]
    pub sign: Option<Sign>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fisher information matrix at a parameter point.
    Metric(ModelArgs),
    /// Totally symmetric cubic tensor of the scores at a parameter point.
    Tensor3(ModelArgs),
    /// All-lower alpha-connection coefficients at a parameter point.
    Connection {
        #[command(flatten)]
        model: ModelArgs,
        /// Interpolation parameter (1 = exponential, 0 = metric, -1 = mixture).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
    },
    /// Curvature tensor R^l_jkm of an alpha-connection.
    Curvature {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
    },
    /// Integrate the geodesic of an alpha-connection (JSON or CSV).
    Geodesic {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        /// Comma-separated initial velocity.
        #[arg(long, allow_hyphen_values = true)]
        v0: String,
        /// Integration horizon; negative integrates backwards.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        t_end: f64,
        /// Number of fixed RK4 steps.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Parallel-transport a vector along the geodesic from theta.
    Transport {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        /// Comma-separated initial geodesic velocity.
        #[arg(long, allow_hyphen_values = true)]
        v0: String,
        /// Comma-separated vector to transport.
        #[arg(long, allow_hyphen_values = true)]
        w0: String,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        t_end: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Associativity (WDVV) residual of the statistical multiplication at theta.
    Wdvv(ModelArgs),
    /// Structure-connection residuals and the idempotent basis at theta.
    Frobenius(ModelArgs),
    /// Point on a Ceva segment of the probability simplex.
    Ceva {
        /// Number of outcomes.
        #[arg(long)]
        m: usize,
        /// Vertex the segment starts from.
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        /// Position along the segment in logistic time.
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Comma-separated law on the face opposite the vertex (its entry at
        /// the vertex must be zero); defaults to uniform off the vertex.
        #[arg(long, allow_hyphen_values = true)]
        q: Option<String>,
    },
    /// Relative entropy KL(p || q) between two laws on the same outcomes.
    Kl {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    /// Fit the family to a target law by KL moment matching.
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated strictly positive target law.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// Initial gradient step.
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Convergence tolerance on the moment residual (infinity norm).
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
    },
    /// Order-n cumulant correlator tensor of the statistics at theta.
    Correlator {
        #[command(flatten)]
        model: ModelArgs,
        /// Tensor order, 1 through 4.
        #[arg(long)]
        order: usize,
    },
    /// Determinant of the Fisher metric (Monge-Ampere density) at theta.
    MongeAmpere(ModelArgs),
    /// Fit, then report paracomplex splitting distances of the trace.
    SplitDiag {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
    },
}

/// A rendered result ready to be written out.
pub enum Rendered {
    Json(Value),
    Csv(String),
}

impl Rendered {
    pub fn into_text(self) -> Result<String, CliError> {
        match self {
            Rendered::Json(v) => serde_json::to_string_pretty(&v)
                .map(|mut s| {
                    s.push('\n');
                    s
                })
                .map_err(|e| CliError::io(e.to_string())),
            Rendered::Csv(s) => Ok(s),
        }
    }
}

/// Parses `--flag a,b,c` into numbers.
fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| CliError::usage(format!("--{flag}: '{tok}' is not a number")))
        })
        .collect()
}

fn parse_prob(flag: &str, text: &str) -> Result<ProbVector, CliError> {
    ProbVector::new(parse_list(flag, text)?).map_err(map_family)
}

struct ModelContext {
    fam: ExponentialFamily,
    sign: Sign,
    /// Internal (plus-convention) parameters.
    theta: Vec<f64>,
    /// Parameters exactly as the user supplied them.
    theta_user: Vec<f64>,
    model_path: String,
}

fn load_context(args: &ModelArgs) -> Result<ModelContext, CliError> {
    let spec = read_spec(&args.model)?;
    let fam = build_family(&spec)?;
    let sign = args.sign.or(spec.sign_convention).unwrap_or_default();
    let theta_user = match &args.theta {
        Some(text) => parse_list("theta", text)?,
        None => vec![0.0; fam.n()],
    };
    if theta_user.len() != fam.n() {
        return Err(CliError::usage(format!(
            "--theta has {} entries, model has {} parameters",
            theta_user.len(),
            fam.n()
        )));
    }
    let theta = sign.flip_vec(&theta_user);
    Ok(ModelContext {
        fam,
        sign,
        theta,
        theta_user,
        model_path: args.model.display().to_string(),
    })
}

impl ModelContext {
    fn point(&self) -> Result<infogeo_core::ThetaPoint, CliError> {
        self.fam.point(&self.theta).map_err(map_family)
    }

    fn inputs(&self, extra: &[(&str, Value)]) -> Value {
        let mut map = serde_json::Map::new();
        map.insert("model".into(), json!(self.model_path));
        map.insert("theta".into(), json!(self.theta_user));
        map.insert("sign".into(), json!(self.sign.as_str()));
        for (k, v) in extra {
            map.insert((*k).into(), v.clone());
        }
        Value::Object(map)
    }
}

fn doc(command: &str, inputs: Value, result: Value, warnings: Vec<String>) -> Value {
    json!({
        "command": command,
        "inputs": inputs,
        "result": result,
        "warnings": warnings,
    })
}

/// Nested-array JSON for a symmetric tensor, optionally scaled.
fn sym_json(t: &SymTensor, scale: f64) -> Value {
    fn rec(t: &SymTensor, scale: f64, prefix: &mut Vec<usize>) -> Value {
        if prefix.len() == t.order() {
            return json!(scale * t.get(prefix));
        }
        Value::Array(
            (0..t.dim())
                .map(|i| {
                    prefix.push(i);
                    let v = rec(t, scale, prefix);
                    prefix.pop();
                    v
                })
                .collect(),
        )
    }
    rec(t, scale, &mut Vec::new())
}

fn tensor3_json(t: &Tensor3, scale: f64) -> Value {
    let n = t.dim();
    json!((0..n)
        .map(|i| (0..n)
            .map(|j| (0..n).map(|k| scale * t.get(i, j, k)).collect::<Vec<_>>())
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn tensor4_json(t: &Tensor4) -> Value {
    let n = t.dim();
    json!((0..n)
        .map(|l| (0..n)
            .map(|j| (0..n)
                .map(|k| (0..n).map(|m| t.get(l, j, k, m)).collect::<Vec<_>>())
                .collect::<Vec<_>>())
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

/// CSV table with header `t,x1..xn,v1..vn`; floats printed with the
/// shortest round-trip formatting.
fn path_csv(times: &[f64], points: &[Vec<f64>], vectors: &[Vec<f64>]) -> String {
    let n = points.first().map_or(0, Vec::len);
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",x{i}");
    }
    for i in 1..=n {
        let _ = write!(s, ",v{i}");
    }
    s.push('\n');
    for row in 0..times.len() {
        let _ = write!(s, "{}", times[row]);
        for x in &points[row] {
            let _ = write!(s, ",{x}");
        }
        for v in &vectors[row] {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Sampled curve: times, points, and velocities, row for row.
type SampledCurve = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Integrates a geodesic, handling negative horizons by reflecting a
/// forward integration (the equation is quadratic in the velocity).
fn integrate_geodesic(
    conn: &ConnectionField,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<SampledCurve, CliError> {
    if t_end == 0.0 || !t_end.is_finite() {
        return Err(CliError::usage("--t-end must be non-zero and finite"));
    }
    let backwards = t_end < 0.0;
    let v_run: Vec<f64> = if backwards { v0.iter().map(|v| -v).collect() } else { v0.to_vec() };
    let path = geodesic(conn, x0, &v_run, t_end.abs(), steps).map_err(map_geom)?;
    let mut times = path.times().to_vec();
    let mut velocities: Vec<Vec<f64>> = path.velocities().to_vec();
    if backwards {
        for t in times.iter_mut() {
            // `+ 0.0` normalizes the negated origin to plain zero.
            *t = -*t + 0.0;
        }
        for v in velocities.iter_mut() {
            for c in v.iter_mut() {
                *c = -*c;
            }
        }
    }
    Ok((times, path.points().to_vec(), velocities))
}

fn flip_rows(sign: Sign, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| sign.flip_vec(r)).collect()
}

/// Executes one subcommand and renders its result document.
pub fn execute(command: &Command) -> Result<Rendered, CliError> {
    match command {
        Command::Metric(args) => {
            let ctx = load_context(args)?;
            let g = infogeo_core::fisher_metric(&ctx.fam, &ctx.point()?).map_err(map_geom)?;
            Ok(Rendered::Json(doc(
                "metric",
                ctx.inputs(&[]),
                json!({"g": sym_json(&g, 1.0)}),
                vec![],
            )))
        }
        Command::Tensor3(args) => {
            let ctx = load_context(args)?;
            let a =
                infogeo_core::amari_chentsov(&ctx.fam, &ctx.point()?).map_err(map_geom)?;
            Ok(Rendered::Json(doc(
                "tensor3",
                ctx.inputs(&[]),
                json!({"a": sym_json(&a, ctx.sign.tensor_scale(3))}),
                vec![],
            )))
        }
        Command::Connection { model, alpha } => {
            let ctx = load_context(model)?;
            let gamma = infogeo_core::alpha_connection(&ctx.fam, &ctx.point()?, *alpha)
                .map_err(map_geom)?;
            Ok(Rendered::Json(doc(
                "connection",
                ctx.inputs(&[("alpha", json!(alpha))]),
                json!({"gamma": tensor3_json(&gamma, ctx.sign.tensor_scale(3))}),
                vec![],
            )))
        }
        Command::Curvature { model, alpha } => {
            let ctx = load_context(model)?;
            let conn = ConnectionField::alpha(&ctx.fam, *alpha);
            let r = curvature(&conn, &ctx.theta).map_err(map_geom)?;
            Ok(Rendered::Json(doc(
                "curvature",
                ctx.inputs(&[("alpha", json!(alpha))]),
                json!({"r": tensor4_json(&r)}),
                vec![],
            )))
        }
        Command::Geodesic { model, alpha, v0, t_end, steps, format } => {
            let ctx = load_context(model)?;
            let v0_user = parse_list("v0", v0)?;
            let conn = ConnectionField::alpha(&ctx.fam, *alpha);
            let (times, points, velocities) = integrate_geodesic(
                &conn,
                &ctx.theta,
                &ctx.sign.flip_vec(&v0_user),
                *t_end,
                *steps,
            )?;
            let points = flip_rows(ctx.sign, &points);
            let velocities = flip_rows(ctx.sign, &velocities);
            match format {
                Format::Csv => Ok(Rendered::Csv(path_csv(&times, &points, &velocities))),
                Format::Json => Ok(Rendered::Json(doc(
                    "geodesic",
                    ctx.inputs(&[
                        ("alpha", json!(alpha)),
                        ("v0", json!(v0_user)),
                        ("t_end", json!(t_end)),
                        ("steps", json!(steps)),
                    ]),
                    json!({"times": times, "points": points, "velocities": velocities}),
                    vec![],
                ))),
            }
        }
        Command::Transport { model, alpha, v0, w0, t_end, steps, format } => {
            let ctx = load_context(model)?;
            if *t_end <= 0.0 || !t_end.is_finite() {
                return Err(CliError::usage(
                    "--t-end must be positive for transport; reverse the velocity to go backwards",
                ));
            }
            let v0_user = parse_list("v0", v0)?;
            let w0_user = parse_list("w0", w0)?;
            let conn = ConnectionField::alpha(&ctx.fam, *alpha);
            let path = geodesic(
                &conn,
                &ctx.theta,
                &ctx.sign.flip_vec(&v0_user),
                *t_end,
                *steps,
            )
            .map_err(map_geom)?;
            let vectors = parallel_transport(&conn, &path, &ctx.sign.flip_vec(&w0_user))
                .map_err(map_geom)?;
            let times = path.times().to_vec();
            let points = flip_rows(ctx.sign, path.points());
            let vectors = flip_rows(ctx.sign, &vectors);
            match format {
                Format::Csv => Ok(Rendered::Csv(path_csv(&times, &points, &vectors))),
                Format::Json => Ok(Rendered::Json(doc(
                    "transport",
                    ctx.inputs(&[
                        ("alpha", json!(alpha)),
                        ("v0", json!(v0_user)),
                        ("w0", json!(w0_user)),
                        ("t_end", json!(t_end)),
                        ("steps", json!(steps)),
                    ]),
                    json!({"times": times, "points": points, "vectors": vectors}),
                    vec![],
                ))),
            }
        }
        Command::Wdvv(args) => {
            let ctx = load_context(args)?;
            let data =
                PreFrobeniusData::from_family(&ctx.fam, &ctx.theta).map_err(map_frobenius)?;
            let residual = data.wdvv_residual(&ctx.theta).map_err(map_frobenius)?;
            Ok(Rendered::Json(doc(
                "wdvv",
                ctx.inputs(&[]),
                json!({"residual": residual}),
                vec![],
            )))
        }
        Command::Frobenius(args) => {
            let ctx = load_context(args)?;
            let data =
                PreFrobeniusData::from_family(&ctx.fam, &ctx.theta).map_err(map_frobenius)?;
            let (r1, r2) =
                data.structure_connection_residuals(&ctx.theta).map_err(map_frobenius)?;
            let mut warnings = Vec::new();
            let idempotents = match data.semisimple_idempotents(&ctx.theta) {
                Ok(es) => json!(flip_rows(ctx.sign, &es)),
                Err(e @ (FrobeniusError::NotSemisimple(_)
                | FrobeniusError::NotAssociative { .. })) => {
                    warnings.push(e.to_string());
                    Value::Null
                }
                Err(e) => return Err(map_frobenius(e)),
            };
            Ok(Rendered::Json(doc(
                "frobenius",
                ctx.inputs(&[]),
                json!({
                    "potentiality_residual": r1,
                    "wdvv_residual": r2,
                    "idempotents": idempotents,
                }),
                warnings,
            )))
        }
        Command::Ceva { m, vertex, t, q } => {
            let q_vec = match q {
                Some(text) => parse_list("q", text)?,
                None => {
                    if *m < 2 || *vertex >= *m {
                        return Err(CliError::usage(
                            "--m must be at least 2 and --vertex must be inside 0..m",
                        ));
                    }
                    let off = 1.0 / (*m as f64 - 1.0);
                    (0..*m).map(|j| if j == *vertex { 0.0 } else { off }).collect()
                }
            };
            let p = ceva_line(*m, *vertex, *t, &q_vec).map_err(map_family)?;
            Ok(Rendered::Json(doc(
                "ceva",
                json!({"m": m, "vertex": vertex, "t": t, "q": q_vec}),
                json!({"p": p.as_slice()}),
                vec![],
            )))
        }
        Command::Kl { p, q } => {
            let pv = parse_prob("p", p)?;
            let qv = parse_prob("q", q)?;
            let kl = kl_divergence(&pv, &qv).map_err(map_learn)?;
            Ok(Rendered::Json(doc(
                "kl",
                json!({"p": pv.as_slice(), "q": qv.as_slice()}),
                json!({"kl": kl}),
                vec![],
            )))
        }
        Command::Fit { model, target, step, tol, max_iter } => {
            let ctx = load_context(model)?;
            let target_vec = parse_prob("target", target)?;
            let (point, trace) =
                fit_ahs(&ctx.fam, &target_vec, *step, *tol, *max_iter).map_err(map_learn)?;
            let last = trace.iterations().last().expect("fit trace is never empty");
            Ok(Rendered::Json(doc(
                "fit",
                ctx.inputs(&[
                    ("target", json!(target_vec.as_slice())),
                    ("step", json!(step)),
                    ("tol", json!(tol)),
                    ("max_iter", json!(max_iter)),
                ]),
                json!({
                    "theta": ctx.sign.flip_vec(point.theta()),
                    "converged": trace.converged(),
                    "iterations": trace.len(),
                    "kl": last.kl_value(),
                    "moment_residual": last.moment_residual(),
                    "step_size": trace.step_size(),
                }),
                vec![],
            )))
        }
        Command::Correlator { model, order } => {
            let ctx = load_context(model)?;
            let c = gws_correlator(&ctx.fam, &ctx.point()?, *order).map_err(map_learn)?;
            Ok(Rendered::Json(doc(
                "correlator",
                ctx.inputs(&[("order", json!(order))]),
                json!({
                    "order": order,
                    "tensor": sym_json(c.tensor(), ctx.sign.tensor_scale(*order)),
                }),
                vec![],
            )))
        }
        Command::MongeAmpere(args) => {
            let ctx = load_context(args)?;
            let density =
                monge_ampere_density(&ctx.fam, &ctx.point()?).map_err(map_frobenius)?;
            Ok(Rendered::Json(doc(
                "monge-ampere",
                ctx.inputs(&[]),
                json!({"density": density}),
                vec![],
            )))
        }
        Command::SplitDiag { model, target, step, tol, max_iter } => {
            let ctx = load_context(model)?;
            let target_vec = parse_prob("target", target)?;
            let (_, trace) =
                fit_ahs(&ctx.fam, &target_vec, *step, *tol, *max_iter).map_err(map_learn)?;
            let distances = trace_split_diagnostics(&trace, &ctx.fam).map_err(map_learn)?;
            Ok(Rendered::Json(doc(
                "split-diag",
                ctx.inputs(&[
                    ("target", json!(target_vec.as_slice())),
                    ("step", json!(step)),
                    ("tol", json!(tol)),
                    ("max_iter", json!(max_iter)),
                ]),
                json!({"distances": distances, "converged": trace.converged()}),
                vec![],
            )))
        }
    }
}

/// Runs a parsed invocation end to end: execute, render, write.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let text = execute(&cli.command)?.into_text()?;
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing_accepts_negatives_and_rejects_garbage() {
        assert_eq!(parse_list("theta", "-0.5, 1.5,2").unwrap(), vec![-0.5, 1.5, 2.0]);
        let err = parse_list("theta", "1,abc").unwrap_err();
        assert_eq!(err.code, "usage_error");
        assert_eq!(err.exit_code, EXIT_USAGE);
    }

    #[test]
    fn model_spec_round_trips_through_serde() {
        let text = r#"{
            "omega": ["H", "T"],
            "stats": [[1.0], [0.0]],
            "base_weights": [3.0, 1.0],
            "sign_convention": "minus"
        }"#;
        let spec: ModelSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.omega, vec!["H", "T"]);
        assert_eq!(spec.sign_convention, Some(Sign::Minus));
        let back = serde_json::to_string(&spec).unwrap();
        let again: ModelSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(again.stats, spec.stats);

        // Unknown fields are malformed, not silently ignored.
        assert!(serde_json::from_str::<ModelSpec>(
            r#"{"omega": ["a","b"], "stats": [[1],[0]], "extra": 1}"#
        )
        .is_err());
    }

    #[test]
    fn sign_convention_transforms() {
        assert_eq!(Sign::Minus.flip_vec(&[1.0, -2.0]), vec![-1.0, 2.0]);
        assert_eq!(Sign::Plus.flip_vec(&[1.0, -2.0]), vec![1.0, -2.0]);
        assert_eq!(Sign::Minus.tensor_scale(2), 1.0);
        assert_eq!(Sign::Minus.tensor_scale(3), -1.0);
        assert_eq!(Sign::Plus.tensor_scale(3), 1.0);
    }

    #[test]
    fn csv_table_has_coordinate_and_vector_columns() {
        let csv = path_csv(
            &[0.0, 0.5],
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
            &[vec![5.0, 6.0], vec![7.0, 8.0]],
        );
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,v1,v2");
        assert_eq!(lines.next().unwrap(), "0,1,2,5,6");
        assert_eq!(lines.next().unwrap(), "0.5,3,4,7,8");
        assert!(lines.next().is_none());
    }

    #[test]
    fn error_documents_carry_stable_codes() {
        let e = CliError::domain("blow_up", "diverged");
        assert_eq!(e.to_json()["error"]["code"], "blow_up");
        assert_eq!(e.exit_code, EXIT_DOMAIN);
        let e = CliError::parse("bad json");
        assert_eq!(e.exit_code, EXIT_USAGE);
    }

    #[test]
    fn nested_tensor_serialization_shapes() {
        let g = SymTensor::from_fn_sym(2, 2, |idx| (idx[0] + idx[1]) as f64);
        let v = sym_json(&g, 1.0);
        assert_eq!(v, json!([[0.0, 1.0], [1.0, 2.0]]));
        let v = sym_json(&g, -1.0);
        assert_eq!(v, json!([[-0.0, -1.0], [-1.0, -2.0]]));
    }
}
