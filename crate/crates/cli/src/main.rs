use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use unifact::chart::FiberChart;
use unifact::factor::{
    factor_constant, factor_sl2_poly, peel_last_row, preimage_last_row, verify_exact, verify_numeric, whitehead_diag,
    PolyMatrix2,
};
use unifact::json::{
    from_value, point_from_json, point_to_json, vector_from_json, vector_to_json, ChainJson, ChartJson, ComplexJson,
    MatrixJson, MatrixSampleJson, PathSampleJson, PointEntryJson, PolyFactorsJson, PolyJson, PolyMatrixJson,
    RankReportJson, SingularImageJson, TrackRecordJson, VarJson, VerifyJson,
};
use unifact::matrix::Matrix;
use unifact::polyring::VarId;
use unifact::sampling::{onto_singular_set, random_chain_disc, rng};
use unifact::scalar::distance;
use unifact::spray::{span_rank, stratum_index, ShearField};
use unifact::submersion::{
    rank_report, singular_image_check, symbolic_components_with_budget, term_budget_from_env, TERM_BUDGET_ENV,
};
use unifact::tracker::{factor_matrix_path, track_path, PathProblem, TrackerConfig};
use unifact::unipotent::{FactorChain, Orientation};
use unifact::{ErrorClass, C64};

#[derive(Parser, Debug, Serialize)]
#[command(name = "unifact", version, about = "Unipotent factorization toolkit with JSON input and output")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Global {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for parallel batches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cap on stored terms during symbolic expansion; overrides the environment.
    #[arg(long, global = true)]
    term_budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
enum OrientationArg {
    Direct,
    Inverse,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::Direct => Orientation::Direct,
            OrientationArg::Inverse => Orientation::Inverse,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
enum Command {
    /// Evaluate the last-row map at a point.
    Phi {
        #[arg(long)]
        n: usize,
        #[arg(long = "K")]
        #[serde(rename = "K")]
        k: usize,
        /// Flat coordinate vector or chain JSON.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, value_enum, default_value_t = OrientationArg::Inverse)]
        orientation: OrientationArg,
    },
    /// Symbolic components of the last-row map.
    Components {
        #[arg(long)]
        n: usize,
        #[arg(long = "K")]
        #[serde(rename = "K")]
        k: usize,
    },
    /// Jacobian of the last-row map, symbolic or at a point.
    Jacobian {
        #[arg(long)]
        n: usize,
        #[arg(long = "K")]
        #[serde(rename = "K")]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
    },
    /// Compare Jacobian rank with membership in the singular set.
    SingularCheck {
        #[arg(long)]
        n: usize,
        #[arg(long = "K")]
        #[serde(rename = "K")]
        k: usize,
        /// Check this point only; otherwise sample random points.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        /// Random points per kind (off and on the singular set).
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Restrict the last-row map to the singular set.
    SingularImage {
        #[arg(long)]
        n: usize,
        #[arg(long = "K")]
        #[serde(rename = "K")]
        k: usize,
    },
    /// Three-factor chain with a prescribed last row.
    Preimage {
        #[arg(long, allow_hyphen_values = true)]
        b: String,
    },
    /// Peel a chain with matching last row off a matrix.
    Peel {
        #[arg(long, allow_hyphen_values = true)]
        matrix: String,
        /// Defaults to the three-factor preimage of the last row.
        #[arg(long, allow_hyphen_values = true)]
        chain: Option<String>,
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        tol: f64,
    },
    /// Factor a constant matrix of determinant one.
    FactorConst {
        #[arg(long, allow_hyphen_values = true)]
        matrix: String,
        #[arg(long, default_value_t = 1e-10, value_parser = positive)]
        tol: f64,
    },
    /// Factor a 2x2 matrix over C[z] of determinant one.
    FactorSl2 {
        #[arg(long, allow_hyphen_values = true)]
        matrix: String,
    },
    /// Shears whose product is diag(u, 1/u).
    Whitehead {
        #[arg(long, allow_hyphen_values = true)]
        u: String,
    },
    /// Multiply out a factor list and compare with a target.
    Verify {
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long, allow_hyphen_values = true)]
        factors: String,
        #[arg(long, default_value_t = 1e-10, value_parser = positive)]
        tol: f64,
    },
    /// Closed-form flow of a shear field.
    SprayFlow {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long)]
        i: String,
        #[arg(long)]
        j: String,
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// Time as `re,im` or `re`.
        #[arg(long, allow_hyphen_values = true)]
        t: String,
    },
    /// Rank of the shear fields of a polynomial at a point.
    SpanRank {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        /// Comma separated variables; defaults to those of `p`.
        #[arg(long)]
        vars: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        tol: f64,
    },
    /// Fiber chart over a target vector.
    Chart {
        #[arg(long)]
        n: usize,
        #[arg(long = "K")]
        #[serde(rename = "K")]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// Also draw a random chart point and reconstruct its chain.
        #[arg(long)]
        sample: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stratum of a nonzero vector.
    Stratum {
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long = "K")]
        #[serde(rename = "K")]
        k: usize,
    },
    /// Track a fiber point along a sampled path.
    Track {
        #[arg(long)]
        n: usize,
        #[arg(long = "K", default_value_t = 3)]
        #[serde(rename = "K")]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        path: String,
        /// Starting chain; defaults to the preimage of the first sample.
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        accept_tol: f64,
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        rank_tol: f64,
    },
    /// Factor a sampled path of matrices with continuous parameters.
    FactorPath {
        #[arg(long, allow_hyphen_values = true)]
        samples: String,
        #[arg(long, default_value_t = 1e-8, value_parser = positive)]
        accept_tol: f64,
    },
}

enum Failure {
    Lib(unifact::Error),
    Io(String),
}

impl From<unifact::Error> for Failure {
    fn from(e: unifact::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 3,
            Failure::Lib(e) => match e.class() {
                ErrorClass::Domain => 1,
                ErrorClass::Numeric => 2,
                ErrorClass::Schema => 3,
            },
        }
    }

    fn class(&self) -> &'static str {
        match self {
            Failure::Io(_) => "io",
            Failure::Lib(e) => match e.class() {
                ErrorClass::Domain => "domain",
                ErrorClass::Numeric => "numeric",
                ErrorClass::Schema => "schema",
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

type Outcome = Result<Map<String, Value>, Failure>;

/// Inline JSON, or the path of a file holding it.
fn load(arg: &str) -> Result<Value, Failure> {
    let t = arg.trim();
    let inline = t.starts_with(['[', '{', '"']) || t.parse::<f64>().is_ok();
    let text = if inline {
        t.to_string()
    } else {
        fs::read_to_string(t).map_err(|e| Failure::Io(format!("cannot read '{t}': {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| unifact::Error::Parse(format!("invalid JSON in '{t}': {e}")).into())
}

fn load_as<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, Failure> {
    Ok(from_value(load(arg)?, what)?)
}

fn load_vector(arg: &str) -> Result<Vec<C64>, Failure> {
    let v: Vec<ComplexJson> = load_as(arg, "complex vector")?;
    Ok(vector_from_json(&v))
}

fn load_matrix(arg: &str) -> Result<Matrix<C64>, Failure> {
    Ok(load_as::<MatrixJson>(arg, "matrix")?.to_matrix()?)
}

/// A chain given either as chain JSON or as a flat coordinate vector.
fn load_chain(arg: &str, n: usize, k: usize, orientation: Orientation) -> Result<FactorChain<C64>, Failure> {
    let value = load(arg)?;
    if value.is_array() {
        let v: Vec<ComplexJson> = from_value(value, "point")?;
        return Ok(FactorChain::from_flat(n, k, orientation, &vector_from_json(&v))?);
    }
    let chain = from_value::<ChainJson>(value, "chain")?.to_chain()?;
    if chain.n() != n || chain.len() != k {
        return Err(unifact::Error::Shape(format!(
            "chain has n = {}, K = {}; expected n = {n}, K = {k}",
            chain.n(),
            chain.len()
        ))
        .into());
    }
    Ok(chain)
}

fn parse_var(s: &str) -> Result<VarId, Failure> {
    Ok(s.parse::<VarId>()?)
}

fn parse_time(s: &str) -> Result<C64, Failure> {
    let bad = || unifact::Error::Parse(format!("invalid time '{s}', expected re or re,im"));
    let mut parts = s.split(',').map(|p| p.trim().parse::<f64>());
    let re = parts.next().ok_or_else(bad)?.map_err(|_| bad())?;
    let im = parts.next().transpose().map_err(|_| bad())?.unwrap_or(0.0);
    if parts.next().is_some() {
        return Err(bad().into());
    }
    Ok(C64::new(re, im))
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => Map::from_iter([("value".to_string(), other)]),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

/// Factor list JSON with the count `K` alongside.
fn with_count(list: Value, k: usize) -> Map<String, Value> {
    let mut m = object(list);
    m.insert("K".into(), json!(k));
    m
}

fn budget(global: &Global) -> usize {
    global.term_budget.unwrap_or_else(term_budget_from_env)
}

fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Phi { n, k, point, orientation } => {
            let chain = load_chain(point, *n, *k, (*orientation).into())?;
            let phi = chain.phi_eval()?;
            let pairs: Vec<[f64; 2]> = phi.iter().map(|z| [z.re, z.im]).collect();
            Ok(object(json!({ "phi": pairs })))
        }
        Command::Components { n, k } => {
            let sys = symbolic_components_with_budget(*n, *k, budget(g))?;
            let terms: usize = sys.components.iter().map(|p| p.num_terms()).sum();
            Ok(object(json!({
                "components": sys.components.iter().map(PolyJson::from_poly).collect::<Vec<_>>(),
                "terms": terms,
            })))
        }
        Command::Jacobian { n, k, point } => {
            let sys = symbolic_components_with_budget(*n, *k, budget(g))?;
            let vars: Vec<VarJson> = sys.variables().iter().map(VarJson::from).collect();
            match point {
                Some(p) => {
                    let chain = load_chain(p, *n, *k, Orientation::Inverse)?;
                    let j = sys.jacobian_at(&chain)?;
                    let rows: Vec<Vec<ComplexJson>> = j.to_rows().iter().map(|r| vector_to_json(r)).collect();
                    Ok(object(json!({ "variables": vars, "jacobian": rows })))
                }
                None => {
                    let rows: Vec<Vec<PolyJson>> =
                        sys.jacobian_polys().iter().map(|r| r.iter().map(PolyJson::from_poly).collect()).collect();
                    Ok(object(json!({ "variables": vars, "jacobian": rows })))
                }
            }
        }
        Command::SingularCheck { n, k, point, samples, tol, seed } => {
            let sys = symbolic_components_with_budget(*n, *k, budget(g))?;
            let compiled = sys.compile::<f64>();
            let points = match point {
                Some(p) => vec![load_chain(p, *n, *k, Orientation::Inverse)?],
                None => {
                    let mut r = rng(*seed);
                    let mut pts = Vec::with_capacity(2 * samples);
                    for _ in 0..*samples {
                        let c = random_chain_disc(&mut r, *n, *k, 2.0);
                        pts.push(onto_singular_set(&c));
                        pts.push(c);
                    }
                    pts
                }
            };
            let reports = points
                .iter()
                .map(|p| rank_report(&compiled, p, *tol).map(|r| RankReportJson::from(&r)))
                .collect::<unifact::Result<Vec<_>>>()?;
            let disagreements = reports.iter().filter(|r| !r.agree).count();
            Ok(object(json!({ "reports": reports, "disagreements": disagreements })))
        }
        Command::SingularImage { n, k } => Ok(object(to_value(&SingularImageJson::from(&singular_image_check(*n, *k)?)))),
        Command::Preimage { b } => {
            let b = load_vector(b)?;
            let chain = preimage_last_row(&b)?;
            let mut out = with_count(to_value(&ChainJson::from_chain(&chain)), chain.len());
            out.insert("residual".into(), json!(distance(&chain.phi_eval()?, &b)));
            Ok(out)
        }
        Command::Peel { matrix, chain, tol } => {
            let a = load_matrix(matrix)?;
            let z = match chain {
                Some(c) => from_value::<ChainJson>(load(c)?, "chain")?.to_chain()?,
                None => preimage_last_row(&a.last_row())?,
            };
            let peel = peel_last_row(&a, &z, *tol)?;
            Ok(object(json!({
                "chain": ChainJson::from_chain(&z),
                "b": MatrixJson::from_matrix(&peel.b),
                "h": vector_to_json(&peel.h),
                "core": MatrixJson::from_matrix(&peel.core),
            })))
        }
        Command::FactorConst { matrix, tol } => {
            let a = load_matrix(matrix)?;
            let factors = factor_constant(&a)?;
            let report = verify_numeric(&a, &factors, *tol);
            let mut out = with_count(to_value(&ChainJson::from_factors(a.rows(), &factors)), factors.len());
            out.insert("verify".into(), to_value(&VerifyJson::from(&report)));
            Ok(out)
        }
        Command::FactorSl2 { matrix } => {
            let m = load_as::<PolyMatrixJson>(matrix, "polynomial matrix")?.to_matrix()?;
            let pm = PolyMatrix2::from_matrix(&m)?;
            let factors = factor_sl2_poly(&pm)?;
            let report = verify_exact(&m, &factors);
            let mut out = with_count(to_value(&PolyFactorsJson::from_factors(2, &factors)), factors.len());
            out.insert("verify".into(), to_value(&VerifyJson::from(&report)));
            Ok(out)
        }
        Command::Whitehead { u } => {
            let u: C64 = load_as::<ComplexJson>(u, "complex number")?.into();
            let factors = whitehead_diag(u)?;
            Ok(with_count(to_value(&ChainJson::from_factors(2, &factors)), factors.len()))
        }
        Command::Verify { target, factors, tol } => verify(target, factors, *tol),
        Command::SprayFlow { p, i, j, start, t } => {
            let poly = load_as::<PolyJson>(p, "polynomial")?.to_poly()?;
            let field = ShearField::new(poly.clone(), parse_var(i)?, parse_var(j)?)?;
            let start = point_from_json(&load_as::<Vec<PointEntryJson>>(start, "point")?)?;
            let end = field.flow(&start, parse_time(t)?)?;
            let drift = (poly.evaluate(&end)? - poly.evaluate(&start)?).norm();
            Ok(object(json!({ "point": point_to_json(&end), "residual_drift": drift })))
        }
        Command::SpanRank { p, vars, point, tol } => {
            let poly = load_as::<PolyJson>(p, "polynomial")?.to_poly()?;
            let vars: Vec<VarId> = match vars {
                Some(list) => list.split(',').map(parse_var).collect::<Result<_, _>>()?,
                None => poly.variables().into_iter().collect(),
            };
            let pt = point_from_json(&load_as::<Vec<PointEntryJson>>(point, "point")?)?;
            let rank = span_rank(&poly, &vars, &pt, *tol)?;
            Ok(object(json!({ "rank": rank, "dimension": vars.len(), "full": rank == vars.len() })))
        }
        Command::Chart { n, k, target, sample, seed } => {
            let target = load_vector(target)?;
            let chart = FiberChart::new(*n, *k, &target)?;
            let mut out = object(to_value(&ChartJson::from(&chart)));
            if *sample {
                let pt = chart.sample_point(&mut rng(*seed), 1.0)?;
                let chain = chart.reconstruct(&pt)?;
                let err = distance(&chain.phi_eval()?, &target);
                out.insert(
                    "sample".into(),
                    json!({ "point": point_to_json(&pt), "chain": ChainJson::from_chain(&chain), "error": err }),
                );
            }
            Ok(out)
        }
        Command::Stratum { a, k } => {
            let a = load_vector(a)?;
            Ok(object(json!({ "stratum": stratum_index(&a, k % 2 == 0)? })))
        }
        Command::Track { n, k, path, seed, accept_tol, rank_tol } => {
            let samples: Vec<PathSampleJson> = load_as(path, "path samples")?;
            let samples: Vec<(f64, Vec<C64>)> = samples.iter().map(|s| (s.t, vector_from_json(&s.b))).collect();
            let Some((_, b0)) = samples.first() else {
                return Err(unifact::Error::InvalidArgument("path has no samples".into()).into());
            };
            let seed = match seed {
                Some(s) => load_chain(s, *n, *k, Orientation::Inverse)?,
                None => default_seed(b0, *n, *k)?,
            };
            let config = TrackerConfig { accept_tol: *accept_tol, rank_tol: *rank_tol, ..TrackerConfig::default() };
            let problem = PathProblem { n: *n, k: *k, samples, seed };
            let records: Vec<TrackRecordJson> = track_path(&problem, &config)?.iter().map(TrackRecordJson::from).collect();
            Ok(object(json!({ "records": records })))
        }
        Command::FactorPath { samples, accept_tol } => {
            let samples: Vec<MatrixSampleJson> = load_as(samples, "matrix samples")?;
            let samples = samples
                .iter()
                .map(|s| Ok((s.t, s.matrix.to_matrix()?)))
                .collect::<unifact::Result<Vec<_>>>()?;
            let config = TrackerConfig { accept_tol: *accept_tol, ..TrackerConfig::default() };
            let out = factor_matrix_path(&samples, &config)?;
            let records: Vec<Value> = out
                .iter()
                .zip(&samples)
                .map(|(f, (_, a))| {
                    let residual = f.chain.psi_eval().frobenius_distance(a) / a.frobenius_norm().max(1.0);
                    json!({ "t": f.t, "Z": ChainJson::from_chain(&f.chain), "K": f.chain.len(), "residual": residual })
                })
                .collect();
            Ok(object(json!({ "records": records })))
        }
    }
}

/// The three-factor preimage of `b`, extended by identity factors up to `K`.
fn default_seed(b: &[C64], n: usize, k: usize) -> Result<FactorChain<C64>, Failure> {
    if b.len() != n {
        return Err(unifact::Error::Shape(format!("first sample has length {}, expected {n}", b.len())).into());
    }
    if k < 3 {
        return Err(unifact::Error::InvalidArgument(format!("K = {k} needs an explicit --seed chain")).into());
    }
    let mut flat = preimage_last_row(b)?.flat();
    flat.resize(k * n * (n - 1) / 2, C64::new(0.0, 0.0));
    Ok(FactorChain::from_flat(n, k, Orientation::Inverse, &flat)?)
}

fn verify(target: &str, factors: &str, tol: f64) -> Outcome {
    let target = load(target)?;
    let mut factors = load(factors)?;
    let numeric = serde_json::from_value::<MatrixJson>(target.clone());
    let n = match &numeric {
        Ok(m) => m.n,
        Err(_) => from_value::<PolyMatrixJson>(target.clone(), "target matrix")?.n,
    };
    // a bare array is a factor list of the target's size
    if factors.is_array() {
        factors = json!({ "n": n, "orientation": "direct", "factors": factors });
    }
    let report = match numeric {
        Ok(m) => {
            let a = m.to_matrix()?;
            let list = from_value::<ChainJson>(factors, "factor list")?.to_factors()?;
            verify_numeric(&a, &list, tol)
        }
        Err(_) => {
            let a = from_value::<PolyMatrixJson>(target, "target matrix")?.to_matrix()?;
            let list = from_value::<PolyFactorsJson>(factors, "factor list")?.to_factors()?;
            verify_exact(&a, &list)
        }
    };
    Ok(object(to_value(&VerifyJson::from(&report))))
}

fn emit(doc: &Value, output: Option<&PathBuf>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(doc).expect("reports serialize");
    match output {
        Some(path) => fs::write(path, text + "\n").map_err(|e| format!("cannot write '{}': {e}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(b) = cli.global.term_budget {
        // set before any worker thread exists
        std::env::set_var(TERM_BUDGET_ENV, b.to_string());
    }
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }

    let mut config = object(to_value(&cli.command));
    let command = config.remove("name").unwrap_or(Value::Null);
    config.insert("output".into(), to_value(&cli.global.output));
    config.insert("threads".into(), json!(cli.global.threads.unwrap_or_else(rayon::current_num_threads)));
    config.insert("term_budget".into(), json!(budget(&cli.global)));

    let mut doc = Map::new();
    doc.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    doc.insert("command".into(), command);
    doc.insert("config".into(), Value::Object(config));
    let (body, code) = match run(&cli) {
        Ok(result) => (result, 0),
        Err(f) => {
            eprintln!("error: {}", f.message());
            let err = json!({ "class": f.class(), "message": f.message() });
            (Map::from_iter([("error".to_string(), err)]), f.exit_code())
        }
    };
    doc.extend(body);
    if let Err(e) = emit(&Value::Object(doc), cli.global.output.as_ref()) {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(code)
}
