//! Command-line front end: run configurations, JSON reports and CSV
//! refinement tables.
//!
//! Exit status: 0 when every residual meets its tolerance, 1 when one does
//! not (reports are still written), 2 for an invalid configuration, 3 for a
//! numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::ball::{BallDomain, Point};
use crate::error::{Error, Result};
use crate::kernels::FractionalGreen;
use crate::nonlocal::{frac_laplacian_pv, product_rule_residual, s_harmonicity_residual, PvConfig, SmoothField};
use crate::special::FracParams;
use crate::verify::{run_identity, IdentityId, IdentityProblem, IdentityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the size of the worker pool.
pub const THREADS_ENV: &str = "FRACPOHO_THREADS";

const DEFAULT_ORDERS: [usize; 6] = [8, 16, 24, 32, 40, 48];
const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "fracpoho",
    version,
    about = "Green functions of the fractional Laplacian on balls and their Pohozaev identities"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate both sides of one identity over a sequence of quadrature orders.
    Verify {
        #[arg(value_enum)]
        identity: IdentityArg,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run a fixed matrix of identities.
    Suite {
        #[arg(value_enum)]
        which: SuiteArg,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run a principal-value oracle.
    Oracle {
        #[arg(value_enum)]
        which: OracleArg,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IdentityArg {
    Robin,
    Bilinear,
    BilinearGeneral,
    Difference,
    #[value(name = "local")]
    Local,
    LocalVector,
}

impl From<IdentityArg> for IdentityId {
    fn from(a: IdentityArg) -> Self {
        match a {
            IdentityArg::Robin => IdentityId::Robin,
            IdentityArg::Bilinear => IdentityId::Bilinear,
            IdentityArg::BilinearGeneral => IdentityId::BilinearGeneral,
            IdentityArg::Difference => IdentityId::Difference,
            IdentityArg::Local => IdentityId::LocalBilinear,
            IdentityArg::LocalVector => IdentityId::LocalVector,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum OracleArg {
    Pv,
    ProductRule,
    SHarmonicity,
}

/// Flags shared by every subcommand; each may also come from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key=value file with the same fields as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// Evaluation point of the oracles.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long)]
    axis: Option<usize>,
    /// Comma-separated, strictly increasing quadrature orders.
    #[arg(long)]
    orders: Option<String>,
    /// Tolerance on the relative residual (absolute for the oracles).
    #[arg(long)]
    tol: Option<f64>,
    /// Directory receiving the JSON and CSV files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Oracle test field: `power-bump` or `bump`.
    #[arg(long)]
    field: Option<String>,
    /// Write zero for every timing field so reports are reproducible byte for byte.
    #[arg(long)]
    deterministic: bool,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub s: f64,
    pub radius: f64,
    pub x: Option<Point>,
    pub y: Option<Point>,
    pub xi: Option<Point>,
    pub z: Option<Point>,
    pub axis: Option<usize>,
    pub orders: Vec<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub field: String,
    pub deterministic: bool,
}

const CONFIG_KEYS: [&str; 14] =
    ["dim", "s", "radius", "x", "y", "xi", "z", "axis", "orders", "tol", "out", "seed", "field", "deterministic"];

/// Parses a `key = value` file: one entry per line, `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
        let key = key.trim().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key '{key}'", k + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", k + 1)));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("cannot parse {key} = '{v}'")))
}

fn parse_point(key: &str, v: &str) -> Result<Point> {
    let coords: Result<Vec<f64>> = v.split(',').map(|c| parse_num::<f64>(key, c)).collect();
    let coords = coords?;
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config(format!("{key} has non-finite coordinates")));
    }
    Ok(Point::new(coords))
}

fn parse_orders(v: &str) -> Result<Vec<usize>> {
    let orders: Result<Vec<usize>> = v.split(',').map(|c| parse_num("orders", c)).collect();
    let orders = orders?;
    if orders.is_empty() || orders.contains(&0) || orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("orders must be positive and strictly increasing, got '{v}'")));
    }
    Ok(orders)
}

impl RunArgs {
    /// Merges the config file (if any) under the command-line flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let pick = |flag: Option<String>, key: &str| flag.or_else(|| file.get(key).cloned());
        let dim = pick(self.dim.map(|v| v.to_string()), "dim").map(|v| parse_num("dim", &v)).transpose()?;
        let s = pick(self.s.map(|v| v.to_string()), "s").map(|v| parse_num("s", &v)).transpose()?;
        let radius = pick(self.radius.map(|v| v.to_string()), "radius").map(|v| parse_num("radius", &v)).transpose()?;
        let point =
            |flag: &Option<String>, key: &str| pick(flag.clone(), key).map(|v| parse_point(key, &v)).transpose();
        let x = point(&self.x, "x")?;
        let y = point(&self.y, "y")?;
        let xi = point(&self.xi, "xi")?;
        let z = point(&self.z, "z")?;
        let axis = pick(self.axis.map(|v| v.to_string()), "axis").map(|v| parse_num("axis", &v)).transpose()?;
        let orders = match pick(self.orders.clone(), "orders") {
            Some(v) => parse_orders(&v)?,
            None => DEFAULT_ORDERS.to_vec(),
        };
        let tol: Option<f64> =
            pick(self.tol.map(|v| v.to_string()), "tol").map(|v| parse_num("tol", &v)).transpose()?;
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tol must be positive, got {t}")));
            }
        }
        let out = self.out.clone().or_else(|| file.get("out").map(PathBuf::from));
        let seed = pick(self.seed.map(|v| v.to_string()), "seed").map(|v| parse_num("seed", &v)).transpose()?;
        let field = pick(self.field.clone(), "field").unwrap_or_else(|| "power-bump".into());
        let deterministic = self.deterministic
            || file.get("deterministic").map(|v| parse_num::<bool>("deterministic", v)).transpose()?.unwrap_or(false);

        // the dimension defaults to that of the first point given, else 3
        let dim = dim.or_else(|| [&x, &y, &xi, &z].into_iter().flatten().next().map(|p| p.dim())).unwrap_or(3);
        Ok(RunConfig {
            dim,
            s: s.unwrap_or(0.5),
            radius: radius.unwrap_or(1.0),
            x,
            y,
            xi,
            z,
            axis,
            orders,
            tol,
            out,
            seed: seed.unwrap_or(0),
            field,
            deterministic,
        })
    }
}

impl RunConfig {
    pub fn problem(&self, identity: IdentityId) -> IdentityProblem {
        IdentityProblem {
            identity,
            dim: self.dim,
            s: self.s,
            radius: self.radius,
            x: self.x.clone().unwrap_or_else(|| Point::origin(self.dim)),
            y: self.y.clone(),
            xi: self.xi.clone(),
            axis: self.axis,
            seed: self.seed,
        }
    }
}

/// Float written with 17 significant digits; `null` when not finite.
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            RawValue::from_string(format!("{:.16e}", self.0)).map_err(S::Error::custom)?.serialize(ser)
        } else {
            ser.serialize_none()
        }
    }
}

fn nums(p: &Option<Point>) -> Option<Vec<Num>> {
    p.as_ref().map(|p| p.iter().map(|c| Num(*c)).collect())
}

#[derive(Serialize)]
struct ParamsJson {
    #[serde(rename = "N")]
    n: usize,
    s: Num,
    #[serde(rename = "R")]
    r: Num,
    x: Option<Vec<Num>>,
    y: Option<Vec<Num>>,
    xi: Option<Vec<Num>>,
    axis: Option<usize>,
}

#[derive(Serialize)]
struct HistoryJson {
    order: usize,
    residual: Num,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    identity_id: &'a str,
    params: ParamsJson,
    lhs: Num,
    rhs: Num,
    abs_residual: Num,
    rel_residual: Num,
    quad_order: usize,
    history: Vec<HistoryJson>,
    wall_time_s: Num,
    warnings: &'a [String],
}

/// The report as pretty-printed JSON. With `deterministic` every timing
/// field is written as zero.
pub fn report_json(rep: &IdentityReport, deterministic: bool) -> String {
    let p = &rep.problem;
    let doc = ReportJson {
        identity_id: rep.identity_id.as_str(),
        params: ParamsJson {
            n: p.dim,
            s: Num(if rep.identity_id.is_local() { 1.0 } else { p.s }),
            r: Num(p.radius),
            x: nums(&Some(p.x.clone())),
            y: nums(&p.y),
            xi: nums(&p.xi),
            axis: p.axis,
        },
        lhs: Num(rep.lhs),
        rhs: Num(rep.rhs),
        abs_residual: Num(rep.abs_residual),
        rel_residual: Num(rep.rel_residual),
        quad_order: rep.quad_order,
        history: rep.history.iter().map(|h| HistoryJson { order: h.order, residual: Num(h.abs_residual) }).collect(),
        wall_time_s: Num(if deterministic { 0.0 } else { rep.wall_time_s }),
        warnings: &rep.warnings,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Refinement table with columns `order,lhs,rhs,abs_residual,rel_residual,seconds`.
pub fn report_csv(rep: &IdentityReport, deterministic: bool) -> String {
    let mut out = String::from("order,lhs,rhs,abs_residual,rel_residual,seconds\n");
    for h in &rep.history {
        let secs = if deterministic { 0.0 } else { h.seconds };
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            h.order, h.lhs, h.rhs, h.abs_residual, h.rel_residual, secs
        );
    }
    out
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::InvalidParams(_) => "invalid_params",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::CoincidentPoints => "coincident_points",
        Error::OutsideDomain { .. } => "outside_domain",
        Error::NotOnBoundary { .. } => "not_on_boundary",
        Error::UnsupportedDimension(_) => "unsupported_dimension",
        Error::InvalidOrder(_) => "invalid_order",
        Error::Hypothesis(_) => "hypothesis",
        Error::Convergence { .. } => "convergence",
        Error::BudgetExceeded(_) => "budget_exceeded",
        Error::Config(_) => "config",
    }
}

fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": error_kind(e), "message": e.to_string() }).to_string()
}

fn fail(err: &mut dyn Write, e: &Error, code: i32) -> i32 {
    let _ = writeln!(err, "{}", error_json(e));
    code
}

struct Sink<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    dir: Option<PathBuf>,
}

impl Sink<'_> {
    fn emit(&mut self, stem: &str, json: &str, csv: Option<&str>) -> Result<()> {
        match &self.dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
                write_file(&dir.join(format!("{stem}.json")), json)?;
                if let Some(csv) = csv {
                    write_file(&dir.join(format!("{stem}.csv")), csv)?;
                }
                Ok(())
            }
            None => self.out.write_all(json.as_bytes()).map_err(|e| Error::Config(format!("cannot write stdout: {e}"))),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// One entry of the fixed identity matrix run by `suite all`.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub name: String,
    pub problem: IdentityProblem,
    pub tol: f64,
}

/// The identity matrix for dimension `n` on the ball of radius `radius`.
pub fn suite_cases(n: usize, radius: f64, seed: u64) -> Vec<SuiteCase> {
    let e = |axis: usize, t: f64| Point::on_axis(n, axis.min(n - 1), t * radius);
    let x = e(0, 0.2);
    let y = if n > 1 { e(1, 0.3) } else { e(0, -0.3) };
    // exterior centre off every symmetry plane of the (x, y) configuration
    let xi_ext = Point::new([1.2, -0.5, 0.7, 0.3].iter().cycle().take(n).map(|c| c * radius).collect());
    // sampled rules in N ≥ 4 only reach statistical accuracy
    let tol: f64 = if n <= 3 { 1e-6 } else { 5e-2 };
    let mut cases = Vec::new();
    let mut push = |name: String, problem: IdentityProblem, tol: f64| {
        cases.push(SuiteCase { name, problem: problem.with_seed(seed), tol });
    };
    let base = |id: IdentityId, s: f64, x: &Point| IdentityProblem::new(id, n, s, radius, x.clone());

    for s in [0.1, 0.25, 0.5, 0.75, 0.9] {
        if (n as f64) > 2.0 * s {
            push(format!("robin-center-s{s}"), base(IdentityId::Robin, s, &Point::origin(n)), 1e-12);
        }
    }
    for s in [0.3, 0.5, 0.7] {
        if (n as f64) > 2.0 * s {
            push(format!("robin-s{s}"), base(IdentityId::Robin, s, &e(0, 0.5)), tol.max(1e-7));
        }
    }
    for s in [0.3, 0.5, 0.75] {
        if (n as f64) > 2.0 * s {
            push(format!("bilinear-s{s}"), base(IdentityId::Bilinear, s, &x).with_y(y.clone()), tol);
        }
    }
    for s in [0.6, 0.75, 0.9] {
        if (n as f64) > 2.0 * s {
            for (k, xi) in [Point::origin(n), y.clone(), xi_ext.clone()].into_iter().enumerate() {
                push(
                    format!("bilinear-general-s{s}-xi{k}"),
                    base(IdentityId::BilinearGeneral, s, &x).with_y(y.clone()).with_xi(xi),
                    tol,
                );
            }
            push(format!("difference-s{s}"), base(IdentityId::Difference, s, &x).with_y(y.clone()), tol);
        }
    }
    if n > 2 {
        let local_tol = if n == 3 { 1e-9 } else { tol };
        push(
            "local".into(),
            base(IdentityId::LocalBilinear, 1.0, &x).with_y(y.clone()).with_xi(Point::new(vec![0.5 * radius; n])),
            local_tol,
        );
        // in N ≥ 4 the components that vanish by symmetry are only resolved
        // to sampling noise, so only the plane of x and y is checked there
        let axes = if n == 3 { n } else { 2 };
        for i in 0..axes {
            push(
                format!("local-vector-{i}"),
                base(IdentityId::LocalVector, 1.0, &x).with_y(y.clone()).with_axis(i),
                local_tol,
            );
        }
    }
    cases
}

fn verdict(rep: &IdentityReport, tol: f64) -> i32 {
    // vector components can vanish identically; fall back to an absolute test
    let scale = rep.lhs.abs().max(rep.rhs.abs());
    let ok = rep.rel_residual <= tol || (scale < 1e-12 && rep.abs_residual <= tol * 1e-12);
    if ok {
        EXIT_OK
    } else {
        EXIT_TOLERANCE
    }
}

fn run_verify(identity: IdentityId, cfg: &RunConfig, sink: &mut Sink) -> i32 {
    let problem = cfg.problem(identity);
    if let Err(e) = problem.validate() {
        return fail(sink.err, &e, EXIT_CONFIG);
    }
    let rep = match run_identity(&problem, &cfg.orders) {
        Ok(r) => r,
        Err(e) => return fail(sink.err, &e, EXIT_NUMERICAL),
    };
    let json = report_json(&rep, cfg.deterministic);
    let csv = report_csv(&rep, cfg.deterministic);
    if let Err(e) = sink.emit(identity.as_str(), &json, Some(&csv)) {
        return fail(sink.err, &e, EXIT_CONFIG);
    }
    verdict(&rep, cfg.tol.unwrap_or(DEFAULT_TOL))
}

fn run_suite(cfg: &RunConfig, sink: &mut Sink) -> i32 {
    if let Err(e) = BallDomain::new(cfg.dim, cfg.radius) {
        return fail(sink.err, &e, EXIT_CONFIG);
    }
    let mut status = EXIT_OK;
    let to_stdout = sink.dir.is_none();
    for case in suite_cases(cfg.dim, cfg.radius, cfg.seed) {
        let tol = cfg.tol.unwrap_or(case.tol);
        let code = match run_identity(&case.problem, &cfg.orders) {
            Ok(rep) => {
                let code = verdict(&rep, tol);
                let line = format!(
                    "{} {} rel_residual={:.3e} tol={:.1e}\n",
                    if code == EXIT_OK { "PASS" } else { "FAIL" },
                    case.name,
                    rep.rel_residual,
                    tol
                );
                let written = if to_stdout {
                    sink.out.write_all(line.as_bytes()).map_err(|e| Error::Config(e.to_string()))
                } else {
                    sink.emit(
                        &case.name,
                        &report_json(&rep, cfg.deterministic),
                        Some(&report_csv(&rep, cfg.deterministic)),
                    )
                };
                match written {
                    Ok(()) => code,
                    Err(e) => fail(sink.err, &e, EXIT_CONFIG),
                }
            }
            Err(e) => {
                let _ = writeln!(sink.err, "{} {}", case.name, error_json(&e));
                EXIT_NUMERICAL
            }
        };
        status = status.max(code);
    }
    status
}

#[derive(Serialize)]
struct OracleJson<'a> {
    oracle: &'a str,
    #[serde(rename = "N")]
    n: usize,
    s: Num,
    z: Vec<Num>,
    value: Num,
    refined_value: Num,
    discrepancy: Num,
    tol: Num,
    pass: bool,
}

type OracleEval = Box<dyn Fn(&PvConfig) -> Result<f64>>;

fn run_oracle(which: OracleArg, cfg: &RunConfig, sink: &mut Sink) -> i32 {
    let n = cfg.dim;
    if n == 0 || !(cfg.s > 0.0 && cfg.s < 1.0) {
        let e = Error::InvalidParams(format!("oracles need N ≥ 1 and 0 < s < 1, got N = {n}, s = {}", cfg.s));
        return fail(sink.err, &e, EXIT_CONFIG);
    }
    let s = cfg.s;
    let z = cfg.z.clone().unwrap_or_else(|| Point::origin(n));
    if z.dim() != n {
        return fail(sink.err, &Error::DimensionMismatch { expected: n, got: z.dim() }, EXIT_CONFIG);
    }
    let pv = PvConfig::default();
    let (name, tol, eval): (&str, f64, OracleEval) = match which {
        OracleArg::Pv => {
            let field = match cfg.field.as_str() {
                "power-bump" => SmoothField::power_bump(n, cfg.s),
                "bump" => SmoothField::bump(Point::origin(n), 1.0),
                other => {
                    return fail(sink.err, &Error::Config(format!("unknown field '{other}'")), EXIT_CONFIG);
                }
            };
            let z = z.clone();
            ("pv", 1e-6, Box::new(move |c| frac_laplacian_pv(&field, &z, s, c)))
        }
        OracleArg::ProductRule => {
            let u = SmoothField::bump(Point::on_axis(n, 0, 0.1), 0.8);
            let v = SmoothField::bump(Point::on_axis(n, 0, -0.4), 0.7);
            let z = z.clone();
            ("product-rule", 1e-4, Box::new(move |c| product_rule_residual(&u, &v, &z, s, c)))
        }
        OracleArg::SHarmonicity => {
            let ball = match BallDomain::new(n, cfg.radius) {
                Ok(b) => b,
                Err(e) => return fail(sink.err, &e, EXIT_CONFIG),
            };
            let green = match FracParams::new(n, s).and_then(|p| FractionalGreen::new(p, ball)) {
                Ok(g) => g,
                Err(e) => return fail(sink.err, &e, EXIT_CONFIG),
            };
            let x = cfg.x.clone().unwrap_or_else(|| Point::origin(n));
            let z = z.clone();
            ("s-harmonicity", 1e-3, Box::new(move |c| s_harmonicity_residual(&green, &x, &z, c)))
        }
    };
    let tol = cfg.tol.unwrap_or(tol);
    let (value, refined) = match eval(&pv).and_then(|v| Ok((v, eval(&pv.refined())?))) {
        Ok(r) => r,
        Err(e @ (Error::BudgetExceeded(_) | Error::Convergence { .. })) => return fail(sink.err, &e, EXIT_NUMERICAL),
        Err(e) => return fail(sink.err, &e, EXIT_CONFIG),
    };
    let discrepancy = (value - refined).abs();
    // residual oracles must be small; the pv oracle must agree with its refinement
    let pass = match which {
        OracleArg::Pv => discrepancy <= tol,
        _ => value <= tol && refined <= tol,
    };
    let doc = OracleJson {
        oracle: name,
        n,
        s: Num(cfg.s),
        z: z.iter().map(|c| Num(*c)).collect(),
        value: Num(value),
        refined_value: Num(refined),
        discrepancy: Num(discrepancy),
        tol: Num(tol),
        pass,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("oracle serialization cannot fail");
    json.push('\n');
    if let Err(e) = sink.emit(name, &json, None) {
        return fail(sink.err, &e, EXIT_CONFIG);
    }
    if pass {
        EXIT_OK
    } else {
        EXIT_TOLERANCE
    }
}

/// Reads [`THREADS_ENV`] and sizes the global worker pool accordingly.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // a pool may already exist when the CLI is driven in-process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_CONFIG;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    if let Err(e) = configure_threads() {
        return fail(err, &e, EXIT_CONFIG);
    }
    let (args, action) = match &cli.command {
        Command::Verify { identity, args } => (args, Action::Verify((*identity).into())),
        Command::Suite { args, .. } => (args, Action::Suite),
        Command::Oracle { which, args } => (args, Action::Oracle(*which)),
    };
    let cfg = match args.resolve() {
        Ok(c) => c,
        Err(e) => return fail(err, &e, EXIT_CONFIG),
    };
    let mut sink = Sink { out, err, dir: cfg.out.clone() };
    match action {
        Action::Verify(id) => run_verify(id, &cfg, &mut sink),
        Action::Suite => run_suite(&cfg, &mut sink),
        Action::Oracle(which) => run_oracle(which, &cfg, &mut sink),
    }
}

enum Action {
    Verify(IdentityId),
    Suite,
    Oracle(OracleArg),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("fracpoho").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn config_text_parsing() {
        let m = parse_config_text("# comment\ndim = 3\n s=0.5 # trailing\nx = 0.3,0,0\n\n").unwrap();
        assert_eq!(m["dim"], "3");
        assert_eq!(m["s"], "0.5");
        assert_eq!(m["x"], "0.3,0,0");
        assert!(parse_config_text("dim = 3\ndim = 4").is_err());
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("dim 3").is_err());
    }

    #[test]
    fn orders_must_increase() {
        assert_eq!(parse_orders("4,8,16").unwrap(), vec![4, 8, 16]);
        assert!(parse_orders("8,4").is_err());
        assert!(parse_orders("0,4").is_err());
        assert!(parse_orders("a").is_err());
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1f64 + 0.2;
        let s = serde_json::to_string(&Num(v)).unwrap();
        assert_eq!(s.parse::<f64>().unwrap(), v);
        assert_eq!(serde_json::to_string(&Num(f64::NAN)).unwrap(), "null");
    }

    #[test]
    fn robin_example_exits_zero() {
        let (code, out, _) = run_str(&[
            "verify", "robin", "--dim", "3", "--s", "0.5", "--x", "0.3,0,0", "--orders", "10,20,40", "--tol", "1e-7",
        ]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["identity_id"], "robin");
        assert_eq!(v["history"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn hypothesis_gate_exits_two() {
        let (code, _, err) =
            run_str(&["verify", "bilinear-general", "--s", "0.5", "--x", "0.1,0,0", "--y", "0,0.1,0", "--xi", "0,0,0"]);
        assert_eq!(code, EXIT_CONFIG);
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"], "hypothesis");
        assert!(v["message"].as_str().unwrap().contains("1/2 < s"));
    }

    #[test]
    fn bad_configs_exit_two() {
        for args in [
            vec!["verify", "robin", "--x", "1.5,0,0"],
            vec!["verify", "bilinear", "--x", "0.1,0,0"],
            vec!["verify", "robin", "--orders", "8,4"],
            vec!["verify", "robin", "--dim", "3", "--x", "0.1,0"],
            vec!["verify", "nonsense"],
        ] {
            let (code, out, _) = run_str(&args);
            assert_eq!(code, EXIT_CONFIG, "{args:?}");
            assert!(out.is_empty(), "no partial report for {args:?}");
        }
    }

    #[test]
    fn tolerance_failure_exits_one_with_report() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().to_str().unwrap();
        let (code, _, _) =
            run_str(&["verify", "robin", "--x", "0.6,0,0", "--orders", "2", "--tol", "1e-14", "--out", d]);
        assert_eq!(code, EXIT_TOLERANCE);
        assert!(dir.path().join("robin.json").exists());
        let csv = std::fs::read_to_string(dir.path().join("robin.csv")).unwrap();
        assert!(csv.starts_with("order,lhs,rhs,abs_residual,rel_residual,seconds\n"));
    }

    #[test]
    fn config_file_is_merged_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "dim = 3\ns = 0.7\nx = 0.2,0,0\norders = 8,16\n").unwrap();
        let args = RunArgs { config: Some(path), s: Some(0.3), ..RunArgs::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.s, 0.3);
        assert_eq!(cfg.orders, vec![8, 16]);
        assert_eq!(cfg.x.unwrap().coords(), &[0.2, 0.0, 0.0]);
    }

    #[test]
    fn suite_cases_cover_every_identity() {
        let cases = suite_cases(3, 1.0, 0);
        for id in IdentityId::ALL {
            assert!(cases.iter().any(|c| c.problem.identity == id), "{id}");
        }
        for c in &cases {
            c.problem.validate().unwrap();
        }
        assert!(suite_cases(1, 1.0, 0).iter().all(|c| c.problem.validate().is_ok()));
    }
}
