//! Configuration-driven experiment runner for the `subvarlap` library.
//!
//! Every subcommand reads one `key = value` config file, writes its artifacts
//! (CSV grids, JSON reports) into `--out`, and finishes with a `manifest.json`
//! naming the config hash, so a directory of outputs is always traceable to
//! the exact inputs that produced it.
//!
//! Exit status: 0 on success, 2 when a named verification gate fails (for
//! example the Sobolev-exponent precondition p⁺ < Q), 1 on any other error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use subvarlap::carnot::{ball_measure, horizontal_gradient_norm};
use subvarlap::expr::Expr;
use subvarlap::lebesgue::{conjugate_exponent, luxemburg_norm, luxemburg_norm_density, modular};
use subvarlap::muckenhoupt::{apq_constant_estimate, BallFamily};
use subvarlap::operators::{
    fractional_integral, maximal_operator, operator_norm_estimate, probe_family,
    rubio_de_francia, sawyer_wheeden_check,
};
use subvarlap::plaplacian::{
    solve_dirichlet, weak_residual, DirichletProblem, EllipticityField, SolverSettings,
};
use subvarlap::poincare::{
    central_ball, domain_mean, level_truncation, ratio_sweep, representation_check, GeneratorId,
    InequalityKind, RatioMode, TestFunctionFamily,
};
use subvarlap::{CarnotGroup, Error, ExponentField, GridDomain, GridFunction, Weight};

#[derive(Parser)]
#[command(name = "subvarlap", version, about = "Experiment runner for weighted variable-exponent analysis on Carnot groups")]
struct Cli {
    /// Path to the key = value config file.
    #[arg(long, global = true, default_value = "subvarlap.conf")]
    config: PathBuf,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Grid refinement: multiplies the resolution by 2^K (for `poincare`,
    /// the number of extra refinement levels in the sweep).
    #[arg(long, global = true)]
    refine: Option<u32>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Group constants and ball-growth table for the configured domain.
    Geometry,
    /// Luxemburg norm and modular of the source field.
    Norm,
    /// Muckenhoupt A_{p(·),q(·)} constant estimate over a dyadic ball family.
    Apq,
    /// Maximal function Mf as a grid dump.
    Maximal,
    /// Fractional integral I_α f as a grid dump.
    Fracint,
    /// Rubio de Francia majorant Rh with its A₁-type certificate.
    Rdf,
    /// Sawyer–Wheeden two-weight ball test for I_α.
    Swcheck,
    /// Poincaré–Sobolev ratio sweep over a test-function family.
    Poincare(PoincareArgs),
    /// Dyadic level truncation of |f − c|.
    Truncate,
    /// Representation-formula constant against the central ball.
    Represent,
    /// Variational p(x)-Laplacian Dirichlet solve.
    Solve,
}

#[derive(Args)]
struct PoincareArgs {
    /// mean-subtracted | zero-boundary (overrides the config).
    #[arg(long)]
    mode: Option<String>,
    /// Derivative order m (1 or 2).
    #[arg(long)]
    order: Option<u32>,
    /// bumps | coord-bumps | random-trig | tents.
    #[arg(long)]
    family: Option<String>,
    /// Number of test functions.
    #[arg(long)]
    count: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    apply_thread_cap();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::GateFailed { gate, detail }) => {
            eprintln!("gate '{gate}' failed: {detail}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// `SUBVARLAP_THREADS` caps the rayon pool; 1 also forces the sequential
/// backend so single-threaded runs carry no pool overhead.
fn apply_thread_cap() {
    if let Ok(v) = std::env::var("SUBVARLAP_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                if n == 1 {
                    subvarlap::exec::set_parallel(false);
                }
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let started = Instant::now();
    let raw = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::InvalidArgument(format!("cannot read config {:?}: {e}", cli.config)))?;
    let cfg = Config::parse(&raw)?;
    let seed = cli.seed.unwrap_or(cfg.u64_or("seed", 0)?);
    let refine = cli.refine.unwrap_or(0);
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Error::InvalidArgument(format!("cannot create {:?}: {e}", cli.out)))?;

    let mut artifacts: Vec<String> = Vec::new();
    let name = match &cli.cmd {
        Cmd::Geometry => cmd_geometry(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Norm => cmd_norm(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Apq => cmd_apq(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Maximal => cmd_maximal(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Fracint => cmd_fracint(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Rdf => cmd_rdf(&cfg, cli, refine, seed, &mut artifacts)?,
        Cmd::Swcheck => cmd_swcheck(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Poincare(args) => cmd_poincare(&cfg, cli, args, refine, seed, &mut artifacts)?,
        Cmd::Truncate => cmd_truncate(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Represent => cmd_represent(&cfg, cli, refine, &mut artifacts)?,
        Cmd::Solve => cmd_solve(&cfg, cli, refine, seed, &mut artifacts)?,
    };

    let manifest = json!({
        "subcommand": name,
        "config_path": cli.config.display().to_string(),
        "config_sha256": hex::encode(Sha256::digest(raw.as_bytes())),
        "config": cfg.echo(),
        "seed": seed,
        "refine": refine,
        "library_version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "artifacts": artifacts,
    });
    write_json(&cli.out.join("manifest.json"), &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Config file

struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    fn parse(raw: &str) -> Result<Self, Error> {
        let mut map = BTreeMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                col: 1,
                msg: "expected `key = value`".into(),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { map })
    }

    fn echo(&self) -> serde_json::Value {
        json!(self.map)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, Error> {
        self.get(key)
            .ok_or_else(|| Error::InvalidArgument(format!("config key `{key}` is required")))
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, Error> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("config key `{key}`: bad number {v:?}"))),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, Error> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("config key `{key}`: bad integer {v:?}"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, Error> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    fn i32_or(&self, key: &str, default: i32) -> Result<i32, Error> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("config key `{key}`: bad integer {v:?}"))),
        }
    }

    fn expr(&self, key: &str) -> Result<Expr, Error> {
        Expr::parse(self.require(key)?)
    }

    fn expr_or(&self, key: &str, default: &str) -> Result<Expr, Error> {
        Expr::parse(self.str_or(key, default))
    }

    /// Grid domain from `resolution = n,n,...` and optional
    /// `bounds = lo:hi,lo:hi,...`, refined by 2^refine.
    fn domain(&self, refine: u32) -> Result<GridDomain, Error> {
        let res: Vec<usize> = self
            .require("resolution")?
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad resolution entry {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if let Some(bad) = res.iter().find(|&&r| r < 8) {
            return Err(Error::InvalidArgument(format!(
                "resolution {bad} below the minimum of 8 cells per axis"
            )));
        }
        let bounds: Vec<[f64; 2]> = match self.get("bounds") {
            None => vec![[0.0, 1.0]; res.len()],
            Some(spec) => spec
                .split(',')
                .map(|t| {
                    let (lo, hi) = t
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidArgument(format!("bad bounds entry {t:?}")))?;
                    let lo: f64 = lo.trim().parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad bounds entry {t:?}"))
                    })?;
                    let hi: f64 = hi.trim().parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad bounds entry {t:?}"))
                    })?;
                    Ok([lo, hi])
                })
                .collect::<Result<_, Error>>()?,
        };
        Ok(GridDomain::new(&bounds, &res)?.refine(1usize << refine))
    }

    /// Group from `group = h1 | r1 | r2 | ...`, defaulting by dimension.
    fn group(&self, dom: &GridDomain) -> Result<CarnotGroup, Error> {
        match self.get("group") {
            Some(id) => CarnotGroup::from_id(id),
            None => CarnotGroup::euclidean(dom.ndim()),
        }
    }
}

fn field(dom: &GridDomain, e: &Expr) -> GridFunction {
    GridFunction::from_fn(dom.clone(), |c| e.eval(c))
}

fn exponent_field(dom: &GridDomain, e: &Expr) -> Result<ExponentField, Error> {
    ExponentField::new(field(dom, e))
}

fn weight_field(dom: &GridDomain, e: &Expr) -> Result<Weight, Error> {
    Weight::new(field(dom, e))
}

/// Scalar value of an expression required to be constant over the domain.
fn constant_of(dom: &GridDomain, e: &Expr, key: &str) -> Result<f64, Error> {
    let f = field(dom, e);
    let v0 = f.values[0];
    if f.values.iter().any(|&v| v != v0) {
        return Err(Error::InvalidArgument(format!(
            "config key `{key}` must be constant over the domain"
        )));
    }
    Ok(v0)
}

// ---------------------------------------------------------------------------
// Artifact writers

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {path:?}: {e}")))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidState(format!("JSON encode: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

const COORD_NAMES: [&str; 3] = ["x", "y", "t"];

/// Grid dump: coordinate columns then the value, one row per cell.
fn write_grid_csv(path: &Path, f: &GridFunction) -> Result<(), Error> {
    let nd = f.domain.ndim();
    let mut out = String::new();
    for name in COORD_NAMES.iter().take(nd) {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("value\n");
    for i in 0..f.len() {
        let c = f.domain.center_coords(i);
        for v in c.iter().take(nd) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", f.values[i]));
    }
    write_text(path, &out)
}

fn push_artifact(artifacts: &mut Vec<String>, name: &str) {
    artifacts.push(name.to_string());
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_geometry(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let b0 = central_ball(&dom, &g)?;
    let report = json!({
        "group": format!("{:?}", g.kind()),
        "topological_dimension": g.dim(),
        "horizontal_dimension": g.horizontal_dim(),
        "homogeneous_dimension": g.homogeneous_dimension(),
        "layer_dimensions": g.layer_dims(),
        "quasi_metric_constant": g.quasi_metric_constant(),
        "resolution": dom.resolution(),
        "cell_measure": dom.cell_measure(),
        "inscribed_ball_radius": b0.radius,
    });
    write_json(&cli.out.join("geometry.json"), &report)?;
    push_artifact(artifacts, "geometry.json");

    // Ball growth about the domain center: the slope of log(measure) against
    // log(radius) recovers the homogeneous dimension Q.
    let steps = cfg.usize_or("radius-steps", 16)?;
    let mut csv = String::from("radius,cells,measure\n");
    for k in 1..=steps {
        let r = b0.radius * k as f64 / steps as f64;
        let m = ball_measure(&b0.center, r, &g, &dom)?;
        let cells = (m.value / dom.cell_measure()).round() as usize;
        csv.push_str(&format!("{r},{cells},{}\n", m.value));
    }
    write_text(&cli.out.join("ball_growth.csv"), &csv)?;
    push_artifact(artifacts, "ball_growth.csv");
    Ok("geometry")
}

fn cmd_norm(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let f = field(&dom, &cfg.expr("f")?);
    let p = exponent_field(&dom, &cfg.expr("p")?)?;
    let w = weight_field(&dom, &cfg.expr_or("w", "1")?)?;
    let norm = luxemburg_norm(&f, &p, Some(&w))?;
    let report = json!({
        "luxemburg_norm": norm,
        "modular": modular(&f, &p, Some(&w))?,
        "p_minus": p.p_minus(),
        "p_plus": p.p_plus(),
    });
    write_json(&cli.out.join("norm.json"), &report)?;
    push_artifact(artifacts, "norm.json");
    Ok("norm")
}

fn cmd_apq(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let w = weight_field(&dom, &cfg.expr("w")?)?;
    let p = exponent_field(&dom, &cfg.expr("p")?)?;
    let q = match cfg.get("q") {
        Some(_) => exponent_field(&dom, &cfg.expr("q")?)?,
        None => p.clone(),
    };
    let level = cfg.u64_or("level", 3)? as u32;
    let fam = BallFamily::dyadic(&dom, &g, level);
    let est = apq_constant_estimate(&w, &p, &q, &fam, &g)?;
    let report = json!({
        "estimate": est.constant,
        "gamma": est.gamma,
        "balls_used": est.balls_used,
        "family_size": fam.len(),
        "argmax_ball": est.argmax_ball.map(|b| json!({
            "center": b.center.coords(),
            "radius": b.radius,
        })),
    });
    write_json(&cli.out.join("apq.json"), &report)?;
    push_artifact(artifacts, "apq.json");
    Ok("apq")
}

fn cmd_maximal(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let f = field(&dom, &cfg.expr("f")?);
    let density = match cfg.get("mu") {
        Some(_) => Some(field(&dom, &cfg.expr("mu")?)),
        None => None,
    };
    let level = cfg.u64_or("level", 3)? as u32;
    let fam = BallFamily::dyadic(&dom, &g, level);
    let mf = maximal_operator(&f, &fam, density.as_ref(), &g)?;
    write_grid_csv(&cli.out.join("maximal.csv"), &mf)?;
    push_artifact(artifacts, "maximal.csv");
    Ok("maximal")
}

fn cmd_fracint(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let f = field(&dom, &cfg.expr("f")?);
    let alpha = cfg.f64_or("alpha", 1.0)?;
    let out = fractional_integral(&f, alpha, &g)?;
    write_grid_csv(&cli.out.join("fracint.csv"), &out)?;
    push_artifact(artifacts, "fracint.csv");
    Ok("fracint")
}

fn cmd_rdf(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    seed: u64,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let h = field(&dom, &cfg.expr("f")?).abs();
    let p = exponent_field(&dom, &cfg.expr("p")?)?;
    let density = match cfg.get("mu") {
        Some(_) => Some(field(&dom, &cfg.expr("mu")?)),
        None => None,
    };
    let level = cfg.u64_or("level", 3)? as u32;
    let k_terms = cfg.usize_or("k-terms", 30)?;
    let fam = BallFamily::dyadic(&dom, &g, level);
    let probes = probe_family(&dom, seed, 8);
    let norm_m = operator_norm_estimate(
        |f| maximal_operator(f, &fam, None, &g),
        &p,
        density.as_ref(),
        &probes,
        true,
        "probe-family",
    )?;
    let result = rubio_de_francia(&h, &p, density.as_ref(), &norm_m, k_terms, &fam, &g)?;
    write_grid_csv(&cli.out.join("rdf.csv"), &result.function)?;
    push_artifact(artifacts, "rdf.csv");
    let report = json!({
        "maximal_norm_estimate": norm_m.value,
        "probes_skipped": norm_m.probes_skipped,
        "terms_used": result.terms_used,
        "truncation_certificate": result.truncation_certificate,
        "majorant_norm": luxemburg_norm_density(&result.function, &p, density.as_ref())?,
        "input_norm": luxemburg_norm_density(&h, &p, density.as_ref())?,
    });
    write_json(&cli.out.join("rdf.json"), &report)?;
    push_artifact(artifacts, "rdf.json");
    Ok("rdf")
}

fn cmd_swcheck(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let w = field(&dom, &cfg.expr("w")?);
    let v = field(&dom, &cfg.expr("v")?);
    let p = constant_of(&dom, &cfg.expr("p")?, "p")?;
    let q = constant_of(&dom, &cfg.expr("q")?, "q")?;
    let alpha = cfg.f64_or("alpha", 1.0)?;
    let level = cfg.u64_or("level", 3)? as u32;
    let fam = BallFamily::dyadic(&dom, &g, level);
    let rep = sawyer_wheeden_check(&w, &v, p, q, alpha, &fam, &g)?;
    let report = json!({
        "constant": rep.constant,
        "balls_used": rep.balls_used,
        "balls_skipped": rep.balls_skipped,
        "p": p,
        "q": q,
        "alpha": alpha,
    });
    write_json(&cli.out.join("swcheck.json"), &report)?;
    push_artifact(artifacts, "swcheck.json");
    Ok("swcheck")
}

fn cmd_poincare(
    cfg: &Config,
    cli: &Cli,
    args: &PoincareArgs,
    refine: u32,
    seed: u64,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(0)?;
    let g = cfg.group(&dom)?;
    let mode = match args.mode.as_deref().unwrap_or(cfg.str_or("mode", "mean-subtracted")) {
        "mean-subtracted" => RatioMode::MeanSubtracted,
        "zero-boundary" => RatioMode::ZeroBoundary,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (mean-subtracted | zero-boundary)"
            )))
        }
    };
    let order = args.order.unwrap_or(cfg.u64_or("order", 1)? as u32);
    let kind = match cfg.str_or("inequality", "sobolev-gain") {
        "sobolev-gain" => InequalityKind::SobolevGain,
        "same-exponent" => InequalityKind::SameExponent,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown inequality {other:?} (sobolev-gain | same-exponent)"
            )))
        }
    };
    let generator =
        GeneratorId::from_id(args.family.as_deref().unwrap_or(cfg.str_or("family", "random-trig")))?;
    let count = args.count.unwrap_or(cfg.usize_or("count", 32)?);
    let family = TestFunctionFamily {
        generator,
        count,
        seed,
    };
    let p_expr = cfg.expr("p")?;
    let w_expr = cfg.expr_or("w", "1")?;

    // The Sobolev-gain inequality only exists below the critical exponent;
    // failing that precondition is a named gate, not a runtime error.
    if kind == InequalityKind::SobolevGain {
        let p = exponent_field(&dom, &p_expr)?;
        let q_dim = g.homogeneous_dimension() as f64;
        let limit = q_dim / order as f64;
        if p.p_plus() >= limit {
            let gate = if order == 1 { "p⁺ < Q" } else { "p⁺ < Q/m" };
            return Err(Error::GateFailed {
                gate: gate.into(),
                detail: format!(
                    "p⁺ = {} is not below Q/m = {limit} (Q = {q_dim}, m = {order})",
                    p.p_plus()
                ),
            });
        }
    }

    let levels = refine as usize + 1;
    let reports = ratio_sweep(
        &family,
        &dom,
        &g,
        mode,
        order,
        kind,
        |d| exponent_field(d, &p_expr),
        |d| weight_field(d, &w_expr),
        levels,
    )?;

    let mut summary = Vec::new();
    for (level, rep) in reports.iter().enumerate() {
        let mut csv = String::from("id,ratio,numerator-norm,denominator-norm\n");
        for (i, r) in rep.ratios.iter().enumerate() {
            let ratio = r
                .value()
                .map(|v| v.to_string())
                .unwrap_or_else(|| if r.is_vacuous() { "vacuous" } else { "infinite" }.into());
            csv.push_str(&format!("{i},{ratio},{},{}\n", r.numerator, r.denominator));
        }
        csv.push_str(&format!(
            "summary,{},,\n",
            rep.max_ratio.map(|v| v.to_string()).unwrap_or_else(|| "vacuous".into())
        ));
        let name = format!("poincare_level{level}.csv");
        write_text(&cli.out.join(&name), &csv)?;
        push_artifact(artifacts, &name);
        summary.push(json!({
            "level": level,
            "resolution": rep.resolution,
            "inequality": rep.inequality,
            "max_ratio": rep.max_ratio,
            "argmax": rep.argmax,
        }));
    }
    write_json(&cli.out.join("poincare.json"), &json!({ "levels": summary }))?;
    push_artifact(artifacts, "poincare.json");
    Ok("poincare")
}

fn cmd_truncate(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let f = field(&dom, &cfg.expr("f")?);
    let c = match cfg.get("center") {
        Some(_) => cfg.f64_or("center", 0.0)?,
        None => domain_mean(&f, None)?,
    };
    let j = cfg.i32_or("j", 0)?;
    let out = level_truncation(&f, c, j);
    write_grid_csv(&cli.out.join("truncate.csv"), &out)?;
    push_artifact(artifacts, "truncate.csv");
    Ok("truncate")
}

fn cmd_represent(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let f = field(&dom, &cfg.expr("f")?);
    let b0 = central_ball(&dom, &g)?;
    let rep = representation_check(&f, &g, &b0)?;
    let report = json!({
        "constant": rep.constant,
        "argmax_cell": rep.argmax_cell,
        "points_used": rep.points_used,
        "points_excluded": rep.points_excluded,
        "central_ball": {
            "center": rep.ball.center.coords(),
            "radius": rep.ball.radius,
        },
    });
    write_json(&cli.out.join("represent.json"), &report)?;
    push_artifact(artifacts, "represent.json");
    Ok("represent")
}

fn cmd_solve(
    cfg: &Config,
    cli: &Cli,
    refine: u32,
    seed: u64,
    artifacts: &mut Vec<String>,
) -> Result<&'static str, Error> {
    let dom = cfg.domain(refine)?;
    let g = cfg.group(&dom)?;
    let p = exponent_field(&dom, &cfg.expr("p")?)?;
    let w = weight_field(&dom, &cfg.expr_or("w", "1")?)?;
    let f = field(&dom, &cfg.expr("f")?);

    // Exponent-window precondition of the well-posedness theorem, surfaced
    // as a named gate before the constructor turns it into a plain error.
    let q_dim = g.homogeneous_dimension() as f64;
    if p.p_minus() <= 1.0 || p.p_plus() >= q_dim {
        return Err(Error::GateFailed {
            gate: "1 < p⁻ ≤ p⁺ < Q".into(),
            detail: format!(
                "p⁻ = {}, p⁺ = {}, Q = {q_dim}",
                p.p_minus(),
                p.p_plus()
            ),
        });
    }

    let a = match cfg.str_or("ellipticity", "identity") {
        "identity" => EllipticityField::scaled_identity(&w, g.horizontal_dim()),
        "rotated" => EllipticityField::rotated_diagonal(
            &w,
            g.horizontal_dim(),
            cfg.f64_or("theta", 0.5)?,
            cfg.f64_or("ratio", 0.5)?,
        )?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown ellipticity {other:?} (identity | rotated)"
            )))
        }
    };
    let settings = SolverSettings {
        grad_tol: cfg.f64_or("grad-tol", 1e-8)?,
        energy_stall: cfg.f64_or("energy-stall", 1e-10)?,
        max_iterations: cfg.usize_or("max-iterations", 100_000)?,
        eps_schedule: match cfg.get("eps-schedule") {
            None => None,
            Some(spec) => Some(
                spec.split(',')
                    .map(|t| {
                        t.trim().parse().map_err(|_| {
                            Error::InvalidArgument(format!("bad eps-schedule entry {t:?}"))
                        })
                    })
                    .collect::<Result<Vec<f64>, _>>()?,
            ),
        },
    };
    let eps_schedule = settings.eps_schedule.clone().unwrap_or_else(|| {
        let mut s = vec![1e-2, 1e-4, 1e-6];
        if p.p_minus() >= 2.0 {
            s.push(0.0);
        }
        s
    });
    let prob = DirichletProblem::new(g, p, w, a, f, settings)?;
    let sol = solve_dirichlet(&prob)?;
    let residual = weak_residual(&sol.u, &prob, 8, seed)?;
    let grad = horizontal_gradient_norm(&sol.u, &prob.g)?;

    write_grid_csv(&cli.out.join("solution.csv"), &sol.u)?;
    push_artifact(artifacts, "solution.csv");
    let mut trace = String::from("iteration,energy\n");
    for (i, e) in sol.energy_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{e}\n"));
    }
    write_text(&cli.out.join("energy_trace.csv"), &trace)?;
    push_artifact(artifacts, "energy_trace.csv");
    let diagnostics = json!({
        "iterations": sol.iterations,
        "status": format!("{:?}", sol.status),
        "final_gradient_norm": sol.final_gradient_norm,
        "weak_residual": residual,
        "eps_schedule": eps_schedule,
        "eps_final": sol.eps_final,
        "final_energy": sol.energy_trace.last(),
        "solution_sup_norm": sol.u.sup_norm(),
        "solution_sobolev_norm": luxemburg_norm(&sol.u, &prob.p, Some(&prob.w))?
            + luxemburg_norm(&grad, &prob.p, Some(&prob.w))?,
        "source_dual_norm": luxemburg_norm(
            &prob.f,
            &conjugate_exponent(&prob.p)?,
            Some(&prob.w.reciprocal()),
        )?,
    });
    write_json(&cli.out.join("diagnostics.json"), &diagnostics)?;
    push_artifact(artifacts, "diagnostics.json");
    Ok("solve")
}
