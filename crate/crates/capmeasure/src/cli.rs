//! Command line front end.
//!
//! Every subcommand reads an optional JSON scenario config, computes one
//! report, and writes it under `--out` with a parameter-tagged file name.
//! Outputs contain no timestamps or timings and all floats are printed with
//! full precision, so repeated runs produce byte-identical files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible instance,
//! 4 internal invariant failure.  Errors print a single line
//! `error[<category>]: <message>` to stderr.

use crate::capacity::{
    ball_capacity_bound, capacity_upper, subadditivity_check, SolverOptions, Strategy,
};
use crate::error::{Error, Result};
use crate::gradient::{
    canonical_gradient, is_valid_gradient, mixed_norm, poincare_check, poincare_transform,
    tl_norm, GradientSequence,
};
use crate::hausdorff::{content, five_b_cover, BallSpec, ContentMethod, Gauge};
use crate::jsonio;
use crate::median::{gamma_median, median_abs_check, median_pnorm_check, MedianCheck};
use crate::space::{generate, MetricMeasureSpace, Params};
use crate::verify::{
    covering_profile, lebesgue_experiment, proof_covering, singular_profile, tent_profile,
    verify_thm1, Family,
};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "capmeasure",
    about = "Capacity, gradients and gauged contents on finite metric measure spaces",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// JSON scenario config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized solver starts.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Smoothness exponent in (0,1).
    #[arg(long)]
    s: Option<f64>,
    /// Integrability exponent in (0,inf).
    #[arg(long)]
    p: Option<f64>,
    /// Scale-summability exponent in (0,inf]; "inf" is accepted.
    #[arg(long)]
    q: Option<f64>,
    /// Median level in (0,1/2].
    #[arg(long)]
    gamma: Option<f64>,
    /// Log gauge surplus, positive.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gamma-median of a profile over a subset, with the basic inequality
    /// checks.
    Median {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Validate a gradient sequence (given or canonical) for a profile.
    GradientCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Also transform the gradient and tabulate the ball Poincaré ratios.
        #[arg(long)]
        poincare: bool,
    },
    /// Capacity upper bound; with "sets" or "trials" in the config a
    /// subadditivity report, with "ball" a ball bound report.
    Capacity {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// convex, multistart, lipschitz_test, or auto.
        #[arg(long, default_value = "auto")]
        strategy: String,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Generalized Hausdorff content of a set.
    Content {
        #[command(flatten)]
        common: CommonArgs,
        /// exact or greedy.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Disjoint 5B subfamily of a ball family.
    #[command(name = "cover-5b")]
    Cover5b {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Capacity versus exact gauged content on a nested instance family.
    VerifyThm1 {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// cantor, intervals, or squares.
        #[arg(long)]
        family: Option<String>,
        /// Inclusive level range, e.g. "1..4" or a single level "2".
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Covering construction certificate for the capacity lower bound.
    ProofCovering {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Base scale: the target set must fit in a ball of radius 2^-m.
        #[arg(long)]
        m: Option<i32>,
        /// Constant of the selection inequality; defaults to the empirical
        /// ball Poincaré ratio of the inputs.
        #[arg(long)]
        c_poincare: Option<f64>,
        /// Rescales the gradient before the construction runs.
        #[arg(long)]
        gradient_scale: Option<f64>,
    },
    /// Median Lebesgue-point experiment on an embedded grid.
    Lebesgue {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Grid size when no space is configured.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        c_thresh: Option<f64>,
        #[arg(long)]
        j0: Option<i32>,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    if let Err(e) = thread_pool_from_env() {
        eprintln!("error[{}]: {e}", e.category());
        return e.exit_code();
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

/// `CAPMEASURE_THREADS` caps the global worker pool.
fn thread_pool_from_env() -> Result<()> {
    if let Ok(raw) = std::env::var("CAPMEASURE_THREADS") {
        let threads: usize = raw
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::config("CAPMEASURE_THREADS must be a positive integer"))?;
        // A second initialization (tests, embedding) is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Median { common, params } => cmd_median(&common, &params),
        Command::GradientCheck {
            common,
            params,
            poincare,
        } => cmd_gradient_check(&common, &params, poincare),
        Command::Capacity {
            common,
            params,
            strategy,
            max_iters,
        } => cmd_capacity(&common, &params, &strategy, max_iters),
        Command::Content {
            common,
            method,
            delta,
        } => cmd_content(&common, method.as_deref(), delta),
        Command::Cover5b { common } => cmd_cover5b(&common),
        Command::VerifyThm1 {
            common,
            params,
            family,
            levels,
            delta,
            max_iters,
        } => cmd_verify_thm1(
            &common,
            &params,
            family.as_deref(),
            levels.as_deref(),
            delta,
            max_iters,
        ),
        Command::ProofCovering {
            common,
            params,
            m,
            c_poincare,
            gradient_scale,
        } => cmd_proof_covering(&common, &params, m, c_poincare, gradient_scale),
        Command::Lebesgue {
            common,
            params,
            grid,
            c_thresh,
            j0,
        } => cmd_lebesgue(&common, &params, grid, c_thresh, j0),
    }
}

// --- config plumbing ---

fn load_config(common: &CommonArgs) -> Result<Value> {
    match &common.config {
        None => Ok(json!({})),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let v: Value = serde_json::from_str(&text)?;
            if !v.is_object() {
                return Err(Error::config("scenario config must be a JSON object"));
            }
            Ok(v)
        }
    }
}

fn space_from_config(
    cfg: &Value,
    fallback: Option<MetricMeasureSpace>,
) -> Result<MetricMeasureSpace> {
    match cfg.get("space") {
        None => fallback.ok_or_else(|| Error::config("config field \"space\" missing")),
        Some(v) => {
            if let Some(generator) = v.get("generator").and_then(Value::as_str) {
                match generator {
                    "grid1d" => {
                        let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| {
                            Error::config("grid1d generator needs an integer field \"n\"")
                        })?;
                        generate::grid1d(n as usize)
                    }
                    "grid2d" => {
                        let side = v.get("side").and_then(Value::as_u64).ok_or_else(|| {
                            Error::config("grid2d generator needs an integer field \"side\"")
                        })?;
                        generate::grid2d(side as usize)
                    }
                    "cantor" => {
                        let level = v.get("level").and_then(Value::as_u64).ok_or_else(|| {
                            Error::config("cantor generator needs an integer field \"level\"")
                        })?;
                        Ok(generate::cantor(level as u32)?.0)
                    }
                    other => Err(Error::config(format!(
                        "unknown space generator \"{other}\" (expected grid1d, grid2d, cantor)"
                    ))),
                }
            } else {
                MetricMeasureSpace::from_descriptor(v)
            }
        }
    }
}

fn resolve_params(cfg: &Value, args: &ParamArgs, default: Params) -> Result<Params> {
    let base = match cfg.get("params") {
        Some(v) => Params::from_value(v)?,
        None => default,
    };
    let s = args.s.unwrap_or(base.s);
    let p = args.p.unwrap_or(base.p);
    let q = args.q.unwrap_or(base.q);
    let mut out = Params::new(s, p, q)?;
    out.gamma = args.gamma.unwrap_or(base.gamma);
    out.eps = args.eps.unwrap_or(base.eps);
    // A command-line override of s resets the transform exponent to s/2;
    // otherwise the configured value survives.
    out.s_prime = if args.s.is_some() { s / 2.0 } else { base.s_prime };
    out.validate()?;
    Ok(out)
}

fn f64_array(cfg: &Value, key: &str) -> Result<Option<Vec<f64>>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::config(format!("config field \"{key}\" must be an array")))?;
            let out: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
            out.map(Some)
                .ok_or_else(|| Error::config(format!("config field \"{key}\" must hold numbers")))
        }
    }
}

fn usize_array(cfg: &Value, key: &str) -> Result<Option<Vec<usize>>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::config(format!("config field \"{key}\" must be an array")))?;
            let out: Option<Vec<usize>> = arr
                .iter()
                .map(|x| x.as_u64().map(|u| u as usize))
                .collect();
            out.map(Some).ok_or_else(|| {
                Error::config(format!("config field \"{key}\" must hold nonnegative integers"))
            })
        }
    }
}

fn f64_field(cfg: &Value, key: &str) -> Result<Option<f64>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::config(format!("config field \"{key}\" must be a number"))),
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(format!("config field \"{key}\" missing")))
}

fn solver_options(cfg: &Value, common: &CommonArgs, max_iters: Option<usize>) -> Result<SolverOptions> {
    let mut opts = SolverOptions::default();
    if let Some(solver) = cfg.get("solver") {
        let obj = solver
            .as_object()
            .ok_or_else(|| Error::config("config field \"solver\" must be an object"))?;
        if let Some(v) = obj.get("max_iters").and_then(Value::as_u64) {
            opts.max_iters = v as usize;
        }
        if let Some(v) = obj.get("patience").and_then(Value::as_u64) {
            opts.patience = v as usize;
        }
        if let Some(v) = obj.get("tol").and_then(Value::as_f64) {
            opts.tol = v;
        }
        if let Some(v) = obj.get("step_scale").and_then(Value::as_f64) {
            opts.step_scale = v;
        }
        if let Some(v) = obj.get("starts").and_then(Value::as_u64) {
            opts.starts = v as usize;
        }
        if let Some(v) = obj.get("seed").and_then(Value::as_u64) {
            opts.seed = v;
        }
    }
    if let Some(iters) = max_iters {
        opts.max_iters = iters;
    }
    if let Some(seed) = common.seed {
        opts.seed = seed;
    }
    Ok(opts)
}

fn balls_from_config(cfg: &Value, key: &str) -> Result<Vec<BallSpec>> {
    let arr = require(cfg.get(key), key)?
        .as_array()
        .ok_or_else(|| Error::config(format!("config field \"{key}\" must be an array")))?;
    arr.iter()
        .map(|b| {
            let center = b
                .get("center")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::config("each ball needs an integer \"center\""))?;
            let radius = b
                .get("radius")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::config("each ball needs a numeric \"radius\""))?;
            Ok(BallSpec {
                center: center as usize,
                radius,
            })
        })
        .collect()
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, jsonio::to_json_g17(value)?)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn check_value(c: &MedianCheck) -> Value {
    json!({
        "holds": c.holds,
        "lhs": c.lhs,
        "rhs": c.rhs,
        "slack": c.slack,
    })
}

// --- subcommands ---

fn cmd_median(common: &CommonArgs, params: &ParamArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let space = space_from_config(&cfg, None)?;
    let u = require(f64_array(&cfg, "u")?, "u")?;
    let set = match usize_array(&cfg, "set")? {
        Some(s) => s,
        None => (0..space.len()).collect(),
    };
    let p = resolve_params(&cfg, params, Params::new(0.5, 2.0, 2.0)?)?;
    let median = gamma_median(&space, &u, &set, p.gamma)?;
    let abs = median_abs_check(&space, &u, &set, p.gamma)?;
    let pnorm = median_pnorm_check(&space, &u, &set, p.gamma, p.p)?;
    let report = json!({
        "abs_check": check_value(&abs),
        "gamma": p.gamma,
        "median": median,
        "pnorm_check": check_value(&pnorm),
        "set_size": set.len(),
    });
    write_json(&common.out, &format!("median_gamma{}.json", p.gamma), &report)?;
    let mut csv = String::from("gamma,median,set_size,abs_holds,abs_slack,pnorm_holds,pnorm_slack\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{},{},{}",
        p.gamma,
        jsonio::fmt_f64_12(median),
        set.len(),
        abs.holds,
        jsonio::fmt_f64_12(abs.slack),
        pnorm.holds,
        jsonio::fmt_f64_12(pnorm.slack),
    );
    write_text(&common.out, &format!("median_gamma{}.csv", p.gamma), &csv)?;
    println!("median = {}", jsonio::fmt_f64_17(median));
    Ok(())
}

fn cmd_gradient_check(common: &CommonArgs, params: &ParamArgs, poincare: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let space = space_from_config(&cfg, None)?;
    let u = require(f64_array(&cfg, "u")?, "u")?;
    let p = resolve_params(&cfg, params, Params::new(0.5, 2.0, 2.0)?)?;
    let g = match cfg.get("gradient") {
        Some(v) => GradientSequence::from_value(v)?,
        None => canonical_gradient(&space, &u, p.s)?,
    };
    let report = is_valid_gradient(&space, &u, &g, p.s)?;
    let mixed = mixed_norm(&space, &g, p.p, p.q)?;
    let total = tl_norm(&space, &u, &g, p.p, p.q)?;
    let mut out = json!({
        "mixed_norm": mixed,
        "tl_norm": total,
        "valid": report.valid,
        "worst": report.worst.map(|w| json!({
            "amount": w.amount,
            "k": w.k,
            "x": w.x,
            "y": w.y,
        })).unwrap_or(Value::Null),
    });
    if poincare {
        let transformed = poincare_transform(&space, &g, p.s_prime, p.p)?;
        let check = poincare_check(&space, &u, &transformed, p.gamma, p.s, p.p)?;
        out["poincare_max_ratio"] = json!(check.max_ratio);
        out["poincare_rows"] = json!(check.rows.len());
        let mut csv = String::from("x,k,lhs,rhs,ratio\n");
        for r in &check.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                r.x,
                r.k,
                jsonio::fmt_f64_12(r.lhs),
                jsonio::fmt_f64_12(r.rhs),
                jsonio::fmt_f64_12(r.ratio),
            );
        }
        write_text(&common.out, &format!("poincare_s{}.csv", p.s), &csv)?;
    }
    write_json(&common.out, &format!("gradient_check_s{}.json", p.s), &out)?;
    let mut csv = String::from("valid,mixed_norm,tl_norm,worst_x,worst_y,worst_k,worst_amount\n");
    match &report.worst {
        Some(w) => {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                report.valid,
                jsonio::fmt_f64_12(mixed),
                jsonio::fmt_f64_12(total),
                w.x,
                w.y,
                w.k,
                jsonio::fmt_f64_12(w.amount),
            );
        }
        None => {
            let _ = writeln!(
                csv,
                "{},{},{},,,,",
                report.valid,
                jsonio::fmt_f64_12(mixed),
                jsonio::fmt_f64_12(total),
            );
        }
    }
    write_text(&common.out, &format!("gradient_check_s{}.csv", p.s), &csv)?;
    println!("valid = {}", report.valid);
    Ok(())
}

fn cmd_capacity(
    common: &CommonArgs,
    params: &ParamArgs,
    strategy: &str,
    max_iters: Option<usize>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let space = space_from_config(&cfg, None)?;
    let p = resolve_params(&cfg, params, Params::new(0.5, 2.0, 2.0)?)?;
    let opts = solver_options(&cfg, common, max_iters)?;
    let strat = match strategy {
        "auto" => Strategy::for_params(&p),
        other => Strategy::parse(other)?,
    };
    let tag = format!("s{}_p{}_q{}", p.s, p.p, p.q);
    if let Some(ball) = cfg.get("ball") {
        let center = ball
            .get("center")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::config("config field \"ball.center\" missing"))?;
        let radius = ball
            .get("radius")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::config("config field \"ball.radius\" missing"))?;
        let bound = ball_capacity_bound(&space, center as usize, radius, &p)?;
        write_json(
            &common.out,
            &format!("capacity_ball_{tag}.json"),
            &bound.to_value(),
        )?;
        let mut csv = String::from("center,radius,upper,reference,ratio\n");
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            bound.center,
            jsonio::fmt_f64_12(bound.radius),
            jsonio::fmt_f64_12(bound.upper),
            jsonio::fmt_f64_12(bound.reference),
            jsonio::fmt_f64_12(bound.ratio),
        );
        write_text(&common.out, &format!("capacity_ball_{tag}.csv"), &csv)?;
        println!("upper = {}", jsonio::fmt_f64_17(bound.upper));
        return Ok(());
    }
    let trials: Option<Vec<Vec<Vec<usize>>>> = match (cfg.get("trials"), cfg.get("sets")) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "config fields \"trials\" and \"sets\" are mutually exclusive",
            ))
        }
        (Some(raw), None) => Some(set_families(raw, "trials")?),
        (None, Some(raw)) => Some(vec![set_family(raw, "sets")?]),
        (None, None) => None,
    };
    if let Some(trials) = trials {
        let report = subadditivity_check(&space, &trials, &p, strat, &opts)?;
        write_json(
            &common.out,
            &format!("capacity_subadd_{tag}.json"),
            &report.to_value(),
        )?;
        let mut csv = String::from("trial,union_value,lhs,rhs,ratio,monotone_slack\n");
        for (i, t) in report.trials.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                i,
                jsonio::fmt_f64_12(t.union_value),
                jsonio::fmt_f64_12(t.lhs),
                jsonio::fmt_f64_12(t.rhs),
                jsonio::fmt_f64_12(t.ratio),
                jsonio::fmt_f64_12(t.monotone_slack),
            );
        }
        write_text(&common.out, &format!("capacity_subadd_{tag}.csv"), &csv)?;
        println!(
            "constant = {}, monotone = {}",
            jsonio::fmt_f64_17(report.constant),
            report.monotone
        );
        return Ok(());
    }
    let set = require(usize_array(&cfg, "set")?, "set")?;
    let result = capacity_upper(&space, &set, &p, strat, &opts)?;
    write_json(
        &common.out,
        &format!("capacity_{tag}.json"),
        &result.to_value(),
    )?;
    let mut csv = String::from("x,u,column_norm\n");
    for (x, &v) in result.witness_u.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            x,
            jsonio::fmt_f64_12(v),
            jsonio::fmt_f64_12(result.witness_g.column_norm(x, p.q)),
        );
    }
    write_text(&common.out, &format!("capacity_{tag}.csv"), &csv)?;
    println!(
        "value = {}, strategy = {}, iterations = {}",
        jsonio::fmt_f64_17(result.value),
        result.strategy.name(),
        result.iterations
    );
    Ok(())
}

fn set_family(raw: &Value, key: &str) -> Result<Vec<Vec<usize>>> {
    let arr = raw
        .as_array()
        .ok_or_else(|| Error::config(format!("config field \"{key}\" must be an array of arrays")))?;
    let mut sets = Vec::new();
    for (i, s) in arr.iter().enumerate() {
        let parsed: Option<Vec<usize>> = s
            .as_array()
            .and_then(|a| a.iter().map(|x| x.as_u64().map(|u| u as usize)).collect());
        sets.push(parsed.ok_or_else(|| {
            Error::config(format!("config field \"{key}[{i}]\" must hold integers"))
        })?);
    }
    Ok(sets)
}

fn set_families(raw: &Value, key: &str) -> Result<Vec<Vec<Vec<usize>>>> {
    let arr = raw
        .as_array()
        .ok_or_else(|| Error::config(format!("config field \"{key}\" must be an array")))?;
    arr.iter()
        .enumerate()
        .map(|(i, fam)| set_family(fam, &format!("{key}[{i}]")))
        .collect()
}

fn cmd_content(common: &CommonArgs, method: Option<&str>, delta: Option<f64>) -> Result<()> {
    let cfg = load_config(common)?;
    let space = space_from_config(&cfg, None)?;
    let set = require(usize_array(&cfg, "set")?, "set")?;
    let gauge = Gauge::from_value(require(cfg.get("gauge"), "gauge")?)?;
    let delta = match delta {
        Some(d) => d,
        None => require(f64_field(&cfg, "delta")?, "delta")?,
    };
    let method_name = method
        .map(str::to_owned)
        .or_else(|| cfg.get("method").and_then(Value::as_str).map(str::to_owned))
        .unwrap_or_else(|| "exact".to_owned());
    let method = match method_name.as_str() {
        "exact" => ContentMethod::Exact,
        "greedy" => ContentMethod::Greedy,
        other => {
            return Err(Error::config(format!(
                "unknown content method \"{other}\" (expected exact or greedy)"
            )))
        }
    };
    let solution = content(&space, &set, gauge, delta, method)?;
    write_json(
        &common.out,
        &format!("content_{}_delta{}.json", method.name(), delta),
        &solution.to_value(),
    )?;
    let mut csv = String::from("center,radius,gauge\n");
    for b in &solution.balls {
        let _ = writeln!(
            csv,
            "{},{},{}",
            b.center,
            jsonio::fmt_f64_12(b.radius),
            jsonio::fmt_f64_12(gauge.eval(&space, b.center, b.radius)?),
        );
    }
    write_text(
        &common.out,
        &format!("content_{}_delta{}.csv", method.name(), delta),
        &csv,
    )?;
    println!("gauge_sum = {}", jsonio::fmt_f64_17(solution.gauge_sum));
    Ok(())
}

fn cmd_cover5b(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(common)?;
    let space = space_from_config(&cfg, None)?;
    let balls = balls_from_config(&cfg, "balls")?;
    let cover = five_b_cover(&space, &balls)?;
    write_json(&common.out, "cover5b.json", &cover.to_value())?;
    let mut csv = String::from("center,radius\n");
    for b in &cover.chosen {
        let _ = writeln!(csv, "{},{}", b.center, jsonio::fmt_f64_12(b.radius));
    }
    write_text(&common.out, "cover5b.csv", &csv)?;
    println!("chosen = {}", cover.chosen.len());
    Ok(())
}

/// Inclusive "lo..hi" range, or a single level "n".
fn parse_levels(raw: &str) -> Result<(usize, usize)> {
    let parse_one = |txt: &str| -> Result<usize> {
        txt.trim()
            .parse::<usize>()
            .map_err(|_| Error::config(format!("levels must be integers, got \"{txt}\"")))
    };
    match raw.split_once("..") {
        Some((lo, hi)) => Ok((parse_one(lo)?, parse_one(hi)?)),
        None => {
            let level = parse_one(raw)?;
            Ok((level, level))
        }
    }
}

fn cmd_verify_thm1(
    common: &CommonArgs,
    params: &ParamArgs,
    family: Option<&str>,
    levels: Option<&str>,
    delta: Option<f64>,
    max_iters: Option<usize>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let p = resolve_params(&cfg, params, Params::new(0.5, 2.0, 2.0)?)?;
    let family = match family {
        Some(f) => Family::parse(f)?,
        None => match cfg.get("family").and_then(Value::as_str) {
            Some(f) => Family::parse(f)?,
            None => Family::Cantor,
        },
    };
    let levels = match levels {
        Some(text) => parse_levels(text)?,
        None => match cfg.get("levels").and_then(Value::as_str) {
            Some(text) => parse_levels(text)?,
            None => (1, 4.min(family.max_level())),
        },
    };
    let delta = match delta {
        Some(d) => d,
        None => f64_field(&cfg, "delta")?.unwrap_or(1.0),
    };
    let opts = solver_options(&cfg, common, max_iters)?;
    let report = verify_thm1(family, levels, &p, delta, &opts)?;
    let tag = format!("{}_s{}_p{}_q{}", family.name(), p.s, p.p, p.q);
    write_json(
        &common.out,
        &format!("verify_thm1_{tag}.json"),
        &report.to_value(),
    )?;
    write_text(
        &common.out,
        &format!("verify_thm1_{tag}.csv"),
        &report.to_csv(),
    )?;
    println!(
        "verdict = {}, ratio spread = {}",
        report.verdict,
        jsonio::fmt_f64_17(report.spread)
    );
    Ok(())
}

fn cmd_proof_covering(
    common: &CommonArgs,
    params: &ParamArgs,
    m: Option<i32>,
    c_poincare: Option<f64>,
    gradient_scale: Option<f64>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let space = space_from_config(&cfg, Some(generate::grid1d(64)?))?;
    let set = usize_array(&cfg, "set")?.unwrap_or_else(|| vec![space.len() / 2]);
    let p = resolve_params(&cfg, params, Params::new(0.5, 2.0, 2.0)?)?;
    let m = match m {
        Some(v) => v,
        None => cfg.get("m").and_then(Value::as_i64).map_or(6, |v| v as i32),
    };
    let c_poincare = match c_poincare {
        Some(v) => Some(v),
        None => f64_field(&cfg, "c_poincare")?,
    };
    let scale = match gradient_scale {
        Some(v) => v,
        None => f64_field(&cfg, "gradient_scale")?.unwrap_or(1.0),
    };
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config("gradient scale must be positive and finite"));
    }
    // The admissible pair comes from the config when supplied, otherwise
    // from the cutoff ball construction.
    let (u, g) = match (f64_array(&cfg, "u")?, cfg.get("gradient")) {
        (Some(u), Some(gv)) => (u, GradientSequence::from_value(gv)?),
        (None, None) => covering_profile(&space, &set, &p, m)?,
        _ => {
            return Err(Error::config(
                "config fields \"u\" and \"gradient\" must be supplied together",
            ))
        }
    };
    let g = g.scaled(scale);
    let report = proof_covering(&space, &set, &u, &g, &p, m, c_poincare)?;
    write_json(
        &common.out,
        &format!("proof_covering_m{m}.json"),
        &report.to_value(),
    )?;
    let mut csv = String::from("x,k,radius,lhs,rhs\n");
    for r in &report.selections {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.x,
            r.k,
            jsonio::fmt_f64_12(r.radius),
            jsonio::fmt_f64_12(r.lhs),
            jsonio::fmt_f64_12(r.rhs),
        );
    }
    write_text(&common.out, &format!("proof_covering_m{m}.csv"), &csv)?;
    println!(
        "gauge_sum = {} <= bound = {}",
        jsonio::fmt_f64_17(report.gauge_sum),
        jsonio::fmt_f64_17(report.bound)
    );
    Ok(())
}

fn cmd_lebesgue(
    common: &CommonArgs,
    params: &ParamArgs,
    grid: Option<usize>,
    c_thresh: Option<f64>,
    j0: Option<i32>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let n = grid.unwrap_or_else(|| {
        cfg.get("grid")
            .and_then(Value::as_u64)
            .map_or(64, |v| v as usize)
    });
    let space = space_from_config(&cfg, Some(generate::grid1d(n)?))?;
    let default = Params::new(0.3, 0.5, 2.0)?.with_gamma(0.25)?.with_eps(1.0)?;
    let p = resolve_params(&cfg, params, default)?;
    let u = match f64_array(&cfg, "u")? {
        Some(u) => u,
        None => match cfg.get("profile").and_then(Value::as_str) {
            Some("tent") => tent_profile(&space)?,
            Some("singular") | None => singular_profile(&space)?,
            Some(other) => {
                return Err(Error::config(format!(
                    "unknown profile \"{other}\" (expected singular or tent)"
                )))
            }
        },
    };
    let c_thresh = match c_thresh {
        Some(v) => v,
        None => f64_field(&cfg, "c_thresh")?.unwrap_or(1.0),
    };
    let j0 = match j0 {
        Some(v) => v,
        None => cfg.get("j0").and_then(Value::as_i64).map_or(3, |v| v as i32),
    };
    let report = lebesgue_experiment(&space, &u, &p, c_thresh, j0)?;
    let size = space.len();
    write_json(
        &common.out,
        &format!("lebesgue_n{size}.json"),
        &report.to_value(),
    )?;
    write_text(
        &common.out,
        &format!("lebesgue_cauchy_n{size}.csv"),
        &report.cauchy_csv(),
    )?;
    println!(
        "K = {}, K' = {}, bad_points = {}",
        jsonio::fmt_f64_17(report.embedding_constant),
        jsonio::fmt_f64_17(report.cauchy_constant),
        report.bad_points.len()
    );
    Ok(())
}
