use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cosparse_core::bounds::{self, e_m, error_bounds, BoundQuery};
use cosparse_core::error::{Error, Result};
use cosparse_core::experiments::{self, ExperimentConfig, FrameSpec, MGrid};
use cosparse_core::frames::{frame_with_ratio, tight_frame, Frame};
use cosparse_core::geometry::{self, width_bound_cone, width_bound_d};
use cosparse_core::io::{fmt_g17, read_json, read_matrix, read_vector, sidecar_path, write_json, write_matrix, write_matrix_to, write_vector};
use cosparse_core::model::{gaussian_instance, synth_cosparse};
use cosparse_core::nsp::{nsp_check, NspQuery, NspStatus, NspVariant};
use cosparse_core::rng::{child, random_subset, stream};
use cosparse_core::solver::{solve_abp, solve_abpdn, SolverOptions};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::{json, Value};

use crate::args::*;

/// Settings shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub quiet: bool,
}

/// What a subcommand prints and whether it counts as a domain failure.
pub struct Output {
    pub stdout: String,
    pub failed: bool,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self { stdout, failed: false }
    }
}

impl Ctx {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Renders a JSON object with the seed attached, or the CSV fallback.
    fn render(&self, mut value: Value, csv: impl FnOnce() -> Result<String>) -> Result<String> {
        match self.format {
            Format::Json => {
                value["seed"] = json!(self.seed);
                Ok(serde_json::to_string_pretty(&value)? + "\n")
            }
            Format::Csv => csv(),
        }
    }
}

fn matrix_rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    mat.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector_csv(v: &DVector<f64>) -> String {
    v.iter().fold(String::new(), |mut s, x| {
        let _ = writeln!(s, "{}", fmt_g17(*x));
        s
    })
}

fn matrix_csv(mat: &DMatrix<f64>) -> Result<String> {
    let mut buf = Vec::new();
    write_matrix_to(&mut buf, mat)?;
    Ok(String::from_utf8(buf).expect("ASCII output"))
}

/// `key,value` lines for a flat JSON object.
fn pairs_csv(value: &Value) -> String {
    let mut s = String::from("key,value\n");
    if let Value::Object(map) = value {
        for (k, v) in map {
            match v {
                Value::Number(n) => {
                    let _ = writeln!(s, "{k},{}", n.as_f64().map(fmt_g17).unwrap_or_else(|| n.to_string()));
                }
                Value::Object(_) => {
                    for line in pairs_csv(v).lines().skip(1) {
                        let _ = writeln!(s, "{k}.{line}");
                    }
                }
                other => {
                    let _ = writeln!(s, "{k},{other}");
                }
            }
        }
    }
    s
}

fn load_frame(path: &Path) -> Result<Frame> {
    Frame::new(read_matrix(path)?)
}

fn frame_summary(frame: &Frame) -> Value {
    json!({
        "p": frame.p(),
        "d": frame.d(),
        "A": frame.lower_bound(),
        "B": frame.upper_bound(),
        "ratio": frame.ratio(),
        "tight": frame.is_tight(),
    })
}

pub fn frame(ctx: &Ctx, args: &FrameArgs) -> Result<Output> {
    if let Some(path) = &args.check {
        let frame = load_frame(path)?;
        let summary = frame_summary(&frame);
        return Ok(Output::ok(ctx.render(summary.clone(), || Ok(pairs_csv(&summary)))?));
    }
    let (p, d) = (args.p.expect("required by clap"), args.d.expect("required by clap"));
    let tight = tight_frame(p, d, &mut child(ctx.seed, &[0]))?;
    let frame = match args.ratio {
        Some(r) => frame_with_ratio(&tight, r, &mut child(ctx.seed, &[1]))?,
        None => tight,
    }
    .with_seed(ctx.seed);
    let mut summary = frame_summary(&frame);
    if let Some(out) = &ctx.out {
        write_matrix(out, frame.omega())?;
        write_json(&sidecar_path(out), &frame.meta())?;
        summary["out"] = json!(out);
        return Ok(Output::ok(ctx.render(summary.clone(), || Ok(pairs_csv(&summary)))?));
    }
    summary["omega"] = json!(matrix_rows(frame.omega()));
    Ok(Output::ok(ctx.render(summary, || matrix_csv(frame.omega()))?))
}

pub fn signal(ctx: &Ctx, args: &SignalArgs) -> Result<Output> {
    let frame = load_frame(&args.frame)?;
    let l = match (args.l, args.s) {
        (Some(l), _) => l,
        (None, Some(s)) if s <= frame.p() => frame.p() - s,
        (None, Some(s)) => return Err(Error::InvalidArgument(format!("s = {s} exceeds p = {}", frame.p()))),
        (None, None) => unreachable!("clap requires one of --l, --s"),
    };
    let mut rng = stream(ctx.seed);
    let sig = synth_cosparse(&frame, l, &mut rng)?;
    let inst = match args.m {
        Some(m) => {
            if m > frame.d() {
                ctx.note(&format!("warning: m = {m} exceeds d = {}", frame.d()));
            }
            Some(gaussian_instance(&frame, &sig, m, args.eta, &mut rng)?)
        }
        None => None,
    };
    let mut value = json!({
        "d": frame.d(),
        "p": frame.p(),
        "cosparsity": sig.cosparsity(),
        "cosupport": sig.cosupport,
    });
    if let Some(dir) = &ctx.out {
        fs::create_dir_all(dir)?;
        write_vector(&dir.join("x.csv"), &sig.x)?;
        write_json(&dir.join("x.json"), &json!({"cosparsity": sig.cosparsity(), "cosupport": sig.cosupport, "seed": ctx.seed}))?;
        if let Some(inst) = &inst {
            write_matrix(&dir.join("matrix.csv"), &inst.matrix)?;
            write_vector(&dir.join("y.csv"), &inst.y)?;
            write_json(&dir.join("instance.json"), &inst.meta(Some(ctx.seed)))?;
        }
        value["out"] = json!(dir);
    } else {
        value["x"] = json!(sig.x.as_slice());
        if let Some(inst) = &inst {
            value["matrix"] = json!(matrix_rows(&inst.matrix));
            value["y"] = json!(inst.y.as_slice());
            value["eta"] = json!(inst.eta);
        }
    }
    Ok(Output::ok(ctx.render(value, || Ok(vector_csv(&sig.x)))?))
}

pub fn solve(ctx: &Ctx, args: &SolveArgs) -> Result<Output> {
    let frame = load_frame(&args.frame)?;
    let m = read_matrix(&args.matrix)?;
    let y = read_vector(&args.y)?;
    let defaults = SolverOptions::default();
    let opts = SolverOptions {
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        tol_feas: args.tol_feas.or(defaults.tol_feas),
        tol_gap: args.tol_gap.unwrap_or(defaults.tol_gap),
        step_ratio: args.step_ratio.unwrap_or(defaults.step_ratio),
        over_relaxation: args.over_relaxation.unwrap_or(defaults.over_relaxation),
        polish: !args.no_polish,
        trace: args.trace.is_some(),
        ..defaults
    };
    let res = if args.eta > 0.0 {
        solve_abpdn(&frame, &m, &y, args.eta, &opts)?
    } else {
        solve_abp(&frame, &m, &y, &opts)?
    };
    if let Some(path) = &args.trace {
        let mut s = String::from("iter,objective,feas_residual,gap\n");
        for row in &res.trace {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                row.iter,
                fmt_g17(row.objective),
                fmt_g17(row.feas_residual),
                fmt_g17(row.gap)
            );
        }
        fs::write(path, s)?;
    }
    let stats = json!({
        "status": res.status,
        "objective": res.objective,
        "feas_residual": res.feas_residual,
        "cert_gap": res.cert_gap,
        "iters": res.iters,
    });
    let mut value = stats.clone();
    if let Some(out) = &ctx.out {
        write_vector(out, &res.z)?;
        write_json(&sidecar_path(out), &stats)?;
        value["out"] = json!(out);
    } else {
        value["z"] = json!(res.z.as_slice());
    }
    if !res.converged() {
        ctx.note(&format!("solver stopped after {} iterations without a certificate", res.iters));
    }
    Ok(Output {
        stdout: ctx.render(value, || Ok(vector_csv(&res.z)))?,
        failed: !res.converged(),
    })
}

pub fn bounds(ctx: &Ctx, args: &BoundsArgs) -> Result<Output> {
    let q = BoundQuery::new(args.s, args.p)
        .frame(args.a, args.b)
        .eps(args.eps)
        .rho(args.rho)
        .tau(args.tau)
        .eta(args.eta);
    let m_nonuniform = bounds::m_nonuniform(&q)?;
    let noisy = bounds::m_nonuniform_noisy(&q)?;
    let m_uniform = bounds::m_uniform(&q)?;
    let robust = bounds::m_uniform_robust(&q.tau(args.tau_robust))?;
    let errors = error_bounds(&q, args.sigma, m_nonuniform)?;
    let value = json!({
        "m_nonuniform": m_nonuniform,
        "m_uniform": m_uniform,
        "m_nonuniform_noisy": noisy,
        "m_uniform_robust": robust,
        "e_m": e_m(m_nonuniform),
        "error_bounds": errors,
    });
    Ok(Output::ok(ctx.render(value.clone(), || Ok(pairs_csv(&value)))?))
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required for this set")))
}

pub fn width(ctx: &Ctx, args: &WidthArgs) -> Result<Output> {
    let p = args.p;
    if args.samples < 2 {
        return Err(Error::InvalidArgument("--samples must be >= 2".into()));
    }
    let check_s = |s: usize| {
        if s == 0 || s > p {
            Err(Error::InvalidArgument(format!("need 1 <= s <= p = {p}, got {s}")))
        } else {
            Ok(s)
        }
    };
    let mut rng = stream(ctx.seed);
    let value = match args.set {
        WidthSet::D => {
            let s = check_s(need(args.s, "s")?)?;
            let est = geometry::width_d_mc(p, s, args.samples, &mut rng);
            json!({"set": "D", "mean": est.mean, "std_err": est.std_err, "n_samples": est.n_samples, "bound": width_bound_d(s, p)})
        }
        WidthSet::Polar => {
            let s = check_s(need(args.s, "s")?)?;
            let support = random_subset(&mut rng, p, s);
            let signs: Vec<f64> = support.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let est = geometry::width_polar_mc(&support, &signs, p, args.samples, &mut rng);
            json!({"set": "polar", "mean": est.mean, "std_err": est.std_err, "n_samples": est.n_samples, "bound": width_bound_cone(s, p)})
        }
        WidthSet::Soft => {
            let est = geometry::soft_threshold_moment_mc(args.t, args.samples, &mut rng);
            json!({"set": "soft", "t": args.t, "mean": est.mean, "std_err": est.std_err, "n_samples": est.n_samples, "bound": (-args.t * args.t / 2.0).exp()})
        }
        WidthSet::Escape => {
            let s = check_s(need(args.s, "s")?)?;
            let d = need(args.d, "d")?;
            let m = need(args.m, "m")?;
            let frame = tight_frame(p, d, &mut child(ctx.seed, &[0]))?;
            let sig = synth_cosparse(&frame, p - s, &mut child(ctx.seed, &[1]))?;
            let est = geometry::escape_frequency(&frame, &sig.x, m, args.t, args.dirs, args.trials, &mut child(ctx.seed, &[2]))?;
            let f = est.frequency;
            json!({
                "set": "escape",
                "mean": f,
                "std_err": (f * (1.0 - f) / est.n_trials as f64).sqrt(),
                "n_samples": est.n_trials,
                "bound": est.probability_bound,
                "threshold": est.threshold,
                "width": est.width,
                "e_m": est.e_m,
            })
        }
    };
    Ok(Output::ok(ctx.render(value.clone(), || Ok(pairs_csv(&value)))?))
}

pub fn nsp(ctx: &Ctx, args: &NspArgs) -> Result<Output> {
    let m = read_matrix(&args.matrix)?;
    let frame = load_frame(&args.frame)?;
    let variant = match args.variant {
        Variant::Plain => NspVariant::Plain,
        Variant::L2Stable => NspVariant::L2Stable,
        Variant::Robust => NspVariant::Robust,
    };
    let query = NspQuery { variant, s: args.s, rho: args.rho, tau: args.tau };
    let report = nsp_check(&m, &frame, &query, args.samples, &mut stream(ctx.seed))?;
    let value = serde_json::to_value(&report)?;
    let flat = json!({
        "variant": report.variant,
        "status": report.status,
        "worst_margin": report.worst_margin,
        "n_tested": report.n_tested,
    });
    Ok(Output {
        stdout: ctx.render(value, || Ok(pairs_csv(&flat)))?,
        failed: report.status == NspStatus::Falsified,
    })
}

pub fn phase(ctx: &Ctx, args: &PhaseArgs, seed_given: bool) -> Result<(Output, u64)> {
    let mut cfg = match &args.config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None if args.full => ExperimentConfig::full(),
        None => ExperimentConfig::desk(),
    };
    if seed_given || args.config.is_none() {
        cfg.master_seed = ctx.seed;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(r) = args.ratio {
        cfg.frame_spec = if r == 1.0 { FrameSpec::Tight } else { FrameSpec::Ratio(r) };
    }
    if let Some(s) = &args.s_list {
        cfg.s_list = s.clone();
    }
    if let Some(m) = &args.m_grid {
        cfg.m_grid = MGrid::Explicit(m.clone());
    }
    if let Some(eta) = args.eta {
        cfg.eta = eta;
    }
    cfg.validate()?;
    if cfg.m_values().iter().any(|&m| m > cfg.d) {
        ctx.note(&format!("warning: m grid exceeds d = {}", cfg.d));
    }
    let curve = experiments::phase_curve(&cfg)?;
    let stalled: usize = curve.cells.iter().map(|c| c.solver_max_iters + c.solver_errors).sum();
    if stalled > 0 {
        ctx.note(&format!("{stalled} trials ended without a converged solve (counted as failures)"));
    }
    if let Some(dir) = &ctx.out {
        experiments::write_phase_outputs(dir, &curve)?;
        write_json(&dir.join("config.json"), &cfg)?;
    }
    let value = json!({
        "d": cfg.d,
        "p": cfg.p,
        "frame_ratio": curve.frame_ratio,
        "cells": curve.cells.len(),
        "solver_failures": stalled,
        "frontier": curve.frontier,
        "frontier_monotone": curve.frontier_monotone,
    });
    let ctx = Ctx { seed: cfg.master_seed, out: None, format: ctx.format, quiet: ctx.quiet };
    let stdout = ctx.render(value, || {
        let mut buf = Vec::new();
        experiments::write_curve(&mut buf, &curve.cells)?;
        Ok(String::from_utf8(buf).expect("ASCII output"))
    })?;
    Ok((Output::ok(stdout), cfg.master_seed))
}
