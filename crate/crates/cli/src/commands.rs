//! The three subcommands. Each returns its artifacts in memory; writing
//! them out is separate so tests can compare runs without touching disk.

use std::path::Path;
use std::time::Instant;

use limsup_core::cantortree::{build_tree, dimension_bisect, mass_distribution_bound, BisectOptions, TreeParams};
use limsup_core::covering::{captured_by_union, dilation_bound_check, greedy_select, selection_is_sound, DropReason, StepOutcome};
use limsup_core::dimfn::{cantelli_upper_check, FValidity, MAX_RANGE};
use limsup_core::localmeasure::{effective_cutoff, query_local, verify_star_hypothesis, LocalMeasureError, WeightedBallMeasure};
use limsup_core::oracle::shell_box_count;
use limsup_core::rng::{stream_rng, sub_seed};
use limsup_core::sequences::{restrict_to, IndexedBall};
use limsup_core::{check_dimension_function, AhlforsSpace, Ball, DimensionFunction};

use crate::config::RunConfig;
use crate::report::{
    CRun, CheckReport, DilationSummary, DimensionReport, LocalSummary, OracleSummary, RunReport, SelectionSummary, StageFailure, TailMark,
    TreeSummary,
};
use crate::CliError;

/// Tolerance for the per-node mass conservation check.
pub const MASS_TOL: f64 = 1e-9;

const STAR_SEED: u64 = 1;
const MDP_SEED: u64 = 2;
const TRACE_SEED: u64 = 3;
const BISECT_SEED: u64 = 4;
const TRACE_RADII: usize = 32;

/// Everything a command produces.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub report: RunReport,
    /// `(stage, C, seconds)`; kept out of the report so it stays reproducible.
    pub timings: Vec<(String, Option<f64>, f64)>,
    /// Extra files by name.
    pub files: Vec<(String, Vec<u8>)>,
    /// One-line summary for the terminal.
    pub summary: String,
}

impl Artifacts {
    pub fn ok(&self) -> bool {
        self.report.status == "ok"
    }

    pub fn report_text(&self) -> Result<String, CliError> {
        toml::to_string(&self.report).map_err(|e| CliError::Io(format!("serializing report: {e}")))
    }

    pub fn timings_text(&self) -> String {
        let mut s = String::from("stage\tc\tseconds\n");
        for (stage, c, t) in &self.timings {
            let c = c.map_or("-".to_string(), |c| c.to_string());
            s.push_str(&format!("{stage}\t{c}\t{t:.3}\n"));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("report.txt"), self.report_text()?).map_err(io)?;
        std::fs::write(dir.join("timings.txt"), self.timings_text()).map_err(io)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes).map_err(io)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Timer {
    entries: Vec<(String, Option<f64>, f64)>,
}

impl Timer {
    fn time<T>(&mut self, stage: &str, c: Option<f64>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.entries.push((stage.to_string(), c, start.elapsed().as_secs_f64()));
        out
    }
}

fn report(command: &str, cfg: &RunConfig) -> RunReport {
    RunReport {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        status: "ok".into(),
        config: cfg.clone(),
        check: None,
        runs: Vec::new(),
        dimension: None,
    }
}

fn usage(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{field}: {e}"))
}

fn verdict(v: &FValidity) -> String {
    match (v.decreasing_ok, v.divergence_ok) {
        (true, true) => "valid".into(),
        (false, true) => "fails decreasing".into(),
        (true, false) => "fails divergence".into(),
        (false, false) => "fails decreasing, fails divergence".into(),
    }
}

/// Validity of `f` against `δ`, with `λ` and the covering tails.
pub fn cmd_check(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let f = cfg.f_spec().map_err(|e| usage("f", e))?;
    let delta = cfg.space.delta();
    let terms = cfg.terms()?;
    let mut rep = report("check", cfg);
    let mut timer = Timer::default();
    let validity = timer.time("validity", None, || check_dimension_function(&f, delta, MAX_RANGE));
    let tails = timer
        .time("cantelli", None, || cantelli_upper_check(&f, &cfg.sequence, terms))
        .map_err(|e| usage("sequence", e))?;
    let cantelli = tails.into_iter().map(|(n, tail)| TailMark { n, tail }).collect();
    let summary = match validity {
        Ok(v) => {
            let verdict = verdict(&v);
            rep.check = Some(CheckReport {
                verdict: verdict.clone(),
                delta,
                r_max: v.r_max,
                decreasing_ok: v.decreasing_ok,
                divergence_ok: v.divergence_ok,
                lambda: v.lambda,
                eta: v.eta(),
                terms,
                cantelli,
            });
            if !v.is_valid() {
                rep.status = "failed".into();
            }
            format!("{verdict} (lambda {:.6}, eta {:.6})", v.lambda, v.eta())
        }
        Err(e) => {
            rep.status = "failed".into();
            rep.check = Some(CheckReport {
                verdict: format!("fails: {e}"),
                delta,
                r_max: MAX_RANGE,
                decreasing_ok: false,
                divergence_ok: false,
                lambda: f64::NAN,
                eta: f64::NAN,
                terms,
                cantelli,
            });
            format!("fails: {e}")
        }
    };
    Ok(Artifacts {
        report: rep,
        timings: timer.entries,
        files: Vec::new(),
        summary,
    })
}

struct Prepared {
    space: AhlforsSpace,
    f: DimensionFunction,
    delta: f64,
    b0: Ball,
    raw: Vec<Ball>,
    balls: Vec<IndexedBall>,
}

fn prepare(cfg: &RunConfig, timer: &mut Timer) -> Result<Prepared, CliError> {
    let space = cfg.space;
    let f = cfg.f_spec().map_err(|e| usage("f", e))?;
    let b0 = cfg.b0().map_err(|e| usage("run.b0", e))?;
    let terms = cfg.terms()?;
    let raw = timer
        .time("generate", None, || cfg.sequence.generate(&space, terms))
        .map_err(|e| usage("sequence", e))?;
    let balls = restrict_to(&raw, 1, &b0).map_err(|e| usage("run.b0", e))?;
    Ok(Prepared {
        space,
        f,
        delta: space.delta(),
        b0,
        raw,
        balls,
    })
}

/// Full pipeline for every `C`: selection, local measure, tree, mass bound.
pub fn cmd_build(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut timer = Timer::default();
    let p = prepare(cfg, &mut timer)?;
    let mut rep = report("build", cfg);

    let validity = match check_dimension_function(&p.f, p.delta, MAX_RANGE) {
        Ok(v) if v.is_valid() => v,
        Ok(v) => return Ok(stage_failure(rep, timer, "validity", format!("f {}", verdict(&v)))),
        Err(e) => return Ok(stage_failure(rep, timer, "validity", e.to_string())),
    };

    let mut dump = String::new();
    let mut selection_rows = csv::Writer::from_writer(Vec::new());
    let mut trace_rows = csv::Writer::from_writer(Vec::new());
    selection_rows
        .write_record(["c", "step", "index", "radius", "outcome", "blocker"])
        .and_then(|_| trace_rows.write_record(["c", "source", "sample", "center", "log_rho", "log_mu"]))
        .map_err(|e| CliError::Io(e.to_string()))?;

    for &c in &cfg.run.c_list {
        let mut run = CRun::new(c);
        build_one(
            cfg,
            &p,
            &validity,
            c,
            &mut run,
            &mut timer,
            &mut dump,
            &mut selection_rows,
            &mut trace_rows,
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
        rep.runs.push(run);
    }
    if rep.runs.iter().any(CRun::failed) {
        rep.status = "failed".into();
    }
    let summary = rep
        .runs
        .iter()
        .map(|r| match (&r.failure, &r.mdp) {
            (Some(f), _) => format!("C={}: {} failed: {}", r.c, f.stage, f.message),
            (None, Some(m)) => format!("C={}: lower_bound {:.6e}", r.c, m.lower_bound),
            (None, None) => format!("C={}: ok", r.c),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let finish = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| CliError::Io(e.to_string()));
    Ok(Artifacts {
        report: rep,
        timings: timer.entries,
        files: vec![
            ("tree.dump".into(), dump.into_bytes()),
            ("selection.csv".into(), finish(selection_rows)?),
            ("traces.csv".into(), finish(trace_rows)?),
        ],
        summary,
    })
}

fn stage_failure(mut rep: RunReport, timer: Timer, stage: &str, message: String) -> Artifacts {
    rep.status = "failed".into();
    let mut run = CRun::new(f64::NAN);
    run.fail(stage, message.clone());
    rep.runs = cfg_runs(&rep.config, &run);
    Artifacts {
        report: rep,
        timings: timer.entries,
        files: Vec::new(),
        summary: format!("{stage} failed: {message}"),
    }
}

fn cfg_runs(cfg: &RunConfig, template: &CRun) -> Vec<CRun> {
    cfg.run.c_list.iter().map(|&c| CRun { c, ..template.clone() }).collect()
}

fn log_radii(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1).max(1) as f64).exp())
}

#[allow(clippy::too_many_arguments)]
fn build_one(
    cfg: &RunConfig,
    p: &Prepared,
    validity: &FValidity,
    c: f64,
    run: &mut CRun,
    timer: &mut Timer,
    dump: &mut String,
    selection_rows: &mut csv::Writer<Vec<u8>>,
    trace_rows: &mut csv::Writer<Vec<u8>>,
) -> Result<(), csv::Error> {
    let n = cfg.run.n;
    let Some(n_eff) = effective_cutoff(&p.balls, &p.f, p.delta, c, n) else {
        run.fail("cutoff", LocalMeasureError::RadiiTooLarge { c }.to_string());
        return Ok(());
    };
    let sel = timer.time("select", Some(c), || {
        greedy_select(&p.space, &p.balls, &p.f, p.delta, c, &p.b0, n_eff)
    });
    let union = captured_by_union(&p.space, &sel);
    let sound = selection_is_sound(&sel, &p.b0);
    run.selection = Some(SelectionSummary::new(&sel, p.balls.len(), n, n_eff, union, sound));
    run.dilation = Some(DilationSummary::from(&dilation_bound_check(
        &sel,
        &p.balls,
        &p.f,
        p.delta,
        validity.lambda,
    )));
    for (k, step) in sel.trace.iter().enumerate() {
        let (outcome, blocker) = match step.outcome {
            StepOutcome::Accepted => ("accepted".to_string(), String::new()),
            StepOutcome::Rejected { blocker } => ("rejected".to_string(), blocker.to_string()),
            StepOutcome::Dropped {
                reason: DropReason::OutsideTarget,
            } => ("dropped-outside-target".to_string(), String::new()),
            StepOutcome::Dropped {
                reason: DropReason::NullBall,
            } => ("dropped-null-ball".to_string(), String::new()),
        };
        selection_rows.write_record([
            c.to_string(),
            k.to_string(),
            step.index.to_string(),
            format!("{:e}", step.radius),
            outcome,
            blocker,
        ])?;
    }
    if !sound {
        run.fail("select", "selection is not disjoint or leaves the target ball");
        return Ok(());
    }
    if let Some(fraction) = (!sel.is_success()).then(|| sel.fraction()) {
        run.fail(
            "select",
            LocalMeasureError::Partial {
                fraction,
                n_effective: n_eff,
            }
            .to_string(),
        );
        return Ok(());
    }

    let mu = match WeightedBallMeasure::from_selection(&p.space, &sel, &p.f, p.delta, c, &p.b0, n, n_eff) {
        Ok(mu) => mu,
        Err(e) => {
            run.fail("local-measure", e.to_string());
            return Ok(());
        }
    };
    let bound = timer.time("local-measure", Some(c), || {
        verify_star_hypothesis(&mu, cfg.run.samples, sub_seed(cfg.seed, STAR_SEED))
    });
    run.local_measure = Some(LocalSummary {
        atoms: mu.len(),
        k: mu.k,
        k_ratio: mu.k_ratio(),
        min_atom_radius: mu.min_atom_radius(),
        bound,
    });
    let trace_seed = sub_seed(cfg.seed, TRACE_SEED);
    let centers: Vec<f64> = (0..cfg.run.traces)
        .map(|k| mu.sample(&mut stream_rng(trace_seed, k as u64)))
        .collect();
    for (k, &x) in centers.iter().enumerate() {
        for rho in log_radii(mu.min_atom_radius() / 10.0, p.b0.diam(), TRACE_RADII) {
            let m = query_local(&mu, &Ball { center: x, radius: rho });
            if m > 0.0 {
                trace_rows.write_record([
                    c.to_string(),
                    "local".into(),
                    k.to_string(),
                    format!("{x:e}"),
                    format!("{:e}", rho.ln()),
                    format!("{:e}", m.ln()),
                ])?;
            }
        }
    }

    let params = TreeParams { f: p.f, delta: p.delta, c };
    let build = timer.time("tree", Some(c), || build_tree(&p.space, &p.balls, &params, cfg.run.depth, &p.b0));
    let tree = &build.tree;
    let checks = timer.time("tree-checks", Some(c), || {
        (
            tree.mass_conservation_error(),
            tree.children_separated(),
            tree.rho_feasible(),
            tree.children_in_tail(&p.balls),
        )
    });
    run.tree = Some(TreeSummary {
        depth_requested: cfg.run.depth,
        depth_built: tree.depth(),
        nodes: tree.nodes.len(),
        leaves: tree.leaves().len(),
        shrunk_nodes: tree.nodes.iter().filter(|n| n.expansion.as_ref().is_some_and(|e| e.shrunk)).count(),
        mass_conservation_error: checks.0,
        children_separated: checks.1,
        rho_feasible: checks.2,
        children_in_tail: checks.3,
        levels: tree.level_stats(),
    });
    dump.push_str(&format!("## C = {c}\n"));
    dump.push_str(&tree.dump());
    if let Some(e) = &build.error {
        run.fail("tree", e.to_string());
        return Ok(());
    }
    if !run.tree.as_ref().is_some_and(|t| t.invariants_hold(MASS_TOL)) {
        run.fail("tree", "tree invariant check failed");
        return Ok(());
    }
    for (k, &x) in centers.iter().enumerate() {
        let leaf_r = tree.leaves().iter().map(|l| l.ball.radius).fold(f64::INFINITY, f64::min);
        for rho in log_radii(leaf_r, p.b0.diam(), TRACE_RADII) {
            let (_, upper) = tree.query(&Ball { center: x, radius: rho });
            if upper > 0.0 {
                trace_rows.write_record([
                    c.to_string(),
                    "tree".into(),
                    k.to_string(),
                    format!("{x:e}"),
                    format!("{:e}", rho.ln()),
                    format!("{:e}", upper.ln()),
                ])?;
            }
        }
    }

    let mdp = timer.time("mdp", Some(c), || {
        mass_distribution_bound(tree, &p.f, cfg.run.mdp_samples, sub_seed(cfg.seed, MDP_SEED))
    });
    if !(mdp.c_hat.is_finite() && mdp.c_hat > 0.0) {
        run.fail("mdp", format!("c_hat = {}", mdp.c_hat));
    }
    run.mdp = Some(mdp);
    Ok(())
}

/// Largest `s` for which `κ r^s / C ≥ (2r)^δ` still holds at `r`.
pub fn exponent_cap(kappa: f64, delta: f64, c: f64, r: f64) -> f64 {
    delta + (c * 2f64.powf(delta) / kappa).ln() / r.ln()
}

/// Bisection for the transition exponent plus the box-count oracle.
pub fn cmd_dimension(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let Some(d) = cfg.dimension.clone() else {
        return Err(CliError::Usage("dimension: section missing from config".into()));
    };
    let mut timer = Timer::default();
    let p = prepare(cfg, &mut timer)?;
    let mut rep = report("dimension", cfg);

    let from = d.oracle_from.unwrap_or_else(|| (p.raw.len() as f64).sqrt() as usize).max(1);
    let tail: Vec<Ball> = p.raw.iter().skip(from - 1).copied().collect();
    let r_max = tail.iter().map(|b| b.radius).fold(0.0, f64::max);
    let r_min = tail.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
    let oracle = if tail.is_empty() {
        Err("oracle tail is empty".to_string())
    } else {
        let k_lo = (-r_max.log2()).ceil().max(0.0) as u32;
        let k_hi = ((-r_min.log2()).floor() as u32).saturating_sub(1);
        timer
            .time("oracle", None, || shell_box_count(&tail, k_lo..=k_hi))
            .map_err(|e| e.to_string())
    };
    let s_cap = exponent_cap(
        cfg.f.kappa,
        p.delta,
        d.c,
        p.raw.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min),
    );

    let opts = BisectOptions {
        c: d.c,
        depth: d.depth,
        ceiling: d.ceiling,
        samples: d.samples,
        seed: sub_seed(cfg.seed, BISECT_SEED),
        tol: d.tol,
    };
    let bisect = timer.time("bisect", Some(d.c), || {
        dimension_bisect(&p.space, &p.balls, &p.b0, (d.s_range[0], d.s_range[1]), &opts)
    });

    let mut dim = DimensionReport {
        s_range: d.s_range,
        c: d.c,
        depth: d.depth,
        ceiling: d.ceiling,
        tol: d.tol,
        failure: None,
        s_star: None,
        oracle: None,
        agreement: d.agreement,
        agrees: false,
        s_cap,
        truncation_limited: false,
        steps: Vec::new(),
    };
    match oracle {
        Ok(est) => {
            dim.oracle = Some(OracleSummary {
                from_index: from,
                ks: est.ks,
                counts: est.counts,
                slope: est.slope,
                r2: est.r2,
            })
        }
        Err(message) => {
            dim.failure = Some(StageFailure {
                stage: "oracle".into(),
                message,
            })
        }
    }
    match bisect {
        Ok(b) => {
            dim.s_star = Some(b.s_star);
            dim.truncation_limited = b.s_star >= s_cap - 0.01;
            dim.steps = b.steps;
        }
        Err(e) => {
            dim.failure = Some(StageFailure {
                stage: "bisect".into(),
                message: e.to_string(),
            })
        }
    }
    if let (Some(s), Some(o)) = (dim.s_star, &dim.oracle) {
        dim.agrees = (s - o.slope).abs() <= d.agreement;
    }
    let summary = match (&dim.failure, dim.s_star, &dim.oracle) {
        (Some(f), _, _) => format!("{} failed: {}", f.stage, f.message),
        (None, Some(s), Some(o)) => format!("s* {s:.4}, oracle slope {:.4}, agrees {}", o.slope, dim.agrees),
        _ => "incomplete".into(),
    };
    if dim.failure.is_some() {
        rep.status = "failed".into();
    }
    rep.dimension = Some(dim);
    Ok(Artifacts {
        report: rep,
        timings: timer.entries,
        files: Vec::new(),
        summary,
    })
}
