//! Subcommand dispatch: run the experiment, write JSON, CSV and (optionally) SVG artifacts.

use std::path::PathBuf;

use anyhow::{anyhow, Context};
use catbranch_core::coefficients::{
    classify_zero_set, verify_extended_lipschitz, verify_growth_bound, CoefficientModel, ZeroSetSampling,
};
use catbranch_core::experiments::{
    cascade_demo, continuity_experiment, detect_tau_c0, detect_tau_eps, estimate_constants, eta_bound_audit,
    explosion_experiment, gronwall_experiment, martingale_experiment, trap_audit, CascadeParams, StoppingBand,
};
use catbranch_core::modulus::{check_growth_conditions, check_modulus_conditions, ModulusSpec};
use catbranch_core::sde::export::{write_batch_csv, write_coupled_csv, write_trajectory_csv};
use catbranch_core::sde::{simulate_batch, simulate_coupled, SimConfig};
use catbranch_core::Verdict;
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{artifact_path, write_atomic, Cell, Csv};
use crate::plot::{render_plot, PlotSpec, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Simulate,
    Couple,
    Gronwall,
    Martingale,
    Continuity,
    Explosion,
    CheckConditions,
    Cascade,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Couple => "couple",
            Experiment::Gronwall => "gronwall",
            Experiment::Martingale => "martingale",
            Experiment::Continuity => "continuity",
            Experiment::Explosion => "explosion",
            Experiment::CheckConditions => "check-conditions",
            Experiment::Cascade => "cascade",
        }
    }
}

/// 0 pass, 2 fail, 3 inconclusive. IO and config errors use 1.
pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 2,
        Verdict::Inconclusive => 3,
    }
}

pub struct RunOutcome {
    pub verdict: Verdict,
    pub files: Vec<PathBuf>,
}

struct Product {
    verdict: Verdict,
    report: Value,
    csv: String,
    plot: PlotSpec,
}

fn to_value<S: Serialize>(s: &S) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(s)?)
}

fn plot(title: &str, x: &str, y: &str, series: Vec<Series>, bound: Option<Series>) -> PlotSpec {
    PlotSpec {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        series,
        bound,
    }
}

struct Inputs {
    model: CoefficientModel<f64>,
    r: ModulusSpec<f64>,
    sim: SimConfig<f64>,
    a: Vec<f64>,
}

impl Inputs {
    fn new(cfg: &RunConfig) -> anyhow::Result<Self> {
        Ok(Self {
            model: cfg.model.build()?,
            r: cfg.modulus.build()?,
            sim: cfg.sim.build(),
            a: cfg.initial(),
        })
    }

    fn ay(&self, cfg: &RunConfig) -> Vec<f64> {
        self.a.iter().zip(cfg.gap()).map(|(x, g)| x + g).collect()
    }
}

fn simulate(_cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let batch = simulate_batch(&inp.model, &inp.a, &inp.sim)?;
    let audit = trap_audit(&batch);
    let exploded = batch.iter().filter(|t| t.exploded_at().is_some()).count();
    let mut buf = Vec::new();
    if batch.len() == 1 {
        write_trajectory_csv(&mut buf, &batch[0])?;
    } else {
        write_batch_csv(&mut buf, &batch)?;
    }
    let first = &batch[0];
    let series = (0..first.d())
        .map(|i| Series::new(format!("x_{}", i + 1), (0..first.len()).map(|k| (first.time(k), first.state(k)[i])).collect()))
        .collect();
    Ok(Product {
        verdict: audit.verdict,
        report: json!({ "n_paths": batch.len(), "exploded_paths": exploded, "trap_audit": to_value(&audit)? }),
        csv: String::from_utf8(buf)?,
        plot: plot("Path 0", "t", "X_t", series, None),
    })
}

fn couple(cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let path = cfg.experiment.path_index.unwrap_or(0);
    let run = simulate_coupled(&inp.model, &inp.a, &inp.ay(cfg), &inp.sim, path)?;
    let eps = cfg.modulus.epsilon;
    let band = StoppingBand::full(eps, inp.model.d())?;
    let constants = estimate_constants(&inp.model, &inp.r, eps, &cfg.experiment.lipschitz, cfg.experiment.c_inflation)?;
    let audit = eta_bound_audit(&run, &inp.model, &inp.r, constants.c, &band)?;
    let report = json!({
        "path_index": path,
        "tau_eps": detect_tau_eps(&run, &inp.model, &band)?,
        "tau_c0": detect_tau_c0(&run, inp.r.c0()),
        "zeta0": run.zeta()[0],
        "zeta_final": run.zeta()[run.len() - 1],
        "constants": to_value(&constants)?,
        "eta": to_value(&audit)?,
    });
    let mut buf = Vec::new();
    write_coupled_csv(&mut buf, &run)?;
    let zeta = Series::new("zeta", (0..run.len()).map(|k| (run.time(k), run.zeta()[k])).collect());
    Ok(Product {
        verdict: audit.verdict,
        report,
        csv: String::from_utf8(buf)?,
        plot: plot("Coupled gap", "t", "zeta = |X - Y|^2", vec![zeta], None),
    })
}

fn gronwall(cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let rep = gronwall_experiment(&inp.model, &inp.r, &inp.a, &cfg.gap(), &cfg.gronwall_params(), &inp.sim)?;
    let mut csv = Csv::new(&["t", "log_estimate", "se_log", "log_bound", "margin"]);
    for g in &rep.grid {
        csv.nums(&[g.t, g.log_estimate, g.se_log, g.log_bound, g.margin]);
    }
    let est = Series::new("log E[Phi_delta(zeta)]", rep.grid.iter().map(|g| (g.t, g.log_estimate)).collect());
    let bound = Series::new("log Phi_delta(zeta_0) + K t", rep.grid.iter().map(|g| (g.t, g.log_bound)).collect());
    Ok(Product {
        verdict: rep.verdict,
        report: to_value(&rep)?,
        csv: csv.into_string(),
        plot: plot("Lyapunov envelope", "t", "log scale", vec![est], Some(bound)),
    })
}

fn martingale(cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let t = cfg.experiment.t.unwrap_or(inp.sim.horizon);
    let rep = martingale_experiment(&inp.model, &inp.a, t, inp.sim.n_paths, &inp.sim)?;
    let mut csv = Csv::new(&["component", "target", "mean", "se", "euler_bias", "difference", "allowance"]);
    for c in &rep.components {
        csv.row(&[
            Cell::Int(c.component + 1),
            Cell::Num(c.target),
            Cell::Num(c.mean),
            Cell::Num(c.se),
            Cell::Num(c.euler_bias),
            Cell::Num(c.difference),
            Cell::Num(c.allowance),
        ]);
    }
    let idx = |i: usize| (i + 1) as f64;
    let means = Series::new("mean of exp(-alpha t) X_t", rep.components.iter().map(|c| (idx(c.component), c.mean)).collect());
    let target = Series::new("a_i", rep.components.iter().map(|c| (idx(c.component), c.target)).collect());
    Ok(Product {
        verdict: rep.verdict,
        report: to_value(&rep)?,
        csv: csv.into_string(),
        plot: plot("Martingale means", "component", "value", vec![means], Some(target)),
    })
}

fn continuity(cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let rep = continuity_experiment(&inp.model, &inp.r, &inp.a, &cfg.continuity_params(), &inp.sim)?;
    let mut csv = Csv::new(&["gap", "median", "p95", "mean", "stopped_paths"]);
    for r in &rep.rows {
        csv.row(&[Cell::Num(r.gap), Cell::Num(r.median), Cell::Num(r.p95), Cell::Num(r.mean), Cell::Int(r.stopped_paths)]);
    }
    let log = |f: fn(&catbranch_core::experiments::GapRow<f64>) -> f64| -> Vec<(f64, f64)> {
        rep.rows.iter().map(|r| (r.gap.log10(), f(r).log10())).collect()
    };
    let series = vec![Series::new("log10 median", log(|r| r.median)), Series::new("log10 p95", log(|r| r.p95))];
    Ok(Product {
        verdict: rep.verdict,
        report: to_value(&rep)?,
        csv: csv.into_string(),
        plot: plot("Stopped gap by initial gap", "log10 gap", "log10 zeta", series, None),
    })
}

fn explosion(cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let g = &cfg.experiment.growth;
    let rho = g.build()?;
    let rep = explosion_experiment(&inp.model, &inp.a, &rho, g.c, &g.shell, &inp.sim, inp.sim.n_paths)?;
    let mut csv = Csv::new(&["t", "cumulative_explosions"]);
    let mut points = vec![(0.0, 0.0)];
    csv.row(&[Cell::Num(0.0), Cell::Int(0)]);
    for (i, &t) in rep.explosion_times.iter().enumerate() {
        csv.row(&[Cell::Num(t), Cell::Int(i + 1)]);
        points.push((t, (i + 1) as f64));
    }
    points.push((inp.sim.horizon, rep.explosions as f64));
    Ok(Product {
        verdict: rep.verdict,
        report: to_value(&rep)?,
        csv: csv.into_string(),
        plot: plot("Explosions", "t", "paths with |X| >= M", vec![Series::new("cumulative", points)], None),
    })
}

fn check_conditions(cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let tol = &cfg.experiment.tolerances;
    let origin = check_modulus_conditions(&inp.r, tol);
    let growth_cfg = &cfg.experiment.growth;
    let rho = growth_cfg.build()?;
    let growth = check_growth_conditions(&rho, tol);
    let lipschitz = verify_extended_lipschitz(&inp.model, &inp.r, &cfg.experiment.lipschitz)?;
    let growth_bound = verify_growth_bound(&inp.model, &rho, growth_cfg.c, &growth_cfg.shell)?;
    let zero_set = classify_zero_set(&inp.model, &ZeroSetSampling::default())?;
    let verdict = Verdict::all(origin.iter().chain(&growth).map(|r| r.verdict));
    let mut csv = Csv::new(&["condition", "s", "value"]);
    for rep in origin.iter().chain(&growth) {
        let id = serde_json::to_value(rep.condition_id)?;
        let id = id.as_str().unwrap_or("?").to_string();
        for e in &rep.evidence {
            csv.row(&[Cell::Text(&id), Cell::Num(e.s), Cell::Num(e.value)]);
        }
    }
    let ratio = Series::new(
        "s r'(s) / r(s)",
        origin[1].evidence.iter().map(|e| (e.s.log10(), e.value)).collect(),
    );
    Ok(Product {
        verdict,
        report: json!({
            "modulus": inp.r.name(),
            "origin": to_value(&origin)?,
            "growth_modulus": rho.name(),
            "growth": to_value(&growth)?,
            "lipschitz": to_value(&lipschitz)?,
            "growth_bound": to_value(&growth_bound)?,
            "zero_set": to_value(&zero_set)?,
        }),
        csv: csv.into_string(),
        plot: plot("Slope ratio near 0", "log10 s", "ratio", vec![ratio], None),
    })
}

fn cascade(cfg: &RunConfig, inp: &Inputs) -> anyhow::Result<Product> {
    let eps = cfg.modulus.epsilon;
    let constants = estimate_constants(&inp.model, &inp.r, eps, &cfg.experiment.lipschitz, cfg.experiment.c_inflation)?;
    let params = CascadeParams {
        epsilon: eps,
        delta: cfg.modulus.delta,
        c: constants.c,
        c1: constants.c1,
        c2: constants.c2,
    };
    let ay = inp.ay(cfg);
    let candidates: Vec<u64> = match cfg.experiment.path_index {
        Some(p) => vec![p],
        None => (0..inp.sim.n_paths as u64).collect(),
    };
    let mut chosen = None;
    for &p in &candidates {
        let run = simulate_coupled(&inp.model, &inp.a, &ay, &inp.sim, p)?;
        let rep = cascade_demo(&inp.model, &inp.r, &run, &params)?;
        let found = rep.trapped_component.is_some();
        chosen = Some((p, run, rep));
        if found {
            break;
        }
    }
    let (path, run, rep) = chosen.ok_or_else(|| anyhow!("no coupled path to examine"))?;
    let mut csv = Csv::new(&["t", "zeta", "log_phi", "log_bound"]);
    let offset = run.len() - rep.envelope.len();
    for (j, e) in rep.envelope.iter().enumerate() {
        csv.nums(&[e.t, run.zeta()[offset + j], e.log_phi, e.log_bound]);
    }
    let phi = Series::new("log Phi_delta(zeta)", rep.envelope.iter().map(|e| (e.t, e.log_phi)).collect());
    let bound = Series::new("stage bound", rep.envelope.iter().map(|e| (e.t, e.log_bound)).collect());
    let verdict = rep.verdict;
    let plot_spec = if rep.envelope.is_empty() {
        let zeta = Series::new("zeta", (0..run.len()).map(|k| (run.time(k), run.zeta()[k])).collect());
        plot("Coupled gap (no joint trap)", "t", "zeta", vec![zeta], None)
    } else {
        plot("Post-trap envelope", "t", "log scale", vec![phi], Some(bound))
    };
    Ok(Product {
        verdict,
        report: json!({ "path_index": path, "constants": to_value(&constants)?, "cascade": to_value(&rep)? }),
        csv: csv.into_string(),
        plot: plot_spec,
    })
}

/// Runs one experiment and writes its artifacts.
pub fn run(experiment: Experiment, cfg: &RunConfig) -> anyhow::Result<RunOutcome> {
    let inp = Inputs::new(cfg).context("building model and modulus")?;
    let product = match experiment {
        Experiment::Simulate => simulate(cfg, &inp),
        Experiment::Couple => couple(cfg, &inp),
        Experiment::Gronwall => gronwall(cfg, &inp),
        Experiment::Martingale => martingale(cfg, &inp),
        Experiment::Continuity => continuity(cfg, &inp),
        Experiment::Explosion => explosion(cfg, &inp),
        Experiment::CheckConditions => check_conditions(cfg, &inp),
        Experiment::Cascade => cascade(cfg, &inp),
    }
    .with_context(|| format!("running {}", experiment.name()))?;

    let dir = &cfg.output.dir;
    let fixture = cfg.fixture();
    let seed = cfg.sim.seed;
    let path = |ext: &str| artifact_path(dir, experiment.name(), &fixture, seed, ext);
    let summary = json!({
        "experiment": experiment.name(),
        "fixture": fixture,
        "seed": seed,
        "verdict": product.verdict,
        "config": cfg,
        "report": product.report,
    });
    let mut files = Vec::new();
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_atomic(&path("json"), text.as_bytes())?;
    files.push(path("json"));
    write_atomic(&path("csv"), product.csv.as_bytes())?;
    files.push(path("csv"));
    if cfg.output.plot {
        let svg = render_plot(&product.plot)?;
        write_atomic(&path("svg"), svg.as_bytes())?;
        files.push(path("svg"));
    }
    Ok(RunOutcome {
        verdict: product.verdict,
        files,
    })
}
