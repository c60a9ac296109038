use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mwstab::adversary::{
    check_witness_compliance, exponential_network, random_witness_scenario, Adversary, AdversaryParams,
    ComplianceReport, ExponentialAdversary, FixedLoad, IidAdversary, Scripted, WitnessSchedule,
};
use mwstab::auditor::{audit_run, compute_bound_constants, AuditMode, AuditReport, BoundParams, SlackConstants};
use mwstab::engine::{
    binary_search_c, run, stability_verdict, ProbeConfig, ProbeResult, RunOptions, SimulationTrace,
    StabilityVerdict, Verdict,
};
use mwstab::experiments::{
    experiment_one, experiment_two, generate_grid_experiment, probe_table, with_constants, GridExperiment,
};
use mwstab::model::{NetworkSpec, RateSet};
use mwstab::scheduler::ApproxParams;

use crate::config::{AdversaryConfig, ExperimentConfig, NetworkConfig};

/// Exit 1 for configuration problems, 2 for failures while running.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config_err(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Core errors that stem from bad inputs count as configuration errors.
fn core_err(e: mwstab::Error) -> CliError {
    use mwstab::Error::*;
    match e {
        InvalidNetwork(_) | InvalidRateSet(_) | InvalidParameter(_) | InvalidInjection { .. } => config_err(e),
        _ => runtime_err(e),
    }
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub full: bool,
    pub out: PathBuf,
}

impl Context {
    fn horizon(&self) -> u64 {
        self.cfg.horizon(self.full)
    }

    fn approx(&self) -> Result<ApproxParams, CliError> {
        let e = self.cfg.scheduler.eps_hat;
        if e == 0.0 {
            Ok(ApproxParams::exact())
        } else {
            ApproxParams::degrade(e).map_err(core_err)
        }
    }

    fn probe_config(&self) -> Result<ProbeConfig, CliError> {
        let p = &self.cfg.probe;
        Ok(ProbeConfig {
            window: self.horizon(),
            tol: p.tol,
            slope_threshold: p.slope_threshold,
            plateau_factor: p.plateau_factor,
            initial_hi: p.initial_hi,
            max_hi: p.max_hi,
            seed: self.cfg.seed,
            approx: self.approx()?,
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| runtime_err(format!("cannot create {}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
        self.write(name, &text)
    }
}

enum Driver {
    Plain(Box<dyn Adversary>),
    Exponential(ExponentialAdversary),
    Scenario {
        script: Scripted,
        witness: WitnessSchedule,
        params: AdversaryParams,
    },
}

impl Driver {
    fn adversary(&mut self) -> &mut dyn Adversary {
        match self {
            Driver::Plain(a) => a.as_mut(),
            Driver::Exponential(a) => a,
            Driver::Scenario { script, .. } => script,
        }
    }
}

struct Built {
    spec: NetworkSpec,
    driver: Driver,
    grid: Option<GridExperiment>,
    c_table: Option<Vec<Vec<ProbeResult>>>,
}

fn grid_of(cfg: &ExperimentConfig) -> Result<Option<GridExperiment>, CliError> {
    match &cfg.network {
        NetworkConfig::Grid(p) => Ok(Some(generate_grid_experiment(p).map_err(core_err)?)),
        _ => Ok(None),
    }
}

fn spec_of(cfg: &ExperimentConfig, grid: Option<&GridExperiment>) -> Result<Option<NetworkSpec>, CliError> {
    Ok(match &cfg.network {
        NetworkConfig::Grid(_) => grid.map(|g| g.spec.clone()),
        NetworkConfig::Explicit {
            nodes,
            edges,
            destinations,
            beta,
            r_min,
            r_max,
        } => Some(NetworkSpec::new(*nodes, edges.clone(), destinations.clone(), *beta, *r_min, *r_max).map_err(core_err)?),
        NetworkConfig::Exponential { n, eps } => Some(exponential_network(*n, *eps).map_err(core_err)?),
        NetworkConfig::Scenario => None,
    })
}

fn build(ctx: &Context) -> Result<Built, CliError> {
    let cfg = &ctx.cfg;
    let grid = grid_of(cfg)?;
    let spec = spec_of(cfg, grid.as_ref())?;
    let mut c_table = None;

    let mut grid_with_c = |given: &Option<Vec<Vec<f64>>>| -> Result<GridExperiment, CliError> {
        let g = grid.as_ref().expect("checked: exp1/exp2 need a grid");
        match given {
            Some(c) => {
                let mut g = g.clone();
                g.traffic.c = c.clone();
                Ok(g)
            }
            None => {
                eprintln!("no load constants given; probing the 3x3 table at window {}", ctx.horizon());
                let table = probe_table(g, &ctx.probe_config()?).map_err(core_err)?;
                let g = with_constants(g, &table);
                c_table = Some(table);
                Ok(g)
            }
        }
    };

    let (spec, driver) = match &cfg.adversary {
        AdversaryConfig::Exp1 { rate_vector, c } => {
            let g = grid_with_c(c)?;
            let adv = experiment_one(&g, rate_vector - 1).map_err(core_err)?;
            (g.spec.clone(), Driver::Plain(Box::new(adv)))
        }
        AdversaryConfig::Exp2 { arrival_seed, c } => {
            let g = grid_with_c(c)?;
            let adv = experiment_two(&g, *arrival_seed).map_err(core_err)?;
            (g.spec.clone(), Driver::Plain(Box::new(adv)))
        }
        AdversaryConfig::Fixed { rates, pairs, sizes } => {
            let spec = spec.ok_or_else(|| config_err("fixed adversary needs a network"))?;
            rates.validate(&spec).map_err(core_err)?;
            let adv = FixedLoad::new(rates.clone(), pairs.clone(), sizes.clone()).map_err(core_err)?;
            (spec, Driver::Plain(Box::new(adv)))
        }
        AdversaryConfig::Iid(ic) => {
            let spec = spec.ok_or_else(|| config_err("i.i.d. adversary needs a network"))?;
            let adv = IidAdversary::new(&spec, ic, cfg.seed).map_err(core_err)?;
            (spec, Driver::Plain(Box::new(adv)))
        }
        AdversaryConfig::Exponential => {
            let NetworkConfig::Exponential { n, eps } = cfg.network else {
                unreachable!("checked by ExperimentConfig::check")
            };
            let adv = ExponentialAdversary::new(n, eps).map_err(core_err)?;
            (spec.expect("exponential network"), Driver::Exponential(adv))
        }
        AdversaryConfig::RandomWitness(p) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let sc = random_witness_scenario(&mut rng, p);
            (
                sc.spec.clone(),
                Driver::Scenario {
                    script: Scripted::new(sc.slots.clone()),
                    witness: sc.witness.clone(),
                    params: sc.params,
                },
            )
        }
    };
    Ok(Built {
        spec,
        driver,
        grid,
        c_table,
    })
}

fn write_trace(ctx: &Context, trace: &SimulationTrace) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&ctx.out).map_err(runtime_err)?;
    let path = ctx.out.join("trace.csv");
    let mut w = csv::Writer::from_path(&path).map_err(runtime_err)?;
    for r in &trace.records {
        w.serialize(r).map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)?;
    Ok(path)
}

fn write_c_table(ctx: &Context, table: &[Vec<ProbeResult>]) -> Result<(), CliError> {
    let path = ctx.out.join("c_table.csv");
    fs::create_dir_all(&ctx.out).map_err(runtime_err)?;
    let mut w = csv::Writer::from_path(&path).map_err(runtime_err)?;
    let width = table.first().map_or(0, |r| r.len());
    let mut header = vec!["rate_vector".to_string()];
    header.extend((1..=width).map(|j| format!("gamma{j}")));
    w.write_record(&header).map_err(runtime_err)?;
    for (i, row) in table.iter().enumerate() {
        let mut rec = vec![format!("r{}", i + 1)];
        rec.extend(row.iter().map(|r| format!("{:.3}", r.c)));
        w.write_record(&rec).map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)?;
    ctx.write_json("c_table.json", &table)?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    verdict: Verdict,
    max_queue_overall: f64,
    tail_slope: f64,
    slots: usize,
    horizon: u64,
    halted: Option<&'a str>,
    injected: f64,
    final_backlog: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    removed_links: Option<&'a Vec<Vec<usize>>>,
}

fn verdict_of(ctx: &Context, trace: &SimulationTrace) -> StabilityVerdict {
    stability_verdict(
        &trace.max_queue_series(),
        ctx.cfg.probe.slope_threshold,
        ctx.cfg.probe.plateau_factor,
    )
}

/// Runs the configured experiment; exit code 3 when the run looks unstable.
pub fn simulate(ctx: &Context) -> Result<i32, CliError> {
    let mut b = build(ctx)?;
    let opts = RunOptions::new(ctx.horizon()).seed(ctx.cfg.seed).approx(ctx.approx()?);
    let trace = run(&b.spec, b.driver.adversary(), &opts).map_err(core_err)?;
    let v = verdict_of(ctx, &trace);
    write_trace(ctx, &trace)?;
    if let Some(t) = &b.c_table {
        write_c_table(ctx, t)?;
    }
    let c = match &ctx.cfg.adversary {
        AdversaryConfig::Exp1 { c: Some(c), .. } | AdversaryConfig::Exp2 { c: Some(c), .. } => Some(c.clone()),
        _ => b.c_table.as_ref().map(|t| t.iter().map(|r| r.iter().map(|x| x.c).collect()).collect()),
    };
    let summary = Summary {
        verdict: v.verdict,
        max_queue_overall: v.max_queue_overall,
        tail_slope: v.tail_slope,
        slots: trace.records.len(),
        horizon: ctx.horizon(),
        halted: trace.halted.as_deref(),
        injected: trace.injected,
        final_backlog: trace.final_queues.total(),
        c,
        removed_links: b.grid.as_ref().map(|g| &g.removed),
    };
    ctx.write_json("summary.json", &summary)?;
    println!(
        "verdict: {:?} (max queue {:.4}, tail slope {:.3e}, {} slots{})",
        v.verdict,
        v.max_queue_overall,
        v.tail_slope,
        trace.records.len(),
        trace.halted.as_deref().map(|h| format!(", halted: {h}")).unwrap_or_default()
    );
    Ok(if v.verdict == Verdict::Unstable { 3 } else { 0 })
}

/// Probes load constants: the 3x3 table on a grid, or a single constant
/// for a fixed-load configuration.
pub fn probe(ctx: &Context) -> Result<i32, CliError> {
    let pc = ctx.probe_config()?;
    let table = if let Some(g) = grid_of(&ctx.cfg)? {
        probe_table(&g, &pc).map_err(core_err)?
    } else if let AdversaryConfig::Fixed { rates, pairs, sizes } = &ctx.cfg.adversary {
        let spec = spec_of(&ctx.cfg, None)?.ok_or_else(|| config_err("probe needs a network"))?;
        vec![vec![binary_search_c(&spec, rates, pairs, sizes, &pc).map_err(core_err)?]]
    } else {
        return Err(config_err("probe needs a grid network or a fixed adversary"));
    };
    write_c_table(ctx, &table)?;
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|r| format!("{:.3}", r.c)).collect();
        println!("r{}: {}", i + 1, cells.join(" "));
    }
    for r in table.iter().flatten() {
        for m in &r.monotonicity {
            eprintln!("warning: {m}");
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct AuditOutput<'a> {
    compliance: &'a ComplianceReport,
    report: &'a AuditReport,
}

/// Runs a witness-backed adversary with audit logging and checks every
/// packet's share assignment.
pub fn audit(ctx: &Context) -> Result<i32, CliError> {
    let mut b = build(ctx)?;
    let (ws, ap) = match &b.driver {
        Driver::Exponential(_) => (None, ctx.cfg.witness_params().expect("exponential has params")),
        Driver::Scenario { witness, params, .. } => (Some(witness.clone()), *params),
        Driver::Plain(_) => {
            return Err(config_err(
                "audit needs an adversary with a witness (exponential or random-witness)",
            ))
        }
    };
    let opts = RunOptions::new(ctx.horizon())
        .seed(ctx.cfg.seed)
        .approx(ctx.approx()?)
        .audit(true);
    let trace = run(&b.spec, b.driver.adversary(), &opts).map_err(core_err)?;
    let ws = match (ws, &b.driver) {
        (Some(ws), _) => ws,
        (None, Driver::Exponential(a)) => a.witness().clone(),
        _ => unreachable!(),
    };
    let events: Vec<_> = trace.audit.iter().flat_map(|s| s.injections.iter().cloned()).collect();
    let rates: Vec<Arc<RateSet>> = trace.audit.iter().map(|s| s.rates.clone()).collect();
    let compliance = check_witness_compliance(&b.spec, &ws, &events, &rates, &ap);
    if !compliance.passed {
        return Err(runtime_err(format!(
            "witness rejected: {}",
            compliance.violation.as_deref().unwrap_or("unknown")
        )));
    }
    let eps_hat = ctx.cfg.scheduler.eps_hat;
    let mode = if eps_hat == 0.0 {
        AuditMode::Exact
    } else {
        AuditMode::Approx { eps_hat }
    };
    let report = audit_run(&b.spec, &ap, &ws, &trace.audit, mode).map_err(core_err)?;
    ctx.write_json(
        "audit.json",
        &AuditOutput {
            compliance: &compliance,
            report: &report,
        },
    )?;
    println!(
        "audited {} slots, {} packets: bad {}, bound violations {}, dominated {}, max Eq-15 gap {:.2e}, C = {}",
        report.slots.len(),
        report.packets.len(),
        report.bad_packets,
        report.bound_violations,
        report.all_dominated,
        report.max_eq_gap,
        report.constants.c
    );
    if report.passed() {
        Ok(0)
    } else {
        Err(runtime_err("audit found violations; see audit.json"))
    }
}

/// Evaluates the bound ladder.
pub fn bounds(ctx: &Context) -> Result<i32, CliError> {
    let s = ctx
        .cfg
        .bounds
        .as_ref()
        .ok_or_else(|| config_err("bounds needs a [bounds] section"))?;
    let grid = grid_of(&ctx.cfg)?;
    let spec = spec_of(&ctx.cfg, grid.as_ref())?;
    let n = match (s.n, &spec) {
        (Some(n), _) => n,
        (None, Some(spec)) => (spec.node_count() - 1) * spec.dest_count(),
        (None, None) => return Err(config_err("bounds.n is required for this network")),
    };
    if n > s.max_n {
        return Err(config_err(format!("n = {n} exceeds bounds.max_n = {}", s.max_n)));
    }
    let pick = |over: Option<f64>, f: fn(&NetworkSpec) -> f64, what: &str| -> Result<f64, CliError> {
        over.or(spec.as_ref().map(f))
            .ok_or_else(|| config_err(format!("bounds.{what} is required for this network")))
    };
    let c = match (s.c, &spec) {
        (Some(c), _) => c,
        (None, Some(spec)) => SlackConstants::for_network(spec, s.omega).c,
        (None, None) => return Err(config_err("bounds.c is required for this network")),
    };
    let params = BoundParams {
        n,
        eps: s.eps,
        r_min: pick(s.r_min, NetworkSpec::r_min, "r_min")?,
        r_max: pick(s.r_max, NetworkSpec::r_max, "r_max")?,
        q0: s.q0,
        c,
        injections_per_window: s.injections_per_window,
        max_u_evals: s.max_u_evals,
        max_bits: s.max_bits,
    };
    let b = compute_bound_constants(&params).map_err(core_err)?;
    println!("n = {}, C = {}, q* = {}, P_0 = {}", b.n, b.c, b.q_star, b.p0.value);
    for level in &b.ladder {
        println!("k = {}: M_k = {}", level.k, level.m_k.value);
        for j in 0..level.s.len() {
            println!(
                "  j = {}: b = {}, S = {}, L = {}",
                j + 1,
                level.b[j].value,
                level.s[j].value,
                level.l[j].value
            );
        }
    }
    println!("potential bound = {}", b.potential_bound.value);
    println!("max queue bound = {} (~{:.6e})", b.max_queue_bound.value, b.max_queue_bound.approx);
    ctx.write_json("bounds.json", &b)?;
    Ok(0)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}
