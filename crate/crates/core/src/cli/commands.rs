use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use super::config::{resolve_seed, PotentialSettings, ProjectConfig};
use super::*;
use crate::analysis::plot::{fronts_svg, scatter_svg, Series};
use crate::analysis::{
    self, export, potential_envelope, tradeoff_table, DesignGrid, EnvelopeSource, GridDomain, ParetoFront, Selection,
};
use crate::dove::{
    default_sample_size, equispaced, plan_full_factorial, plan_lhs, plan_maximin_lhs, plan_monte_carlo, sidecar_path,
    ExperimentPlan, DEFAULT_FACTORIAL_CAP,
};
use crate::exemplars;
use crate::hyperspace::{HyperSpace, UseCasePoint, Value, Variable, VariableKind};
use crate::meta::{self, default_candidates, optimize_surrogate, MetaResult};
use crate::runner::{
    load_store, run_plan, serve_line_protocol, EchoSimulator, ExternalProcessSimulator, ResultStore, RunOptions,
    Simulator, StoreMeta, DEFAULT_TIMEOUT,
};
use crate::surrogate::{fit, Family, KrigingOptions, ModelSpec, SurrogateModel};
use crate::util::{atomic_write, fmt_f64, sha256_file, sha256_hex};

pub(super) fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Space(SpaceCommand::Validate { file }) => space_validate(&file),
        Command::Space(SpaceCommand::Builtin { name, out }) => space_builtin(&name, &out),
        Command::Plan(a) => plan(a),
        Command::Run(a) => run(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Pareto(a) => pareto(a),
        Command::Potential(a) => potential(a),
        Command::Refine(a) => refine(a),
        Command::MetaOpt(a) => meta_opt(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    }
}

// ---- shared helpers ----

#[derive(Serialize)]
struct OutputMeta {
    tool_version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Input role -> sha256 of the file's content.
    inputs: BTreeMap<String, String>,
    output_sha256: String,
}

struct Output<'a> {
    command: &'static str,
    seed: Option<u64>,
    inputs: Vec<(&'a str, &'a Path)>,
}

impl Output<'_> {
    fn write(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let mut inputs = BTreeMap::new();
        for (role, p) in &self.inputs {
            inputs.insert((*role).to_owned(), sha256_file(p).map_err(|e| CliError::io(p, e))?);
        }
        ensure_parent(path)?;
        atomic_write(path, bytes).map_err(|e| CliError::io(path, e))?;
        let meta = OutputMeta {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            seed: self.seed,
            inputs,
            output_sha256: sha256_hex(bytes),
        };
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
        let side = sidecar_path(path);
        atomic_write(&side, text.as_bytes()).map_err(|e| CliError::io(&side, e))
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| CliError::io(p, e)),
        _ => Ok(()),
    }
}

fn read_space(path: &Path) -> Result<HyperSpace, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let space =
        HyperSpace::from_json_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    space.check()?;
    Ok(space)
}

fn read_model(path: &Path, space: &HyperSpace) -> Result<SurrogateModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let model =
        SurrogateModel::from_json(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    if model.space_hash != space.hash() {
        return Err(CliError::new(Category::Integrity, format!("model {} was fit on another space", path.display())));
    }
    Ok(model)
}

fn write_results(path: &Path, store: &ResultStore) -> Result<(), CliError> {
    ensure_parent(path)?;
    atomic_write(path, store.to_csv().as_bytes()).map_err(|e| CliError::io(path, e))?;
    let meta = StoreMeta {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        space_hash: store.space_hash().to_owned(),
        plan_hash: store.plan_hash().to_owned(),
    };
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    let side = sidecar_path(path);
    atomic_write(&side, text.as_bytes()).map_err(|e| CliError::io(&side, e))
}

/// Parses `name=value,...` against the named variables. Values of numeric
/// variables must parse as numbers.
fn parse_assignments<'a>(
    text: &str,
    vars: impl Iterator<Item = &'a Variable> + Clone,
) -> Result<Vec<(String, Value)>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) =
            part.split_once('=').ok_or_else(|| CliError::usage(format!("expected name=value, got `{part}`")))?;
        let (name, value) = (name.trim(), value.trim());
        let var = vars
            .clone()
            .find(|v| v.name == name)
            .ok_or_else(|| CliError::validation(format!("unknown variable `{name}`")))?;
        let value = match var.kind {
            VariableKind::Categorical { .. } => Value::Label(value.to_owned()),
            _ => Value::Real(
                value.parse().map_err(|_| CliError::validation(format!("`{name}`: `{value}` is not a number")))?,
            ),
        };
        var.check_value(&value).map_err(|e| CliError::validation(e.to_string()))?;
        out.push((name.to_owned(), value));
    }
    Ok(out)
}

/// A complete use-case point from `name=value,...`.
fn parse_use_case(space: &HyperSpace, text: Option<&str>) -> Result<UseCasePoint, CliError> {
    let given = parse_assignments(text.unwrap_or(""), space.use_case.iter())?;
    let mut values = Vec::new();
    for var in &space.use_case {
        let v = given
            .iter()
            .find(|(n, _)| n == &var.name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| CliError::usage(format!("--use-case must assign `{}`", var.name)))?;
        values.push(v);
    }
    Ok(UseCasePoint(values))
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::usage(format!("grid must be lower:upper:steps, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(bad());
    }
    Ok(equispaced(lo, hi, steps))
}

fn parse_targets(text: Option<&str>) -> Option<Vec<String>> {
    text.map(|t| t.split(',').map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect())
}

fn same_layout(a: &HyperSpace, b: &HyperSpace) -> bool {
    let names = |vars: &[Variable]| vars.iter().map(|v| v.name.clone()).collect::<Vec<_>>();
    names(&a.design) == names(&b.design)
        && names(&a.use_case) == names(&b.use_case)
        && a.target_names() == b.target_names()
}

/// `builtin:<name>`, `<name>` or `exec:<command>`.
fn make_simulator(spec: &str, space: &HyperSpace, timeout: Option<f64>) -> Result<Box<dyn Simulator>, CliError> {
    if let Some(cmd) = spec.strip_prefix("exec:") {
        let timeout = match timeout {
            Some(s) if s > 0.0 && s.is_finite() => Duration::from_secs_f64(s),
            Some(_) => return Err(CliError::usage("timeout must be positive")),
            None => DEFAULT_TIMEOUT,
        };
        let sim = ExternalProcessSimulator::spawn(cmd, space, timeout)
            .map_err(|e| CliError::new(Category::Simulation, format!("cannot start `{cmd}`: {e}")))?;
        return Ok(Box::new(sim));
    }
    let name = spec.strip_prefix("builtin:").unwrap_or(spec);
    if name == "echo" {
        return Ok(Box::new(EchoSimulator::new(space)));
    }
    let (own, sim) = exemplars::builtin(name).ok_or_else(|| {
        CliError::usage(format!("unknown simulator `{spec}` (builtin:fev|yaw|echo or exec:<command>)"))
    })?;
    if !same_layout(&own, space) {
        return Err(CliError::validation(format!(
            "builtin simulator `{name}` needs its own variable layout; export it with `hse space builtin {name}`"
        )));
    }
    Ok(sim)
}

fn build_plan(
    space: &HyperSpace,
    method: PlanMethodArg,
    n: Option<usize>,
    seed: u64,
    levels: usize,
    candidates: usize,
) -> Result<ExperimentPlan, CliError> {
    let n = n.unwrap_or_else(|| default_sample_size(space));
    Ok(match method {
        PlanMethodArg::Lhs => plan_lhs(space, n, seed)?,
        PlanMethodArg::Maximin => plan_maximin_lhs(space, n, seed, candidates)?,
        PlanMethodArg::Factorial => plan_full_factorial(space, levels, DEFAULT_FACTORIAL_CAP)?,
        PlanMethodArg::Montecarlo => plan_monte_carlo(space, n, seed)?,
    })
}

fn model_summary(model: &SurrogateModel) -> String {
    let mut out = String::from("segment,target,n_train,n_params,r_squared,adjusted_r_squared,loocv_rmse,p_value\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for s in &model.segments {
        let key = if s.key.is_empty() { "all".to_owned() } else { s.key.join("/") };
        for r in &s.reports {
            out.push_str(&format!(
                "{key},{},{},{},{},{},{},{}\n",
                r.target,
                r.n_train,
                r.n_params,
                fmt_f64(r.r_squared),
                opt(r.adjusted_r_squared),
                opt(r.loocv_rmse),
                opt(r.p_value)
            ));
        }
    }
    out
}

fn background(store: &ResultStore, selection: &Selection, targets: &[usize]) -> Result<Vec<(f64, f64)>, CliError> {
    let space = store.space();
    let mut out = Vec::new();
    for r in store.ok_records() {
        if selection.matches(space, &r.design, &r.use_case)? {
            let t = &r.targets.as_ref().expect("ok record").0;
            out.push((t[targets[0]], targets.get(1).map_or(0.0, |&j| t[j])));
        }
    }
    Ok(out)
}

fn target_positions(space: &HyperSpace, front: &ParetoFront) -> Vec<usize> {
    front.targets.iter().filter_map(|t| space.target_index(t)).collect()
}

// ---- commands ----

fn space_validate(file: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
    let space =
        HyperSpace::from_json_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", file.display())))?;
    let violations = space.validate();
    if violations.is_empty() {
        println!(
            "ok: {} design, {} use-case, {} target variables; hash {}",
            space.design.len(),
            space.use_case.len(),
            space.targets.len(),
            space.hash()
        );
        return Ok(());
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Err(CliError::validation(format!("{} violation(s) in {}", violations.len(), file.display())))
}

fn space_builtin(name: &str, out: &Path) -> Result<(), CliError> {
    let (space, _) =
        exemplars::builtin(name).ok_or_else(|| CliError::usage(format!("unknown exemplar `{name}` (fev or yaw)")))?;
    Output { command: "space builtin", seed: None, inputs: vec![] }
        .write(out, (space.to_json_pretty() + "\n").as_bytes())
}

fn plan(a: PlanArgs) -> Result<(), CliError> {
    let space = read_space(&a.space)?;
    let seed = resolve_seed(a.seed, None)?;
    let plan = build_plan(&space, a.method, a.n, seed, a.levels, a.candidates)?;
    ensure_parent(&a.out)?;
    plan.save(&space, &a.out)?;
    println!("{} runs, plan hash {}", plan.len(), plan.hash());
    Ok(())
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let space = read_space(&a.space)?;
    let plan = ExperimentPlan::load(&space, &a.plan)?;
    let sim = make_simulator(&a.sim, &space, a.timeout)?;
    ensure_parent(&a.out)?;
    let mut store = if a.resume && a.out.exists() {
        ResultStore::resume(&a.out, &space, &plan)?
    } else {
        ResultStore::create(&a.out, &space, &plan)?
    };
    let opts = RunOptions { parallelism: a.jobs, max_failures: a.max_failures };
    let summary = run_plan(&plan, sim.as_ref(), &opts, &mut store)?;
    println!(
        "ok {} failed {} skipped {} resumed {} evaluated {} in {:.3} s",
        summary.ok, summary.failed, summary.skipped, summary.resumed, summary.evaluated, summary.wall_time_s
    );
    Ok(())
}

fn fit_cmd(a: FitArgs) -> Result<(), CliError> {
    let space = read_space(&a.space)?;
    let store = load_store(&a.results, &space)?;
    let mut spec = match a.family {
        FamilyArg::Poly => ModelSpec::polynomial(a.degree),
        FamilyArg::Kriging => ModelSpec::kriging(KrigingOptions {
            nugget: a.nugget.unwrap_or(KrigingOptions::default().nugget),
            ..Default::default()
        }),
    };
    if a.joint {
        spec = spec.joint();
    }
    let model = fit(&store, &spec)?;
    Output { command: "fit", seed: None, inputs: vec![("space", &a.space), ("results", &a.results)] }
        .write(&a.out, (model.to_json() + "\n").as_bytes())?;
    print!("{}", model_summary(&model));
    Ok(())
}

fn pareto(a: ParetoArgs) -> Result<(), CliError> {
    let space = read_space(&a.space)?;
    let targets = parse_targets(a.targets.as_deref());
    let filter = parse_assignments(a.filter.as_deref().unwrap_or(""), space.design.iter())?;
    let mut inputs: Vec<(&str, &Path)> = vec![("space", &a.space)];
    let (front, bg) = if let Some(results) = &a.results {
        inputs.push(("results", results));
        let store = load_store(results, &space)?;
        let mut sel = Selection::all();
        sel.conditions = filter;
        let uc = parse_assignments(a.use_case.as_deref().unwrap_or(""), space.use_case.iter())?;
        sel.conditions.extend(uc);
        let front = analysis::pareto_front_observed(&store, &sel, targets.as_deref())?;
        let bg = background(&store, &sel, &target_positions(&space, &front))?;
        (front, bg)
    } else {
        let model_path = a.model.as_ref().expect("clap enforces results or model");
        inputs.push(("model", model_path));
        let model = read_model(model_path, &space)?;
        let u = parse_use_case(&space, a.use_case.as_deref())?;
        let grid = DesignGrid {
            levels: a.levels,
            domain: match a.domain {
                DomainArg::Validation => GridDomain::ValidationArea,
                DomainArg::Bounds => GridDomain::Bounds,
            },
            fixed: filter,
            ..Default::default()
        };
        let front = analysis::pareto_front_surrogate(&model, &space, &u, &grid, targets.as_deref())?;
        (front, Vec::new())
    };
    let out = Output { command: "pareto", seed: None, inputs };
    out.write(&a.out, export::front_csv(&front, Some(&space)).as_bytes())?;
    if let Some(p) = &a.tradeoff {
        out.write(p, export::tradeoff_csv(&front, &tradeoff_table(&front)).as_bytes())?;
    }
    if let Some(p) = &a.plot {
        out.write(p, fronts_svg("Pareto front", &bg, &[("front".to_owned(), &front)]).as_bytes())?;
    }
    println!("{} front members of {} evaluated", front.members.len(), front.evaluated);
    Ok(())
}

fn potential(a: PotentialArgs) -> Result<(), CliError> {
    let space = read_space(&a.space)?;
    let grid = parse_grid(&a.grid)?;
    let seed = resolve_seed(a.seed, None)?;
    let mut inputs: Vec<(&str, &Path)> = vec![("space", &a.space)];
    let env = if let Some(mp) = &a.model {
        inputs.push(("model", mp));
        let model = read_model(mp, &space)?;
        potential_envelope(
            EnvelopeSource::Model { model: &model, space: &space },
            &a.sweep,
            &grid,
            &a.target,
            a.group_by.as_deref(),
            a.samples,
            seed,
        )?
    } else {
        let rp = a.results.as_ref().expect("clap enforces model or results");
        inputs.push(("results", rp));
        let store = load_store(rp, &space)?;
        potential_envelope(
            EnvelopeSource::Store(&store),
            &a.sweep,
            &grid,
            &a.target,
            a.group_by.as_deref(),
            a.samples,
            seed,
        )?
    };
    let out = Output { command: "potential", seed: Some(seed), inputs };
    out.write(&a.out, export::envelope_csv(&env).as_bytes())?;
    if let Some(p) = &a.plot {
        let title = format!("Potential of {} over {}", env.target, env.sweep);
        out.write(p, analysis::plot::envelope_svg(&title, &env).as_bytes())?;
    }
    Ok(())
}

/// Space, plan, results and model of a project, creating whichever file is
/// missing from the ones before it.
struct Project {
    space: HyperSpace,
    plan: ExperimentPlan,
    store: ResultStore,
    model: SurrogateModel,
}

fn ensure_project(cfg: &ProjectConfig, seed: u64) -> Result<Project, CliError> {
    let space = read_space(&cfg.space)?;
    let plan = if cfg.plan.exists() {
        ExperimentPlan::load(&space, &cfg.plan)?
    } else {
        let method = PlanMethodArg::from_str(&cfg.method, true)
            .map_err(|_| CliError::validation(format!("unknown plan method `{}`", cfg.method)))?;
        let plan = build_plan(&space, method, cfg.n, seed, 3, 20)?;
        ensure_parent(&cfg.plan)?;
        plan.save(&space, &cfg.plan)?;
        plan
    };
    let store = if cfg.results.exists() {
        let store = load_store(&cfg.results, &space)?;
        if store.plan_hash() != plan.hash() {
            return Err(CliError::new(
                Category::Integrity,
                format!("{} does not belong to {}", cfg.results.display(), cfg.plan.display()),
            ));
        }
        store
    } else {
        let sim = make_simulator(&cfg.simulator, &space, cfg.timeout_s)?;
        ensure_parent(&cfg.results)?;
        let mut store = ResultStore::create(&cfg.results, &space, &plan)?;
        let opts = RunOptions { parallelism: cfg.jobs, max_failures: cfg.max_failures };
        run_plan(&plan, sim.as_ref(), &opts, &mut store)?;
        store
    };
    let model = if cfg.model.exists() {
        read_model(&cfg.model, &space)?
    } else {
        let model = fit(&store, &cfg.model_spec)?;
        Output { command: "fit", seed: None, inputs: vec![("space", &cfg.space), ("results", &cfg.results)] }
            .write(&cfg.model, (model.to_json() + "\n").as_bytes())?;
        model
    };
    Ok(Project { space, plan, store, model })
}

fn refine(a: RefineArgs) -> Result<(), CliError> {
    let cfg = ProjectConfig::load(&a.config)?;
    let seed = resolve_seed(a.seed, cfg.seed)?;
    let project = ensure_project(&cfg, seed)?;
    let sim = make_simulator(&cfg.simulator, &project.space, cfg.timeout_s)?;
    let mut policy = cfg.policy.clone();
    policy.seed = seed;
    policy.run.parallelism = cfg.jobs;
    policy.run.max_failures = cfg.max_failures;
    let dir = a.out.clone().unwrap_or_else(|| a.config.parent().unwrap_or(Path::new(".")).join("refine"));
    let outcome = meta::refine(&project.space, &project.plan, &project.store, &project.model, &policy, sim.as_ref())?;
    let out = Output {
        command: "refine",
        seed: Some(seed),
        inputs: vec![("config", &a.config), ("space", &cfg.space), ("results", &cfg.results)],
    };
    let trace = meta::trace_csv(&outcome.space.target_names(), &outcome.trace);
    out.write(&dir.join("trace.csv"), trace.as_bytes())?;
    out.write(&dir.join("space.json"), (outcome.space.to_json_pretty() + "\n").as_bytes())?;
    outcome.plan.save(&outcome.space, &dir.join("plan.csv"))?;
    write_results(&dir.join("results.csv"), &outcome.store)?;
    out.write(&dir.join("model.json"), (outcome.model.to_json() + "\n").as_bytes())?;
    print!("{trace}");
    println!(
        "{} after {} assessments",
        if outcome.converged { "converged" } else { "not converged" },
        outcome.trace.len()
    );
    Ok(())
}

fn meta_csv(r: &MetaResult) -> String {
    let on_front: Vec<usize> = r.front.members.iter().map(|m| m.id).collect();
    let mut out = String::from("label,family,loocv_fraction,n_params,on_front,error\n");
    for (i, c) in r.candidates.iter().enumerate() {
        let family = match c.spec.family {
            Family::Polynomial { .. } => "polynomial",
            Family::Kriging(_) => "kriging",
        };
        out.push_str(&format!(
            "{},{family},{},{},{},{}\n",
            c.label,
            c.loocv.map(fmt_f64).unwrap_or_default(),
            c.n_params.map(|n| n.to_string()).unwrap_or_default(),
            on_front.contains(&i),
            c.error.as_deref().map(crate::util::quote_csv).unwrap_or_default()
        ));
    }
    out
}

fn meta_svg(r: &MetaResult) -> String {
    let all: Vec<(f64, f64)> = r
        .candidates
        .iter()
        .filter(|c| c.error.is_none())
        .map(|c| (c.n_params.unwrap_or(0) as f64, c.loocv.unwrap_or(0.0)))
        .collect();
    let front: Vec<(f64, f64)> = r.front.members.iter().map(|m| (m.targets.0[1], m.targets.0[0])).collect();
    scatter_svg(
        "Surrogate configurations",
        "parameters",
        "LOOCV RMSE / range",
        &[
            Series { name: "candidates".into(), points: all, connect: false, muted: true },
            Series { name: "front".into(), points: front, connect: true, muted: false },
        ],
    )
}

fn meta_opt(a: MetaOptArgs) -> Result<(), CliError> {
    let space = read_space(&a.space)?;
    let store = load_store(&a.results, &space)?;
    let r = optimize_surrogate(&store, &default_candidates()).map_err(|m| CliError::new(Category::Fit, m))?;
    let out = Output { command: "meta-opt", seed: None, inputs: vec![("space", &a.space), ("results", &a.results)] };
    let csv = meta_csv(&r);
    out.write(&a.out, csv.as_bytes())?;
    if let Some(p) = &a.plot {
        out.write(p, meta_svg(&r).as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}

/// Report grids stay within this many points.
const REPORT_GRID_BUDGET: f64 = 2.0e5;

/// Default grid with the levels per continuous variable reduced until the
/// full product fits [`REPORT_GRID_BUDGET`].
fn report_grid(space: &HyperSpace) -> DesignGrid {
    let mut fixed = 1.0;
    let mut continuous = 0;
    for v in &space.design {
        match &v.kind {
            VariableKind::Continuous { .. } => continuous += 1,
            VariableKind::Discrete { levels } => fixed *= levels.len() as f64,
            VariableKind::Categorical { labels } => fixed *= labels.len() as f64,
        }
    }
    let mut grid = DesignGrid::default();
    if continuous > 0 {
        let fit = (REPORT_GRID_BUDGET / fixed).powf(1.0 / continuous as f64).floor() as usize;
        grid.levels = fit.clamp(2, grid.levels);
    }
    grid
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let cfg = ProjectConfig::load(&a.project)?;
    let seed = resolve_seed(a.seed, cfg.seed)?;
    let p = ensure_project(&cfg, seed)?;
    let dir = &a.out;
    let out = Output {
        command: "report",
        seed: Some(seed),
        inputs: vec![("project", &a.project), ("space", &cfg.space), ("results", &cfg.results), ("model", &cfg.model)],
    };
    let targets = (!cfg.report.targets.is_empty()).then(|| cfg.report.targets.clone());
    let mut summary = String::new();
    let mut files: Vec<String> = Vec::new();
    let put = |name: &str, bytes: &[u8], files: &mut Vec<String>| -> Result<(), CliError> {
        out.write(&dir.join(name), bytes)?;
        files.push(name.to_owned());
        Ok(())
    };

    let ok = p.store.ok_records().count();
    let total = p.store.records().count();
    summary.push_str(&format!(
        "space {}\nplan {} ({} runs, seed {})\n",
        p.space.hash(),
        p.plan.hash(),
        p.plan.len(),
        p.plan.seed
    ));
    summary.push_str(&format!("results: {ok} ok of {total}\n"));
    summary.push_str(&format!(
        "model: {:?}, {} parameters, worst LOOCV RMSE / range {}\n",
        p.model.spec.family,
        p.model.n_params(),
        p.model.accuracy_fraction().map(fmt_f64).unwrap_or_else(|| "undefined".into())
    ));
    put("model_validation.csv", model_summary(&p.model).as_bytes(), &mut files)?;

    let front = analysis::pareto_front_observed(&p.store, &Selection::all(), targets.as_deref())?;
    let idx = target_positions(&p.space, &front);
    let bg = background(&p.store, &Selection::all(), &idx)?;
    put("front_observed.csv", export::front_csv(&front, Some(&p.space)).as_bytes(), &mut files)?;
    put("tradeoff.csv", export::tradeoff_csv(&front, &tradeoff_table(&front)).as_bytes(), &mut files)?;
    summary.push_str(&format!("observed front: {} members\n", front.members.len()));
    let mut overlays: Vec<(String, ParetoFront)> = vec![("observed front".into(), front)];

    if let Some(var) = &cfg.report.compare_by {
        let labels = p
            .space
            .design
            .iter()
            .find(|v| &v.name == var)
            .and_then(|v| v.labels())
            .ok_or_else(|| CliError::validation(format!("compare_by `{var}` is not a categorical design variable")))?
            .to_vec();
        overlays.clear();
        for label in labels {
            let sel = Selection::all().with(var, label.as_str());
            match analysis::pareto_front_observed(&p.store, &sel, targets.as_deref()) {
                Ok(f) => {
                    put(
                        &format!("front_{var}_{label}.csv"),
                        export::front_csv(&f, Some(&p.space)).as_bytes(),
                        &mut files,
                    )?;
                    summary.push_str(&format!("front {var}={label}: {} members\n", f.members.len()));
                    overlays.push((format!("{var}={label}"), f));
                }
                Err(analysis::AnalysisError::EmptySelection) => {
                    summary.push_str(&format!("front {var}={label}: no ok runs\n"));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    let surrogate = parse_use_case(&p.space, cfg.report.use_case.as_deref()).and_then(|u| {
        analysis::pareto_front_surrogate(&p.model, &p.space, &u, &report_grid(&p.space), targets.as_deref())
            .map_err(CliError::from)
    });
    match surrogate {
        Ok(f) => {
            put("front_surrogate.csv", export::front_csv(&f, Some(&p.space)).as_bytes(), &mut files)?;
            summary.push_str(&format!(
                "surrogate front: {} members of {} grid points ({} outside the validation area)\n",
                f.members.len(),
                f.evaluated,
                f.excluded_extrapolated
            ));
            overlays.push(("surrogate front".into(), f));
        }
        Err(e) => {
            eprintln!("warning: surrogate front skipped: {}", e.message);
            summary.push_str(&format!("surrogate front: skipped ({})\n", e.message));
        }
    }
    let refs: Vec<(String, &ParetoFront)> = overlays.iter().map(|(n, f)| (n.clone(), f)).collect();
    put("fronts.svg", fronts_svg("Pareto fronts", &bg, &refs).as_bytes(), &mut files)?;

    match optimize_surrogate(&p.store, &default_candidates()) {
        Ok(r) => {
            put("meta.csv", meta_csv(&r).as_bytes(), &mut files)?;
            put("meta.svg", meta_svg(&r).as_bytes(), &mut files)?;
            let labels: Vec<&str> = r.front.members.iter().map(|m| r.candidates[m.id].label.as_str()).collect();
            summary.push_str(&format!("surrogate configuration front: {}\n", labels.join(", ")));
        }
        Err(m) => summary.push_str(&format!("surrogate configurations: skipped ({m})\n")),
    }

    if let Some(PotentialSettings { sweep, grid, target, group_by, samples }) = &cfg.report.potential {
        let env = potential_envelope(
            EnvelopeSource::Model { model: &p.model, space: &p.space },
            sweep,
            &parse_grid(grid)?,
            target,
            group_by.as_deref(),
            samples.unwrap_or(analysis::DEFAULT_SAMPLES),
            seed,
        )?;
        put("envelope.csv", export::envelope_csv(&env).as_bytes(), &mut files)?;
        let title = format!("Potential of {target} over {sweep}");
        put("envelope.svg", analysis::plot::envelope_svg(&title, &env).as_bytes(), &mut files)?;
        summary.push_str(&format!("envelope: {target} over {sweep}, {} groups\n", env.groups.len()));
    }

    summary.push_str("files:\n");
    for f in &files {
        summary.push_str(&format!("  {f}\n"));
    }
    put("summary.txt", summary.as_bytes(), &mut files)?;
    print!("{summary}");
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let space = match (&a.space, a.sim.as_str()) {
        (Some(p), _) => read_space(p)?,
        (None, "echo") => return Err(CliError::usage("`--sim echo` needs --space")),
        (None, name) => {
            exemplars::builtin(name.strip_prefix("builtin:").unwrap_or(name))
                .ok_or_else(|| CliError::usage(format!("unknown simulator `{name}`")))?
                .0
        }
    };
    if a.sim.starts_with("exec:") {
        return Err(CliError::usage("serve only hosts builtin simulators"));
    }
    let sim = make_simulator(&a.sim, &space, None)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_line_protocol(&space, sim.as_ref(), stdin.lock(), stdout.lock())
        .map_err(|e| CliError::new(Category::Io, e.to_string()))
}
