use std::path::{Path, PathBuf};
use std::time::Instant;

use leakynorm::network::{linf_distance, sign_agreement, DEFAULT_PRUNE_TOL};
use leakynorm::oracle::default_step;
use leakynorm::patterns::DEFAULT_ENUMERATION_CUTOFF;
use leakynorm::solver::{solve_timed, Status};
use leakynorm::{
    atomic_lp, build_program, cover_bound, enumerate_patterns, load_dataset, loss_value, reconstruct, sample_on_grid,
    train, DataSet, EnumerationConfig, FiniteNetwork, FormulationKind, GDConfig, LeakyRelu, LossKind, SolverConfig,
    SolverReport,
};
use serde::Serialize;

use crate::run::{file_digest, CliError, RunDir, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED};
use crate::settings::Settings;
use crate::{CompareArgs, DataArgs, EnumArgs, EvalArgs, FitArgs, GridArgs, OracleArgs, PatternsArgs, TrainGdArgs};

type CmdResult = Result<(), CliError>;

#[derive(Serialize)]
struct DataSource {
    path: PathBuf,
    label: String,
}

fn data_source(s: &Settings, a: &DataArgs) -> Result<DataSource, CliError> {
    Ok(DataSource { path: s.required(a.data.clone(), "data")?, label: s.or(a.label.clone(), "label", "y".into())? })
}

fn load(src: &DataSource) -> Result<(DataSet, Vec<(String, String)>), CliError> {
    let data = load_dataset(&src.path, &src.label)?;
    let inputs = vec![(src.path.display().to_string(), file_digest(&src.path)?)];
    Ok((data, inputs))
}

fn enumeration(s: &Settings, a: &EnumArgs) -> Result<EnumerationConfig, CliError> {
    Ok(EnumerationConfig {
        cutoff: s.or(a.cutoff, "cutoff", DEFAULT_ENUMERATION_CUTOFF)?,
        force: s.flag(a.force, "force")?,
    })
}

fn formulation(s: &Settings, cli: Option<String>) -> Result<FormulationKind, CliError> {
    let name: String = s.or(cli, "formulation", "weights".into())?;
    Ok(name.parse()?)
}

fn activation(s: &Settings, cli: Option<f64>) -> Result<LeakyRelu, CliError> {
    Ok(LeakyRelu::new(s.or(cli, "alpha", 0.0)?)?)
}

#[derive(Debug, Clone, Serialize)]
struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    step: f64,
}

/// Resolves grid flags for inputs of dimension `d`; `None` when `d > 2`.
fn grid(s: &Settings, a: &GridArgs, d: usize) -> Result<Option<Grid>, CliError> {
    let lo = s.pick(a.lo.clone(), "lo")?;
    let hi = s.pick(a.hi.clone(), "hi")?;
    let step = s.pick(a.step, "step")?;
    if d > 2 {
        if lo.is_some() || hi.is_some() || step.is_some() {
            return Err(CliError::validation(format!("grid output supports d ∈ {{1, 2}}, got d = {d}")));
        }
        return Ok(None);
    }
    let lo = lo.unwrap_or_else(|| vec![-1.0; d]);
    let hi = hi.unwrap_or_else(|| vec![1.0; d]);
    if lo.len() != d || hi.len() != d {
        return Err(CliError::validation(format!("grid corners need {d} coordinates")));
    }
    let step = step.unwrap_or(if d == 1 { 0.01 } else { 0.02 });
    Ok(Some(Grid { lo, hi, step }))
}

fn out_dir(s: &Settings, cli: Option<PathBuf>) -> Result<RunDir, CliError> {
    RunDir::create(s.required(cli, "out")?)
}

#[derive(Serialize)]
struct PatternsOutput {
    count: usize,
    bound: u128,
    patterns: Vec<Vec<i8>>,
    witnesses: Vec<Vec<f64>>,
    data_hash: String,
}

pub fn patterns(config: Option<&Path>, a: PatternsArgs) -> CmdResult {
    let s = Settings::load(config, "patterns")?;
    let src = data_source(&s, &a.data)?;
    let enumeration = enumeration(&s, &a.enumeration)?;
    let mut out = out_dir(&s, a.out)?;
    let (data, inputs) = load(&src)?;

    let set = enumerate_patterns(&data, &enumeration)?;
    let bound = cover_bound(data.len() as u64, data.dim() as u64)?;
    let output = PatternsOutput {
        count: set.len(),
        bound,
        patterns: set.iter().map(|p| p.signs.clone()).collect(),
        witnesses: set.iter().map(|p| p.witness.w.iter().copied().chain([p.witness.b]).collect()).collect(),
        data_hash: set.data_hash.clone(),
    };
    out.write_json("patterns.json", &output)?;
    println!("{} patterns (bound {bound})", set.len());

    #[derive(Serialize)]
    struct Config {
        data: DataSource,
        enumeration: EnumerationConfig,
    }
    out.finish("patterns", &Config { data: src, enumeration }, inputs, None, "ok")
}

#[derive(Serialize)]
struct FitConfig {
    data: DataSource,
    formulation: FormulationKind,
    alpha: LeakyRelu,
    solver: SolverConfig,
    enumeration: EnumerationConfig,
    prune_tol: f64,
    grid: Option<Grid>,
    dump_program: bool,
}

pub fn fit(config: Option<&Path>, a: FitArgs) -> CmdResult {
    let s = Settings::load(config, "fit")?;
    let src = data_source(&s, &a.data)?;
    let kind = formulation(&s, a.formulation)?;
    let act = activation(&s, a.alpha)?;
    let defaults = SolverConfig::default();
    let tol = s.or(a.tol, "tol", defaults.tol_primal)?;
    let solver = SolverConfig {
        max_iterations: s.or(a.max_iter, "max-iter", defaults.max_iterations)?,
        seed: s.or(a.seed, "seed", 0)?,
        ..defaults.with_tolerance(tol)
    };
    solver.validate()?;
    let enumeration = enumeration(&s, &a.enumeration)?;
    let prune_tol = s.or(a.prune_tol, "prune-tol", DEFAULT_PRUNE_TOL)?;
    let dump_program = s.flag(a.dump_program, "dump-program")?;
    let mut out = out_dir(&s, a.out)?;
    let (data, inputs) = load(&src)?;
    let grid = grid(&s, &a.grid, data.dim())?;
    let cfg = FitConfig { data: src, formulation: kind, alpha: act, solver, enumeration, prune_tol, grid, dump_program };

    let start = Instant::now();
    let set = enumerate_patterns(&data, &cfg.enumeration)?;
    let program = build_program(kind, &data, &set, act)?;
    if cfg.dump_program {
        out.write_json("program.json", &program.dump()?)?;
    }
    let (sol, solve_time) = solve_timed(&program, &cfg.solver)?;
    out.write_json("solver_report.json", &SolverReport::new(&sol, solve_time))?;

    let failure = match sol.status {
        Status::Optimal => None,
        Status::Infeasible => Some(CliError::new(
            EXIT_INFEASIBLE,
            format!("infeasible ({})", sol.infeasibility.map_or("heuristic".into(), |k| format!("{k:?}").to_lowercase())),
        )),
        other => Some(CliError::new(EXIT_NOT_CONVERGED, format!("solver stopped with status {other}"))),
    };
    if let Some(err) = failure {
        out.finish("fit", &cfg, inputs, Some(cfg.solver.seed), &sol.status.to_string())?;
        return Err(err);
    }

    let net = reconstruct(&sol, &set, act, cfg.prune_tol)?;
    out.write("network.json", &net.to_json()?)?;
    if let Some(g) = &cfg.grid {
        out.write("grid.csv", &sample_on_grid(&net, &g.lo, &g.hi, g.step)?.to_csv())?;
    }
    let f = net.predict_data(&data)?;
    let y = data.labels();
    let fit_line = if kind.is_interpolation() {
        let r = f.iter().zip(y.iter()).map(|(f, y)| (f - y).abs()).fold(0.0, f64::max);
        format!("max residual {r:.3e}")
    } else {
        let m = f.iter().zip(y.iter()).map(|(f, y)| f * y).fold(f64::INFINITY, f64::min);
        format!("min margin {m:.9}")
    };
    println!(
        "{kind}: optimal, objective {:.10}, {} patterns, {} neurons, {fit_line}, {} iterations, {:.1} ms",
        sol.objective,
        set.len(),
        net.width(),
        sol.iterations,
        start.elapsed().as_secs_f64() * 1e3
    );
    out.finish("fit", &cfg, inputs, Some(cfg.solver.seed), "optimal")
}

#[derive(Serialize)]
struct TrainSummary {
    stop: leakynorm::StopReason,
    epochs: u64,
    final_loss: f64,
    wall_time_ms: f64,
}

pub fn train_gd(config: Option<&Path>, a: TrainGdArgs) -> CmdResult {
    let s = Settings::load(config, "train-gd")?;
    let src = data_source(&s, &a.data)?;
    let d = GDConfig::default();
    let loss: String = s.or(a.loss, "loss", d.loss.as_str().into())?;
    let gd = GDConfig {
        hidden: s.or(a.hidden, "hidden", d.hidden)?,
        learning_rate: s.or(a.lr, "lr", d.learning_rate)?,
        init_std: s.or(a.init_std, "init-std", d.init_std)?,
        target_loss: s.or(a.target_loss, "target-loss", d.target_loss)?,
        max_epochs: s.or(a.max_epochs, "max-epochs", d.max_epochs)?,
        loss: loss.parse::<LossKind>()?,
        seed: s.or(a.seed, "seed", d.seed)?,
        alpha: s.or(a.alpha, "alpha", d.alpha)?,
    };
    gd.validate()?;
    let mut out = out_dir(&s, a.out)?;
    let (data, inputs) = load(&src)?;

    #[derive(Serialize)]
    struct Config {
        data: DataSource,
        gd: GDConfig,
    }
    let cfg = Config { data: src, gd };
    let start = Instant::now();
    let result = train(&data, &cfg.gd);
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            out.finish("train-gd", &cfg, inputs, Some(cfg.gd.seed), "diverged")?;
            return Err(e.into());
        }
    };
    out.write("network.json", &outcome.network.to_json()?)?;
    out.write("loss_trace.csv", &outcome.trace_csv())?;
    let summary = TrainSummary {
        stop: outcome.stop,
        epochs: outcome.epochs,
        final_loss: outcome.final_loss(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    out.write_json("train_report.json", &summary)?;
    println!("h={}: {:?} after {} epochs, loss {:.3e}", cfg.gd.hidden, summary.stop, summary.epochs, summary.final_loss);
    let status = serde_json::to_value(summary.stop)?.as_str().unwrap_or_default().to_string();
    out.finish("train-gd", &cfg, inputs, Some(cfg.gd.seed), &status)
}

pub fn oracle(config: Option<&Path>, a: OracleArgs) -> CmdResult {
    let s = Settings::load(config, "oracle")?;
    let src = data_source(&s, &a.data)?;
    let kind = formulation(&s, a.formulation)?;
    let act = activation(&s, a.alpha)?;
    let grid_step = s.or(a.grid_step, "grid-step", default_step(kind))?;
    let mut out = out_dir(&s, a.out)?;
    let (data, inputs) = load(&src)?;

    #[derive(Serialize)]
    struct Config {
        data: DataSource,
        formulation: FormulationKind,
        alpha: LeakyRelu,
        grid_step: f64,
    }
    let cfg = Config { data: src, formulation: kind, alpha: act, grid_step };
    let sol = match atomic_lp(&data, kind, act, grid_step) {
        Ok(sol) => sol,
        Err(e) => {
            let status = if matches!(e, leakynorm::Error::DictionaryInfeasible(_)) { "infeasible" } else { "error" };
            out.finish("oracle", &cfg, inputs, None, status)?;
            return Err(e.into());
        }
    };
    out.write_json("oracle.json", &sol)?;
    println!("{kind} oracle: objective {:.10}, {} active atoms", sol.objective, sol.active_atoms.len());
    out.finish("oracle", &cfg, inputs, None, "optimal")
}

#[derive(Serialize)]
struct DataReport {
    max_abs_residual: f64,
    squared_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logistic_loss: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    width: usize,
    outer_l1: f64,
    total_variation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<DataReport>,
}

fn read_net(path: &Path) -> Result<FiniteNetwork, CliError> {
    Ok(FiniteNetwork::read(path)?)
}

pub fn eval(config: Option<&Path>, a: EvalArgs) -> CmdResult {
    let s = Settings::load(config, "eval")?;
    let net_path: PathBuf = s.required(a.net, "net")?;
    let data_path: Option<PathBuf> = s.pick(a.data, "data")?;
    let label: String = s.or(a.label, "label", "y".into())?;
    let no_grid = s.flag(a.no_grid, "no-grid")?;
    let mut out = out_dir(&s, a.out)?;
    let net = read_net(&net_path)?;
    let mut inputs = vec![(net_path.display().to_string(), file_digest(&net_path)?)];

    let data = match &data_path {
        Some(p) => {
            let (data, more) = load(&DataSource { path: p.clone(), label: label.clone() })?;
            inputs.extend(more);
            Some(data)
        }
        None => None,
    };
    let dim = net.dim().or(data.as_ref().map(|d| d.dim())).unwrap_or(1);
    let grid = if no_grid { None } else { grid(&s, &a.grid, dim)? };

    let data_report = match &data {
        None => None,
        Some(data) => {
            let f = net.predict_data(data)?;
            let y = data.labels();
            let mut csv = (1..=data.dim()).map(|k| format!("x{k},")).collect::<String>() + "y,f\n";
            for (i, fi) in f.iter().enumerate() {
                for x in data.point(i) {
                    csv.push_str(&format!("{x},"));
                }
                csv.push_str(&format!("{},{fi}\n", y[i]));
            }
            out.write("predictions.csv", &csv)?;
            let binary = data.require_binary_labels().is_ok();
            Some(DataReport {
                max_abs_residual: f.iter().zip(y.iter()).map(|(f, y)| (f - y).abs()).fold(0.0, f64::max),
                squared_loss: loss_value(&net, data, LossKind::Squared)?,
                min_margin: binary
                    .then(|| f.iter().zip(y.iter()).map(|(f, y)| f * y).fold(f64::INFINITY, f64::min)),
                logistic_loss: if binary { Some(loss_value(&net, data, LossKind::Logistic)?) } else { None },
            })
        }
    };
    if let Some(g) = &grid {
        out.write("grid.csv", &sample_on_grid(&net, &g.lo, &g.hi, g.step)?.to_csv())?;
    }
    let report = EvalReport {
        width: net.width(),
        outer_l1: net.outer_l1(),
        total_variation: net.total_variation(),
        data: data_report,
    };
    out.write_json("eval.json", &report)?;
    println!("{}", serde_json::to_string(&report)?);

    #[derive(Serialize)]
    struct Config {
        net: PathBuf,
        data: Option<PathBuf>,
        label: String,
        grid: Option<Grid>,
    }
    out.finish("eval", &Config { net: net_path, data: data_path, label, grid }, inputs, None, "ok")
}

pub fn compare(config: Option<&Path>, a: CompareArgs) -> CmdResult {
    let s = Settings::load(config, "compare")?;
    let path_a: PathBuf = s.required(a.net_a, "net-a")?;
    let path_b: PathBuf = s.required(a.net_b, "net-b")?;
    let agreement = s.flag(a.sign_agreement, "sign-agreement")?;
    let mut out = out_dir(&s, a.out)?;
    let (na, nb) = (read_net(&path_a)?, read_net(&path_b)?);
    let dim = na.dim().or(nb.dim()).unwrap_or(1);
    let g = grid(&s, &a.grid, dim)?
        .ok_or_else(|| CliError::validation(format!("grid output supports d ∈ {{1, 2}}, got d = {dim}")))?;

    let value = if agreement {
        let p = sign_agreement(&na, &nb, &g.lo, &g.hi, g.step)?;
        serde_json::json!({ "agreement": p })
    } else {
        let d = linf_distance(&na, &nb, &g.lo, &g.hi, g.step)?;
        serde_json::json!({ "linf": d })
    };
    out.write_json("compare.json", &value)?;
    println!("{value}");

    let inputs = vec![
        (path_a.display().to_string(), file_digest(&path_a)?),
        (path_b.display().to_string(), file_digest(&path_b)?),
    ];
    #[derive(Serialize)]
    struct Config {
        net_a: PathBuf,
        net_b: PathBuf,
        grid: Grid,
        sign_agreement: bool,
    }
    out.finish("compare", &Config { net_a: path_a, net_b: path_b, grid: g, sign_agreement: agreement }, inputs, None, "ok")
}
