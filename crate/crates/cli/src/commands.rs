use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use inertial_core::equilibrium::{is_inertial, is_nash, vi_gap, EnvyReport};
use inertial_core::experiment::{run_experiment, write_experiment_csv, Algorithm, ExperimentConfig};
use inertial_core::game::{ensure_valid, lipschitz_bounds, PopulationGame, SimplexPoint};
use inertial_core::io::{
    write_game, write_trajectory_csv, GameFile, MultiClassFile, ResultFile, StateColumns,
};
use inertial_core::multiclass::{
    better_response_multi_solve, is_multiclass_inertial, MultiClassGame, StackedOperator, StackedPoint,
};
use inertial_core::par::sub_seed;
use inertial_core::probe::{monotonicity_probe, GameOperator, OperatorKind, ProbeConfig, ProbeReport, Verdict};
use inertial_core::scenarios::{
    build_ridehailing, random_game, random_simplex_point, recommended_params, synthetic_city,
    FamilySpec, GeneratorSpec, ScenarioConfig,
};
use inertial_core::solvers::{
    better_response_solve, projection_solve, BetterResponseConfig, ProjectionConfig,
    RedistributionPolicy, SolveResult, Status, UpdateMode,
};
use inertial_core::Execution;
use serde::Serialize;

use crate::{
    AlgorithmArg, AlgorithmsArg, ExperimentArgs, FamilyArg, GenArgs, OperatorArg, PolicyArg,
    ProbeArgs, ScenarioArgs, SolveArgs, SolverParams, VerifyArgs,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NOT_INERTIAL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

enum LoadedGame {
    Single(PopulationGame),
    Multi(MultiClassGame),
}

fn load_game(path: &Path) -> Result<LoadedGame> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("classes").is_some() {
        let mc = serde_json::from_value::<MultiClassFile>(value)?.into_game()?;
        mc.validate()?;
        Ok(LoadedGame::Multi(mc))
    } else {
        let game = serde_json::from_value::<GameFile>(value)?.into_game()?;
        ensure_valid(&game)?;
        Ok(LoadedGame::Single(game))
    }
}

fn load_single(path: &Path) -> Result<PopulationGame> {
    match load_game(path)? {
        LoadedGame::Single(g) => Ok(g),
        LoadedGame::Multi(_) => bail!("{} is a multi-class game; this command needs a single-class game", path.display()),
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}")))
        .collect()
}

fn parse_range(text: &str) -> Result<[f64; 2]> {
    let v = parse_list(text)?;
    ensure!(v.len() == 2, "range {text:?} needs exactly two numbers");
    Ok([v[0], v[1]])
}

/// Reads a point from JSON: a plain array, nested arrays, or a result file's `x_final`.
fn point_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Ok(match value.get("x_final") {
        Some(x) => x.clone(),
        None => value,
    })
}

fn single_point(game: &PopulationGame, x: Vec<f64>) -> Result<SimplexPoint> {
    ensure!(x.len() == game.n(), "point has {} entries, game has {} actions", x.len(), game.n());
    Ok(SimplexPoint::new(x, game.gamma())?)
}

fn stacked_point(mc: &MultiClassGame, blocks: Vec<Vec<f64>>) -> Result<StackedPoint> {
    ensure!(blocks.len() == mc.class_count(), "point has {} blocks, game has {} classes", blocks.len(), mc.class_count());
    Ok(StackedPoint::new(
        blocks
            .into_iter()
            .zip(mc.gammas())
            .map(|(b, &g)| SimplexPoint::new(b, g))
            .collect::<inertial_core::Result<Vec<_>>>()?,
    ))
}

fn num(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn print_envy(report: &EnvyReport, prefix: &str) {
    for w in &report.witnesses {
        println!(
            "{prefix}witness {}->{} ({} < {})",
            w.from + 1,
            w.to + 1,
            num(w.u_from),
            num(w.u_to - w.cost)
        );
    }
}

pub fn verify(args: &VerifyArgs) -> Result<u8> {
    match load_game(&args.game)? {
        LoadedGame::Single(game) => {
            let x = match (&args.point, &args.point_file) {
                (Some(p), _) => parse_list(p)?,
                (None, Some(path)) => serde_json::from_value(point_json(path)?)?,
                (None, None) => bail!("give --point or --point-file"),
            };
            let x = single_point(&game, x)?;
            let inertial = is_inertial(&game, &x, args.tol)?;
            let nash = is_nash(&game, &x, args.tol)?;
            println!("inertial: {}, nash: {}", inertial.inertial, nash.nash);
            print_envy(&inertial.report, "");
            if let Some(w) = nash.witness {
                println!("nash witness {} below best action {} ({} < {})", w.from + 1, w.to + 1, num(w.u_from), num(w.u_to));
            }
            println!("vi_gap: {}", vi_gap(&game, &x)?);
            Ok(if inertial.inertial { EXIT_OK } else { EXIT_NOT_INERTIAL })
        }
        LoadedGame::Multi(mc) => {
            let path = args.point_file.as_ref().context("multi-class points need --point-file with one array per class")?;
            let xs = stacked_point(&mc, serde_json::from_value(point_json(path)?)?)?;
            let v = is_multiclass_inertial(&mc, &xs, args.tol)?;
            println!("inertial: {}", v.inertial);
            for (a, report) in v.reports.iter().enumerate() {
                print_envy(report, &format!("class {}: ", a + 1));
            }
            Ok(if v.inertial { EXIT_OK } else { EXIT_NOT_INERTIAL })
        }
    }
}

/// Parameters actually used by a better-response run.
#[derive(Serialize)]
struct BetterResponseEcho {
    algorithm: &'static str,
    policy: RedistributionPolicy,
    #[serde(flatten)]
    config: BetterResponseConfig,
    x0: String,
    seed: u64,
}

#[derive(Serialize)]
struct ProjectionEcho {
    algorithm: &'static str,
    #[serde(flatten)]
    config: ProjectionConfig,
    x0: String,
    seed: u64,
}

struct Resolved {
    projection: ProjectionConfig,
    better: BetterResponseConfig,
    policy: RedistributionPolicy,
}

/// Fills omitted parameters from the recommended values for the worst class.
fn resolve(params: &SolverParams, games: &[PopulationGame], need_tau: bool, seed: u64) -> Result<Resolved> {
    let n = games[0].n();
    let total_gamma: f64 = games.iter().map(PopulationGame::gamma).sum();
    let l = games.iter().map(|g| lipschitz_bounds(g).global).fold(0.0, f64::max);
    let c_min = games.iter().filter_map(PopulationGame::c_min).fold(f64::INFINITY, f64::min);
    let recommended = |what: &str| -> Result<()> {
        ensure!(l > 0.0, "cannot recommend {what}: Lipschitz constant is zero; pass it explicitly");
        ensure!(c_min > 0.0 && c_min.is_finite(), "cannot recommend {what}: minimum switching cost is zero; pass it explicitly");
        Ok(())
    };
    let rho = match params.rho {
        Some(r) => r,
        None if l > 0.0 => 1.0 / l,
        None => 1.0,
    };
    let tau = match params.tau {
        Some(t) => t,
        None if need_tau && params.policy != PolicyArg::FixedMass => {
            recommended("tau")?;
            let single = games.len() == 1;
            let tau = 0.9 * c_min / (l * total_gamma);
            if single { recommended_params(&games[0])?.tau } else { tau.min(1.0) }
        }
        None => 1.0,
    };
    let epsilon = match params.epsilon {
        Some(e) => e,
        None if need_tau => {
            recommended("epsilon")?;
            0.1 * c_min / l
        }
        None => 0.0,
    };
    let policy = match params.policy {
        PolicyArg::EqualShare => RedistributionPolicy::EqualShare { tau },
        PolicyArg::PerTarget => RedistributionPolicy::PerTarget {
            tau: if params.tau.is_some() { tau } else { tau.min(1.0 / (n.max(2) - 1) as f64) },
        },
        PolicyArg::UtilityWeighted => RedistributionPolicy::UtilityWeighted { tau },
        PolicyArg::FixedMass => RedistributionPolicy::FixedMass {
            amount: params.amount.context("--policy fixed-mass needs --amount")?,
        },
    };
    let mut better = BetterResponseConfig::new(epsilon);
    better.tol = params.tol;
    better.max_iter = params.max_iter;
    better.unsafe_allow_bound_violation = params.unsafe_run;
    if params.asynchronous {
        better.update = UpdateMode::Asynchronous { seed };
    }
    let projection = ProjectionConfig {
        rho,
        tol: params.tol,
        max_iter: params.max_iter,
        enforce_guarantee: !params.unsafe_run,
        record_trajectory: true,
    };
    Ok(Resolved { projection, better, policy })
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Converged => EXIT_OK,
        Status::MaxIter | Status::CycleDetected => EXIT_NOT_CONVERGED,
    }
}

fn write_outputs<P: Serialize + StateColumns, C: Serialize>(
    args: &SolveArgs,
    result: &SolveResult<P>,
    echo: &C,
) -> Result<()> {
    let file = ResultFile::new(result, echo);
    match &args.out {
        Some(path) => std::fs::write(path, file.to_json() + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{}", file.to_json()),
    }
    if let Some(path) = &args.trajectory {
        let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_trajectory_csv(BufWriter::new(f), &result.trajectory)?;
    }
    let cycle = result.cycle_period.map(|p| format!(", period {p}")).unwrap_or_default();
    eprintln!(
        "status: {}{cycle}, iterations: {}, gap: {}, verified_inertial: {}",
        result.status, result.iterations, result.gap_final, result.verified
    );
    Ok(())
}

pub fn solve(args: &SolveArgs) -> Result<u8> {
    let params = &args.params;
    match load_game(&args.game)? {
        LoadedGame::Single(game) => {
            let need_tau = args.algorithm == AlgorithmArg::BetterResponse;
            let mut r = resolve(params, std::slice::from_ref(&game), need_tau, args.seed)?;
            r.projection.record_trajectory = args.trajectory.is_some();
            r.better.record_trajectory = args.trajectory.is_some();
            let x0 = match args.x0.as_str() {
                "uniform" => SimplexPoint::uniform(game.n(), game.gamma()),
                "random" => random_simplex_point(sub_seed(args.seed, 0), game.n(), game.gamma()),
                s if s.contains(',') || s.parse::<f64>().is_ok() => single_point(&game, parse_list(s)?)?,
                path => single_point(&game, serde_json::from_value(point_json(Path::new(path))?)?)?,
            };
            match args.algorithm {
                AlgorithmArg::Projection => {
                    let result = projection_solve(&game, &x0, &r.projection)?;
                    let echo = ProjectionEcho { algorithm: "projection", config: r.projection, x0: args.x0.clone(), seed: args.seed };
                    write_outputs(args, &result, &echo)?;
                    Ok(status_code(result.status))
                }
                AlgorithmArg::BetterResponse => {
                    let result = better_response_solve(&game, &x0, &r.policy, &r.better)?;
                    let echo = BetterResponseEcho { algorithm: "better-response", policy: r.policy, config: r.better, x0: args.x0.clone(), seed: args.seed };
                    write_outputs(args, &result, &echo)?;
                    Ok(status_code(result.status))
                }
            }
        }
        LoadedGame::Multi(mc) => {
            ensure!(
                args.algorithm == AlgorithmArg::BetterResponse,
                "multi-class games are solved with --algorithm better-response"
            );
            let classes = (0..mc.class_count()).map(|a| mc.class_game(a)).collect::<inertial_core::Result<Vec<_>>>()?;
            let mut r = resolve(params, &classes, true, args.seed)?;
            r.better.record_trajectory = args.trajectory.is_some();
            let xs = match args.x0.as_str() {
                "uniform" => StackedPoint::uniform(&mc),
                "random" => StackedPoint::new(
                    mc.gammas()
                        .iter()
                        .enumerate()
                        .map(|(a, &g)| random_simplex_point(sub_seed(args.seed, a as u64), mc.n(), g))
                        .collect(),
                ),
                path => stacked_point(&mc, serde_json::from_value(point_json(Path::new(path))?)?)?,
            };
            let result = better_response_multi_solve(&mc, &xs, &r.policy, &r.better)?;
            let echo = BetterResponseEcho { algorithm: "better-response", policy: r.policy, config: r.better, x0: args.x0.clone(), seed: args.seed };
            write_outputs(args, &result, &echo)?;
            Ok(status_code(result.status))
        }
    }
}

fn print_probe(report: &ProbeReport) {
    let verdict = match report.verdict {
        Verdict::NotMonotone => "NotMonotone",
        Verdict::MonotoneUpToSampling => "MonotoneUpToSampling",
    };
    println!("verdict: {verdict}");
    if let Some(p) = &report.worst_pair {
        println!("worst pair product: {} at x = {:?}, y = {:?}", p.product, p.x, p.y);
    }
    match &report.worst_eigen {
        Some(e) => println!("worst symmetric-part eigenvalue: {} at {:?}", e.min_eigenvalue, e.x),
        None => println!("worst symmetric-part eigenvalue: none (all samples too close to the boundary)"),
    }
    println!(
        "pairs: {}, jacobians: {} checked, {} skipped",
        report.pairs_checked, report.jacobians_checked, report.jacobians_skipped
    );
}

pub fn probe(args: &ProbeArgs) -> Result<u8> {
    ensure!(args.samples > 0, "--samples must be positive");
    ensure!(args.h > 0.0, "--h must be positive");
    let cfg = ProbeConfig { seed: args.seed, samples: args.samples, tol: args.tol, h: args.h, execution: Execution::default() };
    let kind = match args.operator {
        OperatorArg::F => OperatorKind::F,
        OperatorArg::MinusU => OperatorKind::MinusU,
    };
    let report = match load_game(&args.game)? {
        LoadedGame::Single(game) => monotonicity_probe(&GameOperator { game: &game, kind }, &cfg),
        LoadedGame::Multi(mc) => monotonicity_probe(&StackedOperator { game: &mc, kind }, &cfg),
    };
    print_probe(&report);
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(EXIT_OK)
}

fn describe(game: &PopulationGame) {
    let l = lipschitz_bounds(game).global;
    println!("actions: {}, gamma: {}, L: {l}, c_min: {:?}", game.n(), game.gamma(), game.c_min());
    match recommended_params(game) {
        Ok(p) => println!("recommended rho: {}, tau: {}, epsilon: {}", p.rho, p.tau, p.epsilon),
        Err(e) => println!("no recommended parameters: {e}"),
    }
}

pub fn scenario(args: &ScenarioArgs) -> Result<u8> {
    let game = match &args.config {
        Some(path) => ScenarioConfig::from_file(path)?.build()?,
        None => build_ridehailing(&synthetic_city(), args.gamma)?,
    };
    write_game(&args.out, &game)?;
    describe(&game);
    Ok(EXIT_OK)
}

pub fn gen(args: &GenArgs) -> Result<u8> {
    let family = match args.family {
        FamilyArg::Affine => FamilySpec::Affine { a_range: parse_range(&args.a_range)?, b_range: parse_range(&args.b_range)? },
        FamilyArg::RideHailing => FamilySpec::RideHailing {
            alpha_range: parse_range(&args.alpha_range)?,
            p_range: parse_range(&args.p_range)?,
            beta: args.beta,
        },
    };
    let spec = GeneratorSpec { family, cost_range: parse_range(&args.cost_range)?, gamma: args.gamma };
    let game = random_game(args.seed, args.n, &spec)?;
    write_game(&args.out, &game)?;
    describe(&game);
    Ok(EXIT_OK)
}

pub fn experiment(args: &ExperimentArgs) -> Result<u8> {
    ensure!(args.repetitions > 0, "--repetitions must be positive");
    let game = load_single(&args.game)?;
    let algorithms = match args.algorithms {
        AlgorithmsArg::Both => vec![Algorithm::Projection, Algorithm::BetterResponse],
        AlgorithmsArg::Projection => vec![Algorithm::Projection],
        AlgorithmsArg::BetterResponse => vec![Algorithm::BetterResponse],
    };
    let need_tau = algorithms.contains(&Algorithm::BetterResponse);
    let r = resolve(&args.params, std::slice::from_ref(&game), need_tau, args.seed)?;
    let cfg = ExperimentConfig {
        repetitions: args.repetitions,
        seed: args.seed,
        algorithms,
        projection: r.projection,
        policy: r.policy,
        better_response: r.better,
        execution: if args.sequential { Execution::Sequential } else { Execution::default() },
    };
    let report = run_experiment(&game, &cfg)?;
    if let Some(path) = &args.out {
        let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
        let mut w = BufWriter::new(f);
        write_experiment_csv(&mut w, &report)?;
        w.flush()?;
    }
    println!("{:<16} {:>6} {:>10} {:>16} {:>16}", "algorithm", "runs", "converged", "mean iterations", "std iterations");
    for s in &report.summaries {
        println!(
            "{:<16} {:>6} {:>10} {:>16.2} {:>16.2}",
            s.algorithm.name(),
            s.runs,
            s.converged,
            s.mean_iterations,
            s.std_iterations
        );
    }
    let all_converged = report.summaries.iter().all(|s| s.converged == s.runs);
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
