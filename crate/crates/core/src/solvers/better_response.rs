use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{min_of, norm2_diff, should_record, PreconditionIssue, SolveResult, Status, TrajectoryRecord};
use crate::equilibrium::{
    envy_sets, envy_with_mass_floor, gap_from, operator_from_utilities, EnvyReport, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::game::{
    ensure_valid, lipschitz_bounds, utilities_at, PopulationGame, SimplexPoint, SwitchingCosts,
    UtilityModel,
};
use crate::par::rng_for;

/// Mass moved along each `(from, to)` envy edge in one step.
pub type Transfers = BTreeMap<(usize, usize), f64>;

/// Two states closer than this in the max-norm count as the same state.
const CYCLE_MATCH_TOL: f64 = 1e-10;

/// Relative slack on policy outflow before it counts as overdrawing an action.
const OUTFLOW_SLACK: f64 = 1e-12;

/// How agents on an envious action split the mass that leaves it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RedistributionPolicy {
    /// `tau * x_i` in total, split evenly over the envy set.
    EqualShare { tau: f64 },
    /// `tau * x_i` to every envied action; needs `tau * (n - 1) <= 1`.
    PerTarget { tau: f64 },
    /// `tau * x_i` in total, split in proportion to the net gains `u_j - u_i - c_ij`.
    UtilityWeighted { tau: f64 },
    /// `min(amount, x_i)` in total, split evenly. Ignores the size of `x_i`,
    /// which makes it the natural way to overshoot the inflow cap.
    FixedMass { amount: f64 },
}

impl RedistributionPolicy {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            RedistributionPolicy::EqualShare { tau }
            | RedistributionPolicy::UtilityWeighted { tau } => check_tau(tau),
            RedistributionPolicy::PerTarget { tau } => {
                check_tau(tau)?;
                if tau * n.saturating_sub(1) as f64 > 1.0 + OUTFLOW_SLACK {
                    return Err(Error::InvalidPolicy(format!(
                        "per-target tau {tau} times {} targets exceeds 1",
                        n - 1
                    )));
                }
                Ok(())
            }
            RedistributionPolicy::FixedMass { amount } => {
                if amount > 0.0 && amount.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidPolicy(format!("amount {amount} must be positive")))
                }
            }
        }
    }

    /// Largest mass any single action can receive in one synchronous step
    /// from a block of total mass `mass` over `n` actions.
    pub fn max_inflow(&self, mass: f64, n: usize) -> f64 {
        match *self {
            RedistributionPolicy::EqualShare { tau }
            | RedistributionPolicy::PerTarget { tau }
            | RedistributionPolicy::UtilityWeighted { tau } => tau * mass,
            RedistributionPolicy::FixedMass { amount } => {
                (amount * n.saturating_sub(1) as f64).min(mass)
            }
        }
    }

    /// Fraction `tau` such that every envious action sends at least `tau * x_i`.
    pub fn min_outflow_fraction(&self, mass: f64) -> f64 {
        match *self {
            RedistributionPolicy::EqualShare { tau }
            | RedistributionPolicy::PerTarget { tau }
            | RedistributionPolicy::UtilityWeighted { tau } => tau,
            RedistributionPolicy::FixedMass { amount } => (amount / mass).min(1.0),
        }
    }

    fn split(&self, mass: f64, envied: &[usize], gains: &[f64]) -> Vec<(usize, f64)> {
        let count = envied.len() as f64;
        match *self {
            RedistributionPolicy::EqualShare { tau } => {
                envied.iter().map(|&j| (j, tau * mass / count)).collect()
            }
            RedistributionPolicy::PerTarget { tau } => {
                envied.iter().map(|&j| (j, tau * mass)).collect()
            }
            RedistributionPolicy::UtilityWeighted { tau } => {
                let total: f64 = gains.iter().sum();
                envied
                    .iter()
                    .zip(gains)
                    .map(|(&j, g)| (j, tau * mass * g / total))
                    .collect()
            }
            RedistributionPolicy::FixedMass { amount } => {
                let moved = amount.min(mass);
                envied.iter().map(|&j| (j, moved / count)).collect()
            }
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPolicy(format!("tau {tau} must lie in (0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateMode {
    /// Envy sets are frozen at `x(k)` for the whole step.
    Synchronous,
    /// Actions move one at a time in a seeded random order, each re-reading
    /// the current state.
    Asynchronous { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetterResponseConfig {
    pub epsilon: f64,
    /// Step-norm threshold for the secondary stopping rule.
    pub tol: f64,
    pub max_iter: usize,
    pub cycle_window: usize,
    pub unsafe_allow_bound_violation: bool,
    /// Envy threshold used by the dynamics themselves.
    pub envy_tol: f64,
    /// Inertial check applied with the step-norm stopping rule.
    pub verify_tol: f64,
    pub update: UpdateMode,
    #[serde(skip)]
    pub record_trajectory: bool,
}

impl BetterResponseConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            tol: 1e-6,
            max_iter: 1_000_000,
            cycle_window: 64,
            unsafe_allow_bound_violation: false,
            envy_tol: DEFAULT_TOL,
            verify_tol: DEFAULT_TOL,
            update: UpdateMode::Synchronous,
            record_trajectory: true,
        }
    }
}

/// A game seen as one or more simplex blocks that share utilities through
/// the aggregate state.
pub(crate) trait BlockGame {
    fn block_masses(&self) -> Vec<f64>;
    fn block_costs(&self, b: usize) -> &SwitchingCosts;
    fn block_models(&self, b: usize) -> &[UtilityModel];
    /// Utilities perceived by each block at `state`.
    fn block_utilities(&self, state: &[Vec<f64>]) -> Vec<Vec<f64>>;
    /// Mass above which an action of block `b` counts as occupied.
    fn mass_floor(&self, _b: usize, tol: f64) -> f64 {
        tol
    }
}

impl BlockGame for PopulationGame {
    fn block_masses(&self) -> Vec<f64> {
        vec![self.gamma()]
    }

    fn block_costs(&self, _b: usize) -> &SwitchingCosts {
        self.costs()
    }

    fn block_models(&self, _b: usize) -> &[UtilityModel] {
        self.utilities()
    }

    fn block_utilities(&self, state: &[Vec<f64>]) -> Vec<Vec<f64>> {
        vec![utilities_at(self.utilities(), &state[0])]
    }
}

pub(crate) fn block_preconditions<G: BlockGame>(
    game: &G,
    policy: &RedistributionPolicy,
    epsilon: f64,
) -> Vec<PreconditionIssue> {
    let masses = game.block_masses();
    let mut issues = Vec::new();
    if !(epsilon > 0.0) {
        issues.push(PreconditionIssue::NonPositiveEpsilon { epsilon });
    }
    let mut c_min: Option<f64> = None;
    let mut l: f64 = 0.0;
    let mut n = 0;
    for b in 0..masses.len() {
        for (action, u) in game.block_models(b).iter().enumerate() {
            if !u.is_non_increasing() {
                issues.push(PreconditionIssue::IncreasingUtility { action });
            }
            l = l.max(u.lipschitz());
        }
        n = game.block_models(b).len();
        if let Some(c) = game.block_costs(b).c_min() {
            c_min = Some(c_min.map_or(c, |m| m.min(c)));
        }
    }
    let Some(c_min) = c_min else {
        return issues;
    };
    if c_min <= 0.0 {
        issues.push(PreconditionIssue::ZeroCMin);
        return issues;
    }
    let cap = if l > 0.0 { c_min / l - epsilon } else { f64::INFINITY };
    if cap <= 0.0 {
        issues.push(PreconditionIssue::InflowCapNonPositive { cap });
        return issues;
    }
    let max_inflow: f64 = masses.iter().map(|&m| policy.max_inflow(m, n)).sum();
    if max_inflow > cap * (1.0 + OUTFLOW_SLACK) {
        issues.push(PreconditionIssue::InfeasibleInflow { max_inflow, cap });
    }
    issues
}

/// Everything that blocks the convergence guarantee of the better-response
/// dynamics for this game, policy and configuration. A zero minimum cost,
/// as after adding an exit action, shows up as [`PreconditionIssue::ZeroCMin`].
pub fn check_better_response_preconditions(
    game: &PopulationGame,
    policy: &RedistributionPolicy,
    cfg: &BetterResponseConfig,
) -> Vec<PreconditionIssue> {
    block_preconditions(game, policy, cfg.epsilon)
}

fn envied_by(u: &[f64], i: usize, costs: &SwitchingCosts, tol: f64) -> (Vec<usize>, Vec<f64>) {
    let mut envied = Vec::new();
    let mut gains = Vec::new();
    for j in 0..u.len() {
        let gain = u[j] - u[i] - costs.get(i, j);
        if gain > tol {
            envied.push(j);
            gains.push(gain);
        }
    }
    (envied, gains)
}

fn emit(
    policy: &RedistributionPolicy,
    i: usize,
    mass: f64,
    envied: &[usize],
    gains: &[f64],
) -> Result<Vec<(usize, f64)>> {
    let moves = policy.split(mass, envied, gains);
    let outflow: f64 = moves.iter().map(|m| m.1).sum();
    if outflow > mass * (1.0 + OUTFLOW_SLACK) || moves.iter().any(|m| m.1 < 0.0) {
        return Err(Error::BoundViolation { action: i, outflow, mass });
    }
    Ok(moves)
}

pub(crate) struct BlockStep {
    pub next: Vec<Vec<f64>>,
    pub transfers: Vec<Transfers>,
    pub envy: Vec<EnvyReport>,
    pub moved: f64,
}

impl BlockStep {
    fn envy_empty(&self) -> bool {
        self.envy.iter().all(EnvyReport::is_empty)
    }
}

pub(crate) fn sync_step<G: BlockGame>(
    game: &G,
    state: &[Vec<f64>],
    policy: &RedistributionPolicy,
    tol: f64,
) -> Result<BlockStep> {
    let utilities = game.block_utilities(state);
    let mut next = Vec::with_capacity(state.len());
    let mut transfers = Vec::with_capacity(state.len());
    let mut envy = Vec::with_capacity(state.len());
    let mut moved = 0.0;
    for (b, x) in state.iter().enumerate() {
        let u = &utilities[b];
        let costs = game.block_costs(b);
        let report = envy_with_mass_floor(u, x, costs, tol, game.mass_floor(b, tol));
        let n = x.len();
        let mut outflow = vec![0.0; n];
        let mut inflow = vec![0.0; n];
        let mut edges = Transfers::new();
        for i in 0..n {
            if report.sets[i].is_empty() {
                continue;
            }
            let gains: Vec<f64> = report.sets[i]
                .iter()
                .map(|&j| u[j] - u[i] - costs.get(i, j))
                .collect();
            for (j, amount) in emit(policy, i, x[i], &report.sets[i], &gains)? {
                outflow[i] += amount;
                inflow[j] += amount;
                moved += amount;
                edges.insert((i, j), amount);
            }
        }
        next.push(
            (0..n)
                .map(|i| (x[i] - outflow[i]).max(0.0) + inflow[i])
                .collect(),
        );
        transfers.push(edges);
        envy.push(report);
    }
    Ok(BlockStep { next, transfers, envy, moved })
}

fn async_step<G: BlockGame>(
    game: &G,
    state: &[Vec<f64>],
    policy: &RedistributionPolicy,
    tol: f64,
    seed: u64,
    k: usize,
) -> Result<BlockStep> {
    let utilities = game.block_utilities(state);
    let envy: Vec<EnvyReport> = state
        .iter()
        .enumerate()
        .map(|(b, x)| {
            envy_with_mass_floor(&utilities[b], x, game.block_costs(b), tol, game.mass_floor(b, tol))
        })
        .collect();

    let mut order: Vec<(usize, usize)> = state
        .iter()
        .enumerate()
        .flat_map(|(b, x)| (0..x.len()).map(move |i| (b, i)))
        .collect();
    order.shuffle(&mut rng_for(seed, k as u64));

    let mut current = state.to_vec();
    let mut transfers = vec![Transfers::new(); state.len()];
    let mut moved = 0.0;
    for (b, i) in order {
        if current[b][i] <= game.mass_floor(b, tol) {
            continue;
        }
        let u = game.block_utilities(&current);
        let (envied, gains) = envied_by(&u[b], i, game.block_costs(b), tol);
        if envied.is_empty() {
            continue;
        }
        let moves = emit(policy, i, current[b][i], &envied, &gains)?;
        let outflow: f64 = moves.iter().map(|m| m.1).sum();
        current[b][i] = (current[b][i] - outflow).max(0.0);
        for (j, amount) in moves {
            current[b][j] += amount;
            moved += amount;
            *transfers[b].entry((i, j)).or_insert(0.0) += amount;
        }
    }
    Ok(BlockStep { next: current, transfers, envy, moved })
}

pub(crate) struct DynamicsRun {
    pub status: Status,
    pub state: Vec<Vec<f64>>,
    pub iterations: usize,
    pub gap_final: f64,
    pub cycle_period: Option<usize>,
    pub trajectory: Vec<(usize, Vec<Vec<f64>>, f64, f64, f64)>,
}

fn metrics<G: BlockGame>(game: &G, state: &[Vec<f64>]) -> (f64, f64) {
    let utilities = game.block_utilities(state);
    let masses = game.block_masses();
    let mut min_u = f64::INFINITY;
    let mut gap = 0.0;
    for (b, x) in state.iter().enumerate() {
        min_u = min_u.min(min_of(&utilities[b]));
        let f = operator_from_utilities(&utilities[b], game.block_costs(b));
        gap += gap_from(&f, x, masses[b]);
    }
    (min_u, gap)
}

fn max_norm_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

fn flat_norm2(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (fa, fb): (Vec<f64>, Vec<f64>) = (
        a.iter().flatten().copied().collect(),
        b.iter().flatten().copied().collect(),
    );
    norm2_diff(&fa, &fb)
}

/// Period of a genuine revisit: `next` matches a stored state and some state
/// in between lies farther than `excursion` from it. Slow drift below the
/// match tolerance is not a cycle.
fn detect_cycle(
    window: &VecDeque<(usize, Vec<Vec<f64>>)>,
    next: &[Vec<f64>],
    k_next: usize,
    excursion: f64,
) -> Option<usize> {
    for (pos, (m, s)) in window.iter().enumerate() {
        if max_norm_diff(s, next) <= CYCLE_MATCH_TOL
            && window
                .iter()
                .skip(pos + 1)
                .any(|(_, t)| max_norm_diff(t, next) > excursion)
        {
            return Some(k_next - m);
        }
    }
    None
}

pub(crate) fn run_dynamics<G: BlockGame>(
    game: &G,
    x0: Vec<Vec<f64>>,
    policy: &RedistributionPolicy,
    cfg: &BetterResponseConfig,
) -> Result<DynamicsRun> {
    let mut state = x0;
    let mut trajectory = Vec::new();
    if cfg.record_trajectory {
        let (mu, gap) = metrics(game, &state);
        trajectory.push((0, state.clone(), mu, gap, 0.0));
    }
    let mut window: VecDeque<(usize, Vec<Vec<f64>>)> = VecDeque::new();
    window.push_back((0, state.clone()));
    let mut cycle_period = None;
    let mut k = 0;

    let status = loop {
        let step = match cfg.update {
            UpdateMode::Synchronous => sync_step(game, &state, policy, cfg.envy_tol)?,
            UpdateMode::Asynchronous { seed } => {
                async_step(game, &state, policy, cfg.envy_tol, seed, k)?
            }
        };
        if step.envy_empty() {
            break Status::Converged;
        }
        if k >= cfg.max_iter {
            break Status::MaxIter;
        }
        let next = step.next;
        k += 1;
        if cfg.record_trajectory && should_record(k) {
            let (mu, gap) = metrics(game, &next);
            trajectory.push((k, next.clone(), mu, gap, step.moved));
        }
        if let Some(period) = detect_cycle(&window, &next, k, cfg.tol.max(CYCLE_MATCH_TOL)) {
            cycle_period = Some(period);
            state = next;
            break Status::CycleDetected;
        }
        let small_step = flat_norm2(&next, &state) <= cfg.tol;
        state = next;
        if small_step && inertial_blocks(game, &state, cfg.verify_tol) {
            break Status::Converged;
        }
        window.push_back((k, state.clone()));
        if window.len() > cfg.cycle_window.max(1) {
            window.pop_front();
        }
    };

    if cfg.record_trajectory && trajectory.last().map(|r| r.0) != Some(k) {
        let (mu, gap) = metrics(game, &state);
        trajectory.push((k, state.clone(), mu, gap, 0.0));
    }
    let (_, gap_final) = metrics(game, &state);
    Ok(DynamicsRun {
        status,
        state,
        iterations: k,
        gap_final,
        cycle_period,
        trajectory,
    })
}

fn inertial_blocks<G: BlockGame>(game: &G, state: &[Vec<f64>], tol: f64) -> bool {
    let utilities = game.block_utilities(state);
    state
        .iter()
        .enumerate()
        .all(|(b, x)| {
            envy_with_mass_floor(&utilities[b], x, game.block_costs(b), tol, game.mass_floor(b, tol))
                .is_empty()
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub x_next: SimplexPoint,
    pub transfers: Transfers,
    pub envy: EnvyReport,
}

/// One synchronous better-response step.
pub fn better_response_step(
    game: &PopulationGame,
    x: &SimplexPoint,
    policy: &RedistributionPolicy,
    cfg: &BetterResponseConfig,
) -> Result<StepResult> {
    game.check_point(x)?;
    policy.validate(game.n())?;
    let mut step = sync_step(game, &[x.to_vec()], policy, cfg.envy_tol)?;
    Ok(StepResult {
        x_next: SimplexPoint::from_parts_unchecked(step.next.pop().unwrap(), x.mass()),
        transfers: step.transfers.pop().unwrap(),
        envy: step.envy.pop().unwrap(),
    })
}

/// Runs the better-response dynamics until no action envies another.
///
/// Unless `cfg.unsafe_allow_bound_violation` is set, refuses to start when
/// the convergence preconditions fail (see
/// [`check_better_response_preconditions`]).
pub fn better_response_solve(
    game: &PopulationGame,
    x0: &SimplexPoint,
    policy: &RedistributionPolicy,
    cfg: &BetterResponseConfig,
) -> Result<SolveResult<SimplexPoint>> {
    ensure_valid(game)?;
    game.check_point(x0)?;
    policy.validate(game.n())?;
    if !cfg.unsafe_allow_bound_violation {
        let issues = check_better_response_preconditions(game, policy, cfg);
        if !issues.is_empty() {
            return Err(Error::PreconditionViolated(issues));
        }
    }
    let gamma = game.gamma();
    let run = run_dynamics(game, vec![x0.to_vec()], policy, cfg)?;
    let point = |mut blocks: Vec<Vec<f64>>| {
        SimplexPoint::from_parts_unchecked(blocks.pop().expect("one block"), gamma)
    };
    let verified = run.status == Status::Converged
        && crate::equilibrium::is_inertial(game, &run.state[0], cfg.verify_tol.max(cfg.envy_tol))?
            .inertial;
    Ok(SolveResult {
        status: run.status,
        x_final: point(run.state),
        iterations: run.iterations,
        gap_final: run.gap_final,
        verified,
        cycle_period: run.cycle_period,
        trajectory: run
            .trajectory
            .into_iter()
            .map(|(k, s, min_utility, gap, moved_mass)| TrajectoryRecord {
                k,
                x: point(s),
                min_utility,
                gap,
                moved_mass,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundKind {
    /// Total outflow of an envious action below `tau * x_i`.
    MinOutflow { action: usize },
    /// Total outflow above `x_i`.
    MaxOutflow { action: usize },
    /// Total inflow above `c_min / L - epsilon`.
    Inflow { action: usize },
    /// Mass sent along a pair that is not an envy edge.
    OffEdge { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferBoundViolation {
    pub kind: BoundKind,
    pub value: f64,
    pub limit: f64,
    /// Amount by which the bound is exceeded (always positive).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferCheck {
    pub ok: bool,
    pub violations: Vec<TransferBoundViolation>,
}

/// Checks one step's transfers against the per-source outflow bounds and the
/// per-destination inflow cap `c_min / L - epsilon`. The lower outflow bound
/// applies only to actions with a nonempty envy set.
pub fn check_transfer_bounds(
    game: &PopulationGame,
    x: &[f64],
    transfers: &Transfers,
    tau: f64,
    epsilon: f64,
) -> Result<TransferCheck> {
    let envy = envy_sets(game, x, DEFAULT_TOL)?;
    let n = game.n();
    let slack = 1e-12;
    let mut outflow = vec![0.0; n];
    let mut inflow = vec![0.0; n];
    let mut violations = Vec::new();
    for (&(i, j), &amount) in transfers {
        if !envy.sets[i].contains(&j) {
            violations.push(TransferBoundViolation {
                kind: BoundKind::OffEdge { from: i, to: j },
                value: amount,
                limit: 0.0,
                margin: amount,
            });
        }
        outflow[i] += amount;
        inflow[j] += amount;
    }
    for i in 0..n {
        if !envy.sets[i].is_empty() && outflow[i] < tau * x[i] - slack {
            violations.push(TransferBoundViolation {
                kind: BoundKind::MinOutflow { action: i },
                value: outflow[i],
                limit: tau * x[i],
                margin: tau * x[i] - outflow[i],
            });
        }
        if outflow[i] > x[i] + slack {
            violations.push(TransferBoundViolation {
                kind: BoundKind::MaxOutflow { action: i },
                value: outflow[i],
                limit: x[i],
                margin: outflow[i] - x[i],
            });
        }
    }
    let l = lipschitz_bounds(game).global;
    let cap = match game.c_min() {
        Some(c) if l > 0.0 => c / l - epsilon,
        _ => f64::INFINITY,
    };
    for (j, &value) in inflow.iter().enumerate() {
        if value > cap + slack {
            violations.push(TransferBoundViolation {
                kind: BoundKind::Inflow { action: j },
                value,
                limit: cap,
                margin: value - cap,
            });
        }
    }
    Ok(TransferCheck {
        ok: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::extend_with_exit;
    use crate::instances::{nonconvex_three_action, two_action_overshoot};

    fn cfg(epsilon: f64) -> BetterResponseConfig {
        BetterResponseConfig::new(epsilon)
    }

    fn point(x: &[f64]) -> SimplexPoint {
        SimplexPoint::new(x.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn single_envy_edge_step() {
        let g = nonconvex_three_action();
        let policy = RedistributionPolicy::EqualShare { tau: 0.1 };
        let s = better_response_step(&g, &point(&[0.4, 0.2, 0.4]), &policy, &cfg(0.01)).unwrap();
        assert_eq!(s.transfers.len(), 1);
        assert!((s.transfers[&(2, 0)] - 0.04).abs() < 1e-15);
        for (a, b) in s.x_next.iter().zip([0.44, 0.2, 0.36]) {
            assert!((a - b).abs() < 1e-15);
        }
        let check = check_transfer_bounds(&g, &[0.4, 0.2, 0.4], &s.transfers, 0.1, 0.01).unwrap();
        assert!(check.ok, "{check:?}");
    }

    #[test]
    fn inertial_point_does_not_move() {
        let g = nonconvex_three_action();
        let x = point(&[0.4, 0.3, 0.3]);
        let s = better_response_step(&g, &x, &RedistributionPolicy::PerTarget { tau: 0.3 }, &cfg(0.01))
            .unwrap();
        assert!(s.transfers.is_empty());
        assert_eq!(s.x_next, x);
        assert!(check_transfer_bounds(&g, &x, &s.transfers, 0.3, 0.01).unwrap().ok);
    }

    #[test]
    fn overshoot_swaps_state() {
        let g = two_action_overshoot();
        let delta = 0.01;
        let x0 = point(&[0.75 + delta / 2.0, 0.25 - delta / 2.0]);
        let policy = RedistributionPolicy::FixedMass { amount: 0.5 + delta };
        let s = better_response_step(&g, &x0, &policy, &cfg(0.01)).unwrap();
        assert!((s.x_next[0] - (0.25 - delta / 2.0)).abs() < 1e-12);
        assert!((s.x_next[1] - (0.75 + delta / 2.0)).abs() < 1e-12);

        let epsilon = 0.01;
        let check = check_transfer_bounds(&g, &x0, &s.transfers, 0.5, epsilon).unwrap();
        assert!(!check.ok);
        let v = check.violations[0];
        assert_eq!(v.kind, BoundKind::Inflow { action: 1 });
        assert!((v.margin - (delta + epsilon)).abs() < 1e-12);
    }

    #[test]
    fn overshoot_cycles_with_period_two() {
        let g = two_action_overshoot();
        let x0 = point(&[0.755, 0.245]);
        let policy = RedistributionPolicy::FixedMass { amount: 0.51 };
        let mut c = cfg(0.05);
        assert!(better_response_solve(&g, &x0, &policy, &c).is_err());
        c.unsafe_allow_bound_violation = true;
        let r = better_response_solve(&g, &x0, &policy, &c).unwrap();
        assert_eq!(r.status, Status::CycleDetected);
        assert_eq!(r.cycle_period, Some(2));
        assert!(r.iterations <= 10);
    }

    #[test]
    fn compliant_run_on_overshoot_game() {
        let g = two_action_overshoot();
        let x0 = point(&[0.755, 0.245]);
        let policy = RedistributionPolicy::EqualShare { tau: 0.45 };
        let r = better_response_solve(&g, &x0, &policy, &cfg(0.05)).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.x_final[0] - r.x_final[1]).abs() <= 0.5);
        assert!(r.verified);
    }

    #[test]
    fn min_utility_never_drops() {
        let g = nonconvex_three_action();
        let x0 = point(&[0.4, 0.2, 0.4]);
        let policy = RedistributionPolicy::EqualShare { tau: 0.05 };
        let r = better_response_solve(&g, &x0, &policy, &cfg(0.01)).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.verified);
        assert!((r.x_final.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for w in r.trajectory.windows(2) {
            assert!(w[1].min_utility >= w[0].min_utility - 1e-12);
        }
    }

    #[test]
    fn exit_extension_needs_unsafe() {
        let g = extend_with_exit(&nonconvex_three_action(), 0.5);
        let policy = RedistributionPolicy::EqualShare { tau: 0.05 };
        let issues = check_better_response_preconditions(&g, &policy, &cfg(0.01));
        assert!(issues.contains(&PreconditionIssue::ZeroCMin));
        let x0 = SimplexPoint::uniform(4, 1.0);
        assert!(matches!(
            better_response_solve(&g, &x0, &policy, &cfg(0.01)),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn per_target_tau_is_capped() {
        assert!(RedistributionPolicy::PerTarget { tau: 0.6 }.validate(3).is_err());
        assert!(RedistributionPolicy::PerTarget { tau: 0.5 }.validate(3).is_ok());
        assert!(RedistributionPolicy::EqualShare { tau: 0.0 }.validate(3).is_err());
        assert!(RedistributionPolicy::EqualShare { tau: 1.5 }.validate(3).is_err());
    }

    #[test]
    fn utility_weighted_split_follows_gains() {
        let p = RedistributionPolicy::UtilityWeighted { tau: 0.5 };
        let moves = p.split(1.0, &[1, 2], &[1.0, 3.0]);
        assert_eq!(moves, vec![(1, 0.125), (2, 0.375)]);
    }

    #[test]
    fn asynchronous_mode_converges() {
        let g = nonconvex_three_action();
        let x0 = point(&[0.1, 0.1, 0.8]);
        let mut c = cfg(0.01);
        c.update = UpdateMode::Asynchronous { seed: 3 };
        let r = better_response_solve(&g, &x0, &RedistributionPolicy::EqualShare { tau: 0.09 }, &c)
            .unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.verified);
        for rec in &r.trajectory {
            assert!((rec.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
