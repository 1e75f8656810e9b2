//! Several agent classes over the same actions, coupled through the reduced
//! (summed) distribution. Each class has its own utilities and switching costs.

use serde::Serialize;

use crate::equilibrium::{envy_from_utilities, operator_from_utilities, EnvyReport};
use crate::error::{Error, Result};
use crate::game::{ensure_valid, utilities_at, PopulationGame, SimplexPoint, SwitchingCosts, UtilityModel};
use crate::probe::{OperatorKind, VectorOperator};
use crate::solvers::{
    block_preconditions, run_dynamics, BetterResponseConfig, BlockGame, RedistributionPolicy,
    SolveResult, TrajectoryRecord,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub utilities: Vec<UtilityModel>,
    pub costs: SwitchingCosts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassGame {
    n: usize,
    gammas: Vec<f64>,
    classes: Vec<ClassSpec>,
}

impl MultiClassGame {
    pub fn new(gammas: Vec<f64>, classes: Vec<ClassSpec>) -> Result<Self> {
        if classes.is_empty() || classes.len() != gammas.len() {
            return Err(Error::DimensionMismatch {
                expected: gammas.len().max(1),
                found: classes.len(),
            });
        }
        let n = classes[0].utilities.len();
        for class in &classes {
            if class.utilities.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: class.utilities.len() });
            }
            if class.costs.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: class.costs.dim() });
            }
        }
        Ok(Self { n, gammas, classes })
    }

    /// Wraps a single-class game as a one-class game.
    pub fn from_single(game: &PopulationGame) -> Self {
        Self {
            n: game.n(),
            gammas: vec![game.gamma()],
            classes: vec![ClassSpec {
                utilities: game.utilities().to_vec(),
                costs: game.costs().clone(),
            }],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn classes(&self) -> &[ClassSpec] {
        &self.classes
    }

    /// Class `alpha` as a standalone game of mass `gamma[alpha]`.
    pub fn class_game(&self, alpha: usize) -> Result<PopulationGame> {
        let c = &self.classes[alpha];
        PopulationGame::new(c.utilities.clone(), c.costs.clone(), self.gammas[alpha])
    }

    pub fn validate(&self) -> Result<()> {
        for alpha in 0..self.class_count() {
            ensure_valid(&self.class_game(alpha)?)?;
        }
        Ok(())
    }

    fn check_point(&self, xs: &StackedPoint) -> Result<()> {
        if xs.blocks.len() != self.class_count() {
            return Err(Error::DimensionMismatch {
                expected: self.class_count(),
                found: xs.blocks.len(),
            });
        }
        for (block, &gamma) in xs.blocks.iter().zip(&self.gammas) {
            if block.len() != self.n {
                return Err(Error::DimensionMismatch { expected: self.n, found: block.len() });
            }
            SimplexPoint::new(block.to_vec(), gamma)?;
        }
        Ok(())
    }
}

impl BlockGame for MultiClassGame {
    fn block_masses(&self) -> Vec<f64> {
        self.gammas.clone()
    }

    fn block_costs(&self, b: usize) -> &SwitchingCosts {
        &self.classes[b].costs
    }

    fn block_models(&self, b: usize) -> &[UtilityModel] {
        &self.classes[b].utilities
    }

    fn block_utilities(&self, state: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let xr = reduce_blocks(state);
        self.classes
            .iter()
            .map(|c| utilities_at(&c.utilities, &xr))
            .collect()
    }

    /// Residual class masses below this floor cannot add up past `tol` in
    /// the reduced point.
    fn mass_floor(&self, b: usize, tol: f64) -> f64 {
        let total: f64 = self.gammas.iter().sum();
        tol * (self.gammas[b] / total)
    }
}

/// One simplex block per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StackedPoint {
    pub blocks: Vec<SimplexPoint>,
}

impl StackedPoint {
    pub fn new(blocks: Vec<SimplexPoint>) -> Self {
        Self { blocks }
    }

    pub fn uniform(mc: &MultiClassGame) -> Self {
        Self {
            blocks: mc.gammas.iter().map(|&g| SimplexPoint::uniform(mc.n, g)).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.iter().copied()).collect()
    }

    fn to_blocks(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().map(|b| b.to_vec()).collect()
    }
}

fn reduce_blocks(blocks: &[Vec<f64>]) -> Vec<f64> {
    let mut out = blocks[0].clone();
    for b in &blocks[1..] {
        for (o, v) in out.iter_mut().zip(b) {
            *o += v;
        }
    }
    out
}

/// `x_r = Σ_α x^α`.
pub fn reduce(xs: &StackedPoint) -> Result<Vec<f64>> {
    let Some(first) = xs.blocks.first() else {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    };
    let n = first.len();
    if let Some(bad) = xs.blocks.iter().find(|b| b.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    Ok(reduce_blocks(&xs.to_blocks()))
}

/// Block-stacked `F^α_j = max_h (u^α_h(x_r) - u^α_j(x_r) - c^α_jh)`.
pub fn operator_f_multi(mc: &MultiClassGame, xs: &StackedPoint) -> Result<Vec<f64>> {
    mc.check_point(xs)?;
    Ok(stacked_operator(mc, &xs.to_blocks()))
}

fn stacked_operator(mc: &MultiClassGame, blocks: &[Vec<f64>]) -> Vec<f64> {
    mc.block_utilities(blocks)
        .iter()
        .zip(&mc.classes)
        .flat_map(|(u, c)| operator_from_utilities(u, &c.costs))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiInertialVerdict {
    pub inertial: bool,
    pub reports: Vec<EnvyReport>,
}

pub fn is_multiclass_inertial(
    mc: &MultiClassGame,
    xs: &StackedPoint,
    tol: f64,
) -> Result<MultiInertialVerdict> {
    mc.check_point(xs)?;
    let blocks = xs.to_blocks();
    let reports: Vec<EnvyReport> = mc
        .block_utilities(&blocks)
        .iter()
        .zip(&blocks)
        .zip(&mc.classes)
        .map(|((u, x), c)| envy_from_utilities(u, x, &c.costs, tol))
        .collect();
    Ok(MultiInertialVerdict {
        inertial: reports.iter().all(EnvyReport::is_empty),
        reports,
    })
}

/// Class-wise better-response dynamics. The inflow cap applies to the total
/// inflow over all classes, using the smallest `c_min` and largest Lipschitz
/// constant among classes.
pub fn better_response_multi_solve(
    mc: &MultiClassGame,
    xs0: &StackedPoint,
    policy: &RedistributionPolicy,
    cfg: &BetterResponseConfig,
) -> Result<SolveResult<StackedPoint>> {
    mc.validate()?;
    mc.check_point(xs0)?;
    policy.validate(mc.n)?;
    if !cfg.unsafe_allow_bound_violation {
        let issues = block_preconditions(mc, policy, cfg.epsilon);
        if !issues.is_empty() {
            return Err(Error::PreconditionViolated(issues));
        }
    }
    let run = run_dynamics(mc, xs0.to_blocks(), policy, cfg)?;
    let stack = |blocks: Vec<Vec<f64>>| StackedPoint {
        blocks: blocks
            .into_iter()
            .zip(&mc.gammas)
            .map(|(b, &g)| SimplexPoint::from_parts_unchecked(b, g))
            .collect(),
    };
    let x_final = stack(run.state);
    let verified = run.status == crate::solvers::Status::Converged
        && is_multiclass_inertial(mc, &x_final, cfg.verify_tol.max(cfg.envy_tol))?.inertial;
    Ok(SolveResult {
        status: run.status,
        x_final,
        iterations: run.iterations,
        gap_final: run.gap_final,
        verified,
        cycle_period: run.cycle_period,
        trajectory: run
            .trajectory
            .into_iter()
            .map(|(k, s, min_utility, gap, moved_mass)| TrajectoryRecord {
                k,
                x: stack(s),
                min_utility,
                gap,
                moved_mass,
            })
            .collect(),
    })
}

/// Stacked operator over the product of class simplexes, for the monotonicity probe.
pub struct StackedOperator<'a> {
    pub game: &'a MultiClassGame,
    pub kind: OperatorKind,
}

impl VectorOperator for StackedOperator<'_> {
    fn blocks(&self) -> Vec<(usize, f64)> {
        self.game.gammas.iter().map(|&g| (self.game.n, g)).collect()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let blocks: Vec<Vec<f64>> = x.chunks(self.game.n).map(<[f64]>::to_vec).collect();
        match self.kind {
            OperatorKind::F => stacked_operator(self.game, &blocks),
            OperatorKind::MinusU => self
                .game
                .block_utilities(&blocks)
                .into_iter()
                .flatten()
                .map(|v| -v)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{is_inertial, operator_values};
    use crate::instances::nonconvex_three_action;
    use crate::solvers::{better_response_solve, Status};

    fn twin(game: &PopulationGame, second_costs: SwitchingCosts) -> MultiClassGame {
        let half = game.gamma() / 2.0;
        MultiClassGame::new(
            vec![half, half],
            vec![
                ClassSpec { utilities: game.utilities().to_vec(), costs: game.costs().clone() },
                ClassSpec { utilities: game.utilities().to_vec(), costs: second_costs },
            ],
        )
        .unwrap()
    }

    fn stacked(blocks: &[&[f64]], mass: f64) -> StackedPoint {
        StackedPoint::new(blocks.iter().map(|b| SimplexPoint::new(b.to_vec(), mass).unwrap()).collect())
    }

    #[test]
    fn reduce_sums_blocks() {
        let xs = stacked(&[&[0.2, 0.15, 0.15], &[0.2, 0.15, 0.15]], 0.5);
        let xr = reduce(&xs).unwrap();
        for (a, b) in xr.iter().zip([0.4, 0.3, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
        let bad = StackedPoint::new(vec![
            SimplexPoint::uniform(3, 0.5),
            SimplexPoint::uniform(2, 0.5),
        ]);
        assert!(matches!(reduce(&bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_class_operator_matches() {
        let g = nonconvex_three_action();
        let mc = MultiClassGame::from_single(&g);
        let x = [0.2, 0.2, 0.6];
        let xs = stacked(&[&x], 1.0);
        assert_eq!(operator_f_multi(&mc, &xs).unwrap(), operator_values(&g, &x));
    }

    #[test]
    fn identical_classes_see_single_class_operator() {
        let g = nonconvex_three_action();
        let mc = twin(&g, g.costs().clone());
        let xs = stacked(&[&[0.2, 0.1, 0.2], &[0.2, 0.1, 0.2]], 0.5);
        let f = operator_f_multi(&mc, &xs).unwrap();
        for block in f.chunks(3) {
            for (a, b) in block.iter().zip([0.0, 0.0, 0.1]) {
                assert!((a - b).abs() < 1e-12, "{f:?}");
            }
        }
    }

    #[test]
    fn zero_costs_break_class_two() {
        let g = nonconvex_three_action();
        let xs = stacked(&[&[0.2, 0.15, 0.15], &[0.2, 0.15, 0.15]], 0.5);
        let same = twin(&g, g.costs().clone());
        assert!(is_multiclass_inertial(&same, &xs, 1e-12).unwrap().inertial);
        let free = twin(&g, SwitchingCosts::zeros(3));
        let v = is_multiclass_inertial(&free, &xs, 1e-12).unwrap();
        assert!(!v.inertial);
        assert!(v.reports[0].is_empty());
        assert!(!v.reports[1].is_empty());
    }

    #[test]
    fn single_class_dynamics_match_bitwise() {
        let g = nonconvex_three_action();
        let mc = MultiClassGame::from_single(&g);
        let x0 = SimplexPoint::new(vec![0.1, 0.1, 0.8], 1.0).unwrap();
        let policy = RedistributionPolicy::UtilityWeighted { tau: 0.09 };
        let cfg = BetterResponseConfig::new(0.01);
        let single = better_response_solve(&g, &x0, &policy, &cfg).unwrap();
        let multi =
            better_response_multi_solve(&mc, &StackedPoint::new(vec![x0]), &policy, &cfg).unwrap();
        assert_eq!(single.status, multi.status);
        assert_eq!(single.iterations, multi.iterations);
        assert_eq!(single.trajectory.len(), multi.trajectory.len());
        for (s, m) in single.trajectory.iter().zip(&multi.trajectory) {
            assert_eq!(s.x, m.x.blocks[0]);
            assert_eq!(s.min_utility.to_bits(), m.min_utility.to_bits());
        }
    }

    #[test]
    fn twin_classes_converge_to_single_class_inertial_point() {
        let g = nonconvex_three_action();
        let mc = twin(&g, g.costs().clone());
        let xs = stacked(&[&[0.05, 0.05, 0.4], &[0.05, 0.05, 0.4]], 0.5);
        let policy = RedistributionPolicy::EqualShare { tau: 0.09 };
        let r = better_response_multi_solve(&mc, &xs, &policy, &BetterResponseConfig::new(0.01)).unwrap();
        assert_eq!(r.status, Status::Converged);
        let xr = reduce(&r.x_final).unwrap();
        assert!(is_inertial(&g, &xr, 1e-9).unwrap().inertial);
    }

    #[test]
    fn unequal_masses_are_conserved() {
        let g = nonconvex_three_action();
        let mc = MultiClassGame::new(
            vec![0.3, 0.7],
            vec![
                ClassSpec { utilities: g.utilities().to_vec(), costs: g.costs().clone() },
                ClassSpec { utilities: g.utilities().to_vec(), costs: SwitchingCosts::uniform(3, 0.15) },
            ],
        )
        .unwrap();
        let xs = stacked_masses(&[(&[0.0, 0.0, 0.3], 0.3), (&[0.7, 0.0, 0.0], 0.7)]);
        let r = better_response_multi_solve(
            &mc,
            &xs,
            &RedistributionPolicy::EqualShare { tau: 0.09 },
            &BetterResponseConfig::new(0.01),
        )
        .unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.verified);
        for rec in &r.trajectory {
            for (b, g) in rec.x.blocks.iter().zip([0.3, 0.7]) {
                assert!((b.iter().sum::<f64>() - g).abs() < 1e-12);
                assert!(b.iter().all(|&v| v >= 0.0));
            }
        }
    }

    fn stacked_masses(blocks: &[(&[f64], f64)]) -> StackedPoint {
        StackedPoint::new(
            blocks
                .iter()
                .map(|(b, m)| SimplexPoint::new(b.to_vec(), *m).unwrap())
                .collect(),
        )
    }
}
