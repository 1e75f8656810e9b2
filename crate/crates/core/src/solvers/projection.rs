use serde::Serialize;

use super::{
    min_of, norm2_diff, project_simplex, should_record, PreconditionIssue, SolveResult, Status,
    TrajectoryRecord,
};
use crate::equilibrium::{gap_from, is_inertial, is_nash, operator_from_utilities};
use crate::error::{Error, Result};
use crate::game::{ensure_valid, lipschitz_bounds, utilities_at, PopulationGame, SimplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionConfig {
    pub rho: f64,
    /// Stop once `||x(k+1) - x(k)||_2 <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Refuse to run unless `rho < 2/L` and every utility is non-increasing.
    pub enforce_guarantee: bool,
    #[serde(skip)]
    pub record_trajectory: bool,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            tol: 1e-6,
            max_iter: 1_000_000,
            enforce_guarantee: true,
            record_trajectory: true,
        }
    }
}

fn preconditions(game: &PopulationGame, cfg: &ProjectionConfig) -> Vec<PreconditionIssue> {
    let mut issues = Vec::new();
    if !(cfg.rho > 0.0) {
        issues.push(PreconditionIssue::NonPositiveStep { rho: cfg.rho });
    }
    if !cfg.enforce_guarantee {
        return issues;
    }
    let l = lipschitz_bounds(game).global;
    if l > 0.0 && cfg.rho >= 2.0 / l {
        issues.push(PreconditionIssue::StepTooLarge {
            rho: cfg.rho,
            limit: 2.0 / l,
        });
    }
    for (action, u) in game.utilities().iter().enumerate() {
        if !u.is_non_increasing() {
            issues.push(PreconditionIssue::IncreasingUtility { action });
        }
    }
    issues
}

/// Iterates `x <- Proj_S[x + rho u(x)]` until the step norm drops to `tol`
/// and the iterate passes a Nash check at tolerance `10 tol max(1, L)`.
///
/// `iterations` is the index of the accepted iterate.
pub fn projection_solve(
    game: &PopulationGame,
    x0: &SimplexPoint,
    cfg: &ProjectionConfig,
) -> Result<SolveResult<SimplexPoint>> {
    ensure_valid(game)?;
    game.check_point(x0)?;
    let issues = preconditions(game, cfg);
    if !issues.is_empty() {
        return Err(Error::PreconditionViolated(issues));
    }
    let l = lipschitz_bounds(game).global;
    let verify_tol = 10.0 * cfg.tol * l.max(1.0);
    let gamma = game.gamma();

    let metrics = |x: &[f64]| {
        let u = utilities_at(game.utilities(), x);
        let f = operator_from_utilities(&u, game.costs());
        (min_of(&u), gap_from(&f, x, gamma))
    };

    let mut x = SimplexPoint::from_parts_unchecked(x0.to_vec(), gamma);
    let mut trajectory = Vec::new();
    if cfg.record_trajectory {
        let (min_utility, gap) = metrics(&x);
        trajectory.push(TrajectoryRecord { k: 0, x: x.clone(), min_utility, gap, moved_mass: 0.0 });
    }

    // `x(k)` is accepted once the update it produces is at most `tol` long.
    let mut k = 0;
    let status = loop {
        let u = utilities_at(game.utilities(), &x);
        let shifted: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi + cfg.rho * ui).collect();
        let next = project_simplex(&shifted, gamma);
        if norm2_diff(&next, &x) <= cfg.tol && is_nash(game, &x, verify_tol)?.nash {
            break Status::Converged;
        }
        if k >= cfg.max_iter {
            break Status::MaxIter;
        }
        k += 1;
        if cfg.record_trajectory && should_record(k) {
            let (min_utility, gap) = metrics(&next);
            let moved_mass = next.iter().zip(x.iter()).map(|(a, b)| (a - b).abs()).sum();
            trajectory.push(TrajectoryRecord { k, x: next.clone(), min_utility, gap, moved_mass });
        }
        x = next;
    };

    if cfg.record_trajectory && trajectory.last().map(|r| r.k) != Some(k) {
        let (min_utility, gap) = metrics(&x);
        trajectory.push(TrajectoryRecord { k, x: x.clone(), min_utility, gap, moved_mass: 0.0 });
    }
    let (_, gap_final) = metrics(&x);
    let verified = status == Status::Converged && is_inertial(game, &x, verify_tol)?.inertial;
    Ok(SolveResult {
        status,
        verified,
        x_final: x,
        iterations: k,
        gap_final,
        cycle_period: None,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::nonconvex_three_action;

    fn unit_step() -> ProjectionConfig {
        ProjectionConfig { rho: 1.0, ..ProjectionConfig::default() }
    }

    #[test]
    fn one_step_from_case_one_start() {
        let g = nonconvex_three_action();
        let x0 = SimplexPoint::new(vec![0.4, 0.2, 0.4], 1.0).unwrap();
        let r = projection_solve(&g, &x0, &unit_step()).unwrap();
        assert_eq!(r.status, Status::Converged);
        let x1 = &r.trajectory[1].x;
        for (a, b) in x1.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x_final, *x1);
        assert!(r.verified);
    }

    #[test]
    fn nash_point_is_fixed() {
        let g = nonconvex_three_action();
        let x0 = SimplexPoint::new(vec![0.4, 0.4, 0.2], 1.0).unwrap();
        let r = projection_solve(&g, &x0, &unit_step()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.x_final, x0);
    }

    #[test]
    fn guarantee_rejects_large_step() {
        let g = nonconvex_three_action();
        let x0 = SimplexPoint::uniform(3, 1.0);
        let cfg = ProjectionConfig { rho: 2.5, ..ProjectionConfig::default() };
        match projection_solve(&g, &x0, &cfg) {
            Err(Error::PreconditionViolated(issues)) => {
                assert!(matches!(issues[0], PreconditionIssue::StepTooLarge { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
        let cfg = ProjectionConfig { enforce_guarantee: false, ..cfg };
        assert!(projection_solve(&g, &x0, &cfg).is_ok());
    }
}
