//! Equilibrium certificates: envy sets, Nash and inertial verdicts, the
//! switching-cost VI operator, its gap function and finite-difference
//! Jacobian.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{utilities_at, PopulationGame, SwitchingCosts};

/// Default tolerance on envy and on "positive mass".
pub const DEFAULT_TOL: f64 = 1e-9;

/// Ties within this distance of the row maximum count as maximizers.
const ARGMAX_TOL: f64 = 1e-12;

/// Agents on `from` strictly prefer `to` net of the switching cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvyWitness {
    pub from: usize,
    pub to: usize,
    pub u_from: f64,
    pub u_to: f64,
    pub cost: f64,
}

impl EnvyWitness {
    /// `u_to - cost - u_from`, positive for a genuine envy edge.
    pub fn margin(&self) -> f64 {
        self.u_to - self.cost - self.u_from
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EnvyReport {
    /// `sets[i]` lists the actions envied by agents on `i`, ascending.
    pub sets: Vec<Vec<usize>>,
    /// One entry per envy edge, ordered by `(from, to)`.
    pub witnesses: Vec<EnvyWitness>,
}

impl EnvyReport {
    pub fn is_empty(&self) -> bool {
        self.witnesses.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.witnesses.len()
    }

    pub fn first_witness(&self) -> Option<&EnvyWitness> {
        self.witnesses.first()
    }

    pub fn witness(&self, from: usize, to: usize) -> Option<&EnvyWitness> {
        self.witnesses.iter().find(|w| w.from == from && w.to == to)
    }
}

/// Envy sets from precomputed utilities. `masses` decides which actions are
/// occupied; it is the class block in the multi-class setting.
pub(crate) fn envy_from_utilities(
    u: &[f64],
    masses: &[f64],
    costs: &SwitchingCosts,
    tol: f64,
) -> EnvyReport {
    envy_with_mass_floor(u, masses, costs, tol, tol)
}

/// As [`envy_from_utilities`], but actions count as occupied only above `mass_floor`.
pub(crate) fn envy_with_mass_floor(
    u: &[f64],
    masses: &[f64],
    costs: &SwitchingCosts,
    tol: f64,
    mass_floor: f64,
) -> EnvyReport {
    let n = u.len();
    let mut sets = vec![Vec::new(); n];
    let mut witnesses = Vec::new();
    for i in 0..n {
        if masses[i] <= mass_floor {
            continue;
        }
        for j in 0..n {
            let cost = costs.get(i, j);
            if u[i] < u[j] - cost - tol {
                sets[i].push(j);
                witnesses.push(EnvyWitness {
                    from: i,
                    to: j,
                    u_from: u[i],
                    u_to: u[j],
                    cost,
                });
            }
        }
    }
    EnvyReport { sets, witnesses }
}

pub fn envy_sets(game: &PopulationGame, x: &[f64], tol: f64) -> Result<EnvyReport> {
    game.check_point(x)?;
    let u = utilities_at(game.utilities(), x);
    Ok(envy_from_utilities(&u, x, game.costs(), tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InertialVerdict {
    pub inertial: bool,
    pub report: EnvyReport,
}

pub fn is_inertial(game: &PopulationGame, x: &[f64], tol: f64) -> Result<InertialVerdict> {
    let report = envy_sets(game, x, tol)?;
    Ok(InertialVerdict {
        inertial: report.is_empty(),
        report,
    })
}

/// A used action `from` whose utility falls short of the best action `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NashWitness {
    pub from: usize,
    pub to: usize,
    pub u_from: f64,
    pub u_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashVerdict {
    pub nash: bool,
    pub witness: Option<NashWitness>,
}

pub fn is_nash(game: &PopulationGame, x: &[f64], tol: f64) -> Result<NashVerdict> {
    game.check_point(x)?;
    let u = utilities_at(game.utilities(), x);
    let best = argmax(&u);
    let witness = (0..u.len())
        .find(|&i| x[i] > tol && u[i] < u[best] - tol)
        .map(|i| NashWitness {
            from: i,
            to: best,
            u_from: u[i],
            u_to: u[best],
        });
    Ok(NashVerdict {
        nash: witness.is_none(),
        witness,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &vi) in v.iter().enumerate() {
        if vi > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorEval {
    /// `F_i(x) = max_j (u_j - u_i - c_ij)`.
    pub f: Vec<f64>,
    /// Maximizing `j` for each row, within `1e-12` of the maximum.
    pub argmax_sets: Vec<Vec<usize>>,
    pub gap: f64,
}

/// `F` from precomputed utilities.
pub(crate) fn operator_from_utilities(u: &[f64], costs: &SwitchingCosts) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            (0..u.len())
                .map(|j| u[j] - u[i] - costs.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Evaluates `F` anywhere in the nonnegative orthant, not only on the simplex.
pub(crate) fn operator_values(game: &PopulationGame, x: &[f64]) -> Vec<f64> {
    operator_from_utilities(&utilities_at(game.utilities(), x), game.costs())
}

pub fn operator_f(game: &PopulationGame, x: &[f64]) -> Result<OperatorEval> {
    game.check_point(x)?;
    let u = utilities_at(game.utilities(), x);
    let f = operator_from_utilities(&u, game.costs());
    let argmax_sets = (0..u.len())
        .map(|i| {
            (0..u.len())
                .filter(|&j| u[j] - u[i] - game.costs().get(i, j) >= f[i] - ARGMAX_TOL)
                .collect()
        })
        .collect();
    let gap = gap_from(&f, x, game.gamma());
    Ok(OperatorEval {
        f,
        argmax_sets,
        gap,
    })
}

/// `F(x)^T x - mass * min_i F_i(x)`: the VI residual `max_y F(x)^T (x - y)`
/// over the simplex, attained at a vertex.
pub(crate) fn gap_from(f: &[f64], x: &[f64], mass: f64) -> f64 {
    let dot: f64 = f.iter().zip(x).map(|(a, b)| a * b).sum();
    let min = f.iter().copied().fold(f64::INFINITY, f64::min);
    dot - mass * min
}

pub fn vi_gap(game: &PopulationGame, x: &[f64]) -> Result<f64> {
    game.check_point(x)?;
    Ok(gap_from(&operator_values(game, x), x, game.gamma()))
}

/// Central-difference Jacobian of `F` at `x`; row `i` is `∇F_i`.
pub fn jacobian_fd(game: &PopulationGame, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    game.check_point(x)?;
    central_jacobian(x, h, |p| operator_values(game, p))
}

pub(crate) fn central_jacobian<G>(x: &[f64], h: f64, eval: G) -> Result<DMatrix<f64>>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    if let Some(index) = x.iter().position(|&xi| xi - h < 0.0) {
        return Err(Error::StepTooLarge { index, h });
    }
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for k in 0..n {
        probe[k] = x[k] + h;
        let plus = eval(&probe);
        probe[k] = x[k] - h;
        let minus = eval(&probe);
        probe[k] = x[k];
        for i in 0..n {
            jac[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Smallest eigenvalue of `J + J^T`.
pub fn symmetric_part_min_eigenvalue(jac: &DMatrix<f64>) -> f64 {
    let sym = jac + jac.transpose();
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{SwitchingCosts, UtilityModel};
    use crate::instances::nonconvex_three_action;

    #[test]
    fn envy_at_case_one_start() {
        let g = nonconvex_three_action();
        let r = envy_sets(&g, &[0.4, 0.2, 0.4], DEFAULT_TOL).unwrap();
        assert_eq!(r.sets, vec![vec![], vec![], vec![0]]);
        let w = r.first_witness().unwrap();
        assert_eq!((w.from, w.to), (2, 0));
        assert!((w.u_from - 0.6).abs() < 1e-12);
        assert!((w.u_to - w.cost - 0.7).abs() < 1e-12);
        assert!((w.margin() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_actions_envy_nobody() {
        let g = nonconvex_three_action();
        // u_3 = 1 is far above the others, but nobody sits on action 1.
        let r = envy_sets(&g, &[0.0, 0.0, 1.0], DEFAULT_TOL).unwrap();
        assert!(r.sets[0].is_empty() && r.sets[1].is_empty());
    }

    #[test]
    fn verdict_battery() {
        let g = nonconvex_three_action();
        assert!(is_inertial(&g, &[0.4, 0.3, 0.3], DEFAULT_TOL).unwrap().inertial);
        assert!(!is_nash(&g, &[0.4, 0.3, 0.3], DEFAULT_TOL).unwrap().nash);
        assert!(is_inertial(&g, &[0.05, 0.95, 0.0], DEFAULT_TOL).unwrap().inertial);
        assert!(is_nash(&g, &[0.4, 0.4, 0.2], DEFAULT_TOL).unwrap().nash);
        let v = is_inertial(&g, &[0.4, 0.2, 0.4], DEFAULT_TOL).unwrap();
        assert!(!v.inertial);
        let w = v.report.first_witness().unwrap();
        assert_eq!((w.from, w.to), (2, 0));
    }

    #[test]
    fn nash_witness_names_best_action() {
        let g = nonconvex_three_action();
        let v = is_nash(&g, &[0.4, 0.3, 0.3], DEFAULT_TOL).unwrap();
        let w = v.witness.unwrap();
        // u = [0.8, 0.9, 0.7]: the first used action below the best is action 1.
        assert_eq!((w.from, w.to), (0, 1));
        assert!((w.u_from - 0.8).abs() < 1e-12);
    }

    #[test]
    fn constant_equal_utilities_are_always_nash() {
        let g = PopulationGame::new(
            vec![UtilityModel::Constant { c: 2.0 }; 3],
            SwitchingCosts::uniform(3, 0.1),
            1.0,
        )
        .unwrap();
        assert!(is_nash(&g, &[0.2, 0.5, 0.3], DEFAULT_TOL).unwrap().nash);
    }

    #[test]
    fn operator_values_by_hand() {
        let g = nonconvex_three_action();
        let e = operator_f(&g, &[0.2, 0.2, 0.6]).unwrap();
        let expect = [0.0, 0.0, 0.5];
        for (a, b) in e.f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(e.argmax_sets[2], vec![0]);
        assert_eq!(e.argmax_sets[0], vec![0]);

        let e = operator_f(&g, &[0.4, 0.4, 0.2]).unwrap();
        assert!(e.f.iter().all(|v| v.abs() < 1e-12));
        assert!(e.gap.abs() < 1e-12);
    }

    #[test]
    fn gap_by_hand() {
        let g = nonconvex_three_action();
        assert!((vi_gap(&g, &[0.4, 0.2, 0.4]).unwrap() - 0.04).abs() < 1e-12);
        assert!(vi_gap(&g, &[0.4, 0.4, 0.2]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn jacobian_symmetric_part_is_indefinite() {
        let g = nonconvex_three_action();
        let j = jacobian_fd(&g, &[0.2, 0.2, 0.6], 1e-6).unwrap();
        let s = &j + j.transpose();
        let expect = [[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 2.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((s[(r, c)] - expect[r][c]).abs() < 1e-6);
            }
        }
        let min = symmetric_part_min_eigenvalue(&j);
        assert!((min - (1.0 - 2f64.sqrt())).abs() < 1e-6);
    }

    #[test]
    fn jacobian_rejects_boundary_step() {
        let g = nonconvex_three_action();
        assert!(matches!(
            jacobian_fd(&g, &[0.0, 0.5, 0.5], 1e-6),
            Err(Error::StepTooLarge { index: 0, .. })
        ));
    }

    #[test]
    fn jacobian_of_constant_game_vanishes() {
        let g = PopulationGame::new(
            vec![UtilityModel::Constant { c: 1.0 }, UtilityModel::Constant { c: 3.0 }],
            SwitchingCosts::uniform(2, 0.5),
            1.0,
        )
        .unwrap();
        let j = jacobian_fd(&g, &[0.5, 0.5], 1e-6).unwrap();
        assert!(j.iter().all(|v| *v == 0.0));
    }
}
