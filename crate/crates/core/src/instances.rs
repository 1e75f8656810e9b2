//! Small hand-built games used across tests, benches and the CLI.

use crate::game::{PopulationGame, SwitchingCosts, UtilityModel};

/// Three actions with affine utilities `1.2 - x1`, `1.2 - x2`, `1 - x3` and an
/// asymmetric cost matrix. Its inertial equilibrium set is non-convex and
/// contains the unique Nash point `[0.4, 0.4, 0.2]`.
pub fn nonconvex_three_action() -> PopulationGame {
    let utilities = vec![
        UtilityModel::Affine { a: 1.2, b: 1.0 },
        UtilityModel::Affine { a: 1.2, b: 1.0 },
        UtilityModel::Affine { a: 1.0, b: 1.0 },
    ];
    let costs = SwitchingCosts::from_rows(vec![
        vec![0.0, 0.2, 0.3],
        vec![1.0, 0.0, 0.8],
        vec![0.1, 1.2, 0.0],
    ])
    .expect("square");
    PopulationGame::new(utilities, costs, 1.0).expect("consistent shape")
}

/// Two symmetric actions `u_i = 1 - x_i` with `c = 0.5` both ways, so
/// `c_min / L = 0.5`. Moving more than that per step makes the dynamics
/// oscillate.
pub fn two_action_overshoot() -> PopulationGame {
    let utilities = vec![UtilityModel::Affine { a: 1.0, b: 1.0 }; 2];
    PopulationGame::new(utilities, SwitchingCosts::uniform(2, 0.5), 1.0).expect("consistent shape")
}
