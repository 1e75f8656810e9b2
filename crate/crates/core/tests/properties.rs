use inertial_core::equilibrium::{is_inertial, is_nash, operator_f, vi_gap};
use inertial_core::game::{extend_with_exit, validate_game, PopulationGame, SwitchingCosts, UtilityModel};
use inertial_core::multiclass::{better_response_multi_solve, operator_f_multi, ClassSpec, MultiClassGame, StackedPoint};
use inertial_core::scenarios::{random_game, random_simplex_point, recommended_params, FamilySpec, GeneratorSpec};
use inertial_core::solvers::{
    better_response_solve, better_response_step, check_better_response_preconditions,
    potential_value, projection_solve, BetterResponseConfig, ProjectionConfig,
    RedistributionPolicy, UpdateMode,
};
use proptest::prelude::*;

fn ride_spec() -> GeneratorSpec {
    GeneratorSpec {
        family: FamilySpec::RideHailing { alpha_range: [30.0, 140.0], p_range: [1.5, 8.0], beta: 6.34 },
        cost_range: [5.0, 25.0],
        gamma: 1.0,
    }
}

fn any_game() -> impl Strategy<Value = PopulationGame> {
    (any::<u64>(), 2usize..9, any::<bool>()).prop_map(|(seed, n, ride)| {
        let spec = if ride { ride_spec() } else { GeneratorSpec::default() };
        random_game(seed, n, &spec).unwrap()
    })
}

fn policies(tau: f64, n: usize) -> [RedistributionPolicy; 3] {
    [
        RedistributionPolicy::EqualShare { tau },
        RedistributionPolicy::PerTarget { tau: tau.min(1.0 / (n - 1) as f64) },
        RedistributionPolicy::UtilityWeighted { tau },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn utilities_are_non_increasing_and_lipschitz(game in any_game(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        for u in game.utilities() {
            prop_assert!(u.value(lo) >= u.value(hi));
            prop_assert!((u.value(lo) - u.value(hi)).abs() <= u.lipschitz() * (hi - lo) * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn validation_is_pure(game in any_game()) {
        let before = game.clone();
        let first = validate_game(&game);
        prop_assert_eq!(&first, &validate_game(&game));
        prop_assert_eq!(before, game);
    }

    #[test]
    fn exit_round_trip(game in any_game(), u_e in -5.0f64..5.0) {
        let extended = extend_with_exit(&game, u_e);
        prop_assert_eq!(extended.without_action(game.n()), game);
    }

    #[test]
    fn operator_is_nonnegative_with_zero_minimum(game in any_game(), seed in any::<u64>()) {
        let x = random_simplex_point(seed, game.n(), game.gamma());
        let f = operator_f(&game, &x).unwrap().f;
        prop_assert!(f.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(f.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        prop_assert!(vi_gap(&game, &x).unwrap() >= 0.0);
    }

    #[test]
    fn nash_implies_inertial(game in any_game(), seed in any::<u64>()) {
        let x = random_simplex_point(seed, game.n(), game.gamma());
        if is_nash(&game, &x, 1e-9).unwrap().nash {
            prop_assert!(is_inertial(&game, &x, 1e-9).unwrap().inertial);
        }
        // The converged projection point is Nash, hence inertial.
        let r = projection_solve(&game, &x, &ProjectionConfig {
            rho: recommended_params(&game).unwrap().rho,
            record_trajectory: false,
            ..ProjectionConfig::default()
        }).unwrap();
        prop_assert!(is_inertial(&game, &r.x_final, 1e-9).unwrap().inertial);
    }

    #[test]
    fn zero_costs_collapse_to_nash(seed in any::<u64>(), n in 2usize..7) {
        let base = random_game(seed, n, &GeneratorSpec::default()).unwrap();
        let game = PopulationGame::new(base.utilities().to_vec(), SwitchingCosts::zeros(n), 1.0).unwrap();
        for k in 0..20 {
            let x = random_simplex_point(seed.wrapping_add(k), n, 1.0);
            prop_assert_eq!(
                is_inertial(&game, &x, 1e-9).unwrap().inertial,
                is_nash(&game, &x, 1e-9).unwrap().nash
            );
        }
    }

    #[test]
    fn interior_points_inertial_iff_operator_small(game in any_game(), seed in any::<u64>()) {
        let x = random_simplex_point(seed, game.n(), game.gamma());
        prop_assume!(x.iter().all(|&v| v > 1e-9));
        let fmax = operator_f(&game, &x).unwrap().f.into_iter().fold(0.0, f64::max);
        prop_assert_eq!(is_inertial(&game, &x, 1e-9).unwrap().inertial, fmax <= 1e-9);
    }

    #[test]
    fn projection_iterates_stay_on_simplex_and_climb_potential(game in any_game(), seed in any::<u64>()) {
        let x0 = random_simplex_point(seed, game.n(), game.gamma());
        let rho = recommended_params(&game).unwrap().rho;
        let r = projection_solve(&game, &x0, &ProjectionConfig { rho, max_iter: 2000, ..ProjectionConfig::default() }).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for rec in &r.trajectory {
            prop_assert!(rec.x.iter().all(|&v| v >= 0.0));
            prop_assert!((rec.x.iter().sum::<f64>() - game.gamma()).abs() <= 1e-12);
            let theta = potential_value(&game, &rec.x).unwrap();
            prop_assert!(theta >= prev - 1e-10 * prev.abs().max(1.0), "theta fell from {} to {}", prev, theta);
            prev = theta;
        }
    }

    #[test]
    fn recommended_params_meet_preconditions(game in any_game()) {
        let p = recommended_params(&game).unwrap();
        prop_assert!(p.rho < 2.0 / inertial_core::game::lipschitz_bounds(&game).global);
        let cfg = BetterResponseConfig::new(p.epsilon);
        for policy in policies(p.tau, game.n()) {
            prop_assert!(check_better_response_preconditions(&game, &policy, &cfg).is_empty());
        }
    }

    #[test]
    fn better_response_steps_only_follow_envy(game in any_game(), seed in any::<u64>(), which in 0usize..3) {
        let x = random_simplex_point(seed, game.n(), game.gamma());
        let p = recommended_params(&game).unwrap();
        let policy = policies(p.tau, game.n())[which];
        let step = better_response_step(&game, &x, &policy, &BetterResponseConfig::new(p.epsilon)).unwrap();
        for (&(i, j), &amount) in &step.transfers {
            prop_assert!(amount > 0.0);
            prop_assert!(step.envy.sets[i].contains(&j));
        }
        if step.envy.is_empty() {
            prop_assert_eq!(step.x_next.as_slice(), x.as_slice());
        }
        prop_assert!((step.x_next.iter().sum::<f64>() - game.gamma()).abs() <= 1e-12);
        prop_assert!(step.x_next.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn better_response_conserves_mass_and_lifts_minimum(game in any_game(), seed in any::<u64>(), which in 0usize..3, asynchronous in any::<bool>()) {
        let x0 = random_simplex_point(seed, game.n(), game.gamma());
        let p = recommended_params(&game).unwrap();
        let mut cfg = BetterResponseConfig::new(p.epsilon);
        if asynchronous {
            cfg.update = UpdateMode::Asynchronous { seed };
        }
        let r = better_response_solve(&game, &x0, &policies(p.tau, game.n())[which], &cfg).unwrap();
        prop_assert!(r.verified);
        for rec in &r.trajectory {
            prop_assert!((rec.x.iter().sum::<f64>() - game.gamma()).abs() <= 1e-12);
        }
        if !asynchronous {
            for w in r.trajectory.windows(2) {
                prop_assert!(w[1].min_utility >= w[0].min_utility - 1e-12);
            }
        }
    }

    #[test]
    fn multiclass_blocks_are_conserved(seed in any::<u64>(), n in 2usize..6, share in 0.1f64..0.9) {
        let g = random_game(seed, n, &GeneratorSpec::default()).unwrap();
        let h = random_game(seed ^ 0x5555, n, &GeneratorSpec::default()).unwrap();
        let gammas = vec![share, 1.0 - share];
        let mc = MultiClassGame::new(gammas.clone(), vec![
            ClassSpec { utilities: g.utilities().to_vec(), costs: g.costs().clone() },
            ClassSpec { utilities: h.utilities().to_vec(), costs: h.costs().clone() },
        ]).unwrap();
        let xs = StackedPoint::new(vec![
            random_simplex_point(seed, n, gammas[0]),
            random_simplex_point(seed.wrapping_add(1), n, gammas[1]),
        ]);
        let f = operator_f_multi(&mc, &xs).unwrap();
        for block in f.chunks(n) {
            prop_assert!(block.iter().all(|&v| v >= 0.0));
            prop_assert_eq!(block.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        }
        // Conservative shared parameters: smallest c_min, largest slope.
        let c_min = g.c_min().unwrap().min(h.c_min().unwrap());
        let l = [&g, &h].iter().map(|x| inertial_core::game::lipschitz_bounds(x).global).fold(0.0, f64::max);
        let policy = RedistributionPolicy::EqualShare { tau: 0.9 * c_min / l };
        let r = better_response_multi_solve(&mc, &xs, &policy, &BetterResponseConfig::new(0.1 * c_min / l)).unwrap();
        prop_assert!(r.verified);
        for rec in &r.trajectory {
            for (block, gamma) in rec.x.blocks.iter().zip(&gammas) {
                prop_assert!(block.iter().all(|&v| v >= 0.0));
                prop_assert!((block.iter().sum::<f64>() - gamma).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn constant_utilities_are_flat() {
    let u = UtilityModel::Constant { c: 2.0 };
    assert_eq!(u.lipschitz(), 0.0);
    assert!(u.is_non_increasing());
}
