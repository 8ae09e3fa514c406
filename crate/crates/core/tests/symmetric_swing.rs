use multistop::corpus::{random_binary_tree, random_process, random_symmetric_reward, random_tree, rng};
use multistop::{
    brute_force_value, snell_solve, solve_multi, swing_solve, symmetric_backward, Constraint, MultiReward,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn no_gap_swing_is_d_times_single(seed in any::<u64>(), depth in 1usize..=4, d in 1usize..=4) {
        let mut r = rng(seed);
        let m = random_tree(&mut r, depth, 0.2);
        let y = random_process(&mut r, &m, 10);
        let single = snell_solve(&y).value()[m.root()];
        let sol = swing_solve(&y, d, 0, m.root()).unwrap();
        prop_assert_eq!(sol.value_at_start(), d as f64 * single);
        let sym = symmetric_backward(&MultiReward::additive(y, d).unwrap(), &m, m.root()).unwrap();
        prop_assert_eq!(sym.value, d as f64 * single);
    }

    #[test]
    fn gap_two_swing_matches_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_binary_tree(&mut r, 4);
        let y = random_process(&mut r, &m, 10);
        let sol = swing_solve(&y, 2, 2, m.root()).unwrap();
        let psi = MultiReward::additive(y, 2).unwrap();
        let oracle = brute_force_value(&psi, &m, m.root(), Some(Constraint::DeltaGap(2))).unwrap();
        prop_assert_eq!(sol.value_at_start(), oracle.value);
        prop_assert!(sol.gaps_respected());
        prop_assert_eq!(sol.exercise_payoff(), sol.value_at_start());
    }

    #[test]
    fn swing_monotonicity_and_bounds(seed in any::<u64>(), depth in 2usize..=5) {
        let mut r = rng(seed);
        let m = random_tree(&mut r, depth, 0.2);
        let y = random_process(&mut r, &m, 10);
        let single = snell_solve(&y).value()[m.root()];
        for d in 1..=3 {
            for delta in 0..=depth {
                let Ok(sol) = swing_solve(&y, d, delta, m.root()) else {
                    prop_assert!((d - 1) * delta > depth);
                    continue;
                };
                let v = sol.value_at_start();
                prop_assert!(v <= d as f64 * single);
                prop_assert!(sol.gaps_respected());
                prop_assert_eq!(sol.exercise_payoff(), v);
                if let Ok(wider) = swing_solve(&y, d, delta + 1, m.root()) {
                    prop_assert!(wider.value_at_start() <= v);
                }
                if delta == 0 {
                    prop_assert!(single <= v);
                    let more = swing_solve(&y, d + 1, 0, m.root()).unwrap();
                    prop_assert!(more.value_at_start() >= v);
                }
            }
        }
    }

    #[test]
    fn symmetric_solvers_agree(seed in any::<u64>(), depth in 1usize..=3, d in 2usize..=3) {
        let mut r = rng(seed);
        let m = random_tree(&mut r, depth, 0.2);
        let psi = random_symmetric_reward(&mut r, &m, d, 10).unwrap();
        let sym = symmetric_backward(&psi, &m, m.root()).unwrap();
        let multi = solve_multi(&psi, &m, m.root()).unwrap();
        let oracle = brute_force_value(&psi, &m, m.root(), None).unwrap();
        prop_assert_eq!(sym.value, multi.value);
        prop_assert_eq!(sym.value, oracle.value);
        prop_assert_eq!(sym.tuple.value(&psi).unwrap(), sym.value);
        for (leaf, _) in m.leaves_under(m.root()) {
            let t = sym.tuple.times_at_leaf(leaf);
            prop_assert!(t.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

#[test]
fn multiplicative_reward_on_depth_three() {
    let mut r = rng(42);
    let m = random_binary_tree(&mut r, 3);
    let y = random_process(&mut r, &m, 5);
    let psi = MultiReward::multiplicative(y, 2).unwrap();
    let sym = symmetric_backward(&psi, &m, m.root()).unwrap();
    assert_eq!(sym.value, solve_multi(&psi, &m, m.root()).unwrap().value);
    assert_eq!(sym.value, brute_force_value(&psi, &m, m.root(), None).unwrap().value);
}

#[test]
fn swing_from_an_inner_node() {
    let mut r = rng(9);
    let m = random_binary_tree(&mut r, 4);
    let y = random_process(&mut r, &m, 10);
    let start = m.children(m.root())[1].0;
    let sol = swing_solve(&y, 2, 1, start).unwrap();
    let psi = MultiReward::additive(y, 2).unwrap();
    let oracle = brute_force_value(&psi, &m, start, Some(Constraint::DeltaGap(1))).unwrap();
    assert_eq!(sol.value_at_start(), oracle.value);
    assert!(swing_solve(sol.payoff(), 2, 4, start).is_err());
}

#[test]
fn extra_right_can_cost_value_before_the_horizon() {
    // Every right must fit before T with gaps of δ, so a second right forces
    // the first one to time 0 and the payoff at time 1 is lost.
    let m = std::sync::Arc::new(multistop::build_binomial_lattice(2, 0.5).unwrap());
    let y = multistop::NodeProcess::from_fn(m.clone(), |n| if m.time(n) == 1 { 10.0 } else { 0.0 }).unwrap();
    let one = swing_solve(&y, 1, 2, m.root()).unwrap().value_at_start();
    let two = swing_solve(&y, 2, 2, m.root()).unwrap().value_at_start();
    assert_eq!(one, 10.0);
    assert_eq!(two, 0.0);
    assert!(two < snell_solve(&y).value()[m.root()]);
}
