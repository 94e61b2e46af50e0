//! Randomized invariants of the scoring, timeline, operators and solvers.

mod common;

use std::cmp::Ordering;
use std::time::Instant;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rvrp::aco::{
    construct_assignment, deposit, evaporate, init_pheromones, run_tsp_aco, run_vrp_aco, score_factor, walk_is_visible,
    AcoParams, AcoTsp, AcoTspParams, PHEROMONE_FLOOR,
};
use rvrp::baselines::{random_solution, savings_construct, tabu_search_observed, TabuParams};
use rvrp::distance::TravelMatrix;
use rvrp::ga::{
    is_precedence_valid, run_vrp_ga, run_vrp_ga_observed, tsp_crossover, tsp_mutate, vrp_crossover, GaParams, GaTsp,
    TspCrossover, TspMutator, VrpCrossover,
};
use rvrp::harness::{solve, Algorithm, SolveOptions, PAUSE_WINDOWS};
use rvrp::model::{check_solution, Problem, Solution, StopVisit};
use rvrp::score::{compare, evaluate_solution, Score, NOT_EVALUATED};
use rvrp::solver::rng_from;
use rvrp::timeline::schedule_tour;

fn level() -> impl Strategy<Value = i64> {
    prop_oneof![9 => 0i64..5, 1 => Just(NOT_EVALUATED)]
}

fn score() -> impl Strategy<Value = Score> {
    prop::array::uniform6(level()).prop_map(Score::new)
}

fn sorted_stops(chain: &[StopVisit]) -> Vec<usize> {
    let mut s: Vec<usize> = chain.iter().map(|v| v.stop).collect();
    s.sort_unstable();
    s
}

fn small_problem(seed: u64, orders: usize, vehicles: usize) -> Problem {
    random_problem(
        &Gen {
            orders,
            vehicles,
            capacity: 4,
            windows: true,
            pickup_options: 2,
            pauses: PAUSE_WINDOWS.to_vec(),
            split_prob: 0.3,
            can_wait_prob: 0.5,
            ..Gen::default()
        },
        seed,
    )
}

fn without_windows(p: &Problem) -> Problem {
    let mut inst = p.instance().clone();
    for o in &mut inst.orders {
        o.tw_pickup = None;
        o.tw_delivery = None;
    }
    let m = TravelMatrix::build_euclidean(&inst.locations, 13.89).unwrap();
    Problem::new(inst, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn compare_is_a_total_order(a in score(), b in score(), c in score()) {
        let ab = compare(&a, &b);
        prop_assert_eq!(ab, compare(&b, &a).reverse());
        prop_assert_eq!(ab == Ordering::Equal, a == b);
        if ab != Ordering::Greater && compare(&b, &c) != Ordering::Greater {
            prop_assert_ne!(compare(&a, &c), Ordering::Greater);
        }
    }

    #[test]
    fn feasible_beats_hard_faults(s1 in 0i64..1_000_000, s2 in 0i64..1_000_000, h in 1i64..100) {
        let good = Score::new([0, 0, 0, s1, s2, 0]);
        prop_assert_eq!(compare(&good, &Score::infeasible(h, 0)), Ordering::Less);
        prop_assert_eq!(compare(&good, &Score::infeasible(0, h)), Ordering::Less);
    }

    #[test]
    fn score_factor_is_a_fraction(ws in 0i64..1000, spread in 0i64..1000, t in 0.0f64..=1.0) {
        let bs = ws - spread;
        let s = bs + (spread as f64 * t) as i64;
        let f = score_factor(ws, bs, s);
        prop_assert!((0.0..=1.0).contains(&f), "{}", f);
    }

    #[test]
    fn euclidean_matrix_is_symmetric(seed in any::<u64>()) {
        let p = small_problem(seed, 3, 2);
        let m = p.matrix();
        for i in 0..m.len() {
            prop_assert_eq!(m.dist(i, i), 0);
            for j in 0..m.len() {
                prop_assert_eq!(m.dist(i, j), m.dist(j, i));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn tsp_operators_permute_the_chain(seed in any::<u64>()) {
        let p = small_problem(seed, 5, 1);
        let mut rng = rng_from(seed);
        let stops = stops_of(&p, &(0..5).collect::<Vec<_>>());
        let a = random_chain(&p, 0, &stops, &mut rng);
        let b = random_chain(&p, 0, &stops, &mut rng);
        let mut outs: Vec<Vec<StopVisit>> = TspCrossover::ALL.iter().map(|&k| tsp_crossover(&p, k, &a, &b, &mut rng)).collect();
        outs.extend(TspMutator::ALL.iter().filter_map(|&k| tsp_mutate(&p, 0, k, &a, &mut rng)));
        for out in outs {
            prop_assert_eq!(sorted_stops(&out), sorted_stops(&a));
            prop_assert_eq!(out.first(), a.first());
            prop_assert!(is_precedence_valid(&p, &out));
        }
    }

    #[test]
    fn vrp_crossover_assigns_each_order_once(seed in any::<u64>()) {
        let p = small_problem(seed, 8, 3);
        let mut rng = rng_from(seed);
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut asg = vec![Vec::new(); 3];
            for o in 0..8 {
                asg[rng.gen_range(0..3)].push(o);
            }
            asg
        };
        let (x, y) = (pick(&mut rng), pick(&mut rng));
        for kind in VrpCrossover::ALL {
            let out = vrp_crossover(&p, kind, &x, &y, rng.gen_bool(0.5), &mut rng);
            let mut all: Vec<usize> = out.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(out.len(), 3);
            prop_assert_eq!(all, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn schedules_respect_pauses(seed in any::<u64>(), n in 1usize..=4) {
        let p = small_problem(seed, 4, 1);
        let chain = random_chain(&p, 0, &stops_of(&p, &(0..n).collect::<Vec<_>>()), &mut rng_from(seed));
        let bad = pause_violations(&p, 0, &chain);
        prop_assert!(bad.is_empty(), "{:?}", bad);
        let tour = schedule_tour(&p, 0, &chain);
        for v in &tour.visits {
            prop_assert!(v.arrival <= v.service_start && v.service_start <= v.service_end);
        }
    }

    #[test]
    fn lateness_matches_grid_oracle(seed in any::<u64>(), n in 1usize..=3, pauses in 0usize..=2, slack in 0i64..=7200) {
        let g = Gen {
            orders: 3,
            side_m: 15_000.0,
            windows: true,
            window_open: (8 * 3600, 13 * 3600),
            window_width: (600, 2 * 3600),
            service: (0, 1800),
            start_window: (7 * 3600, 7 * 3600 + slack),
            pauses: PAUSE_WINDOWS[..pauses].to_vec(),
            split_prob: 0.5,
            can_wait_prob: 0.5,
            ..Gen::default()
        };
        let p = random_problem(&g, seed);
        let chain = shuffled_chain(&p, 0, &stops_of(&p, &(0..n).collect::<Vec<_>>()), &mut rng_from(seed));
        prop_assert_eq!(schedule_tour(&p, 0, &chain).tw_penalty, grid_min_lateness(&p, 0, &chain));
    }

    #[test]
    fn no_windows_no_lateness(seed in any::<u64>(), n in 1usize..=4) {
        let p = without_windows(&small_problem(seed, 4, 1));
        let chain = shuffled_chain(&p, 0, &stops_of(&p, &(0..n).collect::<Vec<_>>()), &mut rng_from(seed));
        prop_assert_eq!(schedule_tour(&p, 0, &chain).tw_penalty, 0);
    }

    #[test]
    fn aco_walks_keep_precedence(seed in any::<u64>()) {
        let p = small_problem(seed, 4, 1);
        let stops = stops_of(&p, &(0..4).collect::<Vec<_>>());
        let params = AcoTspParams { max_walks: 5, ..AcoTspParams::default() };
        let chain = run_tsp_aco(&p, 0, &stops, &params, &mut rng_from(seed));
        prop_assert_eq!(sorted_stops(&chain[1..chain.len() - 1]), { let mut s = stops.clone(); s.sort_unstable(); s });
        prop_assert!(is_precedence_valid(&p, &chain));
        let mut left = stops.clone();
        for v in &chain[1..chain.len() - 1] {
            prop_assert!(walk_is_visible(&p, v.stop, &left));
            left.retain(|&s| s != v.stop);
        }
    }

    #[test]
    fn pheromones_stay_positive(seed in any::<u64>(), rounds in 1usize..30) {
        let p = small_problem(seed, 5, 2);
        let mut rng = rng_from(seed);
        let mut state = init_pheromones(&p, 4);
        for _ in 0..rounds {
            let asg = construct_assignment(&p, &state, &mut rng, true);
            let mut all: Vec<usize> = asg.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..5).collect::<Vec<_>>());
            let ev = evaluate_solution(&p, random_solution(&p, &mut rng));
            state.try_add(&ev);
            deposit(&mut state, &ev);
            evaporate(&mut state, &mut rng, 1.0, 0.5);
            prop_assert!(state.vehicle_stop.iter().chain(&state.stop_stop).all(|&t| t >= PHEROMONE_FLOOR));
            prop_assert!(state.best_set.len() <= state.best_set_size);
            prop_assert!(state.best_set.windows(2).all(|w| w[0].score <= w[1].score));
        }
    }
}

fn monotone(traj: &[(f64, Score)]) -> bool {
    traj.windows(2).all(|w| w[0].0 <= w[1].0 && w[1].1 <= w[0].1)
}

fn valid_and_recomputable(p: &Problem, ev: &rvrp::score::EvaluatedSolution) -> Result<(), String> {
    check_solution(p, &ev.solution)?;
    let again = evaluate_solution(p, Solution::from_chains(ev.solution.chains.clone()));
    if again.score != ev.score {
        return Err(format!("{} rescored as {}", ev.score, again.score));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn solver_trajectories_improve_and_results_rescore(seed in any::<u64>()) {
        let p = small_problem(seed, 6, 2);
        let gp = GaParams { max_generations: Some(15), max_runtime: 1e6, rng_seed: seed, ..GaParams::default() };
        let mut traj = Vec::new();
        let ga = run_vrp_ga_observed(&p, &gp, &GaTsp(gp.tsp.clone()), &mut |t, s| traj.push((t, *s)));
        prop_assert!(monotone(&traj));
        prop_assert_eq!(traj.last().map(|t| t.1), Some(ga.score));
        prop_assert_eq!(valid_and_recomputable(&p, &ga), Ok(()));

        let tp = TabuParams { max_iterations: Some(100), max_runtime: 1e6, rng_seed: seed, ..TabuParams::default() };
        let mut traj = Vec::new();
        let tabu = tabu_search_observed(&p, random_solution(&p, &mut rng_from(seed)), &tp, &mut |t, s| traj.push((t, *s)));
        prop_assert!(monotone(&traj));
        prop_assert_eq!(valid_and_recomputable(&p, &tabu), Ok(()));

        let ap = AcoParams { max_iterations: Some(15), max_runtime: 1e6, rng_seed: seed, ..AcoParams::default() };
        let aco = run_vrp_aco(&p, &ap, &AcoTsp(ap.tsp.clone()));
        prop_assert_eq!(valid_and_recomputable(&p, &aco), Ok(()));

        let sv = evaluate_solution(&p, savings_construct(&p));
        prop_assert_eq!(valid_and_recomputable(&p, &sv), Ok(()));
    }

    #[test]
    fn ga_is_seed_deterministic(seed in any::<u64>()) {
        let p = small_problem(seed, 5, 2);
        let gp = GaParams { max_generations: Some(10), max_runtime: 1e6, rng_seed: seed, ..GaParams::default() };
        let a = run_vrp_ga(&p, &gp, &GaTsp(gp.tsp.clone()));
        let b = run_vrp_ga(&p, &gp, &GaTsp(gp.tsp.clone()));
        prop_assert_eq!(a.solution, b.solution);
        prop_assert_eq!(a.score, b.score);
    }
}

#[test]
fn solve_honours_the_budget() {
    let p = random_problem(
        &Gen {
            orders: 40,
            vehicles: 4,
            capacity: 12,
            windows: true,
            pauses: PAUSE_WINDOWS.to_vec(),
            ..Gen::default()
        },
        3,
    );
    for algo in [Algorithm::Ga, Algorithm::Aco, Algorithm::Tabu] {
        let start = Instant::now();
        let out = solve(&p, algo, SolveOptions { budget: 5.0, seed: 1, allow_huge: false }).unwrap();
        let wall = start.elapsed().as_secs_f64();
        assert!(wall <= 6.0, "{algo} took {wall:.2}s");
        assert!(monotone(&out.trajectory));
    }
}
