mod common;

use std::sync::Arc;

use hfnav::env::{Action, WorldMap};
use hfnav::planner::Planner;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{exact_bfs, random_free_pose, sampled_clearance, toy_map};

#[test]
fn swept_collision_agrees_with_millimetre_sampling() {
    let map = WorldMap::benchmark();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut blocked, mut open) = (0, 0);
    for _ in 0..10_000 {
        let pose = random_free_pose(&map, &mut rng);
        let collided = map.apply(pose, Action::Forward).collided;
        let c = sampled_clearance(&map, &pose);
        if collided {
            blocked += 1;
            assert!(c < map.robot_radius + 1e-3, "blocked move with sampled clearance {c} at {pose:?}");
        } else {
            open += 1;
            assert!(c >= map.robot_radius - 1e-12, "free move grazes at {c} from {pose:?}");
        }
    }
    assert!(blocked > 100 && open > 100, "blocked {blocked} open {open}");
}

#[test]
fn planner_matches_exact_search_on_toy_map() {
    let map = Arc::new(toy_map());
    let planner = Planner::new(Arc::clone(&map));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut exact, mut total) = (0, 0);
    while total < 200 {
        let pose = random_free_pose(&map, &mut rng);
        let Some(truth) = exact_bfs(&map, pose, 15) else { continue };
        let got = planner.shortest_steps(&pose).unwrap();
        total += 1;
        assert!(got.abs_diff(truth) <= 1, "planner {got} vs exact {truth} at {pose:?}");
        exact += usize::from(got == truth);
    }
    assert!(exact >= 196, "only {exact}/200 exact");
}

#[test]
fn optimal_actions_follow_the_cost_to_go() {
    let map = Arc::new(WorldMap::benchmark());
    let planner = Planner::new(Arc::clone(&map));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut consistent, mut total) = (0, 0);
    while total < 1000 {
        let pose = random_free_pose(&map, &mut rng);
        let Ok(plan) = planner.plan(&pose) else { continue };
        if plan.steps == 0 {
            continue;
        }
        total += 1;
        let mut ok = true;
        for a in Action::ALL {
            let t = map.apply(pose, a);
            if t.collided {
                assert!(!plan.optimal_actions.contains(a), "colliding action marked optimal at {pose:?}");
                continue;
            }
            let next = planner.shortest_steps(&t.pose).unwrap();
            assert!(next + 1 >= plan.steps.saturating_sub(1), "cost drops by more than one step");
            if plan.optimal_actions.contains(a) {
                ok &= next + 1 == plan.steps;
            } else {
                ok &= next + 1 >= plan.steps;
            }
        }
        consistent += usize::from(ok);
    }
    assert!(consistent >= 980, "only {consistent}/1000 poses consistent");
}
