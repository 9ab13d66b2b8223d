#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use hfnav::env::{Action, Goal, Heading, Pose, Rect, StartSpec, WorldMap, STEP_LENGTH};
use rand::Rng;

/// 3 × 3 m room with a square pillar between the lower-left area and the goal.
pub fn toy_map() -> WorldMap {
    WorldMap {
        width: 3.0,
        height: 3.0,
        robot_radius: 0.25,
        laser_max_range: 5.0,
        obstacles: vec![Rect::new(1.2, 1.2, 1.8, 1.8)],
        goal: Goal { x: 2.4, y: 2.4, radius: 0.4 },
        start: StartSpec { x: 0.5, y: 0.5, yaw: 0.0, variable: false, square_side: 0.2 },
    }
}

/// Twice the heading unit vector, as `(a, b)` pairs meaning `a + b·√3`.
const UNIT2: [[i32; 4]; 12] = [
    [2, 0, 0, 0],
    [0, 1, 1, 0],
    [1, 0, 0, 1],
    [0, 0, 2, 0],
    [-1, 0, 0, 1],
    [0, -1, 1, 0],
    [-2, 0, 0, 0],
    [0, -1, -1, 0],
    [-1, 0, 0, -1],
    [0, 0, -2, 0],
    [1, 0, 0, -1],
    [0, 1, -1, 0],
];

/// Breadth-first search over the exact pose graph. Positions are kept as
/// offsets in `ℤ[√3]` from the query pose so identical points merge no
/// matter how the floating-point sums were ordered. Returns `None` when the
/// goal is not reached within `max_depth` actions.
pub fn exact_bfs(map: &WorldMap, start: Pose, max_depth: u32) -> Option<u32> {
    type Key = ([i32; 4], u8);
    if map.at_goal(start.x, start.y) {
        return Some(0);
    }
    let mut seen: HashSet<Key> = HashSet::new();
    let mut queue: VecDeque<(Key, Pose, u32)> = VecDeque::new();
    let k0 = ([0; 4], start.heading.sector());
    seen.insert(k0);
    queue.push_back((k0, start, 0));
    while let Some((key, pose, depth)) = queue.pop_front() {
        if depth == max_depth {
            continue;
        }
        for action in Action::ALL {
            let t = map.apply(pose, action);
            if t.collided {
                continue;
            }
            let (mut off, sector) = key;
            if action == Action::Forward {
                for (o, u) in off.iter_mut().zip(UNIT2[sector as usize]) {
                    *o += u;
                }
            }
            let next: Key = (off, t.pose.heading.sector());
            if map.at_goal(t.pose.x, t.pose.y) {
                return Some(depth + 1);
            }
            if seen.insert(next) {
                queue.push_back((next, t.pose, depth + 1));
            }
        }
    }
    None
}

pub fn random_free_pose<R: Rng>(map: &WorldMap, rng: &mut R) -> Pose {
    loop {
        let x = rng.gen_range(0.0..map.width);
        let y = rng.gen_range(0.0..map.height);
        if map.is_free(x, y) {
            return Pose::new(x, y, Heading::new(rng.gen_range(0..12)));
        }
    }
}

/// Clearance between the robot centre and the nearest wall or obstacle.
pub fn clearance(map: &WorldMap, x: f64, y: f64) -> f64 {
    let walls = x.min(y).min(map.width - x).min(map.height - y);
    map.obstacles.iter().map(|o| o.point_distance(x, y)).fold(walls, f64::min)
}

/// Minimum clearance along a forward move, sampled every millimetre.
pub fn sampled_clearance(map: &WorldMap, pose: &Pose) -> f64 {
    let (ux, uy) = pose.heading.unit();
    let n = (STEP_LENGTH / 1e-3).round() as usize;
    (0..=n)
        .map(|i| {
            let s = STEP_LENGTH * i as f64 / n as f64;
            clearance(map, pose.x + s * ux, pose.y + s * uy)
        })
        .fold(f64::INFINITY, f64::min)
}
