//! Kinematic 2D navigation arena: disc robot, axis-aligned box obstacles,
//! a ten-beam laser, and a fixed goal disc.
//!
//! Headings are kept as one of twelve 30° sectors, so yaw never drifts no
//! matter how many turns an episode takes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HORIZON: usize = 120;
pub const STEP_LENGTH: f64 = 0.3;
pub const LASER_BEAMS: usize = 10;
pub const OBS_DIM: usize = LASER_BEAMS + 3;
pub const DIST_COEFF: f64 = -1.0;
pub const HEADING_COEFF: f64 = -0.3;
pub const GOAL_REWARD: f64 = 100.0;
pub const COLLISION_REWARD: f64 = -100.0;
pub const STEP_REWARD: f64 = -1.0;

const SECTORS: u8 = 12;
const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward = 0,
    TurnLeft = 1,
    TurnRight = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Forward, Action::TurnLeft, Action::TurnRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Forward => "forward",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
        })
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Heading as a multiple of 30°, counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Heading(u8);

impl Heading {
    pub const EAST: Heading = Heading(0);
    pub const NORTH: Heading = Heading(3);

    pub fn new(sector: u8) -> Heading {
        Heading(sector % SECTORS)
    }

    pub fn from_yaw(yaw: f64) -> Result<Heading> {
        let k = yaw / (PI / 6.0);
        let r = k.round();
        if !yaw.is_finite() || (k - r).abs() > 1e-6 {
            return Err(Error::config("yaw", format!("{yaw} rad is not a multiple of 30 degrees")));
        }
        Ok(Heading(r.rem_euclid(SECTORS as f64) as u8))
    }

    pub fn sector(self) -> u8 {
        self.0
    }

    pub fn yaw(self) -> f64 {
        wrap_angle(self.0 as f64 * PI / 6.0)
    }

    pub fn left(self) -> Heading {
        Heading((self.0 + 1) % SECTORS)
    }

    pub fn right(self) -> Heading {
        Heading((self.0 + SECTORS - 1) % SECTORS)
    }

    /// Unit vector along the heading, from a fixed table.
    pub fn unit(self) -> (f64, f64) {
        const H: f64 = HALF_SQRT3;
        match self.0 {
            0 => (1.0, 0.0),
            1 => (H, 0.5),
            2 => (0.5, H),
            3 => (0.0, 1.0),
            4 => (-0.5, H),
            5 => (-H, 0.5),
            6 => (-1.0, 0.0),
            7 => (-H, -0.5),
            8 => (-0.5, -H),
            9 => (0.0, -1.0),
            10 => (0.5, -H),
            _ => (H, -0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: Heading,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    x: f64,
    y: f64,
    yaw: f64,
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;
    fn try_from(p: PoseRepr) -> Result<Pose> {
        Ok(Pose { x: p.x, y: p.y, heading: Heading::from_yaw(p.yaw)? })
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> PoseRepr {
        PoseRepr { x: p.x, y: p.y, yaw: p.yaw() }
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: Heading) -> Pose {
        Pose { x, y, heading }
    }

    pub fn yaw(&self) -> f64 {
        self.heading.yaw()
    }
}

/// Axis-aligned box, serialized as `[xmin, ymin, xmax, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(a: [f64; 4]) -> Rect {
        Rect { xmin: a[0], ymin: a[1], xmax: a[2], ymax: a[3] }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> [f64; 4] {
        [r.xmin, r.ymin, r.xmax, r.ymax]
    }
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Rect {
        Rect { xmin, ymin, xmax, ymax }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }

    pub fn point_distance(&self, x: f64, y: f64) -> f64 {
        let dx = (self.xmin - x).max(0.0).max(x - self.xmax);
        let dy = (self.ymin - y).max(0.0).max(y - self.ymax);
        dx.hypot(dy)
    }

    /// Minimum distance between the segment `a → b` and this box (0 if they meet).
    pub fn segment_distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        if self.segment_intersects(a, b) {
            return 0.0;
        }
        let corners = [
            (self.xmin, self.ymin),
            (self.xmax, self.ymin),
            (self.xmax, self.ymax),
            (self.xmin, self.ymax),
        ];
        corners
            .iter()
            .map(|&c| point_segment_distance(c, a, b))
            .fold(self.point_distance(a.0, a.1).min(self.point_distance(b.0, b.1)), f64::min)
    }

    /// Liang–Barsky clip of the segment against the box.
    fn segment_intersects(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for (p, q) in [
            (-dx, a.0 - self.xmin),
            (dx, self.xmax - a.0),
            (-dy, a.1 - self.ymin),
            (dy, self.ymax - a.1),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    /// Distance along a ray to the box surface, if the ray hits it.
    fn ray_hit(&self, o: (f64, f64), d: (f64, f64)) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for (oc, dc, lo, hi) in [(o.0, d.0, self.xmin, self.xmax), (o.1, d.1, self.ymin, self.ymax)] {
            if dc.abs() < 1e-15 {
                if oc < lo || oc > hi {
                    return None;
                }
            } else {
                let (mut ta, mut tb) = ((lo - oc) / dc, (hi - oc) / dc);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t_near = t_near.max(ta);
                t_far = t_far.min(tb);
            }
        }
        if t_near > t_far || t_far < 0.0 {
            None
        } else {
            Some(t_near.max(0.0))
        }
    }

    fn gap(&self, other: &Rect) -> f64 {
        let dx = (other.xmin - self.xmax).max(self.xmin - other.xmax).max(0.0);
        let dy = (other.ymin - self.ymax).max(self.ymin - other.ymax).max(0.0);
        dx.hypot(dy)
    }
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0) };
    (p.0 - (a.0 + t * abx)).hypot(p.1 - (a.1 + t * aby))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Default task variant when the caller does not choose one.
    pub variable: bool,
    pub square_side: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    /// Same start, same goal.
    Sssg,
    /// Start position uniform over a small square, same goal.
    Vssg,
}

impl std::str::FromStr for TaskMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<TaskMode> {
        match s.to_ascii_lowercase().as_str() {
            "sssg" => Ok(TaskMode::Sssg),
            "vssg" => Ok(TaskMode::Vssg),
            _ => Err(Error::config("task", format!("expected SSSG or VSSG, got {s:?}"))),
        }
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskMode::Sssg => "sssg",
            TaskMode::Vssg => "vssg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldMap {
    pub width: f64,
    pub height: f64,
    pub robot_radius: f64,
    pub laser_max_range: f64,
    pub obstacles: Vec<Rect>,
    pub goal: Goal,
    pub start: StartSpec,
}

/// Result of applying one action kinematically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub pose: Pose,
    pub collided: bool,
}

const BENCHMARK_JSON: &str = include_str!("../../../maps/benchmark.json");

impl WorldMap {
    /// The 11 × 12 m arena used by every experiment.
    pub fn benchmark() -> WorldMap {
        WorldMap::from_json(BENCHMARK_JSON).expect("bundled benchmark map is valid")
    }

    pub fn benchmark_json() -> &'static str {
        BENCHMARK_JSON
    }

    pub fn from_json(text: &str) -> Result<WorldMap> {
        let map: WorldMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn load(path: &std::path::Path) -> Result<WorldMap> {
        WorldMap::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        pos("width", self.width)?;
        pos("height", self.height)?;
        pos("robot_radius", self.robot_radius)?;
        pos("laser_max_range", self.laser_max_range)?;
        pos("goal.radius", self.goal.radius)?;
        if self.start.square_side < 0.0 || !self.start.square_side.is_finite() {
            return Err(Error::config("start.square_side", "must be non-negative"));
        }
        Heading::from_yaw(self.start.yaw).map_err(|_| Error::config("start.yaw", "must be a multiple of 30 degrees"))?;

        let r = self.robot_radius;
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.xmin < o.xmax && o.ymin < o.ymax) {
                return Err(Error::config(format!("obstacles[{i}]"), "needs xmin < xmax and ymin < ymax"));
            }
            for (field, gap) in [
                ("left wall", o.xmin),
                ("bottom wall", o.ymin),
                ("right wall", self.width - o.xmax),
                ("top wall", self.height - o.ymax),
            ] {
                if gap > 0.0 && gap <= r {
                    return Err(Error::config(
                        format!("obstacles[{i}]"),
                        format!("gap to {field} ({gap:.3} m) is not wider than the robot radius"),
                    ));
                }
            }
            for (j, p) in self.obstacles.iter().enumerate().skip(i + 1) {
                let gap = o.gap(p);
                if gap > 0.0 && gap <= r {
                    return Err(Error::config(
                        format!("obstacles[{i}]"),
                        format!("gap to obstacles[{j}] ({gap:.3} m) is not wider than the robot radius"),
                    ));
                }
            }
        }
        if !self.is_free(self.goal.x, self.goal.y) {
            return Err(Error::config("goal", "goal centre lies outside the free space"));
        }
        let h = self.start.square_side / 2.0;
        for (dx, dy) in [(0.0, 0.0), (-h, -h), (h, -h), (h, h), (-h, h)] {
            if !self.is_free(self.start.x + dx, self.start.y + dy) {
                return Err(Error::config("start", "start region overlaps an inflated obstacle or wall"));
            }
        }
        let square = Rect::new(self.start.x - h, self.start.y - h, self.start.x + h, self.start.y + h);
        if let Some(i) = self.obstacles.iter().position(|o| square.gap(o) < r) {
            return Err(Error::config("start", format!("start region touches inflated obstacles[{i}]")));
        }
        Ok(())
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn start_pose(&self) -> Pose {
        Pose::new(self.start.x, self.start.y, Heading::from_yaw(self.start.yaw).expect("validated"))
    }

    pub fn default_mode(&self) -> TaskMode {
        if self.start.variable {
            TaskMode::Vssg
        } else {
            TaskMode::Sssg
        }
    }

    /// Robot disc centred at `(x, y)` touches nothing.
    pub fn is_free(&self, x: f64, y: f64) -> bool {
        let r = self.robot_radius;
        x >= r
            && x <= self.width - r
            && y >= r
            && y <= self.height - r
            && self.obstacles.iter().all(|o| o.point_distance(x, y) >= r)
    }

    /// Disc swept along `a → b` stays clear of every obstacle and wall.
    pub fn segment_is_free(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let r = self.robot_radius;
        // the arena is convex, so the endpoint decides the walls
        b.0 >= r
            && b.0 <= self.width - r
            && b.1 >= r
            && b.1 <= self.height - r
            && self.obstacles.iter().all(|o| o.segment_distance(a, b) >= r)
    }

    pub fn goal_distance(&self, x: f64, y: f64) -> f64 {
        (self.goal.x - x).hypot(self.goal.y - y)
    }

    pub fn at_goal(&self, x: f64, y: f64) -> bool {
        self.goal_distance(x, y) <= self.goal.radius
    }

    /// Kinematic successor. A colliding forward move leaves the pose unchanged.
    pub fn apply(&self, pose: Pose, action: Action) -> Transition {
        match action {
            Action::TurnLeft => Transition { pose: Pose { heading: pose.heading.left(), ..pose }, collided: false },
            Action::TurnRight => Transition { pose: Pose { heading: pose.heading.right(), ..pose }, collided: false },
            Action::Forward => {
                let (ux, uy) = pose.heading.unit();
                let next = Pose { x: pose.x + STEP_LENGTH * ux, y: pose.y + STEP_LENGTH * uy, ..pose };
                if self.segment_is_free((pose.x, pose.y), (next.x, next.y)) {
                    Transition { pose: next, collided: false }
                } else {
                    Transition { pose, collided: true }
                }
            }
        }
    }

    /// Ten ranges at relative bearings −90°, −70°, …, +90°, clipped to the
    /// laser's maximum range. The goal is not a physical object and is not sensed.
    pub fn raycast(&self, x: f64, y: f64, yaw: f64) -> [f64; LASER_BEAMS] {
        let mut out = [0.0; LASER_BEAMS];
        for (i, slot) in out.iter_mut().enumerate() {
            let bearing = (-90.0 + 20.0 * i as f64).to_radians();
            let (s, c) = (yaw + bearing).sin_cos();
            *slot = self.ray_range((x, y), (c, s));
        }
        out
    }

    fn ray_range(&self, o: (f64, f64), d: (f64, f64)) -> f64 {
        let mut best = self.laser_max_range;
        for (oc, dc, hi) in [(o.0, d.0, self.width), (o.1, d.1, self.height)] {
            if dc > 1e-15 {
                best = best.min((hi - oc) / dc);
            } else if dc < -1e-15 {
                best = best.min(-oc / dc);
            }
        }
        for obs in &self.obstacles {
            if let Some(t) = obs.ray_hit(o, d) {
                best = best.min(t);
            }
        }
        best.max(0.0)
    }

    pub fn observe(&self, pose: &Pose) -> Observation {
        let (dx, dy) = (self.goal.x - pose.x, self.goal.y - pose.y);
        Observation {
            laser: self.raycast(pose.x, pose.y, pose.yaw()),
            goal_dist: dx.hypot(dy),
            goal_bearing: wrap_angle(dy.atan2(dx)),
            yaw: pose.yaw(),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        crate::metrics::sha256_hex(serde_json::to_string(self).expect("map serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub laser: [f64; LASER_BEAMS],
    pub goal_dist: f64,
    /// Global-frame polar angle of the displacement to the goal.
    pub goal_bearing: f64,
    pub yaw: f64,
}

impl Observation {
    /// Network input: ranges over max range, distance over the arena
    /// diagonal, angles over π.
    pub fn normalized(&self, map: &WorldMap) -> [f64; OBS_DIM] {
        let mut v = [0.0; OBS_DIM];
        for (dst, &l) in v.iter_mut().zip(&self.laser) {
            *dst = l / map.laser_max_range;
        }
        v[LASER_BEAMS] = self.goal_dist / map.diagonal();
        v[LASER_BEAMS + 1] = self.goal_bearing / PI;
        v[LASER_BEAMS + 2] = self.yaw / PI;
        v
    }

    /// |yaw − bearing to goal|, in `[0, π]`.
    pub fn heading_error(&self) -> f64 {
        wrap_angle(self.yaw - self.goal_bearing).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    None,
    Goal,
    Collision,
    Timeout,
}

impl Terminal {
    pub fn is_terminal(self) -> bool {
        self != Terminal::None
    }
}

pub fn reward_sparse(terminal: Terminal) -> f64 {
    match terminal {
        Terminal::Goal => GOAL_REWARD,
        Terminal::Collision => COLLISION_REWARD,
        Terminal::None | Terminal::Timeout => STEP_REWARD,
    }
}

/// Sparse reward plus distance and heading shaping.
pub fn reward_rich(terminal: Terminal, goal_dist: f64, heading_error: f64) -> f64 {
    reward_sparse(terminal) + DIST_COEFF * goal_dist + HEADING_COEFF * heading_error
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward_sparse: f64,
    pub reward_rich: f64,
    pub terminal: Terminal,
    /// Steps taken so far in this episode, including this one.
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Sparse,
    Rich,
}

impl RewardMode {
    pub fn select(self, r: &StepResult) -> f64 {
        match self {
            RewardMode::Sparse => r.reward_sparse,
            RewardMode::Rich => r.reward_rich,
        }
    }
}

impl std::str::FromStr for RewardMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<RewardMode> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(RewardMode::Sparse),
            "rich" => Ok(RewardMode::Rich),
            _ => Err(Error::config("reward", format!("expected sparse or rich, got {s:?}"))),
        }
    }
}

/// One episode-at-a-time environment over a shared map.
#[derive(Debug, Clone)]
pub struct NavEnv {
    map: Arc<WorldMap>,
    mode: TaskMode,
    pose: Pose,
    steps: usize,
    done: bool,
}

impl NavEnv {
    pub fn new(map: Arc<WorldMap>, mode: TaskMode) -> NavEnv {
        let pose = map.start_pose();
        NavEnv { map, mode, pose, steps: 0, done: true }
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn shared_map(&self) -> Arc<WorldMap> {
        Arc::clone(&self.map)
    }

    pub fn mode(&self) -> TaskMode {
        self.mode
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observation(&self) -> Observation {
        self.map.observe(&self.pose)
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        let start = self.map.start_pose();
        self.pose = match self.mode {
            TaskMode::Sssg => start,
            TaskMode::Vssg => {
                let h = self.map.start.square_side / 2.0;
                let x = start.x + rng.gen_range(-h..=h);
                let y = start.y + rng.gen_range(-h..=h);
                Pose { x, y, ..start }
            }
        };
        assert!(self.map.is_free(self.pose.x, self.pose.y), "start region is validated collision-free");
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    /// Places the robot at an arbitrary free pose and starts a fresh episode.
    pub fn reset_to(&mut self, pose: Pose) -> Result<Observation> {
        if !self.map.is_free(pose.x, pose.y) {
            return Err(Error::contract(format!("pose ({:.3}, {:.3}) is in collision", pose.x, pose.y)));
        }
        self.pose = pose;
        self.steps = 0;
        self.done = false;
        Ok(self.observation())
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::contract("step called on a finished episode; reset first"));
        }
        let t = self.map.apply(self.pose, action);
        self.pose = t.pose;
        self.steps += 1;
        let terminal = if t.collided {
            Terminal::Collision
        } else if self.map.at_goal(self.pose.x, self.pose.y) {
            Terminal::Goal
        } else if self.steps >= HORIZON {
            Terminal::Timeout
        } else {
            Terminal::None
        };
        self.done = terminal.is_terminal();
        let observation = self.observation();
        Ok(StepResult {
            observation,
            reward_sparse: reward_sparse(terminal),
            reward_rich: reward_rich(terminal, observation.goal_dist, observation.heading_error()),
            terminal,
            step: self.steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_map(goal: (f64, f64)) -> WorldMap {
        WorldMap {
            width: 10.0,
            height: 10.0,
            robot_radius: 0.25,
            laser_max_range: 5.0,
            obstacles: vec![],
            goal: Goal { x: goal.0, y: goal.1, radius: 0.5 },
            start: StartSpec { x: 5.0, y: 5.0, yaw: 0.0, variable: false, square_side: 0.2 },
        }
    }

    #[test]
    fn forward_and_turns() {
        let map = open_map((9.0, 9.0));
        let t = map.apply(Pose::new(1.0, 1.0, Heading::EAST), Action::Forward);
        assert!(!t.collided);
        assert!((t.pose.x - 1.3).abs() < 1e-12 && (t.pose.y - 1.0).abs() < 1e-12);
        assert_eq!(t.pose.yaw(), 0.0);
        let t = map.apply(Pose::new(1.0, 1.0, Heading::EAST), Action::TurnLeft);
        assert!((t.pose.yaw() - PI / 6.0).abs() < 1e-12);
        let t = map.apply(Pose::new(1.0, 1.0, Heading::EAST), Action::TurnRight);
        assert!((t.pose.yaw() + PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn twelve_left_turns_wrap() {
        let map = open_map((9.0, 9.0));
        let start = Pose::new(2.0, 2.0, Heading::new(4));
        let mut p = start;
        for _ in 0..12 {
            p = map.apply(p, Action::TurnLeft).pose;
        }
        assert_eq!(p, start);
        assert_eq!(Heading::new(6).yaw(), PI);
        assert!(Heading::new(7).yaw() < 0.0);
    }

    #[test]
    fn heading_table_matches_trig() {
        for k in 0..12u8 {
            let h = Heading::new(k);
            let (c, s) = h.unit();
            assert!((c - h.yaw().cos()).abs() < 1e-15 && (s - h.yaw().sin()).abs() < 1e-15);
            assert_eq!(Heading::from_yaw(h.yaw()).unwrap(), h);
        }
        assert!(Heading::from_yaw(0.3).is_err());
    }

    #[test]
    fn wall_collision_ends_episode() {
        let map = open_map((9.0, 9.0));
        let mut env = NavEnv::new(Arc::new(map), TaskMode::Sssg);
        env.reset_to(Pose::new(9.6, 5.0, Heading::EAST)).unwrap();
        let r = env.step(Action::Forward).unwrap();
        assert_eq!(r.terminal, Terminal::Collision);
        assert_eq!(r.reward_sparse, -100.0);
        assert!(matches!(env.step(Action::Forward), Err(Error::Contract(_))));
    }

    #[test]
    fn raycast_open_arena_from_centre() {
        let map = open_map((9.0, 9.0));
        let ranges = map.raycast(5.0, 5.0, 0.0);
        for (i, r) in ranges.iter().enumerate() {
            let b = (-90.0 + 20.0 * i as f64).to_radians();
            // walls at 5 m in every axis direction; hand-intersect
            let (s, c) = b.sin_cos();
            let tx = if c > 1e-12 { 5.0 / c } else { f64::INFINITY };
            let ty = if s.abs() > 1e-12 { 5.0 / s.abs() } else { f64::INFINITY };
            let expect = tx.min(ty).min(5.0);
            assert!((r - expect).abs() < 1e-9, "beam {i}: {r} vs {expect}");
        }
    }

    #[test]
    fn raycast_wall_ahead_at_one_metre() {
        let mut map = open_map((1.0, 9.0));
        map.width = 40.0;
        map.height = 40.0;
        map.obstacles = vec![Rect::new(21.0, 0.5, 22.0, 39.5)];
        let ranges = map.raycast(20.0, 20.0, 0.0);
        let plus10 = ranges[5];
        assert!((plus10 - 1.0 / 10f64.to_radians().cos()).abs() < 1e-9);
        assert!((ranges[4] - plus10).abs() < 1e-12);
        assert_eq!(ranges[0], 5.0);
        assert_eq!(ranges[9], 5.0);
    }

    #[test]
    fn obstacle_behind_is_not_seen() {
        let mut map = open_map((9.0, 9.0));
        map.obstacles = vec![Rect::new(3.0, 3.0, 4.0, 7.0)];
        let ranges = map.raycast(5.0, 5.0, 0.0);
        assert!(ranges.iter().all(|&r| r == 5.0), "{ranges:?}");
    }

    #[test]
    fn observation_geometry() {
        let map = open_map((8.0, 5.0));
        let obs = map.observe(&Pose::new(5.0, 5.0, Heading::new(2)));
        assert_eq!(obs.goal_bearing, 0.0);
        assert!((obs.goal_dist - 3.0).abs() < 1e-12);
        let at = map.observe(&Pose::new(8.0, 5.0, Heading::EAST));
        assert_eq!(at.goal_dist, 0.0);
        assert!(obs.normalized(&map).iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn reward_values() {
        assert_eq!(reward_sparse(Terminal::Goal), 100.0);
        assert_eq!(reward_sparse(Terminal::Collision), -100.0);
        assert_eq!(reward_sparse(Terminal::None), -1.0);
        assert_eq!(reward_sparse(Terminal::Timeout), -1.0);
        assert!((reward_rich(Terminal::None, 2.0, 0.5) + 3.15).abs() < 1e-12);
        assert!((reward_rich(Terminal::Goal, 0.4, 0.0) - 99.6).abs() < 1e-12);
        assert_eq!(reward_rich(Terminal::None, 0.0, 0.0), -1.0);
    }

    #[test]
    fn reset_modes() {
        let map = Arc::new(WorldMap::benchmark());
        let mut env = NavEnv::new(Arc::clone(&map), TaskMode::Sssg);
        let a = env.reset(&mut ChaCha8Rng::seed_from_u64(1));
        let pa = env.pose();
        env.reset(&mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(pa, env.pose());
        let s = map.start_pose();
        assert!((a.goal_dist - map.goal_distance(s.x, s.y)).abs() < 1e-12);

        let mut env = NavEnv::new(Arc::clone(&map), TaskMode::Vssg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = map.start.square_side / 2.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..1000 {
            env.reset(&mut rng);
            let p = env.pose();
            assert!((p.x - s.x).abs() <= h && (p.y - s.y).abs() <= h);
            assert_eq!(p.heading, s.heading);
            sx += p.x;
            sy += p.y;
        }
        assert!((sx / 1000.0 - s.x).abs() < 0.02 && (sy / 1000.0 - s.y).abs() < 0.02);
    }

    #[test]
    fn timeout_at_horizon() {
        let map = open_map((9.0, 9.0));
        let mut env = NavEnv::new(Arc::new(map), TaskMode::Sssg);
        env.reset_to(Pose::new(2.0, 2.0, Heading::EAST)).unwrap();
        for i in 1..=HORIZON {
            let r = env.step(Action::TurnLeft).unwrap();
            let expect = if i == HORIZON { Terminal::Timeout } else { Terminal::None };
            assert_eq!(r.terminal, expect);
            assert_eq!(r.reward_sparse, -1.0);
        }
    }

    #[test]
    fn map_json_round_trip_and_validation() {
        let map = WorldMap::benchmark();
        let back = WorldMap::from_json(&map.to_json().unwrap()).unwrap();
        assert_eq!(map, back);
        let mut bad = map.clone();
        bad.goal = Goal { x: bad.obstacles[0].xmin + 0.01, y: bad.obstacles[0].ymin + 0.01, radius: 0.5 };
        assert!(bad.validate().is_err());
        assert!(WorldMap::from_json(r#"{"width":1}"#).is_err());
    }

    #[test]
    fn segment_distance_cases() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        assert_eq!(r.segment_distance((-1.0, 0.5), (2.0, 0.5)), 0.0);
        assert!((r.segment_distance((-1.0, 2.0), (2.0, 2.0)) - 1.0).abs() < 1e-12);
        assert!((r.segment_distance((2.0, 2.0), (3.0, 3.0)) - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.segment_distance((1.5, -1.0), (1.5, 3.0)) - 0.5).abs() < 1e-12);
    }
}
