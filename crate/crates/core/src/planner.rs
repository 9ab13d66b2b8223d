//! Ground-truth action labels from shortest-path search over the
//! action graph, and the noisy feedback channel built on top of them.
//!
//! Search runs forward from the query pose with unit-cost edges (one per
//! action), A* ordered by `ceil(max(0, d − r_goal) / 0.3)`. Because headings
//! are multiples of 30° the exactly reachable positions never close into a
//! lattice, so search states are deduplicated on a 0.05 m grid
//! ([`LatticeKey`]); the first pose reaching a cell stands in for it.
//!
//! Every node carries the set of first actions that reach it along a
//! shortest path. Nodes with equal `f` pop in order of increasing `g`, so a
//! node's set is complete before it is expanded, and the union over the
//! goal nodes at the optimal depth gives all co-optimal first actions.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Pose, WorldMap, STEP_LENGTH};
use crate::error::{Error, Result};

pub const SNAP: f64 = 0.05;
pub const DEFAULT_EXPANSION_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeKey {
    pub x_idx: i32,
    pub y_idx: i32,
    pub yaw_idx: u8,
}

impl LatticeKey {
    pub fn of(pose: &Pose) -> LatticeKey {
        LatticeKey {
            x_idx: (pose.x / SNAP).round() as i32,
            y_idx: (pose.y / SNAP).round() as i32,
            yaw_idx: pose.heading.sector(),
        }
    }

    /// Centre of the cell, as a pose.
    pub fn center(&self) -> Pose {
        Pose::new(self.x_idx as f64 * SNAP, self.y_idx as f64 * SNAP, crate::env::Heading::new(self.yaw_idx))
    }
}

/// Small set of actions stored as a bit mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);
    pub const ALL: ActionSet = ActionSet(0b111);

    pub fn single(a: Action) -> ActionSet {
        ActionSet(1 << a.index())
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn union(self, other: ActionSet) -> ActionSet {
        ActionSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }
}

impl Serialize for ActionSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ActionSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<Action> = Vec::deserialize(d)?;
        Ok(v.into_iter().fold(ActionSet::EMPTY, |s, a| s.union(ActionSet::single(a))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Minimum number of actions to bring the robot within the goal radius.
    pub steps: u32,
    /// First actions of some shortest path. At the goal every action counts.
    pub optimal_actions: ActionSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerStats {
    pub queries: u64,
    pub cache_hits: u64,
    pub searches: u64,
    pub nodes_expanded: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PoseBits(u64, u64, u8);

impl std::hash::Hash for PoseBits {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state);
        self.1.hash(state);
        self.2.hash(state);
    }
}

impl PoseBits {
    fn of(p: &Pose) -> PoseBits {
        PoseBits(p.x.to_bits(), p.y.to_bits(), p.heading.sector())
    }
}

/// Shortest-path oracle for one map. Safe to share between threads: the
/// memo table takes concurrent readers and serializes insertion.
#[derive(Debug)]
pub struct Planner {
    map: Arc<WorldMap>,
    expansion_cap: usize,
    memo: RwLock<HashMap<PoseBits, PlanResult>>,
    queries: AtomicU64,
    cache_hits: AtomicU64,
    searches: AtomicU64,
    nodes_expanded: AtomicU64,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    pose: Pose,
    g: u32,
    first: ActionSet,
    closed: bool,
    goal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct OpenEntry {
    f: u32,
    g: u32,
    seq: u32,
    node: u32,
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: smallest f first, then smallest g, then FIFO.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then_with(|| other.g.cmp(&self.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Planner {
    pub fn new(map: Arc<WorldMap>) -> Planner {
        Planner::with_cap(map, DEFAULT_EXPANSION_CAP)
    }

    pub fn with_cap(map: Arc<WorldMap>, expansion_cap: usize) -> Planner {
        Planner {
            map,
            expansion_cap,
            memo: RwLock::new(HashMap::new()),
            queries: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
            searches: AtomicU64::new(0),
            nodes_expanded: AtomicU64::new(0),
        }
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn stats(&self) -> PlannerStats {
        PlannerStats {
            queries: self.queries.load(AtomicOrdering::Relaxed),
            cache_hits: self.cache_hits.load(AtomicOrdering::Relaxed),
            searches: self.searches.load(AtomicOrdering::Relaxed),
            nodes_expanded: self.nodes_expanded.load(AtomicOrdering::Relaxed),
        }
    }

    fn heuristic(&self, pose: &Pose) -> u32 {
        let excess = self.map.goal_distance(pose.x, pose.y) - self.map.goal.radius;
        if excess <= 0.0 {
            0
        } else {
            // tiny slack keeps float noise from overestimating exact multiples
            ((excess / STEP_LENGTH) - 1e-9).ceil().max(0.0) as u32
        }
    }

    pub fn plan(&self, pose: &Pose) -> Result<PlanResult> {
        self.queries.fetch_add(1, AtomicOrdering::Relaxed);
        let key = PoseBits::of(pose);
        if let Some(hit) = self.memo.read().expect("memo lock").get(&key).copied() {
            self.cache_hits.fetch_add(1, AtomicOrdering::Relaxed);
            return Ok(hit);
        }
        let result = self.plan_uncached(pose)?;
        self.memo.write().expect("memo lock").entry(key).or_insert(result);
        Ok(result)
    }

    /// Same answer as [`Planner::plan`], without touching the memo table.
    pub fn plan_uncached(&self, pose: &Pose) -> Result<PlanResult> {
        let map = &*self.map;
        if !map.is_free(pose.x, pose.y) {
            return Err(Error::contract(format!("plan queried at colliding pose ({:.3}, {:.3})", pose.x, pose.y)));
        }
        if map.at_goal(pose.x, pose.y) {
            return Ok(PlanResult { steps: 0, optimal_actions: ActionSet::ALL });
        }
        self.searches.fetch_add(1, AtomicOrdering::Relaxed);

        let mut nodes: Vec<Node> = Vec::with_capacity(4096);
        let mut index: HashMap<LatticeKey, u32> = HashMap::with_capacity(4096);
        let mut open = BinaryHeap::new();
        let mut seq = 0u32;

        nodes.push(Node { pose: *pose, g: 0, first: ActionSet::EMPTY, closed: false, goal: false });
        index.insert(LatticeKey::of(pose), 0);
        open.push(OpenEntry { f: self.heuristic(pose), g: 0, seq, node: 0 });

        let mut expanded = 0usize;
        let mut best: Option<u32> = None;
        let mut best_first = ActionSet::EMPTY;

        while let Some(entry) = open.pop() {
            if let Some(b) = best {
                if entry.f > b {
                    break;
                }
            }
            let id = entry.node as usize;
            let node = nodes[id];
            if node.closed || entry.g != node.g {
                continue;
            }
            nodes[id].closed = true;

            if node.goal {
                // the first goal popped fixes the optimum; later ones at the same depth add ties
                if best.is_none() {
                    best = Some(node.g);
                }
                if Some(node.g) == best {
                    best_first = best_first.union(node.first);
                }
                continue;
            }

            expanded += 1;
            if expanded > self.expansion_cap {
                self.nodes_expanded.fetch_add(expanded as u64, AtomicOrdering::Relaxed);
                return Err(Error::Unreachable { x: pose.x, y: pose.y, expanded });
            }

            for action in Action::ALL {
                let t = map.apply(node.pose, action);
                if t.collided {
                    continue;
                }
                let g = node.g + 1;
                let first = if id == 0 { ActionSet::single(action) } else { node.first };
                let goal = map.at_goal(t.pose.x, t.pose.y);
                let key = LatticeKey::of(&t.pose);
                let h = if goal { 0 } else { self.heuristic(&t.pose) };
                match index.get(&key).copied() {
                    Some(j) => {
                        let other = &mut nodes[j as usize];
                        if other.closed {
                            continue;
                        }
                        if g < other.g {
                            *other = Node { pose: t.pose, g, first, closed: false, goal };
                            seq += 1;
                            open.push(OpenEntry { f: g + h, g, seq, node: j });
                        } else if g == other.g {
                            other.first = other.first.union(first);
                        }
                    }
                    None => {
                        let j = nodes.len() as u32;
                        nodes.push(Node { pose: t.pose, g, first, closed: false, goal });
                        index.insert(key, j);
                        seq += 1;
                        open.push(OpenEntry { f: g + h, g, seq, node: j });
                    }
                }
            }
        }
        self.nodes_expanded.fetch_add(expanded as u64, AtomicOrdering::Relaxed);

        match best {
            Some(steps) => Ok(PlanResult { steps, optimal_actions: best_first }),
            None => Err(Error::Unreachable { x: pose.x, y: pose.y, expanded }),
        }
    }

    pub fn shortest_steps(&self, pose: &Pose) -> Result<u32> {
        Ok(self.plan(pose)?.steps)
    }

    pub fn ground_truth_label(&self, pose: &Pose, action: Action) -> Result<Label> {
        Ok(if self.plan(pose)?.optimal_actions.contains(action) { Label::Correct } else { Label::Error })
    }
}

/// Binary evaluative feedback on one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Error = 0,
    Correct = 1,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Error => 0.0,
            Label::Correct => 1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Error => Label::Correct,
            Label::Correct => Label::Error,
        }
    }
}

pub fn check_accuracy(accuracy: f64) -> Result<()> {
    if (0.5..=1.0).contains(&accuracy) {
        Ok(())
    } else {
        Err(Error::config("accuracy", format!("must lie in [0.5, 1], got {accuracy}")))
    }
}

/// Symmetric noisy channel: returns `truth` with probability `accuracy`.
pub fn noisy_feedback<R: Rng + ?Sized>(truth: Label, accuracy: f64, rng: &mut R) -> Result<Label> {
    check_accuracy(accuracy)?;
    Ok(if rng.gen::<f64>() < accuracy { truth } else { truth.flipped() })
}
