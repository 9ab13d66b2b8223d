//! JSON messages exchanged with a feedback client, one object per text frame.

use hfnav::env::{Action, Pose, Terminal, WorldMap, LASER_BEAMS};
use hfnav::hf::FeedbackQuery;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Map { map: WorldMap },
    Frame(Frame),
    Stats(Stats),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: u64,
    pub episode: u64,
    pub step: usize,
    pub pose: Pose,
    pub laser: [f64; LASER_BEAMS],
    pub goal: Point,
    pub last_action: Action,
    pub terminal: Terminal,
    pub deadline_unix_ms: u64,
}

impl Frame {
    pub fn from_query(query: &FeedbackQuery<'_>, map: &WorldMap, deadline_unix_ms: u64) -> Frame {
        Frame {
            frame_id: query.seq_no,
            episode: query.episode,
            step: query.result.step,
            pose: query.pose_after,
            laser: query.result.observation.laser,
            goal: Point { x: map.goal.x, y: map.goal.y },
            last_action: query.action,
            terminal: query.result.terminal,
            deadline_unix_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub buffer_size: usize,
    pub val_accuracy: Option<f64>,
    pub episodes: u64,
    pub success_count: u64,
    pub labels_received: u64,
    pub late_feedback: u64,
    pub malformed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Feedback { frame_id: u64, label: KeyLabel },
    Control { cmd: Command },
}

/// The only thing a client can say about a frame: the action was wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyLabel {
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Start,
    Pause,
    Resume,
    End,
}

impl ServerMsg {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

impl ClientMsg {
    pub fn parse(text: &str) -> Option<ClientMsg> {
        serde_json::from_str(text).ok()
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}
