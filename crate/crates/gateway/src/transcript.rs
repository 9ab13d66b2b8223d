//! Timestamped session log and its offline replay.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use hfnav::env::NavEnv;
use hfnav::error::{Error, Result};
use hfnav::hf::{run_hf_stage, FeedbackQuery, FeedbackReply, FeedbackSource, HfConfig, HfOutcome, HfSeeds};
use hfnav::planner::Label;
use serde::{Deserialize, Serialize};

use crate::protocol::ServerMsg;

/// One line of a transcript. `t_ms` counts from the moment the client connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dir", rename_all = "snake_case")]
pub enum Record {
    /// Text sent to the client.
    Out { t_ms: u64, text: String },
    /// Text received from the client, verbatim, malformed or not.
    In { t_ms: u64, text: String },
    /// The label a frame resolved to.
    Label { t_ms: u64, frame_id: u64, label: Label },
}

pub struct TranscriptWriter {
    out: BufWriter<std::fs::File>,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> Result<TranscriptWriter> {
        Ok(TranscriptWriter { out: BufWriter::new(std::fs::File::create(path)?) })
    }

    pub fn write(&mut self, record: &Record) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<Record>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for line in file.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(records)
}

/// Feeds the labels of a recorded session back to the learner, checking
/// that every query matches the frame that was shown live.
pub struct ReplaySource {
    frames: std::vec::IntoIter<(crate::protocol::Frame, Option<Label>)>,
}

impl ReplaySource {
    pub fn new(records: &[Record]) -> Result<ReplaySource> {
        let mut frames = Vec::new();
        for r in records {
            match r {
                Record::Out { text, .. } => {
                    if let Ok(ServerMsg::Frame(f)) = serde_json::from_str::<ServerMsg>(text) {
                        frames.push((f, None));
                    }
                }
                Record::Label { frame_id, label, .. } => match frames.last_mut() {
                    Some((f, slot @ None)) if f.frame_id == *frame_id => *slot = Some(*label),
                    _ => return Err(Error::contract(format!("label for frame {frame_id} does not follow its frame"))),
                },
                Record::In { .. } => {}
            }
        }
        Ok(ReplaySource { frames: frames.into_iter() })
    }
}

impl FeedbackSource for ReplaySource {
    fn feedback(&mut self, query: &FeedbackQuery<'_>) -> Result<FeedbackReply> {
        let Some((frame, label)) = self.frames.next() else {
            return Ok(FeedbackReply::Stop);
        };
        if frame.frame_id != query.seq_no || frame.pose != query.pose_after || frame.last_action != query.action {
            return Err(Error::contract(format!("transcript diverges from the replay at frame {}", query.seq_no)));
        }
        Ok(label.map_or(FeedbackReply::Stop, FeedbackReply::Label))
    }
}

/// Reruns the learning stage of a recorded session offline.
pub fn replay(records: &[Record], env: &mut NavEnv, cfg: &HfConfig, seeds: HfSeeds) -> Result<HfOutcome> {
    let mut source = ReplaySource::new(records)?;
    run_hf_stage(env, &mut source, cfg, seeds).map_err(|e| e.cause)
}
