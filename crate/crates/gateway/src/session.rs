//! One live feedback session: a serialized loop over the frame timer and
//! the client's messages, driving the learning stage.

use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use hfnav::env::{NavEnv, TaskMode, WorldMap};
use hfnav::error::{Error, Result};
use hfnav::experiment::ServeConfig;
use hfnav::hf::{
    run_hf_stage, FeedbackQuery, FeedbackReply, FeedbackSource, HfConfig, HfOutcome, HfSeeds, HfStepStats, StageEnd,
};
use hfnav::metrics;
use hfnav::planner::Label;
use serde::{Deserialize, Serialize};
use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::CloseFrame;
use tungstenite::{Message, WebSocket};

use crate::protocol::{ClientMsg, Command, Frame, ServerMsg, Stats};
use crate::transcript::{Record, TranscriptWriter};

/// Everything a session needs besides its socket.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub map: Arc<WorldMap>,
    pub task: TaskMode,
    pub hf: HfConfig,
    pub seeds: HfSeeds,
    pub timing: ServeConfig,
    /// Directory that receives one subdirectory per session.
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionEnd {
    /// The learning stage ran all its steps.
    Completed,
    /// The client sent `end`, or the wall-clock cap was hit.
    Ended,
    /// The client left or the learner failed; partial outputs are kept.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: u64,
    pub end: SessionEnd,
    pub frames_sent: u64,
    pub labels_received: u64,
    pub error_labels: u64,
    pub late_feedback: u64,
    pub malformed: u64,
    /// Longest gap between resolving one frame and sending the next one
    /// beyond what the action period demands.
    pub max_tick_overrun_ms: u64,
    pub abort_reason: Option<String>,
}

enum Inbound {
    Feedback(u64),
    Control(Command),
    Malformed,
    Closed,
}

fn unix_ms(at: SystemTime) -> u64 {
    at.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

struct LiveSource<'a> {
    ws: &'a mut WebSocket<TcpStream>,
    transcript: &'a mut TranscriptWriter,
    map: Arc<WorldMap>,
    timing: ServeConfig,
    opened: Instant,
    next_frame_at: Option<Instant>,
    last_resolved: Option<Instant>,
    report: SessionReport,
    ended_by_client: bool,
}

impl LiveSource<'_> {
    fn t_ms(&self) -> u64 {
        self.opened.elapsed().as_millis() as u64
    }

    fn send(&mut self, msg: &ServerMsg) -> Result<()> {
        let text = msg.to_text();
        self.transcript.write(&Record::Out { t_ms: self.t_ms(), text: text.clone() })?;
        self.ws.send(Message::text(text)).map_err(|e| Error::SessionAborted(format!("send failed: {e}")))
    }

    fn past_cap(&self) -> bool {
        self.opened.elapsed() >= Duration::from_secs(self.timing.max_session_secs)
    }

    /// Next client message, or `None` once `until` passes.
    fn next_event(&mut self, until: Option<Instant>) -> Result<Option<Inbound>> {
        loop {
            let timeout = match until {
                Some(t) => {
                    let now = Instant::now();
                    if now >= t {
                        return Ok(None);
                    }
                    Some((t - now).max(Duration::from_millis(1)))
                }
                None => Some(Duration::from_millis(250)),
            };
            self.ws.get_mut().set_read_timeout(timeout)?;
            match self.ws.read() {
                Ok(Message::Text(text)) => {
                    self.transcript.write(&Record::In { t_ms: self.t_ms(), text: text.to_string() })?;
                    return Ok(Some(match ClientMsg::parse(&text) {
                        Some(ClientMsg::Feedback { frame_id, .. }) => Inbound::Feedback(frame_id),
                        Some(ClientMsg::Control { cmd }) => Inbound::Control(cmd),
                        None => Inbound::Malformed,
                    }));
                }
                Ok(Message::Close(_)) => return Ok(Some(Inbound::Closed)),
                Ok(Message::Binary(_)) => return Ok(Some(Inbound::Malformed)),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) =>
                {
                    if until.is_none() && self.past_cap() {
                        return Ok(None);
                    }
                }
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                    return Ok(Some(Inbound::Closed))
                }
                Err(e) => return Err(Error::SessionAborted(format!("socket error: {e}"))),
            }
        }
    }

    /// Blocks until `resume` or `end`. Returns false on `end`.
    fn wait_for_resume(&mut self) -> Result<bool> {
        loop {
            match self.next_event(None)? {
                Some(Inbound::Control(Command::Resume)) => return Ok(true),
                Some(Inbound::Control(Command::End)) => return Ok(false),
                Some(Inbound::Closed) => return Err(Error::SessionAborted("client disconnected".into())),
                Some(Inbound::Feedback(_)) => self.report.late_feedback += 1,
                Some(Inbound::Malformed) => self.report.malformed += 1,
                Some(Inbound::Control(_)) => {}
                None if self.past_cap() => return Ok(false),
                None => {}
            }
        }
    }

    /// Handles traffic until `until`; all feedback seen here is stale.
    /// Returns false when the session should stop.
    fn idle_until(&mut self, until: Instant) -> Result<bool> {
        let mut until = until;
        while let Some(event) = self.next_event(Some(until))? {
            match event {
                Inbound::Feedback(_) => self.report.late_feedback += 1,
                Inbound::Malformed => self.report.malformed += 1,
                Inbound::Closed => return Err(Error::SessionAborted("client disconnected".into())),
                Inbound::Control(Command::End) => return Ok(false),
                Inbound::Control(Command::Pause) => {
                    let left = until.saturating_duration_since(Instant::now());
                    if !self.wait_for_resume()? {
                        return Ok(false);
                    }
                    until = Instant::now() + left;
                }
                Inbound::Control(_) => {}
            }
        }
        Ok(true)
    }

    fn stop(&mut self) -> FeedbackReply {
        self.ended_by_client = true;
        FeedbackReply::Stop
    }
}

impl FeedbackSource for LiveSource<'_> {
    fn feedback(&mut self, query: &FeedbackQuery<'_>) -> Result<FeedbackReply> {
        if self.past_cap() {
            return Ok(self.stop());
        }
        if let Some(at) = self.next_frame_at {
            if !self.idle_until(at)? {
                return Ok(self.stop());
            }
        }
        let sent_at = Instant::now();
        if let (Some(done), Some(due)) = (self.last_resolved, self.next_frame_at) {
            let overrun = sent_at.saturating_duration_since(due.max(done)).as_millis() as u64;
            self.report.max_tick_overrun_ms = self.report.max_tick_overrun_ms.max(overrun);
        }
        let window = Duration::from_millis(self.timing.window_ms());
        let frame = Frame::from_query(query, &self.map, unix_ms(SystemTime::now() + window));
        let frame_id = frame.frame_id;
        self.send(&ServerMsg::Frame(frame))?;
        self.report.frames_sent += 1;

        let mut deadline = sent_at + window;
        let mut next_frame = sent_at + Duration::from_millis(self.timing.action_period_ms);
        let mut label = Label::Correct;
        while let Some(event) = self.next_event(Some(deadline))? {
            match event {
                Inbound::Feedback(id) if id == frame_id => label = Label::Error,
                Inbound::Feedback(_) => self.report.late_feedback += 1,
                Inbound::Malformed => self.report.malformed += 1,
                Inbound::Closed => return Err(Error::SessionAborted("client disconnected".into())),
                Inbound::Control(Command::End) => return Ok(self.stop()),
                Inbound::Control(Command::Pause) => {
                    let paused = Instant::now();
                    if !self.wait_for_resume()? {
                        return Ok(self.stop());
                    }
                    let held = paused.elapsed();
                    deadline += held;
                    next_frame += held;
                }
                Inbound::Control(_) => {}
            }
        }
        self.transcript.write(&Record::Label { t_ms: self.t_ms(), frame_id, label })?;
        self.report.labels_received += 1;
        self.report.error_labels += u64::from(label == Label::Error);
        self.next_frame_at = Some(next_frame);
        self.last_resolved = Some(Instant::now());
        Ok(FeedbackReply::Label(label))
    }

    fn on_progress(&mut self, stats: &HfStepStats) -> Result<()> {
        if (stats.step + 1) % self.timing.stats_every != 0 {
            return Ok(());
        }
        let msg = ServerMsg::Stats(Stats {
            buffer_size: stats.buffer_size,
            val_accuracy: stats.val_accuracy,
            episodes: stats.episodes_completed,
            success_count: stats.success_so_far,
            labels_received: self.report.labels_received,
            late_feedback: self.report.late_feedback,
            malformed: self.report.malformed,
        });
        self.send(&msg)
    }
}

pub fn session_dir(out_dir: &Path, session_id: u64) -> PathBuf {
    out_dir.join(format!("session_{session_id:03}"))
}

/// Runs one session on an accepted socket and persists its outputs.
/// Returns the report even when the session aborted.
pub fn run_session(mut ws: WebSocket<TcpStream>, cfg: &SessionConfig, session_id: u64) -> Result<SessionReport> {
    let dir = session_dir(&cfg.out_dir, session_id);
    std::fs::create_dir_all(&dir)?;
    let mut transcript = TranscriptWriter::create(&dir.join("transcript.jsonl"))?;
    let report = SessionReport {
        session_id,
        end: SessionEnd::Ended,
        frames_sent: 0,
        labels_received: 0,
        error_labels: 0,
        late_feedback: 0,
        malformed: 0,
        max_tick_overrun_ms: 0,
        abort_reason: None,
    };
    let mut source = LiveSource {
        ws: &mut ws,
        transcript: &mut transcript,
        map: Arc::clone(&cfg.map),
        timing: cfg.timing,
        opened: Instant::now(),
        next_frame_at: None,
        last_resolved: None,
        report,
        ended_by_client: false,
    };

    let result = drive(&mut source, cfg);
    let mut report = source.report.clone();
    let close = match &result {
        Ok((outcome, end)) => {
            report.end = *end;
            write_outputs(&dir, outcome)?;
            CloseFrame { code: CloseCode::Normal, reason: "session over".into() }
        }
        Err((partial, cause)) => {
            report.end = SessionEnd::Aborted;
            report.abort_reason = Some(cause.to_string());
            if let Some(outcome) = partial {
                write_outputs(&dir, outcome)?;
            }
            CloseFrame { code: CloseCode::Error, reason: "session aborted".into() }
        }
    };
    transcript.flush()?;
    metrics::write_json(&dir.join("session.json"), &report)?;
    if ws.close(Some(close)).is_ok() {
        // drain until the client acknowledges the close
        let _ = ws.get_mut().set_read_timeout(Some(Duration::from_millis(500)));
        while ws.read().is_ok() {}
    }
    Ok(report)
}

type Drive = std::result::Result<(HfOutcome, SessionEnd), (Option<HfOutcome>, Error)>;

/// Sends the map and waits in the idle phase. Returns false on `end`.
fn greet(source: &mut LiveSource<'_>) -> Result<bool> {
    source.send(&ServerMsg::Map { map: (*source.map).clone() })?;
    loop {
        match source.next_event(None)? {
            Some(Inbound::Control(Command::Start)) => return Ok(true),
            Some(Inbound::Control(Command::End)) => return Ok(false),
            Some(Inbound::Closed) => return Err(Error::SessionAborted("client left before start".into())),
            Some(Inbound::Feedback(_)) => source.report.late_feedback += 1,
            Some(Inbound::Malformed) => source.report.malformed += 1,
            Some(Inbound::Control(_)) => {}
            None if source.past_cap() => return Ok(false),
            None => {}
        }
    }
}

fn drive(source: &mut LiveSource<'_>, cfg: &SessionConfig) -> Drive {
    match greet(source) {
        Ok(true) => {}
        Ok(false) => return empty_outcome(cfg).map(|o| (o, SessionEnd::Ended)).map_err(|e| (None, e)),
        Err(e) => return Err((None, e)),
    }
    let mut env = NavEnv::new(Arc::clone(&cfg.map), cfg.task);
    match run_hf_stage(&mut env, source, &cfg.hf, cfg.seeds) {
        Ok(outcome) => {
            let end = match outcome.end {
                StageEnd::Completed => SessionEnd::Completed,
                StageEnd::StoppedBySource => SessionEnd::Ended,
            };
            Ok((outcome, end))
        }
        Err(aborted) => Err((Some(*aborted.partial), aborted.cause)),
    }
}

/// The untrained model a session ended before `start` leaves behind.
fn empty_outcome(cfg: &SessionConfig) -> Result<HfOutcome> {
    struct Never;
    impl FeedbackSource for Never {
        fn feedback(&mut self, _: &FeedbackQuery<'_>) -> Result<FeedbackReply> {
            Ok(FeedbackReply::Stop)
        }
    }
    let mut env = NavEnv::new(Arc::clone(&cfg.map), cfg.task);
    run_hf_stage(&mut env, &mut Never, &cfg.hf, cfg.seeds).map_err(|e| e.cause)
}

fn write_outputs(dir: &Path, outcome: &HfOutcome) -> Result<()> {
    hfnav::experiment::write_hf_outputs(dir, outcome).map(|_| ())
}
