//! Listener that runs one session at a time and turns away extra clients.

use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use hfnav::error::{Error, Result};
use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::CloseFrame;

use crate::session::{run_session, SessionConfig, SessionReport};

/// Close code sent to a client that connects while a session is running.
pub const BUSY_CLOSE_CODE: u16 = 4409;

pub struct Server {
    listener: TcpListener,
    cfg: SessionConfig,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, cfg: SessionConfig) -> Result<Server> {
        cfg.timing.validate()?;
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Server { listener, cfg })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves sessions one after another; stops after `limit` sessions when
    /// given, otherwise runs until the process is interrupted.
    pub fn serve(self, limit: Option<u64>) -> Result<Vec<SessionReport>> {
        let busy = Arc::new(AtomicBool::new(false));
        let mut running: Option<JoinHandle<Result<SessionReport>>> = None;
        let mut reports = Vec::new();
        let mut started = 0u64;
        loop {
            if let Some(handle) = running.take_if(|h| h.is_finished()) {
                let report = handle.join().map_err(|_| Error::SessionAborted("session thread panicked".into()))??;
                log::info!("session {} finished: {:?}", report.session_id, report.end);
                reports.push(report);
                if limit.is_some_and(|n| started >= n) {
                    return Ok(reports);
                }
            }
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    stream.set_nonblocking(false)?;
                    if busy.load(Ordering::SeqCst) || limit.is_some_and(|n| started >= n) {
                        log::info!("turning away {peer}: session in progress");
                        reject(stream);
                        continue;
                    }
                    let ws = match tungstenite::accept(stream) {
                        Ok(ws) => ws,
                        Err(e) => {
                            log::warn!("handshake with {peer} failed: {e}");
                            continue;
                        }
                    };
                    busy.store(true, Ordering::SeqCst);
                    let (cfg, flag, id) = (self.cfg.clone(), Arc::clone(&busy), started);
                    started += 1;
                    running = Some(std::thread::spawn(move || {
                        let report = run_session(ws, &cfg, id);
                        flag.store(false, Ordering::SeqCst);
                        report
                    }));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(e.into()),
            }
        }
    }
}

fn reject(stream: TcpStream) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(2)));
    if let Ok(mut ws) = tungstenite::accept(stream) {
        let frame = CloseFrame { code: CloseCode::from(BUSY_CLOSE_CODE), reason: "session already in progress".into() };
        if ws.close(Some(frame)).is_ok() {
            while ws.read().is_ok() {}
        }
    }
}
