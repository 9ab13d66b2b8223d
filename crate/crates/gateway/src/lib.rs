//! Live feedback sessions over WebSocket.
//!
//! A client connects, receives the map, and sends `start`. From then on the
//! server shows one action per period as a `frame` and the client may flag
//! it as wrong with a `feedback` message before the frame's deadline.
//! Frames nobody flags count as correct. Every label goes straight into the
//! online learner, and everything said in either direction is written to a
//! transcript that [`transcript::replay`] can run again offline.

pub mod protocol;
pub mod server;
pub mod session;
pub mod transcript;

pub use server::{Server, BUSY_CLOSE_CODE};
pub use session::{SessionConfig, SessionEnd, SessionReport};
