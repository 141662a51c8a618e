//! Host-side tools: live sessions, metrics and plots.

pub mod metrics;
pub mod plot;
mod session;

pub use session::{telemetry_record, ClientError, Session, MISMATCH_THRESHOLD, REPLY_TIMEOUT};
