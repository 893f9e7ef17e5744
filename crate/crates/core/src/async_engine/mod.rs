//! Asynchronous bounded-delay iterations.
//!
//! At global step `j` the contribution of subdomain `s` was computed from
//! `p_{Γ, j−σ(s,j)}` with `0 ≤ σ(s,j) ≤ D`:
//!
//! ```text
//! p_{Γ,j+1} = p_{Γ,j} − ω (Σ_k X_{j,k} p_{Γ,j−k} + b̂)
//! ```
//!
//! [`run_async_simulated`] replays an explicit delay table and is the
//! reference semantics. [`run_async_concurrent`] runs one thread per rank
//! exchanging versioned payloads through [`WindowCell`]s;
//! [`run_sync_concurrent`] is its fenced synchronous counterpart.

mod concurrent;
mod schedule;
mod simulated;
mod window;

pub use concurrent::{run_async_concurrent, run_sync_concurrent, ConcurrentOptions};
pub use schedule::{partition_by_delay, DelaySchedule, DelayTable, ScheduleKind};
pub use simulated::{run_async_simulated, AsyncTrace, TraceRecord};
pub use window::{Payload, WindowCell, WindowReader};
