//! Deterministic simulator for accountable network-infrastructure sharing
//! over a permissioned distributed ledger.
//!
//! Mutually distrusting operators and vendors share network infrastructure
//! under on-ledger service agreements. Every device carries a packet
//! processor that hashes per-flow metadata onto the ledger; an audit engine
//! later verifies disclosed preimages against the chain, measures per-flow
//! latency, detects agreement violations and attributes blame.
//!
//! The crate is organized around the moving parts of that pipeline:
//!
//! - [`ledger`]: hash-chained blocks sealed by rotating authorities, with
//!   rate-capped admission and standalone chain verification.
//! - [`contracts`]: the deterministic contract engine — agreement and
//!   flow-record state machines replayable from the chain.
//! - [`orchestration`]: participant registry, access control, and the
//!   capacity-checked request-to-allocation pipeline.
//! - [`network`]: discrete-event simulation of topology, routing, flows and
//!   device misbehavior models.
//! - [`audit`]: preimage verification, violation detection, blame
//!   attribution and blacklisting.
//! - [`scenario`] / [`run`]: the scenario file format and the runner that
//!   turns one into reproducible artifacts.
//!
//! Batch read-side analysis (chain verification, flow audits) is
//! data-parallel via rayon under the default `parallel` feature; disabling
//! it swaps in sequential fallbacks with identical results.

pub mod audit;
pub mod contracts;
pub mod hash;
pub mod ids;
pub mod ledger;
pub mod network;
pub mod orchestration;
pub mod run;
pub mod scenario;
pub mod time;

pub use hash::{sha3_256, Digest32};
pub use ids::{ContractAddress, FlowId, LinkId, PdlId, RequestId};
pub use time::{SimDuration, SimTime};
