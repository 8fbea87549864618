//! Firm-level supply-chain systemic risk: shock cascades, an ESRI risk
//! profile per firm, and Metropolis-Hastings / simulated-annealing rewiring
//! that lowers the network-average risk while preserving every firm's
//! production constraints.
//!
//! Pipeline: load or generate an edge list ([`edgelist`], [`synth`]),
//! optionally cut a subnetwork ([`extract`]), calibrate production functions
//! ([`production`]), score systemic risk ([`cascade`]), explore
//! constraint-preserving link swaps ([`rewire`]) under an annealed MH chain
//! ([`optimizer`]), and report network measures ([`metrics`]).

pub mod artifacts;
pub mod cascade;
pub mod edgelist;
pub mod error;
pub mod extract;
pub mod metrics;
pub mod network;
pub mod optimizer;
pub mod plot;
pub mod production;
pub mod rewire;
pub mod synth;
pub mod weight;

pub use error::{Error, Result};
pub use network::{FirmId, LinkId, Mode, ScNetwork, SectorCode, SectorId};
pub use weight::Weight;
