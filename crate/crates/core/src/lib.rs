//! Discrete-event simulation of multi-cloud service federation negotiated
//! through a smart contract on a Proof-of-Authority chain.
//!
//! Layers, bottom up: [`sim`] (virtual clock and event queue), [`rng`]
//! (seeded streams), [`contract`] (federation state machine), [`ledger`]
//! (block sealing and event delivery), [`domains`] (consumer/provider
//! agents and the deployment model), [`harness`] (campaigns, statistics,
//! result files) and [`config`] (campaign configuration).

pub mod config;
pub mod contract;
pub mod domains;
pub mod harness;
pub mod ledger;
pub mod rng;
pub mod sim;

pub use config::{resolve, CampaignConfig, ConfigError, ConfigOverrides};
pub use contract::{ContractCall, ContractError, DomainId, FederationContract, FederationRecord, Role, ServiceId};
pub use harness::{aggregate, phase_durations, run_campaign, run_federation, Phase, PhaseStats, PhaseTimeline, RunSpec};
pub use ledger::{expected_inclusion_wait, Ledger, NetworkProfile, ProfileKind};
pub use rng::{Dist, RngStream};
pub use sim::{Engine, VirtualTime};
