//! Consumer and provider agents attached to each domain's chain client,
//! plus the orchestrator stub that stands in for NS instantiation.
//!
//! Agents are reactive state machines. They see delivered chain events
//! and answer with [`Action`]s; the scenario driver turns those into
//! transactions, timers and milestone stamps.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::contract::{ContractCall, ContractError, ContractEvent, DomainId, EndpointInfo, FederationRecord, Requirements, ServiceId};
use crate::harness::Phase;
use crate::ledger::{ChainEvent, ChainPayload};
use crate::rng::{derive_seed, Dist, RngStream};
use crate::sim::secs;

/// Agent-side time to build, sign and hand a transaction to the client API.
pub const CLIENT_OVERHEAD_S: f64 = 2.4;
/// Reported NS instantiation time.
pub const DEFAULT_DEPLOY_LATENCY_S: f64 = 36.0;
pub const DEFAULT_TIMEOUT_S: f64 = 600.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompletionMode {
    /// The consumer closes the record with a `complete_federation` transaction.
    #[default]
    #[serde(rename = "on-chain")]
    OnChain,
    /// Completion is stamped as soon as the deployment is confirmed and read back.
    #[serde(rename = "measurement-only")]
    MeasurementOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumerPolicy {
    /// Time to keep collecting offers after the first one arrives.
    pub bid_wait_s: f64,
    pub requirements: Requirements,
    /// Runs not finished by this instant are marked failed.
    pub timeout_s: f64,
}

impl Default for ConsumerPolicy {
    fn default() -> Self {
        let requirements = [("cpu_cores", "2"), ("ram_gb", "4"), ("image", "nginx"), ("service", "LoadBalancer")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        ConsumerPolicy {
            bid_wait_s: 0.0,
            requirements,
            timeout_s: DEFAULT_TIMEOUT_S,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderPolicy {
    pub pricing: Dist,
    /// Upper bounds on numeric requirements; an announcement asking for
    /// more of any listed resource is ignored. Empty accepts everything.
    pub max_resources: BTreeMap<String, f64>,
}

impl Default for ProviderPolicy {
    fn default() -> Self {
        ProviderPolicy {
            pricing: Dist::Const(10.0),
            max_resources: BTreeMap::new(),
        }
    }
}

impl ProviderPolicy {
    pub fn accepts(&self, requirements: &Requirements) -> bool {
        self.max_resources.iter().all(|(key, cap)| match requirements.get(key) {
            None => true,
            Some(v) => v.trim().parse::<f64>().map(|want| want <= *cap).unwrap_or(false),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentModel {
    pub latency: Dist,
    /// Nominal (onboarding, service creation) split, rescaled to each draw.
    pub breakdown: Option<(f64, f64)>,
    pub failure_prob: f64,
}

impl Default for DeploymentModel {
    fn default() -> Self {
        DeploymentModel {
            latency: Dist::Const(DEFAULT_DEPLOY_LATENCY_S),
            breakdown: None,
            failure_prob: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeploymentOutcome {
    pub latency: Duration,
    pub breakdown: Option<(f64, f64)>,
    /// `None` when the deployment failed.
    pub endpoint: Option<EndpointInfo>,
}

/// Per-provider orchestrator. Deployment only consumes virtual time.
#[derive(Clone, Debug)]
pub struct Orchestrator {
    model: DeploymentModel,
    seed: u64,
    rng: RngStream,
}

impl Orchestrator {
    pub fn new(model: DeploymentModel, seed: u64, stream_id: &str) -> Self {
        Orchestrator {
            model,
            seed,
            rng: RngStream::new(seed, stream_id),
        }
    }

    pub fn deploy_service(&mut self, service_id: ServiceId, requirements: &Requirements) -> DeploymentOutcome {
        let draw = self.model.latency.sample_positive(self.rng.rng_mut());
        let failed = self.model.failure_prob > 0.0 && self.rng.unit() < self.model.failure_prob;
        let breakdown = self.model.breakdown.map(|(a, b)| {
            let onboarding = draw * a / (a + b);
            (onboarding, draw - onboarding)
        });
        let endpoint = (!failed).then(|| synth_endpoint(self.seed, service_id, requirements));
        DeploymentOutcome {
            latency: secs(draw),
            breakdown,
            endpoint,
        }
    }
}

/// Placeholder connection details, deterministic in `(seed, service_id)`.
pub fn synth_endpoint(seed: u64, service_id: ServiceId, requirements: &Requirements) -> EndpointInfo {
    let token = derive_seed(seed, &[b"endpoint", &service_id.0.to_le_bytes()]) as u32;
    let image = requirements.get("image").map(String::as_str).unwrap_or("nginx");
    EndpointInfo {
        external_ip: format!("10.0.{}.1", service_id.0 % 256),
        port: 80,
        descriptor: format!("{image} LoadBalancer {service_id} lb-{token:08x}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timer {
    CloseBidding(ServiceId),
}

/// What an agent wants the driver to do next.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    /// Submit after the client overhead.
    Submit(ContractCall),
    Read(ServiceId),
    Wait { after: Duration, timer: Timer },
    Deploy { service_id: ServiceId, requirements: Requirements },
    Stamp(Phase),
    Finish,
    Fail(String),
}

#[derive(Clone, Debug)]
pub struct ConsumerAgent {
    id: DomainId,
    policy: ConsumerPolicy,
    mode: CompletionMode,
    service: Option<ServiceId>,
    closing: bool,
    reading: bool,
}

impl ConsumerAgent {
    pub fn new(id: DomainId, policy: ConsumerPolicy, mode: CompletionMode) -> Self {
        ConsumerAgent {
            id,
            policy,
            mode,
            service: None,
            closing: false,
            reading: false,
        }
    }

    pub fn id(&self) -> &DomainId {
        &self.id
    }

    pub fn service(&self) -> Option<ServiceId> {
        self.service
    }

    pub fn start(&mut self) -> Vec<Action> {
        vec![Action::Submit(ContractCall::AnnounceService {
            requirements: self.policy.requirements.clone(),
        })]
    }

    fn mine(&self, s: ServiceId) -> bool {
        self.service == Some(s)
    }

    pub fn on_event(&mut self, event: &ChainEvent) -> Vec<Action> {
        let ev = match &event.payload {
            ChainPayload::Contract(ev) => ev,
            ChainPayload::Reverted { sender, call, error } if sender == &self.id => {
                return vec![Action::Fail(format!("{call} reverted: {error}"))];
            }
            ChainPayload::Reverted { .. } => return Vec::new(),
        };
        match ev {
            ContractEvent::ServiceAnnounced { service_id, consumer, .. }
                if consumer == &self.id && self.service.is_none() =>
            {
                self.service = Some(*service_id);
                vec![Action::Stamp(Phase::ServiceAnnounced)]
            }
            ContractEvent::BidOffered { service_id, .. } if self.mine(*service_id) && !self.closing => {
                self.closing = true;
                let close = if self.policy.bid_wait_s > 0.0 {
                    Action::Wait {
                        after: secs(self.policy.bid_wait_s),
                        timer: Timer::CloseBidding(*service_id),
                    }
                } else {
                    Action::Submit(ContractCall::ChooseWinner { service_id: *service_id })
                };
                vec![Action::Stamp(Phase::BidOffered), close]
            }
            ContractEvent::DeploymentConfirmed { service_id, .. } if self.mine(*service_id) && !self.reading => {
                self.reading = true;
                vec![Action::Read(*service_id)]
            }
            ContractEvent::FederationCompleted { service_id, .. } if self.mine(*service_id) => {
                vec![Action::Stamp(Phase::FederationCompleted), Action::Finish]
            }
            _ => Vec::new(),
        }
    }

    pub fn on_timer(&mut self, timer: Timer) -> Vec<Action> {
        match timer {
            Timer::CloseBidding(service_id) => vec![Action::Submit(ContractCall::ChooseWinner { service_id })],
        }
    }

    /// The read-back of the deployed record.
    pub fn on_record(&mut self, service_id: ServiceId, record: Result<FederationRecord, ContractError>) -> Vec<Action> {
        if !self.mine(service_id) {
            return Vec::new();
        }
        match record {
            Ok(rec) if rec.deployment_info.is_some() => {
                let mut out = vec![Action::Stamp(Phase::ConfirmDeployment)];
                match self.mode {
                    CompletionMode::OnChain => out.push(Action::Submit(ContractCall::CompleteFederation { service_id })),
                    CompletionMode::MeasurementOnly => {
                        out.push(Action::Stamp(Phase::FederationCompleted));
                        out.push(Action::Finish);
                    }
                }
                out
            }
            Ok(rec) => vec![Action::Fail(format!("record {service_id} is {} without endpoint", rec.state))],
            Err(e) => vec![Action::Fail(format!("reading {service_id} failed: {e}"))],
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProviderAgent {
    id: DomainId,
    policy: ProviderPolicy,
    pricing_rng: RngStream,
    announced: BTreeMap<ServiceId, Requirements>,
}

impl ProviderAgent {
    pub fn new(id: DomainId, policy: ProviderPolicy, seed: u64) -> Self {
        let pricing_rng = RngStream::new(seed, format!("pricing/{id}"));
        ProviderAgent {
            id,
            policy,
            pricing_rng,
            announced: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &DomainId {
        &self.id
    }

    pub fn on_event(&mut self, event: &ChainEvent) -> Vec<Action> {
        let ChainPayload::Contract(ev) = &event.payload else {
            return Vec::new();
        };
        match ev {
            ContractEvent::ServiceAnnounced { service_id, consumer, requirements } => {
                if consumer == &self.id || !self.policy.accepts(requirements) {
                    return Vec::new();
                }
                self.announced.insert(*service_id, requirements.clone());
                let price = self.pricing_rng.sample(&self.policy.pricing).round().max(0.0) as u64;
                vec![Action::Submit(ContractCall::PlaceBid { service_id: *service_id, price })]
            }
            ContractEvent::WinnerChosen { service_id, winner, .. } if winner == &self.id => {
                let requirements = self.announced.get(service_id).cloned().unwrap_or_default();
                vec![
                    Action::Stamp(Phase::WinnerChosen),
                    Action::Deploy { service_id: *service_id, requirements },
                ]
            }
            _ => Vec::new(),
        }
    }

    pub fn on_deployed(&mut self, service_id: ServiceId, outcome: &DeploymentOutcome) -> Vec<Action> {
        let mut out = vec![Action::Stamp(Phase::ServiceDeployed)];
        if let Some(endpoint) = &outcome.endpoint {
            out.push(Action::Submit(ContractCall::ConfirmDeployment {
                service_id,
                endpoint: endpoint.clone(),
            }));
        }
        out
    }
}
