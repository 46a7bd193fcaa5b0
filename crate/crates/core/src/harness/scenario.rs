//! One end-to-end federation: engine, ledger, contract and agents wired
//! together and driven until the consumer finishes or times out.

use std::fmt;
use std::time::Duration;

use crate::contract::{ContractCall, DomainId, EventKind, Role, ServiceId};
use crate::domains::{
    Action, CompletionMode, ConsumerAgent, ConsumerPolicy, DeploymentModel, DeploymentOutcome, Orchestrator,
    ProviderAgent, ProviderPolicy, Timer, CLIENT_OVERHEAD_S,
};
use crate::harness::PhaseTimeline;
use crate::ledger::{ChainPayload, Ledger, LedgerEvent, LedgerOutput, NetworkProfile};
use crate::sim::{secs, Engine, VirtualTime};

/// Everything needed to build and run one federation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub run_id: u64,
    pub seed: u64,
    pub profile: NetworkProfile,
    pub n_providers: usize,
    pub consumer: ConsumerPolicy,
    pub provider: ProviderPolicy,
    /// Per-provider policies; provider `i` uses entry `i` when present.
    pub provider_overrides: Vec<ProviderPolicy>,
    pub deployment: DeploymentModel,
    pub client_overhead_s: f64,
    pub completion: CompletionMode,
}

impl RunSpec {
    pub fn new(profile: NetworkProfile, seed: u64) -> Self {
        RunSpec {
            run_id: 0,
            seed,
            profile,
            n_providers: 1,
            consumer: ConsumerPolicy::default(),
            provider: ProviderPolicy::default(),
            provider_overrides: Vec::new(),
            deployment: DeploymentModel::default(),
            client_overhead_s: CLIENT_OVERHEAD_S,
            completion: CompletionMode::OnChain,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentRef {
    Consumer,
    Provider(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorldEvent {
    Ledger(LedgerEvent),
    Submit { agent: AgentRef, call: ContractCall },
    Timer(Timer),
    Deployed { provider: usize, service_id: ServiceId, outcome: DeploymentOutcome },
    Start,
    Timeout,
}

impl From<LedgerEvent> for WorldEvent {
    fn from(e: LedgerEvent) -> Self {
        WorldEvent::Ledger(e)
    }
}

/// One narrated line of a traced run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub at: VirtualTime,
    pub text: String,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:>10.3}s] {}", self.at.as_secs(), self.text)
    }
}

pub struct RunOutcome {
    pub timeline: PhaseTimeline,
    pub ledger: Ledger,
    pub trace: Vec<TraceLine>,
    /// Transactions sent by agents that reverted on-chain.
    pub reverts: usize,
}

struct World {
    ledger: Ledger,
    consumer: ConsumerAgent,
    providers: Vec<ProviderAgent>,
    orchestrators: Vec<Orchestrator>,
    timeline: PhaseTimeline,
    overhead: Duration,
    trace: Option<Vec<TraceLine>>,
    reverts: usize,
    done: bool,
}

pub fn consumer_id() -> DomainId {
    DomainId::new("consumer-0")
}

pub fn provider_id(i: usize) -> DomainId {
    DomainId::new(format!("provider-{i}"))
}

/// Runs one federation to completion or timeout.
pub fn run_federation(spec: &RunSpec, traced: bool) -> RunOutcome {
    let mut ledger = Ledger::new(spec.profile.clone(), spec.seed);
    let cid = consumer_id();
    ledger.genesis_register(cid.clone(), Role::Consumer).expect("fresh registry");
    ledger.subscribe(
        cid.clone(),
        [
            EventKind::ServiceAnnounced,
            EventKind::BidOffered,
            EventKind::DeploymentConfirmed,
            EventKind::FederationCompleted,
            EventKind::CallReverted,
        ],
    );
    let mut providers = Vec::with_capacity(spec.n_providers);
    let mut orchestrators = Vec::with_capacity(spec.n_providers);
    for i in 0..spec.n_providers {
        let pid = provider_id(i);
        ledger.genesis_register(pid.clone(), Role::Provider).expect("unique ids");
        ledger.subscribe(pid.clone(), [EventKind::ServiceAnnounced, EventKind::WinnerChosen, EventKind::CallReverted]);
        let policy = spec.provider_overrides.get(i).unwrap_or(&spec.provider);
        providers.push(ProviderAgent::new(pid.clone(), policy.clone(), spec.seed));
        orchestrators.push(Orchestrator::new(spec.deployment.clone(), spec.seed, &format!("deployment/{pid}")));
    }

    let mut world = World {
        ledger,
        consumer: ConsumerAgent::new(cid, spec.consumer.clone(), spec.completion),
        providers,
        orchestrators,
        timeline: PhaseTimeline::new(spec.run_id, spec.profile.name.clone(), spec.profile.block_period_s, spec.seed),
        overhead: secs(spec.client_overhead_s),
        trace: traced.then(Vec::new),
        reverts: 0,
        done: false,
    };

    let mut engine: Engine<WorldEvent> = Engine::new();
    world.ledger.start(&mut engine);
    let deadline = VirtualTime::from_secs(spec.consumer.timeout_s);
    engine.schedule(VirtualTime::ZERO, WorldEvent::Start).expect("at genesis");
    engine.schedule(deadline, WorldEvent::Timeout).expect("deadline is not in the past");
    engine
        .run_until(deadline, |engine, ev| world.handle(engine, ev.kind))
        .expect("deadline is not in the past");
    if !world.done {
        world.timeline.mark_failed("timeout");
    }

    RunOutcome {
        timeline: world.timeline,
        ledger: world.ledger,
        trace: world.trace.unwrap_or_default(),
        reverts: world.reverts,
    }
}

impl World {
    fn note(&mut self, at: VirtualTime, text: impl FnOnce() -> String) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceLine { at, text: text() });
        }
    }

    fn agent_id(&self, agent: AgentRef) -> DomainId {
        match agent {
            AgentRef::Consumer => self.consumer.id().clone(),
            AgentRef::Provider(i) => self.providers[i].id().clone(),
        }
    }

    fn handle(&mut self, engine: &mut Engine<WorldEvent>, ev: WorldEvent) {
        let now = engine.now();
        match ev {
            WorldEvent::Start => {
                let acts = self.consumer.start();
                self.apply(engine, AgentRef::Consumer, acts);
            }
            WorldEvent::Timeout => {
                if !self.done {
                    self.note(now, || "TIMEOUT run did not complete".into());
                    self.timeline.mark_failed("timeout");
                    self.done = true;
                    engine.halt();
                }
            }
            WorldEvent::Submit { agent, call } => {
                let sender = self.agent_id(agent);
                let name = call.name();
                match self.ledger.submit_tx(engine, &sender, call) {
                    Ok(tx) => self.note(now, || format!("SUBMIT  {sender} {tx} {name}")),
                    Err(e) => self.fail(engine, format!("submission rejected: {e}")),
                }
            }
            WorldEvent::Timer(timer) => {
                let acts = self.consumer.on_timer(timer);
                self.apply(engine, AgentRef::Consumer, acts);
            }
            WorldEvent::Deployed { provider, service_id, outcome } => {
                let pid = self.providers[provider].id().clone();
                let ok = outcome.endpoint.is_some();
                self.note(now, || {
                    format!("DEPLOY  {pid} {service_id} {}", if ok { "ready" } else { "failed" })
                });
                let acts = self.providers[provider].on_deployed(service_id, &outcome);
                self.apply(engine, AgentRef::Provider(provider), acts);
            }
            WorldEvent::Ledger(lev) => match self.ledger.handle(engine, lev) {
                LedgerOutput::Sealed { height, txs, .. } => {
                    self.note(now, || format!("SEAL    block {height} with {} tx(s)", txs.len()));
                }
                LedgerOutput::Event { client, event } => {
                    self.note(now, || format!("EVENT   {client} <- {:?} (block {})", event.kind(), event.emitted_in));
                    if let ChainPayload::Reverted { sender, .. } = &event.payload {
                        if sender == &client {
                            self.reverts += 1;
                        }
                    }
                    if &client == self.consumer.id() {
                        let acts = self.consumer.on_event(&event);
                        self.apply(engine, AgentRef::Consumer, acts);
                    } else if let Some(i) = self.providers.iter().position(|p| p.id() == &client) {
                        let acts = self.providers[i].on_event(&event);
                        self.apply(engine, AgentRef::Provider(i), acts);
                    }
                }
                LedgerOutput::Record { client, service_id, result } => {
                    self.note(now, || match &result {
                        Ok(r) => format!("READ    {client} {service_id} -> {}", r.state),
                        Err(e) => format!("READ    {client} {service_id} -> {e}"),
                    });
                    if &client == self.consumer.id() {
                        let acts = self.consumer.on_record(service_id, result);
                        self.apply(engine, AgentRef::Consumer, acts);
                    }
                }
            },
        }
    }

    fn fail(&mut self, engine: &mut Engine<WorldEvent>, reason: String) {
        let now = engine.now();
        self.note(now, || format!("FAILED  {reason}"));
        self.timeline.mark_failed(reason);
        self.done = true;
        engine.halt();
    }

    fn apply(&mut self, engine: &mut Engine<WorldEvent>, agent: AgentRef, actions: Vec<Action>) {
        let now = engine.now();
        for action in actions {
            if self.done {
                return;
            }
            match action {
                Action::Submit(call) => {
                    engine.schedule_in(self.overhead, WorldEvent::Submit { agent, call });
                }
                Action::Read(service_id) => {
                    let id = self.agent_id(agent);
                    self.ledger.read_record(engine, &id, service_id);
                }
                Action::Wait { after, timer } => {
                    engine.schedule_in(after, WorldEvent::Timer(timer));
                }
                Action::Deploy { service_id, requirements } => {
                    let AgentRef::Provider(i) = agent else { continue };
                    let outcome = self.orchestrators[i].deploy_service(service_id, &requirements);
                    let latency = outcome.latency;
                    let pid = self.providers[i].id().clone();
                    self.note(now, || format!("DEPLOY  {pid} {service_id} started ({:.3}s)", latency.as_secs_f64()));
                    engine.schedule_in(latency, WorldEvent::Deployed { provider: i, service_id, outcome });
                }
                Action::Stamp(phase) => {
                    self.note(now, || format!("STAMP   {phase}"));
                    self.timeline.stamp(phase, now);
                }
                Action::Finish => {
                    self.note(now, || "DONE    federation completed".into());
                    self.done = true;
                    engine.halt();
                }
                Action::Fail(reason) => self.fail(engine, reason),
            }
        }
    }
}
