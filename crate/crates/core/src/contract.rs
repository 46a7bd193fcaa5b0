//! The federation smart contract: a registry of operators plus one
//! reverse-auction record per announced service.
//!
//! Every call either succeeds, mutating state and yielding exactly one
//! [`ContractEvent`], or reverts with a [`ContractError`] and leaves the
//! contract untouched.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque operator address.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(pub String);

impl DomainId {
    pub fn new(address: impl Into<String>) -> Self {
        DomainId(address.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Consumer,
    Provider,
    Both,
}

impl Role {
    pub fn can_consume(self) -> bool {
        matches!(self, Role::Consumer | Role::Both)
    }

    pub fn can_provide(self) -> bool {
        matches!(self, Role::Provider | Role::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceId(pub u64);

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "svc-{}", self.0)
    }
}

pub type Requirements = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceAnnouncement {
    pub service_id: ServiceId,
    pub consumer: DomainId,
    pub requirements: Requirements,
    pub announced_block: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub service_id: ServiceId,
    pub provider: DomainId,
    pub price: u64,
    pub bid_block: u64,
    pub bid_index: usize,
}

/// Connection details shared by the provider once the service is up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointInfo {
    pub external_ip: String,
    pub port: u16,
    pub descriptor: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FederationState {
    Open,
    WinnerChosen,
    Deployed,
    Completed,
}

impl fmt::Display for FederationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederationRecord {
    pub announcement: ServiceAnnouncement,
    pub bids: Vec<Bid>,
    pub winner: Option<DomainId>,
    pub agreed_price: Option<u64>,
    pub deployment_info: Option<EndpointInfo>,
    pub state: FederationState,
}

impl FederationRecord {
    /// Checks the structural invariants of a record; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let chosen = self.state >= FederationState::WinnerChosen;
        let deployed = self.state >= FederationState::Deployed;
        if self.winner.is_some() != chosen {
            return Err(format!("winner presence does not match state {}", self.state));
        }
        if self.agreed_price.is_some() != chosen {
            return Err(format!("agreed price presence does not match state {}", self.state));
        }
        if self.deployment_info.is_some() != deployed {
            return Err(format!("deployment info presence does not match state {}", self.state));
        }
        if let Some(w) = &self.winner {
            match self.bids.iter().find(|b| &b.provider == w) {
                None => return Err(format!("winner {w} has no bid")),
                Some(b) if Some(b.price) != self.agreed_price => {
                    return Err(format!("winner bid {} differs from agreed price", b.price))
                }
                _ => {}
            }
        }
        for (i, b) in self.bids.iter().enumerate() {
            if b.bid_index != i {
                return Err(format!("bid slot {i} carries index {}", b.bid_index));
            }
            if b.service_id != self.announcement.service_id {
                return Err("bid bound to another service".into());
            }
            if self.bids[..i].iter().any(|o| o.provider == b.provider) {
                return Err(format!("provider {} holds two live bids", b.provider));
            }
        }
        Ok(())
    }
}

/// A contract invocation carried by a transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractCall {
    Register { role: Role },
    AnnounceService { requirements: Requirements },
    PlaceBid { service_id: ServiceId, price: u64 },
    ChooseWinner { service_id: ServiceId },
    ConfirmDeployment { service_id: ServiceId, endpoint: EndpointInfo },
    CompleteFederation { service_id: ServiceId },
}

impl ContractCall {
    pub fn name(&self) -> &'static str {
        match self {
            ContractCall::Register { .. } => "register",
            ContractCall::AnnounceService { .. } => "announce_service",
            ContractCall::PlaceBid { .. } => "place_bid",
            ContractCall::ChooseWinner { .. } => "choose_winner",
            ContractCall::ConfirmDeployment { .. } => "confirm_deployment",
            ContractCall::CompleteFederation { .. } => "complete_federation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    OperatorRegistered,
    ServiceAnnounced,
    BidOffered,
    WinnerChosen,
    DeploymentConfirmed,
    FederationCompleted,
    CallReverted,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::OperatorRegistered,
        EventKind::ServiceAnnounced,
        EventKind::BidOffered,
        EventKind::WinnerChosen,
        EventKind::DeploymentConfirmed,
        EventKind::FederationCompleted,
        EventKind::CallReverted,
    ];
}

/// Event emitted by a successful call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractEvent {
    OperatorRegistered { operator: DomainId, role: Role },
    ServiceAnnounced { service_id: ServiceId, consumer: DomainId, requirements: Requirements },
    BidOffered { service_id: ServiceId, provider: DomainId, price: u64 },
    WinnerChosen { service_id: ServiceId, winner: DomainId, price: u64 },
    DeploymentConfirmed { service_id: ServiceId, endpoint: EndpointInfo },
    FederationCompleted { service_id: ServiceId, agreed_price: u64 },
}

impl ContractEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            ContractEvent::OperatorRegistered { .. } => EventKind::OperatorRegistered,
            ContractEvent::ServiceAnnounced { .. } => EventKind::ServiceAnnounced,
            ContractEvent::BidOffered { .. } => EventKind::BidOffered,
            ContractEvent::WinnerChosen { .. } => EventKind::WinnerChosen,
            ContractEvent::DeploymentConfirmed { .. } => EventKind::DeploymentConfirmed,
            ContractEvent::FederationCompleted { .. } => EventKind::FederationCompleted,
        }
    }

    pub fn service_id(&self) -> Option<ServiceId> {
        match self {
            ContractEvent::OperatorRegistered { .. } => None,
            ContractEvent::ServiceAnnounced { service_id, .. }
            | ContractEvent::BidOffered { service_id, .. }
            | ContractEvent::WinnerChosen { service_id, .. }
            | ContractEvent::DeploymentConfirmed { service_id, .. }
            | ContractEvent::FederationCompleted { service_id, .. } => Some(*service_id),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractError {
    #[error("{0} is already registered")]
    AlreadyRegistered(DomainId),
    #[error("{0} is not registered")]
    NotRegistered(DomainId),
    #[error("{caller} lacks the role required for {call}")]
    RoleNotPermitted { caller: DomainId, call: String },
    #[error("unknown service {0}")]
    UnknownService(ServiceId),
    #[error("service {service_id} is {actual}, expected {expected}")]
    WrongState { service_id: ServiceId, expected: FederationState, actual: FederationState },
    #[error("consumer cannot bid on its own service {0}")]
    SelfBid(ServiceId),
    #[error("only the consumer of {0} may do this")]
    NotConsumer(ServiceId),
    #[error("only the winner of {0} may do this")]
    NotWinner(ServiceId),
    #[error("service {0} has no bids")]
    NoBids(ServiceId),
}

/// Rule that picks the winning bid of a closed auction.
pub trait WinnerPolicy {
    /// Index into `bids` of the winner, or `None` when there are no bids.
    fn select(&self, bids: &[Bid]) -> Option<usize>;
}

/// Lowest price wins; equal prices go to the earliest `bid_index`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LowestPrice;

impl WinnerPolicy for LowestPrice {
    fn select(&self, bids: &[Bid]) -> Option<usize> {
        bids.iter()
            .enumerate()
            .min_by_key(|(_, b)| (b.price, b.bid_index))
            .map(|(i, _)| i)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FederationContract<P = LowestPrice> {
    registry: BTreeMap<DomainId, Role>,
    records: BTreeMap<ServiceId, FederationRecord>,
    next_service: u64,
    policy: P,
}

impl FederationContract<LowestPrice> {
    pub fn new() -> Self {
        Self::with_policy(LowestPrice)
    }
}

impl<P: WinnerPolicy> FederationContract<P> {
    pub fn with_policy(policy: P) -> Self {
        FederationContract {
            registry: BTreeMap::new(),
            records: BTreeMap::new(),
            next_service: 0,
            policy,
        }
    }

    pub fn role_of(&self, id: &DomainId) -> Option<Role> {
        self.registry.get(id).copied()
    }

    pub fn registry(&self) -> &BTreeMap<DomainId, Role> {
        &self.registry
    }

    pub fn records(&self) -> impl Iterator<Item = &FederationRecord> {
        self.records.values()
    }

    /// View call; never mutates.
    pub fn read_record(&self, service_id: ServiceId) -> Result<&FederationRecord, ContractError> {
        self.records.get(&service_id).ok_or(ContractError::UnknownService(service_id))
    }

    /// The service id the next successful announcement will receive.
    pub fn next_service_id(&self) -> ServiceId {
        ServiceId(self.next_service)
    }

    /// Executes `call` on behalf of `caller` as part of the block at `height`.
    pub fn execute(
        &mut self,
        caller: &DomainId,
        call: &ContractCall,
        height: u64,
    ) -> Result<ContractEvent, ContractError> {
        match call {
            ContractCall::Register { role } => self.register(caller, *role),
            ContractCall::AnnounceService { requirements } => {
                self.announce_service(caller, requirements.clone(), height)
            }
            ContractCall::PlaceBid { service_id, price } => {
                self.place_bid(caller, *service_id, *price, height)
            }
            ContractCall::ChooseWinner { service_id } => self.choose_winner(caller, *service_id),
            ContractCall::ConfirmDeployment { service_id, endpoint } => {
                self.confirm_deployment(caller, *service_id, endpoint.clone())
            }
            ContractCall::CompleteFederation { service_id } => {
                self.complete_federation(caller, *service_id)
            }
        }
    }

    pub fn register(&mut self, caller: &DomainId, role: Role) -> Result<ContractEvent, ContractError> {
        if self.registry.contains_key(caller) {
            return Err(ContractError::AlreadyRegistered(caller.clone()));
        }
        self.registry.insert(caller.clone(), role);
        Ok(ContractEvent::OperatorRegistered { operator: caller.clone(), role })
    }

    fn require_role(&self, caller: &DomainId, ok: fn(Role) -> bool, call: &str) -> Result<(), ContractError> {
        match self.role_of(caller) {
            None => Err(ContractError::NotRegistered(caller.clone())),
            Some(r) if !ok(r) => Err(ContractError::RoleNotPermitted {
                caller: caller.clone(),
                call: call.to_string(),
            }),
            Some(_) => Ok(()),
        }
    }

    fn record_in(&self, service_id: ServiceId, expected: FederationState) -> Result<&FederationRecord, ContractError> {
        let rec = self.read_record(service_id)?;
        if rec.state != expected {
            return Err(ContractError::WrongState { service_id, expected, actual: rec.state });
        }
        Ok(rec)
    }

    fn record_mut(&mut self, service_id: ServiceId) -> &mut FederationRecord {
        self.records.get_mut(&service_id).expect("checked by caller")
    }

    pub fn announce_service(
        &mut self,
        caller: &DomainId,
        requirements: Requirements,
        height: u64,
    ) -> Result<ContractEvent, ContractError> {
        self.require_role(caller, Role::can_consume, "announce_service")?;
        let service_id = ServiceId(self.next_service);
        self.next_service += 1;
        let announcement = ServiceAnnouncement {
            service_id,
            consumer: caller.clone(),
            requirements: requirements.clone(),
            announced_block: height,
        };
        self.records.insert(
            service_id,
            FederationRecord {
                announcement,
                bids: Vec::new(),
                winner: None,
                agreed_price: None,
                deployment_info: None,
                state: FederationState::Open,
            },
        );
        Ok(ContractEvent::ServiceAnnounced { service_id, consumer: caller.clone(), requirements })
    }

    pub fn place_bid(
        &mut self,
        caller: &DomainId,
        service_id: ServiceId,
        price: u64,
        height: u64,
    ) -> Result<ContractEvent, ContractError> {
        let rec = self.record_in(service_id, FederationState::Open)?;
        if &rec.announcement.consumer == caller {
            return Err(ContractError::SelfBid(service_id));
        }
        self.require_role(caller, Role::can_provide, "place_bid")?;
        let rec = self.record_mut(service_id);
        match rec.bids.iter_mut().find(|b| &b.provider == caller) {
            Some(existing) => {
                existing.price = price;
                existing.bid_block = height;
            }
            None => {
                let bid_index = rec.bids.len();
                rec.bids.push(Bid {
                    service_id,
                    provider: caller.clone(),
                    price,
                    bid_block: height,
                    bid_index,
                });
            }
        }
        Ok(ContractEvent::BidOffered { service_id, provider: caller.clone(), price })
    }

    pub fn choose_winner(&mut self, caller: &DomainId, service_id: ServiceId) -> Result<ContractEvent, ContractError> {
        let rec = self.record_in(service_id, FederationState::Open)?;
        if &rec.announcement.consumer != caller {
            return Err(ContractError::NotConsumer(service_id));
        }
        let idx = self.policy.select(&rec.bids).ok_or(ContractError::NoBids(service_id))?;
        let (winner, price) = (rec.bids[idx].provider.clone(), rec.bids[idx].price);
        let rec = self.record_mut(service_id);
        rec.winner = Some(winner.clone());
        rec.agreed_price = Some(price);
        rec.state = FederationState::WinnerChosen;
        Ok(ContractEvent::WinnerChosen { service_id, winner, price })
    }

    pub fn confirm_deployment(
        &mut self,
        caller: &DomainId,
        service_id: ServiceId,
        endpoint: EndpointInfo,
    ) -> Result<ContractEvent, ContractError> {
        let rec = self.read_record(service_id)?;
        if rec.winner.as_ref() != Some(caller) {
            return Err(ContractError::NotWinner(service_id));
        }
        self.record_in(service_id, FederationState::WinnerChosen)?;
        let rec = self.record_mut(service_id);
        rec.deployment_info = Some(endpoint.clone());
        rec.state = FederationState::Deployed;
        Ok(ContractEvent::DeploymentConfirmed { service_id, endpoint })
    }

    pub fn complete_federation(
        &mut self,
        caller: &DomainId,
        service_id: ServiceId,
    ) -> Result<ContractEvent, ContractError> {
        let rec = self.read_record(service_id)?;
        if &rec.announcement.consumer != caller {
            return Err(ContractError::NotConsumer(service_id));
        }
        let rec = self.record_in(service_id, FederationState::Deployed)?;
        let agreed_price = rec.agreed_price.expect("deployed record has a price");
        self.record_mut(service_id).state = FederationState::Completed;
        Ok(ContractEvent::FederationCompleted { service_id, agreed_price })
    }
}
