//! The orchestration layer: participant registry, access control, stable
//! device identities, and the request-to-allocation pipeline.
//!
//! A resource request moves through three gates in a fixed order: the access
//! check (is the tenant registered), the capacity check (does the routed
//! path have headroom for the whole lease window), and confirmation (deploy
//! a fresh agreement contract, reserve the load, activate at lease start).
//! Requests that fail only on capacity wait in a strict FIFO queue: nothing
//! behind the head is admitted before the head fits.

mod netlog;

pub use netlog::{Commitment, NetworkLog, UnknownLink, Waitlist};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::contracts::{DeployParams, Engine, InitError, SlaContract, SlaStatus, SlaTerms};
use crate::hash::sha3_256;
use crate::ids::{ContractAddress, LinkId, PdlId, RequestId};
use crate::ledger::Ledger;
use crate::network::routing::{route_for_request, NoPath};
use crate::network::Topology;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantKind {
    Owner,
    Tenant,
    OwnerTenant,
    Vendor,
    Regulator,
}

impl ParticipantKind {
    pub fn can_lease(self) -> bool {
        matches!(self, ParticipantKind::Tenant | ParticipantKind::OwnerTenant)
    }

    /// Regulators observe: they never seal, never submit.
    pub fn is_read_only(self) -> bool {
        matches!(self, ParticipantKind::Regulator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Participant {
    pub pdl_id: PdlId,
    pub kind: ParticipantKind,
    pub label: String,
    /// Opaque credential token issued at registration.
    pub credential: String,
}

/// A tenant's demand for capacity between two devices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRequest {
    pub request_id: RequestId,
    pub tenant: PdlId,
    pub src_device: PdlId,
    pub dst_device: PdlId,
    pub bandwidth: u64,
    pub lease_duration: SimDuration,
    pub latency_target_ms: u64,
    pub submitted_at: SimTime,
}

/// Commercial terms the orchestrator attaches to an agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlaPolicy {
    pub price: u64,
    pub penalty_rate: u64,
}

/// A confirmed grant: the agreed path, its agreement contract, and the
/// half-open validity window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub request_id: RequestId,
    pub tenant: PdlId,
    pub path_devices: Vec<PdlId>,
    pub path_links: Vec<LinkId>,
    pub sla_address: ContractAddress,
    pub window_start: SimTime,
    pub window_end: SimTime,
    pub bandwidth: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    /// Tenant unknown to access control, or not a leasing role.
    NoAgreement,
    /// Source and destination are not connected.
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Confirmed(Allocation),
    Waitlisted,
    Denied(DenyReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TickOutcome {
    /// A lease window ended: load released, agreement expired.
    Expired {
        request: RequestId,
        sla: ContractAddress,
    },
    /// A waitlisted request was admitted.
    Admitted(Allocation),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("label {0:?} already registered")]
pub struct DuplicateLabel(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown device {0:?}")]
pub struct UnknownDevice(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
enum Phase {
    /// Confirmed, load reserved, agreement not yet active.
    Reserved,
    /// Agreement active, window running.
    Live,
    /// Window ended.
    Ended,
}

#[derive(Debug, Clone)]
struct AllocationRecord {
    allocation: Allocation,
    terms: SlaTerms,
    phase: Phase,
}

#[derive(Debug, Clone)]
struct Deferred {
    request: ResourceRequest,
    policy: SlaPolicy,
    path_devices: Vec<PdlId>,
    path_links: Vec<LinkId>,
}

#[derive(Debug, Clone)]
struct DeviceInfo {
    owner: PdlId,
    vendor: PdlId,
    label: String,
}

/// The orchestration manager: registry, access control and allocation state.
#[derive(Debug, Clone)]
pub struct Orchestrator {
    next_id: u64,
    om: PdlId,
    participants: BTreeMap<PdlId, Participant>,
    labels: BTreeMap<String, PdlId>,
    devices: BTreeMap<PdlId, DeviceInfo>,
    device_ids: BTreeMap<String, PdlId>,
    netlog: NetworkLog,
    waitlist: Waitlist<Deferred>,
    allocations: BTreeMap<RequestId, AllocationRecord>,
    slas: BTreeMap<ContractAddress, SlaContract>,
}

impl Orchestrator {
    /// Creates the orchestrator and reserves the first identity for the
    /// orchestration manager itself.
    pub fn new() -> Self {
        let mut orch = Orchestrator {
            next_id: 0,
            om: PdlId::new("n000"),
            participants: BTreeMap::new(),
            labels: BTreeMap::new(),
            devices: BTreeMap::new(),
            device_ids: BTreeMap::new(),
            netlog: NetworkLog::default(),
            waitlist: Waitlist::default(),
            allocations: BTreeMap::new(),
            slas: BTreeMap::new(),
        };
        orch.om = orch.assign_id();
        orch
    }

    fn assign_id(&mut self) -> PdlId {
        let id = PdlId::new(format!("n{:03}", self.next_id));
        self.next_id += 1;
        id
    }

    /// The orchestration manager's own ledger identity.
    pub fn om_id(&self) -> &PdlId {
        &self.om
    }

    /// Registers a participant under a unique label, issuing a fresh
    /// identity and an opaque credential token.
    pub fn register_participant(
        &mut self,
        kind: ParticipantKind,
        label: &str,
    ) -> Result<Participant, DuplicateLabel> {
        if self.labels.contains_key(label) || self.device_ids.contains_key(label) {
            return Err(DuplicateLabel(label.to_owned()));
        }
        let pdl_id = self.assign_id();
        let credential = sha3_256(format!("credential|{pdl_id}|{label}").as_bytes()).to_hex()
            [..16]
            .to_owned();
        let participant = Participant {
            pdl_id: pdl_id.clone(),
            kind,
            label: label.to_owned(),
            credential,
        };
        self.labels.insert(label.to_owned(), pdl_id.clone());
        self.participants.insert(pdl_id, participant.clone());
        Ok(participant)
    }

    pub fn participant(&self, pdl_id: &PdlId) -> Option<&Participant> {
        self.participants.get(pdl_id)
    }

    pub fn participant_by_label(&self, label: &str) -> Option<&Participant> {
        self.labels.get(label).and_then(|id| self.participants.get(id))
    }

    /// Access check used by the request pipeline.
    pub fn is_registered_tenant(&self, pdl_id: &PdlId) -> bool {
        self.participants
            .get(pdl_id)
            .is_some_and(|p| p.kind.can_lease())
    }

    /// Registers a device and assigns its stable identity. Idempotent per
    /// label: a device keeps its id for its whole lifetime.
    pub fn register_device(
        &mut self,
        label: &str,
        owner: PdlId,
        vendor: PdlId,
    ) -> Result<PdlId, DuplicateLabel> {
        if let Some(existing) = self.device_ids.get(label) {
            return Ok(existing.clone());
        }
        if self.labels.contains_key(label) {
            return Err(DuplicateLabel(label.to_owned()));
        }
        let pdl_id = self.assign_id();
        self.device_ids.insert(label.to_owned(), pdl_id.clone());
        self.devices.insert(
            pdl_id.clone(),
            DeviceInfo {
                owner,
                vendor,
                label: label.to_owned(),
            },
        );
        Ok(pdl_id)
    }

    /// Looks up the stable identity of a registered device.
    pub fn assign_pdl_id(&self, device_label: &str) -> Result<PdlId, UnknownDevice> {
        self.device_ids
            .get(device_label)
            .cloned()
            .ok_or_else(|| UnknownDevice(device_label.to_owned()))
    }

    pub fn device_owner(&self, device: &PdlId) -> Option<&PdlId> {
        self.devices.get(device).map(|d| &d.owner)
    }

    pub fn device_label(&self, device: &PdlId) -> Option<&str> {
        self.devices.get(device).map(|d| d.label.as_str())
    }

    /// Installs per-link capacities once the topology is built.
    pub fn install_link_capacities(&mut self, capacities: BTreeMap<LinkId, u64>) {
        self.netlog = NetworkLog::new(capacities);
    }

    pub fn network_log(&self) -> &NetworkLog {
        &self.netlog
    }

    /// Available capacity over a path in a window: the minimum link headroom.
    pub fn query_capacity(
        &self,
        links: &[LinkId],
        start: SimTime,
        end: SimTime,
    ) -> Result<u64, UnknownLink> {
        self.netlog.available(links, start, end)
    }

    /// The request pipeline: access check, then capacity along the routed
    /// path over the prospective window, then confirmation. Insufficient
    /// capacity queues the request FIFO; it is retried whenever a lease
    /// expires.
    pub fn handle_request(
        &mut self,
        request: &ResourceRequest,
        policy: SlaPolicy,
        now: SimTime,
        topology: &Topology,
        engine: &mut Engine,
        ledger: &mut Ledger,
    ) -> Decision {
        if !self.is_registered_tenant(&request.tenant) {
            return Decision::Denied(DenyReason::NoAgreement);
        }
        let path = match route_for_request(topology, &request.src_device, &request.dst_device) {
            Ok(p) => p,
            Err(NoPath) => return Decision::Denied(DenyReason::NoPath),
        };
        let deferred = Deferred {
            request: request.clone(),
            policy,
            path_devices: path.devices,
            path_links: path.links,
        };
        let window_start = now + engine.config().deploy_delay;
        let window_end = window_start + request.lease_duration;
        let fits = self
            .netlog
            .available(&deferred.path_links, window_start, window_end)
            .map(|avail| avail >= request.bandwidth)
            .unwrap_or(false);
        if !fits {
            self.waitlist.push(deferred);
            return Decision::Waitlisted;
        }
        match self.confirm(&deferred, now, engine, ledger) {
            Ok(allocation) => Decision::Confirmed(allocation),
            Err(_) => {
                // ledger backpressure on the deployment: park the request
                // and retry at the next tick
                self.waitlist.push(deferred);
                Decision::Waitlisted
            }
        }
    }

    /// Confirmation step: deploy a fresh agreement contract, reserve load
    /// for the window, record the allocation. Capacity must already be
    /// checked. Reservation and agreement go together or not at all.
    fn confirm(
        &mut self,
        deferred: &Deferred,
        now: SimTime,
        engine: &mut Engine,
        ledger: &mut Ledger,
    ) -> Result<Allocation, crate::contracts::DeployError> {
        let request = &deferred.request;
        let window_start = now + engine.config().deploy_delay;
        let window_end = window_start + request.lease_duration;
        let owner = self
            .devices
            .get(&request.src_device)
            .map(|d| d.owner.clone())
            .unwrap_or_else(|| self.om.clone());
        let terms = SlaTerms {
            owner,
            tenant: request.tenant.clone(),
            src_device: request.src_device.clone(),
            dst_device: request.dst_device.clone(),
            path_devices: deferred.path_devices.clone(),
            path_links: deferred.path_links.clone(),
            lease_start: window_start,
            lease_duration: request.lease_duration,
            price: deferred.policy.price,
            latency_target_ms: request.latency_target_ms,
            penalty_rate: deferred.policy.penalty_rate,
        };
        let om = self.om.clone();
        let address = engine.deploy_contract(&DeployParams::Sla(terms.clone()), &om, now, ledger)?;
        self.netlog.commit(
            &request.request_id,
            &deferred.path_links,
            window_start,
            window_end,
            request.bandwidth,
        );
        let allocation = Allocation {
            request_id: request.request_id.clone(),
            tenant: request.tenant.clone(),
            path_devices: deferred.path_devices.clone(),
            path_links: deferred.path_links.clone(),
            sla_address: address,
            window_start,
            window_end,
            bandwidth: request.bandwidth,
        };
        self.allocations.insert(
            request.request_id.clone(),
            AllocationRecord {
                allocation: allocation.clone(),
                terms,
                phase: Phase::Reserved,
            },
        );
        Ok(allocation)
    }

    /// Activates a confirmed allocation at its window start: the agreement
    /// goes Active on the fresh contract.
    pub fn activate_allocation(
        &mut self,
        request_id: &RequestId,
        now: SimTime,
        engine: &mut Engine,
        ledger: &mut Ledger,
    ) -> Result<SlaContract, InitError> {
        let om = self.om.clone();
        let record = self
            .allocations
            .get_mut(request_id)
            .ok_or(InitError::UnknownContract)?;
        debug_assert_eq!(record.phase, Phase::Reserved);
        let sla = engine.init_sla(
            record.allocation.sla_address,
            record.terms.clone(),
            &om,
            now,
            ledger,
        )?;
        record.phase = Phase::Live;
        self.slas.insert(sla.address, sla.clone());
        Ok(sla)
    }

    /// Expires allocations whose window has ended (half-open, so a window
    /// ending at `now` is over), then drains the waitlist head-first.
    pub fn tick(
        &mut self,
        now: SimTime,
        engine: &mut Engine,
        ledger: &mut Ledger,
    ) -> Vec<TickOutcome> {
        let om = self.om.clone();
        let mut outcomes = Vec::new();

        let ended: Vec<RequestId> = self
            .allocations
            .iter()
            .filter(|(_, r)| r.phase == Phase::Live && r.allocation.window_end <= now)
            .map(|(id, _)| id.clone())
            .collect();
        for request_id in ended {
            let record = self.allocations.get_mut(&request_id).expect("just listed");
            record.phase = Phase::Ended;
            let sla_address = record.allocation.sla_address;
            self.netlog.release(&request_id);
            if let Some(sla) = self.slas.get_mut(&sla_address) {
                sla.transition(SlaStatus::Expired).expect("live to expired");
            }
            // the on-chain record of the expiry; rejection only under
            // saturation, in which case the chain simply lags the log
            let _ = engine.submit_sla_expire(sla_address, &om, now, ledger);
            outcomes.push(TickOutcome::Expired {
                request: request_id,
                sla: sla_address,
            });
        }

        // strict FIFO: stop at the first head that does not fit
        while let Some(head) = self.waitlist.head() {
            let window_start = now + engine.config().deploy_delay;
            let window_end = window_start + head.request.lease_duration;
            let fits = self
                .netlog
                .available(&head.path_links, window_start, window_end)
                .map(|avail| avail >= head.request.bandwidth)
                .unwrap_or(false);
            if !fits {
                break;
            }
            let deferred = self.waitlist.pop().expect("head exists");
            match self.confirm(&deferred, now, engine, ledger) {
                Ok(allocation) => outcomes.push(TickOutcome::Admitted(allocation)),
                Err(_) => {
                    self.waitlist.push_front(deferred);
                    break;
                }
            }
        }
        outcomes
    }

    pub fn allocation(&self, request_id: &RequestId) -> Option<&Allocation> {
        self.allocations.get(request_id).map(|r| &r.allocation)
    }

    pub fn sla(&self, address: &ContractAddress) -> Option<&SlaContract> {
        self.slas.get(address)
    }

    /// Allocations whose window contains `at` and whose agreement is active.
    pub fn live_allocation_count(&self, at: SimTime) -> usize {
        self.allocations
            .values()
            .filter(|r| {
                r.phase == Phase::Live
                    && r.allocation.window_start <= at
                    && at < r.allocation.window_end
            })
            .count()
    }

    pub fn active_sla_count(&self) -> usize {
        self.slas
            .values()
            .filter(|s| s.status == SlaStatus::Active)
            .count()
    }

    pub fn waitlist_len(&self) -> usize {
        self.waitlist.len()
    }
}

impl Default for Orchestrator {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests;
