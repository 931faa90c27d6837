//! Deterministic contract engine.
//!
//! Two contract kinds live on the ledger: SLA agreements and flow-record
//! registries. Contracts here are native state machines, not a bytecode VM:
//! execution of a committed transaction is a pure function of (state, tx),
//! so replaying a chain from genesis reproduces the final state bit-exactly.
//! Invalid committed transactions become recorded no-ops with a failure flag
//! rather than errors, which keeps attempted abuse visible to audits.
//!
//! The engine front-end (deploy / init / record) is the submission path used
//! while a simulation runs: it validates against both committed state and
//! what is still pending in the mempool, builds the transaction, and submits
//! it to the ledger.

pub mod preimage;
pub mod sla;

pub use preimage::{FlowPreimage, PreimageParseError};
pub use sla::{InvalidSlaTerms, SlaContract, SlaStatus, SlaTerms};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::hash::{sha3_256, Digest32};
use crate::ids::{ContractAddress, FlowId, LinkId, PdlId};
use crate::ledger::{Block, Ledger, RejectReason, SubmitOutcome, Transaction};
use crate::orchestration::ParticipantKind;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    Sla,
    FlowRegistry,
}

/// Who recorded a flow digest: the flow's source device, its destination, or
/// an intermediate hop (full-path recording mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordRole {
    Source,
    Destination,
    Hop,
}

impl std::fmt::Display for RecordRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecordRole::Source => "source",
            RecordRole::Destination => "destination",
            RecordRole::Hop => "hop",
        })
    }
}

impl RecordRole {
    pub fn parse(s: &str) -> Option<RecordRole> {
        match s {
            "source" => Some(RecordRole::Source),
            "destination" => Some(RecordRole::Destination),
            "hop" => Some(RecordRole::Hop),
            _ => None,
        }
    }
}

/// Governance actions recorded to the ledger for transparency. Device and
/// link registrations deliberately carry no network addresses: stable ids
/// and ownership are public, addressing is not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum GovAction {
    RegisterParticipant {
        pdl_id: PdlId,
        kind: ParticipantKind,
        label: String,
    },
    RegisterDevice {
        pdl_id: PdlId,
        owner: PdlId,
        vendor: PdlId,
        label: String,
    },
    RegisterLink {
        link: LinkId,
        a: PdlId,
        b: PdlId,
        latency_ms: u64,
        capacity: u64,
        cost: u64,
    },
    Blacklist {
        node: PdlId,
        reason: String,
    },
}

/// The structured content of a transaction payload. Encoded as compact JSON
/// bytes; the ledger treats it as opaque.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TxPayload {
    Governance {
        #[serde(flatten)]
        action: GovAction,
    },
    Deploy {
        kind: ContractKind,
        address: ContractAddress,
        usable_from: SimTime,
    },
    SlaInit {
        address: ContractAddress,
        terms: SlaTerms,
    },
    SlaExpire {
        address: ContractAddress,
    },
    FlowRecord {
        registry: ContractAddress,
        flow: FlowId,
        sla: ContractAddress,
        role: RecordRole,
        digest: Digest32,
    },
}

impl TxPayload {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("payload serializes")
    }

    pub fn decode(bytes: &[u8]) -> Result<TxPayload, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParticipantRecord {
    pub kind: ParticipantKind,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviceRecord {
    pub owner: PdlId,
    pub vendor: PdlId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkRecord {
    pub a: PdlId,
    pub b: PdlId,
    pub latency_ms: u64,
    pub capacity: u64,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlacklistRecord {
    pub reason: String,
    pub commit_height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeployedContract {
    pub kind: ContractKind,
    pub usable_from: SimTime,
}

/// One committed flow record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowRecordEntry {
    pub digest: Digest32,
    pub submitter: PdlId,
    pub role: RecordRole,
    pub flow: FlowId,
    pub sla: ContractAddress,
    pub commit_height: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RegistryState {
    pub entries: Vec<FlowRecordEntry>,
    #[serde(skip)]
    index: BTreeSet<(Digest32, PdlId, RecordRole)>,
}

impl RegistryState {
    pub fn contains(&self, digest: Digest32, submitter: &PdlId, role: RecordRole) -> bool {
        self.index.contains(&(digest, submitter.clone(), role))
    }

    /// First committed entry for (flow, role), in commit order.
    pub fn entry_for(&self, flow: &FlowId, role: RecordRole) -> Option<&FlowRecordEntry> {
        self.entries
            .iter()
            .find(|e| &e.flow == flow && e.role == role)
    }
}

/// A committed transaction that executed as a no-op, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecFailure {
    pub height: u64,
    pub tx_index: usize,
    pub reason: String,
}

/// Contract state as reproduced from the committed chain. Everything in here
/// is a pure fold over block transactions in commit order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ChainState {
    pub participants: BTreeMap<PdlId, ParticipantRecord>,
    pub devices: BTreeMap<PdlId, DeviceRecord>,
    pub links: BTreeMap<LinkId, LinkRecord>,
    pub blacklisted: BTreeMap<PdlId, BlacklistRecord>,
    pub contracts: BTreeMap<ContractAddress, DeployedContract>,
    pub slas: BTreeMap<ContractAddress, SlaContract>,
    pub registries: BTreeMap<ContractAddress, RegistryState>,
    pub failures: Vec<ExecFailure>,
}

impl ChainState {
    /// Executes one committed transaction. Invalid content is recorded as a
    /// flagged no-op, never an error.
    pub fn execute(&mut self, tx: &Transaction, height: u64, tx_index: usize) {
        let payload = match TxPayload::decode(&tx.payload) {
            Ok(p) => p,
            Err(e) => {
                self.flag(height, tx_index, format!("undecodable payload: {e}"));
                return;
            }
        };
        if let Err(reason) = self.apply(payload, &tx.submitter, height) {
            self.flag(height, tx_index, reason);
        }
    }

    fn flag(&mut self, height: u64, tx_index: usize, reason: String) {
        self.failures.push(ExecFailure {
            height,
            tx_index,
            reason,
        });
    }

    fn apply(&mut self, payload: TxPayload, submitter: &PdlId, height: u64) -> Result<(), String> {
        match payload {
            TxPayload::Governance { action } => self.apply_governance(action, height),
            TxPayload::Deploy {
                kind,
                address,
                usable_from,
            } => {
                if self.contracts.contains_key(&address) {
                    return Err(format!("contract {address} already deployed"));
                }
                self.contracts
                    .insert(address, DeployedContract { kind, usable_from });
                if kind == ContractKind::FlowRegistry {
                    self.registries.insert(address, RegistryState::default());
                }
                Ok(())
            }
            TxPayload::SlaInit { address, terms } => {
                match self.contracts.get(&address) {
                    Some(c) if c.kind == ContractKind::Sla => {}
                    Some(_) => return Err(format!("contract {address} is not an SLA")),
                    None => return Err(format!("contract {address} not deployed")),
                }
                if self.slas.contains_key(&address) {
                    return Err(format!("SLA {address} already active"));
                }
                terms.validate().map_err(|e| e.to_string())?;
                let mut sla = SlaContract {
                    address,
                    terms,
                    status: SlaStatus::Pending,
                };
                sla.transition(SlaStatus::Active).expect("pending to active");
                self.slas.insert(address, sla);
                Ok(())
            }
            TxPayload::SlaExpire { address } => {
                let sla = self
                    .slas
                    .get_mut(&address)
                    .ok_or_else(|| format!("SLA {address} not initialized"))?;
                sla.transition(SlaStatus::Expired).map_err(|e| e.to_string())
            }
            TxPayload::FlowRecord {
                registry,
                flow,
                sla,
                role,
                digest,
            } => self.apply_record(registry, flow, sla, role, digest, submitter, height),
        }
    }

    fn apply_governance(&mut self, action: GovAction, height: u64) -> Result<(), String> {
        match action {
            GovAction::RegisterParticipant { pdl_id, kind, label } => {
                if self.participants.contains_key(&pdl_id) {
                    return Err(format!("participant {pdl_id} already registered"));
                }
                self.participants
                    .insert(pdl_id, ParticipantRecord { kind, label });
                Ok(())
            }
            GovAction::RegisterDevice {
                pdl_id,
                owner,
                vendor,
                label,
            } => {
                if self.devices.contains_key(&pdl_id) {
                    return Err(format!("device {pdl_id} already registered"));
                }
                self.devices
                    .insert(pdl_id, DeviceRecord { owner, vendor, label });
                Ok(())
            }
            GovAction::RegisterLink {
                link,
                a,
                b,
                latency_ms,
                capacity,
                cost,
            } => {
                if self.links.contains_key(&link) {
                    return Err(format!("link {link} already registered"));
                }
                self.links.insert(
                    link,
                    LinkRecord {
                        a,
                        b,
                        latency_ms,
                        capacity,
                        cost,
                    },
                );
                Ok(())
            }
            GovAction::Blacklist { node, reason } => {
                if self.blacklisted.contains_key(&node) {
                    return Err(format!("node {node} already blacklisted"));
                }
                self.blacklisted.insert(
                    node,
                    BlacklistRecord {
                        reason,
                        commit_height: height,
                    },
                );
                Ok(())
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_record(
        &mut self,
        registry: ContractAddress,
        flow: FlowId,
        sla: ContractAddress,
        role: RecordRole,
        digest: Digest32,
        submitter: &PdlId,
        height: u64,
    ) -> Result<(), String> {
        let submitter = submitter.clone();
        match self.contracts.get(&registry) {
            Some(c) if c.kind == ContractKind::FlowRegistry => {}
            _ => return Err(format!("no flow registry at {registry}")),
        }
        let reg = self.registries.entry(registry).or_default();
        if !reg.index.insert((digest, submitter.clone(), role)) {
            return Err(format!("duplicate record for flow {flow}"));
        }
        reg.entries.push(FlowRecordEntry {
            digest,
            submitter,
            role,
            flow,
            sla,
            commit_height: height,
        });
        Ok(())
    }

    /// Digest of the full state; two replays of the same chain agree on it.
    pub fn digest(&self) -> Digest32 {
        sha3_256(&serde_json::to_vec(self).expect("state serializes"))
    }
}

/// Folds a committed chain into its contract state.
pub fn replay_chain(chain: &[Block]) -> ChainState {
    let mut state = ChainState::default();
    for block in chain {
        apply_block(&mut state, block);
    }
    state
}

/// Executes one block's transactions against the state in commit order.
pub fn apply_block(state: &mut ChainState, block: &Block) {
    let height = block.header.height;
    for (idx, tx) in block.transactions.iter().enumerate() {
        state.execute(tx, height, idx);
    }
}

#[derive(Debug, Clone)]
pub struct ContractsConfig {
    /// Delay between deployment and the contract becoming usable; covers
    /// compile plus install time.
    pub deploy_delay: SimDuration,
}

impl Default for ContractsConfig {
    fn default() -> Self {
        ContractsConfig {
            deploy_delay: SimDuration::from_secs(14),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeployParams {
    Sla(SlaTerms),
    FlowRegistry,
}

impl DeployParams {
    fn kind(&self) -> ContractKind {
        match self {
            DeployParams::Sla(_) => ContractKind::Sla,
            DeployParams::FlowRegistry => ContractKind::FlowRegistry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeployError {
    #[error("invalid contract parameters: {0}")]
    InvalidParams(#[from] InvalidSlaTerms),
    #[error("deployment transaction rejected: {0:?}")]
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("no contract at this address")]
    UnknownContract,
    #[error("contract not usable before {usable_from}")]
    NotYetUsable { usable_from: SimTime },
    #[error("SLA already active")]
    AlreadyActive,
    #[error("invalid terms: {0}")]
    InvalidParams(#[from] InvalidSlaTerms),
    #[error("init transaction rejected: {0:?}")]
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("no flow registry at this address")]
    UnknownRegistry,
    #[error("registry not usable before {usable_from}")]
    NotYetUsable { usable_from: SimTime },
    #[error("duplicate record (digest, submitter, role) for this registry")]
    DuplicateRecord,
    #[error("record transaction rejected: {0:?}")]
    LedgerRejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transaction rejected: {0:?}")]
pub struct SubmitRejected(pub RejectReason);

/// Submission front-end plus committed state. Tracks what is pending in the
/// mempool so duplicate and double-init checks cover in-flight transactions.
#[derive(Debug, Clone)]
pub struct Engine {
    config: ContractsConfig,
    state: ChainState,
    deploy_counters: BTreeMap<PdlId, u64>,
    pending_contracts: BTreeMap<ContractAddress, DeployedContract>,
    pending_inits: BTreeSet<ContractAddress>,
    pending_records: BTreeSet<(ContractAddress, Digest32, PdlId, RecordRole)>,
}

impl Engine {
    pub fn new(config: ContractsConfig) -> Self {
        Engine {
            config,
            state: ChainState::default(),
            deploy_counters: BTreeMap::new(),
            pending_contracts: BTreeMap::new(),
            pending_inits: BTreeSet::new(),
            pending_records: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &ContractsConfig {
        &self.config
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    fn lookup_contract(&self, address: &ContractAddress) -> Option<&DeployedContract> {
        self.state
            .contracts
            .get(address)
            .or_else(|| self.pending_contracts.get(address))
    }

    /// Deterministic address for the deployer's n-th deployment.
    fn allocate_address(&mut self, deployer: &PdlId, kind: ContractKind) -> ContractAddress {
        let counter = self.deploy_counters.entry(deployer.clone()).or_insert(0);
        let tag = format!("contract|{deployer}|{counter}|{kind:?}");
        *counter += 1;
        ContractAddress(sha3_256(tag.as_bytes()))
    }

    /// Validates params, allocates an address and submits the deployment.
    /// The contract becomes usable `deploy_delay` after `now`.
    pub fn deploy_contract(
        &mut self,
        params: &DeployParams,
        deployer: &PdlId,
        now: SimTime,
        ledger: &mut Ledger,
    ) -> Result<ContractAddress, DeployError> {
        if let DeployParams::Sla(terms) = params {
            terms.validate()?;
        }
        let kind = params.kind();
        let address = self.allocate_address(deployer, kind);
        let usable_from = now + self.config.deploy_delay;
        let payload = TxPayload::Deploy {
            kind,
            address,
            usable_from,
        };
        let tx = Transaction {
            submitter: deployer.clone(),
            contract: ContractAddress::GOVERNANCE,
            payload: payload.encode(),
            nonce: ledger.next_nonce(deployer),
            submit_ts: now,
        };
        match ledger.submit_transaction(tx, now) {
            SubmitOutcome::Admitted => {
                self.pending_contracts
                    .insert(address, DeployedContract { kind, usable_from });
                Ok(address)
            }
            SubmitOutcome::Rejected(r) => Err(DeployError::Rejected(r)),
        }
    }

    /// Activates an agreement on a deployed, usable SLA contract.
    pub fn init_sla(
        &mut self,
        address: ContractAddress,
        terms: SlaTerms,
        caller: &PdlId,
        now: SimTime,
        ledger: &mut Ledger,
    ) -> Result<SlaContract, InitError> {
        let deployed = self
            .lookup_contract(&address)
            .ok_or(InitError::UnknownContract)?;
        if deployed.kind != ContractKind::Sla {
            return Err(InitError::UnknownContract);
        }
        if now < deployed.usable_from {
            return Err(InitError::NotYetUsable {
                usable_from: deployed.usable_from,
            });
        }
        if self.state.slas.contains_key(&address) || self.pending_inits.contains(&address) {
            return Err(InitError::AlreadyActive);
        }
        terms.validate()?;
        let payload = TxPayload::SlaInit {
            address,
            terms: terms.clone(),
        };
        let tx = Transaction {
            submitter: caller.clone(),
            contract: address,
            payload: payload.encode(),
            nonce: ledger.next_nonce(caller),
            submit_ts: now,
        };
        match ledger.submit_transaction(tx, now) {
            SubmitOutcome::Admitted => {
                self.pending_inits.insert(address);
                let mut sla = SlaContract {
                    address,
                    terms,
                    status: SlaStatus::Pending,
                };
                sla.transition(SlaStatus::Active).expect("pending to active");
                Ok(sla)
            }
            SubmitOutcome::Rejected(r) => Err(InitError::Rejected(r)),
        }
    }

    /// Hashes a preimage and submits the digest to a flow registry. The
    /// preimage itself never reaches the chain.
    #[allow(clippy::too_many_arguments)]
    pub fn record_flow(
        &mut self,
        registry: ContractAddress,
        preimage: &FlowPreimage,
        role: RecordRole,
        flow: &FlowId,
        sla: ContractAddress,
        submitter: &PdlId,
        now: SimTime,
        ledger: &mut Ledger,
    ) -> Result<Transaction, RecordError> {
        let deployed = self
            .lookup_contract(&registry)
            .ok_or(RecordError::UnknownRegistry)?;
        if deployed.kind != ContractKind::FlowRegistry {
            return Err(RecordError::UnknownRegistry);
        }
        if now < deployed.usable_from {
            return Err(RecordError::NotYetUsable {
                usable_from: deployed.usable_from,
            });
        }
        let digest = preimage.digest();
        let key = (registry, digest, submitter.clone(), role);
        let committed_dup = self
            .state
            .registries
            .get(&registry)
            .is_some_and(|r| r.contains(digest, submitter, role));
        if committed_dup || self.pending_records.contains(&key) {
            return Err(RecordError::DuplicateRecord);
        }
        let payload = TxPayload::FlowRecord {
            registry,
            flow: flow.clone(),
            sla,
            role,
            digest,
        };
        let tx = Transaction {
            submitter: submitter.clone(),
            contract: registry,
            payload: payload.encode(),
            nonce: ledger.next_nonce(submitter),
            submit_ts: now,
        };
        match ledger.submit_transaction(tx.clone(), now) {
            SubmitOutcome::Admitted => {
                self.pending_records.insert(key);
                Ok(tx)
            }
            SubmitOutcome::Rejected(r) => Err(RecordError::LedgerRejected(r)),
        }
    }

    /// Records a governance action to the ledger.
    pub fn submit_governance(
        &mut self,
        action: GovAction,
        submitter: &PdlId,
        now: SimTime,
        ledger: &mut Ledger,
    ) -> Result<(), SubmitRejected> {
        let payload = TxPayload::Governance { action };
        self.submit_plain(payload, ContractAddress::GOVERNANCE, submitter, now, ledger)
    }

    /// Records an SLA expiry to the ledger.
    pub fn submit_sla_expire(
        &mut self,
        address: ContractAddress,
        submitter: &PdlId,
        now: SimTime,
        ledger: &mut Ledger,
    ) -> Result<(), SubmitRejected> {
        self.submit_plain(TxPayload::SlaExpire { address }, address, submitter, now, ledger)
    }

    fn submit_plain(
        &mut self,
        payload: TxPayload,
        contract: ContractAddress,
        submitter: &PdlId,
        now: SimTime,
        ledger: &mut Ledger,
    ) -> Result<(), SubmitRejected> {
        let tx = Transaction {
            submitter: submitter.clone(),
            contract,
            payload: payload.encode(),
            nonce: ledger.next_nonce(submitter),
            submit_ts: now,
        };
        match ledger.submit_transaction(tx, now) {
            SubmitOutcome::Admitted => Ok(()),
            SubmitOutcome::Rejected(r) => Err(SubmitRejected(r)),
        }
    }

    /// Executes a sealed block against the committed state and clears the
    /// corresponding pending markers.
    pub fn apply_block(&mut self, block: &Block) {
        apply_block(&mut self.state, block);
        for tx in &block.transactions {
            match TxPayload::decode(&tx.payload) {
                Ok(TxPayload::Deploy { address, .. }) => {
                    self.pending_contracts.remove(&address);
                }
                Ok(TxPayload::SlaInit { address, .. }) => {
                    self.pending_inits.remove(&address);
                }
                Ok(TxPayload::FlowRecord {
                    registry,
                    role,
                    digest,
                    ..
                }) => {
                    self.pending_records
                        .remove(&(registry, digest, tx.submitter.clone(), role));
                }
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests;
