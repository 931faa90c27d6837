//! Append-only permissioned ledger with round-robin authority sealing.
//!
//! The ledger is the trust anchor of the whole system: every orchestration
//! decision, flow record and governance action ends up as a transaction in a
//! hash-chained block. Sealing follows a strict in-turn rotation over a fixed
//! authority set at a configured interval, so the chain a scenario produces
//! is a pure function of the submitted transactions.
//!
//! Admission control is where denial-of-service pressure shows up: each
//! submitter needs a registered identity and a strictly increasing nonce, and
//! the node enforces a per-second admission cap and a bounded mempool.

mod dump;
mod verify;

pub use dump::{parse_dump, write_dump, DumpError, DumpMeta};
pub use verify::{verify_chain, ChainCheck, ChainViolation};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::hash::{sha3_256, sha3_256_chunks, Digest32};
use crate::ids::{ContractAddress, PdlId};
use crate::time::{SimDuration, SimTime, MICROS_PER_SEC};

/// A block-sealing identity. The authority set is fixed when the ledger is
/// created; membership changes are governance decisions outside the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Authority {
    pub pdl_id: PdlId,
    pub label: String,
}

/// A submitted unit of work. `payload` is opaque at this layer; the contract
/// engine defines its encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub submitter: PdlId,
    pub contract: ContractAddress,
    pub payload: Vec<u8>,
    pub nonce: u64,
    pub submit_ts: SimTime,
}

impl Transaction {
    /// Length-framed encoding hashed into the block's transaction digest.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let submitter = self.submitter.as_str().as_bytes();
        let mut out = Vec::with_capacity(submitter.len() + self.payload.len() + 56);
        out.extend_from_slice(&(submitter.len() as u32).to_le_bytes());
        out.extend_from_slice(submitter);
        out.extend_from_slice(self.contract.0.as_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.nonce.to_le_bytes());
        out.extend_from_slice(&self.submit_ts.as_micros().to_le_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub height: u64,
    pub parent_digest: Digest32,
    pub sealer: PdlId,
    pub seal_ts: SimTime,
    pub tx_digest: Digest32,
}

impl BlockHeader {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let sealer = self.sealer.as_str().as_bytes();
        let mut out = Vec::with_capacity(sealer.len() + 88);
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(self.parent_digest.as_bytes());
        out.extend_from_slice(&(sealer.len() as u32).to_le_bytes());
        out.extend_from_slice(sealer);
        out.extend_from_slice(&self.seal_ts.as_micros().to_le_bytes());
        out.extend_from_slice(self.tx_digest.as_bytes());
        out
    }

    pub fn compute_digest(&self) -> Digest32 {
        sha3_256(&self.canonical_bytes())
    }
}

/// A sealed block. `digest` is the header digest computed at seal time and
/// carried in dumps so external verifiers can check each block in place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub digest: Digest32,
    pub transactions: Vec<Transaction>,
}

/// Digest over the ordered transactions of a block.
pub fn transactions_digest(txs: &[Transaction]) -> Digest32 {
    let encoded: Vec<Vec<u8>> = txs.iter().map(Transaction::canonical_bytes).collect();
    sha3_256_chunks(encoded.iter().map(Vec::as_slice))
}

#[derive(Debug, Clone)]
pub struct LedgerConfig {
    /// Gap between consecutive seals. Default 15 s.
    pub block_interval: SimDuration,
    /// Max transactions admitted per simulated second.
    pub tps_cap: u32,
    /// Max pending transactions held between seals.
    pub mempool_cap: usize,
    /// Max accepted payload size in bytes.
    pub max_payload_bytes: usize,
    /// Max transactions drained per block; defaults to
    /// `tps_cap * block_interval` so a saturated mempool drains each seal.
    pub batch_size: Option<usize>,
    pub authorities: Vec<Authority>,
}

impl LedgerConfig {
    pub fn new(authorities: Vec<Authority>) -> Self {
        LedgerConfig {
            block_interval: SimDuration::from_secs(15),
            tps_cap: 100,
            mempool_cap: 100_000,
            max_payload_bytes: 1024,
            batch_size: None,
            authorities,
        }
    }

    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or_else(|| {
            let interval_secs =
                (self.block_interval.as_micros() as usize).div_ceil(MICROS_PER_SEC as usize);
            (self.tps_cap as usize).saturating_mul(interval_secs.max(1))
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.block_interval == SimDuration::ZERO {
            return Err(ConfigError::NonPositiveInterval);
        }
        if self.tps_cap == 0 {
            return Err(ConfigError::NonPositiveTpsCap);
        }
        if self.mempool_cap < self.tps_cap as usize {
            return Err(ConfigError::MempoolBelowTpsCap);
        }
        if self.authorities.is_empty() {
            return Err(ConfigError::EmptyAuthoritySet);
        }
        let mut seen = BTreeSet::new();
        for a in &self.authorities {
            if !seen.insert(&a.pdl_id) {
                return Err(ConfigError::DuplicateAuthority(a.pdl_id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("block interval must be positive")]
    NonPositiveInterval,
    #[error("tps cap must be positive")]
    NonPositiveTpsCap,
    #[error("mempool cap must be at least the tps cap")]
    MempoolBelowTpsCap,
    #[error("authority set is empty")]
    EmptyAuthoritySet,
    #[error("duplicate authority {0}")]
    DuplicateAuthority(PdlId),
}

/// Why a submission was turned away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Submitter unknown, blacklisted, or holds a read-only role.
    Unauthorized,
    /// Replayed or gapped nonce.
    BadNonce,
    /// Per-second admission cap hit.
    RateCapped,
    /// Mempool at capacity.
    MempoolFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Admitted,
    Rejected(RejectReason),
}

impl SubmitOutcome {
    pub fn is_admitted(&self) -> bool {
        matches!(self, SubmitOutcome::Admitted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SealOutcome {
    /// A block was sealed at this height.
    Sealed { height: u64 },
    /// The block interval since the tip has not yet elapsed.
    NotDue,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("query range end {end} beyond chain tip {tip}")]
    RangeBeyondTip { end: u64, tip: u64 },
}

/// The ledger node state: committed chain, mempool, and admission control.
///
/// All mutation goes through the simulation event loop; reads are safe from
/// anywhere once the writer is quiescent.
#[derive(Debug, Clone)]
pub struct Ledger {
    config: LedgerConfig,
    chain: Vec<Block>,
    mempool: VecDeque<Transaction>,
    registered: BTreeSet<PdlId>,
    read_only: BTreeSet<PdlId>,
    barred: BTreeSet<PdlId>,
    next_nonces: BTreeMap<PdlId, u64>,
    admission_second: u64,
    admitted_this_second: u32,
    admitted_total: u64,
}

impl Ledger {
    /// Creates the ledger and seals the genesis block: height 0, zero parent
    /// digest, sealed by the first authority at t=0.
    pub fn new(config: LedgerConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let header = BlockHeader {
            height: 0,
            parent_digest: Digest32::ZERO,
            sealer: config.authorities[0].pdl_id.clone(),
            seal_ts: SimTime::ZERO,
            tx_digest: transactions_digest(&[]),
        };
        let genesis = Block {
            digest: header.compute_digest(),
            header,
            transactions: Vec::new(),
        };
        Ok(Ledger {
            config,
            chain: vec![genesis],
            mempool: VecDeque::new(),
            registered: BTreeSet::new(),
            read_only: BTreeSet::new(),
            barred: BTreeSet::new(),
            next_nonces: BTreeMap::new(),
            admission_second: 0,
            admitted_this_second: 0,
            admitted_total: 0,
        })
    }

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn tip(&self) -> &Block {
        self.chain.last().expect("chain always has genesis")
    }

    pub fn tip_height(&self) -> u64 {
        self.tip().header.height
    }

    pub fn pending_len(&self) -> usize {
        self.mempool.len()
    }

    pub fn admitted_total(&self) -> u64 {
        self.admitted_total
    }

    /// Grants a participant the right to submit transactions.
    pub fn register_submitter(&mut self, pdl_id: PdlId) {
        self.registered.insert(pdl_id);
    }

    /// Marks an identity as read-only (regulator role): registered for
    /// queries, never admitted as a submitter.
    pub fn set_read_only(&mut self, pdl_id: PdlId) {
        self.read_only.insert(pdl_id.clone());
        self.registered.insert(pdl_id);
    }

    /// Bars a blacklisted node from all future admissions. Its committed
    /// history stays on chain.
    pub fn bar_submitter(&mut self, pdl_id: &PdlId) {
        self.barred.insert(pdl_id.clone());
    }

    pub fn is_barred(&self, pdl_id: &PdlId) -> bool {
        self.barred.contains(pdl_id)
    }

    /// Next-in-sequence nonce for a submitter.
    pub fn next_nonce(&self, pdl_id: &PdlId) -> u64 {
        self.next_nonces.get(pdl_id).copied().unwrap_or(0)
    }

    /// Admission control. Guards run in order: identity, nonce, per-second
    /// rate cap, mempool capacity. Admitted transactions queue FIFO.
    pub fn submit_transaction(&mut self, tx: Transaction, now: SimTime) -> SubmitOutcome {
        assert!(
            tx.payload.len() <= self.config.max_payload_bytes,
            "malformed transaction: payload {} exceeds configured max {}",
            tx.payload.len(),
            self.config.max_payload_bytes
        );
        if !self.registered.contains(&tx.submitter)
            || self.barred.contains(&tx.submitter)
            || self.read_only.contains(&tx.submitter)
        {
            return SubmitOutcome::Rejected(RejectReason::Unauthorized);
        }
        if tx.nonce != self.next_nonce(&tx.submitter) {
            return SubmitOutcome::Rejected(RejectReason::BadNonce);
        }
        let second = now.second_bucket();
        if second != self.admission_second {
            self.admission_second = second;
            self.admitted_this_second = 0;
        }
        if self.admitted_this_second >= self.config.tps_cap {
            return SubmitOutcome::Rejected(RejectReason::RateCapped);
        }
        if self.mempool.len() >= self.config.mempool_cap {
            return SubmitOutcome::Rejected(RejectReason::MempoolFull);
        }
        self.admitted_this_second += 1;
        self.admitted_total += 1;
        *self.next_nonces.entry(tx.submitter.clone()).or_insert(0) += 1;
        self.mempool.push_back(tx);
        SubmitOutcome::Admitted
    }

    /// Seals the next block if the interval since the tip has elapsed,
    /// draining up to the batch size from the mempool in FIFO order. Empty
    /// blocks are sealed on an idle network to keep the cadence observable.
    pub fn seal_block(&mut self, now: SimTime) -> SealOutcome {
        let tip = self.tip();
        if now.saturating_sub(tip.header.seal_ts) < self.config.block_interval {
            return SealOutcome::NotDue;
        }
        let height = tip.header.height + 1;
        let parent_digest = tip.digest;
        let batch = self.config.effective_batch_size().min(self.mempool.len());
        let transactions: Vec<Transaction> = self.mempool.drain(..batch).collect();
        let sealer_idx = (height % self.config.authorities.len() as u64) as usize;
        let header = BlockHeader {
            height,
            parent_digest,
            sealer: self.config.authorities[sealer_idx].pdl_id.clone(),
            seal_ts: now,
            tx_digest: transactions_digest(&transactions),
        };
        let block = Block {
            digest: header.compute_digest(),
            header,
            transactions,
        };
        self.chain.push(block);
        SealOutcome::Sealed { height }
    }

    pub fn block(&self, height: u64) -> Option<&Block> {
        self.chain.get(height as usize)
    }

    /// All committed transactions addressed to `contract` within the height
    /// range, in commit order. Pending mempool entries are excluded.
    pub fn query_records(
        &self,
        contract: ContractAddress,
        heights: std::ops::RangeInclusive<u64>,
    ) -> Result<Vec<(&Transaction, u64)>, QueryError> {
        let tip = self.tip_height();
        if *heights.end() > tip {
            return Err(QueryError::RangeBeyondTip {
                end: *heights.end(),
                tip,
            });
        }
        let mut out = Vec::new();
        for h in heights {
            let block = &self.chain[h as usize];
            for tx in &block.transactions {
                if tx.contract == contract {
                    out.push((tx, h));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests;
