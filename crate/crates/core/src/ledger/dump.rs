//! Ledger dump format.
//!
//! Line-delimited: the first line carries the ledger metadata needed to
//! re-verify the chain (authority set and block interval); every following
//! line is one block, fields in header order, digests and payloads as
//! lowercase hex. The writer is byte-deterministic so dumps are directly
//! comparable across runs.

use serde::{Deserialize, Serialize};

use super::{Authority, Block, BlockHeader, Transaction};
use crate::hash::Digest32;
use crate::ids::{ContractAddress, PdlId};
use crate::time::{SimDuration, SimTime};

pub const DUMP_FORMAT: &str = "pdlsim-ledger/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DumpMeta {
    pub format: String,
    pub block_interval_us: u64,
    pub authorities: Vec<AuthorityLine>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthorityLine {
    pub pdl_id: String,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockLine {
    height: u64,
    parent_digest: Digest32,
    sealer: String,
    seal_ts_us: u64,
    tx_digest: Digest32,
    digest: Digest32,
    txs: Vec<TxLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TxLine {
    submitter: String,
    contract: Digest32,
    payload: String,
    nonce: u64,
    submit_ts_us: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("dump line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("dump is empty")]
    Empty,
    #[error("unsupported dump format {0:?}")]
    UnsupportedFormat(String),
    #[error("dump line {line}: bad payload hex: {source}")]
    BadPayload {
        line: usize,
        source: hex::FromHexError,
    },
}

/// Serializes a chain to the dump format. Ends with a trailing newline.
pub fn write_dump(
    authorities: &[Authority],
    block_interval: SimDuration,
    chain: &[Block],
) -> String {
    let meta = DumpMeta {
        format: DUMP_FORMAT.to_owned(),
        block_interval_us: block_interval.as_micros(),
        authorities: authorities
            .iter()
            .map(|a| AuthorityLine {
                pdl_id: a.pdl_id.0.clone(),
                label: a.label.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string(&meta).expect("meta serializes");
    out.push('\n');
    for block in chain {
        let line = BlockLine {
            height: block.header.height,
            parent_digest: block.header.parent_digest,
            sealer: block.header.sealer.0.clone(),
            seal_ts_us: block.header.seal_ts.as_micros(),
            tx_digest: block.header.tx_digest,
            digest: block.digest,
            txs: block
                .transactions
                .iter()
                .map(|tx| TxLine {
                    submitter: tx.submitter.0.clone(),
                    contract: tx.contract.0,
                    payload: hex::encode(&tx.payload),
                    nonce: tx.nonce,
                    submit_ts_us: tx.submit_ts.as_micros(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("block serializes"));
        out.push('\n');
    }
    out
}

/// Parses a dump back into the authority set, block interval and chain.
pub fn parse_dump(text: &str) -> Result<(Vec<Authority>, SimDuration, Vec<Block>), DumpError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
    let (_, meta_line) = lines.next().ok_or(DumpError::Empty)?;
    let meta: DumpMeta =
        serde_json::from_str(meta_line).map_err(|source| DumpError::Malformed { line: 1, source })?;
    if meta.format != DUMP_FORMAT {
        return Err(DumpError::UnsupportedFormat(meta.format));
    }
    let authorities = meta
        .authorities
        .into_iter()
        .map(|a| Authority {
            pdl_id: PdlId(a.pdl_id),
            label: a.label,
        })
        .collect();

    let mut chain = Vec::new();
    for (idx, line) in lines {
        let parsed: BlockLine = serde_json::from_str(line).map_err(|source| {
            DumpError::Malformed {
                line: idx + 1,
                source,
            }
        })?;
        let mut transactions = Vec::with_capacity(parsed.txs.len());
        for tx in parsed.txs {
            transactions.push(Transaction {
                submitter: PdlId(tx.submitter),
                contract: ContractAddress(tx.contract),
                payload: hex::decode(&tx.payload).map_err(|source| DumpError::BadPayload {
                    line: idx + 1,
                    source,
                })?,
                nonce: tx.nonce,
                submit_ts: SimTime::from_micros(tx.submit_ts_us),
            });
        }
        chain.push(Block {
            header: BlockHeader {
                height: parsed.height,
                parent_digest: parsed.parent_digest,
                sealer: PdlId(parsed.sealer),
                seal_ts: SimTime::from_micros(parsed.seal_ts_us),
                tx_digest: parsed.tx_digest,
            },
            digest: parsed.digest,
            transactions,
        });
    }
    Ok((authorities, SimDuration::from_micros(meta.block_interval_us), chain))
}
