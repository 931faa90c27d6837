//! Chain verification.
//!
//! Each block is checked in place: height succession, its own stored header
//! digest, the parent linkage, the transaction digest, and sealer
//! membership/rotation. Storing the header digest in the block means any
//! single-byte corruption is attributable to the exact block it happened in,
//! not just noticed one block later through the parent link.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{transactions_digest, Authority, Block};
use crate::hash::Digest32;

/// Which integrity check a block failed, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainCheck {
    /// Chain empty, or genesis has nonzero height/parent digest.
    Genesis,
    /// Height is not parent height + 1.
    HeightSuccession,
    /// Stored digest does not match the recomputed header digest.
    HeaderDigest,
    /// `parent_digest` does not match the parent block's digest.
    ParentLink,
    /// `tx_digest` does not match the recomputed digest of the transactions.
    TxDigest,
    /// Sealer is not a member of the authority set.
    SealerMembership,
    /// Sealer is not the in-turn authority for this height.
    SealerRotation,
}

impl std::fmt::Display for ChainCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ChainCheck::Genesis => "genesis",
            ChainCheck::HeightSuccession => "height_succession",
            ChainCheck::HeaderDigest => "header_digest",
            ChainCheck::ParentLink => "parent_link",
            ChainCheck::TxDigest => "tx_digest",
            ChainCheck::SealerMembership => "sealer_membership",
            ChainCheck::SealerRotation => "sealer_rotation",
        };
        f.write_str(s)
    }
}

/// The lowest-height integrity failure found in a chain.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("chain invalid at height {height}: {check} check failed")]
pub struct ChainViolation {
    pub height: u64,
    pub check: ChainCheck,
}

fn check_block(blocks: &[Block], idx: usize, authorities: &[Authority]) -> Option<ChainViolation> {
    let height = idx as u64;
    let block = &blocks[idx];
    let fail = |check| Some(ChainViolation { height, check });

    if idx == 0 {
        if block.header.height != 0 || block.header.parent_digest != Digest32::ZERO {
            return fail(ChainCheck::Genesis);
        }
    } else if block.header.height != height {
        return fail(ChainCheck::HeightSuccession);
    }
    if block.header.compute_digest() != block.digest {
        return fail(ChainCheck::HeaderDigest);
    }
    if idx > 0 && block.header.parent_digest != blocks[idx - 1].digest {
        return fail(ChainCheck::ParentLink);
    }
    if transactions_digest(&block.transactions) != block.header.tx_digest {
        return fail(ChainCheck::TxDigest);
    }
    if !authorities.iter().any(|a| a.pdl_id == block.header.sealer) {
        return fail(ChainCheck::SealerMembership);
    }
    let in_turn = &authorities[(height % authorities.len() as u64) as usize];
    if block.header.sealer != in_turn.pdl_id {
        return fail(ChainCheck::SealerRotation);
    }
    None
}

/// Verifies a full chain against an authority set, reporting the lowest
/// offending height. Malformed input yields a violation, never a panic.
///
/// Blocks are checked independently (each against its recorded parent), so
/// with the `parallel` feature the scan fans out across blocks and reduces
/// to the minimum height; the sequential fallback walks the chain in order.
/// Both produce the identical verdict.
pub fn verify_chain(blocks: &[Block], authorities: &[Authority]) -> Result<(), ChainViolation> {
    if blocks.is_empty() {
        return Err(ChainViolation {
            height: 0,
            check: ChainCheck::Genesis,
        });
    }
    if authorities.is_empty() {
        return Err(ChainViolation {
            height: 0,
            check: ChainCheck::SealerMembership,
        });
    }

    #[cfg(feature = "parallel")]
    let first = (0..blocks.len())
        .into_par_iter()
        .filter_map(|idx| check_block(blocks, idx, authorities))
        .min_by_key(|v| v.height);

    #[cfg(not(feature = "parallel"))]
    let first = (0..blocks.len()).find_map(|idx| check_block(blocks, idx, authorities));

    match first {
        Some(v) => Err(v),
        None => Ok(()),
    }
}
