//! Identifier newtypes shared across the ledger, orchestration and audit
//! layers.
//!
//! A `PdlId` is the ledger-level identity of a participant or device. It is
//! assigned once by the orchestration manager and never changes, even when
//! the device's network address does.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::hash::Digest32;

macro_rules! string_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(
    /// Stable ledger identity of a participant or device.
    PdlId
);
string_id!(
    /// Scenario-scoped identifier of a resource request.
    RequestId
);
string_id!(
    /// Scenario-scoped identifier of a flow.
    FlowId
);
string_id!(
    /// Scenario-scoped identifier of a topology link.
    LinkId
);

/// Address of a deployed contract: a digest of (deployer, nonce, kind).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractAddress(pub Digest32);

impl ContractAddress {
    /// The reserved address governance and deployment transactions target.
    pub const GOVERNANCE: ContractAddress = ContractAddress(Digest32([0; 32]));
}

impl fmt::Display for ContractAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_lexicographic() {
        assert!(PdlId::from("n001") < PdlId::from("n002"));
        assert!(PdlId::from("n010") < PdlId::from("n100"));
    }

    #[test]
    fn governance_address_is_zero() {
        assert_eq!(ContractAddress::GOVERNANCE.to_string(), "0".repeat(64));
    }
}
