//! Service-level agreement contracts.

use serde::{Deserialize, Serialize};

use crate::ids::{ContractAddress, LinkId, PdlId};
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlaStatus {
    Pending,
    Active,
    Expired,
    Terminated,
}

/// The agreed terms, fixed at initialization and recorded on chain. The
/// agreed path and endpoint devices are part of the agreement so an audit
/// working from the chain alone can price what was promised against what
/// the flow records show.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlaTerms {
    pub owner: PdlId,
    pub tenant: PdlId,
    pub src_device: PdlId,
    pub dst_device: PdlId,
    /// Ordered devices of the agreed path, source first.
    pub path_devices: Vec<PdlId>,
    /// Ordered links of the agreed path.
    pub path_links: Vec<LinkId>,
    pub lease_start: SimTime,
    pub lease_duration: SimDuration,
    /// Price for the lease, in currency units. Stored, not settled.
    pub price: u64,
    pub latency_target_ms: u64,
    /// Currency units charged per violation.
    pub penalty_rate: u64,
}

impl SlaTerms {
    pub fn validate(&self) -> Result<(), InvalidSlaTerms> {
        if self.lease_duration == SimDuration::ZERO {
            return Err(InvalidSlaTerms::ZeroLeaseDuration);
        }
        if self.latency_target_ms == 0 {
            return Err(InvalidSlaTerms::ZeroLatencyTarget);
        }
        if self.path_devices.len() < 2 || self.path_links.len() + 1 != self.path_devices.len() {
            return Err(InvalidSlaTerms::MalformedPath);
        }
        Ok(())
    }

    pub fn lease_end(&self) -> SimTime {
        self.lease_start + self.lease_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum InvalidSlaTerms {
    #[error("lease duration must be positive")]
    ZeroLeaseDuration,
    #[error("latency target must be positive")]
    ZeroLatencyTarget,
    #[error("agreed path must list n devices and n-1 links")]
    MalformedPath,
}

/// An agreement instance hosted by the contract engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlaContract {
    pub address: ContractAddress,
    pub terms: SlaTerms,
    pub status: SlaStatus,
}

impl SlaContract {
    /// Status transitions follow Pending -> Active -> {Expired, Terminated};
    /// anything else is rejected.
    pub fn transition(&mut self, to: SlaStatus) -> Result<(), BadTransition> {
        let ok = matches!(
            (self.status, to),
            (SlaStatus::Pending, SlaStatus::Active)
                | (SlaStatus::Active, SlaStatus::Expired)
                | (SlaStatus::Active, SlaStatus::Terminated)
        );
        if !ok {
            return Err(BadTransition {
                from: self.status,
                to,
            });
        }
        self.status = to;
        Ok(())
    }

    /// Penalty owed for a violation count under these terms.
    pub fn compute_penalty(&self, violations: u64) -> u64 {
        violations * self.terms.penalty_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal status transition {from:?} -> {to:?}")]
pub struct BadTransition {
    pub from: SlaStatus,
    pub to: SlaStatus,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms() -> SlaTerms {
        SlaTerms {
            owner: PdlId::from("own"),
            tenant: PdlId::from("ten"),
            src_device: PdlId::from("a"),
            dst_device: PdlId::from("b"),
            path_devices: vec![PdlId::from("a"), PdlId::from("b")],
            path_links: vec![LinkId::from("l0")],
            lease_start: SimTime::from_millis(100),
            lease_duration: SimDuration::from_millis(900),
            price: 10,
            latency_target_ms: 15,
            penalty_rate: 5,
        }
    }

    #[test]
    fn lease_window_arithmetic() {
        let t = terms();
        assert_eq!(t.lease_end(), SimTime::from_millis(1000));
    }

    #[test]
    fn zero_duration_is_invalid() {
        let mut t = terms();
        t.lease_duration = SimDuration::ZERO;
        assert_eq!(t.validate(), Err(InvalidSlaTerms::ZeroLeaseDuration));
    }

    #[test]
    fn status_machine_rejects_out_of_order_transitions() {
        let mut sla = SlaContract {
            address: ContractAddress::GOVERNANCE,
            terms: terms(),
            status: SlaStatus::Pending,
        };
        assert!(sla.transition(SlaStatus::Expired).is_err());
        sla.transition(SlaStatus::Active).unwrap();
        assert!(sla.transition(SlaStatus::Active).is_err());
        sla.transition(SlaStatus::Expired).unwrap();
        assert!(sla.transition(SlaStatus::Terminated).is_err());
    }

    #[test]
    fn penalty_is_rate_times_violations() {
        let sla = SlaContract {
            address: ContractAddress::GOVERNANCE,
            terms: terms(),
            status: SlaStatus::Active,
        };
        assert_eq!(sla.compute_penalty(0), 0);
        assert_eq!(sla.compute_penalty(3), 15);
    }
}
