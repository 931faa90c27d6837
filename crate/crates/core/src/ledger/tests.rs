use super::*;
use crate::ids::ContractAddress;
use proptest::prelude::*;

fn authorities(n: usize) -> Vec<Authority> {
    (0..n)
        .map(|i| Authority {
            pdl_id: PdlId::new(format!("n{:03}", i)),
            label: format!("A{i}"),
        })
        .collect()
}

fn test_ledger(n_auth: usize) -> Ledger {
    Ledger::new(LedgerConfig::new(authorities(n_auth))).unwrap()
}

fn tx(submitter: &str, nonce: u64, now: SimTime) -> Transaction {
    Transaction {
        submitter: PdlId::from(submitter),
        contract: ContractAddress::GOVERNANCE,
        payload: vec![0xAB, 0xCD],
        nonce,
        submit_ts: now,
    }
}

#[test]
fn first_tx_from_registered_node_is_admitted() {
    let mut ledger = test_ledger(1);
    ledger.register_submitter(PdlId::from("dev"));
    let out = ledger.submit_transaction(tx("dev", 0, SimTime::ZERO), SimTime::ZERO);
    assert_eq!(out, SubmitOutcome::Admitted);
    assert_eq!(ledger.pending_len(), 1);
}

#[test]
fn unregistered_submitter_is_unauthorized() {
    let mut ledger = test_ledger(1);
    let out = ledger.submit_transaction(tx("ghost", 0, SimTime::ZERO), SimTime::ZERO);
    assert_eq!(out, SubmitOutcome::Rejected(RejectReason::Unauthorized));
}

#[test]
fn read_only_role_cannot_submit() {
    let mut ledger = test_ledger(1);
    ledger.set_read_only(PdlId::from("reg"));
    let out = ledger.submit_transaction(tx("reg", 0, SimTime::ZERO), SimTime::ZERO);
    assert_eq!(out, SubmitOutcome::Rejected(RejectReason::Unauthorized));
}

#[test]
fn barred_submitter_is_unauthorized_but_history_remains() {
    let mut ledger = test_ledger(1);
    ledger.register_submitter(PdlId::from("dev"));
    assert!(ledger
        .submit_transaction(tx("dev", 0, SimTime::ZERO), SimTime::ZERO)
        .is_admitted());
    ledger.seal_block(SimTime::from_secs(15));
    ledger.bar_submitter(&PdlId::from("dev"));
    let out = ledger.submit_transaction(tx("dev", 1, SimTime::from_secs(16)), SimTime::from_secs(16));
    assert_eq!(out, SubmitOutcome::Rejected(RejectReason::Unauthorized));
    // committed record untouched
    assert_eq!(ledger.block(1).unwrap().transactions.len(), 1);
    assert!(verify_chain(ledger.chain(), &ledger.config().authorities).is_ok());
}

#[test]
fn replayed_and_gapped_nonces_are_rejected() {
    let mut ledger = test_ledger(1);
    ledger.register_submitter(PdlId::from("dev"));
    assert!(ledger
        .submit_transaction(tx("dev", 0, SimTime::ZERO), SimTime::ZERO)
        .is_admitted());
    let replay = ledger.submit_transaction(tx("dev", 0, SimTime::ZERO), SimTime::ZERO);
    assert_eq!(replay, SubmitOutcome::Rejected(RejectReason::BadNonce));
    let gap = ledger.submit_transaction(tx("dev", 5, SimTime::ZERO), SimTime::ZERO);
    assert_eq!(gap, SubmitOutcome::Rejected(RejectReason::BadNonce));
}

#[test]
fn eleventh_tx_in_same_second_is_rate_capped() {
    let mut config = LedgerConfig::new(authorities(1));
    config.tps_cap = 10;
    let mut ledger = Ledger::new(config).unwrap();
    ledger.register_submitter(PdlId::from("dev"));
    for nonce in 0..10 {
        assert!(ledger
            .submit_transaction(tx("dev", nonce, SimTime::ZERO), SimTime::ZERO)
            .is_admitted());
    }
    let out = ledger.submit_transaction(tx("dev", 10, SimTime::ZERO), SimTime::ZERO);
    assert_eq!(out, SubmitOutcome::Rejected(RejectReason::RateCapped));
    // next simulated second opens a fresh window
    let t1 = SimTime::from_secs(1);
    assert!(ledger.submit_transaction(tx("dev", 10, t1), t1).is_admitted());
}

/// Replays a burst schedule through an independent counting model of the
/// admission rules and checks the ledger agrees attempt by attempt.
#[test]
fn burst_admissions_match_counting_oracle() {
    let mut config = LedgerConfig::new(authorities(1));
    config.tps_cap = 20;
    config.mempool_cap = 50;
    let mut ledger = Ledger::new(config).unwrap();
    ledger.register_submitter(PdlId::from("dev"));

    // 100 attempts in second 0, then 60 attempts in each of seconds 1..5
    let mut schedule: Vec<u64> = vec![0; 100];
    for s in 1..5u64 {
        schedule.extend(std::iter::repeat_n(s, 60));
    }

    // counting oracle: per-second counter + pool size, nothing else
    let mut oracle_admitted_in = [0u32; 5];
    let mut pool = 0usize;
    let mut expected = Vec::new();
    for &s in &schedule {
        if oracle_admitted_in[s as usize] >= 20 {
            expected.push(SubmitOutcome::Rejected(RejectReason::RateCapped));
        } else if pool >= 50 {
            expected.push(SubmitOutcome::Rejected(RejectReason::MempoolFull));
        } else {
            oracle_admitted_in[s as usize] += 1;
            pool += 1;
            expected.push(SubmitOutcome::Admitted);
        }
    }

    let mut nonce = 0;
    let mut got = Vec::new();
    for &s in &schedule {
        let now = SimTime::from_secs(s);
        let out = ledger.submit_transaction(tx("dev", nonce, now), now);
        if out.is_admitted() {
            nonce += 1;
        }
        got.push(out);
    }

    assert_eq!(got, expected);
    assert_eq!(oracle_admitted_in[0], 20, "exactly tps_cap admitted in second 0");
    assert_eq!(ledger.pending_len(), 50);
}

#[test]
fn sealer_rotation_over_three_authorities() {
    let mut ledger = test_ledger(3);
    let mut sealers = Vec::new();
    for h in 1..=6u64 {
        let now = SimTime::from_secs(15 * h);
        assert_eq!(ledger.seal_block(now), SealOutcome::Sealed { height: h });
        sealers.push(ledger.tip().header.sealer.clone());
    }
    let expect: Vec<PdlId> = ["n001", "n002", "n000", "n001", "n002", "n000"]
        .iter()
        .map(|s| PdlId::from(*s))
        .collect();
    assert_eq!(sealers, expect);
    assert_eq!(ledger.block(0).unwrap().header.sealer, PdlId::from("n000"));
}

#[test]
fn seal_before_interval_elapsed_is_not_due() {
    let mut ledger = test_ledger(1);
    assert_eq!(
        ledger.seal_block(SimTime::from_secs(30)),
        SealOutcome::Sealed { height: 1 }
    );
    // last seal at t=30, interval 15: t=40 is too early
    assert_eq!(ledger.seal_block(SimTime::from_secs(40)), SealOutcome::NotDue);
    assert_eq!(
        ledger.seal_block(SimTime::from_secs(45)),
        SealOutcome::Sealed { height: 2 }
    );
}

#[test]
fn empty_mempool_seals_empty_valid_block() {
    let mut ledger = test_ledger(2);
    ledger.seal_block(SimTime::from_secs(15));
    assert_eq!(ledger.tip().transactions.len(), 0);
    assert!(verify_chain(ledger.chain(), &ledger.config().authorities).is_ok());
}

#[test]
fn genesis_only_chain_is_valid() {
    let ledger = test_ledger(3);
    assert!(verify_chain(ledger.chain(), &ledger.config().authorities).is_ok());
}

#[test]
fn payload_byte_flip_is_detected_at_that_height() {
    let mut ledger = test_ledger(2);
    ledger.register_submitter(PdlId::from("dev"));
    for h in 1..=5u64 {
        let now = SimTime::from_secs(15 * h);
        let nonce = ledger.next_nonce(&PdlId::from("dev"));
        ledger.submit_transaction(tx("dev", nonce, now), now);
        ledger.seal_block(now);
    }
    let mut chain = ledger.chain().to_vec();
    chain[3].transactions[0].payload[0] ^= 0x01;
    let err = verify_chain(&chain, &ledger.config().authorities).unwrap_err();
    assert_eq!(err.height, 3);
    assert_eq!(err.check, ChainCheck::TxDigest);
}

#[test]
fn header_field_corruptions_are_detected_in_place() {
    let mut ledger = test_ledger(3);
    for h in 1..=6u64 {
        ledger.seal_block(SimTime::from_secs(15 * h));
    }
    let auth = &ledger.config().authorities;

    let mut c = ledger.chain().to_vec();
    c[4].header.seal_ts = SimTime::from_micros(c[4].header.seal_ts.as_micros() ^ 1);
    let err = verify_chain(&c, auth).unwrap_err();
    assert_eq!((err.height, err.check), (4, ChainCheck::HeaderDigest));

    let mut c = ledger.chain().to_vec();
    c[2].header.height = 7;
    let err = verify_chain(&c, auth).unwrap_err();
    assert_eq!((err.height, err.check), (2, ChainCheck::HeightSuccession));

    let mut c = ledger.chain().to_vec();
    c[5].digest.0[31] ^= 0x80;
    let err = verify_chain(&c, auth).unwrap_err();
    assert_eq!((err.height, err.check), (5, ChainCheck::HeaderDigest));

    let mut c = ledger.chain().to_vec();
    c[3].header.parent_digest.0[0] ^= 0x10;
    let err = verify_chain(&c, auth).unwrap_err();
    assert_eq!((err.height, err.check), (3, ChainCheck::HeaderDigest));
}

#[test]
fn out_of_turn_sealer_fails_rotation_check() {
    let mut ledger = test_ledger(3);
    for h in 1..=4u64 {
        ledger.seal_block(SimTime::from_secs(15 * h));
    }
    let auth = authorities(3);
    let mut chain = ledger.chain().to_vec();
    // replace sealer of block 2 with a valid but out-of-turn authority,
    // recomputing digests so only the rotation rule can catch it
    chain[2].header.sealer = auth[0].pdl_id.clone();
    chain[2].digest = chain[2].header.compute_digest();
    chain[3].header.parent_digest = chain[2].digest;
    chain[3].digest = chain[3].header.compute_digest();
    let err = verify_chain(&chain, &auth).unwrap_err();
    assert_eq!((err.height, err.check), (2, ChainCheck::SealerRotation));
}

#[test]
fn query_records_filters_by_contract_and_preserves_order() {
    let mut ledger = test_ledger(1);
    ledger.register_submitter(PdlId::from("dev"));
    let c1 = ContractAddress(crate::hash::sha3_256(b"c1"));
    let c2 = ContractAddress(crate::hash::sha3_256(b"c2"));
    for (i, c) in [c1, c2, c1, c2, c1].iter().enumerate() {
        let mut t = tx("dev", i as u64, SimTime::from_secs(14));
        t.contract = *c;
        t.payload = vec![i as u8];
        assert!(ledger.submit_transaction(t, SimTime::from_secs(14)).is_admitted());
    }
    ledger.seal_block(SimTime::from_secs(15));

    // empty contract
    let none = ledger
        .query_records(ContractAddress::GOVERNANCE, 0..=1)
        .unwrap();
    assert!(none.is_empty());

    let r1 = ledger.query_records(c1, 0..=1).unwrap();
    let r2 = ledger.query_records(c2, 0..=1).unwrap();
    assert_eq!(
        r1.iter().map(|(t, _)| t.payload[0]).collect::<Vec<_>>(),
        vec![0, 2, 4]
    );
    assert_eq!(r1.iter().map(|(_, h)| *h).collect::<Vec<_>>(), vec![1, 1, 1]);
    // filter oracle: the two result sets partition all committed txs
    let all: usize = ledger.block(1).unwrap().transactions.len();
    assert_eq!(r1.len() + r2.len(), all);

    let err = ledger.query_records(c1, 0..=9).unwrap_err();
    assert_eq!(err, QueryError::RangeBeyondTip { end: 9, tip: 1 });
}

#[test]
#[should_panic(expected = "payload")]
fn oversized_payload_violates_the_submission_contract() {
    let mut ledger = test_ledger(1);
    ledger.register_submitter(PdlId::from("dev"));
    let mut t = tx("dev", 0, SimTime::ZERO);
    t.payload = vec![0; 2048];
    ledger.submit_transaction(t, SimTime::ZERO);
}

#[test]
fn mempool_cap_must_cover_tps_cap() {
    let mut config = LedgerConfig::new(authorities(1));
    config.tps_cap = 100;
    config.mempool_cap = 10;
    assert_eq!(Ledger::new(config).err(), Some(ConfigError::MempoolBelowTpsCap));
}

#[test]
fn dump_round_trips_and_verifies() {
    let mut ledger = test_ledger(3);
    ledger.register_submitter(PdlId::from("dev"));
    for h in 1..=4u64 {
        let now = SimTime::from_secs(15 * h);
        let nonce = ledger.next_nonce(&PdlId::from("dev"));
        ledger.submit_transaction(tx("dev", nonce, now), now);
        ledger.seal_block(now);
    }
    let text = write_dump(
        &ledger.config().authorities,
        ledger.config().block_interval,
        ledger.chain(),
    );
    let (auth, interval, chain) = parse_dump(&text).unwrap();
    assert_eq!(interval, ledger.config().block_interval);
    assert_eq!(chain, ledger.chain());
    assert!(verify_chain(&chain, &auth).is_ok());
    // identical writer output for identical input
    assert_eq!(text, write_dump(&auth, interval, &chain));
}

#[test]
fn dump_parse_errors_name_the_line() {
    assert!(matches!(parse_dump(""), Err(DumpError::Empty)));
    let bad = "{\"format\":\"pdlsim-ledger/1\",\"block_interval_us\":1,\"authorities\":[]}\nnot json\n";
    match parse_dump(bad) {
        Err(DumpError::Malformed { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected malformed line error, got {other:?}"),
    }
}

proptest! {
    /// Every admitted transaction commits exactly once and rejected ones
    /// never reach the chain, for arbitrary interleavings of submissions
    /// and seal attempts.
    #[test]
    fn conservation_under_random_schedules(
        ops in proptest::collection::vec((0u8..4, 0u64..3), 1..120),
    ) {
        let mut config = LedgerConfig::new(authorities(3));
        config.tps_cap = 5;
        config.mempool_cap = 8;
        let mut ledger = Ledger::new(config).unwrap();
        for s in ["a", "b", "c"] {
            ledger.register_submitter(PdlId::from(s));
        }
        let mut now = SimTime::ZERO;
        let mut admitted = Vec::new();
        let mut rejected = Vec::new();
        for (op, who) in ops {
            let submitter = ["a", "b", "c"][who as usize];
            match op {
                0 | 1 => {
                    let nonce = ledger.next_nonce(&PdlId::from(submitter));
                    let mut t = tx(submitter, nonce, now);
                    t.payload = vec![op, who as u8, nonce as u8];
                    let key = (t.submitter.clone(), t.nonce);
                    if ledger.submit_transaction(t, now).is_admitted() {
                        admitted.push(key);
                    } else {
                        rejected.push(key);
                    }
                }
                2 => now = now + SimDuration::from_millis(700),
                _ => { ledger.seal_block(now); }
            }
        }
        // drain what is left
        for i in 1..=4u64 {
            ledger.seal_block(now + SimDuration::from_secs(15 * i));
        }
        let committed: Vec<(PdlId, u64)> = ledger
            .chain()
            .iter()
            .flat_map(|b| b.transactions.iter().map(|t| (t.submitter.clone(), t.nonce)))
            .collect();
        prop_assert_eq!(committed.len(), admitted.len());
        for key in &admitted {
            prop_assert_eq!(committed.iter().filter(|k| *k == key).count(), 1);
        }
        for key in &rejected {
            prop_assert!(!committed.contains(key));
        }
        prop_assert!(verify_chain(ledger.chain(), &ledger.config().authorities).is_ok());
    }

    /// Admissions per simulated second never exceed the cap.
    #[test]
    fn rate_cap_holds_for_all_traces(
        tps_cap in 1u32..6,
        attempts in proptest::collection::vec(0u64..5_000u64, 1..200),
    ) {
        let mut config = LedgerConfig::new(authorities(1));
        config.tps_cap = tps_cap;
        config.mempool_cap = 10_000;
        let mut ledger = Ledger::new(config).unwrap();
        ledger.register_submitter(PdlId::from("dev"));
        let mut times: Vec<u64> = attempts;
        times.sort_unstable();
        let mut per_second: BTreeMap<u64, u32> = BTreeMap::new();
        for ms in times {
            let now = SimTime::from_millis(ms);
            let nonce = ledger.next_nonce(&PdlId::from("dev"));
            if ledger.submit_transaction(tx("dev", nonce, now), now).is_admitted() {
                *per_second.entry(now.second_bucket()).or_insert(0) += 1;
            }
        }
        for count in per_second.values() {
            prop_assert!(*count <= tps_cap);
        }
    }

    /// sealer(h) == authorities[h mod k] for any authority-set size.
    #[test]
    fn rotation_rule_holds(k in 1usize..6) {
        let mut ledger = test_ledger(k);
        for h in 1..=20u64 {
            ledger.seal_block(SimTime::from_secs(15 * h));
        }
        for (i, block) in ledger.chain().iter().enumerate() {
            let expect = &ledger.config().authorities[i % k];
            prop_assert_eq!(&block.header.sealer, &expect.pdl_id);
        }
    }
}
