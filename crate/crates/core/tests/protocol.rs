use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snpd_core::crypto::{Authenticator, HashAuth, SimulatedAuth};
use snpd_core::geometry::{Position, SPEED_OF_LIGHT};
use snpd_core::protocol::wire::{self, Frame, COMMITMENT_LEN};
use snpd_core::protocol::{
    honest_report_claim, Directory, KeyMaterial, LinkIdSource, Message, NodeId, ProtocolError,
    ProtocolParams, ReplyClaim, ReportClaim, Responder, Verifier,
};

struct Setup {
    auth: HashAuth,
    directory: Directory,
    verifier: Verifier,
    responders: Vec<Responder>,
    links: LinkIdSource,
    rng: ChaCha8Rng,
}

fn setup(n: usize, pool: usize) -> Setup {
    setup_seeded(n, pool, 11)
}

fn setup_seeded(n: usize, pool: usize, seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let auth = HashAuth::new();
    let mut directory = Directory::new();
    let mut register = |id: u32, keys: &KeyMaterial| {
        auth.register(keys.long_term());
        keys.one_time_keys().for_each(|k| auth.register(k));
        directory.insert(NodeId(id), keys.long_term().public());
    };
    let vkeys = KeyMaterial::generate(&mut rng, pool);
    register(0, &vkeys);
    let verifier = Verifier::new(NodeId(0), vkeys, Position::new(0.0, 0.0));
    let responders = (1..=n as u32)
        .map(|id| {
            let keys = KeyMaterial::generate(&mut rng, 0);
            register(id, &keys);
            Responder::new(NodeId(id), keys)
        })
        .collect();
    Setup {
        auth,
        directory,
        verifier,
        responders,
        links: LinkIdSource::new(5),
        rng,
    }
}

#[test]
fn start_poll_consumes_one_time_keys() {
    let mut s = setup(0, 1);
    let poll = s.verifier.start_poll(10.0, &mut s.links, &s.auth).unwrap();
    assert_eq!(s.verifier.poll_time(), Some(10.0));
    assert_eq!(s.verifier.keys().remaining_one_time(), 0);
    assert!(matches!(poll, Message::Poll(_)));
    assert_eq!(
        s.verifier.start_poll(11.0, &mut s.links, &s.auth),
        Err(ProtocolError::ExhaustedKeyPool)
    );
}

#[test]
fn successive_polls_use_fresh_keys_and_links() {
    let mut s = setup(0, 2);
    let a = s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    let b = s.verifier.start_poll(1.0, &mut s.links, &s.auth).unwrap();
    let (a, b) = (a.as_poll().unwrap(), b.as_poll().unwrap());
    assert_ne!(a.onetime_key, b.onetime_key);
    assert_ne!(a.link, b.link);
}

#[test]
fn reply_delay_is_seeded_and_uniform() {
    let mut s = setup(1, 1);
    let poll = s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    let draw = |seed| {
        let mut r = s.responders[0].clone();
        r.handle_poll(
            &poll,
            0.0,
            0.2,
            &s.auth,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    };
    assert_eq!(draw(9), draw(9));

    let mut r = s.responders[0].clone();
    let n = 10_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let d = r.handle_poll(&poll, 0.0, 0.2, &s.auth, &mut s.rng).unwrap();
        assert!((0.0..=0.2).contains(&d));
        sum += d;
    }
    let mean = sum / n as f64;
    assert!((mean - 0.1).abs() < 0.005, "mean {mean}");
}

#[test]
fn handle_poll_rejects_other_messages() {
    let mut s = setup(1, 2);
    s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    let reveal = s
        .verifier
        .build_reveal(1.0, &ProtocolParams::default(), 0.0, &mut s.links, &s.auth)
        .unwrap();
    let err = s.responders[0]
        .handle_poll(&reveal, 0.0, 0.2, &s.auth, &mut s.rng)
        .unwrap_err();
    assert!(matches!(err, ProtocolError::UnexpectedMessage { .. }));
}

/// Full exchange among a verifier and three mutually audible neighbors.
#[test]
fn three_honest_reporters_give_full_observations() {
    let mut s = setup(3, 1);
    let params = ProtocolParams::default();
    let poll = s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    for (i, r) in s.responders.iter_mut().enumerate() {
        r.handle_poll(
            &poll,
            1e-7 * (i + 1) as f64,
            params.t_max,
            &s.auth,
            &mut s.rng,
        )
        .unwrap();
    }
    let mut replies = Vec::new();
    for (i, r) in s.responders.iter_mut().enumerate() {
        let claim = r.honest_reply_claim().unwrap();
        replies.push(
            r.build_reply(0.01 * (i + 1) as f64, claim, &mut s.links, &s.auth)
                .unwrap(),
        );
    }
    for (i, reply) in replies.iter().enumerate() {
        let reply = reply.as_reply().unwrap();
        assert!(s.verifier.handle_reply(reply, 0.01 * (i + 1) as f64 + 1e-7));
        for (j, r) in s.responders.iter_mut().enumerate() {
            if i != j {
                assert!(r.handle_reply(reply, 0.01 * (i + 1) as f64 + 2e-7));
            }
        }
    }
    assert_eq!(s.verifier.stored_replies(), 3);
    let reveal = s
        .verifier
        .build_reveal(0.3, &params, 0.0, &mut s.links, &s.auth)
        .unwrap();
    let reports: Vec<_> = s
        .responders
        .iter_mut()
        .enumerate()
        .map(|(i, r)| {
            let claim = honest_report_claim(r, Position::new(30.0 * i as f64, 0.0)).unwrap();
            assert_eq!(claim.entries.len(), 2);
            match r
                .build_report(&reveal, claim, &s.directory, &s.auth)
                .unwrap()
            {
                Message::Report(rep) => rep,
                _ => unreachable!(),
            }
        })
        .collect();
    let obs = s
        .verifier
        .ingest_reports(&reports, &s.directory, &s.auth)
        .unwrap();
    assert_eq!(obs.responders.len(), 3);
    assert_eq!(obs.cross.len(), 6);
    assert!(obs.is_consistent());
    assert_eq!(obs.responders[&NodeId(2)].poll_rx, 2e-7);
    assert!((obs.poll_range(NodeId(1)).unwrap() - 1e-7 * SPEED_OF_LIGHT).abs() < 1e-9);

    // A reporter that leaves out one commitment loses exactly that ordered pair.
    let mut trimmed = reports.clone();
    let r3 = &mut s.responders[2];
    let mut claim = honest_report_claim(r3, Position::new(60.0, 0.0)).unwrap();
    claim.entries.remove(0);
    trimmed[2] = r3
        .build_report(&reveal, claim, &s.directory, &s.auth)
        .unwrap()
        .as_report()
        .unwrap()
        .clone();
    let obs2 = s
        .verifier
        .ingest_reports(&trimmed, &s.directory, &s.auth)
        .unwrap();
    assert_eq!(obs2.cross.len(), 5);
    assert!(!obs2.has_cross(NodeId(1), NodeId(3)));
    assert!(obs2.has_cross(NodeId(3), NodeId(1)));

    let empty = s
        .verifier
        .ingest_reports(&[], &s.directory, &s.auth)
        .unwrap();
    assert!(empty.responders.is_empty());
}

#[test]
fn replies_for_other_polls_are_ignored() {
    let mut s = setup(1, 2);
    let mut other = setup_seeded(1, 1, 12);
    let foreign_poll = other
        .verifier
        .start_poll(0.0, &mut other.links, &other.auth)
        .unwrap();
    let r = &mut other.responders[0];
    r.handle_poll(&foreign_poll, 0.0, 0.2, &other.auth, &mut other.rng)
        .unwrap();
    let claim = r.honest_reply_claim().unwrap();
    let reply = r
        .build_reply(0.1, claim, &mut other.links, &other.auth)
        .unwrap();

    s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    assert!(!s.verifier.handle_reply(reply.as_reply().unwrap(), 0.1));
    assert_eq!(s.verifier.stored_replies(), 0);
}

#[test]
fn commitment_carries_forged_poll_time_verbatim() {
    let mut s = setup(1, 1);
    let onetime = s.verifier.keys().one_time_keys().next().unwrap().clone();
    let poll = s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    let r = &mut s.responders[0];
    r.handle_poll(&poll, 3e-7, 0.2, &s.auth, &mut s.rng)
        .unwrap();
    let honest = r
        .clone()
        .build_reply(0.05, r.honest_reply_claim().unwrap(), &mut s.links, &s.auth)
        .unwrap();
    let forged = r
        .build_reply(
            0.05,
            ReplyClaim { poll_rx_time: 9e-7 },
            &mut s.links,
            &s.auth,
        )
        .unwrap();

    let opened = |m: &Message| {
        m.as_reply()
            .unwrap()
            .commitment
            .open(&onetime)
            .unwrap()
            .poll_rx_time
    };
    assert_eq!(opened(&honest), 3e-7);
    assert_eq!(opened(&forged), 9e-7);
    // Only the verifier's one-time key opens a commitment.
    let stranger = snpd_core::crypto::KeyPair::from_seed([4; 32]);
    assert_eq!(
        forged.as_reply().unwrap().commitment.open(&stranger),
        Err(ProtocolError::WrongKey)
    );
}

#[test]
fn replies_to_different_polls_have_different_hashes() {
    let mut s = setup(1, 2);
    let p1 = s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    let p2 = s.verifier.start_poll(1.0, &mut s.links, &s.auth).unwrap();
    let r = &mut s.responders[0];
    r.handle_poll(&p1, 0.0, 0.2, &s.auth, &mut s.rng).unwrap();
    let a = r
        .build_reply(0.1, r.honest_reply_claim().unwrap(), &mut s.links, &s.auth)
        .unwrap();
    r.handle_poll(&p2, 1.0, 0.2, &s.auth, &mut s.rng).unwrap();
    let b = r
        .build_reply(1.1, r.honest_reply_claim().unwrap(), &mut s.links, &s.auth)
        .unwrap();
    assert_ne!(
        a.as_reply().unwrap().poll_hash,
        b.as_reply().unwrap().poll_hash
    );
}

#[test]
fn reveal_timing_and_authorship() {
    let params = ProtocolParams::default();
    let mut s = setup(1, 1);
    let poll = s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    let early = s
        .verifier
        .build_reveal(0.1, &params, 0.0, &mut s.links, &s.auth);
    assert!(matches!(early, Err(ProtocolError::RevealTooEarly { .. })));
    // Zero jitter: due exactly at t_max + contention lag.
    let reveal = s
        .verifier
        .build_reveal(params.reveal_delay(), &params, 0.0, &mut s.links, &s.auth)
        .unwrap();

    let r = &mut s.responders[0];
    r.handle_poll(&poll, 0.0, 0.2, &s.auth, &mut s.rng).unwrap();
    assert_eq!(
        r.verify_reveal(&reveal, &s.directory, &s.auth),
        Ok(NodeId(0))
    );

    // Another node's reveal cannot prove authorship of this poll.
    let mut other = setup_seeded(0, 1, 12);
    other
        .verifier
        .start_poll(0.0, &mut other.links, &other.auth)
        .unwrap();
    let impostor = other
        .verifier
        .build_reveal(1.0, &params, 0.0, &mut other.links, &other.auth)
        .unwrap();
    for k in other.verifier.keys().one_time_keys() {
        s.auth.register(k);
    }
    assert_eq!(
        r.verify_reveal(&impostor, &s.directory, &s.auth),
        Err(ProtocolError::AuthorshipCheckFailed)
    );
    let claim = ReportClaim {
        position: Position::default(),
        reply_tx_time: 0.0,
        entries: vec![],
    };
    assert!(r
        .build_report(&impostor, claim, &s.directory, &s.auth)
        .is_err());
}

#[test]
fn forged_report_values_are_carried_verbatim_and_signed() {
    let params = ProtocolParams::default();
    let mut s = setup(1, 1);
    let poll = s.verifier.start_poll(0.0, &mut s.links, &s.auth).unwrap();
    let r = &mut s.responders[0];
    r.handle_poll(&poll, 1e-7, 0.2, &s.auth, &mut s.rng)
        .unwrap();
    let reply = r
        .build_reply(0.05, r.honest_reply_claim().unwrap(), &mut s.links, &s.auth)
        .unwrap();
    s.verifier
        .handle_reply(reply.as_reply().unwrap(), 0.05 + 1e-7);
    let reveal = s
        .verifier
        .build_reveal(0.3, &params, 0.0, &mut s.links, &s.auth)
        .unwrap();
    let fake = Position::new(123.0, -45.0);
    let claim = ReportClaim {
        position: fake,
        reply_tx_time: 0.049_999_9,
        entries: vec![],
    };
    let report = r
        .build_report(&reveal, claim, &s.directory, &s.auth)
        .unwrap();
    let obs = s
        .verifier
        .ingest_reports(
            &[report.as_report().unwrap().clone()],
            &s.directory,
            &s.auth,
        )
        .unwrap();
    let rec = obs.responders[&NodeId(1)];
    assert_eq!(rec.position, fake);
    assert_eq!(rec.reply_tx, 0.049_999_9);
}

fn one_of_each(auth: &HashAuth, entries: usize) -> (Vec<Message>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut directory = Directory::new();
    let vkeys = KeyMaterial::generate(&mut rng, 1);
    auth.register(vkeys.long_term());
    vkeys.one_time_keys().for_each(|k| auth.register(k));
    directory.insert(NodeId(0xAABB_CCDD), vkeys.long_term().public());
    let mut verifier = Verifier::new(NodeId(0xAABB_CCDD), vkeys, Position::default());
    let xkeys = KeyMaterial::generate(&mut rng, 0);
    auth.register(xkeys.long_term());
    directory.insert(NodeId(0x1122_3344), xkeys.long_term().public());
    let long_term_x = xkeys.long_term().public().0.to_vec();
    let mut x = Responder::new(NodeId(0x1122_3344), xkeys);
    let mut links = LinkIdSource::new(7);
    let params = ProtocolParams::default();

    let poll = verifier.start_poll(0.0, &mut links, auth).unwrap();
    x.handle_poll(&poll, 1e-7, 0.2, auth, &mut rng).unwrap();
    let reply = x
        .build_reply(0.1, x.honest_reply_claim().unwrap(), &mut links, auth)
        .unwrap();
    for i in 0..entries {
        x.handle_reply(reply.as_reply().unwrap(), 0.1 + i as f64 * 1e-3);
    }
    let reveal = verifier
        .build_reveal(0.3, &params, 0.0, &mut links, auth)
        .unwrap();
    let claim = honest_report_claim(&x, Position::new(10.0, 20.0)).unwrap();
    let report = x.build_report(&reveal, claim, &directory, auth).unwrap();
    (vec![poll, reply, reveal, report], long_term_x)
}

#[test]
fn wire_sizes() {
    let auth = HashAuth::new();
    let (msgs, _) = one_of_each(&auth, 5);
    let sizes: Vec<_> = msgs
        .iter()
        .map(|m| wire::serialize(m, &auth).len())
        .collect();
    assert_eq!(sizes, vec![26, 71, 67, 295]);
    let (msgs, _) = one_of_each(&auth, 28);
    assert!(wire::serialize(&msgs[3], &auth).len() + 28 <= 1500);
}

#[test]
fn poll_and_reply_bytes_hide_long_term_identity() {
    let auth = HashAuth::new();
    let (msgs, long_term) = one_of_each(&auth, 1);
    let ids: [&[u8]; 3] = [
        &long_term,
        &0x1122_3344u32.to_be_bytes(),
        &0xAABB_CCDDu32.to_be_bytes(),
    ];
    for m in &msgs[..2] {
        let bytes = wire::serialize(m, &auth);
        for id in ids {
            assert!(
                !bytes.windows(id.len()).any(|w| w == id),
                "{:?} leaks identity",
                m.kind()
            );
        }
    }
}

#[test]
fn tampered_commitment_fails_signature_check() {
    let auth = HashAuth::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vkeys = KeyMaterial::generate(&mut rng, 1);
    let onetime = vkeys.one_time_keys().next().unwrap().clone();
    auth.register(&onetime);
    let xkeys = KeyMaterial::generate(&mut rng, 0);
    auth.register(xkeys.long_term());
    let mut verifier = Verifier::new(NodeId(0), vkeys, Position::default());
    let mut x = Responder::new(NodeId(1), xkeys);
    let mut links = LinkIdSource::new(1);
    let poll = verifier.start_poll(0.0, &mut links, &auth).unwrap();
    x.handle_poll(&poll, 2e-7, 0.2, &auth, &mut rng).unwrap();
    let reply = x
        .build_reply(0.1, x.honest_reply_claim().unwrap(), &mut links, &auth)
        .unwrap();
    let Frame::Reply {
        link,
        poll_hash,
        commitment,
    } = wire::to_frame(&reply, &auth)
    else {
        panic!()
    };
    let poll_hash = snpd_core::crypto::Digest(poll_hash);

    let check = |ct: &[u8; COMMITMENT_LEN]| {
        let body = wire::open_commitment(ct, &onetime, link, &auth);
        let signed = wire::commitment_signed_bytes(body.poll_rx_time, &body.key, &poll_hash);
        auth.verify(&body.key, &signed, &body.signature)
    };
    assert!(check(&commitment));
    for i in 0..COMMITMENT_LEN {
        for flip in [0x01u8, 0x80] {
            let mut t = commitment;
            t[i] ^= flip;
            assert!(!check(&t), "tamper at byte {i} went unnoticed");
        }
    }
}

#[test]
fn serialized_messages_reparse() {
    let auth = HashAuth::new();
    let (msgs, _) = one_of_each(&auth, 3);
    for m in &msgs {
        let bytes = wire::serialize(m, &auth);
        let frame = wire::deserialize(&bytes).unwrap();
        assert_eq!(frame.kind(), m.kind());
        assert_eq!(frame.to_bytes(), bytes);
    }
}

#[test]
fn report_payload_opens_with_verifier_key() {
    let auth = SimulatedAuth;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut directory = Directory::new();
    let vkeys = KeyMaterial::generate(&mut rng, 1);
    let vlong = vkeys.long_term().clone();
    directory.insert(NodeId(0), vlong.public());
    let xkeys = KeyMaterial::generate(&mut rng, 0);
    let xpub = xkeys.long_term().public();
    directory.insert(NodeId(1), xpub);
    let mut v = Verifier::new(NodeId(0), vkeys, Position::default());
    let mut x = Responder::new(NodeId(1), xkeys);
    let mut links = LinkIdSource::new(3);
    let poll = v.start_poll(0.0, &mut links, &auth).unwrap();
    x.handle_poll(&poll, 0.0, 0.2, &auth, &mut rng).unwrap();
    x.build_reply(0.1, x.honest_reply_claim().unwrap(), &mut links, &auth)
        .unwrap();
    let reveal = v
        .build_reveal(0.5, &ProtocolParams::default(), 0.0, &mut links, &auth)
        .unwrap();
    let claim = honest_report_claim(&x, Position::new(-1.5, 2.25)).unwrap();
    let report = x.build_report(&reveal, claim, &directory, &auth).unwrap();
    let Frame::Report {
        payload, source, ..
    } = wire::to_frame(&report, &auth)
    else {
        panic!()
    };
    let decoded = wire::open_report_payload(&payload, &vlong, source, &auth).unwrap();
    assert_eq!(decoded.position, Position::new(-1.5, 2.25));
    assert!((decoded.reply_tx_time - 0.1).abs() < wire::TIME_RESOLUTION);
    assert!(auth.verify(&xpub, &decoded.signed, &decoded.signature));
}
