//! A fixed, seeded exchange whose encodings serve as golden wire fixtures.

use super::wire;
use super::{
    honest_report_claim, Directory, KeyMaterial, LinkIdSource, Message, NodeId, ProtocolParams,
    Responder, Verifier,
};
use crate::crypto::SimulatedAuth;
use crate::geometry::Position;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const VERIFIER_ID: NodeId = NodeId(0xAABB_CCDD);
pub const RESPONDER_ID: NodeId = NodeId(0x1122_3344);

/// One message of each kind. The REPORT comes from a responder at
/// (10 m, 20 m) that overheard the REPLYs of `heard` other neighbors.
pub fn golden_exchange(heard: usize) -> Vec<Message> {
    let auth = SimulatedAuth;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut links = LinkIdSource::new(7);
    let mut directory = Directory::new();
    let params = ProtocolParams::default();

    let vkeys = KeyMaterial::generate(&mut rng, 1);
    directory.insert(VERIFIER_ID, vkeys.long_term().public());
    let mut verifier = Verifier::new(VERIFIER_ID, vkeys, Position::default());
    let xkeys = KeyMaterial::generate(&mut rng, 0);
    directory.insert(RESPONDER_ID, xkeys.long_term().public());
    let mut x = Responder::new(RESPONDER_ID, xkeys);

    let poll = verifier
        .start_poll(0.0, &mut links, &auth)
        .expect("one key in the pool");
    x.handle_poll(&poll, 1e-7, params.t_max, &auth, &mut rng)
        .expect("poll");
    let reply = x
        .build_reply(
            0.1,
            x.honest_reply_claim().expect("polled"),
            &mut links,
            &auth,
        )
        .expect("reply");
    for i in 0..heard {
        let mut y = Responder::new(NodeId(i as u32 + 1), KeyMaterial::generate(&mut rng, 0));
        y.handle_poll(&poll, 2e-7, params.t_max, &auth, &mut rng)
            .expect("poll");
        let t = 0.11 + i as f64 * 1e-3;
        let r = y
            .build_reply(
                t,
                y.honest_reply_claim().expect("polled"),
                &mut links,
                &auth,
            )
            .expect("reply");
        x.handle_reply(r.as_reply().expect("reply"), t + 1e-7);
    }
    let reveal = verifier
        .build_reveal(0.3, &params, 0.0, &mut links, &auth)
        .expect("reveal");
    let claim = honest_report_claim(&x, Position::new(10.0, 20.0)).expect("claim");
    let report = x
        .build_report(&reveal, claim, &directory, &auth)
        .expect("report");
    vec![poll, reply, reveal, report]
}

/// Encodings of [`golden_exchange`].
pub fn golden_frames(heard: usize) -> Vec<Vec<u8>> {
    golden_exchange(heard)
        .iter()
        .map(|m| wire::serialize(m, &SimulatedAuth))
        .collect()
}
