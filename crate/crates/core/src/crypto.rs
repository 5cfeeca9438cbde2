//! Authentication primitives behind a pluggable [`Authenticator`].
//!
//! Two backends are provided. [`SimulatedAuth`] derives tags and keystreams
//! from a fast non-cryptographic hash of the public key and is meant for large
//! simulations. [`HashAuth`] uses SHA-256 with secret-keyed tags checked through
//! a registry of key bindings, standing in for a certificate authority. Both
//! produce 21-byte keys and signatures and 20-byte digests, so message sizes do
//! not depend on the backend.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

pub const PUBLIC_KEY_LEN: usize = 21;
pub const SIGNATURE_LEN: usize = 21;
pub const DIGEST_LEN: usize = 20;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest(pub [u8; DIGEST_LEN]);

macro_rules! hex_debug {
    ($t:ty, $name:literal) => {
        impl fmt::Debug for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}(", $name)?;
                for b in &self.0[..4] {
                    write!(f, "{b:02x}")?;
                }
                write!(f, "..)")
            }
        }
    };
}
hex_debug!(PublicKey, "PublicKey");
hex_debug!(Signature, "Signature");
hex_debug!(Digest, "Digest");

/// A private/public key pair. The private half never leaves this struct.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    secret: [u8; 32],
    public: PublicKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_seed(secret: [u8; 32]) -> Self {
        let mut h = Sha256::new();
        h.update(b"snpd/public");
        h.update(secret);
        let out = h.finalize();
        // 0x02 mimics the prefix of a compressed curve point.
        let mut public = [0u8; PUBLIC_KEY_LEN];
        public[0] = 0x02;
        public[1..].copy_from_slice(&out[..PUBLIC_KEY_LEN - 1]);
        Self {
            secret,
            public: PublicKey(public),
        }
    }

    pub fn generate<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        let mut secret = [0u8; 32];
        rng.fill(&mut secret);
        Self::from_seed(secret)
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    fn secret(&self) -> &[u8; 32] {
        &self.secret
    }
}

pub trait Authenticator: Send + Sync {
    fn digest(&self, data: &[u8]) -> Digest;

    /// Tag a holder of `key` produces over `data`.
    fn tag(&self, key: &KeyPair, data: &[u8]) -> [u8; 32];

    /// Tag the holder of `public` would produce, if this backend can check it.
    fn expected_tag(&self, public: &PublicKey, data: &[u8]) -> Option<[u8; 32]>;

    /// XOR `buf` with the keystream bound to `key` and `nonce`. Applying it
    /// twice restores the input.
    fn apply_keystream(&self, key: &PublicKey, nonce: u32, buf: &mut [u8]);

    fn sign(&self, key: &KeyPair, data: &[u8]) -> Signature {
        let tag = self.tag(key, data);
        let mut sig = [0u8; SIGNATURE_LEN];
        sig.copy_from_slice(&tag[..SIGNATURE_LEN]);
        Signature(sig)
    }

    fn verify(&self, public: &PublicKey, data: &[u8], sig: &Signature) -> bool {
        self.expected_tag(public, data)
            .is_some_and(|tag| tag[..SIGNATURE_LEN] == sig.0)
    }

    /// Short proof of key ownership (the encrypted hash of a REVEAL).
    fn prove(&self, key: &KeyPair, data: &[u8]) -> Digest {
        let tag = self.tag(key, &[b"proof/".as_slice(), data].concat());
        let mut out = [0u8; DIGEST_LEN];
        out.copy_from_slice(&tag[..DIGEST_LEN]);
        Digest(out)
    }

    fn check_proof(&self, public: &PublicKey, data: &[u8], proof: &Digest) -> bool {
        self.expected_tag(public, &[b"proof/".as_slice(), data].concat())
            .is_some_and(|tag| tag[..DIGEST_LEN] == proof.0)
    }
}

/// FNV-1a based backend. Tags depend on the public key only, so any party can
/// compute them; protocol code never does so on another node's behalf.
#[derive(Debug, Default, Clone, Copy)]
pub struct SimulatedAuth;

fn fnv1a(seed: u64, chunks: &[&[u8]]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for chunk in chunks {
        for &b in *chunk {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn expand(chunks: &[&[u8]]) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (lane, dst) in out.chunks_mut(8).enumerate() {
        dst.copy_from_slice(&fnv1a(lane as u64 + 1, chunks).to_be_bytes());
    }
    out
}

impl Authenticator for SimulatedAuth {
    fn digest(&self, data: &[u8]) -> Digest {
        let full = expand(&[b"digest", data]);
        let mut out = [0u8; DIGEST_LEN];
        out.copy_from_slice(&full[..DIGEST_LEN]);
        Digest(out)
    }

    fn tag(&self, key: &KeyPair, data: &[u8]) -> [u8; 32] {
        expand(&[b"tag", &key.public().0, data])
    }

    fn expected_tag(&self, public: &PublicKey, data: &[u8]) -> Option<[u8; 32]> {
        Some(expand(&[b"tag", &public.0, data]))
    }

    fn apply_keystream(&self, key: &PublicKey, nonce: u32, buf: &mut [u8]) {
        let nonce = nonce.to_be_bytes();
        for (i, b) in buf.iter_mut().enumerate() {
            *b ^= key.0[i % PUBLIC_KEY_LEN] ^ nonce[i % 4];
        }
    }
}

/// SHA-256 backend with a registry of key bindings.
#[derive(Debug, Default)]
pub struct HashAuth {
    bindings: RwLock<HashMap<PublicKey, [u8; 32]>>,
}

impl HashAuth {
    pub fn new() -> Self {
        Self::default()
    }

    /// Make `key`'s public half checkable by every node.
    pub fn register(&self, key: &KeyPair) {
        self.bindings
            .write()
            .expect("binding registry poisoned")
            .insert(key.public(), *key.secret());
    }

    fn keyed(secret: &[u8; 32], data: &[u8]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"snpd/tag");
        h.update(secret);
        h.update(data);
        h.finalize().into()
    }
}

impl Authenticator for HashAuth {
    fn digest(&self, data: &[u8]) -> Digest {
        let full = Sha256::digest(data);
        let mut out = [0u8; DIGEST_LEN];
        out.copy_from_slice(&full[..DIGEST_LEN]);
        Digest(out)
    }

    fn tag(&self, key: &KeyPair, data: &[u8]) -> [u8; 32] {
        Self::keyed(key.secret(), data)
    }

    fn expected_tag(&self, public: &PublicKey, data: &[u8]) -> Option<[u8; 32]> {
        let bindings = self.bindings.read().expect("binding registry poisoned");
        bindings.get(public).map(|secret| Self::keyed(secret, data))
    }

    fn apply_keystream(&self, key: &PublicKey, nonce: u32, buf: &mut [u8]) {
        for (block, chunk) in buf.chunks_mut(32).enumerate() {
            let mut h = Sha256::new();
            h.update(b"snpd/stream");
            h.update(key.0);
            h.update(nonce.to_be_bytes());
            h.update((block as u32).to_be_bytes());
            let stream = h.finalize();
            for (b, s) in chunk.iter_mut().zip(stream.iter()) {
                *b ^= s;
            }
        }
    }
}
