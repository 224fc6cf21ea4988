//! Five-step secure packet pipeline (header, fragmentation, compression,
//! MAC, encryption) and its inverse.
//!
//! Envelope wire layout (big-endian):
//!
//! ```text
//! env_version[1]=0x01 | frag_index[2] | frag_count[2] | plain_len[2] |
//! ciphertext[rest] = Enc(key_enc, compressed_fragment || mac[32])
//! ```
//!
//! The MAC is HMAC-SHA-256 over `envelope_header_bytes || compressed_fragment`
//! and is appended after the compressed fragment *inside* the ciphertext
//! (MAC-then-encrypt; on receive we decrypt first and discard the fragment
//! on verification failure).
//!
//! The stream cipher is ChaCha20 with a per-envelope derivation:
//! `key = SHA-256("cnmm.enc.v1" || key_enc)`,
//! `nonce = SHA-256("cnmm.nonce.v1" || envelope_header_bytes)[..12]`.
//! A null cipher (identity) and identity compression exist for
//! known-answer tests.

use std::io::{Read, Write};

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::wire::{self, Message, WireError};

/// Serialized envelope header size in bytes.
pub const ENVELOPE_HEADER_LEN: usize = 7;
/// MAC tag size in bytes (HMAC-SHA-256).
pub const MAC_LEN: usize = 32;

pub const ENVELOPE_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SecureError {
    #[error("plaintext exceeds max_fragment * 65535 bytes")]
    Oversize,
    #[error("channel key is invalid (empty)")]
    KeyInvalid,
    #[error("channel config is invalid: {0}")]
    ConfigInvalid(&'static str),
    #[error("MAC verification failed")]
    MacFailure,
    #[error("fragment index {0} missing from reassembly set")]
    FragmentMissing(u16),
    #[error("envelopes disagree on fragment count or repeat an index")]
    FragCountMismatch,
    #[error("fragment failed to decompress to its declared length")]
    DecompressFailure,
    #[error("envelope bytes truncated")]
    Truncated,
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Pre-shared secrets for one (agent, manager-pool) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelKeys {
    key_mac: Vec<u8>,
    key_enc: Vec<u8>,
}

impl ChannelKeys {
    pub fn new(key_mac: Vec<u8>, key_enc: Vec<u8>) -> Result<Self, SecureError> {
        if key_mac.is_empty() || key_enc.is_empty() {
            return Err(SecureError::KeyInvalid);
        }
        Ok(ChannelKeys { key_mac, key_enc })
    }

    /// Deterministic per-agent key derivation for scenario runs:
    /// `SHA-256("cnmm.key.{mac,enc}.v1" || seed_le || agent_id_le)`.
    pub fn derive(seed: u64, agent_id: u64) -> Self {
        let derive = |tag: &[u8]| -> Vec<u8> {
            let mut h = Sha256::new();
            h.update(tag);
            h.update(seed.to_le_bytes());
            h.update(agent_id.to_le_bytes());
            h.finalize().to_vec()
        };
        ChannelKeys {
            key_mac: derive(b"cnmm.key.mac.v1"),
            key_enc: derive(b"cnmm.key.enc.v1"),
        }
    }

    pub fn key_mac(&self) -> &[u8] {
        &self.key_mac
    }

    pub fn key_enc(&self) -> &[u8] {
        &self.key_enc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compression {
    Identity,
    Deflate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cipher {
    /// Identity transform, for known-answer tests.
    NullTest,
    ChaCha20,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub max_fragment: usize,
    pub compression: Compression,
    pub cipher: Cipher,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            max_fragment: 1400,
            compression: Compression::Deflate,
            cipher: Cipher::ChaCha20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureEnvelope {
    pub env_version: u8,
    pub frag_index: u16,
    pub frag_count: u16,
    /// Pre-compression fragment length in bytes.
    pub plain_len: u16,
    pub ciphertext: Vec<u8>,
}

impl SecureEnvelope {
    fn header_bytes(&self) -> [u8; ENVELOPE_HEADER_LEN] {
        let mut hdr = [0u8; ENVELOPE_HEADER_LEN];
        hdr[0] = self.env_version;
        hdr[1..3].copy_from_slice(&self.frag_index.to_be_bytes());
        hdr[3..5].copy_from_slice(&self.frag_count.to_be_bytes());
        hdr[5..7].copy_from_slice(&self.plain_len.to_be_bytes());
        hdr
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ENVELOPE_HEADER_LEN + self.ciphertext.len());
        out.extend_from_slice(&self.header_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    /// Parses one envelope occupying the whole datagram.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SecureError> {
        if bytes.len() < ENVELOPE_HEADER_LEN {
            return Err(SecureError::Truncated);
        }
        Ok(SecureEnvelope {
            env_version: bytes[0],
            frag_index: u16::from_be_bytes(bytes[1..3].try_into().unwrap()),
            frag_count: u16::from_be_bytes(bytes[3..5].try_into().unwrap()),
            plain_len: u16::from_be_bytes(bytes[5..7].try_into().unwrap()),
            ciphertext: bytes[ENVELOPE_HEADER_LEN..].to_vec(),
        })
    }
}

/// HMAC-SHA-256 (RFC 2104).
pub fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; MAC_LEN] {
    const BLOCK: usize = 64;
    let mut k = [0u8; BLOCK];
    if key.len() > BLOCK {
        k[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        k[..key.len()].copy_from_slice(key);
    }
    let mut ipad = [0x36u8; BLOCK];
    let mut opad = [0x5cu8; BLOCK];
    for i in 0..BLOCK {
        ipad[i] ^= k[i];
        opad[i] ^= k[i];
    }
    let inner = Sha256::new()
        .chain_update(ipad)
        .chain_update(message)
        .finalize();
    let outer = Sha256::new()
        .chain_update(opad)
        .chain_update(inner)
        .finalize();
    outer.into()
}

fn compress(data: &[u8], mode: Compression) -> Vec<u8> {
    match mode {
        Compression::Identity => data.to_vec(),
        Compression::Deflate => {
            let mut enc =
                flate2::write::DeflateEncoder::new(Vec::new(), flate2::Compression::default());
            enc.write_all(data).expect("in-memory deflate");
            enc.finish().expect("in-memory deflate")
        }
    }
}

fn decompress(data: &[u8], mode: Compression, expected_len: usize) -> Result<Vec<u8>, SecureError> {
    match mode {
        Compression::Identity => {
            if data.len() != expected_len {
                return Err(SecureError::DecompressFailure);
            }
            Ok(data.to_vec())
        }
        Compression::Deflate => {
            let mut out = Vec::with_capacity(expected_len);
            let mut dec = flate2::read::DeflateDecoder::new(data);
            // Bounded read: one byte past the declared length detects overlong output.
            let mut limited = (&mut dec).take(expected_len as u64 + 1);
            limited
                .read_to_end(&mut out)
                .map_err(|_| SecureError::DecompressFailure)?;
            if out.len() != expected_len {
                return Err(SecureError::DecompressFailure);
            }
            Ok(out)
        }
    }
}

fn apply_cipher(buf: &mut [u8], key_enc: &[u8], header: &[u8], cipher: Cipher) {
    match cipher {
        Cipher::NullTest => {}
        Cipher::ChaCha20 => {
            let key: [u8; 32] = Sha256::new()
                .chain_update(b"cnmm.enc.v1")
                .chain_update(key_enc)
                .finalize()
                .into();
            let nonce_full: [u8; 32] = Sha256::new()
                .chain_update(b"cnmm.nonce.v1")
                .chain_update(header)
                .finalize()
                .into();
            let mut nonce = [0u8; 12];
            nonce.copy_from_slice(&nonce_full[..12]);
            ChaCha20::new(&key.into(), &nonce.into()).apply_keystream(buf);
        }
    }
}

fn validate(keys: &ChannelKeys, cfg: &ChannelConfig) -> Result<(), SecureError> {
    if keys.key_mac.is_empty() || keys.key_enc.is_empty() {
        return Err(SecureError::KeyInvalid);
    }
    if cfg.max_fragment < 64 {
        return Err(SecureError::ConfigInvalid("max_fragment < 64"));
    }
    Ok(())
}

/// Fragment, compress, MAC, and encrypt a plaintext. Empty input yields a
/// single empty-fragment envelope.
pub fn protect(
    plaintext: &[u8],
    keys: &ChannelKeys,
    cfg: &ChannelConfig,
) -> Result<Vec<SecureEnvelope>, SecureError> {
    validate(keys, cfg)?;
    if plaintext.len() > cfg.max_fragment * u16::MAX as usize {
        return Err(SecureError::Oversize);
    }

    let fragments: Vec<&[u8]> = if plaintext.is_empty() {
        vec![&[]]
    } else {
        plaintext.chunks(cfg.max_fragment).collect()
    };
    let frag_count = fragments.len() as u16;

    let mut envelopes = Vec::with_capacity(fragments.len());
    for (idx, frag) in fragments.iter().enumerate() {
        let compressed = compress(frag, cfg.compression);
        let mut env = SecureEnvelope {
            env_version: ENVELOPE_VERSION,
            frag_index: idx as u16,
            frag_count,
            plain_len: frag.len() as u16,
            ciphertext: Vec::new(),
        };
        let header = env.header_bytes();
        let mut mac_input = Vec::with_capacity(header.len() + compressed.len());
        mac_input.extend_from_slice(&header);
        mac_input.extend_from_slice(&compressed);
        let mac = hmac_sha256(&keys.key_mac, &mac_input);

        let mut body = compressed;
        body.extend_from_slice(&mac);
        apply_cipher(&mut body, &keys.key_enc, &header, cfg.cipher);
        env.ciphertext = body;
        envelopes.push(env);
    }
    Ok(envelopes)
}

/// Decrypt, verify, decompress, and reassemble. The MAC is checked per
/// envelope before any field of it is trusted for reassembly.
pub fn unprotect(
    envelopes: &[SecureEnvelope],
    keys: &ChannelKeys,
    cfg: &ChannelConfig,
) -> Result<Vec<u8>, SecureError> {
    validate(keys, cfg)?;
    if envelopes.is_empty() {
        return Err(SecureError::FragmentMissing(0));
    }

    let mut verified: Vec<(u16, u16, Vec<u8>)> = Vec::with_capacity(envelopes.len());
    for env in envelopes {
        let header = env.header_bytes();
        let mut body = env.ciphertext.clone();
        apply_cipher(&mut body, &keys.key_enc, &header, cfg.cipher);
        if body.len() < MAC_LEN {
            return Err(SecureError::MacFailure);
        }
        let (compressed, mac) = body.split_at(body.len() - MAC_LEN);
        let mut mac_input = Vec::with_capacity(header.len() + compressed.len());
        mac_input.extend_from_slice(&header);
        mac_input.extend_from_slice(compressed);
        if hmac_sha256(&keys.key_mac, &mac_input) != mac {
            return Err(SecureError::MacFailure);
        }
        let plain = decompress(compressed, cfg.compression, env.plain_len as usize)?;
        verified.push((env.frag_index, env.frag_count, plain));
    }

    let frag_count = verified[0].1;
    if frag_count == 0 || verified.iter().any(|(_, c, _)| *c != frag_count) {
        return Err(SecureError::FragCountMismatch);
    }
    let mut slots: Vec<Option<Vec<u8>>> = vec![None; frag_count as usize];
    for (idx, _, plain) in verified {
        if idx >= frag_count {
            return Err(SecureError::FragCountMismatch);
        }
        let slot = &mut slots[idx as usize];
        if slot.is_some() {
            return Err(SecureError::FragCountMismatch);
        }
        *slot = Some(plain);
    }
    let mut out = Vec::new();
    for (idx, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(plain) => out.extend_from_slice(&plain),
            None => return Err(SecureError::FragmentMissing(idx as u16)),
        }
    }
    Ok(out)
}

/// `encode_message` composed with `protect`.
pub fn wrap_message(
    msg: &Message,
    keys: &ChannelKeys,
    cfg: &ChannelConfig,
) -> Result<Vec<SecureEnvelope>, SecureError> {
    let bytes = wire::encode_message(msg)?;
    protect(&bytes, keys, cfg)
}

/// `unprotect` composed with `decode_message`.
pub fn unwrap_message(
    envelopes: &[SecureEnvelope],
    keys: &ChannelKeys,
    cfg: &ChannelConfig,
) -> Result<Message, SecureError> {
    let bytes = unprotect(envelopes, keys, cfg)?;
    Ok(wire::decode_message(&bytes)?)
}
