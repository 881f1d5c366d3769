//! Bit-exact canonical framing of recorded chunks.
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! 0x01 | session_id[16] | index u64 | t_start u64 | t_end u64
//!      | challenge_time u64 | challenge[32] | coupling_digest[32]
//!      | payload_len u32 | payload
//! ```
//!
//! An absent coupling digest is written as 32 zero bytes. Every module that
//! hashes a chunk hashes exactly these bytes.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hash::{hex32, Digest, DIGEST_LEN};
use crate::id::SessionId;
use crate::Timestamp;

pub const FRAME_VERSION: u8 = 0x01;

/// Size of a frame carrying an empty payload.
pub const FRAME_OVERHEAD: usize = 1 + 16 + 8 + 8 + 8 + 8 + 32 + 32 + 4;

/// One challenge-bound slice of the recorded stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: u64,
    pub t_start: Timestamp,
    pub t_end: Timestamp,
    pub challenge_time: Timestamp,
    #[serde(with = "hex32")]
    pub challenge: [u8; 32],
    #[serde(with = "base64_bytes")]
    pub payload: Vec<u8>,
    pub coupling_digest: Option<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("payload of {0} bytes exceeds the 32-bit length field")]
    PayloadTooLong(usize),
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unsupported frame version {0:#04x}")]
    Version(u8),
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
}

/// Serializes `chunk` for hashing, bound to `session`.
pub fn canonical_chunk_bytes(session: &SessionId, chunk: &Chunk) -> Result<Vec<u8>, FrameError> {
    let len = u32::try_from(chunk.payload.len())
        .map_err(|_| FrameError::PayloadTooLong(chunk.payload.len()))?;
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + chunk.payload.len());
    out.push(FRAME_VERSION);
    out.extend_from_slice(&session.0);
    out.extend_from_slice(&chunk.index.to_be_bytes());
    out.extend_from_slice(&chunk.t_start.to_be_bytes());
    out.extend_from_slice(&chunk.t_end.to_be_bytes());
    out.extend_from_slice(&chunk.challenge_time.to_be_bytes());
    out.extend_from_slice(&chunk.challenge);
    out.extend_from_slice(chunk.coupling_digest.unwrap_or(Digest::ZERO).as_bytes());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&chunk.payload);
    Ok(out)
}

/// Inverse of [`canonical_chunk_bytes`].
///
/// An all-zero coupling field decodes as absent.
pub fn parse_chunk_bytes(bytes: &[u8]) -> Result<(SessionId, Chunk), FrameError> {
    let mut r = Reader { bytes, pos: 0 };
    let version = r.take::<1>()?[0];
    if version != FRAME_VERSION {
        return Err(FrameError::Version(version));
    }
    let session = SessionId(r.take::<16>()?);
    let index = r.u64()?;
    let t_start = r.u64()?;
    let t_end = r.u64()?;
    let challenge_time = r.u64()?;
    let challenge = r.take::<32>()?;
    let coupling = Digest(r.take::<DIGEST_LEN>()?);
    let len = u32::from_be_bytes(r.take::<4>()?) as usize;
    let payload = r.slice(len)?.to_vec();
    if r.pos != bytes.len() {
        return Err(FrameError::Trailing(bytes.len() - r.pos));
    }
    Ok((
        session,
        Chunk {
            index,
            t_start,
            t_end,
            challenge_time,
            challenge,
            payload,
            coupling_digest: (coupling != Digest::ZERO).then_some(coupling),
        },
    ))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn slice(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(FrameError::Truncated {
                need: end,
                have: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], FrameError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.slice(N)?);
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, FrameError> {
        Ok(u64::from_be_bytes(self.take::<8>()?))
    }
}

pub(crate) mod base64_bytes {
    use super::*;
    use base64::Engine as _;

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chunk(payload: Vec<u8>) -> Chunk {
        Chunk {
            index: 3,
            t_start: 10,
            t_end: 15,
            challenge_time: 10,
            challenge: [7u8; 32],
            payload,
            coupling_digest: None,
        }
    }

    #[test]
    fn empty_payload_frame_is_117_bytes() {
        let bytes = canonical_chunk_bytes(&SessionId::default(), &chunk(vec![])).unwrap();
        assert_eq!(bytes.len(), 117);
        assert_eq!(FRAME_OVERHEAD, 117);
    }

    #[test]
    fn challenge_time_is_framed() {
        let a = chunk(vec![1, 2, 3]);
        let mut b = a.clone();
        b.challenge_time = 11;
        let s = SessionId::default();
        assert_ne!(
            canonical_chunk_bytes(&s, &a).unwrap(),
            canonical_chunk_bytes(&s, &b).unwrap()
        );
    }

    #[test]
    fn field_offsets() {
        let mut c = chunk(vec![0xAA]);
        c.coupling_digest = Some(Digest([0x55; 32]));
        let s = SessionId([0x11; 16]);
        let b = canonical_chunk_bytes(&s, &c).unwrap();
        assert_eq!(b[0], 0x01);
        assert_eq!(&b[1..17], &[0x11; 16]);
        assert_eq!(&b[17..25], &3u64.to_be_bytes());
        assert_eq!(&b[49..81], &[7u8; 32]);
        assert_eq!(&b[81..113], &[0x55; 32]);
        assert_eq!(&b[113..117], &1u32.to_be_bytes());
        assert_eq!(b[117], 0xAA);
    }

    #[test]
    fn parse_rejects_bad_input() {
        let s = SessionId::default();
        let mut b = canonical_chunk_bytes(&s, &chunk(vec![1, 2])).unwrap();
        assert!(matches!(
            parse_chunk_bytes(&b[..b.len() - 1]),
            Err(FrameError::Truncated { .. })
        ));
        b.push(0);
        assert_eq!(parse_chunk_bytes(&b), Err(FrameError::Trailing(1)));
        b[0] = 2;
        assert_eq!(parse_chunk_bytes(&b), Err(FrameError::Version(2)));
    }

    fn arb_chunk() -> impl Strategy<Value = (SessionId, Chunk)> {
        (
            any::<[u8; 16]>(),
            any::<[u64; 4]>(),
            any::<[u8; 32]>(),
            proptest::option::of(any::<[u8; 32]>().prop_filter("nonzero", |d| d != &[0u8; 32])),
            proptest::collection::vec(any::<u8>(), 0..64),
        )
            .prop_map(|(sid, t, challenge, coupling, payload)| {
                (
                    SessionId(sid),
                    Chunk {
                        index: t[0],
                        t_start: t[1],
                        t_end: t[2],
                        challenge_time: t[3],
                        challenge,
                        payload,
                        coupling_digest: coupling.map(Digest),
                    },
                )
            })
    }

    proptest! {
        #[test]
        fn round_trip((sid, c) in arb_chunk()) {
            let bytes = canonical_chunk_bytes(&sid, &c).unwrap();
            prop_assert_eq!(bytes.len(), FRAME_OVERHEAD + c.payload.len());
            prop_assert_eq!(parse_chunk_bytes(&bytes).unwrap(), (sid, c));
        }

        #[test]
        fn distinct_chunks_frame_distinctly(a in arb_chunk(), b in arb_chunk()) {
            let ba = canonical_chunk_bytes(&a.0, &a.1).unwrap();
            let bb = canonical_chunk_bytes(&b.0, &b.1).unwrap();
            prop_assert_eq!(a == b, ba == bb);
        }
    }
}
