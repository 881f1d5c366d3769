//! Linear hash chain over canonical chunk frames.

use serde::{Deserialize, Serialize};

use crate::hash::{digest, digest_parts, Digest};

/// Position and value of a hash chain after absorbing `index` chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainHead {
    pub index: u64,
    pub digest: Digest,
}

impl ChainHead {
    /// Head at index 0, seeded from the recording header's canonical bytes.
    pub fn genesis(header_bytes: &[u8]) -> Self {
        ChainHead {
            index: 0,
            digest: digest(header_bytes),
        }
    }
}

/// Absorbs one canonical chunk frame: `digest(head.digest || chunk_bytes)`.
pub fn chain_extend(head: &ChainHead, chunk_bytes: &[u8]) -> ChainHead {
    ChainHead {
        index: head.index + 1,
        digest: digest_parts(&[head.digest.as_bytes(), chunk_bytes]),
    }
}

/// Heads after each frame in order, starting from `genesis`.
pub fn chain_over<'a, I>(genesis: ChainHead, frames: I) -> Vec<ChainHead>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut head = genesis;
    frames
        .into_iter()
        .map(|frame| {
            head = chain_extend(&head, frame);
            head
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_advances_and_digest_changes() {
        let g = ChainHead::genesis(b"hdr");
        let once = chain_extend(&g, b"x");
        let twice = chain_extend(&once, b"x");
        assert_eq!(once.index, 1);
        assert_eq!(twice.index, 2);
        assert_ne!(once.digest, twice.digest);
    }

    #[test]
    fn recomputation_matches() {
        let g = ChainHead::genesis(b"hdr");
        let h = chain_extend(&g, b"chunk");
        assert_eq!(chain_extend(&g, b"chunk"), h);
        let heads = chain_over(g, [b"chunk".as_slice()]);
        assert_eq!(heads, vec![h]);
    }
}
