//! Fixed 16-byte identifiers for sessions, beacons, repositories and
//! participants.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hash::digest;

macro_rules! id16 {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub [u8; 16]);

        impl $name {
            /// Derives an identifier from a human-readable label (first 16
            /// bytes of its digest).
            pub fn from_label(label: &str) -> Self {
                let d = digest(label.as_bytes());
                let mut out = [0u8; 16];
                out.copy_from_slice(&d.0[..16]);
                $name(out)
            }

            /// Identifier whose last 8 bytes hold `n` big-endian.
            pub fn from_index(n: u64) -> Self {
                let mut out = [0u8; 16];
                out[8..].copy_from_slice(&n.to_be_bytes());
                $name(out)
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Option<Self> {
                let v = hex::decode(s).ok()?;
                Some($name(v.try_into().ok()?))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                $name::from_hex(&s)
                    .ok_or_else(|| serde::de::Error::custom("expected 16 bytes of hex"))
            }
        }
    };
}

id16!(
    /// Identifies one recording session.
    SessionId
);
id16!(
    /// Identifies a precommitting beacon.
    BeaconId
);
id16!(
    /// Identifies a hash-and-publish repository.
    HapId
);
id16!(
    /// Identifies a participant entitled to a key share.
    ParticipantId
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_ids_are_distinct_and_round_trip() {
        let a = BeaconId::from_index(1);
        let b = BeaconId::from_index(2);
        assert_ne!(a, b);
        assert_eq!(BeaconId::from_hex(&a.to_hex()), Some(a));
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<BeaconId>(&json).unwrap(), a);
        assert!(BeaconId::from_hex("00").is_none());
    }
}
