//! Binary checkpoint of a tabular policy.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset     size        field
//! 0          8           magic  b"SILCKPT\0"
//! 8          4           format_version (u32) = 1
//! 12         4           env_name length n (u32)
//! 16         n           env_name, UTF-8
//! 16+n       8           state_count (u64)
//! 24+n       8           action_count (u64)
//! 32+n       8           update counter (u64)
//! 40+n       32          config hash, SHA-256 of the effective config text
//! 72+n       8*S*A       logits (f64), row-major [state][action]
//! ```

use std::path::Path;

use super::PolicyParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SILCKPT\0";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub env_name: String,
    pub config_hash: [u8; 32],
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let name = self.env_name.as_bytes();
        let mut out = Vec::with_capacity(72 + name.len() + 8 * p.logits().len());
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(p.state_count() as u64).to_le_bytes());
        out.extend_from_slice(&(p.action_count() as u64).to_le_bytes());
        out.extend_from_slice(&p.version().to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        for w in p.logits() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let n = r.u32()? as usize;
        let env_name = std::str::from_utf8(r.take(n)?)
            .map_err(|e| Error::Checkpoint(format!("env name: {e}")))?
            .to_owned();
        let state_count = r.u64()? as usize;
        let action_count = r.u64()? as usize;
        let update_counter = r.u64()?;
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(r.take(32)?);
        let len = state_count
            .checked_mul(action_count)
            .ok_or_else(|| Error::Checkpoint("table size overflows".into()))?;
        let mut logits = Vec::with_capacity(len);
        for _ in 0..len {
            logits.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let params = PolicyParams::from_logits(state_count, action_count, logits, update_counter)?;
        Ok(Self {
            env_name,
            config_hash,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let ck = Checkpoint {
            env_name: "kd".into(),
            config_hash: [7; 32],
            params: PolicyParams::from_logits(1, 2, vec![1.5, -2.0], 9).unwrap(),
        };
        let b = ck.to_bytes();
        assert_eq!(&b[..8], b"SILCKPT\0");
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(&b[16..18], b"kd");
        assert_eq!(&b[18..26], &1u64.to_le_bytes());
        assert_eq!(&b[26..34], &2u64.to_le_bytes());
        assert_eq!(&b[34..42], &9u64.to_le_bytes());
        assert_eq!(&b[42..74], &[7u8; 32]);
        assert_eq!(&b[74..82], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 74 + 16);
    }

    #[test]
    fn rejects_truncated_and_trailing() {
        let ck = Checkpoint {
            env_name: "x".into(),
            config_hash: [0; 32],
            params: PolicyParams::zeros(2, 2),
        };
        let mut b = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&b[..b.len() - 1]).is_err());
        b.push(0);
        assert!(Checkpoint::from_bytes(&b).is_err());
        let mut bad = ck.to_bytes();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(
            s in 1usize..6,
            a in 1usize..6,
            seed in proptest::collection::vec(-50.0f64..50.0, 36),
            v in any::<u64>(),
            name in "[a-z_]{0,12}",
        ) {
            let logits = seed[..s * a].to_vec();
            let ck = Checkpoint {
                env_name: name,
                config_hash: [3; 32],
                params: PolicyParams::from_logits(s, a, logits, v).unwrap(),
            };
            prop_assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
        }
    }
}
