//! Flat binary container shared by checkpoints, private stores and style banks.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"FDRV" | version: u32 | record count: u32
//! per record: name length: u32 | name bytes (UTF-8) | kind: u8 | element count: u64 | f64 x count
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FDRV";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub kind: u8,
    pub data: Vec<f64>,
}

pub fn encode(records: &[Record]) -> Vec<u8> {
    let payload: usize = records
        .iter()
        .map(|r| 4 + r.name.len() + 1 + 8 + 8 * r.data.len())
        .sum();
    let mut out = Vec::with_capacity(12 + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(r.kind);
        out.extend_from_slice(&(r.data.len() as u64).to_le_bytes());
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Vec<Record>, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| format!("record name is not UTF-8: {e}"))?
            .to_string();
        let kind = r.take(1)?[0];
        let n = r.u64()? as usize;
        let raw = r.take(n.checked_mul(8).ok_or("element count overflow")?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push(Record { name, kind, data });
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(records)
}

pub fn write_file(path: &Path, records: &[Record]) -> Result<()> {
    fs::write(path, encode(records)).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<Record>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let bytes = encode(&[Record {
            name: "ab".into(),
            kind: 2,
            data: vec![1.5],
        }]);
        assert_eq!(&bytes[..4], b"FDRV");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..18], b"ab");
        assert_eq!(bytes[18], 2);
        assert_eq!(&bytes[19..27], &1u64.to_le_bytes());
        assert_eq!(&bytes[27..35], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 35);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"NOPE").is_err());
        let mut bytes = encode(&[Record {
            name: "x".into(),
            kind: 0,
            data: vec![1.0, 2.0],
        }]);
        bytes.pop();
        assert!(decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            recs in proptest::collection::vec(
                ("[a-z./0-9]{0,12}", any::<u8>(), proptest::collection::vec(any::<u64>(), 0..20)),
                0..6,
            )
        ) {
            let records: Vec<Record> = recs
                .into_iter()
                .map(|(name, kind, bits)| Record {
                    name,
                    kind,
                    data: bits.into_iter().map(f64::from_bits).collect(),
                })
                .collect();
            let back = decode(&encode(&records)).unwrap();
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in back.iter().zip(&records) {
                prop_assert_eq!(&a.name, &b.name);
                prop_assert_eq!(a.kind, b.kind);
                let abits: Vec<u64> = a.data.iter().map(|v| v.to_bits()).collect();
                let bbits: Vec<u64> = b.data.iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(abits, bbits);
            }
        }
    }
}
