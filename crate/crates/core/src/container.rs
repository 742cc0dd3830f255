//! Versioned binary container for model parameters.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"QCLS" | u32 version | str kind | str meta-json | u32 n_arrays | array*
//! str   = u32 byte length, UTF-8 bytes
//! array = str name | u32 ndim | u64 dim * ndim | u64 count | f64 * count
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a save/load round trip is
//! bit-exact. `count` must equal the product of the dims.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QCLS";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub arrays: Vec<NamedArray>,
}

impl Container {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self { kind: kind.into(), meta, arrays: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push(NamedArray { name: name.into(), shape, data });
    }

    pub fn array(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Container(format!("missing array `{name}`")))
    }

    /// Fetches `name` and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        let a = self.array(name)?;
        if a.shape != shape {
            return Err(Error::Shape(format!("array `{name}` has shape {:?}, expected {shape:?}", a.shape)));
        }
        Ok(&a.data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        put_str(&mut out, &self.meta.to_string());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            put_str(&mut out, &a.name);
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&(a.data.len() as u64).to_le_bytes());
            for &v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Version { found: version, expected: VERSION });
        }
        let kind = r.string("kind")?;
        let meta_text = r.string("meta")?;
        let meta = serde_json::from_str(&meta_text).map_err(|e| Error::Container(format!("meta: {e}")))?;
        let n = r.u32("array count")? as usize;
        let mut arrays = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let name = r.string("array name")?;
            let ndim = r.u32("ndim")? as usize;
            let shape = (0..ndim).map(|_| r.u64("dim").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let count = r.u64("count")? as usize;
            let expected = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
            if expected != Some(count) {
                return Err(Error::Shape(format!("array `{name}`: shape {shape:?} does not hold {count} values")));
            }
            let payload = r.take(count.checked_mul(8).ok_or_else(|| Error::Truncated(name.clone()))?, &name)?;
            let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            arrays.push(NamedArray { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Container(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { kind, meta, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!("reading {what} at byte {}", self.pos))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Container(format!("{what} is not UTF-8")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Container {
        let mut c = Container::new("test", serde_json::json!({"a": 1}));
        c.push("w", vec![2, 3], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, -2.5, 0.1]);
        c.push("b", vec![3], vec![0.0, 1.0, 2.0]);
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = Container::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.kind, "test");
        for (a, b) in c.arrays.iter().zip(&back.arrays) {
            assert_eq!(a.shape, b.shape);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.data), bits(&b.data));
        }
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(Container::from_bytes(&bytes), Err(Error::Version { found: 7, expected: 1 })));
    }

    #[test]
    fn tampered_shape() {
        let c = sample();
        let mut bytes = c.to_bytes();
        // first dim of the first array sits right after its name and ndim
        let header = 4 + 4 + (4 + 4) + (4 + c.meta.to_string().len()) + 4 + (4 + 1) + 4;
        bytes[header..header + 8].copy_from_slice(&5u64.to_le_bytes());
        assert!(matches!(Container::from_bytes(&bytes), Err(Error::Shape(_))));
    }

    #[test]
    fn truncation() {
        let bytes = sample().to_bytes();
        for cut in [3, 10, bytes.len() - 1] {
            assert!(matches!(Container::from_bytes(&bytes[..cut]), Err(Error::Truncated(_))), "cut {cut}");
        }
    }

    proptest! {
        #[test]
        fn arbitrary_payloads_round_trip(bits in prop::collection::vec(any::<u64>(), 0..64)) {
            let mut c = Container::new("p", serde_json::Value::Null);
            let data: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).collect();
            c.push("x", vec![data.len()], data);
            let back = Container::from_bytes(&c.to_bytes()).unwrap();
            let got: Vec<u64> = back.arrays[0].data.iter().map(|x| x.to_bits()).collect();
            prop_assert_eq!(got, bits);
        }
    }
}
