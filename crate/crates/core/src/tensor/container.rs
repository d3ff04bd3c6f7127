//! `TNSR` named-tensor container.
//!
//! Layout (little-endian, no padding):
//! - magic `b"TNSR"`, `u32` version (= 1), `u32` entry count
//! - per entry: `u16` name length, UTF-8 name, `u8` dtype (0 = f32),
//!   `u8` rank, `rank * u32` dims, row-major `f32` data

use std::collections::HashSet;
use std::path::Path;

use super::{shape_err, Tensor, TensorError};

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

/// Ordered list of uniquely named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorContainer {
    entries: Vec<(String, Tensor)>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), TensorError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(TensorError::DuplicateName(name));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, TensorError> {
        write_container(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        read_container(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TensorError> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TensorError> {
        read_container(&std::fs::read(path)?)
    }
}

pub fn write_container(container: &TensorContainer) -> Result<Vec<u8>, TensorError> {
    let payload: usize = container
        .entries
        .iter()
        .map(|(n, t)| 4 + n.len() + 4 * t.rank() + 4 * t.len())
        .sum();
    let mut out = Vec::with_capacity(12 + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(container.entries.len())
        .map_err(|_| shape_err("write_container", "more than u32::MAX entries"))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, tensor) in &container.entries {
        let name_len = u16::try_from(name.len()).map_err(|_| {
            shape_err("write_container", format!("entry name of {} bytes exceeds u16", name.len()))
        })?;
        let rank = u8::try_from(tensor.rank())
            .map_err(|_| shape_err("write_container", format!("rank {} exceeds u8", tensor.rank())))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F32);
        out.push(rank);
        for &d in tensor.dims() {
            let d = u32::try_from(d)
                .map_err(|_| shape_err("write_container", format!("dim {d} exceeds u32")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], TensorError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(TensorError::Format {
                offset: self.pos,
                detail: format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8, TensorError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, TensorError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, TensorError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn format_err(offset: usize, detail: impl Into<String>) -> TensorError {
    TensorError::Format {
        offset,
        detail: detail.into(),
    }
}

pub fn read_container(bytes: &[u8]) -> Result<TensorContainer, TensorError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(format_err(0, "bad magic, expected \"TNSR\""));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let count = cur.u32("entry count")?;
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for idx in 0..count {
        let entry_start = cur.pos;
        let name_len = cur.u16("name length")? as usize;
        let name_at = cur.pos;
        let name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|e| format_err(name_at, format!("entry {idx} name is not UTF-8: {e}")))?
            .to_owned();
        if !seen.insert(name.clone()) {
            return Err(format_err(entry_start, format!("duplicate entry name {name:?}")));
        }
        let dtype_at = cur.pos;
        let dtype = cur.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(format_err(dtype_at, format!("unknown dtype {dtype} for {name:?}")));
        }
        let rank_at = cur.pos;
        let rank = cur.u8("rank")? as usize;
        if rank == 0 {
            return Err(format_err(rank_at, format!("entry {name:?} has rank 0")));
        }
        let mut dims = Vec::with_capacity(rank);
        let mut numel: usize = 1;
        for _ in 0..rank {
            let at = cur.pos;
            let d = cur.u32("dim")? as usize;
            if d == 0 {
                return Err(format_err(at, format!("entry {name:?} has a zero dim")));
            }
            numel = numel
                .checked_mul(d)
                .ok_or_else(|| format_err(at, format!("entry {name:?} element count overflows")))?;
            dims.push(d);
        }
        let nbytes = numel
            .checked_mul(4)
            .ok_or_else(|| format_err(cur.pos, "data size overflows"))?;
        let raw = cur.take(nbytes, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        entries.push((name, Tensor::new(dims, data)?));
    }
    if cur.pos != bytes.len() {
        return Err(format_err(
            cur.pos,
            format!("{} trailing bytes after last entry", bytes.len() - cur.pos),
        ));
    }
    Ok(TensorContainer { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_container_is_twelve_bytes() {
        let bytes = TensorContainer::new().to_bytes().unwrap();
        assert_eq!(bytes.len(), 12);
        assert_eq!(&bytes[..4], b"TNSR");
        assert_eq!(read_container(&bytes).unwrap(), TensorContainer::new());
    }

    #[test]
    fn exact_layout_of_single_entry() {
        let mut c = TensorContainer::new();
        c.insert("ab", Tensor::new(vec![2, 2], vec![1.0, -2.0, 0.5, 3.0]).unwrap())
            .unwrap();
        let bytes = c.to_bytes().unwrap();
        let mut expected = b"TNSR".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(b"ab");
        expected.extend_from_slice(&[0, 2]);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        for v in [1.0f32, -2.0, 0.5, 3.0] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
        assert_eq!(read_container(&bytes).unwrap(), c);
    }

    #[test]
    fn format_errors_name_offsets() {
        let mut c = TensorContainer::new();
        c.insert("w", Tensor::zeros(vec![3])).unwrap();
        let bytes = c.to_bytes().unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_container(&bad), Err(TensorError::Format { offset: 0, .. })));

        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(read_container(&bad), Err(TensorError::Format { offset: 4, .. })));

        let cut = &bytes[..bytes.len() - 2];
        match read_container(cut) {
            Err(TensorError::Format { offset, detail }) => {
                assert_eq!(offset, 12 + 2 + 1 + 2 + 4);
                assert!(detail.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut bad = bytes.clone();
        bad[12 + 2 + 1] = 7;
        assert!(read_container(&bad).is_err());
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut c = TensorContainer::new();
        c.insert("x", Tensor::zeros(vec![1])).unwrap();
        assert!(matches!(
            c.insert("x", Tensor::zeros(vec![1])),
            Err(TensorError::DuplicateName(_))
        ));
    }

    fn arb_tensor() -> impl Strategy<Value = Tensor> {
        prop::collection::vec(1usize..5, 1..4).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            prop::collection::vec(any::<u32>().prop_map(f32::from_bits), n)
                .prop_map(move |data| Tensor::new(dims.clone(), data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(tensors in prop::collection::vec(arb_tensor(), 0..12)) {
            let mut c = TensorContainer::new();
            for (i, t) in tensors.into_iter().enumerate() {
                c.insert(format!("t{i}"), t).unwrap();
            }
            let back = read_container(&c.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back.len(), c.len());
            for ((n1, t1), (n2, t2)) in back.entries().iter().zip(c.entries()) {
                prop_assert_eq!(n1, n2);
                prop_assert_eq!(t1.dims(), t2.dims());
                let b1: Vec<u32> = t1.data().iter().map(|v| v.to_bits()).collect();
                let b2: Vec<u32> = t2.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(b1, b2);
            }
        }
    }
}
