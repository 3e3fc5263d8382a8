//! Portable `.popt` checkpoints.
//!
//! Layout, all integers `u32` and all reals `f64`, little-endian:
//!
//! ```text
//! "POPT" | version = 1 | tensor count
//! per tensor: name length | UTF-8 name | ndim | dims[ndim] | values
//! ```
//!
//! Parameters come first in registration order, then `<name>.m` and
//! `<name>.v` for each parameter, then the rank-0 tensor `step`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::train::params::Slot;
use crate::train::{ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"POPT";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = 3 * store.slots.len() + 1;
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for slot in &store.slots {
        write_tensor(&mut out, &slot.name, &slot.value);
    }
    for slot in &store.slots {
        write_tensor(&mut out, &format!("{}.m", slot.name), &slot.m);
        write_tensor(&mut out, &format!("{}.v", slot.name), &slot.v);
    }
    write_tensor(&mut out, "step", &Tensor::scalar(store.step as f64));
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, not a .popt checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let count = r.u32()? as usize;
    if count % 3 != 1 {
        return Err(Error::Format(format!("tensor count {count} is not 3·params + 1")));
    }
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        tensors.push(r.tensor()?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let n = count / 3;
    let (step_name, step) = tensors.pop().expect("count >= 1");
    if step_name != "step" || !step.shape().is_empty() {
        return Err(Error::Format("missing trailing `step` scalar".into()));
    }
    let step = step.data()[0];
    if !(step >= 0.0 && step.fract() == 0.0) {
        return Err(Error::Format(format!("invalid step value {step}")));
    }

    let moments = tensors.split_off(n);
    let mut store = ParamStore::new();
    for (i, (name, value)) in tensors.into_iter().enumerate() {
        let (m_name, m) = &moments[2 * i];
        let (v_name, v) = &moments[2 * i + 1];
        if *m_name != format!("{name}.m") || *v_name != format!("{name}.v") {
            return Err(Error::Format(format!("moment tensors out of order for `{name}`")));
        }
        if m.shape() != value.shape() || v.shape() != value.shape() {
            return Err(Error::Format(format!("moment shape mismatch for `{name}`")));
        }
        store.insert(&name, value)?;
        let slot: &mut Slot = store.slots.last_mut().expect("just inserted");
        slot.m = m.clone();
        slot.v = v.clone();
    }
    store.step = step as u64;
    Ok(store)
}

pub fn save_checkpoint(store: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(store))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParamStore> {
    decode_checkpoint(&fs::read(path)?)
}

fn write_tensor(out: &mut Vec<u8>, name: &str, t: &Tensor) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!(
                "truncated checkpoint: need {n} bytes at offset {}",
                self.pos
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let len = self.u32()? as usize;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_owned();
        let ndim = self.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(self.u32()? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("tensor `{name}` too large")))?;
        let raw = self.take(count.checked_mul(8).ok_or_else(|| Error::Format("overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((name, Tensor::new(shape, data)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{adam_step, Gradients, TrainConfig};

    fn trained_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("cost.w1", Tensor::new(vec![2, 2], vec![0.1, -0.2, 1e-300, f64::MAX]).unwrap())
            .unwrap();
        s.insert("eta", Tensor::scalar(1.0)).unwrap();
        let g: Gradients = [
            ("cost.w1".to_string(), Tensor::new(vec![2, 2], vec![0.5, 0.25, -1.0, 0.0]).unwrap()),
            ("eta".to_string(), Tensor::scalar(0.3)),
        ]
        .into_iter()
        .collect();
        adam_step(&mut s, &g, &TrainConfig::default()).unwrap();
        s
    }

    #[test]
    fn round_trip_bit_exact() {
        let s = trained_store();
        let back = decode_checkpoint(&encode_checkpoint(&s)).unwrap();
        assert_eq!(back.step(), 1);
        for ((a, ta), (b, tb)) in s.iter().zip(back.iter()) {
            assert_eq!(a, b);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(ta), bits(tb));
        }
        assert_eq!(back, s);
    }

    #[test]
    fn format_errors() {
        let bytes = encode_checkpoint(&trained_store());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Format(m)) if m.contains("magic")));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Format(m)) if m.contains("version")));
        for cut in [3, 10, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Format(_))));
        }
        let mut extra = bytes;
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
    }
}
