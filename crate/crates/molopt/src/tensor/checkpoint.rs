//! Versioned binary checkpoint container.
//!
//! Layout: magic `MOPT`, format version (u32 LE), vocabulary hash (u64 LE),
//! tensor count (u32 LE), then per tensor: name length (u16 LE) + UTF-8
//! name, rows (u32 LE), cols (u32 LE), row-major f64 LE payload. Optimizer
//! state and scalar metadata ride along as reserved-prefix tensors, so a
//! reload resumes training bit-exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use super::optim::ParamStore;

const MAGIC: &[u8; 4] = b"MOPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

pub struct Checkpoint {
    pub vocab_hash: u64,
    pub params: ParamStore,
    pub meta: BTreeMap<String, f64>,
}

pub fn save_checkpoint<W: Write>(
    mut w: W,
    vocab_hash: u64,
    params: &ParamStore,
    meta: &BTreeMap<String, f64>,
) -> Result<(), CheckpointError> {
    let mut tensors: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
    for name in params.names() {
        let e = params.get(name);
        tensors.push((name.clone(), e.rows, e.cols, e.data.clone()));
        tensors.push((format!("opt.m.{name}"), e.rows, e.cols, e.m.clone()));
        tensors.push((format!("opt.v.{name}"), e.rows, e.cols, e.v.clone()));
        tensors.push((format!("opt.vhat.{name}"), e.rows, e.cols, e.vhat.clone()));
    }
    tensors.push(("opt.step".into(), 1, 1, vec![params.step as f64]));
    for (k, v) in meta {
        tensors.push((format!("meta.{k}"), 1, 1, vec![*v]));
    }

    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&vocab_hash.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, rows, cols, data) in tensors {
        let nb = name.as_bytes();
        w.write_all(&(nb.len() as u16).to_le_bytes())?;
        w.write_all(nb)?;
        w.write_all(&(rows as u32).to_le_bytes())?;
        w.write_all(&(cols as u32).to_le_bytes())?;
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let vocab_hash = read_u64(&mut r)?;
    let count = read_u32(&mut r)? as usize;

    let mut raw: Vec<(String, usize, usize, Vec<f64>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = read_u16(&mut r)? as usize;
        let mut nb = vec![0u8; nlen];
        r.read_exact(&mut nb)?;
        let name = String::from_utf8(nb)
            .map_err(|_| CheckpointError::Corrupt("tensor name not UTF-8".into()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = vec![0.0f64; rows * cols];
        for v in data.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        raw.push((name, rows, cols, data));
    }

    let mut params = ParamStore::new();
    let mut meta = BTreeMap::new();
    // First pass: the real parameters define the store layout.
    for (name, rows, cols, data) in &raw {
        if !name.starts_with("opt.") && !name.starts_with("meta.") {
            params.insert(name, *rows, *cols, data.clone());
        }
    }
    for (name, _, _, data) in &raw {
        if let Some(rest) = name.strip_prefix("opt.m.") {
            store_state(&mut params, rest, data, |e| &mut e.m)?;
        } else if let Some(rest) = name.strip_prefix("opt.v.") {
            store_state(&mut params, rest, data, |e| &mut e.v)?;
        } else if let Some(rest) = name.strip_prefix("opt.vhat.") {
            store_state(&mut params, rest, data, |e| &mut e.vhat)?;
        } else if name == "opt.step" {
            params.step = data[0] as u64;
        } else if let Some(rest) = name.strip_prefix("meta.") {
            meta.insert(rest.to_string(), data[0]);
        }
    }

    Ok(Checkpoint {
        vocab_hash,
        params,
        meta,
    })
}

fn store_state(
    params: &mut ParamStore,
    name: &str,
    data: &[f64],
    pick: impl Fn(&mut super::optim::ParamEntry) -> &mut Vec<f64>,
) -> Result<(), CheckpointError> {
    if !params.contains(name) {
        return Err(CheckpointError::Corrupt(format!(
            "optimizer state for unknown parameter {name}"
        )));
    }
    let e = params.get_mut(name);
    if pick(e).len() != data.len() {
        return Err(CheckpointError::Corrupt(format!(
            "optimizer state size mismatch for {name}"
        )));
    }
    pick(e).copy_from_slice(data);
    Ok(())
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, CheckpointError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_everything() {
        let mut store = ParamStore::new();
        store.insert("a", 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        store.insert("b", 1, 2, vec![-0.5, 0.25]);
        store.get_mut("a").grad.copy_from_slice(&[0.1; 6]);
        store.amsgrad_step(0.01, 0.9, 0.999, 1e-8);

        let mut meta = BTreeMap::new();
        meta.insert("epoch".to_string(), 3.0);
        meta.insert("rng_state".to_string(), 12345.0);

        let mut buf = Vec::new();
        save_checkpoint(&mut buf, 0xabcdef, &store, &meta).unwrap();
        let ck = load_checkpoint(buf.as_slice()).unwrap();

        assert_eq!(ck.vocab_hash, 0xabcdef);
        assert_eq!(ck.meta, meta);
        assert_eq!(ck.params.step, store.step);
        for name in store.names() {
            let a = store.get(name);
            let b = ck.params.get(name);
            assert_eq!(a.data, b.data);
            assert_eq!(a.m, b.m);
            assert_eq!(a.v, b.v);
            assert_eq!(a.vhat, b.vhat);
        }

        // Byte determinism: saving the reload reproduces the stream.
        let mut buf2 = Vec::new();
        save_checkpoint(&mut buf2, 0xabcdef, &ck.params, &ck.meta).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE\x01\x00\x00\x00".to_vec();
        assert!(matches!(
            load_checkpoint(buf.as_slice()),
            Err(CheckpointError::BadMagic)
        ));
    }
}
