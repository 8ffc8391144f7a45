//! Versioned binary checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! | field | encoding |
//! |---|---|
//! | magic | 8 bytes `STCNETCK` |
//! | version | `u32` |
//! | config | `u32` byte length, then the `key = value` text of the training config |
//! | iteration | `u64` completed iterations |
//! | sampler | 32-byte seed, `u64` stream, `u128` word position |
//! | generator | store block |
//! | discriminator | `u8` presence flag, then a store block if 1 |
//!
//! A store block is a `u32` parameter count followed, per parameter, by its
//! name (`u32` length + UTF-8), rank (`u32`), dims (`u64` each) and `f32`
//! values; then the optimizer step (`u64`) and, per parameter, its first and
//! second moment as `f32` values.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::{TrainConfig, Trainer};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::numerics::{Adam, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"STCNETCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

fn put_values(out: &mut Vec<u8>, t: &Tensor<f32>) {
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_store(out: &mut Vec<u8>, store: &ParamStore<f32>, opt: &Adam<f32>) {
    put_u32(out, store.len() as u32);
    for p in store.iter() {
        put_bytes(out, p.name.as_bytes());
        put_u32(out, p.value.shape().len() as u32);
        for &d in p.value.shape() {
            put_u64(out, d as u64);
        }
        put_values(out, &p.value);
    }
    put_u64(out, opt.step);
    for (m, v) in opt.first_moment.iter().zip(&opt.second_moment) {
        put_values(out, m);
        put_values(out, v);
    }
}

pub fn encode(trainer: &Trainer) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_bytes(&mut out, trainer.config.to_kv_text().as_bytes());
    put_u64(&mut out, trainer.iteration as u64);
    out.extend_from_slice(&trainer.rng.get_seed());
    put_u64(&mut out, trainer.rng.get_stream());
    out.extend_from_slice(&trainer.rng.get_word_pos().to_le_bytes());
    put_store(&mut out, &trainer.gen_store, &trainer.gen_opt);
    match &trainer.discriminator {
        Some(_) => {
            out.push(1);
            put_store(&mut out, &trainer.disc_store, &trainer.disc_opt);
        }
        None => out.push(0),
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated file: need {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice of requested length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn values_into(&mut self, t: &mut Tensor<f32>) -> Result<()> {
        let raw = self.take(t.len() * 4)?;
        for (v, chunk) in t.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
        Ok(())
    }

    fn store_into(&mut self, store: &mut ParamStore<f32>, opt: &mut Adam<f32>) -> Result<()> {
        let count = self.u32()? as usize;
        if count != store.len() {
            return Err(Error::Checkpoint(format!("file has {count} parameters, model has {}", store.len())));
        }
        for p in store.iter_mut() {
            let name = self.bytes()?;
            if name != p.name.as_bytes() {
                return Err(Error::Checkpoint(format!(
                    "expected parameter `{}`, found `{}`",
                    p.name,
                    String::from_utf8_lossy(name)
                )));
            }
            let rank = self.u32()? as usize;
            let dims = (0..rank).map(|_| self.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            if dims != p.value.shape() {
                return Err(Error::Checkpoint(format!("`{}` has shape {dims:?}, model expects {:?}", p.name, p.value.shape())));
            }
            self.values_into(&mut p.value)?;
        }
        opt.step = self.u64()?;
        for (m, v) in opt.first_moment.iter_mut().zip(opt.second_moment.iter_mut()) {
            self.values_into(m)?;
            self.values_into(v)?;
        }
        Ok(())
    }
}

pub fn decode(buf: &[u8]) -> Result<Trainer> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8).ok() != Some(&CHECKPOINT_MAGIC[..]) {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, this build reads version {CHECKPOINT_VERSION}"
        )));
    }
    let text = std::str::from_utf8(r.bytes()?).map_err(|_| Error::Checkpoint("config echo is not UTF-8".into()))?;
    let config = TrainConfig::from_kv(&KeyValues::parse(text)?)?;
    let mut trainer = Trainer::new(config)?;
    trainer.iteration = r.u64()? as usize;
    let seed: [u8; 32] = r.array()?;
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.array()?);
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    trainer.rng = rng;
    r.store_into(&mut trainer.gen_store, &mut trainer.gen_opt)?;
    let has_disc = r.take(1)?[0];
    match (has_disc, trainer.discriminator.is_some()) {
        (1, true) => r.store_into(&mut trainer.disc_store, &mut trainer.disc_opt)?,
        (0, false) => {}
        _ => return Err(Error::Checkpoint("discriminator presence disagrees with the config echo".into())),
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(trainer)
}

pub fn save_checkpoint(trainer: &Trainer, path: &Path) -> Result<()> {
    fs::write(path, encode(trainer))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
    decode(&fs::read(path)?)
}
