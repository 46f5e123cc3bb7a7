//! Versioned binary checkpoints.
//!
//! ```text
//! magic    b"TRCK"
//! version  u32
//! config   u32 length + JSON NetConfig
//! count    u32
//! per tensor:
//!   name   u16 length + UTF-8
//!   shape  u8 rank + rank × u32
//!   dtype  u8 (1 = f32, 2 = f64)
//!   data   little-endian payload
//! checksum u64 FNV-1a over every preceding byte
//! ```
//!
//! Parameters are kept `f32`-representable, so `f32` storage is lossless.

use std::fs;
use std::path::Path;

use super::{NetConfig, NetError, Network, Parameters};
use crate::charset::Charset;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const DTYPE_F32: u8 = 1;
const DTYPE_F64: u8 = 2;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn checkpoint_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(net.config()).expect("config serializes");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    let tensors = &net.params().tensors;
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(DTYPE_F32);
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<(), NetError> {
    fs::write(path, checkpoint_bytes(net))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        if self.pos + n > self.bytes.len() {
            return Err(NetError::CorruptCheckpoint("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NetError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn network_from_bytes(bytes: &[u8]) -> Result<Network, NetError> {
    if bytes.len() < 8 + 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(NetError::CorruptCheckpoint("bad magic or truncated".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(NetError::CheckpointVersion(version));
    }
    if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(NetError::CorruptCheckpoint("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let clen = r.u32()? as usize;
    let config: NetConfig =
        serde_json::from_slice(r.take(clen)?).map_err(|e| NetError::CorruptCheckpoint(format!("config: {e}")))?;
    let mut net = Network::build(config)?;
    let count = r.u32()? as usize;
    let template = net.params().clone();
    if count != template.tensors.len() {
        return Err(NetError::CorruptCheckpoint(format!(
            "{count} tensors, config implies {}",
            template.tensors.len()
        )));
    }
    let mut params = Parameters::default();
    for expected in &template.tensors {
        let nlen = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| NetError::CorruptCheckpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if name != expected.name || shape != expected.shape {
            return Err(NetError::CorruptCheckpoint(format!(
                "tensor {name} {shape:?} does not match {} {:?}",
                expected.name, expected.shape
            )));
        }
        let n: usize = shape.iter().product();
        let data = match r.u8()? {
            DTYPE_F32 => r
                .take(4 * n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            DTYPE_F64 => r
                .take(8 * n)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            other => return Err(NetError::CorruptCheckpoint(format!("dtype {other}"))),
        };
        params.push(name, shape, expected.group, data);
    }
    if r.pos != body.len() {
        return Err(NetError::CorruptCheckpoint("trailing bytes".into()));
    }
    net.set_params(params)?;
    Ok(net)
}

pub fn load_checkpoint(path: &Path) -> Result<Network, NetError> {
    network_from_bytes(&fs::read(path)?)
}

/// Loads and checks the head size against a charset.
pub fn load_checkpoint_for(path: &Path, charset: &Charset) -> Result<Network, NetError> {
    let net = load_checkpoint(path)?;
    if net.config().vocab != charset.vocab_size() {
        return Err(NetError::VocabMismatch {
            checkpoint: net.config().vocab,
            charset: charset.vocab_size(),
        });
    }
    Ok(net)
}
