//! Versioned actor checkpoints: magic, version, a JSON header, then raw
//! little-endian `f64` parameters in visiting order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActorConfig, RirlActor};
use crate::error::{Error, Result};
use crate::nn::Parameterized;

const MAGIC: &[u8; 8] = b"RIRLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config: ActorConfig,
    pub shapes: Vec<(usize, usize)>,
    /// Attention costs per channel at the time of saving.
    pub lambdas: Vec<f64>,
    pub decoder_lambda: f64,
}

pub fn write_checkpoint<W: Write>(actor: &RirlActor, mut out: W) -> Result<()> {
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        config: actor.config().clone(),
        shapes: actor.shapes(),
        lambdas: actor.channels().iter().map(|c| c.cost).collect(),
        decoder_lambda: actor.config().decoder_cost,
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for v in actor.flat_values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(CheckpointHeader, RirlActor)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not an actor checkpoint".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(Error::Checkpoint("header too large".into()));
    }
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;
    // The random init is overwritten below; any seed will do.
    let mut rng = crate::rng::stream(0, 0);
    let mut actor = RirlActor::new(header.config.clone(), &mut rng)?;
    if actor.shapes() != header.shapes {
        return Err(Error::Checkpoint("parameter shapes disagree with config".into()));
    }
    let mut values = vec![0.0; actor.param_count()];
    let mut buf = [0u8; 8];
    for v in &mut values {
        input.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    if input.read(&mut buf)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    actor.set_flat_values(&values);
    Ok((header, actor))
}

pub fn save_checkpoint(actor: &RirlActor, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(actor, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, RirlActor)> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
