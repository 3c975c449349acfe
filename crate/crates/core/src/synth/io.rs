//! Model files: `b"TSYNMODL"`, u32 format version, u64 header length, JSON
//! header, then u64-length-prefixed generator and critic parameter blobs.
//! All integers little-endian.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::cond::CondSampler;
use super::model::{EpochStats, SynthModel, TrainConfig};
use super::pca::PcaTransform;
use crate::error::{Error, Result};
use crate::nn::{decode_params, encode_params};
use crate::transform::DataTransformer;

const MAGIC: &[u8; 8] = b"TSYNMODL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    transformer: DataTransformer,
    cond: CondSampler,
    pca: Option<PcaTransform>,
    trace: Vec<EpochStats>,
    diagnostics: Vec<String>,
}

pub fn to_bytes(model: &SynthModel) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        transformer: model.transformer.clone(),
        cond: model.cond.clone(),
        pca: model.pca.clone(),
        trace: model.trace.clone(),
        diagnostics: model.diagnostics.clone(),
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(FORMAT_VERSION).expect("vec write");
    out.write_u64::<LittleEndian>(header.len() as u64).expect("vec write");
    out.extend_from_slice(&header);
    for net in [&model.generator, &model.critic] {
        let blob = encode_params(net);
        out.write_u64::<LittleEndian>(blob.len() as u64).expect("vec write");
        out.extend_from_slice(&blob);
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<SynthModel> {
    let truncated = || Error::Corrupt("unexpected end of file".into());
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic).map_err(|_| truncated())?;
    if &magic != MAGIC {
        return Err(Error::Corrupt("not a model file (bad magic)".into()));
    }
    let version = cur.read_u32::<LittleEndian>().map_err(|_| truncated())?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let read_section = |cur: &mut Cursor<&[u8]>| -> Result<&[u8]> {
        let len = cur.read_u64::<LittleEndian>().map_err(|_| truncated())? as usize;
        let start = cur.position() as usize;
        let end = start.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(truncated)?;
        cur.set_position(end as u64);
        Ok(&bytes[start..end])
    };
    let header: Header = serde_json::from_slice(read_section(&mut cur)?)
        .map_err(|e| Error::Corrupt(format!("header: {e}")))?;
    let generator = decode_params(read_section(&mut cur)?)?;
    let critic = decode_params(read_section(&mut cur)?)?;
    if cur.position() as usize != bytes.len() {
        return Err(Error::Corrupt("trailing bytes".into()));
    }
    let width = header.transformer.output_width();
    let cond_width = header.cond.width();
    if generator.output_width() != width
        || generator.input_width() != header.config.latent_dim + cond_width
        || critic.input_width() != width + cond_width
        || critic.output_width() != 1
        || header.pca.as_ref().is_some_and(|p| p.dim() != width)
    {
        return Err(Error::Corrupt("network shapes disagree with the encoded layout".into()));
    }
    Ok(SynthModel {
        config: header.config,
        transformer: header.transformer,
        cond: header.cond,
        pca: header.pca,
        generator,
        critic,
        trace: header.trace,
        diagnostics: header.diagnostics,
    })
}

pub fn save(model: &SynthModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<SynthModel> {
    let path = path.as_ref();
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
