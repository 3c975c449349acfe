//! Versioned little-endian parameter blobs:
//! `b"TSNN"`, u32 version, u32 layer count, then per layer
//! u32 inputs, u32 outputs, u8 activation code, row-major f64 weights, f64 biases.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::mlp::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TSNN";
pub const BLOB_VERSION: u32 = 1;

pub fn encode_params(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * net.num_params());
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(BLOB_VERSION).expect("vec write");
    out.write_u32::<LittleEndian>(net.layers().len() as u32).expect("vec write");
    for layer in net.layers() {
        out.write_u32::<LittleEndian>(layer.weight.nrows() as u32).expect("vec write");
        out.write_u32::<LittleEndian>(layer.weight.ncols() as u32).expect("vec write");
        out.write_u8(layer.activation.code()).expect("vec write");
        for &w in layer.weight.iter() {
            out.write_f64::<LittleEndian>(w).expect("vec write");
        }
        for &b in layer.bias.iter() {
            out.write_f64::<LittleEndian>(b).expect("vec write");
        }
    }
    out
}

pub fn decode_params(bytes: &[u8]) -> Result<Mlp> {
    let corrupt = |what: &str| Error::Corrupt(format!("parameter blob: {what}"));
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| corrupt("truncated header"))?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = cur.read_u32::<LittleEndian>().map_err(|_| corrupt("truncated header"))?;
    if version != BLOB_VERSION {
        return Err(Error::Version { found: version, expected: BLOB_VERSION });
    }
    let n_layers = cur.read_u32::<LittleEndian>().map_err(|_| corrupt("truncated header"))? as usize;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let rows = cur.read_u32::<LittleEndian>().map_err(|_| corrupt("truncated layer"))? as usize;
        let cols = cur.read_u32::<LittleEndian>().map_err(|_| corrupt("truncated layer"))? as usize;
        let act = cur.read_u8().map_err(|_| corrupt("truncated layer"))?;
        let activation = Activation::from_code(act).ok_or_else(|| corrupt("unknown activation"))?;
        let remaining = bytes.len() - cur.position() as usize;
        if rows.checked_mul(cols).and_then(|n| n.checked_add(cols)).is_none_or(|n| n * 8 > remaining) {
            return Err(corrupt("truncated weights"));
        }
        let mut w = vec![0.0; rows * cols];
        cur.read_f64_into::<LittleEndian>(&mut w).map_err(|_| corrupt("truncated weights"))?;
        let mut b = vec![0.0; cols];
        cur.read_f64_into::<LittleEndian>(&mut b).map_err(|_| corrupt("truncated biases"))?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((rows, cols), w).map_err(|_| corrupt("bad shape"))?,
            bias: Array1::from(b),
            activation,
        });
    }
    if cur.position() as usize != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Mlp::from_layers(layers)
}
