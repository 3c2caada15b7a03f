//! Weight checkpoints: `"P3WT"`, u32 version, the layer specification, then
//! every parameter tensor's shape and little-endian f64 values.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::network::Network;
use super::param::Role;
use super::spec::{Activation, LayerSpec, Shape};
use crate::error::{Error, Result};
use crate::io_util::{read_magic, truncated};

pub const MAGIC: [u8; 4] = *b"P3WT";
pub const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidData(format!("{v} exceeds u32")))?;
    w.write_u32::<LittleEndian>(v)?;
    Ok(())
}

fn write_spec<W: Write>(w: &mut W, input: Shape, layers: &[LayerSpec]) -> Result<()> {
    match input {
        Shape::Seq { features, steps } => {
            write_u32(w, features)?;
            write_u32(w, steps)?;
        }
        Shape::Flat(n) => {
            write_u32(w, n)?;
            write_u32(w, 0)?;
        }
    }
    write_u32(w, layers.len())?;
    for layer in layers {
        match *layer {
            LayerSpec::FullyConnected {
                inputs,
                outputs,
                activation,
            } => {
                w.write_u8(0)?;
                write_u32(w, inputs)?;
                write_u32(w, outputs)?;
                w.write_u8(activation.code())?;
            }
            LayerSpec::SpatialConv {
                channels,
                maps,
                activation,
            } => {
                w.write_u8(1)?;
                write_u32(w, channels)?;
                write_u32(w, maps)?;
                w.write_u8(activation.code())?;
            }
            LayerSpec::TemporalConv {
                maps_in,
                filters,
                kernel,
                stride,
                activation,
            } => {
                w.write_u8(2)?;
                write_u32(w, maps_in)?;
                write_u32(w, filters)?;
                write_u32(w, kernel)?;
                write_u32(w, stride)?;
                w.write_u8(activation.code())?;
            }
            LayerSpec::SimpleRnn {
                inputs,
                hidden,
                activation,
            } => {
                w.write_u8(3)?;
                write_u32(w, inputs)?;
                write_u32(w, hidden)?;
                w.write_u8(activation.code())?;
            }
            LayerSpec::Lstm { inputs, hidden } => {
                w.write_u8(4)?;
                write_u32(w, inputs)?;
                write_u32(w, hidden)?;
            }
            LayerSpec::SigmoidUnit { inputs } => {
                w.write_u8(5)?;
                write_u32(w, inputs)?;
            }
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    r.read_u32::<LittleEndian>()
        .map(|v| v as usize)
        .map_err(|e| truncated(e, what))
}

fn read_activation<R: Read>(r: &mut R) -> Result<Activation> {
    let code = r.read_u8().map_err(|e| truncated(e, "activation"))?;
    Activation::from_code(code)
        .ok_or_else(|| Error::InvalidData(format!("unknown activation code {code}")))
}

fn read_spec<R: Read>(r: &mut R) -> Result<(Shape, Vec<LayerSpec>)> {
    let features = read_u32(r, "input shape")?;
    let steps = read_u32(r, "input shape")?;
    let input = if steps == 0 {
        Shape::Flat(features)
    } else {
        Shape::Seq { features, steps }
    };
    let n = read_u32(r, "layer count")?;
    let mut layers = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let tag = r.read_u8().map_err(|e| truncated(e, "layer tag"))?;
        let layer = match tag {
            0 => LayerSpec::FullyConnected {
                inputs: read_u32(r, "layer")?,
                outputs: read_u32(r, "layer")?,
                activation: read_activation(r)?,
            },
            1 => LayerSpec::SpatialConv {
                channels: read_u32(r, "layer")?,
                maps: read_u32(r, "layer")?,
                activation: read_activation(r)?,
            },
            2 => LayerSpec::TemporalConv {
                maps_in: read_u32(r, "layer")?,
                filters: read_u32(r, "layer")?,
                kernel: read_u32(r, "layer")?,
                stride: read_u32(r, "layer")?,
                activation: read_activation(r)?,
            },
            3 => LayerSpec::SimpleRnn {
                inputs: read_u32(r, "layer")?,
                hidden: read_u32(r, "layer")?,
                activation: read_activation(r)?,
            },
            4 => LayerSpec::Lstm {
                inputs: read_u32(r, "layer")?,
                hidden: read_u32(r, "layer")?,
            },
            5 => LayerSpec::SigmoidUnit {
                inputs: read_u32(r, "layer")?,
            },
            t => return Err(Error::InvalidData(format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    Ok((input, layers))
}

fn role_code(role: Role) -> u8 {
    match role {
        Role::Weight => 0,
        Role::Recurrent => 1,
        Role::Bias => 2,
    }
}

pub fn write_network<W: Write>(net: &Network, w: &mut W) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    write_spec(w, net.input_shape(), net.layers())?;
    w.write_u64::<LittleEndian>(net.seed())?;
    write_u32(w, net.params().len())?;
    for (key, p) in net.param_keys().iter().zip(net.params()) {
        write_u32(w, key.layer)?;
        w.write_u8(role_code(key.role))?;
        write_u32(w, p.shape.len())?;
        for &d in &p.shape {
            write_u32(w, d)?;
        }
        for &v in &p.values {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

/// Reads a checkpoint, rebuilding the network from the stored specification.
pub fn read_network<R: Read>(r: &mut R) -> Result<Network> {
    read_magic(r, MAGIC)?;
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|e| truncated(e, "version"))?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            expected: VERSION,
            found: version,
        });
    }
    let (input, layers) = read_spec(r)?;
    let seed = r
        .read_u64::<LittleEndian>()
        .map_err(|e| truncated(e, "seed"))?;
    let mut net = Network::new(input, layers, seed)?;
    let count = read_u32(r, "parameter count")?;
    if count != net.params().len() {
        return Err(Error::SpecMismatch);
    }
    for i in 0..count {
        let layer = read_u32(r, "parameter key")?;
        let role = r.read_u8().map_err(|e| truncated(e, "parameter role"))?;
        let key = net.param_keys()[i];
        if key.layer != layer || role_code(key.role) != role {
            return Err(Error::SpecMismatch);
        }
        let ndim = read_u32(r, "parameter rank")?;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(read_u32(r, "parameter shape")?);
        }
        let p = &mut net.params_mut()[i];
        if shape != p.shape {
            return Err(Error::SpecMismatch);
        }
        for v in p.values.iter_mut() {
            *v = r
                .read_f64::<LittleEndian>()
                .map_err(|e| truncated(e, "parameter values"))?;
        }
    }
    Ok(net)
}

/// Loads weights into an existing network after checking the stored
/// specification is identical to `net`'s.
pub fn load_into<R: Read>(net: &mut Network, r: &mut R) -> Result<()> {
    let loaded = read_network(r)?;
    if loaded.input_shape() != net.input_shape() || loaded.layers() != net.layers() {
        return Err(Error::SpecMismatch);
    }
    for (dst, src) in net.params_mut().iter_mut().zip(loaded.params()) {
        dst.values.copy_from_slice(&src.values);
    }
    Ok(())
}
