//! Self-describing weight files.
//!
//! ```text
//! "AEGW" | u16 version | u32 config length | config JSON
//! u32 tensor count
//! per tensor: u16 name length | name | u8 rank | u32 dims[rank] | f64 values
//! u32 CRC32 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian. Tensors appear in layer order,
//! then skip projections, then the head.

use std::path::Path;

use super::{ArchitectureConfig, LayerConfig, LayerParams, Model};
use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Linear, SplineKernel};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"AEGW";
pub const WEIGHTS_VERSION: u16 = 1;

struct Tensor {
    name: String,
    dims: Vec<u32>,
    values: Vec<f64>,
}

fn tensor(name: String, dims: &[usize], values: &[f64]) -> Tensor {
    Tensor { name, dims: dims.iter().map(|&d| d as u32).collect(), values: values.to_vec() }
}

/// Tensor names and shapes implied by a config, in file order.
fn expected_shapes(config: &ArchitectureConfig) -> Result<Vec<(String, Vec<usize>)>> {
    let widths = config.activation_widths()?;
    let names = config.layer_names();
    let mut out = Vec::new();
    for (cfg, name) in config.layers.iter().zip(&names) {
        match *cfg {
            LayerConfig::SplineConv { m_in, m_out, kernel_size, .. } => {
                out.push((format!("{name}.weight"), vec![kernel_size.pow(3), m_in, m_out]));
            }
            LayerConfig::BatchNorm { width } => {
                for stat in ["mean", "var", "scale", "shift"] {
                    out.push((format!("{name}.{stat}"), vec![width]));
                }
            }
            LayerConfig::Linear { m_in, m_out, bias } => {
                out.push((format!("{name}.weight"), vec![m_out, m_in]));
                if bias {
                    out.push((format!("{name}.bias"), vec![m_out]));
                }
            }
            LayerConfig::Elu | LayerConfig::MaxPool { .. } => {}
        }
    }
    for (s, skip) in config.skips.iter().enumerate() {
        if skip.projection {
            out.push((format!("skip{}.weight", s + 1), vec![widths[skip.sink], widths[skip.source]]));
        }
    }
    let last = *widths.last().expect("non-empty");
    out.push(("head.weight".into(), vec![config.classes, last]));
    out.push(("head.bias".into(), vec![config.classes]));
    Ok(out)
}

fn model_tensors(m: &Model) -> Vec<Tensor> {
    let names = m.config().layer_names();
    let mut out = Vec::new();
    for (p, name) in m.layers().iter().zip(&names) {
        match p {
            LayerParams::SplineConv(k) => {
                out.push(tensor(format!("{name}.weight"), &[k.num_points(), k.m_in(), k.m_out()], k.weights()))
            }
            LayerParams::BatchNorm(bn) => {
                for (stat, v) in [("mean", &bn.mean), ("var", &bn.var), ("scale", &bn.scale), ("shift", &bn.shift)] {
                    out.push(tensor(format!("{name}.{stat}"), &[v.len()], v));
                }
            }
            LayerParams::Linear(lin) => {
                out.push(tensor(format!("{name}.weight"), &[lin.m_out, lin.m_in], &lin.weight));
                if let Some(b) = &lin.bias {
                    out.push(tensor(format!("{name}.bias"), &[b.len()], b));
                }
            }
            LayerParams::Elu | LayerParams::MaxPool(_) => {}
        }
    }
    for (s, p) in m.projections().iter().enumerate() {
        if let Some(lin) = p {
            out.push(tensor(format!("skip{}.weight", s + 1), &[lin.m_out, lin.m_in], &lin.weight));
        }
    }
    let head = m.head();
    out.push(tensor("head.weight".into(), &[head.m_out, head.m_in], &head.weight));
    out.push(tensor("head.bias".into(), &[head.m_out], head.bias.as_deref().unwrap_or(&[])));
    out
}

pub fn write_weights(m: &Model) -> Vec<u8> {
    let config = serde_json::to_vec(m.config()).expect("config serializes");
    let tensors = model_tensors(m);
    let mut buf = Vec::new();
    buf.extend_from_slice(WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        buf.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(t.name.as_bytes());
        buf.push(t.dims.len() as u8);
        for d in &t.dims {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        for v in &t.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn save_weights(m: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, write_weights(m))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Load(format!("truncated file while reading {what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Parses a weight file image. Shape mismatches against the embedded config
/// are reported as [`Error::Shape`] naming the tensor; any other corruption is
/// an [`Error::Load`].
pub fn read_weights(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(Error::Load("not a weight file (bad magic)".into()));
    }
    let version = r.u16("version")?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Load(format!("unsupported version {version}, expected {WEIGHTS_VERSION}")));
    }
    let len = r.u32("config length")? as usize;
    let config: ArchitectureConfig = serde_json::from_slice(r.take(len, "config")?)
        .map_err(|e| Error::Load(format!("embedded config is invalid: {e}")))?;
    config.validate().map_err(|e| Error::Load(format!("embedded config is invalid: {e}")))?;
    let expected = expected_shapes(&config)?;
    let count = r.u32("tensor count")? as usize;
    if count != expected.len() {
        return Err(Error::Load(format!("file holds {count} tensors, config implies {}", expected.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for (want_name, want_dims) in &expected {
        let name_len = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| Error::Load("tensor name is not UTF-8".into()))?
            .to_string();
        if &name != want_name {
            return Err(Error::Load(format!("expected tensor {want_name}, found {name}")));
        }
        let rank = r.u8("tensor rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("tensor dims")? as usize);
        }
        if &dims != want_dims {
            return Err(Error::Shape(format!("tensor {name} has shape {dims:?}, config expects {want_dims:?}")));
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * 8, &format!("values of {name}"))?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Load(format!("tensor {name} holds non-finite values")));
        }
        tensors.push(values);
    }
    let body_end = r.pos;
    let stored = r.u32("checksum")?;
    if r.pos != bytes.len() {
        return Err(Error::Load(format!("{} trailing bytes after checksum", bytes.len() - r.pos)));
    }
    let actual = crc32fast::hash(&bytes[..body_end]);
    if stored != actual {
        return Err(Error::Load(format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}")));
    }
    assemble(config, tensors)
}

fn assemble(config: ArchitectureConfig, tensors: Vec<Vec<f64>>) -> Result<Model> {
    let widths = config.activation_widths()?;
    let mut it = tensors.into_iter();
    let mut next = || it.next().expect("tensor count checked");
    let mut layers = Vec::with_capacity(config.layers.len());
    for cfg in &config.layers {
        layers.push(match *cfg {
            LayerConfig::SplineConv { m_in, m_out, kernel_size, degree } => {
                LayerParams::SplineConv(SplineKernel::new(m_in, m_out, kernel_size, degree, next())?)
            }
            LayerConfig::Elu => LayerParams::Elu,
            LayerConfig::BatchNorm { .. } => {
                LayerParams::BatchNorm(BatchNorm { mean: next(), var: next(), scale: next(), shift: next() })
            }
            LayerConfig::MaxPool { voxels } => LayerParams::MaxPool(voxels),
            LayerConfig::Linear { m_in, m_out, bias } => {
                let w = next();
                LayerParams::Linear(Linear::new(m_in, m_out, w, if bias { Some(next()) } else { None })?)
            }
        });
    }
    let mut projections = Vec::with_capacity(config.skips.len());
    for s in &config.skips {
        projections.push(if s.projection {
            Some(Linear::new(widths[s.source], widths[s.sink], next(), None)?)
        } else {
            None
        });
    }
    let last = *widths.last().expect("non-empty");
    let head_w = next();
    let head = Linear::new(last, config.classes, head_w, Some(next()))?;
    Model::new(config, layers, projections, head)
}

pub fn load_weights(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path)?;
    read_weights(&bytes)
}
