//! Parameter checkpoint file.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "S2SW"
//! version u16      currently 1
//! meta    u32 length + JSON (architecture, phase provenance, counters)
//! count   u32      number of named tensors
//! tensor  repeated: name (u16 length + UTF-8), ndim u8, dims u32 each,
//!                   payload f32 little-endian
//! ```
//!
//! Weights and biases are stored per layer ("enc0.conv0.weight", ...); when
//! the checkpoint carries optimizer state for resuming, the Adam moments are
//! stored under "adam.m." / "adam.v." prefixes.

use super::adam::AdamState;
use super::net::{NetworkConfig, NetworkParams};
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"S2SW";
pub const VERSION: u16 = 1;

/// Training phases of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        }
    }

    pub fn parse(s: &str) -> Result<Phase> {
        match s {
            "A" | "a" => Ok(Phase::A),
            "B" | "b" => Ok(Phase::B),
            "C" | "c" => Ok(Phase::C),
            other => Err(Error::Config(format!(
                "unknown phase '{other}' (expected A, B or C)"
            ))),
        }
    }
}

/// One link of the training provenance chain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProvenanceEntry {
    pub phase: Phase,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CheckpointMeta {
    pub network: NetworkConfig,
    pub phase: Phase,
    /// 1-based epoch after which this checkpoint was written; 0 = untrained.
    pub epoch: usize,
    pub adam_step: u64,
    pub base_lr: f64,
    pub seed: u64,
    pub loss: String,
    /// Chain of phases that produced these weights, oldest first.
    pub provenance: Vec<ProvenanceEntry>,
    /// Free-form markers such as "no-compensation".
    pub flags: Vec<String>,
}

fn write_tensor(out: &mut Vec<u8>, name: &str, dims: &[u32], data: &[f64]) {
    let name_bytes = name.as_bytes();
    out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
    out.extend_from_slice(name_bytes);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Serialize a checkpoint to bytes. Passing `adam` embeds the optimizer
/// moments so training can resume exactly.
pub fn to_bytes(
    params: &NetworkParams,
    adam: Option<&AdamState>,
    meta: &CheckpointMeta,
) -> Result<Vec<u8>> {
    let meta_json = serde_json::to_vec(meta)
        .map_err(|e| Error::InvalidArgument(format!("checkpoint meta serialization: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);

    let names = params.layer_names();
    let mut count = 2 * names.len() as u32;
    if adam.is_some() {
        count += 4 * names.len() as u32;
    }
    out.extend_from_slice(&count.to_le_bytes());
    for (i, conv) in params.convs.iter().enumerate() {
        let wdims = [
            conv.out_c as u32,
            conv.in_c as u32,
            conv.k as u32,
            conv.k as u32,
        ];
        write_tensor(&mut out, &format!("{}.weight", names[i]), &wdims, &conv.weight);
        write_tensor(
            &mut out,
            &format!("{}.bias", names[i]),
            &[conv.out_c as u32],
            &conv.bias,
        );
    }
    if let Some(state) = adam {
        for (i, name) in names.iter().enumerate() {
            let conv = &params.convs[i];
            let wdims = [
                conv.out_c as u32,
                conv.in_c as u32,
                conv.k as u32,
                conv.k as u32,
            ];
            write_tensor(&mut out, &format!("adam.m.{name}.weight"), &wdims, &state.m_weight[i]);
            write_tensor(&mut out, &format!("adam.v.{name}.weight"), &wdims, &state.v_weight[i]);
            write_tensor(
                &mut out,
                &format!("adam.m.{name}.bias"),
                &[conv.out_c as u32],
                &state.m_bias[i],
            );
            write_tensor(
                &mut out,
                &format!("adam.v.{name}.bias"),
                &[conv.out_c as u32],
                &state.v_bias[i],
            );
        }
    }
    Ok(out)
}

pub fn save(
    path: &Path,
    params: &NetworkParams,
    adam: Option<&AdamState>,
    meta: &CheckpointMeta,
) -> Result<()> {
    let bytes = to_bytes(params, adam, meta)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                reason: "truncated checkpoint".to_string(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

struct NamedTensor {
    name: String,
    dims: Vec<u32>,
    data: Vec<f64>,
}

/// Parse a checkpoint. Returns the parameters, optimizer state when stored,
/// and the metadata block.
pub fn from_bytes(
    buf: &[u8],
    path: &Path,
) -> Result<(NetworkParams, Option<AdamState>, CheckpointMeta)> {
    let mut r = Reader { buf, pos: 0, path };
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if r.take(4)? != MAGIC {
        return Err(bad("bad magic, not a checkpoint file"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let meta_len = r.u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| bad(&format!("invalid metadata: {e}")))?;
    meta.network.validate()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| bad("tensor name is not UTF-8"))?;
        let ndim = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        let mut numel = 1usize;
        for _ in 0..ndim {
            let d = r.u32()?;
            numel = numel
                .checked_mul(d as usize)
                .ok_or_else(|| bad("tensor dims overflow"))?;
            dims.push(d);
        }
        let raw = r.take(numel * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        tensors.push(NamedTensor { name, dims, data });
    }
    if r.pos != buf.len() {
        return Err(bad("trailing bytes after the tensor table"));
    }

    let mut params = NetworkParams::zeros(&meta.network)?;
    let names = params.layer_names();
    let find = |name: &str| tensors.iter().find(|t| t.name == name);
    for (i, lname) in names.iter().enumerate() {
        let conv = &mut params.convs[i];
        let w = find(&format!("{lname}.weight"))
            .ok_or_else(|| bad(&format!("missing tensor {lname}.weight")))?;
        let expect = [
            conv.out_c as u32,
            conv.in_c as u32,
            conv.k as u32,
            conv.k as u32,
        ];
        if w.dims != expect {
            return Err(bad(&format!(
                "tensor {lname}.weight has dims {:?}, expected {:?}",
                w.dims, expect
            )));
        }
        conv.weight.copy_from_slice(&w.data);
        let b = find(&format!("{lname}.bias"))
            .ok_or_else(|| bad(&format!("missing tensor {lname}.bias")))?;
        if b.data.len() != conv.bias.len() {
            return Err(bad(&format!("tensor {lname}.bias has wrong size")));
        }
        conv.bias.copy_from_slice(&b.data);
    }

    let has_adam = tensors.iter().any(|t| t.name.starts_with("adam."));
    let adam = if has_adam {
        let mut state = AdamState::new(&params, meta.base_lr);
        state.step = meta.adam_step;
        for (i, lname) in names.iter().enumerate() {
            for (kind, wdst, bdst) in [
                ("m", &mut state.m_weight[i], &mut state.m_bias[i]),
                ("v", &mut state.v_weight[i], &mut state.v_bias[i]),
            ] {
                let w = find(&format!("adam.{kind}.{lname}.weight"))
                    .ok_or_else(|| bad(&format!("missing adam.{kind}.{lname}.weight")))?;
                if w.data.len() != wdst.len() {
                    return Err(bad("optimizer tensor size mismatch"));
                }
                wdst.copy_from_slice(&w.data);
                let b = find(&format!("adam.{kind}.{lname}.bias"))
                    .ok_or_else(|| bad(&format!("missing adam.{kind}.{lname}.bias")))?;
                if b.data.len() != bdst.len() {
                    return Err(bad("optimizer tensor size mismatch"));
                }
                bdst.copy_from_slice(&b.data);
            }
        }
        Some(state)
    } else {
        None
    };
    Ok((params, adam, meta))
}

pub fn load(path: &Path) -> Result<(NetworkParams, Option<AdamState>, CheckpointMeta)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    from_bytes(&buf, path)
}
