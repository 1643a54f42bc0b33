//! Checkpoints: one binary parameter archive per network plus a JSON
//! sidecar carrying the config, iteration and RNG lineage. Writes are
//! atomic (temp file + rename).

use crate::model::config::ModelConfig;
use crate::model::params::{Network, ParamStore};
use crate::trainer::adam::AdamGroups;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use stedit_tensor::rng::fnv1a;
use stedit_tensor::Tensor;

const PARAM_MAGIC: &[u8; 4] = b"SPAR";
const OPT_MAGIC: &[u8; 4] = b"SOPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub iteration: u64,
    pub seed: u64,
    pub rng_state_digest: String,
    pub model_config: ModelConfig,
    pub charset: String,
}

pub fn rng_digest(seed: u64, iteration: u64) -> String {
    format!(
        "{:016x}",
        fnv1a(format!("counter-rng:{seed}:{iteration}").as_bytes())
    )
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

fn push_tensor(buf: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::io::Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(std::io::Error::other("truncated archive"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> std::io::Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::io::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> std::io::Result<String> {
        let n = self.u32()? as usize;
        Ok(String::from_utf8_lossy(self.take(n)?).into_owned())
    }
    fn f32_vec(&mut self, n: usize) -> std::io::Result<Vec<f32>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn read_tensor(c: &mut Cursor) -> std::io::Result<(String, Tensor<f32>)> {
    let name = c.string()?;
    let ndim = c.u32()? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(c.u64()? as usize);
    }
    let n: usize = shape.iter().product();
    let data = c.f32_vec(n)?;
    Ok((name, Tensor::new(shape, data)))
}

/// Save parameters (per-network archives), optional optimizer state and the
/// sidecar under `dir`.
pub fn save(
    dir: &Path,
    store: &ParamStore<f32>,
    opt: Option<&AdamGroups>,
    meta: &CheckpointMeta,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for net in Network::ALL {
        let mut buf = Vec::new();
        buf.extend_from_slice(PARAM_MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let entries: Vec<usize> = store
            .defs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.net == net)
            .map(|(i, _)| i)
            .collect();
        buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for i in entries {
            push_tensor(&mut buf, &store.defs[i].name, &store.values[i]);
        }
        write_atomic(&dir.join(net.archive_name()), &buf)?;
    }
    if let Some(groups) = opt {
        let mut buf = Vec::new();
        buf.extend_from_slice(OPT_MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&groups.step_egr.to_le_bytes());
        buf.extend_from_slice(&groups.step_d.to_le_bytes());
        buf.extend_from_slice(&(groups.states.len() as u32).to_le_bytes());
        for (name, st) in &groups.states {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(st.m.len() as u64).to_le_bytes());
            for &v in &st.m {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &st.v {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        write_atomic(&dir.join("opt.bin"), &buf)?;
    }
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    write_atomic(&dir.join("meta.json"), json.as_bytes())
}

/// Load parameters into an existing store (shapes/names must match its
/// registry). Returns optimizer state when present.
pub fn load(
    dir: &Path,
    store: &mut ParamStore<f32>,
) -> std::io::Result<(CheckpointMeta, Option<AdamGroups>)> {
    let meta: CheckpointMeta =
        serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)
            .map_err(std::io::Error::other)?;
    for net in Network::ALL {
        let mut raw = Vec::new();
        std::fs::File::open(dir.join(net.archive_name()))?.read_to_end(&mut raw)?;
        let mut c = Cursor {
            data: &raw,
            pos: 0,
        };
        if c.take(4)? != PARAM_MAGIC {
            return Err(std::io::Error::other("bad parameter archive magic"));
        }
        if c.u32()? != VERSION {
            return Err(std::io::Error::other("unsupported archive version"));
        }
        let n = c.u32()? as usize;
        for _ in 0..n {
            let (name, tensor) = read_tensor(&mut c)?;
            let idx = store.idx(&name);
            if store.values[idx].shape() != tensor.shape() {
                return Err(std::io::Error::other(format!(
                    "shape mismatch for {name} in checkpoint"
                )));
            }
            store.values[idx] = tensor;
        }
    }
    let opt_path = dir.join("opt.bin");
    let opt = if opt_path.exists() {
        let mut raw = Vec::new();
        std::fs::File::open(opt_path)?.read_to_end(&mut raw)?;
        let mut c = Cursor {
            data: &raw,
            pos: 0,
        };
        if c.take(4)? != OPT_MAGIC {
            return Err(std::io::Error::other("bad optimizer archive magic"));
        }
        if c.u32()? != VERSION {
            return Err(std::io::Error::other("unsupported archive version"));
        }
        let step_egr = c.u64()?;
        let step_d = c.u64()?;
        let n = c.u32()? as usize;
        let mut states = std::collections::BTreeMap::new();
        for _ in 0..n {
            let name = c.string()?;
            let len = c.u64()? as usize;
            let m = c.f32_vec(len)?;
            let v = c.f32_vec(len)?;
            states.insert(name, crate::trainer::adam::AdamState { m, v });
        }
        Some(AdamGroups {
            step_egr,
            step_d,
            states,
        })
    } else {
        None
    };
    Ok((meta, opt))
}
