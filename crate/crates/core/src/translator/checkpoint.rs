//! Binary checkpoint container.
//!
//! Layout: 8-byte magic `PRTCKPT\0`, `u32` LE format version, `u64` LE
//! length of a JSON header, the header, then every section listed in the
//! header as little-endian `f64` values in order. Architectures are rebuilt
//! from the embedded config, so the header fully describes the file.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::TranslatorConfig;
use super::optim::Adam;
use super::train::TranslatorBundle;

pub const MAGIC: &[u8; 8] = b"PRTCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Section {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamMeta {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    epoch: usize,
    seed: u64,
    config: TranslatorConfig,
    optimizers: Vec<AdamMeta>,
    sections: Vec<Section>,
}

const NETS: [&str; 4] = ["g", "f", "dx", "dy"];

fn adams(b: &TranslatorBundle) -> [&Adam; 4] {
    let o = &b.optimizer_state;
    [&o.g, &o.f, &o.dx, &o.dy]
}

fn sections(b: &TranslatorBundle) -> Vec<(String, &[f64])> {
    let params = [
        &b.g.net.params,
        &b.f.net.params,
        &b.dx.net.params,
        &b.dy.net.params,
    ];
    let mut out: Vec<(String, &[f64])> = NETS
        .iter()
        .zip(params)
        .map(|(n, p)| (format!("{n}.params"), p.as_slice()))
        .collect();
    for (n, a) in NETS.iter().zip(adams(b)) {
        out.push((format!("{n}.adam_m"), &a.m));
        out.push((format!("{n}.adam_v"), &a.v));
    }
    out
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        file: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn save(path: &Path, bundle: &TranslatorBundle) -> Result<()> {
    let secs = sections(bundle);
    let header = Header {
        epoch: bundle.epoch,
        seed: bundle.config.seed,
        config: bundle.config.clone(),
        optimizers: adams(bundle)
            .iter()
            .map(|a| AdamMeta {
                beta1: a.beta1,
                beta2: a.beta2,
                eps: a.eps,
                step: a.step,
            })
            .collect(),
        sections: secs
            .iter()
            .map(|(n, d)| Section {
                name: n.clone(),
                len: d.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| format_err(path, e.to_string()))?;
    let total: usize = secs.iter().map(|(_, d)| d.len()).sum();
    let mut buf = Vec::with_capacity(20 + json.len() + 8 * total);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, d) in &secs {
        for v in *d {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<TranslatorBundle> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(format_err(path, "not a translator checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(format_err(
            path,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = bytes
        .get(20..20 + hlen)
        .ok_or_else(|| format_err(path, "truncated header"))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| format_err(path, e.to_string()))?;

    let mut bundle = TranslatorBundle::init(&header.config)?;
    bundle.epoch = header.epoch;
    let expected: Vec<(String, usize)> = sections(&bundle)
        .into_iter()
        .map(|(n, d)| (n, d.len()))
        .collect();
    let found: Vec<(String, usize)> = header
        .sections
        .iter()
        .map(|s| (s.name.clone(), s.len))
        .collect();
    if expected != found {
        return Err(format_err(
            path,
            "section layout does not match the embedded config",
        ));
    }
    let total: usize = found.iter().map(|(_, l)| l).sum();
    let data = &bytes[20 + hlen..];
    if data.len() != 8 * total {
        return Err(format_err(
            path,
            format!("expected {} data bytes, found {}", 8 * total, data.len()),
        ));
    }
    let mut values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut fill = |dst: &mut Vec<f64>| {
        for d in dst.iter_mut() {
            *d = values.next().unwrap();
        }
    };
    fill(&mut bundle.g.net.params);
    fill(&mut bundle.f.net.params);
    fill(&mut bundle.dx.net.params);
    fill(&mut bundle.dy.net.params);
    let o = &mut bundle.optimizer_state;
    for (a, meta) in [&mut o.g, &mut o.f, &mut o.dx, &mut o.dy]
        .into_iter()
        .zip(&header.optimizers)
    {
        fill(&mut a.m);
        fill(&mut a.v);
        a.beta1 = meta.beta1;
        a.beta2 = meta.beta2;
        a.eps = meta.eps;
        a.step = meta.step;
    }
    Ok(bundle)
}
