//! Window-pair store: a flat binary sample file plus a CSV manifest.
//!
//! `windows.bin` starts with the 8-byte magic `PRTWIN01` and then holds raw
//! little-endian `f64` samples. `manifest.csv` has one row per pair:
//!
//! ```text
//! subject_id,window_index,start_time_s,rate_hz,len,ppg_offset,resp_offset
//! ```
//!
//! Offsets are byte positions of the first sample of each window in
//! `windows.bin`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Window, WindowPair};

pub const MAGIC: &[u8; 8] = b"PRTWIN01";
pub const BIN_NAME: &str = "windows.bin";
pub const MANIFEST_NAME: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub subject_id: String,
    pub window_index: usize,
    pub start_time_s: f64,
    pub rate_hz: f64,
    pub len: usize,
    pub ppg_offset: u64,
    pub resp_offset: u64,
}

pub fn write(dir: &Path, pairs: &[WindowPair]) -> Result<Vec<ManifestRow>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin_path = dir.join(BIN_NAME);
    let mut bin = Vec::with_capacity(8 + pairs.len() * 2 * 900 * 8);
    bin.extend_from_slice(MAGIC);
    let mut rows = Vec::with_capacity(pairs.len());
    for p in pairs {
        let mut put = |w: &Window| {
            let off = bin.len() as u64;
            for v in &w.samples {
                bin.extend_from_slice(&v.to_le_bytes());
            }
            off
        };
        let ppg_offset = put(&p.ppg);
        let resp_offset = put(&p.resp);
        rows.push(ManifestRow {
            subject_id: p.ppg.subject_id.clone(),
            window_index: p.ppg.window_index,
            start_time_s: p.ppg.start_time_s,
            rate_hz: p.ppg.sampling_rate_hz,
            len: p.ppg.samples.len(),
            ppg_offset,
            resp_offset,
        });
    }
    let mut f = std::fs::File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    f.write_all(&bin).map_err(|e| Error::io(&bin_path, e))?;

    let man_path = dir.join(MANIFEST_NAME);
    let mut w = csv::Writer::from_path(&man_path)
        .map_err(|e| Error::io(&man_path, std::io::Error::other(e)))?;
    for r in &rows {
        w.serialize(r)
            .map_err(|e| Error::io(&man_path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(&man_path, e))?;
    Ok(rows)
}

pub fn read(dir: &Path) -> Result<Vec<WindowPair>> {
    let bin_path = dir.join(BIN_NAME);
    let man_path = dir.join(MANIFEST_NAME);
    let mut bin = Vec::new();
    std::fs::File::open(&bin_path)
        .and_then(|mut f| f.read_to_end(&mut bin))
        .map_err(|e| Error::io(&bin_path, e))?;
    let fmt = |file: &Path, reason: String| Error::Format {
        file: file.to_path_buf(),
        reason,
    };
    if bin.len() < 8 || &bin[..8] != MAGIC {
        return Err(fmt(&bin_path, "bad magic".into()));
    }
    let mut rdr = csv::Reader::from_path(&man_path).map_err(|e| fmt(&man_path, e.to_string()))?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: ManifestRow = row.map_err(|e| fmt(&man_path, e.to_string()))?;
        let take = |off: u64| -> Result<Vec<f64>> {
            let start = off as usize;
            let end = start + row.len * 8;
            if end > bin.len() {
                return Err(fmt(&bin_path, format!("window past end of file at {off}")));
            }
            Ok(bin[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let win = |samples| Window {
            subject_id: row.subject_id.clone(),
            window_index: row.window_index,
            start_time_s: row.start_time_s,
            sampling_rate_hz: row.rate_hz,
            samples,
        };
        out.push(WindowPair {
            ppg: win(take(row.ppg_offset)?),
            resp: win(take(row.resp_offset)?),
        });
    }
    Ok(out)
}
