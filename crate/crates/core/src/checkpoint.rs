//! Versioned binary checkpoints.
//!
//! Layout (little endian): magic `BQCK`, `u32` version, `u8` form tag,
//! `u64` length + UTF-8 JSON of the [`SimConfig`], `u64` sample index, `f64` time,
//! `u32` component count, then per component `u64` length and `(re, im)` pairs,
//! and finally `u64` length + UTF-8 JSON of the records emitted so far.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::boussinesq::SimConfig;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::spectral_core::{StateField, WaveGrid};

const MAGIC: &[u8; 4] = b"BQCK";
pub const FORMAT_VERSION: u32 = 1;

/// Which equation set the stored coefficients belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormTag {
    Boussinesq = 0,
    Pv = 1,
    Projected = 2,
}

impl FormTag {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(FormTag::Boussinesq),
            1 => Ok(FormTag::Pv),
            2 => Ok(FormTag::Projected),
            _ => Err(Error::Config(format!("unknown checkpoint form tag {v}"))),
        }
    }
}

/// Contents of one checkpoint file.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub form: FormTag,
    pub config: SimConfig,
    pub sample_index: usize,
    pub time: f64,
    pub comps: Vec<Vec<Complex64>>,
    pub records: Vec<DiagnosticsRecord>,
}

impl Checkpoint {
    pub fn from_state(config: &SimConfig, sample_index: usize, time: f64, state: &StateField, records: &[DiagnosticsRecord]) -> Self {
        Checkpoint {
            form: FormTag::Boussinesq,
            config: config.clone(),
            sample_index,
            time,
            comps: state.comps.to_vec(),
            records: records.to_vec(),
        }
    }

    pub fn state(&self, grid: &Arc<WaveGrid>) -> Result<StateField> {
        if self.comps.len() != 4 {
            return Err(Error::Config(format!("checkpoint has {} components, expected 4", self.comps.len())));
        }
        let c = &self.comps;
        StateField::from_comps(grid, [c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone()])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.form as u8);
        let cfg = serde_json::to_vec(&self.config)?;
        out.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
        out.extend_from_slice(&cfg);
        out.extend_from_slice(&(self.sample_index as u64).to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&(self.comps.len() as u32).to_le_bytes());
        for comp in &self.comps {
            out.extend_from_slice(&(comp.len() as u64).to_le_bytes());
            for z in comp {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        let rec = serde_json::to_vec(&self.records)?;
        out.extend_from_slice(&(rec.len() as u64).to_le_bytes());
        out.extend_from_slice(&rec);
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 4];
        bytes.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config("not a checkpoint file".into()));
        }
        let version = read_u32(&mut bytes)?;
        if version != FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {version}")));
        }
        let mut tag = [0u8; 1];
        bytes.read_exact(&mut tag)?;
        let form = FormTag::from_u8(tag[0])?;
        let cfg_len = read_u64(&mut bytes)? as usize;
        let config: SimConfig = serde_json::from_slice(take(&mut bytes, cfg_len)?)?;
        let sample_index = read_u64(&mut bytes)? as usize;
        let time = f64::from_le_bytes(read_array(&mut bytes)?);
        let ncomp = read_u32(&mut bytes)? as usize;
        let mut comps = Vec::with_capacity(ncomp);
        for _ in 0..ncomp {
            let len = read_u64(&mut bytes)? as usize;
            let mut comp = Vec::with_capacity(len);
            for _ in 0..len {
                let re = f64::from_le_bytes(read_array(&mut bytes)?);
                let im = f64::from_le_bytes(read_array(&mut bytes)?);
                comp.push(Complex64::new(re, im));
            }
            comps.push(comp);
        }
        let rec_len = read_u64(&mut bytes)? as usize;
        let records = serde_json::from_slice(take(&mut bytes, rec_len)?)?;
        Ok(Checkpoint {
            form,
            config,
            sample_index,
            time,
            comps,
            records,
        })
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes()?)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Config("truncated checkpoint".into()));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn read_array<const N: usize>(bytes: &mut &[u8]) -> Result<[u8; N]> {
    let mut a = [0u8; N];
    bytes.read_exact(&mut a)?;
    Ok(a)
}

fn read_u32(bytes: &mut &[u8]) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(bytes)?))
}

fn read_u64(bytes: &mut &[u8]) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(bytes)?))
}
