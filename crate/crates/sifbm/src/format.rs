//! Ensemble files.
//!
//! CSV: a `sample` column, then one column per index labelled by its corner
//! coordinates separated by spaces (`empty` for the empty set).
//!
//! SIFB, little-endian throughout:
//!
//! ```text
//! b"SIFB"  u32 version  u32 flags (bit 0: hurst, bit 1: seed)
//! u32 dim  u32 n_indices  u64 n_samples  u64 seed  f64 hurst
//! per index: u8 (1 = empty), then dim f64 corner coordinates if not empty
//! n_samples × n_indices f64 values, row-major
//! ```

use std::io::{Read, Write};

use sifbm_core::flows::PathEnsemble;
use sifbm_core::gaussian::SampleEnsemble;
use sifbm_core::{HurstParam, Rect};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"SIFB";
pub const VERSION: u32 = 1;

const HAS_HURST: u32 = 1;
const HAS_SEED: u32 = 2;

pub fn index_label(r: &Rect) -> String {
    match r.corner() {
        None => "empty".into(),
        Some(c) => c.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
    }
}

pub fn parse_label(s: &str) -> CliResult<Rect> {
    if s == "empty" {
        return Ok(Rect::empty());
    }
    let c = s
        .split(' ')
        .map(|x| x.parse::<f64>().map_err(|e| CliError::format("ensemble header", format!("{s:?}: {e}"))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Rect::new(c)?)
}

pub fn write_ensemble_csv<W: Write>(e: &SampleEnsemble, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["sample".to_string()];
    header.extend(e.indices().iter().map(index_label));
    out.write_record(&header)?;
    for s in 0..e.n_samples() {
        let mut rec = vec![s.to_string()];
        rec.extend(e.row(s).iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a CSV ensemble; the file carries no Hurst value or seed.
pub fn read_ensemble_csv<R: Read>(r: R) -> CliResult<SampleEnsemble> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("sample") {
        return Err(CliError::format("ensemble csv", "first column must be `sample`"));
    }
    let indices = header.iter().skip(1).map(parse_label).collect::<CliResult<Vec<_>>>()?;
    let mut values = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for x in rec.iter().skip(1) {
            values.push(x.parse::<f64>().map_err(|e| CliError::format("ensemble csv", format!("row {n}: {e}")))?);
        }
        n += 1;
    }
    Ok(SampleEnsemble::new(indices, n, values, None, None)?)
}

pub fn write_sifb<W: Write>(e: &SampleEnsemble, mut w: W) -> CliResult<()> {
    let dim = e.indices().iter().find_map(Rect::dim).unwrap_or(0);
    let flags = e.hurst().map_or(0, |_| HAS_HURST) | e.seed().map_or(0, |_| HAS_SEED);
    let mut buf = Vec::with_capacity(48 + 8 * e.values().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    buf.extend_from_slice(&(e.n_indices() as u32).to_le_bytes());
    buf.extend_from_slice(&(e.n_samples() as u64).to_le_bytes());
    buf.extend_from_slice(&e.seed().unwrap_or(0).to_le_bytes());
    buf.extend_from_slice(&e.hurst().map_or(0.0, HurstParam::value).to_le_bytes());
    for r in e.indices() {
        match r.corner() {
            None => buf.push(1),
            Some(c) => {
                buf.push(0);
                c.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
            }
        }
    }
    e.values().iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> CliResult<[u8; N]> {
        if self.0.len() < N {
            return Err(CliError::format("sifb", "truncated"));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().unwrap())
    }

    fn u32(&mut self) -> CliResult<u32> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> CliResult<u64> {
        self.take().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> CliResult<f64> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn read_sifb<R: Read>(mut r: R) -> CliResult<SampleEnsemble> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor(&bytes);
    if &c.take::<4>()? != MAGIC {
        return Err(CliError::format("sifb", "bad magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(CliError::format("sifb", format!("unsupported version {version}")));
    }
    let flags = c.u32()?;
    let dim = c.u32()? as usize;
    let k = c.u32()? as usize;
    let n = usize::try_from(c.u64()?).map_err(|e| CliError::format("sifb", e))?;
    let seed = c.u64()?;
    let hurst = c.f64()?;
    let mut indices = Vec::with_capacity(k);
    for _ in 0..k {
        let [empty] = c.take::<1>()?;
        if empty == 1 {
            indices.push(Rect::empty());
        } else {
            let corner = (0..dim).map(|_| c.f64()).collect::<CliResult<Vec<_>>>()?;
            indices.push(Rect::new(corner)?);
        }
    }
    let expected = n.checked_mul(k).and_then(|x| x.checked_mul(8));
    if expected != Some(c.0.len()) {
        return Err(CliError::format("sifb", format!("{} value bytes for {n}×{k} samples", c.0.len())));
    }
    let values = c.0.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    let hurst = if flags & HAS_HURST != 0 { Some(HurstParam::new(hurst)?) } else { None };
    let seed = (flags & HAS_SEED != 0).then_some(seed);
    Ok(SampleEnsemble::new(indices, n, values, hurst, seed)?)
}

/// Paths along a flow: `sample` then one column per grid time `t`.
pub fn write_paths_csv<W: Write>(p: &PathEnsemble, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["sample".to_string()];
    header.extend(p.time_change().grid.iter().map(|t| format!("t={t}")));
    out.write_record(&header)?;
    for s in 0..p.n_samples() {
        let mut rec = vec![s.to_string()];
        rec.extend(p.path(s).iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_time_change_csv<W: Write>(p: &PathEnsemble, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "theta"])?;
    let tc = p.time_change();
    for (t, th) in tc.grid.iter().zip(&tc.values) {
        out.write_record([t.to_string(), th.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_profile_csv<W: Write>(profile: &sifbm_core::stats::VarianceProfile, w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["s", "t", "θ_s", "θ_t", "predicted", "observed", "stderr"])?;
    for p in &profile.entries {
        out.write_record(
            [p.s, p.t, p.theta_s, p.theta_t, p.predicted, p.observed, p.stderr].map(|x| x.to_string()),
        )?;
    }
    out.flush()?;
    Ok(())
}
