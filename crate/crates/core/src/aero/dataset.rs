//! Parameter sweeps and the binary dataset container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic     8 bytes  "HQTNAERO"
//! version   u32
//! hdr_len   u64
//! header    hdr_len bytes of JSON (DatasetHeader)
//! count     u64
//! records   count × { a, mu, u_inf: f64; label: u8; flags: u8;
//!                     max_re_eig: f64; series: 3 × n_samples f64, row-major }
//! ```
//!
//! `flags` bit 0 marks a clamped (overflowing) response.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{simulate_sample, AeroSample, Label, StructuralConstants, SweepParams};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecMode};

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"HQTNAERO";
const FLAG_CLAMPED: u8 = 1;

/// Uniformly spaced values `min..=max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.min + step * i as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: Axis,
    pub mu: Axis,
    pub u_inf: Axis,
}

impl Default for GridSpec {
    /// 9 × 5 × 201 points. The airspeed window sits around the surrogate's
    /// flutter boundary so both classes are well represented.
    fn default() -> Self {
        Self {
            a: Axis::new(-0.4, 0.4, 9),
            mu: Axis::new(10.0, 50.0, 5),
            u_inf: Axis::new(10.0, 210.0, 201),
        }
    }
}

impl GridSpec {
    /// Reduced 9 × 5 × 51 grid over the same window.
    pub fn reduced() -> Self {
        Self {
            u_inf: Axis::new(10.0, 210.0, 51),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.a.count * self.mu.count * self.u_inf.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points with `a` outermost and `u_inf` innermost.
    pub fn points(&self) -> Vec<SweepParams> {
        let mut out = Vec::with_capacity(self.len());
        for a in self.a.values() {
            for mu in self.mu.values() {
                for u_inf in self.u_inf.values() {
                    out.push(SweepParams { a, mu, u_inf });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub grid: GridSpec,
    pub consts: StructuralConstants,
    pub t_final: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Reserved for dataset-level normalisation statistics.
    pub normalization: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<AeroSample>,
}

/// Simulates every grid point. The sweep is deterministic; `seed` is only
/// recorded so downstream splits can reuse it.
pub fn generate_dataset(
    grid: &GridSpec,
    consts: &StructuralConstants,
    t_final: f64,
    n_samples: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<Dataset> {
    if grid.is_empty() {
        return Err(Error::Config("parameter grid is empty".into()));
    }
    consts.validate()?;
    let points = grid.points();
    let samples = map_indexed(mode, points.len(), |i| {
        simulate_sample(consts, points[i], t_final, n_samples)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            format_version: DATASET_VERSION,
            grid: *grid,
            consts: *consts,
            t_final,
            n_samples,
            seed,
            normalization: None,
        },
        samples,
    })
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&ds.header)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(ds.samples.len() as u64).to_le_bytes())?;
    for s in &ds.samples {
        if s.series.iter().any(|r| r.len() != ds.header.n_samples) {
            return Err(Error::Shape("series length differs from header".into()));
        }
        let mut rec = Vec::with_capacity(8 * (4 + 3 * ds.header.n_samples) + 2);
        for v in [s.params.a, s.params.mu, s.params.u_inf] {
            rec.extend_from_slice(&v.to_le_bytes());
        }
        rec.push(s.label as u8);
        rec.push(if s.clamped { FLAG_CLAMPED } else { 0 });
        rec.extend_from_slice(&s.max_re_eig.to_le_bytes());
        for row in &s.series {
            for v in row {
                rec.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("dataset file is truncated".into()))?;
    Ok(buf)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<_, 8>(r)?))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_exact::<_, 8>(&mut r)? != MAGIC {
        return Err(Error::Format(format!(
            "{} is not a dataset file",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset version {version}"
        )));
    }
    let hdr_len = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut hdr = vec![0u8; hdr_len];
    r.read_exact(&mut hdr)
        .map_err(|_| Error::Format("dataset header is truncated".into()))?;
    let header: DatasetHeader = serde_json::from_slice(&hdr)?;
    let count = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let n = header.n_samples;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let params = SweepParams {
            a: read_f64(&mut r)?,
            mu: read_f64(&mut r)?,
            u_inf: read_f64(&mut r)?,
        };
        let [label, flags] = read_exact::<_, 2>(&mut r)?;
        let max_re_eig = read_f64(&mut r)?;
        let mut series: [Vec<f64>; 3] = Default::default();
        for row in series.iter_mut() {
            *row = (0..n).map(|_| read_f64(&mut r)).collect::<Result<_>>()?;
        }
        samples.push(AeroSample {
            params,
            series,
            label: Label::from_u8(label)?,
            max_re_eig,
            clamped: flags & FLAG_CLAMPED != 0,
        });
    }
    Ok(Dataset { header, samples })
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    a: f64,
    mu: f64,
    u_inf: f64,
    label: Label,
    max_re_eig: f64,
    clamped: bool,
    series: &'a [Vec<f64>; 3],
}

/// Human-readable export: the header on the first line, then one sample per
/// line.
pub fn export_jsonl<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, &ds.header)?;
    writeln!(w)?;
    for s in &ds.samples {
        serde_json::to_writer(
            &mut w,
            &JsonRecord {
                a: s.params.a,
                mu: s.params.mu,
                u_inf: s.params.u_inf,
                label: s.label,
                max_re_eig: s.max_re_eig,
                clamped: s.clamped,
                series: &s.series,
            },
        )?;
        writeln!(w)?;
    }
    Ok(())
}
