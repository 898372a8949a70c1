//! File formats.
//!
//! Path batches are stored as CSV or as a compact binary file. The binary
//! layout (all integers and floats little-endian) is
//!
//! ```text
//! offset  size        field
//! 0       4           magic "FPB1"
//! 4       8           u64 n_paths
//! 12      8           u64 n_points
//! 20      8           u64 seed
//! 28      4           u32 descriptor length d
//! 32      d           descriptor, UTF-8 (e.g. "fbm(H=0.7)")
//! 32+d    8·n_points  grid times, f64
//! ...     8·n_paths·n_points  values, f64, row-major (path by path)
//! ```
//!
//! Networks use the `FPNN1` layout:
//!
//! ```text
//! 5 bytes  magic "FPNN1"
//! u32      number of affine layers L
//! u64×(L+1) layer widths λ₀ … λ_L
//! per layer: λ_l·λ_{l−1} f64 weights (row-major, out × in), then λ_l f64 biases
//! u8       flags: bit 0 truncation bound present, bit 1 normalization present
//! f64      truncation bound β (if bit 0)
//! normalization (if bit 1): λ₀ f64 input means, λ₀ f64 input scales,
//!          f64 output mean, f64 output scale
//! ```
//!
//! The CSV path format has `#`-prefixed comment lines (`# model: …`,
//! `# seed: …`), then a header whose fields are the grid times, then one row
//! per path. Floats are written in shortest round-trip form, so reading a
//! file back reproduces every value bit for bit.

use std::io::{Read, Write};

use fracpredict_core::nn::{Layer, LossTrace, MlpNetwork, Normalization};
use fracpredict_core::simulation::PathBatch;
use fracpredict_core::{Matrix, TimeGrid};

use crate::error::{Error, Result, Stage};

const PATHS_MAGIC: &[u8; 4] = b"FPB1";
const NETWORK_MAGIC: &[u8; 5] = b"FPNN1";

/// Path batch as stored on disk. The model is kept only as its descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredPaths {
    pub grid: TimeGrid,
    pub values: Matrix,
    pub seed: u64,
    pub descriptor: String,
}

impl From<&PathBatch> for StoredPaths {
    fn from(b: &PathBatch) -> Self {
        let descriptor = match b.output_map {
            Some(map) => format!("{} mapped by signed square (sigma={})", b.model, map.sigma),
            None => b.model.to_string(),
        };
        Self { grid: b.grid.clone(), values: b.values.clone(), seed: b.seed, descriptor }
    }
}

pub fn write_paths_csv<W: Write>(paths: &StoredPaths, mut w: W) -> Result<()> {
    writeln!(w, "# model: {}", paths.descriptor)?;
    writeln!(w, "# seed: {}", paths.seed)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(paths.grid.points().iter().map(f64::to_string))?;
    for i in 0..paths.values.rows() {
        out.write_record(paths.values.row(i).iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_paths_csv<R: Read>(mut r: R) -> Result<StoredPaths> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut descriptor = String::new();
    let mut seed = 0;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(d) = line.strip_prefix("# model:") {
            descriptor = d.strip_prefix(' ').unwrap_or(d).to_string();
        } else if let Some(s) = line.strip_prefix("# seed:") {
            seed = s.trim().parse().map_err(|_| Error::format("path CSV", format!("bad seed {s:?}")))?;
        }
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let grid = parse_floats(reader.headers()?.iter(), "path CSV header")?;
    let n_points = grid.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.len() != n_points {
            return Err(Error::format("path CSV", format!("row {rows} has {} fields, expected {n_points}", record.len())));
        }
        data.extend(parse_floats(record.iter(), "path CSV row")?);
        rows += 1;
    }
    Ok(StoredPaths {
        grid: TimeGrid::new(grid).stage("read grid")?,
        values: Matrix::from_row_major(rows, n_points, data).stage("read paths")?,
        seed,
        descriptor,
    })
}

fn parse_floats<'a>(fields: impl Iterator<Item = &'a str>, what: &'static str) -> Result<Vec<f64>> {
    fields
        .map(|f| f.trim().parse::<f64>().map_err(|_| Error::format(what, format!("not a number: {f:?}"))))
        .collect()
}

pub fn write_paths_binary<W: Write>(paths: &StoredPaths, mut w: W) -> Result<()> {
    let desc = paths.descriptor.as_bytes();
    let desc_len = u32::try_from(desc.len()).map_err(|_| Error::format("path batch", "descriptor too long"))?;
    w.write_all(PATHS_MAGIC)?;
    w.write_all(&(paths.values.rows() as u64).to_le_bytes())?;
    w.write_all(&(paths.grid.len() as u64).to_le_bytes())?;
    w.write_all(&paths.seed.to_le_bytes())?;
    w.write_all(&desc_len.to_le_bytes())?;
    w.write_all(desc)?;
    write_f64s(&mut w, paths.grid.points())?;
    write_f64s(&mut w, paths.values.as_slice())?;
    w.flush()?;
    Ok(())
}

pub fn read_paths_binary<R: Read>(mut r: R) -> Result<StoredPaths> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PATHS_MAGIC {
        return Err(Error::format("path batch", "bad magic"));
    }
    let n_paths = read_u64(&mut r)? as usize;
    let n_points = read_u64(&mut r)? as usize;
    let seed = read_u64(&mut r)?;
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut desc = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut desc)?;
    let descriptor = String::from_utf8(desc).map_err(|_| Error::format("path batch", "descriptor is not UTF-8"))?;
    let grid = read_f64s(&mut r, n_points)?;
    let values = read_f64s(&mut r, n_paths * n_points)?;
    Ok(StoredPaths {
        grid: TimeGrid::new(grid).stage("read grid")?,
        values: Matrix::from_row_major(n_paths, n_points, values).stage("read paths")?,
        seed,
        descriptor,
    })
}

pub fn write_network<W: Write>(net: &MlpNetwork, mut w: W) -> Result<()> {
    w.write_all(NETWORK_MAGIC)?;
    w.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for &width in net.widths() {
        w.write_all(&(width as u64).to_le_bytes())?;
    }
    for layer in net.layers() {
        write_f64s(&mut w, layer.weights.as_slice())?;
        write_f64s(&mut w, &layer.bias)?;
    }
    let flags = u8::from(net.truncation_beta.is_some()) | (u8::from(net.normalization.is_some()) << 1);
    w.write_all(&[flags])?;
    if let Some(beta) = net.truncation_beta {
        write_f64s(&mut w, &[beta])?;
    }
    if let Some(n) = &net.normalization {
        write_f64s(&mut w, &n.input_mean)?;
        write_f64s(&mut w, &n.input_scale)?;
        write_f64s(&mut w, &[n.output_mean, n.output_scale])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_network<R: Read>(mut r: R) -> Result<MlpNetwork> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != NETWORK_MAGIC {
        return Err(Error::format("network", "bad magic"));
    }
    let mut n = [0u8; 4];
    r.read_exact(&mut n)?;
    let n_layers = u32::from_le_bytes(n) as usize;
    if n_layers == 0 {
        return Err(Error::format("network", "no layers"));
    }
    let widths = (0..=n_layers).map(|_| read_u64(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let weights = Matrix::from_row_major(fan_out, fan_in, read_f64s(&mut r, fan_out * fan_in)?).stage("read network")?;
        layers.push(Layer { weights, bias: read_f64s(&mut r, fan_out)? });
    }
    let mut net = MlpNetwork::from_layers(layers).stage("read network")?;
    let mut flags = [0u8; 1];
    r.read_exact(&mut flags)?;
    if flags[0] & 1 != 0 {
        net.truncation_beta = Some(read_f64s(&mut r, 1)?[0]);
    }
    if flags[0] & 2 != 0 {
        let d = widths[0];
        let input_mean = read_f64s(&mut r, d)?;
        let input_scale = read_f64s(&mut r, d)?;
        let out = read_f64s(&mut r, 2)?;
        net.normalization = Some(Normalization { input_mean, input_scale, output_mean: out[0], output_scale: out[1] });
    }
    Ok(net)
}

/// `batch,loss,lr`, one row per training batch.
pub fn write_loss_trace_csv<W: Write>(trace: &LossTrace, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["batch", "loss", "lr"])?;
    for (b, (loss, lr)) in trace.loss.iter().zip(&trace.lr).enumerate() {
        out.write_record([b.to_string(), loss.to_string(), lr.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Two-column table with the given header, e.g. `t_i,weight` or `v,psi`.
pub fn write_pairs_csv<W: Write>(header: [&str; 2], rows: &[(f64, f64)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for (a, b) in rows {
        out.write_record([a.to_string(), b.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_weights_csv<W: Write>(rows: &[(f64, f64)], w: W) -> Result<()> {
    write_pairs_csv(["t_i", "weight"], rows, w)
}

pub fn write_psi_csv<W: Write>(rows: &[(f64, f64)], w: W) -> Result<()> {
    write_pairs_csv(["v", "psi"], rows, w)
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 * xs.len());
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
