//! `P3EP` epoch container and the CSV fixture importer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array3;

use super::EpochSet;
use crate::error::{Error, Result};
use crate::io_util::{read_magic, truncated};

pub const MAGIC: [u8; 4] = *b"P3EP";
pub const VERSION: u32 = 1;

const HEADER_BYTES: u64 = 24;
const RECORD_BYTES: u64 = 17;

fn as_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidData(format!("{what} = {v} exceeds u32")))
}

pub fn write_epochs<W: Write>(w: &mut W, epochs: &EpochSet) -> Result<()> {
    let (n, c, s) = epochs.data.dim();
    if epochs.labels.len() != n {
        return Err(Error::InvalidData("labels do not match epoch count".into()));
    }
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(as_u32(n, "n_epochs")?)?;
    w.write_u32::<LittleEndian>(as_u32(c, "n_channels")?)?;
    w.write_u32::<LittleEndian>(as_u32(s, "n_samples")?)?;
    w.write_f32::<LittleEndian>(epochs.sampling_rate as f32)?;
    for i in 0..n {
        w.write_u8(epochs.labels[i])?;
        w.write_u16::<LittleEndian>(epochs.char_ids[i])?;
        w.write_u32::<LittleEndian>(epochs.trial_ids[i])?;
        w.write_u16::<LittleEndian>(epochs.subject_ids[i])?;
        w.write_i64::<LittleEndian>(epochs.onsets[i])?;
    }
    for &v in epochs.data.iter() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

pub fn read_epochs<R: Read>(r: &mut R) -> Result<EpochSet> {
    read_magic(r, MAGIC)?;
    let hdr = |e| truncated(e, "header");
    let version = r.read_u32::<LittleEndian>().map_err(hdr)?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            expected: VERSION,
            found: version,
        });
    }
    let n = r.read_u32::<LittleEndian>().map_err(hdr)? as usize;
    let c = r.read_u32::<LittleEndian>().map_err(hdr)? as usize;
    let s = r.read_u32::<LittleEndian>().map_err(hdr)? as usize;
    let sampling_rate = f64::from(r.read_f32::<LittleEndian>().map_err(hdr)?);

    let rec = |e| truncated(e, "epoch records");
    let mut labels = Vec::new();
    let mut char_ids = Vec::new();
    let mut trial_ids = Vec::new();
    let mut subject_ids = Vec::new();
    let mut onsets = Vec::new();
    for _ in 0..n {
        labels.push(r.read_u8().map_err(rec)?);
        char_ids.push(r.read_u16::<LittleEndian>().map_err(rec)?);
        trial_ids.push(r.read_u32::<LittleEndian>().map_err(rec)?);
        subject_ids.push(r.read_u16::<LittleEndian>().map_err(rec)?);
        onsets.push(r.read_i64::<LittleEndian>().map_err(rec)?);
    }

    let per_epoch = c
        .checked_mul(s)
        .ok_or_else(|| Error::InvalidData("epoch size overflows".into()))?;
    let mut values = Vec::new();
    let mut buf = vec![0f32; per_epoch];
    for _ in 0..n {
        r.read_f32_into::<LittleEndian>(&mut buf)
            .map_err(|e| truncated(e, "epoch data"))?;
        values.extend(buf.iter().map(|&v| f64::from(v)));
    }
    let data = Array3::from_shape_vec((n, c, s), values)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    Ok(EpochSet {
        data,
        labels,
        char_ids,
        trial_ids,
        subject_ids,
        onsets,
        sampling_rate,
    })
}

/// Writes atomically: a temporary file in the target directory renamed into place.
pub fn save_epochs(epochs: &EpochSet, path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write_epochs(&mut w, epochs)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load_epochs(path: &Path) -> Result<EpochSet> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    let mut r = BufReader::new(file);
    let epochs = read_epochs(&mut r)?;
    let expected = HEADER_BYTES
        + epochs.len() as u64 * (RECORD_BYTES + 4 * epochs.n_features() as u64);
    if len != expected {
        return Err(Error::InvalidData(format!(
            "{} has {len} bytes, header implies {expected}",
            path.display()
        )));
    }
    Ok(epochs)
}

/// CSV fixture: a header row, then one epoch per row as
/// `label, char_id, trial_id, subject_index, onset_sample` followed by
/// `n_channels * n_samples` amplitudes (channel-major).
pub fn load_epochs_csv(
    path: &Path,
    n_channels: usize,
    n_samples: usize,
    sampling_rate: f64,
) -> Result<EpochSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let width = 5 + n_channels * n_samples;
    let mut out = EpochSet {
        data: Array3::zeros((0, n_channels, n_samples)),
        labels: Vec::new(),
        char_ids: Vec::new(),
        trial_ids: Vec::new(),
        subject_ids: Vec::new(),
        onsets: Vec::new(),
        sampling_rate,
    };
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::InvalidData(format!(
                "row {} has {} columns, expected {width}",
                row + 1,
                record.len()
            )));
        }
        let field = |j: usize| record[j].trim();
        let bad = |j: usize| Error::InvalidData(format!("row {}, column {}: {:?}", row + 1, j + 1, &record[j]));
        out.labels.push(field(0).parse().map_err(|_| bad(0))?);
        out.char_ids.push(field(1).parse().map_err(|_| bad(1))?);
        out.trial_ids.push(field(2).parse().map_err(|_| bad(2))?);
        out.subject_ids.push(field(3).parse().map_err(|_| bad(3))?);
        out.onsets.push(field(4).parse().map_err(|_| bad(4))?);
        for j in 5..width {
            values.push(field(j).parse::<f64>().map_err(|_| bad(j))?);
        }
    }
    out.data = Array3::from_shape_vec((out.labels.len(), n_channels, n_samples), values)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    Ok(out)
}
