//! File formats: PSIH hash files and vector inputs (CSV or raw little-endian f64).
//!
//! A PSIH file is a 20-byte header followed by `count` rows of `ceil(k / 8)`
//! bytes each:
//!
//! | offset | size | field                     |
//! |--------|------|---------------------------|
//! | 0      | 4    | magic `b"PSIH"`           |
//! | 4      | 4    | version (u32 LE, = 1)     |
//! | 8      | 4    | k (u32 LE)                |
//! | 12     | 8    | count (u64 LE)            |
//!
//! Within a row, hash bit `i` is bit `i % 8` of byte `i / 8`; a set bit means `+1`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::BinaryHash;

pub const PSIH_MAGIC: &[u8; 4] = b"PSIH";
pub const PSIH_VERSION: u32 = 1;
pub const PSIH_HEADER_LEN: usize = 20;

pub fn write_hashes<W: Write>(mut w: W, k: usize, hashes: &[BinaryHash]) -> Result<()> {
    let k32 = u32::try_from(k).map_err(|_| Error::Format(format!("k={k} does not fit in u32")))?;
    w.write_all(PSIH_MAGIC)?;
    w.write_all(&PSIH_VERSION.to_le_bytes())?;
    w.write_all(&k32.to_le_bytes())?;
    w.write_all(&(hashes.len() as u64).to_le_bytes())?;
    for (row, h) in hashes.iter().enumerate() {
        if h.len() != k {
            return Err(Error::Row {
                row,
                source: Box::new(Error::DimensionMismatch {
                    expected: k,
                    actual: h.len(),
                }),
            });
        }
        w.write_all(&h.to_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Returns `(k, hashes)`.
pub fn read_hashes<R: Read>(mut r: R) -> Result<(usize, Vec<BinaryHash>)> {
    let mut header = [0u8; PSIH_HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated PSIH header".into()))?;
    if &header[..4] != PSIH_MAGIC {
        return Err(Error::Format("bad magic, not a PSIH file".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != PSIH_VERSION {
        return Err(Error::Format(format!("unsupported PSIH version {version}")));
    }
    let k = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
    let row_len = BinaryHash::byte_len(k);
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let expected = (row_len as u64).checked_mul(count);
    if expected != Some(body.len() as u64) {
        return Err(Error::Format(format!(
            "PSIH body has {} bytes, header implies {count} rows of {row_len}",
            body.len()
        )));
    }
    let hashes = if row_len == 0 {
        (0..count).map(|_| BinaryHash::from_bits([])).collect()
    } else {
        body.chunks(row_len)
            .enumerate()
            .map(|(row, c)| {
                BinaryHash::from_bytes(k, c).map_err(|e| Error::Row {
                    row,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?
    };
    Ok((k, hashes))
}

pub fn write_hash_file(path: &Path, k: usize, hashes: &[BinaryHash]) -> Result<()> {
    write_hashes(BufWriter::new(File::create(path)?), k, hashes)
}

pub fn read_hash_file(path: &Path) -> Result<(usize, Vec<BinaryHash>)> {
    read_hashes(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorFormat {
    Csv,
    RawF64,
}

impl VectorFormat {
    /// `.csv` files are CSV; anything else is raw f64 with a sidecar.
    pub fn detect(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => VectorFormat::Csv,
            _ => VectorFormat::RawF64,
        }
    }
}

/// Sidecar describing a raw vector file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub n: usize,
    pub count: usize,
    pub dtype: String,
}

pub const RAW_DTYPE: &str = "f64le";

/// Sidecar location for a raw vector file: the same path with `.json` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// One vector per record, no header. Rows may differ in length; callers check.
pub fn read_csv_vectors<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        let values = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Format(format!("row {row}, column {col}: cannot parse {field:?}"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(values);
    }
    Ok(out)
}

pub fn write_csv_vectors<W: Write>(w: W, vectors: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for v in vectors {
        writer
            .write_record(v.iter().map(|x| x.to_string()))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_raw_vectors(path: &Path) -> Result<Vec<Vec<f64>>> {
    let sidecar: RawSidecar =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    if sidecar.dtype != RAW_DTYPE {
        return Err(Error::Format(format!(
            "unsupported dtype {:?}",
            sidecar.dtype
        )));
    }
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let expected = sidecar.n * sidecar.count * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "raw file has {} bytes, sidecar implies {expected}",
            bytes.len()
        )));
    }
    if sidecar.n == 0 {
        return Ok(vec![Vec::new(); sidecar.count]);
    }
    Ok(bytes
        .chunks(sidecar.n * 8)
        .map(|row| {
            row.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect())
}

/// Writes the raw file and its sidecar. All vectors must share one length.
pub fn write_raw_vectors(path: &Path, vectors: &[Vec<f64>]) -> Result<()> {
    let n = vectors.first().map_or(0, Vec::len);
    let mut w = BufWriter::new(File::create(path)?);
    for (row, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return Err(Error::Row {
                row,
                source: Box::new(Error::DimensionMismatch {
                    expected: n,
                    actual: v.len(),
                }),
            });
        }
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    let sidecar = RawSidecar {
        n,
        count: vectors.len(),
        dtype: RAW_DTYPE.to_string(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_vec(&sidecar)?)?;
    Ok(())
}

pub fn read_vectors(path: &Path, format: VectorFormat) -> Result<Vec<Vec<f64>>> {
    match format {
        VectorFormat::Csv => read_csv_vectors(BufReader::new(File::open(path)?)),
        VectorFormat::RawF64 => read_raw_vectors(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psih_layout() {
        let hashes = vec![
            BinaryHash::from_bits((0..12).map(|i| i % 2 == 0)),
            BinaryHash::from_bits((0..12).map(|i| i > 9)),
        ];
        let mut buf = Vec::new();
        write_hashes(&mut buf, 12, &hashes).unwrap();
        assert_eq!(&buf[..4], b"PSIH");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &12u32.to_le_bytes());
        assert_eq!(&buf[12..20], &2u64.to_le_bytes());
        assert_eq!(buf.len(), 20 + 2 * 2);
        assert_eq!(&buf[20..22], &[0b0101_0101, 0b0000_0101]);
        let (k, back) = read_hashes(&buf[..]).unwrap();
        assert_eq!(k, 12);
        assert_eq!(back, hashes);
    }

    #[test]
    fn psih_rejects_corruption() {
        let hashes = vec![BinaryHash::from_bits([true; 16])];
        let mut buf = Vec::new();
        write_hashes(&mut buf, 16, &hashes).unwrap();
        assert!(read_hashes(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_hashes(&bad[..]).is_err());
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(read_hashes(&bad[..]).is_err());
        assert!(read_hashes(&buf[..10]).is_err());
        assert!(write_hashes(Vec::new(), 8, &hashes).is_err());
    }

    #[test]
    fn csv_vectors() {
        let text = "1, 2.5, -3\n# comment\n4,5,6e-1\n";
        let v = read_csv_vectors(text.as_bytes()).unwrap();
        assert_eq!(v, vec![vec![1.0, 2.5, -3.0], vec![4.0, 5.0, 0.6]]);
        let err = read_csv_vectors("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"));
        let mut out = Vec::new();
        write_csv_vectors(&mut out, &v).unwrap();
        assert_eq!(read_csv_vectors(&out[..]).unwrap(), v);
    }

    #[test]
    fn raw_vectors_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.f64");
        let v = vec![vec![1.0, -2.0, 0.125], vec![f64::MIN_POSITIVE, 1e300, 0.0]];
        write_raw_vectors(&path, &v).unwrap();
        let sidecar: RawSidecar =
            serde_json::from_slice(&std::fs::read(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(
            sidecar,
            RawSidecar {
                n: 3,
                count: 2,
                dtype: "f64le".into()
            }
        );
        assert_eq!(std::fs::read(&path).unwrap().len(), 48);
        assert_eq!(read_vectors(&path, VectorFormat::detect(&path)).unwrap(), v);

        std::fs::write(&path, [0u8; 40]).unwrap();
        assert!(read_raw_vectors(&path).is_err());
    }

    #[test]
    fn format_detection() {
        assert_eq!(
            VectorFormat::detect(Path::new("a/b.CSV")),
            VectorFormat::Csv
        );
        assert_eq!(
            VectorFormat::detect(Path::new("a/b.bin")),
            VectorFormat::RawF64
        );
    }
}
