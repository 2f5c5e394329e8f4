//! Raw tensor dumps.
//!
//! Layout (all little-endian): magic `FTNR`, version `u16`, dtype `u8`
//! (0 = f32, 1 = f64), mode count `u8`, one `u64` extent per mode, then the
//! row-major data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DenseTensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FTNR";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

pub fn write<W: Write>(tensor: &DenseTensor, dtype: Dtype, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[dtype as u8, tensor.ndim() as u8])?;
    for &n in tensor.shape() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    match dtype {
        Dtype::F64 => {
            for v in tensor.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Dtype::F32 => {
            for v in tensor.data() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn to_bytes(tensor: &DenseTensor, dtype: Dtype) -> Vec<u8> {
    let mut buf = Vec::new();
    write(tensor, dtype, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Reads one dump; f32 payloads are widened to f64.
pub fn read<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad FTNR magic {magic:?}")));
    }
    let mut word = [0u8; 2];
    read_exact(&mut r, &mut word)?;
    let version = u16::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Version {
            expected: VERSION,
            found: version,
        });
    }
    read_exact(&mut r, &mut word)?;
    let (dtype, modes) = (word[0], word[1] as usize);
    if modes == 0 || modes > DenseTensor::MAX_MODES {
        return Err(Error::Format(format!("invalid mode count {modes}")));
    }
    let mut shape = Vec::with_capacity(modes);
    for _ in 0..modes {
        let mut b = [0u8; 8];
        read_exact(&mut r, &mut b)?;
        shape.push(u64::from_le_bytes(b) as usize);
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Format("extent product overflows".into()))?;
    let data = match dtype {
        1 => {
            let mut bytes = vec![0u8; len * 8];
            read_exact(&mut r, &mut bytes)?;
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        0 => {
            let mut bytes = vec![0u8; len * 4];
            read_exact(&mut r, &mut bytes)?;
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect()
        }
        other => return Err(Error::Format(format!("unknown dtype tag {other}"))),
    };
    DenseTensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(path: impl AsRef<Path>, tensor: &DenseTensor, dtype: Dtype) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(tensor, dtype, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read(BufReader::new(File::open(path)?))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated FTNR data".into()),
        _ => Error::Io(e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let t = DenseTensor::new(vec![2, 1], vec![1.5, -2.0]).unwrap();
        let bytes = to_bytes(&t, Dtype::F64);
        assert_eq!(&bytes[..4], b"FTNR");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7], 2);
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 8 + 16 + 16);
        assert_eq!(read(&bytes[..]).unwrap(), t);
    }

    #[test]
    fn f32_payload_widens() {
        let t = DenseTensor::new(vec![3], vec![0.5, 0.25, -8.0]).unwrap();
        let bytes = to_bytes(&t, Dtype::F32);
        assert_eq!(bytes[6], 0);
        assert_eq!(bytes.len(), 8 + 8 + 12);
        assert_eq!(read(&bytes[..]).unwrap(), t);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let t = DenseTensor::ones(&[2, 2]).unwrap();
        let mut bytes = to_bytes(&t, Dtype::F64);
        assert!(matches!(read(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        bytes[4] = 9;
        assert!(matches!(read(&bytes[..]), Err(Error::Version { .. })));
        bytes[0] = b'X';
        assert!(matches!(read(&bytes[..]), Err(Error::Format(_))));
    }
}
