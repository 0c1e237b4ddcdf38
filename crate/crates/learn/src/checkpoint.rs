//! Versioned binary checkpoints: magic, format version, 32-byte config
//! hash, then named little-endian `f64` tensors.

use std::io::{Read, Write};

use crate::mat::Mat;
use crate::LearnError;

pub const MAGIC: &[u8; 8] = b"RESLOCO\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: [u8; 32],
    pub tensors: Vec<(String, Mat)>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Tensors whose names start with `prefix.`, in stored order.
    pub fn group(&self, prefix: &str) -> Vec<&Mat> {
        let p = format!("{prefix}.");
        self.tensors.iter().filter(|(n, _)| n.starts_with(&p)).map(|(_, m)| m).collect()
    }

    pub fn write(&self, mut w: impl Write) -> Result<(), LearnError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.config_hash)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, m) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(m.rows as u32).to_le_bytes())?;
            w.write_all(&(m.cols as u32).to_le_bytes())?;
            for v in &m.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self, LearnError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(LearnError::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(LearnError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut config_hash = [0u8; 32];
        r.read_exact(&mut config_hash)?;
        let n = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n.min(4096));
        for _ in 0..n {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| LearnError::Checkpoint("tensor name is not UTF-8".into()))?;
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            tensors.push((name, Mat::from_vec(rows, cols, data)));
        }
        Ok(Self { config_hash, tensors })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32, LearnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
