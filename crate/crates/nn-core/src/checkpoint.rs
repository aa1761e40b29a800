//! Binary parameter container.
//!
//! Layout, all integers little-endian:
//!   magic  b"GSNN1"
//!   u64    genome hash (FNV-1a of the canonical genome serialization)
//!   u32    block count
//!   per block: u32 value count, then that many f32 values
//!
//! Blocks appear in genome order (per conv layer: weights, bias, then
//! batchnorm scale/shift/running-mean/running-variance when present,
//! followed by the terminal layer); models with sequence layers append
//! their blocks after the convolutional ones.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{NnError, Result};

pub const MAGIC: &[u8; 5] = b"GSNN1";

pub fn write_checkpoint(path: &Path, genome_hash: u64, blocks: &[Vec<f32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&genome_hash.to_le_bytes())?;
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for block in blocks {
        w.write_all(&(block.len() as u32).to_le_bytes())?;
        for &v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(u64, Vec<Vec<f32>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Corrupt {
            context: format!("{}: bad magic {:?}", path.display(), magic),
        });
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let genome_hash = u64::from_le_bytes(buf8);
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let count = u32::from_le_bytes(buf4) as usize;

    let mut blocks = Vec::with_capacity(count);
    for i in 0..count {
        r.read_exact(&mut buf4).map_err(|_| NnError::Corrupt {
            context: format!("{}: truncated at block {i}", path.display()),
        })?;
        let len = u32::from_le_bytes(buf4) as usize;
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes).map_err(|_| NnError::Corrupt {
            context: format!("{}: truncated inside block {i}", path.display()),
        })?;
        let block = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        blocks.push(block);
    }
    Ok((genome_hash, blocks))
}
