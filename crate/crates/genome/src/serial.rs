//! Genome files: one JSON object per genome, `{"layers":[{"conv":{...},"act":{...}},...]}`.

use std::path::Path;

use crate::error::{GenomeError, Result};
use crate::genes::Genome;

pub fn serialize(genome: &Genome) -> String {
    serde_json::to_string_pretty(genome).expect("genome serialization cannot fail")
}

/// Canonical single-line form used for hashing and manifests.
pub fn serialize_compact(genome: &Genome) -> String {
    serde_json::to_string(genome).expect("genome serialization cannot fail")
}

pub fn parse(text: &str) -> Result<Genome> {
    let genome: Genome = serde_json::from_str(text).map_err(|e| GenomeError::Parse {
        message: e.to_string(),
    })?;
    genome.validate()?;
    Ok(genome)
}

pub fn write_file(genome: &Genome, path: &Path) -> Result<()> {
    std::fs::write(path, serialize(genome)).map_err(|e| GenomeError::Parse {
        message: format!("{}: {e}", path.display()),
    })
}

pub fn read_file(path: &Path) -> Result<Genome> {
    let text = std::fs::read_to_string(path).map_err(|e| GenomeError::Parse {
        message: format!("{}: {e}", path.display()),
    })?;
    parse(&text)
}

/// Stable 64-bit FNV-1a over the canonical serialization. Used to name
/// artifacts and to bind checkpoints to the genome that produced them.
pub fn genome_hash(genome: &Genome) -> u64 {
    fnv1a(serialize_compact(genome).as_bytes())
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
