//! Binary caches for the timetable and its TIG.
//!
//! Layout: 4-byte magic, u32 format version (LE), 32-byte SHA-256
//! fingerprint, bincode payload. The timetable cache fingerprints its own
//! payload; the TIG cache stores the fingerprint of the timetable it was
//! built from, so stale pairs are detected on load.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tig::Tig;
use crate::timetable::{validate, StopId, Timetable};
use crate::Duration;

pub const FORMAT_VERSION: u32 = 1;
const TIMETABLE_MAGIC: &[u8; 4] = b"RPTT";
const TIG_MAGIC: &[u8; 4] = b"RPTG";
const HEADER: usize = 4 + 4 + 32;

/// Hex SHA-256 of a timetable's canonical encoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn of_timetable(tt: &Timetable) -> Result<Fingerprint> {
        Ok(Fingerprint(Sha256::digest(encode_payload(tt)?).into()))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

fn encode_payload<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    bincode::serialize(value).map_err(|e| Error::Cache(e.to_string()))
}

fn frame(magic: &[u8; 4], fp: &Fingerprint, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&fp.0);
    out.extend_from_slice(payload);
    out
}

fn unframe<'a>(path: &Path, magic: &[u8; 4], bytes: &'a [u8]) -> Result<(Fingerprint, &'a [u8])> {
    let bad = |msg: &str| Error::Cache(format!("{}: {msg}", path.display()));
    if bytes.len() < HEADER || &bytes[..4] != magic {
        return Err(bad("not a cache file of the expected kind"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(&format!("format version {version}, expected {FORMAT_VERSION}; re-run ingest")));
    }
    let fp = Fingerprint(bytes[8..40].try_into().expect("32 bytes"));
    Ok((fp, &bytes[HEADER..]))
}

pub fn timetable_bytes(tt: &Timetable) -> Result<(Fingerprint, Vec<u8>)> {
    let payload = encode_payload(tt)?;
    let fp = Fingerprint(Sha256::digest(&payload).into());
    let bytes = frame(TIMETABLE_MAGIC, &fp, &payload);
    Ok((fp, bytes))
}

pub fn write_timetable(path: &Path, tt: &Timetable) -> Result<Fingerprint> {
    let (fp, bytes) = timetable_bytes(tt)?;
    fs::write(path, bytes)?;
    Ok(fp)
}

/// Reads and re-validates a timetable cache.
pub fn read_timetable(path: &Path) -> Result<(Timetable, Fingerprint)> {
    let bytes = fs::read(path)?;
    let (fp, payload) = unframe(path, TIMETABLE_MAGIC, &bytes)?;
    if Fingerprint(Sha256::digest(payload).into()) != fp {
        return Err(Error::Cache(format!("{}: payload does not match its fingerprint", path.display())));
    }
    let tt: Timetable = bincode::deserialize(payload).map_err(|e| Error::Cache(e.to_string()))?;
    validate(&tt).into_result()?;
    Ok((tt, fp))
}

/// Where the TIG cache for a timetable cache lives.
pub fn tig_path(timetable_cache: &Path) -> PathBuf {
    let mut name = timetable_cache.file_name().unwrap_or_default().to_os_string();
    name.push(".tig");
    timetable_cache.with_file_name(name)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TigPayload {
    stop_count: usize,
    edges: Vec<(StopId, StopId, Duration)>,
}

pub fn write_tig(path: &Path, tig: &Tig, timetable: &Fingerprint) -> Result<()> {
    let payload = encode_payload(&TigPayload { stop_count: tig.stop_count(), edges: tig.edges().collect() })?;
    fs::write(path, frame(TIG_MAGIC, timetable, &payload))?;
    Ok(())
}

/// Reads a TIG cache, failing if it was built from another timetable.
pub fn read_tig(path: &Path, timetable: &Fingerprint) -> Result<Tig> {
    let bytes = fs::read(path)?;
    let (fp, payload) = unframe(path, TIG_MAGIC, &bytes)?;
    if &fp != timetable {
        return Err(Error::Cache(format!(
            "{} was built from timetable {}, but the cache holds {}; re-run precompute",
            path.display(),
            fp,
            timetable
        )));
    }
    let p: TigPayload = bincode::deserialize(payload).map_err(|e| Error::Cache(e.to_string()))?;
    Tig::from_edges(p.stop_count, p.edges)
}
