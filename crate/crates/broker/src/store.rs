//! On-disk snapshot of the repository and the compliance cache.
//!
//! The whole state is one JSON document replaced atomically: written to a
//! sibling temporary file, synced, then renamed over the old one.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::compliance::CacheEntry;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredProvider {
    pub provider_id: Uuid,
    pub contract: String,
    pub contract_hash: String,
    pub uri: String,
    pub registered_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredRequirement {
    pub hash: String,
    pub canonical: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub providers: Vec<StoredProvider>,
    pub requirements: Vec<StoredRequirement>,
    pub compatibility: Vec<CacheEntry>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    version: u32,
    #[serde(flatten)]
    snapshot: Snapshot,
}

pub fn load(path: &Path) -> io::Result<Option<Snapshot>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e),
    };
    let doc: Document = serde_json::from_slice(&bytes)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    if doc.version != FORMAT_VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported store version {}", doc.version),
        ));
    }
    Ok(Some(doc.snapshot))
}

pub fn save(path: &Path, snapshot: &Snapshot) -> io::Result<()> {
    let doc = Document {
        version: FORMAT_VERSION,
        snapshot: snapshot.clone(),
    };
    let bytes = serde_json::to_vec_pretty(&doc).map_err(io::Error::other)?;
    let tmp = tmp_path(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        // Persist the rename itself; not every platform allows opening dirs.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}
