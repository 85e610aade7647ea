//! Content-addressed scenario documents on local disk.
//!
//! A scenario's id is the hex SHA-256 of its canonical JSON document, so storing the same
//! scenario twice is a no-op and a fetched document is byte-identical to the stored one.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use scengen_core::document::{scenario_from_json, scenario_to_json};
use scengen_core::scenario::Scenario;

pub fn document_id(document: &[u8]) -> String {
    hex::encode(Sha256::digest(document))
}

fn is_id(id: &str) -> bool {
    id.len() == 64 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug)]
pub struct ScenarioStore {
    root: PathBuf,
    writers: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ScenarioStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, writers: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    /// Persist a scenario, returning its id and document bytes.
    pub fn put(&self, scenario: &Scenario) -> io::Result<(String, Vec<u8>)> {
        let doc = scenario_to_json(scenario);
        let id = document_id(&doc);
        let lock = self.writers.lock().expect("store lock").entry(id.clone()).or_default().clone();
        let _guard = lock.lock().expect("writer lock");
        let path = self.path(&id);
        if !path.exists() {
            let tmp = self.root.join(format!(".{id}.tmp"));
            fs::write(&tmp, &doc)?;
            fs::rename(&tmp, &path)?;
        }
        Ok((id, doc))
    }

    /// Stored bytes, or `None` for ids that are unknown or malformed.
    pub fn get_bytes(&self, id: &str) -> io::Result<Option<Vec<u8>>> {
        if !is_id(id) {
            return Ok(None);
        }
        match fs::read(self.path(id)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn get(&self, id: &str) -> io::Result<Option<Scenario>> {
        self.get_bytes(id)?
            .map(|b| scenario_from_json(&b).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{id}: {e}"))))
            .transpose()
    }
}
