use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::AttackSurface;

/// One line of the crawl journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrawlRecord {
    /// A crawl finished; its surface can be reused on resume.
    Surface(AttackSurface),
    /// A domain was skipped or failed.
    Skipped { domain: String, reason: String },
}

/// Append-only JSONL journal, safe to share between workers.
pub struct CrawlJournal {
    out: Mutex<BufWriter<File>>,
}

impl CrawlJournal {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CrawlJournal { out: Mutex::new(BufWriter::new(f)) })
    }

    pub fn record(&self, rec: &CrawlRecord) -> std::io::Result<()> {
        let mut out = self.out.lock().unwrap();
        serde_json::to_writer(&mut *out, rec)?;
        out.write_all(b"\n")?;
        out.flush()
    }
}

/// Completed surfaces from an existing journal, keyed by domain. A missing
/// file yields an empty map; a truncated last line is ignored.
pub fn load_journal(path: &Path) -> std::io::Result<HashMap<String, AttackSurface>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(e),
    };
    let mut out = HashMap::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if let Ok(CrawlRecord::Surface(s)) = serde_json::from_str::<CrawlRecord>(&line) {
            out.insert(s.domain.clone(), s);
        }
    }
    Ok(out)
}
