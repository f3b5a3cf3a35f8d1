//! Discovery sources. The static member-list file stands in for the
//! production DNS record: one line per node, whitespace-separated
//! `node_id query_addr membership_addr`, `#` comments allowed.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::view::NodeId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemberRecord {
    pub node: NodeId,
    pub query_addr: String,
    pub member_addr: String,
}

pub trait Discovery: Send + Sync {
    fn poll(&self) -> Result<Vec<MemberRecord>>;
}

/// Fixed in-memory member list.
pub struct StaticDiscovery {
    records: Vec<MemberRecord>,
}

impl StaticDiscovery {
    pub fn new(records: Vec<MemberRecord>) -> Self {
        StaticDiscovery { records }
    }
}

impl Discovery for StaticDiscovery {
    fn poll(&self) -> Result<Vec<MemberRecord>> {
        Ok(self.records.clone())
    }
}

/// Re-reads a member-list file on every poll, so membership can be
/// edited while nodes run.
pub struct FileDiscovery {
    path: PathBuf,
}

impl FileDiscovery {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileDiscovery { path: path.into() }
    }
}

impl Discovery for FileDiscovery {
    fn poll(&self) -> Result<Vec<MemberRecord>> {
        let text = std::fs::read_to_string(&self.path)?;
        parse_members_file(&text)
    }
}

pub fn parse_members_file(text: &str) -> Result<Vec<MemberRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::invalid(format!(
                "members file line {}: expected 'node_id query_addr member_addr'",
                lineno + 1
            )));
        }
        records.push(MemberRecord {
            node: NodeId::new(fields[0]),
            query_addr: fields[1].to_string(),
            member_addr: fields[2].to_string(),
        });
    }
    Ok(records)
}

pub fn write_members_file(path: &Path, records: &[MemberRecord]) -> Result<()> {
    let mut text = String::from("# node_id query_addr member_addr\n");
    for r in records {
        text.push_str(&format!("{} {} {}\n", r.node, r.query_addr, r.member_addr));
    }
    std::fs::write(path, text)?;
    Ok(())
}
