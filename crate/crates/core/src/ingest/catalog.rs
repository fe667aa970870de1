use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::export::{checksum, parse_trends_csv, to_trends_csv};
use crate::error::{Error, Result};
use crate::model::{assert_series_valid, SamplePool, SampleSeries, TermQuery};

pub const INDEX_FILE: &str = "index.json";
const LOCK_FILE: &str = "index.lock";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub query: TermQuery,
    pub download_date: NaiveDate,
    /// Relative to the catalog root, `/`-separated.
    pub file_path: String,
    /// Hex form of [`super::checksum`] over the stored file.
    pub checksum: String,
}

impl CatalogEntry {
    fn sort_key(&self) -> (&str, &str, NaiveDate, NaiveDate, NaiveDate) {
        (
            &self.query.geo,
            &self.query.term,
            self.query.start,
            self.query.end,
            self.download_date,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    entries: Vec<CatalogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AddOutcome {
    Added(CatalogEntry),
    /// Identical content was already stored for this query and date.
    Duplicate(CatalogEntry),
}

impl AddOutcome {
    pub fn entry(&self) -> &CatalogEntry {
        match self {
            AddOutcome::Added(e) | AddOutcome::Duplicate(e) => e,
        }
    }
}

/// Lowercase ASCII alphanumerics with single `-` separators.
pub fn slug(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        // non-ASCII terms still need a stable directory name
        out = format!("t{:016x}", checksum(text.as_bytes()));
    }
    out
}

fn geo_dir(geo: &str) -> String {
    let s: String = geo
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    if s.trim_matches('-').is_empty() {
        format!("g{:016x}", checksum(geo.as_bytes()))
    } else {
        s
    }
}

fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .ok_or_else(|| Error::Catalog(format!("{} has no parent directory", path.display())))?;
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Held while the index is being rewritten; removes the lock file on drop.
struct WriteLock(PathBuf);

impl WriteLock {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WriteLock(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Catalog(format!(
                "catalog is locked by another writer (remove {} if no writer is running)",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    root: PathBuf,
    entries: Vec<CatalogEntry>,
}

impl Catalog {
    /// Opens the catalog at `root`, creating the directory if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let entries = read_index(&root)?;
        Ok(Catalog { root, entries })
    }

    /// Reconstructs the entry list by scanning the directory tree instead of
    /// reading the index.
    pub fn rebuild(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let mut entries = Vec::new();
        for geo in sorted_dirs(&root)? {
            for term in sorted_dirs(&geo)? {
                let mut files: Vec<PathBuf> = fs::read_dir(&term)?
                    .map(|e| e.map(|e| e.path()))
                    .collect::<std::io::Result<_>>()?;
                files.retain(|p| p.extension().is_some_and(|x| x == "csv"));
                files.sort();
                for file in files {
                    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                    let date = NaiveDate::parse_from_str(stem, "%Y-%m-%d").map_err(|_| {
                        Error::Catalog(format!("{} is not named <YYYY-MM-DD>.csv", file.display()))
                    })?;
                    let bytes = fs::read(&file)?;
                    let text = String::from_utf8(bytes.clone())
                        .map_err(|_| Error::Catalog(format!("{} is not UTF-8", file.display())))?;
                    let series = parse_trends_csv(&text, date)?;
                    let rel = file
                        .strip_prefix(&root)
                        .expect("scanned under root")
                        .components()
                        .map(|c| c.as_os_str().to_string_lossy().into_owned())
                        .collect::<Vec<_>>()
                        .join("/");
                    entries.push(CatalogEntry {
                        query: series.query,
                        download_date: date,
                        file_path: rel,
                        checksum: format!("{:016x}", checksum(&bytes)),
                    });
                }
            }
        }
        entries.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(Catalog { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    /// Stores `series` as downloaded on `download_date`. Re-adding identical
    /// content is a reported no-op; different content for the same query and
    /// date is an error.
    pub fn add(&mut self, series: &SampleSeries, download_date: NaiveDate) -> Result<AddOutcome> {
        let mut out = self.add_all(std::slice::from_ref(&(series.clone(), download_date)))?;
        Ok(out.remove(0))
    }

    /// [`Catalog::add`] for many downloads under one lock and one index write.
    /// Stops at the first error; files stored before it stay indexed.
    pub fn add_all(&mut self, downloads: &[(SampleSeries, NaiveDate)]) -> Result<Vec<AddOutcome>> {
        let _lock = WriteLock::acquire(&self.root)?;
        self.entries = read_index(&self.root)?;
        let mut outcomes = Vec::with_capacity(downloads.len());
        let mut result = Ok(());
        for (series, date) in downloads {
            match self.insert(series, *date) {
                Ok(o) => outcomes.push(o),
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        if outcomes.iter().any(|o| matches!(o, AddOutcome::Added(_))) {
            self.entries.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
            self.write_index()?;
        }
        result.map(|()| outcomes)
    }

    fn insert(&mut self, series: &SampleSeries, download_date: NaiveDate) -> Result<AddOutcome> {
        let series = assert_series_valid(series.clone())?;
        let content = to_trends_csv(&series)?;
        let sum = format!("{:016x}", checksum(content.as_bytes()));
        let q = &series.query;
        let rel = format!(
            "{}/{}/{}.csv",
            geo_dir(&q.geo),
            slug(&q.term),
            download_date.format("%Y-%m-%d")
        );
        if let Some(existing) = self.entries.iter().find(|e| e.file_path == rel) {
            if existing.checksum == sum && &existing.query == q {
                return Ok(AddOutcome::Duplicate(existing.clone()));
            }
            return Err(Error::Catalog(format!(
                "{rel} already holds a different download of `{}` ({}) for {download_date}",
                existing.query.term, existing.query.geo
            )));
        }
        write_atomic(&self.root.join(&rel), content.as_bytes())?;
        let entry = CatalogEntry {
            query: q.clone(),
            download_date,
            file_path: rel,
            checksum: sum,
        };
        self.entries.push(entry.clone());
        Ok(AddOutcome::Added(entry))
    }

    fn write_index(&self) -> Result<()> {
        let index = IndexFile {
            version: INDEX_VERSION,
            entries: self.entries.clone(),
        };
        let mut text = serde_json::to_string_pretty(&index)?;
        text.push('\n');
        write_atomic(&self.root.join(INDEX_FILE), text.as_bytes())
    }

    /// Reads an entry's file back, checking its checksum.
    pub fn load_series(&self, entry: &CatalogEntry) -> Result<SampleSeries> {
        let path = self.root.join(&entry.file_path);
        let bytes = fs::read(&path)?;
        let sum = format!("{:016x}", checksum(&bytes));
        if sum != entry.checksum {
            return Err(Error::Catalog(format!(
                "{} has checksum {sum}, index says {}",
                entry.file_path, entry.checksum
            )));
        }
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Catalog(format!("{} is not UTF-8", entry.file_path)))?;
        let series = parse_trends_csv(&text, entry.download_date)?;
        if series.query != entry.query {
            return Err(Error::Catalog(format!(
                "{} does not match its index entry",
                entry.file_path
            )));
        }
        Ok(series)
    }

    /// Distinct queries in the catalog, optionally restricted to one region.
    pub fn queries(&self, geo: Option<&str>) -> Vec<TermQuery> {
        let set: BTreeSet<(String, String, NaiveDate, NaiveDate)> = self
            .entries
            .iter()
            .filter(|e| geo.is_none_or(|g| e.query.geo == g))
            .map(|e| {
                (
                    e.query.geo.clone(),
                    e.query.term.clone(),
                    e.query.start,
                    e.query.end,
                )
            })
            .collect();
        set.into_iter()
            .filter_map(|(geo, term, start, end)| {
                self.entries
                    .iter()
                    .find(|e| {
                        e.query.geo == geo
                            && e.query.term == term
                            && e.query.start == start
                            && e.query.end == end
                    })
                    .map(|e| e.query.clone())
            })
            .collect()
    }

    /// Loads every download of `query_set`, one pool row per download date.
    /// Each term must have been downloaded on exactly the same dates.
    pub fn load_pool(&self, query_set: &[TermQuery]) -> Result<SamplePool> {
        let first = query_set
            .first()
            .ok_or(Error::EmptySelection("empty query set"))?;
        for q in query_set {
            if (q.geo.as_str(), q.start, q.end, q.frequency)
                != (first.geo.as_str(), first.start, first.end, first.frequency)
            {
                return Err(Error::InvalidPool(format!(
                    "query `{}` ({}) does not share the grid of `{}` ({})",
                    q.term, q.geo, first.term, first.geo
                )));
            }
        }
        let mut by_term: Vec<BTreeMap<NaiveDate, &CatalogEntry>> = Vec::new();
        let mut all_dates = BTreeSet::new();
        for q in query_set {
            let dates: BTreeMap<NaiveDate, &CatalogEntry> = self
                .entries
                .iter()
                .filter(|e| &e.query == q)
                .map(|e| (e.download_date, e))
                .collect();
            if dates.is_empty() {
                return Err(Error::Catalog(format!(
                    "no downloads of `{}` ({}) for {}..{}",
                    q.term, q.geo, q.start, q.end
                )));
            }
            all_dates.extend(dates.keys().copied());
            by_term.push(dates);
        }
        let gaps: Vec<String> = query_set
            .iter()
            .zip(&by_term)
            .filter_map(|(q, dates)| {
                let missing: Vec<String> = all_dates
                    .iter()
                    .filter(|d| !dates.contains_key(d))
                    .map(|d| d.to_string())
                    .collect();
                (!missing.is_empty())
                    .then(|| format!("`{}` missing {}", q.term, missing.join(", ")))
            })
            .collect();
        if !gaps.is_empty() {
            return Err(Error::InvalidPool(format!(
                "unequal sample counts across terms: {}",
                gaps.join("; ")
            )));
        }
        let samples = all_dates
            .iter()
            .map(|d| {
                by_term
                    .iter()
                    .map(|dates| self.load_series(dates[d]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        SamplePool::new(samples)
    }
}

fn read_index(root: &Path) -> Result<Vec<CatalogEntry>> {
    let path = root.join(INDEX_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => {
            let index: IndexFile = serde_json::from_str(&text)?;
            if index.version != INDEX_VERSION {
                return Err(Error::Catalog(format!(
                    "unsupported index version {}",
                    index.version
                )));
            }
            Ok(index.entries)
        }
        Err(e) if e.kind() == ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    dirs.retain(|p| p.is_dir());
    dirs.sort();
    Ok(dirs)
}
