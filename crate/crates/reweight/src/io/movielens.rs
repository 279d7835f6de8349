//! MovieLens ratings files.
//!
//! Two on-disk layouts: tab-separated `user \t item \t rating \t timestamp`
//! (the 100K `u.data` layout) and `user::item::rating::timestamp` (the
//! 1M/10M `ratings.dat` layout). Timestamps are ignored. User and item ids
//! are remapped to dense zero-based indices in increasing id order, so the
//! resulting dataset is independent of record order.

use super::IoError;
use crate::harness::RatingsDataset;
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovieLensFormat {
    /// Tab-separated (100K `u.data`).
    UData,
    /// `::`-separated (1M/10M `ratings.dat`).
    RatingsDat,
}

impl MovieLensFormat {
    /// Picks the layout from the file name; `.dat` means `ratings.dat`.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("dat") => MovieLensFormat::RatingsDat,
            _ => MovieLensFormat::UData,
        }
    }
}

fn parse_records(
    text: &str,
    split: impl Fn(&str) -> Vec<&str>,
) -> Result<Vec<(u64, u64, f64)>, IoError> {
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split(line);
        if fields.len() < 3 {
            return Err(IoError::parse(
                lineno,
                format!("expected at least 3 fields, found {}", fields.len()),
            ));
        }
        let user: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| IoError::parse(lineno, format!("bad user id '{}'", fields[0])))?;
        let item: u64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| IoError::parse(lineno, format!("bad item id '{}'", fields[1])))?;
        let rating: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| IoError::parse(lineno, format!("bad rating '{}'", fields[2])))?;
        if !(1.0..=5.0).contains(&rating) {
            return Err(IoError::parse(
                lineno,
                format!("rating {rating} outside [1, 5]"),
            ));
        }
        raw.push((user, item, rating));
    }
    Ok(raw)
}

fn build_dataset(raw: Vec<(u64, u64, f64)>) -> Result<RatingsDataset, IoError> {
    let users: BTreeSet<u64> = raw.iter().map(|r| r.0).collect();
    let items: BTreeSet<u64> = raw.iter().map(|r| r.1).collect();
    let user_index = |id: u64| users.range(..id).count();
    let item_index = |id: u64| items.range(..id).count();
    let records: Vec<(usize, usize, f64)> = raw
        .iter()
        .map(|&(u, i, r)| (user_index(u), item_index(i), r))
        .collect();
    RatingsDataset::new(records, users.len(), items.len())
        .map_err(|e| IoError::parse(0, e.to_string()))
}

/// Parses the tab-separated 100K layout.
pub fn parse_u_data(text: &str) -> Result<RatingsDataset, IoError> {
    build_dataset(parse_records(text, |l| l.split('\t').collect())?)
}

/// Parses the `::`-separated 1M/10M layout.
pub fn parse_ratings_dat(text: &str) -> Result<RatingsDataset, IoError> {
    build_dataset(parse_records(text, |l| l.split("::").collect())?)
}

/// Loads a ratings file from disk, reporting a missing file as
/// [`IoError::DatasetMissing`] so callers can skip instead of fail.
pub fn load_ratings(path: &Path, format: MovieLensFormat) -> Result<RatingsDataset, IoError> {
    if !path.exists() {
        return Err(IoError::DatasetMissing(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    match format {
        MovieLensFormat::UData => parse_u_data(&text),
        MovieLensFormat::RatingsDat => parse_ratings_dat(&text),
    }
}
