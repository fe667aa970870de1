//! Reading exported index CSV files and keeping downloads in an on-disk
//! catalog keyed by query and download date.
//!
//! Layout under the catalog root:
//!
//! ```text
//! <root>/index.json
//! <root>/<geo>/<term-slug>/<YYYY-MM-DD>.csv
//! ```

mod catalog;
mod export;

pub use catalog::{slug, AddOutcome, Catalog, CatalogEntry, INDEX_FILE};
pub use export::{checksum, parse_trends_csv, to_trends_csv, LOW_VOLUME_VALUE};
