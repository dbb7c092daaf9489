use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csv_io::{parse_candles, GapPolicy};
use super::{parse_interval, Candle, CandleSeries, InstrumentKey, MarketError, WindowSpec};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Data-directory manifest: which CSV file holds which instrument.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub gap_policy: GapPolicy,
    #[serde(default)]
    pub series: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory.
    pub file: PathBuf,
    pub base: String,
    pub quote: String,
    pub exchange: String,
    /// Bar interval, e.g. `1h` or `86400`.
    pub interval: String,
}

pub fn load_manifest(path: &Path) -> Result<Manifest, MarketError> {
    let text = std::fs::read_to_string(path).map_err(|source| MarketError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| MarketError::Manifest {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// In-memory candle store keyed by instrument. Loaded once, then read-only.
#[derive(Debug, Clone, Default)]
pub struct MarketStore {
    series: BTreeMap<InstrumentKey, CandleSeries>,
}

impl MarketStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every series listed in `<dir>/manifest.toml`.
    pub fn load_data_dir(dir: &Path) -> Result<Self, MarketError> {
        Self::load_with_manifest(&dir.join(MANIFEST_FILE))
    }

    pub fn load_with_manifest(manifest_path: &Path) -> Result<Self, MarketError> {
        let manifest = load_manifest(manifest_path)?;
        let base_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let mut store = MarketStore::new();
        for entry in &manifest.series {
            let key = InstrumentKey::new(&entry.base, &entry.quote, &entry.exchange)?;
            let interval = parse_interval(&entry.interval)?;
            store.ingest_csv(&base_dir.join(&entry.file), key, interval, manifest.gap_policy)?;
        }
        Ok(store)
    }

    /// Parses a candle CSV and registers it under `key`.
    pub fn ingest_csv(
        &mut self,
        path: &Path,
        key: InstrumentKey,
        candle_interval: i64,
        policy: GapPolicy,
    ) -> Result<&CandleSeries, MarketError> {
        let file = File::open(path).map_err(|source| MarketError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let series = parse_candles(file, &path.display().to_string(), key, candle_interval, policy)?;
        self.insert(series)
    }

    pub fn insert(&mut self, series: CandleSeries) -> Result<&CandleSeries, MarketError> {
        use std::collections::btree_map::Entry;
        match self.series.entry(series.key.clone()) {
            Entry::Occupied(e) => Err(MarketError::DuplicateInstrument(e.key().to_string())),
            Entry::Vacant(v) => Ok(v.insert(series)),
        }
    }

    pub fn get(&self, key: &InstrumentKey) -> Result<&CandleSeries, MarketError> {
        self.series.get(key).ok_or_else(|| MarketError::UnknownInstrument {
            key: key.to_string(),
            known: self.series.keys().map(|k| k.to_string()).collect(),
        })
    }

    /// Candles of `key` in `(as_of - lookback, as_of]`, possibly empty.
    pub fn query_window(
        &self,
        key: &InstrumentKey,
        lookback: &WindowSpec,
        as_of: i64,
    ) -> Result<&[Candle], MarketError> {
        Ok(self.get(key)?.window(lookback, as_of))
    }

    pub fn keys(&self) -> impl Iterator<Item = &InstrumentKey> {
        self.series.keys()
    }

    pub fn series(&self) -> impl Iterator<Item = &CandleSeries> {
        self.series.values()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn list_base_tokens(&self) -> Vec<String> {
        self.distinct(|k| &k.base_token)
    }

    pub fn list_quote_tokens(&self) -> Vec<String> {
        self.distinct(|k| &k.quote_token)
    }

    pub fn list_exchanges(&self) -> Vec<String> {
        self.distinct(|k| &k.exchange)
    }

    fn distinct(&self, field: impl Fn(&InstrumentKey) -> &String) -> Vec<String> {
        self.series
            .keys()
            .map(field)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}
