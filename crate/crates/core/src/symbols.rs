//! The symbol table: resolved series names, their surface aliases and the
//! numeric ranges each relation kind may take.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolInfo {
    pub symbol: String,
    pub aliases: Vec<String>,
    pub min_value: f64,
    pub max_value: f64,
    pub rel_min: f64,
    pub rel_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolTable {
    entries: Vec<SymbolInfo>,
}

impl SymbolTable {
    pub fn new(entries: Vec<SymbolInfo>) -> Result<Self> {
        for e in &entries {
            if e.aliases.is_empty() || e.aliases.iter().any(|a| a.trim().is_empty()) {
                return Err(Error::InvalidConfig(format!(
                    "symbol {} has an empty alias list or blank alias",
                    e.symbol
                )));
            }
            if !(e.min_value <= e.max_value) || !(e.rel_min <= e.rel_max) {
                return Err(Error::InvalidConfig(format!(
                    "symbol {} has an inverted range",
                    e.symbol
                )));
            }
        }
        Ok(SymbolTable { entries })
    }

    pub fn entries(&self) -> &[SymbolInfo] {
        &self.entries
    }

    pub fn get(&self, symbol: &str) -> Option<&SymbolInfo> {
        self.entries.iter().find(|e| e.symbol == symbol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<SymbolInfo> = io::read_json(path)?;
        SymbolTable::new(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.entries)
    }
}
