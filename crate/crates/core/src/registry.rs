//! Name-keyed tables of interchangeable implementations.
//!
//! Convolution backends, compound series and tail checks are each selected at
//! runtime by a string from a config file. Every family keeps a static
//! [`Registry`] so that lookups, error messages and `--help` style listings
//! all come from one place.

use crate::error::{Error, Result};

pub struct Registry<T: 'static> {
    kind: &'static str,
    entries: &'static [(&'static str, T)],
}

impl<T> Registry<T> {
    pub const fn new(kind: &'static str, entries: &'static [(&'static str, T)]) -> Self {
        Registry { kind, entries }
    }

    pub fn get(&self, name: &str) -> Result<&'static T> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, entry)| entry)
            .ok_or_else(|| Error::UnknownName {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}
