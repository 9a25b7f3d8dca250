// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::abe::{AbeCiphertext, RowUpdates};

/// Storage for encrypted records plus the out-of-band delivery channel for
/// revoked rows. Holds no keys and offers no decryption.
#[derive(Clone, Debug, Default)]
pub struct Repository {
    records: BTreeMap<String, Vec<AbeCiphertext>>,
    deliveries: BTreeMap<(String, String), RowUpdates>,
}

impl Repository {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a new version of a record.
    pub fn store(&mut self, record: &str, c: AbeCiphertext) {
        self.records.entry(record.to_owned()).or_default().push(c);
    }

    pub fn latest(&self, record: &str) -> Option<&AbeCiphertext> {
        self.records.get(record).and_then(|v| v.last())
    }

    pub fn versions(&self, record: &str) -> &[AbeCiphertext] {
        self.records.get(record).map_or(&[], Vec::as_slice)
    }

    pub fn record_ids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    /// Hands a user the current out-of-band rows for a record, replacing
    /// anything delivered earlier.
    pub fn deliver(&mut self, record: &str, user: &str, updates: RowUpdates) {
        self.deliveries
            .insert((record.to_owned(), user.to_owned()), updates);
    }

    pub fn updates_for(&self, record: &str, user: &str) -> Option<&RowUpdates> {
        self.deliveries.get(&(record.to_owned(), user.to_owned()))
    }
}
