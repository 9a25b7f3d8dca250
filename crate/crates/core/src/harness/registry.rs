// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::HarnessError;

/// Default attribute universe, one KDC per category.
pub const DEFAULT_CATEGORIES: &[(&str, &[&str])] = &[
    ("energy-source", &["fossil-fuel", "solar", "hydroelectricity", "wind"]),
    ("consumer-type", &["individual", "corporate", "phev"]),
    ("location", &["city", "region"]),
    ("appliance-type", &["essential", "low-priority"]),
    ("load-class", &["high-consumption", "low-consumption"]),
    (
        "user-type",
        &["electrical-engineer", "power-engineer", "environmentalist", "policy-maker", "researcher"],
    ),
];

/// The attribute universe `W` and which KDC owns each attribute.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttributeRegistry {
    owner: BTreeMap<String, String>,
}

impl AttributeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The six default categories, each owned by a KDC named after it.
    pub fn seeded() -> Self {
        let mut r = Self::new();
        for (kdc, attrs) in DEFAULT_CATEGORIES {
            for a in *attrs {
                r.register(kdc, a).expect("default categories are disjoint");
            }
        }
        r
    }

    /// Claims `attr` for `kdc`. Re-registering with the same owner is a
    /// no-op; a different owner is an error.
    pub fn register(&mut self, kdc: &str, attr: &str) -> Result<(), HarnessError> {
        match self.owner.get(attr) {
            Some(existing) if existing != kdc => Err(HarnessError::SharedAttribute {
                attribute: attr.to_owned(),
                first: existing.clone(),
                second: kdc.to_owned(),
            }),
            Some(_) => Ok(()),
            None => {
                self.owner.insert(attr.to_owned(), kdc.to_owned());
                Ok(())
            }
        }
    }

    pub fn owner(&self, attr: &str) -> Option<&str> {
        self.owner.get(attr).map(String::as_str)
    }

    pub fn contains(&self, attr: &str) -> bool {
        self.owner.contains_key(attr)
    }

    pub fn universe(&self) -> impl Iterator<Item = &str> {
        self.owner.keys().map(String::as_str)
    }

    pub fn owned_by<'a>(&'a self, kdc: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.owner
            .iter()
            .filter(move |(_, k)| k.as_str() == kdc)
            .map(|(a, _)| a.as_str())
    }

    /// `w = |W|`.
    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }
}
