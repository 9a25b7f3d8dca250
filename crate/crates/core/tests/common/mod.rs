// SPDX-License-Identifier: Apache-2.0

//! Generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use gridsec_core::abe::{self, KdcKeyring, PublicDirectory, UserKeyring};
use gridsec_core::aggregation::{AggregationTopology, AttributeTag, GatewayNode, GatewayRole, Reading};
use gridsec_core::lsss::AccessTree;
use gridsec_core::pairing::PairingContext;

/// Random binary AND/OR tree with `leaves` leaves drawn from `pool`.
pub fn random_tree(rng: &mut impl Rng, pool: &[String], leaves: usize) -> AccessTree {
    if leaves == 1 {
        return AccessTree::Leaf(pool.choose(rng).expect("non-empty pool").clone());
    }
    let split = rng.gen_range(1..leaves);
    let l = Box::new(random_tree(rng, pool, split));
    let r = Box::new(random_tree(rng, pool, leaves - split));
    if rng.gen_bool(0.5) {
        AccessTree::And(l, r)
    } else {
        AccessTree::Or(l, r)
    }
}

pub fn pool(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("at{i}")).collect()
}

/// The subset of `pool` selected by the bits of `mask`.
pub fn subset(pool: &[String], mask: u32) -> BTreeSet<String> {
    pool.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, a)| a.clone())
        .collect()
}

/// Random subset, each attribute kept with probability `p`.
pub fn random_subset(rng: &mut impl Rng, pool: &[String], p: f64) -> BTreeSet<String> {
    pool.iter().filter(|_| rng.gen_bool(p)).cloned().collect()
}

/// Several KDCs sharing an attribute pool round-robin.
pub struct Authorities {
    pub kdcs: Vec<KdcKeyring>,
    pub directory: PublicDirectory,
    owner: BTreeMap<String, usize>,
}

impl Authorities {
    pub fn new(ctx: &PairingContext, pool: &[String], kdc_count: usize, rng: &mut impl Rng) -> Self {
        let mut split: Vec<Vec<&str>> = vec![Vec::new(); kdc_count];
        let mut owner = BTreeMap::new();
        for (i, a) in pool.iter().enumerate() {
            split[i % kdc_count].push(a);
            owner.insert(a.clone(), i % kdc_count);
        }
        let kdcs: Vec<KdcKeyring> = split
            .iter()
            .enumerate()
            .map(|(i, attrs)| abe::kdc_setup(ctx, &format!("kdc{i}"), attrs, rng).unwrap())
            .collect();
        let directory = abe::public_directory(&kdcs).unwrap();
        Self { kdcs, directory, owner }
    }

    pub fn keyring(&self, ctx: &PairingContext, user: &str, attrs: &BTreeSet<String>) -> UserKeyring {
        let mut k = UserKeyring::new(user);
        for a in attrs {
            let sk = self.kdcs[self.owner[a]].issue_key(ctx, user, a).unwrap();
            k.add_key(ctx, &self.directory, a, sk).unwrap();
        }
        k
    }
}

/// A random pipeline: NAN root, up to two BAN levels, HAN leaves, with
/// readings spread over the leaves.
pub struct Pipeline {
    pub topology: AggregationTopology,
    pub readings: Vec<Reading>,
}

pub const TAG_POOL: [&[&str]; 6] = [
    &["individual", "city"],
    &["industrial", "rural"],
    &["solar"],
    &["wind", "industrial"],
    &["commercial", "suburb", "peak"],
    &["residential"],
];

pub fn random_pipeline(rng: &mut impl Rng, max_meters: usize, max_reading: u64) -> Pipeline {
    let levels = rng.gen_range(2..=4usize);
    let mut nodes = vec![GatewayNode::new("nan", GatewayRole::Nan, None)];
    let mut frontier = vec!["nan".to_owned()];
    for level in 1..levels - 1 {
        let mut next = Vec::new();
        for parent in &frontier {
            for k in 0..rng.gen_range(1..=3) {
                let id = format!("{parent}.b{level}{k}");
                nodes.push(GatewayNode::new(&id, GatewayRole::Ban, Some(parent)));
                next.push(id);
            }
        }
        frontier = next;
    }
    let mut leaves = Vec::new();
    for parent in &frontier {
        for k in 0..rng.gen_range(1..=4) {
            let id = format!("{parent}.h{k}");
            nodes.push(GatewayNode::new(&id, GatewayRole::Han, Some(parent)));
            leaves.push(id);
        }
    }
    let topology = AggregationTopology::new(nodes).expect("well-formed topology");

    let tag_count = rng.gen_range(1..=4);
    let tags: Vec<AttributeTag> = TAG_POOL
        .choose_multiple(rng, tag_count)
        .map(|t| AttributeTag::new(t.iter().copied()).unwrap())
        .collect();
    let meters = rng.gen_range(0..=max_meters);
    let readings = (0..meters)
        .map(|_| Reading {
            node: leaves.choose(rng).unwrap().clone(),
            tag: tags.choose(rng).unwrap().clone(),
            value: rng.gen_range(0..max_reading),
        })
        .collect();
    Pipeline { topology, readings }
}

/// Per-tag plaintext sums.
pub fn oracle_sums(readings: &[Reading]) -> BTreeMap<AttributeTag, u128> {
    let mut sums = BTreeMap::new();
    for r in readings {
        *sums.entry(r.tag.clone()).or_insert(0) += u128::from(r.value);
    }
    sums
}
