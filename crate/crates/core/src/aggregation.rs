// SPDX-License-Identifier: Apache-2.0

//! Attribute-tagged meter packets and the HAN -> BAN -> NAN -> RTU
//! aggregation pipeline.
//!
//! Gateways multiply ciphertexts that carry the same attribute tag and never
//! see the RTU's secret key: every gateway-side function takes only the
//! public key.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{self, DecodeError, Reader};
use crate::paillier::{self, PaillierCiphertext, PaillierError, PaillierPublicKey, PaillierSecretKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AggregationError {
    #[error("attribute tag must not be empty")]
    EmptyTag,
    #[error("attribute identifier must not be blank")]
    BlankAttribute,
    #[error("duplicate attribute `{0}` in tag")]
    DuplicateAttribute(String),
    #[error("reading does not fit below the modulus N")]
    ReadingOutOfRange,
    #[error("malformed topology: {0}")]
    MalformedTopology(String),
    #[error("reading attached to `{0}`, which is not a HAN leaf")]
    ReadingNotOnLeaf(String),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// The attribute field `f` of a packet: a canonical (trimmed, sorted,
/// duplicate-free) non-empty list of attribute identifiers.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct AttributeTag(Vec<String>);

impl AttributeTag {
    pub fn new<I, S>(attrs: I) -> Result<Self, AggregationError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        for a in attrs {
            let a = a.as_ref().trim();
            if a.is_empty() {
                return Err(AggregationError::BlankAttribute);
            }
            if !seen.insert(a.to_owned()) {
                return Err(AggregationError::DuplicateAttribute(a.to_owned()));
            }
        }
        if seen.is_empty() {
            return Err(AggregationError::EmptyTag);
        }
        Ok(Self(seen.into_iter().collect()))
    }

    pub fn attributes(&self) -> &[String] {
        &self.0
    }

    /// 2-byte count, then per attribute a 2-byte length and UTF-8 bytes.
    pub fn encode(&self, out: &mut Vec<u8>) {
        encoding::put_u16(out, u16::try_from(self.0.len()).expect("too many attributes"));
        for a in &self.0 {
            encoding::put_u16(out, u16::try_from(a.len()).expect("attribute too long"));
            out.extend_from_slice(a.as_bytes());
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, AggregationError> {
        let count = r.u16()?;
        let mut attrs = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = r.u16()? as usize;
            attrs.push(r.utf8(len, "attribute")?);
        }
        let tag = Self::new(&attrs)?;
        if tag.0 != attrs {
            return Err(DecodeError::Invalid {
                field: "tag",
                reason: "attributes are not in canonical order".into(),
            }
            .into());
        }
        Ok(tag)
    }
}

impl TryFrom<Vec<String>> for AttributeTag {
    type Error = AggregationError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<AttributeTag> for Vec<String> {
    fn from(t: AttributeTag) -> Self {
        t.0
    }
}

impl fmt::Debug for AttributeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AttributeTag({})", self)
    }
}

impl fmt::Display for AttributeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.join(","))
    }
}

/// `f || E(P)`: the aggregation wire unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeterPacket {
    pub tag: AttributeTag,
    pub ciphertext: PaillierCiphertext,
}

impl MeterPacket {
    /// `tag-block || enc(c)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.tag.encode(&mut out);
        out.extend_from_slice(&self.ciphertext.to_bytes());
        out
    }

    pub fn from_bytes(pk: &PaillierPublicKey, bytes: &[u8]) -> Result<Self, AggregationError> {
        let mut r = Reader::new(bytes);
        let tag = AttributeTag::decode(&mut r)?;
        let value = r.uint()?;
        r.finish()?;
        let ciphertext = PaillierCiphertext::from_value(pk, value)?;
        Ok(Self { tag, ciphertext })
    }
}

/// Encrypts one meter reading (watt-hours) under the RTU key.
pub fn make_packet<R: Rng + ?Sized>(
    pk: &PaillierPublicKey,
    tag: AttributeTag,
    reading: u64,
    rng: &mut R,
) -> Result<MeterPacket, AggregationError> {
    let reading = BigUint::from(reading);
    if &reading >= pk.modulus() {
        return Err(AggregationError::ReadingOutOfRange);
    }
    let ciphertext = paillier::encrypt(pk, &reading, rng)?;
    Ok(MeterPacket { tag, ciphertext })
}

/// One gateway step: multiplies together all ciphertexts sharing a tag.
///
/// Output holds one packet per distinct tag, in canonical tag order. A tag
/// seen once is forwarded unchanged (no re-randomization).
pub fn gateway_aggregate(
    packets: &[MeterPacket],
    pk: &PaillierPublicKey,
) -> Result<Vec<MeterPacket>, AggregationError> {
    let mut groups: BTreeMap<&AttributeTag, PaillierCiphertext> = BTreeMap::new();
    for p in packets {
        pk.check_domain(&p.ciphertext)?;
        match groups.get_mut(&p.tag) {
            Some(acc) => *acc = paillier::add(pk, acc, &p.ciphertext)?,
            None => {
                groups.insert(&p.tag, p.ciphertext.clone());
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(tag, ciphertext)| MeterPacket {
            tag: tag.clone(),
            ciphertext,
        })
        .collect())
}

/// RTU side: decrypts an aggregate packet.
pub fn rtu_open(
    sk: &PaillierSecretKey,
    pk: &PaillierPublicKey,
    packet: &MeterPacket,
) -> Result<(AttributeTag, BigUint), AggregationError> {
    let value = paillier::decrypt(sk, pk, &packet.ciphertext)?;
    Ok((packet.tag.clone(), value))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GatewayRole {
    Han,
    Ban,
    Nan,
}

impl FromStr for GatewayRole {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "HAN" => Ok(Self::Han),
            "BAN" => Ok(Self::Ban),
            "NAN" => Ok(Self::Nan),
            other => Err(AggregationError::MalformedTopology(format!(
                "unknown gateway role `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayNode {
    pub id: String,
    pub role: GatewayRole,
    pub parent: Option<String>,
}

impl GatewayNode {
    pub fn new(id: impl Into<String>, role: GatewayRole, parent: Option<&str>) -> Self {
        Self {
            id: id.into(),
            role,
            parent: parent.map(str::to_owned),
        }
    }
}

/// A rooted gateway tree with a single NAN root.
///
/// Roles never decrease from child to parent, leaves are HAN gateways, and
/// only the root is a NAN gateway, so every leaf-to-root path reads
/// HAN.. BAN.. NAN.
#[derive(Clone, Debug)]
pub struct AggregationTopology {
    nodes: BTreeMap<String, GatewayNode>,
    children: BTreeMap<String, Vec<String>>,
    root: String,
}

impl AggregationTopology {
    pub fn new(nodes: Vec<GatewayNode>) -> Result<Self, AggregationError> {
        let bad = |m: String| AggregationError::MalformedTopology(m);
        let mut map = BTreeMap::new();
        for n in nodes {
            if n.id.trim().is_empty() {
                return Err(bad("node id must not be blank".into()));
            }
            if let Some(prev) = map.insert(n.id.clone(), n) {
                return Err(bad(format!("duplicate node id `{}`", prev.id)));
            }
        }
        let roots: Vec<&GatewayNode> = map.values().filter(|n| n.parent.is_none()).collect();
        let root = match roots.as_slice() {
            [r] => (*r).clone(),
            [] => return Err(bad("no root node".into())),
            _ => return Err(bad(format!("{} root nodes, expected one", roots.len()))),
        };
        if root.role != GatewayRole::Nan {
            return Err(bad(format!("root `{}` is not a NAN gateway", root.id)));
        }

        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for n in map.values() {
            let Some(parent_id) = &n.parent else { continue };
            let parent = map
                .get(parent_id)
                .ok_or_else(|| bad(format!("`{}` has unknown parent `{parent_id}`", n.id)))?;
            if n.role == GatewayRole::Nan {
                return Err(bad(format!("NAN gateway `{}` is not the root", n.id)));
            }
            if parent.role < n.role {
                return Err(bad(format!(
                    "{:?} `{}` cannot report to {:?} `{}`",
                    n.role, n.id, parent.role, parent.id
                )));
            }
            children.entry(parent_id.clone()).or_default().push(n.id.clone());
        }

        // every node must reach the root without revisiting
        for start in map.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start.as_str();
            while let Some(p) = map[cur].parent.as_deref() {
                if !seen.insert(cur) {
                    return Err(bad(format!("cycle through `{cur}`")));
                }
                cur = p;
            }
        }

        for n in map.values() {
            let is_leaf = !children.contains_key(&n.id);
            if is_leaf && n.role != GatewayRole::Han && n.id != root.id {
                return Err(bad(format!("leaf `{}` is not a HAN gateway", n.id)));
            }
        }

        Ok(Self {
            nodes: map,
            children,
            root: root.id,
        })
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn node(&self, id: &str) -> Option<&GatewayNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GatewayNode> {
        self.nodes.values()
    }

    pub fn children(&self, id: &str) -> &[String] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_han_leaf(&self, id: &str) -> bool {
        self.nodes
            .get(id)
            .is_some_and(|n| n.role == GatewayRole::Han && self.children(id).is_empty())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &AggregationTopology, id: &str) -> usize {
            1 + t.children(id).iter().map(|c| walk(t, c)).max().unwrap_or(0)
        }
        walk(self, &self.root)
    }
}

/// A meter reading attached to a HAN gateway.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub node: String,
    pub tag: AttributeTag,
    pub value: u64,
}

/// Encrypts every reading at its HAN gateway and folds
/// [`gateway_aggregate`] up the tree. Returns the packets leaving the NAN
/// root for the RTU.
pub fn run_pipeline<R: Rng + ?Sized>(
    topology: &AggregationTopology,
    readings: &[Reading],
    pk: &PaillierPublicKey,
    rng: &mut R,
) -> Result<Vec<MeterPacket>, AggregationError> {
    let mut at_leaf: BTreeMap<&str, Vec<MeterPacket>> = BTreeMap::new();
    for r in readings {
        if !topology.is_han_leaf(&r.node) {
            return Err(AggregationError::ReadingNotOnLeaf(r.node.clone()));
        }
        let packet = make_packet(pk, r.tag.clone(), r.value, rng)?;
        at_leaf.entry(r.node.as_str()).or_default().push(packet);
    }
    aggregate_tree(topology, &at_leaf, pk)
}

/// The gateway-only half of the pipeline: aggregates already-encrypted
/// packets from the leaves upward.
pub fn aggregate_tree(
    topology: &AggregationTopology,
    at_leaf: &BTreeMap<&str, Vec<MeterPacket>>,
    pk: &PaillierPublicKey,
) -> Result<Vec<MeterPacket>, AggregationError> {
    fn visit(
        t: &AggregationTopology,
        id: &str,
        at_leaf: &BTreeMap<&str, Vec<MeterPacket>>,
        pk: &PaillierPublicKey,
    ) -> Result<Vec<MeterPacket>, AggregationError> {
        let mut inbound: Vec<MeterPacket> = at_leaf.get(id).cloned().unwrap_or_default();
        for child in t.children(id) {
            inbound.extend(visit(t, child, at_leaf, pk)?);
        }
        gateway_aggregate(&inbound, pk)
    }
    visit(topology, topology.root(), at_leaf, pk)
}

/// True when `max_reading * meter_count` reaches at least half of `N`, i.e.
/// an aggregate could be close to wrapping modulo `N`.
pub fn headroom_warning(pk: &PaillierPublicKey, max_reading: u64, meter_count: u64) -> bool {
    let bound = BigUint::from(max_reading) * BigUint::from(meter_count);
    bound * 2u8 >= *pk.modulus()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paillier::keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn keys() -> (PaillierPublicKey, PaillierSecretKey, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let (pk, sk) = keygen(128, &mut rng).unwrap();
        (pk, sk, rng)
    }

    fn tag(attrs: &[&str]) -> AttributeTag {
        AttributeTag::new(attrs).unwrap()
    }

    #[test]
    fn tags_are_canonical() {
        let a = tag(&[" solar", "residential "]);
        let b = tag(&["residential", "solar"]);
        assert_eq!(a, b);
        assert_eq!(a.attributes(), ["residential", "solar"]);
        let (mut ea, mut eb) = (Vec::new(), Vec::new());
        a.encode(&mut ea);
        b.encode(&mut eb);
        assert_eq!(ea, eb);
        assert_eq!(a.to_string(), "{residential,solar}");
    }

    #[test]
    fn tag_rejects_empty_blank_and_duplicates() {
        assert_eq!(AttributeTag::new(Vec::<String>::new()).unwrap_err(), AggregationError::EmptyTag);
        assert_eq!(AttributeTag::new(["  "]).unwrap_err(), AggregationError::BlankAttribute);
        assert_eq!(
            AttributeTag::new(["a", " a"]).unwrap_err(),
            AggregationError::DuplicateAttribute("a".into())
        );
    }

    #[test]
    fn packet_round_trips() {
        let (pk, sk, mut rng) = keys();
        for reading in [0u64, 1500] {
            let p = make_packet(&pk, tag(&["residential", "fossil"]), reading, &mut rng).unwrap();
            assert_eq!(rtu_open(&sk, &pk, &p).unwrap().1, BigUint::from(reading));
            let bytes = p.to_bytes();
            assert_eq!(&bytes[..2], &[0, 2]);
            assert_eq!(MeterPacket::from_bytes(&pk, &bytes).unwrap(), p);
        }
    }

    #[test]
    fn packet_decode_rejects_non_canonical_tags() {
        let (pk, _, mut rng) = keys();
        let p = make_packet(&pk, tag(&["a", "b"]), 1, &mut rng).unwrap();
        let mut bytes = Vec::new();
        encoding::put_u16(&mut bytes, 2);
        for a in ["b", "a"] {
            encoding::put_u16(&mut bytes, 1);
            bytes.extend_from_slice(a.as_bytes());
        }
        bytes.extend_from_slice(&p.ciphertext.to_bytes());
        assert!(MeterPacket::from_bytes(&pk, &bytes).is_err());
    }

    #[test]
    fn gateway_groups_by_tag() {
        let (pk, sk, mut rng) = keys();
        let a = tag(&["a"]);
        let b = tag(&["b"]);
        let packets = vec![
            make_packet(&pk, a.clone(), 10, &mut rng).unwrap(),
            make_packet(&pk, b.clone(), 7, &mut rng).unwrap(),
            make_packet(&pk, a.clone(), 5, &mut rng).unwrap(),
        ];
        let out = gateway_aggregate(&packets, &pk).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(rtu_open(&sk, &pk, &out[0]).unwrap(), (a, BigUint::from(15u8)));
        assert_eq!(rtu_open(&sk, &pk, &out[1]).unwrap(), (b, BigUint::from(7u8)));
        // product, not re-encryption
        let expected = (packets[0].ciphertext.value() * packets[2].ciphertext.value())
            % pk.modulus_squared();
        assert_eq!(out[0].ciphertext.value(), &expected);
        // singleton forwarded as-is
        assert_eq!(out[1].ciphertext, packets[1].ciphertext);
    }

    #[test]
    fn gateway_empty_input() {
        let (pk, _, _) = keys();
        assert!(gateway_aggregate(&[], &pk).unwrap().is_empty());
    }

    #[test]
    fn gateway_rejects_foreign_ciphertexts() {
        let (pk, _, mut rng) = keys();
        let (other, _) = keygen(128, &mut rng).unwrap();
        let foreign = make_packet(&other, tag(&["a"]), 1, &mut rng).unwrap();
        assert_eq!(
            gateway_aggregate(std::slice::from_ref(&foreign), &pk).unwrap_err(),
            AggregationError::Paillier(PaillierError::ModulusMismatch)
        );
        let local = make_packet(&pk, tag(&["a"]), 1, &mut rng).unwrap();
        assert!(gateway_aggregate(&[local, foreign], &pk).is_err());
    }

    #[test]
    fn reading_must_fit_modulus() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (pk, _) = keygen(16, &mut rng).unwrap();
        assert_eq!(
            make_packet(&pk, tag(&["a"]), u64::MAX, &mut rng).unwrap_err(),
            AggregationError::ReadingOutOfRange
        );
    }

    fn two_building_topology() -> AggregationTopology {
        use GatewayRole::*;
        AggregationTopology::new(vec![
            GatewayNode::new("nan", Nan, None),
            GatewayNode::new("ban1", Ban, Some("nan")),
            GatewayNode::new("ban2", Ban, Some("nan")),
            GatewayNode::new("han1", Han, Some("ban1")),
            GatewayNode::new("han2", Han, Some("ban1")),
            GatewayNode::new("han3", Han, Some("ban2")),
            GatewayNode::new("han4", Han, Some("ban2")),
            GatewayNode::new("han5", Han, Some("ban2")),
        ])
        .unwrap()
    }

    #[test]
    fn five_meter_example() {
        let (pk, sk, mut rng) = keys();
        let t = tag(&["residential"]);
        let values = [120u64, 340, 95, 610, 77];
        let readings: Vec<Reading> = values
            .iter()
            .enumerate()
            .map(|(i, v)| Reading {
                node: format!("han{}", i + 1),
                tag: t.clone(),
                value: *v,
            })
            .collect();
        let topo = two_building_topology();
        assert_eq!(topo.depth(), 3);
        let out = run_pipeline(&topo, &readings, &pk, &mut rng).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(rtu_open(&sk, &pk, &out[0]).unwrap().1, BigUint::from(values.iter().sum::<u64>()));
    }

    #[test]
    fn single_han_identity_pipeline() {
        use GatewayRole::*;
        let (pk, sk, mut rng) = keys();
        let topo = AggregationTopology::new(vec![
            GatewayNode::new("nan", Nan, None),
            GatewayNode::new("han", Han, Some("nan")),
        ])
        .unwrap();
        let r = Reading { node: "han".into(), tag: tag(&["x"]), value: 999 };
        let out = run_pipeline(&topo, &[r], &pk, &mut rng).unwrap();
        assert_eq!(rtu_open(&sk, &pk, &out[0]).unwrap().1, BigUint::from(999u32));
    }

    #[test]
    fn readings_only_on_han_leaves() {
        let (pk, _, mut rng) = keys();
        let r = Reading { node: "ban1".into(), tag: tag(&["x"]), value: 1 };
        assert_eq!(
            run_pipeline(&two_building_topology(), &[r], &pk, &mut rng).unwrap_err(),
            AggregationError::ReadingNotOnLeaf("ban1".into())
        );
    }

    #[test]
    fn malformed_topologies_are_rejected() {
        use GatewayRole::*;
        let cases = vec![
            vec![],
            vec![GatewayNode::new("ban", Ban, None)],
            vec![GatewayNode::new("n1", Nan, None), GatewayNode::new("n2", Nan, None)],
            vec![
                GatewayNode::new("n", Nan, None),
                GatewayNode::new("h", Han, Some("missing")),
            ],
            vec![
                GatewayNode::new("n", Nan, None),
                GatewayNode::new("h", Han, Some("n")),
                GatewayNode::new("b", Ban, Some("h")),
            ],
            vec![
                GatewayNode::new("n", Nan, None),
                GatewayNode::new("b", Ban, Some("n")),
            ],
            vec![
                GatewayNode::new("n", Nan, None),
                GatewayNode::new("n", Han, Some("n")),
            ],
            vec![
                GatewayNode::new("n", Nan, None),
                GatewayNode::new("a", Han, Some("b")),
                GatewayNode::new("b", Han, Some("a")),
            ],
        ];
        for nodes in cases {
            assert!(
                matches!(AggregationTopology::new(nodes.clone()), Err(AggregationError::MalformedTopology(_))),
                "{nodes:?}"
            );
        }
    }

    #[test]
    fn headroom() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (pk, _) = keygen(32, &mut rng).unwrap();
        assert!(!headroom_warning(&pk, 1_000, 100));
        assert!(headroom_warning(&pk, u32::MAX as u64, 4));
    }
}
