//! Cluster graph specifications: chains, the parametric multi-rail family,
//! and neighbor queries. Nodes are numbered from 1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const INPUT_ALPHA: &str = "alpha";
pub const INPUT_BETA: &str = "beta";

/// A cluster topology plus the attachment points used by teleportation:
/// which nodes the two inputs couple to and which pair of nodes carries the
/// teleported output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    nbrs: Vec<BTreeSet<usize>>,
    input_attach: BTreeMap<String, usize>,
    output_nodes: Option<(usize, usize)>,
}

impl ClusterSpec {
    /// Bare topology with no attachments. Edges are unordered, self-loops and
    /// out-of-range endpoints are rejected, duplicates collapse.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidTopology("node count must be positive".into()));
        }
        let mut set = BTreeSet::new();
        let mut nbrs = vec![BTreeSet::new(); node_count];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidTopology(format!("self-loop at node {a}")));
            }
            if !(1..=node_count).contains(&a) || !(1..=node_count).contains(&b) {
                return Err(Error::InvalidTopology(format!(
                    "edge ({a},{b}) outside 1..={node_count}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
            nbrs[a - 1].insert(b);
            nbrs[b - 1].insert(a);
        }
        Ok(Self {
            node_count,
            edges: set,
            nbrs,
            input_attach: BTreeMap::new(),
            output_nodes: None,
        })
    }

    pub fn with_inputs(mut self, alpha: usize, beta: usize) -> Result<Self> {
        for node in [alpha, beta] {
            if !(1..=self.node_count).contains(&node) {
                return Err(Error::InvalidTopology(format!(
                    "input attachment {node} outside 1..={}",
                    self.node_count
                )));
            }
        }
        self.input_attach.insert(INPUT_ALPHA.into(), alpha);
        self.input_attach.insert(INPUT_BETA.into(), beta);
        Ok(self)
    }

    pub fn with_outputs(mut self, a: usize, b: usize) -> Result<Self> {
        for node in [a, b] {
            if !(1..=self.node_count).contains(&node) {
                return Err(Error::InvalidTopology(format!(
                    "output node {node} outside 1..={}",
                    self.node_count
                )));
            }
        }
        self.output_nodes = Some((a, b));
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, k: usize) -> Result<&BTreeSet<usize>> {
        self.nbrs
            .get(k - 1)
            .ok_or_else(|| Error::InvalidTopology(format!("node {k} outside 1..={}", self.node_count)))
    }

    pub fn degree(&self, k: usize) -> Result<usize> {
        Ok(self.neighbors(k)?.len())
    }

    pub fn input_node(&self, label: &str) -> Result<usize> {
        self.input_attach
            .get(label)
            .copied()
            .ok_or_else(|| Error::InvalidTopology(format!("no input labeled '{label}'")))
    }

    pub fn inputs(&self) -> &BTreeMap<String, usize> {
        &self.input_attach
    }

    pub fn output_nodes(&self) -> Result<(usize, usize)> {
        self.output_nodes
            .ok_or_else(|| Error::InvalidTopology("no output nodes attached".into()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SpecJson::from(self)).expect("spec serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let s: SpecJson = serde_json::from_value(v.clone())?;
        s.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    inputs: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outputs: Option<(usize, usize)>,
}

impl From<&ClusterSpec> for SpecJson {
    fn from(s: &ClusterSpec) -> Self {
        Self {
            nodes: s.node_count,
            edges: s.edges.iter().copied().collect(),
            inputs: s.input_attach.clone(),
            outputs: s.output_nodes,
        }
    }
}

impl TryFrom<SpecJson> for ClusterSpec {
    type Error = Error;

    fn try_from(s: SpecJson) -> Result<Self> {
        let mut spec = ClusterSpec::new(s.nodes, &s.edges)?;
        if let (Some(&a), Some(&b)) = (s.inputs.get(INPUT_ALPHA), s.inputs.get(INPUT_BETA)) {
            spec = spec.with_inputs(a, b)?;
        }
        if let Some((a, b)) = s.outputs {
            spec = spec.with_outputs(a, b)?;
        }
        Ok(spec)
    }
}

/// Path graph 1-2-...-M. For M >= 2 the inputs attach to the middle pair
/// (ceil(M/2), ceil(M/2)+1) and the outputs are the two ends (1, M); a single
/// node gets no attachments.
pub fn linear_chain(m: usize) -> Result<ClusterSpec> {
    let edges: Vec<_> = (1..m).map(|k| (k, k + 1)).collect();
    let spec = ClusterSpec::new(m, &edges)?;
    if m < 2 {
        return Ok(spec);
    }
    let mid = m.div_ceil(2);
    spec.with_inputs(mid, mid + 1)?.with_outputs(1, m)
}

/// Multi-rail teleportation topology with N parallel mid-rail nodes per arm.
///
/// M = 2N+4 nodes: output node 1 fans out to rails 2..=N+1, which all meet the
/// input hub N+2; hubs N+2 and N+3 are joined; hub N+3 fans out to rails
/// N+4..=2N+3, which all meet output node 2N+4. Inputs attach at the hubs.
pub fn nrail(n: usize) -> Result<ClusterSpec> {
    if n < 1 {
        return Err(Error::InvalidRails(n));
    }
    let m = 2 * n + 4;
    let mut edges = Vec::with_capacity(4 * n + 1);
    for k in 2..=n + 1 {
        edges.push((1, k));
        edges.push((k, n + 2));
    }
    edges.push((n + 2, n + 3));
    for k in n + 4..=2 * n + 3 {
        edges.push((n + 3, k));
        edges.push((k, 2 * n + 4));
    }
    ClusterSpec::new(m, &edges)?
        .with_inputs(n + 2, n + 3)?
        .with_outputs(1, m)
}

/// Mid-rail node ranges of the two arms of an N-rail spec: (2..=N+1, N+4..=2N+3).
pub fn nrail_arms(n: usize) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
    (2..=n + 1, n + 4..=2 * n + 3)
}

/// Number of common neighbors of k and l; the degree of k when k == l.
pub fn common_neighbors(spec: &ClusterSpec, k: usize, l: usize) -> Result<usize> {
    if k == l {
        return spec.degree(k);
    }
    let nk = spec.neighbors(k)?;
    let nl = spec.neighbors(l)?;
    Ok(nk.intersection(nl).count())
}
