//! Decoding: matching graphs built from the circuit's error model, a weighted
//! union-find decoder, an exact minimum-weight decoder, a lookup table and the
//! logical-error-rate driver.
//!
//! X- and Z-type detectors are decoded independently. Every fault's signature
//! is split by detector basis; each part must fire at most two detectors and
//! becomes an edge (one detector plus a private virtual boundary node when it
//! fires only one).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::circuits::{CircuitIR, Pauli};
use crate::error::{Error, Result};
use crate::sim::{self, CompiledCircuit, Fault, HammingCounter, HammingProfile, Signature};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub u: u32,
    /// A detector, or a virtual boundary node (index ≥ `n_detectors`).
    pub v: u32,
    pub p: f64,
    pub weight: f64,
    pub observables: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingGraph {
    pub n_detectors: usize,
    pub n_nodes: usize,
    pub n_observables: usize,
    pub edges: Vec<GraphEdge>,
    pub adjacency: Vec<Vec<u32>>,
    pub detector_basis: Vec<Pauli>,
    /// Probability mass of faults that flip an observable without firing any
    /// detector of its basis.
    pub undetectable: f64,
}

fn edge_weight(p: f64) -> f64 {
    let p = p.clamp(1e-300, 0.5 - 1e-12);
    ((1.0 - p) / p).ln()
}

impl MatchingGraph {
    pub fn is_boundary(&self, node: u32) -> bool {
        node as usize >= self.n_detectors
    }

    fn from_edges(
        n_detectors: usize,
        n_observables: usize,
        detector_basis: Vec<Pauli>,
        raw: Vec<(u32, Option<u32>, f64, u64)>,
        undetectable: f64,
    ) -> Self {
        let mut edges = Vec::with_capacity(raw.len());
        let mut n_nodes = n_detectors;
        for (u, v, p, obs) in raw {
            let v = v.unwrap_or_else(|| {
                n_nodes += 1;
                (n_nodes - 1) as u32
            });
            edges.push(GraphEdge {
                u,
                v,
                p,
                weight: edge_weight(p),
                observables: obs,
            });
        }
        let mut adjacency = vec![Vec::new(); n_nodes];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.u as usize].push(i as u32);
            adjacency[e.v as usize].push(i as u32);
        }
        Self {
            n_detectors,
            n_nodes,
            n_observables,
            edges,
            adjacency,
            detector_basis,
            undetectable,
        }
    }

    /// The same graph with every edge weight set to 1 (pure fault counting).
    pub fn with_uniform_weights(&self) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.weight = 1.0;
        }
        g
    }

    /// Syndrome and observable mask of a set of edges.
    pub fn syndrome_of(&self, edges: &[usize]) -> (Vec<u32>, u64) {
        let mut fired = HashMap::new();
        let mut obs = 0;
        for &i in edges {
            let e = &self.edges[i];
            obs ^= e.observables;
            for n in [e.u, e.v] {
                if !self.is_boundary(n) {
                    *fired.entry(n).or_insert(false) ^= true;
                }
            }
        }
        let mut s: Vec<u32> = fired.into_iter().filter(|&(_, f)| f).map(|(n, _)| n).collect();
        s.sort_unstable();
        (s, obs)
    }

    /// Edge connecting exactly the given detectors, if any.
    pub fn find_edge(&self, dets: &[u32]) -> Option<usize> {
        match *dets {
            [a] => self.adjacency[a as usize]
                .iter()
                .map(|&e| e as usize)
                .find(|&e| self.is_boundary(self.edges[e].v)),
            [a, b] => self.adjacency[a as usize].iter().map(|&e| e as usize).find(|&e| {
                let ed = &self.edges[e];
                (ed.u == a && ed.v == b) || (ed.u == b && ed.v == a)
            }),
            _ => None,
        }
    }
}

fn basis_index(p: Pauli) -> usize {
    match p {
        Pauli::X => 0,
        Pauli::Z => 1,
    }
}

/// Builds the matching graph of an annotated circuit.
pub fn build_graph(circuit: &CircuitIR) -> Result<MatchingGraph> {
    let compiled = sim::compile(circuit)?;
    build_graph_compiled(&compiled)
}

pub fn build_graph_compiled(c: &CompiledCircuit) -> Result<MatchingGraph> {
    let terms = c.channel_terms();
    // unit faults, deduplicated
    let mut unit_index: HashMap<(usize, u32, bool), usize> = HashMap::new();
    let mut units: Vec<Fault> = Vec::new();
    for (pos, ts) in &terms {
        for t in ts {
            for &(q, x, z) in &t.paulis[..t.n] {
                for (is_x, on) in [(true, x), (false, z)] {
                    if on {
                        unit_index.entry((*pos, q, is_x)).or_insert_with(|| {
                            units.push(Fault {
                                position: *pos,
                                qubit: q,
                                x: is_x,
                                z: !is_x,
                            });
                            units.len() - 1
                        });
                    }
                }
            }
        }
    }
    let sigs = c.propagate_faults(&units);
    let mut obs_mask = [0u64; 2];
    for (i, &b) in c.observable_basis.iter().enumerate() {
        obs_mask[basis_index(b)] |= 1 << i;
    }

    #[derive(Default)]
    struct Acc {
        p: f64,
        by_mask: Vec<(u64, f64)>,
    }
    let mut acc: HashMap<(u32, Option<u32>), Acc> = HashMap::new();
    let mut undetectable = 0.0;
    let mut combined = Signature::default();
    let mut parts: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
    for (pos, ts) in &terms {
        for t in ts {
            combined.detectors.clear();
            combined.observables = 0;
            for &(q, x, z) in &t.paulis[..t.n] {
                for (is_x, on) in [(true, x), (false, z)] {
                    if on {
                        let s = &sigs[unit_index[&(*pos, q, is_x)]];
                        combined.observables ^= s.observables;
                        combined.detectors.extend_from_slice(&s.detectors);
                    }
                }
            }
            // XOR of sorted lists: keep detectors appearing an odd number of times
            combined.detectors.sort_unstable();
            parts[0].clear();
            parts[1].clear();
            let ds = &combined.detectors;
            let mut i = 0;
            while i < ds.len() {
                let mut j = i;
                while j < ds.len() && ds[j] == ds[i] {
                    j += 1;
                }
                if (j - i) % 2 == 1 {
                    parts[basis_index(c.detector_basis[ds[i] as usize])].push(ds[i]);
                }
                i = j;
            }
            for b in 0..2 {
                let obs = combined.observables & obs_mask[b];
                let key = match parts[b][..] {
                    [] => {
                        if obs != 0 {
                            undetectable += t.p;
                        }
                        continue;
                    }
                    [a] => (a, None),
                    [a, bb] => (a, Some(bb)),
                    _ => {
                        return Err(Error::UnsupportedCircuit(format!(
                            "a fault at gate {pos} fires {} detectors of one basis",
                            parts[b].len()
                        )))
                    }
                };
                let a = acc.entry(key).or_default();
                a.p = a.p * (1.0 - t.p) + t.p * (1.0 - a.p);
                match a.by_mask.iter_mut().find(|(m, _)| *m == obs) {
                    Some((_, p)) => *p += t.p,
                    None => a.by_mask.push((obs, t.p)),
                }
            }
        }
    }
    let mut keys: Vec<_> = acc.keys().copied().collect();
    keys.sort_unstable();
    let raw = keys
        .into_iter()
        .map(|k| {
            let a = &acc[&k];
            let mask = a
                .by_mask
                .iter()
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
                .map(|m| m.0)
                .unwrap_or(0);
            (k.0, k.1, a.p, mask)
        })
        .collect();
    Ok(MatchingGraph::from_edges(
        c.n_detectors(),
        c.n_observables(),
        c.detector_basis.clone(),
        raw,
        undetectable,
    ))
}

// ---------------------------------------------------------------------------
// union-find

const WEIGHT_SCALE: f64 = 64.0;

/// Weighted union-find decoder. Holds scratch space; create one per thread.
pub struct UnionFind<'g> {
    g: &'g MatchingGraph,
    wint: Vec<u32>,
    parent: Vec<u32>,
    odd: Vec<bool>,
    boundary: Vec<bool>,
    members: Vec<Vec<u32>>,
    defect: Vec<bool>,
    touched: Vec<bool>,
    touched_nodes: Vec<u32>,
    growth: Vec<u32>,
    rate: Vec<u32>,
    touched_edges: Vec<u32>,
    grown: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    // peeling
    tree_adj: Vec<Vec<u32>>,
    parent_edge: Vec<u32>,
    visited: Vec<bool>,
}

impl<'g> UnionFind<'g> {
    pub fn new(g: &'g MatchingGraph) -> Self {
        let n = g.n_nodes;
        let m = g.edges.len();
        Self {
            g,
            wint: g
                .edges
                .iter()
                .map(|e| ((e.weight * WEIGHT_SCALE).round() as u32).max(1))
                .collect(),
            parent: (0..n as u32).collect(),
            odd: vec![false; n],
            boundary: (0..n).map(|i| i >= g.n_detectors).collect(),
            members: vec![Vec::new(); n],
            defect: vec![false; n],
            touched: vec![false; n],
            touched_nodes: Vec::new(),
            growth: vec![0; m],
            rate: vec![0; m],
            touched_edges: Vec::new(),
            grown: Vec::new(),
            stamp: vec![0; n],
            epoch: 0,
            tree_adj: vec![Vec::new(); n],
            parent_edge: vec![u32::MAX; n],
            visited: vec![false; n],
        }
    }

    fn touch(&mut self, v: u32) {
        let vi = v as usize;
        if !self.touched[vi] {
            self.touched[vi] = true;
            self.touched_nodes.push(v);
            self.members[vi].push(v);
        }
    }

    fn find(&mut self, mut v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[v as usize] != root {
            let next = self.parent[v as usize];
            self.parent[v as usize] = root;
            v = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        self.touch(a);
        self.touch(b);
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.members[ra as usize].len() >= self.members[rb as usize].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        let moved = std::mem::take(&mut self.members[small as usize]);
        self.members[big as usize].extend(moved);
        let (bi, si) = (big as usize, small as usize);
        self.odd[bi] ^= self.odd[si];
        self.boundary[bi] |= self.boundary[si];
    }

    fn reset(&mut self) {
        let nd = self.g.n_detectors;
        for &v in &self.touched_nodes {
            let vi = v as usize;
            self.parent[vi] = v;
            self.odd[vi] = false;
            self.boundary[vi] = vi >= nd;
            self.members[vi].clear();
            self.defect[vi] = false;
            self.touched[vi] = false;
            self.tree_adj[vi].clear();
            self.parent_edge[vi] = u32::MAX;
            self.visited[vi] = false;
        }
        self.touched_nodes.clear();
        for &e in &self.touched_edges {
            self.growth[e as usize] = 0;
        }
        self.touched_edges.clear();
        self.grown.clear();
    }

    /// Returns the predicted observable flips for a syndrome (list of fired
    /// detectors).
    pub fn decode(&mut self, syndrome: &[u32]) -> u64 {
        if syndrome.is_empty() {
            return 0;
        }
        for &d in syndrome {
            self.touch(d);
            self.odd[d as usize] ^= true;
            self.defect[d as usize] ^= true;
        }
        let mut active: Vec<u32> = syndrome.to_vec();
        let mut frontier: Vec<u32> = Vec::new();
        let mut to_merge: Vec<u32> = Vec::new();
        loop {
            // distinct odd clusters without boundary
            self.epoch = self.epoch.wrapping_add(1);
            if self.epoch == 0 {
                self.stamp.fill(0);
                self.epoch = 1;
            }
            let mut roots = Vec::with_capacity(active.len());
            for &v in &active {
                let r = self.find(v);
                let ri = r as usize;
                if self.stamp[ri] != self.epoch && self.odd[ri] && !self.boundary[ri] {
                    self.stamp[ri] = self.epoch;
                    roots.push(r);
                }
            }
            if roots.is_empty() {
                break;
            }
            frontier.clear();
            for &r in &roots {
                for k in 0..self.members[r as usize].len() {
                    let v = self.members[r as usize][k];
                    for &e in &self.g.adjacency[v as usize] {
                        let ei = e as usize;
                        if self.growth[ei] < self.wint[ei] {
                            if self.rate[ei] == 0 {
                                frontier.push(e);
                            }
                            self.rate[ei] += 1;
                        }
                    }
                }
            }
            if frontier.is_empty() {
                break;
            }
            let step = frontier
                .iter()
                .map(|&e| {
                    let ei = e as usize;
                    (self.wint[ei] - self.growth[ei]).div_ceil(self.rate[ei])
                })
                .min()
                .unwrap_or(1);
            to_merge.clear();
            for &e in &frontier {
                let ei = e as usize;
                if self.growth[ei] == 0 {
                    self.touched_edges.push(e);
                }
                self.growth[ei] = (self.growth[ei] + step * self.rate[ei]).min(self.wint[ei]);
                self.rate[ei] = 0;
                if self.growth[ei] == self.wint[ei] {
                    to_merge.push(e);
                }
            }
            for &e in &to_merge {
                let ed = &self.g.edges[e as usize];
                let (u, v) = (ed.u, ed.v);
                self.union(u, v);
                self.grown.push(e);
            }
            active = roots;
        }
        let flips = self.peel();
        self.reset();
        flips
    }

    fn peel(&mut self) -> u64 {
        for k in 0..self.grown.len() {
            let e = self.grown[k];
            let ed = &self.g.edges[e as usize];
            self.tree_adj[ed.u as usize].push(e);
            self.tree_adj[ed.v as usize].push(e);
        }
        let mut order: Vec<u32> = Vec::with_capacity(self.touched_nodes.len());
        let nd = self.g.n_detectors as u32;
        let mut roots: Vec<u32> = self.touched_nodes.iter().copied().filter(|&v| v >= nd).collect();
        roots.extend(self.touched_nodes.iter().copied().filter(|&v| v < nd));
        for r in roots {
            if self.visited[r as usize] {
                continue;
            }
            self.visited[r as usize] = true;
            let start = order.len();
            order.push(r);
            let mut head = start;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for k in 0..self.tree_adj[v as usize].len() {
                    let e = self.tree_adj[v as usize][k];
                    let ed = &self.g.edges[e as usize];
                    let w = if ed.u == v { ed.v } else { ed.u };
                    if !self.visited[w as usize] {
                        self.visited[w as usize] = true;
                        self.parent_edge[w as usize] = e;
                        order.push(w);
                    }
                }
            }
        }
        let mut flips = 0;
        for &v in order.iter().rev() {
            let pe = self.parent_edge[v as usize];
            if pe == u32::MAX || !self.defect[v as usize] {
                continue;
            }
            let ed = &self.g.edges[pe as usize];
            flips ^= ed.observables;
            self.defect[v as usize] = false;
            let up = if ed.u == v { ed.v } else { ed.u };
            self.defect[up as usize] ^= true;
        }
        flips
    }
}

pub fn decode_uf(graph: &MatchingGraph, syndrome: &[u32]) -> u64 {
    UnionFind::new(graph).decode(syndrome)
}

// ---------------------------------------------------------------------------
// exact minimum-weight decoding

/// Largest number of defects in one connected component the exact decoder
/// accepts.
pub const EXACT_MAX_DEFECTS: usize = 22;

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, u32);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Exact minimum-weight decoder: shortest paths between defects and to the
/// boundary, then an exhaustive optimal pairing per connected component.
pub struct ExactMatcher<'g> {
    g: &'g MatchingGraph,
    component: Vec<u32>,
    dist: Vec<f64>,
    mask: Vec<u64>,
    seen: Vec<u32>,
}

impl<'g> ExactMatcher<'g> {
    pub fn new(g: &'g MatchingGraph) -> Self {
        let mut component = vec![u32::MAX; g.n_nodes];
        let mut next = 0;
        for s in 0..g.n_nodes {
            if component[s] != u32::MAX {
                continue;
            }
            let mut stack = vec![s as u32];
            component[s] = next;
            while let Some(v) = stack.pop() {
                for &e in &g.adjacency[v as usize] {
                    let ed = &g.edges[e as usize];
                    let w = if ed.u == v { ed.v } else { ed.u };
                    if component[w as usize] == u32::MAX {
                        component[w as usize] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        Self {
            g,
            component,
            dist: vec![f64::INFINITY; g.n_nodes],
            mask: vec![0; g.n_nodes],
            seen: Vec::new(),
        }
    }

    /// Single-source shortest paths; returns distances/masks to `targets` and
    /// the nearest boundary node.
    fn paths(&mut self, src: u32, targets: &[u32]) -> (Vec<(f64, u64)>, (f64, u64)) {
        for &v in &self.seen {
            self.dist[v as usize] = f64::INFINITY;
        }
        self.seen.clear();
        let mut heap = BinaryHeap::new();
        self.dist[src as usize] = 0.0;
        self.mask[src as usize] = 0;
        self.seen.push(src);
        heap.push(HeapItem(0.0, src));
        let mut boundary = (f64::INFINITY, 0);
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > self.dist[v as usize] {
                continue;
            }
            if self.g.is_boundary(v) {
                if d < boundary.0 {
                    boundary = (d, self.mask[v as usize]);
                }
                continue;
            }
            for &e in &self.g.adjacency[v as usize] {
                let ed = &self.g.edges[e as usize];
                let w = if ed.u == v { ed.v } else { ed.u };
                let nd = d + ed.weight;
                if nd < self.dist[w as usize] {
                    if self.dist[w as usize] == f64::INFINITY {
                        self.seen.push(w);
                    }
                    self.dist[w as usize] = nd;
                    self.mask[w as usize] = self.mask[v as usize] ^ ed.observables;
                    heap.push(HeapItem(nd, w));
                }
            }
        }
        let to = targets
            .iter()
            .map(|&t| (self.dist[t as usize], self.mask[t as usize]))
            .collect();
        (to, boundary)
    }

    pub fn decode(&mut self, syndrome: &[u32]) -> Result<u64> {
        let mut groups: HashMap<u32, Vec<u32>> = HashMap::new();
        for &d in syndrome {
            if d as usize >= self.g.n_detectors {
                return Err(Error::InvalidRequest(format!("detector {d} out of range")));
            }
            let g = groups.entry(self.component[d as usize]).or_default();
            // repeated detectors cancel
            match g.iter().position(|&x| x == d) {
                Some(i) => {
                    g.remove(i);
                }
                None => g.push(d),
            }
        }
        let mut keys: Vec<u32> = groups.keys().copied().collect();
        keys.sort_unstable();
        let mut flips = 0;
        for k in keys {
            let mut defects = groups.remove(&k).unwrap();
            defects.sort_unstable();
            flips ^= self.match_component(&defects)?;
        }
        Ok(flips)
    }

    fn match_component(&mut self, defects: &[u32]) -> Result<u64> {
        let n = defects.len();
        if n == 0 {
            return Ok(0);
        }
        if n > EXACT_MAX_DEFECTS {
            return Err(Error::UnsupportedCircuit(format!(
                "{n} defects in one component exceed the exact decoder's limit of {EXACT_MAX_DEFECTS}"
            )));
        }
        let mut pair = vec![(f64::INFINITY, 0u64); n * n];
        let mut bnd = vec![(f64::INFINITY, 0u64); n];
        for i in 0..n {
            let (to, b) = self.paths(defects[i], defects);
            for j in 0..n {
                pair[i * n + j] = to[j];
            }
            bnd[i] = b;
        }
        // dp over subsets of unmatched defects, lowest index matched first
        let full = (1usize << n) - 1;
        let mut cost = vec![f64::INFINITY; 1 << n];
        let mut choice = vec![(u8::MAX, u8::MAX); 1 << n];
        cost[0] = 0.0;
        for s in 1..=full {
            let i = s.trailing_zeros() as usize;
            let rest = s & !(1 << i);
            let mut best = cost[rest] + bnd[i].0;
            let mut pick = (i as u8, u8::MAX);
            let mut r = rest;
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                r &= r - 1;
                let c = cost[rest & !(1 << j)] + pair[i * n + j].0;
                if c < best {
                    best = c;
                    pick = (i as u8, j as u8);
                }
            }
            cost[s] = best;
            choice[s] = pick;
        }
        if !cost[full].is_finite() {
            return Err(Error::InfeasibleSyndrome(format!(
                "no correction matches defects {defects:?}"
            )));
        }
        let mut s = full;
        let mut flips = 0;
        while s != 0 {
            let (i, j) = choice[s];
            let i = i as usize;
            if j == u8::MAX {
                flips ^= bnd[i].1;
                s &= !(1 << i);
            } else {
                let j = j as usize;
                flips ^= pair[i * n + j].1;
                s &= !((1 << i) | (1 << j));
            }
        }
        Ok(flips)
    }
}

/// Exact minimum-weight correction for a syndrome: the observable flips of a
/// lightest edge set whose boundary is the syndrome.
pub fn decode_bruteforce(graph: &MatchingGraph, syndrome: &[u32]) -> Result<u64> {
    ExactMatcher::new(graph).decode(syndrome)
}

// ---------------------------------------------------------------------------
// lookup table

#[derive(Debug)]
pub struct LutTable {
    entries: HashMap<Box<[u32]>, u64>,
    pub capacity_bytes: usize,
    pub entry_bytes: usize,
    /// Largest fault count fully enumerated before the table filled up.
    pub complete_weight: usize,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl LutTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn size_bytes(&self) -> usize {
        self.entries.len() * self.entry_bytes
    }

    /// Exact-match lookup; counts hits and misses. The empty syndrome needs
    /// no entry and always hits.
    pub fn lookup(&self, syndrome: &[u32]) -> Option<u64> {
        let r = if syndrome.is_empty() {
            Some(0)
        } else {
            self.entries.get(syndrome).copied()
        };
        let counter = if r.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, AtomicOrdering::Relaxed);
        r
    }

    pub fn contains(&self, syndrome: &[u32]) -> bool {
        syndrome.is_empty() || self.entries.contains_key(syndrome)
    }

    pub fn get(&self, syndrome: &[u32]) -> Option<u64> {
        self.entries.get(syndrome).copied()
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(AtomicOrdering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(AtomicOrdering::Relaxed)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], u64)> {
        self.entries.iter().map(|(k, &v)| (&**k, v))
    }
}

/// Largest fault count the table builder enumerates.
pub const LUT_MAX_WEIGHT: usize = 3;

/// Fills a table with the syndromes of all single faults, then pairs, then
/// triples, in edge-index order, each mapped to the exact decoder's answer,
/// until `capacity_bytes` is used up. An entry costs one bit per detector plus
/// one bit per observable, each rounded up to whole bytes.
pub fn build_lut(graph: &MatchingGraph, capacity_bytes: usize) -> Result<LutTable> {
    let entry_bytes = graph.n_detectors.div_ceil(8) + graph.n_observables.max(1).div_ceil(8);
    let max_entries = capacity_bytes / entry_bytes.max(1);
    let mut table = LutTable {
        entries: HashMap::new(),
        capacity_bytes,
        entry_bytes,
        complete_weight: 0,
        hits: AtomicU64::new(0),
        misses: AtomicU64::new(0),
    };
    if max_entries == 0 {
        return Ok(table);
    }
    let mut exact = ExactMatcher::new(graph);
    let m = graph.edges.len();
    let mut idx: Vec<usize> = Vec::with_capacity(LUT_MAX_WEIGHT);
    'weights: for k in 1..=LUT_MAX_WEIGHT.min(m) {
        idx.clear();
        idx.extend(0..k);
        loop {
            let (syn, _) = graph.syndrome_of(&idx);
            if !syn.is_empty() && !table.entries.contains_key(&syn[..]) {
                if table.entries.len() == max_entries {
                    break 'weights;
                }
                let flips = exact.decode(&syn)?;
                table.entries.insert(syn.into_boxed_slice(), flips);
            }
            // next combination
            let mut i = k;
            while i > 0 && idx[i - 1] == m - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
        table.complete_weight = k;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// logical error rates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LerEstimate {
    pub observable: String,
    pub failures: u64,
    pub shots: u64,
    pub ler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl LerEstimate {
    pub fn new(observable: impl Into<String>, failures: u64, shots: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(failures, shots);
        let ler = if shots == 0 { 0.0 } else { failures as f64 / shots as f64 };
        Self {
            observable: observable.into(),
            failures,
            shots,
            ler,
            ci_low: ci_low.min(ler),
            ci_high: ci_high.max(ler),
        }
    }

    /// True when this interval lies strictly below `other`'s.
    pub fn significantly_below(&self, other: &LerEstimate) -> bool {
        self.ci_high < other.ci_low
    }
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DecoderKind {
    UnionFind,
    Exact,
    /// Table lookup with union-find on misses.
    Lut { capacity_bytes: usize },
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uf" | "union-find" => Ok(DecoderKind::UnionFind),
            "exact" | "bruteforce" => Ok(DecoderKind::Exact),
            _ => {
                if let Some(cap) = s.strip_prefix("lut:") {
                    let capacity_bytes = cap
                        .parse()
                        .map_err(|_| Error::InvalidRequest(format!("bad LUT capacity `{cap}`")))?;
                    Ok(DecoderKind::Lut { capacity_bytes })
                } else {
                    Err(Error::InvalidRequest(format!("unknown decoder `{s}`")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LerReport {
    pub estimates: Vec<LerEstimate>,
    pub hamming: HammingProfile,
    pub lut_hits: u64,
    pub lut_misses: u64,
}

impl LerReport {
    pub fn get(&self, observable: &str) -> Option<&LerEstimate> {
        self.estimates.iter().find(|e| e.observable == observable)
    }

    pub fn lut_hit_rate(&self) -> Option<f64> {
        let n = self.lut_hits + self.lut_misses;
        (n > 0).then(|| self.lut_hits as f64 / n as f64)
    }
}

enum Decoder<'g> {
    Uf(UnionFind<'g>),
    Exact(ExactMatcher<'g>),
    Lut(&'g LutTable, UnionFind<'g>),
}

impl Decoder<'_> {
    fn decode(&mut self, syn: &[u32]) -> Result<u64> {
        match self {
            Decoder::Uf(u) => Ok(u.decode(syn)),
            Decoder::Exact(e) => e.decode(syn),
            Decoder::Lut(t, u) => Ok(match t.lookup(syn) {
                Some(f) => f,
                None => u.decode(syn),
            }),
        }
    }
}

#[derive(Default)]
struct BlockTally {
    failures: Vec<u64>,
    hamming: HammingCounter,
    error: Option<Error>,
}

/// Samples and decodes `n_shots` shots, streaming block by block. Only
/// detector bases that carry an observable are decoded.
pub fn run_ler(circuit: &CircuitIR, decoder: DecoderKind, n_shots: u64, seed: u64) -> Result<LerReport> {
    let compiled = sim::compile(circuit)?;
    let graph = build_graph_compiled(&compiled)?;
    let lut = match decoder {
        DecoderKind::Lut { capacity_bytes } => Some(build_lut(&graph, capacity_bytes)?),
        _ => None,
    };
    let n_obs = compiled.n_observables();
    let bases: Vec<Pauli> = [Pauli::X, Pauli::Z]
        .into_iter()
        .filter(|b| compiled.observable_basis.contains(b))
        .collect();
    let keep: Vec<Vec<bool>> = bases
        .iter()
        .map(|&b| compiled.detector_basis.iter().map(|&d| d == b).collect())
        .collect();
    let obs_of: Vec<Vec<usize>> = bases
        .iter()
        .map(|&b| (0..n_obs).filter(|&o| compiled.observable_basis[o] == b).collect())
        .collect();
    let n_rounds = compiled.n_rounds;
    let tallies = compiled.for_each_block_with(
        n_shots,
        seed,
        || {
            let dec = match (&lut, decoder) {
                (Some(t), _) => Decoder::Lut(t, UnionFind::new(&graph)),
                (None, DecoderKind::Exact) => Decoder::Exact(ExactMatcher::new(&graph)),
                _ => Decoder::Uf(UnionFind::new(&graph)),
            };
            (dec, Vec::new())
        },
        |(dec, defects), view| {
            let mut t = BlockTally {
                failures: vec![0; n_obs],
                hamming: HammingCounter::new(n_rounds),
                error: None,
            };
            t.hamming.add_block(&compiled, &view);
            for (bi, keep) in keep.iter().enumerate() {
                view.defects(Some(keep), defects);
                for (shot, syn) in defects.iter().enumerate() {
                    let predicted = match dec.decode(syn) {
                        Ok(f) => f,
                        Err(e) => {
                            t.error.get_or_insert(e);
                            continue;
                        }
                    };
                    for &o in &obs_of[bi] {
                        if (predicted >> o & 1 == 1) != view.observable_bit(o, shot) {
                            t.failures[o] += 1;
                        }
                    }
                }
            }
            t
        },
    );
    let mut failures = vec![0u64; n_obs];
    let mut hamming = HammingCounter::new(n_rounds);
    for t in tallies {
        if let Some(e) = t.error {
            return Err(e);
        }
        for (a, b) in failures.iter_mut().zip(&t.failures) {
            *a += b;
        }
        hamming.merge(&t.hamming);
    }
    let estimates = compiled
        .observable_names
        .iter()
        .zip(&failures)
        .map(|(name, &f)| LerEstimate::new(name.clone(), f, n_shots))
        .collect();
    Ok(LerReport {
        estimates,
        hamming: hamming.profile(compiled.merge_round),
        lut_hits: lut.as_ref().map_or(0, |t| t.hits()),
        lut_misses: lut.as_ref().map_or(0, |t| t.misses()),
    })
}

pub fn estimate_ler(
    circuit: &CircuitIR,
    decoder: DecoderKind,
    n_shots: u64,
    seed: u64,
) -> Result<Vec<LerEstimate>> {
    Ok(run_ler(circuit, decoder, n_shots, seed)?.estimates)
}

// ---------------------------------------------------------------------------
// decoding latency

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MissLatency {
    Constant { ns: f64 },
    LogNormal { mean_ns: f64, sigma: f64 },
    Empirical { samples_ns: Vec<f64> },
}

impl Default for MissLatency {
    fn default() -> Self {
        MissLatency::LogNormal {
            mean_ns: 1000.0,
            sigma: 0.5,
        }
    }
}

type MissSampler<'a> = Box<dyn Fn(&mut ChaCha8Rng) -> f64 + 'a>;

impl MissLatency {
    pub fn mean(&self) -> f64 {
        match self {
            MissLatency::Constant { ns } => *ns,
            MissLatency::LogNormal { mean_ns, .. } => *mean_ns,
            MissLatency::Empirical { samples_ns } => {
                samples_ns.iter().sum::<f64>() / samples_ns.len().max(1) as f64
            }
        }
    }

    fn sampler(&self) -> Result<MissSampler<'_>> {
        Ok(match self {
            MissLatency::Constant { ns } => {
                let ns = *ns;
                Box::new(move |_| ns)
            }
            MissLatency::LogNormal { mean_ns, sigma } => {
                if *mean_ns <= 0.0 || *sigma < 0.0 {
                    return Err(Error::InvalidRequest("log-normal needs mean > 0, sigma >= 0".into()));
                }
                let mu = mean_ns.ln() - sigma * sigma / 2.0;
                let d = LogNormal::new(mu, *sigma)
                    .map_err(|e| Error::InvalidRequest(format!("log-normal: {e}")))?;
                Box::new(move |r| d.sample(r))
            }
            MissLatency::Empirical { samples_ns } => {
                if samples_ns.is_empty() {
                    return Err(Error::InvalidRequest("empty latency sample set".into()));
                }
                Box::new(move |r| samples_ns[r.random_range(0..samples_ns.len())])
            }
        })
    }
}

/// Mean decoding latency with LUT hit rate `h`.
pub fn expected_latency(hit_rate: f64, t_hit: f64, mean_miss: f64) -> f64 {
    hit_rate * t_hit + (1.0 - hit_rate) * mean_miss
}

/// Monte Carlo estimate of `E[latency | passive] / E[latency | active]`. Both
/// arms share each trial's random numbers; the hit/miss uniform is stratified
/// over the trials.
pub fn latency_speedup(
    hit_rate_passive: f64,
    hit_rate_active: f64,
    t_hit: f64,
    miss: &MissLatency,
    n_trials: u64,
    seed: u64,
) -> Result<f64> {
    for h in [hit_rate_passive, hit_rate_active] {
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::InvalidRequest(format!("hit rate {h} outside [0, 1]")));
        }
    }
    if t_hit <= 0.0 || n_trials == 0 {
        return Err(Error::InvalidRequest("t_hit and n_trials must be positive".into()));
    }
    let draw = miss.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum_p, mut sum_a) = (0.0, 0.0);
    let n = n_trials as f64;
    for i in 0..n_trials {
        let u = (i as f64 + rng.random::<f64>()) / n;
        let m = draw(&mut rng);
        sum_p += if u < hit_rate_passive { t_hit } else { m };
        sum_a += if u < hit_rate_active { t_hit } else { m };
    }
    Ok(sum_p / sum_a)
}
