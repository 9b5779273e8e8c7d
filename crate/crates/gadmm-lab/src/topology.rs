//! Bipartite communication graphs with a head/tail worker partition, the
//! chain special case, and the dynamic reshuffle used by D-GADMM.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Structure class preserved across reshuffles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyClass {
    /// Path graph; reshuffle redraws a chain over a uniformly random
    /// worker permutation.
    Chain,
    /// Connected bipartite graph; reshuffle redraws one with the same
    /// number of edges.
    Bipartite,
}

/// An undirected connected bipartite graph over `n` workers. Edges are
/// stored oriented `(head, tail)`; the head/tail sets partition all workers.
#[derive(Debug, Clone)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    is_head: Vec<bool>,
    class: TopologyClass,
}

impl Topology {
    pub fn num_workers(&self) -> usize {
        self.n
    }

    /// Edges oriented `(head, tail)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_head(&self, worker: usize) -> bool {
        self.is_head[worker]
    }

    pub fn head_set(&self) -> Vec<usize> {
        (0..self.n).filter(|&w| self.is_head[w]).collect()
    }

    pub fn tail_set(&self) -> Vec<usize> {
        (0..self.n).filter(|&w| !self.is_head[w]).collect()
    }

    pub fn class(&self) -> TopologyClass {
        self.class
    }

    pub fn degree(&self, worker: usize) -> usize {
        self.edges
            .iter()
            .filter(|(h, t)| *h == worker || *t == worker)
            .count()
    }

    fn assert_partition(&self) {
        // head and tail sets are disjoint and cover all workers by
        // construction of `is_head`; every edge must cross the partition
        for &(h, t) in &self.edges {
            assert!(
                self.is_head[h] && !self.is_head[t],
                "edge ({h},{t}) does not go head -> tail"
            );
        }
    }

    /// Writes the edge list as one `u v` pair per line.
    pub fn dump_edge_list(&self) -> String {
        let mut out = String::new();
        for &(h, t) in &self.edges {
            out.push_str(&format!("{h} {t}\n"));
        }
        out
    }
}

/// Path graph `0 - 1 - ... - (n-1)`; even positions are heads.
pub fn build_chain(n: usize) -> Result<Topology> {
    if n < 2 {
        return Err(Error::invalid(format!("chain needs at least 2 workers, got {n}")));
    }
    chain_over(&(0..n).collect::<Vec<_>>())
}

fn chain_over(order: &[usize]) -> Result<Topology> {
    let n = order.len();
    let mut is_head = vec![false; n];
    for (pos, &w) in order.iter().enumerate() {
        is_head[w] = pos % 2 == 0;
    }
    let edges = order
        .windows(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            if is_head[a] {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    let t = Topology { n, edges, is_head, class: TopologyClass::Chain };
    t.assert_partition();
    Ok(t)
}

/// Connected bipartite graph with `extra_edges` random cross edges beyond a
/// spanning tree. Workers are split into heads/tails by a random permutation.
pub fn build_random_bipartite(
    n: usize,
    extra_edges: usize,
    rng: &mut impl Rng,
) -> Result<Topology> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "bipartite graph needs at least 2 workers, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let heads: Vec<usize> = order[..n.div_ceil(2)].to_vec();
    let tails: Vec<usize> = order[n.div_ceil(2)..].to_vec();
    let mut is_head = vec![false; n];
    for &h in &heads {
        is_head[h] = true;
    }

    // random spanning tree alternating between the two sides: attach each
    // new node to a uniformly random already-connected node of the other side
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut connected_heads: Vec<usize> = vec![heads[0]];
    let mut connected_tails: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = heads[1..].iter().chain(tails.iter()).copied().collect();
    pending.shuffle(rng);
    // tails must enter first while no tail is connected
    pending.sort_by_key(|w| if is_head[*w] { 1 } else { 0 });
    for w in pending {
        if is_head[w] {
            let t = connected_tails[rng.random_range(0..connected_tails.len())];
            edges.push((w, t));
            connected_heads.push(w);
        } else {
            let h = connected_heads[rng.random_range(0..connected_heads.len())];
            edges.push((h, w));
            connected_tails.push(w);
        }
    }

    let max_extra = heads.len() * tails.len() - edges.len();
    let extra = extra_edges.min(max_extra);
    let mut present: std::collections::BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let mut added = 0;
    while added < extra {
        let h = heads[rng.random_range(0..heads.len())];
        let t = tails[rng.random_range(0..tails.len())];
        if present.insert((h, t)) {
            edges.push((h, t));
            added += 1;
        }
    }

    let t = Topology { n, edges, is_head, class: TopologyClass::Bipartite };
    t.assert_partition();
    debug_assert!(validate_bipartite(&t));
    Ok(t)
}

/// True iff every edge crosses the head/tail partition and the graph is
/// connected over all workers.
pub fn validate_bipartite(topo: &Topology) -> bool {
    if topo.n == 0 {
        return false;
    }
    for &(h, t) in &topo.edges {
        if h >= topo.n || t >= topo.n || !topo.is_head[h] || topo.is_head[t] {
            return false;
        }
    }
    // BFS connectivity
    let mut adj = vec![Vec::new(); topo.n];
    for &(h, t) in &topo.edges {
        adj[h].push(t);
        adj[t].push(h);
    }
    let mut seen = vec![false; topo.n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == topo.n
}

/// Redraws the topology within its structure class: a chain becomes a chain
/// over a uniformly random permutation; a general bipartite graph is redrawn
/// with the same edge count. Deterministic given the RNG stream.
pub fn reshuffle(topo: &Topology, rng: &mut impl Rng) -> Result<Topology> {
    match topo.class {
        TopologyClass::Chain => {
            let mut order: Vec<usize> = (0..topo.n).collect();
            order.shuffle(rng);
            chain_over(&order)
        }
        TopologyClass::Bipartite => {
            let extra = topo.edges.len() - (topo.n - 1);
            build_random_bipartite(topo.n, extra, rng)
        }
    }
}
