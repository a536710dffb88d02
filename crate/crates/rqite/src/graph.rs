//! Interaction graph over Hamiltonian terms and connected-cluster
//! enumeration.

use std::f64::consts::E;

use serde::Serialize;

use crate::caps::check_cap;
use crate::error::{invalid, Result};
use crate::hamiltonian::LocalHamiltonian;

/// Vertices are terms; distinct terms are adjacent iff their supports meet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionGraph {
    adjacency: Vec<Vec<usize>>,
    supports: Vec<Vec<usize>>,
    max_degree: usize,
}

impl InteractionGraph {
    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Degree 𝔡.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `max(𝔡, 1)`, used in every bound.
    pub fn effective_degree(&self) -> usize {
        self.max_degree.max(1)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nb) in self.adjacency.iter().enumerate() {
            out.extend(nb.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Whether the distinct terms in `vertices` induce a connected subgraph.
    pub fn is_connected_set(&self, vertices: &[usize]) -> bool {
        let mut set: Vec<usize> = vertices.to_vec();
        set.sort_unstable();
        set.dedup();
        let Some(&start) = set.first() else {
            return false;
        };
        let mut seen = vec![start];
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &u in &self.adjacency[v] {
                if set.binary_search(&u).is_ok() && !seen.contains(&u) {
                    seen.push(u);
                    stack.push(u);
                }
            }
        }
        seen.len() == set.len()
    }
}

pub fn build_graph(h: &LocalHamiltonian) -> InteractionGraph {
    let supports: Vec<Vec<usize>> = h.terms().iter().map(|t| t.op.support().collect()).collect();
    let mut by_qubit: Vec<Vec<usize>> = vec![Vec::new(); h.n_qubits()];
    for (i, s) in supports.iter().enumerate() {
        for &q in s {
            by_qubit[q].push(i);
        }
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); supports.len()];
    for (i, s) in supports.iter().enumerate() {
        let nb = &mut adjacency[i];
        for &q in s {
            nb.extend(by_qubit[q].iter().copied().filter(|&j| j != i));
        }
        nb.sort_unstable();
        nb.dedup();
    }
    let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
    InteractionGraph {
        adjacency,
        supports,
        max_degree,
    }
}

/// `β* = 1/(2e²𝔡(𝔡+1))` evaluated at `max(𝔡, 1)`.
pub fn beta_star(degree: usize) -> f64 {
    let d = degree.max(1) as f64;
    1.0 / (2.0 * E * E * d * (d + 1.0))
}

/// `4^k 2^{Dk} k^{k/D} D^{2k}`; overflows to `+∞` for large inputs.
pub fn lattice_degree_bound(k: usize, dim: usize) -> f64 {
    let (k, d) = (k as f64, dim as f64);
    4f64.powf(k) * 2f64.powf(d * k) * k.powf(k / d) * d.powf(2.0 * k)
}

/// Multiset of term indices with multiplicities, kept sorted by term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cluster {
    counts: Vec<(usize, usize)>,
}

impl Cluster {
    /// Builds a cluster from a list of term indices with repetition.
    pub fn from_terms(terms: &[usize]) -> Result<Self> {
        if terms.is_empty() {
            return invalid("clusters are nonempty");
        }
        let mut sorted = terms.to_vec();
        sorted.sort_unstable();
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for t in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == t => *c += 1,
                _ => counts.push((t, 1)),
            }
        }
        Ok(Cluster { counts })
    }

    pub fn counts(&self) -> &[(usize, usize)] {
        &self.counts
    }

    /// `|W| = Σ μ_W(X)`.
    pub fn size(&self) -> usize {
        self.counts.iter().map(|&(_, c)| c).sum()
    }

    pub fn multiplicity(&self, term: usize) -> usize {
        self.counts
            .iter()
            .find(|&&(t, _)| t == term)
            .map_or(0, |&(_, c)| c)
    }

    pub fn distinct_terms(&self) -> Vec<usize> {
        self.counts.iter().map(|&(t, _)| t).collect()
    }

    /// Term indices with repetition, ascending.
    pub fn terms(&self) -> Vec<usize> {
        self.counts
            .iter()
            .flat_map(|&(t, c)| std::iter::repeat(t).take(c))
            .collect()
    }

    /// Copies of one term are mutually adjacent, so a multiset is connected
    /// iff its distinct terms are.
    pub fn is_connected(&self, g: &InteractionGraph) -> bool {
        g.is_connected_set(&self.distinct_terms())
    }
}

/// Every connected vertex subset of size `<= k`, each exactly once, grown
/// from its smallest vertex.
fn connected_subsets(g: &InteractionGraph, k: usize, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn extend(
        g: &InteractionGraph,
        k: usize,
        anchor: usize,
        sub: &mut Vec<usize>,
        ext: Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        visit(sub)?;
        if sub.len() == k {
            return Ok(());
        }
        let mut ext = ext;
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &u in g.neighbors(w) {
                let exclusive = u > anchor
                    && !sub.contains(&u)
                    && u != w
                    && !sub.iter().any(|&s| g.adjacent(s, u))
                    && !next.contains(&u);
                if exclusive {
                    next.push(u);
                }
            }
            sub.push(w);
            extend(g, k, anchor, sub, next, visit)?;
            sub.pop();
        }
        Ok(())
    }
    for v in 0..g.n_vertices() {
        let ext: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| u > v).collect();
        extend(g, k, v, &mut vec![v], ext, &mut visit)?;
    }
    Ok(())
}

/// Compositions of `m` into `parts` positive integers.
fn compositions(m: usize, parts: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if parts == 1 {
            cur.push(left);
            visit(cur);
            cur.pop();
            return;
        }
        for first in 1..=(left - (parts - 1)) {
            cur.push(first);
            rec(left - first, parts - 1, cur, visit);
            cur.pop();
        }
    }
    if parts >= 1 && m >= parts {
        rec(m, parts, &mut Vec::new(), visit);
    }
}

/// Exact enumeration of `𝒢_m`, sorted lexicographically by the ascending
/// term list of each cluster.
pub fn enumerate_connected_clusters(g: &InteractionGraph, m: usize, cap: usize) -> Result<Vec<Cluster>> {
    if m == 0 {
        return invalid("cluster size must be at least 1");
    }
    let mut out: Vec<Cluster> = Vec::new();
    connected_subsets(g, m, |sub| {
        let mut vertices = sub.to_vec();
        vertices.sort_unstable();
        compositions(m, vertices.len(), &mut |mult| {
            out.push(Cluster {
                counts: vertices.iter().copied().zip(mult.iter().copied()).collect(),
            });
        });
        check_cap("cluster", cap, out.len())
    })?;
    out.sort_by_cached_key(Cluster::terms);
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterCount {
    pub m: usize,
    pub count: usize,
    pub bound: f64,
    pub ok: bool,
}

/// Compares `|𝒢_m|` with `|S|(e𝔡_eff)^m`.
pub fn cluster_count_check(g: &InteractionGraph, m: usize, cap: usize) -> Result<ClusterCount> {
    let count = enumerate_connected_clusters(g, m, cap)?.len();
    let bound = g.n_vertices() as f64 * (E * g.effective_degree() as f64).powi(m as i32);
    Ok(ClusterCount {
        m,
        count,
        bound,
        ok: count as f64 <= bound,
    })
}
