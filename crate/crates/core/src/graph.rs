//! Dependency graphs between row pairs of a Psi-regular matrix and their
//! chromatic numbers.
//!
//! For rows `k1 < k2`, the graph has a vertex `{j1, j2}` (with `j1 != j2`)
//! whenever `S[k1][j1]` and `S[k2][j2]` share a pool index, and an edge between
//! two vertices whenever the column pairs intersect. The P-chromatic number is
//! the largest chromatic number over all row pairs.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SubsetStructure;

pub const DEFAULT_EXACT_CAP: usize = 24;

/// Simple undirected graph on vertices `0..len`, adjacency lists sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_edges(vertices: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); vertices];
        for &(a, b) in edges {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Self { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect()
    }

    pub fn is_proper_coloring(&self, colors: &[usize]) -> bool {
        colors.len() == self.len()
            && self
                .adj
                .iter()
                .enumerate()
                .all(|(a, list)| list.iter().all(|&b| colors[a] != colors[b]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    pub row_pair: (usize, usize),
    /// Column pairs `[j1, j2]` with `j1 < j2`, in ascending order.
    pub vertices: Vec<[usize; 2]>,
    pub graph: Graph,
}

/// Builds `G_P(k1, k2)` from the subset structure (pool values are irrelevant).
pub fn build_graph(s: &SubsetStructure, k1: usize, k2: usize) -> Result<DependencyGraph> {
    let rows = s.rows();
    for index in [k1, k2] {
        if index >= rows {
            return Err(Error::RowIndexOutOfRange { index, rows });
        }
    }
    if k1 >= k2 {
        return Err(Error::RowsNotDistinct(k1, k2));
    }
    let n = s.cols();

    // pool index -> columns of row k2 whose subset contains it
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); s.pool_size()];
    for j2 in 0..n {
        for &l in s.subset(k2, j2) {
            if let Some(h) = holders.get_mut(l) {
                h.push(j2);
            }
        }
    }
    let mut pairs = BTreeSet::new();
    for j1 in 0..n {
        for &l in s.subset(k1, j1) {
            for &j2 in holders.get(l).map_or(&[][..], Vec::as_slice) {
                if j1 != j2 {
                    pairs.insert([j1.min(j2), j1.max(j2)]);
                }
            }
        }
    }
    let vertices: Vec<[usize; 2]> = pairs.into_iter().collect();

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, pair) in vertices.iter().enumerate() {
        incident[pair[0]].push(v);
        incident[pair[1]].push(v);
    }
    let mut edges = Vec::new();
    for list in &incident {
        for (x, &a) in list.iter().enumerate() {
            for &b in &list[x + 1..] {
                edges.push((a, b));
            }
        }
    }
    let graph = Graph::from_edges(vertices.len(), &edges);
    Ok(DependencyGraph {
        row_pair: (k1, k2),
        vertices,
        graph,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColoringMethod {
    Exact,
    GreedyUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColoringMode {
    /// Branch and bound; fails on graphs with more than `cap` vertices.
    Exact { cap: usize },
    /// DSATUR upper bound.
    Greedy,
}

impl ColoringMode {
    pub fn exact() -> Self {
        ColoringMode::Exact {
            cap: DEFAULT_EXACT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChromaticResult {
    pub value: usize,
    pub method: ColoringMethod,
    /// Color of each vertex, in `0..value`.
    pub coloring: Vec<usize>,
}

/// DSATUR with ties broken by degree, then by lowest vertex id.
pub fn dsatur(g: &Graph) -> Vec<usize> {
    use std::cmp::Reverse;

    let n = g.len();
    let mut colors = vec![usize::MAX; n];
    let mut neighbor_colors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let key = |v: usize, sat: usize| (Reverse(sat), Reverse(g.degree(v)), v);
    let mut queue: BTreeSet<_> = (0..n).map(|v| key(v, 0)).collect();
    while let Some((_, _, v)) = queue.pop_first() {
        let c = (0..).find(|c| !neighbor_colors[v].contains(c)).unwrap();
        colors[v] = c;
        for &u in g.neighbors(v) {
            if colors[u] == usize::MAX && !neighbor_colors[u].contains(&c) {
                queue.remove(&key(u, neighbor_colors[u].len()));
                neighbor_colors[u].insert(c);
                queue.insert(key(u, neighbor_colors[u].len()));
            }
        }
    }
    colors
}

fn color_count(colors: &[usize]) -> usize {
    colors.iter().max().map_or(0, |&c| c + 1)
}

/// Size of a greedily grown clique; a lower bound on the chromatic number.
fn clique_lower_bound(g: &Graph) -> usize {
    let mut best = usize::from(!g.is_empty());
    for start in 0..g.len() {
        let mut clique = vec![start];
        let mut candidates: Vec<usize> = g.neighbors(start).to_vec();
        candidates.sort_by_key(|&v| std::cmp::Reverse(g.degree(v)));
        for v in candidates {
            if clique
                .iter()
                .all(|u| g.neighbors(v).binary_search(u).is_ok())
            {
                clique.push(v);
            }
        }
        best = best.max(clique.len());
    }
    best
}

struct Backtrack<'a> {
    g: &'a Graph,
    limit: usize,
    colors: Vec<usize>,
    // per vertex, how many neighbors currently hold each color
    blocked: Vec<Vec<u32>>,
}

impl Backtrack<'_> {
    fn saturation(&self, v: usize) -> usize {
        self.blocked[v].iter().filter(|&&c| c > 0).count()
    }

    fn pick(&self) -> Option<usize> {
        (0..self.g.len())
            .filter(|&v| self.colors[v] == usize::MAX)
            .max_by(|&a, &b| {
                (self.saturation(a), self.g.degree(a))
                    .cmp(&(self.saturation(b), self.g.degree(b)))
                    .then(b.cmp(&a))
            })
    }

    fn assign(&mut self, v: usize, c: usize, add: bool) {
        for &u in self.g.neighbors(v) {
            if add {
                self.blocked[u][c] += 1;
            } else {
                self.blocked[u][c] -= 1;
            }
        }
        self.colors[v] = if add { c } else { usize::MAX };
    }

    fn solve(&mut self, used: usize) -> bool {
        let Some(v) = self.pick() else {
            return true;
        };
        // Colors beyond `used` are interchangeable, so only one fresh color is tried.
        let top = (used + 1).min(self.limit);
        for c in 0..top {
            if self.blocked[v][c] == 0 {
                self.assign(v, c, true);
                if self.solve(used.max(c + 1)) {
                    return true;
                }
                self.assign(v, c, false);
            }
        }
        false
    }
}

fn try_color(g: &Graph, limit: usize) -> Option<Vec<usize>> {
    let mut bt = Backtrack {
        g,
        limit,
        colors: vec![usize::MAX; g.len()],
        blocked: vec![vec![0; limit]; g.len()],
    };
    bt.solve(0).then_some(bt.colors)
}

pub fn chromatic_number(g: &Graph, mode: ColoringMode) -> Result<ChromaticResult> {
    let greedy = dsatur(g);
    let upper = color_count(&greedy);
    let result = match mode {
        ColoringMode::Greedy => ChromaticResult {
            value: upper,
            method: ColoringMethod::GreedyUpperBound,
            coloring: greedy,
        },
        ColoringMode::Exact { cap } => {
            if g.len() > cap {
                return Err(Error::GraphTooLargeForExact {
                    vertices: g.len(),
                    cap,
                });
            }
            let lower = clique_lower_bound(g);
            let mut best = (upper, greedy);
            for limit in lower..upper {
                if let Some(colors) = try_color(g, limit) {
                    best = (color_count(&colors), colors);
                    break;
                }
            }
            ChromaticResult {
                value: best.0,
                method: ColoringMethod::Exact,
                coloring: best.1,
            }
        }
    };
    assert!(
        g.is_proper_coloring(&result.coloring) && color_count(&result.coloring) == result.value,
        "coloring witness is not proper"
    );
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairChromatic {
    pub k1: usize,
    pub k2: usize,
    pub vertices: usize,
    pub edges: usize,
    pub chi: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PChromaticResult {
    /// `max` over row pairs; 0 when there are fewer than two rows.
    pub chi: usize,
    pub method: ColoringMethod,
    /// First row pair attaining the maximum.
    pub argmax_pair: Option<(usize, usize)>,
    /// Witness coloring of the argmax pair's graph.
    pub coloring: Vec<usize>,
    pub per_pair: Vec<PairChromatic>,
}

/// P-chromatic number of a structure. Row pairs are evaluated in parallel and
/// reduced in `(k1, k2)` order.
pub fn p_chromatic_number(s: &SubsetStructure, mode: ColoringMode) -> Result<PChromaticResult> {
    let k = s.rows();
    let row_pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .collect();
    let results = row_pairs
        .par_iter()
        .map(|&(a, b)| {
            let g = build_graph(s, a, b)?;
            let c = chromatic_number(&g.graph, mode)?;
            Ok((g, c))
        })
        .collect::<Result<Vec<_>>>()?;

    let method = match mode {
        ColoringMode::Exact { .. } => ColoringMethod::Exact,
        ColoringMode::Greedy => ColoringMethod::GreedyUpperBound,
    };
    let mut out = PChromaticResult {
        chi: 0,
        method,
        argmax_pair: None,
        coloring: Vec::new(),
        per_pair: Vec::with_capacity(results.len()),
    };
    for (g, c) in results {
        out.per_pair.push(PairChromatic {
            k1: g.row_pair.0,
            k2: g.row_pair.1,
            vertices: g.graph.len(),
            edges: g.graph.edge_count(),
            chi: c.value,
        });
        if out.argmax_pair.is_none() || c.value > out.chi {
            out.chi = c.value;
            out.argmax_pair = Some(g.row_pair);
            out.coloring = c.coloring;
        }
    }
    Ok(out)
}
