//! Binary-graph summaries of a connectivity matrix.

use std::collections::VecDeque;

use super::connectivity::ConnectivityMatrix;
use super::temporal::percentile_sorted;

pub const NAMES: [&str; 9] = [
    "eccentricity",
    "clustering",
    "betweenness",
    "local_efficiency",
    "global_efficiency",
    "diameter",
    "radius",
    "char_path",
    "connected",
];

/// Undirected simple graph as an adjacency matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub adj: Vec<Vec<bool>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            adj: vec![vec![false; n]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a][b] = true;
            self.adj[b][a] = true;
        }
    }

    pub fn neighbours(&self, v: usize) -> Vec<usize> {
        (0..self.n()).filter(|&u| self.adj[v][u]).collect()
    }

    fn induced(&self, nodes: &[usize]) -> Graph {
        Graph {
            adj: nodes
                .iter()
                .map(|&a| nodes.iter().map(|&b| self.adj[a][b]).collect())
                .collect(),
        }
    }

    /// BFS distances from `s` (`None` when unreachable).
    pub fn distances(&self, s: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[s] = Some(0);
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            let d = dist[v].unwrap();
            for u in 0..self.n() {
                if self.adj[v][u] && dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    q.push_back(u);
                }
            }
        }
        dist
    }

    /// Connected components, each sorted, in order of their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for s in 0..self.n() {
            if seen[s] {
                continue;
            }
            let comp: Vec<usize> = self
                .distances(s)
                .iter()
                .enumerate()
                .filter_map(|(v, d)| d.map(|_| v))
                .collect();
            comp.iter().for_each(|&v| seen[v] = true);
            out.push(comp);
        }
        out
    }
}

/// Keeps edges whose value is strictly above the `q`-quantile of the
/// off-diagonal values (linear interpolation).
pub fn binarise(m: &ConnectivityMatrix, q: f64) -> Graph {
    let n = m.n();
    let mut g = Graph::empty(n);
    let mut vals = m.off_diagonal();
    if vals.is_empty() {
        return g;
    }
    vals.sort_by(f64::total_cmp);
    let thr = percentile_sorted(&vals, q);
    for i in 0..n {
        for j in i + 1..n {
            if m.values[i][j] > thr {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Sum over reachable ordered pairs of `1/d`, divided by `n(n − 1)`.
pub fn global_efficiency(g: &Graph) -> f64 {
    let n = g.n();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .flat_map(|s| {
            g.distances(s)
                .into_iter()
                .enumerate()
                .filter(move |(t, _)| *t != s)
                .filter_map(|(_, d)| d.map(|d| 1.0 / d as f64))
        })
        .sum();
    total / (n * (n - 1)) as f64
}

/// Mean over nodes of the global efficiency of the neighbourhood subgraph.
pub fn local_efficiency(g: &Graph) -> f64 {
    let n = g.n();
    if n == 0 {
        return 0.0;
    }
    (0..n).map(|v| global_efficiency(&g.induced(&g.neighbours(v)))).sum::<f64>() / n as f64
}

/// Mean local clustering coefficient (nodes of degree < 2 count as 0).
pub fn average_clustering(g: &Graph) -> f64 {
    let n = g.n();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|v| {
            let nb = g.neighbours(v);
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let links = nb
                .iter()
                .enumerate()
                .flat_map(|(i, &a)| nb[i + 1..].iter().map(move |&b| (a, b)))
                .filter(|&(a, b)| g.adj[a][b])
                .count();
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .sum();
    total / n as f64
}

/// Normalised betweenness centrality of every node (Brandes).
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0; n];
        let mut dist: Vec<i64> = vec![-1; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            stack.push(v);
            for w in 0..n {
                if !g.adj[v][w] {
                    continue;
                }
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    // Each unordered pair was counted from both ends.
    let scale = if n > 2 { 1.0 / ((n - 1) * (n - 2)) as f64 } else { 0.5 };
    cb.iter().map(|v| v * scale).collect()
}

/// Graph summary in [`NAMES`] order.
///
/// Distance-based measures (eccentricity, diameter, radius, characteristic
/// path) are taken on the largest connected component; among equally large
/// components the one with the largest `(diameter, radius, char_path)` wins.
/// A single-node component gives zeros.
pub fn graph_features(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let comps = g.components();
    let largest = comps.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut best = (0.0f64, 0.0f64, 0.0f64);
    for comp in comps.iter().filter(|c| c.len() == largest && c.len() > 1) {
        let sub = g.induced(comp);
        let m = sub.n();
        let mut ecc = Vec::with_capacity(m);
        let mut total = 0usize;
        for s in 0..m {
            let d: Vec<usize> = sub.distances(s).into_iter().map(|d| d.unwrap()).collect();
            ecc.push(*d.iter().max().unwrap());
            total += d.iter().sum::<usize>();
        }
        let diameter = *ecc.iter().max().unwrap() as f64;
        let radius = *ecc.iter().min().unwrap() as f64;
        let char_path = total as f64 / (m * (m - 1)) as f64;
        let cand = (diameter, radius, char_path);
        if cand.partial_cmp(&best) == Some(std::cmp::Ordering::Greater) {
            best = cand;
        }
    }
    let (diameter, radius, char_path) = best;
    let max_betweenness = betweenness(g).into_iter().fold(0.0, f64::max);
    vec![
        diameter,
        average_clustering(g),
        max_betweenness,
        local_efficiency(g),
        global_efficiency(g),
        diameter,
        radius,
        char_path,
        if comps.len() <= 1 && n > 0 { 1.0 } else { 0.0 },
    ]
}
