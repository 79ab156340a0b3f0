//! Translation graphs: languages as nodes, aligned corpora as edges.
//!
//! Nodes are ordered by their position in the language list. Edges are stored
//! with the lower-indexed endpoint first, which is also the direction in which
//! each edge map is fitted.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::discrete::Lang;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: Lang,
    pub b: Lang,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphData", into = "GraphData")]
pub struct TranslationGraph {
    languages: Vec<Lang>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GraphData {
    languages: Vec<Lang>,
    edges: Vec<Edge>,
}

impl TryFrom<GraphData> for TranslationGraph {
    type Error = Error;

    fn try_from(g: GraphData) -> Result<Self> {
        TranslationGraph::new(g.languages, g.edges)
    }
}

impl From<TranslationGraph> for GraphData {
    fn from(g: TranslationGraph) -> Self {
        GraphData {
            languages: g.languages,
            edges: g.edges,
        }
    }
}

impl TranslationGraph {
    pub fn new(languages: Vec<Lang>, edges: Vec<Edge>) -> Result<Self> {
        let unique: BTreeSet<&Lang> = languages.iter().collect();
        if unique.len() != languages.len() {
            return Err(Error::Graph("duplicate language".into()));
        }
        let index = |l: &Lang| {
            languages
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::Graph(format!("edge endpoint {l} is not a node")))
        };
        let mut adjacency = vec![Vec::new(); languages.len()];
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for e in edges {
            let (i, j) = (index(&e.a)?, index(&e.b)?);
            if i == j {
                return Err(Error::Graph(format!("self-loop at {}", e.a)));
            }
            let (i, j) = (i.min(j), i.max(j));
            if !seen.insert((i, j)) {
                return Err(Error::Graph(format!("duplicate edge {}-{}", e.a, e.b)));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
            canonical.push(Edge {
                a: languages[i].clone(),
                b: languages[j].clone(),
                n: e.n,
            });
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(TranslationGraph {
            languages,
            edges: canonical,
            adjacency,
        })
    }

    fn names(prefix: &str, k: usize, start: usize) -> Vec<Lang> {
        (start..start + k).map(|i| Lang::new(format!("{prefix}{i}"))).collect()
    }

    /// `L0 - L1 - ... - L{k-1}`.
    pub fn chain(k: usize, n: usize) -> Result<Self> {
        let langs = Self::names("L", k, 0);
        let edges = langs
            .windows(2)
            .map(|w| Edge {
                a: w[0].clone(),
                b: w[1].clone(),
                n,
            })
            .collect();
        Self::new(langs, edges)
    }

    pub fn complete(k: usize, n: usize) -> Result<Self> {
        let langs = Self::names("L", k, 0);
        let mut edges = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                edges.push(Edge {
                    a: langs[i].clone(),
                    b: langs[j].clone(),
                    n,
                });
            }
        }
        Self::new(langs, edges)
    }

    /// The six-language example graph with diameter 4, realized between L3 and L6.
    pub fn six_language_example(n: usize) -> Result<Self> {
        let langs = Self::names("L", 6, 1);
        let pairs = [(1, 2), (1, 3), (1, 4), (2, 4), (4, 5), (5, 6)];
        let edges = pairs
            .iter()
            .map(|&(a, b)| Edge {
                a: langs[a - 1].clone(),
                b: langs[b - 1].clone(),
                n,
            })
            .collect();
        Self::new(langs, edges)
    }

    pub fn languages(&self) -> &[Lang] {
        &self.languages
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn index_of(&self, lang: &Lang) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l == lang)
            .ok_or_else(|| Error::arg(format!("unknown language {lang}")))
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, a: &Lang, b: &Lang) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Ok(i), Ok(j)) => self.adjacency[i].contains(&j),
            _ => false,
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.languages.is_empty() {
            return true;
        }
        self.bfs_parents(0).iter().all(|p| p.is_some())
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Graph("translation graph is not connected".into()))
        }
    }

    /// Breadth-first parents from `src`. Neighbors are visited in index order,
    /// so following parents back gives the lexicographically smallest
    /// shortest path.
    pub(crate) fn bfs_parents(&self, src: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.len()];
        parent[src] = Some(src);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if parent[v].is_none() {
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        parent
    }

    /// Lexicographically smallest shortest path as node indices.
    pub fn shortest_path(&self, src: usize, dst: usize) -> Result<Vec<usize>> {
        let parent = self.bfs_parents(src);
        if parent[dst].is_none() {
            return Err(Error::Graph(format!(
                "no path between {} and {}",
                self.languages[src], self.languages[dst]
            )));
        }
        let mut path = vec![dst];
        let mut cur = dst;
        while cur != src {
            cur = parent[cur].expect("reachable nodes have parents");
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    pub fn path_langs(&self, path: &[usize]) -> Vec<Lang> {
        path.iter().map(|&i| self.languages[i].clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathTable {
    /// Paths for every ordered pair `(i, j)` with `i < j`.
    pub paths: Vec<((usize, usize), Vec<usize>)>,
    pub diameter: usize,
    /// First pair in index order whose path length equals the diameter.
    pub witness: Vec<usize>,
}

pub fn shortest_path_and_diameter(graph: &TranslationGraph) -> Result<PathTable> {
    graph.require_connected()?;
    let mut paths = Vec::new();
    let mut diameter = 0;
    let mut witness = vec![0];
    for i in 0..graph.len() {
        for j in (i + 1)..graph.len() {
            let p = graph.shortest_path(i, j)?;
            if p.len() - 1 > diameter {
                diameter = p.len() - 1;
                witness = p.clone();
            }
            paths.push(((i, j), p));
        }
    }
    Ok(PathTable {
        paths,
        diameter,
        witness,
    })
}
