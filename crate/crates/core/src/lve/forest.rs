//! Forests and trees on labeled vertices `0..n`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{LvrError, Result};

pub const MAX_VERTICES: usize = 6;
/// Decorated enumeration grows like `n^{n-2} 2^{3(n-1)}`; `n = 5` gives 512000 trees.
pub const MAX_DECORATED_VERTICES: usize = 5;

/// Index of the pair `{i, j}` among the `n(n-1)/2` pairs, ordered lexicographically.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// An acyclic set of edges `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Forest {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    /// False if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

impl Forest {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut uf = UnionFind::new(n);
        let mut norm = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(LvrError::InvalidParameter(format!("bad edge ({a}, {b}) for n = {n}")));
            }
            if !uf.union(a, b) {
                return Err(LvrError::InvalidParameter(format!("edge ({a}, {b}) closes a cycle")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        Ok(Forest { n, edges: norm })
    }

    pub fn empty(n: usize) -> Self {
        Forest { n, edges: Vec::new() }
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n
    }

    /// Indices into `edges` along the unique path `i ↔ j`; `None` if disconnected.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        if i == j {
            return Some(Vec::new());
        }
        // Depth-first search from i recording the edge used to reach each vertex.
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(u) = stack.pop() {
            for (e, &(a, b)) in self.edges.iter().enumerate() {
                let w = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen[w] {
                    seen[w] = true;
                    via[w] = Some((u, e));
                    stack.push(w);
                }
            }
        }
        if !seen[j] {
            return None;
        }
        let mut out = Vec::new();
        let mut c = j;
        while let Some((prev, e)) = via[c] {
            out.push(e);
            c = prev;
        }
        out.reverse();
        Some(out)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }
}

fn check_size(n: usize, max: usize) -> Result<()> {
    if n == 0 {
        return Err(LvrError::InvalidParameter("n must be at least 1".into()));
    }
    if n > max {
        return Err(LvrError::SizeBound { size: n, max });
    }
    Ok(())
}

/// Every forest on `n` labeled vertices, each exactly once.
pub fn enumerate_forests(n: usize) -> Result<Vec<Forest>> {
    check_size(n, MAX_VERTICES)?;
    let all = pairs(n);
    let mut out = Vec::new();
    for mask in 0u32..(1 << all.len()) {
        let mut uf = UnionFind::new(n);
        let mut edges = Vec::new();
        let mut ok = true;
        for (k, &(a, b)) in all.iter().enumerate() {
            if mask & (1 << k) != 0 {
                if !uf.union(a, b) {
                    ok = false;
                    break;
                }
                edges.push((a, b));
            }
        }
        if ok {
            out.push(Forest { n, edges });
        }
    }
    Ok(out)
}

/// Spanning trees as oriented edges `(from, to)` with optional end decorations `s ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DecoratedTree {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    /// `(s_from, s_to)` per edge; empty when undecorated.
    pub decorations: Vec<(u8, u8)>,
}

impl DecoratedTree {
    /// Coordination `r_i` of each vertex.
    pub fn coordination(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }
}

/// Spanning trees on `n` vertices; `oriented` doubles each edge, `decorated` adds `2^{2(n-1)}` labelings.
pub fn enumerate_trees(n: usize, oriented: bool, decorated: bool) -> Result<Vec<DecoratedTree>> {
    check_size(n, MAX_VERTICES)?;
    if decorated {
        check_size(n, MAX_DECORATED_VERTICES)?;
    }
    let m = n - 1;
    let mut out = Vec::new();
    for f in enumerate_forests(n)?.into_iter().filter(Forest::is_tree) {
        let orientations = if oriented { 1u32 << m } else { 1 };
        for o in 0..orientations {
            let edges: Vec<(usize, usize)> = f
                .edges
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| if o & (1 << k) != 0 { (b, a) } else { (a, b) })
                .collect();
            if !decorated {
                out.push(DecoratedTree { n, edges, decorations: Vec::new() });
                continue;
            }
            for d in 0u32..(1 << (2 * m)) {
                let decorations = (0..m)
                    .map(|k| (1 + ((d >> (2 * k)) & 1) as u8, 1 + ((d >> (2 * k + 1)) & 1) as u8))
                    .collect();
                out.push(DecoratedTree { n, edges: edges.clone(), decorations });
            }
        }
    }
    Ok(out)
}

/// Labeled trees decoded from all `n^{n-2}` Prüfer sequences.
pub fn prufer_trees(n: usize) -> Result<Vec<Forest>> {
    check_size(n, MAX_VERTICES)?;
    if n == 1 {
        return Ok(vec![Forest::empty(1)]);
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut seq = Vec::with_capacity(len);
        let mut c = code;
        for _ in 0..len {
            seq.push(c % n);
            c /= n;
        }
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf always exists");
            edges.push((leaf, s));
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        out.push(Forest::new(n, edges)?);
    }
    Ok(out)
}

/// Number of labeled trees with coordinations `r`: `(n-2)! / Π (r_i - 1)!`.
pub fn cayley_profile_count(r: &[usize]) -> u64 {
    let n = r.len();
    if n == 1 {
        return 1;
    }
    if r.contains(&0) || r.iter().sum::<usize>() != 2 * (n - 1) {
        return 0;
    }
    let fact = |k: usize| (1..=k as u64).product::<u64>();
    fact(n - 2) / r.iter().map(|&x| fact(x - 1)).product::<u64>()
}

/// Histogram of coordination profiles over a tree list.
pub fn profile_histogram(trees: &[Forest]) -> BTreeMap<Vec<usize>, u64> {
    let mut h = BTreeMap::new();
    for t in trees {
        *h.entry(t.degrees()).or_insert(0) += 1;
    }
    h
}

/// Edge list with one row per edge: `tree,from,to,s_from,s_to`.
pub fn trees_to_csv(trees: &[DecoratedTree]) -> String {
    let mut out = String::from("tree,from,to,s_from,s_to\n");
    for (t, tree) in trees.iter().enumerate() {
        for (k, &(a, b)) in tree.edges.iter().enumerate() {
            let (sa, sb) = tree.decorations.get(k).map_or((String::new(), String::new()), |&(x, y)| (x.to_string(), y.to_string()));
            out.push_str(&format!("{t},{a},{b},{sa},{sb}\n"));
        }
    }
    out
}
