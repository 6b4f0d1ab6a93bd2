//! Scale-free contact network generation.
//!
//! Nodes arrive one at a time and attach `mu` edges to preexisting nodes,
//! choosing targets without replacement with probability proportional to
//! `degree^k`. With `k = 1` this is the classic linear preferential
//! attachment that yields a power-law degree distribution; other exponents
//! skew the tail. The graph is simple (no loops, no multi-edges) and
//! undirected.
//!
//! The first `mu + 1` nodes form a small connected bootstrap (a ring plus
//! one chord) so every attachment probability is well defined.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetGenError {
    #[error("need at least mu + 2 = {min} nodes to grow a graph with mu = {mu}, got n = {n}")]
    TooFewNodes { n: usize, mu: usize, min: usize },
    #[error("mu must be at least 1, got {mu}")]
    InvalidMu { mu: usize },
    #[error("attachment exponent must be positive and finite, got {k_exp}")]
    InvalidExponent { k_exp: f64 },
    #[error("edge ({u}, {v}) is invalid for {n} nodes: {reason}")]
    InvalidEdge {
        u: usize,
        v: usize,
        n: usize,
        reason: &'static str,
    },
    #[error("edge list line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Generator parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetGenConfig {
    /// Number of nodes.
    pub n: usize,
    /// Edges added by every arriving node.
    pub mu: usize,
    /// Preferential-attachment exponent (`1` = linear/BA).
    pub k_exp: f64,
    /// Generator seed.
    pub seed: u64,
}

impl NetGenConfig {
    pub fn validate(&self) -> Result<(), NetGenError> {
        if self.mu < 1 {
            return Err(NetGenError::InvalidMu { mu: self.mu });
        }
        if self.n < self.mu + 2 {
            return Err(NetGenError::TooFewNodes {
                n: self.n,
                mu: self.mu,
                min: self.mu + 2,
            });
        }
        if !self.k_exp.is_finite() || self.k_exp <= 0.0 {
            return Err(NetGenError::InvalidExponent { k_exp: self.k_exp });
        }
        Ok(())
    }

    /// Same configuration with a different contact density; social
    /// restriction is modeled as regeneration at lower `mu`.
    pub fn with_mu(&self, mu_new: usize) -> Self {
        Self { mu: mu_new, ..*self }
    }
}

/// Simple undirected graph as sorted adjacency lists.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactGraph {
    adj: Vec<Vec<usize>>,
    edges: usize,
}

impl ContactGraph {
    /// Builds a graph from an explicit edge list, rejecting self-loops,
    /// duplicates and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetGenError> {
        let mut graph = ContactGraph { adj: vec![Vec::new(); n], edges: 0 };
        for &(u, v) in edges {
            graph.add_edge(u, v)?;
        }
        for list in &mut graph.adj {
            list.sort_unstable();
        }
        Ok(graph)
    }

    fn add_edge(&mut self, u: usize, v: usize) -> Result<(), NetGenError> {
        let n = self.adj.len();
        if u >= n || v >= n {
            return Err(NetGenError::InvalidEdge { u, v, n, reason: "endpoint out of range" });
        }
        if u == v {
            return Err(NetGenError::InvalidEdge { u, v, n, reason: "self-loop" });
        }
        if self.adj[u].contains(&v) {
            return Err(NetGenError::InvalidEdge { u, v, n, reason: "duplicate edge" });
        }
        self.adj[u].push(v);
        self.adj[v].push(u);
        self.edges += 1;
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges as f64 / self.adj.len() as f64
    }

    /// Plain-text edge list: a `# nodes=<n>` header, then one `u v` pair
    /// per line with `u < v`, sorted.
    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# nodes={}", self.adj.len())?;
        for (u, list) in self.adj.iter().enumerate() {
            for &v in list {
                if u < v {
                    writeln!(out, "{u} {v}")?;
                }
            }
        }
        Ok(())
    }

    /// Parses the format produced by [`Self::write_edge_list`].
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self, NetGenError> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| NetGenError::Parse { line: 1, msg: "empty input".into() })?;
        let header = header?;
        let n: usize = header
            .strip_prefix("# nodes=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| NetGenError::Parse {
                line: 1,
                msg: format!("expected '# nodes=<n>' header, got '{header}'"),
            })?;
        let mut graph = ContactGraph { adj: vec![Vec::new(); n], edges: 0 };
        for (idx, line) in lines {
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let mut parts = text.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize, NetGenError> {
                tok.and_then(|t| t.parse().ok()).ok_or_else(|| NetGenError::Parse {
                    line: idx + 1,
                    msg: format!("expected 'u v' pair, got '{text}'"),
                })
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(NetGenError::Parse {
                    line: idx + 1,
                    msg: format!("trailing tokens in '{text}'"),
                });
            }
            if u >= v {
                return Err(NetGenError::Parse {
                    line: idx + 1,
                    msg: format!("edges must satisfy u < v, got {u} {v}"),
                });
            }
            graph.add_edge(u, v)?;
        }
        for list in &mut graph.adj {
            list.sort_unstable();
        }
        Ok(graph)
    }
}

/// Grows a graph by nonlinear preferential attachment.
///
/// Deterministic for a fixed configuration (including the seed). Every
/// non-bootstrap node arrives with exactly `mu` distinct edges.
pub fn generate(cfg: &NetGenConfig) -> Result<ContactGraph, NetGenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_with(cfg, &mut rng)
}

/// [`generate`] drawing from a caller-supplied stream; the harness routes
/// its per-replicate network substream through here.
pub fn generate_with(cfg: &NetGenConfig, rng: &mut ChaCha8Rng) -> Result<ContactGraph, NetGenError> {
    cfg.validate()?;
    let n0 = cfg.mu + 1;
    let mut graph = ContactGraph { adj: vec![Vec::new(); cfg.n], edges: 0 };

    // Bootstrap: ring plus one chord. Two nodes form a single edge; three
    // form a triangle (the chord would duplicate a ring edge there).
    if n0 == 2 {
        graph.add_edge(0, 1).expect("bootstrap edge");
    } else {
        for u in 0..n0 {
            graph.add_edge(u, (u + 1) % n0).expect("bootstrap ring");
        }
        if n0 >= 4 {
            graph.add_edge(0, n0 / 2).expect("bootstrap chord");
        }
    }

    // Repeated-endpoints list: sampling it uniformly is degree-weighted
    // selection, used as the k = 1 fast path.
    let linear = cfg.k_exp == 1.0;
    let mut endpoints: Vec<usize> = Vec::new();
    if linear {
        endpoints.reserve(2 * (graph.edges + cfg.mu * (cfg.n - n0)));
        for (u, list) in graph.adj.iter().enumerate() {
            for _ in list {
                endpoints.push(u);
            }
        }
    }

    let mut chosen = vec![false; cfg.n];
    let mut targets = Vec::with_capacity(cfg.mu);
    for v in n0..cfg.n {
        targets.clear();
        if linear {
            // Degrees are frozen for the whole arrival: only endpoints
            // recorded before `v` arrived are sampled.
            let len0 = endpoints.len();
            while targets.len() < cfg.mu {
                let t = endpoints[rng.gen_range(0..len0)];
                if !chosen[t] {
                    chosen[t] = true;
                    targets.push(t);
                }
            }
        } else {
            draw_weighted(cfg, &graph, v, rng, &mut chosen, &mut targets);
        }
        for &t in &targets {
            chosen[t] = false;
            graph.add_edge(v, t).expect("arrival edge");
            if linear {
                endpoints.push(v);
                endpoints.push(t);
            }
        }
    }

    for list in &mut graph.adj {
        list.sort_unstable();
    }
    debug_assert_eq!(graph.edges, bootstrap_edges(n0) + cfg.mu * (cfg.n - n0));
    Ok(graph)
}

fn bootstrap_edges(n0: usize) -> usize {
    match n0 {
        2 => 1,
        3 => 3,
        _ => n0 + 1,
    }
}

/// `mu` distinct draws with probability proportional to `degree^k`,
/// renormalized over the not-yet-chosen candidates. Rejection against the
/// frozen cumulative table is exact and cheap; if rejections pile up the
/// table is rebuilt without the already-chosen nodes.
fn draw_weighted(
    cfg: &NetGenConfig,
    graph: &ContactGraph,
    v: usize,
    rng: &mut ChaCha8Rng,
    chosen: &mut [bool],
    targets: &mut Vec<usize>,
) {
    let weight = |node: usize| (graph.degree(node) as f64).powf(cfg.k_exp);
    let build = |chosen: &[bool]| {
        let mut cum = Vec::with_capacity(v);
        let mut total = 0.0;
        for node in 0..v {
            if !chosen[node] {
                total += weight(node);
            }
            cum.push(total);
        }
        (cum, total)
    };
    let (mut cum, mut total) = build(chosen);

    while targets.len() < cfg.mu {
        let mut rejected = 0usize;
        let t = loop {
            let u = rng.gen::<f64>() * total;
            let idx = cum.partition_point(|&c| c <= u).min(v - 1);
            if !chosen[idx] {
                break idx;
            }
            rejected += 1;
            if rejected > 64 {
                let rebuilt = build(chosen);
                cum = rebuilt.0;
                total = rebuilt.1;
                rejected = 0;
            }
        };
        chosen[t] = true;
        targets.push(t);
    }
}

/// Degree summary of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// `histogram[d]` = number of nodes with degree `d`.
    pub histogram: Vec<usize>,
    /// Power-law tail exponent fitted on the log-log complementary CDF
    /// above the median degree; `None` when too few distinct degrees.
    pub tail_exponent: Option<f64>,
}

pub fn degree_stats(graph: &ContactGraph) -> DegreeStats {
    let n = graph.n_nodes();
    let degrees: Vec<usize> = (0..n).map(|u| graph.degree(u)).collect();
    let min = degrees.iter().copied().min().unwrap_or(0);
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0usize; max + 1];
    for &d in &degrees {
        histogram[d] += 1;
    }
    DegreeStats {
        min,
        max,
        mean: graph.mean_degree(),
        tail_exponent: fit_tail_exponent(&degrees),
        histogram,
    }
}

/// Least-squares fit of `ln CCDF(d)` against `ln d` over degrees at or
/// above the median. For `p(d) ~ d^-a` the CCDF falls as `d^-(a-1)`, so
/// the returned exponent is `1 - slope`.
fn fit_tail_exponent(degrees: &[usize]) -> Option<f64> {
    let n = degrees.len();
    if n < 4 {
        return None;
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    let median = sorted[n / 2];
    if median == 0 {
        return None;
    }

    let mut points = Vec::new();
    let mut prev = None;
    for (idx, &d) in sorted.iter().enumerate() {
        if Some(d) != prev {
            prev = Some(d);
            if d >= median && d > 0 {
                let ccdf = (n - idx) as f64 / n as f64;
                points.push(((d as f64).ln(), ccdf.ln()));
            }
        }
    }
    if points.len() < 3 {
        return None;
    }
    let count = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = count * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    let slope = (count * sxy - sx * sy) / denom;
    Some(1.0 - slope)
}
