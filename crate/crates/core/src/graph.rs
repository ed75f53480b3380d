//! Retweet/reply engagement graph, cascade extraction as weakly connected
//! components, misinformation labeling of source tweets, and spread traces.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CategorySet, SourceCatalog};
use crate::geo::{Centroids, GeoIndex};
use crate::ingest::CorpusStore;
use crate::tweet::EngagementKind;
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub child: u32,
    pub parent: u32,
    pub kind: EngagementKind,
}

/// Engagement edges over store positions; node `i` is `store.tweets()[i]`.
#[derive(Debug, Clone, Default)]
pub struct EngagementGraph {
    ids: Vec<u64>,
    timestamps: Vec<Option<i64>>,
    parent_of: Vec<Option<u32>>,
    edges: Vec<Edge>,
    pub dangling_count: u64,
    pub time_inverted_count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: u64,
    pub edge_count: u64,
    pub dangling_count: u64,
    pub time_inverted_count: u64,
    pub cascade_count: u64,
    pub max_cascade_size: u64,
    pub max_depth: u64,
}

impl EngagementGraph {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Graph over explicit nodes and child→parent links, for callers that
    /// have no corpus store. Links to unknown ids count as dangling and self
    /// links are ignored.
    pub fn from_links(nodes: &[(u64, Option<i64>)], links: &[(u64, u64)]) -> EngagementGraph {
        let mut order: Vec<(u64, Option<i64>)> = nodes.to_vec();
        order.sort_by_key(|n| n.0);
        order.dedup_by_key(|n| n.0);
        let ids: Vec<u64> = order.iter().map(|n| n.0).collect();
        let timestamps = order.iter().map(|n| n.1).collect();
        let mut parents: Vec<Option<u64>> = vec![None; ids.len()];
        let mut dangling = 0;
        for &(child, parent) in links {
            match ids.binary_search(&child) {
                Ok(i) if child != parent => parents[i] = Some(parent),
                Ok(_) => {}
                Err(_) => dangling += 1,
            }
        }
        let mut g = Self::assemble(
            ids,
            timestamps,
            parents
                .into_iter()
                .map(|p| p.map(|p| (p, EngagementKind::Reply))),
        );
        g.dangling_count += dangling;
        g
    }

    fn assemble(
        ids: Vec<u64>,
        timestamps: Vec<Option<i64>>,
        parents: impl Iterator<Item = Option<(u64, EngagementKind)>>,
    ) -> EngagementGraph {
        let mut g = EngagementGraph {
            parent_of: vec![None; ids.len()],
            ids,
            timestamps,
            ..Default::default()
        };
        for (child, parent) in parents.enumerate() {
            let Some((parent_id, kind)) = parent else {
                continue;
            };
            match g.ids.binary_search(&parent_id) {
                Ok(p) if p != child => {
                    g.parent_of[child] = Some(p as u32);
                    g.edges.push(Edge {
                        child: child as u32,
                        parent: p as u32,
                        kind,
                    });
                    if let (Some(c), Some(pt)) = (g.timestamps[child], g.timestamps[p]) {
                        if c < pt {
                            g.time_inverted_count += 1;
                        }
                    }
                }
                Ok(_) => {}
                Err(_) => g.dangling_count += 1,
            }
        }
        g
    }
}

/// One node per stored tweet and one edge per resolvable parent reference.
pub fn build_engagement_graph(store: &CorpusStore) -> EngagementGraph {
    let tweets = store.tweets();
    EngagementGraph::assemble(
        tweets.iter().map(|t| t.id).collect(),
        tweets.iter().map(|t| t.created_at).collect(),
        tweets
            .iter()
            .map(|t| t.parent.map(|p| (p.parent_id, p.kind))),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeMember {
    #[serde(with = "crate::id_string")]
    pub tweet_id: u64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "crate::id_string::option"
    )]
    pub parent_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
}

/// A source tweet and everything that engaged with it.
///
/// The root is always `members[0]`; the remaining members are ordered by
/// (timestamp, id) with undated tweets last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cascade {
    #[serde(with = "crate::id_string")]
    pub root_id: u64,
    pub members: Vec<CascadeMember>,
    pub size: usize,
    pub depth: usize,
    pub categories: CategorySet,
    #[serde(default)]
    pub source_urls: Vec<String>,
    /// Catalog domains matched by the root's urls, in url order.
    #[serde(default)]
    pub matched_domains: Vec<String>,
}

impl Cascade {
    pub fn root(&self) -> &CascadeMember {
        &self.members[0]
    }

    pub fn is_misinformation(&self) -> bool {
        !self.categories.is_empty()
    }

    pub fn responses(&self) -> usize {
        self.size - 1
    }
}

/// Nodes on the parent cycle reached from `start`, which must lie in a
/// component without a parentless node.
fn cycle_nodes(parent_of: &[Option<u32>], start: u32) -> Vec<u32> {
    let mut seen = std::collections::HashSet::new();
    let mut v = start;
    while seen.insert(v) {
        v = parent_of[v as usize].expect("component without a root is a cycle");
    }
    let mut cycle = vec![v];
    let mut u = parent_of[v as usize].expect("on cycle");
    while u != v {
        cycle.push(u);
        u = parent_of[u as usize].expect("on cycle");
    }
    cycle
}

fn time_order(a: (Option<i64>, u64), b: (Option<i64>, u64)) -> Ordering {
    match (a.0, b.0) {
        (Some(x), Some(y)) => x.cmp(&y).then(a.1.cmp(&b.1)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.1.cmp(&b.1),
    }
}

/// Partitions the graph into weakly connected components and roots each at
/// its source post. `store` supplies the root urls; pass `None` when the
/// graph was built without one.
pub fn extract_cascades(graph: &EngagementGraph, store: Option<&CorpusStore>) -> Vec<Cascade> {
    let n = graph.node_count();
    let mut uf = UnionFind::new(n);
    for e in &graph.edges {
        uf.union(e.child as usize, e.parent as usize);
    }

    // group nodes by component, groups ordered by their smallest node
    let mut group_of_root: Vec<u32> = vec![u32::MAX; n];
    let mut group_sizes: Vec<u32> = Vec::new();
    let mut node_group: Vec<u32> = vec![0; n];
    for (v, slot) in node_group.iter_mut().enumerate() {
        let r = uf.find(v);
        if group_of_root[r] == u32::MAX {
            group_of_root[r] = group_sizes.len() as u32;
            group_sizes.push(0);
        }
        let g = group_of_root[r];
        group_sizes[g as usize] += 1;
        *slot = g;
    }
    let mut offsets: Vec<usize> = Vec::with_capacity(group_sizes.len() + 1);
    offsets.push(0);
    for s in &group_sizes {
        offsets.push(offsets.last().unwrap() + *s as usize);
    }
    let mut cursor = offsets.clone();
    let mut grouped: Vec<u32> = vec![0; n];
    for (v, &g) in node_group.iter().enumerate() {
        grouped[cursor[g as usize]] = v as u32;
        cursor[g as usize] += 1;
    }

    // children adjacency in CSR form
    let mut child_count: Vec<u32> = vec![0; n + 1];
    for e in &graph.edges {
        child_count[e.parent as usize + 1] += 1;
    }
    for i in 1..=n {
        child_count[i] += child_count[i - 1];
    }
    let child_start = child_count;
    let mut fill = child_start.clone();
    let mut children: Vec<u32> = vec![0; graph.edges.len()];
    for e in &graph.edges {
        children[fill[e.parent as usize] as usize] = e.child;
        fill[e.parent as usize] += 1;
    }

    let key = |v: u32| (graph.timestamps[v as usize], graph.ids[v as usize]);
    let mut depth_of: Vec<u32> = vec![u32::MAX; n];
    let mut queue: VecDeque<u32> = VecDeque::new();
    let mut cascades = Vec::with_capacity(group_sizes.len());
    for g in 0..group_sizes.len() {
        let nodes = &grouped[offsets[g]..offsets[g + 1]];
        let root = nodes
            .iter()
            .copied()
            .filter(|&v| graph.parent_of[v as usize].is_none())
            .min_by(|&a, &b| time_order(key(a), key(b)))
            // a parent cycle leaves no parentless node; cut it at the
            // earliest tweet on the cycle so every member stays reachable
            .unwrap_or_else(|| {
                cycle_nodes(&graph.parent_of, nodes[0])
                    .into_iter()
                    .min_by(|&a, &b| time_order(key(a), key(b)))
                    .expect("cycles are non-empty")
            });

        depth_of[root as usize] = 0;
        queue.push_back(root);
        let mut depth = 0u32;
        while let Some(v) = queue.pop_front() {
            let d = depth_of[v as usize];
            depth = depth.max(d);
            let range = child_start[v as usize] as usize..child_start[v as usize + 1] as usize;
            for &c in &children[range] {
                if depth_of[c as usize] == u32::MAX {
                    depth_of[c as usize] = d + 1;
                    queue.push_back(c);
                }
            }
        }

        let member = |v: u32| CascadeMember {
            tweet_id: graph.ids[v as usize],
            parent_id: if v == root {
                None
            } else {
                graph.parent_of[v as usize].map(|p| graph.ids[p as usize])
            },
            timestamp: graph.timestamps[v as usize],
        };
        let mut rest: Vec<u32> = nodes.iter().copied().filter(|&v| v != root).collect();
        rest.sort_by(|&a, &b| time_order(key(a), key(b)));
        let mut members = Vec::with_capacity(nodes.len());
        members.push(member(root));
        members.extend(rest.into_iter().map(member));

        let root_id = graph.ids[root as usize];
        let source_urls = store
            .and_then(|s| s.get(root_id))
            .map(|t| t.urls.clone())
            .unwrap_or_default();
        cascades.push(Cascade {
            root_id,
            size: members.len(),
            members,
            depth: depth as usize,
            categories: CategorySet::EMPTY,
            source_urls,
            matched_domains: Vec::new(),
        });
    }
    cascades.sort_by_key(|c| c.root_id);
    cascades
}

/// Source-tweet counts behind the misinformation fraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MisinfoStats {
    #[serde(rename = "sources")]
    pub n_source_tweets: u64,
    #[serde(rename = "sources_with_urls")]
    pub n_source_with_urls: u64,
    #[serde(rename = "misinfo")]
    pub n_misinfo_source: u64,
    /// `misinfo / sources_with_urls`, 0 when no source carries a url.
    pub fraction: f64,
}

/// Labels every cascade from its root's urls only.
pub fn label_cascades(cascades: &mut [Cascade], catalog: &SourceCatalog) -> MisinfoStats {
    let mut stats = MisinfoStats::default();
    for c in cascades.iter_mut() {
        stats.n_source_tweets += 1;
        c.categories = CategorySet::EMPTY;
        c.matched_domains.clear();
        if c.source_urls.is_empty() {
            continue;
        }
        stats.n_source_with_urls += 1;
        for url in &c.source_urls {
            if let Some(m) = catalog.lookup(url) {
                c.categories = c.categories.union(m.entry.categories);
                if !c.matched_domains.iter().any(|d| d == m.domain) {
                    c.matched_domains.push(m.domain.to_string());
                }
            }
        }
        if c.is_misinformation() {
            stats.n_misinfo_source += 1;
        }
    }
    stats.fraction = if stats.n_source_with_urls == 0 {
        0.0
    } else {
        stats.n_misinfo_source as f64 / stats.n_source_with_urls as f64
    };
    stats
}

pub fn graph_stats(graph: &EngagementGraph, cascades: &[Cascade]) -> GraphStats {
    GraphStats {
        node_count: graph.node_count() as u64,
        edge_count: graph.edge_count() as u64,
        dangling_count: graph.dangling_count,
        time_inverted_count: graph.time_inverted_count,
        cascade_count: cascades.len() as u64,
        max_cascade_size: cascades.iter().map(|c| c.size).max().unwrap_or(0) as u64,
        max_depth: cascades.iter().map(|c| c.depth).max().unwrap_or(0) as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Source,
    Response,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadPoint {
    #[serde(with = "crate::id_string")]
    pub tweet_id: u64,
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    pub kind: PointKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpreadTrace {
    pub points: Vec<SpreadPoint>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("no member of cascade {0} is geo-resolved")]
    EmptyTrace(u64),
}

/// Time-ordered points for geo-resolved, dated members. Raw coordinates
/// take precedence over country/state centroids.
pub fn cascade_spread_trace(
    cascade: &Cascade,
    geo: &GeoIndex,
    centroids: &Centroids,
) -> Result<SpreadTrace, TraceError> {
    let mut points: Vec<SpreadPoint> = cascade
        .members
        .iter()
        .filter_map(|m| {
            let t = m.timestamp?;
            let res = geo.get(m.tweet_id)?;
            let (lat, lon) = match (res.lat, res.lon) {
                (Some(lat), Some(lon)) => (lat, lon),
                _ => centroids.lookup(res.country.as_deref()?, res.us_state.as_deref())?,
            };
            let kind = if m.tweet_id == cascade.root_id {
                PointKind::Source
            } else {
                PointKind::Response
            };
            Some(SpreadPoint {
                tweet_id: m.tweet_id,
                t,
                lat,
                lon,
                kind,
            })
        })
        .collect();
    if points.is_empty() {
        return Err(TraceError::EmptyTrace(cascade.root_id));
    }
    points.sort_by(|a, b| {
        a.t.cmp(&b.t)
            .then((a.kind == PointKind::Response).cmp(&(b.kind == PointKind::Response)))
            .then(a.tweet_id.cmp(&b.tweet_id))
    });
    Ok(SpreadTrace { points })
}
