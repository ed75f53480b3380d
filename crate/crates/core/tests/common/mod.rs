// Shared brute-force oracles for the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::{Path, PathBuf};

use infodemic::geo::Gazetteer;
use infodemic::graph::{Cascade, EngagementGraph};
use infodemic::synth::{write_corpus, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Nodes = Vec<(u64, Option<i64>)>;
pub type Links = Vec<(u64, u64)>;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn gazetteer() -> Gazetteer {
    Gazetteer::load(&data_dir().join("gazetteer.csv")).unwrap()
}

pub fn synth_lines(n: usize, seed: u64) -> Vec<String> {
    let params = SynthParams {
        n_tweets: n,
        seed,
        ..SynthParams::default()
    };
    let mut buf = Vec::new();
    write_corpus(&params, &mut buf).unwrap();
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

/// Random nodes with optional timestamps plus child→parent link records,
/// including repeats, self links and links to unknown ids.
pub fn random_links(rng: &mut ChaCha8Rng, max_nodes: usize, max_links: usize) -> (Nodes, Links) {
    let n = rng.gen_range(1..=max_nodes);
    let nodes: Nodes = (0..n)
        .map(|i| {
            let id = i as u64 * 3 + 1;
            let ts = rng.gen_bool(0.95).then(|| rng.gen_range(0..1_000_000));
            (id, ts)
        })
        .collect();
    let m = rng.gen_range(0..=max_links);
    let links = (0..m)
        .map(|_| {
            let child = nodes[rng.gen_range(0..n)].0;
            let parent = match rng.gen_range(0..20) {
                0 => child,
                1 => rng.gen_range(0..n as u64 * 3 + 5),
                _ => nodes[rng.gen_range(0..n)].0,
            };
            (child, parent)
        })
        .collect();
    (nodes, links)
}

/// Weakly connected components by BFS over the undirected edge list, as
/// sorted id sets.
pub fn bfs_components(graph: &EngagementGraph) -> BTreeSet<Vec<u64>> {
    let n = graph.node_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in graph.edges() {
        adj[e.child as usize].push(e.parent as usize);
        adj[e.parent as usize].push(e.child as usize);
    }
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![graph.ids()[s]];
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(graph.ids()[v]);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.insert(comp);
    }
    out
}

pub fn cascade_components(cascades: &[Cascade]) -> BTreeSet<Vec<u64>> {
    cascades
        .iter()
        .map(|c| {
            let mut ids: Vec<u64> = c.members.iter().map(|m| m.tweet_id).collect();
            ids.sort_unstable();
            ids
        })
        .collect()
}

/// Checks the rooted-tree shape of one cascade; returns a reason on failure.
pub fn tree_violation(c: &Cascade) -> Option<String> {
    if c.size != c.members.len() {
        return Some(format!("size {} != members {}", c.size, c.members.len()));
    }
    let roots = c.members.iter().filter(|m| m.parent_id.is_none()).count();
    if roots != 1 || c.members[0].parent_id.is_some() || c.members[0].tweet_id != c.root_id {
        return Some(format!("cascade {} has {roots} roots", c.root_id));
    }
    let ids: BTreeSet<u64> = c.members.iter().map(|m| m.tweet_id).collect();
    let mut children: HashMap<u64, Vec<u64>> = HashMap::new();
    let mut edges = 0;
    for m in &c.members {
        if let Some(p) = m.parent_id {
            if !ids.contains(&p) {
                return Some(format!("parent {p} outside cascade {}", c.root_id));
            }
            children.entry(p).or_default().push(m.tweet_id);
            edges += 1;
        }
    }
    if edges != c.size - 1 {
        return Some(format!("{edges} edges for size {}", c.size));
    }
    // depth by BFS from the root; also proves reachability
    let mut depth = BTreeMap::from([(c.root_id, 0usize)]);
    let mut queue = VecDeque::from([c.root_id]);
    while let Some(u) = queue.pop_front() {
        for &v in children.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if depth.insert(v, depth[&u] + 1).is_some() {
                return Some(format!("{v} reached twice"));
            }
            queue.push_back(v);
        }
    }
    if depth.len() != c.size {
        return Some(format!("{} of {} members reachable", depth.len(), c.size));
    }
    let max_depth = depth.values().copied().max().unwrap_or(0);
    (max_depth != c.depth).then(|| format!("depth {} != {max_depth}", c.depth))
}

/// Centered closed-form least squares slope.
pub fn closed_form_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / n;
    let num: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (i as f64 - xbar) * (y - ybar))
        .sum();
    let den: f64 = (0..ys.len()).map(|i| (i as f64 - xbar).powi(2)).sum();
    num / den
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
