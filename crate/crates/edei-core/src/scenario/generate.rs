//! Seeded generators for the built-in sites: a storage warehouse, a factory
//! with production lines, an airport logistics hall, and a desk-scale
//! reduced warehouse for fast experiments.
//!
//! Everything the layout leaves open (assignment placement, deadlines,
//! spread couplings, initial incidents) is drawn from named RNG streams of
//! the given seed, so the same call is byte-identical every time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::AssetCategory;
use crate::scenario::{NodeSpec, ScenarioConfig, ScenarioError};
use crate::seed;

const TAG_ASSIGN: u64 = 0xB1;
const TAG_SPREAD: u64 = 0xB2;
const TAG_INCIDENTS: u64 = 0xB3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Storage,
    Factory,
    Airport,
    /// A 12-node warehouse for quick training runs and tests.
    StorageReduced,
}

impl ScenarioKind {
    pub fn slug(self) -> &'static str {
        match self {
            ScenarioKind::Storage => "storage",
            ScenarioKind::Factory => "factory",
            ScenarioKind::Airport => "airport",
            ScenarioKind::StorageReduced => "storage-reduced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "storage" => Some(ScenarioKind::Storage),
            "factory" => Some(ScenarioKind::Factory),
            "airport" => Some(ScenarioKind::Airport),
            "storage-reduced" => Some(ScenarioKind::StorageReduced),
            _ => None,
        }
    }
}

/// The nine benchmark cells: each full-size site at matched agent and
/// initial incident counts.
pub fn table_cells() -> Vec<(ScenarioKind, u32, u32)> {
    let kinds = [ScenarioKind::Storage, ScenarioKind::Factory, ScenarioKind::Airport];
    let counts = [(2, 4), (3, 6), (4, 8)];
    kinds
        .iter()
        .flat_map(|&k| counts.iter().map(move |&(a, i)| (k, a, i)))
        .collect()
}

pub fn generate(
    kind: ScenarioKind,
    agents: u32,
    incidents: u32,
    seed: u64,
) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg = match kind {
        ScenarioKind::Storage => storage_layout(),
        ScenarioKind::Factory => factory_layout(),
        ScenarioKind::Airport => airport_layout(),
        ScenarioKind::StorageReduced => reduced_layout(),
    };
    cfg.name = format!("{}-a{agents}-i{incidents}", kind.slug());

    let start_area = start_area(kind, &cfg);
    if agents == 0 {
        return Err(ScenarioError::Generate("agent count must be positive".into()));
    }
    if agents as usize > start_area.len() {
        return Err(ScenarioError::Generate(format!(
            "{} supports at most {} agents",
            kind.slug(),
            start_area.len()
        )));
    }
    cfg.agent_start = evenly_spaced(&start_area, agents as usize);

    if (agents + incidents) as usize > cfg.nodes.len() {
        return Err(ScenarioError::Generate(format!(
            "{} cannot place {incidents} incidents clear of {agents} agents",
            kind.slug()
        )));
    }
    let mut rng = seed::derive_rng(seed, TAG_INCIDENTS);
    let pool: Vec<u32> = (0..cfg.nodes.len() as u32)
        .filter(|id| !cfg.agent_start.contains(id))
        .collect();
    let mut picked = sample_distinct(&mut rng, &pool, incidents as usize);
    picked.sort_unstable();
    cfg.initial_incidents = picked;

    let mut rng = seed::derive_rng(seed, TAG_ASSIGN);
    place_assignments(kind, &mut cfg, &mut rng);

    let mut rng = seed::derive_rng(seed, TAG_SPREAD);
    let (k, near, extras) = spread_profile(kind, cfg.nodes.len());
    cfg.spread_edges = spread_couplings(&cfg.nodes, k, near, extras, &mut rng);

    cfg.validate()?;
    Ok(cfg)
}

fn start_area(kind: ScenarioKind, cfg: &ScenarioConfig) -> Vec<u32> {
    let pool: Vec<u32> = match kind {
        // Inbound strip: the two lowest lattice rows.
        ScenarioKind::Storage => (0..2 * STORAGE_COLS).collect(),
        // Support column nodes.
        ScenarioKind::Factory => (32..36).collect(),
        // Receiving desks.
        ScenarioKind::Airport => (0..4).collect(),
        // First lattice row.
        ScenarioKind::StorageReduced => (0..4).collect(),
    };
    pool.into_iter()
        .filter(|&id| (id as usize) < cfg.nodes.len())
        .collect()
}

fn evenly_spaced(pool: &[u32], count: usize) -> Vec<u32> {
    (0..count)
        .map(|a| pool[((a as f64 + 0.5) * pool.len() as f64 / count as f64) as usize])
        .collect()
}

/// Takes `count` distinct elements of `pool` by partial Fisher-Yates.
fn sample_distinct(rng: &mut ChaCha8Rng, pool: &[u32], count: usize) -> Vec<u32> {
    assert!(count <= pool.len());
    let mut pool = pool.to_vec();
    for k in 0..count {
        let j = k + rng.random_range(0..pool.len() - k);
        pool.swap(k, j);
    }
    pool.truncate(count);
    pool
}

fn shuffle(rng: &mut ChaCha8Rng, items: &mut [u32]) {
    for k in (1..items.len()).rev() {
        let j = rng.random_range(0..=k);
        items.swap(k, j);
    }
}

/// `count` deadlines evenly spaced across [lo, hi].
fn spaced_deadlines(count: usize, lo: u32, hi: u32) -> Vec<u32> {
    if count <= 1 {
        return vec![(lo + hi) / 2; count];
    }
    (0..count)
        .map(|k| lo + ((k as f64) * (hi - lo) as f64 / (count - 1) as f64).round() as u32)
        .collect()
}

fn spread_profile(kind: ScenarioKind, n: usize) -> (usize, (f64, f64), Option<(f64, (f64, f64))>) {
    match kind {
        ScenarioKind::StorageReduced => (2, (0.2, 0.5), None),
        _ => (3, (0.2, 0.6), Some((0.5 / (n as f64 - 1.0), (0.05, 0.25)))),
    }
}

/// Directed spread couplings: each node reaches its `k` nearest neighbors
/// (Manhattan over positions) at a strong base rate, plus sparse random
/// long-range pairs at a weak rate when `extras` is set.
fn spread_couplings(
    nodes: &[NodeSpec],
    k: usize,
    near: (f64, f64),
    extras: Option<(f64, (f64, f64))>,
    rng: &mut ChaCha8Rng,
) -> Vec<(u32, u32, f64)> {
    let n = nodes.len();
    let mut present = vec![false; n * n];
    let mut edges = Vec::new();
    for i in 0..n {
        let mut by_dist: Vec<(u32, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = nodes[i].x.abs_diff(nodes[j].x);
                let dy = nodes[i].y.abs_diff(nodes[j].y);
                (dx + dy, j)
            })
            .collect();
        by_dist.sort_unstable();
        for &(_, j) in by_dist.iter().take(k) {
            present[i * n + j] = true;
            edges.push((i as u32, j as u32, rng.random_range(near.0..near.1)));
        }
    }
    if let Some((p, weak)) = extras {
        for i in 0..n {
            for j in 0..n {
                if i == j || present[i * n + j] {
                    continue;
                }
                if rng.random::<f64>() < p {
                    edges.push((i as u32, j as u32, rng.random_range(weak.0..weak.1)));
                }
            }
        }
    }
    edges.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    edges
}

fn place_assignments(kind: ScenarioKind, cfg: &mut ScenarioConfig, rng: &mut ChaCha8Rng) {
    match kind {
        ScenarioKind::Storage => {
            let pool: Vec<u32> = flammable_ids(cfg);
            let mut nodes = sample_distinct(rng, &pool, 85);
            nodes.sort_unstable();
            let mut deadlines = spaced_deadlines(85, 50, 650);
            shuffle(rng, &mut deadlines);
            cfg.assignments = zip_assignments(cfg, &nodes, &deadlines);
        }
        ScenarioKind::Factory => {
            // Six stations per line, deadlines growing downstream.
            let mut assignments = Vec::new();
            for line in 0..4u32 {
                for m in 1..=6u32 {
                    let node = line * 8 + m;
                    let deadline = 60 + m * 55;
                    assignments.push((node, deadline, cfg.nodes[node as usize].assets));
                }
            }
            assignments.sort_unstable_by_key(|a| a.0);
            cfg.assignments = assignments;
        }
        ScenarioKind::Airport => {
            // All cargo positions plus the four loading bays.
            let nodes: Vec<u32> = (10..22).chain(26..30).collect();
            let mut deadlines = spaced_deadlines(nodes.len(), 20, 160);
            shuffle(rng, &mut deadlines);
            cfg.assignments = zip_assignments(cfg, &nodes, &deadlines);
        }
        ScenarioKind::StorageReduced => {
            let pool: Vec<u32> = flammable_ids(cfg);
            let mut nodes = sample_distinct(rng, &pool, 6);
            nodes.sort_unstable();
            let mut deadlines = spaced_deadlines(6, 12, 88);
            shuffle(rng, &mut deadlines);
            cfg.assignments = zip_assignments(cfg, &nodes, &deadlines);
        }
    }
}

fn flammable_ids(cfg: &ScenarioConfig) -> Vec<u32> {
    cfg.nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.category == AssetCategory::Flammable)
        .map(|(i, _)| i as u32)
        .collect()
}

fn zip_assignments(
    cfg: &ScenarioConfig,
    nodes: &[u32],
    deadlines: &[u32],
) -> Vec<(u32, u32, u32)> {
    nodes
        .iter()
        .zip(deadlines)
        .map(|(&node, &deadline)| (node, deadline, cfg.nodes[node as usize].assets))
        .collect()
}

const STORAGE_COLS: u32 = 14;
const STORAGE_ROWS: u32 = 16;

/// Lattice coordinate for slot `i` of `slots` spread across `extent` cells.
fn lattice_coord(i: u32, slots: u32, extent: u32) -> u32 {
    ((i as f64 + 0.5) * extent as f64 / slots as f64 - 0.5).round() as u32
}

fn scalar_defaults(cfg: &mut ScenarioConfig) {
    cfg.tau = 1.0;
    cfg.beta = 0.2;
    cfg.f_seed = 0.1;
    cfg.sense_radius = 3;
    cfg.suppression = 0.25;
    cfg.ct_assign = 2;
    cfg.delta_t = 2;
}

fn empty_config() -> ScenarioConfig {
    ScenarioConfig {
        name: String::new(),
        grid: (1, 1),
        t_max: 1,
        tau: 1.0,
        beta: 0.2,
        f_seed: 0.1,
        sense_radius: 1,
        suppression: 0.25,
        ct_assign: 2,
        delta_t: 2,
        k_line: 1,
        n_checked: 1,
        agent_start: Vec::new(),
        initial_incidents: Vec::new(),
        nodes: Vec::new(),
        edges: Vec::new(),
        spread_edges: Vec::new(),
        assignments: Vec::new(),
    }
}

/// 224 nodes on a 14x16 lattice over a 24x36 grid. The two lowest rows are
/// the inbound strip, the two highest the outbound strip, four central
/// nodes are support depots, and the rest is high-value storage.
fn storage_layout() -> ScenarioConfig {
    let mut cfg = empty_config();
    cfg.grid = (24, 36);
    cfg.t_max = 700;
    cfg.k_line = 1;
    cfg.n_checked = 85;
    scalar_defaults(&mut cfg);

    for j in 0..STORAGE_ROWS {
        for i in 0..STORAGE_COLS {
            let (assets, category) = if j < 2 || j >= STORAGE_ROWS - 2 {
                (100, AssetCategory::General)
            } else if (j == 7 || j == 8) && (i == 3 || i == 10) {
                (100, AssetCategory::Support)
            } else {
                (200, AssetCategory::Flammable)
            };
            cfg.nodes.push(NodeSpec {
                x: lattice_coord(i, STORAGE_COLS, cfg.grid.0),
                y: lattice_coord(j, STORAGE_ROWS, cfg.grid.1),
                assets,
                category,
            });
        }
    }
    cfg.edges = lattice_edges(STORAGE_COLS, STORAGE_ROWS);
    cfg
}

fn lattice_edges(cols: u32, rows: u32) -> Vec<(u32, u32, u32)> {
    let mut edges = Vec::new();
    for j in 0..rows {
        for i in 0..cols {
            let id = j * cols + i;
            if i + 1 < cols {
                edges.push((id, id + 1, 1));
            }
            if j + 1 < rows {
                edges.push((id, id + cols, 1));
            }
        }
    }
    edges.sort_unstable_by_key(|&(a, b, _)| (a, b));
    edges
}

/// 40 nodes on a 25x32 grid: four production lines of eight stations plus a
/// support column and a storage column between the lines.
fn factory_layout() -> ScenarioConfig {
    let mut cfg = empty_config();
    cfg.grid = (25, 32);
    cfg.t_max = 500;
    cfg.k_line = 4;
    cfg.n_checked = 24;
    scalar_defaults(&mut cfg);

    for line in 0..4u32 {
        for m in 0..8u32 {
            cfg.nodes.push(NodeSpec {
                x: 3 + 6 * line,
                y: 2 + 4 * m,
                assets: 100,
                category: AssetCategory::General,
            });
        }
    }
    for &y in &[6u32, 14, 22, 30] {
        cfg.nodes.push(NodeSpec { x: 6, y, assets: 100, category: AssetCategory::Support });
    }
    for &y in &[6u32, 14, 22, 30] {
        cfg.nodes.push(NodeSpec { x: 18, y, assets: 200, category: AssetCategory::Flammable });
    }

    let mut edges = Vec::new();
    for line in 0..4u32 {
        for m in 0..7u32 {
            edges.push((line * 8 + m, line * 8 + m + 1, 1));
        }
    }
    for line in 0..3u32 {
        edges.push((line * 8, (line + 1) * 8, 1));
        edges.push((line * 8 + 7, (line + 1) * 8 + 7, 1));
    }
    // Support depots hang between lines 0 and 1, storage between 2 and 3.
    for (idx, &y) in [6u32, 14, 22, 30].iter().enumerate() {
        let m = (y - 2) / 4;
        edges.push((m, 32 + idx as u32, 1));
        edges.push((8 + m, 32 + idx as u32, 1));
        edges.push((16 + m, 36 + idx as u32, 1));
        edges.push((24 + m, 36 + idx as u32, 1));
    }
    edges.sort_unstable_by_key(|&(a, b, _)| (a, b));
    cfg.edges = edges;
    cfg
}

/// 31 nodes on a 13x21 grid: receiving desks, a security row, two cargo
/// rows, punching stations, loading bays, and one support depot.
fn airport_layout() -> ScenarioConfig {
    let mut cfg = empty_config();
    cfg.grid = (13, 21);
    cfg.t_max = 180;
    cfg.k_line = 4;
    cfg.n_checked = 16;
    scalar_defaults(&mut cfg);

    let rows: [(&[u32], u32, u32, AssetCategory); 6] = [
        (&[1, 4, 8, 11], 1, 100, AssetCategory::General),
        (&[1, 3, 5, 7, 9, 11], 4, 100, AssetCategory::General),
        (&[1, 3, 5, 7, 9, 11], 8, 200, AssetCategory::Flammable),
        (&[1, 3, 5, 7, 9, 11], 11, 200, AssetCategory::Flammable),
        (&[2, 5, 8, 11], 15, 100, AssetCategory::General),
        (&[2, 5, 8, 11], 18, 100, AssetCategory::General),
    ];
    for (xs, y, assets, category) in rows {
        for &x in xs {
            cfg.nodes.push(NodeSpec { x, y, assets, category });
        }
    }
    cfg.nodes.push(NodeSpec { x: 6, y: 13, assets: 100, category: AssetCategory::Support });

    let mut edges: Vec<(u32, u32, u32)> = Vec::new();
    let chains: [(u32, u32); 6] = [(0, 4), (4, 10), (10, 16), (16, 22), (22, 26), (26, 30)];
    for (lo, hi) in chains {
        for id in lo..hi - 1 {
            edges.push((id, id + 1, 1));
        }
    }
    let vertical: &[(u32, u32)] = &[
        (0, 4), (1, 5), (2, 7), (3, 9),
        (4, 10), (5, 11), (6, 12), (7, 13), (8, 14), (9, 15),
        (10, 16), (11, 17), (12, 18), (13, 19), (14, 20), (15, 21),
        (16, 22), (18, 23), (20, 24), (21, 25),
        (22, 26), (23, 27), (24, 28), (25, 29),
        (18, 30), (23, 30),
    ];
    edges.extend(vertical.iter().map(|&(a, b)| (a, b, 1)));
    edges.sort_unstable_by_key(|&(a, b, _)| (a, b));
    cfg.edges = edges;
    cfg
}

/// 12 nodes on a 4x3 lattice over an 8x6 grid.
fn reduced_layout() -> ScenarioConfig {
    let mut cfg = empty_config();
    cfg.grid = (8, 6);
    cfg.t_max = 100;
    cfg.k_line = 1;
    cfg.n_checked = 6;
    scalar_defaults(&mut cfg);

    for j in 0..3u32 {
        for i in 0..4u32 {
            let (assets, category) = if j == 0 {
                (100, AssetCategory::General)
            } else if j == 1 && i == 0 {
                (100, AssetCategory::Support)
            } else {
                (200, AssetCategory::Flammable)
            };
            cfg.nodes.push(NodeSpec { x: 2 * i, y: 2 * j, assets, category });
        }
    }
    cfg.edges = lattice_edges(4, 3);
    cfg
}
