//! Ride-hailing scenario builder, recommended solver parameters and seeded
//! random instances.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{lipschitz_bounds, PopulationGame, SimplexPoint, SwitchingCosts, UtilityModel};
use crate::probe::sample_product;

pub const DEFAULT_BETA: f64 = 6.34;
pub const DEFAULT_BIG_COST: f64 = 1e6;

const SYNTHETIC_NODES: &str = include_str!("../data/nodes.csv");
const SYNTHETIC_EDGES: &str = include_str!("../data/edges.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub alpha: f64,
    pub p: f64,
}

/// Undirected edge between node ids `i` and `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub fuel_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub beta: f64,
    /// Cost of switching between non-adjacent nodes.
    pub big_cost: f64,
}

impl CityGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Self {
        Self {
            nodes,
            edges,
            beta: DEFAULT_BETA,
            big_cost: DEFAULT_BIG_COST,
        }
    }

    pub fn from_csv<R1: Read, R2: Read>(nodes: R1, edges: R2) -> Result<Self> {
        Ok(Self::new(read_csv(nodes)?, read_csv(edges)?))
    }

    pub fn from_csv_files(nodes: &Path, edges: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(nodes)?, std::fs::File::open(edges)?)
    }

    /// Positions of node ids in `nodes`.
    fn index(&self) -> Result<HashMap<u32, usize>> {
        let mut index = HashMap::with_capacity(self.nodes.len());
        for (k, node) in self.nodes.iter().enumerate() {
            if index.insert(node.id, k).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node id {}", node.id)));
            }
        }
        Ok(index)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidGraph("no nodes".into()));
        }
        let index = self.index()?;
        for node in &self.nodes {
            if !(node.p > 1.0) || !node.alpha.is_finite() || !node.p.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "node {}: need finite alpha and p > 1",
                    node.id
                )));
            }
        }
        if !self.beta.is_finite() || !(self.big_cost > 0.0) || !self.big_cost.is_finite() {
            return Err(Error::InvalidGraph("beta and big_cost must be finite, big_cost > 0".into()));
        }
        for e in &self.edges {
            for id in [e.i, e.j] {
                if !index.contains_key(&id) {
                    return Err(Error::InvalidGraph(format!("edge references unknown node {id}")));
                }
            }
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!("self-loop at node {}", e.i)));
            }
            if !(e.fuel_cost > 0.0) || !e.fuel_cost.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge {}-{}: fuel cost must be positive and finite",
                    e.i, e.j
                )));
            }
        }
        Ok(())
    }
}

fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// The bundled 18-neighbourhood synthetic city.
pub fn synthetic_city() -> CityGraph {
    CityGraph::from_csv(SYNTHETIC_NODES.as_bytes(), SYNTHETIC_EDGES.as_bytes())
        .expect("bundled dataset parses")
}

pub fn build_ridehailing(graph: &CityGraph, gamma: f64) -> Result<PopulationGame> {
    graph.validate()?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidGraph(format!("total mass {gamma} must be positive")));
    }
    let index = graph.index()?;
    let n = graph.nodes.len();
    let utilities = graph
        .nodes
        .iter()
        .map(|node| {
            if node.alpha <= graph.beta {
                log::warn!("node {}: alpha {} does not exceed beta {}", node.id, node.alpha, graph.beta);
            }
            UtilityModel::RideHailing {
                alpha: node.alpha,
                beta: graph.beta,
                p: node.p,
            }
        })
        .collect();
    let mut costs = SwitchingCosts::uniform(n, graph.big_cost);
    let mut seen = HashSet::new();
    for e in &graph.edges {
        let (a, b) = (index[&e.i], index[&e.j]);
        if !seen.insert((a.min(b), a.max(b))) {
            log::warn!("edge {}-{} listed twice; keeping the last cost", e.i, e.j);
        }
        costs.set(a, b, e.fuel_cost);
        costs.set(b, a, e.fuel_cost);
    }
    PopulationGame::new(utilities, costs, gamma)
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_big_cost")]
    pub big_cost: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub nodes_path: PathBuf,
    pub edges_path: PathBuf,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_big_cost() -> f64 {
    DEFAULT_BIG_COST
}
fn default_gamma() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg: ScenarioConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        // Relative data paths are taken relative to the config file.
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut cfg.nodes_path, &mut cfg.edges_path] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn build(&self) -> Result<PopulationGame> {
        let mut graph = CityGraph::from_csv_files(&self.nodes_path, &self.edges_path)?;
        graph.beta = self.beta;
        graph.big_cost = self.big_cost;
        build_ridehailing(&graph, self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecommendedParams {
    pub rho: f64,
    pub tau: f64,
    pub epsilon: f64,
}

/// `rho = 1/L`, `tau = 0.9 c_min / (L gamma)` (capped at 1) and
/// `epsilon = 0.1 c_min / L`, so that `tau * gamma <= c_min / L - epsilon`.
pub fn recommended_params(game: &PopulationGame) -> Result<RecommendedParams> {
    let c_min = game.c_min().ok_or(Error::TooFewActions)?;
    if c_min <= 0.0 {
        return Err(Error::ZeroCMin);
    }
    let l = lipschitz_bounds(game).global;
    if l <= 0.0 {
        return Err(Error::ZeroLipschitz);
    }
    Ok(RecommendedParams {
        rho: 1.0 / l,
        tau: (0.9 * c_min / (l * game.gamma())).min(1.0),
        epsilon: 0.1 * c_min / l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Affine { a_range: [f64; 2], b_range: [f64; 2] },
    RideHailing { alpha_range: [f64; 2], p_range: [f64; 2], beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    pub cost_range: [f64; 2],
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            family: FamilySpec::Affine { a_range: [0.5, 2.0], b_range: [0.5, 2.0] },
            cost_range: [0.05, 1.0],
            gamma: 1.0,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} {r:?} is not a finite nonempty range")))
    }
}

fn draw<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        check_range("cost_range", self.cost_range)?;
        if !(self.cost_range[0] > 0.0) {
            return Err(Error::InvalidSpec("cost_range must start above 0".into()));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidSpec("gamma must be positive".into()));
        }
        match self.family {
            FamilySpec::Affine { a_range, b_range } => {
                check_range("a_range", a_range)?;
                check_range("b_range", b_range)?;
                if b_range[0] < 0.0 {
                    return Err(Error::InvalidSpec("b_range must be nonnegative".into()));
                }
            }
            FamilySpec::RideHailing { alpha_range, p_range, beta } => {
                check_range("alpha_range", alpha_range)?;
                check_range("p_range", p_range)?;
                if !(p_range[0] > 1.0) {
                    return Err(Error::InvalidSpec("p_range must lie above 1".into()));
                }
                if !beta.is_finite() || alpha_range[0] + beta < 0.0 {
                    return Err(Error::InvalidSpec("need finite beta with alpha + beta >= 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Seeded random game with i.i.d. uniform parameters and symmetric costs.
pub fn random_game(seed: u64, n: usize, spec: &GeneratorSpec) -> Result<PopulationGame> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidSpec("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let utilities = (0..n)
        .map(|_| match spec.family {
            FamilySpec::Affine { a_range, b_range } => UtilityModel::Affine {
                a: draw(&mut rng, a_range),
                b: draw(&mut rng, b_range),
            },
            FamilySpec::RideHailing { alpha_range, p_range, beta } => UtilityModel::RideHailing {
                alpha: draw(&mut rng, alpha_range),
                beta,
                p: draw(&mut rng, p_range),
            },
        })
        .collect();
    let mut costs = SwitchingCosts::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let c = draw(&mut rng, spec.cost_range);
            costs.set(i, j, c);
            costs.set(j, i, c);
        }
    }
    PopulationGame::new(utilities, costs, spec.gamma)
}

/// Uniform draw from the simplex of total `mass`.
pub fn random_simplex_point(seed: u64, n: usize, mass: f64) -> SimplexPoint {
    if n == 1 {
        return SimplexPoint::uniform(1, mass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = sample_product(&mut rng, &[(n, mass)]);
    SimplexPoint::new(x, mass).expect("normalized draw lies on the simplex")
}
