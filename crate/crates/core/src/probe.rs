//! Sampling-based monotonicity falsification.
//!
//! Monotonicity is a statement about all pairs of points, so sampling can
//! refute it but never establish it. The probe checks the pairwise product
//! `(G(x) - G(y))^T (x - y)` on random pairs and the smallest eigenvalue of the
//! symmetric part of a finite-difference Jacobian at random interior points.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::equilibrium::{central_jacobian, operator_values, symmetric_part_min_eigenvalue};
use crate::game::{utilities_at, PopulationGame};
use crate::par::{map_indexed, rng_for, Execution};

/// A vector field over a product of weighted simplexes.
pub trait VectorOperator: Sync {
    /// `(dimension, mass)` of each simplex block, in stacking order.
    fn blocks(&self) -> Vec<(usize, f64)>;

    /// Evaluates the operator; must accept any point of the nonnegative orthant.
    fn eval(&self, x: &[f64]) -> Vec<f64>;
}

/// Which single-class operator to probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// The switching-cost operator `F_i = max_j (u_j - u_i - c_ij)`.
    F,
    /// `-u`, whose VI characterizes Nash equilibria.
    MinusU,
}

pub struct GameOperator<'a> {
    pub game: &'a PopulationGame,
    pub kind: OperatorKind,
}

impl VectorOperator for GameOperator<'_> {
    fn blocks(&self) -> Vec<(usize, f64)> {
        vec![(self.game.n(), self.game.gamma())]
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            OperatorKind::F => operator_values(self.game, x),
            OperatorKind::MinusU => utilities_at(self.game.utilities(), x)
                .into_iter()
                .map(|v| -v)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    /// Central-difference step; Jacobian points within `2h` of the boundary are skipped.
    pub h: f64,
    pub execution: Execution,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 10_000,
            tol: 1e-9,
            h: 1e-6,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NotMonotone,
    MonotoneUpToSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenWitness {
    pub x: Vec<f64>,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub verdict: Verdict,
    /// Pair with the smallest product.
    pub worst_pair: Option<PairWitness>,
    /// Interior point with the smallest symmetric-part eigenvalue.
    pub worst_eigen: Option<EigenWitness>,
    pub pairs_checked: usize,
    pub jacobians_checked: usize,
    pub jacobians_skipped: usize,
}

impl ProbeReport {
    pub fn witness_summary(&self) -> Option<String> {
        if self.verdict != Verdict::NotMonotone {
            return None;
        }
        Some(match (&self.worst_pair, &self.worst_eigen) {
            (_, Some(e)) if e.min_eigenvalue < 0.0 => {
                format!("eigenvalue {} at {:?}", e.min_eigenvalue, e.x)
            }
            (Some(p), _) => format!("pair product {} at x={:?}, y={:?}", p.product, p.x, p.y),
            _ => unreachable!("NotMonotone without a witness"),
        })
    }
}

/// Uniform sample from a product of weighted simplexes (normalized
/// exponential spacings per block).
pub(crate) fn sample_product<R: Rng>(rng: &mut R, blocks: &[(usize, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(blocks.iter().map(|b| b.0).sum());
    for &(n, mass) in blocks {
        let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        out.extend(draws.iter().map(|d| d * mass / total));
    }
    out
}

pub fn monotonicity_probe<O: VectorOperator>(op: &O, cfg: &ProbeConfig) -> ProbeReport {
    let blocks = op.blocks();

    let pairs: Vec<PairWitness> = map_indexed(cfg.execution, cfg.samples, |k| {
        let mut rng = rng_for(cfg.seed, 2 * k as u64);
        let x = sample_product(&mut rng, &blocks);
        let y = sample_product(&mut rng, &blocks);
        let (gx, gy) = (op.eval(&x), op.eval(&y));
        let product = gx
            .iter()
            .zip(&gy)
            .zip(x.iter().zip(&y))
            .map(|((a, b), (p, q))| (a - b) * (p - q))
            .sum();
        PairWitness { x, y, product }
    });

    let eigens: Vec<Option<EigenWitness>> = map_indexed(cfg.execution, cfg.samples, |k| {
        let mut rng = rng_for(cfg.seed, 2 * k as u64 + 1);
        let x = sample_product(&mut rng, &blocks);
        if x.iter().any(|&v| v < 2.0 * cfg.h) {
            return None;
        }
        let jac = central_jacobian(&x, cfg.h, |p| op.eval(p)).ok()?;
        Some(EigenWitness {
            min_eigenvalue: symmetric_part_min_eigenvalue(&jac),
            x,
        })
    });

    // Keep the first index among equal minima so the result is execution-independent.
    let worst_pair = pairs
        .into_iter()
        .reduce(|a, b| if b.product < a.product { b } else { a });
    let jacobians_checked = eigens.iter().filter(|e| e.is_some()).count();
    let worst_eigen = eigens
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.min_eigenvalue < a.min_eigenvalue { b } else { a });

    let pair_fails = worst_pair.as_ref().is_some_and(|p| p.product < -cfg.tol);
    let eigen_fails = worst_eigen.as_ref().is_some_and(|e| e.min_eigenvalue < -cfg.tol);
    ProbeReport {
        verdict: if pair_fails || eigen_fails {
            Verdict::NotMonotone
        } else {
            Verdict::MonotoneUpToSampling
        },
        worst_pair,
        worst_eigen,
        pairs_checked: cfg.samples,
        jacobians_checked,
        jacobians_skipped: cfg.samples - jacobians_checked,
    }
}
