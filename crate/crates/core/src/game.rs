//! Game model: utility families, switching costs, population games and
//! points of the mass simplex.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack (scaled by `max(1, mass)`) accepted on simplex membership.
pub const TOL_SIMPLEX: f64 = 1e-12;

/// Separable utility `u_i(x_i)` of a single action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityModel {
    /// `a - b * x`.
    Affine { a: f64, b: f64 },
    /// Taxi revenue model: `alpha * v(x) - (1 - v(x)) * beta` with occupancy
    /// `v(x) = 1 - (x / (1 + x))^p`.
    RideHailing { alpha: f64, beta: f64, p: f64 },
    Constant { c: f64 },
}

impl UtilityModel {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            UtilityModel::Affine { a, b } => a - b * x,
            UtilityModel::RideHailing { alpha, beta, p } => {
                let v = occupancy(x, p);
                alpha * v - (1.0 - v) * beta
            }
            UtilityModel::Constant { c } => c,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            UtilityModel::Affine { b, .. } => -b,
            UtilityModel::RideHailing { alpha, beta, p } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let t = x / (1.0 + x);
                let dv = -p * t.powf(p - 1.0) / ((1.0 + x) * (1.0 + x));
                (alpha + beta) * dv
            }
            UtilityModel::Constant { .. } => 0.0,
        }
    }

    /// Upper bound on `|u'(x)|` over `x >= 0`.
    ///
    /// For the ride-hailing family, `|v'|` written in `t = x / (1 + x)` is
    /// `p t^(p-1) (1-t)^2`, maximized at `t = (p-1)/(p+1)`, and `u' = (alpha + beta) v'`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            UtilityModel::Affine { b, .. } => b.abs(),
            UtilityModel::RideHailing { alpha, beta, p } => {
                let shape = 4.0 * p * (p - 1.0).powf(p - 1.0) / (p + 1.0).powf(p + 1.0);
                (alpha + beta).abs() * shape
            }
            UtilityModel::Constant { .. } => 0.0,
        }
    }

    /// `∫_0^x u(s) ds`, the separable potential contribution of one action.
    pub fn integral(&self, x: f64) -> f64 {
        match *self {
            UtilityModel::Affine { a, b } => a * x - 0.5 * b * x * x,
            UtilityModel::RideHailing { alpha, beta, p } => {
                // u = (alpha + beta) v - beta and ∫ v = x - ∫ (s/(1+s))^p ds.
                let idle = idle_integral(x, p);
                (alpha + beta) * (x - idle) - beta * x
            }
            UtilityModel::Constant { c } => c * x,
        }
    }

    pub fn is_non_increasing(&self) -> bool {
        match *self {
            UtilityModel::Affine { b, .. } => b >= 0.0,
            UtilityModel::RideHailing { alpha, beta, p } => p > 1.0 && alpha + beta >= 0.0,
            UtilityModel::Constant { .. } => true,
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            UtilityModel::Affine { a, b } => vec![a, b],
            UtilityModel::RideHailing { alpha, beta, p } => vec![alpha, beta, p],
            UtilityModel::Constant { c } => vec![c],
        }
    }
}

fn occupancy(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    1.0 - (x / (1.0 + x)).powf(p)
}

/// `∫_0^x (s/(1+s))^p ds` by adaptive Simpson quadrature.
fn idle_integral(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| (s / (1.0 + s)).powf(p);
    let (fa, fm, fb) = (f(0.0), f(0.5 * x), f(x));
    let whole = simpson(0.0, x, fa, fm, fb);
    adaptive_simpson(&f, 0.0, x, fa, fm, fb, whole, 1e-14, 40)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Square matrix of switching costs, row `i` holding the costs of leaving `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingCosts {
    n: usize,
    entries: Vec<f64>,
}

impl SwitchingCosts {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGame(vec![Violation::CostShape {
                    row: Some(i),
                    expected: n,
                    found: row.len(),
                }]));
            }
            entries.extend(row);
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    /// Every off-diagonal entry equal to `c`.
    pub fn uniform(n: usize, c: f64) -> Self {
        let mut costs = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    costs.set(i, j, c);
                }
            }
        }
        costs
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Minimum off-diagonal entry; `None` when there are fewer than two actions.
    pub fn c_min(&self) -> Option<f64> {
        let mut min: Option<f64> = None;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    let c = self.get(i, j);
                    min = Some(min.map_or(c, |m| m.min(c)));
                }
            }
        }
        min
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// A broken invariant of a game, with 0-based indices. `Display` prints
/// 1-based action labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UtilityCount { expected: usize, found: usize },
    CostShape { row: Option<usize>, expected: usize, found: usize },
    NegativeCost { i: usize, j: usize },
    NonzeroDiagonal { i: usize },
    NonFiniteCost { i: usize, j: usize },
    NonFiniteParameter { i: usize },
    IncreasingUtility { i: usize },
    ExponentTooSmall { i: usize },
    NonPositiveGamma,
    NoActions,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::UtilityCount { expected, found } => {
                write!(f, "expected {expected} utilities, found {found}")
            }
            Violation::CostShape { row: Some(r), expected, found } => {
                write!(f, "cost row {} has {found} entries, expected {expected}", r + 1)
            }
            Violation::CostShape { row: None, expected, found } => {
                write!(f, "cost matrix has {found} rows, expected {expected}")
            }
            Violation::NegativeCost { i, j } => write!(f, "NegativeCost({},{})", i + 1, j + 1),
            Violation::NonzeroDiagonal { i } => write!(f, "NonzeroDiagonal({})", i + 1),
            Violation::NonFiniteCost { i, j } => write!(f, "NonFiniteCost({},{})", i + 1, j + 1),
            Violation::NonFiniteParameter { i } => write!(f, "NonFiniteParameter({})", i + 1),
            Violation::IncreasingUtility { i } => write!(f, "IncreasingUtility({})", i + 1),
            Violation::ExponentTooSmall { i } => write!(f, "ExponentTooSmall({})", i + 1),
            Violation::NonPositiveGamma => write!(f, "NonPositiveGamma"),
            Violation::NoActions => write!(f, "NoActions"),
        }
    }
}

/// Single-class population game with separable utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGame {
    utilities: Vec<UtilityModel>,
    costs: SwitchingCosts,
    gamma: f64,
}

impl PopulationGame {
    /// Builds a game; only shape consistency is checked here; value-level
    /// invariants are reported by [`validate_game`].
    pub fn new(utilities: Vec<UtilityModel>, costs: SwitchingCosts, gamma: f64) -> Result<Self> {
        if costs.dim() != utilities.len() {
            return Err(Error::InvalidGame(vec![Violation::CostShape {
                row: None,
                expected: utilities.len(),
                found: costs.dim(),
            }]));
        }
        Ok(Self {
            utilities,
            costs,
            gamma,
        })
    }

    pub fn n(&self) -> usize {
        self.utilities.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn utilities(&self) -> &[UtilityModel] {
        &self.utilities
    }

    pub fn costs(&self) -> &SwitchingCosts {
        &self.costs
    }

    pub fn c_min(&self) -> Option<f64> {
        self.costs.c_min()
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    /// The game with action `idx` (and its cost row and column) removed.
    pub fn without_action(&self, idx: usize) -> Self {
        let keep: Vec<usize> = (0..self.n()).filter(|&i| i != idx).collect();
        let utilities = keep.iter().map(|&i| self.utilities[i]).collect();
        let mut costs = SwitchingCosts::zeros(keep.len());
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                costs.set(a, b, self.costs.get(i, j));
            }
        }
        Self {
            utilities,
            costs,
            gamma: self.gamma,
        }
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Lists every value-level invariant the game breaks; empty means valid.
pub fn validate_game(game: &PopulationGame) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = game.n();
    if n == 0 {
        out.push(Violation::NoActions);
    }
    if !(game.gamma > 0.0) || !game.gamma.is_finite() {
        out.push(Violation::NonPositiveGamma);
    }
    for (i, u) in game.utilities.iter().enumerate() {
        if u.params().iter().any(|v| !v.is_finite()) {
            out.push(Violation::NonFiniteParameter { i });
            continue;
        }
        match *u {
            UtilityModel::Affine { b, .. } if b < 0.0 => {
                out.push(Violation::IncreasingUtility { i })
            }
            UtilityModel::RideHailing { p, .. } if p <= 1.0 => {
                out.push(Violation::ExponentTooSmall { i })
            }
            _ => {}
        }
    }
    for i in 0..n {
        for j in 0..n {
            let c = game.costs.get(i, j);
            if !c.is_finite() {
                out.push(Violation::NonFiniteCost { i, j });
            } else if i == j && c != 0.0 {
                out.push(Violation::NonzeroDiagonal { i });
            } else if c < 0.0 {
                out.push(Violation::NegativeCost { i, j });
            }
        }
    }
    out
}

/// Returns the game unchanged if it is valid.
pub fn ensure_valid(game: &PopulationGame) -> Result<()> {
    let violations = validate_game(game);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidGame(violations))
    }
}

pub fn evaluate_utilities(game: &PopulationGame, x: &[f64]) -> Result<Vec<f64>> {
    game.check_point(x)?;
    Ok(utilities_at(game.utilities(), x))
}

pub(crate) fn utilities_at(models: &[UtilityModel], x: &[f64]) -> Vec<f64> {
    models.iter().zip(x).map(|(u, &xi)| u.value(xi)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzBounds {
    pub per_action: Vec<f64>,
    pub global: f64,
}

pub fn lipschitz_bounds(game: &PopulationGame) -> LipschitzBounds {
    let per_action: Vec<f64> = game.utilities.iter().map(UtilityModel::lipschitz).collect();
    let global = per_action.iter().copied().fold(0.0, f64::max);
    LipschitzBounds { per_action, global }
}

/// Adds an opt-out action with constant utility `u_e` and zero switching
/// cost to and from every other action.
pub fn extend_with_exit(game: &PopulationGame, u_e: f64) -> PopulationGame {
    let n = game.n();
    let mut utilities = game.utilities.clone();
    utilities.push(UtilityModel::Constant { c: u_e });
    let mut costs = SwitchingCosts::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            costs.set(i, j, game.costs.get(i, j));
        }
    }
    PopulationGame {
        utilities,
        costs,
        gamma: game.gamma,
    }
}

/// Nonnegative mass vector summing to `mass`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexPoint {
    x: Vec<f64>,
    #[serde(skip)]
    mass: f64,
}

impl SimplexPoint {
    /// Checks membership; components in `[-tol, 0)` are clamped to zero.
    pub fn new(mut x: Vec<f64>, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidPoint(format!("mass must be positive, got {mass}")));
        }
        let tol = TOL_SIMPLEX * mass.max(1.0);
        for (i, xi) in x.iter_mut().enumerate() {
            if !xi.is_finite() || *xi < -tol {
                return Err(Error::InvalidPoint(format!(
                    "component {} is {xi}",
                    i + 1
                )));
            }
            if *xi < 0.0 {
                *xi = 0.0;
            }
        }
        let sum: f64 = x.iter().sum();
        if (sum - mass).abs() > tol {
            return Err(Error::InvalidPoint(format!(
                "components sum to {sum}, expected {mass}"
            )));
        }
        Ok(Self { x, mass })
    }

    /// Rescales a nonnegative weight vector onto the simplex of the given mass.
    pub fn from_weights(weights: &[f64], mass: f64) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidPoint("weights must have positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w * mass / total).collect(), mass)
    }

    pub fn uniform(n: usize, mass: f64) -> Self {
        Self {
            x: vec![mass / n as f64; n],
            mass,
        }
    }

    pub(crate) fn from_parts_unchecked(x: Vec<f64>, mass: f64) -> Self {
        Self { x, mass }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.x
    }
}

impl Deref for SimplexPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.x
    }
}
