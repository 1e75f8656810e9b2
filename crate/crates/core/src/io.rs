//! File formats: game and multiclass game JSON, solver result JSON and
//! trajectory CSV. Floats use the shortest representation that round-trips.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PopulationGame, SimplexPoint, SwitchingCosts, UtilityModel};
use crate::multiclass::{ClassSpec, MultiClassGame, StackedPoint};
use crate::solvers::{SolveResult, Status, TrajectoryRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub n: usize,
    pub gamma: f64,
    pub utilities: Vec<UtilityModel>,
    /// Row-major `n x n`.
    pub costs: Vec<Vec<f64>>,
}

impl GameFile {
    pub fn from_game(game: &PopulationGame) -> Self {
        Self {
            n: game.n(),
            gamma: game.gamma(),
            utilities: game.utilities().to_vec(),
            costs: game.costs().to_rows(),
        }
    }

    pub fn into_game(self) -> Result<PopulationGame> {
        if self.utilities.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: self.utilities.len() });
        }
        PopulationGame::new(self.utilities, SwitchingCosts::from_rows(self.costs)?, self.gamma)
    }
}

pub fn game_from_json(text: &str) -> Result<PopulationGame> {
    serde_json::from_str::<GameFile>(text)?.into_game()
}

pub fn game_to_json(game: &PopulationGame) -> String {
    serde_json::to_string_pretty(&GameFile::from_game(game)).expect("game serializes")
}

pub fn read_game(path: &Path) -> Result<PopulationGame> {
    game_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_game(path: &Path, game: &PopulationGame) -> Result<()> {
    std::fs::write(path, game_to_json(game) + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFile {
    pub utilities: Vec<UtilityModel>,
    pub costs: Vec<Vec<f64>>,
}

/// A game file with one entry of `gammas` and `classes` per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassFile {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: usize,
    pub gammas: Vec<f64>,
    pub classes: Vec<ClassFile>,
}

impl MultiClassFile {
    pub fn from_game(mc: &MultiClassGame) -> Self {
        Self {
            n: mc.n(),
            a: mc.class_count(),
            gammas: mc.gammas().to_vec(),
            classes: mc
                .classes()
                .iter()
                .map(|c| ClassFile { utilities: c.utilities.clone(), costs: c.costs.to_rows() })
                .collect(),
        }
    }

    pub fn into_game(self) -> Result<MultiClassGame> {
        if self.classes.len() != self.a || self.gammas.len() != self.a {
            return Err(Error::DimensionMismatch { expected: self.a, found: self.classes.len() });
        }
        let classes = self
            .classes
            .into_iter()
            .map(|c| {
                if c.utilities.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, found: c.utilities.len() });
                }
                Ok(ClassSpec { utilities: c.utilities, costs: SwitchingCosts::from_rows(c.costs)? })
            })
            .collect::<Result<Vec<_>>>()?;
        MultiClassGame::new(self.gammas, classes)
    }
}

pub fn multiclass_from_json(text: &str) -> Result<MultiClassGame> {
    serde_json::from_str::<MultiClassFile>(text)?.into_game()
}

pub fn multiclass_to_json(mc: &MultiClassGame) -> String {
    serde_json::to_string_pretty(&MultiClassFile::from_game(mc)).expect("game serializes")
}

/// Machine-readable summary of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub status: Status,
    pub iterations: usize,
    pub x_final: serde_json::Value,
    pub gap_final: f64,
    pub verified_inertial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_period: Option<usize>,
    pub config_echo: serde_json::Value,
}

impl ResultFile {
    pub fn new<P: Serialize, C: Serialize>(result: &SolveResult<P>, config: &C) -> Self {
        Self {
            status: result.status,
            iterations: result.iterations,
            x_final: serde_json::to_value(&result.x_final).expect("point serializes"),
            gap_final: result.gap_final,
            verified_inertial: result.verified,
            cycle_period: result.cycle_period,
            config_echo: serde_json::to_value(config).expect("config serializes"),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// `x_final` as a flat vector, for single-class results.
    pub fn x_final_vec(&self) -> Result<Vec<f64>> {
        Ok(serde_json::from_value(self.x_final.clone())?)
    }
}

/// State types that can be laid out as trajectory CSV columns.
pub trait StateColumns {
    fn headers(&self) -> Vec<String>;
    fn values(&self) -> Vec<f64>;
}

impl StateColumns for SimplexPoint {
    fn headers(&self) -> Vec<String> {
        (1..=self.len()).map(|i| format!("x_{i}")).collect()
    }

    fn values(&self) -> Vec<f64> {
        self.to_vec()
    }
}

impl StateColumns for StackedPoint {
    fn headers(&self) -> Vec<String> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(a, b)| (1..=b.len()).map(move |i| format!("x[{}][{i}]", a + 1)))
            .collect()
    }

    fn values(&self) -> Vec<f64> {
        self.flatten()
    }
}

/// Header `k, <state columns>, min_utility, gap, moved_mass`, one row per record.
pub fn write_trajectory_csv<W: Write, P: StateColumns>(
    writer: W,
    records: &[TrajectoryRecord<P>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let Some(first) = records.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header = vec!["k".to_string()];
    header.extend(first.x.headers());
    header.extend(["min_utility", "gap", "moved_mass"].map(String::from));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.k.to_string()];
        row.extend(r.x.values().iter().map(f64::to_string));
        row.extend([r.min_utility, r.gap, r.moved_mass].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
