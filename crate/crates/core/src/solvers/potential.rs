use crate::error::Result;
use crate::game::PopulationGame;

/// `θ(x) = Σ_i ∫_0^{x_i} u_i(s) ds`. Its gradient is `u(x)`, so better responses
/// that move mass toward higher utility climb it.
pub fn potential_value(game: &PopulationGame, x: &[f64]) -> Result<f64> {
    if x.len() != game.n() {
        return Err(crate::error::Error::DimensionMismatch {
            expected: game.n(),
            found: x.len(),
        });
    }
    Ok(game
        .utilities()
        .iter()
        .zip(x)
        .map(|(u, &xi)| u.integral(xi))
        .sum())
}
