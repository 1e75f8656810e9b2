use crate::game::SimplexPoint;

/// Euclidean projection of `v` onto `{x >= 0, sum x = mass}` by sorting and
/// thresholding: `x_i = max(v_i - theta, 0)` for the unique `theta` that
/// restores the mass.
pub fn project_simplex(v: &[f64], mass: f64) -> SimplexPoint {
    assert!(mass > 0.0, "projection mass must be positive");
    assert!(!v.is_empty(), "cannot project an empty vector");
    let theta = threshold(v, mass);
    let x = v.iter().map(|&vi| (vi - theta).max(0.0)).collect();
    SimplexPoint::from_parts_unchecked(x, mass)
}

fn threshold(v: &[f64], mass: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = sorted[0] - mass;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let candidate = (cumsum - mass) / (k + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta
}
