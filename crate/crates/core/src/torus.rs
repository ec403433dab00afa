//! Coordinates on the flat torus `[0,1)^d`.

/// Reduces `v` modulo 1 into `[0, 1)`.
///
/// `rem_euclid` can round up to exactly 1.0 for tiny negative inputs; that
/// case is folded back to 0.
#[inline]
pub fn wrap(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Wrap-around distance between two coordinates on the circle.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Max-norm of the coordinate-wise wrap-around distance.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| circle_distance(x, y))
        .fold(0.0, f64::max)
}
