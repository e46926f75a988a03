//! Correspondence files: five lines of `x1 y1 z1 x2 y2 z2`, `#` comments.

use cayley_pose::{Correspondence, Vec3};

pub fn parse_correspondences(text: &str) -> Result<[Correspondence; 5], String> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format!("line {}: invalid number {t:?}", n + 1)))
            .collect::<Result<_, _>>()?;
        if values.len() != 6 {
            return Err(format!("line {}: expected 6 numbers, found {}", n + 1, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("line {}: non-finite value", n + 1));
        }
        let q1 = Vec3::new(values[0], values[1], values[2]);
        let q2 = Vec3::new(values[3], values[4], values[5]);
        rows.push(Correspondence::new(q1, q2).map_err(|e| format!("line {}: {e}", n + 1))?);
    }
    let found = rows.len();
    rows.try_into()
        .map_err(|_| format!("expected 5 correspondences, found {found}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIVE: &str = "# comment\n0 0 1 0.1 0 1\n0.1 0 1 0.2 0 1 # trailing\n\n0 0.1 1 0.1 0.1 1\n0.1 0.1 1 0.2 0.1 1\n-0.1 0 1 0 0 1\n";

    #[test]
    fn parses_and_normalizes() {
        let c = parse_correspondences(FIVE).unwrap();
        assert_eq!(c[0].q1, Vec3::z());
        assert!((c[1].q2.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_files() {
        let four: String = FIVE.lines().take(6).collect::<Vec<_>>().join("\n");
        assert_eq!(parse_correspondences(&four).unwrap_err(), "expected 5 correspondences, found 4");
        assert!(parse_correspondences(&FIVE.replace("0.2 0.1 1", "x 0.1 1")).is_err());
        assert!(parse_correspondences(&FIVE.replace("0.2 0.1 1", "0.2 1")).is_err());
        assert!(parse_correspondences(&FIVE.replace("0 0 1 0.1 0 1", "0 0 0 0.1 0 1")).is_err());
        assert!(parse_correspondences(&FIVE.replace("0.2 0.1 1", "NaN 0.1 1")).is_err());
    }
}
