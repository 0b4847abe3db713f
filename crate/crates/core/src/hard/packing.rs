//! Greedy sphere packings and their plain-text form.
//!
//! Text format: a header line `# d <d> separation <sep>` followed by one
//! point per line, coordinates `0..d` in order, separated by single spaces.

use crate::error::{Result, ViolinError};
use crate::linalg::{dist, norm};
use crate::seeding::stream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Unit vectors with pairwise distance at least `separation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePacking {
    d: usize,
    points: Vec<Vec<f64>>,
    separation: f64,
}

/// Uniform point on the unit sphere.
pub fn random_unit<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 1e-12 {
            return g.into_iter().map(|x| x / n).collect();
        }
    }
}

impl SpherePacking {
    /// Wraps `points` after an exhaustive audit.
    pub fn new(d: usize, points: Vec<Vec<f64>>, separation: f64) -> Result<Self> {
        let p = Self { d, points, separation };
        p.audit()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest pairwise distance, `+∞` for fewer than two points.
    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                best = best.min(dist(&self.points[i], &self.points[j]));
            }
        }
        best
    }

    /// Checks dimensions, unit norms and every pairwise distance.
    pub fn audit(&self) -> Result<()> {
        if !(self.separation > 0.0 && self.separation <= 2.0) {
            return Err(ViolinError::InvalidParams(format!("separation {} outside (0, 2]", self.separation)));
        }
        for p in &self.points {
            crate::error::check_dim(self.d, p.len())?;
            if (norm(p) - 1.0).abs() > 1e-9 {
                return Err(ViolinError::Verification(format!("point with norm {}", norm(p))));
            }
        }
        let m = self.min_distance();
        if m < self.separation - 1e-12 {
            return Err(ViolinError::Verification(format!(
                "pairwise distance {m} below separation {}",
                self.separation
            )));
        }
        Ok(())
    }

    /// Keeps the points satisfying `keep`, in order.
    pub fn filtered(&self, mut keep: impl FnMut(&[f64]) -> bool) -> Self {
        Self {
            d: self.d,
            points: self.points.iter().filter(|p| keep(p)).cloned().collect(),
            separation: self.separation,
        }
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            d: self.d,
            points: self.points.iter().take(n).cloned().collect(),
            separation: self.separation,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# d {} separation {:e}\n", self.d, self.separation);
        for p in &self.points {
            let line: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| ViolinError::Config("empty packing file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (d, separation) = match fields.as_slice() {
            ["#", "d", d, "separation", s] => (
                d.parse::<usize>().map_err(|e| ViolinError::Config(format!("bad dimension: {e}")))?,
                s.parse::<f64>().map_err(|e| ViolinError::Config(format!("bad separation: {e}")))?,
            ),
            _ => return Err(ViolinError::Config(format!("bad packing header `{header}`"))),
        };
        let mut points = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let p = line
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| ViolinError::Config(format!("bad coordinate `{x}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            points.push(p);
        }
        Self::new(d, points, separation)
    }
}

/// Greedy rejection sampling: each of `max_attempts` uniform sphere points
/// is kept when it is at least `separation` from every kept point.
pub fn build_packing(d: usize, separation: f64, seed: u64, max_attempts: usize) -> Result<SpherePacking> {
    build_packing_capped(d, separation, seed, max_attempts, usize::MAX)
}

/// As [`build_packing`], stopping early once `max_points` are kept.
pub fn build_packing_capped(
    d: usize,
    separation: f64,
    seed: u64,
    max_attempts: usize,
    max_points: usize,
) -> Result<SpherePacking> {
    if d == 0 {
        return Err(ViolinError::InvalidParams("dimension must be positive".into()));
    }
    if !(separation > 0.0 && separation <= 2.0) {
        return Err(ViolinError::InvalidParams(format!("separation {separation} outside (0, 2]")));
    }
    // ‖x − y‖ ≥ s  ⇔  ⟨x, y⟩ ≤ 1 − s²/2 on the sphere; the slack keeps
    // accepted points clear of the audit's tolerance.
    let max_dot = 1.0 - separation * separation / 2.0 - 1e-12;
    let mut rng = stream(seed, 0);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for _ in 0..max_attempts {
        if points.len() >= max_points {
            break;
        }
        let x = random_unit(d, &mut rng);
        if points.iter().all(|p| crate::linalg::dot(p, &x) <= max_dot) {
            points.push(x);
        }
    }
    SpherePacking::new(d, points, separation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antipodal_diameter_bound() {
        let p = build_packing(3, 2.0, 1, 10_000).unwrap();
        assert!(p.len() <= 2);
    }

    #[test]
    fn text_round_trip() {
        let p = build_packing(4, 1.0, 9, 200).unwrap();
        let q = SpherePacking::from_text(&p.to_text()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn audit_rejects_close_points() {
        let pts = vec![vec![1.0, 0.0], vec![0.999_f64.sqrt(), 0.001_f64.sqrt()]];
        assert!(matches!(SpherePacking::new(2, pts, 0.5), Err(ViolinError::Verification(_))));
    }

    #[test]
    fn zero_attempts_gives_empty() {
        assert!(build_packing(5, 0.5, 0, 0).unwrap().is_empty());
    }
}
