//! Gauss–Legendre rules in time and symmetric rules on triangles.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[0, 1]` with `n ∈ 1..=5` points.
pub fn gauss_legendre(n: usize) -> Result<Vec<(f64, f64)>> {
    // nodes and weights on [-1, 1]
    let rule: Vec<(f64, f64)> = match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let x = 1.0 / 3f64.sqrt();
            vec![(-x, 1.0), (x, 1.0)]
        }
        3 => {
            let x = (0.6f64).sqrt();
            vec![(-x, 5.0 / 9.0), (0.0, 8.0 / 9.0), (x, 5.0 / 9.0)]
        }
        4 => {
            let r = (6.0f64 / 5.0).sqrt();
            let a = (3.0 / 7.0 - 2.0 / 7.0 * r).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * r).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        5 => {
            let r = (10.0f64 / 7.0).sqrt();
            let a = (5.0 - 2.0 * r).sqrt() / 3.0;
            let b = (5.0 + 2.0 * r).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            vec![(-b, wb), (-a, wa), (0.0, 128.0 / 225.0), (a, wa), (b, wb)]
        }
        _ => return Err(Error::InvalidArgument(format!("Gauss-Legendre order {n} not in 1..=5"))),
    };
    Ok(rule.into_iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect())
}

/// Quadrature rule on a triangle: barycentric points and weights summing to 1
/// (multiply by the area).
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Edge midpoints, exact for quadratics.
    pub fn degree2() -> Self {
        Self { points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]], weights: vec![1.0 / 3.0; 3] }
    }

    /// Seven-point rule, exact for quintics.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        Self {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [a1, a1, b1],
                [a1, b1, a1],
                [b1, a1, a1],
                [a2, a2, b2],
                [a2, b2, a2],
                [b2, a2, a2],
            ],
            weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
        }
    }

    /// Rule for the given polynomial degree (2 or 5; other values pick the
    /// next higher available rule, up to 5).
    pub fn for_degree(degree: usize) -> Result<Self> {
        match degree {
            0..=2 => Ok(Self::degree2()),
            3..=5 => Ok(Self::degree5()),
            _ => Err(Error::InvalidArgument(format!("no triangle rule of degree {degree}"))),
        }
    }

    /// Composite rule on `4^levels` congruent subtriangles.
    pub fn subdivided(&self, levels: usize) -> Self {
        let mut rule = self.clone();
        for _ in 0..levels {
            let subs: [[[f64; 3]; 3]; 4] = [
                [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
                [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]],
                [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]],
                [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            ];
            let mut points = Vec::with_capacity(4 * rule.points.len());
            let mut weights = Vec::with_capacity(4 * rule.points.len());
            for s in &subs {
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let mut q = [0.0; 3];
                    for (i, &pi) in p.iter().enumerate() {
                        for d in 0..3 {
                            q[d] += pi * s[i][d];
                        }
                    }
                    points.push(q);
                    weights.push(0.25 * w);
                }
            }
            rule = Self { points, weights };
        }
        rule
    }
}
