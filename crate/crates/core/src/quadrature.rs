//! Radial Gauss-Laguerre rules, Lebedev rules on the sphere, and their
//! composition into an integration rule on R^3.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::specfun::{gamma_half, laguerre};
use crate::Velocity;

/// Gauss rule for `int_0^inf x^alpha e^{-x} g(x) dx`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialRule {
    alpha: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialRule {
    /// The rule for weight `x^{1/2} e^{-x}` used throughout the solver.
    pub fn gauss_laguerre_half(count: usize) -> Result<Self> {
        Self::gauss_laguerre(count, 1)
    }

    /// Generalized Gauss-Laguerre rule for `alpha = two_alpha / 2`.
    ///
    /// Nodes come from the eigenvalues of the symmetric Jacobi matrix and are
    /// polished by Newton steps on `L_N^{(alpha)}`; weights are then taken from
    /// the closed form `Gamma(N+alpha+1) x_i / (N! (N+1)^2 L_{N+1}(x_i)^2)`,
    /// which keeps full relative accuracy for the tiny tail weights.
    pub fn gauss_laguerre(count: usize, two_alpha: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyRule);
        }
        let alpha = two_alpha as f64 / 2.0;
        let jacobi = DMatrix::from_fn(count, count, |i, j| {
            if i == j {
                2.0 * i as f64 + alpha + 1.0
            } else if i + 1 == j || j + 1 == i {
                let k = i.max(j) as f64;
                (k * (k + alpha)).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        let nf = count as f64;
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let ln = laguerre(count, alpha, *x);
                let lm1 = laguerre(count - 1, alpha, *x);
                let deriv = (nf * ln - (nf + alpha) * lm1) / *x;
                let step = ln / deriv;
                if !step.is_finite() {
                    break;
                }
                *x -= step;
                if step.abs() <= 1e-16 * x.abs() {
                    break;
                }
            }
        }

        // Gamma(N + alpha + 1) / N!
        let mut scale = gamma_half(two_alpha + 2);
        for j in 1..=count {
            scale *= (j as f64 + alpha) / j as f64;
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let lp = laguerre(count + 1, alpha, x);
                scale * x / ((nf + 1.0) * (nf + 1.0) * lp * lp)
            })
            .collect();
        Ok(Self { alpha, nodes, weights })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_i w_i g(x_i)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// Lebedev node counts shipped with the crate.
pub const LEBEDEV_ORDERS: &[usize] = &[6, 14, 26, 38, 50, 74, 86, 110, 146, 170, 194, 230, 266, 302];

const LEBEDEV_TABLES: [(usize, &str); 14] = [
    (6, include_str!("../data/lebedev_006.txt")),
    (14, include_str!("../data/lebedev_014.txt")),
    (26, include_str!("../data/lebedev_026.txt")),
    (38, include_str!("../data/lebedev_038.txt")),
    (50, include_str!("../data/lebedev_050.txt")),
    (74, include_str!("../data/lebedev_074.txt")),
    (86, include_str!("../data/lebedev_086.txt")),
    (110, include_str!("../data/lebedev_110.txt")),
    (146, include_str!("../data/lebedev_146.txt")),
    (170, include_str!("../data/lebedev_170.txt")),
    (194, include_str!("../data/lebedev_194.txt")),
    (230, include_str!("../data/lebedev_230.txt")),
    (266, include_str!("../data/lebedev_266.txt")),
    (302, include_str!("../data/lebedev_302.txt")),
];

/// Octahedrally symmetric rule `int_{S^2} g de ~ 4 pi sum_j w_j g(e_j)` with `sum w_j = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereRule {
    degree: usize,
    points: Vec<Velocity>,
    weights: Vec<f64>,
}

impl SphereRule {
    pub fn lebedev(count: usize) -> Result<Self> {
        let text = LEBEDEV_TABLES
            .iter()
            .find(|(n, _)| *n == count)
            .map(|(_, t)| *t)
            .ok_or(Error::UnsupportedLebedevOrder {
                requested: count,
                valid: LEBEDEV_ORDERS,
            })?;
        let rule = Self::parse_table(text)?;
        if rule.points.len() != count {
            return Err(Error::Dimension {
                expected: count,
                actual: rule.points.len(),
            });
        }
        Ok(rule)
    }

    /// Parses the checked-in text format: `# order N degree D` header, then
    /// one `x y z w` row per node.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut degree = None;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                let words: Vec<&str> = comment.split_whitespace().collect();
                if let Some(pos) = words.iter().position(|w| *w == "degree") {
                    degree = words.get(pos + 1).and_then(|d| d.parse().ok());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Domain(format!("bad Lebedev row {line:?}: {e}")))?;
            if vals.len() != 4 {
                return Err(Error::Domain(format!("bad Lebedev row {line:?}")));
            }
            points.push(Velocity::new(vals[0], vals[1], vals[2]));
            weights.push(vals[3]);
        }
        let degree = degree.ok_or_else(|| Error::Domain("Lebedev table lacks a degree header".into()))?;
        if points.is_empty() {
            return Err(Error::EmptyRule);
        }
        Ok(Self { degree, points, weights })
    }

    /// Algebraic degree of exactness.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Velocity] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `4 pi sum_j w_j g(e_j)`.
    pub fn integrate(&self, g: impl Fn(&Velocity) -> f64) -> f64 {
        4.0 * PI * self.points.iter().zip(&self.weights).map(|(e, &w)| w * g(e)).sum::<f64>()
    }

    /// True when `-e_j` is a node with the same weight for every node `e_j`.
    pub fn is_centrally_symmetric(&self) -> bool {
        self.points.iter().zip(&self.weights).all(|(e, &w)| {
            self.points
                .iter()
                .zip(&self.weights)
                .any(|(f, &wf)| (e + f).norm() < 1e-14 && (w - wf).abs() < 1e-15)
        })
    }
}

/// Composed rule on R^3: radial Gauss-Laguerre nodes times Lebedev directions.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRuleR3 {
    pub radial: RadialRule,
    pub sphere: SphereRule,
}

/// A node of the composed rule with its effective weight `2 pi w_i e^{x_i} w_j`.
#[derive(Clone, Copy, Debug)]
pub struct R3Node {
    pub point: Velocity,
    pub weight: f64,
    pub radial_index: usize,
    pub sphere_index: usize,
}

impl QuadratureRuleR3 {
    pub fn new(radial: RadialRule, sphere: SphereRule) -> Self {
        Self { radial, sphere }
    }

    /// Rule with `n_gl` Gauss-Laguerre nodes (weight `x^{1/2} e^{-x}`) and `n_l` Lebedev points.
    pub fn build(n_gl: usize, n_l: usize) -> Result<Self> {
        Ok(Self::new(RadialRule::gauss_laguerre_half(n_gl)?, SphereRule::lebedev(n_l)?))
    }

    pub fn n_gl(&self) -> usize {
        self.radial.len()
    }

    pub fn n_l(&self) -> usize {
        self.sphere.len()
    }

    pub fn len(&self) -> usize {
        self.n_gl() * self.n_l()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in radial-major order: index `i * N_L + j`.
    pub fn nodes(&self) -> Vec<R3Node> {
        let mut out = Vec::with_capacity(self.len());
        for (i, (&x, &wr)) in self.radial.nodes().iter().zip(self.radial.weights()).enumerate() {
            let rho = x.sqrt();
            let wx = 2.0 * PI * wr * x.exp();
            for (j, (e, &ws)) in self.sphere.points().iter().zip(self.sphere.weights()).enumerate() {
                out.push(R3Node {
                    point: e * rho,
                    weight: wx * ws,
                    radial_index: i,
                    sphere_index: j,
                });
            }
        }
        out
    }
}

/// `2 pi sum_i w_i e^{x_i} sum_j w_j g(sqrt(x_i) e_j)`.
pub fn integrate_r3(g: impl Fn(&Velocity) -> f64, rule: &QuadratureRuleR3) -> Result<f64> {
    let mut total = 0.0;
    for (&x, &wr) in rule.radial.nodes().iter().zip(rule.radial.weights()) {
        let rho = x.sqrt();
        let mut inner = 0.0;
        for (e, &ws) in rule.sphere.points().iter().zip(rule.sphere.weights()) {
            let v = e * rho;
            let val = g(&v);
            if !val.is_finite() {
                return Err(Error::NonFiniteIntegrand {
                    value: val,
                    x: v[0],
                    y: v[1],
                    z: v[2],
                });
            }
            inner += ws * val;
        }
        total += wr * x.exp() * inner;
    }
    Ok(2.0 * PI * total)
}
