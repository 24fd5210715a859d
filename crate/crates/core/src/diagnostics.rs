//! Macroscopic moments, the H-functional, L2 errors and the analytic
//! reference solutions (Maxwell-molecule moment relaxation, BKW).

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::basis::{FunctionTable, SpectralState};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRuleR3;
use crate::Velocity;

/// Lower bound applied to the reconstruction inside `f ln f`.
pub const H_EPSILON: f64 = 1e-12;

/// `ln (2 pi)^{-3/2} - 3/2`, the H-functional of the standard Maxwellian.
pub fn h_equilibrium() -> f64 {
    -1.5 * (2.0 * PI).ln() - 1.5
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSet {
    pub rho: f64,
    pub v: Velocity,
    pub t: f64,
    /// `int v v^T f`.
    pub m: Matrix3<f64>,
    /// `int v |v|^2 f`.
    pub r: Velocity,
    /// `int |v|^4 f`.
    pub s: f64,
    /// False when `rho <= 0`; then `v` and `t` are reported as zero.
    pub physical: bool,
}

impl MomentSet {
    /// Derives `V` and `T` from raw integrals.
    pub fn from_integrals(rho: f64, momentum: Velocity, m: Matrix3<f64>, r: Velocity, s: f64) -> Self {
        let physical = rho > 0.0;
        let (v, t) = if physical {
            let v = momentum / rho;
            (v, (m.trace() - rho * v.norm_squared()) / (3.0 * rho))
        } else {
            (Velocity::zeros(), 0.0)
        };
        Self {
            rho,
            v,
            t,
            m,
            r,
            s,
            physical,
        }
    }
}

/// `f ln f` quadrature with clamping statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HReport {
    pub h: f64,
    pub clamp_count: usize,
    /// `sum w |f|` over clamped nodes.
    pub clamped_mass: f64,
}

/// Basis values at every node of a composed rule, for repeated reconstruction.
#[derive(Clone, Debug)]
pub struct NodalBasis {
    n: usize,
    points: Vec<Velocity>,
    weights: Vec<f64>,
    phi: Vec<f64>,
}

impl NodalBasis {
    pub fn new(disc: crate::basis::Discretization, rule: &QuadratureRuleR3) -> Self {
        let nodes = rule.nodes();
        let n = disc.n();
        let mut table = FunctionTable::new(disc);
        let mut phi = vec![0.0; nodes.len() * n];
        for (node, row) in nodes.iter().zip(phi.chunks_exact_mut(n)) {
            table.basis(&node.point, row);
        }
        Self {
            n,
            points: nodes.iter().map(|nd| nd.point).collect(),
            weights: nodes.iter().map(|nd| nd.weight).collect(),
            phi,
        }
    }

    pub fn points(&self) -> &[Velocity] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `f^(n)` at every node.
    pub fn values(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n, "coefficient length");
        self.phi
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(coeffs).map(|(p, c)| p * c).sum())
            .collect()
    }

    pub fn moments(&self, coeffs: &[f64]) -> MomentSet {
        moments_from_values(&self.points, &self.weights, &self.values(coeffs))
    }

    pub fn h_functional(&self, coeffs: &[f64]) -> HReport {
        let f = self.values(coeffs);
        let mut report = HReport {
            h: 0.0,
            clamp_count: 0,
            clamped_mass: 0.0,
        };
        for (&w, &fv) in self.weights.iter().zip(&f) {
            let g = if fv < H_EPSILON {
                report.clamp_count += 1;
                report.clamped_mass += w * fv.abs();
                H_EPSILON
            } else {
                fv
            };
            report.h += w * g * g.ln();
        }
        report
    }

    /// `||f^(n) - g|| / ||g||` in L2 under this rule.
    pub fn l2_relative_error(&self, coeffs: &[f64], reference: impl Fn(&Velocity) -> f64) -> Result<f64> {
        let f = self.values(coeffs);
        let (mut num, mut den) = (0.0, 0.0);
        for ((p, &w), &fv) in self.points.iter().zip(&self.weights).zip(&f) {
            let g = reference(p);
            if !g.is_finite() {
                return Err(Error::NonFiniteIntegrand {
                    value: g,
                    x: p[0],
                    y: p[1],
                    z: p[2],
                });
            }
            num += w * (fv - g) * (fv - g);
            den += w * g * g;
        }
        if den <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok((num / den).sqrt())
    }
}

fn moments_from_values(points: &[Velocity], weights: &[f64], f: &[f64]) -> MomentSet {
    let mut rho = 0.0;
    let mut mom = Velocity::zeros();
    let mut m = Matrix3::zeros();
    let mut r = Velocity::zeros();
    let mut s = 0.0;
    for ((p, &w), &fv) in points.iter().zip(weights).zip(f) {
        let wf = w * fv;
        let p2 = p.norm_squared();
        rho += wf;
        mom += p * wf;
        m += p * p.transpose() * wf;
        r += p * (p2 * wf);
        s += p2 * p2 * wf;
    }
    MomentSet::from_integrals(rho, mom, m, r, s)
}

/// Moments of the reconstruction of `state` under `rule`.
pub fn moments(state: &SpectralState, rule: &QuadratureRuleR3) -> MomentSet {
    NodalBasis::new(state.disc, rule).moments(&state.coeffs)
}

/// Moments of an arbitrary function under `rule`.
pub fn function_moments(f: impl Fn(&Velocity) -> f64, rule: &QuadratureRuleR3) -> MomentSet {
    let nodes = rule.nodes();
    let points: Vec<Velocity> = nodes.iter().map(|n| n.point).collect();
    let weights: Vec<f64> = nodes.iter().map(|n| n.weight).collect();
    let vals: Vec<f64> = points.iter().map(&f).collect();
    moments_from_values(&points, &weights, &vals)
}

pub fn h_functional(state: &SpectralState, rule: &QuadratureRuleR3) -> HReport {
    NodalBasis::new(state.disc, rule).h_functional(&state.coeffs)
}

pub fn l2_relative_error(
    state: &SpectralState,
    reference: impl Fn(&Velocity) -> f64,
    rule: &QuadratureRuleR3,
) -> Result<f64> {
    NodalBasis::new(state.disc, rule).l2_relative_error(&state.coeffs, reference)
}

/// `rho (2 pi T)^{-3/2} exp(-|v - V|^2 / (2 T))`.
pub fn maxwellian(rho: f64, mean: &Velocity, temp: f64, v: &Velocity) -> f64 {
    rho * (2.0 * PI * temp).powf(-1.5) * (-(v - mean).norm_squared() / (2.0 * temp)).exp()
}

/// Convex combination `alpha f_{M1} + (1 - alpha) f_{M2}` of unit-density Maxwellians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureInit {
    pub alpha: f64,
    pub v1: Velocity,
    pub v2: Velocity,
    pub t1: f64,
    pub t2: f64,
}

impl MixtureInit {
    pub fn new(alpha: f64, v1: Velocity, v2: Velocity, t1: f64, t2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config("alpha", format!("{alpha} outside [0, 1]")));
        }
        if !(t1 > 0.0 && t2 > 0.0) {
            return Err(Error::config("T1/T2", "temperatures must be positive"));
        }
        Ok(Self { alpha, v1, v2, t1, t2 })
    }

    /// `alpha = 1/2`, `V_{1,2} = (-+1, 0, 0)`, `T_1 = T_2 = 2/3`.
    pub fn standard() -> Self {
        Self {
            alpha: 0.5,
            v1: Velocity::new(-1.0, 0.0, 0.0),
            v2: Velocity::new(1.0, 0.0, 0.0),
            t1: 2.0 / 3.0,
            t2: 2.0 / 3.0,
        }
    }

    pub fn density(&self, v: &Velocity) -> f64 {
        self.alpha * maxwellian(1.0, &self.v1, self.t1, v) + (1.0 - self.alpha) * maxwellian(1.0, &self.v2, self.t2, v)
    }

    pub fn rho(&self) -> f64 {
        1.0
    }

    pub fn mean(&self) -> Velocity {
        self.v1 * self.alpha + self.v2 * (1.0 - self.alpha)
    }

    pub fn temperature(&self) -> f64 {
        let a = self.alpha;
        a * self.t1 + (1.0 - a) * self.t2 + a * (1.0 - a) * (self.v1 - self.v2).norm_squared() / 3.0
    }

    pub fn m0(&self) -> Matrix3<f64> {
        let a = self.alpha;
        (Matrix3::identity() * self.t1 + self.v1 * self.v1.transpose()) * a
            + (Matrix3::identity() * self.t2 + self.v2 * self.v2.transpose()) * (1.0 - a)
    }

    pub fn r0(&self) -> Velocity {
        let a = self.alpha;
        self.v1 * (a * (5.0 * self.t1 + self.v1.norm_squared()))
            + self.v2 * ((1.0 - a) * (5.0 * self.t2 + self.v2.norm_squared()))
    }

    pub fn s0(&self) -> f64 {
        let part = |v: &Velocity, t: f64| {
            let v2 = v.norm_squared();
            v2 * v2 + 15.0 * t * t + 10.0 * t * v2
        };
        self.alpha * part(&self.v1, self.t1) + (1.0 - self.alpha) * part(&self.v2, self.t2)
    }
}

/// Analytic `M(t)`, `r(t)`, `s(t)` for Maxwell molecules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxwellMoments {
    pub m: Matrix3<f64>,
    pub r: Velocity,
    pub s: f64,
}

pub fn exact_maxwell_moments(t: f64, init: &MixtureInit) -> MaxwellMoments {
    let temp = init.temperature();
    let v = init.mean();
    let v2 = v.norm_squared();
    let m0 = init.m0();
    let eye = Matrix3::identity();
    let vvt = v * v.transpose();
    let (e2, e3, e1) = ((-t / 2.0).exp(), (-t / 3.0).exp(), (-t).exp());

    let m = m0 * e2 + (eye * temp + vvt) * (1.0 - e2);
    let r = init.r0() * e3 + v * ((5.0 * temp + v2) * (1.0 - e3)) + (m0 - vvt - eye * temp) * v * (2.0 * (e2 - e3));
    let m0vv = (m0 * v).dot(&v);
    let s = init.s0() * e3
        + (v2 * v2 + 15.0 * temp * temp + 10.0 * temp * v2) * (1.0 - e3)
        + 0.5 * (m0.norm_squared() - 3.0 * temp * temp + v2 * v2 - 2.0 * m0vv) * (e1 - e3)
        + 4.0 * (m0vv - v2 * v2 - temp * v2) * (e2 - e3);
    MaxwellMoments { m, r, s }
}

/// `beta(t) = 2 e^{-t/6} / (5 - 2 e^{-t/6})`.
pub fn bkw_beta(t: f64) -> f64 {
    let e = (-t / 6.0).exp();
    2.0 * e / (5.0 - 2.0 * e)
}

/// BKW density with `rho = T = 1`.
pub fn bkw_density(t: f64, v: &Velocity) -> f64 {
    let beta = bkw_beta(t);
    let a = beta + 1.0;
    let v2 = v.norm_squared();
    (2.0 * PI).powf(-1.5) * a.powf(1.5) * (1.0 + beta * (0.5 * a * v2 - 1.5)) * (-0.5 * a * v2).exp()
}

/// `int |v|^4 f` of the BKW solution: `(15 + 30 beta) / (1 + beta)^2`.
pub fn bkw_s(t: f64) -> f64 {
    let beta = bkw_beta(t);
    (15.0 + 30.0 * beta) / ((1.0 + beta) * (1.0 + beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_mass, MassSolver};
    use crate::basis::{maxwellian_coefficient, Discretization};
    use approx::assert_relative_eq;

    fn project(disc: Discretization, rule: &QuadratureRuleR3, f: impl Fn(&Velocity) -> f64) -> SpectralState {
        let mass = assemble_mass(&disc, &rule.radial);
        let solver = MassSolver::new(&disc, &mass).unwrap();
        let mut table = FunctionTable::new(disc);
        let mut b = vec![0.0; disc.n()];
        for nd in rule.nodes() {
            table.accumulate_tests(&nd.point, nd.weight * f(&nd.point), &mut b);
        }
        SpectralState::new(disc, solver.solve(&b).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn mixture_closed_forms() {
        let mix = MixtureInit::standard();
        assert_eq!(mix.mean(), Velocity::zeros());
        assert_relative_eq!(mix.temperature(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(mix.m0()[(0, 0)], 5.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(mix.m0()[(1, 1)], 2.0 / 3.0, epsilon = 1e-15);
        let rule = QuadratureRuleR3::build(40, 110).unwrap();
        let fm = function_moments(|v| mix.density(v), &rule);
        assert_relative_eq!(fm.rho, 1.0, epsilon = 1e-10);
        assert_relative_eq!(fm.m[(0, 0)], 5.0 / 3.0, epsilon = 1e-8);
        assert_relative_eq!(fm.s, mix.s0(), epsilon = 1e-7);
        assert!(MixtureInit::new(1.5, mix.v1, mix.v2, 1.0, 1.0).is_err());
    }

    #[test]
    fn mixture_projection_moments() {
        let mix = MixtureInit::standard();
        let disc = Discretization::new(2, 2).unwrap();
        let rule = QuadratureRuleR3::build(32, 110).unwrap();
        let st = project(disc, &rule, |v| mix.density(v));
        let m = moments(&st, &rule);
        assert!((m.rho - 1.0).abs() < 1e-10);
        assert!(m.v.norm() < 1e-10);
        assert!((m.t - 1.0).abs() < 1e-10);
        assert!((m.m[(0, 0)] - 5.0 / 3.0).abs() < 1e-6);
        assert!((m.m - m.m.transpose()).norm() < 1e-14);
        assert_relative_eq!(m.m.trace(), m.rho * (3.0 * m.t + m.v.norm_squared()), epsilon = 1e-12);
        let z = moments(&SpectralState::zeros(disc), &rule);
        assert_eq!(z.rho, 0.0);
        assert!(!z.physical);
    }

    #[test]
    fn exact_moment_limits() {
        let mix = MixtureInit::standard();
        let e0 = exact_maxwell_moments(0.0, &mix);
        assert!((e0.m - mix.m0()).norm() < 1e-15);
        assert_relative_eq!(e0.s, mix.s0(), epsilon = 1e-13);
        assert!((e0.r - mix.r0()).norm() < 1e-15);
        let inf = exact_maxwell_moments(200.0, &mix);
        assert!((inf.m - Matrix3::identity()).norm() < 1e-14);
        assert_relative_eq!(inf.s, 15.0, epsilon = 1e-12);
        for t in [0.0, 0.5, 3.0, 16.0] {
            assert_eq!(exact_maxwell_moments(t, &mix).r, Velocity::zeros());
        }
        // shifted mixture: s(0), r(0) still reproduce the initial values
        let shifted = MixtureInit::new(0.3, Velocity::new(0.2, -1.0, 0.5), Velocity::new(1.0, 0.3, 0.0), 0.7, 1.4).unwrap();
        let e = exact_maxwell_moments(0.0, &shifted);
        assert_relative_eq!(e.s, shifted.s0(), epsilon = 1e-13);
        assert!((e.r - shifted.r0()).norm() < 1e-13);
    }

    #[test]
    fn shifted_mixture_moments_match_quadrature() {
        let mix = MixtureInit::new(0.3, Velocity::new(0.2, -0.4, 0.5), Velocity::new(0.6, 0.3, 0.0), 0.7, 1.1).unwrap();
        let rule = QuadratureRuleR3::build(48, 110).unwrap();
        let fm = function_moments(|v| mix.density(v), &rule);
        assert!((fm.v - mix.mean()).norm() < 1e-9);
        assert_relative_eq!(fm.t, mix.temperature(), epsilon = 1e-9);
        assert!((fm.m - mix.m0()).norm() < 1e-8);
        assert!((fm.r - mix.r0()).norm() < 1e-8);
        assert_relative_eq!(fm.s, mix.s0(), epsilon = 1e-7);
    }

    #[test]
    fn bkw_examples() {
        assert_relative_eq!(bkw_beta(0.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(bkw_density(0.0, &Velocity::zeros()), 0.0);
        let v = Velocity::new(0.3, -1.2, 0.8);
        assert_relative_eq!(bkw_density(500.0, &v), maxwellian(1.0, &Velocity::zeros(), 1.0, &v), max_relative = 1e-12);
        let rule = QuadratureRuleR3::build(32, 50).unwrap();
        for t in [0.0, 1.0, 5.0] {
            let m = function_moments(|v| bkw_density(t, v), &rule);
            assert_relative_eq!(m.rho, 1.0, epsilon = 1e-12);
            assert_relative_eq!(m.t, 1.0, epsilon = 1e-12);
            assert_relative_eq!(m.s, bkw_s(t), epsilon = 1e-11);
        }
    }

    #[test]
    fn h_functional_of_maxwellian() {
        assert_relative_eq!(h_equilibrium(), -4.25681, epsilon = 1e-5);
        let disc = Discretization::new(4, 4).unwrap();
        let mut c = vec![0.0; disc.n()];
        c[0] = maxwellian_coefficient();
        let st = SpectralState::new(disc, c, 0.0).unwrap();
        let rule = QuadratureRuleR3::build(32, 50).unwrap();
        let h = h_functional(&st, &rule);
        // only far-tail nodes, where the Gaussian underflows the clamp level
        assert!(h.clamp_count < rule.len() / 2);
        assert!(h.clamped_mass < 1e-9, "{}", h.clamped_mass);
        assert!((h.h - h_equilibrium()).abs() < 1e-3, "{}", h.h);
        let zero = h_functional(&SpectralState::zeros(disc), &rule);
        assert_eq!(zero.clamp_count, rule.len());
        assert!(zero.h.abs() < 1e-6);
    }

    #[test]
    fn l2_error_examples() {
        let disc = Discretization::new(3, 2).unwrap();
        let rule = QuadratureRuleR3::build(12, 38).unwrap();
        let g = |v: &Velocity| maxwellian(0.7, &Velocity::zeros(), 1.0, v) * (1.0 + 0.1 * v[0] * v[1]);
        let st = project(disc, &rule, g);
        assert!(l2_relative_error(&st, g, &rule).unwrap() < 1e-12);
        assert!(matches!(l2_relative_error(&st, |_| 0.0, &rule), Err(Error::ZeroNorm)));
    }
}
