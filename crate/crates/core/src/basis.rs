//! Basis functions `phi_j`, polynomial test functions `psi_i`, and the index
//! bookkeeping between `(k, l, m)` and flat positions.
//!
//! Flat ordering is `l` outermost, then `m = -l..=l`, then `k` innermost, so
//! every `(l, m)` pair owns a contiguous block of `K + 1` entries.

use crate::error::{Error, Result};
use crate::specfun::{gamma_half, laguerre, laguerre_table, lm_index, SolidHarmonics};
use crate::Velocity;

/// Largest `k + l` for which `Gamma(k + l + 3/2)` stays finite.
pub const MAX_DEGREE_SUM: usize = 168;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub k: usize,
    pub l: usize,
    pub m: i64,
    pub flat: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Discretization {
    k_max: usize,
    l_max: usize,
}

impl Discretization {
    pub fn new(k_max: usize, l_max: usize) -> Result<Self> {
        if k_max + l_max > MAX_DEGREE_SUM {
            return Err(Error::Domain(format!(
                "K + L = {} exceeds the supported maximum {MAX_DEGREE_SUM}",
                k_max + l_max
            )));
        }
        Ok(Self { k_max, l_max })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// `n = (K+1)(L+1)^2`.
    pub fn n(&self) -> usize {
        (self.k_max + 1) * (self.l_max + 1) * (self.l_max + 1)
    }

    pub fn flat(&self, k: usize, l: usize, m: i64) -> Result<usize> {
        if k > self.k_max || l > self.l_max || m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!(
                "index ({k}, {l}, {m}) outside K = {}, L = {}",
                self.k_max, self.l_max
            )));
        }
        Ok(lm_index(l, m) * (self.k_max + 1) + k)
    }

    pub fn index(&self, k: usize, l: usize, m: i64) -> Result<MultiIndex> {
        Ok(MultiIndex {
            k,
            l,
            m,
            flat: self.flat(k, l, m)?,
        })
    }

    pub fn multi(&self, flat: usize) -> Result<MultiIndex> {
        if flat >= self.n() {
            return Err(Error::Domain(format!("flat index {flat} >= n = {}", self.n())));
        }
        let k = flat % (self.k_max + 1);
        let lm = flat / (self.k_max + 1);
        let l = (lm as f64).sqrt() as usize;
        // guard against rounding in the square root
        let l = if (l + 1) * (l + 1) <= lm { l + 1 } else { l };
        let m = lm as i64 - (l * l + l) as i64;
        Ok(MultiIndex { k, l, m, flat })
    }

    /// All indices in flat order.
    pub fn indices(&self) -> Vec<MultiIndex> {
        (0..self.n()).map(|j| self.multi(j).expect("in range")).collect()
    }

    /// Flat positions of the five collision invariants
    /// `(0,0,0), (0,1,-1), (0,1,0), (0,1,1), (1,0,0)` present in this discretization.
    pub fn invariant_indices(&self) -> Vec<usize> {
        [(0, 0, 0), (0, 1, -1), (0, 1, 0), (0, 1, 1), (1, 0, 0)]
            .iter()
            .filter_map(|&(k, l, m)| self.flat(k, l, m).ok())
            .collect()
    }
}

/// `mu_{k,l} = sqrt(2 k! / Gamma(k + l + 3/2))`.
pub fn mu_norm(k: usize, l: usize) -> Result<f64> {
    if k + l > MAX_DEGREE_SUM {
        return Err(Error::Domain(format!("mu_norm({k}, {l}): Gamma overflow")));
    }
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    let ratio = fact / gamma_half(2 * (k + l) + 3);
    Ok((2.0 * ratio).sqrt())
}

/// Coefficient vector of the expansion `f^(n) = sum_j f_j phi_j` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub coeffs: Vec<f64>,
    pub disc: Discretization,
    pub time: f64,
}

impl SpectralState {
    pub fn new(disc: Discretization, coeffs: Vec<f64>, time: f64) -> Result<Self> {
        if coeffs.len() != disc.n() {
            return Err(Error::Dimension {
                expected: disc.n(),
                actual: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteState { step: 0 });
        }
        Ok(Self { coeffs, disc, time })
    }

    pub fn zeros(disc: Discretization) -> Self {
        Self {
            coeffs: vec![0.0; disc.n()],
            disc,
            time: 0.0,
        }
    }
}

/// Batched evaluation of all test functions (or all basis functions) at a point.
#[derive(Clone, Debug)]
pub struct FunctionTable {
    disc: Discretization,
    solid: SolidHarmonics,
    mu: Vec<f64>,
    lag: Vec<f64>,
    sh: Vec<f64>,
}

impl FunctionTable {
    pub fn new(disc: Discretization) -> Self {
        let kk = disc.k_max + 1;
        let mut mu = vec![0.0; kk * (disc.l_max + 1)];
        for l in 0..=disc.l_max {
            for k in 0..kk {
                mu[l * kk + k] = mu_norm(k, l).expect("validated by Discretization");
            }
        }
        Self {
            disc,
            solid: SolidHarmonics::new(disc.l_max),
            mu,
            lag: vec![0.0; kk * (disc.l_max + 1)],
            sh: vec![0.0; (disc.l_max + 1) * (disc.l_max + 1)],
        }
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    fn prepare(&mut self, v: &Velocity) -> f64 {
        let kk = self.disc.k_max + 1;
        let r2 = v.norm_squared();
        for l in 0..=self.disc.l_max {
            laguerre_table(l as f64 + 0.5, r2, &mut self.lag[l * kk..(l + 1) * kk]);
        }
        self.solid.eval(v, &mut self.sh);
        r2
    }

    /// `out[i] += weight * psi_i(v)` for all `i`.
    pub fn accumulate_tests(&mut self, v: &Velocity, weight: f64, out: &mut [f64]) {
        self.prepare(v);
        let kk = self.disc.k_max + 1;
        for l in 0..=self.disc.l_max {
            let lag = &self.lag[l * kk..(l + 1) * kk];
            for m in -(l as i64)..=(l as i64) {
                let lm = lm_index(l, m);
                let s = weight * self.sh[lm];
                let dst = &mut out[lm * kk..(lm + 1) * kk];
                for (d, &p) in dst.iter_mut().zip(lag) {
                    *d += s * p;
                }
            }
        }
    }

    /// `out[i] = psi_i(v)`.
    pub fn tests(&mut self, v: &Velocity, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        self.accumulate_tests(v, 1.0, out);
    }

    /// `out[j] = phi_j(v)`.
    pub fn basis(&mut self, v: &Velocity, out: &mut [f64]) {
        let r2 = self.prepare(v);
        let g = (-0.5 * r2).exp();
        let kk = self.disc.k_max + 1;
        for l in 0..=self.disc.l_max {
            let lag = &self.lag[l * kk..(l + 1) * kk];
            let mu = &self.mu[l * kk..(l + 1) * kk];
            for m in -(l as i64)..=(l as i64) {
                let lm = lm_index(l, m);
                let s = g * self.sh[lm];
                for k in 0..kk {
                    out[lm * kk + k] = s * mu[k] * lag[k];
                }
            }
        }
    }
}

fn radial_power(rho: f64, l: usize) -> f64 {
    if l == 0 {
        1.0
    } else {
        rho.powi(l as i32)
    }
}

fn angular(j: &MultiIndex, v: &Velocity) -> f64 {
    let rho = v.norm();
    if rho == 0.0 {
        // only l = 0 survives at the origin; Y_00 is constant
        return if j.l == 0 {
            crate::specfun::sph_norm(0, 0)
        } else {
            0.0
        };
    }
    let dir = crate::specfun::AngleDirection::from_vector(v);
    crate::specfun::real_sph_harm(j.l, j.m, &dir).expect("valid multi-index")
}

/// `phi_j(v) = mu_{k,l} e^{-|v|^2/2} L_k^{(l+1/2)}(|v|^2) |v|^l Y_{l,m}(v/|v|)`.
pub fn basis_eval(j: &MultiIndex, v: &Velocity) -> f64 {
    let rho = v.norm();
    let r2 = rho * rho;
    mu_norm(j.k, j.l).expect("valid multi-index")
        * (-0.5 * r2).exp()
        * laguerre(j.k, j.l as f64 + 0.5, r2)
        * radial_power(rho, j.l)
        * angular(j, v)
}

/// `psi_i(v) = L_k^{(l+1/2)}(|v|^2) |v|^l Y_{l,m}(v/|v|)`.
pub fn test_eval(i: &MultiIndex, v: &Velocity) -> f64 {
    let rho = v.norm();
    laguerre(i.k, i.l as f64 + 0.5, rho * rho) * radial_power(rho, i.l) * angular(i, v)
}

/// Pointwise reconstruction `f^(n)(v) = sum_j f_j phi_j(v)`.
pub fn eval_solution(state: &SpectralState, v: &Velocity) -> f64 {
    let mut table = FunctionTable::new(state.disc);
    let mut phi = vec![0.0; state.disc.n()];
    table.basis(v, &mut phi);
    state.coeffs.iter().zip(&phi).map(|(c, p)| c * p).sum()
}

/// Coefficient of `phi_{(0,0,0)}` that reproduces the standard Maxwellian
/// `(2 pi)^{-3/2} e^{-|v|^2/2}` exactly.
pub fn maxwellian_coefficient() -> f64 {
    (2.0 * std::f64::consts::PI).powf(-1.5) * (4.0 * std::f64::consts::PI).sqrt()
        / mu_norm(0, 0).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_r3, QuadratureRuleR3};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn mu_examples() {
        assert_relative_eq!(mu_norm(0, 0).unwrap(), (2.0 / (PI.sqrt() / 2.0)).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(mu_norm(0, 0).unwrap(), 1.502_251_1, epsilon = 1e-7);
        let g52 = 0.75 * PI.sqrt();
        assert_relative_eq!(mu_norm(0, 1).unwrap(), (2.0 / g52).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(mu_norm(0, 1).unwrap(), 1.226_582_9, epsilon = 1e-7);
        assert_eq!(mu_norm(1, 0).unwrap(), mu_norm(0, 1).unwrap());
        assert!(mu_norm(100, 100).is_err());
    }

    #[test]
    fn basis_examples() {
        let d = Discretization::new(2, 2).unwrap();
        let j0 = d.index(0, 0, 0).unwrap();
        let want = mu_norm(0, 0).unwrap() / (4.0 * PI).sqrt();
        assert_relative_eq!(basis_eval(&j0, &Velocity::zeros()), want, max_relative = 1e-15);
        assert_relative_eq!(want, 0.423_777_2, epsilon = 1e-7);
        assert_eq!(basis_eval(&d.index(0, 1, 0).unwrap(), &Velocity::zeros()), 0.0);
        let rule = QuadratureRuleR3::build(16, 38).unwrap();
        let norm = integrate_r3(|v| basis_eval(&j0, v).powi(2), &rule).unwrap();
        assert!((norm - 1.0).abs() < 1e-10, "{norm}");
    }

    #[test]
    fn test_function_examples() {
        let d = Discretization::new(2, 2).unwrap();
        let any = Velocity::new(0.3, -1.2, 2.0);
        assert_relative_eq!(test_eval(&d.index(0, 0, 0).unwrap(), &any), 0.282_094_8, epsilon = 1e-7);
        let v = Velocity::new(1.0, 0.0, 0.0);
        let want = 0.5 / (4.0 * PI).sqrt();
        assert_relative_eq!(test_eval(&d.index(1, 0, 0).unwrap(), &v), want, max_relative = 1e-14);
        assert_relative_eq!(want, 0.141_047_4, epsilon = 1e-7);
        let v = Velocity::new(0.0, 0.0, 2.0);
        assert_relative_eq!(test_eval(&d.index(0, 1, 0).unwrap(), &v), 0.977_205_0, epsilon = 1e-7);
    }

    #[test]
    fn invariants_match_closed_forms() {
        let d = Discretization::new(3, 3).unwrap();
        let c0 = (1.0 / (4.0 * PI)).sqrt();
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        let mut table = FunctionTable::new(d);
        let mut out = vec![0.0; d.n()];
        let pts = [
            Velocity::new(0.4, -1.3, 0.9),
            Velocity::new(-2.2, 0.1, 1.7),
            Velocity::new(0.0, 0.0, -0.5),
            Velocity::new(3.0, 2.0, -1.0),
        ];
        for v in &pts {
            let checks = [
                ((0, 0, 0), c0),
                ((0, 1, -1), c1 * v[1]),
                ((0, 1, 0), c1 * v[2]),
                ((0, 1, 1), c1 * v[0]),
                ((1, 0, 0), c0 * (1.5 - v.norm_squared())),
            ];
            table.tests(v, &mut out);
            for ((k, l, m), want) in checks {
                let idx = d.index(k, l, m).unwrap();
                assert!((test_eval(&idx, v) - want).abs() < 1e-13);
                assert!((out[idx.flat] - want).abs() < 1e-13);
            }
        }
        assert_eq!(d.invariant_indices().len(), 5);
    }

    #[test]
    fn batched_tables_match_scalar_evaluation() {
        let d = Discretization::new(4, 3).unwrap();
        let mut table = FunctionTable::new(d);
        let mut psi = vec![0.0; d.n()];
        let mut phi = vec![0.0; d.n()];
        let v = Velocity::new(0.7, -0.4, 1.1);
        table.tests(&v, &mut psi);
        table.basis(&v, &mut phi);
        for j in d.indices() {
            assert!((psi[j.flat] - test_eval(&j, &v)).abs() < 1e-13 * psi[j.flat].abs().max(1.0));
            assert!((phi[j.flat] - basis_eval(&j, &v)).abs() < 1e-14);
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let d = Discretization::new(4, 4).unwrap();
        let rule = QuadratureRuleR3::build(24, 110).unwrap();
        let mut table = FunctionTable::new(d);
        let n = d.n();
        let mut gram = vec![0.0; n * n];
        let mut phi = vec![0.0; n];
        for node in rule.nodes() {
            table.basis(&node.point, &mut phi);
            for a in 0..n {
                let wa = node.weight * phi[a];
                for b in 0..n {
                    gram[a * n + b] += wa * phi[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * n + b] - want).abs() < 1e-10, "({a},{b}) = {}", gram[a * n + b]);
            }
        }
    }

    #[test]
    fn reconstruction_examples() {
        let d = Discretization::new(2, 2).unwrap();
        let mut state = SpectralState::zeros(d);
        assert_eq!(eval_solution(&state, &Velocity::new(0.5, 0.1, 0.0)), 0.0);
        state.coeffs[0] = 1.0;
        assert_relative_eq!(eval_solution(&state, &Velocity::zeros()), 0.423_777_2, epsilon = 1e-7);
        let c = maxwellian_coefficient();
        assert_relative_eq!(c, 0.149_827_87, epsilon = 1e-8);
        state.coeffs[0] = c;
        for ix in -4..=4 {
            for iy in -4..=4 {
                let v = Velocity::new(ix as f64 * 0.5, iy as f64 * 0.5, 0.3);
                let fm = (2.0 * PI).powf(-1.5) * (-0.5 * v.norm_squared()).exp();
                assert!((eval_solution(&state, &v) - fm).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_indices_rejected() {
        let d = Discretization::new(2, 1).unwrap();
        assert!(d.flat(3, 0, 0).is_err());
        assert!(d.flat(0, 2, 0).is_err());
        assert!(d.flat(0, 1, 2).is_err());
        assert!(d.multi(d.n()).is_err());
        assert!(SpectralState::new(d, vec![0.0; 3], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn flat_round_trip(k_max in 0usize..8, l_max in 0usize..8, pick in 0usize..10_000) {
            let d = Discretization::new(k_max, l_max).unwrap();
            prop_assert_eq!(d.n(), (k_max + 1) * (l_max + 1) * (l_max + 1));
            let flat = pick % d.n();
            let j = d.multi(flat).unwrap();
            prop_assert_eq!(d.flat(j.k, j.l, j.m).unwrap(), flat);
        }

        #[test]
        fn reconstruction_is_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            x in proptest::collection::vec(-1.0f64..1.0, 18),
            y in proptest::collection::vec(-1.0f64..1.0, 18),
            v in proptest::array::uniform3(-3.0f64..3.0),
        ) {
            let d = Discretization::new(1, 2).unwrap();
            let v = Velocity::from(v);
            let sx = SpectralState::new(d, x.clone(), 0.0).unwrap();
            let sy = SpectralState::new(d, y.clone(), 0.0).unwrap();
            let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let sc = SpectralState::new(d, comb, 0.0).unwrap();
            let lhs = eval_solution(&sc, &v);
            let rhs = a * eval_solution(&sx, &v) + b * eval_solution(&sy, &v);
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
