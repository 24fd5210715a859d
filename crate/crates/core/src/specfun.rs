//! Associated Laguerre and Legendre polynomials and real spherical harmonics.
//!
//! All evaluations use three-term recursions. The associated Legendre functions
//! carry the Condon-Shortley phase `(-1)^m`; the real spherical harmonics drop it,
//! so that `Y_{1,1}` is proportional to `+e_1` and `Y_{1,-1}` to `+e_2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Velocity;

/// Direction on the unit sphere given by azimuth `phi` and polar angle `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleDirection {
    pub phi: f64,
    pub theta: f64,
}

impl AngleDirection {
    pub fn new(phi: f64, theta: f64) -> Self {
        Self { phi, theta }
    }

    /// Angles of a nonzero vector; `phi` is mapped into `[0, 2pi)`.
    pub fn from_vector(v: &Velocity) -> Self {
        let rho = v.norm();
        let theta = if rho > 0.0 {
            (v[2] / rho).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        let mut phi = v[1].atan2(v[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        Self { phi, theta }
    }

    pub fn unit(&self) -> Velocity {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        Velocity::new(cp * st, sp * st, ct)
    }
}

/// `L_k^{(alpha)}(x)` by the upward three-term recursion.
pub fn laguerre(k: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for j in 2..=k {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0 + alpha - x) * cur - (jf - 1.0 + alpha) * prev) / jf;
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[k] = L_k^{(alpha)}(x)` for `k = 0..out.len()`.
pub fn laguerre_table(alpha: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 1.0 + alpha - x;
    }
    for j in 2..out.len() {
        let jf = j as f64;
        out[j] = ((2.0 * jf - 1.0 + alpha - x) * out[j - 1] - (jf - 1.0 + alpha) * out[j - 2]) / jf;
    }
}

/// `Gamma(h / 2)` for a positive integer `h`, exact up to rounding.
pub fn gamma_half(h: usize) -> f64 {
    assert!(h > 0, "gamma_half(0) is a pole");
    let (mut acc, mut x) = if h % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = h as f64 / 2.0;
    while x < target {
        acc *= x;
        x += 1.0;
    }
    acc
}

/// `(2m-1)!!`, with `(-1)!! = 1`.
pub fn double_factorial_odd(m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, j| acc * (2 * j - 1) as f64)
}

/// Associated Legendre function `P_{l,m}(x)` including the `(-1)^m` phase.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("legendre order m = {m} exceeds degree l = {l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("legendre argument {x} outside [-1, 1]")));
    }
    Ok(legendre_cs(l, m, x, (1.0 - x * x).max(0.0).sqrt()))
}

/// `P_{l,m}` from `x = cos(theta)` and `s = sin(theta) >= 0`, avoiding `sqrt(1 - x^2)`.
fn legendre_cs(l: usize, m: usize, x: f64, s: f64) -> f64 {
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let pmm = sign * double_factorial_odd(m) * s.powi(m as i32);
    if l == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for k in (m + 2)..=l {
        let next = ((2 * k - 1) as f64 * x * cur - (k - 1 + m) as f64 * prev) / (k - m) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalization of the real spherical harmonic `Y_{l,m}` (without Legendre factor).
pub fn sph_norm(l: usize, m: i64) -> f64 {
    let am = m.unsigned_abs() as usize;
    if am == 0 {
        ((2 * l + 1) as f64 / (4.0 * PI)).sqrt()
    } else {
        // (l-|m|)!/(l+|m|)! as a product of reciprocals
        let ratio = ((l - am + 1)..=(l + am)).fold(1.0, |acc, j| acc / j as f64);
        ((2 * l + 1) as f64 / (2.0 * PI) * ratio).sqrt()
    }
}

/// Real spherical harmonic `Y_{l,m}` at the given direction.
pub fn real_sph_harm(l: usize, m: i64, dir: &AngleDirection) -> Result<f64> {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return Err(Error::Domain(format!("|m| = {am} exceeds degree l = {l}")));
    }
    let (st, ct) = dir.theta.sin_cos();
    // drop the Condon-Shortley phase
    let phase = if am % 2 == 0 { 1.0 } else { -1.0 };
    let p = phase * legendre_cs(l, am, ct, st.abs());
    let ang = match m.signum() {
        0 => 1.0,
        1 => (am as f64 * dir.phi).cos(),
        _ => (am as f64 * dir.phi).sin(),
    };
    Ok(sph_norm(l, m) * p * ang)
}

/// Flat position of `(l, m)` in arrays of size `(lmax+1)^2`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    l * l + (l as i64 + m) as usize
}

/// Batched evaluation of the solid harmonics `|v|^l Y_{l,m}(v/|v|)` for all
/// `l <= lmax`, as polynomials in the Cartesian components of `v`.
#[derive(Clone, Debug)]
pub struct SolidHarmonics {
    lmax: usize,
    norms: Vec<f64>,
    dfact: Vec<f64>,
}

impl SolidHarmonics {
    pub fn new(lmax: usize) -> Self {
        let mut norms = vec![0.0; (lmax + 1) * (lmax + 1)];
        for l in 0..=lmax {
            for m in -(l as i64)..=(l as i64) {
                norms[lm_index(l, m)] = sph_norm(l, m);
            }
        }
        let dfact = (0..=lmax).map(double_factorial_odd).collect();
        Self { lmax, norms, dfact }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn len(&self) -> usize {
        (self.lmax + 1) * (self.lmax + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Writes `|v|^l Y_{l,m}(v/|v|)` into `out[lm_index(l, m)]`.
    ///
    /// With `A_m + i B_m = (v_1 + i v_2)^m` and the polynomial
    /// `p_{l,m} = |v|^{l-m} P_{l,m}(cos) / sin^m` (phase dropped), the solid
    /// harmonic is `N_{l,m} p_{l,m} A_m` for `m > 0` and `N_{l,m} p_{l,|m|} B_{|m|}`
    /// for `m < 0`.
    pub fn eval(&self, v: &Velocity, out: &mut [f64]) {
        debug_assert!(out.len() >= self.len());
        let (x, y, z) = (v[0], v[1], v[2]);
        let r2 = x * x + y * y + z * z;
        let mut a = 1.0;
        let mut b = 0.0;
        for m in 0..=self.lmax {
            if m > 0 {
                let na = a * x - b * y;
                let nb = a * y + b * x;
                a = na;
                b = nb;
            }
            let mut prev = self.dfact[m];
            let mut cur = 0.0;
            for l in m..=self.lmax {
                let p = if l == m {
                    prev
                } else if l == m + 1 {
                    cur = (2 * m + 1) as f64 * z * prev;
                    cur
                } else {
                    let next = ((2 * l - 1) as f64 * z * cur - (l - 1 + m) as f64 * r2 * prev)
                        / (l - m) as f64;
                    prev = cur;
                    cur = next;
                    next
                };
                if m == 0 {
                    out[lm_index(l, 0)] = self.norms[lm_index(l, 0)] * p;
                } else {
                    let mi = m as i64;
                    out[lm_index(l, mi)] = self.norms[lm_index(l, mi)] * p * a;
                    out[lm_index(l, -mi)] = self.norms[lm_index(l, -mi)] * p * b;
                }
            }
        }
    }
}
