//! Projection of initial data and explicit time stepping of
//! `d/dt (M f)_i = f^T Q_i f`.

use std::fmt;
use std::str::FromStr;

use crate::assembly::CollisionOperator;
use crate::basis::{FunctionTable, SpectralState};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRuleR3;
use crate::Velocity;

/// Uniform time grid `t_k = k tau`, `k = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    tau: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::TimeGrid(format!("tau = {tau} must be positive and finite")));
        }
        if steps == 0 {
            return Err(Error::TimeGrid("step count must be at least 1".into()));
        }
        Ok(Self { tau, steps })
    }

    /// `steps` equal steps up to `t_final`.
    pub fn to_final(t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::TimeGrid("step count must be at least 1".into()));
        }
        Self::new(t_final / steps as f64, steps)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn final_time(&self) -> f64 {
        self.tau * self.steps as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Euler,
    /// Explicit midpoint rule.
    Rk2,
    /// Classical four-stage Runge-Kutta.
    Rk4,
}

impl Scheme {
    pub fn order(&self) -> u32 {
        match self {
            Scheme::Euler => 1,
            Scheme::Rk2 => 2,
            Scheme::Rk4 => 4,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Rk2 => "rk2",
            Scheme::Rk4 => "rk4",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euler" => Ok(Scheme::Euler),
            "rk2" | "midpoint" => Ok(Scheme::Rk2),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::config("scheme", format!("unknown scheme {other:?}"))),
        }
    }
}

/// Sampled states of one integration.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &SpectralState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Right-hand side `b_i = int f0 psi_i` and coefficients `M^{-1} b`.
pub fn project_initial(
    f0: impl Fn(&Velocity) -> f64,
    op: &CollisionOperator,
    rule: &QuadratureRuleR3,
) -> Result<SpectralState> {
    let disc = op.disc;
    let mut table = FunctionTable::new(disc);
    let mut b = vec![0.0; disc.n()];
    for node in rule.nodes() {
        let val = f0(&node.point);
        if !val.is_finite() {
            let p = node.point;
            return Err(Error::NonFiniteIntegrand {
                value: val,
                x: p[0],
                y: p[1],
                z: p[2],
            });
        }
        if val != 0.0 {
            table.accumulate_tests(&node.point, node.weight * val, &mut b);
        }
    }
    SpectralState::new(disc, op.solver().solve(&b)?, 0.0)
}

/// `q_i = f^T Q_i f`.
pub fn collision_terms(op: &CollisionOperator, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != op.n() {
        return Err(Error::Dimension {
            expected: op.n(),
            actual: coeffs.len(),
        });
    }
    if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("non-finite coefficient f_{i}")));
    }
    Ok(op.q.quadratic_forms(coeffs))
}

/// `df/dt = M^{-1} q(f)`.
pub fn collision_rhs(op: &CollisionOperator, state: &SpectralState) -> Result<Vec<f64>> {
    rhs(op, &state.coeffs)
}

fn rhs(op: &CollisionOperator, f: &[f64]) -> Result<Vec<f64>> {
    op.solver().solve(&collision_terms(op, f)?)
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// One step of `scheme` from `f`.
pub fn step(op: &CollisionOperator, f: &[f64], tau: f64, scheme: Scheme) -> Result<Vec<f64>> {
    Ok(match scheme {
        Scheme::Euler => axpy(tau, &rhs(op, f)?, f),
        Scheme::Rk2 => {
            let k1 = rhs(op, f)?;
            let k2 = rhs(op, &axpy(0.5 * tau, &k1, f))?;
            axpy(tau, &k2, f)
        }
        Scheme::Rk4 => {
            let k1 = rhs(op, f)?;
            let k2 = rhs(op, &axpy(0.5 * tau, &k1, f))?;
            let k3 = rhs(op, &axpy(0.5 * tau, &k2, f))?;
            let k4 = rhs(op, &axpy(tau, &k3, f))?;
            f.iter()
                .enumerate()
                .map(|(i, fi)| fi + tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect()
        }
    })
}

/// Advances `state0` over `grid`, keeping every `stride`-th state and the last one.
pub fn advance(
    op: &CollisionOperator,
    state0: &SpectralState,
    grid: TimeGrid,
    scheme: Scheme,
    stride: usize,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        times: vec![state0.time],
        states: vec![state0.clone()],
    };
    advance_with(op, state0, grid, scheme, |k, state| {
        if k % stride.max(1) == 0 || k == grid.steps() {
            traj.times.push(state.time);
            traj.states.push(state.clone());
        }
    })?;
    Ok(traj)
}

/// Advances `state0`, calling `observe(k, state)` after every step `k = 1..=N_t`.
pub fn advance_with(
    op: &CollisionOperator,
    state0: &SpectralState,
    grid: TimeGrid,
    scheme: Scheme,
    mut observe: impl FnMut(usize, &SpectralState),
) -> Result<SpectralState> {
    if state0.disc != op.disc {
        return Err(Error::Dimension {
            expected: op.n(),
            actual: state0.coeffs.len(),
        });
    }
    let mut state = state0.clone();
    for k in 1..=grid.steps() {
        let next = step(op, &state.coeffs, grid.tau(), scheme).map_err(|e| match e {
            Error::Domain(_) => Error::NonFiniteState { step: k },
            other => other,
        })?;
        if next.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteState { step: k });
        }
        state.coeffs = next;
        state.time = state0.time + k as f64 * grid.tau();
        observe(k, &state);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{maxwellian_coefficient, Discretization};
    use crate::kernel::KernelSpec;
    use std::f64::consts::PI;

    fn operator() -> CollisionOperator {
        let disc = Discretization::new(2, 2).unwrap();
        CollisionOperator::build(disc, KernelSpec::maxwell(), 16, 38).unwrap()
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(0.1, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 1).is_err());
        let g = TimeGrid::to_final(16.0, 256).unwrap();
        assert_eq!(g.tau(), 0.0625);
        assert_eq!(g.final_time(), 16.0);
        assert_eq!("RK4".parse::<Scheme>().unwrap(), Scheme::Rk4);
        assert!("rk3".parse::<Scheme>().is_err());
    }

    #[test]
    fn projection_examples() {
        let op = operator();
        let rule = op.rule().unwrap();
        let st = project_initial(|v| (2.0 * PI).powf(-1.5) * (-0.5 * v.norm_squared()).exp(), &op, &rule).unwrap();
        assert!((st.coeffs[0] - 0.149_827_87).abs() < 1e-8);
        assert!((st.coeffs[0] - maxwellian_coefficient()).abs() < 1e-12);
        assert!(st.coeffs[1..].iter().all(|c| c.abs() < 1e-12));
        let zero = project_initial(|_| 0.0, &op, &rule).unwrap();
        assert!(zero.coeffs.iter().all(|&c| c == 0.0));
        assert!(project_initial(|_| f64::NAN, &op, &rule).is_err());
    }

    #[test]
    fn equilibrium_and_zero_are_fixed() {
        let op = operator();
        let mut f = vec![0.0; op.n()];
        let zero = rhs(&op, &f).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        f[0] = maxwellian_coefficient();
        let r = rhs(&op, &f).unwrap();
        assert!(r.iter().all(|x| x.abs() <= 1e-9));
        f[3] = f64::INFINITY;
        assert!(rhs(&op, &f).is_err());
    }

    #[test]
    fn euler_reversal_defect_is_second_order() {
        let op = operator();
        let f0: Vec<f64> = (0..op.n()).map(|i| if i == 0 { 0.15 } else { 0.01 * (i as f64).cos() }).collect();
        let defect = |tau: f64| {
            let f1 = step(&op, &f0, tau, Scheme::Euler).unwrap();
            let back = step(&op, &f1, -tau, Scheme::Euler).unwrap();
            back.iter().zip(&f0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (d1, d2) = (defect(0.1), defect(0.05));
        assert!(d1 > 0.0);
        let ratio = d1 / d2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn stride_keeps_last_state() {
        let op = operator();
        let mut f = vec![0.0; op.n()];
        f[0] = maxwellian_coefficient();
        let s0 = SpectralState::new(op.disc, f, 0.0).unwrap();
        let traj = advance(&op, &s0, TimeGrid::new(0.1, 10).unwrap(), Scheme::Rk2, 4).unwrap();
        assert_eq!(traj.times.len(), 4);
        assert!((traj.times[3] - 1.0).abs() < 1e-15);
    }
}
