//! Reference experiments: the mixture relaxation, the BKW solution and the
//! hard-sphere comparison against DSMC. The acceptance suite and the
//! `validate` command both run these.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::CollisionOperator;
use crate::basis::{basis_eval, test_eval, Discretization, SpectralState};
use crate::cache::{cache_read, cache_write, load_or_build, CacheKey};
use crate::diagnostics::{
    bkw_density, exact_maxwell_moments, h_equilibrium, maxwellian, MixtureInit, MomentSet, NodalBasis,
};
use crate::dsmc::{dsmc_run, DsmcSeries};
use crate::error::{Error, Result};
use crate::integrator::{advance_with, collision_rhs, project_initial, Scheme, TimeGrid};
use crate::kernel::{kernel_eval, post_collision, KernelSpec};
use crate::quadrature::QuadratureRuleR3;

/// Source of assembled operators, optionally backed by a cache directory.
#[derive(Clone, Debug, Default)]
pub struct Operators {
    dir: Option<PathBuf>,
}

impl Operators {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn get(&self, k: usize, l: usize, n_gl: usize, n_l: usize, kernel: KernelSpec) -> Result<CollisionOperator> {
        let key = CacheKey {
            k_max: k,
            l_max: l,
            n_gl,
            n_l,
            kernel,
        };
        match &self.dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Ok(load_or_build(dir, &key)?.0)
            }
            None => CollisionOperator::build(Discretization::new(k, l)?, kernel, n_gl, n_l),
        }
    }
}

/// Outcome of one validation check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    /// `None` when the check could not be carried out on this machine.
    pub passed: Option<bool>,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: Some(passed),
            detail,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "UNVERIFIED",
        }
    }

    pub fn failed(&self) -> bool {
        self.passed == Some(false)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.status(), self.name, self.detail)
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

/// Collects sub-results of one check into a single line.
#[derive(Default)]
struct Parts {
    ok: bool,
    text: Vec<String>,
}

impl Parts {
    fn new() -> Self {
        Self {
            ok: true,
            text: Vec::new(),
        }
    }

    fn add(&mut self, ok: bool, text: String) {
        self.ok &= ok;
        self.text.push(if ok { text } else { format!("{text} [x]") });
    }

    fn finish(self, name: &str) -> Check {
        Check::new(name, self.ok, self.text.join("; "))
    }
}

// mixture relaxation

/// Max relative errors of `M_11(t)` and `s(t)` against the analytic curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentErrors {
    pub m11: f64,
    pub s: f64,
}

/// Summary of one trajectory of the spectral solver.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub times: Vec<f64>,
    pub moments: Vec<MomentSet>,
    pub h: Vec<f64>,
    /// Largest relative change of the invariant components of `M f`.
    pub invariant_drift: f64,
}

impl RunSummary {
    /// Largest relative drift of `rho`, `V` (scaled by `sqrt T`) and `T`.
    pub fn moment_drift(&self) -> f64 {
        let m0 = &self.moments[0];
        let vscale = m0.v.norm().max(m0.t.sqrt());
        self.moments
            .iter()
            .map(|m| {
                ((m.rho - m0.rho) / m0.rho)
                    .abs()
                    .max((m.v - m0.v).norm() / vscale)
                    .max(((m.t - m0.t) / m0.t).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn errors_against(&self, init: &MixtureInit) -> MomentErrors {
        let mut e = MomentErrors { m11: 0.0, s: 0.0 };
        for (t, m) in self.times.iter().zip(&self.moments) {
            let ex = exact_maxwell_moments(*t, init);
            e.m11 = e.m11.max(((m.m[(0, 0)] - ex.m[(0, 0)]) / ex.m[(0, 0)]).abs());
            e.s = e.s.max(((m.s - ex.s) / ex.s).abs());
        }
        e
    }
}

/// Advances `state0` and records moments and H with the operator's own rule
/// after every step.
pub fn run_summary(op: &CollisionOperator, state0: &SpectralState, grid: TimeGrid, scheme: Scheme) -> Result<RunSummary> {
    let rule = op.rule()?;
    let nb = NodalBasis::new(op.disc, &rule);
    let inv = op.disc.invariant_indices();
    let mf0 = op.mass_apply(&state0.coeffs);
    let scale = inv.iter().map(|&i| mf0[i].abs()).fold(0.0, f64::max);
    let mut out = RunSummary {
        times: vec![state0.time],
        moments: vec![nb.moments(&state0.coeffs)],
        h: vec![nb.h_functional(&state0.coeffs).h],
        invariant_drift: 0.0,
    };
    advance_with(op, state0, grid, scheme, |_, s| {
        out.times.push(s.time);
        out.moments.push(nb.moments(&s.coeffs));
        out.h.push(nb.h_functional(&s.coeffs).h);
        let mf = op.mass_apply(&s.coeffs);
        for &i in &inv {
            out.invariant_drift = out.invariant_drift.max((mf[i] - mf0[i]).abs() / scale);
        }
    })?;
    Ok(out)
}

/// Projects the mixture with the operator's rule.
pub fn project_mixture(op: &CollisionOperator, init: &MixtureInit) -> Result<SpectralState> {
    project_initial(|v| init.density(v), op, &op.rule()?)
}

/// Relative L2 error of the projection of `f0`, measured with the operator's rule.
pub fn projection_error(op: &CollisionOperator, f0: impl Fn(&crate::Velocity) -> f64 + Copy) -> Result<f64> {
    let rule = op.rule()?;
    let st = project_initial(f0, op, &rule)?;
    NodalBasis::new(op.disc, &rule).l2_relative_error(&st.coeffs, f0)
}

/// Max relative errors of `M_11`, `s` over `[0, t_final]` for the mixture.
pub fn mixture_errors(op: &CollisionOperator, scheme: Scheme, steps: usize, t_final: f64) -> Result<MomentErrors> {
    let init = MixtureInit::standard();
    let st0 = project_mixture(op, &init)?;
    Ok(run_summary(op, &st0, TimeGrid::to_final(t_final, steps)?, scheme)?.errors_against(&init))
}

// BKW

/// One row of the BKW projection table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BkwRow {
    pub k: usize,
    pub n: usize,
    pub l2: f64,
}

pub const BKW_RULE: (usize, usize) = (16, 38);

pub fn bkw_table(ops: &Operators, ks: impl IntoIterator<Item = usize>) -> Result<Vec<BkwRow>> {
    ks.into_iter()
        .map(|k| {
            let op = ops.get(k, 0, BKW_RULE.0, BKW_RULE.1, KernelSpec::maxwell())?;
            Ok(BkwRow {
                k,
                n: op.n(),
                l2: projection_error(&op, |v| bkw_density(0.0, v))?,
            })
        })
        .collect()
}

// brute-force collision matrix entries

/// `Q_i[k, l]` by the direct double sum over node pairs and scattering
/// directions, without any factorization:
/// `1/2 sum_{a,b} W_a W_b phi_k(v_a) phi_l(v_b) 4 pi sum_j w_j B (psi_i(v') + psi_i(w') - psi_i(v_a) - psi_i(v_b))`.
pub fn brute_force_entries(
    disc: &Discretization,
    kernel: &KernelSpec,
    rule: &QuadratureRuleR3,
    entries: &[(usize, usize, usize)],
) -> Result<Vec<f64>> {
    let nodes = rule.nodes();
    let scatter = &rule.sphere;
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; disc.n()];
    let mut out = Vec::with_capacity(entries.len());
    for &(i, k, l) in entries {
        let ti = disc.multi(i)?;
        if cache[i].is_none() {
            // G[a][b] = 4 pi sum_j w_j B(v_a, v_b, e_j) (psi(v') + psi(w') - psi(v) - psi(w))
            let mut g = vec![0.0; nodes.len() * nodes.len()];
            for (a, na) in nodes.iter().enumerate() {
                for (b, nb) in nodes.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    let (v, w) = (na.point, nb.point);
                    let mut sum = 0.0;
                    for (e, &wj) in scatter.points().iter().zip(scatter.weights()) {
                        let (vp, wp) = post_collision(&v, &w, e);
                        let bracket = test_eval(&ti, &vp) + test_eval(&ti, &wp) - test_eval(&ti, &v) - test_eval(&ti, &w);
                        sum += wj * kernel_eval(kernel, &v, &w, e)? * bracket;
                    }
                    g[a * nodes.len() + b] = 4.0 * PI * sum;
                }
            }
            cache[i] = Some(g);
        }
        let g = cache[i].as_ref().expect("filled above");
        let (bk, bl) = (disc.multi(k)?, disc.multi(l)?);
        let wk: Vec<f64> = nodes.iter().map(|nd| nd.weight * basis_eval(&bk, &nd.point)).collect();
        let wl: Vec<f64> = nodes.iter().map(|nd| nd.weight * basis_eval(&bl, &nd.point)).collect();
        // Neumaier summation keeps the oracle's own rounding well below the tolerance
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for (a, &xa) in wk.iter().enumerate() {
            for (b, &yb) in wl.iter().enumerate() {
                let term = 0.5 * xa * yb * g[a * nodes.len() + b];
                let t = s + term;
                c += if s.abs() >= term.abs() { (s - t) + term } else { (term - t) + s };
                s = t;
            }
        }
        out.push(s + c);
    }
    Ok(out)
}

// criteria

/// Quadrature used for the Maxwell fixed-point check; the default `(8, 50)`
/// rule leaves a residual near `2e-5`.
pub const MAXWELL_FIXED_POINT_RULE: (usize, usize) = (16, 50);
/// Quadrature used for the hard-sphere fixed-point check.
pub const HARD_SPHERE_FIXED_POINT_RULE: (usize, usize) = (16, 110);

pub const DSMC_PARTICLES: usize = 4096;
/// Trajectories for the hard-sphere comparison. The standard error of `s`
/// with 256 trajectories is about `2.6e-2`, above the `2e-2` tolerance.
pub const DSMC_HS_TRAJECTORIES: usize = 8192;
pub const DSMC_MAXWELL_TRAJECTORIES: usize = 256;
pub const DSMC_SEED: u64 = 20_240_917;

/// Table 1: projection errors of the mixture.
pub fn check_projection(ops: &Operators) -> Result<Check> {
    let init = MixtureInit::standard();
    let mut p = Parts::new();
    let mut errs = Vec::new();
    for (k, n_gl, n_l, target) in [(2, 8, 38, 5.07e-2), (4, 8, 50, 3.45e-3)] {
        let op = ops.get(k, k, n_gl, n_l, KernelSpec::maxwell())?;
        let e = projection_error(&op, |v| init.density(v))?;
        p.add(within(e, target, 0.10), format!("n={} L2 {e:.4e} (ref {target:.2e})", op.n()));
        errs.push(e);
    }
    let cf = errs[0] / errs[1];
    p.add(within(cf, 14.7, 0.20), format!("CF {cf:.2} (ref 14.7)"));
    Ok(p.finish("1 mixture projection"))
}

/// Table 5: BKW projection errors.
pub fn check_bkw(ops: &Operators) -> Result<Check> {
    let targets = [9.77e-5, 2.00e-5, 2.95e-6, 2.66e-7];
    let mut p = Parts::new();
    for (row, target) in bkw_table(ops, 11..=14)?.iter().zip(targets) {
        p.add(within(row.l2, target, 0.15), format!("K={} L2 {:.3e} (ref {target:.2e})", row.k, row.l2));
    }
    Ok(p.finish("2 BKW projection"))
}

/// Conservation along trajectories and vanishing invariant matrices.
pub fn check_conservation(ops: &Operators) -> Result<Check> {
    let init = MixtureInit::standard();
    let mut p = Parts::new();
    for kernel in [KernelSpec::maxwell(), KernelSpec::hard_spheres()] {
        let op = ops.get(4, 4, 8, 50, kernel)?;
        let inv = op.invariant_max_abs();
        p.add(inv <= 1e-12, format!("{} invariant |Q| {inv:.1e}", kernel.family()));
        let st0 = project_mixture(&op, &init)?;
        for scheme in [Scheme::Euler, Scheme::Rk2, Scheme::Rk4] {
            let run = run_summary(&op, &st0, TimeGrid::to_final(16.0, 128)?, scheme)?;
            let (d, m) = (run.moment_drift(), run.invariant_drift);
            p.add(
                d <= 1e-10 && m <= 1e-11,
                format!("{} {scheme} drift {d:.1e}, Mf {m:.1e}", kernel.family()),
            );
        }
    }
    Ok(p.finish("3 conservation"))
}

/// Time-integration orders and table cells.
pub fn check_time_orders(ops: &Operators) -> Result<Check> {
    let mut p = Parts::new();
    let small = ops.get(2, 2, 8, 38, KernelSpec::maxwell())?;
    let e = mixture_errors(&small, Scheme::Euler, 256, 16.0)?.m11;
    p.add(within(e, 3.37e-3, 0.15), format!("Euler n=27 N_t=256 {e:.3e} (ref 3.37e-3)"));

    let mid = ops.get(4, 4, 8, 50, KernelSpec::maxwell())?;
    let cells = |scheme, rows: &[(usize, f64)], cf: (f64, f64), p: &mut Parts| -> Result<()> {
        let mut prev: Option<f64> = None;
        for &(nt, target) in rows {
            let e = mixture_errors(&mid, scheme, nt, 16.0)?.m11;
            p.add(within(e, target, 0.25), format!("{scheme} n=125 N_t={nt} {e:.3e} (ref {target:.2e})"));
            if let Some(pe) = prev {
                let r = pe / e;
                p.add((r - cf.0).abs() <= cf.1, format!("CF {r:.2}"));
            }
            prev = Some(e);
        }
        Ok(())
    };
    cells(
        Scheme::Euler,
        &[(256, 3.17e-3), (512, 1.58e-3), (1024, 7.89e-4)],
        (2.0, 0.3),
        &mut p,
    )?;
    cells(
        Scheme::Rk2,
        &[(64, 5.72e-4), (128, 1.34e-4), (256, 3.11e-5)],
        (4.0, 0.8),
        &mut p,
    )?;
    let e = mixture_errors(&mid, Scheme::Rk2, 512, 16.0)?.m11;
    p.add(within(e, 6.03e-6, 0.25), format!("rk2 n=125 N_t=512 {e:.3e} (ref 6.03e-6)"));
    drop(mid);

    let big = ops.get(6, 6, 16, 110, KernelSpec::maxwell())?;
    let e128 = mixture_errors(&big, Scheme::Rk4, 128, 16.0)?.m11;
    let e256 = mixture_errors(&big, Scheme::Rk4, 256, 16.0)?.m11;
    p.add(within(e128, 2.68e-8, 0.25), format!("rk4 n=343 N_t=128 {e128:.3e} (ref 2.68e-8)"));
    p.add(within(e256, 1.58e-9, 0.25), format!("rk4 n=343 N_t=256 {e256:.3e} (ref 1.58e-9)"));
    let cf = e128 / e256;
    p.add((cf - 16.0).abs() <= 4.0, format!("CF {cf:.1}"));
    Ok(p.finish("4 time-integrator orders"))
}

/// H-functional monotonicity and limit.
pub fn check_h_functional(ops: &Operators) -> Result<Check> {
    let op = ops.get(4, 4, 8, 50, KernelSpec::maxwell())?;
    let init = MixtureInit::standard();
    let st0 = project_mixture(&op, &init)?;
    let run = run_summary(&op, &st0, TimeGrid::to_final(16.0, 128)?, Scheme::Rk4)?;
    let max_rise = run.h.windows(2).skip(1).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let h_end = *run.h.last().expect("non-empty");
    let mut p = Parts::new();
    p.add(max_rise <= 1e-6, format!("max step increase {max_rise:.2e}"));
    p.add(
        (h_end - (-4.25681)).abs() <= 1e-3,
        format!("H(16) {h_end:.6} (ref -4.25681, exact {:.6})", h_equilibrium()),
    );
    Ok(p.finish("5 H-functional"))
}

/// `max |M^{-1} q(f_M)|` for the projected standard Maxwellian.
pub fn fixed_point_residual(op: &CollisionOperator) -> Result<f64> {
    let st = project_initial(|v| maxwellian(1.0, &crate::Velocity::zeros(), 1.0, v), op, &op.rule()?)?;
    Ok(collision_rhs(op, &st)?.iter().fold(0.0, |a, b| a.max(b.abs())))
}

pub fn check_fixed_point(ops: &Operators) -> Result<Check> {
    let mut p = Parts::new();
    for (kernel, (n_gl, n_l)) in [
        (KernelSpec::maxwell(), MAXWELL_FIXED_POINT_RULE),
        (KernelSpec::hard_spheres(), HARD_SPHERE_FIXED_POINT_RULE),
    ] {
        let op = ops.get(4, 4, n_gl, n_l, kernel)?;
        let r = fixed_point_residual(&op)?;
        p.add(r <= 1e-9, format!("{} ({n_gl},{n_l}) max|rhs| {r:.2e}", kernel.family()));
    }
    Ok(p.finish("6 equilibrium fixed point"))
}

pub fn check_brute_force(ops: &Operators) -> Result<Check> {
    let mut p = Parts::new();
    let mut rng = ChaCha8Rng::seed_from_u64(DSMC_SEED);
    for kernel in [KernelSpec::maxwell(), KernelSpec::hard_spheres()] {
        let op = ops.get(2, 2, 8, 38, kernel)?;
        let n = op.n();
        let entries: Vec<(usize, usize, usize)> = (0..20)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        let direct = brute_force_entries(&op.disc, &kernel, &op.rule()?, &entries)?;
        let worst = entries
            .iter()
            .zip(&direct)
            .map(|(&(i, k, l), d)| (op.q.get(i, k, l) - d).abs())
            .fold(0.0, f64::max);
        let scale = op.q.raw().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let worst_rel = worst / scale;
        p.add(
            worst <= 1e-12,
            format!(
                "{} 20 entries max |diff| {worst:.1e} ({worst_rel:.1e} of max |Q|)",
                kernel.family()
            ),
        );
    }
    Ok(p.finish("7 brute-force assembly oracle"))
}

/// Spectral moments on a grid next to a DSMC series.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub spectral: RunSummary,
    pub dsmc: DsmcSeries,
    pub max_m11: f64,
    pub max_s: f64,
}

pub fn hard_sphere_comparison(ops: &Operators, n_traj: usize) -> Result<Comparison> {
    let init = MixtureInit::standard();
    let kernel = KernelSpec::hard_spheres();
    let op = ops.get(4, 4, 8, 50, kernel)?;
    let grid = TimeGrid::to_final(4.0, 128)?;
    let spectral = run_summary(&op, &project_mixture(&op, &init)?, grid, Scheme::Rk4)?;
    let dsmc = dsmc_run(kernel, &init, DSMC_PARTICLES, n_traj, grid, DSMC_SEED)?;
    let (mut max_m11, mut max_s) = (0.0f64, 0.0f64);
    for (m, d) in spectral.moments.iter().zip(&dsmc.samples) {
        max_m11 = max_m11.max((m.m[(0, 0)] - d.mean.m[(0, 0)]).abs());
        max_s = max_s.max((m.s - d.mean.s).abs());
    }
    Ok(Comparison {
        spectral,
        dsmc,
        max_m11,
        max_s,
    })
}

pub fn check_hard_spheres(ops: &Operators) -> Result<Check> {
    let start = Instant::now();
    let c = hard_sphere_comparison(ops, DSMC_HS_TRAJECTORIES)?;
    let se_s = c.dsmc.samples.iter().map(|s| s.s_se).fold(0.0, f64::max);
    let se_m = c.dsmc.samples.iter().map(|s| s.m11_se).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let mut p = Parts::new();
    p.add(c.max_m11 <= 5e-3, format!("max |dM11| {:.2e} (SE {se_m:.1e})", c.max_m11));
    p.add(c.max_s <= 2e-2, format!("max |ds| {:.2e} (SE {se_s:.1e})", c.max_s));
    p.add(
        secs <= 900.0,
        format!("{} x {} particles, {secs:.0} s", c.dsmc.n_traj, c.dsmc.n_particles),
    );
    Ok(p.finish("8 hard spheres vs DSMC"))
}

pub fn check_dsmc_maxwell() -> Result<Check> {
    let init = MixtureInit::standard();
    let grid = TimeGrid::to_final(4.0, 32)?;
    let series = dsmc_run(
        KernelSpec::maxwell(),
        &init,
        DSMC_PARTICLES,
        DSMC_MAXWELL_TRAJECTORIES,
        grid,
        DSMC_SEED,
    )?;
    let worst = series
        .samples
        .iter()
        .skip(1)
        .map(|s| (s.mean.m[(0, 0)] - exact_maxwell_moments(s.t, &init).m[(0, 0)]).abs() / s.m11_se)
        .fold(0.0, f64::max);
    Ok(Check::new(
        "9 DSMC Maxwell self-validation",
        worst <= 3.0,
        format!(
            "max |dM11|/SE {worst:.2} over {} samples ({} x {})",
            series.samples.len() - 1,
            series.n_traj,
            series.n_particles
        ),
    ))
}

/// Assembly time, thread scaling and cache round trip.
pub fn check_performance(cache_dir: &std::path::Path) -> Result<Check> {
    let disc = Discretization::new(4, 4)?;
    let op = CollisionOperator::build(disc, KernelSpec::maxwell(), 8, 50)?;
    let secs = op.meta.assembly_seconds;
    let mut p = Parts::new();
    p.add(secs <= 1800.0, format!("n=125 assembly {secs:.2} s"));

    std::fs::create_dir_all(cache_dir)?;
    let path = cache_dir.join("roundtrip.gpbe");
    cache_write(&op, &path, true)?;
    let back = cache_read(&path, Some(&CacheKey::of(&op)))?;
    let same = back.mass.iter().zip(&op.mass).all(|(a, b)| a.to_bits() == b.to_bits())
        && back.q.raw().iter().zip(op.q.raw()).all(|(a, b)| a.to_bits() == b.to_bits());
    p.add(same, "cache round trip bitwise".into());
    std::fs::remove_file(&path)?;

    let threads = rayon::current_num_threads();
    let mut check = p.finish("10 performance envelope");
    if threads >= 2 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Domain(e.to_string()))?;
        let serial = pool.install(|| CollisionOperator::build(disc, KernelSpec::maxwell(), 8, 50))?;
        let speedup = serial.meta.assembly_seconds / secs;
        let ok = speedup >= 0.75 * threads.min(8) as f64;
        check.passed = check.passed.map(|b| b && ok);
        check.detail.push_str(&format!("; speedup {speedup:.2} on {threads} threads{}", if ok { "" } else { " [x]" }));
    } else {
        check.passed = check.passed.and_then(|b| if b { None } else { Some(false) });
        check.detail.push_str("; speedup not measurable on 1 thread");
    }
    Ok(check)
}

/// Named groups of checks.
pub const SUITES: &[&str] = &["mixture", "bkw", "hardspheres", "all"];

/// Runs one suite, calling `report` after each check.
pub fn run_suite(name: &str, ops: &Operators, scratch: &std::path::Path, mut report: impl FnMut(&Check)) -> Result<Vec<Check>> {
    type Job<'a> = Box<dyn Fn() -> Result<Check> + 'a>;
    let jobs: Vec<Job> = match name {
        "mixture" => vec![
            Box::new(|| check_projection(ops)),
            Box::new(|| check_time_orders(ops)),
            Box::new(|| check_h_functional(ops)),
        ],
        "bkw" => vec![Box::new(|| check_bkw(ops))],
        "hardspheres" => vec![Box::new(|| check_hard_spheres(ops))],
        "all" => vec![
            Box::new(|| check_projection(ops)),
            Box::new(|| check_bkw(ops)),
            Box::new(|| check_conservation(ops)),
            Box::new(|| check_time_orders(ops)),
            Box::new(|| check_h_functional(ops)),
            Box::new(|| check_fixed_point(ops)),
            Box::new(|| check_brute_force(ops)),
            Box::new(|| check_hard_spheres(ops)),
            Box::new(check_dsmc_maxwell),
            Box::new(|| check_performance(scratch)),
        ],
        other => return Err(Error::config("suite", format!("unknown suite {other:?}; known: {SUITES:?}"))),
    };
    let mut out = Vec::with_capacity(jobs.len());
    for job in jobs {
        let c = job()?;
        report(&c);
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_matches_assembler_on_tiny_case() {
        let disc = Discretization::new(1, 1).unwrap();
        let kernel = KernelSpec::hard_spheres();
        let op = CollisionOperator::build(disc, kernel, 4, 14).unwrap();
        let entries = [(0, 1, 2), (3, 3, 0), (5, 7, 7), (7, 2, 6)];
        let direct = brute_force_entries(&disc, &kernel, &op.rule().unwrap(), &entries).unwrap();
        for (&(i, k, l), d) in entries.iter().zip(direct) {
            let q = op.q.get(i, k, l);
            // entries reach ~1e2 here, so compare at a few ulp of the entry
            assert!((q - d).abs() <= 1e-14 * q.abs().max(1.0), "({i},{k},{l}) {q} vs {d}");
        }
    }

    #[test]
    fn check_formatting() {
        let c = Check::new("x", false, "detail".into());
        assert_eq!(c.to_string(), "FAIL x: detail");
        assert!(c.failed());
        let u = Check {
            passed: None,
            ..c
        };
        assert_eq!(u.status(), "UNVERIFIED");
        assert!(!u.failed());
        assert!(run_suite("nope", &Operators::default(), std::path::Path::new("."), |_| {}).is_err());
    }

    #[test]
    fn projection_error_vanishes_for_representable_function() {
        let op = CollisionOperator::build(Discretization::new(2, 2).unwrap(), KernelSpec::maxwell(), 16, 38).unwrap();
        let e = projection_error(&op, |v| maxwellian(1.0, &crate::Velocity::zeros(), 1.0, v)).unwrap();
        assert!(e < 1e-12, "{e}");
    }
}
