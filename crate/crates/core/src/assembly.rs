//! Mass matrix and collision matrices of the Galerkin-Petrov system
//! `d/dt (M f)_i = f^T Q_i f`.
//!
//! With composed quadrature nodes `a = (i_v, j_v)`, the collision matrices are
//!
//! ```text
//! Q_i[k, l] = sum_{a, b} A[a, k] A[b, l] P_Q[a, b, i]
//! A[a, k]   = 2 pi P_GL[k_k, l_k, i_v] P_L[l_k, m_k, j_v]
//! P_Q[a,b,i] = 1/2 * 4 pi sum_j w_j B(v_a, w_b, e_j) (psi_i(v') + psi_i(w') - psi_i(v_a) - psi_i(w_b))
//! ```
//!
//! `P_Q` is never stored in full. Rows `a` are processed in slabs; for each `a`
//! the row block `P_Q[a, b > a, :]` is contracted against `A` with one dense
//! matrix product, and the slab is folded into the result with a second
//! product. The pair symmetry `P_Q[a,b,:] = P_Q[b,a,:]` is used so only `b > a`
//! is evaluated, and `Q_i = U_i + U_i^T` at the end.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::{mu_norm, Discretization, FunctionTable};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::quadrature::{QuadratureRuleR3, RadialRule, SphereRule};
use crate::specfun::{laguerre_table, lm_index, SolidHarmonics};
use crate::Velocity;

/// Dense row-major `n x n` mass matrix `M[i, j] = <phi_j, psi_i>`.
///
/// Only entries with equal `(l, m)` are nonzero; the `(K+1)^2` values of each
/// `l` block are computed once and copied to every `m`.
pub fn assemble_mass(disc: &Discretization, radial: &RadialRule) -> Vec<f64> {
    let n = disc.n();
    let kk = disc.k_max() + 1;
    let mut mass = vec![0.0; n * n];
    let mut lag = vec![0.0; kk];
    for l in 0..=disc.l_max() {
        let alpha = l as f64 + 0.5;
        let mut block = vec![0.0; kk * kk];
        for (&x, &w) in radial.nodes().iter().zip(radial.weights()) {
            laguerre_table(alpha, x, &mut lag);
            let common = 0.5 * w * x.powi(l as i32) * (0.5 * x).exp();
            for ki in 0..kk {
                for kj in 0..kk {
                    block[ki * kk + kj] += common * lag[kj] * lag[ki];
                }
            }
        }
        for ki in 0..kk {
            for kj in 0..kk {
                block[ki * kk + kj] *= mu_norm(kj, l).expect("validated");
            }
        }
        for m in -(l as i64)..=(l as i64) {
            let base = lm_index(l, m) * kk;
            for ki in 0..kk {
                for kj in 0..kk {
                    mass[(base + ki) * n + base + kj] = block[ki * kk + kj];
                }
            }
        }
    }
    mass
}

/// LU factors of the `l` blocks of the mass matrix.
#[derive(Clone, Debug)]
pub struct MassSolver {
    disc: Discretization,
    blocks: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl MassSolver {
    pub fn new(disc: &Discretization, mass: &[f64]) -> Result<Self> {
        let n = disc.n();
        if mass.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: mass.len(),
            });
        }
        let kk = disc.k_max() + 1;
        let mut blocks = Vec::with_capacity(disc.l_max() + 1);
        for l in 0..=disc.l_max() {
            let base = lm_index(l, 0) * kk;
            let block = DMatrix::from_fn(kk, kk, |r, c| mass[(base + r) * n + base + c]);
            let lu = block.lu();
            if !lu.is_invertible() {
                return Err(Error::SingularMass { l });
            }
            blocks.push(lu);
        }
        Ok(Self { disc: *disc, blocks })
    }

    /// Solves `M x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.disc.n();
        if rhs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: rhs.len(),
            });
        }
        let kk = self.disc.k_max() + 1;
        let mut out = vec![0.0; n];
        for l in 0..=self.disc.l_max() {
            for m in -(l as i64)..=(l as i64) {
                let base = lm_index(l, m) * kk;
                let b = nalgebra::DVector::from_column_slice(&rhs[base..base + kk]);
                let x = self.blocks[l].solve(&b).ok_or(Error::SingularMass { l })?;
                out[base..base + kk].copy_from_slice(x.as_slice());
            }
        }
        Ok(out)
    }
}

/// The `n` collision matrices, stored `i`-major with each `Q_i` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionMatrices {
    n: usize,
    data: Vec<f64>,
}

impl CollisionMatrices {
    pub fn from_raw(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n * n {
            return Err(Error::Dimension {
                expected: n * n * n,
                actual: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize, l: usize) -> f64 {
        self.data[(i * self.n + k) * self.n + l]
    }

    /// Row-major `Q_i`.
    pub fn matrix(&self, i: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.data[i * nn..(i + 1) * nn]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self, i: usize) -> f64 {
        self.matrix(i).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `q_i = f^T Q_i f` for all `i`.
    pub fn quadratic_forms(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let q = self.matrix(i);
                let mut total = 0.0;
                for (k, row) in q.chunks_exact(n).enumerate() {
                    let fk = f[k];
                    if fk == 0.0 {
                        continue;
                    }
                    let dot: f64 = row.iter().zip(f).map(|(a, b)| a * b).sum();
                    total += fk * dot;
                }
                total
            })
            .collect()
    }
}

/// Counters reported by [`assemble_collision`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssemblyStats {
    pub node_pairs: usize,
    pub skipped_pairs: usize,
    pub seconds: f64,
}

/// Array sizes of the factorized scheme in 64-bit words:
/// `(P_GL, P_L, P_Q) = ((K+1)(L+1) N_GL, (L+1)^2 N_L, n N_GL^2 N_L^2)`.
pub fn memory_words(disc: &Discretization, n_gl: usize, n_l: usize) -> (usize, usize, usize) {
    let lp = disc.l_max() + 1;
    (
        (disc.k_max() + 1) * lp * n_gl,
        lp * lp * n_l,
        disc.n() * n_gl * n_gl * n_l * n_l,
    )
}

/// `P_GL[(l, k), i] = w_i x_i^{l/2} e^{x_i/2} mu_{k,l} L_k^{(l+1/2)}(x_i)`, indexed `(l * (K+1) + k) * N_GL + i`.
pub fn radial_factors(disc: &Discretization, radial: &RadialRule) -> Vec<f64> {
    let kk = disc.k_max() + 1;
    let ngl = radial.len();
    let mut out = vec![0.0; kk * (disc.l_max() + 1) * ngl];
    let mut lag = vec![0.0; kk];
    for l in 0..=disc.l_max() {
        for (i, (&x, &w)) in radial.nodes().iter().zip(radial.weights()).enumerate() {
            laguerre_table(l as f64 + 0.5, x, &mut lag);
            let common = w * x.powf(l as f64 / 2.0) * (0.5 * x).exp();
            for k in 0..kk {
                out[(l * kk + k) * ngl + i] = common * mu_norm(k, l).expect("validated") * lag[k];
            }
        }
    }
    out
}

/// `P_L[(l, m), j] = w_j Y_{l,m}(e_j)`, indexed `lm_index(l, m) * N_L + j`.
pub fn angular_factors(l_max: usize, sphere: &SphereRule) -> Vec<f64> {
    let sh = SolidHarmonics::new(l_max);
    let nl = sphere.len();
    let mut out = vec![0.0; sh.len() * nl];
    let mut buf = vec![0.0; sh.len()];
    for (j, (e, &w)) in sphere.points().iter().zip(sphere.weights()).enumerate() {
        sh.eval(e, &mut buf);
        for (lm, y) in buf.iter().enumerate() {
            out[lm * nl + j] = w * y;
        }
    }
    out
}

/// Weighted basis values `A[a, k] = 2 pi P_GL P_L`, row-major `N_GL N_L x n`.
pub fn weighted_basis(disc: &Discretization, rule: &QuadratureRuleR3) -> Vec<f64> {
    let pgl = radial_factors(disc, &rule.radial);
    let pl = angular_factors(disc.l_max(), &rule.sphere);
    let (ngl, nl, n, kk) = (rule.n_gl(), rule.n_l(), disc.n(), disc.k_max() + 1);
    let mut a = vec![0.0; ngl * nl * n];
    for iv in 0..ngl {
        for jv in 0..nl {
            let row = &mut a[(iv * nl + jv) * n..(iv * nl + jv + 1) * n];
            for l in 0..=disc.l_max() {
                for m in -(l as i64)..=(l as i64) {
                    let lm = lm_index(l, m);
                    let y = pl[lm * nl + jv];
                    for k in 0..kk {
                        row[lm * kk + k] = 2.0 * PI * pgl[(l * kk + k) * ngl + iv] * y;
                    }
                }
            }
        }
    }
    a
}

/// Evaluates the pair factor `P_Q` for fixed node arrays.
struct PairKernel<'a> {
    kernel: &'a KernelSpec,
    scatter: &'a SphereRule,
    points: &'a [Velocity],
    psi_nodes: &'a [f64],
    n: usize,
    symmetric_gain: bool,
}

impl PairKernel<'_> {
    /// Writes `P_Q[a, b, i]` to `out[(b - a - 1) * n + i]` for all `b > a`.
    /// Returns the number of coincident pairs that were zeroed.
    fn row(&self, table: &mut FunctionTable, a: usize, out: &mut [f64], gain: &mut [f64]) -> Result<usize> {
        let n = self.n;
        let v = self.points[a];
        let psi_a = &self.psi_nodes[a * n..(a + 1) * n];
        let mut skipped = 0;
        for (offset, dst) in out.chunks_exact_mut(n).enumerate() {
            let b = a + 1 + offset;
            let w = self.points[b];
            let u = v - w;
            let speed = u.norm();
            if speed == 0.0 {
                dst.iter_mut().for_each(|x| *x = 0.0);
                skipped += 1;
                continue;
            }
            let center = (v + w) * 0.5;
            let half = 0.5 * speed;
            gain.iter_mut().for_each(|x| *x = 0.0);
            let mut btot = 0.0;
            for (e, &wj) in self.scatter.points().iter().zip(self.scatter.weights()) {
                let bj = wj * self.kernel.angular(u.dot(e) / speed);
                btot += bj;
                if self.symmetric_gain {
                    table.accumulate_tests(&(center + e * half), 2.0 * bj, gain);
                } else {
                    table.accumulate_tests(&(center + e * half), bj, gain);
                    table.accumulate_tests(&(center - e * half), bj, gain);
                }
            }
            let factor = 0.5 * 4.0 * PI * self.kernel.speed_factor(speed);
            let psi_b = &self.psi_nodes[b * n..(b + 1) * n];
            for i in 0..n {
                let val = factor * (gain[i] - btot * (psi_a[i] + psi_b[i]));
                if !val.is_finite() {
                    return Err(Error::NonFiniteCollision {
                        index: i,
                        v_node: a,
                        w_node: b,
                    });
                }
                dst[i] = val;
            }
        }
        Ok(skipped)
    }
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (isize, isize),
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: callers pass slices whose extents cover every strided index
    // `(m-1)*rs + (k-1)*cs` of the respective operand.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

/// Neumaier-compensated `sum += term`.
#[inline]
fn compensated_add(sum: &mut f64, comp: &mut f64, term: f64) {
    let t = *sum + term;
    if sum.abs() >= term.abs() {
        *comp += (*sum - t) + term;
    } else {
        *comp += (term - t) + *sum;
    }
    *sum = t;
}

/// Number of `a` rows processed per slab.
pub const SLAB_ROWS: usize = 32;

/// Assembles all collision matrices `Q_i`.
///
/// The result is deterministic for fixed rules: every row block is computed
/// independently, and slabs are folded in a fixed order with compensated
/// summation.
pub fn assemble_collision(
    disc: &Discretization,
    kernel: &KernelSpec,
    rule: &QuadratureRuleR3,
    scatter: &SphereRule,
) -> Result<(CollisionMatrices, AssemblyStats)> {
    let start = Instant::now();
    let n = disc.n();
    let nodes = rule.nodes();
    let nv = nodes.len();
    let points: Vec<Velocity> = nodes.iter().map(|nd| nd.point).collect();
    let a_mat = weighted_basis(disc, rule);

    let mut psi_nodes = vec![0.0; nv * n];
    {
        let mut table = FunctionTable::new(*disc);
        for (p, row) in points.iter().zip(psi_nodes.chunks_exact_mut(n)) {
            table.tests(p, row);
        }
    }

    let pair = PairKernel {
        kernel,
        scatter,
        points: &points,
        psi_nodes: &psi_nodes,
        n,
        symmetric_gain: scatter.is_centrally_symmetric(),
    };

    let nn = n * n;
    // U stored as [k][i][l] so that each slab folds in with one product.
    let mut acc = vec![0.0; n * nn];
    let mut comp = vec![0.0; n * nn];
    let mut slab_out = vec![0.0; n * nn];
    let mut stats = AssemblyStats::default();

    for slab_start in (0..nv).step_by(SLAB_ROWS) {
        let slab_end = (slab_start + SLAB_ROWS).min(nv);
        let rows = slab_end - slab_start;
        let mut r_slab = vec![0.0; rows * nn];
        let results: Vec<Result<usize>> = r_slab
            .par_chunks_mut(nn)
            .enumerate()
            .map_init(
                || (FunctionTable::new(*disc), vec![0.0; n], Vec::<f64>::new()),
                |(table, gain, pq), (r, r_a)| {
                    let a = slab_start + r;
                    let nb = nv - a - 1;
                    if nb == 0 {
                        r_a.iter_mut().for_each(|x| *x = 0.0);
                        return Ok(0);
                    }
                    pq.resize(nb * n, 0.0);
                    let skipped = pair.row(table, a, pq, gain)?;
                    // R_a[i][l] = sum_{b > a} P_Q[a, b, i] A[b, l]
                    gemm(
                        n,
                        nb,
                        n,
                        pq,
                        (1, n as isize),
                        &a_mat[(a + 1) * n..],
                        (n as isize, 1),
                        0.0,
                        r_a,
                        (n as isize, 1),
                    );
                    Ok(skipped)
                },
            )
            .collect();
        for r in results {
            stats.skipped_pairs += r?;
        }
        stats.node_pairs += (slab_start..slab_end).map(|a| nv - a - 1).sum::<usize>();

        // slab_out[k][(i, l)] = sum_a A[a, k] R_a[i][l]
        gemm(
            n,
            rows,
            nn,
            &a_mat[slab_start * n..],
            (1, n as isize),
            &r_slab,
            (nn as isize, 1),
            0.0,
            &mut slab_out,
            (nn as isize, 1),
        );
        acc.par_chunks_mut(nn)
            .zip(comp.par_chunks_mut(nn))
            .zip(slab_out.par_chunks(nn))
            .for_each(|((s, c), t)| {
                for ((s, c), &t) in s.iter_mut().zip(c.iter_mut()).zip(t) {
                    compensated_add(s, c, t);
                }
            });
    }

    // Q_i[k][l] = U[k][i][l] + U[l][i][k]
    let mut q = slab_out;
    q.par_chunks_mut(nn).enumerate().for_each(|(i, qi)| {
        for k in 0..n {
            for l in 0..n {
                let ukl = acc[k * nn + i * n + l] + comp[k * nn + i * n + l];
                let ulk = acc[l * nn + i * n + k] + comp[l * nn + i * n + k];
                qi[k * n + l] = ukl + ulk;
            }
        }
    });
    stats.seconds = start.elapsed().as_secs_f64();
    Ok((CollisionMatrices { n, data: q }, stats))
}

/// Metadata stored alongside an operator.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildMetadata {
    pub format_version: u32,
    pub created_unix: u64,
    pub assembly_seconds: f64,
    pub checksum: u64,
}

/// Mass matrix, collision matrices and the parameters that produced them.
#[derive(Clone, Debug)]
pub struct CollisionOperator {
    pub disc: Discretization,
    pub kernel: KernelSpec,
    pub n_gl: usize,
    pub n_l: usize,
    pub mass: Vec<f64>,
    pub q: CollisionMatrices,
    pub meta: BuildMetadata,
    solver: MassSolver,
}

impl CollisionOperator {
    /// Assembles `M` and all `Q_i` with `n_gl` radial nodes and the `n_l`-point
    /// Lebedev rule, which also serves as the scattering rule.
    pub fn build(disc: Discretization, kernel: KernelSpec, n_gl: usize, n_l: usize) -> Result<Self> {
        let rule = QuadratureRuleR3::build(n_gl, n_l)?;
        let mass = assemble_mass(&disc, &rule.radial);
        let (q, stats) = assemble_collision(&disc, &kernel, &rule, &rule.sphere)?;
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = BuildMetadata {
            format_version: crate::cache::FORMAT_VERSION,
            created_unix,
            assembly_seconds: stats.seconds,
            checksum: crate::cache::payload_checksum(&mass, q.raw()),
        };
        Self::from_parts(disc, kernel, n_gl, n_l, mass, q, meta)
    }

    pub fn from_parts(
        disc: Discretization,
        kernel: KernelSpec,
        n_gl: usize,
        n_l: usize,
        mass: Vec<f64>,
        q: CollisionMatrices,
        meta: BuildMetadata,
    ) -> Result<Self> {
        if q.n() != disc.n() {
            return Err(Error::Dimension {
                expected: disc.n(),
                actual: q.n(),
            });
        }
        let solver = MassSolver::new(&disc, &mass)?;
        Ok(Self {
            disc,
            kernel,
            n_gl,
            n_l,
            mass,
            q,
            meta,
            solver,
        })
    }

    pub fn n(&self) -> usize {
        self.disc.n()
    }

    /// The composed rule the operator was assembled with.
    pub fn rule(&self) -> Result<QuadratureRuleR3> {
        QuadratureRuleR3::build(self.n_gl, self.n_l)
    }

    pub fn solver(&self) -> &MassSolver {
        &self.solver
    }

    /// `M f`.
    pub fn mass_apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        self.mass
            .chunks_exact(n)
            .map(|row| row.iter().zip(f).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest entry magnitude over the collision matrices of the five invariants.
    pub fn invariant_max_abs(&self) -> f64 {
        self.disc
            .invariant_indices()
            .into_iter()
            .map(|i| self.q.max_abs(i))
            .fold(0.0, f64::max)
    }
}
