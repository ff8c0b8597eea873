//! Implicit-Euler solver for the initial-boundary value problem with the
//! nonlocal operator resolved by whole-trajectory Picard iteration, plus the
//! homogenization, time-reversal and lateral-trace helpers.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, Axis};

use crate::error::{shape_err, LabError, Result};
use crate::linalg::BandedLu;
use crate::mesh::{
    check_trajectory, conormal_at, l2_sq, DiscreteOperator, EllipticCoefficients, Mesh, SpaceField,
    SpaceTimeField, TimeGrid,
};
use crate::nonlocal::{schur_bound, Kernel, KernelSet, NonlocalOperator};

/// Problem geometry, coefficients, kernels, source `f0` and Dirichlet
/// data `g` (sampled on the whole closed mesh).
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub mesh: Mesh,
    pub grid: TimeGrid,
    pub coeffs: EllipticCoefficients,
    pub kernels: KernelSet,
    pub f0: SpaceTimeField,
    pub g: SpaceTimeField,
}

impl ProblemData {
    pub fn new(
        mesh: Mesh,
        grid: TimeGrid,
        coeffs: EllipticCoefficients,
        kernels: KernelSet,
        f0: SpaceTimeField,
        g: SpaceTimeField,
    ) -> Result<ProblemData> {
        mesh.check_field("coefficients", coeffs.a.len())?;
        kernels.validate(&mesh, &grid)?;
        check_trajectory(&f0, &mesh, &grid)?;
        check_trajectory(&g, &mesh, &grid)?;
        Ok(ProblemData { mesh, grid, coeffs, kernels, f0, g })
    }

    /// Zero source and zero boundary data, everything else kept.
    pub fn homogeneous(&self) -> ProblemData {
        let z = Array2::zeros(self.f0.raw_dim());
        ProblemData { f0: z.clone(), g: z, ..self.clone() }
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Stop once successive trajectories differ by at most
    /// `tol · (1 + ‖u‖)` in discrete `L²(Q_T)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { tol: 1e-10, max_sweeps: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub u: SpaceTimeField,
    /// `‖u^{(m+1)} - u^{(m)}‖` in discrete `L²(Q_T)`, one entry per sweep.
    pub l2_history: Vec<f64>,
    /// Same differences in `max_n ‖·‖_{L²(Ω)}`.
    pub sup_history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ForwardSolution {
    /// Ratios of successive sweep differences in the sup-in-time norm.
    pub fn residual_ratios(&self) -> Vec<f64> {
        self.sup_history.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Implicit-Euler stepper with the system matrix `I - Δt A` on interior
/// nodes factored once.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    mesh: Mesh,
    grid: TimeGrid,
    coeffs: EllipticCoefficients,
    op: DiscreteOperator,
    calb: NonlocalOperator,
    slot: Vec<Option<usize>>,
    lu: BandedLu,
}

impl ForwardSolver {
    pub fn new(p: &ProblemData) -> Result<ForwardSolver> {
        let op = DiscreteOperator::assemble(&p.coeffs, &p.mesh)?;
        let calb = NonlocalOperator::new(p.kernels.clone(), &p.mesh, &p.grid)?;
        let mut slot = vec![None; p.mesh.nnodes()];
        for (i, &k) in p.mesh.interior().iter().enumerate() {
            slot[k] = Some(i);
        }
        let dt = p.grid.dt();
        let mut rows = Vec::with_capacity(p.mesh.interior().len());
        let mut bw = 0;
        for (i, &k) in p.mesh.interior().iter().enumerate() {
            let mut row = vec![(i, 1.0)];
            for &(j, c) in op.row(k) {
                if let Some(jj) = slot[j] {
                    bw = bw.max(i.abs_diff(jj));
                    match row.iter_mut().find(|e| e.0 == jj) {
                        Some(e) => e.1 -= dt * c,
                        None => row.push((jj, -dt * c)),
                    }
                }
            }
            rows.push(row);
        }
        let lu = BandedLu::factor(rows.len(), bw, &rows)?;
        Ok(ForwardSolver {
            mesh: p.mesh.clone(),
            grid: p.grid,
            coeffs: p.coeffs.clone(),
            op,
            calb,
            slot,
            lu,
        })
    }

    pub fn nonlocal(&self) -> &NonlocalOperator {
        &self.calb
    }
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    fn boundary_coupling(&self, k: usize, g: ArrayView1<f64>) -> f64 {
        self.op
            .row(k)
            .iter()
            .filter(|(j, _)| self.slot[*j].is_none())
            .map(|&(j, c)| c * g[j])
            .sum()
    }

    /// One pass of implicit Euler with a prescribed forcing (no Picard).
    pub fn march(
        &self,
        u0: ArrayView1<f64>,
        forcing: &SpaceTimeField,
        g: &SpaceTimeField,
    ) -> SpaceTimeField {
        let dt = self.grid.dt();
        let interior = self.mesh.interior();
        let mut u = Array2::zeros((self.grid.levels(), self.mesh.nnodes()));
        u.row_mut(0).assign(&u0);
        for &k in self.mesh.boundary() {
            u[[0, k]] = g[[0, k]];
        }
        let mut rhs = vec![0.0; interior.len()];
        for n in 1..self.grid.levels() {
            let gn = g.row(n);
            for (i, &k) in interior.iter().enumerate() {
                rhs[i] = u[[n - 1, k]] + dt * (self.boundary_coupling(k, gn) + forcing[[n, k]]);
            }
            self.lu.solve(&mut rhs);
            for (i, &k) in interior.iter().enumerate() {
                u[[n, k]] = rhs[i];
            }
            for &k in self.mesh.boundary() {
                u[[n, k]] = gn[k];
            }
        }
        u
    }

    /// Transpose of the marching map (block lower-bidiagonal system, level
    /// 0 and boundary rows identity) applied to `r`.
    pub fn march_transpose(&self, r: &SpaceTimeField) -> SpaceTimeField {
        let dt = self.grid.dt();
        let nt = self.grid.nt();
        let interior = self.mesh.interior();
        let mut p = Array2::zeros(r.raw_dim());
        let mut buf = vec![0.0; interior.len()];
        let mut next = vec![0.0; interior.len()];
        for n in (1..=nt).rev() {
            for (i, &k) in interior.iter().enumerate() {
                buf[i] = r[[n, k]] + next[i];
            }
            self.lu.solve_transpose(&mut buf);
            for (i, &k) in interior.iter().enumerate() {
                p[[n, k]] = buf[i];
            }
            // boundary unknowns couple through -Δt A_IB
            for &k in self.mesh.boundary() {
                p[[n, k]] = r[[n, k]];
            }
            for &k in interior {
                let pk = p[[n, k]];
                for &(j, c) in self.op.row(k) {
                    if self.slot[j].is_none() {
                        p[[n, j]] += dt * c * pk;
                    }
                }
            }
            next.copy_from_slice(&buf);
        }
        for k in 0..self.mesh.nnodes() {
            p[[0, k]] = r[[0, k]];
        }
        for (i, &k) in interior.iter().enumerate() {
            p[[0, k]] += next[i];
        }
        p
    }

    /// Zeroes level 0 and boundary nodes: the rows that carry `ℬ`.
    fn project_rows(&self, p: &mut SpaceTimeField) {
        p.row_mut(0).fill(0.0);
        for &k in self.mesh.boundary() {
            p.column_mut(k).fill(0.0);
        }
    }

    fn st_norm(&self, f: &SpaceTimeField) -> (f64, f64) {
        let w = self.grid.trapezoid();
        let mut l2 = 0.0;
        let mut sup = 0.0f64;
        for (n, row) in f.outer_iter().enumerate() {
            let v = l2_sq(row, &self.mesh);
            l2 += w[n] * v;
            sup = sup.max(v);
        }
        (l2.sqrt(), sup.sqrt())
    }

    /// Solves `D_t u - A u = ℬu + f0`, `u = g` on `∂Ω`, `u(0) = u0`.
    pub fn solve(
        &self,
        f0: &SpaceTimeField,
        g: &SpaceTimeField,
        u0: ArrayView1<f64>,
        opts: PicardOptions,
    ) -> Result<ForwardSolution> {
        check_trajectory(f0, &self.mesh, &self.grid)?;
        check_trajectory(g, &self.mesh, &self.grid)?;
        self.mesh.check_field("initial state", u0.len())?;
        let mut warnings = Vec::new();
        let mismatch = self
            .mesh
            .boundary()
            .iter()
            .map(|&k| (u0[k] - g[[0, k]]).abs())
            .fold(0.0f64, f64::max);
        if mismatch > 1e-12 * (1.0 + g.row(0).iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            warnings.push(format!(
                "initial state disagrees with boundary data at t = 0 (max {mismatch:e}); boundary value used"
            ));
        }
        let mut u = self.march(u0, f0, g);
        let mut l2_history = Vec::new();
        let mut sup_history = Vec::new();
        if self.calb.is_zero() {
            return Ok(ForwardSolution { u, l2_history, sup_history, warnings });
        }
        for _ in 0..opts.max_sweeps {
            let forcing = f0 + &self.calb.apply(&u)?;
            let next = self.march(u0, &forcing, g);
            let (d2, dsup) = self.st_norm(&(&next - &u));
            l2_history.push(d2);
            sup_history.push(dsup);
            if !d2.is_finite() {
                return Err(LabError::Convergence { history: l2_history });
            }
            u = next;
            let (un, _) = self.st_norm(&u);
            if d2 <= opts.tol * (1.0 + un) {
                return Ok(ForwardSolution { u, l2_history, sup_history, warnings });
            }
        }
        Err(LabError::Convergence { history: l2_history })
    }

    /// Solves the transposed space-time system `Mᵀ p = r`, where `M` is the
    /// full implicit-Euler system including `ℬ`. Returns `p` and the
    /// sweep history.
    pub fn adjoint_solve(&self, r: &SpaceTimeField, opts: PicardOptions) -> Result<(SpaceTimeField, Vec<f64>)> {
        check_trajectory(r, &self.mesh, &self.grid)?;
        let mut p = self.march_transpose(r);
        let mut history = Vec::new();
        if self.calb.is_zero() {
            return Ok((p, history));
        }
        let dt = self.grid.dt();
        for _ in 0..opts.max_sweeps {
            let mut pp = p.clone();
            self.project_rows(&mut pp);
            let rhs = r + &(self.calb.apply_transpose(&pp)? * dt);
            let next = self.march_transpose(&rhs);
            let (d2, _) = self.st_norm(&(&next - &p));
            history.push(d2);
            if !d2.is_finite() {
                return Err(LabError::Convergence { history });
            }
            p = next;
            let (pn, _) = self.st_norm(&p);
            if d2 <= opts.tol * (1.0 + pn) {
                return Ok((p, history));
            }
        }
        Err(LabError::Convergence { history })
    }

    /// A-priori bound on the Picard contraction in `max_n ‖·‖_{L²(Ω)}`:
    /// `(1 - Δt μ1)^{-nt} Σ_n Δt c_n` with `c_n` bounding `‖ℬ^n‖`.
    pub fn contraction_factor(&self, mu1: f64) -> f64 {
        let dt = self.grid.dt();
        let nt = self.grid.nt();
        let damp = 1.0 - dt * mu1;
        if damp <= 0.0 {
            return f64::INFINITY;
        }
        let ks = &self.calb.kernels;
        let sup = |f: &SpaceTimeField, n: usize| f.row(n).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bnorm: Vec<f64> = (0..self.grid.levels())
            .map(|n| match ks.k {
                Kernel::Zero => 0.0,
                Kernel::Dense(_) => schur_bound(ks, n, &self.mesh),
            })
            .collect();
        let c1: f64 = self.calb.trace_weights_t1().iter().map(|v| v.abs()).sum();
        let c2: f64 = self.calb.trace_weights_t2().iter().map(|v| v.abs()).sum();
        let w = self.calb.window_weights();
        let r1: f64 = (0..self.grid.levels()).map(|m| w[m] * sup(&ks.rho1, m)).sum();
        let r2: f64 = (0..self.grid.levels()).map(|m| w[m] * sup(&ks.rho2, m) * bnorm[m]).sum();
        let total: f64 = (1..=nt)
            .map(|n| {
                dt * (sup(&ks.f1, n) * c1
                    + sup(&ks.f2, n) * c2
                    + sup(&ks.f3, n) * r1
                    + bnorm[n]
                    + sup(&ks.f4, n) * r2)
            })
            .sum();
        damp.powi(-(nt as i32)) * total
    }

    pub fn coeffs(&self) -> &EllipticCoefficients {
        &self.coeffs
    }
}

/// Forward solve with default Picard options.
pub fn solve_ivp(p: &ProblemData, u0: ArrayView1<f64>) -> Result<ForwardSolution> {
    ForwardSolver::new(p)?.solve(&p.f0, &p.g, u0, PicardOptions::default())
}

/// Fills boundary entries of one level by quadratic extrapolation along
/// the inward normal (linear on very coarse grids).
pub fn extrapolate_boundary(f: &mut Array1<f64>, mesh: &Mesh) {
    let n = mesh.n();
    // value at node 0 of a line from nodes 1, 2, 3 of the same line
    let fill = |f: &mut Array1<f64>, line: &dyn Fn(usize) -> usize| {
        for (edge, step) in [(0usize, 1isize), (n - 1, -1)] {
            let at = |d: isize| line((edge as isize + step * d) as usize);
            f[at(0)] = if n >= 5 {
                3.0 * f[at(1)] - 3.0 * f[at(2)] + f[at(3)]
            } else if n == 4 {
                2.0 * f[at(1)] - f[at(2)]
            } else {
                f[at(1)]
            };
        }
    };
    match mesh.dim() {
        1 => fill(f, &|i| i),
        _ => {
            for j in 1..n - 1 {
                fill(f, &|i| mesh.node_index(i, j));
            }
            for i in 0..n {
                fill(f, &|j| mesh.node_index(i, j));
            }
        }
    }
}

/// `f0 = D_t u* - A u* - ℬu*` with the backward difference in time, so that
/// the implicit-Euler solve reproduces `u*` up to the Picard tolerance.
/// Boundary entries are extrapolated from the interior.
pub fn manufacture(p: &ProblemData, u_star: &SpaceTimeField) -> Result<SpaceTimeField> {
    check_trajectory(u_star, &p.mesh, &p.grid)?;
    let op = DiscreteOperator::assemble(&p.coeffs, &p.mesh)?;
    let calb = NonlocalOperator::new(p.kernels.clone(), &p.mesh, &p.grid)?;
    let bu = calb.apply(u_star)?;
    let dt = p.grid.dt();
    let mut f0 = Array2::zeros(u_star.raw_dim());
    for n in 0..p.grid.levels() {
        let dtu = if n == 0 {
            (&u_star.row(1) - &u_star.row(0)) / dt
        } else {
            (&u_star.row(n) - &u_star.row(n - 1)) / dt
        };
        let mut row = dtu - op.apply(u_star.row(n)) - bu.row(n);
        extrapolate_boundary(&mut row, &p.mesh);
        f0.row_mut(n).assign(&row);
    }
    Ok(f0)
}

/// `v = u - g` and `f̃ = f0 - D_t g + A g + ℬg` (centered `D_t g`,
/// one-sided at the ends; boundary entries of `f̃` extrapolated).
pub fn reduce_homogeneous(p: &ProblemData, u: &SpaceTimeField) -> Result<(SpaceTimeField, SpaceTimeField)> {
    check_trajectory(u, &p.mesh, &p.grid)?;
    let v = u - &p.g;
    let op = DiscreteOperator::assemble(&p.coeffs, &p.mesh)?;
    let calb = NonlocalOperator::new(p.kernels.clone(), &p.mesh, &p.grid)?;
    let bg = calb.apply(&p.g)?;
    let dtg = p.grid.derivative(&p.g);
    let mut ft = Array2::zeros(u.raw_dim());
    for n in 0..p.grid.levels() {
        let mut row = &p.f0.row(n) - &dtg.row(n) + op.apply(p.g.row(n)) + bg.row(n);
        extrapolate_boundary(&mut row, &p.mesh);
        ft.row_mut(n).assign(&row);
    }
    Ok((v, ft))
}

fn reflect(f: &SpaceTimeField, sign: f64) -> SpaceTimeField {
    let mut out = f.slice(s![..;-1, ..]).to_owned();
    if sign != 1.0 {
        out.mapv_inplace(|v| sign * v);
    }
    out
}

/// Maps the backward problem `D_t u + A u = ℬu + f0` to a forward one for
/// `w(t) = u(T - t)`: `T1 ↦ T - T2`, `T2 ↦ T - T1`, traces swap, and the
/// sign conventions below keep `ℬ̂` equal to `-ℬ` read backwards.
pub fn time_reverse(p: &ProblemData) -> ProblemData {
    let k = &p.kernels;
    let t = p.grid.horizon();
    let kernels = KernelSet {
        f1: reflect(&k.f2, -1.0),
        f2: reflect(&k.f1, -1.0),
        f3: reflect(&k.f3, 1.0),
        f4: reflect(&k.f4, -1.0),
        rho1: reflect(&k.rho1, -1.0),
        rho2: reflect(&k.rho2, -1.0),
        k: match &k.k {
            Kernel::Zero => Kernel::Zero,
            Kernel::Dense(a) => {
                let mut r: Array3<f64> = a.slice(s![..;-1, .., ..]).to_owned();
                r.mapv_inplace(|v| -v);
                Kernel::Dense(r)
            }
        },
        t1: t - k.t2,
        t2: t - k.t1,
        gamma_exp: k.gamma_exp,
        label: k.label.clone(),
    };
    ProblemData {
        mesh: p.mesh.clone(),
        grid: p.grid,
        coeffs: p.coeffs.clone(),
        kernels,
        f0: reflect(&p.f0, -1.0),
        g: reflect(&p.g, 1.0),
    }
}

/// Dirichlet trace on `∂Ω` (levels × boundary nodes) and conormal trace on
/// `Γ` (levels × `Γ` nodes).
pub fn extract_lateral_data(u: &SpaceTimeField, p: &ProblemData) -> Result<(Array2<f64>, Array2<f64>)> {
    check_trajectory(u, &p.mesh, &p.grid)?;
    let bnd = p.mesh.boundary();
    let dirichlet = u.select(Axis(1), bnd);
    let gamma = p.mesh.gamma_nodes();
    let nu = p.mesh.gamma_side().outward_normal();
    let mut neumann = Array2::zeros((p.grid.levels(), gamma.len()));
    for n in 0..p.grid.levels() {
        for (i, &k) in gamma.iter().enumerate() {
            neumann[[n, i]] = conormal_at(u.row(n), &p.coeffs, &p.mesh, k, nu);
        }
    }
    Ok((dirichlet, neumann))
}

/// Discrete `L²(Q)` distance helper used across experiments.
pub fn relative_error(a: &SpaceTimeField, b: &SpaceTimeField, mesh: &Mesh, grid: &TimeGrid, window: Option<(f64, f64)>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(shape_err("trajectory", format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    let num = crate::mesh::l2_sq_space_time(&(a - b), mesh, grid, window)?;
    let den = crate::mesh::l2_sq_space_time(b, mesh, grid, window)?;
    if den == 0.0 {
        return Ok(num.sqrt());
    }
    Ok((num / den).sqrt())
}

/// Initial state sampled from a trajectory.
pub fn initial_state(u: &SpaceTimeField) -> SpaceField {
    u.row(0).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Geometry;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn line_problem(n: usize, nt: usize) -> ProblemData {
        let mesh = Mesh::build(Geometry::Interval, n, "right").unwrap();
        let grid = TimeGrid::new(1.0, nt).unwrap();
        let coeffs = EllipticCoefficients::identity(&mesh);
        let kernels = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap();
        let z = Array2::zeros((grid.levels(), mesh.nnodes()));
        ProblemData::new(mesh, grid, coeffs, kernels, z.clone(), z).unwrap()
    }

    #[test]
    fn zero_data_zero_solution() {
        let mut p = line_problem(11, 10);
        p.kernels.k = Kernel::Dense(Array3::from_elem((11, 11, 11), 0.3));
        let sol = solve_ivp(&p, Array1::zeros(11).view()).unwrap();
        assert!(sol.u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn manufacture_reproduces_trajectory() {
        let mut p = line_problem(21, 30);
        p.kernels.k = Kernel::Dense(Array3::from_elem((31, 21, 21), 0.5));
        p.kernels.f1.fill(0.2);
        let u = p.grid.sample(&p.mesh, |t, x| (-t).exp() * (PI * x[0]).sin());
        p.f0 = manufacture(&p, &u).unwrap();
        let sol = solve_ivp(&p, u.row(0)).unwrap();
        let err = (&sol.u - &u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn manufacture_examples() {
        let p = line_problem(11, 10);
        assert!(manufacture(&p, &Array2::zeros((11, 11))).unwrap().iter().all(|v| *v == 0.0));
        let affine = p.grid.sample(&p.mesh, |_, x| x[0]);
        assert!(manufacture(&p, &affine).unwrap().iter().all(|v| v.abs() < 1e-12));

        let mut p = line_problem(101, 400);
        p.kernels.k = Kernel::Dense(Array3::from_elem((401, 101, 101), 1.0));
        let u = p.grid.sample(&p.mesh, |t, x| (-t).exp() * (PI * x[0]).sin());
        let f0 = manufacture(&p, &u).unwrap();
        for n in [100, 200, 400] {
            let t = p.grid.time(n);
            for &k in p.mesh.interior() {
                let x = p.mesh.coord(k)[0];
                let exact = (PI * PI - 1.0) * (-t).exp() * (PI * x).sin() - (-t).exp() * 2.0 / PI;
                assert!((f0[[n, k]] - exact).abs() < 5e-3, "{} vs {}", f0[[n, k]], exact);
            }
        }
    }

    #[test]
    fn reduce_homogeneous_examples() {
        let mut p = line_problem(11, 10);
        p.f0 = p.grid.sample(&p.mesh, |t, x| t + x[0]);
        let u = p.grid.sample(&p.mesh, |t, x| t * x[0] * x[0]);
        let (v, ft) = reduce_homogeneous(&p, &u).unwrap();
        assert_eq!(v, u);
        assert!((&ft - &p.f0).iter().all(|d| d.abs() < 1e-12));

        let mut p = line_problem(11, 10);
        p.g = p.grid.sample(&p.mesh, |t, x| t * x[0]);
        let (v, ft) = reduce_homogeneous(&p, &p.g.clone()).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
        for n in 0..11 {
            for k in 0..11 {
                assert_relative_eq!(ft[[n, k]], -p.mesh.coord(k)[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn time_reverse_is_involution() {
        let mut p = line_problem(7, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in [&mut p.kernels.f1, &mut p.kernels.f2, &mut p.kernels.f3, &mut p.kernels.rho1, &mut p.f0] {
            f.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        }
        p.kernels.k = Kernel::Dense(Array3::from_shape_fn((9, 7, 7), |_| rng.gen_range(-1.0..1.0)));
        let r = time_reverse(&p);
        assert_relative_eq!(r.kernels.t1, 0.5);
        assert_relative_eq!(r.kernels.t2, 0.75);
        let rr = time_reverse(&r);
        assert_relative_eq!(rr.kernels.t1, 0.25);
        assert_relative_eq!(rr.kernels.t2, 0.5);
        assert_eq!(rr.kernels, p.kernels.clone());
        assert_eq!(rr.f0, p.f0);
    }

    #[test]
    fn reversed_operator_matches_reflection() {
        // ℬ̂ w (t) = -(ℬu)(T - t) for w(t) = u(T - t)
        let mut p = line_problem(7, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for f in [
            &mut p.kernels.f1,
            &mut p.kernels.f2,
            &mut p.kernels.f3,
            &mut p.kernels.f4,
            &mut p.kernels.rho1,
            &mut p.kernels.rho2,
        ] {
            f.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        }
        p.kernels.k = Kernel::Dense(Array3::from_shape_fn((13, 7, 7), |_| rng.gen_range(-1.0..1.0)));
        let r = time_reverse(&p);
        let u = Array2::from_shape_fn((13, 7), |_| rng.gen_range(-1.0..1.0));
        let w = reflect(&u, 1.0);
        let bu = NonlocalOperator::new(p.kernels.clone(), &p.mesh, &p.grid).unwrap().apply(&u).unwrap();
        let bw = NonlocalOperator::new(r.kernels.clone(), &r.mesh, &r.grid).unwrap().apply(&w).unwrap();
        let expect = reflect(&bu, -1.0);
        assert!((&bw - &expect).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn lateral_data_examples() {
        let p = line_problem(101, 10);
        let (d, nm) = extract_lateral_data(&Array2::zeros((11, 101)), &p).unwrap();
        assert!(d.iter().chain(nm.iter()).all(|v| *v == 0.0));
        let u = p.grid.sample(&p.mesh, |_, x| x[0]);
        let (_, nm) = extract_lateral_data(&u, &p).unwrap();
        assert!(nm.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let u = p.grid.sample(&p.mesh, |t, x| (-t).exp() * (PI * x[0]).sin());
        let (_, nm) = extract_lateral_data(&u, &p).unwrap();
        for n in 0..11 {
            let exact = -PI * (-p.grid.time(n)).exp();
            assert!((nm[[n, 0]] - exact).abs() < 5e-3);
        }
    }

    #[test]
    fn adjoint_matches_forward() {
        // ⟨M⁻¹ a, b⟩ = ⟨a, M⁻ᵀ b⟩ with the full nonlocal system
        let mut p = line_problem(9, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for f in [&mut p.kernels.f1, &mut p.kernels.f2, &mut p.kernels.f3, &mut p.kernels.f4] {
            f.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
        }
        for f in [&mut p.kernels.rho1, &mut p.kernels.rho2] {
            f.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
        }
        p.kernels.k = Kernel::Dense(Array3::from_shape_fn((13, 9, 9), |_| rng.gen_range(-0.3..0.3)));
        let solver = ForwardSolver::new(&p).unwrap();
        let opts = PicardOptions { tol: 1e-14, max_sweeps: 200 };
        // forcing a (interior, levels >= 1) and initial state through row 0
        let mut a = Array2::from_shape_fn((13, 9), |_| rng.gen_range(-1.0..1.0));
        for &k in p.mesh.boundary() {
            a.column_mut(k).fill(0.0);
        }
        let u0: Array1<f64> = (0..9).map(|k| if p.mesh.is_boundary(k) { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let z = Array2::zeros((13, 9));
        let dt = p.grid.dt();
        let u = solver.solve(&(&a / dt), &z, u0.view(), opts).unwrap().u;
        let b = Array2::from_shape_fn((13, 9), |_| rng.gen_range(-1.0..1.0));
        let (pb, _) = solver.adjoint_solve(&b, opts).unwrap();
        // M u = rhs where rhs has u0 at level 0 and a at interior rows
        let mut rhs = a.clone();
        rhs.row_mut(0).assign(&u0);
        let lhs = (&u * &b).sum();
        let rhs_dot = (&rhs * &pb).sum();
        assert_relative_eq!(lhs, rhs_dot, max_relative = 1e-9);
    }

    #[test]
    fn linearity_of_solution_map() {
        let mut p = line_problem(15, 20);
        p.kernels.k = Kernel::Dense(Array3::from_elem((21, 15, 15), 0.2));
        let solver = ForwardSolver::new(&p).unwrap();
        let opts = PicardOptions { tol: 1e-13, max_sweeps: 100 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut data = || {
            let f = Array2::from_shape_fn((21, 15), |_| rng.gen_range(-1.0..1.0));
            let g = Array2::from_shape_fn((21, 15), |_| rng.gen_range(-1.0..1.0));
            let u0 = g.row(0).to_owned();
            (f, g, u0)
        };
        let (f1, g1, a1) = data();
        let (f2, g2, a2) = data();
        let (al, be) = (0.7, -1.3);
        let s1 = solver.solve(&f1, &g1, a1.view(), opts).unwrap().u;
        let s2 = solver.solve(&f2, &g2, a2.view(), opts).unwrap().u;
        let sc = solver
            .solve(&(&f1 * al + &f2 * be), &(&g1 * al + &g2 * be), (&a1 * al + &a2 * be).view(), opts)
            .unwrap()
            .u;
        let comb = &s1 * al + &s2 * be;
        let scale = comb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((&sc - &comb).iter().all(|d| d.abs() <= 1e-10 * scale));
    }

    #[test]
    fn picard_failure_reports_history() {
        let mut p = line_problem(9, 10);
        p.kernels.k = Kernel::Dense(Array3::from_elem((11, 9, 9), 400.0));
        p.f0.fill(1.0);
        match solve_ivp(&p, Array1::zeros(9).view()) {
            Err(LabError::Convergence { history }) => assert!(!history.is_empty()),
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn extrapolation_is_exact_for_quadratics() {
        let mesh = Mesh::build(Geometry::Rectangle, 7, "top").unwrap();
        let exact = mesh.sample(|x| 1.0 + x[0] - 2.0 * x[1] + x[0] * x[1] + x[1] * x[1]);
        let mut f = exact.clone();
        for &k in mesh.boundary() {
            f[k] = 99.0;
        }
        extrapolate_boundary(&mut f, &mesh);
        assert!((&f - &exact).iter().all(|d| d.abs() < 1e-12));
    }
}
