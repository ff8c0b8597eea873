//! The Bihari bound, the cut-off family, lateral Cauchy data completion
//! and the continuous-dependence experiment.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{shape_err, LabError, Result};
use crate::forward::{ForwardSolver, PicardOptions, ProblemData};
use crate::mesh::{
    check_trajectory, conormal_stencil, l2_sq_space_time, DiscreteOperator, Mesh, SpaceField, SpaceTimeField,
    TimeGrid,
};
use crate::presets::{scale_to_norm, seeded_rng, smooth_random_field};
use crate::report::{tolerance, EstimateReport, ReportContext};

/// Smoothstep cut-off `σ_ε` rising on `[εT, 2εT]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFamily {
    pub eps: f64,
    pub profile: Vec<f64>,
    pub derivative: Vec<f64>,
    /// `‖σ′_ε‖_∞ = 1.5 / (εT)`
    pub sup_derivative: f64,
}

/// `σ_ε` on the grid for `0 < ε < T1 / (2T)`.
pub fn cutoff(eps: f64, t1: f64, grid: &TimeGrid) -> Result<CutoffFamily> {
    let horizon = grid.horizon();
    if !(eps > 0.0 && eps < t1 / (2.0 * horizon)) {
        return Err(LabError::Domain(format!(
            "eps must lie in (0, T1/(2T)) = (0, {}), got {eps}",
            t1 / (2.0 * horizon)
        )));
    }
    let a = eps * horizon;
    let (profile, derivative) = (0..grid.levels())
        .map(|n| smoothstep(grid.time(n), a))
        .unzip();
    Ok(CutoffFamily { eps, profile, derivative, sup_derivative: 1.5 / a })
}

fn smoothstep(t: f64, a: f64) -> (f64, f64) {
    if t <= a {
        (0.0, 0.0)
    } else if t >= 2.0 * a {
        (1.0, 0.0)
    } else {
        let q = (t - a) / a;
        (q * q * (3.0 - 2.0 * q), 6.0 * q * (1.0 - q) / a)
    }
}

fn cumulative(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for n in 1..values.len() {
        out[n] = out[n - 1] + 0.5 * dt * (values[n - 1] + values[n]);
    }
    out
}

fn check_profile(what: &str, v: &[f64], grid: &TimeGrid) -> Result<()> {
    if v.len() != grid.levels() {
        return Err(shape_err("time profile", grid.levels(), v.len()));
    }
    if let Some(x) = v.iter().find(|x| !(**x >= 0.0)) {
        return Err(LabError::Domain(format!("{what} must be nonnegative, found {x}")));
    }
    Ok(())
}

/// `τ ↦ exp(∫₀^τ b) [√a + ½ ∫₀^τ kk(s) exp(-½∫₀^s b) ds]²`.
pub fn bihari_bound(a: f64, b: &[f64], kk: &[f64], grid: &TimeGrid) -> Result<Vec<f64>> {
    if !(a >= 0.0) {
        return Err(LabError::Domain(format!("a must be nonnegative, got {a}")));
    }
    check_profile("b", b, grid)?;
    check_profile("kk", kk, grid)?;
    let dt = grid.dt();
    let big_b = cumulative(b, dt);
    let inner: Vec<f64> = kk.iter().zip(&big_b).map(|(k, bb)| k * (-0.5 * bb).exp()).collect();
    let inner = cumulative(&inner, dt);
    Ok(big_b
        .iter()
        .zip(&inner)
        .map(|(bb, i)| bb.exp() * (a.sqrt() + 0.5 * i).powi(2))
        .collect())
}

/// Checks the hypothesis `z(τ) <= a + ∫₀^τ b z + ∫₀^τ kk √z` at every
/// level and, when it holds, `z <= bihari_bound`. A failed hypothesis
/// makes the report inapplicable.
pub fn verify_bihari(z: &[f64], a: f64, b: &[f64], kk: &[f64], grid: &TimeGrid) -> Result<EstimateReport> {
    check_profile("z", z, grid)?;
    let bound = bihari_bound(a, b, kk, grid)?;
    let dt = grid.dt();
    let bz: Vec<f64> = b.iter().zip(z).map(|(b, z)| b * z).collect();
    let kz: Vec<f64> = kk.iter().zip(z).map(|(k, z)| k * z.sqrt()).collect();
    let (bz, kz) = (cumulative(&bz, dt), cumulative(&kz, dt));
    let mut hyp_worst = f64::INFINITY;
    let mut hyp_ok = true;
    for n in 0..z.len() {
        let r = a + bz[n] + kz[n];
        let gap = r - z[n];
        hyp_worst = hyp_worst.min(gap);
        if gap < -tolerance(z[n], r, 0.0) {
            hyp_ok = false;
        }
    }
    let mut worst = 0;
    let mut worst_gap = f64::INFINITY;
    for n in 0..z.len() {
        let gap = bound[n] - z[n] + tolerance(z[n], bound[n], 0.0);
        if gap < worst_gap {
            worst_gap = gap;
            worst = n;
        }
    }
    let mut rep = EstimateReport::new(
        "bihari",
        ReportContext::default(),
        vec![("z".into(), z[worst]), ("tau".into(), grid.time(worst))],
        vec![("a".into(), a), ("hypothesis_margin".into(), hyp_worst)],
        z[worst],
        bound[worst],
        tolerance(z[worst], bound[worst], 0.0),
    );
    if !hyp_ok {
        rep.applicable = false;
        rep.pass = true;
        rep = rep.with_note("hypothesis inequality fails; lemma inapplicable");
    }
    Ok(rep)
}

/// Conormal trace on `Γ` for every level (levels × `Γ` nodes).
pub fn observe(u: &SpaceTimeField, p: &ProblemData) -> Result<Array2<f64>> {
    check_trajectory(u, &p.mesh, &p.grid)?;
    let stencils = gamma_stencils(p);
    let mut out = Array2::zeros((p.grid.levels(), stencils.len()));
    for n in 0..p.grid.levels() {
        for (i, st) in stencils.iter().enumerate() {
            out[[n, i]] = st.iter().map(|&(k, c)| c * u[[n, k]]).sum();
        }
    }
    Ok(out)
}

fn observe_transpose(y: &Array2<f64>, stencils: &[Vec<(usize, f64)>], mesh: &Mesh) -> SpaceTimeField {
    let mut out = Array2::zeros((y.nrows(), mesh.nnodes()));
    for n in 0..y.nrows() {
        for (i, st) in stencils.iter().enumerate() {
            for &(k, c) in st {
                out[[n, k]] += c * y[[n, i]];
            }
        }
    }
    out
}

fn gamma_stencils(p: &ProblemData) -> Vec<Vec<(usize, f64)>> {
    let nu = p.mesh.gamma_side().outward_normal();
    p.mesh
        .gamma_nodes()
        .into_iter()
        .map(|k| conormal_stencil(&p.coeffs, &p.mesh, k, nu))
        .collect()
}

/// Observation weights: zero at level 0, trapezoid in time on
/// `(0, T]` times the `Γ` quadrature.
pub fn observation_weights(mesh: &Mesh, grid: &TimeGrid) -> Array2<f64> {
    let gw = mesh.gamma_weights();
    let tw = grid.trapezoid();
    let mut w = Array2::zeros((grid.levels(), gw.len()));
    for n in 1..grid.levels() {
        let t = if n == grid.nt() { tw[n] } else { grid.dt() };
        for (i, g) in gw.iter().enumerate() {
            w[[n, i]] = t * g;
        }
    }
    w
}

fn weighted_sq(y: &Array2<f64>, w: &Array2<f64>) -> f64 {
    y.iter().zip(w.iter()).map(|(y, w)| w * y * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionOptions {
    /// Tikhonov weight; `None` picks `1e-6 ‖obs‖²_W`.
    pub beta: Option<f64>,
    pub cg_tol: f64,
    pub max_iter: usize,
    pub picard: PicardOptions,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        CompletionOptions {
            beta: None,
            cg_tol: 1e-8,
            max_iter: 500,
            picard: PicardOptions { tol: 1e-13, max_sweeps: 50 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub u: SpaceTimeField,
    pub u0: SpaceField,
    /// Tikhonov functional after each CG iteration (entry 0 at `u0 = 0`).
    pub history: Vec<f64>,
    pub beta: f64,
    /// `‖D_ν u - obs‖_W / ‖obs‖_W` (absolute when `obs = 0`).
    pub data_residual: f64,
    pub iterations: usize,
    /// Relative CG residual at exit.
    pub cg_residual: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Affine forward map `x ↦ u` from the interior initial state.
struct Completion<'a> {
    p: &'a ProblemData,
    solver: ForwardSolver,
    stencils: Vec<Vec<(usize, f64)>>,
    w: Array2<f64>,
    zero: SpaceTimeField,
    picard: PicardOptions,
}

impl Completion<'_> {
    fn embed(&self, x: &[f64], boundary: Option<&SpaceTimeField>) -> SpaceField {
        let mesh = &self.p.mesh;
        let mut u0 = Array1::zeros(mesh.nnodes());
        for (i, &k) in mesh.interior().iter().enumerate() {
            u0[k] = x[i];
        }
        if let Some(g) = boundary {
            for &k in mesh.boundary() {
                u0[k] = g[[0, k]];
            }
        }
        u0
    }

    fn observe(&self, u: &SpaceTimeField) -> Array2<f64> {
        let mut out = Array2::zeros(self.w.raw_dim());
        for n in 0..u.nrows() {
            for (i, st) in self.stencils.iter().enumerate() {
                out[[n, i]] = st.iter().map(|&(k, c)| c * u[[n, k]]).sum();
            }
        }
        out
    }

    /// `C L x`
    fn forward(&self, x: &[f64]) -> Result<Array2<f64>> {
        let u = self.solver.solve(&self.zero, &self.zero, self.embed(x, None).view(), self.picard)?.u;
        Ok(self.observe(&u))
    }

    /// `Lᵀ Cᵀ y`
    fn adjoint(&self, y: &Array2<f64>) -> Result<Vec<f64>> {
        let r = observe_transpose(y, &self.stencils, &self.p.mesh);
        let (q, _) = self.solver.adjoint_solve(&r, self.picard)?;
        Ok(self.p.mesh.interior().iter().map(|&k| q[[0, k]]).collect())
    }

    fn normal(&self, x: &[f64], beta: f64, q: &[f64]) -> Result<Vec<f64>> {
        let y = self.forward(x)? * &self.w;
        let mut out = self.adjoint(&y)?;
        for i in 0..out.len() {
            out[i] += beta * q[i] * x[i];
        }
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Recovers `u` from `f0`, the Dirichlet data in `p.g` and the conormal
/// observations on `Γ` (levels × `Γ` nodes, level 0 ignored) by Tikhonov
/// least squares in the initial state, solved with conjugate gradients.
pub fn complete_lateral_cauchy(
    p: &ProblemData,
    obs: &Array2<f64>,
    opts: &CompletionOptions,
) -> Result<CompletionResult> {
    let (mesh, grid) = (&p.mesh, &p.grid);
    let ng = mesh.gamma_nodes().len();
    if obs.dim() != (grid.levels(), ng) {
        return Err(shape_err("observations", format!("({}, {ng})", grid.levels()), format!("{:?}", obs.dim())));
    }
    let solver = ForwardSolver::new(p)?;
    let c = Completion {
        p,
        solver,
        stencils: gamma_stencils(p),
        w: observation_weights(mesh, grid),
        zero: Array2::zeros((grid.levels(), mesh.nnodes())),
        picard: opts.picard,
    };
    let obs_sq = weighted_sq(obs, &c.w);
    let beta = opts.beta.unwrap_or(1e-6 * obs_sq);
    if !(beta >= 0.0) {
        return Err(LabError::Domain(format!("beta must be nonnegative, got {beta}")));
    }
    let ni = mesh.interior().len();
    let q: Vec<f64> = mesh.interior().iter().map(|&k| mesh.quad_weights()[k]).collect();
    let mut warnings = Vec::new();
    let base = c.solver.solve(&p.f0, &p.g, c.embed(&vec![0.0; ni], Some(&p.g)).view(), c.picard)?;
    warnings.extend(base.warnings);
    let d = obs - &c.observe(&base.u);
    let half_d = 0.5 * weighted_sq(&d, &c.w);
    let b = c.adjoint(&(&d * &c.w))?;
    let bnorm = dot(&b, &b).sqrt();

    let mut x = vec![0.0; ni];
    let mut r = b.clone();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = vec![half_d];
    let mut iterations = 0;
    let mut rel = if bnorm > 0.0 { 1.0 } else { 0.0 };
    while rel > opts.cg_tol && iterations < opts.max_iter {
        let hd = c.normal(&dir, beta, &q)?;
        let curv = dot(&dir, &hd);
        if !(curv > 0.0) {
            warnings.push(format!("CG stopped on nonpositive curvature {curv:e}"));
            break;
        }
        let step = rr / curv;
        for i in 0..ni {
            x[i] += step * dir[i];
            r[i] -= step * hd[i];
        }
        let rr_new = dot(&r, &r);
        for i in 0..ni {
            dir[i] = r[i] + rr_new / rr * dir[i];
        }
        rr = rr_new;
        iterations += 1;
        rel = rr.sqrt() / bnorm;
        // J(x) = ½‖d‖²_W - ½ xᵀ(b + r)
        let xb: f64 = x.iter().zip(b.iter().zip(&r)).map(|(x, (b, r))| x * (b + r)).sum();
        history.push(half_d - 0.5 * xb);
    }
    let converged = rel <= opts.cg_tol;
    if !converged && rel > 1e-6 {
        warnings.push(format!("CG stagnated: relative residual {rel:e} after {iterations} iterations"));
    }
    let u0 = c.embed(&x, Some(&p.g));
    let sol = c.solver.solve(&p.f0, &p.g, u0.view(), c.picard)?;
    let resid = weighted_sq(&(&c.observe(&sol.u) - obs), &c.w).sqrt();
    let data_residual = if obs_sq > 0.0 { resid / obs_sq.sqrt() } else { resid };
    Ok(CompletionResult {
        u: sol.u,
        u0,
        history,
        beta,
        data_residual,
        iterations,
        cg_residual: rel,
        converged: converged || rel <= 1e-6,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceOptions {
    pub noise_levels: Vec<f64>,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Fourier modes per direction of the perturbations.
    pub modes: usize,
    pub completion: CompletionOptions,
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceRow {
    pub scenario: String,
    pub eps: f64,
    pub eta: f64,
    pub seed: u64,
    pub beta: f64,
    pub e: f64,
    pub d2: f64,
    /// Slope of `log E` against `log D²` over `η > 0` at this `ε`.
    pub slope: f64,
    /// `max E / D²` over `η > 0` at this `ε`.
    pub c_eps: f64,
    /// Seconds spent on the reconstruction of this `(η, seed)` cell.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceTable {
    pub rows: Vec<DependenceRow>,
    pub slopes: Vec<(f64, f64)>,
    pub c_eps: Vec<(f64, f64)>,
    /// `E / (‖u(T)‖² + 2μ0∫‖∇u‖²)` at `η = 0`, per `ε`; NaN when `η = 0`
    /// is not among the levels.
    pub floor: Vec<(f64, f64)>,
}

struct Cell {
    eta: f64,
    seed: u64,
    beta: f64,
    u: SpaceTimeField,
    d2: f64,
    wall: f64,
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `‖e(T)‖² + 2μ0 ∫_{2εT}^T ‖∇e‖²`
fn error_energy(e: &SpaceTimeField, mu0: f64, eps: f64, mesh: &Mesh, grid: &TimeGrid) -> Result<f64> {
    let horizon = grid.horizon();
    let w = grid.window_weights(2.0 * eps * horizon, horizon)?;
    let grad: f64 = (0..grid.levels())
        .filter(|&n| w[n] > 0.0)
        .map(|n| w[n] * mesh.grad_norm_sq(e.row(n)))
        .sum();
    Ok(crate::mesh::l2_sq(e.row(grid.nt()), mesh) + 2.0 * mu0 * grad)
}

/// Perturbs `(f0, g)` by smooth random fields of relative size `η`,
/// reconstructs from the perturbed lateral data and compares with `truth`.
/// `g` is replaced by `truth`, so its conormal trace is the exact
/// observation. For a fixed seed the perturbation shape is shared by all
/// noise levels.
pub fn dependence_experiment(
    p: &ProblemData,
    truth: &SpaceTimeField,
    opts: &DependenceOptions,
) -> Result<DependenceTable> {
    let (mesh, grid) = (&p.mesh, &p.grid);
    check_trajectory(truth, mesh, grid)?;
    for &eta in &opts.noise_levels {
        if !(eta >= 0.0) {
            return Err(LabError::Domain(format!("noise level must be nonnegative, got {eta}")));
        }
    }
    for &eps in &opts.eps {
        cutoff(eps, p.kernels.t1, grid)?;
    }
    let mut base = p.clone();
    base.g = truth.clone();
    let op = DiscreteOperator::assemble(&p.coeffs, mesh)?;
    let f_norm = l2_sq_space_time(&p.f0, mesh, grid, None)?.sqrt();
    let g_norm = l2_sq_space_time(truth, mesh, grid, None)?.sqrt();
    let cells: Vec<(f64, u64)> = opts
        .noise_levels
        .iter()
        .flat_map(|&eta| opts.seeds.iter().map(move |&s| (eta, s)))
        .collect();
    let run = |&(eta, seed): &(f64, u64)| -> Result<Cell> {
        let start = Instant::now();
        let mut rng = seeded_rng(seed);
        let mut df = smooth_random_field(mesh, grid, opts.modes, &mut rng);
        let mut dg = smooth_random_field(mesh, grid, opts.modes, &mut rng);
        scale_to_norm(&mut df, eta * f_norm, mesh, grid)?;
        scale_to_norm(&mut dg, eta * g_norm, mesh, grid)?;
        if eta == 0.0 {
            df.fill(0.0);
            dg.fill(0.0);
        }
        let mut q = base.clone();
        q.f0 = &p.f0 + &df;
        q.g = truth + &dg;
        let obs = observe(&q.g, &q)?;
        let rec = complete_lateral_cauchy(&q, &obs, &opts.completion)?;
        let mut adg = Array2::zeros(dg.raw_dim());
        for n in 0..grid.levels() {
            adg.row_mut(n).assign(&op.apply(dg.row(n)));
        }
        let d2 = l2_sq_space_time(&df, mesh, grid, None)?
            + l2_sq_space_time(&dg, mesh, grid, None)?
            + l2_sq_space_time(&grid.derivative(&dg), mesh, grid, None)?
            + l2_sq_space_time(&adg, mesh, grid, None)?;
        Ok(Cell { eta, seed, beta: rec.beta, u: rec.u, d2, wall: start.elapsed().as_secs_f64() })
    };
    let cells: Vec<Cell> = cells.par_iter().map(run).collect::<Result<_>>()?;

    let mu0 = p.coeffs.mu0;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut c_eps = Vec::new();
    let mut floor = Vec::new();
    for &eps in &opts.eps {
        let scale = error_energy(truth, mu0, eps, mesh, grid)?;
        let mut block = Vec::with_capacity(cells.len());
        for c in &cells {
            let e = error_energy(&(&c.u - truth), mu0, eps, mesh, grid)?;
            block.push((c, e));
        }
        let pts: Vec<(f64, f64)> = block
            .iter()
            .filter(|(c, e)| c.eta > 0.0 && *e > 0.0 && c.d2 > 0.0)
            .map(|(c, e)| (c.d2.ln(), e.ln()))
            .collect();
        let slope = least_squares_slope(&pts);
        let cmax = block
            .iter()
            .filter(|(c, _)| c.eta > 0.0 && c.d2 > 0.0)
            .map(|(c, e)| e / c.d2)
            .fold(f64::NEG_INFINITY, f64::max);
        let cmax = if cmax == f64::NEG_INFINITY { f64::NAN } else { cmax };
        let fl = block
            .iter()
            .filter(|(c, _)| c.eta == 0.0)
            .map(|(_, e)| if scale > 0.0 { e / scale } else { *e })
            .fold(f64::NAN, f64::max);
        slopes.push((eps, slope));
        c_eps.push((eps, cmax));
        floor.push((eps, fl));
        for (c, e) in block {
            rows.push(DependenceRow {
                scenario: opts.scenario.clone(),
                eps,
                eta: c.eta,
                seed: c.seed,
                beta: c.beta,
                e,
                d2: c.d2,
                slope,
                c_eps: cmax,
                wall_time: c.wall,
            });
        }
    }
    Ok(DependenceTable { rows, slopes, c_eps, floor })
}

/// Median of `E` per noise level at one `ε`, in the order of first
/// appearance.
pub fn median_errors(table: &DependenceTable, eps: f64) -> Vec<(f64, f64)> {
    let mut levels: Vec<f64> = Vec::new();
    for r in &table.rows {
        if r.eps == eps && !levels.contains(&r.eta) {
            levels.push(r.eta);
        }
    }
    levels
        .into_iter()
        .map(|eta| {
            let mut es: Vec<f64> = table.rows.iter().filter(|r| r.eps == eps && r.eta == eta).map(|r| r.e).collect();
            es.sort_by(f64::total_cmp);
            let m = es.len();
            let med = if m % 2 == 1 { es[m / 2] } else { 0.5 * (es[m / 2 - 1] + es[m / 2]) };
            (eta, med)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_ivp;
    use crate::mesh::{EllipticCoefficients, Geometry};
    use crate::nonlocal::KernelSet;
    use crate::presets::{kernels, mms_problem, random_interior_field, KernelParams, KernelPreset};
    use crate::weights::{PseudoConvexFn, WeightConfig};
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn cutoff_examples() {
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let c = cutoff(0.05, 0.25, &grid).unwrap();
        assert_eq!(c.profile[0], 0.0);
        assert_eq!(*c.profile.last().unwrap(), 1.0);
        assert_relative_eq!(c.sup_derivative, 30.0);
        assert_relative_eq!(smoothstep(0.075, 0.05).0, 0.5);
        assert!(c.profile.iter().all(|s| (0.0..=1.0).contains(s)));
        for n in 0..grid.levels() {
            let t = grid.time(n);
            if t <= 0.05 {
                assert_eq!(c.profile[n], 0.0);
            }
            if t >= 0.1 {
                assert_eq!(c.profile[n], 1.0);
            }
            assert!(c.derivative[n] <= c.sup_derivative + 1e-12);
        }
        assert!(cutoff(0.125, 0.25, &grid).is_err());
        assert!(cutoff(0.0, 0.25, &grid).is_err());
    }

    #[test]
    fn bihari_closed_forms() {
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let l = grid.levels();
        let b = bihari_bound(2.0, &vec![0.0; l], &vec![0.0; l], &grid).unwrap();
        assert!(b.iter().all(|v| (v - 2.0).abs() < 1e-14));
        let g = bihari_bound(2.0, &vec![0.7; l], &vec![0.0; l], &grid).unwrap();
        for n in 0..l {
            assert_relative_eq!(g[n], 2.0 * (0.7 * grid.time(n)).exp(), max_relative = 1e-12);
        }
        let e = bihari_bound(0.0, &vec![0.0; l], &vec![1.0; l], &grid).unwrap();
        for n in 0..l {
            assert!((e[n] - grid.time(n).powi(2) / 4.0).abs() <= 1e-6);
        }
        assert!(bihari_bound(-1.0, &vec![0.0; l], &vec![0.0; l], &grid).is_err());
    }

    #[test]
    fn verify_bihari_cases() {
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let l = grid.levels();
        let zero = vec![0.0; l];
        let r = verify_bihari(&vec![3.0; l], 3.0, &zero, &zero, &grid).unwrap();
        assert!(r.pass && r.applicable);
        let z: Vec<f64> = grid.times().iter().map(|t| t * t / 4.0).collect();
        let r = verify_bihari(&z, 0.0, &zero, &vec![1.0; l], &grid).unwrap();
        assert!(r.pass && r.applicable);
        assert!(r.margin.abs() <= 1e-6);
        let bound = bihari_bound(1.0, &vec![1.0; l], &zero, &grid).unwrap();
        let big: Vec<f64> = bound.iter().map(|b| 2.0 * b).collect();
        let r = verify_bihari(&big, 1.0, &vec![1.0; l], &zero, &grid).unwrap();
        assert!(!r.applicable && r.pass);
    }

    #[test]
    fn bihari_monotone_random() {
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let l = grid.levels();
        let mut rng = seeded_rng(3);
        for _ in 0..50 {
            let a = rng.gen_range(0.0..2.0);
            let b: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..2.0)).collect();
            let k: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..2.0)).collect();
            let base = bihari_bound(a, &b, &k, &grid).unwrap();
            let b2: Vec<f64> = b.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
            let k2: Vec<f64> = k.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
            let up = bihari_bound(a + rng.gen_range(0.0..0.5), &b2, &k2, &grid).unwrap();
            assert!(base.iter().zip(&up).all(|(x, y)| y >= x));
        }
    }

    fn line_problem(n: usize, nt: usize, saturating: bool) -> ProblemData {
        let mesh = Mesh::build(Geometry::Interval, n, "right").unwrap();
        let grid = TimeGrid::new(1.0, nt).unwrap();
        let ks = if saturating {
            let cfg = WeightConfig::new(1.0, 1.0, 1.0, PseudoConvexFn::toward_gamma(&mesh)).unwrap();
            let params = KernelParams { kappa: 0.02, f_amp: [0.05; 4], rho_amp: [0.5; 2], ..Default::default() };
            kernels(KernelPreset::HypothesisSaturating, &params, &mesh, &grid, &cfg, 0.25, 0.5, 1.5).unwrap()
        } else {
            KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap()
        };
        let coeffs = EllipticCoefficients::identity(&mesh);
        mms_problem(&mesh, &grid, coeffs, ks).unwrap().0
    }

    #[test]
    fn adjoint_is_consistent_with_kernels() {
        let p = line_problem(21, 40, true);
        let solver = ForwardSolver::new(&p).unwrap();
        let c = Completion {
            p: &p,
            solver,
            stencils: gamma_stencils(&p),
            w: observation_weights(&p.mesh, &p.grid),
            zero: Array2::zeros((41, 21)),
            picard: PicardOptions { tol: 1e-14, max_sweeps: 80 },
        };
        let mut rng = seeded_rng(4);
        let x: Vec<f64> = (0..19).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = Array2::from_shape_fn((41, 1), |_| rng.gen_range(-1.0..1.0));
        let lhs: f64 = c.forward(&x).unwrap().iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs = dot(&x, &c.adjoint(&y).unwrap());
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }

    #[test]
    fn zero_data_gives_zero() {
        let mut p = line_problem(21, 40, false);
        p.f0.fill(0.0);
        p.g.fill(0.0);
        let obs = Array2::zeros((41, 1));
        let opts = CompletionOptions { beta: Some(1e-10), ..Default::default() };
        let r = complete_lateral_cauchy(&p, &obs, &opts).unwrap();
        assert!(r.u.iter().all(|v| v.abs() <= 1e-12));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn closed_loop_recovery() {
        let p = line_problem(51, 100, false);
        let u = solve_ivp(&p, p.g.row(0).to_owned().view()).map(|_| ()).ok();
        let _ = u;
        let truth = crate::presets::mms_solution(&p.mesh, &p.grid);
        let truth = solve_ivp(&p, truth.row(0)).unwrap().u;
        let obs = observe(&truth, &p).unwrap();
        let opts = CompletionOptions { beta: Some(1e-10), ..Default::default() };
        let r = complete_lateral_cauchy(&p, &obs, &opts).unwrap();
        let err = crate::forward::relative_error(&r.u, &truth, &p.mesh, &p.grid, Some((0.1, 1.0))).unwrap();
        assert!(err <= 1e-3, "error {err}, {:?}", r.warnings);
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300, "{:?}", r.history);
        }
    }

    #[test]
    fn huge_beta_returns_zero_state() {
        let p = line_problem(21, 40, false);
        let truth = crate::presets::mms_solution(&p.mesh, &p.grid);
        let obs = observe(&truth, &p).unwrap();
        let opts = CompletionOptions { beta: Some(1e12), ..Default::default() };
        let r = complete_lateral_cauchy(&p, &obs, &opts).unwrap();
        assert!(r.u0.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn reconstruction_is_linear_in_data() {
        let mut p = line_problem(21, 40, false);
        p.f0.fill(0.0);
        p.g.fill(0.0);
        let mut rng = seeded_rng(9);
        let a = observe(&random_interior_field(&p.mesh, &p.grid, 3, &mut rng), &p).unwrap();
        let b = observe(&random_interior_field(&p.mesh, &p.grid, 3, &mut rng), &p).unwrap();
        let opts = CompletionOptions { beta: Some(1e-4), cg_tol: 1e-13, ..Default::default() };
        let ra = complete_lateral_cauchy(&p, &a, &opts).unwrap().u0;
        let rb = complete_lateral_cauchy(&p, &b, &opts).unwrap().u0;
        let rab = complete_lateral_cauchy(&p, &(&a + &b), &opts).unwrap().u0;
        let diff = (&rab - &ra - &rb).mapv(f64::abs).sum();
        assert!(diff <= 1e-8 * rab.mapv(f64::abs).sum());
    }

    #[test]
    fn dependence_small_sweep() {
        let p = line_problem(31, 60, false);
        let truth = solve_ivp(&p, crate::presets::mms_solution(&p.mesh, &p.grid).row(0)).unwrap().u;
        let opts = DependenceOptions {
            noise_levels: vec![0.0, 1e-3, 1e-2, 1e-1],
            eps: vec![0.05, 0.1],
            seeds: vec![1, 2, 3],
            modes: 3,
            completion: CompletionOptions { beta: Some(1e-10), ..Default::default() },
            scenario: "mms".into(),
        };
        let t = dependence_experiment(&p, &truth, &opts).unwrap();
        assert_eq!(t.rows.len(), 2 * 4 * 3);
        let med = median_errors(&t, 0.1);
        for w in med.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        let (_, s) = t.slopes[1];
        assert!((0.5..=1.5).contains(&s), "slope {s}");
        assert!(t.c_eps[1].1 <= t.c_eps[0].1);
        assert!(t.floor[1].1 <= 1e-6, "floor {:?}", t.floor);
    }
}
