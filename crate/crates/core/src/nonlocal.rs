//! Kernel bundle, the integral operator `B`, the five-part nonlocal
//! operator `ℬ`, hypothesis constants `K1..K6` and the smallness tests.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{shape_err, LabError, Result};
use crate::mesh::{check_trajectory, Mesh, SpaceField, SpaceTimeField, TimeGrid};
use crate::weights::{c1_lambda, m_inf, WeightConfig};

/// Samples of `k(t, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Zero,
    /// `levels × nodes × nodes`, indexed `[n, x, y]`.
    Dense(Array3<f64>),
}

impl Kernel {
    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Zero => true,
            Kernel::Dense(k) => k.iter().all(|v| *v == 0.0),
        }
    }

    pub fn slice(&self, level: usize) -> Option<ArrayView2<'_, f64>> {
        match self {
            Kernel::Zero => None,
            Kernel::Dense(k) => Some(k.index_axis(Axis(0), level)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub f1: SpaceTimeField,
    pub f2: SpaceTimeField,
    pub f3: SpaceTimeField,
    pub f4: SpaceTimeField,
    pub rho1: SpaceTimeField,
    pub rho2: SpaceTimeField,
    pub k: Kernel,
    pub t1: f64,
    pub t2: f64,
    pub gamma_exp: f64,
    /// Preset name, carried into reports.
    pub label: String,
}

impl KernelSet {
    pub fn zero(mesh: &Mesh, grid: &TimeGrid, t1: f64, t2: f64, gamma_exp: f64) -> Result<KernelSet> {
        let z = Array2::zeros((grid.levels(), mesh.nnodes()));
        let ks = KernelSet {
            f1: z.clone(),
            f2: z.clone(),
            f3: z.clone(),
            f4: z.clone(),
            rho1: z.clone(),
            rho2: z,
            k: Kernel::Zero,
            t1,
            t2,
            gamma_exp,
            label: "zero".into(),
        };
        ks.validate(mesh, grid)?;
        Ok(ks)
    }

    pub fn validate(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
        m_inf(self.t1, self.t2, grid.horizon())?;
        if !(0.0..=3.0).contains(&self.gamma_exp) {
            return Err(LabError::Domain(format!("gamma must lie in [0, 3], got {}", self.gamma_exp)));
        }
        for f in [&self.f1, &self.f2, &self.f3, &self.f4, &self.rho1, &self.rho2] {
            check_trajectory(f, mesh, grid)?;
        }
        if let Kernel::Dense(k) = &self.k {
            let expect = (grid.levels(), mesh.nnodes(), mesh.nnodes());
            if k.dim() != expect {
                return Err(shape_err("kernel k", format!("{expect:?}"), format!("{:?}", k.dim())));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        [&self.f1, &self.f2, &self.f3, &self.f4]
            .iter()
            .all(|f| f.iter().all(|v| *v == 0.0))
            && self.k.is_zero()
    }
}

/// `(Bu)(x) = Σ_y q_y k(x, y) u(y)` for one time slice.
pub fn apply_b(u: ArrayView1<f64>, k: ArrayView2<f64>, mesh: &Mesh) -> Result<SpaceField> {
    mesh.check_field("apply_b input", u.len())?;
    if k.dim() != (mesh.nnodes(), mesh.nnodes()) {
        return Err(shape_err("kernel slice", mesh.nnodes(), format!("{:?}", k.dim())));
    }
    let q = ArrayView1::from(mesh.quad_weights());
    let qu = &u * &q;
    Ok(k.dot(&qu))
}

/// `‖f‖_{L²(0,T; L^∞(Ω))}` by trapezoid in time.
pub fn norm_l2_linf(f: &SpaceTimeField, grid: &TimeGrid) -> f64 {
    let w = grid.trapezoid();
    f.outer_iter()
        .zip(&w)
        .map(|(row, w)| {
            let m = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            w * m * m
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖f‖_{L^∞(Ω; L²(0,T))}`
pub fn norm_linf_l2(f: &SpaceTimeField, grid: &TimeGrid) -> f64 {
    let w = grid.trapezoid();
    (0..f.ncols())
        .map(|k| f.column(k).iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>())
        .fold(0.0f64, f64::max)
        .sqrt()
}

/// `‖f‖_{L²(T1,T2; L^∞(Ω))}` with the window quadrature of the grid.
pub fn norm_window_l2_linf(f: &SpaceTimeField, grid: &TimeGrid, t1: f64, t2: f64) -> Result<f64> {
    let w = grid.window_weights(t1, t2)?;
    Ok(f
        .outer_iter()
        .zip(&w)
        .map(|(row, w)| {
            let m = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            w * m * m
        })
        .sum::<f64>()
        .sqrt())
}

/// The memory vectors `u(T1)`, `u(T2)`, `∫ρ1 u`, `∫ρ2 Bu` of a trajectory.
#[derive(Debug, Clone)]
pub struct Memory {
    pub at_t1: SpaceField,
    pub at_t2: SpaceField,
    pub rho1_integral: SpaceField,
    pub rho2_integral: SpaceField,
}

/// `ℬ` discretized on a fixed mesh and time grid. Window integrals over
/// `[T1, T2]` integrate the piecewise-linear interpolant exactly and the
/// traces at `T1`, `T2` interpolate linearly between levels.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    pub kernels: KernelSet,
    mesh: Mesh,
    grid: TimeGrid,
    c1: Vec<f64>,
    c2: Vec<f64>,
    window: Vec<f64>,
    zero: bool,
}

impl NonlocalOperator {
    pub fn new(kernels: KernelSet, mesh: &Mesh, grid: &TimeGrid) -> Result<NonlocalOperator> {
        kernels.validate(mesh, grid)?;
        let mut c1 = vec![0.0; grid.levels()];
        for (n, w) in grid.interp(kernels.t1)? {
            c1[n] += w;
        }
        let mut c2 = vec![0.0; grid.levels()];
        for (n, w) in grid.interp(kernels.t2)? {
            c2[n] += w;
        }
        let window = grid.window_weights(kernels.t1, kernels.t2)?;
        let zero = kernels.is_zero();
        Ok(NonlocalOperator { kernels, mesh: mesh.clone(), grid: *grid, c1, c2, window, zero })
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    /// Weights of the `T1` trace over levels.
    pub fn trace_weights_t1(&self) -> &[f64] {
        &self.c1
    }
    pub fn trace_weights_t2(&self) -> &[f64] {
        &self.c2
    }
    /// Quadrature weights of `∫_{T1}^{T2}` over levels.
    pub fn window_weights(&self) -> &[f64] {
        &self.window
    }

    /// `B` at one level.
    pub fn b_level(&self, u: ArrayView1<f64>, level: usize) -> SpaceField {
        match self.kernels.k.slice(level) {
            None => Array1::zeros(u.len()),
            Some(k) => {
                let q = ArrayView1::from(self.mesh.quad_weights());
                k.dot(&(&u * &q))
            }
        }
    }

    /// Transpose of `B` at one level in the Euclidean inner product.
    pub fn b_level_transpose(&self, y: ArrayView1<f64>, level: usize) -> SpaceField {
        match self.kernels.k.slice(level) {
            None => Array1::zeros(y.len()),
            Some(k) => {
                let q = ArrayView1::from(self.mesh.quad_weights());
                &k.t().dot(&y) * &q
            }
        }
    }

    pub fn memory(&self, u: &SpaceTimeField) -> Memory {
        let nn = self.mesh.nnodes();
        let mut at_t1 = Array1::zeros(nn);
        let mut at_t2 = Array1::zeros(nn);
        let mut rho1_integral = Array1::zeros(nn);
        let mut rho2_integral = Array1::zeros(nn);
        for n in 0..self.grid.levels() {
            let row = u.row(n);
            if self.c1[n] != 0.0 {
                at_t1.scaled_add(self.c1[n], &row);
            }
            if self.c2[n] != 0.0 {
                at_t2.scaled_add(self.c2[n], &row);
            }
            let w = self.window[n];
            if w != 0.0 {
                rho1_integral += &(&self.kernels.rho1.row(n) * &row * w);
                if !matches!(self.kernels.k, Kernel::Zero) {
                    let bu = self.b_level(row, n);
                    rho2_integral += &(&self.kernels.rho2.row(n) * &bu * w);
                }
            }
        }
        Memory { at_t1, at_t2, rho1_integral, rho2_integral }
    }

    fn parts_with_memory(&self, u: ArrayView1<f64>, level: usize, mem: &Memory) -> [SpaceField; 5] {
        let k = &self.kernels;
        [
            &k.f1.row(level) * &mem.at_t1,
            &k.f2.row(level) * &mem.at_t2,
            &k.f3.row(level) * &mem.rho1_integral,
            self.b_level(u, level),
            &k.f4.row(level) * &mem.rho2_integral,
        ]
    }

    /// `ℬ_1 u .. ℬ_5 u` at one level.
    pub fn parts_at(&self, u: &SpaceTimeField, level: usize) -> Result<[SpaceField; 5]> {
        check_trajectory(u, &self.mesh, &self.grid)?;
        let mem = self.memory(u);
        Ok(self.parts_with_memory(u.row(level), level, &mem))
    }

    /// `ℬu` at time `t`, interpolated linearly between levels.
    pub fn apply_at_time(&self, u: &SpaceTimeField, t: f64) -> Result<SpaceField> {
        check_trajectory(u, &self.mesh, &self.grid)?;
        let mem = self.memory(u);
        let mut out = Array1::zeros(self.mesh.nnodes());
        for (n, w) in self.grid.interp(t)? {
            if w == 0.0 {
                continue;
            }
            for p in self.parts_with_memory(u.row(n), n, &mem) {
                out.scaled_add(w, &p);
            }
        }
        Ok(out)
    }

    /// Each `ℬ_j u` on the whole grid.
    pub fn apply_parts(&self, u: &SpaceTimeField) -> Result<[SpaceTimeField; 5]> {
        check_trajectory(u, &self.mesh, &self.grid)?;
        let shape = u.raw_dim();
        let mut out = [
            Array2::zeros(shape),
            Array2::zeros(shape),
            Array2::zeros(shape),
            Array2::zeros(shape),
            Array2::zeros(shape),
        ];
        if self.zero {
            return Ok(out);
        }
        let mem = self.memory(u);
        for n in 0..self.grid.levels() {
            let parts = self.parts_with_memory(u.row(n), n, &mem);
            for (o, p) in out.iter_mut().zip(parts) {
                o.row_mut(n).assign(&p);
            }
        }
        Ok(out)
    }

    /// `ℬu` on the whole grid.
    pub fn apply(&self, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        check_trajectory(u, &self.mesh, &self.grid)?;
        let mut out = Array2::zeros(u.raw_dim());
        if self.zero {
            return Ok(out);
        }
        let mem = self.memory(u);
        for n in 0..self.grid.levels() {
            let mut row = out.row_mut(n);
            for p in self.parts_with_memory(u.row(n), n, &mem) {
                row += &p;
            }
        }
        Ok(out)
    }

    /// Euclidean transpose of [`NonlocalOperator::apply`] on the whole grid.
    pub fn apply_transpose(&self, y: &SpaceTimeField) -> Result<SpaceTimeField> {
        check_trajectory(y, &self.mesh, &self.grid)?;
        let nn = self.mesh.nnodes();
        let mut out = Array2::zeros(y.raw_dim());
        if self.zero {
            return Ok(out);
        }
        let k = &self.kernels;
        let mut s1 = Array1::<f64>::zeros(nn);
        let mut s2 = Array1::<f64>::zeros(nn);
        let mut s3 = Array1::<f64>::zeros(nn);
        let mut s4 = Array1::<f64>::zeros(nn);
        for n in 0..self.grid.levels() {
            let yn = y.row(n);
            s1 += &(&k.f1.row(n) * &yn);
            s2 += &(&k.f2.row(n) * &yn);
            s3 += &(&k.f3.row(n) * &yn);
            s4 += &(&k.f4.row(n) * &yn);
        }
        for m in 0..self.grid.levels() {
            let mut row = out.row_mut(m);
            if self.c1[m] != 0.0 {
                row.scaled_add(self.c1[m], &s1);
            }
            if self.c2[m] != 0.0 {
                row.scaled_add(self.c2[m], &s2);
            }
            let w = self.window[m];
            if w != 0.0 {
                row += &(&k.rho1.row(m) * &s3 * w);
            }
            if !matches!(k.k, Kernel::Zero) {
                let mut z = y.row(m).to_owned();
                if w != 0.0 {
                    z += &(&k.rho2.row(m) * &s4 * w);
                }
                row += &self.b_level_transpose(z.view(), m);
            }
        }
        Ok(out)
    }
}

/// `ℬu` at level `level` (or interpolated at time `t` via
/// [`NonlocalOperator::apply_at_time`]).
pub fn apply_calb(
    u: &SpaceTimeField,
    kernels: &KernelSet,
    t: f64,
    mesh: &Mesh,
    grid: &TimeGrid,
) -> Result<SpaceField> {
    NonlocalOperator::new(kernels.clone(), mesh, grid)?.apply_at_time(u, t)
}

/// Which hypothesis constant a defining ratio belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    K1,
    K2,
    K3,
    K4,
    K5,
}

/// Location of a supremum: time level and spatial node (`x` for `K1..K3`,
/// `y` for `K4`, `K5`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgMax {
    pub level: usize,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub argmax: [Option<ArgMax>; 5],
    /// `sup l^{3-γ} ∫|k| dx` over the grid, the quantity `K6` is meant to bound.
    pub column_sup: f64,
    pub pass_rho1: bool,
    pub pass_rho2: bool,
    pub pass_row: bool,
    pub pass_upper: bool,
    pub pass_lower: bool,
    pub pass_column: bool,
    pub violations: Vec<String>,
}

impl HypothesisConstants {
    pub fn all_finite(&self) -> bool {
        self.pass_rho1 && self.pass_rho2 && self.pass_row && self.pass_upper && self.pass_lower
    }

    pub fn get(&self, c: Constant) -> f64 {
        match c {
            Constant::K1 => self.k1,
            Constant::K2 => self.k2,
            Constant::K3 => self.k3,
            Constant::K4 => self.k4,
            Constant::K5 => self.k5,
        }
    }
}

/// Natural log of a defining ratio; `-inf` encodes a zero ratio.
fn log_ratio(
    which: Constant,
    level: usize,
    node: usize,
    kernels: &KernelSet,
    cfg: &WeightConfig,
    mesh: &Mesh,
    grid: &TimeGrid,
) -> f64 {
    let t = grid.time(level);
    let l = t * (grid.horizon() - t);
    let gamma = kernels.gamma_exp;
    let q = mesh.quad_weights();
    match which {
        Constant::K1 | Constant::K2 => {
            let rho = if which == Constant::K1 { &kernels.rho1 } else { &kernels.rho2 };
            let v = rho[[level, node]].abs();
            v.ln() - cfg.s0 * cfg.alpha_numerator(node) / l
        }
        Constant::K3 => {
            let Some(k) = kernels.k.slice(level) else {
                return f64::NEG_INFINITY;
            };
            let s: f64 = k.row(node).iter().zip(q).map(|(v, w)| w * v.abs()).sum();
            s.ln() + gamma * l.ln()
        }
        Constant::K4 | Constant::K5 => {
            let Some(k) = kernels.k.slice(level) else {
                return f64::NEG_INFINITY;
            };
            let psi = &cfg.psi.values;
            let py = psi[node];
            let upper = which == Constant::K4;
            let s: f64 = k
                .column(node)
                .iter()
                .zip(q)
                .zip(psi)
                .filter(|(_, px)| if upper { **px > py } else { **px <= py })
                .map(|((v, w), _)| w * v.abs())
                .sum();
            let mut r = s.ln() + (3.0 - gamma) * l.ln();
            if upper {
                r += 2.0 * cfg.s0 * c1_lambda(cfg) / l;
            }
            r
        }
    }
}

/// The defining ratio of one constant at a grid point, as a plain number
/// (may be `+inf` when it overflows).
pub fn defining_ratio(
    which: Constant,
    level: usize,
    node: usize,
    kernels: &KernelSet,
    cfg: &WeightConfig,
    mesh: &Mesh,
    grid: &TimeGrid,
) -> f64 {
    log_ratio(which, level, node, kernels, cfg, mesh, grid).exp()
}

fn interior_levels(grid: &TimeGrid) -> std::ops::Range<usize> {
    1..grid.nt()
}

fn sup_of(
    which: Constant,
    levels: &[usize],
    kernels: &KernelSet,
    cfg: &WeightConfig,
    mesh: &Mesh,
    grid: &TimeGrid,
) -> (f64, Option<ArgMax>) {
    let best = levels
        .par_iter()
        .map(|&n| {
            let mut best: (f64, Option<ArgMax>) = (f64::NEG_INFINITY, None);
            for x in 0..mesh.nnodes() {
                let r = log_ratio(which, n, x, kernels, cfg, mesh, grid);
                if r > best.0 || (r.is_nan() && best.1.is_none()) {
                    best = (r, Some(ArgMax { level: n, node: x }));
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, None),
            |a, b| {
                match (a.1, b.1) {
                    (None, _) => b,
                    (_, None) => a,
                    (Some(pa), Some(pb)) => {
                        if b.0 > a.0 || (b.0 == a.0 && (pb.level, pb.node) < (pa.level, pa.node)) {
                            b
                        } else {
                            a
                        }
                    }
                }
            },
        );
    if best.0 == f64::NEG_INFINITY {
        (0.0, None)
    } else {
        (best.0.exp(), best.1)
    }
}

/// Discrete `K1..K6`: grid maxima of the defining ratios over interior time
/// levels (`K2` over levels carrying weight in `[T1, T2]`). Non-finite
/// suprema are recorded as violations.
pub fn hypothesis_constants(
    kernels: &KernelSet,
    cfg: &WeightConfig,
    mesh: &Mesh,
    grid: &TimeGrid,
) -> Result<HypothesisConstants> {
    kernels.validate(mesh, grid)?;
    mesh.check_field("psi samples", cfg.psi.values.len())?;
    let interior: Vec<usize> = interior_levels(grid).collect();
    let window = grid.window_weights(kernels.t1, kernels.t2)?;
    let win_levels: Vec<usize> = interior.iter().copied().filter(|&n| window[n] > 0.0).collect();

    let (k1, a1) = sup_of(Constant::K1, &interior, kernels, cfg, mesh, grid);
    let (k2, a2) = sup_of(Constant::K2, &win_levels, kernels, cfg, mesh, grid);
    let (k3, a3) = sup_of(Constant::K3, &interior, kernels, cfg, mesh, grid);
    let (k4, a4) = sup_of(Constant::K4, &interior, kernels, cfg, mesh, grid);
    let (k5, a5) = sup_of(Constant::K5, &interior, kernels, cfg, mesh, grid);
    let k6 = k4.max(k5);

    let gamma = kernels.gamma_exp;
    let column_sup = match &kernels.k {
        Kernel::Zero => 0.0,
        Kernel::Dense(k) => interior
            .iter()
            .map(|&n| {
                let t = grid.time(n);
                let l = t * (grid.horizon() - t);
                let slice = k.index_axis(Axis(0), n);
                let q = ArrayView1::from(mesh.quad_weights());
                let cols = slice.mapv(f64::abs).t().dot(&q);
                cols.iter().fold(0.0f64, |m, v| m.max(*v)) * l.powf(3.0 - gamma)
            })
            .fold(0.0f64, f64::max),
    };

    let mut violations = Vec::new();
    let mut flag = |v: f64, name: &str| {
        let ok = v.is_finite();
        if !ok {
            violations.push(format!("{name} is not finite on this grid"));
        }
        ok
    };
    let pass_rho1 = flag(k1, "K1");
    let pass_rho2 = flag(k2, "K2");
    let pass_row = flag(k3, "K3");
    let pass_upper = flag(k4, "K4");
    let pass_lower = flag(k5, "K5");
    let pass_column = column_sup <= k6 * (1.0 + 1e-12);
    if !pass_column {
        violations.push(format!(
            "column bound: sup l^(3-gamma) int |k| dx = {column_sup:e} exceeds max(K4, K5) = {k6:e}"
        ));
    }
    Ok(HypothesisConstants {
        k1,
        k2,
        k3,
        k4,
        k5,
        k6,
        argmax: [a1, a2, a3, a4, a5],
        column_sup,
        pass_rho1,
        pass_rho2,
        pass_row,
        pass_upper,
        pass_lower,
        pass_column,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessReport {
    pub h0: f64,
    pub h1: f64,
    pub bound0: f64,
    pub bound1: f64,
    pub pass0: bool,
    pub pass1: bool,
    /// `‖f_j‖_{L²(0,T;L^∞)}` for `j = 1..4`
    pub f_norms: [f64; 4],
    /// `‖f_j‖_{L^∞(Ω;L²(0,T))}` for `j = 1, 2`
    pub f_norms_linf_l2: [f64; 2],
    /// `H1` evaluated with the `L^∞(Ω;L²(0,T))` norms
    pub h1_linf_l2: f64,
}

/// `H0(s0) <= s0³/2` and `H1(s0) <= s0⁻¹ e^{-λ‖ψ‖∞}/2` with the `f1`, `f2`
/// pair, `L²(0,T;L^∞)` norms, `1 / min l` on `[T1, T2]`, `K1` paired with
/// `ρ1` and `K2` with `ρ2`.
pub fn smallness_check(
    consts: &HypothesisConstants,
    kernels: &KernelSet,
    cfg: &WeightConfig,
    c1_carleman: f64,
    grid: &TimeGrid,
) -> Result<SmallnessReport> {
    if !(c1_carleman > 0.0) {
        return Err(LabError::Domain(format!("C1 must be positive, got {c1_carleman}")));
    }
    let t = grid.horizon();
    let (t1, t2) = (kernels.t1, kernels.t2);
    let s0 = cfg.s0;
    let c1 = c1_lambda(cfg);
    let f_norms = [
        norm_l2_linf(&kernels.f1, grid),
        norm_l2_linf(&kernels.f2, grid),
        norm_l2_linf(&kernels.f3, grid),
        norm_l2_linf(&kernels.f4, grid),
    ];
    let f_norms_linf_l2 = [norm_linf_l2(&kernels.f1, grid), norm_linf_l2(&kernels.f2, grid)];
    let sum12 = f_norms[0].powi(2) + f_norms[1].powi(2);
    let gap = t2 - t1;
    let k345 = consts.k3 * (consts.k4 + consts.k5);
    let t6 = t.powi(6) / 64.0;
    let h0 = 6.0
        * c1_carleman
        * ((t6 * (1.0 / gap + s0.powf(1.0 + cfg.delta)) + 0.25 * t.powi(3) * s0 * c1) * sum12
            + t6 * gap * consts.k1.powi(2) * f_norms[2].powi(2)
            + k345
            + gap * consts.k2.powi(2) * k345 * f_norms[3].powi(2));
    let minl = m_inf(t1, t2, t)?;
    let pre1 = 6.0 * c1_carleman / minl * s0.powf(-(1.0 + cfg.delta));
    let h1 = pre1 * sum12;
    let h1_linf_l2 = pre1 * (f_norms_linf_l2[0].powi(2) + f_norms_linf_l2[1].powi(2));
    let bound0 = 0.5 * s0.powi(3);
    let bound1 = 0.5 / s0 * (-cfg.lambda * cfg.psi.psi_max).exp();
    Ok(SmallnessReport {
        h0,
        h1,
        bound0,
        bound1,
        pass0: h0 <= bound0,
        pass1: h1 <= bound1,
        f_norms,
        f_norms_linf_l2,
        h1_linf_l2,
    })
}

/// `√(K3 K6) l(t)^{γ-3}`; derived for `γ <= 3/2`.
pub fn holmgren_bound(consts: &HypothesisConstants, gamma_exp: f64, t: f64, horizon: f64) -> Result<f64> {
    let l = crate::weights::temporal_weight(t, horizon)?;
    let base = (consts.k3 * consts.k6).sqrt();
    if gamma_exp == 3.0 {
        return Ok(base);
    }
    if l == 0.0 {
        return Err(LabError::SingularWeight { t });
    }
    Ok(base * l.powf(gamma_exp - 3.0))
}

/// Exact weighted Schur bound `√(max row sum · max column sum)` of `B` at one
/// level, in the quadrature `L²` norm.
pub fn schur_bound(kernels: &KernelSet, level: usize, mesh: &Mesh) -> f64 {
    match kernels.k.slice(level) {
        None => 0.0,
        Some(k) => {
            let q = ArrayView1::from(mesh.quad_weights());
            let a = k.mapv(f64::abs);
            let rows = a.dot(&q);
            let cols = a.t().dot(&q);
            let rmax = rows.iter().fold(0.0f64, |m, v| m.max(*v));
            let cmax = cols.iter().fold(0.0f64, |m, v| m.max(*v));
            (rmax * cmax).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{l2_sq, Geometry};
    use crate::weights::PseudoConvexFn;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, nt: usize) -> (Mesh, TimeGrid, WeightConfig) {
        let mesh = Mesh::build(Geometry::Interval, n, "right").unwrap();
        let grid = TimeGrid::new(1.0, nt).unwrap();
        let cfg = WeightConfig::new(1.0, 1.0, 1.0, PseudoConvexFn::toward_gamma(&mesh)).unwrap();
        (mesh, grid, cfg)
    }

    #[test]
    fn apply_b_examples() {
        let (mesh, _, _) = setup(101, 4);
        let nn = mesh.nnodes();
        let ones = Array2::from_elem((nn, nn), 1.0);
        let zero = Array2::zeros((nn, nn));
        let u1 = mesh.sample(|_| 1.0);
        assert!(apply_b(u1.view(), zero.view(), &mesh).unwrap().iter().all(|v| *v == 0.0));
        let b = apply_b(u1.view(), ones.view(), &mesh).unwrap();
        assert!(b.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let uy = mesh.sample(|x| x[0]);
        let b = apply_b(uy.view(), ones.view(), &mesh).unwrap();
        assert!(b.iter().all(|v| (v - 0.5).abs() < 1e-4));
        assert!(apply_b(uy.view(), Array2::zeros((3, 3)).view(), &mesh).is_err());
    }

    #[test]
    fn calb_examples() {
        let (mesh, grid, _) = setup(11, 40);
        let mut ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap();
        let u = grid.sample(&mesh, |_, x| x[0]);
        let z = apply_calb(&u, &ks, 0.3, &mesh, &grid).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        ks.f1.fill(1.0);
        let b = apply_calb(&u, &ks, 0.7, &mesh, &grid).unwrap();
        for (v, x) in b.iter().zip(mesh.coords()) {
            assert_relative_eq!(*v, x[0], epsilon = 1e-14);
        }
        let mut ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap();
        ks.f3.fill(1.0);
        ks.rho1.fill(1.0);
        let ones = grid.sample(&mesh, |_, _| 1.0);
        let b = apply_calb(&ones, &ks, 0.1, &mesh, &grid).unwrap();
        assert!(b.iter().all(|v| (v - 0.25).abs() < 1e-6));
    }

    fn random_kernels(mesh: &Mesh, grid: &TimeGrid, rng: &mut ChaCha8Rng) -> KernelSet {
        let mut ks = KernelSet::zero(mesh, grid, 0.3, 0.55, 1.5).unwrap();
        for f in [&mut ks.f1, &mut ks.f2, &mut ks.f3, &mut ks.f4, &mut ks.rho1, &mut ks.rho2] {
            f.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        }
        let nn = mesh.nnodes();
        ks.k = Kernel::Dense(Array3::from_shape_fn((grid.levels(), nn, nn), |_| rng.gen_range(-1.0..1.0)));
        ks
    }

    #[test]
    fn transpose_is_adjoint() {
        let (mesh, grid, _) = setup(7, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ks = random_kernels(&mesh, &grid, &mut rng);
        let op = NonlocalOperator::new(ks, &mesh, &grid).unwrap();
        let u = Array2::from_shape_fn((grid.levels(), mesh.nnodes()), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::from_shape_fn((grid.levels(), mesh.nnodes()), |_| rng.gen_range(-1.0..1.0));
        let lhs = (&op.apply(&u).unwrap() * &y).sum();
        let rhs = (&u * &op.apply_transpose(&y).unwrap()).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn calb_is_linear() {
        let (mesh, grid, _) = setup(9, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ks = random_kernels(&mesh, &grid, &mut rng);
        let op = NonlocalOperator::new(ks, &mesh, &grid).unwrap();
        for _ in 0..5 {
            let u = Array2::from_shape_fn((grid.levels(), mesh.nnodes()), |_| rng.gen_range(-1.0..1.0));
            let v = Array2::from_shape_fn((grid.levels(), mesh.nnodes()), |_| rng.gen_range(-1.0..1.0));
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combo = &u * a + &v * b;
            let lhs = op.apply(&combo).unwrap();
            let rhs = op.apply(&u).unwrap() * a + op.apply(&v).unwrap() * b;
            let scale = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!((&lhs - &rhs).iter().all(|d| d.abs() <= 1e-12 * scale));
        }
    }

    #[test]
    fn zero_kernels_give_zero_constants() {
        let (mesh, grid, cfg) = setup(11, 20);
        let ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap();
        let c = hypothesis_constants(&ks, &cfg, &mesh, &grid).unwrap();
        assert_eq!([c.k1, c.k2, c.k3, c.k4, c.k5, c.k6], [0.0; 6]);
        assert!(c.all_finite() && c.pass_column);
        let s = smallness_check(&c, &ks, &cfg, 1.0, &grid).unwrap();
        assert_eq!((s.h0, s.h1), (0.0, 0.0));
        assert!(s.pass0 && s.pass1);
    }

    #[test]
    fn rho_equal_to_weight_gives_unit_k1() {
        let (mesh, grid, cfg) = setup(11, 20);
        let mut ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap();
        for n in 1..grid.nt() {
            for x in 0..mesh.nnodes() {
                ks.rho1[[n, x]] = (cfg.s0 * cfg.alpha_at(grid.time(n), x).unwrap()).exp();
            }
        }
        let c = hypothesis_constants(&ks, &cfg, &mesh, &grid).unwrap();
        assert_relative_eq!(c.k1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn k4_of_upper_saturating_kernel_at_most_measure() {
        let (mesh, grid, cfg) = setup(21, 20);
        let gamma = 1.5;
        let c1 = c1_lambda(&cfg);
        let nn = mesh.nnodes();
        let mut k = Array3::zeros((grid.levels(), nn, nn));
        for n in 1..grid.nt() {
            let t = grid.time(n);
            let l = t * (1.0 - t);
            for x in 0..nn {
                for y in 0..nn {
                    if cfg.psi.values[x] > cfg.psi.values[y] {
                        k[[n, x, y]] = l.powf(3.0 - gamma) * (-2.0 * cfg.s0 * c1 / l).exp();
                    }
                }
            }
        }
        let mut ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, gamma).unwrap();
        ks.k = Kernel::Dense(k);
        let c = hypothesis_constants(&ks, &cfg, &mesh, &grid).unwrap();
        assert!(c.k4 <= 1.0 && c.k4 > 0.0);
        assert_eq!(c.k5, 0.0);
        assert_eq!(c.k6, c.k4);
        // re-evaluation at the argmax is exact
        for (j, which) in [Constant::K3, Constant::K4].into_iter().enumerate() {
            let a = c.argmax[2 + j].unwrap();
            let r = defining_ratio(which, a.level, a.node, &ks, &cfg, &mesh, &grid);
            assert_relative_eq!(r, c.get(which), max_relative = 1e-12);
        }
    }

    #[test]
    fn holmgren_examples() {
        let (mesh, grid, cfg) = setup(11, 20);
        let ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 3.0).unwrap();
        let c = hypothesis_constants(&ks, &cfg, &mesh, &grid).unwrap();
        assert_eq!(holmgren_bound(&c, 1.5, 0.5, 1.0).unwrap(), 0.0);
        let mut c2 = c.clone();
        c2.k3 = 4.0;
        c2.k6 = 9.0;
        assert_eq!(holmgren_bound(&c2, 3.0, 0.1, 1.0).unwrap(), 6.0);
        assert_eq!(holmgren_bound(&c2, 3.0, 0.7, 1.0).unwrap(), 6.0);
        assert!(matches!(holmgren_bound(&c2, 1.0, 0.0, 1.0), Err(LabError::SingularWeight { .. })));
    }

    #[test]
    fn schur_bound_dominates_random_ratios() {
        let (mesh, grid, _) = setup(15, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ks = random_kernels(&mesh, &grid, &mut rng);
        let op = NonlocalOperator::new(ks.clone(), &mesh, &grid).unwrap();
        for n in 0..grid.levels() {
            let bound = schur_bound(&ks, n, &mesh);
            for _ in 0..20 {
                let v: Array1<f64> = (0..mesh.nnodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let bv = op.b_level(v.view(), n);
                assert!(l2_sq(bv.view(), &mesh).sqrt() <= bound * l2_sq(v.view(), &mesh).sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn norms_of_constant_field() {
        let (mesh, grid, _) = setup(5, 10);
        let f = grid.sample(&mesh, |_, _| 2.0);
        assert_relative_eq!(norm_l2_linf(&f, &grid), 2.0, epsilon = 1e-14);
        assert_relative_eq!(norm_linf_l2(&f, &grid), 2.0, epsilon = 1e-14);
        assert_relative_eq!(norm_window_l2_linf(&f, &grid, 0.25, 0.5).unwrap(), 1.0, epsilon = 1e-14);
    }
}
