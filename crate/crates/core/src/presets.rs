//! Named coefficient and kernel presets, manufactured scenarios and smooth
//! random fields.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array2, Array3, Ix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::forward::{manufacture, relative_error, ForwardSolver, ProblemData};
use crate::io::read_dense;
use crate::mesh::{l2_sq_space_time, EllipticCoefficients, Geometry, Mesh, SpaceTimeField, TimeGrid};
use crate::nonlocal::{Kernel, KernelSet};
use crate::weights::{c1_lambda, WeightConfig};

/// Deterministic generator used by every randomized experiment.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientPreset {
    /// `a = I`, `b = 0`, `a0 = 0`
    Identity,
    /// `a = I` with constant `b` and `a0`
    Constant,
    /// `a = (1 + c x1) I` plus a small off-diagonal term in 2D, constant
    /// `b` and `a0`
    Variable,
}

impl FromStr for CoefficientPreset {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(CoefficientPreset::Identity),
            "constant" => Ok(CoefficientPreset::Constant),
            "variable" => Ok(CoefficientPreset::Variable),
            _ => Err(LabError::Config(format!(
                "unknown coefficient preset {s:?} (expected identity, constant or variable)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientParams {
    pub b: [f64; 2],
    pub a0: f64,
    pub variation: f64,
}

impl Default for CoefficientParams {
    fn default() -> Self {
        CoefficientParams { b: [0.0; 2], a0: 0.0, variation: 0.5 }
    }
}

pub fn coefficients(
    preset: CoefficientPreset,
    params: &CoefficientParams,
    mesh: &Mesh,
) -> Result<EllipticCoefficients> {
    let p = *params;
    match preset {
        CoefficientPreset::Identity => Ok(EllipticCoefficients::identity(mesh)),
        CoefficientPreset::Constant => {
            EllipticCoefficients::from_fn(mesh, |_| ([[1.0, 0.0], [0.0, 1.0]], p.b, p.a0))
        }
        CoefficientPreset::Variable => {
            if !(p.variation > -1.0) {
                return Err(LabError::Config(format!("variation must exceed -1, got {}", p.variation)));
            }
            let off = if mesh.dim() == 2 { 0.1 * p.variation.abs().min(1.0) } else { 0.0 };
            EllipticCoefficients::from_fn(mesh, |x| {
                let d = 1.0 + p.variation * x[0];
                let e = 1.0 + 0.5 * p.variation.abs() * x[1];
                ([[d, off], [off, e]], p.b, p.a0)
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPreset {
    Zero,
    /// `k = amp sin²(πt/T) exp(-|x-y|²/(2w²))`
    SeparableGaussian,
    /// `k = κ l^{γ-3}` scaled by `exp[-2 s0 c1/l]` where `ψ(x) > ψ(y)`, so
    /// both column conditions hold with constant `κ |Ω|`.
    HypothesisSaturating,
    /// `k` read from a dense array file.
    File,
}

impl FromStr for KernelPreset {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(KernelPreset::Zero),
            "separable-gaussian" => Ok(KernelPreset::SeparableGaussian),
            "hypothesis-saturating" => Ok(KernelPreset::HypothesisSaturating),
            "file" => Ok(KernelPreset::File),
            _ => Err(LabError::Config(format!(
                "unknown kernel preset {s:?} (expected zero, separable-gaussian, hypothesis-saturating or file)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub amp: f64,
    pub width: f64,
    pub kappa: f64,
    /// Amplitudes of `f1..f4`.
    pub f_amp: [f64; 4],
    /// `ρj = amp_j exp[s0 α]`, so `K1 = amp_1` and `K2 = amp_2`.
    pub rho_amp: [f64; 2],
    pub path: Option<PathBuf>,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            amp: 0.1,
            width: 0.2,
            kappa: 0.05,
            f_amp: [0.1; 4],
            rho_amp: [1.0; 2],
            path: None,
        }
    }
}

/// Builds the kernel bundle of a preset. Every preset except `zero` uses
/// the same `f_j` and `ρ_j` profiles and differs only in `k`.
#[allow(clippy::too_many_arguments)]
pub fn kernels(
    preset: KernelPreset,
    params: &KernelParams,
    mesh: &Mesh,
    grid: &TimeGrid,
    cfg: &WeightConfig,
    t1: f64,
    t2: f64,
    gamma_exp: f64,
) -> Result<KernelSet> {
    let mut ks = KernelSet::zero(mesh, grid, t1, t2, gamma_exp)?;
    if preset == KernelPreset::Zero {
        return Ok(ks);
    }
    mesh.check_field("psi samples", cfg.psi.len())?;
    let horizon = grid.horizon();
    let levels = grid.levels();
    let nn = mesh.nnodes();
    for (j, f) in [&mut ks.f1, &mut ks.f2, &mut ks.f3, &mut ks.f4].into_iter().enumerate() {
        let a = params.f_amp[j];
        *f = grid.sample(mesh, |t, x| {
            a * (1.0 + 0.5 * (PI * t / horizon + j as f64).cos()) * (1.0 + 0.25 * x[0])
        });
    }
    for (j, rho) in [&mut ks.rho1, &mut ks.rho2].into_iter().enumerate() {
        let a = params.rho_amp[j];
        let mut r = Array2::zeros((levels, nn));
        for n in 1..grid.nt() {
            let t = grid.time(n);
            for k in 0..nn {
                r[[n, k]] = a * (cfg.s0 * cfg.alpha_at(t, k)?).exp();
            }
        }
        *rho = r;
    }
    let lt = |n: usize| {
        let t = grid.time(n);
        t * (horizon - t)
    };
    ks.k = match preset {
        KernelPreset::Zero => unreachable!(),
        KernelPreset::SeparableGaussian => {
            if !(params.width > 0.0) {
                return Err(LabError::Config(format!("width must be positive, got {}", params.width)));
            }
            let c = mesh.coords();
            let w2 = 2.0 * params.width * params.width;
            let mut k = Array3::zeros((levels, nn, nn));
            for n in 0..levels {
                let s = (PI * grid.time(n) / horizon).sin();
                let tf = params.amp * s * s;
                for x in 0..nn {
                    for y in 0..nn {
                        let d2 = (c[x][0] - c[y][0]).powi(2) + (c[x][1] - c[y][1]).powi(2);
                        k[[n, x, y]] = tf * (-d2 / w2).exp();
                    }
                }
            }
            Kernel::Dense(k)
        }
        KernelPreset::HypothesisSaturating => {
            let c1 = c1_lambda(cfg);
            let psi = &cfg.psi.values;
            let mut k = Array3::zeros((levels, nn, nn));
            for n in 1..grid.nt() {
                let l = lt(n);
                let base = params.kappa * l.powf(gamma_exp - 3.0);
                let damp = (-2.0 * cfg.s0 * c1 / l).exp();
                for x in 0..nn {
                    for y in 0..nn {
                        k[[n, x, y]] = if psi[x] > psi[y] { base * damp } else { base };
                    }
                }
            }
            Kernel::Dense(k)
        }
        KernelPreset::File => {
            let path = params
                .path
                .as_ref()
                .ok_or_else(|| LabError::Config("kernel preset file needs a path".into()))?;
            let a = read_dense(path)?
                .into_dimensionality::<Ix3>()
                .map_err(|_| LabError::Io(format!("{}: kernel file must hold a rank-3 array", path.display())))?;
            Kernel::Dense(a)
        }
    };
    ks.label = match preset {
        KernelPreset::Zero => "zero",
        KernelPreset::SeparableGaussian => "separable-gaussian",
        KernelPreset::HypothesisSaturating => "hypothesis-saturating",
        KernelPreset::File => "file",
    }
    .into();
    ks.validate(mesh, grid)?;
    Ok(ks)
}

/// `e^{-t} sin(πx)` on the interval, `e^{-t} sin(πx1) sin(πx2)` on the square.
pub fn mms_solution(mesh: &Mesh, grid: &TimeGrid) -> SpaceTimeField {
    let two_d = mesh.geometry() == Geometry::Rectangle;
    grid.sample(mesh, |t, x| {
        let s = (PI * x[0]).sin();
        let s = if two_d { s * (PI * x[1]).sin() } else { s };
        (-t).exp() * s
    })
}

/// The manufactured problem with `g ≡ 0` and truth [`mms_solution`]. With
/// identity coefficients and zero kernels `f0` is the analytic source
/// `(dπ² - 1) e^{-t} sin…`; otherwise it is manufactured discretely.
pub fn mms_problem(
    mesh: &Mesh,
    grid: &TimeGrid,
    coeffs: EllipticCoefficients,
    kernels: KernelSet,
) -> Result<(ProblemData, SpaceTimeField)> {
    let u = mms_solution(mesh, grid);
    let z = Array2::zeros(u.raw_dim());
    let analytic = kernels.is_zero()
        && coeffs.is_diagonal()
        && coeffs.a.iter().all(|a| a[0][0] == 1.0 && (mesh.dim() == 1 || a[1][1] == 1.0))
        && coeffs.b.iter().all(|b| b[0] == 0.0 && b[1] == 0.0)
        && coeffs.a0.iter().all(|v| *v == 0.0);
    let mut p = ProblemData::new(mesh.clone(), *grid, coeffs, kernels, z.clone(), z)?;
    p.f0 = if analytic {
        let d = mesh.dim() as f64;
        &u * (d * PI * PI - 1.0)
    } else {
        manufacture(&p, &u)?
    };
    Ok((p, u))
}

/// `A u*` in closed form for the truth [`mms_solution`] and the
/// coefficient presets.
fn mms_a_exact(preset: CoefficientPreset, params: &CoefficientParams, two_d: bool, t: f64, x: [f64; 2]) -> f64 {
    let e = (-t).exp();
    let (s1, c1) = ((PI * x[0]).sin(), (PI * x[0]).cos());
    let (s2, c2) = if two_d { ((PI * x[1]).sin(), (PI * x[1]).cos()) } else { (1.0, 0.0) };
    let u = e * s1 * s2;
    let ux = e * PI * c1 * s2;
    let uy = e * PI * s1 * c2;
    let uxx = -PI * PI * u;
    let uyy = if two_d { -PI * PI * u } else { 0.0 };
    let uxy = e * PI * PI * c1 * c2;
    let (b, a0) = match preset {
        CoefficientPreset::Identity => ([0.0; 2], 0.0),
        _ => (params.b, params.a0),
    };
    let first = b[0] * ux + if two_d { b[1] * uy } else { 0.0 } + a0 * u;
    match preset {
        CoefficientPreset::Identity | CoefficientPreset::Constant => uxx + uyy + first,
        CoefficientPreset::Variable => {
            let v = params.variation;
            let d = 1.0 + v * x[0];
            let mut au = v * ux + d * uxx + first;
            if two_d {
                let g = 1.0 + 0.5 * v.abs() * x[1];
                let off = 0.1 * v.abs().min(1.0);
                au += 0.5 * v.abs() * uy + g * uyy + 2.0 * off * uxy;
            }
            au
        }
    }
}

/// The [`mms_solution`] problem with `f0 = ∂_t u* - A u* - ℬ u*`, the first
/// two terms in closed form and `ℬ` by its quadrature.
pub fn mms_problem_exact(
    mesh: &Mesh,
    grid: &TimeGrid,
    preset: CoefficientPreset,
    params: &CoefficientParams,
    kernels: KernelSet,
) -> Result<(ProblemData, SpaceTimeField)> {
    let coeffs = coefficients(preset, params, mesh)?;
    let u = mms_solution(mesh, grid);
    let z = Array2::zeros(u.raw_dim());
    let mut p = ProblemData::new(mesh.clone(), *grid, coeffs, kernels, z.clone(), z)?;
    let two_d = mesh.dim() == 2;
    let bu = crate::nonlocal::NonlocalOperator::new(p.kernels.clone(), mesh, grid)?.apply(&u)?;
    let a = grid.sample(mesh, |t, x| mms_a_exact(preset, params, two_d, t, x));
    p.f0 = -&u - &a - &bu;
    Ok((p, u))
}

/// One level of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub n: usize,
    pub nt: usize,
    pub h: f64,
    pub dt: f64,
    /// Relative discrete `L²(Q_T)` error against the exact solution.
    pub error: f64,
    /// Observed orders against the previous row (NaN on the first).
    pub order_h: f64,
    pub order_dt: f64,
    /// Largest Picard residual ratio and the a-priori contraction factor.
    pub max_ratio: f64,
    pub contraction: f64,
}

/// Refines `(n - 1) ↦ 2(n - 1)` and `nt ↦ 4 nt` per level, so `Δt / h²`
/// stays fixed and the error of an order-(1, 2) scheme drops by 4 per level.
#[allow(clippy::too_many_arguments)]
pub fn mms_refinement(
    geometry: Geometry,
    gamma: &str,
    n: usize,
    nt: usize,
    levels: usize,
    horizon: f64,
    preset: CoefficientPreset,
    params: &CoefficientParams,
    build_kernels: impl Fn(&Mesh, &TimeGrid) -> Result<KernelSet>,
) -> Result<Vec<RefinementRow>> {
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(levels);
    for i in 0..levels {
        let ni = (n - 1) * (1 << i) + 1;
        let nti = nt * (1 << (2 * i));
        let mesh = Mesh::build(geometry, ni, gamma)?;
        let grid = TimeGrid::new(horizon, nti)?;
        let ks = build_kernels(&mesh, &grid)?;
        let (p, u) = mms_problem_exact(&mesh, &grid, preset, params, ks)?;
        let solver = ForwardSolver::new(&p)?;
        let sol = solver.solve(&p.f0, &p.g, u.row(0), Default::default())?;
        let error = relative_error(&sol.u, &u, &mesh, &grid, None)?;
        let b = p.coeffs.b_norm();
        let mu1 = p.coeffs.a0_norm() + b * b / (2.0 * p.coeffs.mu0);
        let max_ratio = sol.residual_ratios().into_iter().fold(0.0f64, f64::max);
        let (order_h, order_dt) = match rows.last() {
            Some(prev) => {
                let r = (prev.error / error).ln();
                (r / (prev.h / mesh.h()).ln(), r / (prev.dt / grid.dt()).ln())
            }
            None => (f64::NAN, f64::NAN),
        };
        rows.push(RefinementRow {
            n: ni,
            nt: nti,
            h: mesh.h(),
            dt: grid.dt(),
            error,
            order_h,
            order_dt,
            max_ratio,
            contraction: solver.contraction_factor(mu1),
        });
    }
    Ok(rows)
}

/// `v = e^{-t} sin²(πx)` (times `sin²(πx2)` on the square) with its exact
/// source `f̃ = D_t v - Δv`. `v` and its gradient vanish on `∂Ω`.
pub fn calibration_pair(mesh: &Mesh, grid: &TimeGrid) -> (SpaceTimeField, SpaceTimeField) {
    let two_d = mesh.geometry() == Geometry::Rectangle;
    let sq = |x: f64| (PI * x).sin().powi(2);
    let lap = |x: f64| 2.0 * PI * PI * (2.0 * PI * x).cos();
    let v = grid.sample(mesh, |t, x| {
        let s = if two_d { sq(x[0]) * sq(x[1]) } else { sq(x[0]) };
        (-t).exp() * s
    });
    let f = grid.sample(mesh, |t, x| {
        let (s, l) = if two_d {
            (sq(x[0]) * sq(x[1]), lap(x[0]) * sq(x[1]) + sq(x[0]) * lap(x[1]))
        } else {
            (sq(x[0]), lap(x[0]))
        };
        -(-t).exp() * (s + l)
    });
    (v, f)
}

/// Smooth random field: a truncated cosine series in space and time with
/// coefficients decaying like `1 / (1 + |mode|²)`. Nonzero on `∂Ω`.
pub fn smooth_random_field<R: Rng>(mesh: &Mesh, grid: &TimeGrid, modes: usize, rng: &mut R) -> SpaceTimeField {
    random_series(mesh, grid, modes, rng, false)
}

/// Smooth random field vanishing on `∂Ω` (sine series in space).
pub fn random_interior_field<R: Rng>(mesh: &Mesh, grid: &TimeGrid, modes: usize, rng: &mut R) -> SpaceTimeField {
    random_series(mesh, grid, modes, rng, true)
}

fn random_series<R: Rng>(mesh: &Mesh, grid: &TimeGrid, modes: usize, rng: &mut R, vanish: bool) -> SpaceTimeField {
    let modes = modes.max(1);
    let my = if mesh.dim() == 2 { modes } else { 1 };
    let lo = usize::from(vanish);
    let mut terms = Vec::new();
    for kx in lo..=modes {
        for ky in lo..=(if mesh.dim() == 2 { my } else { lo }) {
            for kt in 0..=modes {
                let decay = 1.0 + (kx * kx + ky * ky + kt * kt) as f64;
                let c = rng.gen_range(-1.0..1.0) / decay;
                let phase = rng.gen_range(0.0..PI);
                terms.push((kx as f64, ky as f64, kt as f64, c, phase));
            }
        }
    }
    let horizon = grid.horizon();
    let basis = |k: f64, x: f64| if vanish { (k * PI * x).sin() } else { (k * PI * x).cos() };
    let two_d = mesh.dim() == 2;
    let mut out = Array2::zeros((grid.levels(), mesh.nnodes()));
    for n in 0..grid.levels() {
        let t = grid.time(n);
        for (k, x) in mesh.coords().iter().enumerate() {
            let mut s = 0.0;
            for &(kx, ky, kt, c, ph) in &terms {
                let sy = if two_d { basis(ky, x[1]) } else { 1.0 };
                s += c * basis(kx, x[0]) * sy * (kt * PI * t / horizon + ph).cos();
            }
            out[[n, k]] = s;
        }
    }
    out
}

/// Rescales `f` so that `‖f‖_{L²(Q_T)} = target`; zero fields stay zero.
pub fn scale_to_norm(f: &mut SpaceTimeField, target: f64, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
    let norm = l2_sq_space_time(f, mesh, grid, None)?.sqrt();
    if norm > 0.0 {
        f.mapv_inplace(|v| v * target / norm);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_ivp;
    use crate::nonlocal::hypothesis_constants;
    use crate::weights::PseudoConvexFn;
    use approx::assert_relative_eq;

    fn setup(n: usize, nt: usize) -> (Mesh, TimeGrid, WeightConfig) {
        let mesh = Mesh::build(Geometry::Interval, n, "right").unwrap();
        let grid = TimeGrid::new(1.0, nt).unwrap();
        let cfg = WeightConfig::new(1.0, 1.0, 1.0, PseudoConvexFn::toward_gamma(&mesh)).unwrap();
        (mesh, grid, cfg)
    }

    #[test]
    fn preset_names() {
        assert_eq!("zero".parse::<KernelPreset>().unwrap(), KernelPreset::Zero);
        assert!("gauss".parse::<KernelPreset>().is_err());
        assert_eq!("variable".parse::<CoefficientPreset>().unwrap(), CoefficientPreset::Variable);
        assert!("x".parse::<CoefficientPreset>().is_err());
    }

    #[test]
    fn saturating_kernel_meets_column_conditions_with_kappa() {
        let (mesh, grid, cfg) = setup(21, 40);
        let p = KernelParams::default();
        let ks = kernels(KernelPreset::HypothesisSaturating, &p, &mesh, &grid, &cfg, 0.25, 0.5, 1.5).unwrap();
        let c = hypothesis_constants(&ks, &cfg, &mesh, &grid).unwrap();
        assert!(c.k4 <= p.kappa * (1.0 + 1e-9));
        assert!(c.k5 <= p.kappa * (1.0 + 1e-9));
        assert_relative_eq!(c.k1, p.rho_amp[0], max_relative = 1e-12);
        assert_relative_eq!(c.k2, p.rho_amp[1], max_relative = 1e-12);
        assert!(c.pass_column);
    }

    #[test]
    fn gaussian_kernel_breaks_upper_condition() {
        let (mesh, grid, _) = setup(11, 40);
        let cfg = WeightConfig::new(1.0, 3.0, 1.0, PseudoConvexFn::toward_gamma(&mesh)).unwrap();
        let ks = kernels(
            KernelPreset::SeparableGaussian,
            &KernelParams::default(),
            &mesh,
            &grid,
            &cfg,
            0.25,
            0.5,
            1.5,
        )
        .unwrap();
        let c = hypothesis_constants(&ks, &cfg, &mesh, &grid).unwrap();
        assert!(!c.pass_upper);
    }

    #[test]
    fn mms_problem_reproduces_truth() {
        let (mesh, grid, _) = setup(41, 200);
        let ks = KernelSet::zero(&mesh, &grid, 0.25, 0.5, 1.5).unwrap();
        let (p, u) = mms_problem(&mesh, &grid, EllipticCoefficients::identity(&mesh), ks).unwrap();
        let sol = solve_ivp(&p, u.row(0)).unwrap();
        let err = crate::forward::relative_error(&sol.u, &u, &mesh, &grid, None).unwrap();
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn random_fields_are_deterministic_and_vanish_when_asked() {
        let (mesh, grid, _) = setup(17, 10);
        let a = random_interior_field(&mesh, &grid, 4, &mut seeded_rng(3));
        let b = random_interior_field(&mesh, &grid, 4, &mut seeded_rng(3));
        assert_eq!(a, b);
        for &k in mesh.boundary() {
            assert!(a.column(k).iter().all(|v| v.abs() < 1e-12));
        }
        let mut c = smooth_random_field(&mesh, &grid, 3, &mut seeded_rng(4));
        scale_to_norm(&mut c, 2.0, &mesh, &grid).unwrap();
        assert_relative_eq!(l2_sq_space_time(&c, &mesh, &grid, None).unwrap().sqrt(), 2.0, max_relative = 1e-12);
    }
}
