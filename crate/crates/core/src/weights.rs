//! Temporal weight `l`, pseudo-convex function `ψ`, Carleman weights
//! `φ_λ = e^{λψ}` and `α_λ = (e^{λψ} - e^{2λ‖ψ‖∞}) / l`, and scalar
//! constants derived from them.

use crate::error::{LabError, Result};
use crate::mesh::{conormal_at, EllipticCoefficients, Mesh, Side};

/// `l(t) = t (T - t)`.
pub fn temporal_weight(t: f64, horizon: f64) -> Result<f64> {
    if !(0.0..=horizon).contains(&t) {
        return Err(LabError::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    Ok(t * (horizon - t))
}

/// `l'(t) = T - 2t`.
pub fn temporal_weight_derivative(t: f64, horizon: f64) -> f64 {
    horizon - 2.0 * t
}

/// `inf_{[T1, T2]} l`, attained at an endpoint.
pub fn m_inf(t1: f64, t2: f64, horizon: f64) -> Result<f64> {
    if !(0.0 < t1 && t1 < t2 && t2 < horizon) {
        return Err(LabError::Domain(format!(
            "need 0 < T1 < T2 < T, got T1 = {t1}, T2 = {t2}, T = {horizon}"
        )));
    }
    Ok((t1 * (horizon - t1)).min(t2 * (horizon - t2)))
}

/// `e^{λψ}` for a sample value of `ψ`.
pub fn phi(psi_x: f64, lambda: f64) -> f64 {
    (lambda * psi_x).exp()
}

/// Samples of `ψ` and `∇ψ` on the closed mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoConvexFn {
    pub values: Vec<f64>,
    pub gradient: Vec<[f64; 2]>,
    pub psi_max: f64,
    pub psi_min: f64,
}

impl PseudoConvexFn {
    /// The distance-like function that grows toward `Γ`: `x` or `1 - x` on
    /// the interval, `x1`, `1 - x1`, `x2` or `1 - x2` on the square.
    pub fn toward_gamma(mesh: &Mesh) -> PseudoConvexFn {
        let side = mesh.gamma_side();
        let (values, grad): (Vec<f64>, [f64; 2]) = match side {
            Side::Right => (mesh.coords().iter().map(|x| x[0]).collect(), [1.0, 0.0]),
            Side::Left => (mesh.coords().iter().map(|x| 1.0 - x[0]).collect(), [-1.0, 0.0]),
            Side::Top => (mesh.coords().iter().map(|x| x[1]).collect(), [0.0, 1.0]),
            Side::Bottom => (mesh.coords().iter().map(|x| 1.0 - x[1]).collect(), [0.0, -1.0]),
        };
        let gradient = vec![grad; values.len()];
        Self::with_gradient(values, gradient)
    }

    pub fn constant(mesh: &Mesh, c: f64) -> PseudoConvexFn {
        Self::with_gradient(vec![c; mesh.nnodes()], vec![[0.0; 2]; mesh.nnodes()])
    }

    /// Arbitrary samples; the gradient is taken by second-order differences.
    pub fn from_samples(mesh: &Mesh, values: Vec<f64>) -> Result<PseudoConvexFn> {
        mesh.check_field("psi samples", values.len())?;
        let arr = ndarray::Array1::from(values.clone());
        let gradient = mesh.gradient(arr.view());
        Ok(Self::with_gradient(values, gradient))
    }

    fn with_gradient(values: Vec<f64>, gradient: Vec<[f64; 2]>) -> PseudoConvexFn {
        let psi_max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let psi_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        PseudoConvexFn { values, gradient, psi_max, psi_min }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig {
    pub lambda: f64,
    pub s0: f64,
    pub delta: f64,
    pub horizon: f64,
    pub psi: PseudoConvexFn,
    pub lambda_hat: Option<f64>,
    pub s0_hat: Option<f64>,
}

impl WeightConfig {
    pub fn new(lambda: f64, s0: f64, horizon: f64, psi: PseudoConvexFn) -> Result<WeightConfig> {
        Self::with_delta(lambda, s0, 0.5, horizon, psi)
    }

    pub fn with_delta(
        lambda: f64,
        s0: f64,
        delta: f64,
        horizon: f64,
        psi: PseudoConvexFn,
    ) -> Result<WeightConfig> {
        if !(lambda >= 1.0) {
            return Err(LabError::Domain(format!("lambda must be >= 1, got {lambda}")));
        }
        if !(s0 > 0.0) {
            return Err(LabError::Domain(format!("s0 must be positive, got {s0}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(LabError::Domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(horizon > 0.0) {
            return Err(LabError::Domain(format!("T must be positive, got {horizon}")));
        }
        Ok(WeightConfig { lambda, s0, delta, horizon, psi, lambda_hat: None, s0_hat: None })
    }

    /// `e^{2λ‖ψ‖∞}`
    pub fn top(&self) -> f64 {
        (2.0 * self.lambda * self.psi.psi_max).exp()
    }

    /// `e^{λ‖ψ‖∞}`
    pub fn phi_max(&self) -> f64 {
        (self.lambda * self.psi.psi_max).exp()
    }

    pub fn phi_at(&self, node: usize) -> f64 {
        phi(self.psi.values[node], self.lambda)
    }

    /// `α_λ(t, x)` at a mesh node.
    pub fn alpha_at(&self, t: f64, node: usize) -> Result<f64> {
        alpha(t, self.psi.values[node], self)
    }

    /// `l(t) α_λ(t, x)`: the time-independent numerator, always negative.
    pub fn alpha_numerator(&self, node: usize) -> f64 {
        alpha_numerator(self.psi.values[node], self)
    }

    pub fn carleman_factor_at(&self, t: f64, node: usize, s: f64) -> Result<f64> {
        carleman_factor(t, self.psi.values[node], s, self)
    }
}

fn alpha_numerator(psi_x: f64, cfg: &WeightConfig) -> f64 {
    phi(psi_x, cfg.lambda) - cfg.top()
}

/// `α_λ(t, x)` for a sample value `ψ(x)`.
pub fn alpha(t: f64, psi_x: f64, cfg: &WeightConfig) -> Result<f64> {
    let l = temporal_weight(t, cfg.horizon)?;
    if l == 0.0 {
        return Err(LabError::SingularWeight { t });
    }
    Ok(alpha_numerator(psi_x, cfg) / l)
}

/// `exp[2 s α_λ(t, x)]`, defined as 0 at `t ∈ {0, T}`.
pub fn carleman_factor(t: f64, psi_x: f64, s: f64, cfg: &WeightConfig) -> Result<f64> {
    if !(s > 0.0) {
        return Err(LabError::Domain(format!("s must be positive, got {s}")));
    }
    let l = temporal_weight(t, cfg.horizon)?;
    if l == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * s * (alpha_numerator(psi_x, cfg) / l)).exp())
}

/// `c_{1,λ}(ψ) = e^{2λ‖ψ‖∞} - e^{λψ_m}`.
pub fn c1_lambda(cfg: &WeightConfig) -> f64 {
    cfg.top() - phi(cfg.psi.psi_min, cfg.lambda)
}

/// Lower bound `exp[-2 s c_{1,λ} / l(t)]` of the Carleman factor.
pub fn carleman_lower_bound(t: f64, s: f64, cfg: &WeightConfig) -> Result<f64> {
    let l = temporal_weight(t, cfg.horizon)?;
    if l == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * s * (-c1_lambda(cfg) / l)).exp())
}

/// Worst offender of one admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offender {
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub interior_positive: bool,
    pub gradient_nonvanishing: bool,
    pub conormal_nonpositive: bool,
    /// smallest interior value of `ψ`
    pub worst_interior: Option<Offender>,
    /// smallest `|∇ψ|`
    pub worst_gradient: Option<Offender>,
    /// largest `D_{ν_A} ψ` on `∂Ω \ Γ`
    pub worst_conormal: Option<Offender>,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.interior_positive && self.gradient_nonvanishing && self.conormal_nonpositive
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fmt = |o: &Option<Offender>| {
            o.map(|o| format!("node {} value {:e}", o.node, o.value)).unwrap_or_default()
        };
        if !self.interior_positive {
            out.push(format!("psi not positive in the interior ({})", fmt(&self.worst_interior)));
        }
        if !self.gradient_nonvanishing {
            out.push(format!("gradient of psi vanishes ({})", fmt(&self.worst_gradient)));
        }
        if !self.conormal_nonpositive {
            out.push(format!(
                "conormal derivative of psi positive off the observed patch ({})",
                fmt(&self.worst_conormal)
            ));
        }
        out
    }
}

/// Checks `ψ > 0` in Ω, `|∇ψ| > 0` on the closed mesh and `D_{ν_A}ψ <= 0`
/// on `∂Ω \ Γ`. At corners every adjacent side outside `Γ` is checked.
pub fn check_psi_admissible(
    psi: &PseudoConvexFn,
    mesh: &Mesh,
    coeffs: &EllipticCoefficients,
) -> Result<AdmissibilityReport> {
    mesh.check_field("psi samples", psi.values.len())?;
    mesh.check_field("psi gradient", psi.gradient.len())?;
    mesh.check_field("coefficients", coeffs.a.len())?;
    let scale = 1.0 + psi.psi_max;
    let tol = 1e-10 * scale;

    let mut worst_interior: Option<Offender> = None;
    for &k in mesh.interior() {
        let v = psi.values[k];
        if worst_interior.map_or(true, |w| v < w.value) {
            worst_interior = Some(Offender { node: k, value: v });
        }
    }
    let interior_positive = worst_interior.map_or(true, |w| w.value > 0.0);

    let mut worst_gradient: Option<Offender> = None;
    for (k, g) in psi.gradient.iter().enumerate() {
        let v = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if worst_gradient.map_or(true, |w| v < w.value) {
            worst_gradient = Some(Offender { node: k, value: v });
        }
    }
    let gradient_nonvanishing = worst_gradient.map_or(true, |w| w.value > tol);

    let gamma = mesh.gamma_side();
    let mut worst_conormal: Option<Offender> = None;
    for &k in mesh.boundary() {
        if mesh.gamma_mask()[k] {
            continue;
        }
        for side in mesh.sides_of(k) {
            if side == gamma {
                continue;
            }
            let nu = side.outward_normal();
            let mut v = 0.0;
            for i in 0..mesh.dim() {
                let c: f64 = (0..mesh.dim()).map(|j| coeffs.a[k][i][j] * nu[j]).sum();
                v += c * psi.gradient[k][i];
            }
            if worst_conormal.map_or(true, |w| v > w.value) {
                worst_conormal = Some(Offender { node: k, value: v });
            }
        }
    }
    let conormal_nonpositive = worst_conormal.map_or(true, |w| w.value <= tol);

    Ok(AdmissibilityReport {
        interior_positive,
        gradient_nonvanishing,
        conormal_nonpositive,
        worst_interior,
        worst_gradient,
        worst_conormal,
    })
}

/// Conormal derivative of sampled `ψ` recomputed from its values rather than
/// the stored gradient; used to cross-check `from_samples` constructions.
pub fn psi_conormal_from_values(
    psi: &PseudoConvexFn,
    mesh: &Mesh,
    coeffs: &EllipticCoefficients,
    node: usize,
    side: Side,
) -> f64 {
    let arr = ndarray::Array1::from(psi.values.clone());
    conormal_at(arr.view(), coeffs, mesh, node, side.outward_normal())
}
