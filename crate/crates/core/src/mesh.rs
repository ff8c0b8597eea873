//! Uniform tensor grids on the unit interval and unit square, the
//! divergence-form operator `A(x, D)`, conormal traces and quadrature.
//!
//! Nodes are numbered `i + j * n` where `i` runs along `x1`. On the interval
//! only `i` is used. Every node is either interior or boundary; the observed
//! part of the boundary (`Γ`) is one side of the domain.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{shape_err, LabError, Result};

/// A scalar sampled on the spatial mesh.
pub type SpaceField = Array1<f64>;
/// A scalar sampled on `(nt + 1)` time levels times the spatial mesh.
pub type SpaceTimeField = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// `(0, 1)`
    Interval,
    /// `(0, 1)^2`
    Rectangle,
}

impl Geometry {
    pub fn dim(self) -> usize {
        match self {
            Geometry::Interval => 1,
            Geometry::Rectangle => 2,
        }
    }
}

/// One side of the domain. On the interval only `Left` (`x = 0`) and
/// `Right` (`x = 1`) exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    /// Parses a side name: `left`/`right`/`bottom`/`top`, with `0`/`1`
    /// accepted for the interval endpoints.
    pub fn parse(spec: &str, geometry: Geometry) -> Result<Side> {
        let side = match spec.trim().to_ascii_lowercase().as_str() {
            "left" | "0" | "x=0" => Side::Left,
            "right" | "1" | "x=1" => Side::Right,
            "bottom" => Side::Bottom,
            "top" => Side::Top,
            other => return Err(LabError::Config(format!("unknown boundary patch `{other}`"))),
        };
        if geometry == Geometry::Interval && matches!(side, Side::Bottom | Side::Top) {
            return Err(LabError::Config(format!(
                "boundary patch `{spec}` does not exist on the interval"
            )));
        }
        Ok(side)
    }

    fn axis(self) -> usize {
        match self {
            Side::Left | Side::Right => 0,
            Side::Bottom | Side::Top => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    geometry: Geometry,
    n: usize,
    h: f64,
    coords: Vec<[f64; 2]>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    gamma_side: Side,
    gamma_mask: Vec<bool>,
    quad: Vec<f64>,
}

impl Mesh {
    /// Builds a uniform grid with `n` nodes per axis (`h = 1 / (n - 1)`).
    pub fn new(geometry: Geometry, n: usize, gamma: Side) -> Result<Mesh> {
        if n < 3 {
            return Err(LabError::Size(format!("need at least 3 nodes per axis, got {n}")));
        }
        if geometry == Geometry::Interval && matches!(gamma, Side::Bottom | Side::Top) {
            return Err(LabError::Config("interval boundary patch must be left or right".into()));
        }
        let h = 1.0 / (n - 1) as f64;
        let w1: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .collect();
        let nnodes = match geometry {
            Geometry::Interval => n,
            Geometry::Rectangle => n * n,
        };
        let mut coords = Vec::with_capacity(nnodes);
        let mut quad = Vec::with_capacity(nnodes);
        let mut is_boundary = Vec::with_capacity(nnodes);
        let mut gamma_mask = Vec::with_capacity(nnodes);
        for k in 0..nnodes {
            let (i, j) = (k % n, k / n);
            let x = [i as f64 * h, j as f64 * h];
            coords.push(x);
            let on_edge = |idx: usize| idx == 0 || idx == n - 1;
            let bnd = match geometry {
                Geometry::Interval => on_edge(i),
                Geometry::Rectangle => on_edge(i) || on_edge(j),
            };
            is_boundary.push(bnd);
            quad.push(match geometry {
                Geometry::Interval => w1[i],
                Geometry::Rectangle => w1[i] * w1[j],
            });
            let on_gamma = match gamma {
                Side::Left => i == 0,
                Side::Right => i == n - 1,
                Side::Bottom => j == 0,
                Side::Top => j == n - 1,
            };
            gamma_mask.push(bnd && on_gamma);
        }
        let interior = (0..nnodes).filter(|&k| !is_boundary[k]).collect();
        let boundary = (0..nnodes).filter(|&k| is_boundary[k]).collect();
        Ok(Mesh {
            geometry,
            n,
            h,
            coords,
            interior,
            boundary,
            is_boundary,
            gamma_side: gamma,
            gamma_mask,
            quad,
        })
    }

    /// `build_mesh` with a textual boundary patch name.
    pub fn build(geometry: Geometry, n: usize, gamma_spec: &str) -> Result<Mesh> {
        let side = Side::parse(gamma_spec, geometry)?;
        Mesh::new(geometry, n, side)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }
    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }
    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn nnodes(&self) -> usize {
        self.coords.len()
    }
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }
    pub fn coord(&self, k: usize) -> [f64; 2] {
        self.coords[k]
    }
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }
    pub fn is_boundary(&self, k: usize) -> bool {
        self.is_boundary[k]
    }
    pub fn gamma_side(&self) -> Side {
        self.gamma_side
    }
    pub fn gamma_mask(&self) -> &[bool] {
        &self.gamma_mask
    }
    pub fn gamma_nodes(&self) -> Vec<usize> {
        (0..self.nnodes()).filter(|&k| self.gamma_mask[k]).collect()
    }
    /// Trapezoidal quadrature weight per node.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad
    }
    /// `|Ω|`
    pub fn measure(&self) -> f64 {
        1.0
    }

    /// Sides that contain node `k` (two at rectangle corners).
    pub fn sides_of(&self, k: usize) -> Vec<Side> {
        let (i, j) = (k % self.n, k / self.n);
        let last = self.n - 1;
        let mut out = Vec::new();
        if i == 0 {
            out.push(Side::Left);
        }
        if i == last {
            out.push(Side::Right);
        }
        if self.geometry == Geometry::Rectangle {
            if j == 0 {
                out.push(Side::Bottom);
            }
            if j == last {
                out.push(Side::Top);
            }
        }
        out
    }

    /// Outward normal used for traces at node `k`: the `Γ` side wins at
    /// corners it contains, otherwise the first side in
    /// `Left, Right, Bottom, Top` order.
    pub fn outward_normal(&self, k: usize) -> Option<[f64; 2]> {
        let sides = self.sides_of(k);
        if sides.is_empty() {
            return None;
        }
        let side = if sides.contains(&self.gamma_side) {
            self.gamma_side
        } else {
            sides[0]
        };
        Some(side.outward_normal())
    }

    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        (0..self.nnodes()).filter(|&k| self.sides_of(k).contains(&side)).collect()
    }

    /// Trapezoidal weights along the `Γ` side, aligned with
    /// [`Mesh::gamma_nodes`]. On the interval `Γ` is a point with weight 1.
    pub fn gamma_weights(&self) -> Vec<f64> {
        let nodes = self.gamma_nodes();
        match self.geometry {
            Geometry::Interval => vec![1.0; nodes.len()],
            Geometry::Rectangle => {
                let along = 1 - self.gamma_side.axis();
                nodes
                    .iter()
                    .map(|&k| {
                        let idx = if along == 0 { k % self.n } else { k / self.n };
                        if idx == 0 || idx == self.n - 1 {
                            0.5 * self.h
                        } else {
                            self.h
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * self.n
    }

    /// Samples `f(x)` at every node.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> SpaceField {
        self.coords.iter().map(|&x| f(x)).collect()
    }

    pub(crate) fn check_field(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.nnodes() {
            return Err(shape_err(what, self.nnodes(), len));
        }
        Ok(())
    }

    /// Step from node `k` along `axis` by `delta` nodes, if it stays on the grid.
    fn shift(&self, k: usize, axis: usize, delta: isize) -> Option<usize> {
        let (i, j) = ((k % self.n) as isize, (k / self.n) as isize);
        let (ni, nj) = if axis == 0 { (i + delta, j) } else { (i, j + delta) };
        let lim = self.n as isize;
        if ni < 0 || ni >= lim || nj < 0 || nj >= lim {
            return None;
        }
        Some(self.node_index(ni as usize, nj as usize))
    }

    fn axis_index(&self, k: usize, axis: usize) -> usize {
        if axis == 0 {
            k % self.n
        } else {
            k / self.n
        }
    }

    /// First derivative along `axis` at node `k`: centered where both
    /// neighbours exist, one-sided 3-point (second order) otherwise.
    pub fn d1(&self, f: ArrayView1<f64>, k: usize, axis: usize) -> f64 {
        let h = self.h;
        let idx = self.axis_index(k, axis);
        let at = |d: isize| f[self.shift(k, axis, d).unwrap()];
        if idx == 0 {
            (-3.0 * f[k] + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if idx == self.n - 1 {
            (3.0 * f[k] - 4.0 * at(-1) + at(-2)) / (2.0 * h)
        } else {
            (at(1) - at(-1)) / (2.0 * h)
        }
    }

    /// Stencil of [`Mesh::d1`] as `(node, coefficient)` pairs.
    pub fn d1_stencil(&self, k: usize, axis: usize) -> Vec<(usize, f64)> {
        let h = self.h;
        let idx = self.axis_index(k, axis);
        let at = |d: isize| self.shift(k, axis, d).unwrap();
        if idx == 0 {
            vec![(k, -1.5 / h), (at(1), 2.0 / h), (at(2), -0.5 / h)]
        } else if idx == self.n - 1 {
            vec![(k, 1.5 / h), (at(-1), -2.0 / h), (at(-2), 0.5 / h)]
        } else {
            vec![(at(1), 0.5 / h), (at(-1), -0.5 / h)]
        }
    }

    /// Second derivative along `axis`: centered where possible, one-sided
    /// 4-point (second order) at the ends of the axis.
    pub fn d2(&self, f: ArrayView1<f64>, k: usize, axis: usize) -> f64 {
        let h2 = self.h * self.h;
        let idx = self.axis_index(k, axis);
        let at = |d: isize| f[self.shift(k, axis, d).unwrap()];
        let wide = self.n >= 4;
        if idx == 0 {
            if wide {
                (2.0 * f[k] - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
            } else {
                (f[k] - 2.0 * at(1) + at(2)) / h2
            }
        } else if idx == self.n - 1 {
            if wide {
                (2.0 * f[k] - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / h2
            } else {
                (f[k] - 2.0 * at(-1) + at(-2)) / h2
            }
        } else {
            (at(1) - 2.0 * f[k] + at(-1)) / h2
        }
    }

    /// Gradient at every node (second order everywhere).
    pub fn gradient(&self, f: ArrayView1<f64>) -> Vec<[f64; 2]> {
        (0..self.nnodes())
            .map(|k| {
                let mut g = [0.0; 2];
                for (axis, gi) in g.iter_mut().enumerate().take(self.dim()) {
                    *gi = self.d1(f, k, axis);
                }
                g
            })
            .collect()
    }

    /// Sum of squared second derivatives `Σ_{i,j} |D_i D_j f|^2` at every node.
    pub fn hessian_sq(&self, f: ArrayView1<f64>) -> Vec<f64> {
        let dim = self.dim();
        let mut out: Vec<f64> = (0..self.nnodes())
            .map(|k| (0..dim).map(|a| self.d2(f, k, a).powi(2)).sum())
            .collect();
        if dim == 2 {
            let dx: Array1<f64> = (0..self.nnodes()).map(|k| self.d1(f, k, 0)).collect();
            for (k, o) in out.iter_mut().enumerate() {
                let mixed = self.d1(dx.view(), k, 1);
                *o += 2.0 * mixed * mixed;
            }
        }
        out
    }

    /// Edge-based discrete `‖∇w‖²` (forward differences, trapezoidal
    /// weights across the edge direction). This is the norm in which the
    /// discrete Gårding inequality holds.
    pub fn grad_norm_sq(&self, w: ArrayView1<f64>) -> f64 {
        let h = self.h;
        let n = self.n;
        let cross = |idx: usize| if idx == 0 || idx == n - 1 { 0.5 * h } else { h };
        let mut acc = 0.0;
        match self.geometry {
            Geometry::Interval => {
                for i in 0..n - 1 {
                    let d = (w[i + 1] - w[i]) / h;
                    acc += h * d * d;
                }
            }
            Geometry::Rectangle => {
                for j in 0..n {
                    for i in 0..n - 1 {
                        let d = (w[self.node_index(i + 1, j)] - w[self.node_index(i, j)]) / h;
                        acc += h * cross(j) * d * d;
                    }
                }
                for i in 0..n {
                    for j in 0..n - 1 {
                        let d = (w[self.node_index(i, j + 1)] - w[self.node_index(i, j)]) / h;
                        acc += h * cross(i) * d * d;
                    }
                }
            }
        }
        acc
    }
}

/// Coefficients of `A(x, D) = Σ D_i(a_ij D_j) + Σ b_j D_j + a0`.
#[derive(Debug, Clone)]
pub struct EllipticCoefficients {
    pub a: Vec<[[f64; 2]; 2]>,
    pub b: Vec<[f64; 2]>,
    pub a0: Vec<f64>,
    pub mu0: f64,
}

impl EllipticCoefficients {
    /// `a = I`, `b = 0`, `a0 = 0`.
    pub fn identity(mesh: &Mesh) -> EllipticCoefficients {
        Self::from_fn(mesh, |_| ([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0))
            .expect("identity coefficients are elliptic")
    }

    /// Samples coefficients at every node; `mu0` is the smallest eigenvalue
    /// of `a(x)` over the mesh.
    pub fn from_fn(
        mesh: &Mesh,
        f: impl Fn([f64; 2]) -> ([[f64; 2]; 2], [f64; 2], f64),
    ) -> Result<EllipticCoefficients> {
        let mut a = Vec::with_capacity(mesh.nnodes());
        let mut b = Vec::with_capacity(mesh.nnodes());
        let mut a0 = Vec::with_capacity(mesh.nnodes());
        for &x in mesh.coords() {
            let (ai, bi, ci) = f(x);
            a.push(ai);
            b.push(bi);
            a0.push(ci);
        }
        Self::new(mesh, a, b, a0)
    }

    pub fn new(
        mesh: &Mesh,
        mut a: Vec<[[f64; 2]; 2]>,
        mut b: Vec<[f64; 2]>,
        a0: Vec<f64>,
    ) -> Result<EllipticCoefficients> {
        mesh.check_field("coefficient a", a.len())?;
        mesh.check_field("coefficient b", b.len())?;
        mesh.check_field("coefficient a0", a0.len())?;
        if mesh.dim() == 1 {
            for (ai, bi) in a.iter_mut().zip(b.iter_mut()) {
                ai[0][1] = 0.0;
                ai[1][0] = 0.0;
                ai[1][1] = ai[0][0];
                bi[1] = 0.0;
            }
        }
        let mut mu0 = f64::INFINITY;
        for (k, ai) in a.iter().enumerate() {
            if (ai[0][1] - ai[1][0]).abs() > 1e-14 * (1.0 + ai[0][1].abs()) {
                return Err(LabError::Domain(format!("a(x) is not symmetric at node {k}")));
            }
            let ev = if mesh.dim() == 1 {
                ai[0][0]
            } else {
                let tr = ai[0][0] + ai[1][1];
                let det = ai[0][0] * ai[1][1] - ai[0][1] * ai[1][0];
                0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt())
            };
            mu0 = mu0.min(ev);
        }
        if !(mu0 > 0.0) {
            return Err(LabError::Domain(format!("a(x) is not uniformly elliptic (mu0 = {mu0})")));
        }
        Ok(EllipticCoefficients { a, b, a0, mu0 })
    }

    pub fn is_diagonal(&self) -> bool {
        self.a.iter().all(|a| a[0][1] == 0.0)
    }

    /// `(Σ_j ‖b_j‖_∞²)^{1/2}`
    pub fn b_norm(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..2 {
            let m = self.b.iter().map(|b| b[j].abs()).fold(0.0, f64::max);
            s += m * m;
        }
        s.sqrt()
    }

    pub fn a0_norm(&self) -> f64 {
        self.a0.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Sparse rows of the discrete `A(x, D)`; boundary rows are empty.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl DiscreteOperator {
    /// Flux-form assembly: `a` at half nodes is the average of its two
    /// neighbours; first-order and mixed terms use centered differences.
    pub fn assemble(coeffs: &EllipticCoefficients, mesh: &Mesh) -> Result<DiscreteOperator> {
        mesh.check_field("coefficients", coeffs.a.len())?;
        let h = mesh.h();
        let h2 = h * h;
        let dim = mesh.dim();
        let mut rows = vec![Vec::new(); mesh.nnodes()];
        for &k in mesh.interior() {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(9);
            let mut push = |node: usize, c: f64| {
                if let Some(e) = row.iter_mut().find(|e| e.0 == node) {
                    e.1 += c;
                } else {
                    row.push((node, c));
                }
            };
            for axis in 0..dim {
                let p = mesh.shift(k, axis, 1).unwrap();
                let m = mesh.shift(k, axis, -1).unwrap();
                let ap = 0.5 * (coeffs.a[k][axis][axis] + coeffs.a[p][axis][axis]);
                let am = 0.5 * (coeffs.a[k][axis][axis] + coeffs.a[m][axis][axis]);
                push(p, ap / h2);
                push(m, am / h2);
                push(k, -(ap + am) / h2);
                let b = coeffs.b[k][axis];
                if b != 0.0 {
                    push(p, b / (2.0 * h));
                    push(m, -b / (2.0 * h));
                }
            }
            if dim == 2 {
                // D1(a12 D2 f) + D2(a12 D1 f)
                let q = 1.0 / (4.0 * h2);
                for (outer, inner) in [(0usize, 1usize), (1, 0)] {
                    for (so, sign_o) in [(1isize, 1.0), (-1, -1.0)] {
                        let c = mesh.shift(k, outer, so).unwrap();
                        let a12 = coeffs.a[c][0][1];
                        if a12 == 0.0 {
                            continue;
                        }
                        let cp = mesh.shift(c, inner, 1).unwrap();
                        let cm = mesh.shift(c, inner, -1).unwrap();
                        push(cp, sign_o * a12 * q);
                        push(cm, -sign_o * a12 * q);
                    }
                }
            }
            push(k, coeffs.a0[k]);
            rows[k] = row;
        }
        Ok(DiscreteOperator { rows })
    }

    pub fn row(&self, k: usize) -> &[(usize, f64)] {
        &self.rows[k]
    }

    pub fn apply(&self, f: ArrayView1<f64>) -> SpaceField {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, c)| c * f[j]).sum())
            .collect()
    }

    /// Transpose product restricted to interior rows.
    pub fn apply_transpose(&self, f: ArrayView1<f64>) -> SpaceField {
        let mut out = Array1::zeros(self.rows.len());
        for (k, row) in self.rows.iter().enumerate() {
            for &(j, c) in row {
                out[j] += c * f[k];
            }
        }
        out
    }
}

/// `A(x, D) f` at interior nodes; boundary entries are zero.
pub fn apply_a(f: ArrayView1<f64>, coeffs: &EllipticCoefficients, mesh: &Mesh) -> Result<SpaceField> {
    mesh.check_field("apply_a input", f.len())?;
    Ok(DiscreteOperator::assemble(coeffs, mesh)?.apply(f))
}

/// Conormal derivative `Σ a_ij ν_j D_i f` at each node of `nodes`.
pub fn conormal_derivative(
    f: ArrayView1<f64>,
    coeffs: &EllipticCoefficients,
    mesh: &Mesh,
    nodes: &[usize],
) -> Result<Vec<f64>> {
    mesh.check_field("conormal input", f.len())?;
    nodes
        .iter()
        .map(|&k| {
            if k >= mesh.nnodes() {
                return Err(LabError::Domain(format!("node {k} is not on the mesh")));
            }
            let nu = mesh
                .outward_normal(k)
                .ok_or_else(|| LabError::Domain(format!("node {k} is not a boundary node")))?;
            Ok(conormal_at(f, coeffs, mesh, k, nu))
        })
        .collect()
}

/// Linear stencil of the conormal derivative at node `k` with normal `nu`.
pub fn conormal_stencil(
    coeffs: &EllipticCoefficients,
    mesh: &Mesh,
    k: usize,
    nu: [f64; 2],
) -> Vec<(usize, f64)> {
    let dim = mesh.dim();
    let mut out: Vec<(usize, f64)> = Vec::new();
    for i in 0..dim {
        let c: f64 = (0..dim).map(|j| coeffs.a[k][i][j] * nu[j]).sum();
        if c == 0.0 {
            continue;
        }
        for (node, w) in mesh.d1_stencil(k, i) {
            match out.iter_mut().find(|e| e.0 == node) {
                Some(e) => e.1 += c * w,
                None => out.push((node, c * w)),
            }
        }
    }
    out
}

pub(crate) fn conormal_at(
    f: ArrayView1<f64>,
    coeffs: &EllipticCoefficients,
    mesh: &Mesh,
    k: usize,
    nu: [f64; 2],
) -> f64 {
    let dim = mesh.dim();
    let mut acc = 0.0;
    for i in 0..dim {
        let c: f64 = (0..dim).map(|j| coeffs.a[k][i][j] * nu[j]).sum();
        if c != 0.0 {
            acc += c * mesh.d1(f, k, i);
        }
    }
    acc
}

/// Conormal derivative on `Γ`, aligned with [`Mesh::gamma_nodes`].
pub fn conormal_on_gamma(
    f: ArrayView1<f64>,
    coeffs: &EllipticCoefficients,
    mesh: &Mesh,
) -> Result<Vec<f64>> {
    conormal_derivative(f, coeffs, mesh, &mesh.gamma_nodes())
}

/// Uniform time levels `t_n = n T / nt`, `n = 0..=nt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    nt: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, nt: usize) -> Result<TimeGrid> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(LabError::Domain(format!("time horizon must be positive, got {horizon}")));
        }
        if nt < 2 {
            return Err(LabError::Size(format!("need at least 2 time steps, got {nt}")));
        }
        Ok(TimeGrid { horizon, nt })
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn levels(&self) -> usize {
        self.nt + 1
    }
    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }
    pub fn time(&self, n: usize) -> f64 {
        if n == self.nt {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }
    pub fn times(&self) -> Vec<f64> {
        (0..self.levels()).map(|n| self.time(n)).collect()
    }

    /// Trapezoidal weights over `[0, T]`.
    pub fn trapezoid(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.levels())
            .map(|n| if n == 0 || n == self.nt { 0.5 * dt } else { dt })
            .collect()
    }

    /// Linear interpolation stencil for time `t`: `(level, weight)` pairs.
    pub fn interp(&self, t: f64) -> Result<[(usize, f64); 2]> {
        if !(t >= -1e-12 * self.horizon && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(LabError::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let s = (t / self.dt()).clamp(0.0, self.nt as f64);
        let mut k = s.floor() as usize;
        if k >= self.nt {
            k = self.nt - 1;
        }
        let frac = s - k as f64;
        let frac = if frac.abs() < 1e-9 {
            0.0
        } else if (1.0 - frac).abs() < 1e-9 {
            1.0
        } else {
            frac
        };
        Ok([(k, 1.0 - frac), (k + 1, frac)])
    }

    /// Quadrature weights integrating the piecewise-linear interpolant
    /// exactly over `[a, b]`. An empty window (`a >= b`) gives zeros.
    pub fn window_weights(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let tol = 1e-12 * self.horizon;
        if a < -tol || b > self.horizon + tol {
            return Err(LabError::Domain(format!(
                "window [{a}, {b}] is not inside [0, {}]",
                self.horizon
            )));
        }
        let mut w = vec![0.0; self.levels()];
        if a >= b {
            return Ok(w);
        }
        let dt = self.dt();
        for k in 0..self.nt {
            let (t0, t1) = (self.time(k), self.time(k + 1));
            let lo = a.max(t0);
            let hi = b.min(t1);
            if hi - lo <= 1e-14 * dt {
                continue;
            }
            // ∫ (t1 - t)/dt and ∫ (t - t0)/dt over [lo, hi]
            let len = hi - lo;
            let mid = 0.5 * (lo + hi);
            w[k] += len * (t1 - mid) / dt;
            w[k + 1] += len * (mid - t0) / dt;
        }
        Ok(w)
    }

    /// Centered time derivative, one-sided second order at both ends.
    pub fn derivative(&self, u: &SpaceTimeField) -> SpaceTimeField {
        let dt = self.dt();
        let nt = self.nt;
        let mut out = Array2::zeros(u.raw_dim());
        for n in 0..=nt {
            let row = if n == 0 {
                (&u.row(1) * 4.0 - &u.row(0) * 3.0 - &u.row(2)) / (2.0 * dt)
            } else if n == nt {
                (&u.row(nt) * 3.0 - &u.row(nt - 1) * 4.0 + &u.row(nt - 2)) / (2.0 * dt)
            } else {
                (&u.row(n + 1) - &u.row(n - 1)) / (2.0 * dt)
            };
            out.row_mut(n).assign(&row);
        }
        out
    }

    /// Samples `f(t, x)` on the space-time grid.
    pub fn sample(&self, mesh: &Mesh, f: impl Fn(f64, [f64; 2]) -> f64) -> SpaceTimeField {
        let mut out = Array2::zeros((self.levels(), mesh.nnodes()));
        for n in 0..self.levels() {
            let t = self.time(n);
            for (k, &x) in mesh.coords().iter().enumerate() {
                out[[n, k]] = f(t, x);
            }
        }
        out
    }
}

/// `∫_Ω f` by trapezoidal quadrature.
pub fn integrate_space(f: ArrayView1<f64>, mesh: &Mesh) -> Result<f64> {
    mesh.check_field("integrand", f.len())?;
    Ok(f.iter().zip(mesh.quad_weights()).map(|(v, w)| v * w).sum())
}

/// `∫_{t_a}^{t_b} ∫_Ω f`; the whole `[0, T]` when `window` is `None`.
pub fn integrate_space_time(
    f: &SpaceTimeField,
    mesh: &Mesh,
    grid: &TimeGrid,
    window: Option<(f64, f64)>,
) -> Result<f64> {
    check_trajectory(f, mesh, grid)?;
    let tw = match window {
        None => grid.trapezoid(),
        Some((a, b)) => grid.window_weights(a, b)?,
    };
    let q = mesh.quad_weights();
    Ok(tw
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(n, w)| w * f.row(n).iter().zip(q).map(|(v, qk)| v * qk).sum::<f64>())
        .sum())
}

/// Discrete `‖f‖_{L²(Ω)}²` at one time level.
pub fn l2_sq(f: ArrayView1<f64>, mesh: &Mesh) -> f64 {
    f.iter().zip(mesh.quad_weights()).map(|(v, w)| w * v * v).sum()
}

/// Discrete `‖f‖_{L²(Q)}²` over a window (all of `[0, T]` when `None`).
pub fn l2_sq_space_time(
    f: &SpaceTimeField,
    mesh: &Mesh,
    grid: &TimeGrid,
    window: Option<(f64, f64)>,
) -> Result<f64> {
    integrate_space_time(&f.mapv(|v| v * v), mesh, grid, window)
}

pub(crate) fn check_trajectory(f: &SpaceTimeField, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
    let expected = (grid.levels(), mesh.nnodes());
    if f.dim() != expected {
        return Err(shape_err("space-time field", format!("{expected:?}"), format!("{:?}", f.dim())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(n: usize) -> Mesh {
        Mesh::new(Geometry::Interval, n, Side::Right).unwrap()
    }

    #[test]
    fn interval_nodes_and_gamma() {
        let m = line(5);
        let xs: Vec<f64> = m.coords().iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.gamma_mask(), &[false, false, false, false, true]);
        assert_relative_eq!(m.quad_weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rectangle_counts() {
        let m = Mesh::build(Geometry::Rectangle, 4, "right").unwrap();
        assert_eq!(m.nnodes(), 16);
        assert_eq!(m.boundary().len(), 12);
        assert_eq!(m.gamma_nodes().len(), 4);
        assert_relative_eq!(m.quad_weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for k in 0..m.nnodes() {
            assert!(!m.gamma_mask()[k] || m.is_boundary(k));
        }
    }

    #[test]
    fn bad_mesh_inputs() {
        assert!(matches!(Mesh::build(Geometry::Interval, 2, "right"), Err(LabError::Size(_))));
        assert!(matches!(Mesh::build(Geometry::Interval, 5, "north"), Err(LabError::Config(_))));
        assert!(matches!(Mesh::build(Geometry::Interval, 5, "top"), Err(LabError::Config(_))));
    }

    #[test]
    fn laplacian_of_affine_and_quadratic() {
        let m = line(11);
        let c = EllipticCoefficients::identity(&m);
        let lin = m.sample(|x| x[0]);
        let quad = m.sample(|x| x[0] * x[0]);
        let a_lin = apply_a(lin.view(), &c, &m).unwrap();
        let a_quad = apply_a(quad.view(), &c, &m).unwrap();
        for &k in m.interior() {
            assert!(a_lin[k].abs() < 1e-12);
            assert_relative_eq!(a_quad[k], 2.0, epsilon = 1e-9);
        }
        let c1 = EllipticCoefficients::from_fn(&m, |_| ([[1.0, 0.0], [0.0, 1.0]], [0.0; 2], 1.0)).unwrap();
        let ones = m.sample(|_| 1.0);
        let a1 = apply_a(ones.view(), &c1, &m).unwrap();
        for &k in m.interior() {
            assert_relative_eq!(a1[k], 1.0, epsilon = 1e-12);
        }
        for &k in m.boundary() {
            assert_eq!(a1[k], 0.0);
        }
    }

    #[test]
    fn conormal_examples() {
        let m = line(11);
        let f = m.sample(|x| x[0]);
        let id = EllipticCoefficients::identity(&m);
        let d = conormal_derivative(f.view(), &id, &m, &[10]).unwrap();
        assert_relative_eq!(d[0], 1.0, epsilon = 1e-12);
        let two = EllipticCoefficients::from_fn(&m, |_| ([[2.0, 0.0], [0.0, 2.0]], [0.0; 2], 0.0)).unwrap();
        let d0 = conormal_derivative(f.view(), &two, &m, &[0]).unwrap();
        assert_relative_eq!(d0[0], -2.0, epsilon = 1e-12);
        let c = m.sample(|_| 3.0);
        assert!(conormal_derivative(c.view(), &id, &m, &[0, 10]).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(
            conormal_derivative(f.view(), &id, &m, &[4]),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn quadrature_examples() {
        let m = line(101);
        let ones = m.sample(|_| 1.0);
        assert_relative_eq!(integrate_space(ones.view(), &m).unwrap(), 1.0, epsilon = 1e-14);
        let sq = m.sample(|x| x[0] * x[0]);
        assert!((integrate_space(sq.view(), &m).unwrap() - 1.0 / 3.0).abs() < 1e-4);
        let g = TimeGrid::new(1.0, 40).unwrap();
        let f = g.sample(&m, |_, _| 1.0);
        let v = integrate_space_time(&f, &m, &g, Some((0.25, 0.5))).unwrap();
        assert_relative_eq!(v, 0.25, epsilon = 1e-12);
        assert_eq!(integrate_space_time(&f, &m, &g, Some((0.5, 0.5))).unwrap(), 0.0);
        // off-grid window still integrates constants exactly
        let v = integrate_space_time(&f, &m, &g, Some((0.2612, 0.5391))).unwrap();
        assert_relative_eq!(v, 0.5391 - 0.2612, epsilon = 1e-12);
    }

    #[test]
    fn rectangle_operator_exact_on_quadratics() {
        let m = Mesh::build(Geometry::Rectangle, 7, "right").unwrap();
        let c = EllipticCoefficients::from_fn(&m, |_| ([[2.0, 0.5], [0.5, 1.0]], [1.0, -1.0], 0.0)).unwrap();
        // f = x1^2 + x1 x2 + x2^2:  2*2 + 2*0.5*1 + 1*2 + b.grad f
        let f = m.sample(|x| x[0] * x[0] + x[0] * x[1] + x[1] * x[1]);
        let af = apply_a(f.view(), &c, &m).unwrap();
        for &k in m.interior() {
            let x = m.coord(k);
            let expect = 4.0 + 1.0 + 2.0 + (2.0 * x[0] + x[1]) - (x[0] + 2.0 * x[1]);
            assert_relative_eq!(af[k], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn interp_and_window_weights() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let s = g.interp(0.25).unwrap();
        assert_eq!(s[0], (1, 1.0));
        let s = g.interp(0.3).unwrap();
        assert_eq!(s[0].0, 1);
        assert_relative_eq!(s[1].1, 0.2, epsilon = 1e-12);
        let w = g.window_weights(0.25, 0.5).unwrap();
        assert_relative_eq!(w[1], 0.125);
        assert_relative_eq!(w[2], 0.125);
        assert!(g.window_weights(-0.5, 0.5).is_err());
    }
}
