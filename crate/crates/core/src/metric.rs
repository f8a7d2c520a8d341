//! Metric tensor fields on a chart of ℝⁿ and the connection they induce.
//!
//! Storage conventions used throughout the crate:
//! - `g[i*n + j]` is g_ij,
//! - `dg[k*n*n + i*n + j]` is ∂_k g_ij,
//! - Christoffel symbols `Γ^k_ij` live at `[k*n*n + i*n + j]`.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{Expr, MAX_EXPR_DIM};

/// Smooth symmetric positive-definite matrix field.
pub trait MetricField: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// Short identifier written into dataset headers.
    fn id(&self) -> String;

    fn eval(&self, x: &[f64], g: &mut [f64]);

    /// First partials ∂_k g_ij. Defaults to central differences with
    /// step `1e-5 · (1 + |x|)`.
    fn eval_deriv(&self, x: &[f64], dg: &mut [f64]) {
        central_diff_deriv(self, x, dg)
    }

    fn has_analytic_deriv(&self) -> bool {
        false
    }
}

pub type SharedMetric = Arc<dyn MetricField>;

pub fn fd_step(x: &[f64]) -> f64 {
    1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

pub fn central_diff_deriv<M: MetricField + ?Sized>(m: &M, x: &[f64], dg: &mut [f64]) {
    let n = m.dim();
    let h = fd_step(x);
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; n * n];
    let mut gm = vec![0.0; n * n];
    for k in 0..n {
        xp[k] = x[k] + h;
        m.eval(&xp, &mut gp);
        xp[k] = x[k] - h;
        m.eval(&xp, &mut gm);
        xp[k] = x[k];
        for ij in 0..n * n {
            dg[k * n * n + ij] = (gp[ij] - gm[ij]) / (2.0 * h);
        }
    }
}

/// Scalar field with gradient, used as a conformal exponent.
pub trait ScalarField: Send + Sync + Debug {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct Flat {
    pub dim: usize,
}

impl MetricField for Flat {
    fn dim(&self) -> usize {
        self.dim
    }
    fn id(&self) -> String {
        "flat".into()
    }
    fn eval(&self, _x: &[f64], g: &mut [f64]) {
        let n = self.dim;
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            g[i * n + i] = 1.0;
        }
    }
    fn eval_deriv(&self, _x: &[f64], dg: &mut [f64]) {
        dg.iter_mut().for_each(|v| *v = 0.0);
    }
    fn has_analytic_deriv(&self) -> bool {
        true
    }
}

/// `g = e^{2φ} δ`.
#[derive(Debug, Clone)]
pub struct Conformal<F> {
    pub dim: usize,
    pub phi: F,
    pub name: String,
}

impl<F: ScalarField> Conformal<F> {
    pub fn new(dim: usize, phi: F, name: impl Into<String>) -> Self {
        Conformal { dim, phi, name: name.into() }
    }
}

impl<F: ScalarField> MetricField for Conformal<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn id(&self) -> String {
        self.name.clone()
    }
    fn eval(&self, x: &[f64], g: &mut [f64]) {
        let n = self.dim;
        let mut grad = [0.0; 8];
        let s = (2.0 * self.phi.value_grad(x, &mut grad[..n])).exp();
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            g[i * n + i] = s;
        }
    }
    fn eval_deriv(&self, x: &[f64], dg: &mut [f64]) {
        let n = self.dim;
        let mut grad = [0.0; 8];
        let s = (2.0 * self.phi.value_grad(x, &mut grad[..n])).exp();
        dg.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            for i in 0..n {
                dg[k * n * n + i * n + i] = 2.0 * grad[k] * s;
            }
        }
    }
    fn has_analytic_deriv(&self) -> bool {
        true
    }
}

/// `φ(x) = A · exp(−|x − c|² / σ²)`.
#[derive(Debug, Clone)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

impl ScalarField for GaussianBump {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let s2 = self.width * self.width;
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        let v = self.amplitude * (-r2 / s2).exp();
        for (k, gk) in grad.iter_mut().enumerate() {
            *gk = -2.0 * (x[k] - self.center[k]) / s2 * v;
        }
        v
    }
    fn describe(&self) -> String {
        format!("bump(A={}, c={:?}, w={})", self.amplitude, self.center, self.width)
    }
}

/// Exponent of the stereographic round-sphere chart: `4/(1+|x|²)² δ`.
#[derive(Debug, Clone)]
pub struct StereographicSphere;

impl ScalarField for StereographicSphere {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        for (k, gk) in grad.iter_mut().enumerate() {
            *gk = -2.0 * x[k] / (1.0 + r2);
        }
        std::f64::consts::LN_2 - (1.0 + r2).ln()
    }
    fn describe(&self) -> String {
        "sphere".into()
    }
}

/// `φ(x) = a · x + b`.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl ScalarField for LinearField {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.copy_from_slice(&self.coeffs[..grad.len()]);
        self.offset + self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
    fn describe(&self) -> String {
        format!("linear({:?}, {})", self.coeffs, self.offset)
    }
}

/// Constant exponent; `Conformal` over it is a uniformly scaled flat metric.
#[derive(Debug, Clone)]
pub struct ConstField(pub f64);

impl ScalarField for ConstField {
    fn value_grad(&self, _x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.0
    }
    fn describe(&self) -> String {
        format!("const({})", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct ExprField(pub Expr);

impl ScalarField for ExprField {
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.0.eval_dual(x);
        let n = grad.len();
        grad.copy_from_slice(&d.g[..n]);
        d.v
    }
    fn describe(&self) -> String {
        self.0.to_string()
    }
}

/// Metric given entry-wise by expressions (upper triangle, row-major).
#[derive(Debug, Clone)]
pub struct ExprMetric {
    dim: usize,
    entries: Vec<Expr>,
}

impl ExprMetric {
    /// `entries` lists g_ij for i ≤ j in row-major order.
    pub fn new(dim: usize, entries: Vec<Expr>) -> Result<Self> {
        if dim > MAX_EXPR_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        if entries.len() != dim * (dim + 1) / 2 {
            return Err(Error::Usage(format!(
                "matrix metric in dimension {dim} needs {} entries, got {}",
                dim * (dim + 1) / 2,
                entries.len()
            )));
        }
        Ok(ExprMetric { dim, entries })
    }

    fn entry_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }
}

impl MetricField for ExprMetric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn id(&self) -> String {
        "matrix_expr".into()
    }
    fn eval(&self, x: &[f64], g: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = self.entries[self.entry_index(i, j)].eval(x);
            }
        }
    }
    fn eval_deriv(&self, x: &[f64], dg: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            for j in i..n {
                let d = self.entries[self.entry_index(i, j)].eval_dual(x);
                for k in 0..n {
                    dg[k * n * n + i * n + j] = d.g[k];
                    dg[k * n * n + j * n + i] = d.g[k];
                }
            }
        }
    }
    fn has_analytic_deriv(&self) -> bool {
        true
    }
}

/// `c · g` for a constant c > 0.
#[derive(Debug, Clone)]
pub struct Scaled {
    pub inner: SharedMetric,
    pub factor: f64,
}

impl MetricField for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn id(&self) -> String {
        format!("{}*{}", self.factor, self.inner.id())
    }
    fn eval(&self, x: &[f64], g: &mut [f64]) {
        self.inner.eval(x, g);
        g.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn eval_deriv(&self, x: &[f64], dg: &mut [f64]) {
        self.inner.eval_deriv(x, dg);
        dg.iter_mut().for_each(|v| *v *= self.factor);
    }
    fn has_analytic_deriv(&self) -> bool {
        self.inner.has_analytic_deriv()
    }
}

/// Pushforward of a planar metric under the rotation `x ↦ R(angle) x`.
#[derive(Debug, Clone)]
pub struct Rotated {
    pub inner: SharedMetric,
    pub angle: f64,
}

impl Rotated {
    fn rot(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.angle.sin_cos();
        [[c, -s], [s, c]]
    }
}

impl MetricField for Rotated {
    fn dim(&self) -> usize {
        2
    }
    fn id(&self) -> String {
        format!("rot({})[{}]", self.angle, self.inner.id())
    }
    fn eval(&self, x: &[f64], g: &mut [f64]) {
        let r = self.rot();
        let y = [r[0][0] * x[0] + r[1][0] * x[1], r[0][1] * x[0] + r[1][1] * x[1]];
        let mut h = [0.0; 4];
        self.inner.eval(&y, &mut h);
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += r[i][a] * h[a * 2 + b] * r[j][b];
                    }
                }
                g[i * 2 + j] = acc;
            }
        }
    }
    fn eval_deriv(&self, x: &[f64], dg: &mut [f64]) {
        let r = self.rot();
        let y = [r[0][0] * x[0] + r[1][0] * x[1], r[0][1] * x[0] + r[1][1] * x[1]];
        let mut dh = [0.0; 8];
        self.inner.eval_deriv(&y, &mut dh);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for c in 0..2 {
                        // ∂y_c/∂x_k = R_kc
                        for a in 0..2 {
                            for b in 0..2 {
                                acc += r[i][a] * r[j][b] * dh[c * 4 + a * 2 + b] * r[k][c];
                            }
                        }
                    }
                    dg[k * 4 + i * 2 + j] = acc;
                }
            }
        }
    }
    fn has_analytic_deriv(&self) -> bool {
        self.inner.has_analytic_deriv()
    }
}

// ---------------------------------------------------------------------------
// small dense helpers for the hot path

/// In-place Cholesky factorization of an n×n SPD matrix into `l` (lower).
/// Returns false if a pivot is not positive.
pub fn cholesky(n: usize, a: &[f64], l: &mut [f64]) -> bool {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
        for j in i + 1..n {
            l[i * n + j] = 0.0;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place.
pub fn cholesky_solve(n: usize, l: &[f64], b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Scratch buffers for repeated connection evaluations along a geodesic.
#[derive(Debug, Clone)]
pub struct ConnectionWork {
    n: usize,
    g: Vec<f64>,
    dg: Vec<f64>,
    l: Vec<f64>,
    a: Vec<f64>,
}

impl ConnectionWork {
    pub fn new(n: usize) -> Self {
        ConnectionWork {
            n,
            g: vec![0.0; n * n],
            dg: vec![0.0; n * n * n],
            l: vec![0.0; n * n],
            a: vec![0.0; n],
        }
    }

    /// Geodesic acceleration `out^k = −Γ^k_ij v^i v^j`.
    pub fn acceleration(&mut self, m: &dyn MetricField, x: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        let n = self.n;
        m.eval(x, &mut self.g);
        m.eval_deriv(x, &mut self.dg);
        for l in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    // ∂_i g_jl v^i v^j − ½ ∂_l g_ij v^i v^j
                    s += (self.dg[i * n * n + j * n + l] - 0.5 * self.dg[l * n * n + i * n + j])
                        * v[i]
                        * v[j];
                }
            }
            self.a[l] = s;
        }
        if !cholesky(n, &self.g, &mut self.l) {
            return false;
        }
        cholesky_solve(n, &self.l, &mut self.a);
        for k in 0..n {
            out[k] = -self.a[k];
        }
        true
    }
}

// ---------------------------------------------------------------------------

/// Christoffel symbols of the second kind at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Christoffel {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim;
        self.data[k * n * n + i * n + j]
    }

    /// `Γ^k_ij u^i w^j`.
    pub fn contract(&self, u: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.data[k * n * n + i * n + j] * u[i] * w[j];
                }
            }
            out[k] = s;
        }
    }
}

pub fn metric_at(m: &dyn MetricField, x: &[f64]) -> DMatrix<f64> {
    let n = m.dim();
    let mut g = vec![0.0; n * n];
    m.eval(x, &mut g);
    DMatrix::from_row_slice(n, n, &g)
}

/// Checks symmetry and positive definiteness of g(x).
pub fn check_metric(m: &dyn MetricField, x: &[f64]) -> Result<()> {
    let n = m.dim();
    let mut g = vec![0.0; n * n];
    m.eval(x, &mut g);
    for i in 0..n {
        for j in 0..i {
            if (g[i * n + j] - g[j * n + i]).abs() >= 1e-12 {
                return Err(Error::DegenerateMetric { at: x.to_vec(), reason: "not symmetric".into() });
            }
        }
    }
    let mut l = vec![0.0; n * n];
    if !cholesky(n, &g, &mut l) {
        return Err(Error::DegenerateMetric { at: x.to_vec(), reason: "not positive definite".into() });
    }
    Ok(())
}

fn christoffel_from(n: usize, g: &[f64], dg: &[f64], x: &[f64]) -> Result<Christoffel> {
    let mut l = vec![0.0; n * n];
    if !cholesky(n, g, &mut l) {
        return Err(Error::DegenerateMetric { at: x.to_vec(), reason: "singular metric matrix".into() });
    }
    let mut data = vec![0.0; n * n * n];
    let mut col = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            for (lidx, c) in col.iter_mut().enumerate() {
                *c = 0.5
                    * (dg[i * n * n + j * n + lidx] + dg[j * n * n + i * n + lidx]
                        - dg[lidx * n * n + i * n + j]);
            }
            cholesky_solve(n, &l, &mut col);
            for k in 0..n {
                data[k * n * n + i * n + j] = col[k];
                data[k * n * n + j * n + i] = col[k];
            }
        }
    }
    Ok(Christoffel { dim: n, data })
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`, symmetric in (i, j).
pub fn christoffel(m: &dyn MetricField, x: &[f64]) -> Result<Christoffel> {
    let n = m.dim();
    let mut g = vec![0.0; n * n];
    let mut dg = vec![0.0; n * n * n];
    m.eval(x, &mut g);
    m.eval_deriv(x, &mut dg);
    christoffel_from(n, &g, &dg, x)
}

/// Christoffel symbols from finite-difference metric derivatives,
/// regardless of whether the metric supplies analytic ones.
pub fn christoffel_fd(m: &dyn MetricField, x: &[f64]) -> Result<Christoffel> {
    let n = m.dim();
    let mut g = vec![0.0; n * n];
    let mut dg = vec![0.0; n * n * n];
    m.eval(x, &mut g);
    central_diff_deriv(m, x, &mut dg);
    christoffel_from(n, &g, &dg, x)
}

/// Step for finite differences of Christoffel symbols.
pub const CHRISTOFFEL_FD_STEP: f64 = 1e-5;

/// Directional derivative `(∂_dir Γ)^k_ij` by central differences along `dir`.
pub fn christoffel_dir_deriv(m: &dyn MetricField, x: &[f64], dir: &[f64]) -> Result<Christoffel> {
    let n = m.dim();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(Christoffel { dim: n, data: vec![0.0; n * n * n] });
    }
    let h = CHRISTOFFEL_FD_STEP;
    let xp: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d / norm).collect();
    let xm: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d / norm).collect();
    let gp = christoffel(m, &xp)?;
    let gm = christoffel(m, &xm)?;
    let data = gp.data.iter().zip(&gm.data).map(|(p, q)| (p - q) / (2.0 * h) * norm).collect();
    Ok(Christoffel { dim: n, data })
}

/// Riemann tensor `R^l_ijk` (index `[l][i][j][k]`) assembled from
/// finite differences of the Christoffel symbols, with the convention
/// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`.
pub fn riemann_fd(m: &dyn MetricField, x: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    let gam = christoffel(m, x)?;
    let mut dgam = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        dgam.push(christoffel_dir_deriv(m, x, &e)?);
    }
    let mut r = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dgam[i].get(l, j, k) - dgam[j].get(l, i, k);
                    for mm in 0..n {
                        v += gam.get(l, i, mm) * gam.get(mm, j, k) - gam.get(l, j, mm) * gam.get(mm, i, k);
                    }
                    r[((l * n + i) * n + j) * n + k] = v;
                }
            }
        }
    }
    Ok(r)
}

/// `R(u, w) w`, the curvature term of the Jacobi equation.
pub fn curvature_term(riemann: &[f64], n: usize, u: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (l, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s += riemann[((l * n + i) * n + j) * n + k] * u[i] * w[j] * w[k];
                }
            }
        }
        *o = s;
    }
    out
}

pub fn inner(m: &dyn MetricField, x: &[f64], u: &[f64], w: &[f64]) -> f64 {
    let n = m.dim();
    let mut g = vec![0.0; n * n];
    m.eval(x, &mut g);
    inner_with(&g, n, u, w)
}

#[inline]
pub fn inner_with(g: &[f64], n: usize, u: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i * n + j] * u[i] * w[j];
        }
    }
    s
}

pub fn norm(m: &dyn MetricField, x: &[f64], u: &[f64]) -> f64 {
    inner(m, x, u, u).sqrt()
}

/// g-orthonormal frame at x obtained by Gram–Schmidt on the coordinate axes.
pub fn orthonormal_frame(m: &dyn MetricField, x: &[f64]) -> Vec<Vec<f64>> {
    let n = m.dim();
    let mut g = vec![0.0; n * n];
    m.eval(x, &mut g);
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for f in &frame {
            let c = inner_with(&g, n, &e, f);
            e.iter_mut().zip(f).for_each(|(a, b)| *a -= c * b);
        }
        let nr = inner_with(&g, n, &e, &e).sqrt();
        e.iter_mut().for_each(|a| *a /= nr);
        frame.push(e);
    }
    frame
}

/// Singular values of a linear map between tangent spaces, measured with
/// g_from on the source and g_to on the target, in descending order.
pub fn g_singular_values(map: &DMatrix<f64>, g_from: &DMatrix<f64>, g_to: &DMatrix<f64>) -> Vec<f64> {
    let lf = g_from.clone().cholesky().expect("metric is SPD").l();
    let lt = g_to.clone().cholesky().expect("metric is SPD").l();
    // A = L_toᵀ · map · L_from⁻ᵀ maps orthonormal coordinates to orthonormal coordinates
    let lf_inv_t = lf.transpose().try_inverse().expect("invertible");
    let a = lt.transpose() * map * lf_inv_t;
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}
