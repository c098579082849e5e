//! Pointwise principal-value evaluation of `(-Δ)^s u(z)` and of the bilinear
//! form `I_s[u, v](z)`, used as an oracle that does not rely on any of the
//! closed-form kernels.
//!
//! In polar coordinates around `z` both integrals become one-dimensional in
//! the radius `r` once the angular part has been integrated with a sphere
//! rule. Antipodal nodes are paired, which cancels the first-order Taylor
//! term exactly, so the radial integrand behaves like `r^{1-2s}` near 0. The
//! inner shell `[0, r_in]` is mapped by `r = r_in v^{1/(2-2s)}`, which turns
//! that behaviour into a bounded integrand; the middle range is adaptive with
//! breakpoints at every sphere where the field is only Hölder; beyond the
//! support the tail is either exact or mapped onto `(0, 1]`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::ball::{dist, norm, pairwise_sum, BallDomain, Point};
use crate::error::{Error, Result};
use crate::kernels::FractionalGreen;
use crate::quad::{integrate_adaptive, AdaptiveConfig};
use crate::special::operator_norm;

/// Ratio of the Taylor-model radius to the inner-shell radius.
const INNER_FLOOR: f64 = 1e-2;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Behaviour of a field outside its support radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarField {
    /// Identically equal to the constant.
    Constant(f64),
    /// Not constant but decaying at least like `|t|^{2s-N}`.
    Decaying,
}

/// A scalar field on `R^N` with its gradient, the radius outside of which
/// it is described by `far`, and the spheres across which it is only Hölder
/// continuous.
#[derive(Clone)]
pub struct SmoothField {
    dim: usize,
    eval: ScalarFn,
    grad: VectorFn,
    support_radius: f64,
    far: FarField,
    rough_spheres: Vec<(Point, f64)>,
}

impl std::fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothField")
            .field("dim", &self.dim)
            .field("support_radius", &self.support_radius)
            .field("far", &self.far)
            .field("rough_spheres", &self.rough_spheres)
            .finish_non_exhaustive()
    }
}

impl SmoothField {
    pub fn new(dim: usize, support_radius: f64, eval: ScalarFn, grad: VectorFn) -> Self {
        Self { dim, eval, grad, support_radius, far: FarField::Constant(0.0), rough_spheres: Vec::new() }
    }

    pub fn with_far_field(mut self, far: FarField) -> Self {
        self.far = far;
        self
    }

    /// Marks the sphere `|t - center| = radius` as a set where the field is
    /// not twice differentiable.
    pub fn with_rough_sphere(mut self, center: Point, radius: f64) -> Self {
        self.rough_spheres.push((center, radius));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn far_field(&self) -> FarField {
        self.far
    }

    pub fn value(&self, t: &[f64]) -> f64 {
        (self.eval)(t)
    }

    pub fn gradient(&self, t: &[f64]) -> Vec<f64> {
        (self.grad)(t)
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, 0.0, Arc::new(move |_| c), Arc::new(move |_| vec![0.0; dim]))
            .with_far_field(FarField::Constant(c))
    }

    /// `exp(1 - 1/(1 - |t-c|²/ρ²))` inside `B_ρ(c)`, zero outside; equals 1
    /// at the centre and is `C^∞`.
    pub fn bump(center: Point, radius: f64) -> Self {
        let dim = center.dim();
        let support = center.norm() + radius;
        let c1 = center.clone();
        let c2 = center;
        let eval = move |t: &[f64]| {
            let q = dist(t, &c1).powi(2) / (radius * radius);
            if q < 1.0 {
                (1.0 - 1.0 / (1.0 - q)).exp()
            } else {
                0.0
            }
        };
        let grad = move |t: &[f64]| {
            let q = dist(t, &c2).powi(2) / (radius * radius);
            if q < 1.0 {
                let phi = (1.0 - 1.0 / (1.0 - q)).exp();
                let k = -2.0 * phi / ((1.0 - q).powi(2) * radius * radius);
                t.iter().zip(c2.iter()).map(|(a, b)| k * (a - b)).collect()
            } else {
                vec![0.0; t.len()]
            }
        };
        Self::new(dim, support, Arc::new(eval), Arc::new(grad))
    }

    /// `(1 - |t|²)_+^s`, the classical eigenfunction-type profile for
    /// `(-Δ)^s` on the unit ball.
    pub fn power_bump(dim: usize, s: f64) -> Self {
        let eval = move |t: &[f64]| {
            let g = 1.0 - t.iter().map(|c| c * c).sum::<f64>();
            if g > 0.0 {
                g.powf(s)
            } else {
                0.0
            }
        };
        let grad = move |t: &[f64]| {
            let g = 1.0 - t.iter().map(|c| c * c).sum::<f64>();
            if g > 0.0 {
                let k = -2.0 * s * g.powf(s - 1.0);
                t.iter().map(|c| k * c).collect()
            } else {
                vec![0.0; t.len()]
            }
        };
        Self::new(dim, 1.0, Arc::new(eval), Arc::new(grad)).with_rough_sphere(Point::origin(dim), 1.0)
    }

    /// `H_s(x, ·)` on the ball, continued by `F_s(x, ·)` outside it.
    pub fn extended_regular_part(green: FractionalGreen, x: Point) -> Self {
        let ball = green.ball();
        let n = ball.dim();
        let r = ball.radius();
        let xe = x.clone();
        let eval = move |t: &[f64]| {
            let res = if norm(t) <= r { green.regular_part_h(&xe, t) } else { green.fundamental_f(&xe, t) };
            res.unwrap_or(f64::NAN)
        };
        let xg = x;
        let grad = move |t: &[f64]| {
            let res = if norm(t) < r {
                green.grad_h(&xg, t, crate::kernels::Slot::Second)
            } else {
                green.grad_f(&xg, t, crate::kernels::Slot::Second)
            };
            res.map(Point::into_inner).unwrap_or_else(|_| vec![f64::NAN; n])
        };
        Self::new(n, r, Arc::new(eval), Arc::new(grad))
            .with_far_field(FarField::Decaying)
            .with_rough_sphere(Point::origin(n), r)
    }

    /// `u·v`.
    pub fn product(u: &SmoothField, v: &SmoothField) -> Self {
        assert_eq!(u.dim, v.dim, "fields must share a dimension");
        let (ue, ve) = (u.eval.clone(), v.eval.clone());
        let (ug, vg) = ((u.eval.clone(), u.grad.clone()), (v.eval.clone(), v.grad.clone()));
        let eval = move |t: &[f64]| ue(t) * ve(t);
        let grad = move |t: &[f64]| {
            let (a, b) = (ug.0(t), vg.0(t));
            let (ga, gb) = (ug.1(t), vg.1(t));
            ga.iter().zip(&gb).map(|(da, db)| b * da + a * db).collect()
        };
        let far = match (u.far, v.far) {
            (FarField::Constant(a), FarField::Constant(b)) => FarField::Constant(a * b),
            _ => FarField::Decaying,
        };
        let mut out = Self::new(u.dim, u.support_radius.max(v.support_radius), Arc::new(eval), Arc::new(grad))
            .with_far_field(far);
        out.rough_spheres = u.rough_spheres.iter().chain(&v.rough_spheres).cloned().collect();
        out
    }

    /// `α u + β v`.
    pub fn combination(alpha: f64, u: &SmoothField, beta: f64, v: &SmoothField) -> Self {
        assert_eq!(u.dim, v.dim, "fields must share a dimension");
        let (ue, ve) = (u.eval.clone(), v.eval.clone());
        let (ug, vg) = (u.grad.clone(), v.grad.clone());
        let eval = move |t: &[f64]| alpha * ue(t) + beta * ve(t);
        let grad = move |t: &[f64]| ug(t).iter().zip(vg(t)).map(|(a, b)| alpha * a + beta * b).collect();
        let far = match (u.far, v.far) {
            (FarField::Constant(a), FarField::Constant(b)) => FarField::Constant(alpha * a + beta * b),
            _ => FarField::Decaying,
        };
        let mut out = Self::new(u.dim, u.support_radius.max(v.support_radius), Arc::new(eval), Arc::new(grad))
            .with_far_field(far);
        out.rough_spheres = u.rough_spheres.iter().chain(&v.rough_spheres).cloned().collect();
        out
    }

    /// `t ↦ u(t - shift)`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let sh: Vec<f64> = shift.to_vec();
        let sh2 = sh.clone();
        let (e, g) = (self.eval.clone(), self.grad.clone());
        let eval = move |t: &[f64]| {
            let p: Vec<f64> = t.iter().zip(&sh).map(|(a, b)| a - b).collect();
            e(&p)
        };
        let grad = move |t: &[f64]| {
            let p: Vec<f64> = t.iter().zip(&sh2).map(|(a, b)| a - b).collect();
            g(&p)
        };
        let mut out = Self::new(self.dim, self.support_radius + norm(shift), Arc::new(eval), Arc::new(grad))
            .with_far_field(self.far);
        out.rough_spheres = self.rough_spheres.iter().map(|(c, r)| (c.offset(shift, 1.0), *r)).collect();
        out
    }
}

/// Quadrature budget for the principal-value evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvConfig {
    /// Radius of the inner shell handled by the power-law substitution.
    pub inner_radius: f64,
    /// Order of the unit-sphere rule used for angular integrals (`N ≥ 2`).
    pub sphere_order: usize,
    /// Absolute (and relative) error target for each radial integral.
    pub abs_tol: f64,
    /// Maximum number of adaptive panels per radial integral.
    pub max_panels: usize,
    /// Minimum distance to `∂B_R` for the s-harmonicity check.
    pub boundary_margin: f64,
}

impl Default for PvConfig {
    fn default() -> Self {
        Self { inner_radius: 0.1, sphere_order: 16, abs_tol: 1e-10, max_panels: 20_000, boundary_margin: 0.05 }
    }
}

impl PvConfig {
    /// Same layout with a tighter tolerance and finer angular rule.
    pub fn refined(&self) -> Self {
        Self {
            inner_radius: self.inner_radius / 2.0,
            sphere_order: self.sphere_order * 2,
            abs_tol: self.abs_tol / 10.0,
            max_panels: self.max_panels * 4,
            boundary_margin: self.boundary_margin,
        }
    }

    fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig { abs_tol: self.abs_tol, rel_tol: self.abs_tol, max_panels: self.max_panels }
    }
}

/// Unit directions with weights; the counting measure on `{-1, 1}` for `N = 1`.
fn directions(n: usize, order: usize) -> Result<(Vec<Point>, Vec<f64>)> {
    let rule = BallDomain::unit(n).boundary_quadrature(order)?;
    Ok((rule.normals, rule.weights))
}

/// Radii `r > 0` at which `z + rθ` or `z - rθ` crosses one of `spheres`.
fn crossing_radii(z: &[f64], theta: &[f64], spheres: &[(Point, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (c, rho) in spheres {
        let w: Vec<f64> = z.iter().zip(c.iter()).map(|(a, b)| a - b).collect();
        let b: f64 = w.iter().zip(theta).map(|(a, t)| a * t).sum();
        let q = w.iter().map(|a| a * a).sum::<f64>() - rho * rho;
        for bb in [b, -b] {
            let disc = bb * bb - q;
            if disc >= 0.0 {
                let root = disc.sqrt();
                out.extend([-bb - root, -bb + root].into_iter().filter(|r| *r > 0.0));
            }
        }
    }
    out
}

/// Radial integrals along one direction.
struct Radial<'a> {
    s: f64,
    rho_out: f64,
    cfg: &'a PvConfig,
}

impl Radial<'_> {
    /// `∫_0^∞ r^{-1-2s} D(r) dr` where `D(r) = far_const` beyond `rho_out`
    /// plus, for decaying fields, a remainder handled by `r = rho_out/w`.
    /// `kinks` are radii where `D` is not smooth.
    fn integrate<D>(&self, defect: D, mut kinks: Vec<f64>, far_const: f64, decaying: bool) -> Result<f64>
    where
        D: Fn(f64) -> Result<f64>,
    {
        let s = self.s;
        let closest = kinks.iter().cloned().fold(f64::INFINITY, f64::min);
        let r_in = self.cfg.inner_radius.min(0.5 * closest).min(0.5 * self.rho_out);
        if r_in <= 0.0 || !r_in.is_finite() {
            return Err(Error::domain("evaluation point lies on a sphere where the field is not smooth"));
        }
        let ad = self.cfg.adaptive();

        // inner shell: r = r_in v^p with p = 1/(2-2s)
        // D(r)/r² is even and smooth in r; below r_floor rounding in D
        // dominates, so it is replaced by its quadratic Taylor model
        let p = 1.0 / (2.0 - 2.0 * s);
        let scale = r_in.powf(2.0 - 2.0 * s) * p;
        let r_floor = INNER_FLOOR * r_in;
        let h1 = defect(r_floor)? / (r_floor * r_floor);
        let h2 = defect(2.0 * r_floor)? / (4.0 * r_floor * r_floor);
        let curv = (h2 - h1) / (3.0 * r_floor * r_floor);
        let inner = integrate_adaptive(
            |v: f64| {
                let r = r_in * v.powf(p);
                let h = if r < r_floor { h1 + curv * (r * r - r_floor * r_floor) } else { defect(r)? / (r * r) };
                Ok(scale * h)
            },
            &[0.0, 1.0],
            &ad,
        )?;

        let mut pts = vec![r_in];
        kinks.retain(|k| *k > r_in && *k < self.rho_out);
        kinks.sort_by(f64::total_cmp);
        pts.extend(kinks);
        pts.push(self.rho_out);
        pts.dedup();
        let middle = integrate_adaptive(|r: f64| Ok(r.powf(-1.0 - 2.0 * s) * defect(r)?), &pts, &ad)?;

        let mut tail = far_const * self.rho_out.powf(-2.0 * s) / (2.0 * s);
        if decaying {
            let rho = self.rho_out;
            let rem = integrate_adaptive(
                |w: f64| Ok(rho.powf(-2.0 * s) * w.powf(2.0 * s - 1.0) * (defect(rho / w)? - far_const)),
                &[0.0, 1.0],
                &ad,
            )?;
            tail += rem.value;
        }
        Ok(inner.value + middle.value + tail)
    }
}

/// `Σ_q w_q f(θ_q)` over the unit-sphere rule, evaluated in parallel and
/// summed pairwise in node order.
fn over_directions<F>(n: usize, cfg: &PvConfig, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let (dirs, weights) = directions(n, cfg.sphere_order)?;
    let terms: Result<Vec<f64>> = dirs.par_iter().zip(weights.par_iter()).map(|(d, w)| Ok(w * f(d)?)).collect();
    Ok(pairwise_sum(&terms?))
}

fn along(z: &[f64], theta: &[f64], r: f64) -> Vec<f64> {
    z.iter().zip(theta).map(|(a, b)| a + r * b).collect()
}

/// Validates `s ∈ (0, 1)` and the evaluation point; returns `c_{N,s}`.
fn check_point(u: &SmoothField, z: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParams(format!("the principal-value evaluator needs 0 < s < 1, got {s}")));
    }
    if z.len() != u.dim {
        return Err(Error::DimensionMismatch { expected: u.dim, got: z.len() });
    }
    for (c, r) in &u.rough_spheres {
        if (dist(z, c) - r).abs() <= 1e-12 * r.max(1.0) {
            return Err(Error::domain("field is not twice differentiable at the evaluation point"));
        }
    }
    operator_norm(u.dim, s)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain("field evaluated to a non-finite value"))
    }
}

/// `(-Δ)^s u(z) = c_{N,s} p.v. ∫ (u(z) - u(t)) / |z - t|^{N+2s} dt`.
///
/// For each direction `θ` of the sphere rule the radial integral of
/// `u(z) - (u(z + rθ) + u(z - rθ))/2` is computed with breakpoints where
/// `z ± rθ` crosses a rough sphere of `u`.
pub fn frac_laplacian_pv(u: &SmoothField, z: &[f64], s: f64, cfg: &PvConfig) -> Result<f64> {
    let c_norm = check_point(u, z, s)?;
    let uz = finite(u.value(z))?;
    let (far_const, decaying) = match u.far {
        FarField::Constant(c) => (uz - c, false),
        FarField::Decaying => (uz, true),
    };
    let radial = Radial { s, rho_out: u.support_radius + norm(z), cfg };
    let total = over_directions(u.dim, cfg, |theta| {
        let defect = |r: f64| finite(uz - 0.5 * (u.value(&along(z, theta, r)) + u.value(&along(z, theta, -r))));
        radial.integrate(defect, crossing_radii(z, theta, &u.rough_spheres), far_const, decaying)
    })?;
    Ok(c_norm * total)
}

/// `I_s[u, v](z) = c_{N,s} ∫ (u(z) - u(t))(v(z) - v(t)) / |z - t|^{N+2s} dt`.
pub fn bilinear_i_s(u: &SmoothField, v: &SmoothField, z: &[f64], s: f64, cfg: &PvConfig) -> Result<f64> {
    if u.dim != v.dim {
        return Err(Error::DimensionMismatch { expected: u.dim, got: v.dim });
    }
    let c_norm = check_point(u, z, s)?;
    check_point(v, z, s)?;
    let uz = finite(u.value(z))?;
    let vz = finite(v.value(z))?;
    let (far_const, decaying) = match (u.far, v.far) {
        (FarField::Constant(a), FarField::Constant(b)) => ((uz - a) * (vz - b), false),
        _ => (uz * vz, true),
    };
    let mut rough = u.rough_spheres.clone();
    rough.extend(v.rough_spheres.iter().cloned());
    let radial = Radial { s, rho_out: u.support_radius.max(v.support_radius) + norm(z), cfg };
    let total = over_directions(u.dim, cfg, |theta| {
        let defect = |r: f64| {
            let (p, m) = (along(z, theta, r), along(z, theta, -r));
            finite(0.5 * ((uz - u.value(&p)) * (vz - v.value(&p)) + (uz - u.value(&m)) * (vz - v.value(&m))))
        };
        radial.integrate(defect, crossing_radii(z, theta, &rough), far_const, decaying)
    })?;
    Ok(c_norm * total)
}

/// `|(-Δ)^s(uv) - v(-Δ)^s u - u(-Δ)^s v + I_s[u, v]|` at `z`.
pub fn product_rule_residual(u: &SmoothField, v: &SmoothField, z: &[f64], s: f64, cfg: &PvConfig) -> Result<f64> {
    let uv = SmoothField::product(u, v);
    let l_uv = frac_laplacian_pv(&uv, z, s, cfg)?;
    let l_u = frac_laplacian_pv(u, z, s, cfg)?;
    let l_v = frac_laplacian_pv(v, z, s, cfg)?;
    let i_uv = bilinear_i_s(u, v, z, s, cfg)?;
    Ok((l_uv - v.value(z) * l_u - u.value(z) * l_v + i_uv).abs())
}

/// `|(-Δ)^s H_s(x, ·)(z)|` for `H_s(x, ·)` continued by `F_s(x, ·)` outside
/// the ball; zero in exact arithmetic for every interior `z`.
pub fn s_harmonicity_residual(green: &FractionalGreen, x: &[f64], z: &[f64], cfg: &PvConfig) -> Result<f64> {
    let ball = green.ball();
    ball.check_interior(x)?;
    ball.check_interior(z)?;
    let margin = ball.dist_to_boundary(z)?;
    if margin < cfg.boundary_margin * ball.radius() {
        return Err(Error::BudgetExceeded(format!(
            "z is {margin:.3e} from the boundary, below the configured margin {}",
            cfg.boundary_margin
        )));
    }
    let field = SmoothField::extended_regular_part(*green, Point::new(x.to_vec()));
    Ok(frac_laplacian_pv(&field, z, green.params().s(), cfg)?.abs())
}
