//! Closed-form kernels on the ball `B_R(0)`.
//!
//! For `0 < s < 1` the Green function is the Blumenthal–Getoor–Ray integral
//!
//! ```text
//! G_s(x, y) = κ |x - y|^{2s-N} ∫_0^{r0} t^{s-1} (1 + t)^{-N/2} dt,
//! r0 = (R² - |x|²)(R² - |y|²) / (R² |x - y|²),
//! ```
//!
//! and the substitution `u = t/(1+t)` turns the integral into an incomplete
//! beta function. The regular part `H_s = F_s - G_s` is the same expression
//! with the upper tail `∫_{r0}^∞`, evaluated directly so that no cancellation
//! between `F_s` and `G_s` occurs. The Robin function and the boundary trace
//! are the `r0 → ∞` and `r0 → 0` limits of that representation.
//!
//! For `s = 1` the classical Green function comes from Kelvin reflection.

use crate::ball::{dist, dot, norm, BallDomain, Point};
use crate::error::{Error, Result};
use crate::special::{incomplete_beta_split, sphere_area, ConstantSet, FracParams};

/// Below `COINCIDENCE_RATIO · R` the regular part is taken from the Robin
/// function at the midpoint.
pub const COINCIDENCE_RATIO: f64 = 1e-8;

/// Slack allowed when deciding that a point lies on `∂B_R`.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Which argument a gradient is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    AnalyticLimit,
    FiniteDifference,
}

/// A kernel value with an optional gradient and the route that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEval {
    pub value: f64,
    pub grad: Option<Point>,
    pub method: Method,
}

fn axpy(a: f64, x: &[f64], b: f64, y: &[f64]) -> Point {
    Point::new(x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect())
}

/// Fractional (`0 < s < 1`) kernels on a ball.
#[derive(Debug, Clone, Copy)]
pub struct FractionalGreen {
    params: FracParams,
    ball: BallDomain,
    consts: ConstantSet,
}

impl FractionalGreen {
    pub fn new(params: FracParams, ball: BallDomain) -> Result<Self> {
        if params.is_local() {
            return Err(Error::InvalidParams("s = 1 is handled by LocalGreen".into()));
        }
        if params.dim() != ball.dim() {
            return Err(Error::DimensionMismatch { expected: params.dim(), got: ball.dim() });
        }
        Ok(Self { params, ball, consts: params.constants() })
    }

    pub fn params(&self) -> FracParams {
        self.params
    }

    pub fn ball(&self) -> BallDomain {
        self.ball
    }

    pub fn constants(&self) -> ConstantSet {
        self.consts
    }

    fn nf(&self) -> f64 {
        self.params.dim() as f64
    }

    /// `2s - N`.
    fn expo(&self) -> f64 {
        2.0 * self.params.s() - self.nf()
    }

    /// `R² - |z|²`, computed as `(R - |z|)(R + |z|)`.
    fn gap(&self, z: &[f64]) -> f64 {
        let r = self.ball.radius();
        let nz = norm(z);
        (r - nz) * (r + nz)
    }

    fn check_closed(&self, z: &[f64]) -> Result<()> {
        self.ball.check_dim(z)?;
        let nz = norm(z);
        if nz > self.ball.radius() * (1.0 + BOUNDARY_TOL) {
            return Err(Error::OutsideDomain { norm: nz, radius: self.ball.radius() });
        }
        Ok(())
    }

    fn check_boundary(&self, sigma: &[f64]) -> Result<()> {
        self.ball.check_dim(sigma)?;
        let ns = norm(sigma);
        if (ns - self.ball.radius()).abs() > BOUNDARY_TOL * self.ball.radius().max(1.0) {
            return Err(Error::NotOnBoundary { norm: ns, radius: self.ball.radius() });
        }
        Ok(())
    }

    /// `r0` together with `u0 = r0/(1+r0)` and `uc = 1/(1+r0)`.
    fn r0(&self, x: &[f64], y: &[f64], d: f64) -> (f64, f64, f64) {
        let r = self.ball.radius();
        let gx = self.gap(x).max(0.0);
        let gy = self.gap(y).max(0.0);
        let r0 = gx * gy / (r * r * d * d);
        (r0, r0 / (1.0 + r0), 1.0 / (1.0 + r0))
    }

    /// Fundamental solution `b_{N,s}|x - z|^{2s-N}`.
    pub fn fundamental_f(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.ball.check_dim(x)?;
        self.ball.check_dim(z)?;
        let d = dist(x, z);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(self.consts.b_fund * d.powf(self.expo()))
    }

    /// Gradient of `F_s(x, z)` with respect to the chosen argument.
    pub fn grad_f(&self, x: &[f64], z: &[f64], slot: Slot) -> Result<Point> {
        let f = self.fundamental_f(x, z)?;
        let d2 = dist(x, z).powi(2);
        let coef = self.expo() * f / d2;
        Ok(match slot {
            Slot::Second => axpy(coef, z, -coef, x),
            Slot::First => axpy(coef, x, -coef, z),
        })
    }

    /// Ball Green function `G_s(x, y)`; zero when `y` is on the boundary.
    pub fn ball_green_g(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_closed(x)?;
        self.check_closed(y)?;
        let d = dist(x, y);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        let s = self.params.s();
        let (_, u0, uc) = self.r0(x, y, d);
        let inner = incomplete_beta_split(u0, uc, s, self.nf() / 2.0 - s)?;
        Ok(self.consts.kappa_bgr * d.powf(self.expo()) * inner)
    }

    /// Gradient of `G_s(x, y)`; differentiated directly from the integral
    /// representation rather than as `∇F - ∇H`.
    pub fn grad_g(&self, x: &[f64], y: &[f64], slot: Slot) -> Result<Point> {
        let (x, y) = match slot {
            Slot::Second => (x, y),
            Slot::First => (y, x),
        };
        self.ball.check_interior(x)?;
        self.ball.check_interior(y)?;
        let d = dist(x, y);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        let s = self.params.s();
        let (r0, u0, uc) = self.r0(x, y, d);
        let lower = incomplete_beta_split(u0, uc, s, self.nf() / 2.0 - s)?;
        let kap = self.consts.kappa_bgr;
        let dp = d.powf(self.expo());
        let edge = 2.0 * dp * r0.powf(s) * (1.0 + r0).powf(-self.nf() / 2.0);
        let gy = self.gap(y);
        // κ[(2s-N) d^{2s-N-2} L (y-x) - edge·(y/(R²-|y|²) + (y-x)/d²)]
        let a = kap * (self.expo() * dp * lower / (d * d) - edge / (d * d));
        let b = -kap * edge / gy;
        Ok(Point::new(x.iter().zip(y).map(|(xi, yi)| a * (yi - xi) + b * yi).collect()))
    }

    /// Regular part `H_s(x, y)` as a plain value.
    pub fn regular_part_h(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.eval_h(x, y, None)?.value)
    }

    /// Regular part with optional gradient and the method used.
    pub fn eval_h(&self, x: &[f64], y: &[f64], grad: Option<Slot>) -> Result<KernelEval> {
        self.check_closed(x)?;
        self.check_closed(y)?;
        let d = dist(x, y);
        if d < COINCIDENCE_RATIO * self.ball.radius() {
            // H is smooth and symmetric, so H(m+e, m-e) = R(m) + O(|e|²)
            let mid = axpy(0.5, x, 0.5, y);
            let value = self.robin(&mid)?;
            let grad = match grad {
                Some(_) => Some(self.grad_robin(&mid)?.scaled(0.5)),
                None => None,
            };
            return Ok(KernelEval { value, grad, method: Method::AnalyticLimit });
        }
        let s = self.params.s();
        let (_, u0, uc) = self.r0(x, y, d);
        let tail = incomplete_beta_split(uc, u0, self.nf() / 2.0 - s, s)?;
        let value = self.consts.kappa_bgr * d.powf(self.expo()) * tail;
        let grad = match grad {
            Some(slot) => Some(self.grad_h(x, y, slot)?),
            None => None,
        };
        Ok(KernelEval { value, grad, method: Method::ClosedForm })
    }

    /// Gradient of `H_s(x, y)` in the chosen argument. The derivative of the
    /// tail integral is minus the integrand at `r0` times `∇r0`.
    pub fn grad_h(&self, x: &[f64], y: &[f64], slot: Slot) -> Result<Point> {
        let (x, y) = match slot {
            Slot::Second => (x, y),
            // H is symmetric: ∇_x H(x, y) = (∇_2 H)(y, x)
            Slot::First => (y, x),
        };
        self.ball.check_interior(x)?;
        self.ball.check_interior(y)?;
        let d = dist(x, y);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        if d < COINCIDENCE_RATIO * self.ball.radius() {
            let mid = axpy(0.5, x, 0.5, y);
            return Ok(self.grad_robin(&mid)?.scaled(0.5));
        }
        let s = self.params.s();
        let (r0, u0, uc) = self.r0(x, y, d);
        let tail = incomplete_beta_split(uc, u0, self.nf() / 2.0 - s, s)?;
        let kap = self.consts.kappa_bgr;
        let dp = d.powf(self.expo());
        let edge = 2.0 * dp * r0.powf(s) * (1.0 + r0).powf(-self.nf() / 2.0);
        let gy = self.gap(y);
        let a = kap * (self.expo() * dp * tail / (d * d) + edge / (d * d));
        let b = kap * edge / gy;
        Ok(Point::new(x.iter().zip(y).map(|(xi, yi)| a * (yi - xi) + b * yi).collect()))
    }

    /// Robin function `R_s(x) = H_s(x, x)`:
    /// `2κ/(N-2s) · R^{N-2s} (R² - |x|²)^{2s-N}`.
    pub fn robin(&self, x: &[f64]) -> Result<f64> {
        self.ball.check_interior(x)?;
        let n_2s = -self.expo();
        let r = self.ball.radius();
        Ok(2.0 * self.consts.kappa_bgr / n_2s * r.powf(n_2s) * self.gap(x).powf(self.expo()))
    }

    /// `∇R_s(x) = -2(2s-N) R_s(x) x / (R² - |x|²)`.
    pub fn grad_robin(&self, x: &[f64]) -> Result<Point> {
        let rob = self.robin(x)?;
        let c = -2.0 * self.expo() * rob / self.gap(x);
        Ok(Point::new(x.iter().map(|xi| c * xi).collect()))
    }

    /// Boundary trace `lim G_s(x, y)/δ(y)^s` as `y → σ`:
    /// `(2^s κ / s) (R² - |x|²)^s / (R^s |x - σ|^N)`.
    pub fn boundary_trace(&self, x: &[f64], sigma: &[f64]) -> Result<f64> {
        self.ball.check_interior(x)?;
        self.check_boundary(sigma)?;
        let s = self.params.s();
        let r = self.ball.radius();
        Ok(2f64.powf(s) * self.consts.kappa_bgr / s * (self.gap(x) / r).powf(s)
            / dist(x, sigma).powi(self.params.dim() as i32))
    }
}

/// Classical (`s = 1`) kernels on a ball, `N > 2`.
#[derive(Debug, Clone, Copy)]
pub struct LocalGreen {
    ball: BallDomain,
    sigma_n: f64,
    c1: f64,
}

impl LocalGreen {
    pub fn new(ball: BallDomain) -> Result<Self> {
        let n = ball.dim();
        if n <= 2 {
            return Err(Error::InvalidParams(format!("the local kernels need N > 2, got N = {n}")));
        }
        let sigma_n = sphere_area(n);
        Ok(Self { ball, sigma_n, c1: 1.0 / ((n as f64 - 2.0) * sigma_n) })
    }

    pub fn ball(&self) -> BallDomain {
        self.ball
    }

    fn nf(&self) -> f64 {
        self.ball.dim() as f64
    }

    /// `|x|²|y - x*|²/R²` with `x* = R²x/|x|²`, expanded so that `x = 0`
    /// (where it equals `R²`) needs no separate branch. Symmetric in `x, y`.
    fn kelvin_q(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2 = self.ball.radius().powi(2);
        (dot(x, x) * dot(y, y) - 2.0 * r2 * dot(x, y) + r2 * r2) / r2
    }

    fn check_pair(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.ball.check_interior(x)?;
        self.ball.check_interior(y)?;
        let d = dist(x, y);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(d)
    }

    pub fn fundamental_f1(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.ball.check_dim(x)?;
        self.ball.check_dim(z)?;
        let d = dist(x, z);
        if d == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(self.c1 * d.powf(2.0 - self.nf()))
    }

    pub fn green1_g(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.check_pair(x, y)?;
        let e = 2.0 - self.nf();
        Ok(self.c1 * (d.powf(e) - self.kelvin_q(x, y).powf(e / 2.0)))
    }

    pub fn regular1_h(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.ball.check_interior(x)?;
        self.ball.check_interior(y)?;
        Ok(self.c1 * self.kelvin_q(x, y).powf(1.0 - self.nf() / 2.0))
    }

    pub fn grad_h1(&self, x: &[f64], y: &[f64], slot: Slot) -> Result<Point> {
        self.ball.check_interior(x)?;
        self.ball.check_interior(y)?;
        let (x, y) = match slot {
            Slot::Second => (x, y),
            Slot::First => (y, x),
        };
        let r2 = self.ball.radius().powi(2);
        let q = self.kelvin_q(x, y);
        // c1 (2-N)/2 q^{-N/2} ∇_y q,   ∇_y q = 2(|x|² y - R² x)/R²
        let c = self.c1 * (2.0 - self.nf()) * q.powf(-self.nf() / 2.0) / r2;
        Ok(axpy(c * dot(x, x), y, -c * r2, x))
    }

    /// `∂_ν G_1(x, σ) = -(R² - |x|²)/(σ_N R |x - σ|^N)`, minus the Poisson kernel.
    pub fn normal_derivative_g1(&self, x: &[f64], sigma: &[f64]) -> Result<f64> {
        self.ball.check_interior(x)?;
        self.ball.check_dim(sigma)?;
        let r = self.ball.radius();
        let ns = norm(sigma);
        if (ns - r).abs() > BOUNDARY_TOL * r.max(1.0) {
            return Err(Error::NotOnBoundary { norm: ns, radius: r });
        }
        let nx = norm(x);
        let gap = (r - nx) * (r + nx);
        Ok(-gap / (self.sigma_n * r * dist(x, sigma).powi(self.ball.dim() as i32)))
    }
}

fn check_mollifier(a: &[f64], rho: f64, z: &[f64]) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("mollifier radius must be positive, got {rho}")));
    }
    if a.len() <= 2 {
        return Err(Error::InvalidParams(format!("the mollified kernels need N > 2, got N = {}", a.len())));
    }
    if z.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: z.len() });
    }
    Ok(sphere_area(a.len()))
}

/// Newtonian potential of the normalised indicator of `B_ρ(a)`: quadratic
/// inside the ball, `F_1(a, ·)` outside.
pub fn mollified_fundamental_v(a: &[f64], rho: f64, z: &[f64]) -> Result<f64> {
    let sigma = check_mollifier(a, rho, z)?;
    let n = a.len() as f64;
    let r = dist(z, a);
    if r < rho {
        Ok(-r * r / (2.0 * sigma * rho.powf(n)) + n / (2.0 * (n - 2.0) * sigma * rho.powf(n - 2.0)))
    } else {
        Ok(1.0 / ((n - 2.0) * sigma * r.powf(n - 2.0)))
    }
}

/// `∇v_{ρ,a}(z)`: `-(z-a)/(σ_N ρ^N)` inside, `-(z-a)/(σ_N |z-a|^N)` outside.
pub fn grad_mollified_v(a: &[f64], rho: f64, z: &[f64]) -> Result<Point> {
    let sigma = check_mollifier(a, rho, z)?;
    let n = a.len() as f64;
    let r = dist(z, a);
    let scale = if r < rho { rho.powf(n) } else { r.powf(n) };
    Ok(axpy(-1.0 / (sigma * scale), z, 1.0 / (sigma * scale), a))
}

/// `δ_{ρ,a} = (N/σ_N) ρ^{-N} χ_{B_ρ(a)}`.
pub fn mollified_dirac(a: &[f64], rho: f64, z: &[f64]) -> Result<f64> {
    let sigma = check_mollifier(a, rho, z)?;
    let n = a.len() as f64;
    Ok(if dist(z, a) < rho { n / sigma * rho.powf(-n) } else { 0.0 })
}
