//! Both sides of the Pohozaev-type identities for the Green function of the
//! ball, evaluated with boundary quadrature at a sequence of orders.
//!
//! Boundary terms use the trace `G_s(x, ·)/δ^s` (its closed form on `∂B_R`)
//! for `0 < s < 1`, and the normal derivative of `G_1` for `s = 1`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::ball::{dist, dot, BallDomain, Point, SphereRule};
use crate::error::{Error, Result};
use crate::kernels::{grad_mollified_v, mollified_dirac, FractionalGreen, LocalGreen, Slot};
use crate::quad::gauss_legendre;
use crate::special::{gamma_fn, sphere_area, FracParams};

/// Points closer than this fraction of `R` to the boundary get a warning.
pub const BOUNDARY_WARNING_FRACTION: f64 = 0.05;

/// Largest node count used by the sampled rule in dimensions `N ≥ 4`.
pub const MAX_SAMPLED_NODES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentityId {
    /// `R_s(x)` against the squared-trace boundary integral.
    Robin,
    /// Bilinear identity with weight `⟨σ - x, ν⟩`.
    Bilinear,
    /// Bilinear identity with weight `⟨σ - ξ, ν⟩`; needs `s > 1/2`.
    BilinearGeneral,
    /// Difference of two general identities, weight `⟨x - y, ν⟩`.
    Difference,
    /// The `s = 1` identity with normal derivatives.
    LocalBilinear,
    /// The `s = 1` vector identity, one axis at a time.
    LocalVector,
}

impl IdentityId {
    pub const ALL: [IdentityId; 6] = [
        IdentityId::Robin,
        IdentityId::Bilinear,
        IdentityId::BilinearGeneral,
        IdentityId::Difference,
        IdentityId::LocalBilinear,
        IdentityId::LocalVector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IdentityId::Robin => "robin",
            IdentityId::Bilinear => "bilinear",
            IdentityId::BilinearGeneral => "bilinear-general",
            IdentityId::Difference => "difference",
            IdentityId::LocalBilinear => "local",
            IdentityId::LocalVector => "local-vector",
        }
    }

    pub fn is_local(self) -> bool {
        matches!(self, IdentityId::LocalBilinear | IdentityId::LocalVector)
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IdentityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IdentityId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown identity '{s}'")))
    }
}

/// Everything needed to evaluate one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityProblem {
    pub identity: IdentityId,
    pub dim: usize,
    /// Ignored (taken as 1) by the local identities.
    pub s: f64,
    pub radius: f64,
    pub x: Point,
    pub y: Option<Point>,
    pub xi: Option<Point>,
    pub axis: Option<usize>,
    /// Seed of the sampled sphere rule used for `N ≥ 4`.
    pub seed: u64,
}

impl IdentityProblem {
    pub fn new(identity: IdentityId, dim: usize, s: f64, radius: f64, x: Point) -> Self {
        Self { identity, dim, s, radius, x, y: None, xi: None, axis: None, seed: 0 }
    }

    pub fn with_y(mut self, y: Point) -> Self {
        self.y = Some(y);
        self
    }

    pub fn with_xi(mut self, xi: Point) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn with_axis(mut self, axis: usize) -> Self {
        self.axis = Some(axis);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn effective_s(&self) -> f64 {
        if self.identity.is_local() {
            1.0
        } else {
            self.s
        }
    }

    fn require_y(&self) -> Result<&Point> {
        self.y.as_ref().ok_or_else(|| Error::Config(format!("identity '{}' needs a second point y", self.identity)))
    }

    fn require_xi(&self) -> Result<&Point> {
        self.xi.as_ref().ok_or_else(|| Error::Config(format!("identity '{}' needs a centre point xi", self.identity)))
    }

    /// Checks every precondition of the identity without integrating.
    pub fn validate(&self) -> Result<()> {
        let ball = BallDomain::new(self.dim, self.radius)?;
        let gated = matches!(self.identity, IdentityId::BilinearGeneral | IdentityId::Difference);
        if gated && !(self.s > 0.5 && self.s < 1.0) {
            return Err(Error::Hypothesis(format!(
                "the identity with a free centre xi holds only for 1/2 < s < 1, got s = {}",
                self.s
            )));
        }
        FracParams::new(self.dim, self.effective_s())?;
        ball.check_interior(&self.x)?;
        let needs_y = self.identity != IdentityId::Robin;
        if needs_y {
            let y = self.require_y()?;
            ball.check_interior(y)?;
            if dist(&self.x, y) == 0.0 {
                return Err(Error::CoincidentPoints);
            }
        }
        match self.identity {
            IdentityId::Robin | IdentityId::Bilinear => {
                if self.s >= 1.0 {
                    return Err(Error::InvalidParams("this identity needs 0 < s < 1".into()));
                }
            }
            IdentityId::BilinearGeneral => ball.check_dim(self.require_xi()?)?,
            IdentityId::Difference => {}
            IdentityId::LocalBilinear => {
                LocalGreen::new(ball)?;
                ball.check_dim(self.require_xi()?)?;
            }
            IdentityId::LocalVector => {
                LocalGreen::new(ball)?;
                let axis = self.axis.ok_or_else(|| Error::Config("identity 'local-vector' needs an axis".into()))?;
                if axis >= self.dim {
                    return Err(Error::InvalidParams(format!("axis {axis} out of range for N = {}", self.dim)));
                }
            }
        }
        Ok(())
    }
}

/// One row of the refinement table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub order: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub seconds: f64,
}

/// Both sides of an identity at the highest requested order, with the
/// refinement history over all orders.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub identity_id: IdentityId,
    pub problem: IdentityProblem,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub quad_order: usize,
    pub history: Vec<HistoryEntry>,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
}

impl IdentityReport {
    /// `(order, residual)` pairs.
    pub fn refinement_history(&self) -> Vec<(usize, f64)> {
        self.history.iter().map(|h| (h.order, h.abs_residual)).collect()
    }

    /// First order from which three consecutive residuals stay within twice
    /// the noise floor.
    pub fn plateau_order(&self) -> Option<usize> {
        let scale = self.lhs.abs().max(self.rhs.abs());
        plateau(&self.history, scale)
    }
}

fn plateau(history: &[HistoryEntry], scale: f64) -> Option<usize> {
    if history.len() < 3 {
        return None;
    }
    let floor = history.iter().map(|h| h.abs_residual).fold(f64::INFINITY, f64::min).max(64.0 * f64::EPSILON * scale);
    history.windows(3).find(|w| w.iter().all(|h| h.abs_residual <= 2.0 * floor)).map(|w| w[0].order)
}

fn rel_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

fn boundary_rule(ball: &BallDomain, order: usize, seed: u64) -> Result<SphereRule> {
    match ball.boundary_quadrature(order) {
        Err(Error::UnsupportedDimension(n)) => {
            let count = order.checked_pow((n - 1) as u32).unwrap_or(usize::MAX).min(MAX_SAMPLED_NODES);
            ball.sampled_boundary_rule(count, seed)
        }
        other => other,
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

fn sides(problem: &IdentityProblem, rule: &SphereRule) -> Result<(f64, f64)> {
    let ball = BallDomain::new(problem.dim, problem.radius)?;
    let x = &problem.x;
    if problem.identity.is_local() {
        let g1 = LocalGreen::new(ball)?;
        let y = problem.require_y()?;
        let product =
            |sig: &Point| -> Result<f64> { Ok(g1.normal_derivative_g1(x, sig)? * g1.normal_derivative_g1(y, sig)?) };
        // ∇_x H(y, x) and ∇_y H(x, y)
        let gx = g1.grad_h1(y, x, Slot::Second)?;
        let gy = g1.grad_h1(x, y, Slot::Second)?;
        return match problem.identity {
            IdentityId::LocalBilinear => {
                let xi = problem.require_xi()?;
                let lhs = rule.try_integrate(|sig, nu| Ok(product(sig)? * dot(&diff(sig, xi), nu)))?;
                let n = problem.dim as f64;
                let rhs = (n - 2.0) * g1.regular1_h(x, y)? + dot(&gx, &diff(x, xi)) + dot(&gy, &diff(y, xi));
                Ok((lhs, rhs))
            }
            _ => {
                let i = problem.axis.unwrap_or(0);
                let lhs = rule.try_integrate(|sig, nu| Ok(product(sig)? * nu[i]))?;
                Ok((lhs, gx[i] + gy[i]))
            }
        };
    }

    let p = FracParams::new(problem.dim, problem.s)?;
    let green = FractionalGreen::new(p, ball)?;
    let s = p.s();
    let n_2s = problem.dim as f64 - 2.0 * s;
    let g2 = gamma_fn(1.0 + s)?.powi(2);
    match problem.identity {
        IdentityId::Robin => {
            let lhs = green.robin(x)?;
            let sum = rule.try_integrate(|sig, nu| {
                let t = green.boundary_trace(x, sig)?;
                Ok(t * t * dot(&diff(sig, x), nu))
            })?;
            Ok((lhs, g2 / n_2s * sum))
        }
        _ => {
            let y = problem.require_y()?;
            let weighted = |center: Option<&[f64]>, shift: Option<Vec<f64>>| {
                rule.try_integrate(|sig, nu| {
                    let t = green.boundary_trace(x, sig)? * green.boundary_trace(y, sig)?;
                    let w = match (&center, &shift) {
                        (Some(c), _) => dot(&diff(sig, c), nu),
                        (None, Some(v)) => dot(v, nu),
                        (None, None) => unreachable!("weight needs a centre or a vector"),
                    };
                    Ok(t * w)
                })
            };
            let gx = green.grad_h(y, x, Slot::Second)?;
            let gy = green.grad_h(x, y, Slot::Second)?;
            match problem.identity {
                IdentityId::Bilinear => {
                    let lhs = g2 * weighted(Some(x), None)?;
                    let rhs = n_2s * green.regular_part_h(x, y)? + dot(&gy, &diff(y, x));
                    Ok((lhs, rhs))
                }
                IdentityId::BilinearGeneral => {
                    let xi = problem.require_xi()?;
                    let lhs = g2 * weighted(Some(xi), None)?;
                    let rhs = n_2s * green.regular_part_h(x, y)? + dot(&gx, &diff(x, xi)) + dot(&gy, &diff(y, xi));
                    Ok((lhs, rhs))
                }
                _ => {
                    let xy = diff(x, y);
                    let lhs = g2 * weighted(None, Some(xy.clone()))?;
                    let sum: Vec<f64> = gx.iter().zip(gy.iter()).map(|(a, b)| a + b).collect();
                    Ok((lhs, dot(&sum, &xy)))
                }
            }
        }
    }
}

/// Evaluates the identity at every order in `orders` (strictly increasing)
/// and reports the last one.
pub fn run_identity(problem: &IdentityProblem, orders: &[usize]) -> Result<IdentityReport> {
    if orders.is_empty() {
        return Err(Error::InvalidOrder("at least one quadrature order is required".into()));
    }
    if orders.contains(&0) || orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidOrder(format!("orders must be positive and strictly increasing, got {orders:?}")));
    }
    problem.validate()?;
    let ball = BallDomain::new(problem.dim, problem.radius)?;
    let start = Instant::now();
    let mut warnings = Vec::new();
    let mut history = Vec::with_capacity(orders.len());
    for &order in orders {
        let t0 = Instant::now();
        let rule = boundary_rule(&ball, order, problem.seed)?;
        if rule.sampled && history.is_empty() {
            warnings.push(format!(
                "N = {} uses a sampled sphere rule ({} nodes at order {order}, seed {}); residuals are statistical",
                problem.dim,
                rule.len(),
                problem.seed
            ));
        }
        let (lhs, rhs) = sides(problem, &rule)?;
        if !(lhs.is_finite() && rhs.is_finite()) {
            return Err(Error::domain(format!("non-finite identity sides at order {order}")));
        }
        history.push(HistoryEntry {
            order,
            lhs,
            rhs,
            abs_residual: (lhs - rhs).abs(),
            rel_residual: rel_residual(lhs, rhs),
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let mut pts: Vec<(&str, &Point)> = vec![("x", &problem.x)];
    if let Some(y) = &problem.y {
        pts.push(("y", y));
    }
    for (name, pt) in pts {
        let gap = ball.dist_to_boundary(pt)?;
        if gap < BOUNDARY_WARNING_FRACTION * ball.radius() {
            warnings.push(format!(
                "{name} is {gap:.3e} from the boundary; the trace integrand is sharply peaked and needs high orders"
            ));
        }
    }
    let last = *history.last().expect("orders is non-empty");
    let scale = last.lhs.abs().max(last.rhs.abs());
    let at_noise = last.abs_residual <= 128.0 * f64::EPSILON * scale;
    if history.len() >= 3 && !at_noise && plateau(&history, scale).is_none() {
        warnings.push("residuals did not reach a plateau over the requested orders".into());
    }
    Ok(IdentityReport {
        identity_id: problem.identity,
        problem: problem.clone(),
        lhs: last.lhs,
        rhs: last.rhs,
        abs_residual: last.abs_residual,
        rel_residual: last.rel_residual,
        quad_order: last.order,
        history,
        wall_time_s: start.elapsed().as_secs_f64(),
        warnings,
    })
}

pub fn verify_robin_identity(p: FracParams, d: BallDomain, x: &[f64], order: usize) -> Result<IdentityReport> {
    let problem = IdentityProblem::new(IdentityId::Robin, p.dim(), p.s(), d.radius(), Point::new(x.to_vec()));
    run_identity(&problem, &[order])
}

pub fn verify_bilinear(p: FracParams, d: BallDomain, x: &[f64], y: &[f64], order: usize) -> Result<IdentityReport> {
    let problem = IdentityProblem::new(IdentityId::Bilinear, p.dim(), p.s(), d.radius(), Point::new(x.to_vec()))
        .with_y(Point::new(y.to_vec()));
    run_identity(&problem, &[order])
}

pub fn verify_bilinear_general(
    p: FracParams,
    d: BallDomain,
    x: &[f64],
    y: &[f64],
    xi: &[f64],
    order: usize,
) -> Result<IdentityReport> {
    let problem = IdentityProblem::new(IdentityId::BilinearGeneral, p.dim(), p.s(), d.radius(), Point::new(x.to_vec()))
        .with_y(Point::new(y.to_vec()))
        .with_xi(Point::new(xi.to_vec()));
    run_identity(&problem, &[order])
}

pub fn verify_difference_remark(
    p: FracParams,
    d: BallDomain,
    x: &[f64],
    y: &[f64],
    order: usize,
) -> Result<IdentityReport> {
    let problem = IdentityProblem::new(IdentityId::Difference, p.dim(), p.s(), d.radius(), Point::new(x.to_vec()))
        .with_y(Point::new(y.to_vec()));
    run_identity(&problem, &[order])
}

pub fn verify_local_bilinear(d: BallDomain, x: &[f64], y: &[f64], xi: &[f64], order: usize) -> Result<IdentityReport> {
    let problem = IdentityProblem::new(IdentityId::LocalBilinear, d.dim(), 1.0, d.radius(), Point::new(x.to_vec()))
        .with_y(Point::new(y.to_vec()))
        .with_xi(Point::new(xi.to_vec()));
    run_identity(&problem, &[order])
}

pub fn verify_local_vector_identity(
    d: BallDomain,
    x: &[f64],
    y: &[f64],
    axis: usize,
    order: usize,
) -> Result<IdentityReport> {
    let problem = IdentityProblem::new(IdentityId::LocalVector, d.dim(), 1.0, d.radius(), Point::new(x.to_vec()))
        .with_y(Point::new(y.to_vec()))
        .with_axis(axis);
    run_identity(&problem, &[order])
}

/// `-∫ δ_{ρ,y}(z) ⟨z - ξ, ∇v_{ρ,x}(z)⟩ dz`, integrated in polar coordinates
/// around `y` (Gauss–Legendre in the radius, the sphere rule in angle).
pub fn mollified_pairing(x: &[f64], y: &[f64], xi: &[f64], rho: f64, order: usize) -> Result<f64> {
    let n = x.len();
    if y.len() != n || xi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if y.len() != n { y.len() } else { xi.len() } });
    }
    let dirs = BallDomain::unit(n).boundary_quadrature(order)?;
    let (gx, gw) = gauss_legendre(order);
    let mut terms = Vec::with_capacity(gx.len() * dirs.len());
    for (t, wt) in gx.iter().zip(&gw) {
        let r = 0.5 * rho * (t + 1.0);
        let radial = 0.5 * rho * wt * r.powi(n as i32 - 1);
        for (theta, wq) in dirs.normals.iter().zip(&dirs.weights) {
            let z: Vec<f64> = y.iter().zip(theta.iter()).map(|(a, b)| a + r * b).collect();
            let g = grad_mollified_v(x, rho, &z)?;
            terms.push(-radial * wq * mollified_dirac(y, rho, &z)? * dot(&diff(&z, xi), &g));
        }
    }
    Ok(crate::ball::pairwise_sum(&terms))
}

/// `⟨y - ξ, y - x⟩ / (σ_N |x - y|^N)`, the `ρ → 0` limit of [`mollified_pairing`].
pub fn mollified_pairing_limit(x: &[f64], y: &[f64], xi: &[f64]) -> Result<f64> {
    let n = x.len();
    let d = dist(x, y);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(dot(&diff(y, xi), &diff(y, x)) / (sphere_area(n) * d.powi(n as i32)))
}
