//! The ball `B_R(0) ⊂ R^N`, its signed distance and normals, and quadrature
//! rules on the boundary sphere.

use std::f64::consts::PI;
use std::ops::Deref;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::special::sphere_area;

/// A point of `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    /// `t·e_axis`.
    pub fn on_axis(n: usize, axis: usize, t: f64) -> Self {
        let mut c = vec![0.0; n];
        c[axis] = t;
        Point(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// `self + t·dir`.
    pub fn offset(&self, dir: &[f64], t: f64) -> Point {
        Point(self.0.iter().zip(dir).map(|(a, d)| a + t * d).collect())
    }

    pub fn scaled(&self, t: f64) -> Point {
        Point(self.0.iter().map(|a| a * t).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Point {
        Point(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pairwise (cascade) summation with a fixed split point, so the rounding
/// pattern depends only on the length of the slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// The ball of radius `R` centred at the origin of `R^N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallDomain {
    n: usize,
    radius: f64,
}

impl BallDomain {
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("ball dimension must be at least 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParams(format!("radius must be positive and finite, got {radius}")));
        }
        Ok(Self { n, radius })
    }

    pub fn unit(n: usize) -> Self {
        Self { n, radius: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub(crate) fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: z.len() });
        }
        if !z.iter().all(|c| c.is_finite()) {
            return Err(Error::domain("point has non-finite coordinates"));
        }
        Ok(())
    }

    /// Errors unless `z` lies in the open ball.
    pub(crate) fn check_interior(&self, z: &[f64]) -> Result<()> {
        self.check_dim(z)?;
        let r = norm(z);
        if r >= self.radius {
            return Err(Error::OutsideDomain { norm: r, radius: self.radius });
        }
        Ok(())
    }

    /// Signed distance `R - |z|`: positive inside, negative outside.
    pub fn dist_to_boundary(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.radius - norm(z))
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, sigma: &[f64]) -> Result<Point> {
        self.check_dim(sigma)?;
        let r = norm(sigma);
        if (r - self.radius).abs() > 1e-10 {
            return Err(Error::NotOnBoundary { norm: r, radius: self.radius });
        }
        Ok(Point(sigma.iter().map(|c| c / r).collect()))
    }

    /// Deterministic rule on `∂B_R`: the two-point counting measure for
    /// `N = 1`, an `order`-node trapezoid rule for `N = 2`, and for `N = 3`
    /// `order` Gauss–Legendre nodes in `cos θ` times `2·order` trapezoid
    /// nodes in azimuth.
    pub fn boundary_quadrature(&self, order: usize) -> Result<SphereRule> {
        if order < 1 {
            return Err(Error::InvalidOrder("quadrature order must be at least 1".into()));
        }
        let r = self.radius;
        let (normals, weights, exactness_degree) = match self.n {
            1 => (vec![Point(vec![-1.0]), Point(vec![1.0])], vec![1.0, 1.0], usize::MAX),
            2 => {
                let w = 2.0 * PI * r / order as f64;
                let normals = (0..order)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / order as f64;
                        Point(vec![t.cos(), t.sin()])
                    })
                    .collect();
                (normals, vec![w; order], order - 1)
            }
            3 => {
                let (mu, wmu) = gauss_legendre(order);
                let m = 2 * order;
                let dphi = 2.0 * PI / m as f64;
                let mut normals = Vec::with_capacity(order * m);
                let mut weights = Vec::with_capacity(order * m);
                for (&c, &wc) in mu.iter().zip(&wmu) {
                    let st = (1.0 - c * c).sqrt();
                    for k in 0..m {
                        let phi = dphi * k as f64;
                        normals.push(Point(vec![st * phi.cos(), st * phi.sin(), c]));
                        weights.push(r * r * wc * dphi);
                    }
                }
                (normals, weights, 2 * order - 1)
            }
            n => return Err(Error::UnsupportedDimension(n)),
        };
        let nodes = normals.iter().map(|u| u.scaled(r)).collect();
        Ok(SphereRule { dim: self.n, radius: r, nodes, normals, weights, exactness_degree, sampled: false })
    }

    /// Equal-weight rule on uniformly sampled sphere points (any `N`).
    /// Only exact for constants; reports flag it as sampled.
    pub fn sampled_boundary_rule(&self, count: usize, seed: u64) -> Result<SphereRule> {
        if count < 1 {
            return Err(Error::InvalidOrder("sampled rule needs at least one node".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normals = Vec::with_capacity(count);
        while normals.len() < count {
            let v: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = norm(&v);
            if len > 1e-12 {
                normals.push(Point(v.iter().map(|c| c / len).collect()));
            }
        }
        let total = sphere_area(self.n) * self.radius.powi(self.n as i32 - 1);
        let weights = vec![total / count as f64; count];
        let nodes = normals.iter().map(|u| u.scaled(self.radius)).collect();
        Ok(SphereRule { dim: self.n, radius: self.radius, nodes, normals, weights, exactness_degree: 0, sampled: true })
    }
}

/// Nodes, outward normals and positive weights on `∂B_R`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub radius: f64,
    pub nodes: Vec<Point>,
    pub normals: Vec<Point>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub exactness_degree: usize,
    pub sampled: bool,
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_q w_q f(σ_q, ν_q)`. Node evaluations run on the rayon pool; the
    /// reduction is a pairwise sum in node order, so the result does not
    /// depend on the number of threads.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&Point, &Point) -> f64 + Sync,
    {
        let terms: Vec<f64> =
            (0..self.len()).into_par_iter().map(|q| self.weights[q] * f(&self.nodes[q], &self.normals[q])).collect();
        pairwise_sum(&terms)
    }

    pub fn try_integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&Point, &Point) -> Result<f64> + Sync,
    {
        let terms: Result<Vec<f64>> = (0..self.len())
            .into_par_iter()
            .map(|q| Ok(self.weights[q] * f(&self.nodes[q], &self.normals[q])?))
            .collect();
        Ok(pairwise_sum(&terms?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma_fn;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn signed_distance() {
        let d = BallDomain::unit(3);
        assert_eq!(d.dist_to_boundary(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(d.dist_to_boundary(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let d2 = BallDomain::new(3, 2.0).unwrap();
        assert_eq!(d2.dist_to_boundary(&[3.0, 0.0, 0.0]).unwrap(), -1.0);
        assert!(matches!(d.dist_to_boundary(&[0.0, 0.0]), Err(Error::DimensionMismatch { expected: 3, got: 2 })));
    }

    #[test]
    fn normals() {
        let d = BallDomain::new(3, 2.5).unwrap();
        assert_eq!(d.outward_normal(&[2.5, 0.0, 0.0]).unwrap().coords(), &[1.0, 0.0, 0.0]);
        let d2 = BallDomain::new(2, 0.7).unwrap();
        assert_eq!(d2.outward_normal(&[0.0, -0.7]).unwrap().coords(), &[0.0, -1.0]);
        let sigma = [1.5, -2.0, 0.0];
        let nu = d.outward_normal(&sigma).unwrap();
        assert!((nu.norm() - 1.0).abs() < 1e-14);
        assert!((dot(&sigma, &nu) - 2.5).abs() < 1e-14);
        assert!(matches!(d.outward_normal(&[1.0, 0.0, 0.0]), Err(Error::NotOnBoundary { .. })));
    }

    #[test]
    fn counting_rule_in_one_dimension() {
        let rule = BallDomain::unit(1).boundary_quadrature(7).unwrap();
        assert_eq!(rule.nodes, vec![Point(vec![-1.0]), Point(vec![1.0])]);
        assert_eq!(rule.weights, vec![1.0, 1.0]);
    }

    #[test]
    fn circle_length() {
        let rule = BallDomain::unit(2).boundary_quadrature(16).unwrap();
        assert!((rule.weights.iter().sum::<f64>() - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn sphere_second_moment() {
        let rule = BallDomain::unit(3).boundary_quadrature(20).unwrap();
        let m = rule.integrate(|s, _| s[0] * s[0]);
        assert!(rel(m, 4.0 * PI / 3.0) < 1e-13);
    }

    #[test]
    fn rejects_bad_orders_and_dimensions() {
        assert!(matches!(BallDomain::unit(3).boundary_quadrature(0), Err(Error::InvalidOrder(_))));
        assert!(matches!(BallDomain::unit(4).boundary_quadrature(8), Err(Error::UnsupportedDimension(4))));
        assert!(BallDomain::new(3, 0.0).is_err());
        assert!(BallDomain::new(3, f64::NAN).is_err());
    }

    #[test]
    fn total_weight_and_node_radius() {
        for n in 1..=3 {
            for r in [0.5, 1.0, 3.0] {
                let d = BallDomain::new(n, r).unwrap();
                let area = sphere_area(n) * r.powi(n as i32 - 1);
                for order in [2, 5, 12, 33] {
                    let rule = d.boundary_quadrature(order).unwrap();
                    assert!(rel(pairwise_sum(&rule.weights), area) <= 1e-13);
                    assert!(rule.weights.iter().all(|&w| w > 0.0));
                    for p in &rule.nodes {
                        assert!((p.norm() - r).abs() <= 1e-13 * r);
                    }
                }
            }
        }
    }

    /// `∫_{S^2} x^a y^b z^c dσ` from the gamma-function moment formula.
    fn sphere_moment(a: u32, b: u32, c: u32) -> f64 {
        if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
            return 0.0;
        }
        let (al, be, ga) = ((a as f64 + 1.0) / 2.0, (b as f64 + 1.0) / 2.0, (c as f64 + 1.0) / 2.0);
        2.0 * gamma_fn(al).unwrap() * gamma_fn(be).unwrap() * gamma_fn(ga).unwrap() / gamma_fn(al + be + ga).unwrap()
    }

    #[test]
    fn product_rule_exactness_on_monomials() {
        let order = 6;
        let rule = BallDomain::unit(3).boundary_quadrature(order).unwrap();
        assert_eq!(rule.exactness_degree, 11);
        for a in 0..=11u32 {
            for b in 0..=(11 - a) {
                for c in 0..=(11 - a - b) {
                    let got = rule.integrate(|s, _| s[0].powi(a as i32) * s[1].powi(b as i32) * s[2].powi(c as i32));
                    let want = sphere_moment(a, b, c);
                    assert!((got - want).abs() < 1e-13, "x^{a} y^{b} z^{c}: {got} vs {want}");
                }
            }
        }
        let circle = BallDomain::unit(2).boundary_quadrature(9).unwrap();
        // cos^8 θ over the circle: 2π·35/128
        let got = circle.integrate(|s, _| s[0].powi(8));
        assert!((got - 2.0 * PI * 35.0 / 128.0).abs() < 1e-13);
    }

    #[test]
    fn refinement_decreases_residual() {
        let d = BallDomain::unit(3);
        let f = |s: &Point, _: &Point| 1.0 / (1.0 - 0.5 * s[0] + 0.1 * s[1]).powi(3);
        let reference = d.boundary_quadrature(128).unwrap().integrate(f);
        let mut last = f64::INFINITY;
        for order in [4, 8, 16, 32] {
            let err = (d.boundary_quadrature(order).unwrap().integrate(f) - reference).abs();
            assert!(err < last || err < 1e-14, "order {order}: {err} vs {last}");
            last = err;
        }
        assert!(last < 1e-13);
    }

    #[test]
    fn rotational_invariance() {
        let d = BallDomain::unit(3);
        let rule = d.boundary_quadrature(30).unwrap();
        let g = |t: f64| (2.0 * t).exp() / (1.6 - t);
        let axes = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.6, -0.48, 0.64]];
        let vals: Vec<f64> = axes.iter().map(|e| rule.integrate(|s, _| g(dot(s, e)))).collect();
        for v in &vals[1..] {
            assert!(rel(*v, vals[0]) < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn sampled_rule_is_reproducible() {
        let d = BallDomain::new(4, 1.5).unwrap();
        let a = d.sampled_boundary_rule(256, 7).unwrap();
        let b = d.sampled_boundary_rule(256, 7).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert!(a.sampled);
        let area = sphere_area(4) * 1.5f64.powi(3);
        assert!(rel(pairwise_sum(&a.weights), area) < 1e-13);
        for p in &a.nodes {
            assert!((p.norm() - 1.5).abs() < 1e-13);
        }
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v: Vec<f64> = (0..10_000).map(|i| 0.1 + (i % 3) as f64 * 1e-9).collect();
        let exact: f64 = 1000.0 + (0..10_000).map(|i| (i % 3) as f64).sum::<f64>() * 1e-9;
        assert!((pairwise_sum(&v) - exact).abs() < 1e-11);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
