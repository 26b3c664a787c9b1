//! Analytic test manifolds with exact differential-geometric oracles:
//! nearest-point projection, mean curvature vector, the shape determinant
//! det(I - <v, Pi>) behind the noisy-density expansion, and orthonormal
//! tangent/normal frames.
//!
//! Supported manifolds: circle in R^2, sphere in R^3, torus of revolution in
//! R^3, and the compact portion of the Fermat quartic curve
//! {x^4 + y^4 = 1} in C^2 ~ R^4 with min(|x|, |y|) <= 1. The quartic is a
//! holomorphic curve, so it is minimal; its curvature oracles are
//! intentionally not provided.

use crate::numeric::{dot, norm, normalize, solve_dense, sub};
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// The query is equidistant from several manifold points (beyond reach).
    #[error("degenerate projection: query is equidistant beyond reach")]
    DegenerateProjection,
    /// Newton projection failed to converge within the iteration cap.
    #[error("projection did not converge after {0} iterations")]
    ProjectionDidNotConverge(usize),
    /// The point lies outside the tubular neighborhood of the manifold.
    #[error("point at distance {dist} is outside the reach {reach}")]
    OutOfTube { dist: f64, reach: f64 },
    /// The requested oracle is not available for this manifold.
    #[error("operation not available for {0}")]
    Unsupported(&'static str),
    /// A point that must lie on the manifold does not.
    #[error("point is not on the manifold (constraint residual {0:.3e})")]
    NotOnManifold(f64),
}

/// Conservative reach for the sampled portion of the Fermat quartic.
///
/// The maximal second-fundamental-form norm over the patch grid is ~2.51
/// (curvature radius 0.398, attained near the real "squircle" diagonal),
/// and sheet-to-sheet chords are >= 2^(3/4) ~ 1.19, so 0.35 is a lower
/// bound with margin.
pub const FERMAT_QUARTIC_REACH: f64 = 0.35;

/// On-manifold tolerance for oracle preconditions.
const ON_MANIFOLD_TOL: f64 = 1e-8;

/// An analytic manifold with exact geometric oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticManifold {
    Circle { radius: f64 },
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    FermatQuartic,
}

impl AnalyticManifold {
    pub fn circle(radius: f64) -> Self {
        assert!(radius > 0.0);
        AnalyticManifold::Circle { radius }
    }

    pub fn sphere(radius: f64) -> Self {
        assert!(radius > 0.0);
        AnalyticManifold::Sphere { radius }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        assert!(major > minor && minor > 0.0, "torus requires major > minor > 0");
        AnalyticManifold::Torus { major, minor }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticManifold::Circle { .. } => "circle",
            AnalyticManifold::Sphere { .. } => "sphere",
            AnalyticManifold::Torus { .. } => "torus",
            AnalyticManifold::FermatQuartic => "quartic",
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            AnalyticManifold::Circle { .. } => 1,
            _ => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            AnalyticManifold::Circle { .. } => 2,
            AnalyticManifold::Sphere { .. } | AnalyticManifold::Torus { .. } => 3,
            AnalyticManifold::FermatQuartic => 4,
        }
    }

    pub fn reach(&self) -> f64 {
        match *self {
            AnalyticManifold::Circle { radius } | AnalyticManifold::Sphere { radius } => radius,
            AnalyticManifold::Torus { major, minor } => minor.min(major - minor),
            AnalyticManifold::FermatQuartic => FERMAT_QUARTIC_REACH,
        }
    }

    /// Volume with respect to the induced measure (closed form where it
    /// exists, quadrature for the quartic).
    pub fn volume(&self) -> f64 {
        match *self {
            AnalyticManifold::Circle { radius } => 2.0 * PI * radius,
            AnalyticManifold::Sphere { radius } => 4.0 * PI * radius * radius,
            AnalyticManifold::Torus { major, minor } => 4.0 * PI * PI * major * minor,
            AnalyticManifold::FermatQuartic => quartic_area(),
        }
    }

    /// Distance to the manifold (via projection).
    pub fn distance(&self, z: &[f64]) -> Result<f64, GeometryError> {
        let p = self.project(z)?;
        Ok(norm(&sub(z, &p)))
    }

    /// Nearest-point projection onto the manifold.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>, GeometryError> {
        assert_eq!(z.len(), self.ambient_dim());
        match *self {
            AnalyticManifold::Circle { radius } | AnalyticManifold::Sphere { radius } => {
                let n = norm(z);
                if n < 1e-9 * radius {
                    return Err(GeometryError::DegenerateProjection);
                }
                Ok(z.iter().map(|x| x * radius / n).collect())
            }
            AnalyticManifold::Torus { major, minor } => {
                let rho = (z[0] * z[0] + z[1] * z[1]).sqrt();
                if rho < 1e-9 * major {
                    // on the symmetry axis: every meridian angle is equidistant
                    return Err(GeometryError::DegenerateProjection);
                }
                let core = [major * z[0] / rho, major * z[1] / rho, 0.0];
                let d = sub(z, &core);
                let dn = norm(&d);
                if dn < 1e-9 * minor {
                    // on the core circle: the whole meridian is equidistant
                    return Err(GeometryError::DegenerateProjection);
                }
                Ok((0..3).map(|i| core[i] + minor * d[i] / dn).collect())
            }
            AnalyticManifold::FermatQuartic => quartic_project(z),
        }
    }

    /// Mean curvature vector H = (1/d) Tr(Pi) at an on-manifold point.
    ///
    /// Not available for the Fermat quartic (holomorphic curves are minimal
    /// and the oracle set intentionally excludes it).
    pub fn mean_curvature_vector(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_on_manifold(x)?;
        match *self {
            AnalyticManifold::Circle { radius } | AnalyticManifold::Sphere { radius } => {
                // magnitude 1/R toward the center, independent of d
                Ok(x.iter().map(|c| -c / (radius * radius)).collect())
            }
            AnalyticManifold::Torus { major, minor } => {
                let (k1, k2, n_out) = torus_curvatures(x, major, minor);
                let h = -0.5 * (k1 + k2);
                Ok(n_out.iter().map(|c| h * c).collect())
            }
            AnalyticManifold::FermatQuartic => Err(GeometryError::Unsupported("FermatQuartic")),
        }
    }

    /// det A_y with A_y = I_d - <v_y, Pi_{pi(y)}> for a tube point y.
    ///
    /// Codimension-one manifolds only (circle, sphere, torus); the factors
    /// are (1 + kappa_i s) with kappa_i the principal curvatures with
    /// respect to the outward normal and s the signed offset along it.
    pub fn shape_determinant(&self, y: &[f64]) -> Result<f64, GeometryError> {
        let p = self.project(y)?;
        let v = sub(y, &p);
        let dist = norm(&v);
        if dist >= self.reach() {
            return Err(GeometryError::OutOfTube {
                dist,
                reach: self.reach(),
            });
        }
        match *self {
            AnalyticManifold::Circle { radius } => {
                // outward normal at p is p/R; s > 0 outside
                let s = dot(&v, &p) / radius;
                Ok(1.0 + s / radius)
            }
            AnalyticManifold::Sphere { radius } => {
                let s = dot(&v, &p) / radius;
                let f = 1.0 + s / radius;
                Ok(f * f)
            }
            AnalyticManifold::Torus { major, minor } => {
                let (k1, k2, n_out) = torus_curvatures(&p, major, minor);
                let s = dot(&v, &n_out);
                Ok((1.0 + k1 * s) * (1.0 + k2 * s))
            }
            AnalyticManifold::FermatQuartic => Err(GeometryError::Unsupported("FermatQuartic")),
        }
    }

    /// Orthonormal tangent/normal frame at an on-manifold point.
    ///
    /// Normal directions come from the closed-form outward normal
    /// (constraint gradients for the quartic), tangents complete the frame
    /// by Gram-Schmidt over the coordinate axes.
    pub fn tangent_frame(&self, x: &[f64]) -> Result<TangentFrame, GeometryError> {
        self.check_on_manifold(x)?;
        let normals: Vec<Vec<f64>> = match *self {
            AnalyticManifold::Circle { .. } | AnalyticManifold::Sphere { .. } => {
                vec![normalize(x)]
            }
            AnalyticManifold::Torus { major, minor } => {
                let (_, _, n_out) = torus_curvatures(x, major, minor);
                vec![n_out]
            }
            AnalyticManifold::FermatQuartic => {
                let (g1, g2) = quartic_constraint_gradients(x);
                let n1 = normalize(&g1);
                let mut n2 = sub(&g2, &crate::numeric::scale(&n1, dot(&g2, &n1)));
                n2 = normalize(&n2);
                vec![n1, n2]
            }
        };
        let dim = self.ambient_dim();
        let d = self.intrinsic_dim();
        let mut tangent: Vec<Vec<f64>> = Vec::with_capacity(d);
        for axis in 0..dim {
            if tangent.len() == d {
                break;
            }
            let mut v = vec![0.0; dim];
            v[axis] = 1.0;
            for b in normals.iter().chain(tangent.iter()) {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
            let n = norm(&v);
            if n > 1e-6 {
                tangent.push(v.iter().map(|c| c / n).collect());
            }
        }
        debug_assert_eq!(tangent.len(), d);
        Ok(TangentFrame {
            base: x.to_vec(),
            tangent,
            normal: normals,
        })
    }

    fn check_on_manifold(&self, x: &[f64]) -> Result<(), GeometryError> {
        assert_eq!(x.len(), self.ambient_dim());
        let res = match *self {
            AnalyticManifold::Circle { radius } | AnalyticManifold::Sphere { radius } => {
                (norm(x) - radius).abs()
            }
            AnalyticManifold::Torus { major, minor } => {
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let t = ((rho - major).powi(2) + x[2] * x[2]).sqrt();
                (t - minor).abs()
            }
            AnalyticManifold::FermatQuartic => {
                let (fr, fi) = quartic_constraint(x);
                (fr * fr + fi * fi).sqrt()
            }
        };
        if res > ON_MANIFOLD_TOL {
            Err(GeometryError::NotOnManifold(res))
        } else {
            Ok(())
        }
    }
}

/// Orthonormal frame at a manifold point.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub base: Vec<f64>,
    pub tangent: Vec<Vec<f64>>,
    pub normal: Vec<Vec<f64>>,
}

impl TangentFrame {
    /// Component of `v` inside the tangent space, as an ambient vector.
    pub fn tangential_component(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for t in &self.tangent {
            let c = dot(v, t);
            for (o, ti) in out.iter_mut().zip(t) {
                *o += c * ti;
            }
        }
        out
    }
}

/// Principal curvatures (w.r.t. the outward tube normal) and that normal,
/// at an on-torus point.
fn torus_curvatures(x: &[f64], major: f64, minor: f64) -> (f64, f64, Vec<f64>) {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let cos_theta = (rho - major) / minor;
    let n_out = vec![
        cos_theta * x[0] / rho,
        cos_theta * x[1] / rho,
        x[2] / minor,
    ];
    let k1 = 1.0 / minor;
    let k2 = cos_theta / (major + minor * cos_theta);
    (k1, k2, n_out)
}

// ----- Fermat quartic helpers (R^4 coordinates: (Re x, Im x, Re y, Im y)) -----

#[inline]
fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

#[inline]
fn cpow4(a: (f64, f64)) -> (f64, f64) {
    let a2 = cmul(a, a);
    cmul(a2, a2)
}

#[inline]
fn cpow3(a: (f64, f64)) -> (f64, f64) {
    cmul(cmul(a, a), a)
}

/// Re and Im of x^4 + y^4 - 1 at p in R^4.
pub(crate) fn quartic_constraint(p: &[f64]) -> (f64, f64) {
    let x4 = cpow4((p[0], p[1]));
    let y4 = cpow4((p[2], p[3]));
    (x4.0 + y4.0 - 1.0, x4.1 + y4.1)
}

/// Gradients of the two real constraints. For holomorphic f with
/// f_x = 4x^3, f_y = 4y^3: grad Re f = (Re f_x, -Im f_x, Re f_y, -Im f_y)
/// and grad Im f = (Im f_x, Re f_x, Im f_y, Re f_y).
pub(crate) fn quartic_constraint_gradients(p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hx = cmul((4.0, 0.0), cpow3((p[0], p[1])));
    let hy = cmul((4.0, 0.0), cpow3((p[2], p[3])));
    (
        vec![hx.0, -hx.1, hy.0, -hy.1],
        vec![hx.1, hx.0, hy.1, hy.0],
    )
}

/// Lagrange-Newton projection onto the quartic variety.
///
/// Solves grad(|p - z|^2/2 + lambda . g) = 0, g(p) = 0 with a full 6x6
/// KKT Newton step; converges at constraint residual < 1e-10 and
/// Lagrangian gradient < 1e-8, capped at 100 iterations.
fn quartic_project(z: &[f64]) -> Result<Vec<f64>, GeometryError> {
    const IT_MAX: usize = 100;
    let mut p = z.to_vec();
    let mut lam = [0.0f64; 2];
    for _ in 0..IT_MAX {
        let (g1, g2) = quartic_constraint(&p);
        let (j1, j2) = quartic_constraint_gradients(&p);
        let grad_l: Vec<f64> = (0..4)
            .map(|i| (p[i] - z[i]) + lam[0] * j1[i] + lam[1] * j2[i])
            .collect();
        let cres = (g1 * g1 + g2 * g2).sqrt();
        if cres < 1e-10 && norm(&grad_l) < 1e-8 {
            return Ok(p);
        }
        // constraint Hessians; blocks follow from d/dx of 4x^3 = 12x^2
        let qx = cmul((12.0, 0.0), cmul((p[0], p[1]), (p[0], p[1])));
        let qy = cmul((12.0, 0.0), cmul((p[2], p[3]), (p[2], p[3])));
        let mut kkt = [0.0f64; 36];
        let mut put = |r: usize, c: usize, v: f64| kkt[r * 6 + c] = v;
        // I + lam . Hess(g)
        let h1 = [
            [qx.0, -qx.1, 0.0, 0.0],
            [-qx.1, -qx.0, 0.0, 0.0],
            [0.0, 0.0, qy.0, -qy.1],
            [0.0, 0.0, -qy.1, -qy.0],
        ];
        let h2 = [
            [qx.1, qx.0, 0.0, 0.0],
            [qx.0, -qx.1, 0.0, 0.0],
            [0.0, 0.0, qy.1, qy.0],
            [0.0, 0.0, qy.0, -qy.1],
        ];
        for r in 0..4 {
            for c in 0..4 {
                let idv = if r == c { 1.0 } else { 0.0 };
                put(r, c, idv + lam[0] * h1[r][c] + lam[1] * h2[r][c]);
            }
            put(r, 4, j1[r]);
            put(r, 5, j2[r]);
            put(4, r, j1[r]);
            put(5, r, j2[r]);
        }
        let mut rhs = [
            -grad_l[0], -grad_l[1], -grad_l[2], -grad_l[3], -g1, -g2,
        ];
        if solve_dense(&mut kkt, &mut rhs, 6).is_none() {
            return Err(GeometryError::DegenerateProjection);
        }
        for i in 0..4 {
            p[i] += rhs[i];
        }
        lam[0] += rhs[4];
        lam[1] += rhs[5];
        if p.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::ProjectionDidNotConverge(IT_MAX));
        }
    }
    Err(GeometryError::ProjectionDidNotConverge(IT_MAX))
}

/// Area of the sampled quartic portion by midpoint quadrature of the patch
/// area element (1 + |x|^6/|y|^6) over {|x| <= 1, Re(x^4) <= 1/2},
/// times 4 branches and 2 symmetric patches.
fn quartic_area() -> f64 {
    static AREA: OnceLock<f64> = OnceLock::new();
    *AREA.get_or_init(|| {
        let nr = 512;
        let na = 2048;
        let mut total = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) / nr as f64;
            let da = (1.0 / nr as f64) * (2.0 * PI / na as f64) * rho;
            for j in 0..na {
                let t = 2.0 * PI * (j as f64 + 0.5) / na as f64;
                let x = (rho * t.cos(), rho * t.sin());
                let x4 = cpow4(x);
                if x4.0 > 0.5 {
                    continue;
                }
                let y4 = (1.0 - x4.0, -x4.1);
                let y4n = (y4.0 * y4.0 + y4.1 * y4.1).sqrt();
                total += (1.0 + rho.powi(6) / y4n.powf(1.5)) * da;
            }
        }
        2.0 * 4.0 * total
    })
}
