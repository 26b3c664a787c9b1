//! The truncated rotation-invariant Gaussian kernel, its bandwidth constant
//! c_D, and the special functions behind it.
//!
//! The kernel is
//!
//! ```text
//! phi_r(z) = (2 pi r^2)^(-D/2) exp(-|z|^2 / (2 r^2)) * cut(|z| / (sqrt(2) r))
//! ```
//!
//! where `cut` is either a hard indicator on [0, 1] or a smooth bump that is
//! 1 on [0, rho0] and 0 on [1, inf). The support radius is exactly
//! `sqrt(2) * r`, and the bandwidth is tied to the noise level by
//! `r = c_D * sigma` with `c_D = sqrt(D g(D/2,1) / (2 g(D/2+1,1)))` for the
//! hard cutoff (`g` the lower incomplete gamma function).

use crate::numeric::gauss_legendre_on;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("domain error: {0}")]
    Domain(String),
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments (Lanczos).
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0");
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const GAMMA_MAX_ITER: usize = 300;

/// Lower incomplete gamma function g(s, x) = int_0^x t^(s-1) e^(-t) dt.
///
/// Series expansion for x < s + 1, Lentz continued fraction otherwise,
/// both on the regularized function; relative error <= 1e-12.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> Result<f64, KernelError> {
    if s <= 0.0 {
        return Err(KernelError::Domain(format!(
            "lower_incomplete_gamma requires s > 0, got {s}"
        )));
    }
    if x < 0.0 {
        return Err(KernelError::Domain(format!(
            "lower_incomplete_gamma requires x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let lg = ln_gamma(s);
    let log_prefactor = s * x.ln() - x - lg;
    let p = if x < s + 1.0 {
        // P(s,x) = prefactor * sum_n x^n / (s (s+1) ... (s+n))
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut ap = s;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * log_prefactor.exp()
    } else {
        // Q(s,x) by modified Lentz on the standard continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = log_prefactor.exp() * h;
        1.0 - q
    };
    Ok(p * lg.exp())
}

/// Cutoff policy for the kernel truncation at `t = |z| / (sqrt(2) r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Indicator of t <= 1 (what the sample-level estimator uses).
    Hard,
    /// C-infinity bump: 1 on [0, rho0], 0 on [1, inf).
    SmoothChi { rho0: f64 },
}

impl Cutoff {
    /// The cutoff factor at normalized radius `t >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Cutoff::Hard => {
                if t < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Cutoff::SmoothChi { rho0 } => {
                if t <= rho0 {
                    1.0
                } else if t >= 1.0 {
                    0.0
                } else {
                    let s = (t - rho0) / (1.0 - rho0);
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }
}

/// Bandwidth constant c_D for the hard cutoff.
///
/// Derived by reducing the moments A and B of the kernel on the unit ball to
/// radial integrals: c_D = sqrt(D g(D/2, 1) / (2 g(D/2 + 1, 1))).
pub fn bandwidth_constant(dim: usize) -> f64 {
    assert!(dim >= 1);
    let d = dim as f64;
    let a = lower_incomplete_gamma(d / 2.0, 1.0).expect("valid domain");
    let b = lower_incomplete_gamma(d / 2.0 + 1.0, 1.0).expect("valid domain");
    (d * a / (2.0 * b)).sqrt()
}

/// Bandwidth constant for an arbitrary cutoff, by 1D radial quadrature of the
/// chi-weighted moments int_0^1 rho^(D-1) e^(-rho^2) chi(rho) drho and
/// int_0^1 rho^(D+1) e^(-rho^2) chi(rho) drho.
pub fn bandwidth_constant_for(dim: usize, cutoff: Cutoff) -> f64 {
    if cutoff == Cutoff::Hard {
        return bandwidth_constant(dim);
    }
    let d = dim as f64;
    let (xs, ws) = gauss_legendre_on(256, 0.0, 1.0);
    let mut a = 0.0;
    let mut b = 0.0;
    for (&x, &w) in xs.iter().zip(&ws) {
        let f = (-x * x).exp() * cutoff.eval(x) * w;
        a += x.powf(d - 1.0) * f;
        b += x.powf(d + 1.0) * f;
    }
    // the (u^(1))^2 moment carries a 1/D from symmetry; both share the
    // surface-area factor, which cancels in the ratio
    (d * a / (2.0 * b)).sqrt()
}

/// Kernel configuration: noise level, derived bandwidth, cutoff, dimension.
#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    pub sigma: f64,
    pub r: f64,
    pub cutoff: Cutoff,
    pub dim: usize,
}

impl KernelConfig {
    /// Build a config with `r = c_D * sigma`, c_D matching the cutoff.
    pub fn new(sigma: f64, dim: usize, cutoff: Cutoff) -> Result<Self, KernelError> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(KernelError::Domain(format!("sigma must be > 0, got {sigma}")));
        }
        if let Cutoff::SmoothChi { rho0 } = cutoff {
            if !(0.0 < rho0 && rho0 < 1.0) {
                return Err(KernelError::Domain(format!(
                    "rho0 must lie in (0,1), got {rho0}"
                )));
            }
        }
        Ok(Self {
            sigma,
            r: bandwidth_constant_for(dim, cutoff) * sigma,
            cutoff,
            dim,
        })
    }

    /// Hard-cutoff config (the default everywhere).
    pub fn hard(sigma: f64, dim: usize) -> Result<Self, KernelError> {
        Self::new(sigma, dim, Cutoff::Hard)
    }

    /// Support radius sqrt(2) * r.
    #[inline]
    pub fn support_radius(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.r
    }
}

/// phi_r evaluated at a difference vector; 0 for |diff| >= sqrt(2) r.
pub fn kernel_weight(diff: &[f64], cfg: &KernelConfig) -> f64 {
    let d2: f64 = diff.iter().map(|x| x * x).sum();
    kernel_weight_d2(d2, cfg)
}

/// Same as [`kernel_weight`] but takes the squared distance (hot path).
#[inline]
pub fn kernel_weight_d2(d2: f64, cfg: &KernelConfig) -> f64 {
    let supp = cfg.support_radius();
    if d2 >= supp * supp {
        return 0.0;
    }
    let r2 = cfg.r * cfg.r;
    let pref = (2.0 * std::f64::consts::PI * r2).powf(-(cfg.dim as f64) / 2.0);
    let t = (d2.sqrt()) / supp;
    let w = pref * (-d2 / (2.0 * r2)).exp() * cfg.cutoff.eval(t);
    if w < 1e-300 {
        0.0
    } else {
        w
    }
}
