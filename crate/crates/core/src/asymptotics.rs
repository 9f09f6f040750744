//! Limit densities, constants and the predicted asymptotic values.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Moments;
use crate::quad;

/// Drift and covariance feeding the Gaussian limit densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussParams {
    pub mu1: f64,
    pub s11: f64,
    pub s22: f64,
    pub rho: f64,
    /// `s11 s22 - rho^2`
    pub d: f64,
}

impl GaussParams {
    pub fn new(mu1: f64, s11: f64, s22: f64, rho: f64) -> Result<Self> {
        let d = s11 * s22 - rho * rho;
        if !(s11 > 0.0 && s22 > 0.0 && d > 0.0) {
            return Err(Error::DegenerateSupport);
        }
        Ok(GaussParams {
            mu1,
            s11,
            s22,
            rho,
            d,
        })
    }

    pub fn from_moments(m: &Moments) -> Result<Self> {
        Self::new(m.mu[0], m.sigma[0][0], m.sigma[1][1], m.sigma[0][1])
    }

    /// `v Sigma^{-1} v^T`.
    pub fn quad_form(&self, v: [f64; 2]) -> f64 {
        (self.s22 * v[0] * v[0] - 2.0 * self.rho * v[0] * v[1] + self.s11 * v[1] * v[1]) / self.d
    }

    /// Centred Gaussian density with covariance `t Sigma`.
    pub fn free_density(&self, t: f64, v: [f64; 2]) -> f64 {
        (-self.quad_form(v) / (2.0 * t)).exp() / (2.0 * PI * t * self.d.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub int_q: f64,
}

impl AsymptoticConstants {
    pub fn new(kappa: f64, kappa_prime: f64, gp: &GaussParams) -> Self {
        AsymptoticConstants {
            kappa,
            kappa_prime,
            int_q: int_q(gp, kappa, kappa_prime),
        }
    }
}

/// Transition density of Brownian motion with drift `mu` and covariance
/// `Sigma`, killed on leaving the upper half-plane.
pub fn bm_kernel(t: f64, x: [f64; 2], y: [f64; 2], mu: [f64; 2], gp: &GaussParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} is not positive")));
    }
    if x[1] <= 0.0 || y[1] <= 0.0 {
        return Ok(0.0);
    }
    let v = [y[0] - x[0] - t * mu[0], y[1] - x[1] - t * mu[1]];
    let boundary = -(-2.0 * y[1] * x[1] / (t * gp.s22)).exp_m1();
    Ok(boundary * gp.free_density(t, v))
}

/// Limit density of the walk conditioned to stay in the upper half-plane.
pub fn density_p(y: [f64; 2], gp: &GaussParams) -> f64 {
    if y[1] <= 0.0 {
        return 0.0;
    }
    let q = gp.s22 * y[0] * y[0] + gp.s11 * y[1] * y[1] - 2.0 * gp.rho * y[0] * y[1];
    y[1] / (gp.s22.sqrt() * (2.0 * PI * gp.d).sqrt()) * (-q / (2.0 * gp.d)).exp()
}

/// Closed form of `integral p(y + z) p(z) dz` at `y = (y1, 0)`.
pub fn qbar(y1: f64, gp: &GaussParams) -> f64 {
    (-gp.s22 * y1 * y1 / (4.0 * gp.d)).exp() / (8.0 * gp.d.sqrt())
}

const SPAN: f64 = 8.0;

/// Convolution `integral_{R x [0, inf)} p((y1, 0) + z) p(z) dz` by quadrature.
pub fn qbar_quadrature(y1: f64, gp: &GaussParams, tol: f64) -> f64 {
    let s1 = gp.s11.sqrt();
    let s2 = gp.s22.sqrt();
    // the product is Gaussian in z1 around -y1/2 + rho z2 / s22 with spread below s1
    quad::integrate_2d_var(
        |z1, z2| density_p([y1 + z1, z2], gp) * density_p([z1, z2], gp),
        |z2| {
            let c = -0.5 * y1 + gp.rho * z2 / gp.s22;
            (c - SPAN * s1, c + SPAN * s1)
        },
        (0.0, SPAN * s2),
        tol,
    )
}

/// Total mass of `p` by quadrature.
pub fn density_p_mass(gp: &GaussParams, tol: f64) -> f64 {
    let s1 = gp.s11.sqrt();
    let s2 = gp.s22.sqrt();
    quad::integrate_2d_var(
        |y1, y2| density_p([y1, y2], gp),
        |y2| {
            let c = gp.rho * y2 / gp.s22;
            (c - SPAN * s1, c + SPAN * s1)
        },
        (0.0, SPAN * s2 + 2.0 * s2),
        tol,
    )
}

/// `integral_{u + [0,1)^2} p`.
pub fn window_mass(u: [f64; 2], gp: &GaussParams, tol: f64) -> f64 {
    let lo2 = u[1].max(0.0);
    let hi2 = u[1] + 1.0;
    if hi2 <= 0.0 {
        return 0.0;
    }
    quad::integrate_2d(
        |y1, y2| density_p([y1, y2], gp),
        (u[0], u[0] + 1.0),
        (lo2, hi2),
        tol,
    )
}

pub fn q_density(y1: f64, gp: &GaussParams, kappa: f64, kappa_prime: f64) -> f64 {
    2.0 * kappa * kappa_prime * qbar(y1, gp)
}

/// `integral q = 2 kappa kappa' sqrt(pi) / (4 sigma2)` in closed form.
pub fn int_q(gp: &GaussParams, kappa: f64, kappa_prime: f64) -> f64 {
    2.0 * kappa * kappa_prime * PI.sqrt() / (4.0 * gp.s22.sqrt())
}

pub fn int_q_quadrature(gp: &GaussParams, kappa: f64, kappa_prime: f64, tol: f64) -> f64 {
    let spread = (2.0 * gp.d).sqrt() / gp.s22.sqrt();
    quad::integrate(
        |z| q_density(z, gp, kappa, kappa_prime),
        -SPAN * spread,
        SPAN * spread,
        tol,
    )
}

/// `integral K_s(x, z) K_t(z, y) dz` over the upper half-plane by quadrature.
pub fn chapman_kolmogorov(
    s: f64,
    t: f64,
    x: [f64; 2],
    y: [f64; 2],
    mu: [f64; 2],
    gp: &GaussParams,
    tol: f64,
) -> Result<f64> {
    bm_kernel(s, x, y, mu, gp)?;
    bm_kernel(t, x, y, mu, gp)?;
    let r = s * t / (s + t);
    let m = [
        (t * (x[0] + s * mu[0]) + s * (y[0] - t * mu[0])) / (s + t),
        (t * (x[1] + s * mu[1]) + s * (y[1] - t * mu[1])) / (s + t),
    ];
    let h1 = SPAN * (gp.s11 * r).sqrt();
    let h2 = SPAN * (gp.s22 * r).sqrt();
    Ok(quad::integrate_2d(
        |z1, z2| {
            let a = bm_kernel(s, x, [z1, z2], mu, gp).unwrap_or(0.0);
            let b = bm_kernel(t, [z1, z2], y, mu, gp).unwrap_or(0.0);
            a * b
        },
        (m[0] - h1, m[0] + h1),
        ((m[1] - h2).max(0.0), m[1] + h2),
        tol,
    ))
}

/// Probability that the vertical Brownian component started at `eps` stays
/// positive up to time 1.
pub fn half_line_survival(eps: f64, gp: &GaussParams, tol: f64) -> f64 {
    let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    2.0 * quad::integrate(phi, 0.0, eps / gp.s22.sqrt(), tol)
}

/// Starting close to the boundary, the kernel normalised by the survival
/// probability approaches `p`.
pub fn conditioned_kernel(eps: f64, y: [f64; 2], gp: &GaussParams, tol: f64) -> Result<f64> {
    Ok(bm_kernel(1.0, [0.0, eps], y, [0.0, 0.0], gp)? / half_line_survival(eps, gp, tol))
}

fn scaled(y: [f64; 2], n: f64, mu1: f64) -> [f64; 2] {
    [(y[0] - n * mu1) / n.sqrt(), y[1] / n.sqrt()]
}

/// `P(T_x > n) ~ kappa W(x) n^{-1/2}`.
pub fn predict_tail(n: u64, kappa: f64, w: f64) -> f64 {
    kappa * w / (n as f64).sqrt()
}

/// `P((x + S(n) - n mu) / sqrt(n) in u + [0,1)^2, T_x > n) ~ kappa W(x) n^{-1/2} integral p`.
pub fn predict_integral(n: u64, u: [f64; 2], kappa: f64, w: f64, gp: &GaussParams, tol: f64) -> f64 {
    predict_tail(n, kappa, w) * window_mass(u, gp, tol)
}

/// `P(x + S(n) = y, T_x > n) ~ d1 d2 kappa W(x) p((y - n mu) / sqrt(n)) n^{-3/2}`.
pub fn predict_llt(y: [f64; 2], n: u64, d1d2: f64, kappa: f64, w: f64, gp: &GaussParams) -> f64 {
    let nf = n as f64;
    d1d2 * kappa * w * density_p(scaled(y, nf, gp.mu1), gp) / nf.powf(1.5)
}

/// Half-plane version of [`predict_llt`] with `V(x2)` in place of `W(x)`.
pub fn predict_llt_halfplane(
    y: [f64; 2],
    n: u64,
    d1d2: f64,
    kappa: f64,
    v_x2: f64,
    gp: &GaussParams,
) -> f64 {
    predict_llt(y, n, d1d2, kappa, v_x2, gp)
}

/// `P(x + S(n) = y, T_x > n) ~ d1 d2 q((y1 - n mu1) / sqrt(n)) H(y2) W(x) / n^2`.
pub fn predict_boundary_llt(
    y1: f64,
    h_y2: f64,
    n: u64,
    d1d2: f64,
    w: f64,
    gp: &GaussParams,
    consts: &AsymptoticConstants,
) -> f64 {
    let nf = n as f64;
    let z1 = (y1 - nf * gp.mu1) / nf.sqrt();
    d1d2 * q_density(z1, gp, consts.kappa, consts.kappa_prime) * h_y2 * w / (nf * nf)
}

/// `P(x2 + S2(n) = y2, T_x > n) ~ d1 d2 W(x) H(y2) n^{-3/2} integral q`.
pub fn predict_line(n: u64, d1d2: f64, w: f64, h_y2: f64, consts: &AsymptoticConstants) -> f64 {
    d1d2 * w * h_y2 * consts.int_q / (n as f64).powf(1.5)
}

/// Boundary local limit obtained by splitting the path at `n / 2` and joining
/// the forward and the time-reversed quadrant local limits:
/// `4 d1 d2 kappa kappa' W(x) H(y2) qbar(sqrt(2) z1) / n^2`.
pub fn predict_boundary_llt_refined(
    y1: f64,
    h_y2: f64,
    n: u64,
    d1d2: f64,
    w: f64,
    gp: &GaussParams,
    consts: &AsymptoticConstants,
) -> f64 {
    let nf = n as f64;
    let z1 = (y1 - nf * gp.mu1) / nf.sqrt();
    4.0 * d1d2 * consts.kappa * consts.kappa_prime * w * h_y2 * qbar(2f64.sqrt() * z1, gp) / (nf * nf)
}

/// Sum of [`predict_boundary_llt_refined`] over the lattice line of spacing `d1`:
/// `d2 kappa kappa' W(x) H(y2) sqrt(pi / 2) / sigma2 n^{-3/2}`.
pub fn predict_line_refined(
    n: u64,
    d2: f64,
    w: f64,
    h_y2: f64,
    gp: &GaussParams,
    consts: &AsymptoticConstants,
) -> f64 {
    d2 * consts.kappa * consts.kappa_prime * w * h_y2 * (PI / 2.0).sqrt()
        / gp.s22.sqrt()
        / (n as f64).powf(1.5)
}
