//! `K_{iR}(u)` for real `R` and `u > 0`.
//!
//! Starting from `K_{iR}(u) = ∫₀^∞ e^{-u cosh t} cos(Rt) dt`, the path is moved
//! to `Im t = θ`, which gives
//!
//! ```text
//! K_{iR}(u) = e^{-Rθ} ∫₀^∞ e^{-u cos θ cosh s} cos(R s - u sin θ sinh s) ds.
//! ```
//!
//! On the real axis the integrand has size one while the result is of order
//! `e^{-πR/2}`, so all digits cancel once `R` exceeds about 10. Choosing
//! `θ = asin(R/u)` (the saddle) for `u > R` and `θ` close to `π/2` for `u ≤ R`
//! keeps the integrand within a small factor of the result. All values
//! returned are scaled by `e^{πR/2}`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{OnceLock, RwLock};

use crate::error::{MaassError, Result};

/// Smallest argument accepted; below it the cutoff of the contour integral
/// grows past what the node budget resolves.
pub const U_MIN: f64 = 1e-3;

/// Default relative accuracy target.
pub const DEFAULT_ACCURACY: f64 = 1e-10;

const MAX_TRAPEZOID_INTERVALS: usize = 1 << 17;
const MAX_GAUSS_PANELS: usize = 1 << 12;
// e^{-50}: the integrand is dropped beyond the point where its envelope has
// fallen this far below its value at s = 0.
const CUTOFF_EXPONENT: f64 = 50.0;

/// Evaluates `e^{πR/2} K_{iR}(u)` for a fixed spectral parameter.
#[derive(Debug)]
pub struct BesselEvaluator {
    r: f64,
    target_accuracy: f64,
    cache: RwLock<HashMap<u64, f64>>,
}

impl Clone for BesselEvaluator {
    fn clone(&self) -> Self {
        let cache = self.cache.read().expect("bessel cache poisoned").clone();
        Self {
            r: self.r,
            target_accuracy: self.target_accuracy,
            cache: RwLock::new(cache),
        }
    }
}

impl BesselEvaluator {
    pub fn new(r: f64) -> Self {
        Self::with_accuracy(r, DEFAULT_ACCURACY)
    }

    pub fn with_accuracy(r: f64, target_accuracy: f64) -> Self {
        Self {
            r,
            target_accuracy,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Laplace eigenvalue `1/4 + R²`.
    pub fn lambda(&self) -> f64 {
        0.25 + self.r * self.r
    }

    pub fn target_accuracy(&self) -> f64 {
        self.target_accuracy
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("bessel cache poisoned").len()
    }

    /// `e^{πR/2} K_{iR}(u)`, memoized on `u`.
    pub fn k_scaled(&self, u: f64) -> Result<f64> {
        let key = u.to_bits();
        if let Some(v) = self.cache.read().expect("bessel cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = self.k_scaled_uncached(u)?;
        self.cache
            .write()
            .expect("bessel cache poisoned")
            .insert(key, v);
        Ok(v)
    }

    /// Trapezoidal rule on the shifted contour, halving the step until two
    /// successive levels agree.
    pub fn k_scaled_uncached(&self, u: f64) -> Result<f64> {
        check_argument(u)?;
        let r = self.r.abs();
        let theta = contour_angle(r, u, 1.0);
        let integrand = Integrand::new(r, u, theta);
        let s_max = integrand.cutoff();

        let mut n = 32usize;
        let mut h = s_max / n as f64;
        let mut sum = 0.5 * integrand.eval(0.0);
        let mut mass = sum.abs();
        for k in 1..=n {
            let v = integrand.eval(k as f64 * h);
            sum += v;
            mass += v.abs();
        }
        let mut value = h * sum;
        while n < MAX_TRAPEZOID_INTERVALS {
            let h_new = 0.5 * h;
            let mut odd = 0.0;
            for k in 0..n {
                let v = integrand.eval((2 * k + 1) as f64 * h_new);
                odd += v;
                mass += v.abs();
            }
            sum += odd;
            n *= 2;
            h = h_new;
            let refined = h * sum;
            let floor = 1e-15 * h * mass;
            let done = (refined - value).abs() <= self.target_accuracy * refined.abs() + floor;
            value = refined;
            if done {
                return Ok(value);
            }
        }
        Err(MaassError::Accuracy(format!(
            "trapezoidal rule for K_(i{r})({u}) did not converge"
        )))
    }

    /// Independent route: composite Gauss-Legendre panels on a contour with a
    /// different shift angle. Used to cross-check [`Self::k_scaled`].
    pub fn k_scaled_gauss(&self, u: f64) -> Result<f64> {
        check_argument(u)?;
        let r = self.r.abs();
        let theta = contour_angle(r, u, 1.25) * if u > r { 0.9 } else { 1.0 };
        let integrand = Integrand::new(r, u, theta);
        let s_max = integrand.cutoff();
        let rule = gauss_legendre_20();

        let panel_sum = |panels: usize| -> (f64, f64) {
            let w = s_max / panels as f64;
            let mut total = 0.0;
            let mut mass = 0.0;
            for p in 0..panels {
                let mid = (p as f64 + 0.5) * w;
                for (x, wt) in rule.iter() {
                    let v = integrand.eval(mid + 0.5 * w * x) * wt * 0.5 * w;
                    total += v;
                    mass += v.abs();
                }
            }
            (total, mass)
        };

        let mut panels = 4usize;
        let (mut value, _) = panel_sum(panels);
        while panels < MAX_GAUSS_PANELS {
            panels *= 2;
            let (refined, mass) = panel_sum(panels);
            let done = (refined - value).abs()
                <= self.target_accuracy * refined.abs() + 1e-15 * mass;
            value = refined;
            if done {
                return Ok(value);
            }
        }
        Err(MaassError::Accuracy(format!(
            "Gauss-Legendre rule for K_(i{r})({u}) did not converge"
        )))
    }
}

fn check_argument(u: f64) -> Result<()> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(MaassError::Domain(format!("Bessel argument u = {u} must be positive")));
    }
    if u < U_MIN {
        return Err(MaassError::Accuracy(format!(
            "Bessel argument u = {u} is below the supported window [{U_MIN}, ∞)"
        )));
    }
    Ok(())
}

/// Shift angle: the saddle `asin(R/u)` when `u > R`, capped at `π/2 - δ`
/// with `δ ≈ 4/R` so the integrand overshoots the result by at most `e^{4}`.
fn contour_angle(r: f64, u: f64, widen: f64) -> f64 {
    let delta = (widen * 4.0 / r.max(1.0)).min(1.0);
    let saddle = (r / u).min(1.0).asin();
    saddle.min(FRAC_PI_2 - delta)
}

struct Integrand {
    r: f64,
    u_cos: f64,
    u_sin: f64,
    log_scale: f64,
}

impl Integrand {
    fn new(r: f64, u: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            r,
            u_cos: u * c,
            u_sin: u * s,
            log_scale: r * (FRAC_PI_2 - theta),
        }
    }

    fn cutoff(&self) -> f64 {
        (1.0 + CUTOFF_EXPONENT / self.u_cos).acosh()
    }

    #[inline]
    fn eval(&self, s: f64) -> f64 {
        let e = s.exp();
        let (cosh, sinh) = (0.5 * (e + 1.0 / e), 0.5 * (e - 1.0 / e));
        (self.log_scale - self.u_cos * cosh).exp() * (self.r * s - self.u_sin * sinh).cos()
    }
}

fn gauss_legendre_20() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Smallest `M` such that `e^{πR/2} K_{iR}(2πM y₀)` lies past the turning
/// point `2πM y₀ > R` and below `eps` times the largest `|K_{iR}(2πn y₀)|`,
/// `n ≤ M`.
pub fn truncation_level(r: f64, y0: f64, eps: f64) -> Result<usize> {
    if !(y0 > 0.0) || !(eps > 0.0 && eps < 1.0) || !r.is_finite() {
        return Err(MaassError::Domain(format!(
            "truncation_level needs y0 > 0 and 0 < eps < 1 (got y0 = {y0}, eps = {eps})"
        )));
    }
    const MAX_M: usize = 4000;
    let bessel = BesselEvaluator::new(r);
    let mut peak: f64 = 0.0;
    for m in 1..=MAX_M {
        let u = 2.0 * PI * m as f64 * y0;
        if u < U_MIN {
            continue;
        }
        let v = bessel.k_scaled_uncached(u)?.abs();
        peak = peak.max(v);
        if u > r.abs() && v < eps * peak {
            return Ok(m);
        }
    }
    Err(MaassError::Domain(format!(
        "truncation level exceeds {MAX_M} for R = {r}, y0 = {y0}"
    )))
}
