//! Odd theta function, Eisenstein functions `E1`, `E2`, the Weierstrass `℘`
//! function, and the Kronecker function
//!
//! ```text
//! φ(z, u) = ϑ'(0) ϑ(z + u) / (ϑ(z) ϑ(u))
//! ϑ(z|τ)  = Σ_k exp(πiτ(k+½)² + 2πi(z+½)(k+½))
//! ```
//!
//! The theta series is always summed at a point reduced into the fundamental
//! cell; the quasi-periodicity factor is applied afterwards in log form, so
//! arguments with large imaginary parts do not lose precision.
//!
//! Two independent routes to `φ` live here as well: the q-series
//! [`kronecker_q_series`] and the lattice double series
//! [`kronecker_double_series`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted `Im τ`. No modular transformation is applied, so the
/// series route is only trusted above this bound.
pub const MIN_IM_TAU: f64 = 0.05;

/// Distance to the lattice below which the evaluators report a pole.
pub const DEFAULT_POLE_EPS: f64 = 1e-12;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);
pub(crate) const TWO_PI_I: Complex64 = Complex64::new(0.0, 2.0 * PI);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `e(x) = exp(2πi x)`.
#[inline]
pub fn e(x: Complex64) -> Complex64 {
    (TWO_PI_I * x).exp()
}

/// Modulus of the elliptic curve `C / (Z + τZ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Complex64", into = "Complex64")]
pub struct Tau(Complex64);

impl Tau {
    pub fn new(value: Complex64) -> Result<Self> {
        if value.re.is_finite() && value.im.is_finite() && value.im >= MIN_IM_TAU {
            Ok(Self(value))
        } else {
            Err(Error::InvalidTau(value))
        }
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    /// Nome `q = e(τ)`.
    pub fn q(self) -> Complex64 {
        e(self.0)
    }

    /// Writes `z = z0 + m + nτ` with `z0` in the cell centred at the origin.
    pub fn reduce(self, z: Complex64) -> LatticeReduction {
        let tau = self.0;
        let n = (z.im / tau.im).round();
        let shifted = z - tau * n;
        let m = shifted.re.round();
        let point = shifted - m;

        let tau_r = tau - tau.re.round();
        let mut distance = f64::INFINITY;
        for a in -1..=1 {
            for b in -1..=1 {
                let lattice = Complex64::new(a as f64, 0.0) + tau_r * b as f64;
                distance = distance.min((point - lattice).norm());
            }
        }
        LatticeReduction {
            point,
            m: m as i64,
            n: n as i64,
            distance,
        }
    }

    /// Euclidean distance from `z` to the nearest point of `Z + τZ`.
    pub fn lattice_distance(self, z: Complex64) -> f64 {
        self.reduce(z).distance
    }
}

impl TryFrom<Complex64> for Tau {
    type Error = Error;
    fn try_from(value: Complex64) -> Result<Self> {
        Tau::new(value)
    }
}

impl From<Tau> for Complex64 {
    fn from(tau: Tau) -> Self {
        tau.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeReduction {
    pub point: Complex64,
    pub m: i64,
    pub n: i64,
    pub distance: f64,
}

impl LatticeReduction {
    /// `log(ϑ(z) / ϑ(z0))` for the reduction `z = z0 + m + nτ`.
    fn theta_log_factor(&self, tau: Complex64) -> Complex64 {
        let n = self.n as f64;
        I * PI * (self.m + self.n) as f64 - I * PI * n * n * tau - TWO_PI_I * n * self.point
    }
}

/// Truncation policy for the theta series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSeriesConfig {
    pub max_terms: usize,
    pub term_tolerance: f64,
}

impl Default for ThetaSeriesConfig {
    fn default() -> Self {
        Self {
            max_terms: 200,
            term_tolerance: 1e-16,
        }
    }
}

impl ThetaSeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 8 {
            return Err(Error::Config(format!(
                "theta max_terms must be at least 8, got {}",
                self.max_terms
            )));
        }
        if !(self.term_tolerance > 0.0 && self.term_tolerance <= 1e-10) {
            return Err(Error::Config(format!(
                "theta term_tolerance must lie in (0, 1e-10], got {:e}",
                self.term_tolerance
            )));
        }
        Ok(())
    }
}

/// `[ϑ, ϑ', ϑ'', ϑ''']` at `z` by term-wise differentiation. The sum runs
/// symmetrically over `±(j+½)` and stops once a pair of terms has stayed below
/// `term_tolerance·(1 + |partial|)` for two consecutive `j`.
fn theta_jet_series(z: Complex64, tau: Complex64, config: &ThetaSeriesConfig) -> Result<[Complex64; 4]> {
    let mut acc = [ZERO; 4];
    let shift = z + 0.5;
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    for j in 0..config.max_terms {
        let h = j as f64 + 0.5;
        let mut pair = [ZERO; 4];
        for hh in [h, -h] {
            let mut term = (I * PI * tau * (hh * hh) + TWO_PI_I * shift * hh).exp();
            let weight = TWO_PI_I * hh;
            for slot in pair.iter_mut() {
                *slot += term;
                term *= weight;
            }
        }
        let mut rel = 0.0f64;
        for (total, part) in acc.iter_mut().zip(pair) {
            *total += part;
            rel = rel.max(part.norm() / (1.0 + total.norm()));
        }
        last = rel;
        if rel < config.term_tolerance {
            quiet += 1;
            if quiet >= 2 {
                return Ok(acc);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Truncation {
        terms: config.max_terms,
        last_term: last,
    })
}

#[derive(Debug, Clone, Copy)]
struct Jet {
    reduction: LatticeReduction,
    /// Derivatives of ϑ at the reduced point.
    d: [Complex64; 4],
}

impl Jet {
    fn e1(&self) -> Complex64 {
        self.d[1] / self.d[0] - TWO_PI_I * self.reduction.n as f64
    }

    fn e2(&self) -> Complex64 {
        let [v, d1, d2, _] = self.d;
        (d1 * d1 - v * d2) / (v * v)
    }

    /// `-E1''`, which is `℘'` because `E2 = ℘ - const` and `E2 = -E1'`.
    fn minus_e1_second(&self) -> Complex64 {
        let [v, d1, d2, d3] = self.d;
        let r = d1 / v;
        -(d3 / v - 3.0 * r * d2 / v + 2.0 * r * r * r)
    }
}

/// Values of the Kronecker function together with the Eisenstein data needed
/// for its first and mixed derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KroneckerEval {
    pub value: Complex64,
    pub e1_z: Complex64,
    pub e1_u: Complex64,
    pub e1_sum: Complex64,
    pub e2_sum: Complex64,
}

impl KroneckerEval {
    /// `∂_u φ = φ (E1(z+u) - E1(u))`.
    pub fn du(&self) -> Complex64 {
        self.value * (self.e1_sum - self.e1_u)
    }

    /// `∂_z φ = φ (E1(z+u) - E1(z))`.
    pub fn dz(&self) -> Complex64 {
        self.value * (self.e1_sum - self.e1_z)
    }

    /// `∂_z ∂_u φ`.
    pub fn dz_du(&self) -> Complex64 {
        self.value * ((self.e1_sum - self.e1_z) * (self.e1_sum - self.e1_u) - self.e2_sum)
    }
}

/// A fixed modulus together with the cached constants `ϑ'(0)` and `ϑ'''(0)`.
///
/// All evaluators are pure; the struct is cheap to clone and safe to share
/// between threads.
#[derive(Debug, Clone)]
pub struct EllipticCurve {
    tau: Tau,
    config: ThetaSeriesConfig,
    pole_eps: f64,
    dtheta0: Complex64,
    d3theta0: Complex64,
}

impl EllipticCurve {
    pub fn new(tau: Tau) -> Result<Self> {
        Self::with_config(tau, ThetaSeriesConfig::default())
    }

    pub fn from_complex(tau: Complex64) -> Result<Self> {
        Self::new(Tau::new(tau)?)
    }

    pub fn with_config(tau: Tau, config: ThetaSeriesConfig) -> Result<Self> {
        config.validate()?;
        let d = theta_jet_series(ZERO, tau.value(), &config)?;
        Ok(Self {
            tau,
            config,
            pole_eps: DEFAULT_POLE_EPS,
            dtheta0: d[1],
            d3theta0: d[3],
        })
    }

    /// Overrides the lattice distance below which evaluators report a pole.
    pub fn with_pole_eps(mut self, eps: f64) -> Self {
        self.pole_eps = eps;
        self
    }

    pub fn tau(&self) -> Tau {
        self.tau
    }

    pub fn config(&self) -> &ThetaSeriesConfig {
        &self.config
    }

    fn jet(&self, z: Complex64) -> Result<Jet> {
        let reduction = self.tau.reduce(z);
        let d = theta_jet_series(reduction.point, self.tau.value(), &self.config)?;
        Ok(Jet { reduction, d })
    }

    fn pole_jet(&self, z: Complex64) -> Result<Jet> {
        let jet = self.jet(z)?;
        if jet.reduction.distance < self.pole_eps {
            return Err(Error::Pole {
                arg: z,
                distance: jet.reduction.distance,
                guard: self.pole_eps,
            });
        }
        Ok(jet)
    }

    pub fn theta(&self, z: Complex64) -> Result<Complex64> {
        let jet = self.jet(z)?;
        Ok(jet.d[0] * jet.reduction.theta_log_factor(self.tau.value()).exp())
    }

    /// `(ϑ'(0), ϑ'''(0))`.
    pub fn theta_derivatives(&self) -> (Complex64, Complex64) {
        (self.dtheta0, self.d3theta0)
    }

    /// `ϑ'''(0) / (3ϑ'(0))`, the constant separating `℘` from `E2`.
    pub fn wp_shift(&self) -> Complex64 {
        self.d3theta0 / (3.0 * self.dtheta0)
    }

    pub fn e1(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.pole_jet(z)?.e1())
    }

    pub fn e2(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.pole_jet(z)?.e2())
    }

    pub fn wp(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.pole_jet(z)?.e2() + self.wp_shift())
    }

    pub fn wp_prime(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.pole_jet(z)?.minus_e1_second())
    }

    /// Kronecker function and the Eisenstein values at `z`, `u`, `z + u`.
    pub fn kronecker(&self, z: Complex64, u: Complex64) -> Result<KroneckerEval> {
        let jz = self.pole_jet(z)?;
        let ju = self.pole_jet(u)?;
        let jzu = self.pole_jet(z + u)?;
        let tau = self.tau.value();
        let log = jzu.reduction.theta_log_factor(tau)
            - jz.reduction.theta_log_factor(tau)
            - ju.reduction.theta_log_factor(tau);
        let value = self.dtheta0 * jzu.d[0] / (jz.d[0] * ju.d[0]) * log.exp();
        Ok(KroneckerEval {
            value,
            e1_z: jz.e1(),
            e1_u: ju.e1(),
            e1_sum: jzu.e1(),
            e2_sum: jzu.e2(),
        })
    }

    pub fn phi(&self, z: Complex64, u: Complex64) -> Result<Complex64> {
        let tau = self.tau.value();
        let jz = self.pole_jet(z)?;
        let ju = self.pole_jet(u)?;
        // the numerator may vanish, only the denominator is pole-guarded
        let jzu = self.jet(z + u)?;
        let log = jzu.reduction.theta_log_factor(tau)
            - jz.reduction.theta_log_factor(tau)
            - ju.reduction.theta_log_factor(tau);
        Ok(self.dtheta0 * jzu.d[0] / (jz.d[0] * ju.d[0]) * log.exp())
    }

    pub fn phi_du(&self, z: Complex64, u: Complex64) -> Result<Complex64> {
        Ok(self.kronecker(z, u)?.du())
    }

    pub fn phi_dz(&self, z: Complex64, u: Complex64) -> Result<Complex64> {
        Ok(self.kronecker(z, u)?.dz())
    }

    pub fn phi_dz_du(&self, z: Complex64, u: Complex64) -> Result<Complex64> {
        Ok(self.kronecker(z, u)?.dz_du())
    }
}

pub fn theta(z: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.theta(z)
}

pub fn theta_derivatives(tau: Tau) -> Result<(Complex64, Complex64)> {
    Ok(EllipticCurve::new(tau)?.theta_derivatives())
}

pub fn e1(z: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.e1(z)
}

pub fn e2(z: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.e2(z)
}

pub fn wp(z: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.wp(z)
}

pub fn wp_prime(z: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.wp_prime(z)
}

pub fn kronecker_phi(z: Complex64, u: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.phi(z, u)
}

pub fn kronecker_phi_du(z: Complex64, u: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.phi_du(z, u)
}

pub fn kronecker_phi_dz(z: Complex64, u: Complex64, tau: Tau) -> Result<Complex64> {
    EllipticCurve::new(tau)?.phi_dz(z, u)
}

const Q_SERIES_MAX_TERMS: usize = 200_000;
const Q_SERIES_TOL: f64 = 1e-17;

/// The bilateral q-series `g(s, t | q) = Σ_n tⁿ / (qⁿ s - 1)`.
///
/// The `n ≥ 0` half is resummed as `Σ tⁿqⁿs/(qⁿs - 1) - 1/(1 - t)`, which
/// continues `g` from `|q| < |t| < 1` to the annulus `|q| < |t| < 1/|q|`.
/// Both `s` and `t` must lie in that annulus; `s = 1` or `t = 1` is a pole.
///
/// `2πi·g(e(u), e(z) | e(τ)) = φ(z, u)`.
pub fn kronecker_q_series(s: Complex64, t: Complex64, q: Complex64) -> Result<Complex64> {
    let aq = q.norm();
    if !(aq > 0.0 && aq < 1.0) {
        return Err(Error::Domain(format!("|q| = {aq} must lie in (0, 1)")));
    }
    for (name, x) in [("s", s), ("t", t)] {
        let r = x.norm();
        if !(r > aq && r < 1.0 / aq) {
            return Err(Error::Domain(format!(
                "|{name}| = {r} outside the annulus ({aq}, {})",
                1.0 / aq
            )));
        }
        let d = (x - 1.0).norm();
        if d < DEFAULT_POLE_EPS {
            return Err(Error::Pole {
                arg: x,
                distance: d,
                guard: DEFAULT_POLE_EPS,
            });
        }
    }

    let mut total = -1.0 / (1.0 - t);
    let tq = t * q;
    let mut tq_pow = Complex64::new(1.0, 0.0);
    let mut q_pow = Complex64::new(1.0, 0.0);
    let mut converged = false;
    let mut last = f64::INFINITY;
    for _ in 0..Q_SERIES_MAX_TERMS {
        let term = tq_pow * s / (q_pow * s - 1.0);
        total += term;
        last = term.norm();
        if last < Q_SERIES_TOL * (1.0 + total.norm()) {
            converged = true;
            break;
        }
        tq_pow *= tq;
        q_pow *= q;
    }
    if !converged {
        return Err(Error::Truncation {
            terms: Q_SERIES_MAX_TERMS,
            last_term: last,
        });
    }

    let ratio = q / t;
    let mut ratio_pow = ratio;
    let mut q_pow = q;
    for _ in 0..Q_SERIES_MAX_TERMS {
        let term = ratio_pow / (s - q_pow);
        total += term;
        last = term.norm();
        if last < Q_SERIES_TOL * (1.0 + total.norm()) {
            return Ok(total);
        }
        ratio_pow *= ratio;
        q_pow *= q;
    }
    Err(Error::Truncation {
        terms: Q_SERIES_MAX_TERMS,
        last_term: last,
    })
}

/// `φ(z, u)` through the q-series route.
pub fn kronecker_phi_q_series(z: Complex64, u: Complex64, tau: Tau) -> Result<Complex64> {
    Ok(TWO_PI_I * kronecker_q_series(e(u), e(z), tau.q())?)
}

/// Ordering of the partial sums of the lattice double series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summation {
    /// Plain sum over `|m|, |n| ≤ M`.
    Square,
    /// The same square with Fejér weights `(1 - |m|/(M+1))(1 - |n|/(M+1))`.
    #[default]
    Fejer,
}

/// Splits `u = u1 + u2·τ` with real `u1`, `u2`.
pub fn lattice_coordinates(u: Complex64, tau: Tau) -> (f64, f64) {
    let t = tau.value();
    let u2 = u.im / t.im;
    (u.re - u2 * t.re, u2)
}

/// Partial sum of `S(z, u | τ) = Σ_{γ = m + nτ} χ_u(γ) / (z + γ)` with
/// `χ_u(γ) = e(-m u2 + n u1)`. Converges to `e(u2 z) φ(z, u)`; the series is
/// only conditionally convergent, with error `O(1/M)` under Fejér weights.
pub fn kronecker_double_series(
    z: Complex64,
    u: Complex64,
    tau: Tau,
    m_max: usize,
    summation: Summation,
) -> Result<Complex64> {
    for arg in [z, u] {
        let d = tau.lattice_distance(arg);
        if d < DEFAULT_POLE_EPS {
            return Err(Error::Pole {
                arg,
                distance: d,
                guard: DEFAULT_POLE_EPS,
            });
        }
    }
    let (u1, u2) = lattice_coordinates(u, tau);
    let t = tau.value();
    let span = m_max as i64;
    let weight = |k: i64| match summation {
        Summation::Square => 1.0,
        Summation::Fejer => 1.0 - k.unsigned_abs() as f64 / (m_max as f64 + 1.0),
    };
    let char_m: Vec<Complex64> = (-span..=span)
        .map(|m| e(Complex64::new(-(m as f64) * u2, 0.0)) * weight(m))
        .collect();
    let mut total = ZERO;
    for n in -span..=span {
        let char_n = e(Complex64::new(n as f64 * u1, 0.0)) * weight(n);
        let base = z + t * n as f64;
        let mut row = ZERO;
        for (m, cm) in (-span..=span).zip(&char_m) {
            row += cm / (base + m as f64);
        }
        total += char_n * row;
    }
    Ok(total)
}

/// The limit `e(u2 z) φ(z, u)` of [`kronecker_double_series`].
pub fn kronecker_double_series_limit(z: Complex64, u: Complex64, tau: Tau) -> Result<Complex64> {
    let (_, u2) = lattice_coordinates(u, tau);
    Ok(e(z * u2) * kronecker_phi(z, u, tau)?)
}
