//! Named numerical checks of elliptic and R-matrix identities, evaluated over
//! pole-guarded random samples with deterministic seeding.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{
    kronecker_double_series, kronecker_double_series_limit, kronecker_phi_q_series, EllipticCurve, Summation,
    Tau, TWO_PI_I,
};
use crate::error::{Error, Result};
use crate::matrixalg::{
    gen_lambda, gen_q, kappa_int, relative_defect, t_basis_int, tensor_embed, CMatrix, LatticeIndex,
    TensorLayout,
};
use crate::painleve::{
    check_zero_curvature_identities, monodromy_residual, HalfPeriods, PVIConstants, PVIState, ResidualMode,
};
use crate::rmatrix::{BelavinR, CMLaxParams};

type C = Complex64;

/// Redraws allowed per sample before it is dropped.
pub const MAX_DRAWS: usize = 200;

pub const ALGEBRAIC_TOLERANCE: f64 = 1e-10;
pub const SCALAR_TOLERANCE: f64 = 1e-11;
pub const HEAT_TOLERANCE: f64 = 1e-6;
/// Allowed relative deviation of an observed decay order.
pub const ORDER_TOLERANCE: f64 = 0.2;

const CONTOUR_RADIUS: f64 = 0.02;
const CONTOUR_NODES: usize = 64;
const EXPANSION_STEP: f64 = 1e-2;
const TAU_STEP: f64 = 1e-4;
const DOUBLE_SERIES_M: usize = 200;

/// One random parameter record. Every check reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: usize,
    pub n: usize,
    pub tau: Tau,
    pub hbar: C,
    pub hbar2: C,
    pub z: C,
    pub w: C,
    pub x: C,
    pub gamma: (i64, i64),
    pub n_tilde: usize,
    pub momenta: [C; 3],
    pub coupling: C,
    /// Draws needed to pass the pole guard.
    pub attempts: usize,
}

impl Sample {
    pub fn curve(&self) -> Result<EllipticCurve> {
        EllipticCurve::new(self.tau)
    }

    /// Unguarded R-matrix family; the sampler owns the pole guard.
    pub fn family(&self) -> Result<BelavinR> {
        Ok(BelavinR::new(self.n, self.tau)?.with_hbar_guard(0.0))
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

/// Parameters a check consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    N,
    Tau,
    Hbar,
    Hbar2,
    Z,
    W,
    X,
    Gamma,
    Slots,
    Momenta,
    Coupling,
}

/// Ranks a check is defined for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    Any,
    Odd,
    Even,
    Only(usize),
}

impl RankRule {
    pub fn allows(self, n: usize) -> bool {
        match self {
            RankRule::Any => true,
            RankRule::Odd => n % 2 == 1,
            RankRule::Even => n % 2 == 0,
            RankRule::Only(m) => n == m,
        }
    }
}

/// Pole-bearing argument of a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Guard {
    /// Must stay away from `Z + τZ`.
    Lattice(C),
    /// Must stay away from `(Z + τZ)/N`, measured as `dist(Nx)/N`.
    Torsion(C),
}

impl Guard {
    fn distance(self, tau: Tau, n: usize) -> f64 {
        match self {
            Guard::Lattice(x) => tau.lattice_distance(x),
            Guard::Torsion(x) => {
                let nf = n as f64;
                tau.lattice_distance(x * nf) / nf
            }
        }
    }
}

pub type ResidualFn = Arc<dyn Fn(&Sample) -> Result<f64> + Send + Sync>;
pub type GuardFn = Arc<dyn Fn(&Sample) -> Vec<Guard> + Send + Sync>;

#[derive(Clone)]
pub struct IdentityCheck {
    pub id: String,
    /// The identity in words and symbols.
    pub anchor: String,
    pub arity: Vec<Param>,
    pub default_tolerance: f64,
    pub ranks: RankRule,
    pub guards: GuardFn,
    pub residual: ResidualFn,
}

impl std::fmt::Debug for IdentityCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IdentityCheck")
            .field("id", &self.id)
            .field("anchor", &self.anchor)
            .field("default_tolerance", &self.default_tolerance)
            .field("ranks", &self.ranks)
            .finish_non_exhaustive()
    }
}

impl IdentityCheck {
    pub fn new(
        id: &str,
        anchor: &str,
        arity: &[Param],
        default_tolerance: f64,
        ranks: RankRule,
        guards: impl Fn(&Sample) -> Vec<Guard> + Send + Sync + 'static,
        residual: impl Fn(&Sample) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.to_string(),
            anchor: anchor.to_string(),
            arity: arity.to_vec(),
            default_tolerance,
            ranks,
            guards: Arc::new(guards),
            residual: Arc::new(residual),
        }
    }

    /// Same check with the residual replaced by `f(sample, original residual)`.
    pub fn map_residual(
        &self,
        f: impl Fn(&Sample, &ResidualFn) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        let inner = self.residual.clone();
        let mut out = self.clone();
        out.residual = Arc::new(move |s| f(s, &inner));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub count: usize,
    pub n_list: Vec<usize>,
    pub tau_list: Vec<Tau>,
    pub pole_guard: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            seed: 42,
            count: 50,
            n_list: vec![1, 2, 3],
            tau_list: vec![Tau::new(C::new(0.0, 0.8)).expect("valid default modulus")],
            pole_guard: 0.05,
        }
    }
}

impl SamplePlan {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        if self.n_list.is_empty() || self.tau_list.is_empty() {
            return Err(Error::Config("rank and modulus lists must be non-empty".into()));
        }
        if let Some(n) = self.n_list.iter().find(|n| !(1..=6).contains(*n)) {
            return Err(Error::Config(format!("rank N = {n} outside 1..=6")));
        }
        if !(self.pole_guard > 0.0 && self.pole_guard < 0.25) {
            return Err(Error::Config(format!(
                "pole guard {} outside (0, 0.25)",
                self.pole_guard
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub anchor: String,
    pub samples_run: usize,
    /// Samples dropped after `MAX_DRAWS` rejected draws.
    pub samples_dropped: usize,
    pub ranks: Vec<usize>,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_sample: Option<Sample>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn sample_seed(seed: u64, id: &str, index: usize) -> u64 {
    splitmix(splitmix(seed ^ fnv1a(id)) ^ index as u64)
}

fn draw(rng: &mut ChaCha8Rng, index: usize, n: usize, tau: Tau, attempts: usize) -> Sample {
    let im = tau.value().im;
    let cell = |rng: &mut ChaCha8Rng| C::new(rng.gen::<f64>(), rng.gen::<f64>() * im);
    let hbar = cell(rng);
    let hbar2 = cell(rng);
    let z = cell(rng);
    let w = cell(rng);
    let x = cell(rng);
    let span = n as i64;
    let gamma = (rng.gen_range(-span..2 * span), rng.gen_range(-span..2 * span));
    let n_tilde = rng.gen_range(2..=3);
    let unit = |rng: &mut ChaCha8Rng| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    let momenta = [unit(rng), unit(rng), unit(rng)];
    let coupling = unit(rng) + C::new(1.0, 0.0);
    Sample {
        index,
        n,
        tau,
        hbar,
        hbar2,
        z,
        w,
        x,
        gamma,
        n_tilde,
        momenta,
        coupling,
        attempts,
    }
}

fn evaluate(
    check: &IdentityCheck,
    plan: &SamplePlan,
    ranks: &[usize],
    index: usize,
) -> Result<Option<(Sample, f64)>> {
    let n = ranks[index % ranks.len()];
    let tau = plan.tau_list[(index / ranks.len()) % plan.tau_list.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(plan.seed, &check.id, index));
    for attempt in 1..=MAX_DRAWS {
        let s = draw(&mut rng, index, n, tau, attempt);
        let guarded = (check.guards)(&s)
            .into_iter()
            .all(|g| g.distance(tau, n) >= plan.pole_guard);
        if !guarded {
            continue;
        }
        match (check.residual)(&s) {
            Ok(r) => {
                let r = if r.is_finite() { r } else { f64::MAX };
                return Ok(Some((s, r)));
            }
            Err(Error::Pole { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

pub fn run_check(check: &IdentityCheck, plan: &SamplePlan) -> Result<CheckReport> {
    run_check_with_tolerance(check, plan, check.default_tolerance)
}

pub fn run_check_with_tolerance(
    check: &IdentityCheck,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<CheckReport> {
    plan.validate()?;
    let ranks: Vec<usize> = plan
        .n_list
        .iter()
        .copied()
        .filter(|n| check.ranks.allows(*n))
        .collect();
    if ranks.is_empty() {
        return Ok(CheckReport {
            id: check.id.clone(),
            anchor: check.anchor.clone(),
            samples_run: 0,
            samples_dropped: 0,
            ranks,
            max_residual: 0.0,
            mean_residual: 0.0,
            worst_sample: None,
            tolerance,
            pass: true,
            note: Some(format!(
                "no rank in {:?} satisfies the rank rule {:?}",
                plan.n_list, check.ranks
            )),
        });
    }
    let results: Vec<Option<(Sample, f64)>> = (0..plan.count)
        .into_par_iter()
        .map(|i| evaluate(check, plan, &ranks, i))
        .collect::<Result<_>>()?;
    let dropped = results.iter().filter(|r| r.is_none()).count();
    let done: Vec<(Sample, f64)> = results.into_iter().flatten().collect();
    if done.is_empty() {
        return Err(Error::AllSamplesRejected {
            id: check.id.clone(),
            attempted: plan.count,
        });
    }
    let mut worst = 0;
    for (i, (_, r)) in done.iter().enumerate() {
        if *r > done[worst].1 {
            worst = i;
        }
    }
    let max_residual = done[worst].1;
    let mean_residual = done.iter().map(|(_, r)| r).sum::<f64>() / done.len() as f64;
    let skipped: Vec<usize> = plan
        .n_list
        .iter()
        .copied()
        .filter(|n| !check.ranks.allows(*n))
        .collect();
    let note = (!skipped.is_empty()).then(|| format!("ranks {skipped:?} excluded by rule {:?}", check.ranks));
    Ok(CheckReport {
        id: check.id.clone(),
        anchor: check.anchor.clone(),
        samples_run: done.len(),
        samples_dropped: dropped,
        ranks,
        max_residual,
        mean_residual,
        worst_sample: Some(done[worst].0.clone()),
        tolerance,
        pass: max_residual <= tolerance,
        note,
    })
}

pub fn find_check(id: &str) -> Result<IdentityCheck> {
    registry()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::UnknownCheck(id.to_string()))
}

pub fn run_check_by_id(id: &str, plan: &SamplePlan) -> Result<CheckReport> {
    run_check(&find_check(id)?, plan)
}

/// Runs the listed checks (all registered ones for `None`) in registry order
/// of the request, with per-id tolerance overrides.
pub fn run_suite(
    ids: Option<&[String]>,
    plan: &SamplePlan,
    overrides: &BTreeMap<String, f64>,
) -> Result<Vec<CheckReport>> {
    let all = registry();
    let selected: Vec<IdentityCheck> = match ids {
        None => all,
        Some(ids) => ids
            .iter()
            .map(|id| {
                all.iter()
                    .find(|c| &c.id == id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownCheck(id.clone()))
            })
            .collect::<Result<_>>()?,
    };
    if let Some(bad) = overrides.keys().find(|k| !selected.iter().any(|c| &c.id == *k)) {
        return Err(Error::UnknownCheck(bad.clone()));
    }
    selected
        .iter()
        .map(|c| {
            let tol = overrides.get(&c.id).copied().unwrap_or(c.default_tolerance);
            run_check_with_tolerance(c, plan, tol)
        })
        .collect()
}

/// Ids that every registry must contain.
pub const REQUIRED_IDS: [&str; 33] = [
    "scalar_fay",
    "scalar_fay_deg1",
    "scalar_fay_deg2",
    "scalar_fay_deg3",
    "sym_args",
    "local_h_expansion",
    "r2_minus_2m",
    "local_z_expansion",
    "residue_h",
    "residue_z",
    "parity_R",
    "parity_rm",
    "qp_z_1",
    "qp_z_tau",
    "qp_h_1",
    "qp_h_tau",
    "qp_gamma_z",
    "qp_gamma_h",
    "heat",
    "deriv_h",
    "deriv_z",
    "aybe",
    "fay_mat3_deg_r11",
    "fay_mat3_deg_r120",
    "fay_mat2",
    "fay_mat2_deg_r12",
    "fay_mat2_deg_r13",
    "unitarity",
    "znzn_symmetry",
    "kappa_sum",
    "prop31_components",
    "cm_qp_1",
    "cm_qp_tau",
];

fn sdef(a: C, b: C) -> f64 {
    (a - b).norm() / 1f64.max(a.norm()).max(b.norm())
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn order_residual(observed: f64, expected: f64) -> f64 {
    (observed - expected).abs() / expected
}

fn decay_order(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let a = f(EXPANSION_STEP)?;
    let b = f(EXPANSION_STEP / 2.0)?;
    Ok((a / b).log2())
}

/// `(1/2πi)∮ f` over a circle of radius `CONTOUR_RADIUS` around `center`.
fn contour_residue<T>(
    center: C,
    f: impl Fn(C) -> Result<T>,
    zero: T,
    axpy: impl Fn(&mut T, C, &T),
) -> Result<T> {
    let mut acc = zero;
    for k in 0..CONTOUR_NODES {
        let t = std::f64::consts::TAU * k as f64 / CONTOUR_NODES as f64;
        let d = C::from_polar(CONTOUR_RADIUS, t);
        let v = f(center + d)?;
        axpy(&mut acc, d / CONTOUR_NODES as f64, &v);
    }
    Ok(acc)
}

fn contour_residue_scalar(f: impl Fn(C) -> Result<C>) -> Result<C> {
    contour_residue(C::new(0.0, 0.0), f, C::new(0.0, 0.0), |a, s, v| *a += s * v)
}

fn contour_residue_matrix(dim: usize, f: impl Fn(C) -> Result<CMatrix>) -> Result<CMatrix> {
    contour_residue(C::new(0.0, 0.0), f, CMatrix::zeros(dim), |a, s, v| a.axpy(s, v))
}

/// Richardson-extrapolated central difference of `f(τ + ε·dir)` in `ε`,
/// divided by `dir`.
fn tau_derivative(tau: Tau, dir: C, f: impl Fn(Tau) -> Result<CMatrix>) -> Result<CMatrix> {
    let central = |h: f64| -> Result<CMatrix> {
        let p = f(Tau::new(tau.value() + dir * h)?)?;
        let m = f(Tau::new(tau.value() - dir * h)?)?;
        Ok((&p - &m).scale(C::new(0.5 / h, 0.0) / dir))
    };
    let d1 = central(TAU_STEP)?;
    let d2 = central(TAU_STEP / 2.0)?;
    Ok((&d2.scale(C::new(4.0 / 3.0, 0.0))) - &d1.scale(C::new(1.0 / 3.0, 0.0)))
}

fn l(x: C) -> Guard {
    Guard::Lattice(x)
}

fn t(x: C) -> Guard {
    Guard::Torsion(x)
}

fn three(s: &Sample) -> Result<TensorLayout> {
    TensorLayout::new(3, s.n)
}

fn scalar_fay(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let (x, y, u, w) = (s.z, s.w, s.hbar, s.hbar2);
    let lhs = cv.phi(x, u)? * cv.phi(y, w)?;
    let rhs = cv.phi(x - y, u)? * cv.phi(y, u + w)? + cv.phi(y - x, w)? * cv.phi(x, u + w)?;
    Ok(sdef(lhs, rhs))
}

fn scalar_fay_deg1(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let (x, a, b) = (s.z, s.hbar, s.hbar2);
    let lhs = cv.phi(x, a)? * cv.phi(x, b)?;
    let rhs = cv.phi(x, a + b)? * (cv.e1(x)? + cv.e1(a)? + cv.e1(b)? - cv.e1(x + a + b)?);
    Ok(sdef(lhs, rhs))
}

fn scalar_fay_deg2(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let (x, y, a) = (s.z, s.w, s.hbar);
    let lhs = cv.phi(x, a)? * cv.phi(y, a)?;
    let rhs = cv.phi(x + y, a)? * (cv.e1(x)? + cv.e1(y)? + cv.e1(a)? - cv.e1(x + y + a)?);
    Ok(sdef(lhs, rhs))
}

fn scalar_fay_deg3(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let (x, a) = (s.z, s.hbar);
    let lhs = cv.phi(x, a)? * cv.phi(x, -a)?;
    Ok(sdef(lhs, cv.e2(x)? - cv.e2(a)?).max(sdef(lhs, cv.wp(x)? - cv.wp(a)?)))
}

fn scalar_sym(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    Ok(sdef(cv.phi(s.z, s.hbar)?, cv.phi(s.hbar, s.z)?))
}

fn scalar_parity(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let (z, u) = (s.z, s.hbar);
    Ok(max_of([
        sdef(cv.phi(-z, -u)?, -cv.phi(z, u)?),
        sdef(cv.e1(-z)?, -cv.e1(z)?),
        sdef(cv.e2(-z)?, cv.e2(z)?),
    ]))
}

fn scalar_qp(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let (z, u) = (s.z, s.hbar);
    let tau = s.tau.value();
    let one = C::new(1.0, 0.0);
    let phi = cv.phi(z, u)?;
    let e1 = cv.e1(z)?;
    let e2 = cv.e2(z)?;
    Ok(max_of([
        sdef(cv.phi(z + one, u)?, phi),
        sdef(cv.phi(z + tau, u)?, (-TWO_PI_I * u).exp() * phi),
        sdef(cv.e1(z + one)?, e1),
        sdef(cv.e1(z + tau)?, e1 - TWO_PI_I),
        sdef(cv.e2(z + one)?, e2),
        sdef(cv.e2(z + tau)?, e2),
    ]))
}

fn scalar_residue(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let one = C::new(1.0, 0.0);
    let in_z = contour_residue_scalar(|z| cv.phi(z, s.hbar))?;
    let in_u = contour_residue_scalar(|u| cv.phi(s.z, u))?;
    let e1 = contour_residue_scalar(|z| cv.e1(z))?;
    Ok(max_of([sdef(in_z, one), sdef(in_u, one), sdef(e1, one)]))
}

fn scalar_local_expansion(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let u = s.hbar;
    let dir = C::from_polar(1.0, s.z.arg());
    let e1 = cv.e1(u)?;
    let c1 = (e1 * e1 - cv.wp(u)?) / 2.0;
    let order = decay_order(|h| {
        let z = dir * h;
        Ok((cv.phi(z, u)? - 1.0 / z - e1 - z * c1).norm())
    })?;
    Ok(order_residual(order, 2.0))
}

fn scalar_heat(s: &Sample) -> Result<f64> {
    let (z, u) = (s.z, s.hbar);
    let rhs = s.curve()?.phi_dz_du(z, u)?;
    let f = |t: Tau| -> Result<CMatrix> { Ok(CMatrix::scalar(1, EllipticCurve::new(t)?.phi(z, u)?)) };
    let mut worst: f64 = 0.0;
    for dir in [C::new(1.0, 0.0), C::new(0.0, 1.0)] {
        let d = tau_derivative(s.tau, dir, f)?[(0, 0)];
        worst = worst.max(sdef(TWO_PI_I * d, rhs));
    }
    Ok(worst)
}

fn route_qseries(s: &Sample) -> Result<f64> {
    let direct = s.curve()?.phi(s.z, s.hbar)?;
    Ok(sdef(kronecker_phi_q_series(s.z, s.hbar, s.tau)?, direct))
}

fn route_double_series(s: &Sample) -> Result<f64> {
    let limit = kronecker_double_series_limit(s.z, s.hbar, s.tau)?;
    let partial = kronecker_double_series(s.z, s.hbar, s.tau, DOUBLE_SERIES_M, Summation::Fejer)?;
    Ok((partial - limit).norm() / limit.norm())
}

fn sym_args(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let nf = s.nf();
    let lay = fam.pair_layout();
    let lhs = fam.r12(s.hbar, s.z)?;
    let p = fam.permutation(1, 2, lay)?;
    let rhs = &fam.r12(s.z / nf, nf * s.hbar)? * &p;
    Ok(relative_defect(&lhs, &rhs))
}

fn prop31_components(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let cv = fam.curve();
    let n = s.n;
    let nf = s.nf();
    let tau = s.tau.value();
    let (z, hbar) = (s.z, s.hbar);
    let mut gammas: Vec<(i64, i64)> = LatticeIndex::all(n).map(|g| g.as_ints()).collect();
    gammas.push(s.gamma);
    let twisted = |g: (i64, i64), u: C, v: C| -> Result<C> {
        let g2 = g.1 as f64 / nf;
        let omega = (g.0 as f64 + g.1 as f64 * tau) / nf;
        Ok((TWO_PI_I * u * g2).exp() * cv.phi(u, omega + v)?)
    };
    let mut worst: f64 = 0.0;
    for g in gammas {
        let mut sum_a = C::new(0.0, 0.0);
        let mut sum_b = C::new(0.0, 0.0);
        for al in LatticeIndex::all(n) {
            let k = kappa_int(al.as_ints(), g, n);
            let k2 = k * k;
            sum_a += k2 * twisted(al.as_ints(), nf * hbar, z / nf)?;
            sum_b += k2 * twisted(al.as_ints(), z, hbar)?;
        }
        worst = worst
            .max(sdef(sum_a / nf, twisted(g, z, hbar)?))
            .max(sdef(sum_b / nf, twisted(g, nf * hbar, z / nf)?));
    }
    Ok(worst)
}

fn local_h_expansion(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let dim = lay.dim();
    let r = fam.classical_r(s.z, 1, 2, lay)?;
    let m = fam.classical_m(s.z, 1, 2, lay)?;
    let dir = C::from_polar(1.0, s.hbar.arg());
    let order = decay_order(|h| {
        let hb = dir * h;
        let mut d = fam.r12(hb, s.z)?;
        d.axpy(-1.0 / hb, &CMatrix::identity(dim));
        d.axpy(C::new(-1.0, 0.0), &r);
        d.axpy(-hb, &m);
        Ok(d.max_abs())
    })?;
    Ok(order_residual(order, 2.0))
}

fn r2_minus_2m(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let r = fam.classical_r(s.z, 1, 2, lay)?;
    let m = fam.classical_m(s.z, 1, 2, lay)?;
    let lhs = &(&r * &r) - &m.scale(C::new(2.0, 0.0));
    let nf = s.nf();
    let rhs = CMatrix::scalar(lay.dim(), nf * nf * fam.curve().wp(s.z)?);
    Ok(relative_defect(&lhs, &rhs))
}

fn local_z_expansion(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let p = fam.permutation(1, 2, lay)?.scale(C::new(s.nf(), 0.0));
    let r0 = fam.r_zero(s.hbar, 1, 2, lay)?;
    let dir = C::from_polar(1.0, s.z.arg());
    let order = decay_order(|h| {
        let z = dir * h;
        let mut d = fam.r12(s.hbar, z)?;
        d.axpy(-1.0 / z, &p);
        d.axpy(C::new(-1.0, 0.0), &r0);
        Ok(d.max_abs())
    })?;
    Ok(order_residual(order, 1.0))
}

fn residue_h(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let dim = fam.pair_layout().dim();
    let res = contour_residue_matrix(dim, |h| fam.r12(h, s.z))?;
    Ok(relative_defect(&res, &CMatrix::identity(dim)))
}

fn residue_z(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let p = fam.permutation(1, 2, lay)?.scale(C::new(s.nf(), 0.0));
    let res_r = contour_residue_matrix(lay.dim(), |z| fam.r12(s.hbar, z))?;
    let res_cl = contour_residue_matrix(lay.dim(), |z| fam.classical_r(z, 1, 2, lay))?;
    Ok(relative_defect(&res_r, &p).max(relative_defect(&res_cl, &p)))
}

fn parity_r(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lhs = fam.r12(s.hbar, s.z)?;
    let rhs = -&fam.r21(-s.hbar, -s.z)?;
    Ok(relative_defect(&lhs, &rhs))
}

fn parity_rm(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let r = relative_defect(
        &fam.classical_r(s.z, 1, 2, lay)?,
        &-&fam.classical_r(-s.z, 2, 1, lay)?,
    );
    let m = relative_defect(
        &fam.classical_m(s.z, 1, 2, lay)?,
        &fam.classical_m(-s.z, 2, 1, lay)?,
    );
    Ok(r.max(m))
}

/// `(g⁻¹ ⊗ 1) X (g ⊗ 1)` or, with `right_second`, `(g⁻¹ ⊗ 1) X (1 ⊗ g)`.
fn conjugate(x: &CMatrix, g: &CMatrix, right_second: bool, lay: TensorLayout) -> Result<CMatrix> {
    let left = tensor_embed(&g.adjoint(), 1, lay)?;
    let right = tensor_embed(g, if right_second { 2 } else { 1 }, lay)?;
    Ok(&(&left * x) * &right)
}

fn qp_z_1(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let lhs = fam.r12(s.hbar, s.z + 1.0)?;
    let rhs = conjugate(&fam.r12(s.hbar, s.z)?, &gen_q(s.n), false, lay)?;
    Ok(relative_defect(&lhs, &rhs))
}

fn qp_z_tau(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let lhs = fam.r12(s.hbar, s.z + s.tau.value())?;
    let rhs =
        conjugate(&fam.r12(s.hbar, s.z)?, &gen_lambda(s.n), false, lay)?.scale((-TWO_PI_I * s.hbar).exp());
    Ok(relative_defect(&lhs, &rhs))
}

fn qp_h_1(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    Ok(relative_defect(
        &fam.r12(s.hbar + 1.0, s.z)?,
        &fam.r12(s.hbar, s.z)?,
    ))
}

fn qp_h_tau(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lhs = fam.r12(s.hbar + s.tau.value(), s.z)?;
    let rhs = fam.r12(s.hbar, s.z)?.scale((-TWO_PI_I * s.z).exp());
    Ok(relative_defect(&lhs, &rhs))
}

fn qp_gamma_z(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let nf = s.nf();
    let (g1, g2) = s.gamma;
    let omega = (g1 as f64 + g2 as f64 * s.tau.value()) / nf;
    let tg = t_basis_int(g1, g2, s.n);
    let lhs = fam.r12(s.hbar, s.z + nf * omega)?;
    let phase = (-TWO_PI_I * nf * s.hbar * (g2 as f64 / nf)).exp();
    let rhs = conjugate(&fam.r12(s.hbar, s.z)?, &tg, false, lay)?.scale(phase);
    Ok(relative_defect(&lhs, &rhs))
}

fn qp_gamma_h(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let nf = s.nf();
    let (g1, g2) = s.gamma;
    let omega = (g1 as f64 + g2 as f64 * s.tau.value()) / nf;
    let tg = t_basis_int(g1, g2, s.n);
    let lhs = fam.r12(s.hbar + omega, s.z)?;
    let phase = (-TWO_PI_I * s.z * (g2 as f64 / nf)).exp();
    let rhs = conjugate(&fam.r12(s.hbar, s.z)?, &tg, true, lay)?.scale(phase);
    Ok(relative_defect(&lhs, &rhs))
}

fn qp_classical_r(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let r = fam.classical_r(s.z, 1, 2, lay)?;
    let a = relative_defect(
        &fam.classical_r(s.z + 1.0, 1, 2, lay)?,
        &conjugate(&r, &gen_q(s.n), false, lay)?,
    );
    let mut rhs = conjugate(&r, &gen_lambda(s.n), false, lay)?;
    rhs.axpy(-TWO_PI_I, &CMatrix::identity(lay.dim()));
    let b = relative_defect(&fam.classical_r(s.z + s.tau.value(), 1, 2, lay)?, &rhs);
    Ok(a.max(b))
}

/// `R^{ħ+shift}_ab(z_a − z_b)` against `phase · g_a⁻¹ R^ħ_ab g_b` with slots
/// `a = ñ`, `b = 1`.
fn slot_shift(s: &Sample, shift: C, g: &CMatrix, phase: C) -> Result<f64> {
    let fam = s.family()?;
    let lay = TensorLayout::new(s.n_tilde, s.n)?;
    let (a, b) = (s.n_tilde, 1);
    let z = s.z - s.w;
    let lhs = fam.quantum_r(s.hbar + shift, z, a, b, lay)?;
    let ga = tensor_embed(&g.adjoint(), a, lay)?;
    let gb = tensor_embed(g, b, lay)?;
    let rhs = (&(&ga * &fam.quantum_r(s.hbar, z, a, b, lay)?) * &gb).scale(phase);
    Ok(relative_defect(&lhs, &rhs))
}

fn qp_slot_shift_1(s: &Sample) -> Result<f64> {
    slot_shift(s, C::new(1.0 / s.nf(), 0.0), &gen_q(s.n), C::new(1.0, 0.0))
}

fn qp_slot_shift_tau(s: &Sample) -> Result<f64> {
    let phase = (-TWO_PI_I * (s.z - s.w) / s.nf()).exp();
    slot_shift(s, s.tau.value() / s.nf(), &gen_lambda(s.n), phase)
}

fn heat(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let rhs = fam.dh_f(s.hbar, s.z, 1, 2, lay)?;
    let mut worst: f64 = 0.0;
    for dir in [C::new(1.0, 0.0), C::new(0.0, 1.0)] {
        let d = tau_derivative(s.tau, dir, |t| {
            BelavinR::new(s.n, t)?.with_hbar_guard(0.0).r12(s.hbar, s.z)
        })?;
        worst = worst.max(relative_defect(&d.scale(TWO_PI_I), &rhs));
    }
    Ok(worst)
}

fn deriv_h(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let cv = fam.curve();
    let nf = s.nf();
    let (z, h) = (s.z, s.hbar);
    let r = fam.r12(h, z)?;
    let lhs = fam.dh_r(h, z, 1, 2, lay)?;
    let rp = fam.classical_r(z + nf * h, 1, 2, lay)?;
    let rm = fam.classical_r(z - nf * h, 1, 2, lay)?;
    let mut rhs = (&(&rp * &r) + &(&r * &rm)).scale(C::new(0.5, 0.0));
    let c = (cv.e1(z + nf * h)? - cv.e1(z - nf * h)? - 2.0 * cv.e1(nf * h)?) * (nf / 2.0);
    rhs.axpy(c, &r);
    Ok(relative_defect(&lhs, &rhs))
}

fn deriv_z(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let cv = fam.curve();
    let nf = s.nf();
    let (z, h) = (s.z, s.hbar);
    let r = fam.r12(h, z)?;
    let lhs = fam.f_matrix(h, z, 1, 2, lay)?;
    let rp = fam.classical_r(z + nf * h, 1, 2, lay)?;
    let rm = fam.classical_r(z - nf * h, 1, 2, lay)?;
    let mut rhs = (&(&rp * &r) - &(&r * &rm)).scale(C::new(0.5 / nf, 0.0));
    let c = (cv.e1(z + nf * h)? + cv.e1(z - nf * h)? - 2.0 * cv.e1(z)?) / 2.0;
    rhs.axpy(c, &r);
    Ok(relative_defect(&lhs, &rhs))
}

pub fn check_derivative_identities(s: &Sample) -> Result<(f64, f64)> {
    Ok((deriv_h(s)?, deriv_z(s)?))
}

pub fn check_aybe(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = three(s)?;
    let (h, k) = (s.hbar, s.hbar2);
    let (za, zb, zc) = (s.z, s.w, s.x);
    let r = |hb: C, z: C, a, b| fam.quantum_r(hb, z, a, b, lay);
    let lhs = &r(h, za - zb, 1, 2)? * &r(k, zb - zc, 2, 3)?;
    let rhs = &(&r(k, za - zc, 1, 3)? * &r(h - k, za - zb, 1, 2)?)
        + &(&r(k - h, zb - zc, 2, 3)? * &r(h, za - zc, 1, 3)?);
    Ok(relative_defect(&lhs, &rhs))
}

fn fay_mat3_deg_r11(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = three(s)?;
    let h = s.hbar;
    let (za, zb, zc) = (s.z, s.w, s.x);
    let lhs = &fam.quantum_r(h, za - zb, 1, 2, lay)? * &fam.quantum_r(h, zb - zc, 2, 3, lay)?;
    let rac = fam.quantum_r(h, za - zc, 1, 3, lay)?;
    let rhs = &(&(&rac * &fam.classical_r(za - zb, 1, 2, lay)?)
        + &(&fam.classical_r(zb - zc, 2, 3, lay)? * &rac))
        - &fam.dh_r(h, za - zc, 1, 3, lay)?;
    Ok(relative_defect(&lhs, &rhs))
}

fn fay_mat3_deg_r120(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = three(s)?;
    let (h, k, z) = (s.hbar, s.hbar2, s.z);
    let lhs = &fam.quantum_r(h, z, 1, 2, lay)? * &fam.quantum_r(k, -z, 2, 3, lay)?;
    let mut rhs = &(&fam.r_zero(k, 1, 3, lay)? * &fam.quantum_r(h - k, z, 1, 2, lay)?)
        + &(&fam.quantum_r(k - h, -z, 2, 3, lay)? * &fam.r_zero(h, 1, 3, lay)?);
    let f = fam.f_matrix(k - h, -z, 2, 3, lay)?;
    let p = fam.permutation(1, 3, lay)?;
    rhs.axpy(C::new(s.nf(), 0.0), &(&f * &p));
    Ok(relative_defect(&lhs, &rhs))
}

fn fay_mat2_rhs(fam: &BelavinR, n: f64, h: C, k: C, z: C, w: C) -> Result<CMatrix> {
    let cv = fam.curve();
    let y = (z - w) / n + k - h;
    let d = (z - w) / n;
    let mut rhs = fam.r12(h - k, z + n * k)?.scale(n * cv.phi(n * k, y)?);
    rhs.axpy(-n * cv.phi(n * h, y)?, &fam.r12(h - k, w + n * h)?);
    rhs.axpy(n * cv.phi(-w, y)?, &fam.r12(d, w + n * h)?);
    rhs.axpy(-n * cv.phi(-z, y)?, &fam.r12(d, z + n * k)?);
    Ok(rhs)
}

pub fn check_fay_mat2(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lhs = &fam.r12(s.hbar, s.z)? * &fam.r21(s.hbar2, -s.w)?;
    let rhs = fay_mat2_rhs(&fam, s.nf(), s.hbar, s.hbar2, s.z, s.w)?;
    Ok(relative_defect(&lhs, &rhs))
}

fn fay_mat2_deg_r12(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let cv = fam.curve();
    let n = s.nf();
    let (h, z, w) = (s.hbar, s.z, s.w);
    let d = (z - w) / n;
    let lhs = &fam.r12(h, z)? * &fam.r21(h, -w)?;
    let c0 = n * cv.phi(d, n * h)?;
    let mut rhs =
        (&fam.classical_r(z + n * h, 1, 2, lay)? - &fam.classical_r(w + n * h, 1, 2, lay)?).scale(c0);
    rhs.axpy(n * cv.phi(-d, z)?, &fam.r12(d, z + n * h)?);
    rhs.axpy(-n * cv.phi(-d, w)?, &fam.r12(d, w + n * h)?);
    let scalar = n * c0 * (cv.e1(n * h)? - cv.e1(n * h + d)?);
    rhs.axpy(scalar, &CMatrix::identity(lay.dim()));
    Ok(relative_defect(&lhs, &rhs))
}

fn fay_mat2_deg_r13(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let lay = fam.pair_layout();
    let cv = fam.curve();
    let n = s.nf();
    let (h, k, z) = (s.hbar, s.hbar2, s.z);
    let lhs = &fam.r12(h, z)? * &fam.r21(k, -z)?;
    let c0 = n * cv.phi(k - h, -z)?;
    let mut rhs =
        (&fam.classical_r(z + n * h, 1, 2, lay)? - &fam.classical_r(z + n * k, 1, 2, lay)?).scale(c0);
    rhs.axpy(-n * cv.phi(k - h, n * h)?, &fam.r12(h - k, z + n * h)?);
    rhs.axpy(n * cv.phi(k - h, n * k)?, &fam.r12(h - k, z + n * k)?);
    let scalar = n * c0 * (cv.e1(z)? - cv.e1(z + h - k)?);
    rhs.axpy(scalar, &CMatrix::identity(lay.dim()));
    Ok(relative_defect(&lhs, &rhs))
}

/// Residuals of the three-slot and two-slot degenerations, in the order
/// `(r11, r120, r12, r13)` of [`registry`] ids
/// `fay_mat3_deg_r11`, `fay_mat3_deg_r120`, `fay_mat2_deg_r12`, `fay_mat2_deg_r13`.
pub fn check_degenerate_fay(s: &Sample) -> Result<[f64; 4]> {
    Ok([
        fay_mat3_deg_r11(s)?,
        fay_mat3_deg_r120(s)?,
        fay_mat2_deg_r12(s)?,
        fay_mat2_deg_r13(s)?,
    ])
}

/// Rank one: the matrix Fay identity against a two-step scalar Fay
/// expansion of `φ(z, ħ)φ(−w, ħ')`.
fn fay_mat2_scalar_chain(s: &Sample) -> Result<f64> {
    let cv = s.curve()?;
    let (z, w, h, k) = (s.z, s.w, s.hbar, s.hbar2);
    let x = z - w + k - h;
    let lhs = cv.phi(z, h)? * cv.phi(-w, k)?;
    let first = cv.phi(z + w, h)? * cv.phi(-w, h + k)? + cv.phi(-w - z, k)? * cv.phi(z, h + k)?;
    let chain = -cv.phi(h, x)? * cv.phi(w + h, h - k)? - cv.phi(w, -x)? * cv.phi(w + h, z - w)?
        + cv.phi(k, x)? * cv.phi(z + k, h - k)?
        + cv.phi(z, -x)? * cv.phi(z + k, z - w)?;
    let fam = BelavinR::new(1, s.tau)?.with_hbar_guard(0.0);
    let matrix = fay_mat2_rhs(&fam, 1.0, h, k, z, w)?[(0, 0)];
    Ok(max_of([sdef(lhs, first), sdef(lhs, chain), sdef(lhs, matrix)]))
}

fn unitarity(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let cv = fam.curve();
    let n = s.nf();
    let dim = fam.pair_layout().dim();
    let lhs = &fam.r12(s.hbar, s.z)? * &fam.r21(s.hbar, -s.z)?;
    let wp = n * n * (cv.wp(n * s.hbar)? - cv.wp(s.z)?);
    let phis = n * n * cv.phi(n * s.hbar, s.z)? * cv.phi(n * s.hbar, -s.z)?;
    Ok(relative_defect(&lhs, &CMatrix::scalar(dim, wp)).max(sdef(wp, phis)))
}

fn znzn_symmetry(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let r = fam.r12(s.hbar, s.z)?;
    let mut worst: f64 = 0.0;
    for g in [gen_q(s.n), gen_lambda(s.n)] {
        let gg = g.kron(&g);
        let rhs = &(&gg * &r) * &gg.adjoint();
        worst = worst.max(relative_defect(&rhs, &r));
    }
    Ok(worst)
}

fn kappa_sum(s: &Sample) -> Result<f64> {
    let n = s.n;
    let nn = (n * n) as f64;
    let mut gammas: Vec<(i64, i64)> = LatticeIndex::all(n).map(|g| g.as_ints()).collect();
    gammas.push(s.gamma);
    let mut worst: f64 = 0.0;
    for g in gammas {
        let sum: C = LatticeIndex::all(n)
            .map(|al| {
                let k = kappa_int(al.as_ints(), g, n);
                k * k
            })
            .sum();
        let zero = LatticeIndex::new(g.0, g.1, n).is_zero();
        let want = if zero { nn } else { 0.0 };
        worst = worst.max((sum - want).norm() / nn);
    }
    Ok(worst)
}

fn cm_params(s: &Sample, hbar: C) -> CMLaxParams {
    let k = s.n_tilde;
    CMLaxParams {
        n: s.n,
        tau: s.tau,
        hbar,
        nu: s.coupling,
        momenta: s.momenta[..k].to_vec(),
        positions: [s.z, s.w, s.x][..k].to_vec(),
    }
}

fn cm_qp_1(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let p = cm_params(s, s.hbar);
    let q = fam.cm_block_q(&p)?;
    let lhs = fam.cm_lax(&cm_params(s, s.hbar + 1.0 / s.nf()))?;
    let rhs = &(&q.adjoint() * &fam.cm_lax(&p)?) * &q;
    Ok(relative_defect(&lhs, &rhs))
}

fn cm_qp_tau(s: &Sample) -> Result<f64> {
    let fam = s.family()?;
    let p = cm_params(s, s.hbar);
    let lam = fam.cm_block_lambda(&p)?;
    let zb = fam.cm_block_z(&p)?;
    let ez = |sign: f64| {
        CMatrix::from_fn(zb.dim(), |r, c| {
            if r == c {
                (sign * TWO_PI_I * zb[(r, r)] / s.nf()).exp()
            } else {
                C::new(0.0, 0.0)
            }
        })
    };
    let lhs = fam.cm_lax(&cm_params(s, s.hbar + s.tau.value() / s.nf()))?;
    let rhs = &(&(&(&ez(-1.0) * &lam.adjoint()) * &fam.cm_lax(&p)?) * &lam) * &ez(1.0);
    Ok(relative_defect(&lhs, &rhs))
}

fn pvi_zero_curvature(s: &Sample) -> Result<crate::painleve::ZeroCurvatureResiduals> {
    check_zero_curvature_identities(s.tau, s.n, s.hbar, s.z, s.w)
}

/// Constants used by the on-shell monodromy check: four generic values for
/// odd `N`, a single one for even `N`.
pub fn monodromy_constants(n: usize) -> PVIConstants {
    if n % 2 == 1 {
        PVIConstants::default()
    } else {
        PVIConstants::real([0.0, 0.0, 0.3, 0.0])
    }
}

fn pvi_monodromy(s: &Sample) -> Result<f64> {
    let state = PVIState {
        u: s.z,
        v: s.momenta[0],
        tau: s.tau,
    };
    monodromy_residual(
        &state,
        &monodromy_constants(s.n),
        s.hbar,
        s.n,
        ResidualMode::Analytic,
    )
}

fn pvi_guards(s: &Sample) -> Vec<Guard> {
    let hp = HalfPeriods::new(s.tau);
    let n = s.nf();
    let mut g = vec![t(s.hbar), l(n * s.hbar)];
    for u in [s.z, s.w] {
        for om in hp.omega {
            let x = u + n * om;
            g.extend([l(x), t(x + s.hbar), t(-x + s.hbar)]);
        }
    }
    for a in hp.omega {
        for b in hp.omega {
            g.push(l(n * s.hbar + n * (a - b)));
            g.push(l(n * s.hbar + n * (a + b)));
        }
    }
    g
}

/// Every registered check, required ids first.
pub fn registry() -> Vec<IdentityCheck> {
    use Param::*;
    use RankRule::{Any, Even, Odd, Only};
    let alg = ALGEBRAIC_TOLERANCE;
    let sc = SCALAR_TOLERANCE;
    let ns = |s: &Sample| s.nf();
    let base = |s: &Sample| vec![l(s.z), t(s.hbar)];
    let mut v = vec![
        IdentityCheck::new(
            "scalar_fay",
            "φ(x,u)φ(y,w) = φ(x−y,u)φ(y,u+w) + φ(y−x,w)φ(x,u+w)",
            &[Tau, Z, W, Hbar, Hbar2],
            sc,
            Any,
            |s| vec![l(s.z), l(s.w), l(s.hbar), l(s.hbar2), l(s.z - s.w), l(s.hbar + s.hbar2)],
            scalar_fay,
        ),
        IdentityCheck::new(
            "scalar_fay_deg1",
            "φ(x,a)φ(x,b) = φ(x,a+b)(E1(x)+E1(a)+E1(b)−E1(x+a+b))",
            &[Tau, Z, Hbar, Hbar2],
            sc,
            Any,
            |s| {
                vec![
                    l(s.z),
                    l(s.hbar),
                    l(s.hbar2),
                    l(s.hbar + s.hbar2),
                    l(s.z + s.hbar + s.hbar2),
                ]
            },
            scalar_fay_deg1,
        ),
        IdentityCheck::new(
            "scalar_fay_deg2",
            "φ(x,a)φ(y,a) = φ(x+y,a)(E1(x)+E1(y)+E1(a)−E1(x+y+a))",
            &[Tau, Z, W, Hbar],
            sc,
            Any,
            |s| vec![l(s.z), l(s.w), l(s.hbar), l(s.z + s.w), l(s.z + s.w + s.hbar)],
            scalar_fay_deg2,
        ),
        IdentityCheck::new(
            "scalar_fay_deg3",
            "φ(x,a)φ(x,−a) = E2(x)−E2(a) = ℘(x)−℘(a)",
            &[Tau, Z, Hbar],
            sc,
            Any,
            |s| vec![l(s.z), l(s.hbar)],
            scalar_fay_deg3,
        ),
        IdentityCheck::new(
            "sym_args",
            "R^ħ_12(z) = R^{z/N}_12(Nħ) P_12",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            |s| vec![l(s.z), t(s.hbar), l(s.nf() * s.hbar), t(s.z / s.nf())],
            sym_args,
        ),
        IdentityCheck::new(
            "local_h_expansion",
            "R^ħ_12(z) = 1⊗1/ħ + r_12(z) + ħ m_12(z) + O(ħ²), decay order 2",
            &[N, Tau, Hbar, Z],
            ORDER_TOLERANCE,
            Any,
            |s| vec![l(s.z)],
            local_h_expansion,
        ),
        IdentityCheck::new(
            "r2_minus_2m",
            "r_12(z)² − 2m_12(z) = N²℘(z) 1⊗1",
            &[N, Tau, Z],
            alg,
            Any,
            |s| vec![l(s.z)],
            r2_minus_2m,
        ),
        IdentityCheck::new(
            "local_z_expansion",
            "R^ħ_12(z) = N P_12/z + R^{ħ,(0)}_12 + O(z), decay order 1",
            &[N, Tau, Hbar],
            ORDER_TOLERANCE,
            Any,
            |s| vec![t(s.hbar)],
            local_z_expansion,
        ),
        IdentityCheck::new(
            "residue_h",
            "Res_{ħ=0} R^ħ_12(z) = 1⊗1",
            &[N, Tau, Z],
            alg,
            Any,
            |s| vec![l(s.z)],
            residue_h,
        ),
        IdentityCheck::new(
            "residue_z",
            "Res_{z=0} R^ħ_12(z) = Res_{z=0} r_12(z) = N P_12",
            &[N, Tau, Hbar],
            alg,
            Any,
            |s| vec![t(s.hbar)],
            residue_z,
        ),
        IdentityCheck::new(
            "parity_R",
            "R^ħ_12(z) = −R^{−ħ}_21(−z)",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            base,
            parity_r,
        ),
        IdentityCheck::new(
            "parity_rm",
            "r_12(z) = −r_21(−z), m_12(z) = m_21(−z)",
            &[N, Tau, Z],
            alg,
            Any,
            |s| vec![l(s.z)],
            parity_rm,
        ),
        IdentityCheck::new(
            "qp_z_1",
            "R^ħ_12(z+1) = (Q⁻¹⊗1) R^ħ_12(z) (Q⊗1)",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            base,
            qp_z_1,
        ),
        IdentityCheck::new(
            "qp_z_tau",
            "R^ħ_12(z+τ) = e^{−2πiħ} (Λ⁻¹⊗1) R^ħ_12(z) (Λ⊗1)",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            base,
            qp_z_tau,
        ),
        IdentityCheck::new(
            "qp_h_1",
            "R^{ħ+1}_12(z) = R^ħ_12(z)",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            base,
            qp_h_1,
        ),
        IdentityCheck::new(
            "qp_h_tau",
            "R^{ħ+τ}_12(z) = e^{−2πiz} R^ħ_12(z)",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            base,
            qp_h_tau,
        ),
        IdentityCheck::new(
            "qp_gamma_z",
            "R^ħ_12(z+Nω_γ) = e^{−2πiNħ∂_τω_γ} (T_γ⁻¹⊗1) R^ħ_12(z) (T_γ⊗1)",
            &[N, Tau, Hbar, Z, Gamma],
            alg,
            Any,
            base,
            qp_gamma_z,
        ),
        IdentityCheck::new(
            "qp_gamma_h",
            "R^{ħ+ω_γ}_12(z) = e^{−2πiz∂_τω_γ} (T_γ⁻¹⊗1) R^ħ_12(z) (1⊗T_γ)",
            &[N, Tau, Hbar, Z, Gamma],
            alg,
            Any,
            base,
            qp_gamma_h,
        ),
        IdentityCheck::new(
            "heat",
            "2πi ∂_τ R^ħ_12(z) = ∂_z ∂_ħ R^ħ_12(z)",
            &[N, Tau, Hbar, Z],
            HEAT_TOLERANCE,
            Any,
            |s| vec![l(s.z), t(s.hbar), t(s.z + s.hbar)],
            heat,
        ),
        IdentityCheck::new(
            "deriv_h",
            "∂_ħR = ½(r(z+Nħ)R + R r(z−Nħ)) + (N/2)(E1(z+Nħ)−E1(z−Nħ)−2E1(Nħ))R",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            move |s| {
                let n = ns(s);
                vec![
                    l(s.z),
                    t(s.hbar),
                    t(s.z + s.hbar),
                    l(s.z + n * s.hbar),
                    l(s.z - n * s.hbar),
                    l(n * s.hbar),
                ]
            },
            deriv_h,
        ),
        IdentityCheck::new(
            "deriv_z",
            "∂_zR = (1/2N)(r(z+Nħ)R − R r(z−Nħ)) + ½(E1(z+Nħ)+E1(z−Nħ)−2E1(z))R",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            move |s| {
                let n = ns(s);
                vec![
                    l(s.z),
                    t(s.hbar),
                    t(s.z + s.hbar),
                    l(s.z + n * s.hbar),
                    l(s.z - n * s.hbar),
                ]
            },
            deriv_z,
        ),
        IdentityCheck::new(
            "aybe",
            "R^ħ_ab R^{ħ'}_bc = R^{ħ'}_ac R^{ħ−ħ'}_ab + R^{ħ'−ħ}_bc R^ħ_ac",
            &[N, Tau, Hbar, Hbar2, Z, W, X, Slots],
            alg,
            Any,
            |s| {
                vec![
                    t(s.hbar),
                    t(s.hbar2),
                    t(s.hbar - s.hbar2),
                    l(s.z - s.w),
                    l(s.w - s.x),
                    l(s.z - s.x),
                ]
            },
            check_aybe,
        ),
        IdentityCheck::new(
            "fay_mat3_deg_r11",
            "R^ħ_ab R^ħ_bc = R^ħ_ac r_ab + r_bc R^ħ_ac − ∂_ħR^ħ_ac",
            &[N, Tau, Hbar, Z, W, X, Slots],
            alg,
            Any,
            |s| {
                vec![
                    t(s.hbar),
                    l(s.z - s.w),
                    l(s.w - s.x),
                    l(s.z - s.x),
                    t(s.z - s.x + s.hbar),
                ]
            },
            fay_mat3_deg_r11,
        ),
        IdentityCheck::new(
            "fay_mat3_deg_r120",
            "R^ħ_ab(z)R^{ħ'}_bc(−z) = R^{ħ',(0)}_ac R^{ħ−ħ'}_ab(z) + R^{ħ'−ħ}_bc(−z) R^{ħ,(0)}_ac + N F^{ħ'−ħ}_bc(−z) P_ac",
            &[N, Tau, Hbar, Hbar2, Z, Slots],
            alg,
            Any,
            |s| {
                vec![
                    t(s.hbar),
                    t(s.hbar2),
                    t(s.hbar - s.hbar2),
                    l(s.z),
                    t(-s.z + s.hbar2 - s.hbar),
                ]
            },
            fay_mat3_deg_r120,
        ),
        IdentityCheck::new(
            "fay_mat2",
            "R^ħ_12(z)R^{ħ'}_21(−w) = Nφ(Nħ',y)R^{ħ−ħ'}(z+Nħ') − Nφ(Nħ,y)R^{ħ−ħ'}(w+Nħ) + Nφ(−w,y)R^{(z−w)/N}(w+Nħ) − Nφ(−z,y)R^{(z−w)/N}(z+Nħ'), y = (z−w)/N+ħ'−ħ",
            &[N, Tau, Hbar, Hbar2, Z, W],
            alg,
            Any,
            move |s| {
                let n = ns(s);
                let y = (s.z - s.w) / n + s.hbar2 - s.hbar;
                vec![
                    l(s.z),
                    l(s.w),
                    t(s.hbar),
                    t(s.hbar2),
                    l(n * s.hbar),
                    l(n * s.hbar2),
                    l(y),
                    t(s.hbar - s.hbar2),
                    t((s.z - s.w) / n),
                    l(s.z + n * s.hbar2),
                    l(s.w + n * s.hbar),
                ]
            },
            check_fay_mat2,
        ),
        IdentityCheck::new(
            "fay_mat2_deg_r12",
            "R^ħ_12(z)R^ħ_21(−w) = Nφ(d,Nħ)(r(z+Nħ)−r(w+Nħ)) + Nφ(−d,z)R^d(z+Nħ) − Nφ(−d,w)R^d(w+Nħ) + N²φ(d,Nħ)(E1(Nħ)−E1(Nħ+d)), d = (z−w)/N",
            &[N, Tau, Hbar, Z, W],
            alg,
            Any,
            move |s| {
                let n = ns(s);
                let d = (s.z - s.w) / n;
                vec![
                    l(s.z),
                    l(s.w),
                    t(s.hbar),
                    l(d),
                    t(d),
                    l(n * s.hbar),
                    l(s.z + n * s.hbar),
                    l(s.w + n * s.hbar),
                    l(n * s.hbar + d),
                ]
            },
            fay_mat2_deg_r12,
        ),
        IdentityCheck::new(
            "fay_mat2_deg_r13",
            "R^ħ_12(z)R^{ħ'}_21(−z) = Nφ(ħ'−ħ,−z)(r(z+Nħ)−r(z+Nħ')) − Nφ(ħ'−ħ,Nħ)R^{ħ−ħ'}(z+Nħ) + Nφ(ħ'−ħ,Nħ')R^{ħ−ħ'}(z+Nħ') + N²φ(ħ'−ħ,−z)(E1(z)−E1(z+ħ−ħ'))",
            &[N, Tau, Hbar, Hbar2, Z],
            alg,
            Any,
            move |s| {
                let n = ns(s);
                vec![
                    l(s.z),
                    t(s.hbar),
                    t(s.hbar2),
                    l(s.hbar2 - s.hbar),
                    t(s.hbar - s.hbar2),
                    l(n * s.hbar),
                    l(n * s.hbar2),
                    l(s.z + n * s.hbar),
                    l(s.z + n * s.hbar2),
                    l(s.z + s.hbar - s.hbar2),
                ]
            },
            fay_mat2_deg_r13,
        ),
        IdentityCheck::new(
            "unitarity",
            "R^ħ_12(z)R^ħ_21(−z) = N²φ(Nħ,z)φ(Nħ,−z) = N²(℘(Nħ)−℘(z))",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            |s| vec![l(s.z), t(s.hbar), l(s.nf() * s.hbar)],
            unitarity,
        ),
        IdentityCheck::new(
            "znzn_symmetry",
            "(g⊗g) R^ħ_12(z) (g⁻¹⊗g⁻¹) = R^ħ_12(z), g = Q, Λ",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            base,
            znzn_symmetry,
        ),
        IdentityCheck::new(
            "kappa_sum",
            "Σ_α κ²_{α,γ} = N² δ_{γ,0}",
            &[N, Gamma],
            alg,
            Any,
            |_| vec![],
            kappa_sum,
        ),
        IdentityCheck::new(
            "prop31_components",
            "(1/N)Σ_α κ²_{α,γ} φ_α(Nħ, ω_α+z/N) = φ_γ(z, ω_γ+ħ) and the same with (z, ħ) ↔ (Nħ, z/N)",
            &[N, Tau, Hbar, Z, Gamma],
            alg,
            Any,
            |s| vec![l(s.z), t(s.hbar), l(s.nf() * s.hbar), t(s.z / s.nf())],
            prop31_components,
        ),
        IdentityCheck::new(
            "cm_qp_1",
            "L(ħ+1/N) = Q⁻¹ L(ħ) Q for the R-matrix valued Calogero-Moser Lax matrix",
            &[N, Tau, Hbar, Z, W, X, Slots, Momenta, Coupling],
            alg,
            Any,
            cm_guards,
            cm_qp_1,
        ),
        IdentityCheck::new(
            "cm_qp_tau",
            "L(ħ+τ/N) = e^{−2πiZ/N} Λ⁻¹ L(ħ) Λ e^{2πiZ/N}",
            &[N, Tau, Hbar, Z, W, X, Slots, Momenta, Coupling],
            alg,
            Any,
            cm_guards,
            cm_qp_tau,
        ),
    ];
    v.extend([
        IdentityCheck::new(
            "scalar_sym",
            "φ(z,u) = φ(u,z)",
            &[Tau, Z, Hbar],
            sc,
            Any,
            |s| vec![l(s.z), l(s.hbar)],
            scalar_sym,
        ),
        IdentityCheck::new(
            "scalar_parity",
            "φ(−z,−u) = −φ(z,u), E1 odd, E2 even",
            &[Tau, Z, Hbar],
            sc,
            Any,
            |s| vec![l(s.z), l(s.hbar)],
            scalar_parity,
        ),
        IdentityCheck::new(
            "scalar_qp",
            "φ(z+1,u) = φ(z,u), φ(z+τ,u) = e^{−2πiu}φ(z,u), E1(z+τ) = E1(z)−2πi",
            &[Tau, Z, Hbar],
            sc,
            Any,
            |s| vec![l(s.z), l(s.hbar)],
            scalar_qp,
        ),
        IdentityCheck::new(
            "scalar_residue",
            "Res_{z=0}φ(z,u) = Res_{u=0}φ(z,u) = Res_{z=0}E1(z) = 1",
            &[Tau, Z, Hbar],
            sc,
            Any,
            |s| vec![l(s.z), l(s.hbar)],
            scalar_residue,
        ),
        IdentityCheck::new(
            "scalar_local_expansion",
            "φ(z,u) = 1/z + E1(u) + z(E1(u)²−℘(u))/2 + O(z²), decay order 2",
            &[Tau, Z, Hbar],
            ORDER_TOLERANCE,
            Any,
            |s| vec![l(s.hbar)],
            scalar_local_expansion,
        ),
        IdentityCheck::new(
            "scalar_heat",
            "2πi ∂_τ φ(z,u) = ∂_z ∂_u φ(z,u)",
            &[Tau, Z, Hbar],
            HEAT_TOLERANCE,
            Any,
            |s| vec![l(s.z), l(s.hbar), l(s.z + s.hbar)],
            scalar_heat,
        ),
        IdentityCheck::new(
            "route_qseries",
            "theta-ratio φ(z,u) agrees with the annulus q-series",
            &[Tau, Z, Hbar],
            1e-12,
            Any,
            |s| vec![l(s.z), l(s.hbar)],
            route_qseries,
        ),
        IdentityCheck::new(
            "route_double_series",
            "Fejér-summed lattice double series at M = 200 agrees with φ(z,u) up to its Eisenstein correction",
            &[Tau, Z, Hbar],
            5e-2,
            Any,
            |s| vec![l(s.z), l(s.hbar)],
            route_double_series,
        ),
        IdentityCheck::new(
            "qp_classical_r",
            "r_12(z+1) = (Q⁻¹⊗1) r_12(z) (Q⊗1), r_12(z+τ) = (Λ⁻¹⊗1) r_12(z) (Λ⊗1) − 2πi",
            &[N, Tau, Z],
            alg,
            Any,
            |s| vec![l(s.z)],
            qp_classical_r,
        ),
        IdentityCheck::new(
            "qp_slot_shift_1",
            "R^{ħ+1/N}_ab(z_a−z_b) = Q_a⁻¹ R^ħ_ab(z_a−z_b) Q_b",
            &[N, Tau, Hbar, Z, W, Slots],
            alg,
            Any,
            |s| vec![l(s.z - s.w), t(s.hbar)],
            qp_slot_shift_1,
        ),
        IdentityCheck::new(
            "qp_slot_shift_tau",
            "R^{ħ+τ/N}_ab(z_a−z_b) = e^{−2πi(z_a−z_b)/N} Λ_a⁻¹ R^ħ_ab(z_a−z_b) Λ_b",
            &[N, Tau, Hbar, Z, W, Slots],
            alg,
            Any,
            |s| vec![l(s.z - s.w), t(s.hbar)],
            qp_slot_shift_tau,
        ),
        IdentityCheck::new(
            "fay_mat2_scalar_chain",
            "rank one: matrix Fay identity equals two successive scalar Fay expansions",
            &[Tau, Hbar, Hbar2, Z, W],
            sc,
            Only(1),
            |s| {
                let x = s.z - s.w + s.hbar2 - s.hbar;
                vec![
                    l(s.z),
                    l(s.w),
                    l(s.hbar),
                    l(s.hbar2),
                    l(s.z - s.w),
                    l(s.z + s.w),
                    l(s.hbar + s.hbar2),
                    l(s.hbar - s.hbar2),
                    l(x),
                    l(s.z + s.hbar2),
                    l(s.w + s.hbar),
                ]
            },
            fay_mat2_scalar_chain,
        ),
        IdentityCheck::new(
            "pvi_cross_commutators",
            "[L^a, M^b] + [L^b, M^a] = 0 for a ≠ b",
            &[N, Tau, Hbar, Z],
            alg,
            Odd,
            pvi_guards,
            |s| Ok(pvi_zero_curvature(s)?.cross_commutators),
        ),
        IdentityCheck::new(
            "pvi_block_unitarity",
            "ℛ^a_12 ℛ^a_21 = N²(℘(Nħ) − ℘(u+NΩ_a))",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            pvi_guards,
            |s| Ok(pvi_zero_curvature(s)?.block_unitarity),
        ),
        IdentityCheck::new(
            "pvi_block_derivative",
            "ℱ^a_12 ℛ^a_21 − ℛ^a_12 ℱ^a_21 = −N²℘'(u+NΩ_a)",
            &[N, Tau, Hbar, Z],
            alg,
            Any,
            pvi_guards,
            |s| Ok(pvi_zero_curvature(s)?.block_derivative),
        ),
        IdentityCheck::new(
            "pvi_cross_sum_scalar",
            "ℛ^a_12 ℛ^b_21 + ℛ^b_12 ℛ^a_21 is scalar and independent of u",
            &[N, Tau, Hbar, Z, W],
            alg,
            Odd,
            pvi_guards,
            |s| {
                let r = pvi_zero_curvature(s)?;
                Ok(r.cross_sum_scalar.max(r.cross_sum_u_independence))
            },
        ),
        IdentityCheck::new(
            "pvi_cross_sum_derivative",
            "∂_u (ℛ^a_12 ℛ^b_21 + ℛ^b_12 ℛ^a_21) = 0",
            &[N, Tau, Hbar, Z],
            alg,
            Odd,
            pvi_guards,
            |s| Ok(pvi_zero_curvature(s)?.cross_sum_derivative),
        ),
        IdentityCheck::new(
            "pvi_even_collapse",
            "even N: the right side of the ℱℛ − ℛℱ identity does not depend on a",
            &[N, Tau, Hbar, Z],
            alg,
            Even,
            pvi_guards,
            |s| Ok(pvi_zero_curvature(s)?.block_derivative_spread),
        ),
        IdentityCheck::new(
            "pvi_monodromy",
            "on-shell ∂_τL − (1/2πi)∂_ħM − [L, M] = 0",
            &[N, Tau, Hbar, Z, Momenta],
            1e-8,
            Any,
            pvi_guards,
            pvi_monodromy,
        ),
    ]);
    v
}

fn cm_guards(s: &Sample) -> Vec<Guard> {
    vec![t(s.hbar), l(s.z - s.w), l(s.w - s.x), l(s.z - s.x)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(count: usize, n_list: Vec<usize>) -> SamplePlan {
        SamplePlan {
            count,
            n_list,
            ..SamplePlan::default()
        }
    }

    #[test]
    fn registry_has_required_ids_once() {
        let reg = registry();
        for id in REQUIRED_IDS {
            assert_eq!(reg.iter().filter(|c| c.id == id).count(), 1, "{id}");
        }
        let mut ids: Vec<&str> = reg.iter().map(|c| c.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), reg.len());
    }

    #[test]
    fn every_check_passes_small_plan() {
        let p = plan(6, vec![1, 2, 3]);
        for c in registry() {
            let r = run_check(&c, &p).unwrap();
            assert!(r.pass, "{} max {:e}", c.id, r.max_residual);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let p = plan(8, vec![2, 3]);
        let a = run_check_by_id("fay_mat2", &p).unwrap();
        let b = run_check_by_id("fay_mat2", &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples_run, 8);
    }

    #[test]
    fn perturbed_identity_fails_at_eps_scale() {
        let eps = 1e-3;
        let c = find_check("unitarity").unwrap().map_residual(move |s, _| {
            let fam = s.family()?;
            let dim = fam.pair_layout().dim();
            let mut r = fam.r12(s.hbar, s.z)?;
            r.axpy(C::new(eps, 0.0), &CMatrix::identity(dim));
            let lhs = &r * &fam.r21(s.hbar, -s.z)?;
            let n = s.nf();
            let cv = fam.curve();
            let rhs = CMatrix::scalar(dim, n * n * (cv.wp(n * s.hbar)? - cv.wp(s.z)?));
            Ok(relative_defect(&lhs, &rhs))
        });
        let r = run_check(&c, &plan(10, vec![2])).unwrap();
        assert!(!r.pass);
        assert!(
            r.max_residual > 1e-5 && r.max_residual < 1e-1,
            "{}",
            r.max_residual
        );
    }

    #[test]
    fn unknown_id_and_tight_guard_are_errors() {
        assert!(matches!(
            run_check_by_id("nope", &SamplePlan::default()),
            Err(Error::UnknownCheck(_))
        ));
        let tight = SamplePlan {
            pole_guard: 0.249,
            count: 2,
            n_list: vec![3],
            ..SamplePlan::default()
        };
        assert!(matches!(
            run_check_by_id("fay_mat2", &tight),
            Err(Error::AllSamplesRejected { .. })
        ));
    }

    #[test]
    fn rank_rule_skips_even_rank() {
        let r = run_check_by_id("pvi_cross_commutators", &plan(2, vec![2])).unwrap();
        assert_eq!(r.samples_run, 0);
        assert!(r.note.is_some());
    }
}
