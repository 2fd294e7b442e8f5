//! Painlevé VI in elliptic form, its `2N² × 2N²` Lax pair built from shifted
//! R-matrices, the monodromy-preservation residual, and a Dormand–Prince
//! integrator for the flow.
//!
//! ```text
//! d²u/dτ² = −Σ_a ν_a² ℘'(u + Ω_a)
//! dL/dτ − (1/2πi) dM/dħ = [L, M]
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::{EllipticCurve, Tau, TWO_PI_I};
use crate::error::{Error, Result};
use crate::matrixalg::{relative_defect, CMatrix};
use crate::rmatrix::{BelavinR, Direction};

pub use crate::rmatrix::HalfPeriods;

/// `√(−2)` on the principal branch.
pub const SQRT_MINUS_TWO: Complex64 = Complex64::new(0.0, std::f64::consts::SQRT_2);

/// Smallest `Im τ` allowed along an integration path.
pub const MIN_PATH_IM_TAU: f64 = 0.3;

/// Default spectral parameters at which the monodromy residual is monitored.
pub const DEFAULT_HBAR_SAMPLES: [Complex64; 3] = [
    Complex64::new(0.17, 0.11),
    Complex64::new(0.31, 0.0),
    Complex64::new(0.0, 0.23),
];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PVIConstants {
    pub nu: [Complex64; 4],
}

impl PVIConstants {
    pub fn new(nu: [Complex64; 4]) -> Self {
        Self { nu }
    }

    pub fn real(nu: [f64; 4]) -> Self {
        Self {
            nu: nu.map(|x| Complex64::new(x, 0.0)),
        }
    }

    /// `ν² = Σ ν_a²`, the only constant that survives for even `N`.
    pub fn effective_nu_squared(&self) -> Complex64 {
        self.nu.iter().map(|x| x * x).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.nu.iter().all(|x| *x == ZERO)
    }
}

impl Default for PVIConstants {
    fn default() -> Self {
        Self::real([0.1, 0.2, 0.3, 0.4])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PVIState {
    pub u: Complex64,
    pub v: Complex64,
    pub tau: Tau,
}

/// `L(ħ)` and `M(ħ)`, each a 2×2 block matrix over `Mat(N)^{⊗2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxPairEval {
    pub l: CMatrix,
    pub m: CMatrix,
    pub hbar: Complex64,
}

/// `−Σ_a ν_a² ℘'(u + Ω_a)`.
pub fn pvi_rhs(state: &PVIState, constants: &PVIConstants) -> Result<Complex64> {
    lax_acceleration(state, constants, 1)
}

/// `−Σ_a ν_a² ℘'(u + NΩ_a)`: the flow encoded by the rank-`N` Lax pair. It
/// equals [`pvi_rhs`] for odd `N` and collapses to `−ν²℘'(u)` for even `N`.
pub fn lax_acceleration(state: &PVIState, constants: &PVIConstants, n: usize) -> Result<Complex64> {
    let curve = EllipticCurve::new(state.tau)?;
    acceleration_on(&curve, state.u, constants, n)
}

fn acceleration_on(
    curve: &EllipticCurve,
    u: Complex64,
    constants: &PVIConstants,
    n: usize,
) -> Result<Complex64> {
    let hp = HalfPeriods::new(curve.tau());
    let mut acc = ZERO;
    for (a, nu) in constants.nu.iter().enumerate() {
        if *nu == ZERO {
            continue;
        }
        acc -= nu * nu * curve.wp_prime(u + hp.omega[a] * n as f64)?;
    }
    Ok(acc)
}

/// Smallest lattice distance of `u + NΩ_a` over the four half-periods.
pub fn min_pole_distance(tau: Tau, u: Complex64, n: usize) -> f64 {
    let hp = HalfPeriods::new(tau);
    hp.omega
        .iter()
        .map(|om| tau.lattice_distance(u + om * n as f64))
        .fold(f64::INFINITY, f64::min)
}

fn check_rank(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    Ok(())
}

fn off_diag(upper: &CMatrix, lower: &CMatrix) -> CMatrix {
    let z = CMatrix::zeros(upper.dim());
    CMatrix::from_blocks(&[vec![z.clone(), upper.clone()], vec![lower.clone(), z]])
        .expect("blocks share a dimension")
}

/// `(1/2) diag(1, −1)`, the coefficient of `du/dτ` in `L`.
fn grading(n: usize) -> CMatrix {
    let d = n * n;
    let mut g = CMatrix::identity(2 * d).scale(Complex64::new(0.5, 0.0));
    for i in d..2 * d {
        g[(i, i)] = Complex64::new(-0.5, 0.0);
    }
    g
}

fn coupling(nu: Complex64, n: usize) -> Complex64 {
    nu / (SQRT_MINUS_TWO * n as f64)
}

/// The shifted blocks `ℛ^a_12(u)`, `ℛ^a_21(−u)`, `ℱ^a_12(u)`, `ℱ^a_21(−u)`.
#[derive(Debug, Clone)]
pub struct ShiftedBlocks {
    pub r12: CMatrix,
    pub r21: CMatrix,
    pub f12: CMatrix,
    pub f21: CMatrix,
}

impl ShiftedBlocks {
    pub fn new(family: &BelavinR, a: usize, hbar: Complex64, u: Complex64) -> Result<Self> {
        Ok(Self {
            r12: family.shifted_r(a, hbar, u, Direction::D12)?,
            r21: family.shifted_r(a, hbar, u, Direction::D21)?,
            f12: family.shifted_f(a, hbar, u, Direction::D12)?,
            f21: family.shifted_f(a, hbar, u, Direction::D21)?,
        })
    }

    /// `L^a = [[0, ℛ12], [ℛ21, 0]]`.
    pub fn l(&self) -> CMatrix {
        off_diag(&self.r12, &self.r21)
    }

    /// `M^a = [[0, ℱ12], [ℱ21, 0]]`.
    pub fn m(&self) -> CMatrix {
        off_diag(&self.f12, &self.f21)
    }
}

fn lax_family(tau: Tau, n: usize) -> Result<BelavinR> {
    // the Lax pair is only evaluated at caller-chosen ħ, poles surface as errors
    Ok(BelavinR::new(n, tau)?.with_hbar_guard(1e-9))
}

fn build_on(
    family: &BelavinR,
    u: Complex64,
    v: Complex64,
    constants: &PVIConstants,
    hbar: Complex64,
) -> Result<LaxPairEval> {
    let n = family.n();
    let mut l = grading(n).scale(v);
    let mut m = CMatrix::zeros(2 * n * n);
    for (a, nu) in constants.nu.iter().enumerate() {
        if *nu == ZERO {
            continue;
        }
        let c = coupling(*nu, n);
        let blocks = ShiftedBlocks::new(family, a, hbar, u)?;
        l.axpy(c, &blocks.l());
        m.axpy(c, &blocks.m());
    }
    Ok(LaxPairEval { l, m, hbar })
}

pub fn build_lax(
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    n: usize,
) -> Result<LaxPairEval> {
    check_rank(n)?;
    build_on(&lax_family(state.tau, n)?, state.u, state.v, constants, hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    Analytic,
    FiniteDifference,
}

/// Step for the central differences of the finite-difference mode.
pub const FD_STEP: f64 = 1e-4;

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    &(a * b) - &(b * a)
}

/// `dL/dτ − (1/2πi) dM/dħ − [L, M]` for an explicit acceleration `ü`.
pub fn monodromy_defect(
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    n: usize,
    acceleration: Complex64,
    mode: ResidualMode,
) -> Result<CMatrix> {
    check_rank(n)?;
    let family = lax_family(state.tau, n)?;
    let base = build_on(&family, state.u, state.v, constants, hbar)?;
    let (dl_dtau, dm_dh) = match mode {
        ResidualMode::Analytic => analytic_derivatives(&family, state, constants, hbar, acceleration)?,
        ResidualMode::FiniteDifference => fd_derivatives(state, constants, hbar, n, acceleration)?,
    };
    let mut defect = dl_dtau;
    defect.axpy(-1.0 / TWO_PI_I, &dm_dh);
    defect.axpy(-Complex64::new(1.0, 0.0), &commutator(&base.l, &base.m));
    Ok(defect)
}

fn analytic_derivatives(
    family: &BelavinR,
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    acceleration: Complex64,
) -> Result<(CMatrix, CMatrix)> {
    let n = family.n();
    let u = state.u;
    let mut dl_du = CMatrix::zeros(2 * n * n);
    let mut dm_dh = CMatrix::zeros(2 * n * n);
    for (a, nu) in constants.nu.iter().enumerate() {
        if *nu == ZERO {
            continue;
        }
        let c = coupling(*nu, n);
        let f12 = family.shifted_f(a, hbar, u, Direction::D12)?;
        let f21 = family.shifted_f(a, hbar, u, Direction::D21)?;
        dl_du.axpy(c, &off_diag(&f12, &f21.scale(Complex64::new(-1.0, 0.0))));
        let g12 = family.shifted_dh_f(a, hbar, u, Direction::D12)?;
        let g21 = family.shifted_dh_f(a, hbar, u, Direction::D21)?;
        dm_dh.axpy(c, &off_diag(&g12, &g21));
    }
    // explicit τ-dependence through the heat equation 2πi ∂_τ ℛ = ∂_ħ ℱ
    let mut dl_dtau = dm_dh.scale(1.0 / TWO_PI_I);
    dl_dtau.axpy(state.v, &dl_du);
    dl_dtau.axpy(acceleration, &grading(n));
    Ok((dl_dtau, dm_dh))
}

fn richardson(f: impl Fn(f64) -> Result<CMatrix>, h: f64) -> Result<CMatrix> {
    let central = |s: f64| -> Result<CMatrix> {
        let mut d = f(s)?;
        d.axpy(Complex64::new(-1.0, 0.0), &f(-s)?);
        Ok(d.scale(Complex64::new(0.5 / s, 0.0)))
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    let mut out = fine.scale(Complex64::new(4.0 / 3.0, 0.0));
    out.axpy(Complex64::new(-1.0 / 3.0, 0.0), &coarse);
    Ok(out)
}

fn fd_derivatives(
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    n: usize,
    acceleration: Complex64,
) -> Result<(CMatrix, CMatrix)> {
    let (u, v, tau) = (state.u, state.v, state.tau.value());
    let dl_dtau = richardson(
        |e| {
            let t = Tau::new(tau + e)?;
            let ue = u + v * e + acceleration * (e * e / 2.0);
            let ve = v + acceleration * e;
            Ok(build_on(&lax_family(t, n)?, ue, ve, constants, hbar)?.l)
        },
        FD_STEP,
    )?;
    let family = lax_family(state.tau, n)?;
    let dm_dh = richardson(|e| Ok(build_on(&family, u, v, constants, hbar + e)?.m), FD_STEP)?;
    Ok((dl_dtau, dm_dh))
}

/// Max-abs entry of the monodromy defect on the flow of the rank-`N` Lax pair.
pub fn monodromy_residual(
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    n: usize,
    mode: ResidualMode,
) -> Result<f64> {
    let acc = lax_acceleration(state, constants, n)?;
    monodromy_residual_with_acceleration(state, constants, hbar, n, acc, mode)
}

pub fn monodromy_residual_with_acceleration(
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    n: usize,
    acceleration: Complex64,
    mode: ResidualMode,
) -> Result<f64> {
    Ok(monodromy_defect(state, constants, hbar, n, acceleration, mode)?.max_abs())
}

/// Both residual routes and whether they disagree by more than a factor 10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyComparison {
    pub analytic: f64,
    pub finite_difference: f64,
    pub ill_conditioned: bool,
}

pub fn compare_monodromy_modes(
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    n: usize,
    acceleration: Option<Complex64>,
) -> Result<MonodromyComparison> {
    let acc = match acceleration {
        Some(a) => a,
        None => lax_acceleration(state, constants, n)?,
    };
    let analytic =
        monodromy_residual_with_acceleration(state, constants, hbar, n, acc, ResidualMode::Analytic)?;
    let fd =
        monodromy_residual_with_acceleration(state, constants, hbar, n, acc, ResidualMode::FiniteDifference)?;
    // agreement below the FD noise floor is not a disagreement
    let floor = 1e-8;
    let ill = fd.max(floor) > 10.0 * analytic.max(floor) || analytic.max(floor) > 10.0 * fd.max(floor);
    Ok(MonodromyComparison {
        analytic,
        finite_difference: fd,
        ill_conditioned: ill,
    })
}

/// Residuals of the identities behind the zero-curvature equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCurvatureResiduals {
    /// `[L^a, M^b] + [L^b, M^a] = 0`, worst pair `a ≠ b`.
    pub cross_commutators: f64,
    /// `ℛ^a_12 ℛ^a_21 = N²(℘(Nħ) − ℘(u + NΩ_a))`, worst `a`.
    pub block_unitarity: f64,
    /// `ℱ^a_12 ℛ^a_21 − ℛ^a_12 ℱ^a_21 = −N²℘'(u + NΩ_a)`, worst `a`.
    pub block_derivative: f64,
    /// Cross sums `ℛ^a_12 ℛ^b_21 + ℛ^b_12 ℛ^a_21` against their scalar value.
    pub cross_sum_scalar: f64,
    /// The same cross sums compared between two values of `u`.
    pub cross_sum_u_independence: f64,
    /// `u`-derivative of the cross sums.
    pub cross_sum_derivative: f64,
    /// Spread of the scalar part of the `block_derivative` left side over `a`.
    pub block_derivative_spread: f64,
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn cross_sum(x: &ShiftedBlocks, y: &ShiftedBlocks) -> CMatrix {
    &(&x.r12 * &y.r21) + &(&y.r12 * &x.r21)
}

pub fn check_zero_curvature_identities(
    tau: Tau,
    n: usize,
    hbar: Complex64,
    u: Complex64,
    u_alt: Complex64,
) -> Result<ZeroCurvatureResiduals> {
    check_rank(n)?;
    let family = lax_family(tau, n)?;
    let curve = family.curve().clone();
    let hp = HalfPeriods::new(tau);
    let nf = n as f64;
    let dim = n * n;
    let blocks: Vec<ShiftedBlocks> = (0..4)
        .map(|a| ShiftedBlocks::new(&family, a, hbar, u))
        .collect::<Result<_>>()?;
    let blocks_alt: Vec<ShiftedBlocks> = (0..4)
        .map(|a| ShiftedBlocks::new(&family, a, hbar, u_alt))
        .collect::<Result<_>>()?;
    let ls: Vec<CMatrix> = blocks.iter().map(ShiftedBlocks::l).collect();
    let ms: Vec<CMatrix> = blocks.iter().map(ShiftedBlocks::m).collect();

    let wp_nh = curve.wp(hbar * nf)?;
    let mut block_unitarity = 0.0f64;
    let mut block_derivative = 0.0f64;
    let mut derivative_values = Vec::with_capacity(4);
    for (a, b) in blocks.iter().enumerate() {
        let arg = u + hp.omega[a] * nf;
        let prod = &b.r12 * &b.r21;
        let want = CMatrix::scalar(dim, (wp_nh - curve.wp(arg)?) * (nf * nf));
        block_unitarity = block_unitarity.max(relative_defect(&prod, &want));
        let deriv = &(&b.f12 * &b.r21) - &(&b.r12 * &b.f21);
        let want = CMatrix::scalar(dim, -curve.wp_prime(arg)? * (nf * nf));
        block_derivative = block_derivative.max(relative_defect(&deriv, &want));
        derivative_values.push(deriv);
    }
    let block_derivative_spread = derivative_values
        .iter()
        .map(|d| relative_defect(d, &derivative_values[0]))
        .fold(0.0, f64::max);

    let e1_nh = curve.e1(hbar * nf)?;
    let mut cross_commutators = 0.0f64;
    let mut cross_sum_scalar = 0.0f64;
    let mut cross_u = 0.0f64;
    let mut cross_sum_derivative = 0.0f64;
    for (a, b) in PAIRS {
        let c1 = commutator(&ls[a], &ms[b]);
        let c2 = commutator(&ls[b], &ms[a]);
        let scale = 1f64.max(c1.max_abs()).max(c2.max_abs());
        cross_commutators = cross_commutators.max((&c1 + &c2).max_abs() / scale);

        let lhs = cross_sum(&blocks[a], &blocks[b]);
        let sum = hp.omega[a] + hp.omega[b];
        let diff = hp.omega[a] - hp.omega[b];
        let twist = (TWO_PI_I * hbar * nf * (hp.dtau[a] + hp.dtau[b])).exp();
        let value = twist
            * curve.phi(hbar * nf, sum)?
            * (2.0 * e1_nh - curve.e1(hbar * nf + diff)? - curve.e1(hbar * nf - diff)?)
            * (nf * nf);
        cross_sum_scalar = cross_sum_scalar.max(relative_defect(&lhs, &CMatrix::scalar(dim, value)));
        cross_u = cross_u.max(relative_defect(&lhs, &cross_sum(&blocks_alt[a], &blocks_alt[b])));

        let (x, y) = (&blocks[a], &blocks[b]);
        let t1 = &(&x.f12 * &y.r21) - &(&x.r12 * &y.f21);
        let t2 = &(&y.f12 * &x.r21) - &(&y.r12 * &x.f21);
        let scale = 1f64.max(t1.max_abs()).max(t2.max_abs());
        cross_sum_derivative = cross_sum_derivative.max((&t1 + &t2).max_abs() / scale);
    }
    Ok(ZeroCurvatureResiduals {
        cross_commutators,
        block_unitarity,
        block_derivative,
        cross_sum_scalar,
        cross_sum_u_independence: cross_u,
        cross_sum_derivative,
        block_derivative_spread,
    })
}

/// Diagonal-block coefficient of the monodromy defect: the trace of the
/// upper-left block divided by `N²`.
pub fn diagonal_defect(defect: &CMatrix, n: usize) -> Complex64 {
    let d = n * n;
    defect.block(0, 0, d).trace() / d as f64
}

/// Least-squares fit through the origin of the diagonal defect against two
/// candidate equations of motion over a set of off-shell accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyFit {
    /// Candidate `ü + Σ ν_a² ℘'(u + Ω_a)`.
    pub four_constant: CandidateFit,
    /// Candidate `ü + (Σ ν_a²) ℘'(u)`.
    pub single_constant: CandidateFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub slope: Complex64,
    /// `max_i |D_i − slope·c_i| / max_i |D_i|`.
    pub fit_residual: f64,
}

fn fit_through_origin(ys: &[Complex64], xs: &[Complex64]) -> CandidateFit {
    let num: Complex64 = xs.iter().zip(ys).map(|(x, y)| x.conj() * y).sum();
    let den: f64 = xs.iter().map(|x| x.norm_sqr()).sum();
    let slope = if den > 0.0 { num / den } else { ZERO };
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.norm())).max(1e-300);
    let worst = xs
        .iter()
        .zip(ys)
        .fold(0.0f64, |m, (x, y)| m.max((y - slope * x).norm()));
    CandidateFit {
        slope,
        fit_residual: worst / scale,
    }
}

pub fn dichotomy_fit(
    state: &PVIState,
    constants: &PVIConstants,
    hbar: Complex64,
    n: usize,
    perturbations: &[Complex64],
) -> Result<DichotomyFit> {
    let curve = EllipticCurve::new(state.tau)?;
    let four = acceleration_on(&curve, state.u, constants, 1)?;
    let single = -constants.effective_nu_squared() * curve.wp_prime(state.u)?;
    let on_shell = acceleration_on(&curve, state.u, constants, n)?;
    let mut ys = Vec::with_capacity(perturbations.len());
    let mut x4 = Vec::with_capacity(perturbations.len());
    let mut x1 = Vec::with_capacity(perturbations.len());
    for delta in perturbations {
        let acc = on_shell + delta;
        let defect = monodromy_defect(state, constants, hbar, n, acc, ResidualMode::Analytic)?;
        ys.push(diagonal_defect(&defect, n));
        x4.push(acc - four);
        x1.push(acc - single);
    }
    Ok(DichotomyFit {
        four_constant: fit_through_origin(&ys, &x4),
        single_constant: fit_through_origin(&ys, &x1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step in the path parameter `s ∈ [0, 1]`.
    pub max_step: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    pub pole_guard: f64,
    /// Takes uniform steps of this size and skips error control.
    pub fixed_step: Option<f64>,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            max_step: 0.01,
            initial_step: 1e-3,
            min_step: 1e-12,
            max_steps: 200_000,
            pole_guard: 0.05,
            fixed_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub tau: Complex64,
    pub u: Complex64,
    pub v: Complex64,
    pub local_error: f64,
    pub min_pole_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HaltReason {
    PoleApproach { tau: Complex64, distance: f64 },
    StepUnderflow { tau: Complex64, step: f64 },
    StepLimit { tau: Complex64, steps: usize },
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HaltReason::PoleApproach { tau, distance } => write!(
                f,
                "pole approach at τ = {tau}: u + NΩ_a is {distance:e} from the lattice"
            ),
            HaltReason::StepUnderflow { tau, step } => {
                write!(f, "step size underflow at τ = {tau} (step {step:e})")
            }
            HaltReason::StepLimit { tau, steps } => {
                write!(f, "step limit of {steps} reached at τ = {tau}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub constants: PVIConstants,
    pub points: Vec<TrajectoryPoint>,
    pub halt: Option<HaltReason>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has its initial point")
    }

    pub fn completed(&self) -> bool {
        self.halt.is_none()
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type Y = [Complex64; 2];

struct Flow<'a> {
    tau0: Complex64,
    delta: Complex64,
    constants: &'a PVIConstants,
    n: usize,
}

impl Flow<'_> {
    fn tau_at(&self, s: f64) -> Complex64 {
        self.tau0 + self.delta * s
    }

    fn rhs(&self, s: f64, y: &Y) -> Result<Y> {
        let tau = Tau::new(self.tau_at(s))?;
        let curve = EllipticCurve::new(tau)?;
        let acc = acceleration_on(&curve, y[0], self.constants, self.n)?;
        Ok([self.delta * y[1], self.delta * acc])
    }

    /// One embedded step: fifth-order solution and error estimate.
    fn step(&self, s: f64, y: &Y, h: f64) -> Result<(Y, Y)> {
        let mut k: [Y; 7] = [[ZERO; 2]; 7];
        for i in 0..7 {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(i) {
                for d in 0..2 {
                    yi[d] += kj[d] * (h * A[i][j]);
                }
            }
            k[i] = self.rhs(s + C[i] * h, &yi)?;
        }
        let mut y5 = *y;
        let mut err = [ZERO; 2];
        for i in 0..7 {
            for d in 0..2 {
                y5[d] += k[i][d] * (h * B5[i]);
                err[d] += k[i][d] * (h * (B5[i] - B4[i]));
            }
        }
        Ok((y5, err))
    }
}

fn halted(
    n: usize,
    constants: &PVIConstants,
    points: Vec<TrajectoryPoint>,
    reason: HaltReason,
) -> Result<Trajectory> {
    Ok(Trajectory {
        n,
        constants: *constants,
        points,
        halt: Some(reason),
    })
}

/// Integrates the rank-`N` flow from `initial` to `tau_end` along a straight
/// line. A pole approach or step underflow halts the run and returns the
/// partial trajectory with the reason attached.
pub fn integrate(
    initial: &PVIState,
    constants: &PVIConstants,
    n: usize,
    tau_end: Complex64,
    config: &StepperConfig,
) -> Result<Trajectory> {
    check_rank(n)?;
    let tau0 = initial.tau.value();
    for t in [tau0, tau_end] {
        if !(t.im >= MIN_PATH_IM_TAU) {
            return Err(Error::Domain(format!(
                "path endpoint τ = {t} has Im τ below {MIN_PATH_IM_TAU}"
            )));
        }
    }
    let d0 = min_pole_distance(initial.tau, initial.u, n);
    if d0 < config.pole_guard {
        return Err(Error::Pole {
            arg: initial.u,
            distance: d0,
            guard: config.pole_guard,
        });
    }
    if let Some(h) = config.fixed_step {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Config(format!("fixed step must lie in (0, 1], got {h}")));
        }
    }
    if !(config.rtol > 0.0 && config.atol > 0.0 && config.max_step > 0.0) {
        return Err(Error::Config("tolerances and max_step must be positive".into()));
    }

    let flow = Flow {
        tau0,
        delta: tau_end - tau0,
        constants,
        n,
    };
    let mut points = vec![TrajectoryPoint {
        tau: tau0,
        u: initial.u,
        v: initial.v,
        local_error: 0.0,
        min_pole_distance: d0,
    }];
    let mut y: Y = [initial.u, initial.v];
    let mut s = 0.0f64;
    let mut h = config
        .fixed_step
        .unwrap_or(config.initial_step.min(config.max_step));
    let mut steps = 0usize;
    while s < 1.0 - 1e-15 {
        if steps >= config.max_steps {
            return halted(
                n,
                constants,
                points,
                HaltReason::StepLimit {
                    tau: flow.tau_at(s),
                    steps,
                },
            );
        }
        steps += 1;
        let h_try = h.min(1.0 - s);
        let (y_new, err) = match flow.step(s, &y, h_try) {
            Ok(r) => r,
            Err(Error::Pole { distance, .. }) => {
                return halted(
                    n,
                    constants,
                    points,
                    HaltReason::PoleApproach {
                        tau: flow.tau_at(s),
                        distance,
                    },
                )
            }
            Err(e) => return Err(e),
        };
        let scale = |d: usize| config.atol + config.rtol * y[d].norm().max(y_new[d].norm());
        let err_norm = ((err[0].norm() / scale(0)).powi(2) + (err[1].norm() / scale(1)).powi(2)).sqrt()
            / std::f64::consts::SQRT_2;
        let accept = config.fixed_step.is_some() || err_norm <= 1.0;
        if accept {
            s += h_try;
            y = y_new;
            let tau = if s >= 1.0 - 1e-15 { tau_end } else { flow.tau_at(s) };
            let dist = min_pole_distance(Tau::new(tau)?, y[0], n);
            points.push(TrajectoryPoint {
                tau,
                u: y[0],
                v: y[1],
                local_error: err[0].norm().max(err[1].norm()),
                min_pole_distance: dist,
            });
            if dist < config.pole_guard {
                return halted(
                    n,
                    constants,
                    points,
                    HaltReason::PoleApproach { tau, distance: dist },
                );
            }
        }
        if config.fixed_step.is_none() {
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h_try * factor).min(config.max_step);
            if h < config.min_step {
                return halted(
                    n,
                    constants,
                    points,
                    HaltReason::StepUnderflow {
                        tau: flow.tau_at(s),
                        step: h,
                    },
                );
            }
        }
    }
    Ok(Trajectory {
        n,
        constants: *constants,
        points,
        halt: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn state(n_tau: f64) -> PVIState {
        let tau = Tau::new(c(0.0, n_tau)).unwrap();
        PVIState {
            u: c(0.31, 0.0) + tau.value() * 0.14,
            v: c(0.05, 0.0),
            tau,
        }
    }

    #[test]
    fn free_constants_give_zero_acceleration() {
        let s = state(0.9);
        assert_eq!(pvi_rhs(&s, &PVIConstants::real([0.0; 4])).unwrap(), ZERO);
        let k = PVIConstants::real([0.3, 0.0, 0.0, 0.0]);
        let want = -0.09 * EllipticCurve::new(s.tau).unwrap().wp_prime(s.u).unwrap();
        assert!((pvi_rhs(&s, &k).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn zero_state_gives_zero_lax_pair() {
        let mut s = state(0.9);
        s.v = ZERO;
        let lax = build_lax(&s, &PVIConstants::real([0.0; 4]), c(0.17, 0.11), 2).unwrap();
        assert_eq!(lax.l.max_abs(), 0.0);
        assert_eq!(lax.m.max_abs(), 0.0);
    }

    #[test]
    fn rank_one_reproduces_scalar_pair() {
        let s = state(0.9);
        let h = c(0.17, 0.11);
        let k = PVIConstants::real([0.3, 0.0, 0.0, 0.0]);
        let lax = build_lax(&s, &k, h, 1).unwrap();
        let cv = EllipticCurve::new(s.tau).unwrap();
        let cpl = 0.3 / SQRT_MINUS_TWO;
        assert!((lax.l[(0, 1)] - cpl * cv.phi(h, s.u).unwrap()).norm() < 1e-14);
        assert!((lax.l[(1, 0)] - cpl * cv.phi(h, -s.u).unwrap()).norm() < 1e-14);
        assert!((lax.m[(0, 1)] - cpl * cv.phi_du(h, s.u).unwrap()).norm() < 1e-13);
        assert!((lax.l.trace()).norm() < 1e-14);
    }

    #[test]
    fn trace_of_l_vanishes() {
        let s = state(0.9);
        let lax = build_lax(&s, &PVIConstants::default(), c(0.17, 0.11), 3).unwrap();
        assert!(lax.l.trace().norm() < 1e-12);
    }

    #[test]
    fn on_shell_residual_is_small_in_both_modes() {
        let s = state(0.9);
        for n in [1, 3] {
            let cmp = compare_monodromy_modes(&s, &PVIConstants::default(), c(0.17, 0.11), n, None).unwrap();
            assert!(cmp.analytic < 1e-8, "{n}: {cmp:?}");
            assert!(cmp.finite_difference < 1e-7, "{n}: {cmp:?}");
            assert!(!cmp.ill_conditioned);
        }
    }

    #[test]
    fn off_shell_residual_is_half_the_perturbation() {
        let s = state(0.9);
        let k = PVIConstants::default();
        let acc = lax_acceleration(&s, &k, 1).unwrap() + 1e-3;
        let r = monodromy_residual_with_acceleration(&s, &k, c(0.31, 0.0), 1, acc, ResidualMode::Analytic)
            .unwrap();
        assert!((r - 5e-4).abs() < 1e-9, "{r}");
    }

    #[test]
    fn zero_curvature_odd_rank() {
        let s = state(0.9);
        let r = check_zero_curvature_identities(s.tau, 3, c(0.17, 0.11), s.u, s.u + 0.13).unwrap();
        assert!(r.cross_commutators < 1e-10, "{r:?}");
        assert!(
            r.block_unitarity < 1e-10
                && r.block_derivative < 1e-10
                && r.cross_sum_scalar < 1e-10
                && r.cross_sum_derivative < 1e-10,
            "{r:?}"
        );
        assert!(r.cross_sum_u_independence < 1e-10);
    }

    #[test]
    fn even_rank_block_derivative_collapses() {
        let s = state(0.9);
        let r = check_zero_curvature_identities(s.tau, 2, c(0.17, 0.11), s.u, s.u + 0.13).unwrap();
        assert!(r.block_derivative_spread < 1e-10, "{r:?}");
        assert!(r.block_unitarity < 1e-10 && r.block_derivative < 1e-10);
    }

    #[test]
    fn free_motion_is_exact() {
        let s = state(0.9);
        let tr = integrate(
            &s,
            &PVIConstants::real([0.0; 4]),
            1,
            c(0.0, 1.2),
            &StepperConfig::default(),
        )
        .unwrap();
        let end = tr.last();
        let want = s.u + s.v * (end.tau - s.tau.value());
        assert!((end.u - want).norm() < 1e-12);
        assert!(tr.points.len() > 100);
    }

    #[test]
    fn path_below_im_bound_is_rejected() {
        let s = state(0.9);
        let r = integrate(
            &s,
            &PVIConstants::default(),
            1,
            c(0.0, 0.2),
            &StepperConfig::default(),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn pole_approach_halts_with_partial_trajectory() {
        let tau = Tau::new(c(0.0, 0.9)).unwrap();
        let s = PVIState {
            u: c(0.2, 0.0),
            v: c(0.0, 1.0),
            tau,
        };
        let tr = integrate(
            &s,
            &PVIConstants::real([0.0; 4]),
            1,
            c(0.0, 1.2),
            &StepperConfig::default(),
        )
        .unwrap();
        assert!(matches!(tr.halt, Some(HaltReason::PoleApproach { .. })));
        assert!(tr.points.len() > 1);
    }
}
