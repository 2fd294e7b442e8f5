//! The `Z_N × Z_N` elliptic R-matrix
//!
//! ```text
//! R^ħ_12(z) = Σ_α exp(2πi z α₂/N) φ(z, ω_α + ħ) T_α ⊗ T_{-α}
//! ```
//!
//! together with its derivatives, the classical r-matrix and the second
//! coefficient `m` of the ħ-expansion, the constant term of the z-expansion,
//! half-period shifted blocks, and the R-matrix valued Calogero-Moser Lax
//! matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::{EllipticCurve, Tau, TWO_PI_I};
use crate::error::{Error, Result};
use crate::matrixalg::{
    embed_pair, gen_lambda, gen_q, permutation_p, t_basis, t_basis_neg, tensor_embed, CMatrix, LatticeIndex,
    TensorLayout,
};

/// Default lattice distance of `ω_α + ħ` below which an R-matrix evaluation
/// is refused.
pub const DEFAULT_HBAR_GUARD: f64 = 0.05;

/// Default cap on the dimension `ñ·N^ñ` of Calogero-Moser Lax matrices.
pub const DEFAULT_CM_DIM_CAP: usize = 2048;

/// One R-matrix evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RParams {
    pub n: usize,
    pub tau: Tau,
    pub hbar: Complex64,
    pub z: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMLaxParams {
    pub n: usize,
    pub tau: Tau,
    pub hbar: Complex64,
    pub nu: Complex64,
    pub momenta: Vec<Complex64>,
    pub positions: Vec<Complex64>,
}

impl CMLaxParams {
    pub fn n_tilde(&self) -> usize {
        self.positions.len()
    }

    fn validate(&self) -> Result<()> {
        if self.positions.len() < 2 {
            return Err(Error::Config(
                "Calogero-Moser Lax matrix needs at least two particles".into(),
            ));
        }
        if self.momenta.len() != self.positions.len() {
            return Err(Error::Dimension(format!(
                "{} momenta for {} positions",
                self.momenta.len(),
                self.positions.len()
            )));
        }
        Ok(())
    }
}

/// Tensor direction of a shifted block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    D12,
    D21,
}

/// The four half-periods `Ω_a = 0, 1/2, (1+τ)/2, τ/2` and `∂_τ Ω_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPeriods {
    pub omega: [Complex64; 4],
    pub dtau: [f64; 4],
}

impl HalfPeriods {
    pub fn new(tau: Tau) -> Self {
        let t = tau.value();
        Self {
            omega: [
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.0),
                (t + 1.0) / 2.0,
                t / 2.0,
            ],
            dtau: [0.0, 0.0, 0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone)]
struct BasisPair {
    alpha: LatticeIndex,
    t: CMatrix,
    t_neg: CMatrix,
}

/// The R-matrix family for fixed `N` and `τ`.
#[derive(Debug, Clone)]
pub struct BelavinR {
    curve: EllipticCurve,
    n: usize,
    hbar_guard: f64,
    cm_dim_cap: usize,
    basis: Vec<BasisPair>,
}

impl BelavinR {
    pub fn new(n: usize, tau: Tau) -> Result<Self> {
        Self::from_curve(EllipticCurve::new(tau)?, n)
    }

    pub fn from_curve(curve: EllipticCurve, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        let basis = LatticeIndex::all(n)
            .map(|alpha| BasisPair {
                alpha,
                t: t_basis(alpha),
                t_neg: t_basis_neg(alpha),
            })
            .collect();
        Ok(Self {
            curve,
            n,
            hbar_guard: DEFAULT_HBAR_GUARD,
            cm_dim_cap: DEFAULT_CM_DIM_CAP,
            basis,
        })
    }

    /// Sets the `ω_α + ħ` guard. Expansion and residue checks lower it to
    /// approach `ħ = 0`.
    pub fn with_hbar_guard(mut self, guard: f64) -> Self {
        self.hbar_guard = guard;
        self
    }

    pub fn with_cm_dim_cap(mut self, cap: usize) -> Self {
        self.cm_dim_cap = cap;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn curve(&self) -> &EllipticCurve {
        &self.curve
    }

    pub fn tau(&self) -> Tau {
        self.curve.tau()
    }

    pub fn pair_layout(&self) -> TensorLayout {
        TensorLayout {
            n_factors: 2,
            factor_dim: self.n,
        }
    }

    pub fn omega(&self, alpha: LatticeIndex) -> Complex64 {
        alpha.omega(self.tau().value())
    }

    fn twist(&self, alpha: LatticeIndex, u: Complex64) -> Complex64 {
        (TWO_PI_I * u * alpha.dtau_omega()).exp()
    }

    fn check_hbar(&self, hbar: Complex64) -> Result<()> {
        if self.hbar_guard <= 0.0 {
            return Ok(());
        }
        let tau = self.tau();
        for b in &self.basis {
            let arg = self.omega(b.alpha) + hbar;
            let distance = tau.lattice_distance(arg);
            if distance < self.hbar_guard {
                return Err(Error::Pole {
                    arg,
                    distance,
                    guard: self.hbar_guard,
                });
            }
        }
        Ok(())
    }

    /// `φ_α(u, v) = exp(2πi u α₂/N) φ(u, v)`.
    pub fn phi_twisted(&self, alpha: LatticeIndex, u: Complex64, v: Complex64) -> Result<Complex64> {
        Ok(self.twist(alpha, u) * self.curve.phi(u, v)?)
    }

    /// `Σ_α c(α) T_α ⊗ T_{-α}` placed in slots `a`, `b`.
    pub fn assemble(
        &self,
        a: usize,
        b: usize,
        layout: TensorLayout,
        mut coeff: impl FnMut(LatticeIndex) -> Result<Complex64>,
    ) -> Result<CMatrix> {
        if layout.factor_dim != self.n {
            return Err(Error::Dimension(format!(
                "layout factor dimension {} differs from N = {}",
                layout.factor_dim, self.n
            )));
        }
        let mut out = CMatrix::zeros(layout.dim());
        for pair in &self.basis {
            let c = coeff(pair.alpha)?;
            out.axpy(c, &embed_pair(&pair.t, a, &pair.t_neg, b, layout)?);
        }
        Ok(out)
    }

    pub fn quantum_r(
        &self,
        hbar: Complex64,
        z: Complex64,
        a: usize,
        b: usize,
        layout: TensorLayout,
    ) -> Result<CMatrix> {
        self.check_hbar(hbar)?;
        self.assemble(a, b, layout, |al| self.phi_twisted(al, z, self.omega(al) + hbar))
    }

    /// `R^ħ_12(z)` on `Mat(N)^{⊗2}`.
    pub fn r12(&self, hbar: Complex64, z: Complex64) -> Result<CMatrix> {
        self.quantum_r(hbar, z, 1, 2, self.pair_layout())
    }

    /// `R^ħ_21(z) = P R^ħ_12(z) P`.
    pub fn r21(&self, hbar: Complex64, z: Complex64) -> Result<CMatrix> {
        self.quantum_r(hbar, z, 2, 1, self.pair_layout())
    }

    /// `F^ħ = ∂_z R^ħ(z)`.
    pub fn f_matrix(
        &self,
        hbar: Complex64,
        z: Complex64,
        a: usize,
        b: usize,
        layout: TensorLayout,
    ) -> Result<CMatrix> {
        self.check_hbar(hbar)?;
        self.assemble(a, b, layout, |al| {
            let k = self.curve.kronecker(z, self.omega(al) + hbar)?;
            Ok(self.twist(al, z) * (k.dz() + k.value * TWO_PI_I * al.dtau_omega()))
        })
    }

    /// `∂_ħ R^ħ(z)`.
    pub fn dh_r(
        &self,
        hbar: Complex64,
        z: Complex64,
        a: usize,
        b: usize,
        layout: TensorLayout,
    ) -> Result<CMatrix> {
        self.check_hbar(hbar)?;
        self.assemble(a, b, layout, |al| {
            let k = self.curve.kronecker(z, self.omega(al) + hbar)?;
            Ok(self.twist(al, z) * k.du())
        })
    }

    /// `∂_ħ F^ħ(z) = ∂_z ∂_ħ R^ħ(z)`.
    pub fn dh_f(
        &self,
        hbar: Complex64,
        z: Complex64,
        a: usize,
        b: usize,
        layout: TensorLayout,
    ) -> Result<CMatrix> {
        self.check_hbar(hbar)?;
        self.assemble(a, b, layout, |al| {
            let k = self.curve.kronecker(z, self.omega(al) + hbar)?;
            let twist = TWO_PI_I * al.dtau_omega();
            Ok(self.twist(al, z) * (k.dz_du() + twist * k.du()))
        })
    }

    /// `r_12(z) = E1(z) 1⊗1 + Σ_{α≠0} φ_α(z, ω_α) T_α ⊗ T_{-α}`.
    pub fn classical_r(&self, z: Complex64, a: usize, b: usize, layout: TensorLayout) -> Result<CMatrix> {
        self.assemble(a, b, layout, |al| {
            if al.is_zero() {
                self.curve.e1(z)
            } else {
                self.phi_twisted(al, z, self.omega(al))
            }
        })
    }

    /// `m_12(z) = (E1² − ℘)/2 1⊗1 + Σ_{α≠0} e(z α₂/N) ∂_u φ(z, ω_α) T_α ⊗ T_{-α}`.
    pub fn classical_m(&self, z: Complex64, a: usize, b: usize, layout: TensorLayout) -> Result<CMatrix> {
        self.assemble(a, b, layout, |al| {
            if al.is_zero() {
                let e1 = self.curve.e1(z)?;
                Ok((e1 * e1 - self.curve.wp(z)?) / 2.0)
            } else {
                Ok(self.twist(al, z) * self.curve.phi_du(z, self.omega(al))?)
            }
        })
    }

    /// Constant term `Σ_α (E1(ħ + ω_α) + 2πi α₂/N) T_α ⊗ T_{-α}` of the
    /// expansion around `z = 0`.
    pub fn r_zero(&self, hbar: Complex64, a: usize, b: usize, layout: TensorLayout) -> Result<CMatrix> {
        self.check_hbar(hbar)?;
        self.assemble(a, b, layout, |al| {
            Ok(self.curve.e1(hbar + self.omega(al))? + TWO_PI_I * al.dtau_omega())
        })
    }

    fn shift_parts(&self, a_index: usize, hbar: Complex64, dir: Direction) -> Result<(Complex64, Complex64)> {
        if a_index > 3 {
            return Err(Error::Config(format!(
                "half-period index must be 0..=3, got {a_index}"
            )));
        }
        let hp = HalfPeriods::new(self.tau());
        let nf = self.n as f64;
        let phase = TWO_PI_I * nf * hbar * hp.dtau[a_index];
        let sign = match dir {
            Direction::D12 => 1.0,
            Direction::D21 => -1.0,
        };
        Ok(((phase * sign).exp(), hp.omega[a_index] * nf))
    }

    fn shifted(
        &self,
        a_index: usize,
        hbar: Complex64,
        u: Complex64,
        dir: Direction,
        build: impl Fn(Complex64, usize, usize) -> Result<CMatrix>,
    ) -> Result<CMatrix> {
        let (phase, shift) = self.shift_parts(a_index, hbar, dir)?;
        let m = match dir {
            Direction::D12 => build(u + shift, 1, 2)?,
            Direction::D21 => build(-u - shift, 2, 1)?,
        };
        Ok(m.scale(phase))
    }

    /// `exp(±2πi Nħ ∂_τΩ_a) R^ħ(±(u + NΩ_a))` in direction 12 or 21.
    pub fn shifted_r(
        &self,
        a_index: usize,
        hbar: Complex64,
        u: Complex64,
        dir: Direction,
    ) -> Result<CMatrix> {
        let layout = self.pair_layout();
        self.shifted(a_index, hbar, u, dir, |x, a, b| {
            self.quantum_r(hbar, x, a, b, layout)
        })
    }

    /// Same as [`Self::shifted_r`] with `F = ∂R` (derivative in its own argument).
    pub fn shifted_f(
        &self,
        a_index: usize,
        hbar: Complex64,
        u: Complex64,
        dir: Direction,
    ) -> Result<CMatrix> {
        let layout = self.pair_layout();
        self.shifted(a_index, hbar, u, dir, |x, a, b| {
            self.f_matrix(hbar, x, a, b, layout)
        })
    }

    /// `d/dħ` of [`Self::shifted_f`], phase included.
    pub fn shifted_dh_f(
        &self,
        a_index: usize,
        hbar: Complex64,
        u: Complex64,
        dir: Direction,
    ) -> Result<CMatrix> {
        let layout = self.pair_layout();
        let hp = HalfPeriods::new(self.tau());
        let sign = match dir {
            Direction::D12 => 1.0,
            Direction::D21 => -1.0,
        };
        let dphase = TWO_PI_I * self.n as f64 * hp.dtau[a_index] * sign;
        self.shifted(a_index, hbar, u, dir, |x, a, b| {
            let f = self.f_matrix(hbar, x, a, b, layout)?;
            let mut d = self.dh_f(hbar, x, a, b, layout)?;
            d.axpy(dphase, &f);
            Ok(d)
        })
    }

    fn cm_layout(&self, params: &CMLaxParams) -> Result<TensorLayout> {
        params.validate()?;
        if params.n != self.n {
            return Err(Error::Config(format!(
                "Lax parameters have N = {}, R-matrix family has N = {}",
                params.n, self.n
            )));
        }
        let layout = TensorLayout::new(params.n_tilde(), self.n)?;
        let total = layout.dim().saturating_mul(params.n_tilde());
        if total > self.cm_dim_cap {
            return Err(Error::Dimension(format!(
                "Lax matrix dimension {total} exceeds the cap {}",
                self.cm_dim_cap
            )));
        }
        Ok(layout)
    }

    /// `L = Σ_{a,b} E_ab ⊗ (δ_ab p_a 1 + ν(1 − δ_ab) R^ħ_ab(z_a − z_b))`,
    /// particle index outer, tensor space inner.
    pub fn cm_lax(&self, params: &CMLaxParams) -> Result<CMatrix> {
        let layout = self.cm_layout(params)?;
        let k = params.n_tilde();
        let d = layout.dim();
        let mut rows = Vec::with_capacity(k);
        for i in 0..k {
            let mut row = Vec::with_capacity(k);
            for j in 0..k {
                if i == j {
                    row.push(CMatrix::scalar(d, params.momenta[i]));
                } else {
                    let z = params.positions[i] - params.positions[j];
                    row.push(
                        self.quantum_r(params.hbar, z, i + 1, j + 1, layout)?
                            .scale(params.nu),
                    );
                }
            }
            rows.push(row);
        }
        CMatrix::from_blocks(&rows)
    }

    fn cm_block_of(&self, params: &CMLaxParams, g: &CMatrix) -> Result<CMatrix> {
        let layout = self.cm_layout(params)?;
        let blocks = (1..=params.n_tilde())
            .map(|slot| tensor_embed(g, slot, layout))
            .collect::<Result<Vec<_>>>()?;
        Ok(CMatrix::block_diag(&blocks))
    }

    /// `⊕_a Q_a`.
    pub fn cm_block_q(&self, params: &CMLaxParams) -> Result<CMatrix> {
        self.cm_block_of(params, &gen_q(self.n))
    }

    /// `⊕_a Λ_a`.
    pub fn cm_block_lambda(&self, params: &CMLaxParams) -> Result<CMatrix> {
        self.cm_block_of(params, &gen_lambda(self.n))
    }

    /// `⊕_a z_a 1`.
    pub fn cm_block_z(&self, params: &CMLaxParams) -> Result<CMatrix> {
        let layout = self.cm_layout(params)?;
        let blocks: Vec<CMatrix> = params
            .positions
            .iter()
            .map(|z| CMatrix::scalar(layout.dim(), *z))
            .collect();
        Ok(CMatrix::block_diag(&blocks))
    }

    pub fn permutation(&self, a: usize, b: usize, layout: TensorLayout) -> Result<CMatrix> {
        permutation_p(a, b, layout)
    }
}

fn pair_layout(n: usize) -> Result<TensorLayout> {
    TensorLayout::new(2, n)
}

pub fn phi_twisted(alpha: LatticeIndex, u: Complex64, v: Complex64, tau: Tau) -> Result<Complex64> {
    BelavinR::new(alpha.n, tau)?.phi_twisted(alpha, u, v)
}

pub fn quantum_r(a: usize, b: usize, params: &RParams, layout: TensorLayout) -> Result<CMatrix> {
    BelavinR::new(params.n, params.tau)?.quantum_r(params.hbar, params.z, a, b, layout)
}

pub fn f_matrix(a: usize, b: usize, params: &RParams, layout: TensorLayout) -> Result<CMatrix> {
    BelavinR::new(params.n, params.tau)?.f_matrix(params.hbar, params.z, a, b, layout)
}

pub fn classical_r(
    a: usize,
    b: usize,
    z: Complex64,
    n: usize,
    tau: Tau,
    layout: TensorLayout,
) -> Result<CMatrix> {
    BelavinR::new(n, tau)?.classical_r(z, a, b, layout)
}

pub fn classical_m(
    a: usize,
    b: usize,
    z: Complex64,
    n: usize,
    tau: Tau,
    layout: TensorLayout,
) -> Result<CMatrix> {
    BelavinR::new(n, tau)?.classical_m(z, a, b, layout)
}

pub fn r_zero(
    a: usize,
    b: usize,
    hbar: Complex64,
    n: usize,
    tau: Tau,
    layout: TensorLayout,
) -> Result<CMatrix> {
    BelavinR::new(n, tau)?.r_zero(hbar, a, b, layout)
}

pub fn shifted_r(
    a_index: usize,
    hbar: Complex64,
    u: Complex64,
    n: usize,
    tau: Tau,
    dir: Direction,
) -> Result<CMatrix> {
    pair_layout(n)?;
    BelavinR::new(n, tau)?.shifted_r(a_index, hbar, u, dir)
}

pub fn shifted_f(
    a_index: usize,
    hbar: Complex64,
    u: Complex64,
    n: usize,
    tau: Tau,
    dir: Direction,
) -> Result<CMatrix> {
    pair_layout(n)?;
    BelavinR::new(n, tau)?.shifted_f(a_index, hbar, u, dir)
}

pub fn cm_lax(params: &CMLaxParams) -> Result<CMatrix> {
    BelavinR::new(params.n, params.tau)?.cm_lax(params)
}

pub fn cm_block_q(params: &CMLaxParams) -> Result<CMatrix> {
    BelavinR::new(params.n, params.tau)?.cm_block_q(params)
}

pub fn cm_block_lambda(params: &CMLaxParams) -> Result<CMatrix> {
    BelavinR::new(params.n, params.tau)?.cm_block_lambda(params)
}

pub fn cm_block_z(params: &CMLaxParams) -> Result<CMatrix> {
    BelavinR::new(params.n, params.tau)?.cm_block_z(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fam(n: usize) -> BelavinR {
        BelavinR::new(n, Tau::new(c(0.0, 0.8)).unwrap()).unwrap()
    }

    fn scalar_part(m: &CMatrix) -> Complex64 {
        m.trace() / m.dim() as f64
    }

    #[test]
    fn rank_one_is_scalar_kronecker() {
        let f = fam(1);
        let (h, z) = (c(0.17, 0.11), c(0.23, 0.05));
        let r = f.r12(h, z).unwrap();
        assert!((r[(0, 0)] - f.curve().phi(h, z).unwrap()).norm() < 1e-14);
        let fm = f.f_matrix(h, z, 1, 2, f.pair_layout()).unwrap();
        assert!((fm[(0, 0)] - f.curve().phi_du(h, z).unwrap()).norm() < 1e-13);
        let r0 = f.r_zero(h, 1, 2, f.pair_layout()).unwrap();
        assert!((r0[(0, 0)] - f.curve().e1(h).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn phi_twisted_composes_from_elliptic() {
        let f = fam(2);
        let tau = f.tau().value();
        let al = LatticeIndex::new(0, 1, 2);
        let got = f.phi_twisted(al, c(0.2, 0.0), tau / 2.0 + 0.11).unwrap();
        let want = (TWO_PI_I * 0.2 * 0.5).exp() * f.curve().phi(c(0.2, 0.0), tau / 2.0 + 0.11).unwrap();
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn unitarity_rank_two() {
        let f = fam(2);
        let (h, u) = (c(0.13, 0.07), c(0.31, 0.12));
        let lhs = &f.r12(h, u).unwrap() * &f.r21(h, -u).unwrap();
        let cv = f.curve();
        let s = 4.0 * (cv.wp(h * 2.0).unwrap() - cv.wp(u).unwrap());
        assert!(lhs.dist(&CMatrix::scalar(4, s)) < 1e-11);
    }

    #[test]
    fn f_matrix_matches_richardson_difference() {
        let f = fam(2);
        let (h, z) = (c(0.11, 0.0), c(0.23, 0.0));
        let d = |s: f64| {
            let p = f.r12(h, z + s).unwrap();
            let m = f.r12(h, z - s).unwrap();
            (&p - &m).scale(c(0.5 / s, 0.0))
        };
        let s = 1e-3;
        let rich = (&d(s / 2.0).scale(c(4.0, 0.0)) - &d(s)).scale(c(1.0 / 3.0, 0.0));
        let fm = f.f_matrix(h, z, 1, 2, f.pair_layout()).unwrap();
        assert!(fm.dist(&rich) < 1e-8 * fm.max_abs());
    }

    #[test]
    fn dh_matches_difference() {
        let f = fam(3);
        let (h, z) = (c(0.11, 0.03), c(0.23, 0.1));
        let s = 1e-4;
        let fd = (&f.r12(h + s, z).unwrap() - &f.r12(h - s, z).unwrap()).scale(c(0.5 / s, 0.0));
        let an = f.dh_r(h, z, 1, 2, f.pair_layout()).unwrap();
        assert!(an.dist(&fd) < 1e-6 * an.max_abs());
        let l = f.pair_layout();
        let fdf = (&f.f_matrix(h + s, z, 1, 2, l).unwrap() - &f.f_matrix(h - s, z, 1, 2, l).unwrap())
            .scale(c(0.5 / s, 0.0));
        let anf = f.dh_f(h, z, 1, 2, l).unwrap();
        assert!(anf.dist(&fdf) < 1e-6 * anf.max_abs());
    }

    #[test]
    fn hbar_guard_rejects_near_torsion_points() {
        let f = fam(2);
        let tau = f.tau().value();
        let r = f.r12(-tau / 2.0 + 0.01, c(0.2, 0.0));
        assert!(matches!(r, Err(Error::Pole { .. })));
        assert!(f
            .clone()
            .with_hbar_guard(0.0)
            .r12(c(0.01, 0.0), c(0.2, 0.0))
            .is_ok());
    }

    #[test]
    fn r_squared_minus_two_m() {
        let f = fam(3);
        let z = c(0.27, 0.19);
        let l = f.pair_layout();
        let r = f.classical_r(z, 1, 2, l).unwrap();
        let m = f.classical_m(z, 1, 2, l).unwrap();
        let lhs = &(&r * &r) - &m.scale(c(2.0, 0.0));
        let want = CMatrix::scalar(9, f.curve().wp(z).unwrap() * 9.0);
        assert!(lhs.dist(&want) < 1e-10);
    }

    #[test]
    fn classical_r_quasi_periodicity() {
        let f = fam(2);
        let z = c(0.21, 0.13);
        let tau = f.tau().value();
        let l = f.pair_layout();
        let lam = gen_lambda(2).kron(&CMatrix::identity(2));
        let lam_inv = lam.adjoint();
        let lhs = f.classical_r(z + tau, 1, 2, l).unwrap();
        let mut rhs = &(&lam_inv * &f.classical_r(z, 1, 2, l).unwrap()) * &lam;
        rhs.axpy(-TWO_PI_I, &CMatrix::identity(4));
        assert!(lhs.dist(&rhs) < 1e-11);
    }

    #[test]
    fn shifted_base_case_is_unshifted() {
        let f = fam(2);
        let (h, u) = (c(0.17, 0.11), c(0.3, 0.1));
        assert_eq!(
            f.shifted_r(0, h, u, Direction::D12).unwrap(),
            f.r12(h, u).unwrap()
        );
        assert!(matches!(
            f.shifted_r(4, h, u, Direction::D12),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shifted_unitarity_and_derivative() {
        let f = fam(3);
        let cv = f.curve().clone();
        let (h, u) = (c(0.17, 0.11), c(0.3, 0.1));
        let hp = HalfPeriods::new(f.tau());
        let a = 2;
        let prod =
            &f.shifted_r(a, h, u, Direction::D12).unwrap() * &f.shifted_r(a, h, u, Direction::D21).unwrap();
        let want = 9.0 * (cv.wp(h * 3.0).unwrap() - cv.wp(u + hp.omega[a] * 3.0).unwrap());
        assert!(prod.dist(&CMatrix::scalar(9, want)) < 1e-10);

        let a = 1;
        let lhs = &(&f.shifted_f(a, h, u, Direction::D12).unwrap()
            * &f.shifted_r(a, h, u, Direction::D21).unwrap())
            - &(&f.shifted_r(a, h, u, Direction::D12).unwrap()
                * &f.shifted_f(a, h, u, Direction::D21).unwrap());
        let want = -9.0 * cv.wp_prime(u + hp.omega[a] * 3.0).unwrap();
        assert!(lhs.dist(&CMatrix::scalar(9, want)) < 1e-9 * want.norm().max(1.0));
    }

    #[test]
    fn cm_lax_without_coupling_is_diagonal() {
        let f = fam(2);
        let params = CMLaxParams {
            n: 2,
            tau: f.tau(),
            hbar: c(0.17, 0.11),
            nu: c(0.0, 0.0),
            momenta: vec![c(0.3, 0.0), c(-0.2, 0.1)],
            positions: vec![c(0.1, 0.0), c(0.4, 0.2)],
        };
        let l = f.cm_lax(&params).unwrap();
        let mut want = CMatrix::zeros(8);
        for i in 0..8 {
            want[(i, i)] = params.momenta[i / 4];
        }
        assert!(l.dist(&want) < 1e-15);
        assert!((scalar_part(&l) - (params.momenta[0] + params.momenta[1]) / 2.0).norm() < 1e-15);
    }

    #[test]
    fn cm_dimension_cap() {
        let f = fam(3).with_cm_dim_cap(50);
        let params = CMLaxParams {
            n: 3,
            tau: f.tau(),
            hbar: c(0.17, 0.11),
            nu: c(1.0, 0.0),
            momenta: vec![c(0.0, 0.0); 3],
            positions: vec![c(0.1, 0.0), c(0.4, 0.2), c(0.7, 0.1)],
        };
        assert!(matches!(f.cm_lax(&params), Err(Error::Dimension(_))));
    }
}
