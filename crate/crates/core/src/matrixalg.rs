//! Dense complex matrices over `Mat(N, C)^{⊗ñ}`, the Heisenberg generators
//! `Q` and `Λ`, the sin-algebra basis `T_α`, structure constants `κ`, tensor
//! embeddings and the permutation operator.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix({0}x{0})", self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|c| format!("{:.4}", self[(r, c)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, ONE)
    }

    pub fn scalar(dim: usize, value: Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = value;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {dim}x{dim} matrix",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    fn check_same(&self, other: &Self, op: &str) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("{op}: {} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "matrix product")?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            let row = &self.data[r * n..(r + 1) * n];
            let dst = &mut out.data[r * n..(r + 1) * n];
            for (k, a) in row.iter().enumerate() {
                if *a == ZERO {
                    continue;
                }
                let src = &other.data[k * n..(k + 1) * n];
                for (d, b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "matrix sum")?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "matrix difference")?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        assert_eq!(self.dim, other.dim, "axpy dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)])
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.norm()))
    }

    /// Max-abs-entry distance.
    pub fn dist(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dist dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |r, c| self[(r / m, c / m)] * other[(r % m, c % m)])
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::identity(self.dim);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                out = &out * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        out
    }

    /// Block diagonal sum of the given matrices.
    pub fn block_diag(blocks: &[CMatrix]) -> Self {
        let dim = blocks.iter().map(|b| b.dim).sum();
        let mut out = Self::zeros(dim);
        let mut off = 0;
        for b in blocks {
            out.set_block(off, off, b);
            off += b.dim;
        }
        out
    }

    /// Assembles a square grid of equally sized square blocks.
    pub fn from_blocks(blocks: &[Vec<CMatrix>]) -> Result<Self> {
        let k = blocks.len();
        let bd = blocks.first().and_then(|r| r.first()).map_or(0, |b| b.dim);
        for row in blocks {
            if row.len() != k || row.iter().any(|b| b.dim != bd) {
                return Err(Error::Dimension("ragged block grid".into()));
            }
        }
        let mut out = Self::zeros(k * bd);
        for (i, row) in blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                out.set_block(i * bd, j * bd, b);
            }
        }
        Ok(out)
    }

    pub fn set_block(&mut self, row: usize, col: usize, block: &CMatrix) {
        for r in 0..block.dim {
            for c in 0..block.dim {
                self[(row + r, col + c)] = block[(r, c)];
            }
        }
    }

    pub fn block(&self, row: usize, col: usize, dim: usize) -> CMatrix {
        Self::from_fn(dim, |r, c| self[(row + r, col + c)])
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "vector length mismatch");
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self[(r, c)] * v[c]).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        assert!(r < self.dim && c < self.dim, "index out of range");
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        assert!(r < self.dim && c < self.dim, "index out of range");
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.try_mul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.try_add(rhs).expect("matrix sum dimension mismatch")
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.try_sub(rhs).expect("matrix difference dimension mismatch")
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(-ONE)
    }
}

impl Mul<Complex64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: Complex64) -> CMatrix {
        self.scale(rhs)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.axpy(ONE, rhs);
    }
}

/// `max|lhs − rhs| / max(1, max|lhs|, max|rhs|)`.
pub fn relative_defect(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    lhs.dist(rhs) / 1f64.max(lhs.max_abs()).max(rhs.max_abs())
}

/// Element `(α₁, α₂)` of `Z_N × Z_N`, stored with representatives in `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub a1: usize,
    pub a2: usize,
    pub n: usize,
}

impl LatticeIndex {
    pub fn new(a1: i64, a2: i64, n: usize) -> Self {
        assert!(n >= 1, "N must be at least 1");
        let m = n as i64;
        Self {
            a1: a1.rem_euclid(m) as usize,
            a2: a2.rem_euclid(m) as usize,
            n,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(0, 0, n)
    }

    /// All `N²` indices in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = LatticeIndex> {
        (0..n * n).map(move |k| Self::new((k / n) as i64, (k % n) as i64, n))
    }

    pub fn is_zero(self) -> bool {
        self.a1 == 0 && self.a2 == 0
    }

    pub fn neg(self) -> Self {
        Self::new(-(self.a1 as i64), -(self.a2 as i64), self.n)
    }

    pub fn add(self, other: Self) -> Self {
        Self::new((self.a1 + other.a1) as i64, (self.a2 + other.a2) as i64, self.n)
    }

    pub fn as_ints(self) -> (i64, i64) {
        (self.a1 as i64, self.a2 as i64)
    }

    /// `ω_α = (α₁ + α₂ τ) / N`.
    pub fn omega(self, tau: Complex64) -> Complex64 {
        (tau * self.a2 as f64 + self.a1 as f64) / self.n as f64
    }

    /// `∂_τ ω_α = α₂ / N`.
    pub fn dtau_omega(self) -> f64 {
        self.a2 as f64 / self.n as f64
    }
}

/// `ñ` tensor factors, each of dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorLayout {
    pub n_factors: usize,
    pub factor_dim: usize,
}

impl TensorLayout {
    pub fn new(n_factors: usize, factor_dim: usize) -> Result<Self> {
        if n_factors == 0 || factor_dim == 0 {
            return Err(Error::Dimension(format!(
                "layout needs at least one factor of positive dimension, got {n_factors} x {factor_dim}"
            )));
        }
        Ok(Self {
            n_factors,
            factor_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor_dim.pow(self.n_factors as u32)
    }

    fn check_slot(&self, a: usize) -> Result<()> {
        if a == 0 || a > self.n_factors {
            return Err(Error::Slot {
                a,
                b: a,
                n_factors: self.n_factors,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a == b || a == 0 || b == 0 || a > self.n_factors || b > self.n_factors {
            return Err(Error::Slot {
                a,
                b,
                n_factors: self.n_factors,
            });
        }
        Ok(())
    }
}

/// `Q = diag(exp(2πi k/N))`, `k = 1..N`.
pub fn gen_q(n: usize) -> CMatrix {
    CMatrix::from_fn(n, |r, c| {
        if r == c {
            // exp(2πi N/N) taken as exactly 1
            Complex64::from_polar(1.0, 2.0 * PI * ((r + 1) % n) as f64 / n as f64)
        } else {
            ZERO
        }
    })
}

/// Cyclic shift `Λ_{k,k+1 mod N} = 1`.
pub fn gen_lambda(n: usize) -> CMatrix {
    CMatrix::from_fn(n, |r, c| if c == (r + 1) % n { ONE } else { ZERO })
}

/// `T_γ = exp(πi γ₁γ₂/N) Q^{γ₁} Λ^{γ₂}` for any `γ ∈ Z²`. Because `Q^N = Λ^N = 1`
/// only the phase depends on the unreduced values.
pub fn t_basis_int(g1: i64, g2: i64, n: usize) -> CMatrix {
    let m = n as i64;
    let (r1, r2) = (g1.rem_euclid(m), g2.rem_euclid(m));
    // exponent of exp(πi k/N) is only needed mod 2N
    let phase_k = (g1.rem_euclid(2 * m) * g2.rem_euclid(2 * m)).rem_euclid(2 * m);
    let phase = Complex64::from_polar(1.0, PI * phase_k as f64 / n as f64);
    // (Q^a Λ^b)_{k,l} = exp(2πi a(k+1)/N) δ_{l, k+b}
    CMatrix::from_fn(n, |r, c| {
        if c as i64 == (r as i64 + r2) % m {
            let q = (r1 * (r as i64 + 1)).rem_euclid(m);
            phase * Complex64::from_polar(1.0, 2.0 * PI * q as f64 / n as f64)
        } else {
            ZERO
        }
    })
}

/// `T_α` at the stored representative.
pub fn t_basis(alpha: LatticeIndex) -> CMatrix {
    let (a1, a2) = alpha.as_ints();
    t_basis_int(a1, a2, alpha.n)
}

/// `T_{-α}` with the literal negated integers, so that `T_α T_{-α} = 1`.
pub fn t_basis_neg(alpha: LatticeIndex) -> CMatrix {
    let (a1, a2) = alpha.as_ints();
    t_basis_int(-a1, -a2, alpha.n)
}

/// `κ_{α,β} = exp(πi/N (β₁α₂ − β₂α₁))` for integer pairs.
pub fn kappa_int(alpha: (i64, i64), beta: (i64, i64), n: usize) -> Complex64 {
    let m = 2 * n as i64;
    let k = (beta.0 * alpha.1 - beta.1 * alpha.0).rem_euclid(m);
    Complex64::from_polar(1.0, PI * k as f64 / n as f64)
}

pub fn kappa(alpha: LatticeIndex, beta: LatticeIndex) -> Complex64 {
    kappa_int(alpha.as_ints(), beta.as_ints(), alpha.n)
}

/// Kronecker product of the listed factors, identity in every other slot.
pub fn embed_factors(factors: &[(usize, &CMatrix)], layout: TensorLayout) -> Result<CMatrix> {
    for (i, (slot, m)) in factors.iter().enumerate() {
        layout.check_slot(*slot)?;
        if m.dim() != layout.factor_dim {
            return Err(Error::Dimension(format!(
                "factor in slot {slot} has dimension {}, layout expects {}",
                m.dim(),
                layout.factor_dim
            )));
        }
        if factors[..i].iter().any(|(s, _)| s == slot) {
            return Err(Error::Slot {
                a: *slot,
                b: *slot,
                n_factors: layout.n_factors,
            });
        }
    }
    let id = CMatrix::identity(layout.factor_dim);
    let mut out = CMatrix::identity(1);
    for slot in 1..=layout.n_factors {
        let f = factors.iter().find(|(s, _)| *s == slot).map_or(&id, |(_, m)| *m);
        out = out.kron(f);
    }
    Ok(out)
}

/// `1 ⊗ … ⊗ m ⊗ … ⊗ 1` with `m` in slot `a` (1-based).
pub fn tensor_embed(m: &CMatrix, a: usize, layout: TensorLayout) -> Result<CMatrix> {
    embed_factors(&[(a, m)], layout)
}

/// `x` in slot `a`, `y` in slot `b`.
pub fn embed_pair(x: &CMatrix, a: usize, y: &CMatrix, b: usize, layout: TensorLayout) -> Result<CMatrix> {
    layout.check_pair(a, b)?;
    embed_factors(&[(a, x), (b, y)], layout)
}

pub fn kron(m1: &CMatrix, m2: &CMatrix) -> CMatrix {
    m1.kron(m2)
}

/// Permutation of tensor slots `a` and `b`.
pub fn permutation_p(a: usize, b: usize, layout: TensorLayout) -> Result<CMatrix> {
    layout.check_pair(a, b)?;
    let n = layout.factor_dim;
    let k = layout.n_factors;
    let dim = layout.dim();
    let mut out = CMatrix::zeros(dim);
    let mut digits = vec![0usize; k];
    for col in 0..dim {
        let mut x = col;
        for d in digits.iter_mut().rev() {
            *d = x % n;
            x /= n;
        }
        digits.swap(a - 1, b - 1);
        let row = digits.iter().fold(0, |acc, d| acc * n + d);
        out[(row, col)] = ONE;
    }
    Ok(out)
}
