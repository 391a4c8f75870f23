//! Truncated state space of two atom–cavity systems and the operators acting
//! on it.
//!
//! Tensor factor order is fixed as `atom1 ⊗ cavity1 ⊗ atom2 ⊗ cavity2`, and
//! every global operator goes through [`embed`]. Atom levels are indexed
//! `|−⟩ = 0`, `|+⟩ = 1`, `|e⟩ = 2`, so the ground qubit occupies the leading
//! 2×2 block of each atom factor.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

pub const ATOM_LEVELS: usize = 3;
/// Uncoupled ground state |−⟩.
pub const MINUS: usize = 0;
/// Cavity-coupled ground state |+⟩.
pub const PLUS: usize = 1;
/// Excited state |e⟩.
pub const EXCITED: usize = 2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Shape of the truncated space `(ℂ³ ⊗ ℂᴺ)^⊗2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceSpec {
    fock_dim: usize,
}

impl SpaceSpec {
    pub fn new(fock_dim: usize) -> Result<Self> {
        if fock_dim < 2 {
            return Err(Error::InvalidParams(format!(
                "fock_dim must be >= 2, got {fock_dim}"
            )));
        }
        Ok(Self { fock_dim })
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn atom_levels(&self) -> usize {
        ATOM_LEVELS
    }

    pub fn subsystems(&self) -> usize {
        2
    }

    /// Dimension of one atom ⊗ cavity factor.
    pub fn factor_dim(&self) -> usize {
        ATOM_LEVELS * self.fock_dim
    }

    pub fn total_dim(&self) -> usize {
        self.factor_dim() * self.factor_dim()
    }

    pub fn site_dim(&self, site: Site) -> usize {
        match site {
            Site::Atom1 | Site::Atom2 => ATOM_LEVELS,
            Site::Cavity1 | Site::Cavity2 => self.fock_dim,
        }
    }

    /// Flat index of `|a1, n1, a2, n2⟩`.
    #[inline]
    pub fn index(&self, a1: usize, n1: usize, a2: usize, n2: usize) -> usize {
        let n = self.fock_dim;
        ((a1 * n + n1) * ATOM_LEVELS + a2) * n + n2
    }

    /// Inverse of [`SpaceSpec::index`].
    #[inline]
    pub fn decompose(&self, idx: usize) -> (usize, usize, usize, usize) {
        let n = self.fock_dim;
        let n2 = idx % n;
        let rest = idx / n;
        let a2 = rest % ATOM_LEVELS;
        let rest = rest / ATOM_LEVELS;
        let n1 = rest % n;
        let a1 = rest / n;
        (a1, n1, a2, n2)
    }
}

/// Tensor factor positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    Atom1,
    Cavity1,
    Atom2,
    Cavity2,
}

impl Site {
    pub const ALL: [Site; 4] = [Site::Atom1, Site::Cavity1, Site::Atom2, Site::Cavity2];

    fn position(self) -> usize {
        match self {
            Site::Atom1 => 0,
            Site::Cavity1 => 1,
            Site::Atom2 => 2,
            Site::Cavity2 => 3,
        }
    }
}

/// Dense complex state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: Vec<Complex64>,
}

impl Ket {
    pub fn new(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amps: vec![ZERO; dim],
        }
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut k = Self::zeros(dim);
        k.amps[i] = ONE;
        k
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self {
            amps: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescale to unit norm; fails on a zero or non-finite vector.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NotNormalized(norm));
        }
        let inv = 1.0 / norm;
        for a in &mut self.amps {
            *a *= inv;
        }
        Ok(norm)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() < tol
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Ket) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// ⟨self|op|self⟩, without normalization.
    pub fn expect(&self, op: &Op) -> Complex64 {
        self.inner(&op.apply(self))
    }

    pub fn kron(&self, other: &Ket) -> Ket {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                out.push(a * b);
            }
        }
        Ket { amps: out }
    }

    pub fn scaled(&self, s: Complex64) -> Ket {
        Ket {
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add(&self, other: &Ket) -> Ket {
        Ket {
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Square sparse matrix in compressed-row form. The sparsity pattern is fixed
/// once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl Op {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = ZERO;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != ZERO {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            dim,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<Complex64>]) -> Self {
        let dim = rows.len();
        let trip = rows.iter().enumerate().flat_map(|(r, row)| {
            assert_eq!(row.len(), dim, "dense matrix must be square");
            row.iter().enumerate().map(move |(c, &v)| (r, c, v))
        });
        Self::from_triplets(dim, trip)
    }

    pub fn from_real_dense(rows: &[Vec<f64>]) -> Self {
        let c: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_dense(&c)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, ONE)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, std::iter::empty())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(ZERO, |(_, v)| v)
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        let mut out = Ket::zeros(self.dim);
        self.apply_into(v.as_slice(), out.as_mut_slice());
        out
    }

    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * v[self.indices[k]];
            }
            *o = acc;
        }
    }

    pub fn adjoint(&self) -> Op {
        Op::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn matmul(&self, rhs: &Op) -> Op {
        assert_eq!(self.dim, rhs.dim);
        let mut trip = Vec::new();
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    trip.push((r, c, a * b));
                }
            }
        }
        Op::from_triplets(self.dim, trip)
    }

    pub fn kron(&self, rhs: &Op) -> Op {
        let d = rhs.dim;
        let mut trip = Vec::with_capacity(self.nnz() * rhs.nnz());
        for (r1, c1, a) in self.triplets() {
            for (r2, c2, b) in rhs.triplets() {
                trip.push((r1 * d + r2, c1 * d + c2, a * b));
            }
        }
        Op::from_triplets(self.dim * d, trip)
    }

    pub fn scale(&self, s: Complex64) -> Op {
        Op::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * s)))
    }

    /// [self, rhs]
    pub fn commutator(&self, rhs: &Op) -> Op {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self - &self.adjoint()).max_abs() <= tol
    }

    /// `true` if every stored entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut m = vec![vec![ZERO; self.dim]; self.dim];
        for (r, c, v) in self.triplets() {
            m[r][c] = v;
        }
        m
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }
}

impl Add for &Op {
    type Output = Op;
    fn add(self, rhs: &Op) -> Op {
        assert_eq!(self.dim, rhs.dim);
        Op::from_triplets(self.dim, self.triplets().chain(rhs.triplets()))
    }
}

impl Sub for &Op {
    type Output = Op;
    fn sub(self, rhs: &Op) -> Op {
        assert_eq!(self.dim, rhs.dim);
        Op::from_triplets(
            self.dim,
            self.triplets()
                .chain(rhs.triplets().map(|(r, c, v)| (r, c, -v))),
        )
    }
}

impl Mul for &Op {
    type Output = Op;
    fn mul(self, rhs: &Op) -> Op {
        self.matmul(rhs)
    }
}

impl Mul<&Op> for f64 {
    type Output = Op;
    fn mul(self, rhs: &Op) -> Op {
        rhs.scale(Complex64::new(self, 0.0))
    }
}

/// Truncated coherent state `Σ_{n<N} e^{−|β|²/2} βⁿ/√(n!) |n⟩`. The vector is
/// left unnormalized so the truncation deficit stays visible.
pub fn coherent_state(beta: Complex64, fock_dim: usize) -> Result<Ket> {
    if fock_dim < 2 {
        return Err(Error::InvalidParams(format!(
            "fock_dim must be >= 2, got {fock_dim}"
        )));
    }
    if !beta.re.is_finite() || !beta.im.is_finite() {
        return Err(Error::NonFinite(format!("coherent amplitude {beta}")));
    }
    let mut amps = Vec::with_capacity(fock_dim);
    let mut term = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    amps.push(term);
    for n in 1..fock_dim {
        term = term * beta / (n as f64).sqrt();
        amps.push(term);
    }
    Ok(Ket::new(amps))
}

/// Fock number state |n⟩ in a cavity factor.
pub fn fock_state(n: usize, fock_dim: usize) -> Ket {
    Ket::basis(fock_dim, n)
}

/// Atomic basis state in the 3-level factor.
pub fn atom_state(level: usize) -> Ket {
    Ket::basis(ATOM_LEVELS, level)
}

/// Cavity annihilation operator: `√n` at `(n−1, n)`.
pub fn annihilation(fock_dim: usize) -> Result<Op> {
    if fock_dim < 2 {
        return Err(Error::InvalidParams(format!(
            "fock_dim must be >= 2, got {fock_dim}"
        )));
    }
    Ok(Op::from_triplets(
        fock_dim,
        (1..fock_dim).map(|n| (n - 1, n, Complex64::new((n as f64).sqrt(), 0.0))),
    ))
}

/// Atomic lowering operator σ = |+⟩⟨e|.
pub fn sigma_lowering() -> Op {
    Op::from_triplets(ATOM_LEVELS, [(PLUS, EXCITED, ONE)])
}

/// σZ = |e⟩⟨e| + |+⟩⟨+| − |−⟩⟨−|; +1 on cavity-coupled levels.
pub fn sigma_z() -> Op {
    Op::from_triplets(
        ATOM_LEVELS,
        [(MINUS, MINUS, -ONE), (PLUS, PLUS, ONE), (EXCITED, EXCITED, ONE)],
    )
}

/// σX = |−⟩⟨+| + |+⟩⟨−| on the ground qubit.
pub fn sigma_x() -> Op {
    Op::from_triplets(ATOM_LEVELS, [(MINUS, PLUS, ONE), (PLUS, MINUS, ONE)])
}

/// |level⟩⟨level| on an atom factor.
pub fn atom_projector(level: usize) -> Op {
    Op::from_triplets(ATOM_LEVELS, [(level, level, ONE)])
}

/// Kronecker embedding of a single-factor operator, identities elsewhere.
pub fn embed(local: &Op, site: Site, spec: SpaceSpec) -> Result<Op> {
    let expected = spec.site_dim(site);
    if local.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: local.dim(),
        });
    }
    let mut acc: Option<Op> = None;
    for s in Site::ALL {
        let factor = if s == site {
            local.clone()
        } else {
            Op::identity(spec.site_dim(s))
        };
        acc = Some(match acc {
            None => factor,
            Some(a) => a.kron(&factor),
        });
    }
    debug_assert_eq!(site.position(), Site::ALL.iter().position(|&s| s == site).unwrap());
    Ok(acc.expect("four sites"))
}

/// Product state `atom1 ⊗ cavity1 ⊗ atom2 ⊗ cavity2`.
pub fn product_state(atom1: &Ket, cavity1: &Ket, atom2: &Ket, cavity2: &Ket) -> Ket {
    atom1.kron(cavity1).kron(atom2).kron(cavity2)
}

/// Every operator the physical and reduced filters need, built once per
/// parameter set and shared read-only.
#[derive(Debug, Clone)]
pub struct OperatorCatalog {
    pub space: SpaceSpec,
    pub b1: Op,
    pub b2: Op,
    pub sig1: Op,
    pub sig2: Op,
    pub sig_z1: Op,
    pub sig_z2: Op,
    pub sig_x1: Op,
    pub sig_x2: Op,
    /// κb₁ + κb₂; the full measurement operator is `L0 + α(t)·I`.
    pub measurement_l0: Op,
    /// α-independent drift of the physical filter.
    pub drift_const: Op,
    /// Drift coefficient of α(t): −κ(b₁ + b₂)†.
    pub drift_linear_in_alpha: Op,
    /// γσ⁽¹⁾
    pub jump1: Op,
    /// γσ⁽²⁾
    pub jump2: Op,
}

pub fn build_catalog(params: &SystemParams) -> Result<OperatorCatalog> {
    params.validate()?;
    let space = SpaceSpec::new(params.fock_dim)?;
    let a = annihilation(params.fock_dim)?;
    let b1 = embed(&a, Site::Cavity1, space)?;
    let b2 = embed(&a, Site::Cavity2, space)?;
    let sig1 = embed(&sigma_lowering(), Site::Atom1, space)?;
    let sig2 = embed(&sigma_lowering(), Site::Atom2, space)?;
    let sig_z1 = embed(&sigma_z(), Site::Atom1, space)?;
    let sig_z2 = embed(&sigma_z(), Site::Atom2, space)?;
    let sig_x1 = embed(&sigma_x(), Site::Atom1, space)?;
    let sig_x2 = embed(&sigma_x(), Site::Atom2, space)?;

    let g = params.g;
    let kappa = params.kappa();
    let kappa_sq = params.kappa_sq();
    let gamma = params.gamma();
    let gamma_sq = params.gamma_sq();

    let b1d = b1.adjoint();
    let b2d = b2.adjoint();
    let sig1d = sig1.adjoint();
    let sig2d = sig2.adjoint();

    let jc = &(&(&sig1d * &b1) - &(&sig1 * &b1d)) + &(&(&sig2d * &b2) - &(&sig2 * &b2d));
    let number = &(&b1d * &b1) + &(&b2d * &b2);
    let cascade = &b2d * &b1;
    let excited = &(&sig1d * &sig1) + &(&sig2d * &sig2);

    let drift_const = &(&(&(g * &jc) - &((0.5 * kappa_sq) * &number)) - &(kappa_sq * &cascade))
        - &((0.5 * gamma_sq) * &excited);
    let b_sum = &b1 + &b2;
    let drift_linear_in_alpha = (-kappa) * &b_sum.adjoint();
    let measurement_l0 = kappa * &b_sum;
    let jump1 = gamma * &sig1;
    let jump2 = gamma * &sig2;

    Ok(OperatorCatalog {
        space,
        b1,
        b2,
        sig1,
        sig2,
        sig_z1,
        sig_z2,
        sig_x1,
        sig_x2,
        measurement_l0,
        drift_const,
        drift_linear_in_alpha,
        jump1,
        jump2,
    })
}

impl OperatorCatalog {
    /// σZ⁽¹⁾σZ⁽²⁾
    pub fn parity_zz(&self) -> Op {
        &self.sig_z1 * &self.sig_z2
    }

    /// σX⁽¹⁾σX⁽²⁾
    pub fn parity_xx(&self) -> Op {
        &self.sig_x1 * &self.sig_x2
    }

    /// Full measurement operator at probe amplitude α.
    pub fn measurement(&self, alpha: f64) -> Op {
        &self.measurement_l0 + &(alpha * &Op::identity(self.space.total_dim()))
    }

    /// Full physical drift at probe amplitude α (without the norm-only
    /// constant).
    pub fn drift(&self, alpha: f64) -> Op {
        &self.drift_const + &(alpha * &self.drift_linear_in_alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn space_dimensions() {
        let s = SpaceSpec::new(8).unwrap();
        assert_eq!(s.total_dim(), 576);
        assert!(SpaceSpec::new(1).is_err());
        for idx in [0, 17, 300, 575] {
            let (a1, n1, a2, n2) = s.decompose(idx);
            assert_eq!(s.index(a1, n1, a2, n2), idx);
        }
    }

    #[test]
    fn coherent_vacuum() {
        let v = coherent_state(Complex64::new(0.0, 0.0), 5).unwrap();
        assert_eq!(v.as_slice()[0], c(1.0));
        assert!(v.as_slice()[1..].iter().all(|a| *a == c(0.0)));
    }

    #[test]
    fn coherent_rejects_nan() {
        assert!(coherent_state(Complex64::new(f64::NAN, 0.0), 5).is_err());
        assert!(coherent_state(c(0.1), 1).is_err());
    }

    #[test]
    fn coherent_truncated_moments() {
        // β = 2α/κ for α = 0.2, κ = 3.
        let beta: f64 = 0.1334;
        let n = 8;
        // Oracle: independent sum of the closed-form terms.
        let mut fact: f64 = 1.0;
        let mut norm_oracle = 0.0;
        let mut b_oracle = 0.0;
        let mut prev = 0.0;
        for k in 0..n {
            if k > 0 {
                fact *= k as f64;
            }
            let ck = (-(beta * beta) / 2.0).exp() * beta.powi(k as i32) / fact.sqrt();
            norm_oracle += ck * ck;
            if k > 0 {
                b_oracle += prev * (k as f64).sqrt() * ck;
            }
            prev = ck;
        }
        let v = coherent_state(c(beta), n).unwrap();
        assert!(v.norm_sqr() >= 1.0 - 1e-12);
        assert!((v.norm_sqr() - norm_oracle).abs() < 1e-15);
        let a = annihilation(n).unwrap();
        let mean = v.expect(&a) / v.norm_sqr();
        assert!((mean.re - beta).abs() < 1e-10);
        assert!((v.expect(&a).re - b_oracle).abs() < 1e-15);
    }

    #[test]
    fn annihilation_matrix() {
        let a = annihilation(2).unwrap();
        assert_eq!(
            a.to_dense(),
            vec![vec![c(0.0), c(1.0)], vec![c(0.0), c(0.0)]]
        );
        let a4 = annihilation(4).unwrap();
        let out = a4.apply(&fock_state(3, 4));
        assert_eq!(out, fock_state(2, 4).scaled(c(3f64.sqrt())));
        let num = &a4.adjoint() * &a4;
        for n in 0..4 {
            let out = num.apply(&fock_state(n, 4));
            let want = fock_state(n, 4).scaled(c(n as f64));
            assert!((out.add(&want.scaled(c(-1.0)))).norm() < 1e-14);
        }
    }

    #[test]
    fn embed_identity_and_parity() {
        let s = SpaceSpec::new(3).unwrap();
        for site in Site::ALL {
            let id = embed(&Op::identity(s.site_dim(site)), site, s).unwrap();
            assert_eq!(id, Op::identity(s.total_dim()));
        }
        let zz = &embed(&sigma_z(), Site::Atom1, s).unwrap() * &embed(&sigma_z(), Site::Atom2, s).unwrap();
        let v = product_state(
            &atom_state(MINUS),
            &fock_state(0, 3),
            &atom_state(MINUS),
            &fock_state(0, 3),
        );
        assert_eq!(zz.apply(&v), v);
        let b = embed(&annihilation(3).unwrap(), Site::Cavity1, s).unwrap();
        let sig = embed(&sigma_lowering(), Site::Atom2, s).unwrap();
        assert_eq!(b.commutator(&sig).norm(), 0.0);
    }

    #[test]
    fn embed_dimension_mismatch() {
        let s = SpaceSpec::new(4).unwrap();
        let err = embed(&sigma_z(), Site::Cavity1, s).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 4, got: 3 }));
    }

    #[test]
    fn embed_places_factor_in_order() {
        let s = SpaceSpec::new(3).unwrap();
        let b2 = embed(&annihilation(3).unwrap(), Site::Cavity2, s).unwrap();
        let v = Ket::basis(s.total_dim(), s.index(PLUS, 1, MINUS, 2));
        let out = b2.apply(&v);
        let expect = Ket::basis(s.total_dim(), s.index(PLUS, 1, MINUS, 1)).scaled(c(2f64.sqrt()));
        assert_eq!(out, expect);
    }

    #[test]
    fn catalog_algebra() {
        let p = SystemParams::default();
        let cat = build_catalog(&p).unwrap();
        let s = cat.space;
        // σ² = 0
        assert_eq!((&cat.sig1 * &cat.sig1).nnz(), 0);
        assert_eq!((&cat.sig2 * &cat.sig2).nnz(), 0);
        // σZ² = I
        let id = Op::identity(s.total_dim());
        assert_eq!(&cat.sig_z1 * &cat.sig_z1, id);
        assert_eq!(&cat.sig_z2 * &cat.sig_z2, id);
        // [b1, b2] = 0
        assert!(cat.b1.commutator(&cat.b2).norm() < 1e-12);
        // [b1, b1†] = I except on the truncation boundary
        let comm = cat.b1.commutator(&cat.b1.adjoint());
        for i in 0..s.total_dim() {
            let (_, n1, _, _) = s.decompose(i);
            if n1 + 1 < s.fock_dim() {
                assert!((comm.get(i, i) - c(1.0)).norm() < 1e-12);
            }
        }
        assert!(cat.sig_z1.is_hermitian(1e-14));
        assert!(cat.sig_x1.is_hermitian(1e-14));
        assert!(cat.parity_xx().is_hermitian(1e-14));
        assert!((&cat.b1.adjoint() * &cat.b1).is_hermitian(1e-14));
    }

    #[test]
    fn sigma_z_matches_projector_sum() {
        let expect = &(&atom_projector(EXCITED) + &atom_projector(PLUS)) - &atom_projector(MINUS);
        assert_eq!(sigma_z(), expect);
    }

    #[test]
    fn drift_anti_hermitian_part() {
        let p = SystemParams::default();
        let cat = build_catalog(&p).unwrap();
        let d = &cat.drift_const;
        assert!(!d.is_hermitian(1e-6));
        let anti = 0.5 * &(d - &d.adjoint());
        assert!((&anti + &anti.adjoint()).max_abs() < 1e-14);
        assert!((&(d + &d.adjoint())).max_abs() > 1.0, "damping part present");
        let b1d = cat.b1.adjoint();
        let b2d = cat.b2.adjoint();
        let jc = &(&(&cat.sig1.adjoint() * &cat.b1) - &(&cat.sig1 * &b1d))
            + &(&(&cat.sig2.adjoint() * &cat.b2) - &(&cat.sig2 * &b2d));
        let cascade = &(&b1d * &cat.b2) - &(&b2d * &cat.b1);
        let expect = &(p.g * &jc) + &((0.5 * p.kappa_sq()) * &cascade);
        assert!((&anti - &expect).max_abs() < 1e-12);
    }

    #[test]
    fn dark_state_and_jc_action() {
        let p = SystemParams::default();
        let cat = build_catalog(&p).unwrap();
        let s = cat.space;
        let n = s.fock_dim();
        let dark = Ket::basis(s.total_dim(), s.index(MINUS, 0, MINUS, 0));
        assert_eq!(cat.drift(0.0).apply(&dark).norm(), 0.0);

        let v = Ket::basis(s.total_dim(), s.index(PLUS, 1, MINUS, 0));
        let out = cat.drift_const.apply(&v);
        let e_comp = out.as_slice()[s.index(EXCITED, 0, MINUS, 0)];
        assert!((e_comp - c(p.g)).norm() < 1e-12);
        let _ = n;
    }

    #[test]
    fn measurement_mean_on_uu() {
        let p = SystemParams::default();
        let cat = build_catalog(&p).unwrap();
        let s = cat.space;
        let uu = Ket::basis(s.total_dim(), s.index(PLUS, 0, PLUS, 0));
        let l = cat.measurement(p.alpha_max);
        let ll = &l + &l.adjoint();
        let mean = uu.expect(&ll).re;
        assert!((mean - 2.0 * p.alpha_max).abs() < 1e-14);
    }
}
