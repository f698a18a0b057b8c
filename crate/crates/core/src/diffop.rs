//! Matrix-coefficient shift operators `Σ_j X_j(x) Λ^j`.
//!
//! One type covers both finite bands and truncated series. Every operator
//! records the range of powers in which its coefficients are exact: a band
//! is exact everywhere, a lower series `I + ω₁Λ⁻¹ + … + ω_KΛ⁻ᴷ` is exact only
//! for powers `≥ -K`, an upper series only for powers `≤ K`. Products carry
//! this range forward and drop coefficients that fall outside it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{EmthError, Result};
use crate::lattice::{Boundary, Lattice, Mat, MatrixField};

/// Stand-in for an unbounded power.
const UNBOUNDED: i64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    lattice: Lattice,
    dim: usize,
    lo: i64,
    coeffs: Vec<MatrixField>,
    exact_min: i64,
    exact_max: i64,
}

/// Band operators are shift operators with an unbounded exact range.
pub type BandOperator = ShiftOperator;
/// Series operators are shift operators truncated on one side.
pub type SeriesOperator = ShiftOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Powers `0, -1, -2, …`
    Lower,
    /// Powers `0, 1, 2, …`
    Upper,
}

impl ShiftOperator {
    pub fn zero(lattice: Lattice, dim: usize) -> Self {
        Self { lattice, dim, lo: 0, coeffs: Vec::new(), exact_min: -UNBOUNDED, exact_max: UNBOUNDED }
    }

    /// `X Λ^j`.
    pub fn monomial(x: MatrixField, j: i64) -> Self {
        let lattice = *x.lattice();
        let dim = x.dim();
        let mut op = Self { lattice, dim, lo: j, coeffs: vec![x], exact_min: -UNBOUNDED, exact_max: UNBOUNDED };
        op.trim();
        op
    }

    /// Multiplication by a field.
    pub fn multiplication(f: MatrixField) -> Self {
        Self::monomial(f, 0)
    }

    /// `I Λ^j`.
    pub fn shift_power(lattice: Lattice, dim: usize, j: i64) -> Self {
        Self::monomial(MatrixField::identity(lattice, dim), j)
    }

    pub fn identity(lattice: Lattice, dim: usize) -> Self {
        Self::shift_power(lattice, dim, 0)
    }

    /// Band operator with coefficients for powers `lo, lo+1, …`.
    pub fn band(lo: i64, coeffs: Vec<MatrixField>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| EmthError::InvalidInput("band needs at least one coefficient".into()))?;
        let lattice = *first.lattice();
        let dim = first.dim();
        for c in &coeffs {
            if c.dim() != dim {
                return Err(EmthError::DimensionMismatch { expected: dim, found: c.dim() });
            }
            if c.lattice() != &lattice {
                return Err(EmthError::LatticeMismatch);
            }
        }
        let mut op = Self { lattice, dim, lo, coeffs, exact_min: -UNBOUNDED, exact_max: UNBOUNDED };
        op.trim();
        Ok(op)
    }

    /// Truncated series `Σ_{k=0..K} c_k Λ^{±k}`; `coeffs[k]` multiplies
    /// `Λ^{-k}` for a lower series and `Λ^{k}` for an upper one.
    pub fn series(direction: Direction, coeffs: Vec<MatrixField>) -> Result<Self> {
        let order = coeffs.len() as i64 - 1;
        match direction {
            Direction::Upper => {
                let mut op = Self::band(0, coeffs)?;
                op.exact_max = order;
                Ok(op)
            }
            Direction::Lower => {
                let mut rev = coeffs;
                rev.reverse();
                let mut op = Self::band(-order, rev)?;
                op.exact_min = -order;
                Ok(op)
            }
        }
    }

    /// `Λ + u + vΛ⁻¹`.
    pub fn lax(u: &MatrixField, v: &MatrixField) -> Result<Self> {
        let id = MatrixField::identity(*u.lattice(), u.dim());
        Self::band(-1, vec![v.clone(), u.clone(), id])
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lowest stored power (0 for the zero operator).
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Highest stored power (`lo - 1` for the zero operator).
    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Powers in which the coefficients are exact, `None` meaning unbounded.
    pub fn exact_range(&self) -> (Option<i64>, Option<i64>) {
        let lo = (self.exact_min > -UNBOUNDED).then_some(self.exact_min);
        let hi = (self.exact_max < UNBOUNDED).then_some(self.exact_max);
        (lo, hi)
    }

    pub fn is_band(&self) -> bool {
        self.exact_range() == (None, None)
    }

    /// Truncation order of a one-sided series (`None` for bands).
    pub fn truncation_order(&self) -> Option<usize> {
        match self.exact_range() {
            (Some(lo), None) => Some((-lo).max(0) as usize),
            (None, Some(hi)) => Some(hi.max(0) as usize),
            (Some(lo), Some(hi)) => Some((-lo).min(hi).max(0) as usize),
            (None, None) => None,
        }
    }

    /// Coefficient of `Λ^j`, zero when absent.
    pub fn coeff(&self, j: i64) -> MatrixField {
        if j < self.lo || j > self.hi() {
            MatrixField::zeros(self.lattice, self.dim)
        } else {
            self.coeffs[(j - self.lo) as usize].clone()
        }
    }

    pub fn coeff_ref(&self, j: i64) -> Option<&MatrixField> {
        if j < self.lo || j > self.hi() {
            None
        } else {
            Some(&self.coeffs[(j - self.lo) as usize])
        }
    }

    /// `(power, coefficient)` pairs in ascending order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &MatrixField)> {
        self.coeffs.iter().enumerate().map(move |(k, c)| (self.lo + k as i64, c))
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.max_norm() == 0.0) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|c| c.max_norm() == 0.0).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.lo += lead as i64;
        }
        if self.coeffs.is_empty() {
            self.lo = 0;
        }
    }

    fn restrict_to_exact(&mut self) {
        let lo = self.lo.max(self.exact_min);
        let hi = self.hi().min(self.exact_max);
        if lo > hi {
            self.coeffs.clear();
            self.lo = 0;
            return;
        }
        let start = (lo - self.lo) as usize;
        let end = (hi - self.lo) as usize + 1;
        self.coeffs = self.coeffs[start..end].to_vec();
        self.lo = lo;
        self.trim();
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(EmthError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.lattice != other.lattice {
            return Err(EmthError::LatticeMismatch);
        }
        Ok(())
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        self.check_compatible(other)?;
        if self.is_zero() && other.is_zero() {
            let mut z = Self::zero(self.lattice, self.dim);
            z.exact_min = self.exact_min.max(other.exact_min);
            z.exact_max = self.exact_max.min(other.exact_max);
            return Ok(z);
        }
        let lo = if self.is_zero() { other.lo } else if other.is_zero() { self.lo } else { self.lo.min(other.lo) };
        let hi = self.hi().max(other.hi());
        let coeffs = (lo..=hi)
            .map(|j| {
                let b = other.coeff(j).scale_re(sign);
                match self.coeff_ref(j) {
                    Some(a) => a.add(&b),
                    None => Ok(b),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut op = Self {
            lattice: self.lattice,
            dim: self.dim,
            lo,
            coeffs,
            exact_min: self.exact_min.max(other.exact_min),
            exact_max: self.exact_max.min(other.exact_max),
        };
        op.restrict_to_exact();
        Ok(op)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut op = self.clone();
        op.coeffs = op.coeffs.iter().map(|x| x.scale(c)).collect();
        op.trim();
        op
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Highest power actually present in the full (untruncated) operator.
    fn true_hi(&self) -> i64 {
        if self.exact_max < UNBOUNDED {
            UNBOUNDED
        } else if self.is_zero() {
            -UNBOUNDED
        } else {
            self.hi()
        }
    }

    fn true_lo(&self) -> i64 {
        if self.exact_min > -UNBOUNDED {
            -UNBOUNDED
        } else if self.is_zero() {
            UNBOUNDED
        } else {
            self.lo
        }
    }

    /// Operator product using `(XΛ^i)(YΛ^j) = X·Y(x+iε) Λ^{i+j}`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        // unknown terms of one factor meet the full extent of the other
        let lower = |missing: i64, extent: i64| {
            if missing <= -UNBOUNDED || extent <= -UNBOUNDED {
                -UNBOUNDED
            } else if extent >= UNBOUNDED {
                UNBOUNDED
            } else {
                missing + extent
            }
        };
        let upper = |missing: i64, extent: i64| -lower(-missing, -extent);
        let exact_min = lower(self.exact_min, other.true_hi()).max(lower(other.exact_min, self.true_hi()));
        let exact_max = upper(self.exact_max, other.true_lo()).min(upper(other.exact_max, self.true_lo()));
        if self.is_zero() || other.is_zero() {
            let mut z = Self::zero(self.lattice, self.dim);
            z.exact_min = exact_min;
            z.exact_max = exact_max;
            return Ok(z);
        }
        let lo = self.lo + other.lo;
        let hi = self.hi() + other.hi();
        let mut acc: Vec<MatrixField> = (lo..=hi).map(|_| MatrixField::zeros(self.lattice, self.dim)).collect();
        for (i, x) in self.terms() {
            for (j, y) in other.terms() {
                let p = i + j;
                if p < exact_min || p > exact_max {
                    continue;
                }
                let term = x.mul(&y.shift(i))?;
                let slot = &mut acc[(p - lo) as usize];
                *slot = slot.add(&term)?;
            }
        }
        let mut op = Self { lattice: self.lattice, dim: self.dim, lo, coeffs: acc, exact_min, exact_max };
        op.restrict_to_exact();
        Ok(op)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Restrict storage to powers in `[lo, hi]`.
    pub fn window(&self, lo: i64, hi: i64) -> Self {
        let mut op = self.clone();
        let keep_lo = lo.max(self.lo);
        let keep_hi = hi.min(self.hi());
        if keep_lo > keep_hi {
            op.coeffs.clear();
            op.lo = 0;
        } else {
            op.coeffs = self.coeffs[(keep_lo - self.lo) as usize..=(keep_hi - self.lo) as usize].to_vec();
            op.lo = keep_lo;
        }
        op.trim();
        op
    }

    /// `(A_{≥0}, A_{<0})`. Both halves inherit the exact range.
    pub fn split(&self) -> (Self, Self) {
        (self.plus(), self.minus())
    }

    pub fn plus(&self) -> Self {
        let mut p = self.window(0, UNBOUNDED);
        if self.exact_min <= 0 {
            p.exact_min = -UNBOUNDED;
        }
        p
    }

    pub fn minus(&self) -> Self {
        let mut m = self.window(-UNBOUNDED, -1);
        if self.exact_max >= -1 {
            m.exact_max = UNBOUNDED;
        }
        m
    }

    pub fn residue(&self) -> MatrixField {
        self.coeff(0)
    }

    pub fn trace_residue(&self) -> Vec<Complex64> {
        self.residue().trace()
    }

    /// `(Aφ)(x) = Σ_j X_j(x) φ(x+jε)`.
    pub fn apply(&self, phi: &MatrixField) -> Result<MatrixField> {
        let mut out = MatrixField::zeros(self.lattice, phi.dim());
        for (j, x) in self.terms() {
            out = out.add(&x.mul(&phi.shift(j))?)?;
        }
        Ok(out)
    }

    /// `B*(g) = Σ_m g(x-mε) b_m(x-mε)` for a non-negative band.
    pub fn adjoint_star(&self, g: &MatrixField) -> Result<MatrixField> {
        if !self.is_zero() && self.lo < 0 {
            return Err(EmthError::NegativePowers { lo: self.lo as i32 });
        }
        self.star_sum(g)
    }

    /// `C*(g) = Σ_n g(x+nε) c_n(x+nε)` for a strictly negative operator.
    pub fn adjoint_star_negative(&self, g: &MatrixField) -> Result<MatrixField> {
        if !self.is_zero() && self.hi() >= 0 {
            return Err(EmthError::InvalidInput(format!(
                "operator has non-negative powers up to {}",
                self.hi()
            )));
        }
        self.star_sum(g)
    }

    fn star_sum(&self, g: &MatrixField) -> Result<MatrixField> {
        let mut out = MatrixField::zeros(self.lattice, self.dim);
        for (m, b) in self.terms() {
            out = out.add(&g.mul(b)?.shift(-m))?;
        }
        Ok(out)
    }

    /// Coefficient-wise x-derivative.
    pub fn derivative_x(&self) -> Self {
        let mut op = self.clone();
        op.coeffs = op.coeffs.iter().map(|c| c.derivative_x()).collect();
        op.trim();
        op
    }

    /// Largest coefficient norm over the given fine indices and powers.
    pub fn max_norm_on(&self, sites: &[usize]) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.max_norm_on(sites.iter().copied()))
            .fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.max_norm()).fold(0.0, f64::max)
    }

    /// Norm of the coefficients at powers in `[lo, hi]` on the given sites.
    pub fn band_norm_on(&self, lo: i64, hi: i64, sites: &[usize]) -> f64 {
        self.window(lo, hi).max_norm_on(sites)
    }

    /// Dense block matrix of the operator on one coset of a decaying window.
    pub fn to_dense(&self, coset: usize) -> DenseOperator {
        DenseOperator::from_operator(self, coset)
    }
}

/// An operator restricted to one coset of an open window, stored as an
/// `(M·N) x (M·N)` block matrix with block `[x, x+j] = X_j(x)`. Powers
/// reaching outside the window are dropped, which matches zero extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub sites: usize,
    pub dim: usize,
    pub matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn from_operator(op: &ShiftOperator, coset: usize) -> Self {
        let lat = op.lattice();
        let m = lat.sites();
        let n = op.dim();
        let r = lat.refine();
        let mut matrix = DMatrix::zeros(m * n, m * n);
        for (j, x) in op.terms() {
            for row in 0..m {
                let col = row as i64 + j;
                if col < 0 || col >= m as i64 {
                    continue;
                }
                let block = x.at(coset + row * r);
                matrix.view_mut((row * n, col as usize * n), (n, n)).copy_from(block);
            }
        }
        Self { sites: m, dim: n, matrix }
    }

    pub fn block_diagonal(f: &MatrixField, coset: usize) -> Self {
        Self::from_operator(&ShiftOperator::multiplication(f.clone()), coset)
    }

    /// `Λ⁻¹/(1-Λ⁻¹) = Σ_{s≥1} Λ^{-s}`.
    pub fn lower_sum(sites: usize, dim: usize) -> Self {
        Self::ones_pattern(sites, dim, |row, col| col < row)
    }

    /// `1/(1-Λ) = Σ_{s≥0} Λ^s`.
    pub fn upper_sum(sites: usize, dim: usize) -> Self {
        Self::ones_pattern(sites, dim, |row, col| col >= row)
    }

    fn ones_pattern(sites: usize, dim: usize, keep: impl Fn(usize, usize) -> bool) -> Self {
        let mut matrix = DMatrix::zeros(sites * dim, sites * dim);
        let id = Mat::identity(dim, dim);
        for row in 0..sites {
            for col in 0..sites {
                if keep(row, col) {
                    matrix.view_mut((row * dim, col * dim), (dim, dim)).copy_from(&id);
                }
            }
        }
        Self { sites, dim, matrix }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { sites: self.sites, dim: self.dim, matrix: &self.matrix * &other.matrix }
    }

    fn mask(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for row in 0..self.sites {
            for col in 0..self.sites {
                if !keep(row, col) {
                    out.matrix.view_mut((row * n, col * n), (n, n)).fill(Complex64::new(0.0, 0.0));
                }
            }
        }
        out
    }

    /// Blocks with non-negative power (column at or right of the diagonal).
    pub fn plus(&self) -> Self {
        self.mask(|row, col| col >= row)
    }

    pub fn minus(&self) -> Self {
        self.mask(|row, col| col < row)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Residuals of the four projection identities for a non-negative band `B`,
/// a strictly negative band `C` and fields `f, g`, with
/// `K₋ = Λ⁻¹/(1-Λ⁻¹)` and `K₊ = 1/(1-Λ)`:
/// `(B f K₋ g)₋ = B(f) K₋ g`, `(f K₋ g B)₋ = f K₋ B*(g)`,
/// `(C f K₊ g)₊ = C(f) K₊ g`, `(f K₊ g C)₊ = f K₊ C*(g)`.
/// Evaluated as block matrices on every coset of a decaying window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionIdentities {
    pub b_left: f64,
    pub b_right: f64,
    pub c_left: f64,
    pub c_right: f64,
}

impl ProjectionIdentities {
    pub fn max(&self) -> f64 {
        self.b_left.max(self.b_right).max(self.c_left).max(self.c_right)
    }
}

pub fn projection_identities(
    b: &ShiftOperator,
    c: &ShiftOperator,
    f: &MatrixField,
    g: &MatrixField,
) -> Result<ProjectionIdentities> {
    let lat = *b.lattice();
    if lat.boundary() != Boundary::Decaying {
        return Err(EmthError::InvalidInput("projection identities are posed on a decaying window".into()));
    }
    let bf = b.apply(f)?;
    let cf = c.apply(f)?;
    let bg = b.adjoint_star(g)?;
    let cg = c.adjoint_star_negative(g)?;
    let (m, n) = (lat.sites(), b.dim());
    let lower = DenseOperator::lower_sum(m, n);
    let upper = DenseOperator::upper_sum(m, n);
    let mut out = ProjectionIdentities { b_left: 0.0, b_right: 0.0, c_left: 0.0, c_right: 0.0 };
    for coset in 0..lat.refine() {
        let d = |op: &ShiftOperator| op.to_dense(coset);
        let diag = |x: &MatrixField| DenseOperator::block_diagonal(x, coset);
        let (bd, cd, fd, gd) = (d(b), d(c), diag(f), diag(g));
        let lhs = bd.mul(&fd).mul(&lower).mul(&gd).minus();
        out.b_left = out.b_left.max(lhs.distance(&diag(&bf).mul(&lower).mul(&gd)));
        let lhs = fd.mul(&lower).mul(&gd).mul(&bd).minus();
        out.b_right = out.b_right.max(lhs.distance(&fd.mul(&lower).mul(&diag(&bg))));
        let lhs = cd.mul(&fd).mul(&upper).mul(&gd).plus();
        out.c_left = out.c_left.max(lhs.distance(&diag(&cf).mul(&upper).mul(&gd)));
        let lhs = fd.mul(&upper).mul(&gd).mul(&cd).plus();
        out.c_right = out.c_right.max(lhs.distance(&fd.mul(&upper).mul(&diag(&cg))));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat(boundary: Boundary) -> Lattice {
        Lattice::new(8, 0.5, 2, boundary).unwrap()
    }

    fn rand_band(rng: &mut ChaCha8Rng, lattice: Lattice, lo: i64, hi: i64) -> ShiftOperator {
        let coeffs = (lo..=hi).map(|_| random_field(rng, lattice, 2, 1.0)).collect();
        ShiftOperator::band(lo, coeffs).unwrap()
    }

    #[test]
    fn projection_identities_hold() {
        let l = lat(Boundary::Decaying);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = rand_band(&mut rng, l, 0, 2);
        let c = rand_band(&mut rng, l, -3, -1);
        let f = random_field(&mut rng, l, 2, 1.0);
        let g = random_field(&mut rng, l, 2, 1.0);
        let r = projection_identities(&b, &c, &f, &g).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
    }

    #[test]
    fn shift_times_field() {
        let l = lat(Boundary::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_field(&mut rng, l, 2, 1.0);
        let p = ShiftOperator::shift_power(l, 2, 1).mul(&ShiftOperator::monomial(v.clone(), -1)).unwrap();
        assert_eq!(p.lo(), 0);
        assert_eq!(p.hi(), 0);
        assert_eq!(p.coeff(0), v.shift(1));
    }

    #[test]
    fn lax_square_diagonal_coefficient() {
        let l = lat(Boundary::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_field(&mut rng, l, 2, 1.0);
        let v = random_field(&mut rng, l, 2, 1.0);
        let lax = ShiftOperator::lax(&u, &v).unwrap();
        let sq = lax.mul(&lax).unwrap();
        let want = v.shift(1).add(&u.mul(&u).unwrap()).unwrap().add(&v).unwrap();
        assert!(sq.coeff(0).sub(&want).unwrap().max_norm() < 1e-14);
        assert_eq!((sq.lo(), sq.hi()), (-2, 2));
    }

    #[test]
    fn split_of_lax() {
        let l = lat(Boundary::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&mut rng, l, 2, 1.0);
        let v = random_field(&mut rng, l, 2, 1.0);
        let (p, m) = ShiftOperator::lax(&u, &v).unwrap().split();
        assert_eq!((p.lo(), p.hi()), (0, 1));
        assert_eq!(p.coeff(0), u);
        assert_eq!((m.lo(), m.hi()), (-1, -1));
        assert_eq!(m.coeff(-1), v);
        assert!(ShiftOperator::shift_power(l, 2, 2).minus().is_zero());
    }

    #[test]
    fn residue_examples() {
        let l = lat(Boundary::Periodic);
        assert!(ShiftOperator::shift_power(l, 2, 1).residue().max_norm() == 0.0);
        let u = MatrixField::constant(l, Mat::identity(2, 2) * Complex64::new(3.0, 0.0));
        let v = MatrixField::identity(l, 2);
        let lax = ShiftOperator::lax(&u, &v).unwrap();
        assert_eq!(lax.residue(), u);
    }

    #[test]
    fn apply_lax_on_vacuum_exponential() {
        let l = Lattice::new(8, 0.5, 1, Boundary::Periodic).unwrap();
        let z: f64 = 1.3;
        // periodic wrap spoils the exponential at the seam; check interior sites
        let phi = MatrixField::from_fn(l, 2, |x| Mat::identity(2, 2) * Complex64::new(z.powf(x / 0.5), 0.0));
        let lax = ShiftOperator::lax(&MatrixField::zeros(l, 2), &MatrixField::identity(l, 2)).unwrap();
        let out = lax.apply(&phi).unwrap();
        for i in 1..7 {
            let want = phi.at(i) * Complex64::new(z + 1.0 / z, 0.0);
            assert!((out.at(i) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_star_examples() {
        let l = lat(Boundary::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_field(&mut rng, l, 2, 1.0);
        let b = random_field(&mut rng, l, 2, 1.0);
        let out = ShiftOperator::multiplication(b.clone()).adjoint_star(&g).unwrap();
        assert_eq!(out, g.mul(&b).unwrap());
        let out = ShiftOperator::shift_power(l, 2, 1).adjoint_star(&g).unwrap();
        assert_eq!(out, g.shift(-1));
        let neg = ShiftOperator::shift_power(l, 2, -1);
        assert!(matches!(neg.adjoint_star(&g), Err(EmthError::NegativePowers { lo: -1 })));
    }

    #[test]
    fn series_truncation_is_recorded() {
        let l = lat(Boundary::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = vec![MatrixField::identity(l, 2)];
        a.extend((0..4).map(|_| random_field(&mut rng, l, 2, 1.0)));
        let s = ShiftOperator::series(Direction::Lower, a).unwrap();
        assert_eq!(s.truncation_order(), Some(4));
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.truncation_order(), Some(4));
        assert_eq!(sq.lo(), -4);
        // a band factor of height one costs one order
        let lax = rand_band(&mut rng, l, -1, 1);
        let p = lax.mul(&s).unwrap();
        assert_eq!(p.exact_range(), (Some(-3), None));
        assert_eq!(p.lo(), -3);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let l = lat(Boundary::Periodic);
        let a = ShiftOperator::identity(l, 2);
        let b = ShiftOperator::identity(l, 3);
        assert!(matches!(a.mul(&b), Err(EmthError::DimensionMismatch { .. })));
    }

    #[test]
    fn product_is_not_commutative() {
        let l = lat(Boundary::Periodic);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = rand_band(&mut rng, l, -1, 1);
        let b = rand_band(&mut rng, l, -1, 1);
        let c = a.commutator(&b).unwrap();
        assert!(c.max_norm() > 1e-3);
    }
}
