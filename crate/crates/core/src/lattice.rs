//! Lattice geometry and matrix-valued fields.
//!
//! A [`Lattice`] is a window of `M` shift cells of width `eps`, each split
//! into `r` fine cells so that spatial derivatives can be resolved below the
//! shift scale. The shift operator moves a field by exactly `r` fine cells;
//! the `r` residue classes of the fine index are therefore independent
//! sublattices ("cosets") as far as shifts are concerned.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EmthError, Result};

pub type Mat = DMatrix<Complex64>;

/// Condition number cutoff used for every pointwise inverse in the crate.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Index arithmetic modulo the fine length.
    Periodic,
    /// Reads outside the window return the zero matrix.
    Decaying,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    sites: usize,
    eps: f64,
    refine: usize,
    boundary: Boundary,
    origin: f64,
}

impl Lattice {
    pub fn new(sites: usize, eps: f64, refine: usize, boundary: Boundary) -> Result<Self> {
        Self::with_origin(sites, eps, refine, boundary, 0.0)
    }

    pub fn with_origin(
        sites: usize,
        eps: f64,
        refine: usize,
        boundary: Boundary,
        origin: f64,
    ) -> Result<Self> {
        if sites < 4 {
            return Err(EmthError::InvalidLattice(format!("need M >= 4, got {sites}")));
        }
        if refine < 1 {
            return Err(EmthError::InvalidLattice("refinement must be >= 1".into()));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(EmthError::InvalidLattice(format!("step must be > 0, got {eps}")));
        }
        Ok(Self { sites, eps, refine, boundary, origin })
    }

    /// Window centred on zero.
    pub fn centered(sites: usize, eps: f64, refine: usize, boundary: Boundary) -> Result<Self> {
        Self::with_origin(sites, eps, refine, boundary, -(sites as f64) * eps / 2.0)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn refine(&self) -> usize {
        self.refine
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Fine grid spacing `eps / r`.
    pub fn delta(&self) -> f64 {
        self.eps / self.refine as f64
    }

    pub fn fine_len(&self) -> usize {
        self.sites * self.refine
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.delta()
    }

    pub fn coset(&self, i: usize) -> usize {
        i % self.refine
    }

    /// Fine index reached from `i` by `cells` fine steps, or `None` when the
    /// read leaves a decaying window.
    pub fn fine_offset(&self, i: usize, cells: i64) -> Option<usize> {
        let len = self.fine_len() as i64;
        let j = i as i64 + cells;
        match self.boundary {
            Boundary::Periodic => Some(j.rem_euclid(len) as usize),
            Boundary::Decaying => (0..len).contains(&j).then_some(j as usize),
        }
    }

    /// Fine index reached from `i` by `k` applications of the shift.
    pub fn shifted(&self, i: usize, k: i64) -> Option<usize> {
        self.fine_offset(i, k * self.refine as i64)
    }

    /// Fine indices at least `margin` shift cells away from both window edges.
    /// Periodic lattices have no edges.
    pub fn interior(&self, margin: usize) -> std::ops::Range<usize> {
        match self.boundary {
            Boundary::Periodic => 0..self.fine_len(),
            Boundary::Decaying => {
                let m = (margin * self.refine).min(self.fine_len() / 2);
                m..self.fine_len() - m
            }
        }
    }

    /// [`Lattice::interior`] as a list; an empty list is an error.
    pub fn check_sites(&self, margin: usize) -> Result<Vec<usize>> {
        let sites: Vec<usize> = self.interior(margin).collect();
        if sites.is_empty() {
            return Err(EmthError::InvalidInput(format!(
                "window of {} cells has no sites {margin} cells from its edges",
                self.sites
            )));
        }
        Ok(sites)
    }

    pub fn same_as(&self, other: &Lattice) -> bool {
        self == other
    }
}

pub fn condition_number(m: &Mat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse guarded by [`MAX_CONDITION`].
pub fn guarded_inverse(m: &Mat) -> Option<Mat> {
    if !(condition_number(m) < MAX_CONDITION) {
        return None;
    }
    m.clone().try_inverse()
}

/// `E_kk` for 1-based `k`.
pub fn unit_projector(n: usize, k: usize) -> Result<Mat> {
    if k == 0 || k > n {
        return Err(EmthError::ComponentOutOfRange { k, n });
    }
    let mut e = Mat::zeros(n, n);
    e[(k - 1, k - 1)] = Complex64::new(1.0, 0.0);
    Ok(e)
}

/// A lattice-indexed field of `N x N` complex matrices, optionally carrying
/// its exact x-derivative. The derivative is propagated through every
/// algebraic operation, so fields built from analytic seeds keep exact
/// derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    lattice: Lattice,
    dim: usize,
    values: Vec<Mat>,
    dx: Option<Vec<Mat>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumVariant {
    /// `(Λ-1)^{-1}`
    ForwardDifference,
    /// `(1-Λ^{-1})^{-1} Λ^{-1}`
    BackwardSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanPolicy {
    /// Nonzero lattice mean on a periodic lattice is an error.
    Reject,
    /// Remove the mean before inverting.
    Project,
}

impl MatrixField {
    pub fn zeros(lattice: Lattice, dim: usize) -> Self {
        Self::constant(lattice, Mat::zeros(dim, dim))
    }

    pub fn identity(lattice: Lattice, dim: usize) -> Self {
        Self::constant(lattice, Mat::identity(dim, dim))
    }

    /// Constant field; its derivative is exactly zero.
    pub fn constant(lattice: Lattice, m: Mat) -> Self {
        let dim = m.nrows();
        let n = lattice.fine_len();
        Self {
            lattice,
            dim,
            values: vec![m; n],
            dx: Some(vec![Mat::zeros(dim, dim); n]),
        }
    }

    pub fn from_values(lattice: Lattice, values: Vec<Mat>) -> Result<Self> {
        if values.len() != lattice.fine_len() {
            return Err(EmthError::DimensionMismatch {
                expected: lattice.fine_len(),
                found: values.len(),
            });
        }
        let dim = values.first().map(|m| m.nrows()).unwrap_or(0);
        if let Some(bad) = values.iter().find(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(EmthError::DimensionMismatch { expected: dim, found: bad.nrows() });
        }
        Ok(Self { lattice, dim, values, dx: None })
    }

    /// Sampled field without derivative information.
    pub fn from_fn(lattice: Lattice, dim: usize, f: impl Fn(f64) -> Mat) -> Self {
        let values = (0..lattice.fine_len()).map(|i| f(lattice.x(i))).collect();
        Self { lattice, dim, values, dx: None }
    }

    /// Analytic seed: values and exact derivative from closed forms.
    pub fn from_fn_with_derivative(
        lattice: Lattice,
        dim: usize,
        f: impl Fn(f64) -> Mat,
        df: impl Fn(f64) -> Mat,
    ) -> Self {
        let n = lattice.fine_len();
        let values = (0..n).map(|i| f(lattice.x(i))).collect();
        let dx = (0..n).map(|i| df(lattice.x(i))).collect();
        Self { lattice, dim, values, dx: Some(dx) }
    }

    /// Values plus optional exact derivative, as produced by a site march.
    pub fn from_parts(lattice: Lattice, values: Vec<Mat>, dx: Option<Vec<Mat>>) -> Result<Self> {
        let f = Self::from_values(lattice, values)?;
        match dx {
            Some(d) => f.with_derivative(d),
            None => Ok(f),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn derivative_values(&self) -> Option<&[Mat]> {
        self.dx.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn at(&self, i: usize) -> &Mat {
        &self.values[i]
    }

    pub fn set(&mut self, i: usize, m: Mat) {
        self.values[i] = m;
        self.dx = None;
    }

    pub fn has_exact_derivative(&self) -> bool {
        self.dx.is_some()
    }

    /// Drop derivative information, forcing finite differences downstream.
    pub fn without_derivative(mut self) -> Self {
        self.dx = None;
        self
    }

    pub fn with_derivative(mut self, dx: Vec<Mat>) -> Result<Self> {
        if dx.len() != self.values.len() {
            return Err(EmthError::DimensionMismatch { expected: self.values.len(), found: dx.len() });
        }
        self.dx = Some(dx);
        Ok(self)
    }

    fn check_compatible(&self, other: &MatrixField) -> Result<()> {
        if self.dim != other.dim {
            return Err(EmthError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if !self.lattice.same_as(&other.lattice) {
            return Err(EmthError::LatticeMismatch);
        }
        Ok(())
    }

    /// Value read at fine index `i` shifted by `k` cells, with the boundary
    /// policy applied.
    pub fn read(&self, i: usize, k: i64) -> Mat {
        match self.lattice.shifted(i, k) {
            Some(j) => self.values[j].clone(),
            None => Mat::zeros(self.dim, self.dim),
        }
    }

    fn read_dx(dx: &[Mat], lattice: &Lattice, dim: usize, i: usize, k: i64) -> Mat {
        match lattice.shifted(i, k) {
            Some(j) => dx[j].clone(),
            None => Mat::zeros(dim, dim),
        }
    }

    /// `result(x) = f(x + k eps)`.
    pub fn shift(&self, k: i64) -> MatrixField {
        if k == 0 {
            return self.clone();
        }
        let n = self.len();
        let values = (0..n).map(|i| self.read(i, k)).collect();
        let dx = self.dx.as_ref().map(|d| {
            (0..n)
                .map(|i| Self::read_dx(d, &self.lattice, self.dim, i, k))
                .collect()
        });
        MatrixField { lattice: self.lattice, dim: self.dim, values, dx }
    }

    fn zip_with(
        &self,
        other: &MatrixField,
        f: impl Fn(&Mat, &Mat) -> Mat,
        df: impl Fn(&Mat, &Mat, &Mat, &Mat) -> Mat,
    ) -> Result<MatrixField> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect();
        let dx = match (&self.dx, &other.dx) {
            (Some(da), Some(db)) => Some(
                (0..self.len())
                    .map(|i| df(&self.values[i], &da[i], &other.values[i], &db[i]))
                    .collect(),
            ),
            _ => None,
        };
        Ok(MatrixField { lattice: self.lattice, dim: self.dim, values, dx })
    }

    pub fn add(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_with(other, |a, b| a + b, |_, da, _, db| da + db)
    }

    pub fn sub(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_with(other, |a, b| a - b, |_, da, _, db| da - db)
    }

    /// Pointwise matrix product `self(x) * other(x)`.
    pub fn mul(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_with(other, |a, b| a * b, |a, da, b, db| da * b + a * db)
    }

    pub fn scale(&self, c: Complex64) -> MatrixField {
        MatrixField {
            lattice: self.lattice,
            dim: self.dim,
            values: self.values.iter().map(|m| m * c).collect(),
            dx: self.dx.as_ref().map(|d| d.iter().map(|m| m * c).collect()),
        }
    }

    pub fn scale_re(&self, c: f64) -> MatrixField {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Left multiplication by a constant matrix.
    pub fn left_const(&self, m: &Mat) -> MatrixField {
        MatrixField {
            lattice: self.lattice,
            dim: self.dim,
            values: self.values.iter().map(|v| m * v).collect(),
            dx: self.dx.as_ref().map(|d| d.iter().map(|v| m * v).collect()),
        }
    }

    pub fn right_const(&self, m: &Mat) -> MatrixField {
        MatrixField {
            lattice: self.lattice,
            dim: self.dim,
            values: self.values.iter().map(|v| v * m).collect(),
            dx: self.dx.as_ref().map(|d| d.iter().map(|v| v * m).collect()),
        }
    }

    pub fn transpose(&self) -> MatrixField {
        MatrixField {
            lattice: self.lattice,
            dim: self.dim,
            values: self.values.iter().map(|v| v.transpose()).collect(),
            dx: self.dx.as_ref().map(|d| d.iter().map(|v| v.transpose()).collect()),
        }
    }

    /// Pointwise inverse, failing on the first site whose condition number
    /// exceeds [`MAX_CONDITION`]. The error carries that fine index.
    pub fn try_inverse(&self) -> std::result::Result<MatrixField, usize> {
        let mut values = Vec::with_capacity(self.len());
        for (i, m) in self.values.iter().enumerate() {
            values.push(guarded_inverse(m).ok_or(i)?);
        }
        let dx = self.dx.as_ref().map(|d| {
            (0..self.len())
                .map(|i| -(&values[i] * &d[i] * &values[i]))
                .collect()
        });
        Ok(MatrixField { lattice: self.lattice, dim: self.dim, values, dx })
    }

    /// Sites (fine indices) whose matrices are numerically singular.
    pub fn singular_sites(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, m)| !(condition_number(m) < MAX_CONDITION))
            .map(|(i, _)| i)
            .collect()
    }

    /// Spatial derivative: exact when the field carries one, otherwise the
    /// second-order central difference on the fine grid (one-sided
    /// second-order stencils at the ends of a decaying window).
    pub fn derivative_x(&self) -> MatrixField {
        if let Some(d) = &self.dx {
            return MatrixField { lattice: self.lattice, dim: self.dim, values: d.clone(), dx: None };
        }
        let lat = self.lattice;
        let h = lat.delta();
        let n = self.len();
        let values = (0..n)
            .map(|i| {
                match (lat.fine_offset(i, -1), lat.fine_offset(i, 1)) {
                    (Some(a), Some(b)) => (&self.values[b] - &self.values[a]) / Complex64::new(2.0 * h, 0.0),
                    (None, Some(b)) => {
                        let c = lat.fine_offset(i, 2).unwrap_or(b);
                        (&self.values[b] * Complex64::new(4.0, 0.0)
                            - &self.values[i] * Complex64::new(3.0, 0.0)
                            - &self.values[c])
                            / Complex64::new(2.0 * h, 0.0)
                    }
                    (Some(a), None) => {
                        let c = lat.fine_offset(i, -2).unwrap_or(a);
                        (&self.values[i] * Complex64::new(3.0, 0.0)
                            - &self.values[a] * Complex64::new(4.0, 0.0)
                            + &self.values[c])
                            / Complex64::new(2.0 * h, 0.0)
                    }
                    (None, None) => Mat::zeros(self.dim, self.dim),
                }
            })
            .collect();
        MatrixField { lattice: lat, dim: self.dim, values, dx: None }
    }

    /// Per-site trace.
    pub fn trace(&self) -> Vec<Complex64> {
        self.values.iter().map(|m| m.trace()).collect()
    }

    pub fn entry(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.values.iter().map(|m| m[(i, j)]).collect()
    }

    /// Largest Frobenius norm over the given fine indices.
    pub fn max_norm_on(&self, sites: impl IntoIterator<Item = usize>) -> f64 {
        sites.into_iter().map(|i| self.values[i].norm()).fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm_on(0..self.len())
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Solve `(Λ-1) g = f`.
    ///
    /// On a decaying window the solution is the left running sum
    /// `g(x) = Σ_{s≥1} f(x - sε)` (zero left tail); both variants name this
    /// same operator. On a periodic lattice the zero-mean pseudo-inverse is
    /// used per coset; a nonzero mean is rejected unless projection is asked
    /// for. The exact derivative, if present, is carried through.
    pub fn sum_inverse(&self, _variant: SumVariant, policy: MeanPolicy) -> Result<MatrixField> {
        let values = sum_inverse_values(&self.lattice, self.dim, &self.values, policy)?;
        let dx = match &self.dx {
            Some(d) => Some(sum_inverse_values(&self.lattice, self.dim, d, MeanPolicy::Project)?),
            None => None,
        };
        Ok(MatrixField { lattice: self.lattice, dim: self.dim, values, dx })
    }

    /// Per-coset lattice mean (periodic sense).
    pub fn coset_means(&self) -> Vec<Mat> {
        let lat = &self.lattice;
        let r = lat.refine();
        (0..r)
            .map(|c| {
                let mut acc = Mat::zeros(self.dim, self.dim);
                for m in 0..lat.sites() {
                    acc += &self.values[c + m * r];
                }
                acc / Complex64::new(lat.sites() as f64, 0.0)
            })
            .collect()
    }
}

fn sum_inverse_values(lat: &Lattice, dim: usize, f: &[Mat], policy: MeanPolicy) -> Result<Vec<Mat>> {
    let r = lat.refine();
    let m = lat.sites();
    let mut g = vec![Mat::zeros(dim, dim); f.len()];
    match lat.boundary() {
        Boundary::Decaying => {
            for c in 0..r {
                let mut acc = Mat::zeros(dim, dim);
                for s in 0..m {
                    let i = c + s * r;
                    g[i] = acc.clone();
                    acc += &f[i];
                }
            }
        }
        Boundary::Periodic => {
            for c in 0..r {
                let mut mean = Mat::zeros(dim, dim);
                for s in 0..m {
                    mean += &f[c + s * r];
                }
                mean /= Complex64::new(m as f64, 0.0);
                let scale = (0..m).map(|s| f[c + s * r].norm()).fold(1.0, f64::max);
                if policy == MeanPolicy::Reject && mean.norm() > 1e-12 * scale {
                    return Err(EmthError::SummationObstruction { coset: c, mean: mean.norm() });
                }
                let mut acc = Mat::zeros(dim, dim);
                let mut total = Mat::zeros(dim, dim);
                for s in 0..m {
                    let i = c + s * r;
                    g[i] = acc.clone();
                    total += &acc;
                    acc += &f[i] - &mean;
                }
                let gmean = total / Complex64::new(m as f64, 0.0);
                for s in 0..m {
                    g[c + s * r] -= &gmean;
                }
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_mat(n: usize, a: f64) -> Mat {
        Mat::identity(n, n) * c(a)
    }

    #[test]
    fn lattice_rejects_small_windows() {
        assert!(Lattice::new(3, 1.0, 1, Boundary::Periodic).is_err());
        assert!(Lattice::new(4, 0.0, 1, Boundary::Periodic).is_err());
        assert!(Lattice::new(4, 1.0, 0, Boundary::Periodic).is_err());
    }

    #[test]
    fn shift_zero_is_identity() {
        let lat = Lattice::new(6, 0.5, 2, Boundary::Periodic).unwrap();
        let f = MatrixField::from_fn(lat, 2, |x| scalar_mat(2, x.sin()));
        assert_eq!(f.shift(0), f);
    }

    #[test]
    fn inverse_shifts_compose_on_periodic() {
        let lat = Lattice::new(6, 0.5, 2, Boundary::Periodic).unwrap();
        let f = MatrixField::from_fn(lat, 2, |x| scalar_mat(2, x * x));
        assert_eq!(f.shift(1).shift(-1), f);
    }

    #[test]
    fn shift_of_linear_field() {
        // f(x) = x I on {0, eps, 2eps, 3eps}; shift by one reads eps at the origin
        let eps = 0.25;
        let lat = Lattice::new(4, eps, 1, Boundary::Periodic).unwrap();
        let f = MatrixField::from_fn(lat, 1, |x| scalar_mat(1, x));
        let g = f.shift(1);
        assert!((g.at(0)[(0, 0)] - c(eps)).norm() < 1e-15);
    }

    #[test]
    fn decaying_reads_zero_outside() {
        let lat = Lattice::new(4, 1.0, 1, Boundary::Decaying).unwrap();
        let f = MatrixField::identity(lat, 2);
        let g = f.shift(1);
        assert_eq!(g.at(3), &Mat::zeros(2, 2));
        assert_eq!(g.at(2), &Mat::identity(2, 2));
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let lat = Lattice::new(8, 0.5, 4, Boundary::Periodic).unwrap();
        let f = MatrixField::constant(lat, scalar_mat(2, 3.0));
        assert_eq!(f.derivative_x().max_norm(), 0.0);
        let g = f.without_derivative();
        assert!(g.derivative_x().max_norm() < 1e-12);
    }

    #[test]
    fn analytic_exponential_derivative_is_exact() {
        let a = 0.7;
        let lat = Lattice::new(8, 0.5, 4, Boundary::Decaying).unwrap();
        let f = MatrixField::from_fn_with_derivative(
            lat,
            2,
            |x| scalar_mat(2, (a * x).exp()),
            |x| scalar_mat(2, a * (a * x).exp()),
        );
        let d = f.derivative_x();
        for i in 0..lat.fine_len() {
            let want = scalar_mat(2, a * (a * lat.x(i)).exp());
            assert_eq!(d.at(i), &want);
        }
    }

    #[test]
    fn sampled_sine_derivative_within_taylor_bound() {
        // delta = 1e-3: error bounded by delta^2/6
        let lat = Lattice::new(10, 0.01, 10, Boundary::Periodic).unwrap();
        let f = MatrixField::from_fn(lat, 1, |x| scalar_mat(1, x.sin()));
        // periodic wrap breaks smoothness at the seam; check away from it
        let d = f.derivative_x();
        for i in 1..lat.fine_len() - 1 {
            let err = (d.at(i)[(0, 0)] - c(lat.x(i).cos())).norm();
            assert!(err < 1e-6, "site {i}: {err}");
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_differences() {
        let lat = Lattice::new(8, 0.4, 8, Boundary::Decaying).unwrap();
        let f = MatrixField::from_fn_with_derivative(
            lat,
            1,
            |x| scalar_mat(1, x.sin()),
            |x| scalar_mat(1, x.cos()),
        );
        let exact = f.derivative_x();
        let fd = f.clone().without_derivative().derivative_x();
        let d = lat.delta();
        for i in 1..lat.fine_len() - 1 {
            let err = (exact.at(i) - fd.at(i)).norm();
            assert!(err <= 10.0 * d * d, "site {i}: {err}");
        }
    }

    #[test]
    fn product_rule_propagates() {
        let lat = Lattice::new(6, 0.3, 4, Boundary::Decaying).unwrap();
        let f = MatrixField::from_fn_with_derivative(lat, 1, |x| scalar_mat(1, x * x), |x| scalar_mat(1, 2.0 * x));
        let g = MatrixField::from_fn_with_derivative(lat, 1, |x| scalar_mat(1, x.exp()), |x| scalar_mat(1, x.exp()));
        let p = f.mul(&g).unwrap().derivative_x();
        for i in 0..lat.fine_len() {
            let x = lat.x(i);
            let want = (2.0 * x + x * x) * x.exp();
            assert!((p.at(i)[(0, 0)] - c(want)).norm() < 1e-12);
        }
    }

    #[test]
    fn sum_inverse_of_zero_is_zero() {
        let lat = Lattice::new(6, 1.0, 2, Boundary::Periodic).unwrap();
        let g = MatrixField::zeros(lat, 2)
            .sum_inverse(SumVariant::ForwardDifference, MeanPolicy::Reject)
            .unwrap();
        assert_eq!(g.max_norm(), 0.0);
    }

    #[test]
    fn sum_inverse_of_point_source_telescopes() {
        let lat = Lattice::new(8, 1.0, 1, Boundary::Decaying).unwrap();
        let a = Mat::from_fn(2, 2, |i, j| c((1 + i + 2 * j) as f64));
        let mut vals = vec![Mat::zeros(2, 2); 8];
        vals[3] = a.clone();
        let f = MatrixField::from_values(lat, vals).unwrap();
        let g = f.sum_inverse(SumVariant::BackwardSeries, MeanPolicy::Reject).unwrap();
        for i in 0..8 {
            let want = if i > 3 { a.clone() } else { Mat::zeros(2, 2) };
            assert_eq!(g.at(i), &want);
        }
    }

    #[test]
    fn periodic_nonzero_mean_is_obstructed() {
        let lat = Lattice::new(6, 1.0, 1, Boundary::Periodic).unwrap();
        let f = MatrixField::identity(lat, 2);
        let err = f.sum_inverse(SumVariant::ForwardDifference, MeanPolicy::Reject).unwrap_err();
        assert!(matches!(err, EmthError::SummationObstruction { .. }));
        let g = f.sum_inverse(SumVariant::ForwardDifference, MeanPolicy::Project).unwrap();
        assert!(g.max_norm() < 1e-14);
    }

    #[test]
    fn periodic_inverse_recovers_difference_up_to_constant() {
        let lat = Lattice::new(9, 0.5, 3, Boundary::Periodic).unwrap();
        let h = MatrixField::from_fn(lat, 2, |x| {
            Mat::from_fn(2, 2, |i, j| Complex64::new((x * (1 + i) as f64).sin(), (x + j as f64).cos()))
        });
        let f = h.shift(1).sub(&h).unwrap();
        let g = f.sum_inverse(SumVariant::ForwardDifference, MeanPolicy::Reject).unwrap();
        let diff = g.sub(&h).unwrap();
        // the difference is constant along each coset
        for i in 0..lat.fine_len() {
            let j = lat.shifted(i, 1).unwrap();
            assert!((diff.at(i) - diff.at(j)).norm() < 1e-12);
        }
        let back = g.shift(1).sub(&g).unwrap().sub(&f).unwrap();
        assert!(back.max_norm() < 1e-12);
    }
}
