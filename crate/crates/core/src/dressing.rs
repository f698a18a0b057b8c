//! Dressing series, the operators built from them, and logarithms of `L`.
//!
//! `S = I + ω₁Λ⁻¹ + …` and `S̄ = ω̄₀ + ω̄₁Λ + …` solve `LS = SΛ` and
//! `LS̄ = S̄Λ⁻¹`. Both are fixed by gauge: every `ω_k` vanishes on the first
//! cell of the window, `ω̄₀` equals `I` there and the higher `ω̄_m` vanish.

use num_complex::Complex64;

use crate::diffop::{Direction, ShiftOperator};
use crate::error::{EmthError, Result};
use crate::lattice::{Boundary, Lattice, Mat, MatrixField, MeanPolicy, SumVariant};

/// Default truncation order of the dressing series.
pub const DEFAULT_ORDER: usize = 6;

/// The Lax operator `L = Λ + u + vΛ⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxState {
    pub u: MatrixField,
    pub v: MatrixField,
}

impl LaxState {
    pub fn new(u: MatrixField, v: MatrixField) -> Result<Self> {
        if u.dim() != v.dim() {
            return Err(EmthError::DimensionMismatch { expected: u.dim(), found: v.dim() });
        }
        if u.lattice() != v.lattice() {
            return Err(EmthError::LatticeMismatch);
        }
        Ok(Self { u, v })
    }

    /// `u = 0`, `v = c I`.
    pub fn vacuum(lattice: Lattice, dim: usize, c: f64) -> Self {
        Self {
            u: MatrixField::zeros(lattice, dim),
            v: MatrixField::constant(lattice, Mat::identity(dim, dim) * Complex64::new(c, 0.0)),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        self.u.lattice()
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn lax(&self) -> ShiftOperator {
        ShiftOperator::lax(&self.u, &self.v).expect("fields share lattice and dimension")
    }

    /// `L^j` for `j ≥ 0`.
    pub fn lax_power(&self, j: usize) -> ShiftOperator {
        let l = self.lax();
        let mut p = ShiftOperator::identity(*self.lattice(), self.dim());
        for _ in 0..j {
            p = p.mul(&l).expect("compatible");
        }
        p
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// `c_j = 1 + 1/2 + … + 1/j`, with `c_0 = 0`.
pub fn harmonic(j: usize) -> f64 {
    (1..=j).map(|i| 1.0 / i as f64).sum()
}

pub fn factorial(j: usize) -> f64 {
    (1..=j).map(|i| i as f64).product()
}

/// Fine indices on which dressing identities are checked: away from the
/// window edges by enough cells that gauge seeds and truncated shifts at
/// order `order` do not reach.
pub fn check_sites(lattice: &Lattice, order: usize) -> Result<Vec<usize>> {
    lattice.check_sites(order + 2)
}

/// `S` at truncation order `order`. Each `ω_k` is obtained from
/// `(Λ - 1)ω_k = -uω_{k-1} - vω_{k-2}(x-ε)` through the summation kernel.
pub fn compute_s(state: &LaxState, order: usize, policy: MeanPolicy) -> Result<ShiftOperator> {
    let omegas = s_coefficients(state, order, policy)?;
    ShiftOperator::series(Direction::Lower, omegas)
}

pub fn s_coefficients(state: &LaxState, order: usize, policy: MeanPolicy) -> Result<Vec<MatrixField>> {
    let lat = *state.lattice();
    let n = state.dim();
    let mut w = vec![MatrixField::identity(lat, n)];
    for k in 1..=order {
        let mut src = state.u.mul(&w[k - 1])?.scale_re(-1.0);
        if k >= 2 {
            src = src.sub(&state.v.mul(&w[k - 2].shift(-1))?)?;
        }
        w.push(src.sum_inverse(SumVariant::ForwardDifference, policy)?);
    }
    Ok(w)
}

/// `S̄` at truncation order `order`, marching
/// `ω̄_m(x) = v ω̄_m(x-ε) + u ω̄_{m-1}(x) + ω̄_{m-2}(x+ε)` left to right.
pub fn compute_sbar(state: &LaxState, order: usize) -> Result<ShiftOperator> {
    ShiftOperator::series(Direction::Upper, sbar_coefficients(state, order)?)
}

pub fn sbar_coefficients(state: &LaxState, order: usize) -> Result<Vec<MatrixField>> {
    if let Some(&site) = state.v.singular_sites().first() {
        return Err(EmthError::BarredDressingUndefined { site });
    }
    let lat = *state.lattice();
    let n = state.dim();
    let mut w: Vec<MatrixField> = Vec::with_capacity(order + 1);
    for m in 0..=order {
        let mut src = MatrixField::zeros(lat, n);
        if m >= 1 {
            src = src.add(&state.u.mul(&w[m - 1])?)?;
        }
        if m >= 2 {
            src = src.add(&w[m - 2].shift(1))?;
        }
        let seed = if m == 0 { Mat::identity(n, n) } else { Mat::zeros(n, n) };
        w.push(march(&state.v, &src, &seed)?);
    }
    Ok(w)
}

/// Solve `y(x) = a(x) y(x-ε) + g(x)` per coset with `y = seed` on the first
/// cell, carrying exact derivatives when both inputs have them.
fn march(a: &MatrixField, g: &MatrixField, seed: &Mat) -> Result<MatrixField> {
    let lat = *a.lattice();
    let n = a.dim();
    let r = lat.refine();
    let len = lat.fine_len();
    let mut y = vec![Mat::zeros(n, n); len];
    let jets = match (a.derivative_values(), g.derivative_values()) {
        (Some(da), Some(dg)) => Some((da, dg)),
        _ => None,
    };
    let mut dy = jets.map(|_| vec![Mat::zeros(n, n); len]);
    for c in 0..r {
        y[c] = seed.clone();
        for s in 1..lat.sites() {
            let i = c + s * r;
            let p = i - r;
            y[i] = a.at(i) * &y[p] + g.at(i);
            if let (Some((da, dg)), Some(dy)) = (jets, dy.as_mut()) {
                dy[i] = &da[i] * &y[p] + a.at(i) * &dy[p] + &dg[i];
            }
        }
    }
    MatrixField::from_parts(lat, y, dy)
}

/// Order-by-order inverse of a one-sided series with invertible leading
/// coefficient `a₀`.
pub fn invert_series(t: &ShiftOperator, direction: Direction, order: usize) -> Result<ShiftOperator> {
    let a: Vec<MatrixField> = (0..=order as i64)
        .map(|k| match direction {
            Direction::Lower => t.coeff(-k),
            Direction::Upper => t.coeff(k),
        })
        .collect();
    let a0_inv = a[0].try_inverse().map_err(|site| EmthError::SingularLeading { site })?;
    let step: i64 = match direction {
        Direction::Lower => -1,
        Direction::Upper => 1,
    };
    let mut b = vec![a0_inv.clone()];
    for k in 1..=order {
        let mut acc = MatrixField::zeros(*t.lattice(), t.dim());
        for i in 1..=k {
            acc = acc.add(&a[i].mul(&b[k - i].shift(step * i as i64))?)?;
        }
        b.push(a0_inv.mul(&acc)?.scale_re(-1.0));
    }
    ShiftOperator::series(direction, b)
}

/// Both dressing series and their inverses.
#[derive(Debug, Clone)]
pub struct DressingPair {
    pub order: usize,
    pub s: ShiftOperator,
    pub s_inv: ShiftOperator,
    pub sbar: ShiftOperator,
    pub sbar_inv: ShiftOperator,
}

/// Dressing residuals measured on [`check_sites`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DressingResiduals {
    pub ls_minus_s_lambda: f64,
    pub lsbar_minus_sbar_lambda_inv: f64,
    pub s_s_inv: f64,
    pub sbar_sbar_inv: f64,
    pub consistency: f64,
}

impl DressingPair {
    pub fn new(state: &LaxState, order: usize, policy: MeanPolicy) -> Result<Self> {
        let s = compute_s(state, order, policy)?;
        let s_inv = invert_series(&s, Direction::Lower, order)?;
        let sbar = compute_sbar(state, order)?;
        let sbar_inv = invert_series(&sbar, Direction::Upper, order)?;
        Ok(Self { order, s, s_inv, sbar, sbar_inv })
    }

    pub fn omega(&self, k: usize) -> MatrixField {
        self.s.coeff(-(k as i64))
    }

    pub fn omega_bar(&self, m: usize) -> MatrixField {
        self.sbar.coeff(m as i64)
    }

    /// `SΛS⁻¹` on its exact range.
    pub fn lax_from_s(&self) -> Result<ShiftOperator> {
        let lam = ShiftOperator::shift_power(*self.s.lattice(), self.s.dim(), 1);
        self.s.mul(&lam)?.mul(&self.s_inv)
    }

    /// `S̄Λ⁻¹S̄⁻¹` on its exact range.
    pub fn lax_from_sbar(&self) -> Result<ShiftOperator> {
        let lam = ShiftOperator::shift_power(*self.s.lattice(), self.s.dim(), -1);
        self.sbar.mul(&lam)?.mul(&self.sbar_inv)
    }

    pub fn residuals(&self, state: &LaxState) -> Result<DressingResiduals> {
        let lat = *state.lattice();
        let n = state.dim();
        let sites = check_sites(&lat, self.order)?;
        let k = self.order as i64;
        let l = state.lax();
        let lam = ShiftOperator::shift_power(lat, n, 1);
        let lam_inv = ShiftOperator::shift_power(lat, n, -1);
        let id = ShiftOperator::identity(lat, n);

        let r1 = l.mul(&self.s)?.sub(&self.s.mul(&lam)?)?;
        let r2 = l.mul(&self.sbar)?.sub(&self.sbar.mul(&lam_inv)?)?;
        let r3 = self.s.mul(&self.s_inv)?.sub(&id)?;
        let r4 = self.sbar.mul(&self.sbar_inv)?.sub(&id)?;
        let c1 = self.lax_from_s()?.sub(&l)?;
        let c2 = self.lax_from_sbar()?.sub(&l)?;
        Ok(DressingResiduals {
            ls_minus_s_lambda: r1.band_norm_on(-k, 1, &sites),
            lsbar_minus_sbar_lambda_inv: r2.band_norm_on(-1, k, &sites),
            s_s_inv: r3.band_norm_on(-k, 0, &sites),
            sbar_sbar_inv: r4.band_norm_on(0, k, &sites),
            consistency: c1.band_norm_on(-1, 1, &sites).max(c2.band_norm_on(-1, 1, &sites)),
        })
    }

    /// `C_kk = S E_kk S⁻¹` or `C̄_kk = S̄ E_kk S̄⁻¹`.
    pub fn c_operator(&self, k: usize, barred: bool) -> Result<ShiftOperator> {
        let lat = *self.s.lattice();
        let n = self.s.dim();
        let e = ShiftOperator::multiplication(MatrixField::constant(lat, crate::lattice::unit_projector(n, k)?));
        if barred {
            self.sbar.mul(&e)?.mul(&self.sbar_inv)
        } else {
            self.s.mul(&e)?.mul(&self.s_inv)
        }
    }

    /// `B_jk = C_kk L^j` (or `B̄_jk = C̄_kk L^j`).
    pub fn b_operator(&self, state: &LaxState, j: usize, k: usize, barred: bool) -> Result<ShiftOperator> {
        self.c_operator(k, barred)?.mul(&state.lax_power(j))
    }

    /// `(B_jk)_+`, exact when the series order covers `j`.
    pub fn b_plus(&self, state: &LaxState, j: usize, k: usize) -> Result<ShiftOperator> {
        if self.order < j {
            return Err(EmthError::InsufficientOrder { required: j, have: self.order });
        }
        Ok(self.b_operator(state, j, k, false)?.plus())
    }

    /// `(B̄_jk)_-`, exact when the series order covers `j`.
    pub fn bbar_minus(&self, state: &LaxState, j: usize, k: usize) -> Result<ShiftOperator> {
        if self.order < j {
            return Err(EmthError::InsufficientOrder { required: j, have: self.order });
        }
        Ok(self.b_operator(state, j, k, true)?.minus())
    }

    pub fn logs(&self) -> Result<LogOperators> {
        LogOperators::new(self)
    }

    /// `D_j = (2L^j / j!)(log L - c_j)`.
    pub fn d_operator(&self, state: &LaxState, j: usize) -> Result<ShiftOperator> {
        let log = self.logs()?.log;
        let lat = *state.lattice();
        let n = state.dim();
        let shifted = log.sub(&ShiftOperator::identity(lat, n).scale_re(harmonic(j)))?;
        Ok(state.lax_power(j).mul(&shifted)?.scale_re(2.0 / factorial(j)))
    }
}

/// The logarithms of `L` without their `±ε∂` parts:
/// `log_+L = ε∂ + plus_tail`, `log_-L = -ε∂ + minus_tail`,
/// `log L = (plus_tail + minus_tail) / 2`.
#[derive(Debug, Clone)]
pub struct LogOperators {
    /// `εS(S⁻¹)_x`, strictly negative powers.
    pub plus_tail: ShiftOperator,
    /// `-εS̄(S̄⁻¹)_x`, non-negative powers.
    pub minus_tail: ShiftOperator,
    pub log: ShiftOperator,
}

impl LogOperators {
    pub fn new(pair: &DressingPair) -> Result<Self> {
        let eps = pair.s.lattice().eps();
        let plus_tail = pair.s.mul(&pair.s_inv.derivative_x())?.scale_re(eps);
        let minus_tail = pair.sbar.mul(&pair.sbar_inv.derivative_x())?.scale_re(-eps);
        let log = plus_tail.add(&minus_tail)?.scale_re(0.5);
        Ok(Self { plus_tail, minus_tail, log })
    }
}

/// `Ū_k = ω̄₀ E_kk ω̄₀(x-ε)⁻¹`.
pub fn u_bar(pair: &DressingPair, k: usize) -> Result<MatrixField> {
    let w0 = pair.omega_bar(0);
    let e = crate::lattice::unit_projector(w0.dim(), k)?;
    let inv = w0.shift(-1).try_inverse().map_err(|site| EmthError::SingularLeading { site })?;
    w0.right_const(&e).mul(&inv)
}

/// `U_k = ω₁ E_kk - E_kk ω₁(x+ε)`.
pub fn u_k(pair: &DressingPair, k: usize) -> Result<MatrixField> {
    let w1 = pair.omega(1);
    let e = crate::lattice::unit_projector(w1.dim(), k)?;
    w1.right_const(&e).sub(&w1.shift(1).left_const(&e))
}

/// Policy used for the `S` recursion on a lattice: periodic windows need
/// the projected kernel unless the caller asks otherwise.
pub fn default_policy(lattice: &Lattice) -> MeanPolicy {
    match lattice.boundary() {
        Boundary::Periodic => MeanPolicy::Project,
        Boundary::Decaying => MeanPolicy::Reject,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn decaying(sites: usize) -> Lattice {
        Lattice::new(sites, 0.5, 2, Boundary::Decaying).unwrap()
    }

    #[test]
    fn harmonic_table() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert_eq!(harmonic(2), 1.5);
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn undressed_lax_has_trivial_s() {
        let lat = decaying(8);
        let st = LaxState::vacuum(lat, 2, 0.0);
        let s = compute_s(&st, 4, MeanPolicy::Reject).unwrap();
        assert_eq!((s.lo(), s.hi()), (0, 0));
        assert_eq!(s.coeff(0), MatrixField::identity(lat, 2));
    }

    #[test]
    fn identity_v_second_coefficient_is_linear() {
        let lat = decaying(8);
        let st = LaxState::vacuum(lat, 2, 1.0);
        let w = s_coefficients(&st, 2, MeanPolicy::Reject).unwrap();
        assert_eq!(w[1].max_norm(), 0.0);
        // first cell is the gauge seed; the marching source only sees I from cell 1 on
        for i in 0..lat.fine_len() {
            let cell = (i / lat.refine()) as f64;
            let want = -(cell - 1.0).max(0.0);
            assert!((w[2].at(i) - Mat::identity(2, 2) * c(want)).norm() < 1e-14, "site {i}");
        }
    }

    #[test]
    fn barred_dressing_of_unit_vacuum_grows() {
        // ω̄₂(x) = ω̄₂(x-ε) + I under the left-edge gauge, so S̄ is not the identity
        let lat = decaying(8);
        let st = LaxState::vacuum(lat, 1, 1.0);
        let w = sbar_coefficients(&st, 2).unwrap();
        assert_eq!(w[0], MatrixField::identity(lat, 1));
        assert_eq!(w[1].max_norm(), 0.0);
        for i in 0..lat.fine_len() {
            let cell = (i / lat.refine()) as f64;
            let want = if cell < 7.0 { cell } else { cell - 1.0 };
            assert!((w[2].at(i)[(0, 0)] - c(want)).norm() < 1e-14, "site {i}: {}", w[2].at(i));
        }
    }

    #[test]
    fn barred_dressing_of_scalar_vacuum_is_geometric() {
        let lat = decaying(8);
        let st = LaxState::vacuum(lat, 2, 1.7);
        let w = sbar_coefficients(&st, 0).unwrap();
        for i in 0..lat.fine_len() {
            let cell = (i / lat.refine()) as i32;
            let want = Mat::identity(2, 2) * c(1.7f64.powi(cell));
            assert!((w[0].at(i) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_v_is_rejected() {
        let lat = decaying(8);
        let st = LaxState::vacuum(lat, 2, 0.0);
        assert!(matches!(compute_sbar(&st, 2), Err(EmthError::BarredDressingUndefined { site: 0 })));
    }

    #[test]
    fn invert_first_order_series() {
        let lat = decaying(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = crate::random::random_field(&mut rng, lat, 2, 0.5);
        let t = ShiftOperator::series(Direction::Lower, vec![MatrixField::identity(lat, 2), a.clone()]).unwrap();
        let inv = invert_series(&t, Direction::Lower, 3).unwrap();
        // zero extension truncates the closed form within two cells of the left edge
        let sites = lat.interior(2);
        let d1 = inv.coeff(-1).add(&a).unwrap();
        assert!(d1.max_norm_on(sites.clone()) < 1e-15);
        let d2 = inv.coeff(-2).sub(&a.mul(&a.shift(-1)).unwrap()).unwrap();
        assert!(d2.max_norm_on(sites) < 1e-14);
        let one = t.mul(&inv).unwrap().sub(&ShiftOperator::identity(lat, 2)).unwrap();
        assert!(one.max_norm() < 1e-14);
        let id = invert_series(&ShiftOperator::identity(lat, 2), Direction::Lower, 3).unwrap();
        assert_eq!((id.lo(), id.hi()), (0, 0));
    }

    #[test]
    fn singular_leading_coefficient() {
        let lat = decaying(8);
        let t = ShiftOperator::series(Direction::Upper, vec![MatrixField::zeros(lat, 2)]).unwrap();
        assert!(matches!(
            invert_series(&t, Direction::Upper, 2),
            Err(EmthError::SingularLeading { .. })
        ));
    }

    #[test]
    fn random_state_dressing_residuals() {
        let lat = Lattice::new(24, 0.5, 2, Boundary::Decaying).unwrap();
        let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(11), lat, 2, 0.2);
        let st = LaxState::new(u, v).unwrap();
        let pair = DressingPair::new(&st, 6, MeanPolicy::Reject).unwrap();
        let r = pair.residuals(&st).unwrap();
        assert!(r.ls_minus_s_lambda < 1e-10, "{r:?}");
        assert!(r.lsbar_minus_sbar_lambda_inv < 1e-10, "{r:?}");
        assert!(r.s_s_inv < 1e-10, "{r:?}");
        assert!(r.sbar_sbar_inv < 1e-10, "{r:?}");
        assert!(r.consistency < 1e-10, "{r:?}");
    }

    #[test]
    fn c_operator_properties() {
        let lat = Lattice::new(24, 0.5, 2, Boundary::Decaying).unwrap();
        let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(12), lat, 2, 0.2);
        let st = LaxState::new(u, v).unwrap();
        let pair = DressingPair::new(&st, 6, MeanPolicy::Reject).unwrap();
        let sites = check_sites(&lat, 6).unwrap();
        let c1 = pair.c_operator(1, false).unwrap();
        let c2 = pair.c_operator(2, false).unwrap();
        assert_eq!(c1.coeff(0), MatrixField::constant(lat, crate::lattice::unit_projector(2, 1).unwrap()));
        let comm = c1.commutator(&st.lax()).unwrap();
        assert!(comm.band_norm_on(-5, 1, &sites) < 1e-10);
        let sum = c1.add(&c2).unwrap().sub(&ShiftOperator::identity(lat, 2)).unwrap();
        assert!(sum.band_norm_on(-6, 0, &sites) < 1e-12);
    }

    #[test]
    fn b1_plus_matches_closed_form() {
        let lat = Lattice::new(24, 0.5, 2, Boundary::Decaying).unwrap();
        let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(13), lat, 3, 0.2);
        let st = LaxState::new(u, v).unwrap();
        let pair = DressingPair::new(&st, 6, MeanPolicy::Reject).unwrap();
        let sites = check_sites(&lat, 6).unwrap();
        for k in 1..=3 {
            let bp = pair.b_plus(&st, 1, k).unwrap();
            let e = MatrixField::constant(lat, crate::lattice::unit_projector(3, k).unwrap());
            assert_eq!(bp.hi(), 1);
            assert!(bp.coeff(1).sub(&e).unwrap().max_norm() < 1e-14);
            let diff = bp.coeff(0).sub(&u_k(&pair, k).unwrap()).unwrap();
            assert!(diff.max_norm_on(sites.iter().copied()) < 1e-12);
        }
        assert!(matches!(
            DressingPair::new(&st, 1, MeanPolicy::Reject).unwrap().b_plus(&st, 2, 1),
            Err(EmthError::InsufficientOrder { required: 2, have: 1 })
        ));
    }

    #[test]
    fn log_has_vacuum_limits() {
        let lat = decaying(8);
        let st = LaxState::vacuum(lat, 2, 0.0);
        let s = compute_s(&st, 3, MeanPolicy::Reject).unwrap();
        let s_inv = invert_series(&s, Direction::Lower, 3).unwrap();
        let tail = s.mul(&s_inv.derivative_x()).unwrap();
        assert!(tail.is_zero());
    }

    #[test]
    fn d0_is_twice_log() {
        let lat = Lattice::new(16, 0.5, 2, Boundary::Decaying).unwrap();
        let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(14), lat, 2, 0.2);
        let st = LaxState::new(u, v).unwrap();
        let pair = DressingPair::new(&st, 4, MeanPolicy::Reject).unwrap();
        let d0 = pair.d_operator(&st, 0).unwrap();
        let log = pair.logs().unwrap().log;
        assert!(d0.sub(&log.scale_re(2.0)).unwrap().max_norm() < 1e-14);
    }
}
