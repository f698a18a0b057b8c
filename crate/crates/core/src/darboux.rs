//! Wave functions on the vacuum and Darboux transformations.
//!
//! Wave functions are closures in `x`, so a transformation can read them at
//! `x - nε` for any site of the window. Each evaluation carries the first
//! two derivatives with respect to one probe time `t_{j,k}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dressing::LaxState;
use crate::error::{EmthError, Result};
use crate::lattice::{condition_number, unit_projector, Lattice, Mat, MatrixField, MAX_CONDITION};

/// A matrix with its first and second derivative in one time variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: Mat,
    pub dt: Mat,
    pub dtt: Mat,
}

impl Jet {
    pub fn constant(value: Mat) -> Self {
        let (r, c) = value.shape();
        Self { value, dt: Mat::zeros(r, c), dtt: Mat::zeros(r, c) }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Mat::zeros(rows, cols))
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { value: &self.value + &o.value, dt: &self.dt + &o.dt, dtt: &self.dtt + &o.dtt }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet { value: &self.value - &o.value, dt: &self.dt - &o.dt, dtt: &self.dtt - &o.dtt }
    }

    pub fn scale(&self, c: Complex64) -> Jet {
        Jet { value: &self.value * c, dt: &self.dt * c, dtt: &self.dtt * c }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        Jet {
            value: &self.value * &o.value,
            dt: &self.dt * &o.value + &self.value * &o.dt,
            dtt: &self.dtt * &o.value + (&self.dt * &o.dt) * Complex64::new(2.0, 0.0) + &self.value * &o.dtt,
        }
    }

    /// Inverse, or the condition number when it exceeds [`MAX_CONDITION`].
    pub fn inverse(&self) -> std::result::Result<Jet, f64> {
        let cond = condition_number(&self.value);
        if !(cond < MAX_CONDITION) {
            return Err(cond);
        }
        let inv = self.value.clone().try_inverse().ok_or(cond)?;
        let a = &inv * &self.dt;
        let dt = -(&a * &inv);
        let dtt = (&a * &a * Complex64::new(2.0, 0.0) - &inv * &self.dtt) * &inv;
        Ok(Jet { value: inv, dt, dtt })
    }

    fn block(&self, r: usize, c: usize, rows: usize, cols: usize) -> Jet {
        Jet {
            value: self.value.view((r, c), (rows, cols)).into_owned(),
            dt: self.dt.view((r, c), (rows, cols)).into_owned(),
            dtt: self.dtt.view((r, c), (rows, cols)).into_owned(),
        }
    }

    fn set_block(&mut self, r: usize, c: usize, j: &Jet) {
        let (rows, cols) = j.value.shape();
        self.value.view_mut((r, c), (rows, cols)).copy_from(&j.value);
        self.dt.view_mut((r, c), (rows, cols)).copy_from(&j.dt);
        self.dtt.view_mut((r, c), (rows, cols)).copy_from(&j.dtt);
    }
}

/// A time `t_{j,k}` with its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeValue {
    pub level: usize,
    pub component: usize,
    pub value: f64,
}

/// Non-negative-power part of `(z + c/z)^j`.
pub fn positive_symbol(z: Complex64, c: f64, j: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut binom = 1.0;
    for i in 0..=j {
        if 2 * i <= j {
            acc += z.powi((j - 2 * i) as i32) * binom * c.powi(i as i32);
        }
        binom = binom * (j - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Coefficient of `Λ⁻¹` in `(Λ + cΛ⁻¹)^j`.
pub fn minus_one_coefficient(c: f64, j: usize) -> f64 {
    if j.is_multiple_of(2) {
        return 0.0;
    }
    let i = j.div_ceil(2);
    let binom: f64 = (0..i).map(|m| (j - m) as f64 / (m + 1) as f64).product();
    binom * c.powi(i as i32)
}

/// One exponential branch `z^{x/ε} · exp(Σ t p_j(z) E_kk / ε) · A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub z: Complex64,
    pub amplitude: Mat,
}

/// Wave function of the vacuum `u = 0`, `v = cI`: a sum of branches whose
/// roots all satisfy `z + c/z = λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacuumWave {
    pub c: f64,
    pub eps: f64,
    pub branches: Vec<Branch>,
    pub times: Vec<TimeValue>,
}

impl VacuumWave {
    /// Branches at `z` and at the companion root `c/z`.
    pub fn new(
        c: f64,
        eps: f64,
        z: Complex64,
        a: Mat,
        b: Option<Mat>,
        times: Vec<TimeValue>,
    ) -> Result<Self> {
        if z.norm() == 0.0 {
            return Err(EmthError::InvalidWaveData("spectral root z must be nonzero".into()));
        }
        let n = a.nrows();
        let mut branches = vec![Branch { z, amplitude: a }];
        if let Some(b) = b {
            if b.nrows() != n {
                return Err(EmthError::DimensionMismatch { expected: n, found: b.nrows() });
            }
            branches.push(Branch { z: Complex64::new(c, 0.0) / z, amplitude: b });
        }
        let wave = Self { c, eps, branches, times };
        wave.validate()?;
        Ok(wave)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.branches.iter().all(|b| b.amplitude.norm() == 0.0) {
            return Err(EmthError::InvalidWaveData("all amplitude matrices vanish".into()));
        }
        for t in &self.times {
            if t.component == 0 || t.component > n {
                return Err(EmthError::ComponentOutOfRange { k: t.component, n });
            }
        }
        let lam = self.lambda();
        for b in &self.branches {
            if b.z.norm() == 0.0 {
                return Err(EmthError::InvalidWaveData("spectral root z must be nonzero".into()));
            }
            if (b.z + self.c / b.z - lam).norm() > 1e-12 * lam.norm().max(1.0) {
                return Err(EmthError::InvalidWaveData("branches do not share one spectral value".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.branches[0].amplitude.nrows()
    }

    pub fn lambda(&self) -> Complex64 {
        let z = self.branches[0].z;
        z + self.c / z
    }

    /// Value and probe-time derivatives at `x`.
    pub fn eval(&self, x: f64, probe: (usize, usize)) -> Jet {
        let n = self.dim();
        let mut out = Jet::zeros(n, n);
        for b in &self.branches {
            let base = (b.z.ln() * (x / self.eps)).exp();
            let mut diag = vec![Complex64::new(0.0, 0.0); n];
            for t in &self.times {
                diag[t.component - 1] += positive_symbol(b.z, self.c, t.level) * t.value / self.eps;
            }
            let g = Mat::from_diagonal(&nalgebra::DVector::from_iterator(n, diag.iter().map(|d| d.exp() * base)));
            let value = &g * &b.amplitude;
            let rate = positive_symbol(b.z, self.c, probe.0) / self.eps;
            let e = unit_projector(n, probe.1).expect("probe component checked by caller");
            let dt = &e * &value * rate;
            let dtt = &e * &dt * rate;
            out = out.add(&Jet { value, dt, dtt });
        }
        out
    }

    pub fn field(&self, lattice: Lattice, probe: (usize, usize)) -> MatrixField {
        MatrixField::from_fn(lattice, self.dim(), |x| self.eval(x, probe).value)
    }
}

/// A vacuum wave function, possibly pushed through earlier one-fold steps:
/// `φ^{[1]} = φ - k k(x-ε)⁻¹ φ(x-ε)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Wave {
    Vacuum(VacuumWave),
    Dressed { inner: Box<Wave>, kernel: Box<Wave> },
}

impl Wave {
    pub fn eps(&self) -> f64 {
        match self {
            Wave::Vacuum(w) => w.eps,
            Wave::Dressed { inner, .. } => inner.eps(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Wave::Vacuum(w) => w.dim(),
            Wave::Dressed { inner, .. } => inner.dim(),
        }
    }

    pub fn eval(&self, x: f64, probe: (usize, usize)) -> std::result::Result<Jet, f64> {
        match self {
            Wave::Vacuum(w) => Ok(w.eval(x, probe)),
            Wave::Dressed { inner, kernel } => {
                let eps = self.eps();
                let ratio = kernel.eval(x, probe)?.mul(&kernel.eval(x - eps, probe)?.inverse()?);
                Ok(inner.eval(x, probe)?.sub(&ratio.mul(&inner.eval(x - eps, probe)?)))
            }
        }
    }
}

/// Output of a Darboux transformation on the vacuum.
#[derive(Debug, Clone)]
pub struct DarbouxResult {
    pub state: LaxState,
    /// `W = I + t₁Λ⁻¹ + … + t_nΛ⁻ⁿ`: `coeffs[m-1]` holds `t_m` per site.
    pub coeffs: Vec<Vec<Jet>>,
    /// `∂_t u'`, `∂_t v'` for the probe time.
    pub du_dt: MatrixField,
    pub dv_dt: MatrixField,
    /// Largest `‖W φ_i‖ / ‖φ_i‖` over sites and consumed wave functions.
    pub kernel_residual: f64,
    /// Largest condition number of the per-site systems.
    pub max_condition: f64,
}

impl DarbouxResult {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff_field(&self, m: usize) -> MatrixField {
        let lat = *self.state.lattice();
        let vals = self.coeffs[m - 1].iter().map(|j| j.value.clone()).collect();
        MatrixField::from_values(lat, vals).expect("one value per site")
    }

    /// CSV rows `site,x,u_ij…,v_ij…`.
    pub fn to_csv(&self) -> String {
        crate::flows::state_csv(&self.state)
    }
}

/// Solve `W_n φ_i = 0` for `t_1..t_n` at the point `x`.
fn solve_point(waves: &[Wave], x: f64, probe: (usize, usize)) -> std::result::Result<(Vec<Jet>, f64), f64> {
    let n = waves.len();
    let dim = waves[0].dim();
    let eps = waves[0].eps();
    let size = n * dim;
    // T M = R with block M[m, i] = φ_i(x - (m+1)ε) and R[i] = -φ_i(x)
    let mut m = Jet::zeros(size, size);
    let mut r = Jet::zeros(dim, size);
    for (i, w) in waves.iter().enumerate() {
        r.set_block(0, i * dim, &w.eval(x, probe)?.scale(Complex64::new(-1.0, 0.0)));
        for row in 0..n {
            m.set_block(row * dim, i * dim, &w.eval(x - (row + 1) as f64 * eps, probe)?);
        }
    }
    let cond = condition_number(&m.value);
    let m_inv = m.inverse()?;
    let t = r.mul(&m_inv);
    let coeffs = (0..n).map(|k| t.block(0, k * dim, dim, dim)).collect();
    Ok((coeffs, cond))
}

/// Probe time `t_{j,k}` used for the carried time derivatives.
pub type Probe = (usize, usize);

fn check_probe(probe: Probe, dim: usize) -> Result<()> {
    if probe.1 == 0 || probe.1 > dim {
        return Err(EmthError::ComponentOutOfRange { k: probe.1, n: dim });
    }
    Ok(())
}

/// n-fold transformation of the vacuum `u = 0`, `v = cI` by per-site
/// linear solve of `W_n φ_i = 0`.
pub fn darboux_nfold(lattice: Lattice, c: f64, waves: &[VacuumWave], probe: Probe) -> Result<DarbouxResult> {
    if waves.is_empty() {
        return Err(EmthError::InvalidWaveData("no wave functions given".into()));
    }
    let dim = waves[0].dim();
    check_probe(probe, dim)?;
    let eps = lattice.eps();
    let ws: Vec<Wave> = waves.iter().cloned().map(Wave::Vacuum).collect();
    let n = ws.len();
    let len = lattice.fine_len();
    let at = |x: f64, site: usize| -> Result<(Vec<Jet>, f64)> {
        solve_point(&ws, x, probe).map_err(|condition| EmthError::DegenerateSpectralData { site, condition })
    };
    let mut coeffs = vec![Vec::with_capacity(len); n];
    let mut u = Vec::with_capacity(len);
    let mut v = Vec::with_capacity(len);
    let mut du = Vec::with_capacity(len);
    let mut dv = Vec::with_capacity(len);
    let mut max_condition: f64 = 0.0;
    let cj = Complex64::new(c, 0.0);
    for site in 0..len {
        let x = lattice.x(site);
        let (here, cond) = at(x, site)?;
        let (right, _) = at(x + eps, site)?;
        let (left, _) = at(x - eps, site)?;
        max_condition = max_condition.max(cond);
        // u' = t₁ - t₁(x+ε), v' = c t_n t_n(x-ε)⁻¹
        let du_jet = here[0].sub(&right[0]);
        let tn_left_inv = left[n - 1]
            .inverse()
            .map_err(|condition| EmthError::DegenerateSpectralData { site, condition })?;
        let dv_jet = here[n - 1].mul(&tn_left_inv).scale(cj);
        u.push(du_jet.value.clone());
        du.push(du_jet.dt.clone());
        v.push(dv_jet.value.clone());
        dv.push(dv_jet.dt.clone());
        for (m, t) in here.into_iter().enumerate() {
            coeffs[m].push(t);
        }
    }
    let state = LaxState::new(MatrixField::from_values(lattice, u)?, MatrixField::from_values(lattice, v)?)?;
    let mut out = DarbouxResult {
        state,
        coeffs,
        du_dt: MatrixField::from_values(lattice, du)?,
        dv_dt: MatrixField::from_values(lattice, dv)?,
        kernel_residual: 0.0,
        max_condition,
    };
    out.kernel_residual = kernel_residual(&out, &ws, probe);
    Ok(out)
}

/// `max ‖φ_i(x) + Σ_m t_m φ_i(x-mε)‖ / ‖φ_i(x)‖` over sites.
fn kernel_residual(res: &DarbouxResult, waves: &[Wave], probe: Probe) -> f64 {
    let lat = *res.state.lattice();
    let eps = lat.eps();
    let mut worst: f64 = 0.0;
    for site in 0..lat.fine_len() {
        let x = lat.x(site);
        for w in waves {
            let Ok(phi) = w.eval(x, probe) else { continue };
            let mut acc = phi.value.clone();
            let mut scale = phi.value.norm();
            for (m, t) in res.coeffs.iter().enumerate() {
                let Ok(p) = w.eval(x - (m + 1) as f64 * eps, probe) else { continue };
                scale = scale.max((&t[site].value * &p.value).norm());
                acc += &t[site].value * &p.value;
            }
            worst = worst.max(acc.norm() / scale.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Iterated one-fold transformations of the vacuum. After step `j` the
/// remaining wave functions are pushed through `W_j`; the consumed ones must
/// vanish, which is reported as the kernel residual.
pub fn darboux_chain(lattice: Lattice, c: f64, waves: &[VacuumWave], probe: Probe) -> Result<ChainResult> {
    if waves.is_empty() {
        return Err(EmthError::InvalidWaveData("no wave functions given".into()));
    }
    check_probe(probe, waves[0].dim())?;
    let eps = lattice.eps();
    let mut current: Vec<Wave> = waves.iter().cloned().map(Wave::Vacuum).collect();
    let mut kernels: Vec<Wave> = Vec::new();
    let mut annihilation: f64 = 0.0;
    for step in 0..current.len() {
        let kernel = current[step].clone();
        kernels.push(kernel.clone());
        for w in current.iter_mut().skip(step + 1) {
            *w = Wave::Dressed { inner: Box::new(w.clone()), kernel: Box::new(kernel.clone()) };
        }
        // the kernel itself is annihilated by its own step
        let dressed_self = Wave::Dressed { inner: Box::new(kernel.clone()), kernel: Box::new(kernel.clone()) };
        for site in 0..lattice.fine_len() {
            let x = lattice.x(site);
            if let (Ok(z), Ok(k)) = (dressed_self.eval(x, probe), kernel.eval(x, probe)) {
                annihilation = annihilation.max(z.value.norm() / k.value.norm().max(f64::MIN_POSITIVE));
            }
        }
    }
    let ratio = |j: usize, x: f64| -> std::result::Result<Jet, f64> {
        Ok(kernels[j].eval(x, probe)?.mul(&kernels[j].eval(x - eps, probe)?.inverse()?))
    };
    let n = kernels.len();
    let dim = waves[0].dim();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for site in 0..lattice.fine_len() {
        let x = lattice.x(site);
        let fail = |step: usize| move |_| EmthError::DarbouxSingularity { sites: vec![site, step] };
        let mut acc = Mat::zeros(dim, dim);
        for j in 0..n {
            acc += ratio(j, x + eps).map_err(fail(j))?.value - ratio(j, x).map_err(fail(j))?.value;
        }
        u.push(acc);
        v.push(chain_v(&ratio, n, x, eps, c, dim).map_err(fail(n))?);
    }
    let state = LaxState::new(MatrixField::from_values(lattice, u)?, MatrixField::from_values(lattice, v)?)?;
    Ok(ChainResult { state, annihilation })
}

/// `v^{[j]}(x) = R_j(x) v^{[j-1]}(x-ε) R_j(x-ε)⁻¹` with `v^{[0]} = cI`.
fn chain_v(
    ratio: &dyn Fn(usize, f64) -> std::result::Result<Jet, f64>,
    j: usize,
    x: f64,
    eps: f64,
    c: f64,
    dim: usize,
) -> std::result::Result<Mat, f64> {
    if j == 0 {
        return Ok(Mat::identity(dim, dim) * Complex64::new(c, 0.0));
    }
    let r = ratio(j - 1, x)?.value;
    let rl = ratio(j - 1, x - eps)?.inverse()?.value;
    Ok(r * chain_v(ratio, j - 1, x - eps, eps, c, dim)? * rl)
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub state: LaxState,
    /// Largest relative norm of a consumed wave function after its own step.
    pub annihilation: f64,
}

/// Closed two-fold coefficient
/// `(φ₁φ₂(x-2ε) - φ₂φ₁(x-2ε))(φ₁(x-ε)φ₂(x-2ε) - φ₂(x-ε)φ₁(x-2ε))⁻¹`,
/// which equals `-t₁` of `W₂` when the wave-function values commute.
pub fn two_fold_closed_t1(w1: &VacuumWave, w2: &VacuumWave, x: f64, eps: f64) -> Option<Mat> {
    let p = (1, 1);
    let (a0, a1, a2) = (w1.eval(x, p).value, w1.eval(x - eps, p).value, w1.eval(x - 2.0 * eps, p).value);
    let (b0, b1, b2) = (w2.eval(x, p).value, w2.eval(x - eps, p).value, w2.eval(x - 2.0 * eps, p).value);
    let num = &a0 * &b2 - &b0 * &a2;
    let den = &a1 * &b2 - &b1 * &a2;
    crate::lattice::guarded_inverse(&den).map(|d| num * d)
}

/// One-fold transformation of a sampled background by a sampled wave
/// function: `u' = u + (Λ-1)R`, `v' = R v(x-ε) R(x-ε)⁻¹`, `R = φ φ(x-ε)⁻¹`.
/// On a decaying window the first two and last cells cannot be formed; they
/// keep the seed values and are excluded from `valid`.
pub fn darboux_once(state: &LaxState, phi: &MatrixField) -> Result<OnceResult> {
    let lat = *state.lattice();
    let valid: Vec<usize> = match lat.boundary() {
        crate::lattice::Boundary::Periodic => (0..lat.fine_len()).collect(),
        crate::lattice::Boundary::Decaying => (2 * lat.refine()..lat.fine_len() - lat.refine()).collect(),
    };
    let left = phi.shift(-1);
    let singular: Vec<usize> = valid
        .iter()
        .copied()
        .chain(valid.iter().filter_map(|&i| lat.shifted(i, -1)))
        .filter(|&i| !(condition_number(left.at(i)) < MAX_CONDITION))
        .collect();
    if !singular.is_empty() {
        let mut sites = singular;
        sites.sort_unstable();
        sites.dedup();
        return Err(EmthError::DarbouxSingularity { sites });
    }
    let mut u = state.u.clone();
    let mut v = state.v.clone();
    let ratio = |i: usize| -> Mat {
        match crate::lattice::guarded_inverse(left.at(i)) {
            Some(inv) => phi.at(i) * inv,
            None => Mat::zeros(phi.dim(), phi.dim()),
        }
    };
    for &i in &valid {
        let (Some(p), Some(m)) = (lat.shifted(i, 1), lat.shifted(i, -1)) else { continue };
        let r = ratio(i);
        u.set(i, state.u.at(i) + ratio(p) - &r);
        let rl = crate::lattice::guarded_inverse(&ratio(m)).ok_or(EmthError::DarbouxSingularity { sites: vec![i] })?;
        v.set(i, &r * state.v.at(m) * rl);
    }
    Ok(OnceResult { state: LaxState::new(u, v)?, valid })
}

#[derive(Debug, Clone)]
pub struct OnceResult {
    pub state: LaxState,
    pub valid: Vec<usize>,
}

/// Residuals of the `t_{1,k}` equations for an n-fold output on the vacuum
/// `v = cI`, each maximised over sites:
/// - `first_order_phi`: `ε∂_t(ω̄₀)ω̄₀⁻¹ - (ω₁E - Eω₁(x+ε))`
/// - `first_order_omega`: `ε∂_tω₁ + ω̄₀Eω̄₀(x-ε)⁻¹`
/// - `second_order`: the matrix Toda form in `ω̄₀`
/// - `lax`: `ε∂_t(u, v) - [EΛ + U, L]` on the `Λ⁰`, `Λ⁻¹` coefficients,
///   relative to the larger side
///
/// The two `ω̄₀`-based equations need `SES⁻¹ = S̄ES̄⁻¹`, which a Darboux
/// matrix `W` keeps only when its coefficients commute with `E`. The Lax form
/// holds for any wave data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiTodaResiduals {
    pub first_order_phi: f64,
    pub first_order_omega: f64,
    pub second_order: f64,
    pub lax: f64,
}

pub fn multitoda_residuals(
    lattice: Lattice,
    c: f64,
    waves: &[VacuumWave],
    k: usize,
) -> Result<MultiTodaResiduals> {
    let dim = waves[0].dim();
    let probe = (1, k);
    check_probe(probe, dim)?;
    let e = unit_projector(dim, k)?;
    let eps = lattice.eps();
    let ws: Vec<Wave> = waves.iter().cloned().map(Wave::Vacuum).collect();
    let n = ws.len();
    let solve = |x: f64, site: usize| -> Result<Vec<Jet>> {
        solve_point(&ws, x, probe)
            .map(|r| r.0)
            .map_err(|condition| EmthError::DegenerateSpectralData { site, condition })
    };
    // ω̄₀ = t_n c^{(x-nε)/ε}; ω₁ = t₁ + ω₁^vac with ε∂_t ω₁^vac = -cE
    let bar = |x: f64, site: usize| -> Result<Jet> {
        let scale = Complex64::new(c.powf((x - n as f64 * eps) / eps), 0.0);
        Ok(solve(x, site)?[n - 1].scale(scale))
    };
    let ce = &e * Complex64::new(c, 0.0);
    let (mut r1, mut r2, mut r3, mut r4) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let cj = Complex64::new(c, 0.0);
    let ej = Jet::constant(e.clone());
    for site in 0..lattice.fine_len() {
        let x = lattice.x(site);
        let left = solve(x - eps, site)?;
        let here = solve(x, site)?;
        let right = solve(x + eps, site)?;
        let inv_n = |t: &Jet| t.inverse().map_err(|condition| EmthError::DegenerateSpectralData { site, condition });
        let u = here[0].sub(&right[0]);
        let v = here[n - 1].mul(&inv_n(&left[n - 1])?).scale(cj);
        let v_right = right[n - 1].mul(&inv_n(&here[n - 1])?).scale(cj);
        let big_u = here[0].mul(&ej).sub(&ej.mul(&right[0]));
        let big_u_left = left[0].mul(&ej).sub(&ej.mul(&here[0]));
        let du = &e * &v_right.value - &v.value * &e + &big_u.value * &u.value - &u.value * &big_u.value;
        let dv = &big_u.value * &v.value - &v.value * &big_u_left.value;
        let epsj = Complex64::new(eps, 0.0);
        let rel = |lhs: Mat, rhs: Mat| (&lhs - &rhs).norm() / lhs.norm().max(rhs.norm()).max(1.0);
        r4 = r4.max(rel(&u.dt * epsj, du)).max(rel(&v.dt * epsj, dv));
        let w0 = bar(x, site)?;
        let w0_left = bar(x - eps, site)?;
        let w0_right = bar(x + eps, site)?;
        let inv = w0.inverse().map_err(|condition| EmthError::DegenerateSpectralData { site, condition })?;
        let inv_left = w0_left
            .inverse()
            .map_err(|condition| EmthError::DegenerateSpectralData { site, condition })?;
        // ω₁E - Eω₁(x+ε): the vacuum part -(t c/ε)E cancels between the two terms
        let u_k = &here[0].value * &e - &e * &right[0].value;
        let lhs1 = &w0.dt * &inv.value * Complex64::new(eps, 0.0);
        r1 = r1.max((&lhs1 - &u_k).norm());
        let rhs2 = &w0.value * &e * &inv_left.value;
        let lhs2 = &here[0].dt * Complex64::new(eps, 0.0) - &ce;
        r2 = r2.max((lhs2 + rhs2).norm());
        let a = &w0.dt * &inv.value;
        let lhs3 = (&w0.dtt * &inv.value - &a * &a) * Complex64::new(eps * eps, 0.0);
        let rhs3 = &e * &w0_right.value * &e * &inv.value - &w0.value * &e * &inv_left.value * &e;
        r3 = r3.max((lhs3 - rhs3).norm());
    }
    Ok(MultiTodaResiduals { first_order_phi: r1, first_order_omega: r2, second_order: r3, lax: r4 })
}

/// Scalar Toda residual `ε²φ_tt - (e^{φ(x+ε)-φ} - e^{φ-φ(x-ε)})`, `e^φ = ω̄₀`,
/// for an `N = 1` n-fold output on the vacuum `v = cI`.
pub fn scalar_toda_residual(lattice: Lattice, c: f64, waves: &[VacuumWave]) -> Result<f64> {
    if waves[0].dim() != 1 {
        return Err(EmthError::DimensionMismatch { expected: 1, found: waves[0].dim() });
    }
    let eps = lattice.eps();
    let ws: Vec<Wave> = waves.iter().cloned().map(Wave::Vacuum).collect();
    let n = ws.len();
    let bar = |x: f64, site: usize| -> Result<Jet> {
        let (t, _) = solve_point(&ws, x, (1, 1))
            .map_err(|condition| EmthError::DegenerateSpectralData { site, condition })?;
        Ok(t[n - 1].scale(Complex64::new(c.powf((x - n as f64 * eps) / eps), 0.0)))
    };
    let mut worst: f64 = 0.0;
    for site in 0..lattice.fine_len() {
        let x = lattice.x(site);
        let e = bar(x, site)?;
        let (v, vt, vtt) = (e.value[(0, 0)], e.dt[(0, 0)], e.dtt[(0, 0)]);
        let phi_tt = vtt / v - (vt / v) * (vt / v);
        let rhs = bar(x + eps, site)?.value[(0, 0)] / v - v / bar(x - eps, site)?.value[(0, 0)];
        worst = worst.max((phi_tt * eps * eps - rhs).norm());
    }
    Ok(worst)
}

/// `L'φ' - λφ'` for a vacuum wave function carried through an n-fold result,
/// `φ' = φ + Σ t_m φ(x-mε)`, maximised over interior sites.
pub fn spectral_residual(res: &DarbouxResult, waves: &[VacuumWave], carried: &VacuumWave, probe: Probe) -> Result<f64> {
    let lat = *res.state.lattice();
    let eps = lat.eps();
    let ws: Vec<Wave> = waves.iter().cloned().map(Wave::Vacuum).collect();
    let transformed = |x: f64| -> Result<Mat> {
        let (t, _) = solve_point(&ws, x, probe)
            .map_err(|condition| EmthError::DegenerateSpectralData { site: 0, condition })?;
        let mut acc = carried.eval(x, probe).value;
        for (m, tm) in t.iter().enumerate() {
            acc += &tm.value * carried.eval(x - (m + 1) as f64 * eps, probe).value;
        }
        Ok(acc)
    };
    let lam = carried.lambda();
    let mut worst: f64 = 0.0;
    for site in lat.interior(1) {
        let x = lat.x(site);
        let p = transformed(x)?;
        let lp = transformed(x + eps)? + res.state.u.at(site) * &p + res.state.v.at(site) * transformed(x - eps)?;
        worst = worst.max((lp - &p * lam).norm() / p.norm().max(1.0));
    }
    Ok(worst)
}
