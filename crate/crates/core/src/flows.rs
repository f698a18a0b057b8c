//! Lax-equation right-hand sides and time integration.
//!
//! A flow `ε∂L = [X_+, L]` keeps `L` of the form `Λ + u + vΛ⁻¹`; only the
//! `Λ⁰` and `Λ⁻¹` coefficients of the commutator are returned, divided by `ε`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diffop::{Direction, ShiftOperator};
use crate::dressing::{compute_s, default_policy, invert_series, DressingPair, LaxState, DEFAULT_ORDER};
use crate::error::{EmthError, Result};
use crate::lattice::{unit_projector, Boundary, Lattice, Mat, MatrixField, MeanPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    T,
    TBar,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowSpec {
    pub family: Family,
    pub level: usize,
    pub component: Option<usize>,
}

impl FlowSpec {
    pub fn t(level: usize, k: usize) -> Self {
        Self { family: Family::T, level, component: Some(k) }
    }

    pub fn tbar(level: usize, k: usize) -> Self {
        Self { family: Family::TBar, level, component: Some(k) }
    }

    pub fn s(level: usize) -> Self {
        Self { family: Family::S, level, component: None }
    }

    pub fn component_for(&self, dim: usize) -> Result<usize> {
        let k = self.component.ok_or_else(|| EmthError::InvalidInput(format!("flow {self} needs a component")))?;
        if k == 0 || k > dim {
            return Err(EmthError::ComponentOutOfRange { k, n: dim });
        }
        Ok(k)
    }
}

impl fmt::Display for FlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.family, self.component) {
            (Family::T, Some(k)) => write!(f, "t,{},{}", self.level, k),
            (Family::TBar, Some(k)) => write!(f, "tbar,{},{}", self.level, k),
            (_, _) => write!(f, "s,{}", self.level),
        }
    }
}

impl FromStr for FlowSpec {
    type Err = EmthError;

    /// Parses `t,j,k`, `tbar,j,k` or `s,j`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |p: &str| -> Result<usize> {
            p.parse().map_err(|_| EmthError::InvalidInput(format!("bad flow index '{p}' in '{s}'")))
        };
        match parts.as_slice() {
            ["t", j, k] => Ok(Self::t(num(j)?, num(k)?)),
            ["tbar", j, k] => Ok(Self::tbar(num(j)?, num(k)?)),
            ["s", j] => Ok(Self::s(num(j)?)),
            _ => Err(EmthError::InvalidInput(format!("unrecognised flow '{s}'; expected t,j,k | tbar,j,k | s,j"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub order: usize,
    pub policy: MeanPolicy,
    /// Fail when positive-power leakage exceeds `leak_tol`.
    pub enforce_band: bool,
    pub leak_tol: f64,
    /// Cells at each end of a decaying window where the right-hand side is
    /// held at zero (the state is vacuum there). `None` picks `level + 2`
    /// for the `t` family and `order + 2` for flows built from `S̄`.
    pub hold_cells: Option<usize>,
}

impl FlowOptions {
    pub fn for_lattice(lattice: &Lattice) -> Self {
        Self {
            order: DEFAULT_ORDER,
            policy: default_policy(lattice),
            enforce_band: lattice.boundary() == Boundary::Decaying,
            leak_tol: 1e-10,
            hold_cells: None,
        }
    }
}

/// Right-hand side of one flow together with its band diagnostics.
#[derive(Debug, Clone)]
pub struct FlowRhs {
    pub du: MatrixField,
    pub dv: MatrixField,
    /// Largest coefficient of `[X_+, L]` on positive powers (checked sites).
    pub leakage: f64,
}

/// The `X` whose positive part drives the flow.
pub fn generator(state: &LaxState, pair: &DressingPair, flow: FlowSpec) -> Result<ShiftOperator> {
    match flow.family {
        Family::T => pair.b_operator(state, flow.level, flow.component_for(state.dim())?, false),
        Family::TBar => pair.b_operator(state, flow.level, flow.component_for(state.dim())?, true),
        Family::S => pair.d_operator(state, flow.level),
    }
}

fn flow_sites(lattice: &Lattice, hold: usize) -> Vec<usize> {
    lattice.interior(hold).collect()
}

fn hold_edges(field: &MatrixField, keep: &[usize]) -> MatrixField {
    if keep.len() == field.len() {
        return field.clone();
    }
    let mut mask = vec![0.0; field.len()];
    for &i in keep {
        mask[i] = 1.0;
    }
    let vals = field
        .values()
        .iter()
        .zip(&mask)
        .map(|(m, &w)| m * Complex64::new(w, 0.0))
        .collect();
    let dx = field
        .derivative_values()
        .map(|d| d.iter().zip(&mask).map(|(m, &w)| m * Complex64::new(w, 0.0)).collect());
    MatrixField::from_parts(*field.lattice(), vals, dx).expect("same shape")
}

/// `ε∂L = [X_+, L]` for the given flow.
pub fn lax_rhs(state: &LaxState, flow: FlowSpec, opts: &FlowOptions) -> Result<FlowRhs> {
    let lat = *state.lattice();
    if flow.family == Family::T {
        flow.component_for(state.dim())?;
    }
    let pair = match flow.family {
        // the t family needs only S; the barred slots stay trivial
        Family::T => {
            let s = compute_s(state, opts.order, opts.policy)?;
            let s_inv = invert_series(&s, Direction::Lower, opts.order)?;
            let id = ShiftOperator::identity(lat, state.dim());
            DressingPair { order: opts.order, s, s_inv, sbar: id.clone(), sbar_inv: id }
        }
        _ => DressingPair::new(state, opts.order, opts.policy)?,
    };
    rhs_from_pair(state, &pair, flow, opts)
}

/// As [`lax_rhs`], reusing an existing dressing.
pub fn rhs_from_pair(state: &LaxState, pair: &DressingPair, flow: FlowSpec, opts: &FlowOptions) -> Result<FlowRhs> {
    let lat = *state.lattice();
    let eps = lat.eps();
    let x_plus = generator(state, pair, flow)?.plus();
    let comm = x_plus.commutator(&state.lax())?;
    let hold = opts.hold_cells.unwrap_or(match flow.family {
        Family::T => flow.level + 2,
        _ => pair.order + 2,
    });
    let sites = flow_sites(&lat, hold);
    let top = match comm.exact_range().1 {
        Some(hi) => hi,
        None => comm.hi(),
    };
    let leakage = if top >= 1 { comm.band_norm_on(1, top, &sites) } else { 0.0 };
    let scale = x_plus.max_norm_on(&sites).max(1.0);
    if opts.enforce_band && leakage > opts.leak_tol * scale {
        let power = (1..=top)
            .max_by(|a, b| {
                comm.band_norm_on(*a, *a, &sites).total_cmp(&comm.band_norm_on(*b, *b, &sites))
            })
            .unwrap_or(1);
        return Err(EmthError::LaxManifoldLeak { power: power as i32, leakage });
    }
    let du = hold_edges(&comm.coeff(0).scale_re(1.0 / eps), &sites);
    let dv = hold_edges(&comm.coeff(-1).scale_re(1.0 / eps), &sites);
    Ok(FlowRhs { du, dv, leakage })
}

/// Closed-form `t_{1,k}` right-hand side from `U_k = ω₁E - Eω₁(x+ε)`.
pub fn toda_rhs_explicit(state: &LaxState, k: usize, opts: &FlowOptions) -> Result<(MatrixField, MatrixField)> {
    let lat = *state.lattice();
    let n = state.dim();
    let e = unit_projector(n, k)?;
    let s = compute_s(state, 1, opts.policy)?;
    let w1 = s.coeff(-1);
    let u_k = w1.right_const(&e).sub(&w1.shift(1).left_const(&e))?;
    let eps = lat.eps();
    let (u, v) = (&state.u, &state.v);
    let du = v
        .shift(1)
        .left_const(&e)
        .sub(&v.right_const(&e))?
        .add(&u_k.mul(u)?)?
        .sub(&u.mul(&u_k)?)?
        .scale_re(1.0 / eps);
    let dv = u_k.mul(v)?.sub(&v.mul(&u_k.shift(-1))?)?.scale_re(1.0 / eps);
    let sites = flow_sites(&lat, opts.hold_cells.unwrap_or(3));
    Ok((hold_edges(&du, &sites), hold_edges(&dv, &sites)))
}

/// Residual of the second-order matrix Toda equation
/// `ε∂_t(ε∂_t(e) e⁻¹) = E e(x+ε) E e⁻¹ - e E e(x-ε)⁻¹ E`
/// for `e` and its first two time derivatives, per fine site.
pub fn matrix_toda_residual(
    e: &MatrixField,
    e_t: &MatrixField,
    e_tt: &MatrixField,
    k: usize,
) -> Result<MatrixField> {
    let lat = *e.lattice();
    let eps = lat.eps();
    let proj = unit_projector(e.dim(), k)?;
    let inv = e.try_inverse().map_err(|site| EmthError::SingularLeading { site })?;
    let inv_left = e.shift(-1).try_inverse().map_err(|site| EmthError::SingularLeading { site })?;
    let a = e_t.mul(&inv)?;
    let lhs = e_tt.mul(&inv)?.sub(&a.mul(&a)?)?.scale_re(eps * eps);
    let rhs = e
        .shift(1)
        .left_const(&proj)
        .right_const(&proj)
        .mul(&inv)?
        .sub(&e.right_const(&proj).mul(&inv_left)?.right_const(&proj))?;
    lhs.sub(&rhs)
}

/// Scalar Toda residual `ε²∂²φ - (e^{φ(x+ε)-φ} - e^{φ-φ(x-ε)})` for `N = 1`,
/// written in terms of `e = e^φ`.
pub fn scalar_toda_residual(e: &MatrixField, e_t: &MatrixField, e_tt: &MatrixField) -> Result<Vec<f64>> {
    if e.dim() != 1 {
        return Err(EmthError::DimensionMismatch { expected: 1, found: e.dim() });
    }
    let lat = *e.lattice();
    let eps = lat.eps();
    let mut out = vec![f64::NAN; e.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let (Some(p), Some(m)) = (lat.shifted(i, 1), lat.shifted(i, -1)) else { continue };
        let x = e.at(i)[(0, 0)];
        let xt = e_t.at(i)[(0, 0)];
        let xtt = e_tt.at(i)[(0, 0)];
        let phi_tt = xtt / x - (xt / x) * (xt / x);
        let rhs = e.at(p)[(0, 0)] / x - x / e.at(m)[(0, 0)];
        *slot = (phi_tt * eps * eps - rhs).norm();
    }
    Ok(out)
}

/// Result of checking the `s₀` flow against the x-derivative.
#[derive(Debug, Clone)]
pub struct S0Check {
    pub du: MatrixField,
    pub dv: MatrixField,
    pub residual: f64,
}

/// Compare the `s₀` flow with `(u_x, v_x)` on sites away from the edges.
pub fn verify_s0(state: &LaxState, order: usize) -> Result<S0Check> {
    let lat = *state.lattice();
    let mut opts = FlowOptions::for_lattice(&lat);
    opts.order = order;
    opts.enforce_band = false;
    opts.hold_cells = Some(0);
    let rhs = lax_rhs(state, FlowSpec::s(0), &opts)?;
    let sites = s0_sites(&lat, order)?;
    let eu = rhs.du.sub(&state.u.derivative_x())?.max_norm_on(sites.iter().copied());
    let ev = rhs.dv.sub(&state.v.derivative_x())?.max_norm_on(sites.iter().copied());
    Ok(S0Check { du: rhs.du, dv: rhs.dv, residual: eu.max(ev) })
}

pub fn s0_sites(lattice: &Lattice, order: usize) -> Result<Vec<usize>> {
    lattice.check_sites(order + 2)
}

/// `∫ Tr u dx` on the fine grid.
pub fn trace_integral(state: &LaxState) -> f64 {
    let d = state.lattice().delta();
    state.u.trace().iter().map(|z| z.re).sum::<f64>() * d
}

/// Time-stepping record.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub flow: FlowSpec,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<LaxState>,
    /// `∫ Tr u` after every step.
    pub invariant: Vec<f64>,
    pub max_leakage: f64,
    pub abort: Option<EmthError>,
}

impl Trajectory {
    pub fn last(&self) -> &LaxState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn drift(&self) -> f64 {
        let q0 = self.invariant[0];
        self.invariant.iter().map(|q| (q - q0).abs()).fold(0.0, f64::max)
    }

    /// CSV rows `step,time,site,u_ij…,v_ij…` with entries row-major, complex
    /// entries as real and imaginary columns.
    pub fn to_csv(&self) -> String {
        let mut out = csv_header(&["step", "time"], self.states[0].dim());
        for (step, (t, st)) in self.times.iter().zip(&self.states).enumerate() {
            append_state_rows(&mut out, &format!("{step},{t:.17e}"), st);
        }
        out
    }
}

fn csv_header(leading: &[&str], n: usize) -> String {
    let mut header: Vec<String> = leading.iter().map(|s| s.to_string()).collect();
    header.push("site".into());
    header.push("x".into());
    for name in ["u", "v"] {
        for i in 1..=n {
            for j in 1..=n {
                header.push(format!("{name}_{i}{j}_re"));
                header.push(format!("{name}_{i}{j}_im"));
            }
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    out
}

/// CSV of a single state: `site,x,u_ij_re,u_ij_im,…,v_ij_re,v_ij_im,…`.
pub fn state_csv(state: &LaxState) -> String {
    let mut out = csv_header(&[], state.dim());
    let mut body = String::new();
    append_state_rows(&mut body, "", state);
    for line in body.lines() {
        out.push_str(line.strip_prefix(',').unwrap_or(line));
        out.push('\n');
    }
    out
}

/// Append one CSV row per fine site for `state`, each prefixed by `prefix`.
pub fn append_state_rows(out: &mut String, prefix: &str, state: &LaxState) {
    let lat = state.lattice();
    for site in 0..lat.fine_len() {
        out.push_str(prefix);
        out.push_str(&format!(",{site},{:.17e}", lat.x(site)));
        for f in [&state.u, &state.v] {
            push_matrix(out, f.at(site));
        }
        out.push('\n');
    }
}

fn push_matrix(out: &mut String, m: &Mat) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push_str(&format!(",{:.17e},{:.17e}", z.re, z.im));
        }
    }
}

fn axpy(state: &LaxState, h: f64, du: &MatrixField, dv: &MatrixField) -> Result<LaxState> {
    LaxState::new(state.u.add(&du.scale_re(h))?, state.v.add(&dv.scale_re(h))?)
}

/// Classical RK4 on `lax_rhs`, recording every `record_every` steps.
/// Non-finite values stop the run; the trajectory keeps the last valid
/// state and `abort` names the failing step.
pub fn integrate(
    state: &LaxState,
    flow: FlowSpec,
    dt: f64,
    steps: usize,
    record_every: usize,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    let record_every = record_every.max(1);
    let mut traj = Trajectory {
        flow,
        dt,
        times: vec![0.0],
        states: vec![state.clone()],
        invariant: vec![trace_integral(state)],
        max_leakage: 0.0,
        abort: None,
    };
    let mut cur = state.clone();
    let mut recorded = 0;
    let mut done = 0;
    for step in 1..=steps {
        let next = match rk4_step(&cur, flow, dt, opts) {
            Ok((s, leak)) => {
                traj.max_leakage = traj.max_leakage.max(leak);
                s
            }
            Err(e @ EmthError::LaxManifoldLeak { .. }) => return Err(e),
            Err(e) => {
                traj.abort = Some(EmthError::NumericalAbort { step, reason: e.to_string() });
                break;
            }
        };
        if !next.is_finite() {
            traj.abort = Some(EmthError::NumericalAbort { step, reason: "non-finite state".into() });
            break;
        }
        cur = next;
        done = step;
        traj.invariant.push(trace_integral(&cur));
        if step % record_every == 0 || step == steps {
            traj.times.push(step as f64 * dt);
            traj.states.push(cur.clone());
            recorded = step;
        }
    }
    if recorded != done {
        traj.times.push(done as f64 * dt);
        traj.states.push(cur);
    }
    Ok(traj)
}

/// One RK4 step, returning the new state and the largest leakage seen.
pub fn rk4_step(state: &LaxState, flow: FlowSpec, dt: f64, opts: &FlowOptions) -> Result<(LaxState, f64)> {
    let k1 = lax_rhs(state, flow, opts)?;
    let k2 = lax_rhs(&axpy(state, dt / 2.0, &k1.du, &k1.dv)?, flow, opts)?;
    let k3 = lax_rhs(&axpy(state, dt / 2.0, &k2.du, &k2.dv)?, flow, opts)?;
    let k4 = lax_rhs(&axpy(state, dt, &k3.du, &k3.dv)?, flow, opts)?;
    let du = k1.du.add(&k2.du.scale_re(2.0))?.add(&k3.du.scale_re(2.0))?.add(&k4.du)?;
    let dv = k1.dv.add(&k2.dv.scale_re(2.0))?.add(&k3.dv.scale_re(2.0))?.add(&k4.dv)?;
    let leak = k1.leakage.max(k2.leakage).max(k3.leakage).max(k4.leakage);
    Ok((axpy(state, dt / 6.0, &du, &dv)?, leak))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decaying(sites: usize, dim: usize, seed: u64) -> LaxState {
        let lat = Lattice::new(sites, 0.5, 2, Boundary::Decaying).unwrap();
        let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(seed), lat, dim, 0.2);
        LaxState::new(u, v).unwrap()
    }

    #[test]
    fn flow_spec_round_trip() {
        for s in ["t,1,2", "tbar,0,1", "s,0"] {
            assert_eq!(s.parse::<FlowSpec>().unwrap().to_string(), s);
        }
        assert!("x,1".parse::<FlowSpec>().is_err());
        assert!("t,1".parse::<FlowSpec>().is_err());
    }

    #[test]
    fn vacuum_is_stationary() {
        let lat = Lattice::new(8, 0.5, 2, Boundary::Decaying).unwrap();
        let st = LaxState::vacuum(lat, 2, 0.0);
        let opts = FlowOptions::for_lattice(&lat);
        let rhs = lax_rhs(&st, FlowSpec::t(1, 1), &opts).unwrap();
        assert_eq!(rhs.du.max_norm(), 0.0);
        assert_eq!(rhs.dv.max_norm(), 0.0);
    }

    #[test]
    fn scalar_reduction() {
        let st = decaying(20, 1, 1);
        let lat = *st.lattice();
        let opts = FlowOptions::for_lattice(&lat);
        let rhs = lax_rhs(&st, FlowSpec::t(1, 1), &opts).unwrap();
        let eps = lat.eps();
        let du = st.v.shift(1).sub(&st.v).unwrap().scale_re(1.0 / eps);
        let dv = st.v.mul(&st.u.sub(&st.u.shift(-1)).unwrap()).unwrap().scale_re(1.0 / eps);
        let sites = lat.interior(3);
        assert!(rhs.du.sub(&du).unwrap().max_norm_on(sites.clone()) < 1e-13);
        assert!(rhs.dv.sub(&dv).unwrap().max_norm_on(sites) < 1e-13);
    }

    #[test]
    fn explicit_and_operator_paths_agree() {
        let st = decaying(20, 2, 2);
        let opts = FlowOptions::for_lattice(st.lattice());
        for k in 1..=2 {
            let rhs = lax_rhs(&st, FlowSpec::t(1, k), &opts).unwrap();
            let (du, dv) = toda_rhs_explicit(&st, k, &opts).unwrap();
            assert!(rhs.du.sub(&du).unwrap().max_norm() < 1e-12);
            assert!(rhs.dv.sub(&dv).unwrap().max_norm() < 1e-12);
        }
    }

    #[test]
    fn component_out_of_range() {
        let st = decaying(12, 2, 3);
        let opts = FlowOptions::for_lattice(st.lattice());
        assert!(matches!(
            lax_rhs(&st, FlowSpec::t(1, 3), &opts),
            Err(EmthError::ComponentOutOfRange { k: 3, n: 2 })
        ));
        let e = MatrixField::identity(*st.lattice(), 2);
        assert!(matches!(matrix_toda_residual(&e, &e, &e, 0), Err(EmthError::ComponentOutOfRange { .. })));
    }

    #[test]
    fn higher_flows_stay_on_lax_manifold() {
        let st = decaying(24, 2, 4);
        let opts = FlowOptions::for_lattice(st.lattice());
        for flow in [FlowSpec::t(2, 1), FlowSpec::t(3, 2), FlowSpec::tbar(1, 1), FlowSpec::tbar(2, 2)] {
            let rhs = lax_rhs(&st, flow, &opts).unwrap();
            assert!(rhs.leakage < 1e-10, "{flow}: {}", rhs.leakage);
        }
    }

    #[test]
    fn constant_state_has_zero_s0_residual() {
        let lat = Lattice::new(16, 0.5, 2, Boundary::Decaying).unwrap();
        let st = LaxState::vacuum(lat, 2, 1.0);
        assert_eq!(verify_s0(&st, 4).unwrap().residual, 0.0);
    }

    #[test]
    fn s0_flow_on_sech_profile() {
        let lat = Lattice::centered(32, 1.0, 8, Boundary::Decaying).unwrap();
        let a = 0.4;
        let u = MatrixField::from_fn_with_derivative(
            lat,
            2,
            |x| Mat::identity(2, 2) * Complex64::new(a / x.cosh().powi(2), 0.0),
            |x| Mat::identity(2, 2) * Complex64::new(-2.0 * a * x.tanh() / x.cosh().powi(2), 0.0),
        );
        let st = LaxState::new(u, MatrixField::identity(lat, 2)).unwrap();
        let check = verify_s0(&st, 6).unwrap();
        assert!(check.residual < 1e-10, "{}", check.residual);
    }

    #[test]
    fn zero_rhs_trajectory_is_constant() {
        let lat = Lattice::new(8, 0.5, 2, Boundary::Periodic).unwrap();
        let st = LaxState::vacuum(lat, 2, 1.0);
        let opts = FlowOptions::for_lattice(&lat);
        let traj = integrate(&st, FlowSpec::t(1, 1), 1e-2, 5, 1, &opts).unwrap();
        assert_eq!(traj.states.len(), 6);
        assert!(traj.states.iter().all(|s| s == &st));
        assert_eq!(traj.drift(), 0.0);
    }

    #[test]
    fn periodic_trace_is_conserved() {
        let lat = Lattice::new(12, 0.5, 1, Boundary::Periodic).unwrap();
        let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(5), lat, 2, 0.3);
        let st = LaxState::new(u, v).unwrap();
        let opts = FlowOptions::for_lattice(&lat);
        let traj = integrate(&st, FlowSpec::t(1, 2), 1e-3, 20, 10, &opts).unwrap();
        assert!(traj.drift() < 1e-12, "{}", traj.drift());
        assert!(traj.abort.is_none());
    }

    #[test]
    fn divergence_aborts_with_last_valid_state() {
        let lat = Lattice::new(8, 0.5, 1, Boundary::Periodic).unwrap();
        let mut st = LaxState::vacuum(lat, 1, 1.0);
        st.u.set(2, Mat::from_element(1, 1, Complex64::new(f64::NAN, 0.0)));
        let opts = FlowOptions::for_lattice(&lat);
        let traj = integrate(&st, FlowSpec::t(1, 1), 1e-2, 3, 1, &opts).unwrap();
        assert!(matches!(traj.abort, Some(EmthError::NumericalAbort { step: 1, .. })));
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.invariant.len(), 1);
    }

    #[test]
    fn csv_has_one_row_per_site_and_step() {
        let lat = Lattice::new(4, 0.5, 1, Boundary::Periodic).unwrap();
        let st = LaxState::vacuum(lat, 2, 1.0);
        let opts = FlowOptions::for_lattice(&lat);
        let traj = integrate(&st, FlowSpec::t(1, 1), 1e-2, 2, 1, &opts).unwrap();
        let csv = traj.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3 * 4);
        assert_eq!(lines[0].split(',').count(), 4 + 2 * 2 * 4);
        assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
    }
}
