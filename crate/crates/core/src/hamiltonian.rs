//! Hamiltonian densities, variational gradients, the two Poisson structures
//! and checks of the flow, recursion and tau-symmetry relations.
//!
//! A gradient `G = (G_u, G_v)` is paired with a variation by
//! `⟨G, (du, dv)⟩ = δ Σ_x Tr(G_u du + G_v dv)`, so `(G_u)_{ji}` is the
//! derivative along `u_{ij}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dressing::{compute_s, factorial, invert_series, DressingPair, LaxState};
use crate::diffop::{Direction, ShiftOperator};
use crate::error::{EmthError, Result};
use crate::flows::{lax_rhs, rk4_step, Family, FlowOptions, FlowSpec};
use crate::lattice::{Boundary, Lattice, Mat, MatrixField, MeanPolicy, SumVariant};

/// Offset between a flow level and the Hamiltonian generating it through
/// `P1`: `t_{j,k}` is generated by `H_{j+1,k} / (j+1)`, `t̄_{j,k}` by
/// `H̄_{j+1,k} / (j+1)` and `s_j` by `H̃_{j+1}`. Offset 0 fails the cross-path
/// check (`offset_zero_is_rejected` in the tests).
pub const FLOW_HAMILTONIAN_OFFSET: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Density {
    /// `h_{j,k} = Tr Res C_kk L^j`
    H { level: usize, component: usize },
    /// `h̄_{j,k} = Tr Res C̄_kk L^j`
    HBar { level: usize, component: usize },
    /// `h̃_j = (2/j!) Tr Res L^j (log L - c_j)`
    HTilde { level: usize },
}

impl Density {
    fn needs_bar(&self) -> bool {
        !matches!(self, Density::H { .. })
    }

    fn level(&self) -> usize {
        match *self {
            Density::H { level, .. } | Density::HBar { level, .. } | Density::HTilde { level } => level,
        }
    }

    /// Density paired with a flow in the tau-symmetry relation.
    pub fn for_flow(flow: FlowSpec, dim: usize) -> Result<Self> {
        Ok(match flow.family {
            Family::T => Density::H { level: flow.level, component: flow.component_for(dim)? },
            Family::TBar => Density::HBar { level: flow.level, component: flow.component_for(dim)? },
            Family::S => Density::HTilde { level: flow.level },
        })
    }

    /// Hamiltonian and scale factor generating `flow` through `P1`.
    pub fn generating(flow: FlowSpec, dim: usize) -> Result<(Self, f64)> {
        let n = flow.level + FLOW_HAMILTONIAN_OFFSET;
        Ok(match flow.family {
            Family::T => (Density::H { level: n, component: flow.component_for(dim)? }, 1.0 / n as f64),
            Family::TBar => (Density::HBar { level: n, component: flow.component_for(dim)? }, 1.0 / n as f64),
            Family::S => (Density::HTilde { level: n }, 1.0),
        })
    }
}

fn dressing(state: &LaxState, bar: bool, order: usize) -> Result<DressingPair> {
    let policy = crate::dressing::default_policy(state.lattice());
    if bar {
        return DressingPair::new(state, order, policy);
    }
    let lat = *state.lattice();
    let s = compute_s(state, order, policy)?;
    let s_inv = invert_series(&s, Direction::Lower, order)?;
    let id = ShiftOperator::identity(lat, state.dim());
    Ok(DressingPair { order, s, s_inv, sbar: id.clone(), sbar_inv: id })
}

/// Operator whose residue is the density: `C_kk L^j`, `C̄_kk L^j` or `D_j`.
fn density_operator(state: &LaxState, pair: &DressingPair, d: Density, level: usize) -> Result<ShiftOperator> {
    match d {
        Density::H { component, .. } => pair.b_operator(state, level, component, false),
        Density::HBar { component, .. } => pair.b_operator(state, level, component, true),
        Density::HTilde { .. } => pair.d_operator(state, level),
    }
}

/// Per-site density.
pub fn density(state: &LaxState, d: Density, order: usize) -> Result<Vec<Complex64>> {
    let pair = dressing(state, d.needs_bar(), order.max(d.level()))?;
    Ok(density_operator(state, &pair, d, d.level())?.trace_residue())
}

/// `δ Σ density`.
pub fn functional(state: &LaxState, d: Density, order: usize) -> Result<Complex64> {
    let delta = state.lattice().delta();
    Ok(density(state, d, order)?.iter().sum::<Complex64>() * delta)
}

#[derive(Debug, Clone)]
pub struct GradientField {
    pub du: MatrixField,
    pub dv: MatrixField,
}

impl GradientField {
    pub fn zeros(lattice: Lattice, dim: usize) -> Self {
        Self { du: MatrixField::zeros(lattice, dim), dv: MatrixField::zeros(lattice, dim) }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        Self { du: self.du.scale_re(c), dv: self.dv.scale_re(c) }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        Ok(Self { du: self.du.add(&o.du)?, dv: self.dv.add(&o.dv)? })
    }

    /// `δ Σ Tr(G_u du + G_v dv)`.
    pub fn pairing(&self, du: &MatrixField, dv: &MatrixField) -> Complex64 {
        let delta = self.du.lattice().delta();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..du.len() {
            acc += (self.du.at(i) * du.at(i)).trace() + (self.dv.at(i) * dv.at(i)).trace();
        }
        acc * delta
    }

    pub fn max_norm_on(&self, sites: &[usize]) -> f64 {
        self.du.max_norm_on(sites.iter().copied()).max(self.dv.max_norm_on(sites.iter().copied()))
    }

    pub fn distance_on(&self, o: &Self, sites: &[usize]) -> Result<f64> {
        let a = self.du.sub(&o.du)?.max_norm_on(sites.iter().copied());
        let b = self.dv.sub(&o.dv)?.max_norm_on(sites.iter().copied());
        Ok(a.max(b))
    }
}

/// Gradient from the coefficients of the operator `X` behind the density:
/// `∇ = (x₀, x₁(x-ε))`, where `X = j C_kk L^{j-1}` for `H_{j,k}` (same with
/// `C̄`) and `X = D_{j-1}` for `H̃_j`. `H_{0,k}` and `H̃₀` have zero gradient.
pub fn analytic_gradient(state: &LaxState, d: Density, order: usize) -> Result<GradientField> {
    let lat = *state.lattice();
    let n = d.level();
    if n == 0 {
        return Ok(GradientField::zeros(lat, state.dim()));
    }
    let pair = dressing(state, d.needs_bar(), order.max(n))?;
    let x = density_operator(state, &pair, d, n - 1)?;
    let factor = match d {
        Density::HTilde { .. } => 1.0,
        _ => n as f64,
    };
    Ok(GradientField { du: x.coeff(0).scale_re(factor), dv: x.coeff(1).shift(-1).scale_re(factor) })
}

/// Per-entry central differences of `f` at the given sites (other sites get
/// zero). Perturbed states carry no exact x-derivative.
pub fn numeric_gradient(
    state: &LaxState,
    f: impl Fn(&LaxState) -> Result<Complex64>,
    sites: &[usize],
    step: f64,
) -> Result<GradientField> {
    let lat = *state.lattice();
    let n = state.dim();
    let delta = lat.delta();
    let mut out = GradientField::zeros(lat, n);
    for &site in sites {
        for field in 0..2 {
            let mut g = Mat::zeros(n, n);
            for a in 0..n {
                for b in 0..n {
                    let probe = |h: f64| -> Result<Complex64> {
                        let mut st = state.clone();
                        let target = if field == 0 { &mut st.u } else { &mut st.v };
                        let mut m = target.at(site).clone();
                        m[(a, b)] += Complex64::new(h, 0.0);
                        target.set(site, m);
                        f(&st)
                    };
                    let val = (probe(step)? - probe(-step)?) / (2.0 * step * delta);
                    if !val.is_finite() {
                        return Err(EmthError::NumericalAbort { step: site, reason: "non-finite functional".into() });
                    }
                    g[(b, a)] = val;
                }
            }
            if field == 0 { out.du.set(site, g) } else { out.dv.set(site, g) }
        }
    }
    Ok(out)
}

/// Central difference of `f` along `(du, dv)`; jets on the direction are kept.
pub fn directional_derivative(
    state: &LaxState,
    f: impl Fn(&LaxState) -> Result<Complex64>,
    du: &MatrixField,
    dv: &MatrixField,
    step: f64,
) -> Result<Complex64> {
    let at = |h: f64| -> Result<Complex64> {
        f(&LaxState::new(state.u.add(&du.scale_re(h))?, state.v.add(&dv.scale_re(h))?)?)
    };
    Ok((at(step)? - at(-step)?) / (2.0 * step))
}

fn commutator(a: &MatrixField, b: &MatrixField) -> Result<MatrixField> {
    a.mul(b)?.sub(&b.mul(a)?)
}

/// First structure:
/// `u̇ = ([G_u, u] + G_v(x+ε)v(x+ε) - vG_v)/ε`, `v̇ = (G_u v - vG_u(x-ε))/ε`.
pub fn apply_p1(state: &LaxState, g: &GradientField) -> Result<(MatrixField, MatrixField)> {
    let eps = state.lattice().eps();
    let v = &state.v;
    let q = p1_u(state, g)?;
    let dv = g.du.mul(v)?.sub(&v.mul(&g.du.shift(-1))?)?;
    Ok((q.scale_re(1.0 / eps), dv.scale_re(1.0 / eps)))
}

fn p1_u(state: &LaxState, g: &GradientField) -> Result<MatrixField> {
    let (u, v) = (&state.u, &state.v);
    commutator(&g.du, u)?.add(&g.dv.mul(v)?.shift(1))?.sub(&v.mul(&g.dv)?)
}

/// Inverse of `Λ - 1` used inside the second structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SumKernel {
    /// Left running sum on a decaying window, zero-mean inverse on a
    /// periodic lattice; matches the gauge of `S`.
    Left,
    /// Left running sum minus half the coset total (decaying) or half the
    /// coset mean (periodic), so that `K + Kᵀ = -1` on a decaying window.
    Principal,
}

/// Second structure. With `Q = [G_u, u] + G_v(x+ε)v(x+ε) - vG_v` and
/// `R = (Λ-1)⁻¹Q`:
/// `u̇ = (G_u(x+ε)v(x+ε) - vG_u(x-ε) + R(x+ε)u - uR)/ε`,
/// `v̇ = (uG_u v - vG_u(x-ε)u(x-ε) + R(x+ε)v - vR(x-ε))/ε`.
pub fn apply_p2(state: &LaxState, g: &GradientField) -> Result<(MatrixField, MatrixField)> {
    apply_p2_with(state, g, SumKernel::Left)
}

pub fn apply_p2_with(state: &LaxState, g: &GradientField, kernel: SumKernel) -> Result<(MatrixField, MatrixField)> {
    let lat = *state.lattice();
    let eps = lat.eps();
    let (u, v) = (&state.u, &state.v);
    let policy = match lat.boundary() {
        Boundary::Periodic => MeanPolicy::Project,
        Boundary::Decaying => MeanPolicy::Reject,
    };
    let q = p1_u(state, g)?;
    let mut r = q.sum_inverse(SumVariant::ForwardDifference, policy)?;
    if kernel == SumKernel::Principal {
        let per_coset = match lat.boundary() {
            Boundary::Periodic => 0.5,
            Boundary::Decaying => 0.5 * lat.sites() as f64,
        };
        let means = q.coset_means();
        for i in 0..r.len() {
            let m = r.at(i) - &means[lat.coset(i)] * Complex64::new(per_coset, 0.0);
            r.set(i, m);
        }
    }
    let du = g
        .du
        .mul(v)?
        .shift(1)
        .sub(&v.mul(&g.du.shift(-1))?)?
        .add(&r.shift(1).mul(u)?)?
        .sub(&u.mul(&r)?)?;
    let dv = u
        .mul(&g.du)?
        .mul(v)?
        .sub(&v.mul(&g.du.mul(u)?.shift(-1))?)?
        .add(&r.shift(1).mul(v)?)?
        .sub(&v.mul(&r.shift(-1))?)?;
    Ok((du.scale_re(1.0 / eps), dv.scale_re(1.0 / eps)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    P1,
    P2(SumKernel),
}

pub fn apply(structure: Structure, state: &LaxState, g: &GradientField) -> Result<(MatrixField, MatrixField)> {
    match structure {
        Structure::P1 => apply_p1(state, g),
        Structure::P2(kernel) => apply_p2_with(state, g, kernel),
    }
}

/// Matrix of the bilinear form `(G', G) ↦ ⟨G', P G⟩` in the basis of single
/// entries `(field, site, a, b)`; antisymmetric for a Poisson structure.
pub fn assemble(structure: Structure, state: &LaxState) -> Result<DMatrix<Complex64>> {
    let lat = *state.lattice();
    let n = state.dim();
    let len = lat.fine_len();
    let size = 2 * len * n * n;
    let index = |field: usize, site: usize, a: usize, b: usize| ((field * len + site) * n + a) * n + b;
    let delta = lat.delta();
    let mut out = DMatrix::zeros(size, size);
    for field in 0..2 {
        for site in 0..len {
            for a in 0..n {
                for b in 0..n {
                    let mut g = GradientField::zeros(lat, n);
                    let mut m = Mat::zeros(n, n);
                    m[(a, b)] = Complex64::new(1.0, 0.0);
                    if field == 0 { g.du.set(site, m) } else { g.dv.set(site, m) }
                    let (du, dv) = apply(structure, state, &g)?;
                    let col = index(field, site, a, b);
                    for (f2, res) in [du, dv].iter().enumerate() {
                        for s2 in 0..len {
                            for a2 in 0..n {
                                for b2 in 0..n {
                                    // Tr(E_{a2 b2} Ẋ) = Ẋ_{b2 a2}
                                    out[(index(f2, s2, a2, b2), col)] = res.at(s2)[(b2, a2)] * delta;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `max |P + Pᵀ| / max |P|` of the assembled form.
/// On a decaying window only gradients supported away from the first and
/// last cell enter, since the edge cells carry the summation gauge.
pub fn antisymmetry_residual(structure: Structure, state: &LaxState) -> Result<f64> {
    let lat = *state.lattice();
    let n = state.dim();
    let full = assemble(structure, state)?;
    let keep: Vec<usize> = (0..full.nrows())
        .filter(|&i| lat.interior(1).contains(&((i / (n * n)) % lat.fine_len())))
        .collect();
    let p = full.select_rows(&keep).select_columns(&keep);
    let sym = &p + p.transpose();
    let norm = |m: &DMatrix<Complex64>| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(norm(&sym) / norm(&p).max(f64::MIN_POSITIVE))
}

/// Jacobi identity of `P1` on three linear functionals with constant-in-state
/// gradients `f, g, h`: `{F,{G,H}} + {G,{H,F}} + {H,{F,G}}`.
pub fn jacobi_p1(state: &LaxState, f: &GradientField, g: &GradientField, h: &GradientField) -> Result<f64> {
    let lat = *state.lattice();
    let n = state.dim();
    let bracket = |st: &LaxState, a: &GradientField, b: &GradientField| -> Result<Complex64> {
        let (du, dv) = apply_p1(st, b)?;
        Ok(a.pairing(&du, &dv))
    };
    // {G,H} is linear in (u, v): its gradient is read off basis states exactly
    let gradient_of = |a: &GradientField, b: &GradientField| -> Result<GradientField> {
        let zero = LaxState::new(MatrixField::zeros(lat, n), MatrixField::zeros(lat, n))?;
        let base = bracket(&zero, a, b)?;
        let all: Vec<usize> = (0..lat.fine_len()).collect();
        numeric_gradient(&zero, |st| Ok(bracket(st, a, b)? - base), &all, 1.0)
    };
    let term = |a: &GradientField, b: &GradientField, c: &GradientField| -> Result<Complex64> {
        bracket(state, a, &gradient_of(b, c)?)
    };
    let total = term(f, g, h)? + term(g, h, f)? + term(h, f, g)?;
    let scale = term(f, g, h)?.norm().max(term(g, h, f)?.norm()).max(1.0);
    Ok(total.norm() / scale)
}

/// How a verification obtains the gradient of the generating Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientSource {
    Analytic,
    /// Central differences of the functional; `H` and `H̄` families only.
    Numeric,
}

/// Sites at least `margin` cells away from the edges of a decaying window.
pub fn check_sites(lattice: &Lattice, margin: usize) -> Result<Vec<usize>> {
    lattice.check_sites(margin)
}

fn gradient(state: &LaxState, d: Density, order: usize, source: GradientSource) -> Result<GradientField> {
    match source {
        GradientSource::Analytic => analytic_gradient(state, d, order),
        GradientSource::Numeric => {
            if matches!(d, Density::HTilde { .. }) {
                return Err(EmthError::InvalidInput("numeric gradients need the H or H-bar family".into()));
            }
            let all: Vec<usize> = (0..state.lattice().fine_len()).collect();
            let scale = state.u.max_norm().max(state.v.max_norm()).max(1.0);
            numeric_gradient(state, |st| functional(st, d, order), &all, 3e-5 * scale)
        }
    }
}

fn relative_gap(a: &(MatrixField, MatrixField), b: &(MatrixField, MatrixField), sites: &[usize]) -> Result<f64> {
    let it = || sites.iter().copied();
    let gap = a.0.sub(&b.0)?.max_norm_on(it()).max(a.1.sub(&b.1)?.max_norm_on(it()));
    let scale = a.0.max_norm_on(it()).max(a.1.max_norm_on(it())).max(b.0.max_norm_on(it())).max(b.1.max_norm_on(it()));
    Ok(gap / scale.max(1.0))
}

/// `‖P1 ∇H - lax_rhs(flow)‖` relative, on interior sites, with the
/// Hamiltonian chosen by [`FLOW_HAMILTONIAN_OFFSET`].
pub fn verify_flow_hamiltonian(
    state: &LaxState,
    flow: FlowSpec,
    order: usize,
    source: GradientSource,
) -> Result<f64> {
    let (d, factor) = Density::generating(flow, state.dim())?;
    verify_flow_with(state, flow, d, factor, order, source)
}

/// As [`verify_flow_hamiltonian`] with an explicit Hamiltonian.
pub fn verify_flow_with(
    state: &LaxState,
    flow: FlowSpec,
    d: Density,
    factor: f64,
    order: usize,
    source: GradientSource,
) -> Result<f64> {
    let lat = *state.lattice();
    let g = gradient(state, d, order, source)?.scale_re(factor);
    let bracket = apply_p1(state, &g)?;
    let mut opts = FlowOptions::for_lattice(&lat);
    opts.order = order;
    opts.enforce_band = false;
    let rhs = lax_rhs(state, flow, &opts)?;
    let sites = check_sites(&lat, order + 3)?;
    relative_gap(&bracket, &(rhs.du, rhs.dv), &sites)
}

/// `P2 ∇(H_{n,k}/n) - P1 ∇(H_{n+1,k}/(n+1))`, relative, on interior sites.
pub fn verify_recursion(state: &LaxState, n: usize, k: usize, order: usize, source: GradientSource) -> Result<f64> {
    let lat = *state.lattice();
    let lo = gradient(state, Density::H { level: n, component: k }, order, source)?.scale_re(1.0 / n.max(1) as f64);
    let hi = gradient(state, Density::H { level: n + 1, component: k }, order, source)?.scale_re(1.0 / (n + 1) as f64);
    let sites = check_sites(&lat, order + 3)?;
    relative_gap(&apply_p2(state, &lo)?, &apply_p1(state, &hi)?, &sites)
}

/// `P2 ∇H̃_n - n P1 ∇H̃_{n+1} - (2/n!) Σ_k P1 ∇(H_{n+1,k}/(n+1))`, relative.
pub fn verify_tilde_recursion(state: &LaxState, n: usize, order: usize) -> Result<f64> {
    let lat = *state.lattice();
    let dim = state.dim();
    let lhs = apply_p2(state, &analytic_gradient(state, Density::HTilde { level: n }, order)?)?;
    let mut g = analytic_gradient(state, Density::HTilde { level: n + 1 }, order)?.scale_re(n as f64);
    for k in 1..=dim {
        let h = analytic_gradient(state, Density::H { level: n + 1, component: k }, order)?;
        g = g.add(&h.scale_re(2.0 / factorial(n) / (n + 1) as f64))?;
    }
    let rhs = apply_p1(state, &g)?;
    let sites = check_sites(&lat, order + 3)?;
    relative_gap(&lhs, &rhs, &sites)
}

/// Time derivative of a density along a flow by central differences.
pub fn density_rate(state: &LaxState, d: Density, flow: FlowSpec, dt: f64, order: usize) -> Result<Vec<Complex64>> {
    let mut opts = FlowOptions::for_lattice(state.lattice());
    opts.order = order;
    opts.enforce_band = false;
    let (plus, _) = rk4_step(state, flow, dt, &opts)?;
    let (minus, _) = rk4_step(state, flow, -dt, &opts)?;
    let hp = density(&plus, d, order)?;
    let hm = density(&minus, d, order)?;
    Ok(hp.iter().zip(&hm).map(|(a, b)| (a - b) / (2.0 * dt)).collect())
}

/// `max |∂_b h_a - ∂_a h_b|` over interior sites, each density being the one
/// paired with its flow.
pub fn verify_tau_symmetry(state: &LaxState, a: FlowSpec, b: FlowSpec, dt: f64, order: usize) -> Result<f64> {
    let dim = state.dim();
    let ha = Density::for_flow(a, dim)?;
    let hb = Density::for_flow(b, dim)?;
    let lhs = density_rate(state, ha, b, dt, order)?;
    let rhs = density_rate(state, hb, a, dt, order)?;
    let sites = check_sites(state.lattice(), order + 4)?;
    Ok(sites.iter().map(|&i| (lhs[i] - rhs[i]).norm()).fold(0.0, f64::max))
}

/// Solve `(Λ-1) g = h/ε` for `g = ∂ log τ`. On a periodic lattice the
/// per-coset mean `m` is carried by the affine part `m x / ε²` and the rest
/// by the zero-mean inverse; on a decaying window `g` is the left running sum.
pub fn tau_log_increment(lattice: Lattice, h: &[Complex64]) -> Result<Vec<Complex64>> {
    let eps = lattice.eps();
    let vals: Vec<Mat> = h.iter().map(|z| Mat::from_element(1, 1, z / eps)).collect();
    let f = MatrixField::from_values(lattice, vals)?;
    match lattice.boundary() {
        Boundary::Decaying => {
            let g = f.sum_inverse(SumVariant::ForwardDifference, MeanPolicy::Reject)?;
            Ok(g.values().iter().map(|m| m[(0, 0)]).collect())
        }
        Boundary::Periodic => {
            let means = f.coset_means();
            let g = f.sum_inverse(SumVariant::ForwardDifference, MeanPolicy::Project)?;
            Ok((0..lattice.fine_len())
                .map(|i| g.at(i)[(0, 0)] + means[lattice.coset(i)][(0, 0)] * (lattice.x(i) / eps))
                .collect())
        }
    }
}

/// Mixed-partial mismatch of `log τ`: `(Λ-1)⁻¹` applied to
/// `(∂_b h_a - ∂_a h_b)/ε` on a decaying window, max over interior sites.
pub fn tau_mixed_partials(state: &LaxState, a: FlowSpec, b: FlowSpec, dt: f64, order: usize) -> Result<f64> {
    let lat = *state.lattice();
    let dim = state.dim();
    let lhs = density_rate(state, Density::for_flow(a, dim)?, b, dt, order)?;
    let rhs = density_rate(state, Density::for_flow(b, dim)?, a, dt, order)?;
    let sites = check_sites(&lat, order + 4)?;
    let keep: std::collections::HashSet<usize> = sites.iter().copied().collect();
    let diff: Vec<Complex64> = (0..lat.fine_len())
        .map(|i| if keep.contains(&i) { lhs[i] - rhs[i] } else { Complex64::new(0.0, 0.0) })
        .collect();
    let g = tau_log_increment(lat, &diff)?;
    Ok(sites.iter().map(|&i| g[i].norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{charge_free_state, edge_bump, modulate, random_state, smooth_random_field};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn decaying_state(seed: u64, sites: usize, refine: usize) -> LaxState {
        let lat = Lattice::centered(sites, 1.0, refine, Boundary::Decaying).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = charge_free_state(&mut rng, lat, 2, 0.3);
        LaxState::new(u, v).unwrap()
    }

    fn periodic_state(seed: u64, sites: usize) -> LaxState {
        let lat = Lattice::new(sites, 1.0, 1, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = random_state(&mut rng, lat, 2, 0.3);
        LaxState::new(u, v).unwrap()
    }

    #[test]
    fn low_densities() {
        let st = decaying_state(1, 28, 1);
        let sites = check_sites(st.lattice(), 3).unwrap();
        for k in 1..=2 {
            let h0 = density(&st, Density::H { level: 0, component: k }, 4).unwrap();
            let h1 = density(&st, Density::H { level: 1, component: k }, 4).unwrap();
            for &i in &sites {
                assert!((h0[i] - 1.0).norm() < 1e-13);
                assert!((h1[i] - st.u.at(i)[(k - 1, k - 1)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn linear_and_quadratic_gradients() {
        let st = decaying_state(2, 12, 1);
        let all: Vec<usize> = (0..st.lattice().fine_len()).collect();
        let delta = st.lattice().delta();
        let lin = numeric_gradient(&st, |s| Ok(s.u.entry(1, 1).iter().sum::<Complex64>() * delta), &all, 1e-3).unwrap();
        let e = crate::lattice::unit_projector(2, 2).unwrap();
        for &i in &all {
            assert!((lin.du.at(i) - &e).norm() < 1e-10);
            assert!(lin.dv.at(i).norm() < 1e-10);
        }
        let quad = numeric_gradient(
            &st,
            |s| Ok(s.u.mul(&s.v).unwrap().trace().iter().sum::<Complex64>() * delta),
            &all,
            1e-4,
        )
        .unwrap();
        for &i in &all {
            assert!((quad.du.at(i) - st.v.at(i)).norm() < 1e-8);
            assert!((quad.dv.at(i) - st.u.at(i)).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_gradient_gives_zero_action() {
        let st = periodic_state(3, 8);
        let g = GradientField::zeros(*st.lattice(), 2);
        for s in [Structure::P1, Structure::P2(SumKernel::Left)] {
            let (du, dv) = apply(s, &st, &g).unwrap();
            assert_eq!(du.max_norm(), 0.0);
            assert_eq!(dv.max_norm(), 0.0);
        }
    }

    #[test]
    fn structures_are_antisymmetric() {
        let st = periodic_state(4, 8);
        assert!(antisymmetry_residual(Structure::P1, &st).unwrap() < 1e-12);
        let lat = Lattice::new(8, 1.0, 1, Boundary::Decaying).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (u, v) = crate::random::random_state(&mut rng, lat, 2, 0.3);
        let open = LaxState::new(crate::random::random_field(&mut rng, lat, 2, 0.3), v.add(&u).unwrap()).unwrap();
        assert!(antisymmetry_residual(Structure::P1, &open).unwrap() < 1e-12);
        assert!(antisymmetry_residual(Structure::P2(SumKernel::Principal), &open).unwrap() < 1e-12);
    }

    #[test]
    fn periodic_p2_zero_modes() {
        // scalar case is antisymmetric; matrix case keeps a zero-mode defect
        let lat = Lattice::new(8, 1.0, 1, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (u1, v1) = random_state(&mut rng, lat, 1, 0.3);
        let scalar = LaxState::new(u1, v1).unwrap();
        assert!(antisymmetry_residual(Structure::P2(SumKernel::Left), &scalar).unwrap() < 1e-12);
        let st = periodic_state(4, 8);
        assert!(antisymmetry_residual(Structure::P2(SumKernel::Principal), &st).unwrap() > 1e-3);
    }

    #[test]
    fn p1_jacobi() {
        let st = periodic_state(5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lat = *st.lattice();
        let mut rand_grad = || GradientField {
            du: crate::random::random_field(&mut rng, lat, 2, 1.0),
            dv: crate::random::random_field(&mut rng, lat, 2, 1.0),
        };
        let (f, g, h) = (rand_grad(), rand_grad(), rand_grad());
        assert!(jacobi_p1(&st, &f, &g, &h).unwrap() < 1e-10);
    }

    #[test]
    fn h2_gradient_matches_numeric() {
        let st = decaying_state(6, 28, 1);
        let sites = check_sites(st.lattice(), 5).unwrap();
        let d = Density::H { level: 2, component: 1 };
        let a = analytic_gradient(&st, d, 4).unwrap();
        let n = gradient(&st, d, 4, GradientSource::Numeric).unwrap();
        let gap = a.distance_on(&n, &sites).unwrap() / a.max_norm_on(&sites).max(1.0);
        assert!(gap < 1e-6, "{gap}");
    }

    #[test]
    fn toda_flow_is_hamiltonian() {
        let st = decaying_state(7, 28, 1);
        for k in 1..=2 {
            let r = verify_flow_hamiltonian(&st, FlowSpec::t(1, k), 4, GradientSource::Numeric).unwrap();
            assert!(r < 1e-8, "{r}");
            let r = verify_flow_hamiltonian(&st, FlowSpec::t(2, k), 5, GradientSource::Analytic).unwrap();
            assert!(r < 1e-10, "{r}");
        }
    }

    #[test]
    fn offset_zero_is_rejected() {
        let st = decaying_state(7, 28, 1);
        let r = verify_flow_with(&st, FlowSpec::t(1, 1), Density::H { level: 1, component: 1 }, 1.0, 4, GradientSource::Numeric)
            .unwrap();
        assert!(r > 1e-2, "{r}");
    }

    #[test]
    fn zero_state_flow_residual() {
        let lat = Lattice::new(20, 1.0, 1, Boundary::Decaying).unwrap();
        let st = LaxState::vacuum(lat, 2, 1.0);
        assert!(verify_flow_hamiltonian(&st, FlowSpec::t(1, 1), 4, GradientSource::Analytic).unwrap() < 1e-14);
    }

    #[test]
    fn first_recursion_step() {
        let st = decaying_state(8, 28, 1);
        for k in 1..=2 {
            let r = verify_recursion(&st, 1, k, 4, GradientSource::Numeric).unwrap();
            assert!(r < 1e-6, "{r}");
            let r = verify_recursion(&st, 2, k, 5, GradientSource::Analytic).unwrap();
            assert!(r < 1e-10, "{r}");
        }
    }

    #[test]
    fn tilde_gradient_pairs_with_smooth_variations() {
        // variations inside the charge-free family u = (Λ-1)g, v = G G(x-ε)⁻¹
        let lat = Lattice::centered(14, 1.0, 8, Boundary::Decaying).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (f, df) = edge_bump(lat, 4.0);
        let mut field = || modulate(&smooth_random_field(&mut rng, lat, 2, 0.3, 3), f.clone(), df.clone());
        let (g, b, dg, db) = (field(), field(), field(), field());
        let id = MatrixField::identity(lat, 2);
        let at = |h: f64| {
            let g = g.add(&dg.scale_re(h)).unwrap();
            let bump = b.add(&db.scale_re(h)).unwrap();
            let below = id.add(&bump.shift(-1)).unwrap().try_inverse().unwrap();
            let v = id.add(&bump).unwrap().mul(&below).unwrap();
            LaxState::new(g.shift(1).sub(&g).unwrap(), v).unwrap()
        };
        let d = Density::HTilde { level: 1 };
        let h = 1e-4;
        let (plus, minus) = (at(h), at(-h));
        let du = plus.u.sub(&minus.u).unwrap().scale_re(0.5 / h);
        let dv = plus.v.sub(&minus.v).unwrap().scale_re(0.5 / h);
        let lhs = analytic_gradient(&at(0.0), d, 6).unwrap().pairing(&du, &dv);
        let rhs = (functional(&plus, d, 6).unwrap() - functional(&minus, d, 6).unwrap()) / (2.0 * h);
        assert!((lhs - rhs).norm() / rhs.norm().max(1e-3) < 1e-5, "{lhs} {rhs}");
    }

    #[test]
    fn tau_symmetry_of_toda_densities() {
        let st = decaying_state(12, 28, 1);
        let r = verify_tau_symmetry(&st, FlowSpec::t(1, 1), FlowSpec::t(1, 2), 1e-4, 5).unwrap();
        assert!(r < 1e-6, "{r}");
        let r = verify_tau_symmetry(&st, FlowSpec::t(1, 1), FlowSpec::t(1, 1), 1e-4, 5).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn affine_tau_part() {
        let lat = Lattice::new(8, 0.5, 1, Boundary::Periodic).unwrap();
        let h = vec![Complex64::new(1.0, 0.0); 8];
        let g = tau_log_increment(lat, &h).unwrap();
        for i in 0..7 {
            assert!((g[i + 1] - g[i] - 2.0).norm() < 1e-12);
        }
        let zero = tau_log_increment(lat, &[Complex64::new(0.0, 0.0); 8]).unwrap();
        assert!(zero.iter().all(|z| z.norm() < 1e-15));
    }
}
