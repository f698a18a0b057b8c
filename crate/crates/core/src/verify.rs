//! Verification suites. Each suite evaluates a group of claims on seeded
//! states and reports one residual per claim against a fixed tolerance.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::darboux::{
    darboux_chain, darboux_nfold, multitoda_residuals, scalar_toda_residual, two_fold_closed_t1, TimeValue, VacuumWave,
};
use crate::diffop::{projection_identities, ShiftOperator};
use crate::dressing::{DressingPair, LaxState};
use crate::error::{EmthError, Result};
use crate::flows::{integrate, trace_integral, verify_s0, FlowOptions, FlowSpec};
use crate::hamiltonian::{
    antisymmetry_residual, density, verify_flow_hamiltonian, verify_recursion, verify_tau_symmetry,
    verify_tilde_recursion, GradientSource, Structure, SumKernel, Density,
};
use crate::lattice::{Boundary, Lattice, Mat, MatrixField, MeanPolicy};
use crate::random::{charge_free_state, random_field, random_real_matrix, random_state};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Dressing,
    Densities,
    Flows,
    Darboux,
    Hamiltonian,
    Conservation,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Algebra,
        Suite::Dressing,
        Suite::Densities,
        Suite::Flows,
        Suite::Darboux,
        Suite::Hamiltonian,
        Suite::Conservation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Dressing => "dressing",
            Suite::Densities => "densities",
            Suite::Flows => "flows",
            Suite::Darboux => "darboux",
            Suite::Hamiltonian => "hamiltonian",
            Suite::Conservation => "conservation",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = EmthError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| EmthError::InvalidInput(format!("unknown suite `{s}`")))
    }
}

/// A verifiable statement and the suite that checks it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClaimInfo {
    pub id: &'static str,
    pub suite: Suite,
    pub statement: &'static str,
}

const CATALOG: &[ClaimInfo] = &[
    ClaimInfo { id: "algebra.associativity", suite: Suite::Algebra, statement: "operator product is associative" },
    ClaimInfo { id: "algebra.split", suite: Suite::Algebra, statement: "non-negative and negative parts reassemble the operator" },
    ClaimInfo { id: "algebra.projections", suite: Suite::Algebra, statement: "projection identities for non-negative and negative operators" },
    ClaimInfo { id: "dressing.lax-s", suite: Suite::Dressing, statement: "L S = S Λ" },
    ClaimInfo { id: "dressing.lax-sbar", suite: Suite::Dressing, statement: "L S̄ = S̄ Λ⁻¹" },
    ClaimInfo { id: "dressing.inverse", suite: Suite::Dressing, statement: "S S⁻¹ = I and S̄ S̄⁻¹ = I" },
    ClaimInfo { id: "dressing.consistency", suite: Suite::Dressing, statement: "dressing consistency S Λ S⁻¹ = S̄ Λ⁻¹ S̄⁻¹" },
    ClaimInfo { id: "densities.h0", suite: Suite::Densities, statement: "lowest Hamiltonian density is one" },
    ClaimInfo { id: "densities.h1", suite: Suite::Densities, statement: "first Hamiltonian density is the diagonal entry of u" },
    ClaimInfo { id: "flows.s0", suite: Suite::Flows, statement: "the s0 flow is the spatial derivative" },
    ClaimInfo { id: "flows.s0-convergence", suite: Suite::Flows, statement: "second-order convergence of the s0 identity under refinement" },
    ClaimInfo { id: "darboux.kernel", suite: Suite::Darboux, statement: "Darboux operator annihilates its wave functions" },
    ClaimInfo { id: "darboux.chain", suite: Suite::Darboux, statement: "iterated one-fold steps agree with the n-fold transformation" },
    ClaimInfo { id: "darboux.closed-two-fold", suite: Suite::Darboux, statement: "closed two-fold formula for the first coefficient" },
    ClaimInfo { id: "darboux.multitoda", suite: Suite::Darboux, statement: "Darboux solitons solve the multi-component Toda system" },
    ClaimInfo { id: "darboux.lax-form", suite: Suite::Darboux, statement: "Darboux solitons solve the Lax equation" },
    ClaimInfo { id: "darboux.scalar-toda", suite: Suite::Darboux, statement: "one-component reduction solves the Toda equation" },
    ClaimInfo { id: "hamiltonian.antisymmetry", suite: Suite::Hamiltonian, statement: "both Poisson structures are antisymmetric" },
    ClaimInfo { id: "hamiltonian.flow", suite: Suite::Hamiltonian, statement: "first structure generates the Toda flows" },
    ClaimInfo { id: "hamiltonian.recursion", suite: Suite::Hamiltonian, statement: "bi-Hamiltonian recursion relation" },
    ClaimInfo { id: "hamiltonian.tilde-recursion", suite: Suite::Hamiltonian, statement: "bi-Hamiltonian recursion relation for the logarithmic flows" },
    ClaimInfo { id: "hamiltonian.tau-symmetry", suite: Suite::Hamiltonian, statement: "tau-symmetry property" },
    ClaimInfo { id: "hamiltonian.tau-convergence", suite: Suite::Hamiltonian, statement: "tau-symmetry residual converges at second order in the time step" },
    ClaimInfo { id: "conservation.trace", suite: Suite::Conservation, statement: "integral of the trace residue of L is conserved" },
];

pub fn catalog() -> &'static [ClaimInfo] {
    CATALOG
}

/// Lattice and truncation parameters shared by the suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub dim: usize,
    pub sites: usize,
    pub eps: f64,
    pub refine: usize,
    pub order: usize,
    pub seed: u64,
    pub tol_scale: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { dim: 2, sites: 16, eps: 1.0, refine: 1, order: 4, seed: 7, tol_scale: 1.0 }
    }
}

impl SuiteConfig {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
    }

    fn lattice(&self, boundary: Boundary) -> Result<Lattice> {
        Lattice::centered(self.sites, self.eps, self.refine, boundary)
    }

    /// Decaying window widened, if needed, so that sites `margin` cells from
    /// either edge remain.
    fn window(&self, margin: usize) -> Result<Lattice> {
        Lattice::centered(self.sites.max(2 * margin + 2), self.eps, self.refine, Boundary::Decaying)
    }

    fn claim(&self, id: &str, residual: f64, tolerance: f64) -> ClaimResult {
        let tolerance = tolerance * self.tol_scale;
        ClaimResult { id: id.to_string(), residual, tolerance, passed: residual.is_finite() && residual < tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimResult {
    pub id: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub config: SuiteConfig,
    pub claims: Vec<ClaimResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.claims.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<SuiteReport> {
    let claims = match suite {
        Suite::Algebra => algebra(config)?,
        Suite::Dressing => dressing(config)?,
        Suite::Densities => densities(config)?,
        Suite::Flows => flows(config)?,
        Suite::Darboux => darboux(config)?,
        Suite::Hamiltonian => hamiltonian(config)?,
        Suite::Conservation => conservation(config)?,
    };
    Ok(SuiteReport { suite, config: *config, claims })
}

fn random_band(rng: &mut ChaCha8Rng, lattice: Lattice, dim: usize, lo: i64, hi: i64) -> Result<ShiftOperator> {
    let coeffs = (lo..=hi).map(|_| random_field(rng, lattice, dim, 1.0)).collect();
    ShiftOperator::band(lo, coeffs)
}

/// 100 random operators per identity family.
fn algebra(cfg: &SuiteConfig) -> Result<Vec<ClaimResult>> {
    let mut rng = cfg.rng(1);
    let (mut assoc, mut split, mut proj) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..34 {
        let boundary = if trial % 2 == 0 { Boundary::Periodic } else { Boundary::Decaying };
        let lat = cfg.lattice(boundary)?;
        let band = |rng: &mut ChaCha8Rng| {
            let lo = rng.gen_range(-2..=0);
            let hi = rng.gen_range(0..=2);
            random_band(rng, lat, cfg.dim, lo, hi)
        };
        let (a, b, c) = (band(&mut rng)?, band(&mut rng)?, band(&mut rng)?);
        let left = a.mul(&b)?.mul(&c)?;
        let right = a.mul(&b.mul(&c)?)?;
        assoc = assoc.max(left.sub(&right)?.max_norm());
        for op in [&a, &b, &c] {
            let (p, m) = op.split();
            split = split.max(p.add(&m)?.sub(op)?.max_norm());
            split = split.max(p.minus().max_norm()).max(m.plus().max_norm());
        }
    }
    let lat = cfg.lattice(Boundary::Decaying)?;
    for _ in 0..25 {
        let b = random_band(&mut rng, lat, cfg.dim, 0, 2)?;
        let c = random_band(&mut rng, lat, cfg.dim, -3, -1)?;
        let f = random_field(&mut rng, lat, cfg.dim, 1.0);
        let g = random_field(&mut rng, lat, cfg.dim, 1.0);
        proj = proj.max(projection_identities(&b, &c, &f, &g)?.max());
    }
    Ok(vec![
        cfg.claim("algebra.associativity", assoc, 1e-12),
        cfg.claim("algebra.split", split, 1e-12),
        cfg.claim("algebra.projections", proj, 1e-12),
    ])
}

/// Vacuum-padded random state on a decaying window.
fn padded_state(cfg: &SuiteConfig, salt: u64, amplitude: f64, margin: usize) -> Result<LaxState> {
    let lat = cfg.window(margin)?;
    let (u, v) = random_state(&mut cfg.rng(salt), lat, cfg.dim, amplitude);
    LaxState::new(u, v)
}

fn charge_free(cfg: &SuiteConfig, salt: u64, margin: usize) -> Result<LaxState> {
    let lat = cfg.window(margin)?;
    let (u, v) = charge_free_state(&mut cfg.rng(salt), lat, cfg.dim, 0.3);
    LaxState::new(u, v)
}

fn dressing(cfg: &SuiteConfig) -> Result<Vec<ClaimResult>> {
    const ORDER: usize = 6;
    let st = padded_state(cfg, 2, 0.3, ORDER + 2)?;
    let r = DressingPair::new(&st, ORDER, MeanPolicy::Reject)?.residuals(&st)?;
    Ok(vec![
        cfg.claim("dressing.lax-s", r.ls_minus_s_lambda, 1e-10),
        cfg.claim("dressing.lax-sbar", r.lsbar_minus_sbar_lambda_inv, 1e-10),
        cfg.claim("dressing.inverse", r.s_s_inv.max(r.sbar_sbar_inv), 1e-10),
        cfg.claim("dressing.consistency", r.consistency, 1e-10),
    ])
}

fn densities(cfg: &SuiteConfig) -> Result<Vec<ClaimResult>> {
    let (mut h0, mut h1) = (0.0f64, 0.0f64);
    for (salt, boundary) in [(3, Boundary::Periodic), (4, Boundary::Decaying)] {
        let lat = cfg.lattice(boundary)?;
        let (u, v) = random_state(&mut cfg.rng(salt), lat, cfg.dim, 0.5);
        let st = LaxState::new(u, v)?;
        for k in 1..=cfg.dim {
            let d0 = density(&st, Density::H { level: 0, component: k }, cfg.order)?;
            h0 = d0.iter().map(|z| (z - 1.0).norm()).fold(h0, f64::max);
            let d1 = density(&st, Density::H { level: 1, component: k }, cfg.order)?;
            for (i, z) in d1.iter().enumerate() {
                h1 = h1.max((z - st.u.at(i)[(k - 1, k - 1)]).norm());
            }
        }
    }
    Ok(vec![cfg.claim("densities.h0", h0, 1e-14), cfg.claim("densities.h1", h1, 1e-14)])
}

/// `u = a sech²(x)`, `v = I + b sech²(x)` with carried x-derivatives.
fn sech_state(lattice: Lattice, dim: usize, a: f64, b: f64) -> Result<LaxState> {
    let id = Mat::identity(dim, dim);
    let profile = |c: f64| {
        let id = id.clone();
        let id2 = id.clone();
        MatrixField::from_fn_with_derivative(
            lattice,
            dim,
            move |x| &id * Complex64::new(c / x.cosh().powi(2), 0.0),
            move |x| &id2 * Complex64::new(-2.0 * c * x.tanh() / x.cosh().powi(2), 0.0),
        )
    };
    let v = MatrixField::identity(lattice, dim).add(&profile(b))?;
    LaxState::new(profile(a), v)
}

fn flows(cfg: &SuiteConfig) -> Result<Vec<ClaimResult>> {
    const SITES: usize = 32;
    let order = cfg.order.max(4);
    let lat = |r: usize| Lattice::centered(SITES, 1.0, r, Boundary::Decaying);
    let exact = verify_s0(&sech_state(lat(8)?, cfg.dim, 0.4, 0.2)?, order)?.residual;
    // without carried derivatives the central difference sets the error
    let mut errors = Vec::new();
    for r in [4, 8, 16] {
        let st = sech_state(lat(r)?, cfg.dim, 0.4, 0.2)?;
        let st = LaxState::new(st.u.without_derivative(), st.v.without_derivative())?;
        errors.push(verify_s0(&st, order)?.residual);
    }
    let rates: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let worst = rates.iter().map(|p| (p - 2.0).abs()).fold(0.0, f64::max);
    Ok(vec![cfg.claim("flows.s0", exact, 1e-6), cfg.claim("flows.s0-convergence", worst, 0.2)])
}

fn wave(cfg: &SuiteConfig, z: f64, b: Mat, dim: usize) -> Result<VacuumWave> {
    let times = (1..=dim).map(|k| TimeValue { level: 1, component: k, value: 0.1 * k as f64 }).collect();
    VacuumWave::new(1.0, cfg.eps, Complex64::new(z, 0.0), Mat::identity(dim, dim), Some(b), times)
}

fn coupled_waves(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Result<Vec<VacuumWave>> {
    (0..n)
        .map(|i| {
            let z = 1.5 + 0.8 * i as f64 + rng.gen_range(0.0..0.1);
            let b = Mat::identity(dim, dim) + random_real_matrix(rng, dim, 0.4);
            wave(cfg, z, b, dim)
        })
        .collect()
}

fn diagonal_waves(cfg: &SuiteConfig, rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Result<Vec<VacuumWave>> {
    (0..n)
        .map(|i| {
            let z = 1.5 + 0.8 * i as f64 + rng.gen_range(0.0..0.1);
            let b = Mat::from_fn(dim, dim, |r, c| {
                Complex64::new(if r == c { rng.gen_range(0.4..2.5) } else { 0.0 }, 0.0)
            });
            wave(cfg, z, b, dim)
        })
        .collect()
}

fn darboux(cfg: &SuiteConfig) -> Result<Vec<ClaimResult>> {
    let lat = cfg.lattice(Boundary::Decaying)?;
    let mut rng = cfg.rng(5);
    let (mut kernel, mut chain) = (0.0f64, 0.0f64);
    for n in [2, 3] {
        let waves = coupled_waves(cfg, &mut rng, n, cfg.dim)?;
        let nf = darboux_nfold(lat, 1.0, &waves, (1, 1))?;
        kernel = kernel.max(nf.kernel_residual);
        let ch = darboux_chain(lat, 1.0, &waves, (1, 1))?;
        let scale = nf.state.u.max_norm().max(nf.state.v.max_norm()).max(1.0);
        let gap = nf.state.u.sub(&ch.state.u)?.max_norm().max(nf.state.v.sub(&ch.state.v)?.max_norm());
        chain = chain.max(gap / scale);
    }

    let pair = diagonal_waves(cfg, &mut rng, 2, cfg.dim)?;
    let nf = darboux_nfold(lat, 1.0, &pair, (1, 1))?;
    let mut closed = 0.0f64;
    for site in 0..lat.fine_len() {
        let t1 = two_fold_closed_t1(&pair[0], &pair[1], lat.x(site), cfg.eps)
            .ok_or(EmthError::DegenerateSpectralData { site, condition: f64::INFINITY })?;
        closed = closed.max((t1 + &nf.coeffs[0][site].value).norm());
    }

    let (mut multitoda, mut lax) = (0.0f64, 0.0f64);
    for n in [1, 2] {
        let commuting = diagonal_waves(cfg, &mut rng, n, cfg.dim)?;
        let coupled = coupled_waves(cfg, &mut rng, n, cfg.dim)?;
        for k in 1..=cfg.dim {
            let r = multitoda_residuals(lat, 1.0, &commuting, k)?;
            multitoda = multitoda.max(r.first_order_phi).max(r.first_order_omega).max(r.second_order).max(r.lax);
            let r = multitoda_residuals(lat, 1.0, &coupled, k)?;
            lax = lax.max(r.first_order_phi).max(r.lax);
        }
    }

    let mut scalar = 0.0f64;
    for n in [1, 2] {
        let waves = coupled_waves(cfg, &mut rng, n, 1)?;
        scalar = scalar.max(scalar_toda_residual(lat, 1.0, &waves)?);
    }

    Ok(vec![
        cfg.claim("darboux.kernel", kernel, 1e-10),
        cfg.claim("darboux.chain", chain, 1e-8),
        cfg.claim("darboux.closed-two-fold", closed, 1e-10),
        cfg.claim("darboux.multitoda", multitoda, 1e-6),
        cfg.claim("darboux.lax-form", lax, 1e-6),
        cfg.claim("darboux.scalar-toda", scalar, 1e-8),
    ])
}

fn hamiltonian(cfg: &SuiteConfig) -> Result<Vec<ClaimResult>> {
    let order = cfg.order;
    let small = |boundary| Lattice::centered(8, cfg.eps, 1, boundary);
    let mut rng = cfg.rng(6);
    let (u, v) = random_state(&mut rng, small(Boundary::Periodic)?, cfg.dim, 0.3);
    let periodic = LaxState::new(u, v)?;
    let open_lat = small(Boundary::Decaying)?;
    let open = LaxState::new(random_field(&mut rng, open_lat, cfg.dim, 0.3), random_field(&mut rng, open_lat, cfg.dim, 0.3))?;
    let antisymmetry = antisymmetry_residual(Structure::P1, &periodic)?
        .max(antisymmetry_residual(Structure::P1, &open)?)
        .max(antisymmetry_residual(Structure::P2(SumKernel::Principal), &open)?);

    let st = charge_free(cfg, 7, order + 4)?;
    let (mut flow, mut recursion) = (0.0f64, 0.0f64);
    for k in 1..=cfg.dim {
        flow = flow.max(verify_flow_hamiltonian(&st, FlowSpec::t(1, k), order, GradientSource::Numeric)?);
        recursion = recursion.max(verify_recursion(&st, 1, k, order, GradientSource::Numeric)?);
    }
    let tilde = verify_tilde_recursion(&st, 1, order)?;

    let a = FlowSpec::t(1, 1);
    let b = if cfg.dim > 1 { FlowSpec::t(1, 2) } else { FlowSpec::t(2, 1) };
    let tau = verify_tau_symmetry(&st, a, b, 1e-4, order)?;
    let steps = [0.08, 0.04, 0.02]
        .iter()
        .map(|&dt| verify_tau_symmetry(&st, a, b, dt, order))
        .collect::<Result<Vec<f64>>>()?;
    let rate = steps.windows(2).map(|w| ((w[0] / w[1]).log2() - 2.0).abs()).fold(0.0, f64::max);

    Ok(vec![
        cfg.claim("hamiltonian.antisymmetry", antisymmetry, 1e-12),
        cfg.claim("hamiltonian.flow", flow, 1e-8),
        cfg.claim("hamiltonian.recursion", recursion, 1e-6),
        cfg.claim("hamiltonian.tilde-recursion", tilde, 1e-5),
        cfg.claim("hamiltonian.tau-symmetry", tau, 1e-6),
        cfg.claim("hamiltonian.tau-convergence", rate, 0.3),
    ])
}

fn conservation(cfg: &SuiteConfig) -> Result<Vec<ClaimResult>> {
    let lat = cfg.lattice(Boundary::Periodic)?;
    let (u, v) = random_state(&mut cfg.rng(8), lat, cfg.dim, 0.3);
    let st = LaxState::new(u, v)?;
    let opts = FlowOptions { order: cfg.order, ..FlowOptions::for_lattice(&lat) };
    let mut drift = 0.0f64;
    for k in 1..=cfg.dim {
        let traj = integrate(&st, FlowSpec::t(1, k), 1e-3, 100, 10, &opts)?;
        let q0 = trace_integral(&st);
        drift = drift.max(traj.drift()).max((trace_integral(traj.last()) - q0).abs());
    }
    Ok(vec![cfg.claim("conservation.trace", drift, 1e-8)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_complete() {
        assert!(catalog().len() >= 12);
        for suite in Suite::ALL {
            assert!(catalog().iter().any(|c| c.suite == suite));
        }
        let names: Vec<&str> = catalog().iter().map(|c| c.statement).collect();
        assert!(names.contains(&"tau-symmetry property"));
        assert!(names.contains(&"bi-Hamiltonian recursion relation"));
    }

    #[test]
    fn suite_names_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn tolerance_scale_applies() {
        let cfg = SuiteConfig { tol_scale: 10.0, ..SuiteConfig::default() };
        let c = cfg.claim("x", 5e-12, 1e-12);
        assert!(c.passed);
        assert_eq!(c.tolerance, 1e-11);
    }
}
