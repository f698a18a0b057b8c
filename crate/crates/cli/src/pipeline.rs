use std::collections::BTreeMap;
use std::path::Path;

use emth_core::darboux::{darboux_nfold, DarbouxResult, TimeValue, VacuumWave};
use emth_core::flows::state_csv;
use emth_core::random::{random_real_matrix, random_state};
use emth_core::{
    integrate, run_suite, FlowOptions, FlowSpec, Lattice, LaxState, Mat, MatrixField, Suite, SuiteConfig, SuiteReport,
    Trajectory,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::{self, LatticeSpec, Scenario, StateSpec};
use crate::{write_artifact, CliError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub version: &'static str,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub fn verify(suites: &[Suite], config: &SuiteConfig) -> Result<VerifyReport, CliError> {
    let reports = suites.iter().map(|&s| run_suite(s, config)).collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyReport { version: VERSION, passed: reports.iter().all(|r| r.passed()), suites: reports })
}

/// Spectral data for an n-fold transformation of the vacuum `u = 0, v = cI`.
#[derive(Debug, Clone)]
pub struct DarbouxRequest {
    pub dim: usize,
    pub sites: usize,
    pub eps: f64,
    pub c: f64,
    pub z: Vec<f64>,
    pub seed: u64,
    /// Keep the companion amplitudes diagonal.
    pub diagonal: bool,
    /// Value of `t_{1,1}`.
    pub time: f64,
}

impl DarbouxRequest {
    pub fn waves(&self) -> Result<Vec<VacuumWave>, CliError> {
        let n = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let times = vec![TimeValue { level: 1, component: 1, value: self.time }];
        self.z
            .iter()
            .map(|&z| {
                let mut b = Mat::identity(n, n) + random_real_matrix(&mut rng, n, 0.4);
                if self.diagonal {
                    b = Mat::from_diagonal(&b.diagonal());
                }
                let w = VacuumWave::new(self.c, self.eps, Complex64::new(z, 0.0), Mat::identity(n, n), Some(b), times.clone())?;
                Ok(w)
            })
            .collect()
    }

    pub fn run(&self) -> Result<DarbouxResult, CliError> {
        let lat = Lattice::centered(self.sites, self.eps, 1, emth_core::Boundary::Decaying)?;
        Ok(darboux_nfold(lat, self.c, &self.waves()?, (1, 1))?)
    }
}

pub fn build_state(spec: &StateSpec, lattice: &LatticeSpec) -> Result<LaxState, CliError> {
    let lat = lattice.build()?;
    let n = lattice.dim;
    let state = match spec {
        StateSpec::Vacuum { c } => LaxState::vacuum(lat, n, *c),
        StateSpec::Random { seed, amplitude } => {
            let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(*seed), lat, n, *amplitude);
            LaxState::new(u, v)?
        }
        StateSpec::Explicit { u, v } => {
            let field = |rows: &Vec<Vec<f64>>| {
                let values = rows
                    .iter()
                    .map(|r| Mat::from_fn(n, n, |i, j| Complex64::new(r[i * n + j], 0.0)))
                    .collect();
                MatrixField::from_values(lat, values)
            };
            LaxState::new(field(u)?, field(v)?)?
        }
        StateSpec::Darboux { c, waves, .. } => {
            let waves = waves
                .iter()
                .map(|w| {
                    let a = match &w.a {
                        Some(m) => scenario::matrix(m, n).map_err(|e| CliError::config("state.waves.a", e))?,
                        None => Mat::identity(n, n),
                    };
                    let b = w.b.as_ref().map(|m| scenario::matrix(m, n)).transpose().map_err(|e| CliError::config("state.waves.b", e))?;
                    let times = w
                        .times
                        .iter()
                        .map(|t| {
                            let f = scenario::flow(&t.flow, n).map_err(|e| CliError::config("state.waves.times", e))?;
                            Ok(TimeValue { level: f.level, component: f.component.unwrap_or(1), value: t.value })
                        })
                        .collect::<Result<Vec<_>, CliError>>()?;
                    Ok(VacuumWave::new(*c, lattice.eps, Complex64::new(w.z, 0.0), a, b, times)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            darboux_nfold(lat, *c, &waves, (1, 1))?.state
        }
    };
    Ok(state)
}

pub fn evolve(state: &LaxState, flow: FlowSpec, dt: f64, steps: usize, record_every: usize, order: usize) -> Result<Trajectory, CliError> {
    let opts = FlowOptions { order, ..FlowOptions::for_lattice(state.lattice()) };
    Ok(integrate(state, flow, dt, steps, record_every, &opts)?)
}

/// Largest change of `u` or `v` from the first recorded state.
pub fn max_change(traj: &Trajectory) -> f64 {
    let first = &traj.states[0];
    traj.states
        .iter()
        .map(|s| {
            let du = s.u.sub(&first.u).map(|d| d.max_norm()).unwrap_or(f64::INFINITY);
            let dv = s.v.sub(&first.v).map(|d| d.max_norm()).unwrap_or(f64::INFINITY);
            du.max(dv)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub scenario: Scenario,
    /// Artifact file name to SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub verification_passed: Option<bool>,
}

/// Execute a scenario, writing artifacts and `manifest.json` into `dir`.
pub fn run(sc: &Scenario, dir: &Path) -> Result<Manifest, CliError> {
    sc.validate()?;
    let mut artifacts = BTreeMap::new();
    let mut emit = |name: String, contents: String| -> Result<(), CliError> {
        let hash = write_artifact(&dir.join(&name), &contents)?;
        artifacts.insert(name, hash);
        Ok(())
    };

    let state = build_state(&sc.state, &sc.lattice)?;
    emit("initial_state.csv".into(), state_csv(&state))?;

    let mut current = state;
    for (i, step) in sc.flows.iter().enumerate() {
        let flow = scenario::flow(&step.flow, sc.lattice.dim).map_err(|e| CliError::config(&format!("flows[{i}]"), e))?;
        let traj = evolve(&current, flow, step.dt, step.steps, step.record_every, sc.lattice.order)?;
        let label = step.flow.replace(',', "_");
        emit(format!("flow{i}_{label}.csv"), traj.to_csv())?;
        current = traj.last().clone();
    }

    let mut passed = None;
    if let Some(v) = &sc.verify {
        let suites = v
            .suites
            .iter()
            .map(|s| scenario::suite(s).map_err(|e| CliError::config("verify.suites", e)))
            .collect::<Result<Vec<_>, _>>()?
            .concat();
        let config = SuiteConfig {
            dim: sc.lattice.dim,
            sites: sc.lattice.sites,
            eps: sc.lattice.eps,
            refine: sc.lattice.refine,
            order: sc.lattice.order,
            seed: v.seed.unwrap_or(0),
            tol_scale: v.tol_scale,
        };
        let report = verify(&suites, &config)?;
        passed = Some(report.passed);
        emit("report.json".into(), to_json(&report))?;
    }

    let manifest = Manifest { version: VERSION, scenario: sc.clone(), artifacts, verification_passed: passed };
    write_artifact(&dir.join("manifest.json"), &to_json(&manifest))?;
    Ok(manifest)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
