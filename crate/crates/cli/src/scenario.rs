//! TOML scenario documents. See `docs/scenario.md` for the grammar.

use std::path::PathBuf;

use emth_core::{Boundary, Family, FlowSpec, Lattice, Mat, Suite};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub flows: Vec<FlowStep>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySpec {
    Periodic,
    Decaying,
}

impl From<BoundarySpec> for Boundary {
    fn from(b: BoundarySpec) -> Self {
        match b {
            BoundarySpec::Periodic => Boundary::Periodic,
            BoundarySpec::Decaying => Boundary::Decaying,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_dim() -> usize {
    2
}

fn default_order() -> usize {
    4
}

fn default_amplitude() -> f64 {
    0.3
}

fn periodic() -> BoundarySpec {
    BoundarySpec::Periodic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub sites: usize,
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default = "one_usize")]
    pub refine: usize,
    #[serde(default = "periodic")]
    pub boundary: BoundarySpec,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Truncation order of the dressing series.
    #[serde(default = "default_order")]
    pub order: usize,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice, CliError> {
        Lattice::centered(self.sites, self.eps, self.refine, self.boundary.into())
            .map_err(|e| CliError::config("lattice", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateSpec {
    Vacuum {
        #[serde(default = "one")]
        c: f64,
    },
    Random {
        seed: u64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// One row per fine site holding the `N²` real entries, row-major.
    Explicit { u: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
    Darboux {
        order: usize,
        #[serde(default = "one")]
        c: f64,
        waves: Vec<WaveSpec>,
    },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Vacuum { c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub z: f64,
    /// Amplitude of the `z^{x/ε}` branch; identity when absent.
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    /// Amplitude of the companion branch; none when absent.
    #[serde(default)]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub times: Vec<TimeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub flow: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowStep {
    pub flow: String,
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "one_usize")]
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub suites: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub tol_scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let lat = self.lattice.build()?;
        let n = self.lattice.dim;
        if !(1..=8).contains(&n) {
            return Err(CliError::config("lattice.dim", format!("{n} outside 1..=8")));
        }
        match &self.state {
            StateSpec::Vacuum { c } if *c == 0.0 || !c.is_finite() => {
                return Err(CliError::config("state.c", "must be finite and nonzero"));
            }
            StateSpec::Explicit { u, v } => {
                for (name, rows) in [("state.u", u), ("state.v", v)] {
                    if rows.len() != lat.fine_len() {
                        return Err(CliError::config(name, format!("{} rows, lattice has {} sites", rows.len(), lat.fine_len())));
                    }
                    if let Some(i) = rows.iter().position(|r| r.len() != n * n) {
                        return Err(CliError::config(&format!("{name}[{i}]"), format!("expected {} entries", n * n)));
                    }
                }
            }
            StateSpec::Darboux { order, waves, .. } => {
                if waves.len() != *order {
                    return Err(CliError::config(
                        "state.waves",
                        format!("{} spectral data given for Darboux order {order}", waves.len()),
                    ));
                }
                if lat.boundary() != Boundary::Decaying {
                    return Err(CliError::config("lattice.boundary", "Darboux states need a decaying window"));
                }
                for (i, w) in waves.iter().enumerate() {
                    for (name, m) in [("a", &w.a), ("b", &w.b)] {
                        if let Some(m) = m {
                            matrix(m, n).map_err(|msg| CliError::config(&format!("state.waves[{i}].{name}"), msg))?;
                        }
                    }
                    for (j, t) in w.times.iter().enumerate() {
                        let field = format!("state.waves[{i}].times[{j}]");
                        let f = flow(&t.flow, n).map_err(|msg| CliError::config(&field, msg))?;
                        if f.family != Family::T {
                            return Err(CliError::config(&field, "wave functions carry t times only"));
                        }
                    }
                }
            }
            _ => {}
        }
        for (i, step) in self.flows.iter().enumerate() {
            let field = format!("flows[{i}]");
            flow(&step.flow, n).map_err(|msg| CliError::config(&field, msg))?;
            if !(step.dt.is_finite() && step.dt != 0.0) {
                return Err(CliError::config(&format!("{field}.dt"), "must be finite and nonzero"));
            }
        }
        if let Some(v) = &self.verify {
            for (i, s) in v.suites.iter().enumerate() {
                suite(s).map_err(|msg| CliError::config(&format!("verify.suites[{i}]"), msg))?;
            }
        }
        Ok(())
    }
}

/// Parse a flow label and check its component against `dim`.
pub fn flow(label: &str, dim: usize) -> Result<FlowSpec, String> {
    let f: FlowSpec = label.parse().map_err(|e: emth_core::EmthError| e.to_string())?;
    if f.family != Family::S {
        f.component_for(dim).map_err(|e| e.to_string())?;
    }
    Ok(f)
}

pub fn suite(name: &str) -> Result<Vec<Suite>, String> {
    if name == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    name.parse::<Suite>().map(|s| vec![s]).map_err(|e| e.to_string())
}

pub fn matrix(rows: &[Vec<f64>], n: usize) -> Result<Mat, String> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("expected a {n}x{n} matrix"));
    }
    Ok(Mat::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0)))
}
