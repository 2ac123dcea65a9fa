//! JSON run configuration. Schema-validated before any computation;
//! unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use toda_lab::grid::{Divisor, DivisorPoint, TorusGrid};
use toda_lab::rootsys::{build_root_system, LieType, RootSystem};
use toda_lab::toda::{assemble, CouplingSpec, Mode, ProblemSpec, TodaProblem};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form note on what the run exercises.
    pub description: Option<String>,
    pub coupling: CouplingCfg,
    #[serde(default)]
    pub grid: GridCfg,
    #[serde(default)]
    pub divisors: Vec<DivisorCfg>,
    /// Constant curvature override (must satisfy the degree identity).
    pub kappa: Option<f64>,
    #[serde(default = "default_t")]
    pub t: f64,
    /// raw | variant | lemma66; defaults per command.
    pub mode: Option<String>,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default)]
    pub experiment: ExperimentCfg,
    /// Log-amplitudes per node.
    pub amplitudes: Option<Vec<f64>>,
    /// Seed recorded for randomized property suites.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

fn default_t() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingCfg {
    pub lie_type: String,
    pub rank: usize,
    #[serde(default)]
    pub fold: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    pub l: Option<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    64
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg { l: None, n: 64 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorCfg {
    pub node: usize,
    pub points: Vec<PointCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCfg {
    pub x: usize,
    pub y: usize,
    #[serde(default = "default_mult")]
    pub m: u32,
}

fn default_mult() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    30
}

impl Default for SolverCfg {
    fn default() -> Self {
        SolverCfg { tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentCfg {
    pub t_ladder: Option<Vec<f64>>,
    pub eps_ladder: Option<Vec<f64>>,
    pub mask_tau: Option<f64>,
    pub cauchy_tol: Option<f64>,
    pub genus: Option<i64>,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    Ok(cfg)
}

impl RunConfig {
    pub fn root_system(&self) -> Result<RootSystem> {
        let t: LieType = self
            .coupling
            .lie_type
            .parse()
            .map_err(|e: String| anyhow::anyhow!(e))?;
        Ok(build_root_system(t, self.coupling.rank)?)
    }

    pub fn coupling_spec(&self) -> Result<CouplingSpec> {
        let rs = self.root_system()?;
        if self.coupling.fold {
            Ok(CouplingSpec::folded_from(rs)?)
        } else {
            Ok(CouplingSpec::raw(rs))
        }
    }

    pub fn torus(&self) -> Result<TorusGrid> {
        Ok(TorusGrid::new(self.grid.n, self.grid.l.unwrap_or(2.0 * PI))?)
    }

    pub fn divisor_vec(&self, nodes: usize) -> Result<Vec<Divisor>> {
        let mut out = vec![Divisor::empty(); nodes];
        for d in &self.divisors {
            if d.node >= nodes {
                bail!("divisor node index {} out of range (coupling has {nodes} nodes)", d.node);
            }
            for p in &d.points {
                out[d.node].points.push(DivisorPoint { x: p.x, y: p.y, m: p.m });
            }
        }
        Ok(out)
    }

    pub fn mode(&self, default: Mode) -> Result<Mode> {
        match self.mode.as_deref() {
            None => Ok(default),
            Some("raw") => Ok(Mode::Raw),
            Some("variant") => Ok(Mode::Variant),
            Some("lemma66") => Ok(Mode::Lemma66),
            Some(other) => bail!("unknown mode {other:?} (expected raw | variant | lemma66)"),
        }
    }

    /// Default mode: the Gram-coefficient system for plain root couplings,
    /// the Cartan-coefficient variant for folds.
    pub fn default_mode(&self) -> Mode {
        if self.coupling.fold {
            Mode::Variant
        } else {
            Mode::Raw
        }
    }

    pub fn build_problem(&self, mode: Mode) -> Result<TodaProblem> {
        let coupling = if mode == Mode::Raw {
            self.coupling_spec()?
        } else if self.coupling.fold {
            self.coupling_spec()?
        } else {
            // Variant / path-lemma modes on an unfolded diagram run on the
            // extended affine system, keeping the source for unfolding.
            CouplingSpec::affine_from(self.root_system()?)
        };
        let grid = self.torus()?;
        let divisors = self.divisor_vec(coupling.size())?;
        let spec = ProblemSpec {
            mode,
            t: self.t,
            kappa_override: self.kappa,
            amplitudes: self.amplitudes.clone(),
            divisors,
        };
        Ok(assemble(&coupling, &grid, &spec)?)
    }

    pub fn solve_params(&self) -> toda_lab::experiments::SolveParams {
        toda_lab::experiments::SolveParams {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            mask_tau: self.experiment.mask_tau.unwrap_or(1e-6),
        }
    }
}
