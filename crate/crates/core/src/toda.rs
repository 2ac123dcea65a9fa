//! Assembly and solution of the discrete Bochner-Toda systems.
//!
//! The unknowns are the log-corrections u_α with e_α = t² G_α exp(u_α);
//! divisor point masses live entirely in the precomputed forcings, so the
//! Newton iteration only ever sees smooth fields. In raw mode the system is
//!
//!   Δ_h u_α = κ + 4 Σ_β ν(α,β) t² G_β e^{u_β} + 4π deg(D_α)/A,
//!
//! the constant defect being what remains of the divisor point masses
//! after cancellation against Δ_h log G_α. Variant mode replaces 4ν(α,β)
//! by twice the (transposed) affine Cartan matrix, and the path-lemma mode
//! reads (1/2) Δ_h u_i = Σ_j A^T_{ij} t² G_j e^{u_j} - c + 2π deg(D_i)/A.
//! Each mode's constant (κ or c) is fixed by the weighted integral
//! identity with the positive weight vector annihilating the coupling
//! matrix from the left.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::folding::{extended_affine, fold, sigma0, AffineSystem, Shape};
use crate::grid::{Divisor, Field, Forcing, TorusGrid};
use crate::ratlin::rat_to_f64;
use crate::rootsys::RootSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Raw,
    Variant,
    Lemma66,
}

/// Coupling data of a problem: a root system (raw Gram coefficients) or an
/// affine system (Cartan coefficients), the latter optionally carrying its
/// unfolded source for energy/curvature bookkeeping.
#[derive(Debug, Clone)]
pub enum CouplingSpec {
    Raw { rs: RootSystem },
    Affine { sys: AffineSystem, source: Option<RootSystem> },
}

impl CouplingSpec {
    pub fn raw(rs: RootSystem) -> Self {
        CouplingSpec::Raw { rs }
    }

    /// Extended affine system of a root system, keeping the source.
    pub fn affine_from(rs: RootSystem) -> Self {
        let sys = extended_affine(&rs);
        CouplingSpec::Affine { sys, source: Some(rs) }
    }

    /// Folded system of a root system along its sigma0 involution.
    pub fn folded_from(rs: RootSystem) -> Result<Self> {
        let ext = extended_affine(&rs);
        let inv = sigma0(rs.lie_type, rs.rank)?;
        let sys = fold(&ext, &inv)?;
        Ok(CouplingSpec::Affine { sys, source: Some(rs) })
    }

    pub fn size(&self) -> usize {
        match self {
            CouplingSpec::Raw { rs } => rs.ext_size(),
            CouplingSpec::Affine { sys, .. } => sys.size,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            CouplingSpec::Raw { rs } => rs.ext_labels(),
            CouplingSpec::Affine { sys, .. } => sys.node_labels.clone(),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            CouplingSpec::Raw { rs } => extended_affine(rs).shape,
            CouplingSpec::Affine { sys, .. } => sys.shape,
        }
    }

    /// System coefficient matrix S (the matrix multiplying the e-fields in
    /// the equation of each node), Laplacian coefficient, and the positive
    /// weights w with wᵀ S = 0.
    fn system(&self, mode: Mode) -> Result<(Vec<Vec<f64>>, f64, Vec<f64>)> {
        match (self, mode) {
            (CouplingSpec::Raw { rs }, Mode::Raw) => {
                let ext = rs.ext_size();
                let mut s = vec![vec![0.0; ext]; ext];
                for i in 0..ext {
                    for j in 0..ext {
                        s[i][j] = 4.0 * rat_to_f64(&rs.gram_ext[(i, j)]);
                    }
                }
                let w: Vec<f64> = rs.ext_marks().iter().map(|&m| m as f64).collect();
                Ok((s, 1.0, w))
            }
            (CouplingSpec::Raw { rs }, Mode::Variant | Mode::Lemma66) => {
                let sys = extended_affine(rs);
                coupled_affine(&sys, mode)
            }
            (CouplingSpec::Affine { sys, .. }, Mode::Variant | Mode::Lemma66) => {
                coupled_affine(sys, mode)
            }
            (CouplingSpec::Affine { .. }, Mode::Raw) => Err(Error::Incompatible(
                "raw mode needs a root system coupling (Gram coefficients)".into(),
            )),
        }
    }

    pub fn affine(&self) -> AffineSystem {
        match self {
            CouplingSpec::Raw { rs } => extended_affine(rs),
            CouplingSpec::Affine { sys, .. } => sys.clone(),
        }
    }

    pub fn source(&self) -> Option<&RootSystem> {
        match self {
            CouplingSpec::Raw { rs } => Some(rs),
            CouplingSpec::Affine { source, .. } => source.as_ref(),
        }
    }
}

fn coupled_affine(sys: &AffineSystem, mode: Mode) -> Result<(Vec<Vec<f64>>, f64, Vec<f64>)> {
    let factor = match mode {
        Mode::Variant => 2.0,
        Mode::Lemma66 => 1.0,
        Mode::Raw => unreachable!(),
    };
    let st = sys.system_matrix();
    let s = st
        .iter()
        .map(|row| row.iter().map(|&v| factor * v).collect())
        .collect();
    let lap = match mode {
        Mode::Lemma66 => 0.5,
        _ => 1.0,
    };
    Ok((s, lap, sys.compatibility_weights()))
}

/// Assembly inputs.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mode: Mode,
    pub t: f64,
    /// Constant curvature override; default is fixed by the degree identity.
    pub kappa_override: Option<f64>,
    /// Log-amplitudes per node (default 0, i.e. unit-scale forcings).
    pub amplitudes: Option<Vec<f64>>,
    pub divisors: Vec<Divisor>,
}

impl ProblemSpec {
    pub fn new(mode: Mode, t: f64, divisors: Vec<Divisor>) -> Self {
        ProblemSpec { mode, t, kappa_override: None, amplitudes: None, divisors }
    }
}

/// A fully assembled discrete problem.
#[derive(Debug, Clone)]
pub struct TodaProblem {
    pub grid: TorusGrid,
    pub mode: Mode,
    pub coupling: CouplingSpec,
    /// System coefficient matrix row-wise over nodes.
    pub system: Vec<Vec<f64>>,
    pub lap_coeff: f64,
    /// Positive weights with wᵀ·system = 0.
    pub weights: Vec<f64>,
    pub forcings: Vec<Forcing>,
    /// Curvature datum (zero field in path-lemma mode).
    pub kappa: Field,
    /// Constant term of the path-lemma mode (zero otherwise).
    pub c: f64,
    pub t: f64,
    /// Divisor defect constants 4π·lap_coeff·deg(D_α)/A per node.
    pub defects: Vec<f64>,
    pub labels: Vec<String>,
}

/// Assembles a problem, fixing κ (or c) from the weighted degree identity
/// and verifying the integral compatibility of the result.
pub fn assemble(coupling: &CouplingSpec, grid: &TorusGrid, spec: &ProblemSpec) -> Result<TodaProblem> {
    let nodes = coupling.size();
    if spec.divisors.len() != nodes {
        return Err(Error::Incompatible(format!(
            "{} divisors supplied for {} nodes",
            spec.divisors.len(),
            nodes
        )));
    }
    if !(spec.t > 0.0) {
        return Err(Error::Incompatible("scale parameter t must be positive".into()));
    }
    let (system, lap_coeff, weights) = coupling.system(spec.mode)?;
    let amplitudes = match &spec.amplitudes {
        Some(a) => {
            if a.len() != nodes {
                return Err(Error::Incompatible("amplitude vector length mismatch".into()));
            }
            a.clone()
        }
        None => vec![0.0; nodes],
    };
    let forcings: Vec<Forcing> = spec
        .divisors
        .iter()
        .zip(&amplitudes)
        .map(|(d, &amp)| Forcing::from_divisor(grid, d.clone(), amp))
        .collect::<Result<_>>()?;
    let area = grid.area();
    let defects: Vec<f64> = forcings
        .iter()
        .map(|f| 4.0 * PI * lap_coeff * f.divisor.degree() as f64 / area)
        .collect();
    let wsum: f64 = weights.iter().sum();
    let wdeg: f64 = weights.iter().zip(&defects).map(|(w, d)| w * d).sum();

    let (kappa, c) = match spec.mode {
        Mode::Lemma66 => {
            if spec.kappa_override.is_some() {
                return Err(Error::Incompatible(
                    "path-lemma mode has no curvature datum; its constant is fixed by the degree identity".into(),
                ));
            }
            // c = Σ w_i defect_i / Σ w_i  (= 2π Σ w_i deg_i / (A Σ w_i)).
            (Field::constant(grid.n, 0.0), wdeg / wsum)
        }
        _ => {
            let kappa0 = -wdeg / wsum;
            let kappa = spec.kappa_override.unwrap_or(kappa0);
            // A user κ must satisfy the same weighted identity.
            let deficit = wsum * kappa + wdeg;
            if deficit.abs() > 1e-10 {
                return Err(Error::Incompatible(format!(
                    "κ = {kappa} violates the weighted degree identity by {deficit:.3e}"
                )));
            }
            (Field::constant(grid.n, kappa), 0.0)
        }
    };
    let problem = TodaProblem {
        grid: grid.clone(),
        mode: spec.mode,
        coupling: coupling.clone(),
        system,
        lap_coeff,
        weights,
        forcings,
        kappa,
        c,
        t: spec.t,
        defects,
        labels: coupling.labels(),
    };
    problem.check_weighted_consistency()?;
    Ok(problem)
}

/// Converged solution with its residual certificate.
#[derive(Debug, Clone)]
pub struct TodaSolution {
    pub u: Vec<Field>,
    /// Energy fields e_α = t² G_α exp(u_α) (tilde-energies in variant and
    /// path-lemma modes).
    pub e: Vec<Field>,
    pub residual_sup: f64,
    pub residual_per_node: Vec<f64>,
    pub iterations: usize,
    pub t: f64,
}

/// Non-convergence, carrying the best iterate for continuation.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub best: Vec<Field>,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl From<SolveFailure> for Error {
    fn from(f: SolveFailure) -> Error {
        Error::SolverFailure {
            residual: f.residual,
            iterations: f.iterations,
            history: f.history,
        }
    }
}

impl TodaProblem {
    pub fn nodes(&self) -> usize {
        self.forcings.len()
    }

    /// Lifts the reduced unknowns (nodes 1..) onto the flatness manifold
    /// Σ_α w_α u_α = 0 by solving for node 0. The weighted combination of
    /// the equations is the one identity this constraint replaces, so the
    /// full system stays exactly solvable on the manifold.
    pub fn lift(&self, reduced: &[Field]) -> Vec<Field> {
        let n = self.grid.n;
        let mut u0 = Field::constant(n, 0.0);
        for (i, f) in reduced.iter().enumerate() {
            u0.axpy(-self.weights[i + 1] / self.weights[0], f);
        }
        let mut full = Vec::with_capacity(reduced.len() + 1);
        full.push(u0);
        full.extend_from_slice(reduced);
        full
    }

    /// Drops node 0 (whose value the manifold determines).
    pub fn reduce(&self, full: &[Field]) -> Vec<Field> {
        full[1..].to_vec()
    }

    pub fn with_t(&self, t: f64) -> TodaProblem {
        let mut p = self.clone();
        p.t = t;
        p
    }

    /// Rescales the forcing of one node by `scale` (the ε²-scalings of the
    /// limit experiments). Divisors and hence the compatibility constants
    /// are unchanged.
    pub fn with_scaled_forcing(&self, node: usize, scale: f64) -> Result<TodaProblem> {
        let mut p = self.clone();
        p.forcings[node] = self.forcings[node].rescaled(&self.grid, scale)?;
        Ok(p)
    }

    /// e_α = t² G_α exp(u_α).
    pub fn energy_fields(&self, u: &[Field]) -> Vec<Field> {
        let t2 = self.t * self.t;
        u.iter()
            .zip(&self.forcings)
            .map(|(ua, f)| ua.zip(&f.g, |uv, gv| t2 * gv * uv.exp()))
            .collect()
    }

    /// Residual fields of the discrete system (direct stencil Laplacian).
    pub fn residual(&self, u: &[Field]) -> Vec<Field> {
        let e = self.energy_fields(u);
        let nodes = self.nodes();
        (0..nodes)
            .map(|a| {
                let mut r = self.grid.laplacian(&u[a]);
                r.data.iter_mut().for_each(|v| *v *= self.lap_coeff);
                for (b, eb) in e.iter().enumerate() {
                    let s = self.system[a][b];
                    if s != 0.0 {
                        r.axpy(-s, eb);
                    }
                }
                r.axpy(-1.0, &self.kappa);
                r.add_scalar(self.c - self.defects[a]);
                r
            })
            .collect()
    }

    pub fn residual_sup(&self, u: &[Field]) -> f64 {
        self.residual(u).iter().map(Field::sup_norm).fold(0.0, f64::max)
    }

    /// Weighted consistency of the assembled right-hand side: the weight
    /// vector annihilates the coupling exactly, so Σ_α w_α RHS_α must
    /// integrate to zero for any state. Checked on the constant part and
    /// on the coupling rows.
    fn check_weighted_consistency(&self) -> Result<()> {
        let nodes = self.nodes();
        let wsum: f64 = self.weights.iter().sum();
        let kappa_mean = self.kappa.mean();
        let const_part: f64 = (0..nodes)
            .map(|a| self.weights[a] * (kappa_mean - self.c + self.defects[a]))
            .sum();
        if const_part.abs() > 1e-10 * wsum.max(1.0) {
            return Err(Error::Incompatible(format!(
                "weighted constant part integrates to {const_part:.3e}"
            )));
        }
        for b in 0..nodes {
            let col: f64 = (0..nodes).map(|a| self.weights[a] * self.system[a][b]).sum();
            if col.abs() > 1e-10 {
                return Err(Error::Incompatible(format!(
                    "weight vector does not annihilate coupling column {b}: {col:.3e}"
                )));
            }
        }
        Ok(())
    }
}

/// Damped Newton iteration on the flatness manifold with a spectrally
/// preconditioned CGNR inner solve. `init` (full fields, node 0 included)
/// is projected onto the manifold; the returned solution satisfies the
/// sup-norm residual certificate `residual_sup <= tol` of the full system,
/// recomputed with the direct stencil.
pub fn newton_solve(
    problem: &TodaProblem,
    init: Option<&[Field]>,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<TodaSolution, SolveFailure> {
    let n = problem.grid.n;
    let nn = n * n;
    let nodes = problem.nodes();
    let red = nodes - 1;
    let mut ured: Vec<Field> = match init {
        Some(fields) => problem.reduce(fields),
        None => vec![Field::constant(n, 0.0); red],
    };
    let mut u = problem.lift(&ured);
    let mut history = Vec::new();
    let mut res_fields = problem.residual(&u);
    let mut res = sup_of(&res_fields);
    history.push(res);

    // Constraint weights entering the lift.
    let wl: Vec<f64> = (1..nodes).map(|i| problem.weights[i] / problem.weights[0]).collect();

    for iter in 0..max_iter {
        if res <= tol {
            return Ok(finish(problem, u, res_fields, iter));
        }
        let e = problem.energy_fields(&u);
        let sigma: Vec<f64> = (0..nodes)
            .map(|a| (problem.system[a][a] * e[a].mean()).max(1e-8))
            .collect();
        let lift_flat = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; nodes * nn];
            for i in 0..red {
                let src = &v[i * nn..(i + 1) * nn];
                out[(i + 1) * nn..(i + 2) * nn].copy_from_slice(src);
                for k in 0..nn {
                    out[k] -= wl[i] * src[k];
                }
            }
            out
        };
        let lift_flat_t = |r: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; red * nn];
            for i in 0..red {
                for k in 0..nn {
                    out[i * nn + k] = r[(i + 1) * nn + k] - wl[i] * r[k];
                }
            }
            out
        };
        let jtimes = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; nodes * nn];
            for a in 0..nodes {
                let va = Field { n, data: v[a * nn..(a + 1) * nn].to_vec() };
                let mut ra = problem.grid.laplacian(&va);
                ra.data.iter_mut().for_each(|x| *x *= problem.lap_coeff);
                out[a * nn..(a + 1) * nn].copy_from_slice(&ra.data);
            }
            for a in 0..nodes {
                for b in 0..nodes {
                    let s = problem.system[a][b];
                    if s == 0.0 {
                        continue;
                    }
                    for k in 0..nn {
                        out[a * nn + k] -= s * e[b].data[k] * v[b * nn + k];
                    }
                }
            }
            out
        };
        let jtimes_t = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; nodes * nn];
            for a in 0..nodes {
                let va = Field { n, data: v[a * nn..(a + 1) * nn].to_vec() };
                let mut ra = problem.grid.laplacian(&va);
                ra.data.iter_mut().for_each(|x| *x *= problem.lap_coeff);
                out[a * nn..(a + 1) * nn].copy_from_slice(&ra.data);
            }
            for a in 0..nodes {
                for b in 0..nodes {
                    let s = problem.system[b][a];
                    if s == 0.0 {
                        continue;
                    }
                    for k in 0..nn {
                        out[a * nn + k] -= s * e[a].data[k] * v[b * nn + k];
                    }
                }
            }
            out
        };
        let precond = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; nodes * nn];
            for a in 0..nodes {
                let va = Field { n, data: v[a * nn..(a + 1) * nn].to_vec() };
                let z = problem.grid.helmholtz_solve(&va, problem.lap_coeff, sigma[a]);
                out[a * nn..(a + 1) * nn].copy_from_slice(&z.data);
            }
            out
        };
        // Preconditioned constrained Jacobian: red -> full and back.
        let apply = |v: &[f64]| -> Vec<f64> { precond(&jtimes(&lift_flat(v))) };
        let apply_t = |r: &[f64]| -> Vec<f64> { lift_flat_t(&jtimes_t(&precond(r))) };
        let mut rhs = vec![0.0; nodes * nn];
        for a in 0..nodes {
            for k in 0..nn {
                rhs[a * nn + k] = -res_fields[a].data[k];
            }
        }
        let rhs = precond(&rhs);
        let step = cgnr(&apply, &apply_t, &rhs, 1e-10, 600);

        // Backtracking on the sup-norm residual.
        let mut s = 1.0f64;
        let mut accepted = false;
        for _ in 0..20 {
            let trial_red: Vec<Field> = (0..red)
                .map(|i| {
                    let mut f = ured[i].clone();
                    for k in 0..nn {
                        f.data[k] += s * step[i * nn + k];
                    }
                    f
                })
                .collect();
            let trial = problem.lift(&trial_red);
            let trial_res_fields = problem.residual(&trial);
            let trial_res = sup_of(&trial_res_fields);
            if trial_res < (1.0 - 1e-4 * s) * res || trial_res <= tol {
                ured = trial_red;
                u = trial;
                res_fields = trial_res_fields;
                res = trial_res;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        history.push(res);
        if !accepted {
            return Err(SolveFailure { best: u, residual: res, iterations: iter + 1, history });
        }
    }
    if res <= tol {
        let iters = history.len() - 1;
        return Ok(finish(problem, u, res_fields, iters));
    }
    Err(SolveFailure { best: u, residual: res, iterations: max_iter, history })
}

fn finish(problem: &TodaProblem, u: Vec<Field>, res_fields: Vec<Field>, iterations: usize) -> TodaSolution {
    let e = problem.energy_fields(&u);
    let per_node: Vec<f64> = res_fields.iter().map(Field::sup_norm).collect();
    let residual_sup = per_node.iter().copied().fold(0.0, f64::max);
    TodaSolution { u, e, residual_sup, residual_per_node: per_node, iterations, t: problem.t }
}

fn sup_of(fields: &[Field]) -> f64 {
    fields.iter().map(Field::sup_norm).fold(0.0, f64::max)
}

/// Cold start with a fallback t-continuation ladder when the direct solve
/// stalls.
pub fn solve_robust(problem: &TodaProblem, tol: f64, max_iter: usize) -> Result<TodaSolution> {
    match newton_solve(problem, None, tol, max_iter) {
        Ok(sol) => Ok(sol),
        Err(_) => {
            let mut warm: Option<Vec<Field>> = None;
            for k in (0..=3).rev() {
                let tk = problem.t / (1 << k) as f64;
                let pk = problem.with_t(tk);
                let sol = newton_solve(&pk, warm.as_deref(), tol, max_iter + 20)
                    .map_err(|f| Error::ContinuationFailure { t: tk, source: Box::new(f.into()) })?;
                warm = Some(sol.u.clone());
                if k == 0 {
                    return Ok(sol);
                }
            }
            unreachable!("ladder ends at k = 0")
        }
    }
}

/// Warm-started solves across an ascending |t| ladder.
pub fn continuation_sweep(
    problem: &TodaProblem,
    t_values: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<TodaSolution>> {
    if t_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Incompatible("t ladder must be strictly ascending".into()));
    }
    let mut out = Vec::with_capacity(t_values.len());
    let mut prev: Option<Vec<Field>> = None;
    for &t in t_values {
        let pt = problem.with_t(t);
        let sol = match newton_solve(&pt, prev.as_deref(), tol, max_iter) {
            Ok(s) => s,
            Err(f) => {
                return Err(Error::ContinuationFailure { t, source: Box::new(f.into()) });
            }
        };
        prev = Some(sol.u.clone());
        out.push(sol);
    }
    Ok(out)
}

/// Derived quantities of a converged solution.
#[derive(Debug, Clone)]
pub struct Derived {
    /// Total energy Σ e_α in raw energies (unfolded when the coupling is a
    /// fold).
    pub energy: Field,
    /// Tilde energies ẽ_α = ν(α,α) e_α per solution node.
    pub e_tilde: Vec<Field>,
    /// Curvature numerator proxy Q = 4 Σ ν(α,β) e_α e_β; `None` when the
    /// coupling has no root-system provenance.
    pub q: Option<Field>,
}

/// Energies, tilde-energies and the curvature proxy Q. For folded
/// couplings the solution fields are tilde-energies of the folded nodes;
/// they unfold by orbit (with the doubling of a half node) before Q and
/// the total energy are computed in the source root system.
pub fn derived_fields(problem: &TodaProblem, sol: &TodaSolution) -> Derived {
    let gridn = problem.grid.n;
    match (&problem.coupling, problem.mode) {
        (CouplingSpec::Raw { rs }, Mode::Raw) => {
            let mut energy = Field::constant(gridn, 0.0);
            for e in &sol.e {
                energy.axpy(1.0, e);
            }
            let e_tilde: Vec<Field> = sol
                .e
                .iter()
                .enumerate()
                .map(|(a, e)| {
                    let nu = rat_to_f64(&rs.gram_ext[(a, a)]);
                    e.map(move |v| nu * v)
                })
                .collect();
            let q = Some(q_field(rs, &sol.e));
            Derived { energy, e_tilde, q }
        }
        (coupling, _) => {
            // Solution fields are tilde-energies. Unfold if provenance is
            // available.
            let sys = coupling.affine();
            let source = coupling.source();
            match source {
                Some(rs) => {
                    let (e_unfolded, _) = unfold_energies(rs, &sys, &sol.e);
                    let mut energy = Field::constant(gridn, 0.0);
                    for e in &e_unfolded {
                        energy.axpy(1.0, e);
                    }
                    let q = Some(q_field(rs, &e_unfolded));
                    Derived { energy, e_tilde: sol.e.clone(), q }
                }
                None => {
                    let mut energy = Field::constant(gridn, 0.0);
                    for e in &sol.e {
                        energy.axpy(1.0, e);
                    }
                    Derived { energy, e_tilde: sol.e.clone(), q: None }
                }
            }
        }
    }
}

/// Unfolds folded tilde-energy fields to raw energies e_α over the source
/// extended system: ẽ_i = ẽ'_O · (2 at a half node), e_i = ẽ_i / ν(i,i).
/// Returns the raw energies and the tilde energies per unfolded node.
pub fn unfold_energies(rs: &RootSystem, sys: &AffineSystem, folded_e: &[Field]) -> (Vec<Field>, Vec<Field>) {
    let ext = rs.ext_size();
    let mut tilde: Vec<Option<Field>> = vec![None; ext];
    match &sys.provenance {
        Some(p) => {
            for (o, orbit) in p.orbits.iter().enumerate() {
                let factor = if p.half[o] { 2.0 } else { 1.0 };
                for &i in orbit {
                    tilde[i] = Some(folded_e[o].map(move |v| factor * v));
                }
            }
        }
        None => {
            // Identity: the affine system is the extended diagram itself.
            for (i, e) in folded_e.iter().enumerate() {
                tilde[i] = Some(e.clone());
            }
        }
    }
    let tilde: Vec<Field> = tilde.into_iter().map(|f| f.expect("full orbit cover")).collect();
    let raw: Vec<Field> = tilde
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let nu = rat_to_f64(&rs.gram_ext[(i, i)]);
            f.map(move |v| v / nu)
        })
        .collect();
    (raw, tilde)
}

/// Q = 4 |Σ e_α α|² = 4 Σ_{α,β} ν(α,β) e_α e_β, computed in simple-root
/// coordinates (pointwise PSD quadratic form, zero exactly on the marks
/// ray).
pub fn q_field(rs: &RootSystem, e: &[Field]) -> Field {
    let n = rs.rank;
    let gridn = e[0].n;
    let gram = rs.gram_fin().to_f64();
    // Coordinates of the extended simple roots.
    let coords: Vec<Vec<f64>> = {
        let mut v = vec![rs.delta.iter().map(|&d| -d as f64).collect::<Vec<f64>>()];
        for i in 0..n {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            v.push(c);
        }
        v
    };
    let mut s = vec![vec![0.0; gridn * gridn]; n];
    for (a, ea) in e.iter().enumerate() {
        for k in 0..n {
            let ck = coords[a][k];
            if ck != 0.0 {
                for (idx, &val) in ea.data.iter().enumerate() {
                    s[k][idx] += ck * val;
                }
            }
        }
    }
    let mut q = vec![0.0; gridn * gridn];
    for k in 0..n {
        for l in 0..n {
            let g = gram[k][l];
            if g != 0.0 {
                for idx in 0..gridn * gridn {
                    q[idx] += 4.0 * g * s[k][idx] * s[l][idx];
                }
            }
        }
    }
    Field { n: gridn, data: q }
}

/// Constancy report of the product-identity field Σ w_α (u_α(t) - u_α(s)).
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProductIdentity {
    pub sup_minus_inf: f64,
    pub constant_value: f64,
}

pub fn product_identity(weights: &[f64], a: &TodaSolution, b: &TodaSolution) -> ProductIdentity {
    let n = a.u[0].n;
    let mut field = Field::constant(n, 0.0);
    for (w, (ua, ub)) in weights.iter().zip(a.u.iter().zip(&b.u)) {
        field.axpy(*w, ua);
        field.axpy(-*w, ub);
    }
    ProductIdentity {
        sup_minus_inf: field.max() - field.min(),
        constant_value: field.mean(),
    }
}

/// Conjugate gradients on the normal equations (CGNR) for a possibly
/// rectangular operator: minimizes ||apply(x) - b||_2. Converges to the
/// minimum-norm least-squares solution, which is what the constrained
/// Newton step needs.
#[doc(hidden)]
pub fn cgnr(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_t: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let mut rt = b.to_vec();
    let b_norm = norm(&rt).max(f64::MIN_POSITIVE);
    let mut s = apply_t(&rt);
    let nx = s.len();
    let mut x = vec![0.0f64; nx];
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut best_res = b_norm;
    let mut since_best = 0usize;
    for _ in 0..max_iter {
        if gamma <= 0.0 {
            break;
        }
        let q = apply(&p);
        let q2 = dot(&q, &q);
        if q2 <= 0.0 {
            break;
        }
        let alpha = gamma / q2;
        for k in 0..nx {
            x[k] += alpha * p[k];
        }
        for (r, qk) in rt.iter_mut().zip(&q) {
            *r -= alpha * qk;
        }
        let res = norm(&rt);
        if res <= rtol * b_norm {
            break;
        }
        if res < 0.999 * best_res {
            best_res = res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 50 {
                break;
            }
        }
        s = apply_t(&rt);
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        for k in 0..nx {
            p[k] = s[k] + beta * p[k];
        }
        gamma = gamma_new;
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
