//! Linearly implicit BDF time stepping.
//!
//! Each step of order `q` solves one linear block system for `(uⁿ, wⁿ)`:
//!
//! ```text
//! M (1/τ) Σⱼ δⱼ uⁿ⁻ʲ + A wⁿ      = F(tₙ)
//! M wⁿ − A_w uⁿ                  = N(ũⁿ) + G(tₙ)
//! ```
//!
//! where `ũⁿ = Σⱼ γⱼ uⁿ⁻¹⁻ʲ` extrapolates the nonlinearity `N`, so the system
//! matrix is constant for a fixed step size and is factorized once.

use std::collections::VecDeque;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::fem::{interpolate, nonlinear_load, source_load, FemMatrices, NodalVector};
use crate::linsolve::{spd_solve, BlockSystem, LinearSolver, SolverOptions};
use crate::mesh::Mesh;
use crate::model::Problem;
use crate::sparse::SparseMatrix;

/// Nevanlinna-Odeh multiplier constants for q = 1..5.
const ETA: [f64; 5] = [0.0, 0.0, 0.0836, 0.2878, 0.8160];

#[derive(Debug, Clone, PartialEq)]
pub struct BdfScheme {
    pub q: usize,
    /// Derivative weights δ₀..δ_q.
    pub delta: Vec<f64>,
    /// Extrapolation weights γ₀..γ_{q−1}; γ₀ multiplies the newest value.
    pub gamma: Vec<f64>,
    /// Multiplier constant of the stability analysis; not used by the scheme.
    pub eta: f64,
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

/// Exact BDF weights, from expanding `δ(ζ) = Σ_{l=1}^{q} (1−ζ)^l / l` and
/// `γ(ζ) = (1 − (1−ζ)^q) / ζ`.
pub fn bdf_rational_coefficients(q: usize) -> Result<(Vec<Rational64>, Vec<Rational64>)> {
    if !(1..=5).contains(&q) {
        return Err(Error::InvalidArgument(format!("BDF order must be in 1..=5, got {q}")));
    }
    let sign = |j: usize| if j.is_multiple_of(2) { 1i64 } else { -1 };
    let delta = (0..=q)
        .map(|j| {
            (j.max(1)..=q)
                .map(|l| Rational64::new(sign(j) * binomial(l, j), l as i64))
                .fold(Rational64::from_integer(0), |a, b| a + b)
        })
        .collect();
    let gamma = (1..=q).map(|j| Rational64::from_integer(-sign(j) * binomial(q, j))).collect();
    Ok((delta, gamma))
}

pub fn bdf_coefficients(q: usize) -> Result<BdfScheme> {
    let (delta, gamma) = bdf_rational_coefficients(q)?;
    let to_f64 = |r: &Rational64| *r.numer() as f64 / *r.denom() as f64;
    Ok(BdfScheme {
        q,
        delta: delta.iter().map(to_f64).collect(),
        gamma: gamma.iter().map(to_f64).collect(),
        eta: ETA[q - 1],
    })
}

/// The most recent `u` vectors (oldest first), the current `w`, and the step counter.
#[derive(Debug, Clone)]
pub struct StateHistory {
    u: VecDeque<NodalVector>,
    capacity: usize,
    pub w: NodalVector,
    step_index: usize,
    tau: f64,
}

impl StateHistory {
    /// An empty history that will hold at most `capacity` u-vectors.
    pub fn new(capacity: usize, tau: f64) -> Self {
        Self { u: VecDeque::with_capacity(capacity + 1), capacity, w: NodalVector::default(), step_index: 0, tau }
    }

    /// Appends `u` as the value at the next time level. The first pushed value
    /// is the one at `t = 0`.
    pub fn push(&mut self, u: NodalVector) {
        if !self.u.is_empty() {
            self.step_index += 1;
        }
        self.u.push_back(u);
        while self.u.len() > self.capacity {
            self.u.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `uⁿ⁻¹⁻ʲ`, i.e. `back(0)` is the newest value.
    pub fn back(&self, j: usize) -> Option<&NodalVector> {
        self.u.len().checked_sub(j + 1).and_then(|i| self.u.get(i))
    }

    pub fn latest(&self) -> &NodalVector {
        self.u.back().expect("history is empty")
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t(&self) -> f64 {
        self.step_index as f64 * self.tau
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodalVector> {
        self.u.iter()
    }
}

/// `ũⁿ = Σⱼ γⱼ uⁿ⁻¹⁻ʲ` over the newest `q` values.
pub fn extrapolate(scheme: &BdfScheme, history: &StateHistory) -> Result<NodalVector> {
    if history.len() < scheme.q {
        return Err(Error::State(format!(
            "extrapolation of order {} needs {} history values, have {}",
            scheme.q,
            scheme.q,
            history.len()
        )));
    }
    let mut out = NodalVector::zeros(history.latest().len());
    for (j, &g) in scheme.gamma.iter().enumerate() {
        let u = history.back(j).expect("length checked");
        out.iter_mut().zip(u.iter()).for_each(|(o, v)| *o += g * v);
    }
    Ok(out)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// A BDF scheme bound to one mesh, problem and step size, holding the
/// factorized block system.
pub struct Stepper<'a> {
    scheme: BdfScheme,
    mesh: &'a Mesh,
    mats: &'a FemMatrices,
    problem: &'a Problem,
    tau: f64,
    solver: LinearSolver,
}

impl<'a> Stepper<'a> {
    pub fn new(
        scheme: BdfScheme,
        mesh: &'a Mesh,
        mats: &'a FemMatrices,
        problem: &'a Problem,
        tau: f64,
        opts: SolverOptions,
    ) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
        }
        let weighted = mats.weighted_stiffness(problem);
        let system = BlockSystem::new(scheme.delta[0], tau, &mats.mass, &mats.stiffness, &weighted)?;
        let solver = system.factorize(opts)?;
        Ok(Self { scheme, mesh, mats, problem, tau, solver })
    }

    pub fn scheme(&self) -> &BdfScheme {
        &self.scheme
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn solver(&self) -> &LinearSolver {
        &self.solver
    }

    /// Computes `(uⁿ, wⁿ)` from the history without modifying it.
    pub fn compute(&self, history: &StateHistory) -> Result<(NodalVector, NodalVector)> {
        let q = self.scheme.q;
        if history.len() < q {
            return Err(Error::State(format!("BDF{q} step needs {q} history values, have {}", history.len())));
        }
        let n = self.mats.n_dof();
        let step = history.step_index() + 1;
        let t = step as f64 * self.tau;
        let tau = self.tau;

        let mut combo = vec![0.0; n];
        for j in 1..=q {
            axpy(&mut combo, -self.scheme.delta[j], history.back(j - 1).expect("length checked"));
        }
        let mut rhs = self.mats.mass.mul_vec(&combo);
        let src = &self.problem.sources;
        if src.f_bulk.is_some() || src.f_surf.is_some() {
            let f = source_load(self.mesh, self.mats, src.f_bulk.as_ref(), src.f_surf.as_ref(), t)?;
            axpy(&mut rhs, tau, &f);
        }

        let predicted = extrapolate(&self.scheme, history)?;
        let mut second = nonlinear_load(self.mats, self.problem, &predicted)?.into_inner();
        if src.g_bulk.is_some() || src.g_surf.is_some() {
            let g = source_load(self.mesh, self.mats, src.g_bulk.as_ref(), src.g_surf.as_ref(), t)?;
            axpy(&mut second, 1.0, &g);
        }
        rhs.extend(second.iter().map(|v| tau * v));
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }

        let sol = self.solver.solve(&rhs).map_err(|e| match e {
            // a finite but astronomically large right-hand side overflows inside the solve
            Error::Solver { residual, .. } if !residual.is_finite() => Error::Divergence { step },
            e => e,
        })?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        let (u, w) = sol.split_at(n);
        Ok((NodalVector::from(u.to_vec()), NodalVector::from(w.to_vec())))
    }

    /// Advances the history by one step.
    pub fn step(&self, history: &mut StateHistory) -> Result<()> {
        let (u, w) = self.compute(history)?;
        history.push(u);
        history.w = w;
        Ok(())
    }
}

/// Recovers `w` from `M w = A_w u + N(u) + G(t)`.
pub fn recover_w(
    mesh: &Mesh,
    mats: &FemMatrices,
    problem: &Problem,
    weighted: &SparseMatrix,
    u: &[f64],
    t: f64,
    opts: SolverOptions,
) -> Result<NodalVector> {
    let mut rhs = weighted.mul_vec(u);
    axpy(&mut rhs, 1.0, &nonlinear_load(mats, problem, u)?);
    let src = &problem.sources;
    if src.g_bulk.is_some() || src.g_surf.is_some() {
        axpy(&mut rhs, 1.0, &source_load(mesh, mats, src.g_bulk.as_ref(), src.g_surf.as_ref(), t)?);
    }
    spd_solve(&mats.mass, &rhs, opts).map(NodalVector::from)
}

#[derive(Debug, Clone)]
pub enum StartingValues {
    /// `uⁱ = I_h u(tᵢ)` from the problem's exact solution.
    ExactInterpolation,
    /// `u⁰` given; `u¹..u^{q−1}` from linearly implicit BDF steps of orders 1..q−1.
    EulerBootstrap { initial: NodalVector },
}

/// Fills a history with `q` starting values and the matching `w`.
pub fn starting_values(
    mode: &StartingValues,
    scheme: &BdfScheme,
    mesh: &Mesh,
    mats: &FemMatrices,
    problem: &Problem,
    tau: f64,
    opts: SolverOptions,
) -> Result<StateHistory> {
    let q = scheme.q;
    let mut history = StateHistory::new(q, tau);
    match mode {
        StartingValues::ExactInterpolation => {
            let exact = problem
                .exact_u
                .as_ref()
                .ok_or_else(|| Error::Config("exact interpolation starting values need an exact solution".into()))?;
            for i in 0..q {
                history.push(interpolate(mesh, &|x, t| exact.eval(x, t), i as f64 * tau)?);
            }
        }
        StartingValues::EulerBootstrap { initial } => {
            if initial.len() != mesh.n_vertices() {
                return Err(Error::InvalidArgument("initial value does not match the mesh".into()));
            }
            history.push(initial.clone());
            for order in 1..q {
                let stepper = Stepper::new(bdf_coefficients(order)?, mesh, mats, problem, tau, opts)?;
                stepper.step(&mut history)?;
            }
        }
    }
    let weighted = mats.weighted_stiffness(problem);
    history.w = recover_w(mesh, mats, problem, &weighted, history.latest(), history.t(), opts)?;
    Ok(history)
}

/// What observers see after the starting values and after every step.
pub struct StepView<'a> {
    pub step: usize,
    pub t: f64,
    pub u: &'a NodalVector,
    pub w: &'a NodalVector,
    pub mesh: &'a Mesh,
    pub mats: &'a FemMatrices,
    pub problem: &'a Problem,
    /// True for the state produced by the starting procedure.
    pub initial: bool,
}

pub trait Observer {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()>;
}

impl<F: FnMut(&StepView<'_>) -> Result<()>> Observer for F {
    fn observe(&mut self, view: &StepView<'_>) -> Result<()> {
        self(view)
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps_taken: usize,
    pub final_step: usize,
    pub final_time: f64,
    pub final_u: NodalVector,
    pub final_w: NodalVector,
}

/// Number of time levels `N = t_end / τ`, checked to be an integer within rounding.
pub fn step_count(tau: f64, t_end: f64) -> Result<usize> {
    if !(tau > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("need τ > 0 and t_end > 0 (got {tau}, {t_end})")));
    }
    let n = (t_end / tau).round();
    if (n * tau - t_end).abs() > 1e-9 * t_end {
        return Err(Error::InvalidArgument(format!("τ = {tau} does not divide t_end = {t_end}")));
    }
    Ok(n as usize)
}

/// Runs the scheme from the starting values up to `t_end`.
///
/// Steps `n = q, …, N` are taken after the starting values `u⁰..u^{q−1}`; a
/// final time of `(q−1)τ` therefore takes no steps. Observers are called once
/// for the starting state and after every step; on divergence the error is
/// returned and the observers keep what they recorded so far.
#[allow(clippy::too_many_arguments)]
pub fn run(
    scheme: &BdfScheme,
    problem: &Problem,
    mesh: &Mesh,
    mats: &FemMatrices,
    tau: f64,
    t_end: f64,
    start: &StartingValues,
    opts: SolverOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<RunSummary> {
    let n_final = step_count(tau, t_end)?;
    if n_final + 1 < scheme.q {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} is shorter than the {} starting values need",
            scheme.q
        )));
    }
    let mut history = starting_values(start, scheme, mesh, mats, problem, tau, opts)?;
    let notify = |history: &StateHistory, observers: &mut [&mut dyn Observer], initial: bool| -> Result<()> {
        let view = StepView {
            step: history.step_index(),
            t: history.t(),
            u: history.latest(),
            w: &history.w,
            mesh,
            mats,
            problem,
            initial,
        };
        observers.iter_mut().try_for_each(|o| o.observe(&view))
    };
    notify(&history, observers, true)?;
    let stepper = Stepper::new(scheme.clone(), mesh, mats, problem, tau, opts)?;
    let mut steps_taken = 0;
    while history.step_index() < n_final {
        stepper.step(&mut history)?;
        steps_taken += 1;
        notify(&history, observers, false)?;
    }
    Ok(RunSummary {
        steps_taken,
        final_step: history.step_index(),
        final_time: history.t(),
        final_u: history.latest().clone(),
        final_w: history.w.clone(),
    })
}
