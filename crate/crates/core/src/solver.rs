//! Fixed-point propagation engine for stage equations on [0,1] tableaus.
//!
//! On an interval [t0, t0 + h] the stage values solve
//!
//! ```text
//! y_k = e^{hτ_k L} y0 + h Σ_j S_kj e^{h(τ_k − τ_j) L} g(t0 + hτ_j, y_j)
//! ```
//!
//! and are found by Gauss–Seidel sweeps: node k is updated with the current
//! right-hand sides, including those refreshed earlier in the same sweep,
//! and g at node k is re-evaluated right away. With L = 0 this is the plain
//! collocation form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Lu, Mat};
use crate::tableau::{Interval, Tableau};

/// Which model a right-hand-side evaluation uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Low,
    Full,
}

/// y' = L y + g(t, y).
pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// g(t, y) with the requested model.
    fn g(&self, fidelity: Fidelity, t: f64, y: &[f64], out: &mut [f64]);

    /// Whether a separate low-fidelity model exists.
    fn has_low(&self) -> bool {
        false
    }

    /// out = e^{dt L} y. The default is L = 0.
    fn apply_exp_l(&self, _dt: f64, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// An [`OdeSystem`] from closures.
pub struct FnSystem<G, E = fn(f64, &[f64], &mut [f64])> {
    dim: usize,
    g: G,
    exp_l: Option<E>,
}

impl<G> FnSystem<G>
where
    G: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, g: G) -> Self {
        FnSystem { dim, g, exp_l: None }
    }
}

impl<G, E> FnSystem<G, E>
where
    G: Fn(f64, &[f64], &mut [f64]),
    E: Fn(f64, &[f64], &mut [f64]),
{
    pub fn with_exp_l(dim: usize, g: G, exp_l: E) -> Self {
        FnSystem { dim, g, exp_l: Some(exp_l) }
    }
}

impl<G, E> OdeSystem for FnSystem<G, E>
where
    G: Fn(f64, &[f64], &mut [f64]),
    E: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn g(&self, _fidelity: Fidelity, t: f64, y: &[f64], out: &mut [f64]) {
        (self.g)(t, y, out)
    }

    fn apply_exp_l(&self, dt: f64, y: &[f64], out: &mut [f64]) {
        match &self.exp_l {
            Some(e) => e(dt, y, out),
            None => out.copy_from_slice(y),
        }
    }
}

/// Force used by the sweeps of one phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Force {
    Low,
    Full,
    /// Low model plus the frozen difference full − low from the most recent
    /// `Full` sweep at that node.
    Corrected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweeps {
    Fixed(usize),
    /// Until the sweep delta drops below tol·(1 + max|y|), at most `max`.
    UntilConverged { max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub force: Force,
    pub sweeps: Sweeps,
}

impl Phase {
    pub fn new(force: Force, sweeps: Sweeps) -> Self {
        Phase { force, sweeps }
    }
}

/// Ordered list of phases applied on every interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub phases: Vec<Phase>,
}

impl Schedule {
    /// Full model until converged.
    pub fn full(max: usize) -> Self {
        Schedule { phases: vec![Phase::new(Force::Full, Sweeps::UntilConverged { max })] }
    }

    /// A fixed number of full-model sweeps.
    pub fn fixed(n: usize) -> Self {
        Schedule { phases: vec![Phase::new(Force::Full, Sweeps::Fixed(n))] }
    }

    /// Low model to convergence, one full-model sweep, `continue_sweeps`
    /// corrected sweeps, a second full-model sweep and one final corrected
    /// sweep. Two full-model evaluations per node.
    pub fn two_fidelity(max: usize, continue_sweeps: Sweeps) -> Self {
        Schedule {
            phases: vec![
                Phase::new(Force::Low, Sweeps::UntilConverged { max }),
                Phase::new(Force::Full, Sweeps::Fixed(1)),
                Phase::new(Force::Corrected, continue_sweeps),
                Phase::new(Force::Full, Sweeps::Fixed(1)),
                Phase::new(Force::Corrected, Sweeps::Fixed(1)),
            ],
        }
    }

    pub fn validate(&self, sys: &dyn OdeSystem) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::InvalidInput("empty schedule".into()));
        }
        let mut seen_full = false;
        for (i, p) in self.phases.iter().enumerate() {
            match p.force {
                Force::Low | Force::Corrected if !sys.has_low() => {
                    return Err(Error::InvalidInput(format!(
                        "phase {i} uses the low-fidelity model, which the system does not provide"
                    )));
                }
                Force::Corrected if !seen_full => {
                    return Err(Error::InvalidInput(format!("phase {i} is corrected but no full sweep precedes it")));
                }
                Force::Full => seen_full = true,
                _ => {}
            }
            if let Sweeps::UntilConverged { max: 0 } = p.sweeps {
                return Err(Error::InvalidInput(format!("phase {i} allows zero sweeps")));
            }
        }
        Ok(())
    }

    fn uses_correction(&self) -> bool {
        self.phases.iter().any(|p| p.force == Force::Corrected)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// y_k = y0 at every node.
    Constant,
    /// Reuse the previous interval's stage increments y_k − y0.
    PreviousIncrements,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub schedule: Schedule,
    pub tol: f64,
    /// Consecutive growing sweep deltas that count as divergence.
    pub divergence_window: usize,
    pub initial_guess: InitialGuess,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            schedule: Schedule::full(200),
            tol: 1e-14,
            divergence_window: 3,
            initial_guess: InitialGuess::Constant,
        }
    }
}

impl SolveOptions {
    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub full: u64,
    pub low: u64,
}

impl std::ops::AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        self.full += o.full;
        self.low += o.low;
    }
}

/// Per-phase record of one interval solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseLog {
    pub force: Force,
    pub sweeps: usize,
    pub counts: EvalCounts,
    pub converged: bool,
}

/// f64 copy of a [0,1] tableau.
#[derive(Clone, Debug)]
pub struct StageMatrix {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major M×M.
    pub s: Vec<f64>,
}

impl StageMatrix {
    pub fn from_tableau(tab: &Tableau) -> Result<Self> {
        let t = match tab.interval {
            Interval::Unit => tab.clone(),
            Interval::Symmetric => tab.rescale_to_unit()?,
        };
        Ok(StageMatrix { nodes: t.nodes_f64(), weights: t.weights_f64(), s: t.s_f64().data })
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Clone, Debug)]
pub struct IntervalSolution {
    pub t0: f64,
    pub h: f64,
    /// y(t0 + hτ_k)
    pub stages: Vec<Vec<f64>>,
    pub end: Vec<f64>,
    /// Total sweeps, all phases.
    pub sweeps: usize,
    /// Sweep deltas in order.
    pub history: Vec<f64>,
    pub phases: Vec<PhaseLog>,
    pub counts: EvalCounts,
    /// The last until-converged phase met its tolerance.
    pub converged: bool,
}

struct Work {
    d: usize,
    y: Vec<f64>,
    g: Vec<f64>,
    corr: Vec<f64>,
    tmp: Vec<f64>,
    acc: Vec<f64>,
    low: Vec<f64>,
}

fn eval_node(
    sys: &dyn OdeSystem,
    w: &mut Work,
    force: Force,
    t: f64,
    k: usize,
    want_corr: bool,
    counts: &mut EvalCounts,
) -> Result<()> {
    let d = w.d;
    let yk = &w.y[k * d..(k + 1) * d];
    let gk = &mut w.g[k * d..(k + 1) * d];
    match force {
        Force::Low => {
            sys.g(Fidelity::Low, t, yk, gk);
            counts.low += 1;
        }
        Force::Full => {
            sys.g(Fidelity::Full, t, yk, gk);
            counts.full += 1;
            if want_corr {
                sys.g(Fidelity::Low, t, yk, &mut w.low);
                counts.low += 1;
                for i in 0..d {
                    w.corr[k * d + i] = gk[i] - w.low[i];
                }
            }
        }
        Force::Corrected => {
            sys.g(Fidelity::Low, t, yk, gk);
            counts.low += 1;
            for i in 0..d {
                gk[i] += w.corr[k * d + i];
            }
        }
    }
    if gk.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    Ok(())
}

/// One interval of length `h` (negative steps backward) from `y0` at `t0`.
/// `guess` overrides the initial stage values (M·d, node-major).
pub fn solve_interval(
    sys: &dyn OdeSystem,
    tab: &StageMatrix,
    y0: &[f64],
    t0: f64,
    h: f64,
    opts: &SolveOptions,
    guess: Option<&[f64]>,
) -> Result<IntervalSolution> {
    let d = sys.dim();
    let m = tab.m();
    if y0.len() != d {
        return Err(Error::InvalidInput(format!("state has length {}, system dimension is {d}", y0.len())));
    }
    if !(h != 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("interval length must be finite and nonzero, got {h}")));
    }
    opts.schedule.validate(sys)?;
    let want_corr = opts.schedule.uses_correction();

    let mut w = Work {
        d,
        y: match guess {
            Some(gs) if gs.len() == m * d => gs.to_vec(),
            Some(gs) => {
                return Err(Error::InvalidInput(format!("initial guess has length {}, expected {}", gs.len(), m * d)))
            }
            None => y0.repeat(m),
        },
        g: vec![0.0; m * d],
        corr: vec![0.0; m * d],
        tmp: vec![0.0; d],
        acc: vec![0.0; d],
        low: vec![0.0; d],
    };
    let times: Vec<f64> = tab.nodes.iter().map(|&tau| t0 + h * tau).collect();
    // e^{hτ_k L} y0
    let mut free = vec![0.0; m * d];
    for k in 0..m {
        sys.apply_exp_l(h * tab.nodes[k], y0, &mut free[k * d..(k + 1) * d]);
    }

    let mut counts = EvalCounts::default();
    let mut phases = Vec::with_capacity(opts.schedule.phases.len());
    let mut history = Vec::new();
    let mut sweeps_total = 0;
    let mut converged = true;

    // initial right-hand sides with the first phase's model
    let first = opts.schedule.phases[0].force;
    let init_force = if first == Force::Corrected { Force::Full } else { first };
    let mut init_counts = EvalCounts::default();
    for k in 0..m {
        eval_node(sys, &mut w, init_force, times[k], k, want_corr, &mut init_counts)?;
    }
    counts += init_counts;

    for (pi, phase) in opts.schedule.phases.iter().enumerate() {
        let mut pc = if pi == 0 { init_counts } else { EvalCounts::default() };
        let (max, adaptive) = match phase.sweeps {
            Sweeps::Fixed(n) => (n, false),
            Sweeps::UntilConverged { max } => (max, true),
        };
        let mut growing = 0;
        let mut last_delta = f64::INFINITY;
        let mut done = !adaptive;
        let mut n = 0;
        while n < max {
            let mut delta = 0.0f64;
            let mut scale = 0.0f64;
            for k in 0..m {
                w.acc.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..m {
                    let skj = tab.s[k * m + j];
                    if skj == 0.0 {
                        continue;
                    }
                    let gj = &w.g[j * d..(j + 1) * d];
                    if tab.nodes[k] == tab.nodes[j] {
                        w.tmp.copy_from_slice(gj);
                    } else {
                        sys.apply_exp_l(h * (tab.nodes[k] - tab.nodes[j]), gj, &mut w.tmp);
                    }
                    for i in 0..d {
                        w.acc[i] += skj * w.tmp[i];
                    }
                }
                for i in 0..d {
                    let new = free[k * d + i] + h * w.acc[i];
                    delta = delta.max((new - w.y[k * d + i]).abs());
                    scale = scale.max(new.abs());
                    w.y[k * d + i] = new;
                }
                eval_node(sys, &mut w, phase.force, times[k], k, want_corr, &mut pc)?;
            }
            n += 1;
            if !delta.is_finite() {
                return Err(Error::NonFinite { t: t0 });
            }
            history.push(delta);
            if adaptive {
                if delta <= opts.tol * (1.0 + scale) {
                    done = true;
                    break;
                }
                if delta > last_delta {
                    growing += 1;
                    if growing >= opts.divergence_window {
                        return Err(Error::Diverged { sweeps: sweeps_total + n, history });
                    }
                } else {
                    growing = 0;
                }
                last_delta = delta;
            }
        }
        sweeps_total += n;
        if adaptive {
            converged = done;
        }
        counts += if pi == 0 {
            EvalCounts { full: pc.full - init_counts.full, low: pc.low - init_counts.low }
        } else {
            pc
        };
        phases.push(PhaseLog { force: phase.force, sweeps: n, counts: pc, converged: done });
    }

    // y(t0 + h) = e^{hL} y0 + h Σ w_j e^{h(1 − τ_j)L} g_j
    let mut end = vec![0.0; d];
    sys.apply_exp_l(h, y0, &mut end);
    for j in 0..m {
        sys.apply_exp_l(h * (1.0 - tab.nodes[j]), &w.g[j * d..(j + 1) * d], &mut w.tmp);
        for i in 0..d {
            end[i] += h * tab.weights[j] * w.tmp[i];
        }
    }
    let stages = w.y.chunks(d).map(|c| c.to_vec()).collect();
    Ok(IntervalSolution {
        t0,
        h,
        stages,
        end,
        sweeps: sweeps_total,
        history,
        phases,
        counts,
        converged,
    })
}

/// Direct solve of the stage equations for y' = A y with L = 0:
/// (I − h S⊗A) Y = 1⊗y0, then y(t0 + h) = y0 + h Σ w_j A y_j.
/// Returns (stages, end). No sweep limit, so any |h|·‖A‖ the tableau
/// resolves is reachable.
pub fn solve_linear_interval(tab: &StageMatrix, a: &Mat<f64>, y0: &[f64], h: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let d = y0.len();
    if a.rows != d || a.cols != d {
        return Err(Error::InvalidInput(format!("A is {}×{}, state has {d} entries", a.rows, a.cols)));
    }
    let m = tab.m();
    let n = m * d;
    let big = Mat::from_fn(n, n, |r, c| {
        let (k, i) = (r / d, r % d);
        let (j, l) = (c / d, c % d);
        let id = if r == c { 1.0 } else { 0.0 };
        id - h * tab.s[k * m + j] * a[(i, l)]
    });
    let rhs: Vec<f64> = (0..n).map(|r| y0[r % d]).collect();
    let y = Lu::new(&big)?.solve(&rhs);
    let mut end = y0.to_vec();
    for j in 0..m {
        let ay = a.matvec(&y[j * d..(j + 1) * d]);
        for i in 0..d {
            end[i] += h * tab.weights[j] * ay[i];
        }
    }
    Ok((y.chunks(d).map(|c| c.to_vec()).collect(), end))
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Stage times in order, interval by interval.
    pub stage_times: Vec<f64>,
    pub stage_states: Vec<Vec<f64>>,
    /// t0, t0 + h, ..., t1
    pub end_times: Vec<f64>,
    pub end_states: Vec<Vec<f64>>,
    pub counts: EvalCounts,
    pub sweeps: Vec<usize>,
    pub histories: Vec<Vec<f64>>,
    pub phases: Vec<Vec<PhaseLog>>,
    /// Every interval converged.
    pub converged: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.end_states.last().expect("trajectory has the initial state")
    }

    /// CSV "t,y0,y1,..." over stage times, with the interval endpoints
    /// included.
    pub fn to_csv(&self) -> String {
        let d = self.end_states[0].len();
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",y{i}"));
        }
        out.push('\n');
        let mut rows: Vec<(f64, &Vec<f64>)> = self.stage_times.iter().copied().zip(&self.stage_states).collect();
        rows.extend(self.end_times.iter().copied().zip(&self.end_states));
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, y) in rows {
            out.push_str(&format!("{t:.17e}"));
            for v in y {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Uniform intervals from t0 to t1.
pub fn propagate(
    sys: &dyn OdeSystem,
    tab: &StageMatrix,
    y0: &[f64],
    t0: f64,
    t1: f64,
    n_intervals: usize,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    if n_intervals == 0 {
        return Err(Error::InvalidInput("need at least one interval".into()));
    }
    let h = (t1 - t0) / n_intervals as f64;
    let d = y0.len();
    let mut traj = Trajectory {
        stage_times: Vec::with_capacity(n_intervals * tab.m()),
        stage_states: Vec::with_capacity(n_intervals * tab.m()),
        end_times: vec![t0],
        end_states: vec![y0.to_vec()],
        counts: EvalCounts::default(),
        sweeps: Vec::with_capacity(n_intervals),
        histories: Vec::with_capacity(n_intervals),
        phases: Vec::with_capacity(n_intervals),
        converged: true,
    };
    let mut y = y0.to_vec();
    let mut increments: Option<Vec<f64>> = None;
    for i in 0..n_intervals {
        let ti = t0 + h * i as f64;
        let guess = match (opts.initial_guess, &increments) {
            (InitialGuess::PreviousIncrements, Some(inc)) => {
                Some(inc.chunks(d).flat_map(|c| c.iter().zip(&y).map(|(a, b)| a + b)).collect::<Vec<f64>>())
            }
            _ => None,
        };
        let sol = solve_interval(sys, tab, &y, ti, h, opts, guess.as_deref())
            .map_err(|e| Error::Interval { index: i, source: Box::new(e) })?;
        if opts.initial_guess == InitialGuess::PreviousIncrements {
            increments = Some(sol.stages.iter().flat_map(|s| s.iter().zip(&y).map(|(a, b)| a - b)).collect());
        }
        for (k, s) in sol.stages.iter().enumerate() {
            traj.stage_times.push(ti + h * tab.nodes[k]);
            traj.stage_states.push(s.clone());
        }
        y = sol.end.clone();
        traj.end_times.push(if i + 1 == n_intervals { t1 } else { ti + h });
        traj.end_states.push(sol.end);
        traj.counts += sol.counts;
        traj.sweeps.push(sol.sweeps);
        traj.histories.push(sol.history);
        traj.phases.push(sol.phases);
        traj.converged &= sol.converged;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::build_gauss_legendre;

    fn gl(m: usize) -> StageMatrix {
        StageMatrix::from_tableau(&build_gauss_legendre(m).unwrap()).unwrap()
    }

    #[test]
    fn zero_rhs_is_linear_flow() {
        let sys = FnSystem::with_exp_l(
            2,
            |_t: f64, _y: &[f64], out: &mut [f64]| out.fill(0.0),
            |dt: f64, y: &[f64], out: &mut [f64]| {
                out[0] = y[0] + dt * y[1];
                out[1] = y[1];
            },
        );
        let tab = gl(6);
        let sol = solve_interval(&sys, &tab, &[1.0, 2.0], 0.0, 3.0, &SolveOptions::default(), None).unwrap();
        for (k, s) in sol.stages.iter().enumerate() {
            assert_eq!(s[0], 1.0 + 3.0 * tab.nodes[k] * 2.0);
            assert_eq!(s[1], 2.0);
        }
        assert!((sol.end[0] - 7.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_decay_matches_exponential() {
        let sys = FnSystem::new(1, |_t: f64, y: &[f64], out: &mut [f64]| out[0] = -y[0]);
        let sol = solve_interval(&sys, &gl(8), &[1.0], 0.0, 0.5, &SolveOptions::default(), None).unwrap();
        assert!((sol.end[0] - (-0.5f64).exp()).abs() < 1e-15, "{}", sol.end[0]);
        assert!(sol.converged);
    }

    #[test]
    fn divergence_is_reported() {
        let sys = FnSystem::new(1, |_t: f64, y: &[f64], out: &mut [f64]| out[0] = 50.0 * y[0]);
        let err = solve_interval(&sys, &gl(4), &[1.0], 0.0, 1.0, &SolveOptions::default(), None).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }

    #[test]
    fn schedule_needs_low_model() {
        let sys = FnSystem::new(1, |_t: f64, y: &[f64], out: &mut [f64]| out[0] = -y[0]);
        let opts = SolveOptions::default().with_schedule(Schedule::two_fidelity(10, Sweeps::Fixed(1)));
        assert!(solve_interval(&sys, &gl(4), &[1.0], 0.0, 1.0, &opts, None).is_err());
    }

    #[test]
    fn fixed_sweep_counts() {
        let sys = FnSystem::new(1, |_t: f64, y: &[f64], out: &mut [f64]| out[0] = -y[0]);
        let opts = SolveOptions::default().with_schedule(Schedule::fixed(5));
        let sol = solve_interval(&sys, &gl(4), &[1.0], 0.0, 1.0, &opts, None).unwrap();
        // 4 initial + 5 sweeps × 4 nodes
        assert_eq!(sol.counts.full, 24);
        assert_eq!(sol.sweeps, 5);
    }
}
