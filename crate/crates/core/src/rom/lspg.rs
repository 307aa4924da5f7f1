use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::{ResidualProblem, Velocity};
use crate::num::{norm2, solve_spd, DenseMatrix, DifferentiableMap};

/// Step length `beta` used in each Gauss-Newton iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepPolicy {
    Fixed { beta: f64 },
    /// `initial * factor^(j / patience)`, restarting every time step.
    Decay { initial: f64, factor: f64, patience: usize },
    /// Backtracking on `||r||^2 / 2` from `initial`, shrinking by `shrink`.
    Armijo {
        initial: f64,
        shrink: f64,
        c: f64,
        max_backtracks: usize,
    },
}

impl StepPolicy {
    pub fn unit() -> Self {
        StepPolicy::Fixed { beta: 1.0 }
    }

    /// Start at 0.5 and cut by 10% after every 10 unconverged iterations.
    pub fn decaying() -> Self {
        StepPolicy::Decay {
            initial: 0.5,
            factor: 0.9,
            patience: 10,
        }
    }

    pub fn armijo() -> Self {
        StepPolicy::Armijo {
            initial: 1.0,
            shrink: 0.5,
            c: 1e-4,
            max_backtracks: 20,
        }
    }

    fn beta(&self, iteration: usize) -> f64 {
        match *self {
            StepPolicy::Fixed { beta } => beta,
            StepPolicy::Decay { initial, factor, patience } => initial * factor.powi((iteration / patience.max(1)) as i32),
            StepPolicy::Armijo { initial, .. } => initial,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepPolicy::Fixed { beta } => beta > 0.0,
            StepPolicy::Decay { initial, factor, patience } => initial > 0.0 && factor > 0.0 && factor <= 1.0 && patience > 0,
            StepPolicy::Armijo { initial, shrink, c, .. } => initial > 0.0 && shrink > 0.0 && shrink < 1.0 && c > 0.0 && c < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid step policy {self:?}")))
        }
    }
}

/// Which reduced residual normalizes the convergence ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// The initial guess of the first time step (the encoded initial state).
    #[default]
    FirstStep,
    /// The initial guess of the current time step.
    PerStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RomConfig {
    pub kappa: f64,
    pub policy: StepPolicy,
    pub max_iterations: usize,
    pub normalization: Normalization,
}

impl RomConfig {
    pub fn pod_lspg() -> Self {
        Self {
            kappa: 1e-4,
            policy: StepPolicy::unit(),
            max_iterations: 200,
            normalization: Normalization::FirstStep,
        }
    }

    pub fn gd_lspg() -> Self {
        Self {
            kappa: 1e-3,
            ..Self::pod_lspg()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::Config(format!("kappa must lie in [0, 1], got {}", self.kappa)));
        }
        self.policy.validate()
    }
}

/// Latent and reconstructed trajectories with per-step solver statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RomTrajectory {
    pub latents: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
    /// Gauss-Newton iterations per step (from step 1).
    pub iterations: Vec<usize>,
    /// Final convergence ratio per step.
    pub ratios: Vec<f64>,
    /// Reduced-residual norm at the first step's initial guess.
    pub reference_norm: f64,
}

/// Converged Gauss-Newton solve of one time step.
#[derive(Clone, Debug)]
pub struct GnOutcome {
    pub xhat: Vec<f64>,
    pub state: Vec<f64>,
    pub iterations: usize,
    pub ratio: f64,
    /// `||r_hat||` at the initial guess.
    pub initial_norm: f64,
}

fn ratio_of(num: f64, den: f64) -> f64 {
    // a zero reference falls back to an absolute test
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Solve one time step. `reference` is the convergence denominator; `None`
/// uses this step's initial reduced residual.
#[allow(clippy::too_many_arguments)]
pub fn gn_step<V: Velocity + ?Sized>(
    problem: &ResidualProblem<'_, V>,
    decoder: &dyn DifferentiableMap,
    guess: &[f64],
    history_term: &[f64],
    t_next: f64,
    cfg: &RomConfig,
    reference: Option<f64>,
    step: usize,
) -> Result<GnOutcome> {
    let m = decoder.input_dim();
    let eye = DenseMatrix::identity(m);
    let mut xhat = guess.to_vec();
    let mut best_ratio = f64::INFINITY;
    let mut initial_norm = f64::NAN;
    let mut den = reference.unwrap_or(f64::NAN);
    for j in 0..=cfg.max_iterations {
        let (state, jdec) = decoder.push_forward(&xhat, &eye)?;
        let r = problem.residual(&state, history_term, t_next)?;
        let psi = problem.jacobian_apply(&state, t_next, &jdec)?;
        let rhat = psi.t_matvec(&r)?;
        let norm = norm2(&rhat);
        if j == 0 {
            initial_norm = norm;
            if reference.is_none() {
                den = norm;
            }
        }
        let ratio = ratio_of(norm, den);
        if !ratio.is_finite() {
            return Err(Error::NonFinite { layer: 0 });
        }
        best_ratio = best_ratio.min(ratio);
        if ratio <= cfg.kappa {
            return Ok(GnOutcome {
                xhat,
                state,
                iterations: j,
                ratio,
                initial_norm,
            });
        }
        if j == cfg.max_iterations {
            break;
        }
        let normal = psi.t_matmul(&psi)?;
        let neg: Vec<f64> = rhat.iter().map(|v| -v).collect();
        let dir = solve_spd(&normal, &neg)?;
        let beta = match cfg.policy {
            StepPolicy::Armijo {
                initial,
                shrink,
                c,
                max_backtracks,
            } => {
                let f0 = 0.5 * norm2(&r).powi(2);
                let slope: f64 = rhat.iter().zip(&dir).map(|(a, b)| a * b).sum();
                let mut beta = initial;
                for _ in 0..max_backtracks {
                    let trial: Vec<f64> = xhat.iter().zip(&dir).map(|(a, d)| a + beta * d).collect();
                    let rt = problem.residual(&decoder.eval(&trial)?, history_term, t_next)?;
                    if 0.5 * norm2(&rt).powi(2) <= f0 + c * beta * slope {
                        break;
                    }
                    beta *= shrink;
                }
                beta
            }
            policy => policy.beta(j),
        };
        xhat.iter_mut().zip(&dir).for_each(|(a, d)| *a += beta * d);
    }
    Err(Error::GaussNewton {
        step,
        iterations: cfg.max_iterations,
        best_ratio,
    })
}

/// March `steps` time steps from the latent initial condition `xhat0`.
/// Works for any differentiable decoder, linear or not.
pub fn rom_solve<V: Velocity + ?Sized>(
    problem: &ResidualProblem<'_, V>,
    decoder: &dyn DifferentiableMap,
    xhat0: &[f64],
    steps: usize,
    cfg: &RomConfig,
) -> Result<RomTrajectory> {
    cfg.validate()?;
    if xhat0.len() != decoder.input_dim() {
        return Err(Error::Dimension(format!(
            "initial latent of length {} for a decoder with {} inputs",
            xhat0.len(),
            decoder.input_dim()
        )));
    }
    if decoder.output_dim() != problem.dim() {
        return Err(Error::Dimension(format!(
            "decoder output {} does not match the residual dimension {}",
            decoder.output_dim(),
            problem.dim()
        )));
    }
    let dt = problem.scheme.dt();
    let mut out = RomTrajectory {
        latents: vec![xhat0.to_vec()],
        states: vec![decoder.eval(xhat0)?],
        ..Default::default()
    };
    let mut reference = None;
    for n in 1..=steps {
        let t_next = n as f64 * dt;
        let tau = problem.scheme.steps();
        let hist: Vec<&[f64]> = (0..tau).map(|i| out.states[n.saturating_sub(1 + i)].as_slice()).collect();
        let h = problem.history_term(&hist, t_next).map_err(|e| Error::Step {
            step: n,
            source: Box::new(e),
        })?;
        let guess = out.latents[n - 1].clone();
        let res = gn_step(problem, decoder, &guess, &h, t_next, cfg, reference, n).map_err(|e| match e {
            e @ Error::GaussNewton { .. } => e,
            other => Error::Step {
                step: n,
                source: Box::new(other),
            },
        })?;
        if n == 1 {
            out.reference_norm = res.initial_norm;
            if cfg.normalization == Normalization::FirstStep {
                reference = Some(res.initial_norm);
                // the first step was judged against its own initial guess,
                // which is exactly the first-step reference
            }
        }
        out.iterations.push(res.iterations);
        out.ratios.push(res.ratio);
        out.latents.push(res.xhat);
        out.states.push(res.state);
    }
    Ok(out)
}

/// POD-LSPG written directly in terms of the basis, with a constant trial
/// Jacobian `Phi`; independent of [`rom_solve`].
pub fn pod_lspg<V: Velocity + ?Sized>(
    problem: &ResidualProblem<'_, V>,
    phi: &DenseMatrix,
    xhat0: &[f64],
    steps: usize,
    cfg: &RomConfig,
) -> Result<RomTrajectory> {
    cfg.validate()?;
    if phi.rows() != problem.dim() || phi.cols() != xhat0.len() {
        return Err(Error::Dimension("basis does not match problem or initial latent".into()));
    }
    let dt = problem.scheme.dt();
    let mut latents = vec![xhat0.to_vec()];
    let mut states = vec![phi.matvec(xhat0)?];
    let mut iterations = Vec::with_capacity(steps);
    let mut ratios = Vec::with_capacity(steps);
    let mut den = f64::NAN;
    for n in 1..=steps {
        let t = n as f64 * dt;
        let tau = problem.scheme.steps();
        let hist: Vec<&[f64]> = (0..tau).map(|i| states[n.saturating_sub(1 + i)].as_slice()).collect();
        let h = problem.history_term(&hist, t)?;
        let mut q = latents[n - 1].clone();
        let mut step_den = f64::NAN;
        let mut best = f64::INFINITY;
        let mut done = None;
        for j in 0..=cfg.max_iterations {
            let x = phi.matvec(&q)?;
            let r = problem.residual(&x, &h, t)?;
            let psi = problem.jacobian_apply(&x, t, phi)?;
            let g = psi.t_matvec(&r)?;
            let gn = norm2(&g);
            if j == 0 {
                step_den = gn;
                if n == 1 {
                    den = gn;
                }
            }
            let d = match cfg.normalization {
                Normalization::FirstStep => den,
                Normalization::PerStep => step_den,
            };
            let ratio = ratio_of(gn, d);
            best = best.min(ratio);
            if ratio <= cfg.kappa {
                done = Some((j, ratio, x));
                break;
            }
            if j == cfg.max_iterations {
                break;
            }
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let delta = solve_spd(&psi.t_matmul(&psi)?, &neg)?;
            let beta = match cfg.policy {
                StepPolicy::Armijo { .. } => {
                    return Err(Error::Config("the direct POD-LSPG solver supports fixed and decaying steps".into()))
                }
                p => p.beta(j),
            };
            for (a, b) in q.iter_mut().zip(&delta) {
                *a += beta * b;
            }
        }
        let (j, ratio, x) = done.ok_or(Error::GaussNewton {
            step: n,
            iterations: cfg.max_iterations,
            best_ratio: best,
        })?;
        iterations.push(j);
        ratios.push(ratio);
        latents.push(q);
        states.push(x);
    }
    Ok(RomTrajectory {
        latents,
        states,
        iterations,
        ratios,
        reference_norm: den,
    })
}
