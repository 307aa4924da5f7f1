//! 2D compressible Euler equations on triangle meshes.
//!
//! Cell-centered first-order finite volumes with an HLL interface flux
//! (Einfeldt wave speeds) and explicit Euler time stepping. States are
//! variable-major: `x[q * Nc + i]` with `q` in `(rho, rho u, rho v, rho E)`.

use rayon::prelude::*;

use super::Velocity;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, FaceNeighbor, Mesh};
use crate::snapshot::{SnapshotSet, Trajectory};

pub const GAMMA: f64 = 1.4;
pub const NQ: usize = 4;
/// CFL number above which [`Euler::solve`] reports a warning.
pub const CFL_WARN: f64 = 0.9;

pub type Conserved = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl Primitive {
    pub fn new(rho: f64, u: f64, v: f64, p: f64) -> Self {
        Self { rho, u, v, p }
    }

    pub fn to_conserved(&self, gamma: f64) -> Conserved {
        let e = self.p / ((gamma - 1.0) * self.rho) + 0.5 * (self.u * self.u + self.v * self.v);
        [self.rho, self.rho * self.u, self.rho * self.v, self.rho * e]
    }

    /// Inverse of [`Primitive::to_conserved`]; rejects non-positive density or
    /// pressure and non-finite input.
    pub fn from_conserved(w: &Conserved, gamma: f64) -> std::result::Result<Self, String> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite state {w:?}"));
        }
        let rho = w[0];
        if rho <= 0.0 {
            return Err(format!("density {rho} is not positive"));
        }
        let u = w[1] / rho;
        let v = w[2] / rho;
        let p = (gamma - 1.0) * (w[3] - 0.5 * rho * (u * u + v * v));
        if p <= 0.0 {
            return Err(format!("pressure {p} is not positive"));
        }
        Ok(Self { rho, u, v, p })
    }

    pub fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }

    /// Total specific enthalpy `H = (E + P) / rho`.
    pub fn enthalpy(&self, gamma: f64) -> f64 {
        gamma / (gamma - 1.0) * self.p / self.rho + 0.5 * (self.u * self.u + self.v * self.v)
    }
}

/// Physical flux projected on `n`: `F n_x + G n_y`.
pub fn normal_flux(w: &Conserved, n: [f64; 2], gamma: f64) -> std::result::Result<Conserved, String> {
    let s = Primitive::from_conserved(w, gamma)?;
    Ok(flux_of(&s, w, n))
}

fn flux_of(s: &Primitive, w: &Conserved, n: [f64; 2]) -> Conserved {
    let un = s.u * n[0] + s.v * n[1];
    [
        w[0] * un,
        w[1] * un + s.p * n[0],
        w[2] * un + s.p * n[1],
        (w[3] + s.p) * un,
    ]
}

/// HLL flux across a face with unit normal `n` pointing from `wl` to `wr`.
pub fn hll_flux(wl: &Conserved, wr: &Conserved, n: [f64; 2], gamma: f64) -> std::result::Result<Conserved, String> {
    let l = Primitive::from_conserved(wl, gamma).map_err(|e| format!("left state: {e}"))?;
    let r = Primitive::from_conserved(wr, gamma).map_err(|e| format!("right state: {e}"))?;
    let fl = flux_of(&l, wl, n);
    let fr = flux_of(&r, wr, n);
    let unl = l.u * n[0] + l.v * n[1];
    let unr = r.u * n[0] + r.v * n[1];

    // Roe averages
    let (sl, sr) = (l.rho.sqrt(), r.rho.sqrt());
    let wsum = sl + sr;
    let ut = (sl * l.u + sr * r.u) / wsum;
    let vt = (sl * l.v + sr * r.v) / wsum;
    let ht = (sl * l.enthalpy(gamma) + sr * r.enthalpy(gamma)) / wsum;
    let c2 = (gamma - 1.0) * (ht - 0.5 * (ut * ut + vt * vt));
    if !(c2 > 0.0) {
        return Err(format!("Roe-averaged sound speed squared {c2} is not positive"));
    }
    let ct = c2.sqrt();
    let unt = ut * n[0] + vt * n[1];

    let s_l = (unl - l.sound_speed(gamma)).min(unt - ct);
    let s_r = (unr + r.sound_speed(gamma)).max(unt + ct);
    if s_l >= 0.0 {
        return Ok(fl);
    }
    if s_r <= 0.0 {
        return Ok(fr);
    }
    let inv = 1.0 / (s_r - s_l);
    let mut f = [0.0; 4];
    for q in 0..4 {
        f[q] = (s_r * fl[q] - s_l * fr[q] + s_l * s_r * (wr[q] - wl[q])) * inv;
    }
    Ok(f)
}

/// Largest signal speed `|u n| + c` of a state along `n`.
fn max_speed(w: &Conserved, n: [f64; 2], gamma: f64) -> f64 {
    match Primitive::from_conserved(w, gamma) {
        Ok(s) => (s.u * n[0] + s.v * n[1]).abs() + s.sound_speed(gamma),
        Err(_) => f64::INFINITY,
    }
}

/// Euler semi-discretization on a mesh.
#[derive(Clone, Debug)]
pub struct Euler {
    mesh: Mesh,
    gamma: f64,
    freestream: Option<Conserved>,
}

impl Euler {
    pub fn new(mesh: Mesh, gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(Self {
            mesh,
            gamma,
            freestream: None,
        })
    }

    /// Freestream used by inflow boundaries.
    pub fn with_freestream(mut self, s: Primitive) -> Self {
        self.freestream = Some(s.to_conserved(self.gamma));
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    pub fn cell(&self, x: &[f64], i: usize) -> Conserved {
        let nc = self.num_cells();
        [x[i], x[nc + i], x[2 * nc + i], x[3 * nc + i]]
    }

    /// Assemble a state vector from per-cell primitives.
    pub fn state_from(&self, f: impl Fn(usize, [f64; 2]) -> Primitive) -> Vec<f64> {
        let nc = self.num_cells();
        let mut x = vec![0.0; NQ * nc];
        for (i, c) in self.mesh.centers.iter().enumerate() {
            let w = f(i, *c).to_conserved(self.gamma);
            for q in 0..NQ {
                x[q * nc + i] = w[q];
            }
        }
        x
    }

    fn ghost(&self, tag: BoundaryTag, inner: &Conserved, n: [f64; 2]) -> Conserved {
        match tag {
            BoundaryTag::Outflow => *inner,
            BoundaryTag::Inflow | BoundaryTag::LeftDirichlet => self.freestream.unwrap_or(*inner),
            BoundaryTag::SlipWall => {
                let mn = inner[1] * n[0] + inner[2] * n[1];
                [inner[0], inner[1] - 2.0 * mn * n[0], inner[2] - 2.0 * mn * n[1], inner[3]]
            }
        }
    }

    fn check_cells(&self, x: &[f64], t: f64) -> Result<()> {
        let nc = self.num_cells();
        if x.len() != NQ * nc {
            return Err(Error::Dimension(format!("Euler state length {} for {nc} cells", x.len())));
        }
        for i in 0..nc {
            if let Err(detail) = Primitive::from_conserved(&self.cell(x, i), self.gamma) {
                return Err(Error::Unphysical { cell: i, time: t, detail });
            }
        }
        Ok(())
    }

    /// Flux through every face, oriented along the face normal (out of `left`).
    pub fn face_fluxes(&self, x: &[f64], t: f64) -> Result<Vec<Conserved>> {
        self.check_cells(x, t)?;
        self.mesh
            .faces
            .par_iter()
            .enumerate()
            .map(|(k, f)| {
                let wl = self.cell(x, f.left);
                let wr = match f.right {
                    FaceNeighbor::Cell(j) => self.cell(x, j),
                    FaceNeighbor::Boundary(tag) => self.ghost(tag, &wl, f.normal),
                };
                hll_flux(&wl, &wr, f.normal, self.gamma).map_err(|detail| Error::FaceState { face: k, detail })
            })
            .collect()
    }

    /// `sum over boundary faces of flux * length`: the net outflow of each
    /// conserved quantity.
    pub fn boundary_outflow(&self, x: &[f64], t: f64) -> Result<Conserved> {
        let fluxes = self.face_fluxes(x, t)?;
        let mut total = [0.0; 4];
        for (f, fl) in self.mesh.faces.iter().zip(&fluxes) {
            if !f.is_interior() {
                for q in 0..4 {
                    total[q] += fl[q] * f.length;
                }
            }
        }
        Ok(total)
    }

    /// `dt * max_i sum_faces s_f len_f / area_i`.
    pub fn cfl(&self, x: &[f64], dt: f64) -> f64 {
        let mut acc = vec![0.0; self.num_cells()];
        for f in &self.mesh.faces {
            let wl = self.cell(x, f.left);
            let mut s = max_speed(&wl, f.normal, self.gamma);
            if let FaceNeighbor::Cell(j) = f.right {
                s = s.max(max_speed(&self.cell(x, j), f.normal, self.gamma));
                acc[j] += s * f.length;
            }
            acc[f.left] += s * f.length;
        }
        acc.iter()
            .zip(&self.mesh.areas)
            .map(|(a, area)| dt * a / area)
            .fold(0.0, f64::max)
    }

    /// Forward Euler march; returns `steps + 1` states and the largest CFL
    /// number seen.
    pub fn solve(&self, x0: Vec<f64>, dt: f64, steps: usize) -> Result<(Vec<Vec<f64>>, f64)> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let mut states = Vec::with_capacity(steps + 1);
        let mut max_cfl = 0.0f64;
        states.push(x0);
        for k in 0..steps {
            let x = &states[k];
            max_cfl = max_cfl.max(self.cfl(x, dt));
            let f = self.velocity(x, k as f64 * dt).map_err(|e| Error::Step {
                step: k + 1,
                source: Box::new(e),
            })?;
            let next: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a - dt * b).collect();
            states.push(next);
        }
        self.check_cells(&states[steps], steps as f64 * dt).map_err(|e| Error::Step {
            step: steps,
            source: Box::new(e),
        })?;
        Ok((states, max_cfl))
    }
}

impl Velocity for Euler {
    fn dim(&self) -> usize {
        NQ * self.num_cells()
    }

    /// Net outward flux per unit area, so that `dU/dt = -f`.
    fn velocity(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let fluxes = self.face_fluxes(x, t)?;
        let nc = self.num_cells();
        let mut out = vec![0.0; NQ * nc];
        for (f, fl) in self.mesh.faces.iter().zip(&fluxes) {
            for q in 0..NQ {
                out[q * nc + f.left] += fl[q] * f.length;
                if let FaceNeighbor::Cell(j) = f.right {
                    out[q * nc + j] -= fl[q] * f.length;
                }
            }
        }
        for q in 0..NQ {
            for (i, area) in self.mesh.areas.iter().enumerate() {
                out[q * nc + i] /= area;
            }
        }
        Ok(out)
    }
}

/// The four quadrant states of the parameterized Riemann problem, numbered
/// counter-clockwise from the upper right.
pub fn quadrant_states(mu_u: f64, mu_v: f64, gamma: f64) -> [Primitive; 4] {
    let (rho1, p1) = (1.0f64, 1.0f64);
    let (rho3, p) = (0.8f64, 0.4f64);
    let rho2 = rho1 * (p / p1).powf(1.0 / gamma);
    let u2 = mu_u + 2.0 * gamma.sqrt() / (gamma - 1.0) * ((p / rho2).sqrt() - (p1 / rho1).sqrt());
    let k = (gamma - 1.0) / (gamma + 1.0);
    let rho4 = rho1 * (p / p1 + k) / (1.0 + k * p / p1);
    let v4 = mu_v + ((p - p1) * (rho4 - rho1) / (rho4 * rho1)).sqrt();
    [
        Primitive::new(rho1, mu_u, mu_v, p1),
        Primitive::new(rho2, u2, mu_v, p),
        Primitive::new(rho3, mu_u, mu_v, p),
        Primitive::new(rho4, mu_u, v4, p),
    ]
}

/// Quadrant index (0-based) of a point in the unit square split at 0.5.
pub fn quadrant(c: [f64; 2]) -> usize {
    match (c[0] >= 0.5, c[1] >= 0.5) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

pub fn riemann_initial(model: &Euler, mu: [f64; 2]) -> Vec<f64> {
    let q = quadrant_states(mu[0], mu[1], model.gamma());
    model.state_from(|_, c| q[quadrant(c)])
}

/// Freestream for Mach number `mu_in` with unit density and pressure.
pub fn freestream(mu_in: f64, gamma: f64) -> Primitive {
    Primitive::new(1.0, mu_in * gamma.sqrt(), 0.0, 1.0)
}

/// `mu = (-1.2 - 0.2 i, -0.3 - 0.1 j)`.
pub fn riemann_param_grid(n: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push([-1.2 - 0.2 * i as f64, -0.3 - 0.1 * j as f64]);
        }
    }
    out
}

/// Freestream Mach numbers `1.0, 1.05, ..., 1.25`.
pub fn bowshock_params() -> Vec<f64> {
    (0..6).map(|k| 1.0 + 0.05 * k as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EulerCase {
    Riemann,
    BowShock,
}

impl EulerCase {
    pub fn name(self) -> &'static str {
        match self {
            EulerCase::Riemann => "riemann",
            EulerCase::BowShock => "bowshock",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EulerConfig {
    pub gamma: f64,
    pub dt: f64,
    pub final_time: f64,
}

impl EulerConfig {
    pub fn riemann() -> Self {
        Self {
            gamma: GAMMA,
            dt: 0.001,
            final_time: 0.3,
        }
    }

    pub fn bowshock() -> Self {
        Self {
            gamma: GAMMA,
            dt: 0.001,
            final_time: 1.0,
        }
    }

    pub fn steps(&self) -> usize {
        (self.final_time / self.dt).round() as usize
    }
}

/// Run one Euler case; the parameter vector is `(mu_u, mu_v)` for the
/// Riemann problem and `(mu_in)` for the bow shock. Starts from the
/// freestream everywhere in the bow-shock case.
pub fn run_case(mesh: &Mesh, case: EulerCase, mu: &[f64], cfg: &EulerConfig) -> Result<(Trajectory, f64)> {
    let (model, x0) = match case {
        EulerCase::Riemann => {
            let [mu_u, mu_v] = <[f64; 2]>::try_from(mu)
                .map_err(|_| Error::Config("riemann case takes two parameters".into()))?;
            let model = Euler::new(mesh.clone(), cfg.gamma)?;
            let x0 = riemann_initial(&model, [mu_u, mu_v]);
            (model, x0)
        }
        EulerCase::BowShock => {
            let [mu_in] =
                <[f64; 1]>::try_from(mu).map_err(|_| Error::Config("bow-shock case takes one parameter".into()))?;
            let fs = freestream(mu_in, cfg.gamma);
            let model = Euler::new(mesh.clone(), cfg.gamma)?.with_freestream(fs);
            let x0 = model.state_from(|_, _| fs);
            (model, x0)
        }
    };
    let (states, cfl) = model.solve(x0, cfg.dt, cfg.steps())?;
    Ok((
        Trajectory {
            mu: mu.to_vec(),
            states,
            latents: None,
        },
        cfl,
    ))
}

/// Model with the boundary data a case needs.
pub fn case_model(mesh: &Mesh, case: EulerCase, mu: &[f64], gamma: f64) -> Result<Euler> {
    let model = Euler::new(mesh.clone(), gamma)?;
    Ok(match case {
        EulerCase::Riemann => model,
        EulerCase::BowShock => {
            let mu_in = *mu.first().ok_or_else(|| Error::Config("missing freestream Mach".into()))?;
            model.with_freestream(freestream(mu_in, gamma))
        }
    })
}

/// Initial state of a case on `model`'s mesh.
pub fn initial_state(model: &Euler, case: EulerCase, mu: &[f64]) -> Result<Vec<f64>> {
    match case {
        EulerCase::Riemann => {
            let [mu_u, mu_v] =
                <[f64; 2]>::try_from(mu).map_err(|_| Error::Config("riemann case takes two parameters".into()))?;
            Ok(riemann_initial(model, [mu_u, mu_v]))
        }
        EulerCase::BowShock => {
            let [mu_in] =
                <[f64; 1]>::try_from(mu).map_err(|_| Error::Config("bow-shock case takes one parameter".into()))?;
            let fs = freestream(mu_in, model.gamma());
            Ok(model.state_from(|_, _| fs))
        }
    }
}

/// Run every parameter in parallel into one snapshot set.
pub fn training_set(mesh: &Mesh, case: EulerCase, params: &[Vec<f64>], cfg: &EulerConfig) -> Result<SnapshotSet> {
    let runs: Vec<_> = params
        .par_iter()
        .map(|mu| run_case(mesh, case, mu, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut set = SnapshotSet::new(case.name(), NQ, mesh.num_cells(), cfg.dt, mesh.hash());
    for (traj, _) in runs {
        set.push(traj)?;
    }
    Ok(set)
}
