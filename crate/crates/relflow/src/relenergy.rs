//! Relative-energy machinery: the Bregman-based distance between a weak
//! solver trajectory and a strong reference pair, term-by-term evaluation of
//! the relative energy inequality, the epsilon-shift regularization for
//! vacuum-touching references, density-split estimates, and the Gronwall
//! certification monitor.

use std::sync::Arc;

use crate::constitutive::{ConstitutiveError, PressureLaw};
use crate::solver1d::{Boundary, FluidState1D, Grid1D, Trajectory};
use crate::transport::{
    CharacteristicFlow, DensityProfile, Domain1D, RegularityReport, VelocityFieldSpec,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RelEnergyError {
    #[error("reference density vanishes with gamma < 2; apply epsilon_shift first")]
    VacuumReference,
    #[error("need at least 3 epsilon values, got {0}")]
    TooFewEpsilons(usize),
    #[error("rho_bar = {rho_bar} is below the required 2 max(rho_tilde) = {required}")]
    RhoBarTooSmall { rho_bar: f64, required: f64 },
    #[error("reference is not differentiable; strong residual unavailable")]
    NonDifferentiableReference,
    #[error("reference carries no regularity report")]
    MissingRegularity,
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
}

/// How the strong reference pair was obtained; recorded in certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    CharacteristicsBuilt,
    FineSolverRun,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Analytic => write!(f, "analytic"),
            Provenance::CharacteristicsBuilt => write!(f, "characteristics"),
            Provenance::FineSolverRun => write!(f, "fine-solver"),
        }
    }
}

type Field2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Strong reference pair (rho_tilde, u_tilde) as space-time fields.
#[derive(Clone)]
pub struct ReferencePair {
    rho: Field2,
    u: Field2,
    du_dx: Option<Field2>,
    du_dt: Option<Field2>,
    pub provenance: Provenance,
    pub regularity: Option<Arc<RegularityReport>>,
}

impl ReferencePair {
    /// Reference from closed-form fields with their velocity derivatives.
    pub fn analytic(
        rho: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        du_dx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        du_dt: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            rho: Arc::new(rho),
            u: Arc::new(u),
            du_dx: Some(Arc::new(du_dx)),
            du_dt: Some(Arc::new(du_dt)),
            provenance: Provenance::Analytic,
            regularity: None,
        }
    }

    /// Reference built by transporting `rho0` along the characteristics of
    /// an analytic velocity field: continuity holds by construction.
    pub fn from_characteristics(
        rho0: DensityProfile,
        spec: VelocityFieldSpec,
        domain: Domain1D,
        rho_b: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        flow: CharacteristicFlow,
    ) -> Self {
        let spec2 = spec.clone();
        let spec3 = spec.clone();
        let spec4 = spec.clone();
        let rho = move |t: f64, x: f64| -> f64 {
            let b = rho_b.as_ref().map(|f| {
                let f = f.clone();
                move |s: f64| f(s)
            });
            match b {
                Some(bf) => flow
                    .density_from_characteristics(&rho0, Some(&bf), &spec2, &domain, t, x)
                    .unwrap_or(0.0),
                None => flow
                    .density_from_characteristics(&rho0, None, &spec2, &domain, t, x)
                    .unwrap_or(0.0),
            }
        };
        // The velocity is analytic, so its time derivative comes from a
        // centered difference with a fixed small step.
        let dt_h = 1e-5;
        Self {
            rho: Arc::new(rho),
            u: Arc::new(move |t, x| spec.value(t, x)),
            du_dx: Some(Arc::new(move |t, x| spec3.gradient(t, x))),
            du_dt: Some(Arc::new(move |t, x| {
                (spec4.value(t + dt_h, x) - spec4.value(t - dt_h, x)) / (2.0 * dt_h)
            })),
            provenance: Provenance::CharacteristicsBuilt,
            regularity: None,
        }
    }

    /// Reference from a fine solver run: piecewise-linear interpolation in
    /// space, piecewise-constant in time. Not differentiable.
    pub fn from_fine_run(traj: Trajectory) -> Self {
        let velocities: Arc<Vec<Vec<f64>>> =
            Arc::new(traj.states.iter().map(|s| s.velocity()).collect());
        let traj = Arc::new(traj);
        let traj2 = traj.clone();
        let interp = |grid: &Grid1D, field: &[f64], x: f64| -> f64 {
            let dx = grid.dx();
            let n = field.len();
            let s = (x - grid.x_min) / dx - 0.5;
            if s <= 0.0 {
                return field[0];
            }
            if s >= (n - 1) as f64 {
                return field[n - 1];
            }
            let i = s.floor() as usize;
            let w = s - i as f64;
            field[i] * (1.0 - w) + field[i + 1] * w
        };
        let rho = {
            let traj = traj.clone();
            move |t: f64, x: f64| {
                let k = traj.index_at(t);
                interp(&traj.grid, &traj.states[k].rho, x)
            }
        };
        let u = move |t: f64, x: f64| {
            let k = traj2.index_at(t);
            interp(&traj2.grid, &velocities[k], x)
        };
        Self {
            rho: Arc::new(rho),
            u: Arc::new(u),
            du_dx: None,
            du_dt: None,
            provenance: Provenance::FineSolverRun,
            regularity: None,
        }
    }

    pub fn with_regularity(mut self, report: RegularityReport) -> Self {
        self.regularity = Some(Arc::new(report));
        self
    }

    pub fn rho_tilde(&self, t: f64, x: f64) -> f64 {
        (self.rho)(t, x)
    }

    pub fn u_tilde(&self, t: f64, x: f64) -> f64 {
        (self.u)(t, x)
    }

    pub fn is_differentiable(&self) -> bool {
        self.du_dx.is_some() && self.du_dt.is_some()
    }

    /// Velocity gradient: analytic when available, otherwise a centered
    /// difference with step h.
    pub fn u_tilde_dx(&self, t: f64, x: f64, h: f64) -> f64 {
        match &self.du_dx {
            Some(f) => f(t, x),
            None => ((self.u)(t, x + h) - (self.u)(t, x - h)) / (2.0 * h),
        }
    }

    pub fn u_tilde_dt(&self, t: f64, x: f64, h: f64) -> f64 {
        match &self.du_dt {
            Some(f) => f(t, x),
            None => {
                let tm = (t - h).max(0.0);
                ((self.u)(t + h, x) - (self.u)(tm, x)) / (t + h - tm)
            }
        }
    }

    /// Same pair with the density shifted to rho_tilde + epsilon: the
    /// regularization that makes the Bregman distance finite over vacuum.
    pub fn epsilon_shift(&self, epsilon: f64) -> ReferencePair {
        assert!(epsilon > 0.0);
        let rho = self.rho.clone();
        ReferencePair {
            rho: Arc::new(move |t, x| rho(t, x) + epsilon),
            u: self.u.clone(),
            du_dx: self.du_dx.clone(),
            du_dt: self.du_dt.clone(),
            provenance: self.provenance,
            regularity: self.regularity.clone(),
        }
    }

    /// Pointwise continuity residual d_t rho + d_x (rho u) of the reference,
    /// by centered differences with steps (ht, hx).
    pub fn continuity_defect(&self, t: f64, x: f64, ht: f64, hx: f64) -> f64 {
        let tm = (t - ht).max(0.0);
        let dt_rho = (self.rho_tilde(t + ht, x) - self.rho_tilde(tm, x)) / (t + ht - tm);
        let flux = |xx: f64| self.rho_tilde(t, xx) * self.u_tilde(t, xx);
        dt_rho + (flux(x + hx) - flux(x - hx)) / (2.0 * hx)
    }
}

/// Relative energy sum_cells [1/2 rho |u - u_tilde|^2 + Bregman(rho | rho_tilde)] dx.
pub fn relative_energy(
    grid: &Grid1D,
    state: &FluidState1D,
    reference: &ReferencePair,
    law: &PressureLaw,
    t: f64,
) -> Result<f64, RelEnergyError> {
    let u = state.velocity();
    let dx = grid.dx();
    let mut acc = 0.0;
    for i in 0..state.n_cells() {
        let x = grid.center(i);
        let rt = reference.rho_tilde(t, x);
        let ut = reference.u_tilde(t, x);
        let breg = law.bregman_pressure(state.rho[i], rt).map_err(|e| match e {
            ConstitutiveError::VacuumReference => RelEnergyError::VacuumReference,
            other => RelEnergyError::Constitutive(other),
        })?;
        acc += 0.5 * state.rho[i] * (u[i] - ut).powi(2) + breg;
    }
    Ok(acc * dx)
}

/// Scaling study of the three terms of the vanishing-epsilon limit.
#[derive(Debug, Clone)]
pub struct EpsilonScalingReport {
    pub epsilons: Vec<f64>,
    /// Per epsilon: (initial-data penalty, p'(rho+eps) div u term, the
    /// eps rho p'(rho+eps)/(rho+eps) term).
    pub values: Vec<[f64; 3]>,
    /// Fitted log-log slopes of the three terms.
    pub slopes: [f64; 3],
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        // A term that is identically zero vanishes faster than any power.
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Evaluates the three epsilon-weighted terms across an epsilon list and
/// fits their scaling exponents. The third term is the one whose slope must
/// match gamma - 1.
pub fn epsilon_vanishing_terms(
    traj: &Trajectory,
    reference: &ReferencePair,
    law: &PressureLaw,
    epsilons: &[f64],
) -> Result<EpsilonScalingReport, RelEnergyError> {
    if epsilons.len() < 3 {
        return Err(RelEnergyError::TooFewEpsilons(epsilons.len()));
    }
    let grid = &traj.grid;
    let dx = grid.dx();
    let fd_h = grid.dx();
    let mut values = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        // (i) initial-data penalty: convexity gap of P at rho_0 over eps.
        let init = &traj.states[0];
        let mut t1 = 0.0;
        for i in 0..init.n_cells() {
            let r0 = init.rho[i];
            if r0 <= 0.0 {
                continue;
            }
            t1 += (law.pressure_potential(r0)? + eps * law.potential_derivative(r0)?
                - law.pressure_potential(r0 + eps)?)
            .abs();
        }
        t1 *= dx;
        // (ii), (iii): time integrals over the trajectory, trapezoid in time.
        let rate = |state: &FluidState1D| -> (f64, f64) {
            let t = state.t;
            let mut a2 = 0.0;
            let mut a3 = 0.0;
            for i in 0..state.n_cells() {
                let x = grid.center(i);
                let rt = reference.rho_tilde(t, x) + eps;
                let div_u = reference.u_tilde_dx(t, x, fd_h);
                let p_prime = law.pressure_derivative(rt).unwrap();
                a2 += p_prime * div_u;
                a3 += state.rho[i] * p_prime / rt;
            }
            (eps * (a2 * dx).abs(), eps * a3 * dx)
        };
        let mut t2 = 0.0;
        let mut t3 = 0.0;
        for k in 0..traj.states.len() - 1 {
            let dt = traj.states[k + 1].t - traj.states[k].t;
            let (a2, a3) = rate(&traj.states[k]);
            let (b2, b3) = rate(&traj.states[k + 1]);
            t2 += 0.5 * (a2 + b2) * dt;
            t3 += 0.5 * (a3 + b3) * dt;
        }
        values.push([t1, t2, t3]);
    }
    let slopes = [
        log_log_slope(epsilons, &values.iter().map(|v| v[0]).collect::<Vec<_>>()),
        log_log_slope(epsilons, &values.iter().map(|v| v[1]).collect::<Vec<_>>()),
        log_log_slope(epsilons, &values.iter().map(|v| v[2]).collect::<Vec<_>>()),
    ];
    Ok(EpsilonScalingReport { epsilons: epsilons.to_vec(), values, slopes })
}

/// One sample time of the relative energy inequality, term by term.
#[derive(Debug, Clone, Copy)]
pub struct ReiSample {
    pub tau: f64,
    pub energy: f64,
    /// LHS: relative-energy increment E(tau) - E(0).
    pub lhs_energy_increment: f64,
    /// LHS: coercive Fenchel-Young dissipation block nu |d_x(u - u_tilde)|^2.
    pub lhs_dissipation: f64,
    /// LHS: boundary Bregman terms with the [u_B n]+- split.
    pub lhs_boundary: f64,
    /// LHS: defect mass carried by the weak solution (zero unless injected).
    pub lhs_defect: f64,
    /// RHS: velocity-gradient-weighted kinetic term.
    pub rhs_kinetic: f64,
    /// RHS: pressure Bregman weighted by div u_tilde.
    pub rhs_pressure: f64,
    /// RHS: strong-residual term with b.
    pub rhs_residual: f64,
    /// RHS: continuity-residual term with p'(rho_tilde)(1 - rho/rho_tilde).
    pub rhs_continuity: f64,
    /// RHS: defect term.
    pub rhs_defect: f64,
}

impl ReiSample {
    pub fn lhs_total(&self) -> f64 {
        self.lhs_energy_increment + self.lhs_dissipation + self.lhs_boundary + self.lhs_defect
    }

    pub fn rhs_total(&self) -> f64 {
        self.rhs_kinetic + self.rhs_pressure + self.rhs_residual + self.rhs_continuity
            + self.rhs_defect
    }
}

/// Strong residual b = d_t u + u d_x u + d_x P'(rho) of the reference, per
/// cell. The pressure term is a centered difference of P'(rho_tilde), which
/// stays finite down to vacuum.
pub fn strong_residual(
    reference: &ReferencePair,
    law: &PressureLaw,
    grid: &Grid1D,
    t: f64,
) -> Result<Vec<f64>, RelEnergyError> {
    if !reference.is_differentiable() {
        return Err(RelEnergyError::NonDifferentiableReference);
    }
    let dx = grid.dx();
    let h = 1e-5;
    let pp = |x: f64| -> f64 {
        law.potential_derivative(reference.rho_tilde(t, x).max(0.0))
            .unwrap()
    };
    let mut out = Vec::with_capacity(grid.n_cells);
    for i in 0..grid.n_cells {
        let x = grid.center(i);
        let grad_pp = (pp(x + dx) - pp(x - dx)) / (2.0 * dx);
        let u = reference.u_tilde(t, x);
        out.push(reference.u_tilde_dt(t, x, h) + u * reference.u_tilde_dx(t, x, h) + grad_pp);
    }
    Ok(out)
}

/// Strong residual with a finite-difference fallback for references without
/// analytic derivatives (used internally by the trace builder).
fn strong_residual_fd(reference: &ReferencePair, law: &PressureLaw, grid: &Grid1D, t: f64) -> Vec<f64> {
    let dx = grid.dx();
    let ht = 1e-4;
    let pp = |x: f64| -> f64 {
        law.potential_derivative(reference.rho_tilde(t, x).max(0.0))
            .unwrap()
    };
    (0..grid.n_cells)
        .map(|i| {
            let x = grid.center(i);
            let grad_pp = (pp(x + dx) - pp(x - dx)) / (2.0 * dx);
            let u = reference.u_tilde(t, x);
            reference.u_tilde_dt(t, x, ht) + u * reference.u_tilde_dx(t, x, dx) + grad_pp
        })
        .collect()
}

/// Term-by-term evaluation of the relative energy inequality over a weak
/// trajectory against a strictly positive reference.
pub fn rei_terms(
    traj: &Trajectory,
    reference: &ReferencePair,
    law: &PressureLaw,
    nu: f64,
    bc: &Boundary,
    defect_mass: Option<&[f64]>,
) -> Result<Vec<ReiSample>, RelEnergyError> {
    if reference.regularity.is_none() {
        return Err(RelEnergyError::MissingRegularity);
    }
    let grid = &traj.grid;
    let dx = grid.dx();
    let n = traj.states[0].n_cells();
    let e0 = relative_energy(grid, &traj.states[0], reference, law, traj.states[0].t)?;
    let fd_h = dx;

    // Instantaneous rates of every integral term at a stored state.
    struct Rates {
        diss: f64,
        boundary: f64,
        kinetic: f64,
        pressure: f64,
        residual: f64,
        continuity: f64,
    }
    let b_field_at = |t: f64| -> Vec<f64> {
        if reference.is_differentiable() {
            strong_residual(reference, law, grid, t).unwrap()
        } else {
            strong_residual_fd(reference, law, grid, t)
        }
    };
    let rates = |state: &FluidState1D| -> Result<Rates, RelEnergyError> {
        let t = state.t;
        let u = state.velocity();
        let b = b_field_at(t);
        let mut diss = 0.0;
        let mut kinetic = 0.0;
        let mut pressure = 0.0;
        let mut residual = 0.0;
        let mut continuity = 0.0;
        for i in 0..n {
            let x = grid.center(i);
            let rt = reference.rho_tilde(t, x);
            let ut = reference.u_tilde(t, x);
            let dut = reference.u_tilde_dx(t, x, fd_h);
            // Face-forward difference of the weak velocity, matching the
            // solver's viscous stencil.
            let du = if i + 1 < n { (u[i + 1] - u[i]) / dx } else { (u[i] - u[i - 1]) / dx };
            diss += nu * (du - dut).powi(2);
            kinetic += -state.rho[i] * (u[i] - ut).powi(2) * dut;
            let breg_p = law.pressure(state.rho[i])? - law.pressure(rt)?
                - law.pressure_derivative(rt)? * (state.rho[i] - rt);
            pressure += -breg_p * dut;
            residual += -state.rho[i] * b[i] * (u[i] - ut);
            let defect = reference.continuity_defect(t, x, 1e-4, dx);
            continuity += law.pressure_derivative(rt)? * (1.0 - state.rho[i] / rt) * defect;
        }
        let mut boundary = 0.0;
        if let Boundary::InOut(bd) = bc {
            // Boundary Bregman terms, evaluated at the boundary-adjacent
            // cells (flagged approximation of the boundary trace).
            let breg = |rho: f64, x: f64| -> f64 {
                law.bregman_pressure(rho, reference.rho_tilde(t, x)).unwrap_or(0.0)
            };
            let left_trace = breg(state.rho[0], grid.x_min);
            let right_trace = breg(state.rho[n - 1], grid.x_max);
            // u_B n = -u_left on the left, +u_right on the right.
            boundary += left_trace * (-bd.u_left).max(0.0)
                + bd.rho_left.map_or(0.0, |rb| breg(rb, grid.x_min)) * (-bd.u_left).min(0.0);
            boundary += right_trace * bd.u_right.max(0.0)
                + bd.rho_right.map_or(0.0, |rb| breg(rb, grid.x_max)) * bd.u_right.min(0.0);
        }
        Ok(Rates {
            diss: diss * dx,
            boundary,
            kinetic: kinetic * dx,
            pressure: pressure * dx,
            residual: residual * dx,
            continuity: continuity * dx,
        })
    };

    let mut samples = Vec::with_capacity(traj.states.len());
    let mut acc = Rates { diss: 0.0, boundary: 0.0, kinetic: 0.0, pressure: 0.0, residual: 0.0, continuity: 0.0 };
    let mut prev = rates(&traj.states[0])?;
    let defect_total = defect_mass.map_or(0.0, |d| d.iter().sum::<f64>());
    samples.push(ReiSample {
        tau: traj.states[0].t,
        energy: e0,
        lhs_energy_increment: 0.0,
        lhs_dissipation: 0.0,
        lhs_boundary: 0.0,
        lhs_defect: 0.0,
        rhs_kinetic: 0.0,
        rhs_pressure: 0.0,
        rhs_residual: 0.0,
        rhs_continuity: 0.0,
        rhs_defect: 0.0,
    });
    for k in 1..traj.states.len() {
        let state = &traj.states[k];
        let cur = rates(state)?;
        let dt = state.t - traj.states[k - 1].t;
        acc.diss += 0.5 * (prev.diss + cur.diss) * dt;
        acc.boundary += 0.5 * (prev.boundary + cur.boundary) * dt;
        acc.kinetic += 0.5 * (prev.kinetic + cur.kinetic) * dt;
        acc.pressure += 0.5 * (prev.pressure + cur.pressure) * dt;
        acc.residual += 0.5 * (prev.residual + cur.residual) * dt;
        acc.continuity += 0.5 * (prev.continuity + cur.continuity) * dt;
        prev = cur;
        let e = relative_energy(grid, state, reference, law, state.t)?;
        samples.push(ReiSample {
            tau: state.t,
            energy: e,
            lhs_energy_increment: e - e0,
            lhs_dissipation: acc.diss,
            lhs_boundary: acc.boundary,
            lhs_defect: defect_total,
            rhs_kinetic: acc.kinetic,
            rhs_pressure: acc.pressure,
            rhs_residual: acc.residual,
            rhs_continuity: acc.continuity,
            rhs_defect: defect_total,
        });
    }
    Ok(samples)
}

/// Both sides of the high/low density-split estimates.
#[derive(Debug, Clone, Copy)]
pub struct DensitySplit {
    /// High part (rho >= rho_bar): residual-weighted kinetic coupling.
    pub high_lhs: f64,
    pub high_rhs: f64,
    /// Low part (rho < rho_bar): Young split with weight delta.
    pub low_lhs: f64,
    pub low_rhs: f64,
    /// Convexity bound: L2 density gap on {rho <= rho_bar} vs energy.
    pub convexity_lhs: f64,
    pub convexity_rhs: f64,
    pub c_high: f64,
    pub delta: f64,
    pub convexity_constant: f64,
}

impl DensitySplit {
    pub fn holds(&self) -> bool {
        let slack = 1e-10;
        self.high_lhs <= self.high_rhs + slack
            && self.low_lhs <= self.low_rhs + slack
            && self.convexity_lhs <= self.convexity_rhs + slack
    }
}

/// Evaluates the complementary density-split bounds at time t with the
/// threshold rho_bar (which must dominate twice the reference density).
pub fn density_split_bound(
    grid: &Grid1D,
    state: &FluidState1D,
    reference: &ReferencePair,
    law: &PressureLaw,
    t: f64,
    rho_bar: f64,
) -> Result<DensitySplit, RelEnergyError> {
    let n = state.n_cells();
    let max_rt = (0..n)
        .map(|i| reference.rho_tilde(t, grid.center(i)))
        .fold(0.0f64, f64::max);
    if rho_bar < 2.0 * max_rt {
        return Err(RelEnergyError::RhoBarTooSmall { rho_bar, required: 2.0 * max_rt });
    }
    let dx = grid.dx();
    let u = state.velocity();
    let b = if reference.is_differentiable() {
        strong_residual(reference, law, grid, t)?
    } else {
        strong_residual_fd(reference, law, grid, t)
    };
    let b_inf = b.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let energy = relative_energy(grid, state, reference, law, t)?;

    // c_high: lower bound of Bregman(rho | rho_tilde)/rho over the high set
    // for any rho_tilde <= rho_bar/2, by a scan over the worst reference.
    let rho_max = state.max_density().max(rho_bar);
    let mut c_high = f64::INFINITY;
    for k in 0..=64 {
        let rho = rho_bar + (rho_max * 2.0 - rho_bar) * k as f64 / 64.0;
        let breg = law.bregman_pressure(rho, rho_bar / 2.0).unwrap_or(f64::INFINITY);
        c_high = c_high.min(breg / rho);
    }
    let delta = 0.25;
    let convexity_constant = law.bregman_convexity_constant(rho_bar, 64);

    let mut high_lhs = 0.0;
    let mut low_lhs = 0.0;
    let mut low_young = 0.0;
    let mut kinetic = 0.0;
    let mut conv_lhs = 0.0;
    let mut conv_breg = 0.0;
    for i in 0..n {
        let x = grid.center(i);
        let ut = reference.u_tilde(t, x);
        let rt = reference.rho_tilde(t, x);
        let term = state.rho[i] * b[i].abs() * (u[i] - ut).abs();
        kinetic += state.rho[i] * (u[i] - ut).powi(2);
        if state.rho[i] >= rho_bar {
            high_lhs += term;
        } else {
            low_lhs += term;
            low_young += state.rho[i] * b[i] * b[i];
            let gap = state.rho[i] - rt;
            conv_lhs += gap * gap;
            conv_breg += law.bregman_pressure(state.rho[i], rt).unwrap_or(0.0);
        }
    }
    high_lhs *= dx;
    low_lhs *= dx;
    let low_rhs = delta * kinetic * dx + low_young * dx / (4.0 * delta);
    let high_rhs = b_inf * (energy + energy / (2.0 * c_high).max(f64::MIN_POSITIVE));
    Ok(DensitySplit {
        high_lhs,
        high_rhs,
        low_lhs,
        low_rhs,
        convexity_lhs: conv_lhs * dx,
        convexity_rhs: conv_breg * dx / convexity_constant,
        c_high,
        delta,
        convexity_constant,
    })
}

/// Time series feeding the Gronwall monitor.
#[derive(Debug, Clone)]
pub struct RelativeEnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// Gronwall rate chi(t) = 2 |d_x u_tilde|_inf + |b|_inf per sample.
    pub chi: Vec<f64>,
    /// Nonnegative residual rate r(t) closing the discrete Gronwall step.
    pub residual: Vec<f64>,
    /// Sup norm of the strong residual per sample.
    pub b_norms: Vec<f64>,
    /// Accumulated coercive dissipation per sample.
    pub dissipation: Vec<f64>,
    pub reference_mode: Provenance,
}

/// Builds the certification trace of a weak trajectory against a reference:
/// relative energy, Gronwall rate chi = 2 |grad u_tilde|_inf + |b|_inf, and
/// the measured residual rate that closes each discrete Gronwall step.
pub fn build_trace(
    traj: &Trajectory,
    reference: &ReferencePair,
    law: &PressureLaw,
    nu: f64,
) -> Result<RelativeEnergyTrace, RelEnergyError> {
    let grid = &traj.grid;
    let dx = grid.dx();
    let n = traj.states[0].n_cells();
    let mut times = Vec::new();
    let mut energy = Vec::new();
    let mut chi = Vec::new();
    let mut b_norms = Vec::new();
    let mut dissipation = Vec::new();
    let mut acc_diss = 0.0;
    let mut prev_diss_rate = None::<f64>;
    for state in &traj.states {
        let t = state.t;
        let e = relative_energy(grid, state, reference, law, t)?;
        let b = if reference.is_differentiable() {
            strong_residual(reference, law, grid, t)?
        } else {
            strong_residual_fd(reference, law, grid, t)
        };
        let b_inf = b.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let grad_inf = (0..n)
            .map(|i| reference.u_tilde_dx(t, grid.center(i), dx).abs())
            .fold(0.0f64, f64::max);
        let u = state.velocity();
        let mut diss_rate = 0.0;
        for i in 0..n.saturating_sub(1) {
            let du = (u[i + 1] - u[i]) / dx;
            let dut = reference.u_tilde_dx(t, grid.center(i), dx);
            diss_rate += nu * (du - dut).powi(2) * dx;
        }
        if let Some(prev) = prev_diss_rate {
            let dt = t - times.last().unwrap();
            acc_diss += 0.5 * (prev + diss_rate) * dt;
        }
        prev_diss_rate = Some(diss_rate);
        times.push(t);
        energy.push(e);
        chi.push(2.0 * grad_inf + b_inf);
        b_norms.push(b_inf);
        dissipation.push(acc_diss);
    }
    // Residual rate per step: the excess of the measured energy growth over
    // chi E, so that E_{k+1} <= E_k (1 + chi dt) + r dt holds by
    // construction and discrete Gronwall closes.
    let mut residual = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k + 1 < times.len() {
            let dt = times[k + 1] - times[k];
            let rate = (energy[k + 1] - energy[k]) / dt - chi[k] * energy[k];
            residual.push(rate.max(0.0));
        } else {
            residual.push(0.0);
        }
    }
    Ok(RelativeEnergyTrace {
        times,
        energy,
        chi,
        residual,
        b_norms,
        dissipation,
        reference_mode: reference.provenance,
    })
}

/// One certificate row: the Gronwall bound at a sample time.
#[derive(Debug, Clone, Copy)]
pub struct CertificateRow {
    pub tau: f64,
    pub energy: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub chi: f64,
}

#[derive(Debug, Clone)]
pub struct GronwallCertificate {
    pub pass: bool,
    /// Smallest (rhs - lhs) over the sample times.
    pub margin: f64,
    pub first_violation: Option<f64>,
    pub rows: Vec<CertificateRow>,
    pub reference_mode: Provenance,
}

/// Checks E(tau) <= (E(0) + int_0^tau r) exp(int_0^tau chi) at every sample
/// time, with left-endpoint sums matching the trace builder.
pub fn gronwall_monitor(trace: &RelativeEnergyTrace) -> GronwallCertificate {
    let mut rows = Vec::with_capacity(trace.times.len());
    let mut acc_r = 0.0;
    let mut acc_chi = 0.0;
    let mut pass = true;
    let mut margin = f64::INFINITY;
    let mut first_violation = None;
    for k in 0..trace.times.len() {
        if k > 0 {
            let dt = trace.times[k] - trace.times[k - 1];
            acc_r += trace.residual[k - 1] * dt;
            acc_chi += trace.chi[k - 1] * dt;
        }
        let bound = (trace.energy[0] + acc_r) * acc_chi.exp();
        let lhs = trace.energy[k];
        let m = bound - lhs;
        if m < margin {
            margin = m;
        }
        let tol = 1e-9 * bound.abs().max(1.0) + 1e-12;
        if lhs > bound + tol {
            pass = false;
            if first_violation.is_none() {
                first_violation = Some(trace.times[k]);
            }
        }
        rows.push(CertificateRow {
            tau: trace.times[k],
            energy: lhs,
            lhs,
            rhs: bound,
            margin: m,
            chi: trace.chi[k],
        });
    }
    GronwallCertificate {
        pass,
        margin,
        first_violation,
        rows,
        reference_mode: trace.reference_mode,
    }
}

/// One-dimensional Korn step: the symmetric Fenchel-Young regrouping of the
/// dissipation already controls the full gradient gap, with constant nu.
/// Returns (coercivity sum, gradient-gap norm); their ratio is exactly nu.
pub fn korn_identity_1d(u: &[f64], u_tilde: &[f64], grid: &Grid1D, nu: f64) -> (f64, f64) {
    assert_eq!(u.len(), u_tilde.len());
    let dx = grid.dx();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..u.len().saturating_sub(1) {
        let du = (u[i + 1] - u[i]) / dx;
        let dut = (u_tilde[i + 1] - u_tilde[i]) / dx;
        // F(D) = nu/2 D^2, S = nu D, F*(S) = S^2/(2 nu); both Fenchel-Young
        // gaps F(du) + F*(S_tilde) - S_tilde du and its mirror sum to
        // nu (du - dut)^2.
        let s = nu * du;
        let st = nu * dut;
        let gap = (0.5 * nu * du * du + st * st / (2.0 * nu) - st * du)
            + (0.5 * nu * dut * dut + s * s / (2.0 * nu) - s * dut);
        lhs += gap * dx;
        rhs += (du - dut).powi(2) * dx;
    }
    (lhs, rhs)
}
