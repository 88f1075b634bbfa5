//! Density transport along characteristics of a prescribed velocity field:
//! flow maps with inflow boundaries, regularity and decay propagation checks,
//! and vacuum-touching equilibrium profiles.

use crate::constitutive::PressureLaw;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("characteristic left the domain at t = {t_exit}, x = {x}, and no inflow rule was supplied")]
    DomainExit { t_exit: f64, x: f64 },
    #[error("characteristic grazes the boundary tangentially at t = {t}, x = {x} (|u| = {speed})")]
    TangentCharacteristic { t: f64, x: f64, speed: f64 },
    #[error("boundary hit at t = {t} but no boundary density was supplied")]
    MissingBoundaryDensity { t: f64 },
    #[error("inflow boundaries are not supported by this check")]
    InflowUnsupported,
    #[error("grid too short: need at least {need} points, got {got}")]
    GridTooShort { need: usize, got: usize },
    #[error("fewer than {need} sample points for the tail fit, got {got}")]
    TailTooShort { need: usize, got: usize },
}

/// Analytic 1-D velocity field: value and spatial gradient as closures.
/// In one dimension the divergence coincides with the gradient.
#[derive(Clone)]
pub struct VelocityFieldSpec {
    value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    gradient: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    horizon: f64,
    /// Radius outside which the field vanishes, when known.
    support_radius: Option<f64>,
}

impl VelocityFieldSpec {
    pub fn new(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        horizon: f64,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            horizon,
            support_radius: None,
        }
    }

    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }

    pub fn zero(horizon: f64) -> Self {
        Self::new(|_, _| 0.0, |_, _| 0.0, horizon).with_support_radius(0.0)
    }

    pub fn constant(c: f64, horizon: f64) -> Self {
        Self::new(move |_, _| c, |_, _| 0.0, horizon)
    }

    /// u(x) = k x.
    pub fn linear(k: f64, horizon: f64) -> Self {
        Self::new(move |_, x| k * x, move |_, _| k, horizon)
    }

    /// Smooth compactly supported bump u(x) = amp (1 - (x/r)^2)^3 on |x| < r.
    pub fn compact_bump(amp: f64, r: f64, horizon: f64) -> Self {
        let value = move |_: f64, x: f64| {
            let s = x / r;
            if s.abs() >= 1.0 {
                0.0
            } else {
                amp * (1.0 - s * s).powi(3)
            }
        };
        let gradient = move |_: f64, x: f64| {
            let s = x / r;
            if s.abs() >= 1.0 {
                0.0
            } else {
                amp * 3.0 * (1.0 - s * s).powi(2) * (-2.0 * s) / r
            }
        };
        Self::new(value, gradient, horizon).with_support_radius(r)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.value)(t, x)
    }

    pub fn gradient(&self, t: f64, x: f64) -> f64 {
        (self.gradient)(t, x)
    }

    pub fn divergence(&self, t: f64, x: f64) -> f64 {
        self.gradient(t, x)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }
}

/// Spatial domain of the transport problem; `None` bounds mean unbounded.
#[derive(Debug, Clone, Copy, Default)]
pub struct Domain1D {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
}

impl Domain1D {
    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn half_line(x_min: f64) -> Self {
        Self { x_min: Some(x_min), x_max: None }
    }

    pub fn interval(x_min: f64, x_max: f64) -> Self {
        Self { x_min: Some(x_min), x_max: Some(x_max) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.x_min.map_or(true, |a| x >= a) && self.x_max.map_or(true, |b| x <= b)
    }

    fn strictly_inside(&self, x: f64) -> bool {
        self.x_min.map_or(true, |a| x > a) && self.x_max.map_or(true, |b| x < b)
    }
}

/// Initial density profile with optional declared tail exponent and support.
#[derive(Clone)]
pub struct DensityProfile {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub decay_alpha: Option<f64>,
    pub support_radius: Option<f64>,
}

impl DensityProfile {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), decay_alpha: None, support_radius: None }
    }

    pub fn with_decay(mut self, alpha: f64) -> Self {
        self.decay_alpha = Some(alpha);
        self
    }

    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }

    pub fn gaussian() -> Self {
        Self::new(|x| (-x * x).exp())
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    /// Polynomial-tail profile rho0(x) = (1 + |x|^(alpha-1))^(-1/(gamma-1)),
    /// so that |d/dx rho0^(gamma-1)| decays like |x|^(-alpha).
    pub fn power_tail(alpha: f64, gamma: f64) -> Self {
        Self::new(move |x: f64| {
            (1.0 + x.abs().powf(alpha - 1.0)).powf(-1.0 / (gamma - 1.0))
        })
        .with_decay(alpha)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }
}

/// Classical fourth-order one-step integrator for the characteristic system,
/// fixed step dt for both trajectories and the divergence line integral.
#[derive(Debug, Clone, Copy)]
pub struct CharacteristicFlow {
    pub dt: f64,
}

/// Result of tracing a characteristic backward from (t, x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardFoot {
    /// Foot point: initial position at time `entry_time`.
    pub x0: f64,
    /// 0 if time zero is reached inside the domain, otherwise the boundary
    /// entry time tau > 0.
    pub entry_time: f64,
    pub hit_boundary: bool,
}

impl Default for CharacteristicFlow {
    fn default() -> Self {
        Self { dt: 1e-3 }
    }
}

impl CharacteristicFlow {
    pub fn new(dt: f64) -> Self {
        assert!(dt > 0.0);
        Self { dt }
    }

    /// One RK4 step of dx/dt = u(t, x) over [t, t + h] (h may be negative).
    fn rk4_step(spec: &VelocityFieldSpec, t: f64, x: f64, h: f64) -> f64 {
        let k1 = spec.value(t, x);
        let k2 = spec.value(t + 0.5 * h, x + 0.5 * h * k1);
        let k3 = spec.value(t + 0.5 * h, x + 0.5 * h * k2);
        let k4 = spec.value(t + h, x + h * k3);
        x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// RK4 step of the augmented system (x, I)' = (u, div u) along the flow.
    fn rk4_step_aug(spec: &VelocityFieldSpec, t: f64, x: f64, i: f64, h: f64) -> (f64, f64) {
        let k1x = spec.value(t, x);
        let k1i = spec.divergence(t, x);
        let x2 = x + 0.5 * h * k1x;
        let k2x = spec.value(t + 0.5 * h, x2);
        let k2i = spec.divergence(t + 0.5 * h, x2);
        let x3 = x + 0.5 * h * k2x;
        let k3x = spec.value(t + 0.5 * h, x3);
        let k3i = spec.divergence(t + 0.5 * h, x3);
        let x4 = x + h * k3x;
        let k4x = spec.value(t + h, x4);
        let k4i = spec.divergence(t + h, x4);
        (
            x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            i + h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i),
        )
    }

    /// Forward flow X(t, x0) in an unbounded domain.
    pub fn flow_forward(&self, spec: &VelocityFieldSpec, x0: f64, t: f64) -> f64 {
        self.flow_forward_in(spec, &Domain1D::unbounded(), x0, t)
            .expect("unbounded domain cannot be exited")
    }

    /// Forward flow inside `domain`; leaving it is a flagged exit event.
    pub fn flow_forward_in(
        &self,
        spec: &VelocityFieldSpec,
        domain: &Domain1D,
        x0: f64,
        t: f64,
    ) -> Result<f64, TransportError> {
        let mut x = x0;
        let mut s = 0.0;
        while s < t - 1e-15 {
            let h = self.dt.min(t - s);
            let x_next = Self::rk4_step(spec, s, x, h);
            if !domain.contains(x_next) {
                return Err(TransportError::DomainExit { t_exit: s + h, x: x_next });
            }
            x = x_next;
            s += h;
        }
        Ok(x)
    }

    /// Backward characteristic from (t, x): integrates dz/ds = u(s, z) from
    /// s = t down to s = 0, locating the boundary entry time tau by bisection
    /// when the trajectory exits the domain.
    pub fn flow_backward(
        &self,
        spec: &VelocityFieldSpec,
        domain: &Domain1D,
        x: f64,
        t: f64,
    ) -> Result<BackwardFoot, TransportError> {
        let mut z = x;
        let mut s = t;
        while s > 1e-15 {
            let h = -(self.dt.min(s));
            let z_next = Self::rk4_step(spec, s, z, h);
            if !domain.strictly_inside(z_next) {
                // Bracket [s + h, s]: inside at s, outside (or on boundary)
                // at s + h. Bisect on the step fraction.
                let (tau, z_b) = self.bisect_entry(spec, domain, s, z, h);
                let speed = spec.value(tau, z_b).abs();
                if speed < self.dt * 1e-3 {
                    return Err(TransportError::TangentCharacteristic { t: tau, x: z_b, speed });
                }
                return Ok(BackwardFoot { x0: z_b, entry_time: tau, hit_boundary: true });
            }
            z = z_next;
            s += h;
        }
        Ok(BackwardFoot { x0: z, entry_time: 0.0, hit_boundary: false })
    }

    fn bisect_entry(
        &self,
        spec: &VelocityFieldSpec,
        domain: &Domain1D,
        s: f64,
        z: f64,
        h: f64,
    ) -> (f64, f64) {
        let mut lo = 0.0f64; // fraction of the step where we are inside
        let mut hi = 1.0f64; // fraction where we are outside
        let tol = 1e-3; // fraction tolerance => time tolerance dt * 1e-3
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let z_mid = Self::rk4_step(spec, s, z, h * mid);
            if domain.strictly_inside(z_mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let frac = 0.5 * (lo + hi);
        let tau = s + h * frac;
        let z_b = Self::rk4_step(spec, s, z, h * frac);
        // Snap to the nearest boundary.
        let z_snapped = match (domain.x_min, domain.x_max) {
            (Some(a), Some(b)) => {
                if (z_b - a).abs() < (z_b - b).abs() {
                    a
                } else {
                    b
                }
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => z_b,
        };
        (tau, z_snapped)
    }

    /// Density at (t, x) by the method of characteristics:
    /// rho0(x0) exp(-int_0^t div u) along the trajectory, or the boundary
    /// branch rho_B(x_tau) exp(-int_tau^t div u) when the backward
    /// characteristic enters through the boundary at tau > 0.
    pub fn density_from_characteristics(
        &self,
        rho0: &DensityProfile,
        rho_b: Option<&dyn Fn(f64) -> f64>,
        spec: &VelocityFieldSpec,
        domain: &Domain1D,
        t: f64,
        x: f64,
    ) -> Result<f64, TransportError> {
        let foot = self.flow_backward(spec, domain, x, t)?;
        let base = if foot.hit_boundary {
            match rho_b {
                Some(f) => f(foot.x0),
                None => return Err(TransportError::MissingBoundaryDensity { t: foot.entry_time }),
            }
        } else {
            rho0.eval(foot.x0)
        };
        // Forward integration of the divergence along the same trajectory.
        let mut z = foot.x0;
        let mut integral = 0.0;
        let mut s = foot.entry_time;
        while s < t - 1e-15 {
            let h = self.dt.min(t - s);
            let (zn, int_n) = Self::rk4_step_aug(spec, s, z, integral, h);
            z = zn;
            integral = int_n;
            s += h;
        }
        Ok((base * (-integral).exp()).max(0.0))
    }
}

/// Max over interior space-time nodes of |d_t rho + d_x (rho u)| by centered
/// differences; second-order for densities built along characteristics.
pub fn continuity_residual(
    rho: &dyn Fn(f64, f64) -> f64,
    spec: &VelocityFieldSpec,
    xs: &[f64],
    ts: &[f64],
) -> Result<f64, TransportError> {
    if xs.len() < 3 || ts.len() < 3 {
        return Err(TransportError::GridTooShort {
            need: 3,
            got: xs.len().min(ts.len()),
        });
    }
    let mut worst = 0.0f64;
    for k in 1..ts.len() - 1 {
        let t = ts[k];
        let dt = 0.5 * (ts[k + 1] - ts[k - 1]);
        for i in 1..xs.len() - 1 {
            let x = xs[i];
            let dx = 0.5 * (xs[i + 1] - xs[i - 1]);
            let d_t = (rho(ts[k + 1], x) - rho(ts[k - 1], x)) / (2.0 * dt);
            let flux = |xx: f64| rho(t, xx) * spec.value(t, xx);
            let d_x = (flux(xs[i + 1]) - flux(xs[i - 1])) / (2.0 * dx);
            worst = worst.max((d_t + d_x).abs());
        }
    }
    Ok(worst)
}

/// Report of the Sobolev-regularity propagation check: discrete L^q norm of
/// grad(rho^(gamma-1)) over time, with the measured bound constant.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub initial_norm: f64,
    pub sup_norm: f64,
    /// Measured constant: sup_norm / (1 + initial_norm).
    pub measured_constant: f64,
}

/// Tracks the discrete L^q norm of grad(rho^(gamma-1)) for the density built
/// along characteristics; requires an inflow-free domain.
#[allow(clippy::too_many_arguments)]
pub fn regularity_propagation_check(
    rho0: &DensityProfile,
    spec: &VelocityFieldSpec,
    law: &PressureLaw,
    q: f64,
    times: &[f64],
    xs: &[f64],
    flow: &CharacteristicFlow,
    domain: &Domain1D,
) -> Result<RegularityReport, TransportError> {
    // Inflow would require boundary data; the check covers Gamma_in = empty.
    if domain.x_min.is_some() || domain.x_max.is_some() {
        return Err(TransportError::InflowUnsupported);
    }
    if xs.len() < 3 {
        return Err(TransportError::GridTooShort { need: 3, got: xs.len() });
    }
    let gamma = law.gamma();
    let unbounded = Domain1D::unbounded();
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let field: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let r = flow
                    .density_from_characteristics(rho0, None, spec, &unbounded, t, x)
                    .expect("unbounded transport cannot fail");
                r.powf(gamma - 1.0)
            })
            .collect();
        let mut acc = 0.0;
        for i in 1..xs.len() - 1 {
            let dx = 0.5 * (xs[i + 1] - xs[i - 1]);
            let g = (field[i + 1] - field[i - 1]) / (xs[i + 1] - xs[i - 1]);
            acc += g.abs().powf(q) * dx;
        }
        norms.push(acc.powf(1.0 / q));
    }
    let initial_norm = norms.first().copied().unwrap_or(0.0);
    let sup_norm = norms.iter().cloned().fold(0.0f64, f64::max);
    Ok(RegularityReport {
        times: times.to_vec(),
        norms,
        initial_norm,
        sup_norm,
        measured_constant: sup_norm / (1.0 + initial_norm),
    })
}

/// Result of the tail-exponent fit of the transported density.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub fitted_beta: f64,
    pub expected_beta: f64,
    pub fit_window: (f64, f64),
}

/// Fits the polynomial tail exponent beta of the transported density on a
/// log-log grid over |x| in [r_fit, 2 r_fit] and compares it with the
/// propagation relation beta = (alpha - 1)/(gamma - 1).
pub fn decay_propagation_check(
    rho0: &DensityProfile,
    spec: &VelocityFieldSpec,
    law: &PressureLaw,
    t: f64,
    flow: &CharacteristicFlow,
    n_fit: usize,
) -> Result<DecayFit, TransportError> {
    let alpha = rho0
        .decay_alpha
        .expect("profile must declare its decay exponent");
    let support = spec.support_radius().unwrap_or(0.0);
    let r_fit = (2.0 * support).max(10.0);
    if n_fit < 4 {
        return Err(TransportError::TailTooShort { need: 4, got: n_fit });
    }
    let domain = Domain1D::unbounded();
    let mut logs: Vec<(f64, f64)> = Vec::with_capacity(n_fit);
    for k in 0..n_fit {
        let x = r_fit * (1.0 + k as f64 / (n_fit - 1) as f64);
        let r = flow
            .density_from_characteristics(rho0, None, spec, &domain, t, x)
            .expect("unbounded transport cannot fail");
        if r <= 0.0 {
            return Err(TransportError::TailTooShort { need: n_fit, got: k });
        }
        logs.push((x.ln(), r.ln()));
    }
    // Least-squares slope of ln rho vs ln x; the tail decays like x^{-beta}.
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(DecayFit {
        fitted_beta: -slope,
        expected_beta: (alpha - 1.0) / (law.gamma() - 1.0),
        fit_window: (r_fit, 2.0 * r_fit),
    })
}

/// Vacuum-capable equilibrium profile solving grad P'(rho) = grad G where
/// positive: rho = (P')^{-1}([G + c]^+). The profile may vanish on an open
/// set.
pub fn equilibrium_profile(
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    law: PressureLaw,
    mass_constant: f64,
) -> DensityProfile {
    DensityProfile::new(move |x| law.potential_derivative_inverse(g(x) + mass_constant))
}

/// Finite-mass exponent criterion: alpha > max{2, 3 gamma - 2} (strict).
pub fn mass_criterion(alpha: f64, gamma: f64) -> bool {
    alpha > 2.0f64.max(3.0 * gamma - 2.0)
}
