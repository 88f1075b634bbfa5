//! Pressure law, pressure potential, Bregman distance, and convex dissipation
//! potentials with conjugates, subgradients, and coercivity checks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstitutiveError {
    #[error("density must be nonnegative, got {0}")]
    NegativeDensity(f64),
    #[error("pressure coefficient a must be positive, got {0}")]
    NonPositiveCoefficient(f64),
    #[error("adiabatic exponent gamma must lie in (1, 2], got {0}")]
    GammaOutOfRange(f64),
    #[error("Bregman reference density must be positive for gamma < 2")]
    VacuumReference,
    #[error("matrix dimension {got} does not match potential dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("viscosity {name} = {value} out of range")]
    BadViscosity { name: &'static str, value: f64 },
}

/// Isentropic pressure p(rho) = a rho^gamma with 1 < gamma <= 2.
///
/// The upper bound gamma <= 2 keeps the pressure potential strictly convex on
/// every bounded density interval, which is what the density-gap estimates rely
/// on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureLaw {
    a: f64,
    gamma: f64,
}

impl PressureLaw {
    pub fn new(a: f64, gamma: f64) -> Result<Self, ConstitutiveError> {
        if !(a > 0.0) {
            return Err(ConstitutiveError::NonPositiveCoefficient(a));
        }
        if !(gamma > 1.0 && gamma <= 2.0) {
            return Err(ConstitutiveError::GammaOutOfRange(gamma));
        }
        Ok(Self { a, gamma })
    }

    pub fn coefficient(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// p(rho) = a rho^gamma.
    pub fn pressure(&self, rho: f64) -> Result<f64, ConstitutiveError> {
        if rho < 0.0 {
            return Err(ConstitutiveError::NegativeDensity(rho));
        }
        Ok(self.a * rho.powf(self.gamma))
    }

    /// p'(rho) = a gamma rho^(gamma-1).
    pub fn pressure_derivative(&self, rho: f64) -> Result<f64, ConstitutiveError> {
        if rho < 0.0 {
            return Err(ConstitutiveError::NegativeDensity(rho));
        }
        Ok(self.a * self.gamma * rho.powf(self.gamma - 1.0))
    }

    /// Sound speed c(rho) = sqrt(p'(rho)).
    pub fn sound_speed(&self, rho: f64) -> Result<f64, ConstitutiveError> {
        Ok(self.pressure_derivative(rho)?.sqrt())
    }

    /// Pressure potential P(rho) = a/(gamma-1) rho^gamma, the convex primitive
    /// with P'(rho) rho - P(rho) = p(rho).
    pub fn pressure_potential(&self, rho: f64) -> Result<f64, ConstitutiveError> {
        if rho < 0.0 {
            return Err(ConstitutiveError::NegativeDensity(rho));
        }
        Ok(self.a / (self.gamma - 1.0) * rho.powf(self.gamma))
    }

    /// P'(rho) = a gamma/(gamma-1) rho^(gamma-1).
    pub fn potential_derivative(&self, rho: f64) -> Result<f64, ConstitutiveError> {
        if rho < 0.0 {
            return Err(ConstitutiveError::NegativeDensity(rho));
        }
        Ok(self.a * self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0))
    }

    /// Inverse of P' on [0, inf): rho = ((gamma-1) s / (a gamma))^(1/(gamma-1)).
    pub fn potential_derivative_inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        ((self.gamma - 1.0) * s / (self.a * self.gamma)).powf(1.0 / (self.gamma - 1.0))
    }

    /// Bregman distance of the pressure potential,
    /// P(rho) - P'(r)(rho - r) - P(r).
    ///
    /// The reference r must be positive when gamma < 2; the epsilon-shift in
    /// the relative-energy module is the sanctioned workaround for references
    /// touching vacuum.
    pub fn bregman_pressure(&self, rho: f64, r: f64) -> Result<f64, ConstitutiveError> {
        if rho < 0.0 {
            return Err(ConstitutiveError::NegativeDensity(rho));
        }
        if r < 0.0 {
            return Err(ConstitutiveError::NegativeDensity(r));
        }
        if r == 0.0 && self.gamma < 2.0 {
            return Err(ConstitutiveError::VacuumReference);
        }
        let val = self.pressure_potential(rho)?
            - self.potential_derivative(r)? * (rho - r)
            - self.pressure_potential(r)?;
        // Exact-zero guard: roundoff may produce tiny negatives at rho ~ r.
        Ok(val.max(0.0))
    }

    /// Lower convexity constant of the Bregman distance on [0, rho_bar]:
    /// largest c with bregman(rho, r) >= c (rho - r)^2 on the square,
    /// estimated by ratio minimization over a fine grid.
    pub fn bregman_convexity_constant(&self, rho_bar: f64, n_grid: usize) -> f64 {
        assert!(rho_bar > 0.0 && n_grid >= 8);
        // For P = k rho^gamma with gamma <= 2 the ratio decreases in both
        // arguments, so the diagonal limit at rho_bar, P''(rho_bar)/2, is the
        // analytic candidate; the scan guards against it.
        let mut c = self.a * self.gamma / 2.0 * rho_bar.powf(self.gamma - 2.0);
        let r_floor = rho_bar * 1e-6;
        for i in 0..=n_grid {
            let rho = rho_bar * i as f64 / n_grid as f64;
            for j in 0..=n_grid {
                let r = (rho_bar * j as f64 / n_grid as f64).max(r_floor);
                if (rho - r).abs() < rho_bar * 1e-9 {
                    continue;
                }
                let ratio = self.bregman_pressure(rho, r).unwrap() / (rho - r).powi(2);
                if ratio < c {
                    c = ratio;
                }
            }
        }
        c
    }
}

/// Symmetric dim x dim matrix, dim in {1, 2, 3}.
///
/// Houses strain rates, viscous stresses, and defect tensors. Entries outside
/// the active dim x dim block are kept at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    m: [[f64; 3]; 3],
}

impl SymMatrix {
    pub fn zero(dim: usize) -> Self {
        assert!((1..=3).contains(&dim));
        Self { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zero(dim);
        for i in 0..dim {
            s.m[i][i] = 1.0;
        }
        s
    }

    pub fn diag(dim: usize, d: &[f64]) -> Self {
        assert_eq!(d.len(), dim);
        let mut s = Self::zero(dim);
        for i in 0..dim {
            s.m[i][i] = d[i];
        }
        s
    }

    /// Builds from the upper triangle (row-major): symmetry is enforced by
    /// construction.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Self {
        assert_eq!(upper.len(), dim * (dim + 1) / 2);
        let mut s = Self::zero(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                s.m[i][j] = upper[k];
                s.m[j][i] = upper[k];
                k += 1;
            }
        }
        s
    }

    pub fn scalar(value: f64) -> Self {
        Self::diag(1, &[value])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim);
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.dim && j < self.dim);
        self.m[i][j] = v;
        self.m[j][i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// Frobenius double contraction A : B.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] *= s;
            }
        }
        out
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        self.add(&other.scale(-1.0))
    }

    /// A - beta tr(A) I for the given trace coefficient.
    pub fn trace_corrected(&self, beta: f64) -> SymMatrix {
        let t = self.trace();
        let mut out = *self;
        for i in 0..self.dim {
            out.m[i][i] -= beta * t;
        }
        out
    }

    /// Traceless (deviatoric) part A - tr(A)/dim I.
    pub fn deviator(&self) -> SymMatrix {
        self.trace_corrected(1.0 / self.dim as f64)
    }
}

/// Trace coefficient of the coercivity bound: beta = 1/dim for dim in {2, 3},
/// beta = 0 for dim = 1.
pub fn trace_beta(dim: usize) -> f64 {
    if dim == 1 {
        0.0
    } else {
        1.0 / dim as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    /// Newtonian: F(D) = 2 mu |D0|^2 + lambda/2 (tr D)^2 for dim >= 2.
    /// In dim = 1 the deviator degenerates and the shear term acts on the full
    /// entry: F(D) = 2 mu D^2 + lambda/2 D^2.
    Newtonian,
    /// Quadratic power-law variant: F(D) = mu/2 |D|^2 + lambda/2 (tr D)^2.
    QuadraticPowerLaw,
}

/// Convex dissipation potential with quadratic growth.
///
/// Only smooth quadratic potentials are shipped, so the subgradient is the
/// unique gradient and the conjugate has a closed form (extended-real valued
/// when lambda = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationPotential {
    kind: PotentialKind,
    mu: f64,
    lambda: f64,
    dim: usize,
}

impl DissipationPotential {
    pub fn newtonian(dim: usize, mu: f64, lambda: f64) -> Result<Self, ConstitutiveError> {
        assert!((1..=3).contains(&dim));
        if !(mu > 0.0) {
            return Err(ConstitutiveError::BadViscosity { name: "mu", value: mu });
        }
        if lambda < 0.0 {
            return Err(ConstitutiveError::BadViscosity { name: "lambda", value: lambda });
        }
        Ok(Self { kind: PotentialKind::Newtonian, mu, lambda, dim })
    }

    /// 1-D Newtonian potential with effective viscosity nu: the gradient is
    /// S = nu D, matching the solver stress nu du/dx.
    pub fn newtonian_1d(nu: f64) -> Result<Self, ConstitutiveError> {
        if !(nu > 0.0) {
            return Err(ConstitutiveError::BadViscosity { name: "nu", value: nu });
        }
        Self::newtonian(1, nu / 4.0, 0.0)
    }

    pub fn quadratic_power_law(
        dim: usize,
        mu: f64,
        lambda: f64,
    ) -> Result<Self, ConstitutiveError> {
        assert!((1..=3).contains(&dim));
        if !(mu > 0.0) {
            return Err(ConstitutiveError::BadViscosity { name: "mu", value: mu });
        }
        if lambda < 0.0 {
            return Err(ConstitutiveError::BadViscosity { name: "lambda", value: lambda });
        }
        Ok(Self { kind: PotentialKind::QuadraticPowerLaw, mu, lambda, dim })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta_trace(&self) -> f64 {
        trace_beta(self.dim)
    }

    fn check_dim(&self, m: &SymMatrix) -> Result<(), ConstitutiveError> {
        if m.dim() != self.dim {
            return Err(ConstitutiveError::DimensionMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        Ok(())
    }

    /// F(D) >= 0, quadratic in D.
    pub fn dissipation_value(&self, d: &SymMatrix) -> Result<f64, ConstitutiveError> {
        self.check_dim(d)?;
        let t = d.trace();
        Ok(match self.kind {
            PotentialKind::Newtonian => {
                let shear = if self.dim == 1 {
                    d.norm_sq()
                } else {
                    d.deviator().norm_sq()
                };
                2.0 * self.mu * shear + 0.5 * self.lambda * t * t
            }
            PotentialKind::QuadraticPowerLaw => {
                0.5 * self.mu * d.norm_sq() + 0.5 * self.lambda * t * t
            }
        })
    }

    /// The unique gradient of F at D (the subgradient of the smooth quadratic
    /// potentials shipped here).
    pub fn subgradient(&self, d: &SymMatrix) -> Result<SymMatrix, ConstitutiveError> {
        self.check_dim(d)?;
        let t = d.trace();
        Ok(match self.kind {
            PotentialKind::Newtonian => {
                let shear = if self.dim == 1 { *d } else { d.deviator() };
                let mut s = shear.scale(4.0 * self.mu);
                for i in 0..self.dim {
                    let v = s.get(i, i) + self.lambda * t;
                    s.set(i, i, v);
                }
                s
            }
            PotentialKind::QuadraticPowerLaw => {
                let mut s = d.scale(self.mu);
                for i in 0..self.dim {
                    let v = s.get(i, i) + self.lambda * t;
                    s.set(i, i, v);
                }
                s
            }
        })
    }

    /// Legendre-Fenchel conjugate F*(S) = sup_D { S:D - F(D) }.
    ///
    /// Returns +infinity when lambda = 0 (Newtonian, dim >= 2) and tr S != 0:
    /// the supremum blows up along D = t I.
    pub fn conjugate(&self, s: &SymMatrix) -> Result<f64, ConstitutiveError> {
        self.check_dim(s)?;
        let t = s.trace();
        let d = self.dim as f64;
        Ok(match self.kind {
            PotentialKind::Newtonian => {
                if self.dim == 1 {
                    // F(D) = (2 mu + lambda/2) D^2 in one dimension.
                    let k = 4.0 * self.mu + self.lambda;
                    t * t / (2.0 * k)
                } else {
                    let dev = s.deviator().norm_sq() / (8.0 * self.mu);
                    if self.lambda == 0.0 {
                        if t.abs() > 1e-12 {
                            f64::INFINITY
                        } else {
                            dev
                        }
                    } else {
                        dev + t * t / (2.0 * self.lambda * d * d)
                    }
                }
            }
            PotentialKind::QuadraticPowerLaw => {
                let dev = s.deviator().norm_sq() / (2.0 * self.mu);
                dev + t * t / (2.0 * d * (self.mu + self.lambda * d))
            }
        })
    }

    /// F(D) + F*(S) - S:D. Nonnegative by Fenchel-Young, zero exactly when
    /// S is the (sub)gradient at D.
    pub fn fenchel_young_residual(
        &self,
        d: &SymMatrix,
        s: &SymMatrix,
    ) -> Result<f64, ConstitutiveError> {
        self.check_dim(d)?;
        self.check_dim(s)?;
        let fs = self.conjugate(s)?;
        if fs.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(self.dissipation_value(d)? + fs - s.inner(d))
    }

    /// Coercivity gap of the convexity inequality at (D, Q) with
    /// S = subgradient(D): gap = F(D+Q) - F(D) - S:Q, together with the lower
    /// bound c |Q - beta tr(Q) I|^2 guaranteed by the potential.
    pub fn coercivity_gap(
        &self,
        d: &SymMatrix,
        q: &SymMatrix,
    ) -> Result<(f64, f64), ConstitutiveError> {
        self.check_dim(d)?;
        self.check_dim(q)?;
        let s = self.subgradient(d)?;
        let gap = self.dissipation_value(&d.add(q))? - self.dissipation_value(d)? - s.inner(q);
        let corrected = q.trace_corrected(self.beta_trace());
        let c = self.coercivity_constant();
        Ok((gap, c * corrected.norm_sq()))
    }

    /// Coercivity constant in front of |Q - beta tr(Q) I|^2.
    ///
    /// Analytic (2 mu) for Newtonian; for the power-law variant it is
    /// estimated by ratio minimization over a deterministic sample of (D, Q).
    pub fn coercivity_constant(&self) -> f64 {
        match self.kind {
            PotentialKind::Newtonian => 2.0 * self.mu,
            PotentialKind::QuadraticPowerLaw => self.estimate_coercivity_by_sampling(200),
        }
    }

    fn estimate_coercivity_by_sampling(&self, samples: usize) -> f64 {
        // Quadratic potential: the gap is D-independent, scan Q directions
        // with a low-discrepancy sweep.
        let n_upper = self.dim * (self.dim + 1) / 2;
        let mut best = f64::INFINITY;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let d0 = SymMatrix::zero(self.dim);
        for _ in 0..samples {
            let upper: Vec<f64> = (0..n_upper).map(|_| next()).collect();
            let q = SymMatrix::from_upper(self.dim, &upper);
            let corrected = q.trace_corrected(self.beta_trace());
            let denom = corrected.norm_sq();
            if denom < 1e-12 {
                continue;
            }
            let s = self.subgradient(&d0).unwrap();
            let gap = self.dissipation_value(&q).unwrap() - s.inner(&q);
            let ratio = gap / denom;
            if ratio < best {
                best = ratio;
            }
        }
        // The sampled minimum sits above the true infimum; keep a margin.
        0.95 * best
    }
}
