//! Scenario presets: the shipped experiment families, each assembling a
//! grid, boundary treatment, pressure law, and initial state from a
//! validated configuration.
//!
//! Each preset owns its canonical domain and boundary data; the
//! configuration contributes resolution, viscosity, final time, and (where
//! it does not clash with the preset) the pressure law.

use crate::config::ExperimentConfig;
use crate::constitutive::PressureLaw;
use crate::relenergy::ReferencePair;
use crate::solver1d::{Boundary, BoundaryData, FluidState1D, Grid1D, SolverError, StepControl};
use crate::transport::DensityProfile;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Constitutive(#[from] crate::constitutive::ConstitutiveError),
}

/// A fully assembled experiment.
pub struct Scenario {
    pub name: String,
    pub law: PressureLaw,
    pub nu: f64,
    pub grid: Grid1D,
    pub bc: Boundary,
    pub initial: FluidState1D,
    pub t_end: f64,
    pub control: StepControl,
}

impl Scenario {
    /// Analytic (or characteristics-style static) reference pair natural to
    /// the scenario, used when the reference mode is `characteristics`.
    pub fn static_reference(&self) -> ReferencePair {
        match self.name.as_str() {
            "inflow-channel" => {
                // Uniform stream matching the boundary data.
                ReferencePair::analytic(|_, _| 1.2, |_, _| 0.3, |_, _| 0.0, |_, _| 0.0)
            }
            "equilibrium-vacuum" => {
                let law = self.law.clone();
                ReferencePair::analytic(
                    move |_, x| law.potential_derivative_inverse(1.0 - x * x),
                    |_, _| 0.0,
                    |_, _| 0.0,
                    |_, _| 0.0,
                )
            }
            "compact-support" => ReferencePair::analytic(
                |_, x| f64::max(1.0 - x * x, 0.0).powi(2),
                |_, _| 0.0,
                |_, _| 0.0,
                |_, _| 0.0,
            ),
            "polynomial-decay" => {
                let profile = DensityProfile::power_tail(3.0, self.law.gamma());
                ReferencePair::analytic(move |_, x| profile.eval(x), |_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
            }
            // viscous-relaxation and anything else: the rest state.
            _ => ReferencePair::analytic(|_, _| 1.0, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0),
        }
    }
}

fn law_for(cfg: &ExperimentConfig, preset_a: f64, preset_gamma: f64) -> Result<PressureLaw, ScenarioError> {
    // The preset's canonical coefficients apply unless the user overrode the
    // global defaults.
    let a = if cfg.a == 1.0 { preset_a } else { cfg.a };
    let gamma = if cfg.gamma == 2.0 { preset_gamma } else { cfg.gamma };
    Ok(PressureLaw::new(a, gamma)?)
}

fn domain_for(cfg: &ExperimentConfig, preset_min: f64, preset_max: f64) -> (f64, f64) {
    // The preset's canonical domain applies unless the user moved the
    // global default interval.
    if cfg.x_min == 0.0 && cfg.x_max == 1.0 {
        (preset_min, preset_max)
    } else {
        (cfg.x_min, cfg.x_max)
    }
}

/// Builds the scenario named in the configuration.
pub fn build(cfg: &ExperimentConfig) -> Result<Scenario, ScenarioError> {
    let control = match cfg.dt {
        Some(dt) => StepControl::FixedDt(dt),
        None => StepControl::CflFraction(cfg.cfl),
    };
    let n = cfg.n_cells;
    match cfg.scenario.as_str() {
        "viscous-relaxation" => {
            let (lo, hi) = domain_for(cfg, 0.0, 1.0);
            let grid = Grid1D::new(lo, hi, n)?;
            let law = law_for(cfg, 1.0, 2.0)?;
            let mom: Vec<f64> = grid
                .centers()
                .iter()
                .map(|&x| 0.05 * (2.0 * std::f64::consts::PI * x).sin())
                .collect();
            Ok(Scenario {
                name: cfg.scenario.clone(),
                law,
                nu: cfg.nu,
                grid,
                bc: Boundary::Periodic,
                initial: FluidState1D::new(vec![1.0; n], mom, 0.0),
                t_end: cfg.t_end,
                control,
            })
        }
        "equilibrium-vacuum" => {
            // Vacuum-touching equilibrium profile of the potential
            // G = 1 - x^2 with the quadratic law a = 1/2.
            let (lo, hi) = domain_for(cfg, -1.5, 1.5);
            let grid = Grid1D::new(lo, hi, n)?;
            let law = law_for(cfg, 0.5, 2.0)?;
            let rho: Vec<f64> = grid
                .centers()
                .iter()
                .map(|&x| law.potential_derivative_inverse(1.0 - x * x))
                .collect();
            Ok(Scenario {
                name: cfg.scenario.clone(),
                law,
                nu: cfg.nu,
                grid,
                bc: Boundary::InOut(BoundaryData::walls()),
                initial: FluidState1D::new(rho, vec![0.0; n], 0.0),
                t_end: cfg.t_end,
                control,
            })
        }
        "compact-support" => {
            let (lo, hi) = domain_for(cfg, -4.0, 4.0);
            let grid = Grid1D::new(lo, hi, n)?;
            let law = law_for(cfg, 1.0, 2.0)?;
            let rho: Vec<f64> = grid
                .centers()
                .iter()
                .map(|&x| f64::max(1.0 - x * x, 0.0).powi(2))
                .collect();
            Ok(Scenario {
                name: cfg.scenario.clone(),
                law,
                nu: cfg.nu,
                grid,
                bc: Boundary::InOut(BoundaryData::walls()),
                initial: FluidState1D::new(rho, vec![0.0; n], 0.0),
                t_end: cfg.t_end,
                control,
            })
        }
        "polynomial-decay" => {
            let (lo, hi) = domain_for(cfg, -10.0, 10.0);
            let grid = Grid1D::new(lo, hi, n)?;
            let law = law_for(cfg, 1.0, 1.5)?;
            let profile = DensityProfile::power_tail(cfg.alpha, law.gamma());
            let rho: Vec<f64> = grid.centers().iter().map(|&x| profile.eval(x)).collect();
            Ok(Scenario {
                name: cfg.scenario.clone(),
                law,
                nu: cfg.nu,
                grid,
                bc: Boundary::InOut(BoundaryData::walls()),
                initial: FluidState1D::new(rho, vec![0.0; n], 0.0),
                t_end: cfg.t_end,
                control,
            })
        }
        "inflow-channel" => {
            let (lo, hi) = domain_for(cfg, 0.0, 1.0);
            let grid = Grid1D::new(lo, hi, n)?;
            let law = law_for(cfg, 1.0, 2.0)?;
            let bc = Boundary::InOut(BoundaryData {
                u_left: 0.3,
                u_right: 0.3,
                rho_left: Some(1.2),
                rho_right: None,
            });
            let mom = vec![0.3; n];
            Ok(Scenario {
                name: cfg.scenario.clone(),
                law,
                nu: cfg.nu,
                grid,
                bc,
                initial: FluidState1D::new(vec![1.0; n], mom, 0.0),
                t_end: cfg.t_end,
                control,
            })
        }
        other => Err(ScenarioError::Unknown(other.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn all_presets_build() {
        for name in [
            "viscous-relaxation",
            "equilibrium-vacuum",
            "compact-support",
            "polynomial-decay",
            "inflow-channel",
        ] {
            let cfg = parse_config(&format!("scenario = {name}\nn_cells = 32")).unwrap();
            let sc = build(&cfg).unwrap();
            assert_eq!(sc.name, name);
            assert_eq!(sc.initial.n_cells(), 32);
        }
    }

    #[test]
    fn equilibrium_profile_touches_vacuum() {
        let cfg = parse_config("scenario = equilibrium-vacuum\nn_cells = 64").unwrap();
        let sc = build(&cfg).unwrap();
        // With a = 1/2, gamma = 2: P' inverse of [1 - x^2]^+ is [1 - x^2]^+.
        let mid = sc.initial.rho[32];
        assert!(mid > 0.9);
        assert_eq!(sc.initial.rho[0], 0.0);
        assert_eq!(*sc.initial.rho.last().unwrap(), 0.0);
    }

    #[test]
    fn user_domain_overrides_preset() {
        let cfg = parse_config("scenario = compact-support\nx_min = -6\nx_max = 6").unwrap();
        let sc = build(&cfg).unwrap();
        assert_eq!(sc.grid.x_min, -6.0);
        assert_eq!(sc.grid.x_max, 6.0);
    }

    #[test]
    fn user_gamma_overrides_preset() {
        let cfg = parse_config("scenario = polynomial-decay\ngamma = 1.8").unwrap();
        let sc = build(&cfg).unwrap();
        assert_eq!(sc.law.gamma(), 1.8);
    }

    #[test]
    fn static_references_match_boundaries() {
        let cfg = parse_config("scenario = inflow-channel").unwrap();
        let sc = build(&cfg).unwrap();
        let r = sc.static_reference();
        assert_eq!(r.u_tilde(0.0, 0.0), 0.3);
        assert_eq!(r.rho_tilde(0.0, 0.5), 1.2);
    }
}
