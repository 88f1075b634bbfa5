//! Discrete defect measures of dissipative solutions: the nonnegative energy
//! defect and the positive-semidefinite Reynolds defect, as cellwise fields
//! (atoms at cell centers), with the trace-compatibility check linking them.

use crate::constitutive::SymMatrix;
use crate::solver1d::EnergyLedger;
use nalgebra::DMatrix;

/// Per-cell nonnegative energy-defect mass (energy units).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDefectField {
    pub values: Vec<f64>,
}

impl EnergyDefectField {
    /// Every cell must carry a nonnegative mass.
    pub fn new(values: Vec<f64>) -> Self {
        assert!(values.iter().all(|&v| v >= 0.0), "energy defect must be nonnegative");
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

/// Per-cell symmetric dim x dim Reynolds defect (energy-density units).
#[derive(Debug, Clone, PartialEq)]
pub struct ReynoldsDefectField {
    pub cells: Vec<SymMatrix>,
    pub dim: usize,
}

impl ReynoldsDefectField {
    pub fn new(cells: Vec<SymMatrix>, dim: usize) -> Self {
        assert!((1..=3).contains(&dim));
        assert!(cells.iter().all(|c| c.dim() == dim));
        Self { cells, dim }
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self::new(vec![SymMatrix::zero(dim); n], dim)
    }

    pub fn trace(&self, cell: usize) -> f64 {
        self.cells[cell].trace()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell");
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push_str(&format!(",m{}{}", i + 1, j + 1));
            }
        }
        out.push('\n');
        for (c, m) in self.cells.iter().enumerate() {
            out.push_str(&c.to_string());
            for i in 0..self.dim {
                for j in i..self.dim {
                    out.push_str(&format!(",{}", m.get(i, j)));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Outcome of the cellwise positive-semidefiniteness check.
#[derive(Debug, Clone)]
pub struct PsdReport {
    pub pass: bool,
    /// Cell with the smallest eigenvalue.
    pub worst_cell: Option<usize>,
    pub min_eigenvalue: f64,
    /// Direction xi achieving the smallest R : (xi (x) xi).
    pub direction: Vec<f64>,
}

/// Checks R : (xi (x) xi) >= 0 cellwise: the smallest eigenvalue of every
/// cell must be >= -1e-12. Reports the worst cell and its direction.
pub fn psd_check(field: &ReynoldsDefectField) -> PsdReport {
    let d = field.dim;
    let mut worst: Option<(usize, f64, Vec<f64>)> = None;
    for (c, m) in field.cells.iter().enumerate() {
        let mat = DMatrix::from_fn(d, d, |i, j| m.get(i, j));
        let eig = mat.symmetric_eigen();
        let (k, &lam) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        if worst.as_ref().map_or(true, |w| lam < w.1) {
            let dir: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
            worst = Some((c, lam, dir));
        }
    }
    match worst {
        Some((cell, lam, dir)) => PsdReport {
            pass: lam >= -1e-12,
            worst_cell: Some(cell),
            min_eigenvalue: lam,
            direction: dir,
        },
        None => PsdReport { pass: true, worst_cell: None, min_eigenvalue: 0.0, direction: vec![] },
    }
}

/// Outcome of the trace-compatibility check d_lo E <= tr R <= d_hi E.
#[derive(Debug, Clone, Copy)]
pub struct CompatibilityReport {
    pub pass: bool,
    /// Largest observed tr R / E over cells with E > 0 (worst offender on
    /// either side is reported through `worst_cell`).
    pub worst_ratio: f64,
    pub worst_cell: Option<usize>,
}

/// Cellwise check of d_lo E <= tr R <= d_hi E, with 1e-12 absolute slack.
pub fn compatibility_check(
    energy: &EnergyDefectField,
    reynolds: &ReynoldsDefectField,
    d_lo: f64,
    d_hi: f64,
) -> CompatibilityReport {
    assert!(0.0 < d_lo && d_lo <= d_hi);
    assert_eq!(energy.values.len(), reynolds.cells.len());
    let slack = 1e-12;
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_cell = None;
    let mut worst_excess = 0.0f64;
    for (c, (&e, m)) in energy.values.iter().zip(&reynolds.cells).enumerate() {
        let tr = m.trace();
        if e > 0.0 {
            let ratio = tr / e;
            if ratio > worst_ratio {
                worst_ratio = ratio;
            }
        }
        let excess = (d_lo * e - tr).max(tr - d_hi * e);
        if excess > slack {
            pass = false;
        }
        if excess > worst_excess {
            worst_excess = excess;
            worst_cell = Some(c);
        }
    }
    CompatibilityReport { pass, worst_ratio, worst_cell }
}

/// Extracts the discrete defect pair from a run's energy ledger: the energy
/// defect is the accumulated positive part of the per-cell energy-balance
/// residual, and the Reynolds defect is the isotropic field with matching
/// trace, so the compatibility check passes at (1, 1) by construction.
///
/// This is one admissible surrogate of the defect pair; the ledger cannot
/// observe anisotropy.
pub fn estimate_numerical_defect(
    ledger: &EnergyLedger,
    dim: usize,
) -> (EnergyDefectField, ReynoldsDefectField) {
    let energy = EnergyDefectField::new(ledger.cell_defect.clone());
    let cells: Vec<SymMatrix> = energy
        .values
        .iter()
        .map(|&e| SymMatrix::identity(dim).scale(e / dim as f64))
        .collect();
    (energy, ReynoldsDefectField::new(cells, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::PressureLaw;
    use crate::solver1d::{self, Boundary, FluidState1D, Grid1D, StepControl};

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn psd_truth_table() {
        // All-zero field passes.
        let zero = ReynoldsDefectField::zeros(5, 2);
        assert!(psd_check(&zero).pass);
        // diag(1, -1) fails with the witness pointing along the negative
        // eigendirection.
        let bad = ReynoldsDefectField::new(
            vec![SymMatrix::identity(2), SymMatrix::diag(2, &[1.0, -1.0])],
            2,
        );
        let report = psd_check(&bad);
        assert!(!report.pass);
        assert_eq!(report.worst_cell, Some(1));
        assert!((report.min_eigenvalue + 1.0).abs() < 1e-12);
        assert!(report.direction[0].abs() < 1e-12);
        assert!((report.direction[1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_random_gram_matrices() {
        let mut r = lcg(7);
        for dim in 1..=3usize {
            let mut cells = Vec::new();
            for _ in 0..30 {
                // Gram matrix A^T A is PSD by construction.
                let a: Vec<Vec<f64>> = (0..dim)
                    .map(|_| (0..dim).map(|_| r() - 0.5).collect())
                    .collect();
                let mut m = SymMatrix::zero(dim);
                for i in 0..dim {
                    for j in 0..dim {
                        let mut v = 0.0;
                        for k in 0..dim {
                            v += a[k][i] * a[k][j];
                        }
                        m.set(i, j, v);
                    }
                }
                cells.push(m);
            }
            assert!(psd_check(&ReynoldsDefectField::new(cells, dim)).pass);
        }
    }

    #[test]
    fn psd_invariant_under_rotation() {
        let mut r = lcg(11);
        // A fixed indefinite cell; its smallest eigenvalue must not move
        // under orthogonal conjugation.
        let base = SymMatrix::diag(2, &[2.0, -0.5]);
        for _ in 0..20 {
            let theta = r() * std::f64::consts::TAU;
            let (c, s) = (theta.cos(), theta.sin());
            // Q^T base Q with the rotation Q = [[c, -s], [s, c]].
            let q = [[c, -s], [s, c]];
            let mut m = SymMatrix::zero(2);
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = 0.0;
                    for k in 0..2 {
                        for l in 0..2 {
                            v += q[k][i] * base.get(k, l) * q[l][j];
                        }
                    }
                    m.set(i, j, v);
                }
            }
            let report = psd_check(&ReynoldsDefectField::new(vec![m], 2));
            assert!((report.min_eigenvalue + 0.5).abs() < 1e-10);
            assert!(!report.pass);
        }
    }

    #[test]
    fn compatibility_truth_table() {
        let n = 4;
        // E = 0, R = 0.
        let report = compatibility_check(
            &EnergyDefectField::zeros(n),
            &ReynoldsDefectField::zeros(n, 2),
            1.0,
            3.0,
        );
        assert!(report.pass);
        // E = 1, tr R = 2 within (1, 3).
        let e = EnergyDefectField::new(vec![1.0; n]);
        let r2 = ReynoldsDefectField::new(vec![SymMatrix::identity(2); n], 2);
        assert!(compatibility_check(&e, &r2, 1.0, 3.0).pass);
        // E = 1, tr R = 4 outside (1, 3): worst ratio 4.
        let r4 = ReynoldsDefectField::new(vec![SymMatrix::identity(2).scale(2.0); n], 2);
        let report = compatibility_check(&e, &r4, 1.0, 3.0);
        assert!(!report.pass);
        assert!((report.worst_ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn compatibility_monotone_in_bounds() {
        let e = EnergyDefectField::new(vec![1.0; 3]);
        let r = ReynoldsDefectField::new(vec![SymMatrix::identity(2).scale(2.0); 3], 2);
        // tr R = 4: fails at (1, 3), passes once d_hi grows.
        assert!(!compatibility_check(&e, &r, 1.0, 3.0).pass);
        assert!(compatibility_check(&e, &r, 1.0, 4.0).pass);
        assert!(compatibility_check(&e, &r, 0.5, 5.0).pass);
    }

    #[test]
    fn estimate_from_rest_run_is_zero() {
        let grid = Grid1D::new(0.0, 1.0, 16).unwrap();
        let law = PressureLaw::new(1.0, 2.0).unwrap();
        let state = FluidState1D::new(vec![1.0; 16], vec![0.0; 16], 0.0);
        let bc = Boundary::Periodic;
        let (_, ledger) =
            solver1d::run(&grid, state, &bc, &law, 0.01, 0.05, StepControl::CflFraction(0.9))
                .unwrap();
        let (e, r) = estimate_numerical_defect(&ledger, 1);
        assert!(e.total() < 1e-14);
        assert!(psd_check(&r).pass);
        assert!(compatibility_check(&e, &r, 1.0, 1.0).pass);
    }

    #[test]
    fn estimate_injected_residual() {
        let mut ledger = EnergyLedger {
            times: vec![0.0, 0.1],
            energy: vec![1.0, 1.0],
            boundary_energy_flux: vec![0.0],
            boundary_mass_flux: vec![0.0],
            dissipation: vec![0.0],
            step_residual: vec![0.25],
            cell_defect: vec![0.0; 8],
            dx: 0.125,
        };
        ledger.cell_defect[3] = 0.25;
        let (e, r) = estimate_numerical_defect(&ledger, 2);
        assert_eq!(e.values[3], 0.25);
        assert!(e.values.iter().enumerate().all(|(i, &v)| i == 3 || v == 0.0));
        // Trace matched: compatibility at (1, 1).
        assert!((r.trace(3) - 0.25).abs() < 1e-15);
        assert!(compatibility_check(&e, &r, 1.0, 1.0).pass);
    }

    #[test]
    fn viscous_relaxation_defect_nonnegative_and_shrinking() {
        let law = PressureLaw::new(1.0, 2.0).unwrap();
        let mut totals = Vec::new();
        for n in [50usize, 100] {
            let grid = Grid1D::new(0.0, 1.0, n).unwrap();
            let mom: Vec<f64> = grid
                .centers()
                .iter()
                .map(|&x| 0.05 * (2.0 * std::f64::consts::PI * x).sin())
                .collect();
            let state = FluidState1D::new(vec![1.0; n], mom, 0.0);
            let (_, ledger) = solver1d::run(
                &grid,
                state,
                &Boundary::Periodic,
                &law,
                0.05,
                0.2,
                StepControl::CflFraction(0.9),
            )
            .unwrap();
            let (e, _) = estimate_numerical_defect(&ledger, 1);
            assert!(e.values.iter().all(|&v| v >= 0.0));
            totals.push(e.total());
        }
        assert!(totals[1] < totals[0], "{totals:?}");
    }

    #[test]
    fn csv_serialization_shapes() {
        let e = EnergyDefectField::new(vec![0.0, 0.5]);
        let csv = e.to_csv();
        assert!(csv.starts_with("cell,value\n"));
        assert!(csv.contains("1,0.5\n"));
        let r = ReynoldsDefectField::zeros(1, 2);
        let csv = r.to_csv();
        assert!(csv.starts_with("cell,m11,m12,m22\n"));
    }
}
