//! Batch check of stencil decompositions on random matrices of `S_δ`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomposition::{decompose_matrix, decomposition_floor, reconstruction_residual, Coeffs};
use crate::error::{Error, Result};
use crate::grid::Stencil;
use crate::problem::{rotated_diag, Mat2};

/// `rotated_diag(λ₁, λ₂, θ)` with `λᵢ` uniform in `[δ, 1/δ]` and `θ`
/// uniform in `[0, π)`.
pub fn random_elliptic(delta: f64, n: usize, seed: u64) -> Vec<Mat2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let l1 = rng.gen_range(delta..=1.0 / delta);
            let l2 = rng.gen_range(delta..=1.0 / delta);
            rotated_diag(l1, l2, rng.gen_range(0.0..PI))
        })
        .collect()
}

#[derive(Debug)]
pub struct SampleOutcome {
    pub matrix: Mat2,
    /// Coefficients and the best max-min value, or the error.
    pub result: std::result::Result<(Coeffs, f64), Error>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionSummary {
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub floor: f64,
    pub max_residual: f64,
    pub min_coefficient: f64,
    pub below_floor: usize,
    pub infeasible: usize,
}

pub struct DecompositionCheck {
    pub summary: DecompositionSummary,
    pub outcomes: Vec<SampleOutcome>,
}

impl DecompositionCheck {
    /// First infeasible sample as an error, if any.
    pub fn first_infeasible(&self) -> Option<Error> {
        self.outcomes.iter().find_map(|o| o.result.as_ref().err().map(|e| match e {
            Error::DecompositionInfeasible {
                matrix, floor, best, ..
            } => Error::DecompositionInfeasible {
                matrix: *matrix,
                floor: *floor,
                best: *best,
                location: None,
            },
            other => Error::invalid("decomposition", other.to_string()),
        }))
    }

    /// `index,a11,a12,a22,status,min_coefficient,residual,c_0..c_{n-1}`.
    pub fn write_csv<W: Write>(&self, stencil: &Stencil, mut w: W) -> Result<()> {
        let cols: Vec<String> = (0..stencil.len()).map(|k| format!("c_{k}")).collect();
        writeln!(w, "index,a11,a12,a22,status,min_coefficient,residual,{}", cols.join(","))?;
        for (i, o) in self.outcomes.iter().enumerate() {
            let m = &o.matrix;
            write!(w, "{i},{:?},{:?},{:?}", m[(0, 0)], m[(0, 1)], m[(1, 1)])?;
            match &o.result {
                Ok((c, min)) => {
                    let vals: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
                    let res = reconstruction_residual(c, stencil, m);
                    writeln!(w, ",ok,{min:?},{res:?},{}", vals.join(","))?;
                }
                Err(_) => writeln!(w, ",infeasible,,,{}", vec![""; stencil.len()].join(","))?,
            }
        }
        Ok(())
    }
}

/// Decomposes `samples` random matrices of `S_δ` with the certified floor
/// of the stencil and collects residuals and infeasibilities.
pub fn check_random_decompositions(delta: f64, stencil: &Stencil, samples: usize, seed: u64) -> Result<DecompositionCheck> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta", format!("{delta} not in (0, 1]")));
    }
    let floor = decomposition_floor(delta, stencil);
    let outcomes: Vec<SampleOutcome> = random_elliptic(delta, samples, seed)
        .into_iter()
        .map(|matrix| SampleOutcome {
            result: decompose_matrix(&matrix, stencil, floor),
            matrix,
        })
        .collect();
    let mut summary = DecompositionSummary {
        delta,
        samples,
        seed,
        floor,
        max_residual: 0.0,
        min_coefficient: f64::INFINITY,
        below_floor: 0,
        infeasible: 0,
    };
    for o in &outcomes {
        match &o.result {
            Ok((c, min)) => {
                summary.max_residual = summary.max_residual.max(reconstruction_residual(c, stencil, &o.matrix));
                summary.min_coefficient = summary.min_coefficient.min(*min);
                if *min < floor {
                    summary.below_floor += 1;
                }
            }
            Err(_) => summary.infeasible += 1,
        }
    }
    Ok(DecompositionCheck { summary, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::sym_eigenvalues;

    #[test]
    fn samples_lie_in_the_class() {
        for m in random_elliptic(0.3, 200, 4) {
            let (lo, hi) = sym_eigenvalues(&m);
            assert!(lo >= 0.3 - 1e-12 && hi <= 1.0 / 0.3 + 1e-12);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
        }
    }

    #[test]
    fn axis_stencil_rejects_rotated_matrices() {
        let c = check_random_decompositions(0.2, &Stencil::axis(), 20, 1).unwrap();
        assert!(c.summary.infeasible > 0);
        assert!(matches!(c.first_infeasible(), Some(Error::DecompositionInfeasible { .. })));
    }

    #[test]
    fn four_stencil_near_identity_is_feasible() {
        let c = check_random_decompositions(0.9, &Stencil::default_four(), 100, 2).unwrap();
        assert_eq!(c.summary.infeasible, 0);
        assert!(c.summary.max_residual < 1e-12);
        assert!(c.summary.min_coefficient >= c.summary.floor);
        let mut buf = Vec::new();
        c.write_csv(&Stencil::default_four(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 101);
    }
}
