//! Numeric checks of the product, commutator and Hardy inequalities.
//!
//! Each inequality is evaluated on a seeded corpus of smooth fields and
//! summarised by its empirical constant, the largest ratio of left to right
//! hand side. A check passes when the constant is finite on every grid and
//! moves by at most [`STABILITY_TOLERANCE`] between consecutive grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{BoundaryFunction, Grid, Parity, ScalarField};
use crate::mollifier::MollifierKernel;

pub const CORPUS_SIZE: usize = 20;
pub const STABILITY_TOLERANCE: f64 = 0.2;
/// Mollifier widths used by the boundary checks, in `z` units.
pub const KAPPAS: [f64; 2] = [0.3, 0.6];
/// Coarse and refined `(nr, nz)`; the coarse one still puts several nodes
/// inside the narrowest kernel.
pub const DEFAULT_GRIDS: [(usize, usize); 2] = [(12, 64), (24, 128)];

/// `sum c r^(2m+p) cos(n z + phase)` with `p` fixed by the parity.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub parity: Parity,
    pub terms: Vec<(f64, u32, u32, f64)>,
}

impl FieldSpec {
    pub fn random(rng: &mut impl Rng, parity: Parity) -> Self {
        let terms = (0..3)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0..=2),
                    rng.gen_range(0..=2),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        FieldSpec { parity, terms }
    }

    pub fn eval(&self, r: f64, z: f64, two_pi_over_l: f64) -> f64 {
        let p = match self.parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        self.terms
            .iter()
            .map(|&(c, m, n, ph)| c * r.powi((2 * m + p) as i32) * (n as f64 * two_pi_over_l * z + ph).cos())
            .sum()
    }

    pub fn sample(&self, grid: &Grid) -> ScalarField {
        let w = std::f64::consts::TAU / grid.l;
        grid.field_from_fn(self.parity, |r, z| self.eval(r, z, w))
    }

    /// Trace-like periodic function of `z` with a constant offset so that
    /// sup norms stay away from zero.
    pub fn sample_boundary(&self, grid: &Grid) -> BoundaryFunction {
        let w = std::f64::consts::TAU / grid.l;
        grid.boundary_from_fn(|z| 0.5 + self.eval(1.0, z, w))
    }
}

/// Deterministic corpus: alternating parities unless `parity` is given.
pub fn corpus(seed: u64, parity: Option<Parity>) -> Vec<FieldSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..CORPUS_SIZE)
        .map(|k| {
            let p = parity.unwrap_or(if k % 2 == 0 { Parity::Even } else { Parity::Odd });
            FieldSpec::random(&mut rng, p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaResult {
    pub name: String,
    /// Empirical constant on each grid, coarse to fine.
    pub constants: Vec<f64>,
    pub finite: bool,
    pub stable: bool,
}

impl LemmaResult {
    fn new(name: String, constants: Vec<f64>) -> Self {
        let finite = constants.iter().all(|c| c.is_finite());
        let stable = finite
            && constants
                .windows(2)
                .all(|w| w[0] > 0.0 && (w[1] / w[0] - 1.0).abs() <= STABILITY_TOLERANCE);
        LemmaResult {
            name,
            constants,
            finite,
            stable,
        }
    }

    pub fn passed(&self) -> bool {
        self.finite && self.stable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub grids: Vec<(usize, usize)>,
    pub results: Vec<LemmaResult>,
    pub passed: bool,
}

/// `d_r^a d_z^b f`.
fn mixed(grid: &Grid, f: &ScalarField, a: usize, b: usize) -> ScalarField {
    grid.d_r_n(&grid.d_z_n(f, b), a)
}

/// `||Dg||_k` with `D = (d_r, d_z)`.
fn grad_norm(grid: &Grid, g: &ScalarField, k: usize) -> f64 {
    (grid.weighted_norm_sq(&grid.d_r(g), k) + grid.weighted_norm_sq(&grid.d_z(g), k)).sqrt()
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Largest `||D^a(gh)||_0 / (||g||_k ||h||_m + ||g||_m ||h||_k)` over
/// `|a| = k`, `m = k/2 + 2`.
pub fn product_ratio(grid: &Grid, g: &ScalarField, h: &ScalarField, k: usize) -> f64 {
    let m = k / 2 + 2;
    let rhs = grid.weighted_norm(g, k) * grid.weighted_norm(h, m) + grid.weighted_norm(g, m) * grid.weighted_norm(h, k);
    let gh = g * h;
    (0..=k)
        .map(|a| ratio(grid.l2_norm(&mixed(grid, &gh, a, k - a)), rhs))
        .fold(0.0, f64::max)
}

/// Same with `[D^a, g] h` on the left and `Dg`, `h` at orders `k - 1`,
/// `(k - 1)/2 + 2` on the right.
pub fn commutator_ratio(grid: &Grid, g: &ScalarField, h: &ScalarField, k: usize) -> f64 {
    let m = (k - 1) / 2 + 2;
    let rhs = grad_norm(grid, g, k - 1) * grid.weighted_norm(h, m) + grad_norm(grid, g, m) * grid.weighted_norm(h, k - 1);
    let gh = g * h;
    (0..=k)
        .map(|a| {
            let lhs = &mixed(grid, &gh, a, k - a) - &(g * &mixed(grid, h, a, k - a));
            ratio(grid.l2_norm(&lhs), rhs)
        })
        .fold(0.0, f64::max)
}

/// Symmetric commutator `D^a(gh) - D^a g h - g D^a h` against
/// `||Dg||_(k-2) ||Dh||_m + ||Dg||_m ||Dh||_(k-2)`.
pub fn symmetric_commutator_ratio(grid: &Grid, g: &ScalarField, h: &ScalarField, k: usize) -> f64 {
    let m = (k - 2) / 2 + 2;
    let rhs = grad_norm(grid, g, k - 2) * grad_norm(grid, h, m) + grad_norm(grid, g, m) * grad_norm(grid, h, k - 2);
    let gh = g * h;
    (0..=k)
        .map(|a| {
            let b = k - a;
            let lhs = &(&mixed(grid, &gh, a, b) - &(&mixed(grid, g, a, b) * h)) - &(g * &mixed(grid, h, a, b));
            ratio(grid.l2_norm(&lhs), rhs)
        })
        .fold(0.0, f64::max)
}

/// `||g / r||_(s-1) / ||g||_s` for an odd field.
pub fn hardy_ratio(grid: &Grid, g: &ScalarField, s: usize) -> f64 {
    let over_r = g.div(&grid.r_field());
    ratio(grid.weighted_norm(&over_r, s - 1), grid.weighted_norm(g, s))
}

fn sup(w: &BoundaryFunction) -> f64 {
    w.max_abs()
}

fn w1_inf(grid: &Grid, w: &BoundaryFunction) -> f64 {
    sup(w) + sup(&grid.d_z_boundary(w))
}

/// `|gh|_s / (|g|_W1inf |h|_s)`.
pub fn boundary_product_ratio(grid: &Grid, g: &BoundaryFunction, h: &BoundaryFunction, s: usize) -> f64 {
    ratio(grid.boundary_norm(&(g * h), s), w1_inf(grid, g) * grid.boundary_norm(h, s))
}

/// `|Lambda h|_s / |h|_s`.
pub fn mollifier_bound_ratio(grid: &Grid, kernel: &MollifierKernel, h: &BoundaryFunction, s: usize) -> f64 {
    ratio(grid.boundary_norm(&kernel.apply(h), s), grid.boundary_norm(h, s))
}

/// `kappa^(1-s) |d_z Lambda h|_0 / |h|_s`.
pub fn derivative_loss_ratio(grid: &Grid, kernel: &MollifierKernel, h: &BoundaryFunction, s: usize) -> f64 {
    let lhs = grid.boundary_norm(&grid.d_z_boundary(&kernel.apply(h)), 0);
    ratio(kernel.kappa.powi(1 - s as i32) * lhs, grid.boundary_norm(h, s))
}

/// `|[Lambda, h] g|_0 / (sup|h| |g|_0)`.
pub fn mollifier_commutator_ratio(grid: &Grid, kernel: &MollifierKernel, h: &BoundaryFunction, g: &BoundaryFunction) -> f64 {
    ratio(grid.boundary_norm(&kernel.commutator(h, g), 0), sup(h) * grid.boundary_norm(g, 0))
}

/// `|[Lambda, h] d_z g|_0 / (|h|_W1inf |g|_0)`.
pub fn mollifier_derivative_commutator_ratio(
    grid: &Grid,
    kernel: &MollifierKernel,
    h: &BoundaryFunction,
    g: &BoundaryFunction,
) -> f64 {
    let dg = grid.d_z_boundary(g);
    ratio(grid.boundary_norm(&kernel.commutator(h, &dg), 0), w1_inf(grid, h) * grid.boundary_norm(g, 0))
}

type Check = Box<dyn Fn(&Grid, &[ScalarField], &[ScalarField], &[BoundaryFunction]) -> Result<f64>>;

fn corpus_max(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    (0..n).map(f).fold(0.0, f64::max)
}

fn checks() -> Vec<(String, Check)> {
    let mut out: Vec<(String, Check)> = Vec::new();
    for k in 0..=4 {
        out.push((
            format!("product k={k}"),
            Box::new(move |g, mixed, _, _| {
                Ok(corpus_max(mixed.len(), |i| product_ratio(g, &mixed[i], &mixed[(i + 1) % mixed.len()], k)))
            }),
        ));
    }
    for k in 1..=4 {
        out.push((
            format!("commutator k={k}"),
            Box::new(move |g, mixed, _, _| {
                Ok(corpus_max(mixed.len(), |i| commutator_ratio(g, &mixed[i], &mixed[(i + 1) % mixed.len()], k)))
            }),
        ));
    }
    for k in 2..=4 {
        out.push((
            format!("symmetric commutator k={k}"),
            Box::new(move |g, mixed, _, _| {
                Ok(corpus_max(mixed.len(), |i| {
                    symmetric_commutator_ratio(g, &mixed[i], &mixed[(i + 1) % mixed.len()], k)
                }))
            }),
        ));
    }
    for s in 1..=4 {
        out.push((
            format!("hardy s={s}"),
            Box::new(move |g, _, odd, _| Ok(corpus_max(odd.len(), |i| hardy_ratio(g, &odd[i], s)))),
        ));
    }
    for s in 0..=1 {
        out.push((
            format!("boundary product s={s}"),
            Box::new(move |g, _, _, b| Ok(corpus_max(b.len(), |i| boundary_product_ratio(g, &b[i], &b[(i + 1) % b.len()], s)))),
        ));
    }
    for kappa in KAPPAS {
        for s in 0..=2 {
            out.push((
                format!("mollifier bound kappa={kappa} s={s}"),
                Box::new(move |g, _, _, b| {
                    let kernel = MollifierKernel::new(kappa, g)?;
                    Ok(corpus_max(b.len(), |i| mollifier_bound_ratio(g, &kernel, &b[i], s)))
                }),
            ));
        }
        for s in 0..=1 {
            out.push((
                format!("derivative loss kappa={kappa} s={s}"),
                Box::new(move |g, _, _, b| {
                    let kernel = MollifierKernel::new(kappa, g)?;
                    Ok(corpus_max(b.len(), |i| derivative_loss_ratio(g, &kernel, &b[i], s)))
                }),
            ));
        }
        out.push((
            format!("mollifier commutator kappa={kappa}"),
            Box::new(move |g, _, _, b| {
                let kernel = MollifierKernel::new(kappa, g)?;
                Ok(corpus_max(b.len(), |i| mollifier_commutator_ratio(g, &kernel, &b[i], &b[(i + 1) % b.len()])))
            }),
        ));
        out.push((
            format!("mollifier derivative commutator kappa={kappa}"),
            Box::new(move |g, _, _, b| {
                let kernel = MollifierKernel::new(kappa, g)?;
                Ok(corpus_max(b.len(), |i| {
                    mollifier_derivative_commutator_ratio(g, &kernel, &b[i], &b[(i + 1) % b.len()])
                }))
            }),
        ));
    }
    out
}

/// Runs every check on each grid `(nr, nz)` over `[0, r0] x T_l`.
pub fn lemma_suite(seed: u64, grids: &[(usize, usize)], r0: f64, l: f64) -> Result<LemmaReport> {
    let mixed_specs = corpus(seed, None);
    let odd_specs = corpus(seed.wrapping_add(1), Some(Parity::Odd));
    let boundary_specs = corpus(seed.wrapping_add(2), Some(Parity::Even));
    let checks = checks();
    let mut constants = vec![Vec::with_capacity(grids.len()); checks.len()];
    for &(nr, nz) in grids {
        let grid = Grid::new(nr, nz, r0, l)?;
        let mixed: Vec<_> = mixed_specs.iter().map(|s| s.sample(&grid)).collect();
        let odd: Vec<_> = odd_specs.iter().map(|s| s.sample(&grid)).collect();
        let bnd: Vec<_> = boundary_specs.iter().map(|s| s.sample_boundary(&grid)).collect();
        for (slot, (_, check)) in constants.iter_mut().zip(&checks) {
            slot.push(check(&grid, &mixed, &odd, &bnd)?);
        }
    }
    let results: Vec<LemmaResult> = checks
        .into_iter()
        .zip(constants)
        .map(|((name, _), c)| LemmaResult::new(name, c))
        .collect();
    let passed = results.iter().all(LemmaResult::passed);
    Ok(LemmaReport {
        seed,
        grids: grids.to_vec(),
        results,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(nr: usize, nz: usize) -> Grid {
        Grid::new(nr, nz, 1.0, 2.0 * PI).unwrap()
    }

    #[test]
    fn constants_commute() {
        let g = grid(16, 32);
        let one = g.constant(1.0);
        for k in 1..=4 {
            assert!(commutator_ratio(&g, &one, &one, k) < 1e-12);
        }
        for k in 2..=4 {
            assert_eq!(symmetric_commutator_ratio(&g, &one, &one, k), 0.0);
        }
        let kernel = MollifierKernel::new(0.5, &g).unwrap();
        let b = g.boundary_constant(1.0);
        assert!(mollifier_commutator_ratio(&g, &kernel, &b, &b) < 1e-14);
        assert_eq!(mollifier_derivative_commutator_ratio(&g, &kernel, &b, &b), 0.0);
    }

    #[test]
    fn hardy_for_linear_profile() {
        let ratios: Vec<f64> = [(16, 32), (32, 64)]
            .iter()
            .map(|&(nr, nz)| {
                let g = grid(nr, nz);
                let f = g.field_from_fn(Parity::Odd, |r, z| r * z.sin());
                hardy_ratio(&g, &f, 1)
            })
            .collect();
        // ||sin z||_0^2 = pi^2 and ||r sin z||_1^2 = pi^2 (1/2 + 1 + 1/2)
        let exact = 0.5f64.sqrt();
        for r in ratios {
            assert!((r - exact).abs() < 1e-2, "{r} {exact}");
        }
    }

    #[test]
    fn product_of_harmonic_and_radius() {
        // g = sin 2z, h = r at k = 0
        let g = grid(32, 64);
        let sg = g.field_from_fn(Parity::Even, |_, z| (2.0 * z).sin());
        let h = g.r_field();
        let lhs = PI / 2f64.sqrt();
        // ||sin 2z||_2^2 = (1 + 4 + 16) pi^2, ||r||_2^2 = 4 pi^2 (1/4 + 1/2)
        let sg2 = 21f64.sqrt() * PI;
        let h2 = 3f64.sqrt() * PI;
        let sg0 = PI;
        let h0 = PI;
        let expect = lhs / (sg0 * h2 + sg2 * h0);
        let got = product_ratio(&g, &sg, &h, 0);
        assert!((got - expect).abs() < 1e-2 * expect, "{got} {expect}");
    }

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(corpus(7, None), corpus(7, None));
        assert_ne!(corpus(7, None), corpus(8, None));
        assert!(corpus(3, Some(Parity::Odd)).iter().all(|s| s.parity == Parity::Odd));
    }

    #[test]
    fn suite_is_stable_under_refinement() {
        let report = lemma_suite(11, &DEFAULT_GRIDS, 1.0, 2.0 * PI).unwrap();
        for r in &report.results {
            assert!(r.passed(), "{r:?}");
        }
        assert!(report.passed);
    }
}
