use std::f64::consts::PI;

use proptest::prelude::*;

use axifree_core::diagnostics::lemmas::FieldSpec;
use axifree_core::diagnostics::{energy, gamma_prime, gamma_set, good_unknowns, rt_margin_pointwise};
use axifree_core::dynamics::{Model, SimState, StepConfig};
use axifree_core::elliptic::EllipticSolver;
use axifree_core::grid::{BoundaryFunction, Grid, Parity, ScalarField};
use axifree_core::initial_data::{from_stream_function, validate, InitialData, Preset};
use axifree_core::io::{NamedField, Snapshot};
use axifree_core::kinematics::{boundary_transfer_residual, random_smooth_map, reconstruct_b, FlowMap, GeomCache, MagneticSeed};
use axifree_core::mollifier::MollifierKernel;
use axifree_core::vacuum::{compute_a, InterfaceTraces, VacuumState};

fn grid() -> Grid {
    Grid::new(12, 32, 1.0, 2.0 * PI).unwrap()
}

fn spec(parity: Parity) -> impl Strategy<Value = FieldSpec> {
    prop::collection::vec((-1.0..1.0f64, 0u32..=2, 0u32..=3, 0.0..(2.0 * PI)), 1..4)
        .prop_map(move |terms| FieldSpec { parity, terms })
}

fn any_parity() -> impl Strategy<Value = Parity> {
    prop_oneof![Just(Parity::Even), Just(Parity::Odd)]
}

fn boundary_fn() -> impl Strategy<Value = FieldSpec> {
    spec(Parity::Even)
}

fn shift_z(g: &Grid, f: &ScalarField, s: usize) -> ScalarField {
    let mut out = f.clone();
    for i in 0..g.nr {
        for j in 0..g.nz {
            out.values[g.idx(i, (j + s) % g.nz)] = f.values[g.idx(i, j)];
        }
    }
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

// a stream function has to vanish like r^2 on the axis
fn vanishing_on_axis(g: &Grid, chi: &FieldSpec) -> ScalarField {
    let mut f = chi.sample(g);
    for i in 0..g.nr {
        let r = g.r(i);
        for j in 0..g.nz {
            f.values[g.idx(i, j)] *= r * r;
        }
    }
    f
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_z_is_antisymmetric(f in spec(Parity::Even), h in spec(Parity::Odd)) {
        let g = grid();
        let (f, h) = (f.sample(&g), h.sample(&g));
        let lhs = g.inner(&g.d_z(&f), &h) + g.inner(&f, &g.d_z(&h));
        prop_assert!(lhs.abs() <= 1e-12 * (1.0 + g.l2_norm(&f) * g.l2_norm(&h)));
    }

    #[test]
    fn weighted_norm_grows_with_order(p in any_parity(), f in spec(Parity::Even)) {
        let g = grid();
        let f = FieldSpec { parity: p, ..f }.sample(&g);
        for k in 0..4 {
            prop_assert!(g.weighted_norm(&f, k) <= g.weighted_norm(&f, k + 1) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn mollifier_commutes_with_d_z_and_is_self_adjoint(f in boundary_fn(), h in boundary_fn(), kdz in 1.0..8.0f64) {
        let g = grid();
        let k = MollifierKernel::new(kdz * g.dz, &g).unwrap();
        let (f, h) = (f.sample_boundary(&g), h.sample_boundary(&g));
        let a = k.apply(&g.d_z_boundary(&f));
        let b = g.d_z_boundary(&k.apply(&f));
        prop_assert!(a.zip_map(&b, |x, y| x - y).max_abs() <= 1e-12 * f.max_abs().max(1.0));
        let dot = |x: &BoundaryFunction, y: &BoundaryFunction| x.values.iter().zip(&y.values).map(|(a, b)| a * b).sum::<f64>();
        let gap = dot(&k.apply(&f), &h) - dot(&f, &k.apply(&h));
        prop_assert!(gap.abs() <= 1e-12 * sum_sq(&f.values) * sum_sq(&h.values));
    }

    #[test]
    fn mollifier_contracts_and_keeps_constants(f in boundary_fn(), c in -3.0..3.0f64, kdz in 1.0..8.0f64) {
        let g = grid();
        let k = MollifierKernel::new(kdz * g.dz, &g).unwrap();
        let f = f.sample_boundary(&g);
        prop_assert!(sum_sq(&k.apply(&f).values) <= sum_sq(&f.values) * (1.0 + 1e-14));
        prop_assert!(k.apply(&g.boundary_constant(c)).values.iter().all(|v| (v - c).abs() <= 1e-13 * (1.0 + c.abs())));
    }

    #[test]
    fn algebraic_identities_on_random_maps(seed in 0u64..10_000, amp in 0.0..0.08f64) {
        let g = grid();
        let map = random_smooth_map(&g, seed, amp);
        let kernel = MollifierKernel::new(4.0 * g.dz, &g).unwrap();
        let cache = GeomCache::build(&g, &map, &kernel, &EllipticSolver::new(&g, 1e-12)).unwrap();
        for geom in [&cache.base, &cache.smooth] {
            prop_assert!(geom.transpose_product_residual() <= 1e-12);
            prop_assert!(geom.determinant_residual() <= 1e-12);
        }
        let x0 = g.boundary_from_fn(|z| 1.0 + 0.2 * z.sin());
        let x1 = g.boundary_from_fn(|z| (3.0 * z).cos());
        prop_assert!(boundary_transfer_residual(&cache.boundary, [&x0, &x1]).max_abs() <= 1e-12);
    }

    #[test]
    fn reconstruction_at_identity_is_the_seed(br in spec(Parity::Odd), bth in spec(Parity::Odd), bz in spec(Parity::Even)) {
        let g = grid();
        let seed = MagneticSeed { b0r: br.sample(&g), b0th: bth.sample(&g), b0z: bz.sample(&g) };
        let b = reconstruct_b(&g, &seed, &FlowMap::identity(&g));
        prop_assert!(max_diff(&b.b_r.values, &seed.b0r.values) <= 1e-12);
        prop_assert!(max_diff(&b.b_th.values, &seed.b0th.values) <= 1e-12);
        prop_assert!(max_diff(&b.b_z.values, &seed.b0z.values) <= 1e-12);
    }

    #[test]
    fn advance_keeps_amplitude_positive(c0 in 1e-3..10.0f64, rates in prop::array::uniform4(-50.0..50.0f64), dt in 1e-4..0.5f64) {
        let v = VacuumState::new(c0, 2.0).unwrap().advance(rates, dt);
        prop_assert!(v.c > 0.0 && v.c.is_finite());
    }

    #[test]
    fn growth_rate_ignores_axial_offset(r in boundary_fn(), vr in boundary_fn(), shift in -5.0..5.0f64) {
        let g = grid();
        let r = r.sample_boundary(&g).map(|x| 1.0 + 0.05 * x);
        let vr = vr.sample_boundary(&g).map(|x| 0.1 * x);
        let vz = g.boundary_from_fn(|z| 0.2 * z.cos());
        let zd = g.boundary_from_fn(|z| 0.03 * z.sin());
        let zs = zd.map(|x| x + shift);
        let a = compute_a(&g, InterfaceTraces { r: &r, z_disp: &zd, vr: &vr, vz: &vz }, 3.0).unwrap();
        let b = compute_a(&g, InterfaceTraces { r: &r, z_disp: &zs, vr: &vr, vz: &vz }, 3.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn gamma_dichotomy_is_exhaustive(bz in boundary_fn(), frac in 0.01..1.0f64) {
        let g = grid();
        let b = bz.sample_boundary(&g).map(|x| x - 0.5);
        let delta = frac * b.max_abs().max(1e-12);
        let gamma = gamma_set(&b);
        let near = gamma_prime(&b, delta);
        prop_assert!(gamma.iter().all(|j| near.contains(j)));
        for &j in &near {
            prop_assert!(gamma.contains(&j) || b.values[j].abs() < delta, "node {} wrongly included", j);
            for nb in [(j + 1) % g.nz, (j + g.nz - 1) % g.nz] {
                prop_assert!(near.contains(&nb) || b.values[nb].abs() >= delta, "node {} not reached", nb);
            }
        }
    }

    #[test]
    fn rt_margin_scales_with_pressure(q in spec(Parity::Even), alpha in 0.1..10.0f64) {
        let g = grid();
        let q = q.sample(&g);
        let rk = g.r_field();
        let m1 = rt_margin_pointwise(&g, &q, 0.0, &rk);
        let m2 = rt_margin_pointwise(&g, &q.scale(alpha), 0.0, &rk);
        for (a, b) in m1.values.iter().zip(&m2.values) {
            prop_assert!((alpha * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn stream_functions_give_small_divergence(chi in spec(Parity::Even), swirl in spec(Parity::Odd)) {
        let g = grid();
        let data = {
            let [v0r, v0th, v0z] = from_stream_function(&g, &vanishing_on_axis(&g, &chi), &swirl.sample(&g)).unwrap();
            InitialData { v0r, v0th, v0z, ..InitialData::rest(&g, 0.5, 2.0) }
        };
        let report = validate(&g, &data, 4.0 * g.dz).unwrap();
        prop_assert!(report.div_v <= report.divergence_tolerance, "{}", report.div_v);
    }

    #[test]
    fn snapshots_round_trip_any_bits(values in prop::collection::vec(any::<u64>(), 12 * 32), scalar in any::<u64>()) {
        let g = grid();
        let field = ScalarField { values: values.iter().map(|&b| f64::from_bits(b)).collect(), parity: Parity::Odd };
        let snap = Snapshot::new(&g).with_field("x", &field).with_scalar("s", f64::from_bits(scalar));
        let back = Snapshot::from_binary(&snap.to_binary()).unwrap();
        let bits = |f: &NamedField| f.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.fields[0]), bits(&snap.fields[0]));
        prop_assert_eq!(back.scalars["s"].to_bits(), scalar);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn harmonic_solvers_are_linear(f in boundary_fn(), h in boundary_fn(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let g = grid();
        let s = EllipticSolver::new(&g, 1e-13);
        let (f, h) = (f.sample_boundary(&g), h.sample_boundary(&g));
        let combo = f.zip_map(&h, |x, y| a * x + b * y);
        for solve in [EllipticSolver::solve_flat_laplace, EllipticSolver::solve_cyl_harmonic] {
            let uf = solve(&s, &f).unwrap().0;
            let uh = solve(&s, &h).unwrap().0;
            let uc = solve(&s, &combo).unwrap().0;
            let lin = &uf.scale(a) + &uh.scale(b);
            prop_assert!((&uc - &lin).max_abs() <= 1e-9 * (1.0 + uc.max_abs()));
        }
    }

    #[test]
    fn harmonic_solvers_obey_maximum_principle(f in boundary_fn()) {
        let g = grid();
        let s = EllipticSolver::new(&g, 1e-13);
        let f = f.sample_boundary(&g);
        let lo = f.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let u = s.solve_cyl_harmonic(&f).unwrap().0;
        prop_assert!(u.values.iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10));
        // the flat problem also pins zero on the axis
        let u = s.solve_flat_laplace(&f).unwrap().0;
        prop_assert!(u.values.iter().all(|&v| v >= lo.min(0.0) - 1e-10 && v <= hi.max(0.0) + 1e-10));
    }

    #[test]
    fn energy_is_translation_invariant(vr in spec(Parity::Odd), vz in spec(Parity::Even), s in 1usize..32) {
        let g = grid();
        let data = InitialData {
            v0r: vr.sample(&g),
            v0z: vz.sample(&g),
            ..Preset::Pinch.build(&g)
        };
        let model = Model::new(&g, data.seed(), StepConfig::new(4.0 * g.dz)).unwrap();
        let state = data.state(&g).unwrap();
        let stage = model.evaluate(&state).unwrap();
        let e0 = energy(&g, &state, &stage.frozen);
        let shifted = SimState {
            vr: shift_z(&g, &state.vr, s),
            vz: shift_z(&g, &state.vz, s),
            ..state.clone()
        };
        let frozen = axifree_core::kinematics::FrozenField {
            b_r: shift_z(&g, &stage.frozen.b_r, s),
            b_th: shift_z(&g, &stage.frozen.b_th, s),
            b_z: shift_z(&g, &stage.frozen.b_z, s),
        };
        let e1 = energy(&g, &shifted, &frozen);
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0);
    }

    #[test]
    fn good_unknown_is_fourth_derivative_on_flat_maps(vr in spec(Parity::Odd), vz in spec(Parity::Even), q in spec(Parity::Even)) {
        let g = grid();
        let mut state = SimState::at_rest(&g, VacuumState::new(0.5, 2.0).unwrap());
        state.vr = vr.sample(&g);
        state.vz = vz.sample(&g);
        let q = q.sample(&g);
        let kernel = MollifierKernel::new(4.0 * g.dz, &g).unwrap();
        let cache = GeomCache::build(&g, &state.map, &kernel, &EllipticSolver::new(&g, 1e-12)).unwrap();
        let gu = good_unknowns(&g, &state, &q, &cache);
        for (got, want) in [(&gu.v[0], g.d_z_n(&state.vr, 4)), (&gu.v[1], g.d_z_n(&state.vz, 4)), (&gu.q, g.d_z_n(&q, 4))] {
            let scale = 1.0 + want.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(max_diff(&got.values, &want.values) <= 1e-12 * scale);
        }
    }

    #[test]
    fn validated_data_starts_inside_the_window(p in prop::sample::select(Preset::ALL.to_vec())) {
        let g = Grid::new(16, 16, 1.0, 2.0 * PI).unwrap();
        let data = p.build(&g);
        let a = validate(&g, &data, 4.0 * g.dz).unwrap();
        let b = validate(&g, &data, 4.0 * g.dz).unwrap();
        prop_assert_eq!(&a, &b);
        if a.admissible {
            let model = Model::new(&g, data.seed(), StepConfig { route: None, ..StepConfig::new(4.0 * g.dz) }).unwrap();
            let state = data.state(&g).unwrap();
            let stage = model.evaluate(&state).unwrap();
            prop_assert!(stage.cache.smooth.window_violation().is_none());
            prop_assert_eq!(stage.cache.base.window_deviation(), (0.0, 0.0));
        }
    }
}
