//! Acceptance suite: one test per criterion, every tolerance pinned in code.
//!
//! Each test prints a single `[criterion NN] PASS ...` line with the measured
//! quantities; a failed assertion marks the criterion red. Run with
//! `cargo test -p sir-dynamics --test acceptance -- --nocapture` to see the
//! lines.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use sir_dynamics::dynamics::{
    attractor_sample, dichotomy_projections, disease_free_linearization, disease_free_state,
    endemic_floor_per_member, heteroclinic_trace, infection_bound_excess,
    perturbation_continuity_scan, pullback_endpoint, tempered_check, AttractorGrid,
    ContinuityScanConfig, TemperedVerdict,
};
use sir_dynamics::ensemble::EnsembleSpec;
use sir_dynamics::integrator::{integrate, integrate_variational, total_population_check};
use sir_dynamics::linalg::eigenvalues3;
use sir_dynamics::model::{
    ModelParams, ModelVariant, NoiseBounds, Scenario, SirState, VariantKind,
};
use sir_dynamics::noise::{effective_q_path, ou_path_stream, OuConfig};

const DT: f64 = 1e-3;
const DT_OUT: f64 = 1e-2;

/// Endemic floors measured once on the pinned 100-seed calibration ensembles
/// below (master seed 42) and frozen; criteria 6 and 7 assert that no
/// trajectory re-enters `I < floor/2` after t = 20.
const FLOOR_PRESET6: f64 = 0.71952;
const FLOOR_PRESET8: f64 = 0.67076;

fn fig_params(gamma: f64) -> ModelParams<f64> {
    ModelParams::new(5.0, 1.5, 0.5, 0.7, gamma).unwrap()
}

fn fig_u0() -> SirState<f64> {
    SirState::new(25.0, 1.0, 0.0).unwrap()
}

fn ensemble(gamma: f64, kind: VariantKind, window: (f64, f64)) -> EnsembleSpec<f64> {
    let bounds = match kind {
        VariantKind::RandomGamma => Some(NoiseBounds::gamma_only(1.5).unwrap()),
        VariantKind::RandomGammaRandomQ => Some(NoiseBounds::gamma_and_q(1.5, 0.5).unwrap()),
        _ => None,
    };
    EnsembleSpec {
        kind,
        params: fig_params(gamma),
        bounds,
        path_window: window,
        path_dt: DT,
        master_seed: 42,
        size: 100,
    }
}

#[test]
fn criterion_01_deterministic_eradication() {
    let start = Instant::now();
    let traj = integrate(
        &ModelVariant::deterministic(),
        &fig_params(1.25),
        fig_u0(),
        (0.0, 30.0),
        DT,
        DT_OUT,
    )
    .unwrap();
    let i5 = traj.state_at(5.0).unwrap().infected;
    let s30 = traj.state_at(30.0).unwrap().susceptible;
    let r30 = traj.state_at(30.0).unwrap().recovered;
    let elapsed = start.elapsed();

    assert!(i5 < 1e-2, "I(5) = {i5}");
    assert!((s30 - 10.0 / 3.0).abs() < 1e-3, "S(30) = {s30}");
    assert!(r30 < 1e-3, "R(30) = {r30}");
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    println!(
        "[criterion 01] PASS I(5)={i5:.3e} |S(30)-10/3|={:.3e} R(30)={r30:.3e} in {elapsed:?}",
        (s30 - 10.0 / 3.0).abs()
    );
}

#[test]
fn criterion_02_deterministic_endemic() {
    let start = Instant::now();
    let params = fig_params(5.0);
    let traj = integrate(
        &ModelVariant::deterministic(),
        &params,
        fig_u0(),
        (0.0, 20.0),
        DT,
        DT_OUT,
    )
    .unwrap();
    let peak = (0..traj.len())
        .max_by(|&i, &j| {
            traj.state(i)
                .infected
                .partial_cmp(&traj.state(j).infected)
                .unwrap()
        })
        .unwrap();
    let t_peak = traj.time(peak);
    let end = traj.state_at(20.0).unwrap();
    let e1 = params.endemic_equilibrium().unwrap();
    let elapsed = start.elapsed();

    assert!((0.5..=1.5).contains(&t_peak), "peak at t = {t_peak}");
    assert!((end.infected - e1.infected).abs() < 1e-3, "I(20) = {}", end.infected);
    assert!(
        (end.susceptible - e1.susceptible).abs() < 1e-3,
        "S(20) = {}",
        end.susceptible
    );
    assert!(
        (end.recovered - e1.recovered).abs() < 1e-3,
        "R(20) = {}",
        end.recovered
    );
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    println!(
        "[criterion 02] PASS peak at t={t_peak} endpoint gap {:.3e} in {elapsed:?}",
        end.distance(&e1)
    );
}

#[test]
fn criterion_03_simplex_absorption() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let params = fig_params(5.0);
    let bounds = NoiseBounds::gamma_only(1.5).unwrap();
    let cfg = OuConfig::new(-1.0, 41.0, DT, 42).unwrap();
    let mut worst = 0.0f64;
    for k in 0..50u64 {
        let u0 = SirState::new(
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..10.0),
            rng.random_range(0.0..10.0),
        )
        .unwrap();
        for variant in [
            ModelVariant::deterministic(),
            ModelVariant::random_gamma(ou_path_stream(&cfg, k).unwrap(), bounds),
        ] {
            let traj = integrate(&variant, &params, u0, (0.0, 40.0), DT, 1.0).unwrap();
            let dev = (traj.state_at(40.0).unwrap().total() - 10.0 / 3.0).abs();
            worst = worst.max(dev);
        }
    }
    assert!(worst < 1e-6, "max |N(40) - 10/3| = {worst:.3e}");
    println!("[criterion 03] PASS max |N(40) - 10/3| = {worst:.3e} over 50 starts x 2 variants");
}

#[test]
fn criterion_04_closed_form_population() {
    let params = fig_params(1.25);
    let variant = ModelVariant::deterministic();
    let traj = integrate(&variant, &params, fig_u0(), (0.0, 10.0), DT, DT_OUT).unwrap();
    let sup = total_population_check(&traj, &variant, &params).unwrap();
    assert!(sup < 1e-8, "sup |N - closed form| = {sup:.3e}");
    println!("[criterion 04] PASS sup |N - closed form| = {sup:.3e} at dt = 1e-3");
}

#[test]
fn criterion_05_random_gamma_eradication() {
    let start = Instant::now();
    let spec = ensemble(1.25, VariantKind::RandomGamma, (-41.0, 11.0));
    let runs = spec.run(fig_u0(), (0.0, 10.0), DT, DT_OUT).unwrap();
    let mut worst_i10 = 0.0f64;
    for traj in &runs {
        worst_i10 = worst_i10.max(traj.state_at(10.0).unwrap().infected);
    }
    assert!(worst_i10 < 1e-2, "max I(10) = {worst_i10:.3e}");

    let mut worst_pullback = 0.0f64;
    for k in 0..spec.size as u64 {
        let scenario = spec.member(k).unwrap();
        let end = pullback_endpoint(&scenario, 0.0, 40.0, fig_u0(), DT).unwrap();
        worst_pullback = worst_pullback.max(end.infected);
    }
    let elapsed = start.elapsed();
    assert!(worst_pullback < 1e-4, "max pullback I = {worst_pullback:.3e}");
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?}");
    println!(
        "[criterion 05] PASS max I(10)={worst_i10:.3e} max pullback I(T=40)={worst_pullback:.3e} over 100 seeds in {elapsed:?}"
    );
}

#[test]
fn criterion_06_random_gamma_endemic_floor() {
    let spec = ensemble(5.0, VariantKind::RandomGamma, (-1.0, 41.0));
    let runs = spec.run(fig_u0(), (0.0, 40.0), DT, DT_OUT).unwrap();
    let floors = endemic_floor_per_member(&runs, (20.0, 40.0)).unwrap();
    let floor = floors.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(floor > 0.0, "floor = {floor}");
    // No trajectory re-enters I < floor/2 after t = 20 (floor frozen from the
    // calibration run of this very ensemble).
    assert!(
        (floor - FLOOR_PRESET6).abs() < 0.05 * FLOOR_PRESET6,
        "measured floor {floor} drifted from the frozen calibration {FLOOR_PRESET6}"
    );
    for traj in &runs {
        for k in 0..traj.len() {
            if traj.time(k) >= 20.0 {
                assert!(traj.state(k).infected >= FLOOR_PRESET6 / 2.0);
            }
        }
    }
    println!("[criterion 06] PASS min I over [20,40] x 100 seeds = {floor:.4} (frozen {FLOOR_PRESET6})");
}

#[test]
fn criterion_07_random_q_endemic() {
    let spec = ensemble(5.0, VariantKind::RandomGammaRandomQ, (-1.0, 41.0));
    let runs = spec.run(fig_u0(), (0.0, 40.0), DT, DT_OUT).unwrap();
    let floors = endemic_floor_per_member(&runs, (20.0, 40.0)).unwrap();
    let floor = floors.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(floor > 0.0, "floor = {floor}");
    assert!(
        (floor - FLOOR_PRESET8).abs() < 0.05 * FLOOR_PRESET8,
        "measured floor {floor} drifted from the frozen calibration {FLOOR_PRESET8}"
    );
    let mut n_range = (f64::INFINITY, f64::NEG_INFINITY);
    for traj in &runs {
        for k in 0..traj.len() {
            let t = traj.time(k);
            if t >= 20.0 {
                assert!(traj.state(k).infected >= FLOOR_PRESET8 / 2.0);
            }
            if t >= 30.0 {
                let n = traj.state(k).total();
                n_range = (n_range.0.min(n), n_range.1.max(n));
                assert!(
                    (2.95..=3.7167).contains(&n),
                    "N({t}) = {n} outside the absorbing band"
                );
            }
        }
    }
    println!(
        "[criterion 07] PASS floor {floor:.4} (frozen {FLOOR_PRESET8}); N(t>=30) in [{:.4}, {:.4}]",
        n_range.0, n_range.1
    );
}

#[test]
fn criterion_08_disease_free_global_solution() {
    // Constant recruitment: S* = q/a exactly, up to quadrature tolerance.
    let constant = sir_dynamics::SamplePath64::constant(-25.0, 1.0, 1e-2, 5.0).unwrap();
    let sol = disease_free_state(&constant, 1.5, 0.0, 20.0, 1e-4).unwrap();
    let const_err = (sol.value - 10.0 / 3.0).abs();
    assert!(const_err < 1e-8, "|S* - q/a| = {const_err:.3e}");

    // Random recruitment: the pullback endpoint of the full system started on
    // the disease-free plane matches (S*, 0, 0).
    let params = fig_params(1.25);
    let bounds = NoiseBounds::gamma_and_q(1.5, 0.5).unwrap();
    let cfg = OuConfig::new(-41.0, 1.0, DT, 8).unwrap();
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let z = ou_path_stream(&cfg, k).unwrap();
        let scenario = Scenario::new(
            VariantKind::RandomGammaRandomQ,
            params,
            Some(bounds),
            Some(z.clone()),
        )
        .unwrap();
        let q_path = effective_q_path(&params, &bounds, &z).unwrap();
        let expected = disease_free_state(&q_path, 1.5, 0.0, 20.0, 1e-4).unwrap();

        let u0 = SirState::new(25.0, 0.0, 0.0).unwrap();
        let end = pullback_endpoint(&scenario, 0.0, 20.0, u0, DT).unwrap();
        assert_eq!(end.infected, 0.0);
        assert_eq!(end.recovered, 0.0);
        worst = worst.max((end.susceptible - expected.value).abs());
    }
    assert!(worst < 1e-5, "max |S_pullback - S*| = {worst:.3e}");
    println!(
        "[criterion 08] PASS constant-q error {const_err:.3e}; max random-q mismatch {worst:.3e} over 20 seeds"
    );
}

#[test]
fn criterion_09_eigenvalue_exactness() {
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = ModelParams::<f64>::new(
            rng.random_range(1.0..10.0),
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..6.0),
        )
        .unwrap();
        if (params.transmission - params.removal_rate()).abs() < 1e-8 {
            continue;
        }
        let a = disease_free_linearization(&params);
        let eig = eigenvalues3(&a);
        let mut expected = [
            -params.mortality,
            -params.mortality,
            params.transmission - params.removal_rate(),
        ];
        expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (have, want) in eig.iter().zip(expected) {
            worst = worst.max((have.re - want).abs());
            assert!(
                (have.re - want).abs() < 1e-10,
                "eigenvalue {} vs {want}",
                have.re
            );
        }
        let report = dichotomy_projections(&a).unwrap();
        let expected_rank = usize::from(params.transmission > params.removal_rate());
        assert_eq!(report.unstable_rank, expected_rank);
    }
    println!("[criterion 09] PASS max eigenvalue error {worst:.3e} over 100 parameter draws");
}

#[test]
fn criterion_10_variational_correctness() {
    let params = fig_params(5.0);
    let variant = ModelVariant::deterministic();
    // Equilibrium base (the endemic point is interior, so central differences
    // stay in the octant) and a transient interior base.
    let bases = [
        ("equilibrium", params.endemic_equilibrium().unwrap()),
        ("transient", SirState::new(25.0, 1.0, 0.5).unwrap()),
    ];
    let mut worst = 0.0f64;
    for (label, start) in bases {
        let base = integrate(&variant, &params, start, (0.0, 1.0), DT, DT).unwrap();
        let fundamental =
            integrate_variational(&variant, &params, &base, (0.0, 1.0), DT).unwrap();
        let m = fundamental.final_matrix();
        let eps = 1e-6;
        for col in 0..3 {
            let mut plus = start.as_vec3();
            let mut minus = start.as_vec3();
            plus.0[col] += eps;
            minus.0[col] -= eps;
            let flow = |v: sir_dynamics::linalg::Vec3<f64>| {
                integrate(
                    &variant,
                    &params,
                    SirState::new(v.0[0], v.0[1], v.0[2]).unwrap(),
                    (0.0, 1.0),
                    DT,
                    DT,
                )
                .unwrap()
                .final_state()
                .as_vec3()
            };
            let fd = (flow(plus) - flow(minus)).scale(0.5 / eps);
            for row in 0..3 {
                let rel = (fd.0[row] - m.0[row][col]).abs() / m.0[row][col].abs().max(1.0);
                worst = worst.max(rel);
                assert!(
                    rel < 1e-4,
                    "{label} base entry ({row},{col}): fd {} vs variational {}",
                    fd.0[row],
                    m.0[row][col]
                );
            }
        }
    }
    println!("[criterion 10] PASS max relative mismatch {worst:.3e} on both bases");
}

#[test]
fn criterion_11_ou_fidelity() {
    // Long-path stationary moments.
    let cfg = OuConfig::new(0.0, 1e4, 1e-2, 11).unwrap();
    let p = ou_path_stream(&cfg, 0).unwrap();
    let v = p.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((var - 0.5).abs() < 0.02, "variance {var}");

    // Lag-1 autocorrelation against exp(-dt).
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..v.len() - 1 {
        num += (v[i] - mean) * (v[i + 1] - mean);
    }
    for x in v {
        den += (x - mean) * (x - mean);
    }
    let acf = num / den;
    let acf_err = (acf - (-0.01f64).exp()).abs();
    assert!(acf_err < 0.01, "acf error {acf_err}");

    // Ergodic hypothesis: the transformed perturbation averages out.
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let z = ou_path_stream(&cfg, k).unwrap();
        let phi = z.transformed(1.5);
        let avg = sir_dynamics::noise::ergodic_average(&phi, 1e3).unwrap().abs();
        worst = worst.max(avg);
        assert!(avg < 0.05, "|ergodic average| = {avg} for stream {k}");
    }
    println!(
        "[criterion 11] PASS mean {mean:.4} var {var:.4} acf err {acf_err:.4} max |avg(1e3)| {worst:.4}"
    );
}

#[test]
fn criterion_12_tempered_bound() {
    let cfg = OuConfig::<f64>::new(-1.0, 1.01e4, 1e-2, 12).unwrap();
    let mut worst_final = 0.0f64;
    for k in 0..20u64 {
        let z = ou_path_stream(&cfg, k).unwrap();
        let phi = z.transformed(1.5);
        let report = tempered_check(&phi, 1e4, 8).unwrap();
        let final_value = report.series.last().unwrap().1.abs();
        worst_final = worst_final.max(final_value);
        assert_eq!(
            report.verdict,
            TemperedVerdict::Tempered,
            "stream {k}: final ln K(t)/t = {final_value}"
        );
    }
    println!("[criterion 12] PASS all 20 seeds tempered; max final |ln K/t| = {worst_final:.4}");
}

#[test]
fn criterion_13_heteroclinic_structure() {
    let params = fig_params(5.0);
    let trace = heteroclinic_trace(&params, 1e-5, DT, DT_OUT, 200.0).unwrap();
    let e1 = params.endemic_equilibrium().unwrap();
    let e0 = params.disease_free_equilibrium();
    let gap = trace.final_state().distance(&e1);
    assert!(gap < 1e-4, "terminal gap {gap:.3e}");

    let scenario = Scenario::new(VariantKind::Deterministic, params, None, None).unwrap();
    let grid = AttractorGrid::default_for(&params);
    let sample = attractor_sample(&scenario, 0.0, 12.0, &grid, DT).unwrap();
    assert!(
        sample.max_band_deviation < 1e-5,
        "band deviation {:.3e}",
        sample.max_band_deviation
    );

    // Classify every sampled point: the two equilibrium clusters plus
    // connecting points along the traced orbit; nothing else.
    let mut near_e0 = 0usize;
    let mut near_e1 = 0usize;
    let mut connecting = 0usize;
    for p in &sample.points {
        if p.distance(&e0) < 1e-3 {
            near_e0 += 1;
        } else if p.distance(&e1) < 1e-3 {
            near_e1 += 1;
        } else {
            let mut dist = f64::INFINITY;
            for k in 0..trace.len() - 1 {
                let a = trace.state(k).as_vec3();
                let b = trace.state(k + 1).as_vec3();
                let ab = b - a;
                let t = ((p.as_vec3() - a).dot(&ab) / ab.dot(&ab)).clamp(0.0, 1.0);
                dist = dist.min((p.as_vec3() - (a + ab.scale(t))).norm());
            }
            assert!(
                dist < 1e-2,
                "point {p:?} is neither an equilibrium cluster nor on the connecting orbit (distance {dist:.3e})"
            );
            connecting += 1;
        }
    }
    assert!(near_e0 >= 1, "no cluster at the disease-free point");
    assert!(near_e1 >= 1, "no cluster at the endemic point");
    assert!(connecting >= 1, "no connecting points sampled");
    println!(
        "[criterion 13] PASS terminal gap {gap:.3e}; clusters {near_e0}/{near_e1}, {connecting} connecting points, band dev {:.3e}",
        sample.max_band_deviation
    );
}

#[test]
fn criterion_14_continuity_scan_and_infection_bound() {
    // Hausdorff distances shrink (in median over 10 seeds) as the bounded
    // perturbation is dialed down.
    let params = fig_params(5.0);
    let etas = [0.4, 0.2, 0.1, 0.05];
    let seeds: Vec<u64> = (100..110).collect();
    let cfg = ContinuityScanConfig::default_for(&params);
    let scan = perturbation_continuity_scan(&params, &etas, &seeds, &cfg).unwrap();
    let medians = scan.medians();
    for pair in medians.windows(2) {
        assert!(
            pair[1].1 <= pair[0].1 + 1e-12,
            "semi-distance medians not monotone: {medians:?}"
        );
        assert!(
            pair[1].2 <= pair[0].2 + 1e-12,
            "symmetric-distance medians not monotone: {medians:?}"
        );
    }

    // Pathwise infection bound on every eradication run of the preset-5 setup.
    let spec = ensemble(1.25, VariantKind::RandomGamma, (-1.0, 11.0));
    let runs = spec.run(fig_u0(), (0.0, 10.0), DT, DT_OUT).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for (k, traj) in runs.iter().enumerate() {
        let scenario = spec.member(k as u64).unwrap();
        let phi = scenario.master.as_ref().unwrap().transformed(1.5);
        let excess = infection_bound_excess(traj, Some(&phi), &spec.params).unwrap();
        worst = worst.max(excess);
        assert!(excess <= 1e-6, "member {k}: bound excess {excess:.3e}");
    }
    println!(
        "[criterion 14] PASS medians (semi) {:?}; max bound excess {worst:.3e}",
        medians.iter().map(|m| m.1).collect::<Vec<_>>()
    );
}
