//! Long-time dynamics: pullback convergence, attractor sampling, the
//! disease-free global solution, heteroclinic tracing, endemic floors,
//! exponential-dichotomy projections, tempered bounds, and the
//! small-perturbation continuity scan.

use std::io::Write;

use rayon::prelude::*;

use crate::integrator::{integrate, integrate_with_stop, positivity_guard, Trajectory};
use crate::linalg::{eigenvalues3, matrix_sign, Mat3, Vec3};
use crate::model::{jacobian, ModelParams, Scenario, SirState, VariantKind};
use crate::noise::SamplePath;
use crate::{lit, Error, Result, Scalar};

/// Deduplication resolution for attractor samples.
const DEDUP_RADIUS: f64 = 1e-4;
/// Offset along the unstable direction used for orbit tracing.
const TRACE_DELTA: f64 = 1e-5;
/// Capture tolerance of `heteroclinic_trace`.
const CAPTURE_TOL: f64 = 1e-6;
/// Absolute ceiling of `ln K(t) / t` for the tempered verdict.
const TEMPERED_THRESHOLD: f64 = 0.05;

/// One pullback run: the state at the anchor time `tau` of the solution
/// started at `tau - horizon` under the correspondingly shifted noise.
#[derive(Clone, Copy, Debug)]
pub struct PullbackRun<T> {
    pub tau: T,
    pub horizon: T,
    pub endpoint: SirState<T>,
}

/// Endpoint at `tau` of the solution started at `tau - horizon` from `u0`,
/// with the noise realization viewed from the shifted origin.
pub fn pullback_endpoint<T: Scalar>(
    scenario: &Scenario<T>,
    tau: T,
    horizon: T,
    u0: SirState<T>,
    dt: T,
) -> Result<SirState<T>> {
    if horizon < T::zero() || !horizon.is_finite() {
        return Err(Error::invalid("pullback horizon must be nonnegative"));
    }
    if horizon == T::zero() {
        return Ok(u0);
    }
    let variant = scenario.variant_shifted(tau - horizon)?;
    let traj = integrate(
        &variant,
        &scenario.params,
        u0,
        (T::zero(), horizon),
        dt,
        horizon,
    )?;
    Ok(*traj.final_state())
}

pub fn pullback_run<T: Scalar>(
    scenario: &Scenario<T>,
    tau: T,
    horizon: T,
    u0: SirState<T>,
    dt: T,
) -> Result<PullbackRun<T>> {
    Ok(PullbackRun {
        tau,
        horizon,
        endpoint: pullback_endpoint(scenario, tau, horizon, u0, dt)?,
    })
}

/// Initial data fed to [`attractor_sample`]: a lattice over `[0, upper]^3`,
/// optionally the equilibria, a ladder of seeds along the unstable direction,
/// and a dense forward trace of the unstable orbit.
#[derive(Clone, Debug)]
pub struct AttractorGrid<T> {
    pub per_axis: usize,
    pub upper: T,
    pub include_equilibria: bool,
    pub unstable_deltas: Vec<T>,
    pub include_unstable_trace: bool,
}

impl<T: Scalar> AttractorGrid<T> {
    /// 5x5x5 lattice over `[0, 2q/a]^3` plus the equilibria and the unstable
    /// orbit trace.
    pub fn default_for(params: &ModelParams<T>) -> Self {
        Self {
            per_axis: 5,
            upper: lit::<T>(2.0) * params.recruitment / params.mortality,
            include_equilibria: true,
            unstable_deltas: Vec::new(),
            include_unstable_trace: true,
        }
    }

    fn initial_states(&self, params: &ModelParams<T>) -> Vec<SirState<T>> {
        let mut out = Vec::new();
        let n = self.per_axis.max(2);
        let step = self.upper / T::from_usize(n - 1).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = step * T::from_usize(i).unwrap();
                    let inf = step * T::from_usize(j).unwrap();
                    let r = step * T::from_usize(k).unwrap();
                    out.push(SirState {
                        susceptible: s,
                        infected: inf,
                        recovered: r,
                    });
                }
            }
        }
        if self.include_equilibria {
            out.push(params.disease_free_equilibrium());
            if let Some(e1) = params.endemic_equilibrium() {
                out.push(e1);
            }
        }
        out
    }
}

/// A finite sample of the pullback attractor fiber at `tau`.
#[derive(Clone, Debug)]
pub struct AttractorSample<T> {
    pub points: Vec<SirState<T>>,
    pub tau: T,
    pub horizon: T,
    /// Largest distance of any sampled point from the absorbing band
    /// `q0/a <= N <= q1/a` (0 when all points are inside).
    pub max_band_deviation: T,
}

/// Samples the attractor fiber at `tau` as the set of pullback endpoints of
/// the grid's initial data, deduplicated at resolution 1e-4.
///
/// When the unstable trace is requested (and the endemic threshold is
/// exceeded) the forward orbit from `E0* + delta v_u`, integrated over the
/// same window, contributes the connecting-orbit points.
pub fn attractor_sample<T: Scalar>(
    scenario: &Scenario<T>,
    tau: T,
    horizon: T,
    grid: &AttractorGrid<T>,
    dt: T,
) -> Result<AttractorSample<T>> {
    let params = &scenario.params;
    let mut raw: Vec<SirState<T>> = grid
        .initial_states(params)
        .into_par_iter()
        .map(|u0| pullback_endpoint(scenario, tau, horizon, u0, dt))
        .collect::<Result<Vec<_>>>()?;

    if let Ok(direction) = unstable_direction(params) {
        for &delta in &grid.unstable_deltas {
            let u0 = seed_along(params, direction, delta)?;
            raw.push(pullback_endpoint(scenario, tau, horizon, u0, dt)?);
        }
        if grid.include_unstable_trace {
            let trace = unstable_orbit_trace(scenario, tau, horizon, dt)?;
            raw.extend_from_slice(trace.states());
        }
    }

    let points = dedup(raw, lit(DEDUP_RADIUS));

    let (n_lo, n_hi) = match scenario
        .bounds
        .and_then(|b| b.q_range(params))
    {
        Some((q0, q1)) => (q0 / params.mortality, q1 / params.mortality),
        None => {
            let n = params.recruitment / params.mortality;
            (n, n)
        }
    };
    let max_band_deviation = points.iter().fold(T::zero(), |acc, p| {
        let n = p.total();
        acc.max(n_lo - n).max(n - n_hi)
    });

    Ok(AttractorSample {
        points,
        tau,
        horizon,
        max_band_deviation,
    })
}

fn seed_along<T: Scalar>(
    params: &ModelParams<T>,
    direction: Vec3<T>,
    delta: T,
) -> Result<SirState<T>> {
    let start = params.disease_free_equilibrium().as_vec3() + direction.scale(delta);
    let guarded = positivity_guard(start, lit::<T>(1e-9) * start.sum().max(T::one()), T::zero())?;
    Ok(SirState::from_vec3(guarded))
}

/// Forward orbit from `E0* + delta v_u` over the sampling window, recorded
/// densely; its states approximate the connecting part of the attractor.
fn unstable_orbit_trace<T: Scalar>(
    scenario: &Scenario<T>,
    tau: T,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let params = &scenario.params;
    let direction = unstable_direction(params)?;
    let u0 = seed_along(params, direction, lit(TRACE_DELTA))?;
    let variant = scenario.variant_shifted(tau - horizon)?;
    let dt_out = dt * lit::<T>(2.0);
    integrate(&variant, params, u0, (T::zero(), horizon), dt, dt_out)
}

/// Greedy spatial-hash deduplication at the given radius; deterministic for a
/// deterministic input order.
fn dedup<T: Scalar>(points: Vec<SirState<T>>, radius: T) -> Vec<SirState<T>> {
    use std::collections::HashMap;
    let mut kept: Vec<SirState<T>> = Vec::new();
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let key = |p: &SirState<T>| -> [i64; 3] {
        let v = p.as_vec3();
        [
            (v.0[0] / radius).floor().to_f64().unwrap() as i64,
            (v.0[1] / radius).floor().to_f64().unwrap() as i64,
            (v.0[2] / radius).floor().to_f64().unwrap() as i64,
        ]
    };
    'outer: for p in points {
        let k = key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let neighbor = [k[0] + dx, k[1] + dy, k[2] + dz];
                    if let Some(ids) = buckets.get(&neighbor) {
                        if ids.iter().any(|&i| kept[i].distance(&p) < radius) {
                            continue 'outer;
                        }
                    }
                }
            }
        }
        buckets.entry(k).or_default().push(kept.len());
        kept.push(p);
    }
    kept
}

/// The disease-free global solution and its truncation control.
#[derive(Clone, Copy, Debug)]
pub struct DiseaseFreeSolution<T> {
    /// `S*(tau) = int_0^H e^{-a s} q(tau - s) ds` by trapezoidal quadrature.
    pub value: T,
    /// Bound `q_max e^{-a H} / a` on the discarded tail.
    pub truncation_bound: T,
}

/// Quadrature of the disease-free susceptible level for a (possibly random)
/// recruitment path. The path must cover `[tau - horizon, tau]` and the
/// horizon must make the tail negligible (`e^{-a H} < 1e-12`).
pub fn disease_free_state<T: Scalar>(
    q_path: &SamplePath<T>,
    mortality: T,
    tau: T,
    horizon: T,
    dt: T,
) -> Result<DiseaseFreeSolution<T>> {
    if mortality <= T::zero() || horizon <= T::zero() || dt <= T::zero() {
        return Err(Error::invalid(
            "disease_free_state requires a > 0, horizon > 0, dt > 0",
        ));
    }
    if (-mortality * horizon).exp() >= lit(1e-12) {
        return Err(Error::invalid(
            "horizon too short: e^{-a H} must be below 1e-12",
        ));
    }
    let n = (horizon / dt).ceil().to_usize().ok_or_else(|| Error::GridOverflow {
        nodes: (horizon / dt).to_f64().unwrap_or(f64::NAN) as u128,
    })?;
    let h = horizon / T::from_usize(n).unwrap();
    let half: T = lit(0.5);

    let mut q_max = T::zero();
    let mut acc = T::zero();
    let mut prev = q_path.value_at(tau)?; // s = 0, weight e^0
    q_max = q_max.max(prev);
    for j in 1..=n {
        let s = h * T::from_usize(j).unwrap();
        let q = q_path.value_at(tau - s)?;
        q_max = q_max.max(q);
        let f = (-mortality * s).exp() * q;
        acc += (prev + f) * half * h;
        prev = f;
    }

    Ok(DiseaseFreeSolution {
        value: acc,
        truncation_bound: q_max * (-mortality * horizon).exp() / mortality,
    })
}

/// Unit eigenvector of the Jacobian at the disease-free equilibrium for the
/// eigenvalue `gamma - a - b - c`, signed so its infected component is
/// positive. Exists exactly when the endemic threshold is exceeded.
pub fn unstable_direction<T: Scalar>(params: &ModelParams<T>) -> Result<Vec3<T>> {
    let removal = params.removal_rate();
    if params.transmission <= removal {
        return Err(Error::NoUnstableDirection);
    }
    let e0 = params.disease_free_equilibrium();
    let jac = jacobian(params, &e0, T::zero())?;
    let lambda = params.transmission - removal;
    let mut shifted = jac;
    for i in 0..3 {
        shifted.0[i][i] -= lambda;
    }
    // The null space of the rank-2 shifted matrix is spanned by the cross
    // product of its two independent rows.
    let candidates = [
        shifted.row(0).cross(&shifted.row(1)),
        shifted.row(0).cross(&shifted.row(2)),
        shifted.row(1).cross(&shifted.row(2)),
    ];
    let best = candidates
        .into_iter()
        .max_by(|a, b| {
            a.norm()
                .partial_cmp(&b.norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    if best.norm() == T::zero() {
        return Err(Error::invalid("degenerate unstable eigenspace"));
    }
    let mut v = best.normalized();
    if v.0[1] < T::zero() {
        v = v.scale(-T::one());
    }
    if v.0[1] <= T::zero() {
        return Err(Error::invalid("unstable direction has no infected component"));
    }
    Ok(v)
}

/// Traces the heteroclinic orbit of the deterministic model from
/// `E0* + delta v_u` until it lands within 1e-6 of the endemic equilibrium.
///
/// A negative `delta` makes the seed leave the octant and is rejected by the
/// positivity guard; running out of `t_max` is a convergence error.
pub fn heteroclinic_trace<T: Scalar>(
    params: &ModelParams<T>,
    delta: T,
    dt: T,
    dt_out: T,
    t_max: T,
) -> Result<Trajectory<T>> {
    let direction = unstable_direction(params)?;
    let target = params
        .endemic_equilibrium()
        .ok_or(Error::NoUnstableDirection)?;
    let u0 = seed_along(params, direction, delta)?;
    let tol: T = lit(CAPTURE_TOL);
    let variant = crate::model::ModelVariant::deterministic();
    let (traj, reached) = integrate_with_stop(
        &variant,
        params,
        u0,
        (T::zero(), t_max),
        dt,
        dt_out,
        |_, state| state.distance(&target) < tol,
    )?;
    if !reached {
        return Err(Error::NonConvergence {
            t_max: t_max.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(traj)
}

/// Minimum of the infected component over an ensemble and a tail window.
pub fn endemic_floor<T: Scalar>(trajectories: &[Trajectory<T>], window: (T, T)) -> Result<T> {
    let floors = endemic_floor_per_member(trajectories, window)?;
    floors
        .into_iter()
        .min_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::invalid("endemic_floor requires at least one trajectory"))
}

/// Per-trajectory minima of the infected component over the window.
pub fn endemic_floor_per_member<T: Scalar>(
    trajectories: &[Trajectory<T>],
    window: (T, T),
) -> Result<Vec<T>> {
    let (t1, t2) = window;
    if t2 < t1 {
        return Err(Error::invalid("endemic_floor window must have t1 <= t2"));
    }
    trajectories
        .iter()
        .map(|traj| {
            if t1 < traj.t0() || t2 > traj.final_time() + traj.dt_out() * lit(1e-6) {
                return Err(Error::OutOfWindow {
                    t: t1.to_f64().unwrap_or(f64::NAN),
                    start: traj.t0().to_f64().unwrap_or(f64::NAN),
                    end: traj.final_time().to_f64().unwrap_or(f64::NAN),
                });
            }
            let slack: T = lit(1e-6);
            let lo = ((t1 - traj.t0()) / traj.dt_out() - slack)
                .ceil()
                .max(T::zero())
                .to_usize()
                .unwrap();
            let hi = ((t2 - traj.t0()) / traj.dt_out() + slack)
                .floor()
                .to_usize()
                .unwrap()
                .min(traj.len() - 1);
            let mut min = T::infinity();
            for k in lo..=hi.max(lo) {
                min = min.min(traj.state(k).infected);
            }
            Ok(min)
        })
        .collect()
}

/// CSV dump of per-member floors with header `seed,floor`.
pub fn write_floor_csv<T: Scalar, W: Write>(rows: &[(u64, T)], mut w: W) -> Result<()> {
    writeln!(w, "seed,floor")?;
    for (seed, floor) in rows {
        writeln!(w, "{},{:.16e}", seed, floor.to_f64().unwrap())?;
    }
    Ok(())
}

/// Spectral projections and rates of a hyperbolic 3x3 matrix.
#[derive(Clone, Debug)]
pub struct DichotomyReport<T> {
    pub stable_projection: Mat3<T>,
    pub unstable_projection: Mat3<T>,
    /// `-max Re(lambda)` over the stable spectrum, when nonempty.
    pub decay_rate: Option<T>,
    /// `min Re(lambda)` over the unstable spectrum, when nonempty.
    pub growth_rate: Option<T>,
    pub unstable_rank: usize,
}

impl<T: Scalar> DichotomyReport<T> {
    /// Plain-text block with matrices row-major at 17 significant digits.
    pub fn format_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("unstable rank: {}\n", self.unstable_rank));
        match self.decay_rate {
            Some(r) => out.push_str(&format!("decay rate: {:.16e}\n", r.to_f64().unwrap())),
            None => out.push_str("decay rate: none\n"),
        }
        match self.growth_rate {
            Some(r) => out.push_str(&format!("growth rate: {:.16e}\n", r.to_f64().unwrap())),
            None => out.push_str("growth rate: none\n"),
        }
        for (name, m) in [
            ("stable projection", &self.stable_projection),
            ("unstable projection", &self.unstable_projection),
        ] {
            out.push_str(&format!("{name}:\n"));
            for row in &m.0 {
                let cells: Vec<String> = row
                    .iter()
                    .map(|x| format!("{:.16e}", x.to_f64().unwrap()))
                    .collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

/// Spectral projections onto the stable/unstable eigenspaces of `a` via the
/// matrix sign function. Errors when an eigenvalue sits within 1e-9 of the
/// imaginary axis.
pub fn dichotomy_projections<T: Scalar>(a: &Mat3<T>) -> Result<DichotomyReport<T>> {
    let eig = eigenvalues3(a);
    let band: T = lit(1e-9);
    if eig.iter().any(|l| l.re.abs() < band) {
        return Err(Error::NonHyperbolicMatrix);
    }
    let sign = matrix_sign(a)?;
    let half: T = lit(0.5);
    let identity = Mat3::identity();
    let unstable_projection = (identity + sign).scale(half);
    let stable_projection = (identity - sign).scale(half);

    let unstable_rank = eig.iter().filter(|l| l.re > T::zero()).count();
    let rank_from_trace = unstable_projection.trace();
    if (rank_from_trace - T::from_usize(unstable_rank).unwrap()).abs() > lit(1e-6) {
        return Err(Error::NonHyperbolicMatrix);
    }

    let decay_rate = eig
        .iter()
        .filter(|l| l.re < T::zero())
        .map(|l| l.re)
        .fold(None, |acc: Option<T>, re| Some(acc.map_or(re, |a| a.max(re))))
        .map(|re| -re);
    let growth_rate = eig
        .iter()
        .filter(|l| l.re > T::zero())
        .map(|l| l.re)
        .fold(None, |acc: Option<T>, re| Some(acc.map_or(re, |a| a.min(re))));

    Ok(DichotomyReport {
        stable_projection,
        unstable_projection,
        decay_rate,
        growth_rate,
        unstable_rank,
    })
}

/// Linearization of the model around any disease-free state `(S, 0, 0)`;
/// constant in `S`, so it doubles as the matrix governing the disease-free
/// global solution of the random-recruitment tier.
pub fn disease_free_linearization<T: Scalar>(params: &ModelParams<T>) -> Mat3<T> {
    jacobian(params, &params.disease_free_equilibrium(), T::zero())
        .expect("disease-free state has positive population")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemperedVerdict {
    Tempered,
    NotTempered,
}

/// The series `ln K(t) / t = (1/t) int_0^t Phi` on a log-spaced grid and the
/// verdict on whether the bound looks tempered.
#[derive(Clone, Debug)]
pub struct TemperedReport<T> {
    pub series: Vec<(T, T)>,
    pub verdict: TemperedVerdict,
}

/// Evaluates `ln K(t)/t` for `K(t) = exp(int_0^t Phi)` on a log-spaced grid
/// over four decades up to `horizon`. Tempered means the final value is below
/// 0.05 in absolute value and the magnitude has decreased into the last
/// decade: its median there does not exceed the median over the preceding
/// grid. (A per-decade comparison would be noise-dominated: the running
/// average is itself an integral, so adjacent decades are strongly coupled.)
pub fn tempered_check<T: Scalar>(
    phi_path: &SamplePath<T>,
    horizon: T,
    points_per_decade: usize,
) -> Result<TemperedReport<T>> {
    if horizon <= T::zero() || points_per_decade == 0 {
        return Err(Error::invalid(
            "tempered_check requires horizon > 0 and points_per_decade > 0",
        ));
    }
    let decades = 4usize;
    let n = decades * points_per_decade;
    let ten: T = lit(10.0);
    let mut series = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let exponent =
            -T::from_usize(n - j).unwrap() / T::from_usize(points_per_decade).unwrap();
        let t = horizon * ten.powf(exponent);
        let avg = phi_path.integral(T::zero(), t)? / t;
        series.push((t, avg));
    }

    let magnitudes_in = |lo: T, hi: T| -> Vec<T> {
        series
            .iter()
            .filter(|(t, _)| *t > lo && *t <= hi)
            .map(|(_, v)| v.abs())
            .collect()
    };
    let last = median(&magnitudes_in(horizon / ten, horizon));
    let previous = median(&magnitudes_in(T::neg_infinity(), horizon / ten));
    let final_value = series.last().unwrap().1.abs();

    let verdict = if final_value < lit(TEMPERED_THRESHOLD) && last <= previous {
        TemperedVerdict::Tempered
    } else {
        TemperedVerdict::NotTempered
    };

    Ok(TemperedReport { series, verdict })
}

fn median<T: Scalar>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n == 0 {
        return T::zero();
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * lit::<T>(0.5)
    }
}

/// Largest relative excess of the infected series over the pathwise Gronwall
/// bound `I(t) <= I(0) exp(-(a+b+c-gamma) t + int_0^t Phi)`, the consequence
/// of `I' <= (-(a+b+c) + gamma + Phi) I` via `S/N <= 1`.
///
/// `phi_path`, when present, must be the already-transformed perturbation on
/// the trajectory's clock; `None` means `Phi = 0`. Returns a value `<= slack`
/// when the bound holds within that relative slack.
pub fn infection_bound_excess<T: Scalar>(
    traj: &Trajectory<T>,
    phi_path: Option<&SamplePath<T>>,
    params: &ModelParams<T>,
) -> Result<T> {
    let i0 = traj.state(0).infected;
    if i0 <= T::zero() {
        return Ok(T::zero());
    }
    let rate = params.removal_rate() - params.transmission;
    let mut worst = T::neg_infinity();
    for k in 0..traj.len() {
        let t = traj.time(k) - traj.t0();
        let phi_integral = match phi_path {
            Some(path) => path.integral(traj.t0(), traj.time(k))?,
            None => T::zero(),
        };
        let bound = i0 * (-rate * t + phi_integral).exp();
        let excess = traj.state(k).infected / bound - T::one();
        worst = worst.max(excess);
    }
    Ok(worst)
}

/// One measurement of the continuity scan.
#[derive(Clone, Copy, Debug)]
pub struct ContinuityRow<T> {
    pub eta: T,
    pub seed: u64,
    pub dist_semi: T,
    pub dist_sym: T,
}

#[derive(Clone, Debug)]
pub struct ContinuityScan<T> {
    pub rows: Vec<ContinuityRow<T>>,
}

impl<T: Scalar> ContinuityScan<T> {
    /// Median distances per eta, in the eta order of the scan.
    pub fn medians(&self) -> Vec<(T, T, T)> {
        let mut etas: Vec<T> = Vec::new();
        for row in &self.rows {
            if !etas.contains(&row.eta) {
                etas.push(row.eta);
            }
        }
        etas.into_iter()
            .map(|eta| {
                let semi: Vec<T> = self
                    .rows
                    .iter()
                    .filter(|r| r.eta == eta)
                    .map(|r| r.dist_semi)
                    .collect();
                let sym: Vec<T> = self
                    .rows
                    .iter()
                    .filter(|r| r.eta == eta)
                    .map(|r| r.dist_sym)
                    .collect();
                (eta, median(&semi), median(&sym))
            })
            .collect()
    }

    /// CSV dump of the per-eta medians with header `eta,dist_semi,dist_sym`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eta,dist_semi,dist_sym")?;
        for (eta, semi, sym) in self.medians() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                eta.to_f64().unwrap(),
                semi.to_f64().unwrap(),
                sym.to_f64().unwrap()
            )?;
        }
        Ok(())
    }
}

/// Configuration of [`perturbation_continuity_scan`].
#[derive(Clone, Debug)]
pub struct ContinuityScanConfig<T> {
    pub tau: T,
    pub horizon: T,
    pub dt: T,
    pub path_dt: T,
    pub grid: AttractorGrid<T>,
}

impl<T: Scalar> ContinuityScanConfig<T> {
    pub fn default_for(params: &ModelParams<T>) -> Self {
        let mut grid = AttractorGrid::default_for(params);
        grid.per_axis = 4;
        grid.include_unstable_trace = false;
        Self {
            tau: T::zero(),
            horizon: lit(12.0),
            dt: lit(1e-3),
            path_dt: lit(1e-3),
            grid,
        }
    }
}

/// Distance scan of the attractor under the bounded transmission perturbation
/// `gamma -> gamma + eta * phi(z)` with `phi(z) = (2/pi) atan(z)`.
///
/// For each seed one noise realization is drawn and reused across the whole
/// eta grid, so per-seed distances shrink with eta rather than being
/// re-randomized. The unperturbed attractor is represented by the equilibria
/// plus (past the endemic threshold) the traced connecting orbit; distances
/// to orbits are measured against the polyline, not just its vertices.
pub fn perturbation_continuity_scan<T: Scalar>(
    params: &ModelParams<T>,
    eta_grid: &[T],
    seeds: &[u64],
    cfg: &ContinuityScanConfig<T>,
) -> Result<ContinuityScan<T>>
where
    rand_distr::StandardNormal: rand_distr::Distribution<T>,
{
    use crate::model::NoiseBounds;
    use crate::noise::{ou_path, OuConfig};

    for &eta in eta_grid {
        if eta < T::zero() || eta > T::one() {
            return Err(Error::invalid("eta grid must lie in [0, 1]"));
        }
    }

    // Unperturbed reference: equilibria plus the connecting orbit when the
    // endemic point exists.
    let mut reference = PointsAndSegments::new();
    reference.push_point(params.disease_free_equilibrium().as_vec3());
    if let Some(e1) = params.endemic_equilibrium() {
        reference.push_point(e1.as_vec3());
        let trace = heteroclinic_trace(
            params,
            lit(TRACE_DELTA),
            cfg.dt,
            cfg.dt * lit::<T>(10.0),
            cfg.horizon * lit::<T>(20.0),
        )?;
        reference.push_polyline(trace.states().iter().map(|s| s.as_vec3()));
    }

    let rows: Vec<ContinuityRow<T>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<ContinuityRow<T>>> {
            let pad = T::one();
            let window = (cfg.tau - cfg.horizon - pad, cfg.tau + pad);
            let ou_cfg = OuConfig::new(window.0, window.1, cfg.path_dt, seed)?;
            let master = ou_path(&ou_cfg)?;
            let mut out = Vec::with_capacity(eta_grid.len());
            for &eta in eta_grid {
                let scenario = if eta == T::zero() {
                    Scenario::new(VariantKind::Deterministic, *params, None, None)?
                } else {
                    Scenario::new(
                        VariantKind::RandomGamma,
                        *params,
                        Some(NoiseBounds::gamma_only(eta)?),
                        Some(master.clone()),
                    )?
                };
                let sample =
                    attractor_sample(&scenario, cfg.tau, cfg.horizon, &cfg.grid, cfg.dt)?;

                let mut perturbed = PointsAndSegments::new();
                for p in &sample.points {
                    perturbed.push_point(p.as_vec3());
                }
                if params.endemic_equilibrium().is_some() {
                    let trace = unstable_orbit_trace(&scenario, cfg.tau, cfg.horizon, cfg.dt)?;
                    perturbed
                        .push_polyline(trace.states().iter().map(|s| s.as_vec3()));
                }

                let dist_semi = perturbed.sup_distance_to(&reference);
                let dist_sym = dist_semi.max(reference.sup_distance_to(&perturbed));
                out.push(ContinuityRow {
                    eta,
                    seed,
                    dist_semi,
                    dist_sym,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(ContinuityScan { rows })
}

/// A point cloud plus polyline segments, with Hausdorff semi-distance
/// helpers. Distances from a set are measured at its sample points; distances
/// to a set are measured against points and segments.
struct PointsAndSegments<T> {
    points: Vec<Vec3<T>>,
    segments: Vec<(Vec3<T>, Vec3<T>)>,
}

impl<T: Scalar> PointsAndSegments<T> {
    fn new() -> Self {
        Self {
            points: Vec::new(),
            segments: Vec::new(),
        }
    }

    fn push_point(&mut self, p: Vec3<T>) {
        self.points.push(p);
    }

    fn push_polyline(&mut self, mut vertices: impl Iterator<Item = Vec3<T>>) {
        if let Some(mut prev) = vertices.next() {
            self.points.push(prev);
            for v in vertices {
                self.segments.push((prev, v));
                self.points.push(v);
                prev = v;
            }
        }
    }

    fn distance_from_point(&self, p: Vec3<T>) -> T {
        let mut best = T::infinity();
        for q in &self.points {
            best = best.min((p - *q).norm());
        }
        for (a, b) in &self.segments {
            best = best.min(point_segment_distance(p, *a, *b));
        }
        best
    }

    /// `sup_{x in self} dist(x, other)`, evaluated at this set's sample points.
    fn sup_distance_to(&self, other: &Self) -> T {
        self.points
            .iter()
            .fold(T::zero(), |acc, p| acc.max(other.distance_from_point(*p)))
    }
}

fn point_segment_distance<T: Scalar>(p: Vec3<T>, a: Vec3<T>, b: Vec3<T>) -> T {
    let ab = b - a;
    let denom = ab.dot(&ab);
    if denom == T::zero() {
        return (p - a).norm();
    }
    let t = (p - a).dot(&ab) / denom;
    let t = t.max(T::zero()).min(T::one());
    (p - (a + ab.scale(t))).norm()
}
