//! Pathwise fixed-step integration of the (noise-forced) SIR systems and of
//! their variational equations.
//!
//! The scheme is classical fourth-order Runge-Kutta with the driving noise
//! evaluated by linear interpolation of the grid path at stage times, a
//! positivity guard after every step, and output thinned to `dt_out`. Given
//! the same inputs the result is bit-identical on every run.

use std::io::Write;

use crate::linalg::{Mat3, Vec3};
use crate::model::{jacobian, vector_field, ModelParams, ModelVariant, SirState, VariantKind};
use crate::{lit, Error, Result, Scalar};

/// Derived quantities recorded with every output sample.
#[derive(Clone, Copy, Debug)]
pub struct AuxSample<T> {
    /// Total population `N = S + I + R`.
    pub total: T,
    /// Effective transmission coefficient at the sample time.
    pub gamma_eff: T,
    /// Effective recruitment at the sample time (0 for the classical model).
    pub q_eff: T,
}

/// Time series of states on the uniform output grid `t0 + k * dt_out`.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    t0: T,
    dt_out: T,
    states: Vec<SirState<T>>,
    aux: Vec<AuxSample<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt_out(&self) -> T {
        self.dt_out
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt_out * T::from_usize(k).unwrap()
    }

    pub fn state(&self, k: usize) -> &SirState<T> {
        &self.states[k]
    }

    pub fn aux(&self, k: usize) -> &AuxSample<T> {
        &self.aux[k]
    }

    pub fn states(&self) -> &[SirState<T>] {
        &self.states
    }

    pub fn final_time(&self) -> T {
        self.time(self.states.len() - 1)
    }

    pub fn final_state(&self) -> &SirState<T> {
        self.states.last().expect("trajectory is never empty")
    }

    /// Index of the output sample at time `t`, which must lie on the grid.
    pub fn index_of(&self, t: T) -> Result<usize> {
        let pos = (t - self.t0) / self.dt_out;
        let k = pos.round();
        let idx = k.to_usize().ok_or_else(|| Error::OutOfWindow {
            t: t.to_f64().unwrap_or(f64::NAN),
            start: self.t0.to_f64().unwrap_or(f64::NAN),
            end: self.final_time().to_f64().unwrap_or(f64::NAN),
        })?;
        let tol = lit::<T>(1e-6).max(pos.abs() * T::epsilon() * lit(64.0));
        if idx >= self.states.len() || (pos - k).abs() > tol {
            return Err(Error::OutOfWindow {
                t: t.to_f64().unwrap_or(f64::NAN),
                start: self.t0.to_f64().unwrap_or(f64::NAN),
                end: self.final_time().to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(idx)
    }

    /// State at grid time `t`.
    pub fn state_at(&self, t: T) -> Result<&SirState<T>> {
        Ok(&self.states[self.index_of(t)?])
    }

    /// State at arbitrary `t` inside the span, linearly interpolated.
    pub fn interpolate(&self, t: T) -> Result<SirState<T>> {
        let pos = (t - self.t0) / self.dt_out;
        let last = T::from_usize(self.states.len() - 1).unwrap();
        let slack = lit::<T>(1e-6).max(last * T::epsilon() * lit(64.0));
        if pos < -slack || pos > last + slack {
            return Err(Error::OutOfWindow {
                t: t.to_f64().unwrap_or(f64::NAN),
                start: self.t0.to_f64().unwrap_or(f64::NAN),
                end: self.final_time().to_f64().unwrap_or(f64::NAN),
            });
        }
        let pos = pos.max(T::zero()).min(last);
        let idx = pos.floor().to_usize().unwrap().min(self.states.len().saturating_sub(2));
        if self.states.len() == 1 {
            return Ok(self.states[0]);
        }
        let frac = pos - T::from_usize(idx).unwrap();
        let a = self.states[idx].as_vec3();
        let b = self.states[idx + 1].as_vec3();
        Ok(SirState::from_vec3(a + (b - a).scale(frac)))
    }

    /// CSV dump with header `t,S,I,R,N,gamma_eff,q_eff`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,S,I,R,N,gamma_eff,q_eff")?;
        let f = |x: T| x.to_f64().unwrap();
        for (k, (state, aux)) in self.states.iter().zip(&self.aux).enumerate() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                f(self.time(k)),
                f(state.susceptible),
                f(state.infected),
                f(state.recovered),
                f(aux.total),
                f(aux.gamma_eff),
                f(aux.q_eff),
            )?;
        }
        Ok(())
    }
}

/// Clamps components in `[-tol_neg, 0)` to zero; components below `-tol_neg`
/// are a genuine escape from the octant and an error. `t` only labels the
/// error.
pub fn positivity_guard<T: Scalar>(u: Vec3<T>, tol_neg: T, t: T) -> Result<Vec3<T>> {
    const NAMES: [&str; 3] = ["S", "I", "R"];
    let mut out = u;
    for (k, x) in out.0.iter_mut().enumerate() {
        if *x < T::zero() {
            if *x < -tol_neg {
                return Err(Error::PositivityViolation {
                    t: t.to_f64().unwrap_or(f64::NAN),
                    component: NAMES[k],
                    value: x.to_f64().unwrap_or(f64::NAN),
                });
            }
            *x = T::zero();
        }
    }
    Ok(out)
}

fn tol_neg<T: Scalar>(n: T) -> T {
    lit::<T>(1e-9) * n.max(T::one())
}

struct GridSpec {
    stride: usize,
    n_out: usize,
}

fn grid_spec<T: Scalar>(t_span: (T, T), dt: T, dt_out: T) -> Result<GridSpec> {
    let (t_start, t_end) = t_span;
    if !(t_start.is_finite() && t_end.is_finite() && dt.is_finite() && dt_out.is_finite()) {
        return Err(Error::NonFiniteInput("time grid"));
    }
    if dt <= T::zero() {
        return Err(Error::invalid("integration step dt must be > 0"));
    }
    if t_end < t_start {
        return Err(Error::invalid("t_span must satisfy t_start <= t_end"));
    }
    // Alignment tolerances scale with the working precision so exact f32
    // grids are not rejected by f64-scale constants.
    let ratio = dt_out / dt;
    let stride = ratio.round();
    let stride_tol = lit::<T>(1e-9).max(ratio * T::epsilon() * lit(16.0));
    if stride < T::one() || (ratio - stride).abs() > stride_tol {
        return Err(Error::invalid(
            "dt_out must be a positive integer multiple of dt",
        ));
    }
    let span = (t_end - t_start) / dt_out;
    let n_out = span.round();
    let span_tol = lit::<T>(1e-6).max(span.abs() * T::epsilon() * lit(16.0));
    if (span - n_out).abs() > span_tol {
        return Err(Error::invalid("t_span length must be a multiple of dt_out"));
    }
    Ok(GridSpec {
        stride: stride.to_usize().unwrap(),
        n_out: n_out.to_usize().unwrap(),
    })
}

/// One classical RK4 step of `u' = f(t, u)` from `t` with step `h`.
fn rk4_step<T: Scalar>(
    t: T,
    u: Vec3<T>,
    h: T,
    f: &mut impl FnMut(T, Vec3<T>) -> Result<Vec3<T>>,
) -> Result<Vec3<T>> {
    let half = h * lit::<T>(0.5);
    let sixth = h / lit::<T>(6.0);
    let two: T = lit(2.0);
    let k1 = f(t, u)?;
    let k2 = f(t + half, u + k1.scale(half))?;
    let k3 = f(t + half, u + k2.scale(half))?;
    let k4 = f(t + h, u + k3.scale(h))?;
    Ok(u + (k1 + (k2 + k3).scale(two) + k4).scale(sixth))
}

/// Integrates the chosen variant from `u0` over `t_span`, sampling the output
/// every `dt_out` (an integer multiple of `dt`). Noise paths bound to the
/// variant must cover the span.
pub fn integrate<T: Scalar>(
    variant: &ModelVariant<T>,
    params: &ModelParams<T>,
    u0: SirState<T>,
    t_span: (T, T),
    dt: T,
    dt_out: T,
) -> Result<Trajectory<T>> {
    integrate_with_stop(variant, params, u0, t_span, dt, dt_out, |_, _| false).map(|(traj, _)| traj)
}

/// As [`integrate`], but stops early when `stop(t, state)` is true at an
/// output sample. Returns the (possibly truncated) trajectory and whether the
/// stop condition fired.
pub fn integrate_with_stop<T: Scalar>(
    variant: &ModelVariant<T>,
    params: &ModelParams<T>,
    u0: SirState<T>,
    t_span: (T, T),
    dt: T,
    dt_out: T,
    mut stop: impl FnMut(T, &SirState<T>) -> bool,
) -> Result<(Trajectory<T>, bool)> {
    params.validate()?;
    let grid = grid_spec(t_span, dt, dt_out)?;
    let t0 = t_span.0;
    if grid.n_out > 0 && !variant.covers(t0, t_span.1) {
        return Err(Error::OutOfWindow {
            t: t_span.1.to_f64().unwrap_or(f64::NAN),
            start: t0.to_f64().unwrap_or(f64::NAN),
            end: t_span.1.to_f64().unwrap_or(f64::NAN),
        });
    }

    let kind = variant.kind();
    let mut field = |t: T, v: Vec3<T>| -> Result<Vec3<T>> {
        let phi = variant.phi_value(t)?;
        let q = variant.q_value(params, t)?;
        vector_field(kind, params, &SirState::from_vec3(v), phi, q)
    };

    let mut states = Vec::with_capacity(grid.n_out + 1);
    let mut aux = Vec::with_capacity(grid.n_out + 1);
    let mut record =
        |t: T, state: &SirState<T>, variant: &ModelVariant<T>| -> Result<()> {
            aux.push(AuxSample {
                total: state.total(),
                gamma_eff: variant.gamma_value(params, t)?,
                q_eff: variant.q_value(params, t)?,
            });
            states.push(*state);
            Ok(())
        };

    let mut u = u0.as_vec3();
    u = positivity_guard(u, tol_neg(u.sum()), t0)?;
    let state0 = SirState::from_vec3(u);
    record(t0, &state0, variant)?;
    let mut stopped = stop(t0, &state0);

    let mut step_index = 0usize;
    'outer: for _ in 0..grid.n_out {
        if stopped {
            break;
        }
        for _ in 0..grid.stride {
            let t = t0 + dt * T::from_usize(step_index).unwrap();
            u = rk4_step(t, u, dt, &mut field)?;
            if !u.is_finite() {
                return Err(Error::NonFinite {
                    t: (t + dt).to_f64().unwrap_or(f64::NAN),
                });
            }
            u = positivity_guard(u, tol_neg(u.sum()), t + dt)?;
            step_index += 1;
        }
        let t = t0 + dt * T::from_usize(step_index).unwrap();
        let state = SirState::from_vec3(u);
        record(t, &state, variant)?;
        if stop(t, &state) {
            stopped = true;
            break 'outer;
        }
    }

    Ok((
        Trajectory {
            t0,
            dt_out,
            states,
            aux,
        },
        stopped,
    ))
}

/// Fundamental matrix solution of the variational equation along a base
/// trajectory: `M' = J(t) M`, `M(0) = I`, recorded every `dt`.
#[derive(Clone, Debug)]
pub struct FundamentalMatrixTrajectory<T> {
    t0: T,
    dt: T,
    matrices: Vec<Mat3<T>>,
}

impl<T: Scalar> FundamentalMatrixTrajectory<T> {
    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt * T::from_usize(k).unwrap()
    }

    pub fn matrix(&self, k: usize) -> &Mat3<T> {
        &self.matrices[k]
    }

    pub fn final_matrix(&self) -> &Mat3<T> {
        self.matrices.last().expect("never empty")
    }
}

/// Integrates the linearization of the variant along `base` over `t_span`
/// with the same RK4 scheme as the nonlinear flow. The base trajectory must
/// cover the span; it is sampled by linear interpolation at stage times.
pub fn integrate_variational<T: Scalar>(
    variant: &ModelVariant<T>,
    params: &ModelParams<T>,
    base: &Trajectory<T>,
    t_span: (T, T),
    dt: T,
) -> Result<FundamentalMatrixTrajectory<T>> {
    params.validate()?;
    let grid = grid_spec(t_span, dt, dt)?;
    let t0 = t_span.0;

    let coeff = |t: T| -> Result<Mat3<T>> {
        let state = base.interpolate(t)?;
        jacobian(params, &state, variant.phi_value(t)?)
    };

    // RK4 on the matrix equation M' = J(t) M.
    let half = dt * lit::<T>(0.5);
    let sixth = dt / lit::<T>(6.0);
    let two: T = lit(2.0);
    let mut m = Mat3::identity();
    let mut matrices = Vec::with_capacity(grid.n_out + 1);
    matrices.push(m);
    for step in 0..grid.n_out {
        let t = t0 + dt * T::from_usize(step).unwrap();
        let j1 = coeff(t)?;
        let j_mid = coeff(t + half)?;
        let j4 = coeff(t + dt)?;
        let k1 = j1 * m;
        let k2 = j_mid * (m + k1.scale(half));
        let k3 = j_mid * (m + k2.scale(half));
        let k4 = j4 * (m + k3.scale(dt));
        m = m + (k1 + (k2 + k3).scale(two) + k4).scale(sixth);
        if !m.is_finite() {
            return Err(Error::NonFinite {
                t: (t + dt).to_f64().unwrap_or(f64::NAN),
            });
        }
        // Flows of smooth fields preserve orientation.
        if m.det() <= T::zero() {
            return Err(Error::invalid(
                "fundamental matrix lost positive orientation",
            ));
        }
        matrices.push(m);
    }

    Ok(FundamentalMatrixTrajectory { t0, dt, matrices })
}

/// Supremum over the output grid of the deviation of the integrated total
/// population from its closed form.
///
/// For constant-recruitment variants the closed form is
/// `N(t) = e^{-a(t - t0)} N0 + (q/a)(1 - e^{-a(t - t0)})`; for the
/// random-recruitment tier the comparison is against a refined trapezoidal
/// quadrature of the convolution `int e^{-a(t-s)} q(s) ds`.
pub fn total_population_check<T: Scalar>(
    traj: &Trajectory<T>,
    variant: &ModelVariant<T>,
    params: &ModelParams<T>,
) -> Result<T> {
    let a = params.mortality;
    let n0 = traj.state(0).total();
    let mut sup = T::zero();

    match variant.kind() {
        VariantKind::ClassicalSir => {
            for k in 0..traj.len() {
                sup = sup.max((traj.state(k).total() - n0).abs());
            }
        }
        VariantKind::Deterministic | VariantKind::RandomGamma => {
            let q_over_a = params.recruitment / a;
            for k in 0..traj.len() {
                let t = traj.time(k) - traj.t0();
                let decay = (-a * t).exp();
                let expected = decay * n0 + q_over_a * (T::one() - decay);
                sup = sup.max((traj.state(k).total() - expected).abs());
            }
        }
        VariantKind::RandomGammaRandomQ => {
            // Refine each output interval so the trapezoid error stays well
            // below the 1e-6 comparison scale. Sub-nodes must land on the
            // noise grid nodes, where the interpolated forcing has kinks.
            let per_node = variant
                .q_path()
                .map(|p| (traj.dt_out() / p.dt()).round().max(T::one()))
                .unwrap_or_else(T::one)
                .to_usize()
                .unwrap_or(1);
            let refine = per_node * 4;
            let h = traj.dt_out() / T::from_usize(refine).unwrap();
            let decay_h = (-a * h).exp();
            let half: T = lit(0.5);
            let mut conv = T::zero();
            let mut q_prev = variant.q_value(params, traj.t0())?;
            sup = (traj.state(0).total() - n0).abs();
            for k in 1..traj.len() {
                for j in 0..refine {
                    let t_next = traj.time(k - 1)
                        + h * T::from_usize(j + 1).unwrap();
                    let q_next = variant.q_value(params, t_next)?;
                    conv = conv * decay_h + (decay_h * q_prev + q_next) * half * h;
                    q_prev = q_next;
                }
                let t = traj.time(k) - traj.t0();
                let expected = (-a * t).exp() * n0 + conv;
                sup = sup.max((traj.state(k).total() - expected).abs());
            }
        }
    }
    Ok(sup)
}
