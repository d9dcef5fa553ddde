//! The SIR model family with vital dynamics and reinfection: parameters,
//! states, vector fields, equilibria, stability classification, and the
//! eradication/endemic regime report.
//!
//! The modified model reads
//!
//! ```text
//! S' = q - a S + b I - G(t) S I / (S + I + R)
//! I' = -(a + b + c) I + G(t) S I / (S + I + R)
//! R' = c I - a R
//! ```
//!
//! where `G(t)` is the (possibly noise-perturbed) transmission coefficient and
//! `q` the (possibly noise-perturbed) recruitment rate. The classical model
//! drops recruitment, mortality and reinfection and conserves the total
//! population.

use num_complex::Complex;

use crate::linalg::{eigenvalues3, Mat3, Vec3};
use crate::noise::{bounded_transform, SamplePath};
use crate::{lit, Error, Result, Scalar};

/// Residual below which a point counts as an equilibrium.
const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Half-width of the non-hyperbolicity band on eigenvalue real parts.
const HYPERBOLICITY_BAND: f64 = 1e-9;

/// Model rates. All five must be strictly positive and finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// Recruitment rate `q` (new susceptible individuals per unit time).
    pub recruitment: T,
    /// Natural (non-disease) death rate `a`.
    pub mortality: T,
    /// Rate `b` of recovery without immunity (infected back to susceptible).
    pub reinfection: T,
    /// Recovery rate `c` (infected to recovered).
    pub recovery: T,
    /// Transmission coefficient `gamma`.
    pub transmission: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(recruitment: T, mortality: T, reinfection: T, recovery: T, transmission: T) -> Result<Self> {
        let params = Self {
            recruitment,
            mortality,
            reinfection,
            recovery,
            transmission,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.recruitment, "recruitment rate q"),
            (self.mortality, "death rate a"),
            (self.reinfection, "reinfection rate b"),
            (self.recovery, "recovery rate c"),
            (self.transmission, "transmission coefficient gamma"),
        ];
        for (value, name) in checks {
            if !value.is_finite() {
                return Err(Error::NonFiniteInput("model parameters"));
            }
            if value <= T::zero() {
                return Err(Error::invalid(format!("{name} must be > 0, got {value}")));
            }
        }
        Ok(())
    }

    /// Total outflow rate `a + b + c` from the infected compartment; the
    /// eradication/endemic threshold for the transmission coefficient.
    pub fn removal_rate(&self) -> T {
        self.mortality + self.reinfection + self.recovery
    }

    /// Basic reproduction number `gamma / (a + b + c)`.
    pub fn r0(&self) -> T {
        self.transmission / self.removal_rate()
    }

    /// Disease-free equilibrium `(q/a, 0, 0)`.
    pub fn disease_free_equilibrium(&self) -> SirState<T> {
        SirState {
            susceptible: self.recruitment / self.mortality,
            infected: T::zero(),
            recovered: T::zero(),
        }
    }

    /// Endemic equilibrium, present exactly when `gamma > a + b + c`.
    pub fn endemic_equilibrium(&self) -> Option<SirState<T>> {
        let removal = self.removal_rate();
        if self.transmission <= removal {
            return None;
        }
        let q = self.recruitment;
        let a = self.mortality;
        let c = self.recovery;
        let gamma = self.transmission;
        let susceptible = q * removal / (gamma * a);
        let infected = q * (gamma - removal) / (gamma * (a + c));
        let recovered = c / a * infected;
        Some(SirState {
            susceptible,
            infected,
            recovered,
        })
    }
}

/// One point `(S, I, R)` in the nonnegative octant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SirState<T> {
    pub susceptible: T,
    pub infected: T,
    pub recovered: T,
}

impl<T: Scalar> SirState<T> {
    pub fn new(susceptible: T, infected: T, recovered: T) -> Result<Self> {
        let state = Self {
            susceptible,
            infected,
            recovered,
        };
        if !state.as_vec3().is_finite() {
            return Err(Error::NonFiniteInput("SIR state"));
        }
        if susceptible < T::zero() || infected < T::zero() || recovered < T::zero() {
            return Err(Error::invalid(format!(
                "state components must be nonnegative, got ({susceptible}, {infected}, {recovered})"
            )));
        }
        Ok(state)
    }

    /// Total population `N = S + I + R`.
    pub fn total(&self) -> T {
        self.susceptible + self.infected + self.recovered
    }

    pub fn as_vec3(&self) -> Vec3<T> {
        Vec3([self.susceptible, self.infected, self.recovered])
    }

    pub(crate) fn from_vec3(v: Vec3<T>) -> Self {
        Self {
            susceptible: v.0[0],
            infected: v.0[1],
            recovered: v.0[2],
        }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.as_vec3() - other.as_vec3()).norm()
    }
}

/// Amplitudes of the bounded noise transforms.
///
/// `gamma_amplitude` is `d` in `Phi_gamma = (2d/pi) atan(z)` and `q_amplitude`
/// is `e` in the analogous recruitment transform. Keeping `d <= gamma` makes
/// the perturbed transmission strictly positive; the canonical experiments
/// deliberately exceed it (`gamma = 1.25`, `d = 1.5`), which the octant
/// invariance tolerates, so it is not enforced here. `e <= q` is required for
/// the recruitment to stay positive and is checked where parameters are known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseBounds<T> {
    pub gamma_amplitude: T,
    pub q_amplitude: Option<T>,
}

impl<T: Scalar> NoiseBounds<T> {
    pub fn gamma_only(d: T) -> Result<Self> {
        if !d.is_finite() || d <= T::zero() {
            return Err(Error::invalid("noise amplitude d must be > 0 and finite"));
        }
        Ok(Self {
            gamma_amplitude: d,
            q_amplitude: None,
        })
    }

    pub fn gamma_and_q(d: T, e: T) -> Result<Self> {
        let mut bounds = Self::gamma_only(d)?;
        if !e.is_finite() || e <= T::zero() {
            return Err(Error::invalid("noise amplitude e must be > 0 and finite"));
        }
        bounds.q_amplitude = Some(e);
        Ok(bounds)
    }

    /// `gamma_0 = gamma - d`, the guaranteed lower bound of the perturbed
    /// transmission coefficient.
    pub fn gamma_floor(&self, params: &ModelParams<T>) -> T {
        params.transmission - self.gamma_amplitude
    }

    /// `(q_0, q_1) = (q - e, q + e)` when a recruitment amplitude is set.
    pub fn q_range(&self, params: &ModelParams<T>) -> Option<(T, T)> {
        self.q_amplitude
            .map(|e| (params.recruitment - e, params.recruitment + e))
    }

    fn validate_against(&self, params: &ModelParams<T>) -> Result<()> {
        if let Some((q0, _)) = self.q_range(params) {
            if q0 <= T::zero() {
                return Err(Error::invalid(
                    "recruitment amplitude e must satisfy e < q so that q + Phi_q stays positive",
                ));
            }
        }
        Ok(())
    }
}

/// Which of the model tiers is being integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VariantKind {
    ClassicalSir,
    Deterministic,
    RandomGamma,
    RandomGammaRandomQ,
}

impl VariantKind {
    pub fn is_random(&self) -> bool {
        matches!(self, VariantKind::RandomGamma | VariantKind::RandomGammaRandomQ)
    }

    pub fn has_random_q(&self) -> bool {
        matches!(self, VariantKind::RandomGammaRandomQ)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VariantKind::ClassicalSir => "classical",
            VariantKind::Deterministic => "deterministic",
            VariantKind::RandomGamma => "random_gamma",
            VariantKind::RandomGammaRandomQ => "random_gamma_random_q",
        }
    }
}

impl std::fmt::Display for VariantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A model tier together with the noise bindings it needs: a variant tag plus
/// the sample paths supplying `Phi(theta_t w)` and the random recruitment.
#[derive(Clone, Debug)]
pub struct ModelVariant<T> {
    kind: VariantKind,
    bounds: Option<NoiseBounds<T>>,
    phi_path: Option<SamplePath<T>>,
    q_path: Option<SamplePath<T>>,
}

impl<T: Scalar> ModelVariant<T> {
    pub fn classical() -> Self {
        Self {
            kind: VariantKind::ClassicalSir,
            bounds: None,
            phi_path: None,
            q_path: None,
        }
    }

    pub fn deterministic() -> Self {
        Self {
            kind: VariantKind::Deterministic,
            bounds: None,
            phi_path: None,
            q_path: None,
        }
    }

    pub fn random_gamma(phi_path: SamplePath<T>, bounds: NoiseBounds<T>) -> Self {
        Self {
            kind: VariantKind::RandomGamma,
            bounds: Some(bounds),
            phi_path: Some(phi_path),
            q_path: None,
        }
    }

    pub fn random_gamma_random_q(
        phi_path: SamplePath<T>,
        q_path: SamplePath<T>,
        bounds: NoiseBounds<T>,
    ) -> Result<Self> {
        if bounds.q_amplitude.is_none() {
            return Err(Error::invalid(
                "the random-recruitment variant requires the amplitude e",
            ));
        }
        Ok(Self {
            kind: VariantKind::RandomGammaRandomQ,
            bounds: Some(bounds),
            phi_path: Some(phi_path),
            q_path: Some(q_path),
        })
    }

    pub fn kind(&self) -> VariantKind {
        self.kind
    }

    pub fn bounds(&self) -> Option<&NoiseBounds<T>> {
        self.bounds.as_ref()
    }

    pub fn phi_path(&self) -> Option<&SamplePath<T>> {
        self.phi_path.as_ref()
    }

    pub fn q_path(&self) -> Option<&SamplePath<T>> {
        self.q_path.as_ref()
    }

    /// The transmission perturbation `Phi(theta_t w)` at time `t` (zero for
    /// the noiseless tiers).
    pub fn phi_value(&self, t: T) -> Result<T> {
        match (&self.phi_path, &self.bounds) {
            (Some(path), Some(bounds)) => {
                Ok(bounded_transform(path.value_at(t)?, bounds.gamma_amplitude))
            }
            _ => Ok(T::zero()),
        }
    }

    /// Effective recruitment at time `t`: `q` for constant-recruitment tiers,
    /// `q + Phi_q(z(t))` for the random-recruitment tier, and 0 for the
    /// classical model.
    pub fn q_value(&self, params: &ModelParams<T>, t: T) -> Result<T> {
        match self.kind {
            VariantKind::ClassicalSir => Ok(T::zero()),
            VariantKind::Deterministic | VariantKind::RandomGamma => Ok(params.recruitment),
            VariantKind::RandomGammaRandomQ => {
                let path = self.q_path.as_ref().expect("checked at construction");
                let e = self
                    .bounds
                    .as_ref()
                    .and_then(|b| b.q_amplitude)
                    .expect("checked at construction");
                Ok(params.recruitment + bounded_transform(path.value_at(t)?, e))
            }
        }
    }

    /// Effective transmission coefficient `gamma + Phi(theta_t w)` at `t`.
    pub fn gamma_value(&self, params: &ModelParams<T>, t: T) -> Result<T> {
        Ok(params.transmission + self.phi_value(t)?)
    }

    /// The same variant viewed from the shifted time origin `s` (both noise
    /// bindings shifted together).
    pub fn shifted(&self, s: T) -> Result<Self> {
        Ok(Self {
            kind: self.kind,
            bounds: self.bounds,
            phi_path: self.phi_path.as_ref().map(|p| p.shift(s)).transpose()?,
            q_path: self.q_path.as_ref().map(|p| p.shift(s)).transpose()?,
        })
    }

    /// True when every bound noise path covers `[a, b]`.
    pub fn covers(&self, a: T, b: T) -> bool {
        self.phi_path.iter().all(|p| p.covers(a, b)) && self.q_path.iter().all(|p| p.covers(a, b))
    }
}

/// A model tier plus parameters bound to one master noise realization; the
/// configuration the canonical experiments run. Both bounded transforms read
/// the same Ornstein-Uhlenbeck realization.
#[derive(Clone, Debug)]
pub struct Scenario<T> {
    pub kind: VariantKind,
    pub params: ModelParams<T>,
    pub bounds: Option<NoiseBounds<T>>,
    pub master: Option<SamplePath<T>>,
}

impl<T: Scalar> Scenario<T> {
    pub fn new(
        kind: VariantKind,
        params: ModelParams<T>,
        bounds: Option<NoiseBounds<T>>,
        master: Option<SamplePath<T>>,
    ) -> Result<Self> {
        params.validate()?;
        if kind.is_random() {
            let bounds = bounds
                .ok_or_else(|| Error::invalid(format!("variant {kind} requires noise bounds")))?;
            bounds.validate_against(&params)?;
            if kind.has_random_q() && bounds.q_amplitude.is_none() {
                return Err(Error::invalid("variant random_gamma_random_q requires e"));
            }
            if master.is_none() {
                return Err(Error::invalid(format!("variant {kind} requires a noise path")));
            }
            Ok(Self {
                kind,
                params,
                bounds: Some(bounds),
                master,
            })
        } else {
            Ok(Self {
                kind,
                params,
                bounds,
                master: None,
            })
        }
    }

    /// The variant with noise bindings anchored at the original origin.
    pub fn variant(&self) -> ModelVariant<T> {
        self.variant_shifted(T::zero())
            .expect("zero shift stays inside the window")
    }

    /// The variant with both noise bindings viewed from origin `s`.
    pub fn variant_shifted(&self, s: T) -> Result<ModelVariant<T>> {
        match self.kind {
            VariantKind::ClassicalSir => Ok(ModelVariant::classical()),
            VariantKind::Deterministic => Ok(ModelVariant::deterministic()),
            VariantKind::RandomGamma => {
                let path = self.master.as_ref().unwrap().shift(s)?;
                Ok(ModelVariant::random_gamma(path, self.bounds.unwrap()))
            }
            VariantKind::RandomGammaRandomQ => {
                let path = self.master.as_ref().unwrap().shift(s)?;
                ModelVariant::random_gamma_random_q(path.clone(), path, self.bounds.unwrap())
            }
        }
    }
}

/// Right-hand side of the chosen model tier at state `u`.
///
/// `phi_value` and `q_value` are the already-evaluated noise terms; they are
/// ignored (forced to the deterministic values) by tiers that do not use them.
/// The interaction term `S I / N` is defined as 0 on the invariant plane
/// `I = 0` even when `N = 0`.
pub fn vector_field<T: Scalar>(
    kind: VariantKind,
    params: &ModelParams<T>,
    u: &SirState<T>,
    phi_value: T,
    q_value: T,
) -> Result<Vec3<T>> {
    if !u.as_vec3().is_finite() {
        return Err(Error::NonFiniteInput("state"));
    }
    if !phi_value.is_finite() || !q_value.is_finite() {
        return Err(Error::NonFiniteInput("noise value"));
    }

    let s = u.susceptible;
    let i = u.infected;
    let r = u.recovered;
    let n = u.total();

    let gamma = match kind {
        VariantKind::ClassicalSir | VariantKind::Deterministic => params.transmission,
        VariantKind::RandomGamma | VariantKind::RandomGammaRandomQ => {
            params.transmission + phi_value
        }
    };

    let interaction = if i == T::zero() {
        T::zero()
    } else if n == T::zero() {
        return Err(Error::DegeneratePopulation);
    } else {
        gamma * s * i / n
    };

    let a = params.mortality;
    let b = params.reinfection;
    let c = params.recovery;

    match kind {
        VariantKind::ClassicalSir => Ok(Vec3([
            -interaction,
            interaction - c * i,
            c * i,
        ])),
        _ => {
            let q = match kind {
                VariantKind::RandomGammaRandomQ => q_value,
                _ => params.recruitment,
            };
            Ok(Vec3([
                q - a * s + b * i - interaction,
                -(a + b + c) * i + interaction,
                c * i - a * r,
            ]))
        }
    }
}

/// Jacobian of the vital-dynamics vector field at `u`, with the transmission
/// coefficient perturbed to `gamma + phi_value`. Rows are ordered (S, I, R).
pub fn jacobian<T: Scalar>(
    params: &ModelParams<T>,
    u: &SirState<T>,
    phi_value: T,
) -> Result<Mat3<T>> {
    if !u.as_vec3().is_finite() || !phi_value.is_finite() {
        return Err(Error::NonFiniteInput("jacobian input"));
    }
    let n = u.total();
    if n == T::zero() {
        return Err(Error::DegeneratePopulation);
    }
    let gamma = params.transmission + phi_value;
    let a = params.mortality;
    let b = params.reinfection;
    let c = params.recovery;
    let s = u.susceptible;
    let i = u.infected;
    let r = u.recovered;
    let n2 = n * n;

    let di = gamma * i * (i + r) / n2;
    let ds = gamma * s * (s + r) / n2;
    let dsi = gamma * s * i / n2;

    Ok(Mat3([
        [-a - di, b - ds, dsi],
        [di, -(a + b + c) + ds, -dsi],
        [T::zero(), c, -a],
    ]))
}

/// All equilibria of the deterministic vital-dynamics model: the disease-free
/// point always, plus the endemic point when `gamma > a + b + c`.
pub fn equilibria<T: Scalar>(params: &ModelParams<T>) -> Result<Vec<SirState<T>>> {
    params.validate()?;
    let mut out = vec![params.disease_free_equilibrium()];
    if let Some(endemic) = params.endemic_equilibrium() {
        out.push(endemic);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityClass {
    ExponentiallyStable,
    SaddleUnstableDim1,
    NonHyperbolic,
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StabilityClass::ExponentiallyStable => "exponentially stable",
            StabilityClass::SaddleUnstableDim1 => "saddle (1-dim unstable manifold)",
            StabilityClass::NonHyperbolic => "non-hyperbolic",
        };
        f.write_str(s)
    }
}

/// Stability of an equilibrium of the deterministic model.
///
/// Classifies by the eigenvalues of the Jacobian and cross-checks the stable
/// case against the Routh-Hurwitz conditions on the expanded characteristic
/// cubic; a disagreement between the two paths is an error, not a preference.
pub fn classify_equilibrium<T: Scalar>(
    params: &ModelParams<T>,
    point: &SirState<T>,
) -> Result<StabilityClass> {
    let residual = vector_field(
        VariantKind::Deterministic,
        params,
        point,
        T::zero(),
        params.recruitment,
    )?
    .norm();
    if residual > lit(EQUILIBRIUM_TOL) {
        return Err(Error::NotAnEquilibrium {
            residual: residual.to_f64().unwrap_or(f64::NAN),
        });
    }

    let jac = jacobian(params, point, T::zero())?;
    let eig = eigenvalues3(&jac);

    let band: T = lit(HYPERBOLICITY_BAND);
    if eig.iter().any(|l| l.re.abs() < band) {
        return Ok(StabilityClass::NonHyperbolic);
    }

    let unstable = eig.iter().filter(|l| l.re > T::zero()).count();
    let class = match unstable {
        0 => StabilityClass::ExponentiallyStable,
        1 => StabilityClass::SaddleUnstableDim1,
        n => {
            return Err(Error::ClassificationDisagreement(format!(
                "unexpected {n}-dimensional unstable eigenspace"
            )))
        }
    };

    // Routh-Hurwitz on lambda^3 + a2 lambda^2 + a1 lambda + a0: every root in
    // the open left half-plane iff a2 > 0, a0 > 0 and a2 a1 > a0.
    let a2 = -jac.trace();
    let a1 = jac.minor_sum();
    let a0 = -jac.det();
    let routh_stable = a2 > T::zero() && a0 > T::zero() && a2 * a1 > a0;
    let eigen_stable = class == StabilityClass::ExponentiallyStable;
    if routh_stable != eigen_stable {
        return Err(Error::ClassificationDisagreement(format!(
            "eigenvalues say stable = {eigen_stable}, Routh-Hurwitz says stable = {routh_stable}"
        )));
    }

    Ok(class)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    EradicationGuaranteed,
    EndemicGuaranteed,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::EradicationGuaranteed => "EradicationGuaranteed",
            Verdict::EndemicGuaranteed => "EndemicGuaranteed",
            Verdict::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumInfo<T> {
    pub point: SirState<T>,
    pub eigenvalues: [Complex<T>; 3],
    pub class: StabilityClass,
}

/// Regime classification: equilibria with their spectra, the threshold
/// ratios, and the eradication/endemic verdict the theory supports.
#[derive(Clone, Debug)]
pub struct RegimeReport<T> {
    pub equilibria: Vec<EquilibriumInfo<T>>,
    /// `gamma / (a + b + c)`.
    pub r0: T,
    /// `gamma_0 / (a + b + c)` for the random-transmission tiers.
    pub r1: Option<T>,
    /// `gamma_0 q_0 / (q_1 (a + b + c))` for the random-recruitment tier.
    pub r2: Option<T>,
    pub verdict: Verdict,
}

/// Builds the regime report for a variant. `bounds` must be present exactly
/// for the random tiers. The verdict is a pure function of the inputs; no
/// noise realization enters.
pub fn regime_report<T: Scalar>(
    params: &ModelParams<T>,
    bounds: Option<&NoiseBounds<T>>,
    kind: VariantKind,
) -> Result<RegimeReport<T>> {
    params.validate()?;
    if kind.is_random() && bounds.is_none() {
        return Err(Error::invalid(format!("variant {kind} requires noise bounds")));
    }
    if !kind.is_random() && bounds.is_some() {
        return Err(Error::invalid(format!(
            "variant {kind} takes no noise bounds"
        )));
    }
    if kind.has_random_q() {
        let has_e = bounds.and_then(|b| b.q_amplitude).is_some();
        if !has_e {
            return Err(Error::invalid("variant random_gamma_random_q requires e"));
        }
    }

    let removal = params.removal_rate();
    let gamma = params.transmission;
    let r0 = params.r0();
    let r1 = bounds.map(|b| b.gamma_floor(params) / removal);
    let r2 = bounds.and_then(|b| {
        b.q_range(params)
            .map(|(q0, q1)| b.gamma_floor(params) * q0 / (q1 * removal))
    });

    let endemic_criterion = match kind {
        VariantKind::ClassicalSir | VariantKind::Deterministic => gamma > removal,
        VariantKind::RandomGamma => bounds.unwrap().gamma_floor(params) > removal,
        VariantKind::RandomGammaRandomQ => {
            let b = bounds.unwrap();
            let (q0, q1) = b.q_range(params).unwrap();
            b.gamma_floor(params) * q0 / q1 > removal
        }
    };

    let verdict = if gamma < removal {
        Verdict::EradicationGuaranteed
    } else if endemic_criterion {
        Verdict::EndemicGuaranteed
    } else {
        Verdict::Indeterminate
    };

    let equilibria = equilibria(params)?
        .into_iter()
        .map(|point| {
            let class = classify_equilibrium(params, &point)?;
            let eigenvalues = eigenvalues3(&jacobian(params, &point, T::zero())?);
            Ok(EquilibriumInfo {
                point,
                eigenvalues,
                class,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RegimeReport {
        equilibria,
        r0,
        r1,
        r2,
        verdict,
    })
}
