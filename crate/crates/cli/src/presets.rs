//! Canonical experiment presets: ids 3..8 cover the deterministic,
//! random-transmission, and random-recruitment tiers at the eradication
//! (gamma = 1.25) and endemic (gamma = 5) parameter points, all with
//! a = 1.5, b = 0.5, c = 0.7, q = 5 and initial condition (25, 1, 0).

use sir_dynamics::model::{ModelParams, NoiseBounds, SirState, VariantKind};

use crate::config::{ConfigError, ExperimentConfig};

pub fn figure_preset(id: u8) -> Result<ExperimentConfig, ConfigError> {
    let (kind, gamma, t_end) = match id {
        3 => (VariantKind::Deterministic, 1.25, 30.0),
        4 => (VariantKind::Deterministic, 5.0, 20.0),
        5 => (VariantKind::RandomGamma, 1.25, 10.0),
        6 => (VariantKind::RandomGamma, 5.0, 40.0),
        7 => (VariantKind::RandomGammaRandomQ, 1.25, 10.0),
        8 => (VariantKind::RandomGammaRandomQ, 5.0, 40.0),
        other => {
            return Err(ConfigError(format!(
                "unknown figure preset {other} (expected 3..=8)"
            )))
        }
    };
    let bounds = match kind {
        VariantKind::RandomGamma => Some(NoiseBounds::gamma_only(1.5).expect("valid amplitude")),
        VariantKind::RandomGammaRandomQ => {
            Some(NoiseBounds::gamma_and_q(1.5, 0.5).expect("valid amplitudes"))
        }
        _ => None,
    };
    Ok(ExperimentConfig {
        kind,
        params: ModelParams::new(5.0, 1.5, 0.5, 0.7, gamma).expect("valid preset parameters"),
        bounds,
        u0: SirState::new(25.0, 1.0, 0.0).expect("valid initial condition"),
        t_span: (0.0, t_end),
        dt: 1e-3,
        dt_out: 1e-2,
        seed: 42,
        realizations: 5,
        pullback_horizon: 40.0,
        out_dir: None,
    })
}
