//! Flat `key=value` experiment configuration with `#` comments.
//!
//! Every key is required except the noise amplitudes `d` and `e` (needed by
//! the random variants only) and `out_dir` (which can come from the `--out`
//! flag or the `SIR_DYNAMICS_OUT` environment variable).

use std::collections::HashMap;
use std::path::PathBuf;

use sir_dynamics::model::{ModelParams, NoiseBounds, SirState, VariantKind};

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: VariantKind,
    pub params: ModelParams<f64>,
    pub bounds: Option<NoiseBounds<f64>>,
    pub u0: SirState<f64>,
    pub t_span: (f64, f64),
    pub dt: f64,
    pub dt_out: f64,
    pub seed: u64,
    pub realizations: usize,
    pub pullback_horizon: f64,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: HashMap<&str, &str> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return fail(format!("line {}: expected key=value, got `{line}`", lineno + 1));
            };
            if map.insert(key.trim(), value.trim()).is_some() {
                return fail(format!("line {}: duplicate key `{}`", lineno + 1, key.trim()));
            }
        }

        let get = |key: &str| -> Result<&str, ConfigError> {
            map.get(key)
                .copied()
                .ok_or_else(|| ConfigError(format!("missing required key `{key}`")))
        };
        let get_f64 = |key: &str| -> Result<f64, ConfigError> {
            get(key)?
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("key `{key}` is not a number")))
        };

        let kind = match get("variant")? {
            "classical" => VariantKind::ClassicalSir,
            "deterministic" => VariantKind::Deterministic,
            "random_gamma" => VariantKind::RandomGamma,
            "random_gamma_random_q" => VariantKind::RandomGammaRandomQ,
            other => {
                return fail(format!(
                    "unknown variant `{other}` (expected classical, deterministic, random_gamma, random_gamma_random_q)"
                ))
            }
        };

        let params = ModelParams::new(
            get_f64("q")?,
            get_f64("a")?,
            get_f64("b")?,
            get_f64("c")?,
            get_f64("gamma")?,
        )
        .map_err(|e| ConfigError(e.to_string()))?;

        let bounds = match kind {
            VariantKind::RandomGamma => {
                let d = get_f64("d")?;
                Some(NoiseBounds::gamma_only(d).map_err(|e| ConfigError(e.to_string()))?)
            }
            VariantKind::RandomGammaRandomQ => {
                let d = get_f64("d")?;
                let e = get_f64("e")?;
                let b = NoiseBounds::gamma_and_q(d, e).map_err(|e| ConfigError(e.to_string()))?;
                if e >= params.recruitment {
                    return fail("noise amplitude e must satisfy e < q so recruitment stays positive");
                }
                Some(b)
            }
            _ => None,
        };

        let u0 = SirState::new(get_f64("s0")?, get_f64("i0")?, get_f64("r0")?)
            .map_err(|e| ConfigError(e.to_string()))?;

        let t_span = (get_f64("t_start")?, get_f64("t_end")?);
        if !(t_span.0.is_finite() && t_span.1.is_finite()) || t_span.1 <= t_span.0 {
            return fail("t_span requires finite t_start < t_end");
        }
        let dt = get_f64("dt")?;
        let dt_out = get_f64("dt_out")?;
        if dt <= 0.0 || dt_out <= 0.0 {
            return fail("dt and dt_out must be > 0");
        }

        let seed = get("seed")?
            .parse::<u64>()
            .map_err(|_| ConfigError("key `seed` is not a u64".into()))?;
        let realizations = get("realizations")?
            .parse::<usize>()
            .map_err(|_| ConfigError("key `realizations` is not an integer".into()))?;
        if realizations == 0 {
            return fail("realizations must be >= 1");
        }
        let pullback_horizon = get_f64("pullback_horizon")?;
        if pullback_horizon < 0.0 {
            return fail("pullback_horizon must be >= 0");
        }

        let out_dir = map.get("out_dir").map(|s| PathBuf::from(s.trim()));

        let known = [
            "variant", "q", "a", "b", "c", "gamma", "d", "e", "s0", "i0", "r0", "t_start",
            "t_end", "dt", "dt_out", "seed", "realizations", "pullback_horizon", "out_dir",
        ];
        for key in map.keys() {
            if !known.contains(key) {
                return fail(format!("unknown key `{key}`"));
            }
        }

        Ok(Self {
            kind,
            params,
            bounds,
            u0,
            t_span,
            dt,
            dt_out,
            seed,
            realizations,
            pullback_horizon,
            out_dir,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serializes back to the flat key=value format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("variant = {}\n", self.kind.as_str()));
        out.push_str(&format!("q = {}\n", self.params.recruitment));
        out.push_str(&format!("a = {}\n", self.params.mortality));
        out.push_str(&format!("b = {}\n", self.params.reinfection));
        out.push_str(&format!("c = {}\n", self.params.recovery));
        out.push_str(&format!("gamma = {}\n", self.params.transmission));
        if let Some(b) = &self.bounds {
            out.push_str(&format!("d = {}\n", b.gamma_amplitude));
            if let Some(e) = b.q_amplitude {
                out.push_str(&format!("e = {e}\n"));
            }
        }
        out.push_str(&format!("s0 = {}\n", self.u0.susceptible));
        out.push_str(&format!("i0 = {}\n", self.u0.infected));
        out.push_str(&format!("r0 = {}\n", self.u0.recovered));
        out.push_str(&format!("t_start = {}\n", self.t_span.0));
        out.push_str(&format!("t_end = {}\n", self.t_span.1));
        out.push_str(&format!("dt = {}\n", self.dt));
        out.push_str(&format!("dt_out = {}\n", self.dt_out));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("realizations = {}\n", self.realizations));
        out.push_str(&format!("pullback_horizon = {}\n", self.pullback_horizon));
        if let Some(dir) = &self.out_dir {
            out.push_str(&format!("out_dir = {}\n", dir.display()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# canonical random-gamma setup
variant = random_gamma
q = 5.0
a = 1.5
b = 0.5
c = 0.7
gamma = 1.25
d = 1.5
s0 = 25
i0 = 1
r0 = 0
t_start = 0
t_end = 10
dt = 1e-3
dt_out = 1e-2
seed = 42
realizations = 5
pullback_horizon = 40
";

    #[test]
    fn parses_the_canonical_config() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        assert_eq!(cfg.kind, VariantKind::RandomGamma);
        assert_eq!(cfg.params.transmission, 1.25);
        assert_eq!(cfg.bounds.unwrap().gamma_amplitude, 1.5);
        assert_eq!(cfg.realizations, 5);
        assert!(cfg.out_dir.is_none());
    }

    #[test]
    fn round_trips_through_to_text() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again.params.transmission, cfg.params.transmission);
        assert_eq!(again.kind, cfg.kind);
    }

    #[test]
    fn rejects_invalid_rates_naming_the_invariant() {
        let bad = GOOD.replace("a = 1.5", "a = 0");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("death rate a"), "{err}");
    }

    #[test]
    fn rejects_missing_and_unknown_keys() {
        let missing = GOOD.replace("gamma = 1.25\n", "");
        assert!(ExperimentConfig::parse(&missing)
            .unwrap_err()
            .to_string()
            .contains("gamma"));

        let unknown = format!("{GOOD}mystery = 1\n");
        assert!(ExperimentConfig::parse(&unknown)
            .unwrap_err()
            .to_string()
            .contains("mystery"));
    }

    #[test]
    fn random_q_requires_both_amplitudes() {
        let rq = GOOD.replace("variant = random_gamma", "variant = random_gamma_random_q");
        assert!(ExperimentConfig::parse(&rq).unwrap_err().to_string().contains("`e`"));
        let ok = format!("{}e = 0.5\n", rq);
        assert!(ExperimentConfig::parse(&ok).is_ok());
    }
}
