//! Run configuration: one TOML file drives every subcommand so a scenario
//! (spectrum -> domain -> probe -> PME) reproduces end to end.

use conewedge_core::cross_section::{
    fd_spectrum, interval_spectrum, BoundaryCondition, Spectrum, WarpData,
};
use conewedge_core::error::Error as CoreError;
use conewedge_core::indicial::gamma_window;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cross_section: CrossSectionConfig,
    #[serde(default)]
    pub warp: WarpConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub extension: ExtensionConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub pme: PmeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSectionConfig {
    pub kind: String,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub bc: BoundaryCondition,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multiplicities: Vec<usize>,
}

fn default_n() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpConfig {
    pub phi_prime0: f64,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self { phi_prime0: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub modes: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { modes: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { delta: Some(0.5), gamma: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionConfig {
    /// neumann | maximal | minimal
    pub preset: String,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self { preset: "neumann".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nodes: usize,
    pub theta: f64,
    pub rays_deg: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples_per_decade: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            x_min: 1e-5,
            x_max: 10.0,
            nodes: 2048,
            theta: 0.4,
            rays_deg: vec![90.0, 135.0],
            lambda_min: 1.0,
            lambda_max: 1e4,
            samples_per_decade: 1,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmeConfig {
    pub m: f64,
    pub x_min: f64,
    pub nodes: usize,
    pub modes: usize,
    pub tau: f64,
    pub horizon: f64,
    /// none | const:<c> | logistic:<a>,<b>
    pub forcing: String,
    /// constant:<c> | cosine:<c>,<a> | tip-cosine:<c>,<a>
    pub initial: String,
    pub snapshots: usize,
}

impl Default for PmeConfig {
    fn default() -> Self {
        Self {
            m: 2.0,
            x_min: 1e-5,
            nodes: 257,
            modes: 4,
            tau: 1e-3,
            horizon: 0.1,
            forcing: "none".into(),
            initial: "constant:1.0".into(),
            snapshots: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Known-key schema used to list every unknown key, not just the first.
fn known_keys() -> BTreeMap<&'static str, Vec<&'static str>> {
    let mut m = BTreeMap::new();
    m.insert(
        "cross_section",
        vec!["kind", "L", "bc", "n", "eigenvalues", "multiplicities"],
    );
    m.insert("warp", vec!["phi_prime0"]);
    m.insert("truncation", vec!["modes"]);
    m.insert("weight", vec!["delta", "gamma"]);
    m.insert("extension", vec!["preset"]);
    m.insert(
        "probe",
        vec![
            "x_min",
            "x_max",
            "nodes",
            "theta",
            "rays_deg",
            "lambda_min",
            "lambda_max",
            "samples_per_decade",
            "seed",
        ],
    );
    m.insert(
        "pme",
        vec!["m", "x_min", "nodes", "modes", "tau", "horizon", "forcing", "initial", "snapshots"],
    );
    m.insert("output", vec!["dir"]);
    m
}

fn collect_unknown_keys(value: &toml::Value, violations: &mut Vec<String>) {
    let schema = known_keys();
    if let Some(table) = value.as_table() {
        for (section, body) in table {
            match schema.get(section.as_str()) {
                None => violations.push(format!("unknown section [{section}]")),
                Some(keys) => {
                    if let Some(inner) = body.as_table() {
                        for key in inner.keys() {
                            if !keys.contains(&key.as_str()) {
                                violations.push(format!("unknown key {section}.{key}"));
                            }
                        }
                    }
                }
            }
        }
    }
}

impl RunConfig {
    /// Parses and validates, reporting every violation rather than the
    /// first.
    pub fn parse(text: &str) -> Result<Self, CoreError> {
        let mut violations = Vec::new();
        let value: toml::Value = toml::from_str(text)
            .map_err(|e| CoreError::Config(vec![format!("TOML syntax: {e}")]))?;
        collect_unknown_keys(&value, &mut violations);
        let config: RunConfig = match value.try_into() {
            Ok(c) => c,
            Err(e) => {
                violations.push(format!("structure: {e}"));
                return Err(CoreError::Config(violations));
            }
        };
        config.validate(&mut violations);
        if violations.is_empty() {
            Ok(config)
        } else {
            Err(CoreError::Config(violations))
        }
    }

    fn validate(&self, violations: &mut Vec<String>) {
        match self.cross_section.kind.as_str() {
            "interval" => {
                match self.cross_section.length {
                    None => violations
                        .push("cross_section.L is required for kind = \"interval\"".into()),
                    Some(l) if l <= 0.0 => violations.push(format!(
                        "cross_section.L = {l} violates the interval rule L > 0"
                    )),
                    _ => {}
                }
                if self.cross_section.n != 1 {
                    violations.push(
                        "cross_section.n must be 1 for interval cross-sections".into(),
                    );
                }
            }
            "tabulated" => {
                if self.cross_section.eigenvalues.is_empty() {
                    violations.push("cross_section.eigenvalues must be nonempty".into());
                }
                // Reuse the spectrum constructor so the message cites the
                // module rule.
                if let Err(e) = self.spectrum_unchecked() {
                    violations.push(format!("cross_section spectrum invariant: {e}"));
                }
            }
            other => violations.push(format!(
                "cross_section.kind = {other:?}; expected \"interval\" or \"tabulated\""
            )),
        }
        if self.truncation.modes < 1 {
            violations.push("truncation.modes must be at least 1".into());
        }
        match (self.weight.delta, self.weight.gamma) {
            (Some(_), Some(_)) => {
                violations.push("weight: set exactly one of delta or gamma, not both".into())
            }
            (None, None) => violations.push("weight: one of delta or gamma is required".into()),
            (Some(d), None) => {
                if let Ok(spectrum) = self.spectrum_unchecked() {
                    if spectrum.bc() == BoundaryCondition::Neumann && spectrum.modes() >= 2 {
                        match gamma_window(&spectrum) {
                            Ok(w) if !w.is_admissible(d) => violations.push(format!(
                                "weight.delta = {d} violates the gamma-window rule: delta must lie in (0, {}) off the exclusions {:?}",
                                w.delta_max, w.exclusions
                            )),
                            _ => {}
                        }
                    }
                }
            }
            _ => {}
        }
        if !matches!(self.extension.preset.as_str(), "neumann" | "maximal" | "minimal") {
            violations.push(format!(
                "extension.preset = {:?}; expected neumann | maximal | minimal",
                self.extension.preset
            ));
        }
        if !(self.probe.theta > 0.0 && self.probe.theta < std::f64::consts::PI) {
            violations.push(format!(
                "probe.theta = {} must lie in (0, pi)",
                self.probe.theta
            ));
        }
        for &r in &self.probe.rays_deg {
            let rad = r.to_radians();
            if rad < self.probe.theta - 1e-12
                || rad > 2.0 * std::f64::consts::PI - self.probe.theta + 1e-12
            {
                violations.push(format!(
                    "probe ray {r} deg leaves the sector [theta, 2 pi - theta]"
                ));
            }
        }
        if self.probe.nodes < 256 {
            violations.push(format!("probe.nodes = {} must be at least 256", self.probe.nodes));
        }
        if !(self.probe.x_min > 0.0 && self.probe.x_min < 1.0 && self.probe.x_max > 1.0) {
            violations.push("probe grid needs 0 < x_min < 1 < x_max".into());
        }
        if self.pme.m <= 0.0 {
            violations.push("pme.m must be positive".into());
        }
        if self.pme.x_min > 1e-4 || self.pme.x_min <= 0.0 {
            violations.push(format!(
                "pme.x_min = {} violates the wedge-grid rule x_min in (0, 1e-4]",
                self.pme.x_min
            ));
        }
        if self.pme.tau <= 0.0 {
            violations.push("pme.tau must be positive".into());
        }
        if parse_forcing(&self.pme.forcing).is_none() {
            violations.push(format!(
                "pme.forcing = {:?}; expected none | const:<c> | logistic:<a>,<b>",
                self.pme.forcing
            ));
        }
        if parse_initial(&self.pme.initial).is_none() {
            violations.push(format!(
                "pme.initial = {:?}; expected constant:<c> | cosine:<c>,<a> | tip-cosine:<c>,<a>",
                self.pme.initial
            ));
        }
    }

    fn spectrum_unchecked(&self) -> Result<Spectrum, CoreError> {
        match self.cross_section.kind.as_str() {
            "interval" => interval_spectrum(
                self.cross_section.length.unwrap_or(0.0),
                self.cross_section.bc,
                self.truncation.modes,
            ),
            _ => {
                let evs = self.cross_section.eigenvalues.clone();
                let mults = if self.cross_section.multiplicities.is_empty() {
                    vec![1; evs.len()]
                } else {
                    self.cross_section.multiplicities.clone()
                };
                Spectrum::tabulated(self.cross_section.n, self.cross_section.bc, evs, mults)
            }
        }
    }

    /// The truncated cross-section spectrum of a validated config.
    pub fn spectrum(&self) -> Result<Spectrum, CoreError> {
        self.spectrum_unchecked()
    }

    /// The finite-difference oracle spectrum (interval configs only).
    pub fn fd_oracle_spectrum(&self, gridpoints: usize) -> Result<Spectrum, CoreError> {
        match self.cross_section.kind.as_str() {
            "interval" => fd_spectrum(
                self.cross_section.length.unwrap(),
                self.cross_section.bc,
                gridpoints,
                self.truncation.modes,
            ),
            _ => Err(CoreError::Unsupported(
                "the FD oracle applies to interval cross-sections".into(),
            )),
        }
    }

    pub fn warp(&self, spectrum: &Spectrum) -> WarpData {
        conewedge_core::cross_section::warp_family(self.warp.phi_prime0, spectrum)
    }

    /// The weight gamma, derived from delta when given.
    pub fn gamma(&self, spectrum: &Spectrum) -> f64 {
        match (self.weight.delta, self.weight.gamma) {
            (Some(d), None) => (spectrum.n() as f64 - 3.0) / 2.0 + d,
            (_, Some(g)) => g,
            _ => unreachable!("validated config has exactly one weight"),
        }
    }
}

/// Parses the forcing recipe string.
pub fn parse_forcing(s: &str) -> Option<conewedge_core::pme::Forcing> {
    use conewedge_core::pme::Forcing;
    if s == "none" {
        return Some(Forcing::None);
    }
    if let Some(rest) = s.strip_prefix("const:") {
        return rest.trim().parse().ok().map(|c| Forcing::Const { c });
    }
    if let Some(rest) = s.strip_prefix("logistic:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            let a = parts[0].trim().parse().ok()?;
            let b = parts[1].trim().parse().ok()?;
            return Some(Forcing::Logistic { a, b });
        }
    }
    None
}

/// Initial-state recipes for the PME run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialRecipe {
    /// v = c.
    Constant { c: f64 },
    /// v = c + a cos(pi y / L), uniform in x.
    Cosine { c: f64, a: f64 },
    /// v = c + a x^{q_1} cos(pi y / L), the branch-compliant profile.
    TipCosine { c: f64, a: f64 },
}

pub fn parse_initial(s: &str) -> Option<InitialRecipe> {
    if let Some(rest) = s.strip_prefix("constant:") {
        return rest.trim().parse().ok().map(|c| InitialRecipe::Constant { c });
    }
    let two = |rest: &str| -> Option<(f64, f64)> {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            Some((parts[0].trim().parse().ok()?, parts[1].trim().parse().ok()?))
        } else {
            None
        }
    };
    if let Some(rest) = s.strip_prefix("tip-cosine:") {
        return two(rest).map(|(c, a)| InitialRecipe::TipCosine { c, a });
    }
    if let Some(rest) = s.strip_prefix("cosine:") {
        return two(rest).map(|(c, a)| InitialRecipe::Cosine { c, a });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[cross_section]
kind = "interval"
L = 3.141592653589793
bc = "neumann"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.truncation.modes, 8);
        assert_eq!(c.probe.nodes, 2048);
        assert!((c.probe.x_min - 1e-5).abs() < 1e-20);
        assert_eq!(c.weight.delta, Some(0.5));
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = format!("{MINIMAL}\n[probe]\nbogus = 1\nalso_bogus = 2\n");
        match RunConfig::parse(&text) {
            Err(CoreError::Config(v)) => {
                assert!(v.iter().any(|s| s.contains("probe.bogus")));
                assert!(v.iter().any(|s| s.contains("probe.also_bogus")));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn positive_eigenvalue_rejected_with_rule() {
        let text = r#"
[cross_section]
kind = "tabulated"
bc = "neumann"
n = 2
eigenvalues = [0.0, 0.5]
"#;
        match RunConfig::parse(text) {
            Err(CoreError::Config(v)) => {
                assert!(v.iter().any(|s| s.contains("nonpositive")), "{v:?}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn delta_window_violation_cites_rule() {
        let text = format!("{MINIMAL}\n[weight]\ndelta = 1.5\n");
        match RunConfig::parse(&text) {
            Err(CoreError::Config(v)) => {
                assert!(v.iter().any(|s| s.contains("gamma-window")), "{v:?}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_identity() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let text = toml::to_string(&c).unwrap();
        let c2 = RunConfig::parse(&text).unwrap();
        assert_eq!(c, c2);
    }

    #[test]
    fn repository_configs_round_trip() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().and_then(|e| e.to_str()) != Some("toml") {
                continue;
            }
            let text = std::fs::read_to_string(&path).unwrap();
            let parsed = RunConfig::parse(&text).unwrap_or_else(|e| {
                panic!("{} must parse: {e}", path.display())
            });
            let reserialized = toml::to_string(&parsed).unwrap();
            let reparsed = RunConfig::parse(&reserialized).unwrap();
            assert_eq!(parsed, reparsed, "round trip of {}", path.display());
            seen += 1;
        }
        assert!(seen >= 3, "expected the example configs to be present");
    }

    #[test]
    fn forcing_and_initial_recipes() {
        use conewedge_core::pme::Forcing;
        assert_eq!(parse_forcing("none"), Some(Forcing::None));
        assert_eq!(parse_forcing("const:0.25"), Some(Forcing::Const { c: 0.25 }));
        assert_eq!(
            parse_forcing("logistic:1.0,2.0"),
            Some(Forcing::Logistic { a: 1.0, b: 2.0 })
        );
        assert_eq!(parse_forcing("garbage"), None);
        assert_eq!(
            parse_initial("tip-cosine:1.0,0.1"),
            Some(InitialRecipe::TipCosine { c: 1.0, a: 0.1 })
        );
        assert_eq!(parse_initial("constant:2"), Some(InitialRecipe::Constant { c: 2.0 }));
    }
}
