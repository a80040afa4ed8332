use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::MagFaceBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossName {
    Ce,
    Focal,
    Triplet,
    Arcface,
    Circle,
    Magface,
}

impl LossName {
    /// Recognized keys of the `params` map, with their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            LossName::Ce => &[("eps_smooth", 0.0)],
            LossName::Focal => &[("gamma", 2.0)],
            LossName::Triplet => &[("margin", 0.3)],
            LossName::Arcface => &[("s", 64.0), ("m", 0.5)],
            LossName::Circle => &[("m", 0.25), ("gamma", 256.0)],
            LossName::Magface => &[
                ("s", 64.0),
                ("l_a", 10.0),
                ("u_a", 110.0),
                ("l_m", 0.45),
                ("u_m", 0.8),
                ("lambda_g", 20.0),
            ],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossName::Ce => "ce",
            LossName::Focal => "focal",
            LossName::Triplet => "triplet",
            LossName::Arcface => "arcface",
            LossName::Circle => "circle",
            LossName::Magface => "magface",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixupSpec {
    #[serde(default = "default_mixup_alpha")]
    pub alpha: f64,
}

fn default_mixup_alpha() -> f64 {
    0.2
}

/// Declarative loss selection, as read from the `loss:` config block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub name: LossName,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ohem_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixup: Option<MixupSpec>,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::new(LossName::Ce)
    }
}

impl LossSpec {
    pub fn new(name: LossName) -> Self {
        Self {
            name,
            params: BTreeMap::new(),
            ohem_ratio: None,
            mixup: None,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Parameter value, falling back to the loss's default.
    ///
    /// Panics on a key the loss does not define.
    pub fn param(&self, key: &str) -> f64 {
        if let Some(&v) = self.params.get(key) {
            return v;
        }
        self.name
            .defaults()
            .iter()
            .find(|(k, _)| *k == key)
            .map(|&(_, v)| v)
            .unwrap_or_else(|| panic!("loss `{}` has no parameter `{key}`", self.name.as_str()))
    }

    pub fn magface_bounds(&self) -> MagFaceBounds {
        MagFaceBounds {
            l_a: self.param("l_a"),
            u_a: self.param("u_a"),
            l_m: self.param("l_m"),
            u_m: self.param("u_m"),
        }
    }

    /// Checks parameter names and ranges; errors carry the offending key
    /// relative to the `loss:` block.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let defaults = self.name.defaults();
        for key in self.params.keys() {
            if !defaults.iter().any(|(k, _)| k == key) {
                return Err((
                    format!("params.{key}"),
                    format!("unknown parameter for loss `{}`", self.name.as_str()),
                ));
            }
        }
        let check = |key: &str, ok: bool, what: &str| -> Result<(), (String, String)> {
            if ok {
                Ok(())
            } else {
                Err((format!("params.{key}"), format!("{} = {} {what}", key, self.param(key))))
            }
        };
        match self.name {
            LossName::Ce => {
                let e = self.param("eps_smooth");
                check("eps_smooth", (0.0..1.0).contains(&e), "must be in [0, 1)")?;
            }
            LossName::Focal => check("gamma", self.param("gamma") >= 0.0, "must be >= 0")?,
            LossName::Triplet => check("margin", self.param("margin") >= 0.0, "must be >= 0")?,
            LossName::Arcface => {
                check("s", self.param("s") > 0.0, "must be > 0")?;
                check("m", (0.0..FRAC_PI_2).contains(&self.param("m")), "must be in [0, pi/2)")?;
            }
            LossName::Circle => {
                check("gamma", self.param("gamma") > 0.0, "must be > 0")?;
                check("m", (0.0..1.0).contains(&self.param("m")), "must be in [0, 1)")?;
            }
            LossName::Magface => {
                let b = self.magface_bounds();
                check("s", self.param("s") > 0.0, "must be > 0")?;
                check("l_a", b.l_a > 0.0 && b.l_a < b.u_a, "must satisfy 0 < l_a < u_a")?;
                check("l_m", b.l_m >= 0.0 && b.l_m <= b.u_m, "must satisfy 0 <= l_m <= u_m")?;
                check("u_m", b.u_m < FRAC_PI_2, "must be < pi/2")?;
                check("lambda_g", self.param("lambda_g") >= 0.0, "must be >= 0")?;
            }
        }
        if let Some(r) = self.ohem_ratio {
            if !(r > 0.0 && r <= 1.0) {
                return Err(("ohem_ratio".into(), format!("{r} must be in (0, 1]")));
            }
            if self.name == LossName::Circle {
                return Err((
                    "ohem_ratio".into(),
                    "circle loss is batch-level and has no per-sample terms".into(),
                ));
            }
        }
        if let Some(m) = self.mixup {
            if !(m.alpha > 0.0) {
                return Err(("mixup.alpha".into(), format!("{} must be > 0", m.alpha)));
            }
            if !matches!(self.name, LossName::Ce | LossName::Focal) {
                return Err((
                    "mixup".into(),
                    "mixup requires a classification loss (ce or focal)".into(),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let spec = LossSpec::new(LossName::Arcface).with("s", 16.0);
        assert_eq!(spec.param("s"), 16.0);
        assert_eq!(spec.param("m"), 0.5);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn range_errors_name_the_key() {
        let mut spec = LossSpec::new(LossName::Ce);
        spec.ohem_ratio = Some(1.5);
        assert_eq!(spec.validate().unwrap_err().0, "ohem_ratio");
        let spec = LossSpec::new(LossName::Ce).with("eps_smooth", 1.0);
        assert_eq!(spec.validate().unwrap_err().0, "params.eps_smooth");
        let spec = LossSpec::new(LossName::Triplet).with("s", 1.0);
        assert_eq!(spec.validate().unwrap_err().0, "params.s");
    }
}
