use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{IndexSource, ModeDispersion, Polarization, SellmeierModel, TabulatedIndex};
use crate::error::{Error, Result};
use crate::units::{Celsius, Degrees, Nm};

/// As-fabricated ridge geometry. Carried as metadata; indices come from the mode tables.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct WaveguideGeometry {
    pub top_width: Nm,
    pub film_thickness: Nm,
    pub etch_depth: Nm,
    pub sidewall_angle: Degrees,
    pub temperature: Celsius,
}

impl WaveguideGeometry {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("top_width", self.top_width.0),
            ("film_thickness", self.film_thickness.0),
            ("etch_depth", self.etch_depth.0),
            ("sidewall_angle", self.sidewall_angle.0),
        ];
        if let Some((name, v)) = dims.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::invalid("geometry", format!("{name} must be positive, got {v}")));
        }
        if self.etch_depth.0 > self.film_thickness.0 {
            return Err(Error::invalid("geometry", "etch depth exceeds film thickness"));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    label: String,
    form: String,
    range: [Nm; 2],
    temperature: Option<Celsius>,
    coefficients: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    label: String,
    #[serde(default = "default_polarization")]
    polarization: String,
    knots: Option<Vec<[f64; 2]>>,
    /// Use a bulk material block as this mode's index.
    material: Option<String>,
}

fn default_polarization() -> String {
    "quasi-TE".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLibrary {
    geometry: Option<WaveguideGeometry>,
    #[serde(default)]
    material: Vec<RawMaterial>,
    #[serde(default)]
    mode: Vec<RawMode>,
}

/// Materials and mode index models loaded from a dispersion file.
#[derive(Debug, Clone, Default)]
pub struct DispersionLibrary {
    pub geometry: Option<WaveguideGeometry>,
    pub materials: Vec<SellmeierModel>,
    pub modes: Vec<ModeDispersion>,
}

impl DispersionLibrary {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawLibrary = toml::from_str(text).map_err(|e| Error::Parse(format!("dispersion file: {e}")))?;
        if let Some(g) = &raw.geometry {
            g.validate()?;
        }
        let mut materials = Vec::new();
        for m in raw.material {
            let t = m.temperature.map(|c| c.0).unwrap_or(25.0);
            materials.push(SellmeierModel::from_named(&m.label, &m.form, &m.coefficients, (m.range[0].0, m.range[1].0), t)?);
        }
        let mut modes = Vec::new();
        for m in raw.mode {
            let polarization: Polarization = m.polarization.parse()?;
            let source = match (m.knots, m.material) {
                (Some(knots), None) => IndexSource::Table(
                    TabulatedIndex::new(knots.into_iter().map(|[l, n]| (l, n)))
                        .map_err(|e| Error::invalid(format!("mode {}", m.label), e.to_string()))?,
                ),
                (None, Some(mat)) => IndexSource::Sellmeier(
                    materials
                        .iter()
                        .find(|s| s.label == mat)
                        .cloned()
                        .ok_or_else(|| Error::invalid(format!("mode {}", m.label), format!("unknown material {mat:?}")))?,
                ),
                _ => return Err(Error::invalid(format!("mode {}", m.label), "give exactly one of `knots` or `material`")),
            };
            if modes.iter().any(|x: &ModeDispersion| x.label == m.label) {
                return Err(Error::invalid(format!("mode {}", m.label), "duplicate label"));
            }
            modes.push(ModeDispersion::new(m.label, polarization, source));
        }
        Ok(DispersionLibrary {
            geometry: raw.geometry,
            materials,
            modes,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The shipped tables for the reference 2.12 μm wide MgO:LN ridge.
    pub fn bundled() -> Self {
        Self::from_toml_str(crate::bundled::DISPERSION_TOML).expect("bundled dispersion file is valid")
    }

    pub fn mode(&self, label: &str) -> Result<&ModeDispersion> {
        self.modes
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::invalid("mode", format!("no mode labelled {label:?}")))
    }

    pub fn material(&self, label: &str) -> Result<&SellmeierModel> {
        self.materials
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::invalid("material", format!("no material labelled {label:?}")))
    }
}
