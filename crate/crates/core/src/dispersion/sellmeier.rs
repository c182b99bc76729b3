use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Functional form of a bulk Sellmeier fit. Wavelengths inside the formulas are in μm.
#[derive(Debug, Clone, PartialEq)]
pub enum SellmeierForm {
    /// n² = a0 + Σ b_k λ² / (λ² − c_k²)
    Poles { a0: f64, terms: Vec<(f64, f64)> },
    /// Temperature-dependent extraordinary-index form used for congruent and MgO-doped LN:
    /// n² = a1 + b1 f + (a2 + b2 f)/(λ² − (a3 + b3 f)²) + (a4 + b4 f)/(λ² − a5²) − a6 λ²,
    /// f = (T − 24.5)(T + 570.82).
    DopedLithiumNiobate { a: [f64; 6], b: [f64; 4], temperature_c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SellmeierModel {
    pub label: String,
    pub form: SellmeierForm,
    pub range_nm: (f64, f64),
}

fn coefficient(map: &BTreeMap<String, f64>, key: &str, label: &str) -> Result<f64> {
    map.get(key)
        .copied()
        .ok_or_else(|| Error::invalid(format!("material {label}"), format!("missing coefficient {key}")))
}

impl SellmeierModel {
    pub fn new(label: impl Into<String>, form: SellmeierForm, range_nm: (f64, f64)) -> Result<Self> {
        let model = SellmeierModel {
            label: label.into(),
            form,
            range_nm,
        };
        let (lo, hi) = range_nm;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::invalid(format!("material {}", model.label), format!("bad range [{lo}, {hi}] nm")));
        }
        // The index must stay real and above one across the declared range.
        for k in 0..=64 {
            let lam = lo + (hi - lo) * k as f64 / 64.0;
            model.refractive_index(lam)?;
        }
        Ok(model)
    }

    /// Build from a named-coefficient block (`a0, b1, c1, ...` for poles; `a1..a6, b1..b4` for doped LN).
    pub fn from_named(
        label: &str,
        form: &str,
        coefficients: &BTreeMap<String, f64>,
        range_nm: (f64, f64),
        temperature_c: f64,
    ) -> Result<Self> {
        let form = match form {
            "poles" => {
                let a0 = coefficients.get("a0").copied().unwrap_or(1.0);
                let mut terms = Vec::new();
                for k in 1.. {
                    match (coefficients.get(&format!("b{k}")), coefficients.get(&format!("c{k}"))) {
                        (Some(&b), Some(&c)) => terms.push((b, c)),
                        (None, None) => break,
                        _ => return Err(Error::invalid(format!("material {label}"), format!("pole {k} needs both b{k} and c{k}"))),
                    }
                }
                SellmeierForm::Poles { a0, terms }
            }
            "temperature_sellmeier" => {
                let mut a = [0.0; 6];
                let mut b = [0.0; 4];
                for (k, slot) in a.iter_mut().enumerate() {
                    *slot = coefficient(coefficients, &format!("a{}", k + 1), label)?;
                }
                for (k, slot) in b.iter_mut().enumerate() {
                    *slot = coefficient(coefficients, &format!("b{}", k + 1), label)?;
                }
                SellmeierForm::DopedLithiumNiobate { a, b, temperature_c }
            }
            other => return Err(Error::invalid(format!("material {label}"), format!("unknown Sellmeier form {other:?}"))),
        };
        SellmeierModel::new(label, form, range_nm)
    }

    pub fn index_squared_unchecked(&self, lambda_nm: f64) -> f64 {
        let l = lambda_nm * 1e-3;
        let l2 = l * l;
        match &self.form {
            SellmeierForm::Poles { a0, terms } => a0 + terms.iter().map(|(b, c)| b * l2 / (l2 - c * c)).sum::<f64>(),
            SellmeierForm::DopedLithiumNiobate { a, b, temperature_c } => {
                let t = *temperature_c;
                let f = (t - 24.5) * (t + 570.82);
                let pole = a[2] + b[2] * f;
                a[0] + b[0] * f + (a[1] + b[1] * f) / (l2 - pole * pole) + (a[3] + b[3] * f) / (l2 - a[4] * a[4])
                    - a[5] * l2
            }
        }
    }

    pub fn refractive_index(&self, lambda_nm: f64) -> Result<f64> {
        let (lo, hi) = self.range_nm;
        if !(lambda_nm >= lo && lambda_nm <= hi) {
            return Err(Error::OutOfRange {
                label: self.label.clone(),
                value_nm: lambda_nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        let n2 = self.index_squared_unchecked(lambda_nm);
        if !(n2 > 1.0) || !n2.is_finite() {
            return Err(Error::Numeric(format!("{}: n² = {n2} at {lambda_nm} nm", self.label)));
        }
        Ok(n2.sqrt())
    }
}
