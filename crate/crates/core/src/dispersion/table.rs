use crate::error::{Error, Result};
use crate::numeric::CubicSpline;

/// Effective index sampled on a wavelength grid, interpolated by a natural cubic spline.
#[derive(Debug, Clone)]
pub struct TabulatedIndex {
    spline: CubicSpline,
}

impl TabulatedIndex {
    pub fn new(knots: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
        if let Some(&bad) = ys.iter().find(|&&n| !(n > 1.0)) {
            return Err(Error::invalid("index table", format!("effective index {bad} is not > 1")));
        }
        Ok(TabulatedIndex {
            spline: CubicSpline::new(xs, ys)?,
        })
    }

    pub fn range_nm(&self) -> (f64, f64) {
        self.spline.domain()
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.spline.knots()
    }

    pub(crate) fn eval(&self, lambda_nm: f64) -> f64 {
        self.spline.eval(lambda_nm)
    }
}
