//! Open-circuit voltage curve: a sampled table with monotonicity-preserving
//! piecewise-cubic interpolation (Fritsch-Carlson slopes) and a continuous
//! first derivative.

use crate::{ModelError, Result};
use std::path::Path;

/// Sampled OCV curve on a strictly increasing normalized-concentration grid
/// covering [0, 1]. Voltages in volts.
#[derive(Clone, Debug)]
pub struct OcvCurve {
    c: Vec<f64>,
    u: Vec<f64>,
    /// Hermite slopes dU/dc at the grid points.
    slope: Vec<f64>,
}

/// Width of the extrapolation band accepted by [`OcvCurve::ocv_extended`];
/// Newton iterates may transiently leave [0, 1] by this much.
pub const OCV_EXTENSION_BAND: f64 = 0.05;

impl OcvCurve {
    /// Builds a curve from (c, U) samples. The grid must be strictly
    /// increasing, start at 0 and end at 1.
    pub fn from_table(c: Vec<f64>, u: Vec<f64>) -> Result<OcvCurve> {
        if c.len() != u.len() || c.len() < 2 {
            return Err(ModelError::config(
                "ocv.table",
                format!("need >= 2 rows, got {} x {}", c.len(), u.len()),
            ));
        }
        if c[0] != 0.0 || *c.last().unwrap() != 1.0 {
            return Err(ModelError::config(
                "ocv.table",
                format!(
                    "grid must cover [0, 1], got [{}, {}]",
                    c[0],
                    c.last().unwrap()
                ),
            ));
        }
        for w in c.windows(2) {
            if !(w[1] > w[0]) {
                return Err(ModelError::config(
                    "ocv.table",
                    format!("grid not strictly increasing at {} -> {}", w[0], w[1]),
                ));
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::config("ocv.table", "non-finite voltage"));
        }
        let slope = fritsch_carlson_slopes(&c, &u);
        Ok(OcvCurve { c, u, slope })
    }

    /// Straight line U(c) = u0 - slope * c, as a two-point table.
    pub fn linear(u0: f64, slope: f64) -> OcvCurve {
        OcvCurve::from_table(vec![0.0, 1.0], vec![u0, u0 - slope]).unwrap()
    }

    /// Reads a two-column CSV (header optional) of c, U samples.
    pub fn from_csv(path: &Path) -> Result<OcvCurve> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| ModelError::config("ocv.table_csv", e.to_string()))?;
        let mut c = Vec::new();
        let mut u = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ModelError::config("ocv.table_csv", e.to_string()))?;
            if rec.len() < 2 {
                continue;
            }
            let (a, b) = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    c.push(a);
                    u.push(b);
                }
                // Skip a header row; reject junk elsewhere.
                _ if c.is_empty() => continue,
                _ => {
                    return Err(ModelError::config(
                        "ocv.table_csv",
                        format!("unparsable row: {rec:?}"),
                    ))
                }
            }
        }
        OcvCurve::from_table(c, u)
    }

    /// Interpolated voltage at c_bar in [0, 1].
    pub fn ocv(&self, c_bar: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&c_bar) {
            return Err(ModelError::ConcentrationOutOfRange(c_bar));
        }
        Ok(self.eval(c_bar).0)
    }

    /// Interpolated dU/dc at c_bar in [0, 1].
    pub fn docv_dc(&self, c_bar: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&c_bar) {
            return Err(ModelError::ConcentrationOutOfRange(c_bar));
        }
        Ok(self.eval(c_bar).1)
    }

    /// Voltage and slope with a clamped-slope linear extension of width
    /// [`OCV_EXTENSION_BAND`] beyond [0, 1], for assembly-path robustness
    /// while Newton iterates are unconverged.
    pub fn ocv_extended(&self, c_bar: f64) -> Result<(f64, f64)> {
        if (0.0..=1.0).contains(&c_bar) {
            return Ok(self.eval(c_bar));
        }
        if c_bar < 0.0 && c_bar >= -OCV_EXTENSION_BAND {
            let s = self.slope[0];
            return Ok((self.u[0] + s * c_bar, s));
        }
        if c_bar > 1.0 && c_bar <= 1.0 + OCV_EXTENSION_BAND {
            let s = *self.slope.last().unwrap();
            return Ok((self.u.last().unwrap() + s * (c_bar - 1.0), s));
        }
        Err(ModelError::ConcentrationOutOfRange(c_bar))
    }

    /// Integral of U from 0 to c_bar (Hermite piecewise-exact), used by the
    /// free-energy finite-difference oracles.
    pub fn ocv_integral(&self, c_bar: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&c_bar) {
            return Err(ModelError::ConcentrationOutOfRange(c_bar));
        }
        let mut total = 0.0;
        for i in 0..self.c.len() - 1 {
            let (lo, hi) = (self.c[i], self.c[i + 1]);
            if c_bar <= lo {
                break;
            }
            let upper = c_bar.min(hi);
            total += self.segment_integral(i, upper);
        }
        Ok(total)
    }

    /// Integral of the Hermite cubic on segment i from c[i] to x.
    fn segment_integral(&self, i: usize, x: f64) -> f64 {
        let h = self.c[i + 1] - self.c[i];
        let t = (x - self.c[i]) / h;
        // Antiderivatives of the Hermite basis on [0, 1], scaled by h.
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let ih00 = t - t3 + 0.5 * t4;
        let ih10 = 0.5 * t2 - (2.0 / 3.0) * t3 + 0.25 * t4;
        let ih01 = t3 - 0.5 * t4;
        let ih11 = 0.25 * t4 - t3 / 3.0;
        h * (self.u[i] * ih00
            + h * self.slope[i] * ih10
            + self.u[i + 1] * ih01
            + h * self.slope[i + 1] * ih11)
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        // Locate segment by binary search; x within [0, 1] here.
        let n = self.c.len();
        let i = match self
            .c
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.c[i + 1] - self.c[i];
        let t = (x - self.c[i]) / h;
        let (y0, y1) = (self.u[i], self.u[i + 1]);
        let (m0, m1) = (self.slope[i] * h, self.slope[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let val = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let deriv = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
        (val, deriv)
    }
}

/// Monotonicity-preserving Hermite slopes (Fritsch-Carlson with the
/// weighted-harmonic interior formula and one-sided parabolic endpoints).
fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = d[0];
        m[1] = d[0];
        return m;
    }
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m[0] = endpoint_slope(h[0], h[1], d[0], d[1]);
    m[n - 1] = endpoint_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

/// One-sided three-point slope estimate, clipped for monotonicity.
fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
