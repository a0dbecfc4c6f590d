//! Least-squares fits for λ-sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

/// `y ≈ a + b x`.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> Result<AffineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("fit needs at least two (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("fit data must be finite".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("fit abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { if ss_res == 0.0 { 1.0 } else { 0.0 } } else { 1.0 - ss_res / ss_tot };
    Ok(AffineFit { intercept, slope, r2 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub n: usize,
    pub decades: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Slope of `log y` against `log λ`; needs four points over 2.5 decades.
pub fn scaling_fit(lambdas: &[f64], values: &[f64], predicted: f64, tolerance: f64) -> Result<ScalingFit> {
    if lambdas.len() < 4 {
        return Err(Error::InvalidInput(format!("scaling fit needs at least 4 points, got {}", lambdas.len())));
    }
    if lambdas.iter().chain(values).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("scaling fit needs positive data".into()));
    }
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(0.0, f64::max);
    let decades = (hi / lo).log10();
    if decades < 2.5 {
        return Err(Error::InvalidInput(format!("scaling fit spans {decades:.2} decades; 2.5 required")));
    }
    let lx: Vec<f64> = lambdas.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let f = affine_fit(&lx, &ly)?;
    Ok(ScalingFit {
        n: lambdas.len(),
        decades,
        slope: f.slope,
        intercept: f.intercept,
        r2: f.r2,
        predicted,
        tolerance,
        pass: (f.slope - predicted).abs() <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep() -> Vec<f64> {
        (0..7).map(|i| 1e-3 * 10f64.powf(-0.5 * i as f64)).collect()
    }

    #[test]
    fn exact_power() {
        let l = sweep();
        let y: Vec<f64> = l.iter().map(|v| v.sqrt()).collect();
        let f = scaling_fit(&l, &y, 0.5, 0.1).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12 && f.pass);
    }

    #[test]
    fn oscillating_power() {
        let l = sweep();
        let y: Vec<f64> = l.iter().map(|v| v.sqrt() * (1.0 + 0.1 * v.ln().sin())).collect();
        let f = scaling_fit(&l, &y, 0.5, 0.05).unwrap();
        assert!(f.pass, "{f:?}");
    }

    #[test]
    fn constant_fails() {
        let l = sweep();
        let f = scaling_fit(&l, &vec![3.0; l.len()], 0.5, 0.1).unwrap();
        assert_eq!(f.slope, 0.0);
        assert!(!f.pass);
    }

    #[test]
    fn insufficient_range() {
        assert!(scaling_fit(&[1e-3, 5e-4, 2e-4, 1e-4], &[1.0, 2.0, 3.0, 4.0], 0.5, 0.1).is_err());
        assert!(scaling_fit(&[1e-3, 1e-5, 1e-6], &[1.0, 2.0, 3.0], 0.5, 0.1).is_err());
    }
}
