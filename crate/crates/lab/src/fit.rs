//! Power-law fits by least squares on logarithms.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {index} = ({x}, {y}) is not strictly positive")]
    NonPositive { index: usize, x: f64, y: f64 },
    #[error("all x values coincide")]
    DegenerateX,
}

/// Fits `log y = slope log x + intercept`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit, FitError> {
    if pairs.len() < 3 {
        return Err(FitError::TooFewPoints(pairs.len()));
    }
    if let Some((index, &(x, y))) = pairs.iter().enumerate().find(|(_, (x, y))| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(FitError::NonPositive { index, x, y });
    }
    let n = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 1e-300 {
        return Err(FitError::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // a constant y is fitted exactly
    let r2 = if syy <= 1e-300 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r2, n_points: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let f = fit_rate(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.n_points, 3);
    }

    #[test]
    fn constant_data() {
        let f = fit_rate(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(fit_rate(&[(1.0, 1.0), (2.0, 2.0)]), Err(FitError::TooFewPoints(2)));
        assert!(matches!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(FitError::NonPositive { index: 1, .. })));
        assert!(matches!(fit_rate(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]), Err(FitError::NonPositive { index: 0, .. })));
        assert_eq!(fit_rate(&[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]), Err(FitError::DegenerateX));
    }
}
