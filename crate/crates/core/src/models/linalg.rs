use nalgebra::{DMatrix, DVector};

/// Solves `(A + ridge I) b = rhs` for symmetric positive semi-definite `A`,
/// growing the ridge tenfold until the Cholesky factorisation succeeds.
pub(crate) fn ridge_solve(a: &DMatrix<f64>, rhs: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let p = a.nrows();
    let mut lambda = ridge.max(0.0);
    loop {
        let mut m = a.clone();
        for i in 0..p {
            m[(i, i)] += lambda;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(rhs);
        }
        lambda = if lambda == 0.0 { 1e-10 } else { lambda * 10.0 };
    }
}

/// Ridge regression with an unpenalised intercept on raw (unscaled)
/// predictors. Returns `(intercept, coefficients)`.
pub(crate) fn ridge_fit(columns: &[&[f64]], y: &[f64], rows: &[usize], ridge: f64) -> (f64, Vec<f64>) {
    let p = columns.len();
    let n = rows.len() as f64;
    let means: Vec<f64> = columns
        .iter()
        .map(|c| rows.iter().map(|&i| c[i]).sum::<f64>() / n)
        .collect();
    let ymean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut centered = vec![0.0; p];
    for &i in rows {
        for j in 0..p {
            centered[j] = columns[j][i] - means[j];
        }
        let dy = y[i] - ymean;
        for j in 0..p {
            xty[j] += centered[j] * dy;
            for k in 0..=j {
                xtx[(j, k)] += centered[j] * centered[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            xtx[(k, j)] = xtx[(j, k)];
        }
    }
    let beta = ridge_solve(&xtx, &xty, ridge);
    let intercept = ymean - (0..p).map(|j| beta[j] * means[j]).sum::<f64>();
    (intercept, beta.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_plane() {
        let x1 = [0.0, 1.0, 2.0, 3.0, 4.0];
        let x2 = [1.0, 0.0, 1.0, 0.0, 2.0];
        let y: Vec<f64> = (0..5).map(|i| 1.0 + 2.0 * x1[i] - 3.0 * x2[i]).collect();
        let rows: Vec<usize> = (0..5).collect();
        let (b0, b) = ridge_fit(&[&x1, &x2], &y, &rows, 1e-12);
        assert!((b0 - 1.0).abs() < 1e-8);
        assert!((b[0] - 2.0).abs() < 1e-8 && (b[1] + 3.0).abs() < 1e-8);
    }

    #[test]
    fn collinear_design_is_rescued() {
        let x1 = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let (_, b) = ridge_fit(&[&x1, &x1], &y, &[0, 1, 2], 0.0);
        assert!((b[0] + b[1] - 2.0).abs() < 1e-6);
    }
}
