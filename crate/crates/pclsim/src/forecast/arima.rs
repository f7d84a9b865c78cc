//! Seasonal ARIMA `(p,d,q)(P,D,Q)_s` fitted by conditional sum of squares
//! with AIC order selection over a candidate grid — a deterministic,
//! dependency-free stand-in for "auto-ARIMA".
//!
//! Model (statsmodels sign conventions: MA polynomial `1 + θ₁B + …`):
//!
//! ```text
//! φ(B) Φ(Bˢ) (w_t − μ) = θ(B) Θ(Bˢ) ε_t
//! w = (1−B)^d (1−Bˢ)^D y,  μ free only when d + D = 0
//! ```
//!
//! The seasonal and trend polynomials are expanded into sparse lag vectors
//! once per candidate, so the residual recursion is a flat dot product over
//! the non-zero lags. Optimization is Nelder–Mead on the CSS objective with a
//! quadratic penalty outside the |coef| < 0.99 box (a pragmatic proxy for
//! stationarity/invertibility; the true region for mixed orders is not a box,
//! but the box keeps the recursion numerically sane and is standard practice
//! for CSS fits). AIC = n_eff·ln(css/n_eff) + 2(k+1); n_eff varies slightly
//! across candidates with the differencing and conditioning lags, which is
//! the usual CSS approximation accepted here for determinism and speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Orders
// ---------------------------------------------------------------------------

/// One SARIMA order. Serialized field names follow the conventional
/// uppercase/lowercase notation: `p,d,q` trend, `P,D,Q` seasonal, `s` period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub seasonal_p: usize,
    #[serde(rename = "D")]
    pub seasonal_d: usize,
    #[serde(rename = "Q")]
    pub seasonal_q: usize,
    #[serde(default = "default_period")]
    pub s: usize,
}

fn default_period() -> usize {
    24
}

impl ArimaOrder {
    #[allow(non_snake_case)]
    pub fn new(p: usize, d: usize, q: usize, P: usize, D: usize, Q: usize, s: usize) -> Self {
        ArimaOrder { p, d, q, seasonal_p: P, seasonal_d: D, seasonal_q: Q, s }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::Config(format!("arima order {self}: s must be >= 2")));
        }
        if self.d + self.seasonal_d > 3 {
            return Err(Error::Config(format!("arima order {self}: d + D must be <= 3")));
        }
        if self.n_coef_params() == 0 && self.d + self.seasonal_d == 0 {
            return Err(Error::Config(format!(
                "arima order {self}: needs at least one AR/MA term or differencing"
            )));
        }
        Ok(())
    }

    fn n_coef_params(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// True when the model carries a free mean (no differencing removes it).
    fn has_mean(&self) -> bool {
        self.d + self.seasonal_d == 0
    }

    fn max_ar_lag(&self) -> usize {
        if self.p + self.seasonal_p == 0 { 0 } else { self.p + self.seasonal_p * self.s }
    }

    fn max_ma_lag(&self) -> usize {
        if self.q + self.seasonal_q == 0 { 0 } else { self.q + self.seasonal_q * self.s }
    }

    /// History length [`predict`] needs: differencing consumption plus the
    /// deepest lag plus a season of residual warm-up.
    pub fn required_window(&self) -> usize {
        self.d
            + self.seasonal_d * self.s
            + self.max_ar_lag().max(self.max_ma_lag())
            + self.s
            + 1
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})[{}]",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.s
        )
    }
}

/// The default candidate grid: p,q ∈ {0,1,2}, d,D,P,Q ∈ {0,1}, s = 24,
/// excluding the degenerate no-term/no-differencing order. Sorted simplest
/// first (fewest coefficients, then least differencing, then lexicographic),
/// so AIC ties resolve to the simplest model.
pub fn default_grid() -> Vec<ArimaOrder> {
    let mut grid = Vec::new();
    for p in 0..=2 {
        for d in 0..=1 {
            for q in 0..=2 {
                for sp in 0..=1 {
                    for sd in 0..=1 {
                        for sq in 0..=1 {
                            let order = ArimaOrder::new(p, d, q, sp, sd, sq, 24);
                            if order.validate().is_ok() {
                                grid.push(order);
                            }
                        }
                    }
                }
            }
        }
    }
    grid.sort_by_key(|o| {
        (o.n_coef_params(), o.d + o.seasonal_d, o.p, o.q, o.seasonal_p, o.seasonal_q, o.d, o.seasonal_d)
    });
    grid
}

// ---------------------------------------------------------------------------
// Fitted model
// ---------------------------------------------------------------------------

/// Coefficients of a fitted SARIMA model (normalized-series domain).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    /// Trend AR coefficients φ (length p).
    pub ar: Vec<f64>,
    /// Trend MA coefficients θ (length q).
    pub ma: Vec<f64>,
    /// Seasonal AR coefficients Φ (length P).
    pub seasonal_ar: Vec<f64>,
    /// Seasonal MA coefficients Θ (length Q).
    pub seasonal_ma: Vec<f64>,
    /// Mean of the differenced series (0 when d + D > 0).
    pub mean: f64,
    /// CSS-approximate Akaike information criterion of the fit.
    pub aic: f64,
}

impl ArimaFit {
    pub fn all_finite(&self) -> bool {
        self.ar.iter().chain(&self.ma).chain(&self.seasonal_ar).chain(&self.seasonal_ma).all(|c| c.is_finite())
            && self.mean.is_finite()
            && self.aic.is_finite()
    }
}

/// Sparse expansion of `poly_trend(B) · poly_seasonal(Bˢ)` into (lag, coef)
/// pairs for the recursion form `v_t = Σ ar·v + ε_t + Σ ma·ε`.
///
/// AR side: `(1−Σφᵢ Bⁱ)(1−ΣΦₖ B^{ks})` ⇒ lag m coefficient
/// `φ_m + Φ_{m/s} − φᵢΦₖ` cross terms, moved to the right-hand side.
/// MA side: `(1+Σθⱼ Bʲ)(1+ΣΘₖ B^{ks})` stays on the right-hand side as-is.
fn expand(trend: &[f64], seasonal: &[f64], s: usize, ar_side: bool) -> Vec<(usize, f64)> {
    let mut coef = std::collections::BTreeMap::<usize, f64>::new();
    let sign = if ar_side { -1.0 } else { 1.0 };
    for (i, phi) in trend.iter().enumerate() {
        *coef.entry(i + 1).or_insert(0.0) += sign * phi;
    }
    for (k, sphi) in seasonal.iter().enumerate() {
        *coef.entry((k + 1) * s).or_insert(0.0) += sign * sphi;
    }
    for (i, phi) in trend.iter().enumerate() {
        for (k, sphi) in seasonal.iter().enumerate() {
            *coef.entry(i + 1 + (k + 1) * s).or_insert(0.0) += phi * sphi;
        }
    }
    // The polynomial product is (1 ∓ Σ aₘ Bᵐ); the recursion needs the aₘ with
    // the sign they carry when moved to the "v_t =" side.
    coef.into_iter().map(|(lag, c)| (lag, if ar_side { -c } else { c })).collect()
}

/// Difference `values` per the order: seasonal D times, then trend d times.
/// Returns every intermediate level, outermost first:
/// `levels[0]` = input, `levels[last]` = fully differenced series.
fn difference_levels(values: &[f64], order: &ArimaOrder) -> Vec<Vec<f64>> {
    let mut levels = vec![values.to_vec()];
    for _ in 0..order.seasonal_d {
        let prev = levels.last().unwrap();
        let next: Vec<f64> = (order.s..prev.len()).map(|t| prev[t] - prev[t - order.s]).collect();
        levels.push(next);
    }
    for _ in 0..order.d {
        let prev = levels.last().unwrap();
        let next: Vec<f64> = (1..prev.len()).map(|t| prev[t] - prev[t - 1]).collect();
        levels.push(next);
    }
    levels
}

/// Lag step of each differencing level transition, aligned with
/// `difference_levels` (seasonal levels first).
fn level_lags(order: &ArimaOrder) -> Vec<usize> {
    let mut lags = vec![order.s; order.seasonal_d];
    lags.extend(std::iter::repeat(1).take(order.d));
    lags
}

struct CssProblem {
    w: Vec<f64>,
    order: ArimaOrder,
    /// Index of the first residual the sum conditions on.
    t0: usize,
}

/// Split a flat optimizer vector into (φ, θ, Φ, Θ, μ).
fn unpack(order: &ArimaOrder, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let mut it = x.iter().copied();
    let ar: Vec<f64> = (&mut it).take(order.p).collect();
    let ma: Vec<f64> = (&mut it).take(order.q).collect();
    let sar: Vec<f64> = (&mut it).take(order.seasonal_p).collect();
    let sma: Vec<f64> = (&mut it).take(order.seasonal_q).collect();
    let mean = if order.has_mean() { it.next().unwrap_or(0.0) } else { 0.0 };
    (ar, ma, sar, sma, mean)
}

impl CssProblem {
    /// Conditional residuals ε_t for t ≥ t0 under the given parameters.
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let (ar, ma, sar, sma, mean) = unpack(&self.order, x);
        let ar_lags = expand(&ar, &sar, self.order.s, true);
        let ma_lags = expand(&ma, &sma, self.order.s, false);
        let v: Vec<f64> = self.w.iter().map(|w| w - mean).collect();
        let mut eps = vec![0.0; v.len()];
        let mut out = Vec::with_capacity(v.len() - self.t0);
        for t in self.t0..v.len() {
            let mut e = v[t];
            for &(lag, c) in &ar_lags {
                if t >= lag {
                    e -= c * v[t - lag];
                }
            }
            for &(lag, c) in &ma_lags {
                if t >= lag {
                    e -= c * eps[t - lag];
                }
            }
            eps[t] = e;
            out.push(e);
        }
        out
    }

    /// CSS objective with a quadratic penalty outside the coefficient box.
    fn objective(&self, x: &[f64]) -> f64 {
        let n_coef = self.order.n_coef_params();
        let mut penalty = 0.0;
        for c in &x[..n_coef] {
            let excess = c.abs() - 0.99;
            if excess > 0.0 {
                penalty += 1e6 + 1e8 * excess * excess;
            }
        }
        let css: f64 = self.residuals(x).iter().map(|e| e * e).sum();
        if css.is_finite() {
            css + penalty
        } else {
            f64::MAX / 4.0
        }
    }
}

/// Deterministic Nelder–Mead (reflection/expansion/contraction/shrink with
/// the standard coefficients). No randomness: ties in the simplex ordering
/// resolve by insertion order.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> Vec<f64> {
    let n = x0.len();
    if n == 0 {
        return Vec::new();
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { step * x[i].abs() } else { step };
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n + 1;

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
        // Centroid of all but the worst point.
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (ci, xi) in centroid.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let point = |alpha: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + alpha * (c - w))
                .collect()
        };

        let reflected = point(1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = point(2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[n].1 { point(0.5) } else { point(-0.5) };
            let fc = f(&contracted);
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                // Shrink toward the best point.
                let best_x = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best_x) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *fx = f(x);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex.swap_remove(0).0
}

/// Fit one candidate order by CSS; returns the fit with its AIC, or an error
/// when the candidate cannot be estimated on this series.
fn fit_order(values: &[f64], order: &ArimaOrder) -> Result<ArimaFit> {
    let levels = difference_levels(values, order);
    let w = levels.last().unwrap().clone();
    let t0 = order.max_ar_lag();
    let k = order.n_coef_params() + usize::from(order.has_mean());
    let n_eff = w.len().saturating_sub(t0);
    if n_eff < k + 2 {
        return Err(Error::Fit(format!(
            "order {order}: only {n_eff} effective observations for {k} parameters"
        )));
    }

    let problem = CssProblem { w: w.clone(), order: *order, t0 };
    let mut x0 = vec![0.0; order.n_coef_params()];
    if order.has_mean() {
        x0.push(w.iter().sum::<f64>() / w.len() as f64);
    }
    let x = if x0.is_empty() {
        x0
    } else {
        let obj = |x: &[f64]| problem.objective(x);
        nelder_mead(&obj, &x0, 0.1, 400 * x0.len())
    };

    let css: f64 = problem.residuals(&x).iter().map(|e| e * e).sum();
    if !css.is_finite() {
        return Err(Error::Fit(format!("order {order}: non-finite residual sum")));
    }
    let n = n_eff as f64;
    let aic = n * (css.max(1e-300) / n).ln() + 2.0 * (k as f64 + 1.0);
    let (ar, ma, seasonal_ar, seasonal_ma, mean) = unpack(order, &x);
    let fit = ArimaFit { order: *order, ar, ma, seasonal_ar, seasonal_ma, mean, aic };
    if !fit.all_finite() {
        return Err(Error::Fit(format!("order {order}: non-finite coefficients")));
    }
    Ok(fit)
}

/// Fit every candidate and keep the minimum-AIC fit (strictly smaller wins;
/// ties keep the earlier candidate, so with [`default_grid`] ties resolve to
/// the simplest order). Errors only when every candidate fails.
pub fn fit_candidates(values: &[f64], candidates: &[ArimaOrder]) -> Result<ArimaFit> {
    if candidates.is_empty() {
        return Err(Error::Config("arima: empty candidate list".into()));
    }
    for order in candidates {
        order.validate()?;
        if values.len() < 3 * order.s {
            return Err(Error::Contract(format!(
                "arima: series has {} points, order {order} requires at least {}",
                values.len(),
                3 * order.s
            )));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("arima: series contains non-finite values".into()));
    }

    let mut best: Option<ArimaFit> = None;
    let mut failures = Vec::new();
    for order in candidates {
        match fit_order(values, order) {
            Ok(fit) => {
                if best.as_ref().map_or(true, |b| fit.aic < b.aic) {
                    best = Some(fit);
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    best.ok_or_else(|| {
        Error::Fit(format!("all {} arima candidates failed: {}", candidates.len(), failures.join("; ")))
    })
}

/// One-step-ahead (iterated to `horizon`) forecast from a raw window. The
/// residual recursion is re-run over the window to warm up the MA terms, so
/// the window must cover [`ArimaOrder::required_window`].
pub fn predict(fit: &ArimaFit, window: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let order = &fit.order;
    if horizon < 1 {
        return Err(Error::Contract("arima predict: horizon must be >= 1".into()));
    }
    if window.len() < order.required_window() {
        return Err(Error::Contract(format!(
            "arima predict: window has {} values, order {order} needs {}",
            window.len(),
            order.required_window()
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("arima predict: window contains non-finite values".into()));
    }

    let mut levels = difference_levels(window, order);
    let lags = level_lags(order);
    let ar_lags = expand(&fit.ar, &fit.seasonal_ar, order.s, true);
    let ma_lags = expand(&fit.ma, &fit.seasonal_ma, order.s, false);

    // Warm up residuals over the observed differenced series.
    let w = levels.last().unwrap();
    let mut v: Vec<f64> = w.iter().map(|x| x - fit.mean).collect();
    let mut eps = vec![0.0; v.len()];
    for t in 0..v.len() {
        let mut e = v[t];
        for &(lag, c) in &ar_lags {
            if t >= lag {
                e -= c * v[t - lag];
            }
        }
        for &(lag, c) in &ma_lags {
            if t >= lag {
                e -= c * eps[t - lag];
            }
        }
        eps[t] = e;
    }

    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        // Future shocks are zero in expectation.
        let t = v.len();
        let mut vhat = 0.0;
        for &(lag, c) in &ar_lags {
            if t >= lag {
                vhat += c * v[t - lag];
            }
        }
        for &(lag, c) in &ma_lags {
            if t >= lag {
                vhat += c * eps[t - lag];
            }
        }
        v.push(vhat);
        eps.push(0.0);

        // Integrate back up the differencing chain.
        let mut value = vhat + fit.mean;
        let deepest = levels.len() - 1;
        levels[deepest].push(value);
        for li in (0..deepest).rev() {
            let lag = lags[li];
            let upper = &levels[li];
            value += upper[upper.len() - lag];
            levels[li].push(value);
        }
        out.push(value.max(0.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polynomial_expansion_matches_hand_computation() {
        // (1 − 0.5B)(1 − 0.3B²) with s=2, AR side:
        // v_t = 0.5 v_{t−1} + 0.3 v_{t−2} − 0.15 v_{t−3} + ε_t
        let lags = expand(&[0.5], &[0.3], 2, true);
        assert_eq!(lags, vec![(1, 0.5), (2, 0.3), (3, -0.15)]);
        // (1 + 0.5B)(1 + 0.3B²), MA side keeps plus signs and adds the cross.
        let lags = expand(&[0.5], &[0.3], 2, false);
        assert_eq!(lags, vec![(1, 0.5), (2, 0.3), (3, 0.15)]);
    }

    #[test]
    fn differencing_levels_invert_cleanly() {
        let order = ArimaOrder::new(0, 1, 0, 0, 1, 0, 4);
        let values: Vec<f64> = (0..20).map(|t| (t as f64 * 0.7).sin() * 3.0 + t as f64).collect();
        let levels = difference_levels(&values, &order);
        assert_eq!(levels.len(), 3);
        assert_eq!(levels[1].len(), values.len() - 4);
        assert_eq!(levels[2].len(), values.len() - 5);
        // Spot-check the composed difference.
        let t = 10;
        let expect = (values[t] - values[t - 4]) - (values[t - 1] - values[t - 5]);
        assert!((levels[2][t - 5] - expect).abs() < 1e-12);
    }

    #[test]
    fn ar1_recovery() {
        // Simulate a strongly autocorrelated AR(1); CSS should recover phi.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let phi = 0.8;
        let mut y = vec![0.0f64];
        for _ in 1..600 {
            let e = rng.gen::<f64>() - 0.5;
            y.push(phi * y.last().unwrap() + e);
        }
        let order = ArimaOrder::new(1, 0, 0, 0, 0, 0, 24);
        let fit = fit_order(&y, &order).unwrap();
        assert!((fit.ar[0] - phi).abs() < 0.08, "estimated {}", fit.ar[0]);
    }

    #[test]
    fn pure_seasonal_walk_selects_seasonal_differencing_and_predicts_exactly() {
        let base: Vec<f64> = (0..24).map(|h| 5.0 + (h as f64 - 12.0).abs()).collect();
        let series: Vec<f64> = (0..24 * 8).map(|t| base[t % 24]).collect();
        let fit = fit_candidates(&series, &default_grid()).unwrap();
        assert_eq!(fit.order.seasonal_d, 1, "selected {}", fit.order);
        assert_eq!(fit.order.n_coef_params(), 0, "selected {}", fit.order);
        // One-step predictions on the tail are exact.
        for t in 100..series.len() {
            let pred = predict(&fit, &series[..t], 1).unwrap();
            assert!((pred[0] - series[t]).abs() < 1e-9, "t={t}: {} vs {}", pred[0], series[t]);
        }
    }

    #[test]
    fn white_noise_keeps_the_model_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let series: Vec<f64> = (0..400).map(|_| 10.0 + rng.gen::<f64>()).collect();
        let fit = fit_candidates(&series, &default_grid()).unwrap();
        // Mean-reverting small models win on noise; differencing inflates the
        // residual variance and loses.
        assert!(fit.order.n_coef_params() <= 2, "selected {}", fit.order);
    }

    #[test]
    fn aic_selection_matches_brute_force_over_the_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let series: Vec<f64> = (0..240)
            .map(|t| 8.0 + 3.0 * ((t % 24) as f64 / 24.0 * std::f64::consts::TAU).sin() + 0.3 * rng.gen::<f64>())
            .collect();
        let grid = default_grid();
        let picked = fit_candidates(&series, &grid).unwrap();
        let mut best: Option<ArimaFit> = None;
        for order in &grid {
            if let Ok(fit) = fit_order(&series, order) {
                if best.as_ref().map_or(true, |b| fit.aic < b.aic) {
                    best = Some(fit);
                }
            }
        }
        let brute = best.unwrap();
        assert_eq!(picked.order, brute.order);
        assert_eq!(picked.aic.to_bits(), brute.aic.to_bits());
    }

    #[test]
    fn fitting_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let series: Vec<f64> =
            (0..300).map(|t| 4.0 + ((t % 24) as f64) * 0.2 + 0.2 * rng.gen::<f64>()).collect();
        let a = fit_candidates(&series, &default_grid()).unwrap();
        let b = fit_candidates(&series, &default_grid()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_series_is_rejected() {
        let err = fit_candidates(&[1.0; 50], &default_grid()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "{err}");
    }

    #[test]
    fn degenerate_order_is_rejected() {
        assert!(ArimaOrder::new(0, 0, 0, 0, 0, 0, 24).validate().is_err());
        assert!(ArimaOrder::new(1, 2, 0, 0, 2, 0, 24).validate().is_err());
        assert!(ArimaOrder::new(1, 0, 0, 0, 0, 0, 1).validate().is_err());
        assert!(ArimaOrder::new(0, 1, 0, 0, 1, 0, 24).validate().is_ok());
    }

    #[test]
    fn grid_is_sorted_simplest_first_and_excludes_degenerate() {
        let grid = default_grid();
        assert_eq!(grid.len(), 143); // 3·2·3·2·2·2 = 144 minus the degenerate order
        // Coefficient-free candidates lead, ordered by the tie-break key.
        assert_eq!(grid[0], ArimaOrder::new(0, 0, 0, 0, 1, 0, 24));
        assert_eq!(grid[1], ArimaOrder::new(0, 1, 0, 0, 0, 0, 24));
        assert_eq!(grid[2], ArimaOrder::new(0, 1, 0, 0, 1, 0, 24));
        let complexity: Vec<usize> = grid.iter().map(|o| o.n_coef_params()).collect();
        let mut sorted = complexity.clone();
        sorted.sort_unstable();
        assert_eq!(complexity, sorted);
    }
}
