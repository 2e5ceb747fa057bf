#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("degenerate 2x2 table: a row or column total is zero")]
    DegenerateTable,
}

/// Pearson's χ² test of independence on the table `[[a, b], [c, d]]`,
/// without continuity correction. Returns `(statistic, p_value)` with one
/// degree of freedom.
pub fn chi_square_2x2(a: u64, b: u64, c: u64, d: u64) -> Result<(f64, f64), StatsError> {
    let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
    let rows = [a + b, c + d];
    let cols = [a + c, b + d];
    if rows.iter().chain(cols.iter()).any(|&m| m == 0.0) {
        return Err(StatsError::DegenerateTable);
    }
    let n = a + b + c + d;
    let observed = [[a, b], [c, d]];
    let mut stat = 0.0;
    for (i, row) in observed.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            stat += (o - e) * (o - e) / e;
        }
    }
    Ok((stat, chi_square_sf_df1(stat)))
}

/// Survival function of the χ² distribution with one degree of freedom:
/// `P(X > x) = erfc(sqrt(x / 2))`.
pub fn chi_square_sf_df1(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    erfc((x / 2.0).sqrt())
}

/// Complementary error function for `x >= 0` (negative arguments use
/// `erfc(-x) = 2 - erfc(x)`). A positive-term series below 3, Lentz's
/// continued fraction above; both are good to ~1e-15 relative.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2^n x^(2n+1)) / (1*3*...*(2n+1))
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term > sum * 1e-17 {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x2).exp() * sum
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < TINY { TINY } else { d };
        c = x + a / c;
        c = if c.abs() < TINY { TINY } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}
