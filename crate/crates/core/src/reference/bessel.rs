//! Bessel functions of the first kind for integer and half-integer order.

use super::ReferenceError;

/// Below this argument the power series is used; its largest term stays
/// near 1e2 so the absolute rounding error is around 1e-14.
const SERIES_LIMIT: f64 = 8.0;

/// `Γ(a)` for `a = n/2`, `n ≥ 1`.
pub fn gamma_half_integer(a: f64) -> f64 {
    let twice = (2.0 * a).round();
    debug_assert!(twice >= 1.0 && (2.0 * a - twice).abs() < 1e-12);
    let mut n = twice as i64;
    let mut g = if n % 2 == 0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    // Walk down from a to 1 or 1/2, multiplying by (a-1), (a-2), ...
    let base = if n % 2 == 0 { 2 } else { 1 };
    while n > base {
        n -= 2;
        g *= n as f64 / 2.0;
    }
    g
}

fn check_order(nu: f64) -> Result<i64, ReferenceError> {
    let twice = 2.0 * nu;
    if (twice - twice.round()).abs() > 1e-12 || twice.round() < -1.0 {
        return Err(ReferenceError::DomainError(format!(
            "order {nu} is not an integer or half-integer >= -1/2"
        )));
    }
    Ok(twice.round() as i64)
}

/// `J_ν(x)` for `ν ∈ {-1/2, 0, 1/2, 1, ...}` and `x ≥ 0`.
///
/// Absolute error stays below 1e-13 for `x ≤ 100`.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64, ReferenceError> {
    let twice = check_order(nu)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(ReferenceError::DomainError(format!(
            "argument {x} must be finite and nonnegative"
        )));
    }
    if x == 0.0 {
        return match twice {
            -1 => Err(ReferenceError::DomainError(
                "J_{-1/2} is singular at 0".into(),
            )),
            0 => Ok(1.0),
            _ => Ok(0.0),
        };
    }
    if x <= SERIES_LIMIT {
        return Ok(series(nu, x));
    }
    if twice % 2 == 0 {
        Ok(miller_integer((twice / 2) as usize, x))
    } else {
        Ok(half_integer(twice, x))
    }
}

fn series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = half.powf(nu) / gamma_half_integer(nu + 1.0);
    let mut sum = term;
    for m in 1..200 {
        let m = m as f64;
        term *= -q / (m * (m + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Miller's backward recurrence normalised by `J_0 + 2 Σ J_{2k} = 1`.
fn miller_integer(n: usize, x: f64) -> f64 {
    let top = n.max(x as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut result = 0.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            result *= 1e-250;
            norm *= 1e-250;
        }
        let order = k - 1;
        if order == n {
            result = j;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * j;
        }
    }
    norm += j;
    result / norm
}

/// Half-integer orders from the closed forms of `J_{±1/2}`.
fn half_integer(twice: i64, x: f64) -> f64 {
    let c = (2.0 / (std::f64::consts::PI * x)).sqrt();
    let jm = c * x.cos();
    let j0 = c * x.sin();
    if twice == -1 {
        return jm;
    }
    if twice == 1 {
        return j0;
    }
    let nu = twice as f64 / 2.0;
    if nu < x {
        // Upward recurrence is stable while the order stays below x.
        let (mut a, mut b) = (jm, j0);
        let mut order = 0.5;
        while order < nu - 0.25 {
            let next = 2.0 * order / x * b - a;
            a = b;
            b = next;
            order += 1.0;
        }
        b
    } else {
        let top = nu.max(x);
        let start = (top + 20.0 + (40.0 * top).sqrt()).ceil();
        let mut jp1 = 0.0;
        let mut j = 1e-300;
        let mut order = start + 0.5;
        let mut result = 0.0;
        while order > 0.75 {
            let jm1 = 2.0 * order / x * j - jp1;
            jp1 = j;
            j = jm1;
            order -= 1.0;
            if j.abs() > 1e250 {
                j *= 1e-250;
                jp1 *= 1e-250;
                result *= 1e-250;
            }
            if (order - nu).abs() < 0.25 {
                result = j;
            }
        }
        // j now holds the unnormalised J_{1/2}, jp1 holds J_{3/2}.
        if j0.abs() > 0.1 * c {
            result * j0 / j
        } else {
            let unnorm_m = 1.0 / x * j - jp1;
            result * jm / unnorm_m
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Bessel's integral, trapezoid on a full period.
    fn integral_oracle(n: usize, x: f64) -> f64 {
        let m = 4096;
        let mut s = 0.0;
        for i in 0..m {
            let tau = 2.0 * PI * i as f64 / m as f64;
            s += (n as f64 * tau - x * tau.sin()).cos();
        }
        s / m as f64
    }

    #[test]
    fn integer_orders_match_integral_representation() {
        for n in 0..4 {
            for i in 0..400 {
                let x = 0.25 * i as f64 + 0.01;
                let got = bessel_j(n as f64, x).unwrap();
                let want = integral_oracle(n, x);
                assert!((got - want).abs() < 1e-13, "n={n} x={x} {got} {want}");
            }
        }
    }

    #[test]
    fn half_integer_closed_forms() {
        for i in 1..1000 {
            let x = 0.1 * i as f64;
            let c = (2.0 / (PI * x)).sqrt();
            let j12 = c * x.sin();
            let j32 = c * (x.sin() / x - x.cos());
            let j52 = c * ((3.0 / (x * x) - 1.0) * x.sin() - 3.0 * x.cos() / x);
            assert!((bessel_j(0.5, x).unwrap() - j12).abs() < 1e-12);
            assert!((bessel_j(1.5, x).unwrap() - j32).abs() < 1e-12, "x={x}");
            assert!((bessel_j(2.5, x).unwrap() - j52).abs() < 1e-12, "x={x}");
            assert!((bessel_j(-0.5, x).unwrap() - c * x.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn high_half_integer_order_uses_downward_path() {
        // Recurrence identity J_{ν-1} + J_{ν+1} = (2ν/x) J_ν across the switch.
        for &x in &[9.0, 10.5, 13.0] {
            let nu = 11.5;
            let l = bessel_j(nu - 1.0, x).unwrap() + bessel_j(nu + 1.0, x).unwrap();
            let r = 2.0 * nu / x * bessel_j(nu, x).unwrap();
            assert!((l - r).abs() < 1e-12, "x={x} {l} {r}");
        }
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_half_integer(0.5) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(1.5) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((gamma_half_integer(2.5) - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half_integer(4.0), 6.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bessel_j(0.3, 1.0).is_err());
        assert!(bessel_j(1.0, -1.0).is_err());
        assert!(bessel_j(-1.0, 1.0).is_err());
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
    }
}
