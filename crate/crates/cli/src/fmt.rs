/// `%.12g`: twelve significant digits, trailing zeros trimmed.
pub fn g12(x: f64) -> String {
    g(x, 12)
}

pub fn g(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.15), "0.15");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-2.5e-7), "-2.5e-07");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(g12(999999999999.9), "1e+12");
        assert_eq!(g12(0.0001), "0.0001");
        assert_eq!(g12(0.00001), "1e-05");
        assert_eq!(g12(100.0), "100");
    }
}
