//! Value syntax for config entries: numbers, grids and matrices.

use ibound_core::{Complex64, HermitianOperator};

/// `1.5`, `inf`, `-2e-3`.
pub fn real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    t.parse::<f64>().map_err(|_| format!("not a number: {t:?}"))
}

/// Comma list `0.1, 1, 10` or `linspace(a, b, n)` (both ends included).
pub fn grid(s: &str) -> Result<Vec<f64>, String> {
    let t = s.trim();
    if let Some(inner) = t.strip_prefix("linspace(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("linspace takes (start, stop, count), got {t:?}"));
        }
        let a = real(parts[0])?;
        let b = real(parts[1])?;
        let n: usize = parts[2].trim().parse().map_err(|_| format!("bad linspace count in {t:?}"))?;
        if !a.is_finite() || !b.is_finite() {
            return Err(format!("linspace ends must be finite in {t:?}"));
        }
        return match n {
            0 => Err(format!("linspace count must be positive in {t:?}")),
            1 => Ok(vec![a]),
            _ => Ok((0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()),
        };
    }
    if t.is_empty() {
        return Err("empty grid".into());
    }
    t.split(',').map(real).collect()
}

/// `3`, `-0.5i`, `1+2i`, `1e-3-4.5i`, `i`, `-i`.
pub fn complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("not a complex number: {s:?}");
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(real(&t).map_err(|_| bad())?, 0.0));
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let mut split = 0;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = k;
            break;
        }
    }
    let (re_part, im_part) = body.split_at(split);
    let re = if re_part.is_empty() { 0.0 } else { real(re_part).map_err(|_| bad())? };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => real(other).map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}

/// Rows separated by `;`, entries by `,`.
pub fn matrix(s: &str) -> Result<HermitianOperator, String> {
    let rows: Vec<Vec<Complex64>> = s
        .split(';')
        .map(|row| row.split(',').map(complex).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    HermitianOperator::from_rows(rows).map_err(|e| e.to_string())
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(grid("0.1, 1,10").unwrap(), vec![0.1, 1.0, 10.0]);
        assert_eq!(grid("linspace(0, 1, 5)").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(grid("linspace(2, 3, 1)").unwrap(), vec![2.0]);
        assert_eq!(grid("inf").unwrap(), vec![f64::INFINITY]);
        assert!(grid("").is_err());
        assert!(grid("1,,2").is_err());
        assert!(grid("linspace(0, 1)").is_err());
        assert!(grid("linspace(0, 1, 0)").is_err());
    }

    #[test]
    fn complex_entries() {
        assert_eq!(complex("3").unwrap(), Complex64::new(3.0, 0.0));
        assert_eq!(complex("-0.5i").unwrap(), Complex64::new(0.0, -0.5));
        assert_eq!(complex("1+2i").unwrap(), Complex64::new(1.0, 2.0));
        assert_eq!(complex("1e-3-4.5i").unwrap(), Complex64::new(1e-3, -4.5));
        assert_eq!(complex("2e+1+1e-1i").unwrap(), Complex64::new(20.0, 0.1));
        assert_eq!(complex("i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(complex(" - i").unwrap(), Complex64::new(0.0, -1.0));
        assert!(complex("1+").is_err());
        assert!(complex("x").is_err());
    }

    #[test]
    fn matrices() {
        let m = matrix("0,-1;-1,0").unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.entry(0, 1), Complex64::new(-1.0, 0.0));
        let y = matrix("0,-i;i,0").unwrap();
        assert_eq!(y.entry(1, 0), Complex64::new(0.0, 1.0));
        assert!(matrix("0,1;2,0").is_err());
        assert!(matrix("1,0,0;0,1").is_err());
    }

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 0.7615941559557649] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_real(0.5), "0.5");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
    }
}
