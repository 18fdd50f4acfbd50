//! Value parsers for flags that take more than a plain number.

/// A number, or `a-b` / `a+b` of two numbers (so `1-1e-8` works).
pub fn scalar(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return Ok(x);
    }
    // Split at the last +/- that is not a sign and not part of an exponent.
    let bytes = s.as_bytes();
    for i in (1..bytes.len()).rev() {
        let c = bytes[i];
        if (c == b'-' || c == b'+') && !matches!(bytes[i - 1], b'e' | b'E') {
            let (a, b) = (&s[..i], &s[i + 1..]);
            if let (Ok(a), Ok(b)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                return Ok(if c == b'-' { a - b } else { a + b });
            }
        }
    }
    Err(format!("not a number or a-b expression: {s:?}"))
}

/// `lo:hi`, or a single value meaning `lo = hi`.
pub fn range(s: &str) -> Result<(f64, f64), String> {
    match s.split_once(':') {
        Some((a, b)) => Ok((scalar(a)?, scalar(b)?)),
        None => {
            let x = scalar(s)?;
            Ok((x, x))
        }
    }
}

/// `b1:b2,b1:b2,...`; an empty string is an empty list.
pub fn cells(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| format!("cell {p:?} is not beta1:beta2"))?;
            Ok((scalar(a)?, scalar(b)?))
        })
        .collect()
}

/// `1,2,5` or an inclusive span `0..99`.
pub fn seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
        if a > b {
            return Err(format!("empty seed range {s:?}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| format!("bad seed {p:?}")))
        .collect()
}
