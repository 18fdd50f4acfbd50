//! Scalar gradient sequences fed to the moment recurrences.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("cannot read gradient file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: not a decimal value: {text:?}")]
    Parse {
        path: PathBuf,
        line: usize,
        text: String,
    },
    #[error("gradient file {path} holds {available} values, {requested} requested")]
    TooShort {
        path: PathBuf,
        available: usize,
        requested: usize,
    },
    #[error("invalid source spec {0:?}; expected invsqrt, constant:C, uniform:LO:HI:SEED, file:PATH")]
    Spec(String),
    #[error("uniform source needs finite lo < hi, got [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },
}

/// Declarative description of a gradient sequence `g_1, g_2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientSource {
    /// `g_t = 1/sqrt(t)`.
    InvSqrt,
    Constant(f64),
    /// Independent uniform draws on `[lo, hi)` from a ChaCha8 stream.
    UniformRandom { lo: f64, hi: f64, seed: u64 },
    /// One decimal per line; blank lines and `#` lines are skipped.
    FromFile(PathBuf),
    /// An explicit sequence, used by fuzzers and scaled replays.
    Explicit(Vec<f64>),
}

impl GradientSource {
    /// The first `n` gradients.
    pub fn values(&self, n: usize) -> Result<Vec<f64>, SourceError> {
        match self {
            GradientSource::InvSqrt => Ok((1..=n).map(|t| 1.0 / (t as f64).sqrt()).collect()),
            GradientSource::Constant(c) => Ok(vec![*c; n]),
            GradientSource::UniformRandom { lo, hi, seed } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(SourceError::EmptyRange { lo: *lo, hi: *hi });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..n).map(|_| rng.random_range(*lo..*hi)).collect())
            }
            GradientSource::FromFile(path) => {
                let all = read_gradient_file(path)?;
                if all.len() < n {
                    return Err(SourceError::TooShort {
                        path: path.clone(),
                        available: all.len(),
                        requested: n,
                    });
                }
                Ok(all[..n].to_vec())
            }
            GradientSource::Explicit(xs) => {
                if xs.len() < n {
                    return Err(SourceError::TooShort {
                        path: PathBuf::from("<explicit>"),
                        available: xs.len(),
                        requested: n,
                    });
                }
                Ok(xs[..n].to_vec())
            }
        }
    }
}

/// Parses the gradient file format: one decimal per line, UTF-8, `#` comments.
pub fn parse_gradient_text(text: &str, path: &std::path::Path) -> Result<Vec<f64>, SourceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| SourceError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            text: line.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

fn read_gradient_file(path: &std::path::Path) -> Result<Vec<f64>, SourceError> {
    let text = std::fs::read_to_string(path).map_err(|source| SourceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_gradient_text(&text, path)
}

impl FromStr for GradientSource {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SourceError::Spec(s.to_string());
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "invsqrt" if rest.is_empty() => Ok(GradientSource::InvSqrt),
            "constant" => rest.parse().map(GradientSource::Constant).map_err(|_| bad()),
            "uniform" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let [lo, hi, seed] = parts.as_slice() else {
                    return Err(bad());
                };
                Ok(GradientSource::UniformRandom {
                    lo: lo.parse().map_err(|_| bad())?,
                    hi: hi.parse().map_err(|_| bad())?,
                    seed: seed.parse().map_err(|_| bad())?,
                })
            }
            "file" if !rest.is_empty() => Ok(GradientSource::FromFile(PathBuf::from(rest))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GradientSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradientSource::InvSqrt => write!(f, "invsqrt"),
            GradientSource::Constant(c) => write!(f, "constant:{c}"),
            GradientSource::UniformRandom { lo, hi, seed } => write!(f, "uniform:{lo}:{hi}:{seed}"),
            GradientSource::FromFile(p) => write!(f, "file:{}", p.display()),
            GradientSource::Explicit(xs) => write!(f, "explicit[{}]", xs.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn inv_sqrt_values() {
        let v = GradientSource::InvSqrt.values(4).unwrap();
        assert_eq!(v, vec![1.0, 1.0 / 2f64.sqrt(), 1.0 / 3f64.sqrt(), 0.5]);
    }

    #[test]
    fn uniform_is_seeded() {
        let a = GradientSource::UniformRandom { lo: -1.0, hi: 1.0, seed: 7 };
        let b = a.clone();
        let va = a.values(100).unwrap();
        assert_eq!(va, b.values(100).unwrap());
        assert!(va.iter().all(|x| (-1.0..1.0).contains(x)));
        let c = GradientSource::UniformRandom { lo: -1.0, hi: 1.0, seed: 8 };
        assert_ne!(va, c.values(100).unwrap());
    }

    #[test]
    fn file_format_skips_comments() {
        let text = "# header\n1.5\n\n  -2e-3 \n# tail\n";
        let v = parse_gradient_text(text, Path::new("x")).unwrap();
        assert_eq!(v, vec![1.5, -2e-3]);
        let err = parse_gradient_text("1\nabc\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, SourceError::Parse { line: 2, .. }));
    }

    #[test]
    fn parse_specs() {
        assert_eq!("invsqrt".parse::<GradientSource>().unwrap(), GradientSource::InvSqrt);
        assert_eq!("constant:1".parse::<GradientSource>().unwrap(), GradientSource::Constant(1.0));
        assert_eq!(
            "uniform:0:1:42".parse::<GradientSource>().unwrap(),
            GradientSource::UniformRandom { lo: 0.0, hi: 1.0, seed: 42 }
        );
        assert!("uniform:0:1".parse::<GradientSource>().is_err());
        assert!("gauss".parse::<GradientSource>().is_err());
        for s in ["invsqrt", "constant:2.5", "uniform:-1:1:3", "file:/tmp/g.txt"] {
            let src: GradientSource = s.parse().unwrap();
            assert_eq!(src.to_string(), s);
        }
    }

    #[test]
    fn short_file_is_an_error() {
        let src = GradientSource::Explicit(vec![1.0, 2.0]);
        assert!(matches!(src.values(3), Err(SourceError::TooShort { .. })));
    }
}
