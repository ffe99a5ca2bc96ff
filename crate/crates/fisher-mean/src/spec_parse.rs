//! Compact textual forms for distributions and radius grids.
//!
//! A spec string is either inline JSON, a path to a JSON file, or one of
//!
//! ```text
//! gaussian:MU,SIGMA
//! laplace:MU,B
//! mixture:W,MU,SIGMA;W,MU,SIGMA;...
//! atoms:BASE_W,BASE_MU,BASE_SIGMA;W,LOC;W,LOC;...
//! sawtooth:MU,SIGMA,TOOTH_WIDTH[,TOOTH_MASS[,N_TEETH]]
//! points:W,LOC;W,LOC;...
//! ```
//!
//! which is exactly what [`DistributionSpec::label`] prints.

use std::path::Path;

use fisher_mean_core::DistributionSpec;

use crate::error::{CliError, Result};

pub fn parse_spec(text: &str) -> Result<DistributionSpec> {
    let text = text.trim();
    if text.starts_with('{') {
        return Ok(serde_json::from_str(text)?);
    }
    match text.split_once(':') {
        Some((kind, body)) if is_kind(kind) => parse_compact(kind, body),
        _ => {
            let path = Path::new(text);
            if path.is_file() {
                let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(serde_json::from_str(&raw)?)
            } else {
                Err(CliError::Parse(format!("unrecognized spec `{text}`")))
            }
        }
    }
}

fn is_kind(kind: &str) -> bool {
    matches!(kind, "gaussian" | "laplace" | "mixture" | "atoms" | "sawtooth" | "points")
}

fn numbers(group: &str) -> Result<Vec<f64>> {
    group
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Parse(format!("expected a number, found `{}`", s.trim())))
        })
        .collect()
}

fn exactly<const K: usize>(group: &str, what: &str) -> Result<[f64; K]> {
    let v = numbers(group)?;
    v.try_into().map_err(|v: Vec<f64>| CliError::Parse(format!("{what} takes {K} numbers, got {}", v.len())))
}

fn pairs(groups: &[&str]) -> Result<Vec<(f64, f64)>> {
    groups.iter().map(|g| exactly::<2>(g, "an atom").map(|[w, x]| (w, x))).collect()
}

fn parse_compact(kind: &str, body: &str) -> Result<DistributionSpec> {
    let groups: Vec<&str> = body.split(';').filter(|g| !g.trim().is_empty()).collect();
    let single = || -> Result<&str> {
        match groups.as_slice() {
            [g] => Ok(g),
            _ => Err(CliError::Parse(format!("`{kind}` takes a single parameter group"))),
        }
    };
    let spec = match kind {
        "gaussian" => {
            let [mu, sigma] = exactly(single()?, kind)?;
            DistributionSpec::gaussian(mu, sigma)
        }
        "laplace" => {
            let [mu, b] = exactly(single()?, kind)?;
            DistributionSpec::laplace(mu, b)
        }
        "mixture" => {
            let comps = groups
                .iter()
                .map(|g| exactly::<3>(g, "a mixture component").map(|[w, m, s]| (w, m, s)))
                .collect::<Result<Vec<_>>>()?;
            DistributionSpec::gaussian_mixture(&comps)
        }
        "atoms" => {
            let (base, rest) =
                groups.split_first().ok_or_else(|| CliError::Parse("`atoms` needs a base group".into()))?;
            let [bw, bmu, bs] = exactly(base, "the atoms base")?;
            DistributionSpec::gaussian_with_atoms(bw, bmu, bs, &pairs(rest)?)
        }
        "sawtooth" => {
            let v = numbers(single()?)?;
            let n_teeth = match v.get(4) {
                None => 41,
                Some(&k) if k >= 1.0 && k.fract() == 0.0 && k <= u32::MAX as f64 => k as u32,
                Some(&k) => {
                    return Err(CliError::Parse(format!("n_teeth must be a positive integer, got {k}")))
                }
            };
            match v.len() {
                3..=5 => DistributionSpec::gaussian_sawtooth(
                    v[0],
                    v[1],
                    v[2],
                    v.get(3).copied().unwrap_or(0.5),
                    n_teeth,
                ),
                n => return Err(CliError::Parse(format!("sawtooth takes 3 to 5 numbers, got {n}"))),
            }
        }
        "points" => DistributionSpec::point_masses(&pairs(&groups)?),
        _ => unreachable!(),
    };
    Ok(spec?)
}

/// Parses `a:b:logK` (K log-spaced points), `a:b:K` (K evenly spaced points)
/// or a comma-separated list.
pub fn parse_r_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let grid = if let [a, b, count] = text.split(':').collect::<Vec<_>>()[..] {
        let a: f64 = a.parse().map_err(|_| CliError::Parse(format!("bad grid start `{a}`")))?;
        let b: f64 = b.parse().map_err(|_| CliError::Parse(format!("bad grid end `{b}`")))?;
        let (log, count) = match count.strip_prefix("log") {
            Some(k) => (true, k),
            None => (false, count),
        };
        let k: usize = count.parse().map_err(|_| CliError::Parse(format!("bad grid size `{count}`")))?;
        if k == 0 || !(a > 0.0 && b >= a) || (k == 1 && a != b) {
            return Err(CliError::Parse(format!("invalid grid `{text}`")));
        }
        if k == 1 {
            vec![a]
        } else {
            (0..k)
                .map(|i| {
                    let t = i as f64 / (k - 1) as f64;
                    if i == 0 {
                        a
                    } else if i == k - 1 {
                        b
                    } else if log {
                        (a.ln() + t * (b.ln() - a.ln())).exp()
                    } else {
                        a + t * (b - a)
                    }
                })
                .collect()
        }
    } else {
        numbers(text)?
    };
    if grid.is_empty() || grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(CliError::Parse("radii must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Parse("radii must be sorted".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_forms() {
        assert_eq!(parse_spec("gaussian:0,1").unwrap(), DistributionSpec::gaussian(0.0, 1.0).unwrap());
        let saw = parse_spec("sawtooth:0,1,0.05").unwrap();
        assert_eq!(saw, DistributionSpec::gaussian_sawtooth(0.0, 1.0, 0.05, 0.5, 41).unwrap());
        let atoms = parse_spec("atoms:0.98,0,1;0.01,-10;0.01,10").unwrap();
        assert_eq!(atoms.atoms().len(), 2);
        assert!(parse_spec("gaussian:0").is_err());
        assert!(parse_spec("cauchy:0,1").is_err());
        assert!(parse_spec("mixture:0.7,0,1;0.3,2,1").is_err());
        assert!(parse_spec("sawtooth:0,1,0.05,0.5,4").is_err());
    }

    #[test]
    fn inline_json() {
        let spec = parse_spec(r#"{"kind":"laplace","mu":1.0,"b":2.0}"#).unwrap();
        assert_eq!(spec, DistributionSpec::laplace(1.0, 2.0).unwrap());
    }

    #[test]
    fn grids() {
        let g = parse_r_grid("0.005:0.5:log25").unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 0.005);
        assert_eq!(g[24], 0.5);
        assert!((g[12] - 0.05).abs() < 1e-15);
        assert_eq!(parse_r_grid("0.5,1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_r_grid("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(parse_r_grid("2,1").is_err());
        assert!(parse_r_grid("0:1:log3").is_err());
        assert!(parse_r_grid("-1").is_err());
    }
}
