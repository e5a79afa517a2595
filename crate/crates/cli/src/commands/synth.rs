use std::fs;
use std::path::PathBuf;

use cosetica_core::eval::{generate_mixture, Distribution, Mixing, Mixture, MixtureSpec};

use crate::error::{CliError, Result};
use crate::io::{write_matrix, write_signals};

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub spec: MixtureSpec,
    pub out_dir: PathBuf,
}

/// One distribution name: `uniform`, `laplacian`, `gaussian`, `rademacher`
/// or `two_point:<p>`.
pub fn parse_distribution(name: &str) -> Result<Distribution> {
    let name = name.trim().to_ascii_lowercase();
    let d = match name.as_str() {
        "uniform" => Distribution::Uniform,
        "laplacian" | "laplace" => Distribution::Laplacian,
        "gaussian" | "normal" => Distribution::Gaussian,
        "rademacher" => Distribution::Rademacher,
        _ => {
            let p = name
                .strip_prefix("two_point:")
                .and_then(|p| p.parse::<f64>().ok())
                .filter(|p| *p > 0.0 && *p < 1.0)
                .ok_or_else(|| CliError::Usage(format!("unknown distribution {name:?}")))?;
            Distribution::TwoPoint(p)
        }
    };
    Ok(d)
}

/// A comma-separated list; a single name applies to every source.
pub fn parse_distributions(list: &str, n: usize) -> Result<Vec<Distribution>> {
    let dists = list
        .split(',')
        .map(parse_distribution)
        .collect::<Result<Vec<_>>>()?;
    match dists.len() {
        1 => Ok(vec![dists[0]; n]),
        k if k == n => Ok(dists),
        k => Err(CliError::Usage(format!(
            "{k} distributions given for {n} sources"
        ))),
    }
}

pub fn mixture_spec(
    sources: usize,
    dist: &str,
    samples: usize,
    cond: f64,
    seed: u64,
) -> Result<MixtureSpec> {
    if sources < 2 {
        return Err(CliError::Usage("need at least 2 sources".into()));
    }
    if cond.is_nan() || cond < 1.0 {
        return Err(CliError::Usage("condition target must be at least 1".into()));
    }
    Ok(MixtureSpec {
        distributions: parse_distributions(dist, sources)?,
        mixing: Mixing::RandomCondition(cond),
        samples,
        seed,
    })
}

/// Writes `mixed.csv`, `mixing.csv` and `sources.csv`.
pub fn synth(opts: &SynthOptions) -> Result<Mixture> {
    let mixture = generate_mixture(&opts.spec)?;
    fs::create_dir_all(&opts.out_dir).map_err(CliError::io(&opts.out_dir))?;
    write_signals(&opts.out_dir.join("mixed.csv"), &mixture.mixed)?;
    write_matrix(&opts.out_dir.join("mixing.csv"), &mixture.mixing)?;
    write_signals(&opts.out_dir.join("sources.csv"), &mixture.sources)?;
    Ok(mixture)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_lists() {
        assert_eq!(
            parse_distributions("uniform", 3).unwrap(),
            vec![Distribution::Uniform; 3]
        );
        assert_eq!(
            parse_distributions("uniform,Laplace,two_point:0.25", 3).unwrap(),
            vec![
                Distribution::Uniform,
                Distribution::Laplacian,
                Distribution::TwoPoint(0.25)
            ]
        );
        assert!(parse_distributions("uniform,cauchy", 2).is_err());
        assert!(parse_distributions("uniform,uniform", 3).is_err());
        assert!(parse_distribution("two_point:1.5").is_err());
    }

    #[test]
    fn one_source_is_refused() {
        assert!(matches!(
            mixture_spec(1, "uniform", 100, 2.0, 0),
            Err(CliError::Usage(_))
        ));
    }
}
