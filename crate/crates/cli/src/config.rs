//! Resolved run configuration: defaults, then a `key = value` file, then flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hintclust::synth::SynthConfig;
use hintclust::{HintOptions, SearchParams};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub t1: Option<PathBuf>,
    pub t2: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub k1: usize,
    pub k2: usize,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub weights1: Option<Vec<f64>>,
    pub weights2: Option<Vec<f64>>,
    pub split_retweet: bool,
    pub min_common: usize,
    pub link_threshold: f64,
    pub seed: u64,
    pub params: SearchParams,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let o = HintOptions::default();
        RunConfig {
            t1: None,
            t2: None,
            out: None,
            k1: o.k1,
            k2: o.k2,
            theta: o.theta,
            alpha: o.alpha,
            beta: o.beta,
            weights1: None,
            weights2: None,
            split_retweet: o.split_retweet,
            min_common: o.min_common,
            link_threshold: o.link_threshold,
            seed: o.seed,
            params: o.params,
            synth: SynthConfig::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| num(key, v.trim())).collect()
}

impl RunConfig {
    /// Sets one key. Keys use snake_case; dashes are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        let v = value.trim();
        let p = &mut self.params;
        let s = &mut self.synth;
        match k {
            "t1" => self.t1 = Some(v.into()),
            "t2" => self.t2 = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "k1" => self.k1 = num(k, v)?,
            "k2" => self.k2 = num(k, v)?,
            "theta" => self.theta = num(k, v)?,
            "alpha" => self.alpha = num(k, v)?,
            "beta" => self.beta = num(k, v)?,
            "weights1" => self.weights1 = Some(list(k, v)?),
            "weights2" => self.weights2 = Some(list(k, v)?),
            "split_retweet" => self.split_retweet = num(k, v)?,
            "min_common" => self.min_common = num(k, v)?,
            "link_threshold" => self.link_threshold = num(k, v)?,
            "seed" => self.seed = num(k, v)?,
            "rho1" => p.rho1 = num(k, v)?,
            "eta" => p.eta = num(k, v)?,
            "tau0" => p.tau0 = num(k, v)?,
            "tau_min" => p.tau_min = num(k, v)?,
            "tau_max" => p.tau_max = num(k, v)?,
            "max_inner" => p.max_inner = num(k, v)?,
            "tol_grad" => p.tol_grad = num(k, v)?,
            "tol_obj" => p.tol_obj = num(k, v)?,
            "max_outer" => p.max_outer = num(k, v)?,
            "k" => s.k = num(k, v)?,
            "n1" => s.n1 = num(k, v)?,
            "n2" => s.n2 = num(k, v)?,
            "vocab_per_cluster" => s.vocab_per_cluster = num(k, v)?,
            "shared_vocab" => s.shared_vocab = num(k, v)?,
            "p_in" => s.p_in = num(k, v)?,
            "p_out" => s.p_out = num(k, v)?,
            "words_per_doc1" => s.words_per_doc1 = num(k, v)?,
            "words_per_doc2" => s.words_per_doc2 = num(k, v)?,
            "anchor_rate" => s.anchor_rate = num(k, v)?,
            "entity_fraction" => s.entity_fraction = num(k, v)?,
            "noise_rate" => s.noise_rate = num(k, v)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `path`. `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                anyhow!("{}:{}: expected `key = value`", path.display(), no + 1)
            })?;
            self.set(key, value)
                .with_context(|| format!("{}:{}", path.display(), no + 1))?;
        }
        Ok(())
    }

    /// Defaults, then the optional file, then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.synth.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn hint_options(&self) -> HintOptions {
        HintOptions {
            k1: self.k1,
            k2: self.k2,
            theta: self.theta,
            alpha: self.alpha,
            beta: self.beta,
            weights1: self.weights1.clone(),
            weights2: self.weights2.clone(),
            split_retweet: self.split_retweet,
            min_common: self.min_common,
            link_threshold: self.link_threshold,
            seed: self.seed,
            params: self.params.clone(),
        }
    }

    pub fn require_path<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| anyhow!("missing required setting `{key}`"))
    }
}

/// `key=start:step:stop`, inclusive of `stop` up to rounding.
pub fn parse_sweep(arg: &str) -> Result<(String, Vec<f64>)> {
    let (key, range) = arg
        .split_once('=')
        .ok_or_else(|| anyhow!("sweep must look like key=start:step:stop"))?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|v| num("sweep", v.trim()))
        .collect::<Result<_>>()?;
    let [start, step, stop] = parts[..] else {
        bail!("sweep range must be start:step:stop");
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        bail!("sweep needs step > 0 and stop >= start");
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((key.trim().to_string(), (0..count).map(|i| start + i as f64 * step).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        fs::write(&file, "# comment\ntheta = 2.5\nk1 = 3\nmax-inner = 40\n").unwrap();
        let cfg = RunConfig::resolve(Some(&file), &[("theta".into(), "0.5".into())]).unwrap();
        assert_eq!((cfg.theta, cfg.k1, cfg.params.max_inner), (0.5, 3, 40));

        fs::write(&file, "thetta = 1\n").unwrap();
        assert!(RunConfig::resolve(Some(&file), &[]).is_err());
    }

    #[test]
    fn sweep_ranges() {
        let (k, v) = parse_sweep("theta=0:0.25:2").unwrap();
        assert_eq!(k, "theta");
        assert_eq!(v.len(), 9);
        assert_eq!(v[8], 2.0);
        assert!(parse_sweep("theta=1:0:2").is_err());
        assert!(parse_sweep("theta").is_err());
    }
}
